//! As regularization vanishes the solution freezes on the least-divergent
//! optimal occupancy while the values drift linearly.

use pro_rl::mdp::instances::tied_actions;
use pro_rl::oracle::{lp_stability_sweep, min_divergence_optimal_weights};
use pro_rl::regularizer::Regularizer;

fn main() -> pro_rl::Result<()> {
    let (mdp, data) = tied_actions();
    let reg = Regularizer::default();
    let sweep = lp_stability_sweep(&mdp, &data, &reg, &[0.2, 0.1, 0.05, 0.02, 0.01, 0.005])?;
    for row in &sweep.rows {
        println!("alpha {:<6} value drift {:.6}", row.alpha, row.v_gap);
    }
    let limit = min_divergence_optimal_weights(&mdp, &data, &reg)?;
    println!("stable over the last {} points, slope {:.4}, R^2 {:.6}", sweep.stable_len, sweep.slope, sweep.r_squared);
    println!("distance to the least-divergent optimum {:.1e}", (sweep.limit_weights() - limit).amax());
    Ok(())
}
