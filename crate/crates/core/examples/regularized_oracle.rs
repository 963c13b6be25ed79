//! Solves the regularized occupancy problem exactly with both solvers and
//! checks the certificates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pro_rl::bounds::value_bound;
use pro_rl::mdp::{exact_occupancy, policy_return, Policy, TabularMdp};
use pro_rl::oracle::{concentrability, solve_regularized, solve_regularized_with, solve_unregularized, SolveOptions};
use pro_rl::regularizer::Regularizer;

fn main() -> pro_rl::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mdp = TabularMdp::random(6, 3, 0.85, &mut rng);
    let behavior = Policy::random(6, 3, &mut rng);
    let data = exact_occupancy(&mdp, &behavior)?;
    let reg = Regularizer::default();
    let j_opt = policy_return(&mdp, &solve_unregularized(&mdp)?.pi)?;

    for alpha in [1.0, 0.3, 0.1, 0.03] {
        let sol = solve_regularized(&mdp, &data, &reg, alpha, None)?;
        let check = solve_regularized_with(&mdp, &data, &reg, alpha, None, SolveOptions::extragradient())?;
        let (_, b_fprime) = reg.bounds(sol.max_weight())?;
        let (ratio, _) = concentrability(&sol.d_star, &data);
        println!(
            "alpha {alpha:<5} kkt {:.1e}  |v| {:.3} <= {:.3}  solvers differ {:.1e}  max ratio {ratio:.2}  return {:.4} of {j_opt:.4}",
            sol.kkt_residual,
            sol.v_star.amax(),
            value_bound(alpha, b_fprime, mdp.gamma()),
            (&sol.w_star - &check.w_star).amax(),
            policy_return(&mdp, &sol.pi_star)?,
        );
    }

    let capped = solve_regularized(&mdp, &data, &reg, 0.1, Some(1.5))?;
    println!("capped at 1.5: largest weight {:.4}", capped.max_weight());
    Ok(())
}
