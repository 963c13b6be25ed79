//! Without regularization, a per-state floor on the weights restores
//! consistency when every policy is covered.

use pro_rl::harness::{prepare, ExperimentConfig};
use pro_rl::oracle::{solve_unregularized, strong_concentrability_check};

fn main() -> pro_rl::Result<()> {
    let cfg = ExperimentConfig::from_json(
        r#"{"mdp": {"kind": "random", "num_states": 5, "num_actions": 2, "gamma": 0.7, "seed": 31},
            "data": {"kind": "behavior", "policy": {"kind": "uniform"}},
            "alpha": 0.0, "n": 100,
            "classes": {"num_distractors": 20,
                        "kind": {"kind": "perturbed", "value_scales": [0.5], "weight_scales": [0.3, 0.1, 0.03, 0.01]}}}"#,
    )?;
    let prep = prepare(&cfg)?;
    let d_opt = solve_unregularized(&prep.mdp)?.d;
    let check = strong_concentrability_check(&prep.mdp, &prep.data_dist, &d_opt, 1 << 16, None)?;
    println!("state ratios: upper {:.3}, lower {:.3}, holds {}", check.b_wu, check.b_wl, check.holds);
    for n in [100, 1000, 10000, 100000] {
        let regret: f64 = (0..10).map(|s| prep.run(n, n, s).map(|r| r.row.gap_unregularized)).sum::<pro_rl::Result<f64>>()? / 10.0;
        println!("n {n:>6}: mean regret {regret:.2e}");
    }
    Ok(())
}
