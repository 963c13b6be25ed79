//! Poor coverage of the optimal policy: capping the weights competes with the
//! best policy the data can support.

use pro_rl::harness::{prepare, ExperimentConfig};

fn main() -> pro_rl::Result<()> {
    let cfg = ExperimentConfig::from_json(
        r#"{"mdp": {"kind": "random", "num_states": 6, "num_actions": 3, "gamma": 0.8, "seed": 21},
            "data": {"kind": "behavior", "policy": {"kind": "avoid_optimal", "optimal_mass": 0.02}},
            "alpha": 0.1, "cap": 3.0, "n": 10000,
            "classes": {"num_distractors": 20}}"#,
    )?;
    let prep = prepare(&cfg)?;
    println!("best return {:.4}, best within the cap at most {:.4}", prep.j_opt, prep.j_comparator.unwrap());
    for seed in 0..5 {
        let r = prep.run(10_000, 10_000, seed)?.row;
        println!(
            "seed {seed}: gap to capped comparator {:.4} <= {:.3}, largest weight {:.3}",
            r.gap_comparator.unwrap(),
            r.rhs_realized.unwrap(),
            r.w_hat_max
        );
    }
    Ok(())
}
