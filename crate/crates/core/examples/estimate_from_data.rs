//! One estimation run: sample data, pick the saddle point over finite
//! classes, extract a policy and compare with the exact target.

use pro_rl::harness::{run_pro_rl, ExperimentConfig};

fn main() -> pro_rl::Result<()> {
    let cfg = ExperimentConfig::from_json(
        r#"{"mdp": {"kind": "random", "num_states": 8, "num_actions": 3, "gamma": 0.8, "seed": 5},
            "data": {"kind": "behavior", "policy": {"kind": "random", "seed": 6}},
            "alpha": 0.3, "n": 20000, "seed": 2,
            "classes": {"num_distractors": 20,
                        "kind": {"kind": "perturbed", "value_scales": [0.5], "weight_scales": [0.3, 0.1, 0.03, 0.01]}}}"#,
    )?;
    let r = run_pro_rl(&cfg)?.row;
    println!("selected weight #{} and value #{}", r.w_hat_index, r.v_hat_index);
    println!("return {:.5} vs target {:.5} (gap {:.2e})", r.j_hat, r.j_target, r.realized_gap);
    println!("weight error {:.3e}, policy distance {:.3e}", r.weight_error, r.policy_l1);
    println!("largest objective deviation {:.3e}, statistical error {:.3}", r.max_deviation, r.eps_stat.unwrap());
    println!("gap bound with realized deviation {:.4}", r.rhs_realized.unwrap());
    Ok(())
}
