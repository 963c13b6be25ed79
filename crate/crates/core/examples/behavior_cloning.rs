//! Replaces the known behavior policy by cloning on a held-out split.

use pro_rl::harness::{run_pro_rl_bc, ExperimentConfig};

fn main() -> pro_rl::Result<()> {
    for n2 in [100, 1000, 10000] {
        let cfg = ExperimentConfig::from_json(&format!(
            r#"{{"mdp": {{"kind": "random", "num_states": 6, "num_actions": 3, "gamma": 0.8, "seed": 41}},
                "data": {{"kind": "behavior", "policy": {{"kind": "random", "seed": 42}}}},
                "alpha": 0.5, "n": 20000, "seed": 1,
                "classes": {{"num_distractors": 10}},
                "clone": {{"n2": {n2}, "policies": {{"num_random": 6, "seed": 43}}}}}}"#
        ))?;
        let r = run_pro_rl_bc(&cfg)?.row;
        println!(
            "n2 {n2:>6}: cloned distance {:.4} vs known-behavior {:.4}, sampling deviation {:.4}, clone term {:.3}",
            r.bc_policy_l1.unwrap(),
            r.policy_l1,
            r.bc_deviation.unwrap(),
            r.clone_term.unwrap()
        );
    }
    Ok(())
}
