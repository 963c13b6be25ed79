//! Without regularization the objective cannot tell the good and bad weights
//! apart; with it, the estimator picks the right action.

use pro_rl::harness::{prepare, ExperimentConfig};
use pro_rl::mdp::{build_counterexample, CounterexampleInstance, ACTION_L, STATE_A};
use pro_rl::objective::population_lagrangian;
use pro_rl::regularizer::Regularizer;

fn main() -> pro_rl::Result<()> {
    let ce = build_counterexample(0.9, CounterexampleInstance::Second)?;
    let v = &ce.values.members()[0];
    let reg = Regularizer::default();
    for (name, w) in ["good", "bad"].iter().zip(ce.weights.members()) {
        println!("{name} weights: objective {:.12}", population_lagrangian(&ce.mdp, &ce.data_dist, &reg, 0.0, v, w)?);
    }

    for alpha in [0.0, 0.1] {
        let cfg = ExperimentConfig::from_json(&format!(
            r#"{{"mdp": {{"kind": "counterexample", "gamma": 0.9, "instance": 2}},
                "alpha": {alpha}, "n": 10000, "classes": {{"adversarial": true}}}}"#
        ))?;
        let report = prepare(&cfg)?.run(10_000, 10_000, 1)?;
        println!(
            "alpha {alpha}: P(L | A) = {:.4}, regret {:.4}",
            report.pi_hat.prob(STATE_A, ACTION_L),
            report.row.gap_unregularized
        );
    }
    Ok(())
}
