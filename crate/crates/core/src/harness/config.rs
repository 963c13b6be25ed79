//! JSON run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classes::DistractorKind;
use crate::error::{Error, Result};
use crate::mdp::MdpFile;
use crate::oracle::SolverPath;
use crate::regularizer::Regularizer;

/// Where the MDP comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MdpSource {
    Random { num_states: usize, num_actions: usize, gamma: f64, seed: u64 },
    File { path: PathBuf },
    Inline { mdp: MdpFile },
    /// The two-step instance on which the unregularized objective ties a good
    /// and a bad weight function. `instance` is 1 or 2.
    Counterexample { gamma: f64, instance: u8 },
    /// Three states with duplicated optimal actions.
    TiedActions,
}

/// How the behavior policy is chosen when the data distribution is its
/// discounted occupancy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BehaviorSpec {
    Uniform,
    Random { seed: u64 },
    /// Puts `optimal_mass` on the unregularized optimal action and spreads the
    /// rest evenly over the others.
    AvoidOptimal { optimal_mass: f64 },
    Rows { rows: Vec<Vec<f64>> },
}

/// The data distribution over `(s, a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSpec {
    /// Discounted occupancy of a behavior policy.
    Behavior { policy: BehaviorSpec },
    /// Any distribution over `(s, a)`; the behavior policy is its conditional.
    Explicit { mass: Vec<Vec<f64>> },
    /// The distribution shipped with a built-in MDP source.
    Builtin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassConfig {
    pub num_distractors: usize,
    pub kind: DistractorKind,
    /// Defaults to the sup-norm bound on the regularized optimal values.
    pub value_bound: Option<f64>,
    /// Defaults to the cap when capped, else `weight_scale` times the largest
    /// target weight.
    pub weight_bound: Option<f64>,
    pub weight_scale: f64,
    /// Replaces the target pair by a shifted copy.
    pub misspecification: Option<f64>,
    /// Per-state lower bound on the behavior-averaged weight. Runs without
    /// regularization always enforce one; it defaults to the exact ratio of
    /// the optimal state occupancy to the data's.
    pub floor: Option<f64>,
    /// Lists the bad counterexample weights first.
    pub adversarial: bool,
    /// Seed for distractors; mixed with the run seed.
    pub seed: u64,
}

impl Default for ClassConfig {
    fn default() -> Self {
        Self {
            num_distractors: 0,
            kind: DistractorKind::Uniform,
            value_bound: None,
            weight_bound: None,
            weight_scale: 1.25,
            misspecification: None,
            floor: None,
            adversarial: false,
            seed: 0,
        }
    }
}

/// Allowed suboptimality of the returned pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slacks {
    pub eps_ov: f64,
    pub eps_ow: f64,
}

/// Policy class for the cloning step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyClassSpec {
    /// Adds the regularized optimal policy.
    pub include_target: bool,
    pub include_behavior: bool,
    pub num_random: usize,
    pub seed: u64,
}

impl Default for PolicyClassSpec {
    fn default() -> Self {
        Self { include_target: true, include_behavior: true, num_random: 4, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CloneConfig {
    /// Fraction of the data used for estimation; the rest clones.
    pub split: f64,
    /// Fixes the cloning sample size; estimation then uses all `n` samples.
    pub n2: Option<usize>,
    pub policies: PolicyClassSpec,
}

impl Default for CloneConfig {
    fn default() -> Self {
        Self { split: 0.9, n2: None, policies: PolicyClassSpec::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    #[default]
    Empirical,
    /// Infinite data: the saddle is taken on the exact objective.
    Population,
}

/// One point of an experiment: MDP, data, estimator settings and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mdp: MdpSource,
    /// Defaults to the builtin data of built-in sources and to the uniform
    /// behavior policy otherwise.
    #[serde(default)]
    pub data: Option<DataSpec>,
    pub alpha: f64,
    #[serde(default)]
    pub regularizer: Regularizer,
    #[serde(default)]
    pub classes: ClassConfig,
    pub n: usize,
    /// Defaults to `n`.
    #[serde(default)]
    pub n0: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Upper bound on the weights of the learned occupancy.
    #[serde(default)]
    pub cap: Option<f64>,
    #[serde(default)]
    pub inexact: Option<Slacks>,
    /// Present when the behavior policy is unknown and is replaced by cloning.
    #[serde(default)]
    pub clone: Option<CloneConfig>,
    #[serde(default)]
    pub objective: ObjectiveKind,
    #[serde(default = "default_solver")]
    pub solver: SolverPath,
}

fn default_delta() -> f64 {
    0.1
}

fn default_solver() -> SolverPath {
    SolverPath::Newton
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn n0(&self) -> usize {
        self.n0.unwrap_or(self.n)
    }

    fn has_builtin_data(&self) -> bool {
        matches!(self.mdp, MdpSource::Counterexample { .. } | MdpSource::TiedActions)
    }

    pub fn data_spec(&self) -> DataSpec {
        match &self.data {
            Some(d) => d.clone(),
            None if self.has_builtin_data() => DataSpec::Builtin,
            None => DataSpec::Behavior { policy: BehaviorSpec::Uniform },
        }
    }

    pub fn is_counterexample(&self) -> bool {
        matches!(self.mdp, MdpSource::Counterexample { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        self.regularizer.validate()?;
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be finite and >= 0");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta must lie in (0, 1)");
        }
        let data = self.data_spec();
        match (&data, self.has_builtin_data()) {
            (DataSpec::Builtin, false) => return bad("builtin data needs a built-in MDP source"),
            (DataSpec::Behavior { .. } | DataSpec::Explicit { .. }, true) => {
                return bad("built-in MDP sources use their builtin data")
            }
            _ => {}
        }
        let behavior_data = matches!(data, DataSpec::Behavior { .. });
        if self.alpha == 0.0 && !self.is_counterexample() {
            if !behavior_data {
                return bad("runs without regularization need behavior-occupancy data");
            }
            if self.cap.is_some() {
                return bad("a weight cap needs alpha > 0");
            }
            if self.clone.is_some() {
                return bad("cloning needs alpha > 0");
            }
        }
        if let Some(cap) = self.cap {
            if !(cap > 0.0 && cap.is_finite()) {
                return bad("cap must be positive");
            }
            if !behavior_data {
                return bad("a weight cap needs behavior-occupancy data");
            }
        }
        if let Some(f) = self.classes.floor {
            if !(f > 0.0) {
                return bad("floor must be positive");
            }
        }
        if !(self.classes.weight_scale >= 1.0) {
            return bad("weight_scale must be >= 1");
        }
        if let Some(s) = &self.inexact {
            if !(s.eps_ov >= 0.0 && s.eps_ow >= 0.0) {
                return bad("slacks must be >= 0");
            }
        }
        if let Some(c) = &self.clone {
            if !(c.split > 0.0 && c.split < 1.0) && c.n2.is_none() {
                return bad("clone split must lie in (0, 1)");
            }
            if c.n2 == Some(0) {
                return bad("cloning sample must be nonempty");
            }
        }
        if self.objective == ObjectiveKind::Empirical && self.n == 0 {
            return bad("n must be >= 1");
        }
        if self.is_counterexample() && self.clone.is_some() {
            return bad("the counterexample runs without cloning");
        }
        Ok(())
    }

    /// Hash of everything except the seed, for grouping rows across seeds.
    pub fn config_hash(&self) -> String {
        let mut c = self.clone();
        c.seed = 0;
        let text = serde_json::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        hex::encode(&digest[..8])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ExperimentConfig {
        ExperimentConfig::from_json(
            r#"{"mdp": {"kind": "random", "num_states": 4, "num_actions": 2, "gamma": 0.9, "seed": 1},
                "alpha": 0.5, "n": 100}"#,
        )
        .unwrap()
    }

    #[test]
    fn defaults_fill_in() {
        let c = base();
        assert_eq!(c.n0(), 100);
        assert_eq!(c.delta, 0.1);
        assert_eq!(c.data_spec(), DataSpec::Behavior { policy: BehaviorSpec::Uniform });
        assert_eq!(c.solver, SolverPath::Newton);
    }

    #[test]
    fn hash_ignores_seed() {
        let a = base();
        let mut b = a.clone();
        b.seed = 9;
        assert_eq!(a.config_hash(), b.config_hash());
        b.alpha = 0.4;
        assert_ne!(a.config_hash(), b.config_hash());
    }

    #[test]
    fn rejects_inconsistent_variants() {
        let mut c = base();
        c.alpha = 0.0;
        c.data = Some(DataSpec::Explicit { mass: vec![vec![0.125; 2]; 4] });
        assert!(c.validate().is_err());
        let mut c = base();
        c.cap = Some(0.0);
        assert!(c.validate().is_err());
        let mut c = base();
        c.data = Some(DataSpec::Builtin);
        assert!(c.validate().is_err());
        let tied = r#"{"mdp": {"kind": "tied_actions"}, "alpha": 0.1, "n": 5}"#;
        assert_eq!(ExperimentConfig::from_json(tied).unwrap().data_spec(), DataSpec::Builtin);
        assert!(ExperimentConfig::from_json(r#"{"mdp": {"kind": "tied_actions"}, "alpha": 0.1, "n": 5, "bogus": 1}"#).is_err());
    }
}
