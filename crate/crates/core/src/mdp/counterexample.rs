//! A two-step decision problem on which the unregularized objective cannot
//! tell a good weight function from a bad one.
//!
//! States are `A = 0`, `B = 1`, `C = 2` and an absorbing terminal `T = 3`.
//! From `A`, action `L = 0` leads to `B` and action `R = 1` leads to `C`.
//! Both actions at `B` pay 1 and move to `T`. At `C` exactly one action pays
//! 1 (which one depends on the instance) and both move to `T`. The data
//! never visits `C`, so the two instances look identical to the learner.

use nalgebra::DMatrix;

use super::{exact_occupancy, Occupancy, Policy, TabularMdp};
use crate::classes::{BoundMode, ValueClass, WeightClass};
use crate::error::{Error, Result};
use crate::oracle::solve_unregularized;

pub const STATE_A: usize = 0;
pub const STATE_B: usize = 1;
pub const STATE_C: usize = 2;
pub const STATE_T: usize = 3;
pub const ACTION_L: usize = 0;
pub const ACTION_R: usize = 1;

/// Which action pays at state `C`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CounterexampleInstance {
    /// Action 0 pays at `C`.
    First,
    /// Action 1 pays at `C`.
    Second,
}

impl TryFrom<u8> for CounterexampleInstance {
    type Error = Error;

    fn try_from(id: u8) -> Result<Self> {
        match id {
            1 => Ok(Self::First),
            2 => Ok(Self::Second),
            _ => Err(Error::InvalidArgument(format!("counterexample instance must be 1 or 2, got {id}"))),
        }
    }
}

/// The MDP, its data distribution and the two-member weight class.
#[derive(Debug, Clone)]
pub struct Counterexample {
    pub mdp: TabularMdp,
    pub data_dist: Occupancy,
    /// Holds the unregularized optimal values only.
    pub values: ValueClass,
    /// `[w_good, w_bad]`: `w_good` is the occupancy ratio of going left at
    /// `A`; `w_bad` moves that mass onto the right action.
    pub weights: WeightClass,
    /// Behavior policy implied by the data distribution.
    pub behavior: Policy,
}

impl Counterexample {
    /// The weight class with the bad member listed first.
    pub fn adversarial_weights(&self) -> WeightClass {
        self.weights.reversed()
    }

    /// Goes right at `A` and acts uniformly elsewhere.
    pub fn right_policy(&self) -> Policy {
        let mut rows = vec![vec![0.5, 0.5]; 4];
        rows[STATE_A] = vec![0.0, 1.0];
        Policy::from_rows(rows).expect("valid rows")
    }

    /// Goes left at `A` and acts uniformly elsewhere.
    pub fn left_policy(&self) -> Policy {
        let mut rows = vec![vec![0.5, 0.5]; 4];
        rows[STATE_A] = vec![1.0, 0.0];
        Policy::from_rows(rows).expect("valid rows")
    }
}

pub fn build_counterexample(gamma: f64, instance: CounterexampleInstance) -> Result<Counterexample> {
    let to = |target: usize| {
        let mut row = vec![0.0; 4];
        row[target] = 1.0;
        row
    };
    let transition = vec![
        vec![to(STATE_B), to(STATE_C)],
        vec![to(STATE_T), to(STATE_T)],
        vec![to(STATE_T), to(STATE_T)],
        vec![to(STATE_T), to(STATE_T)],
    ];
    let c_reward = match instance {
        CounterexampleInstance::First => vec![1.0, 0.0],
        CounterexampleInstance::Second => vec![0.0, 1.0],
    };
    let reward = vec![vec![0.0, 0.0], vec![1.0, 1.0], c_reward, vec![0.0, 0.0]];
    // All episodes start at A; a positive start mass at C would force the
    // learner to act on a state the data never covers.
    let mdp = TabularMdp::with_sparse_init(gamma, transition, reward, vec![1.0, 0.0, 0.0, 0.0])?;

    let sixth = 1.0 / 6.0;
    let data_mass = DMatrix::from_row_slice(4, 2, &[sixth, sixth, sixth, sixth, 0.0, 0.0, sixth, sixth]);
    let data_dist = Occupancy::new(data_mass)?;
    let behavior = data_dist.conditional_policy();

    let v0 = solve_unregularized(&mdp)?.v;
    let values = ValueClass::new(vec![v0], 1.0 / (1.0 - gamma), BoundMode::Reject)?;

    let mut rows = vec![vec![0.5, 0.5]; 4];
    rows[STATE_A] = vec![1.0, 0.0];
    let left = Policy::from_rows(rows)?;
    let d_left = exact_occupancy(&mdp, &left)?;
    let w_good = DMatrix::from_fn(4, 2, |s, a| {
        let b = data_dist.get(s, a);
        if b > 0.0 {
            d_left.get(s, a) / b
        } else {
            0.0
        }
    });
    let mut w_bad = w_good.clone();
    w_bad[(STATE_A, ACTION_R)] = w_good[(STATE_A, ACTION_L)];
    w_bad[(STATE_A, ACTION_L)] = 0.0;
    let bound = w_good.max();
    let weights = WeightClass::new(vec![w_good, w_bad], bound, BoundMode::Reject)?;

    Ok(Counterexample { mdp, data_dist, values, weights, behavior })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{flow_residual, policy_return};
    use nalgebra::DVector;

    /// `T = 0`, `B = C = 1`, `A = gamma`.
    fn closed_form_values(gamma: f64) -> DVector<f64> {
        DVector::from_vec(vec![gamma, 1.0, 1.0, 0.0])
    }

    #[test]
    fn instances_differ_only_at_c() {
        let a = build_counterexample(0.9, CounterexampleInstance::First).unwrap();
        let b = build_counterexample(0.9, CounterexampleInstance::Second).unwrap();
        for s in 0..4 {
            for act in 0..2 {
                assert_eq!(a.mdp.next_dist(s, act), b.mdp.next_dist(s, act));
                if s != STATE_C {
                    assert_eq!(a.mdp.r(s, act), b.mdp.r(s, act));
                }
            }
        }
        assert_ne!(a.mdp.r(STATE_C, 0), b.mdp.r(STATE_C, 0));
        assert_eq!(a.data_dist, b.data_dist);
    }

    #[test]
    fn data_misses_c() {
        let ce = build_counterexample(0.9, CounterexampleInstance::First).unwrap();
        assert_eq!(ce.data_dist.get(STATE_C, 0), 0.0);
        assert_eq!(ce.data_dist.get(STATE_C, 1), 0.0);
        assert!((ce.data_dist.total() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn optimal_values_match_closed_form() {
        for gamma in [0.5, 0.9, 0.99] {
            let ce = build_counterexample(gamma, CounterexampleInstance::Second).unwrap();
            let v0 = &ce.values.members()[0];
            assert!((v0 - closed_form_values(gamma)).amax() < 1e-12);
        }
    }

    #[test]
    fn bad_weights_break_the_flow() {
        let ce = build_counterexample(0.9, CounterexampleInstance::First).unwrap();
        let occ = |w: &DMatrix<f64>| Occupancy::from_weights(w, &ce.data_dist);
        assert!(flow_residual(&ce.mdp, &occ(&ce.weights.members()[0])) < 1e-12);
        assert!(flow_residual(&ce.mdp, &occ(&ce.weights.members()[1])) > 0.05);
    }

    #[test]
    fn left_is_optimal() {
        let ce = build_counterexample(0.9, CounterexampleInstance::First).unwrap();
        let j_left = policy_return(&ce.mdp, &ce.left_policy()).unwrap();
        assert!((j_left - 0.1 * 0.9).abs() < 1e-12);
        let j_right = policy_return(&ce.mdp, &ce.right_policy()).unwrap();
        assert!((j_right - 0.1 * 0.9 * 0.5).abs() < 1e-12);
        assert!(CounterexampleInstance::try_from(3).is_err());
    }
}
