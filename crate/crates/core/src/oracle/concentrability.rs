//! Density-ratio bounds between occupancies.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mdp::{exact_occupancy, Occupancy, Policy, TabularMdp};

/// `(max ratio d_target / dD over covered cells, whether d_target is
/// absolutely continuous w.r.t. dD)`.
pub fn concentrability(d_target: &Occupancy, data_dist: &Occupancy) -> (f64, bool) {
    let mut ratio: f64 = 0.0;
    let mut feasible = true;
    for (t, b) in d_target.mass().iter().zip(data_dist.mass().iter()) {
        if *b > 0.0 {
            ratio = ratio.max(t / b);
        } else if *t > 1e-12 {
            feasible = false;
        }
    }
    (ratio, feasible)
}

/// How the all-policy maximum was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EnumerationMode {
    Enumerated { policies: usize },
    Sampled { policies: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrongConcentrability {
    /// `max_pi max_s d^pi(s) / dD(s)`.
    pub b_wu: f64,
    /// `min_s d_0(s) / dD(s)`.
    pub b_wl: f64,
    pub holds: bool,
    pub mode: EnumerationMode,
}

/// Checks the two-sided state-level ratio bounds over all policies.
///
/// Deterministic policies attain the per-state maximum of `d^pi(s)`, so they
/// are enumerated when `|A|^|S| <= budget`. Otherwise `sample` policies are
/// drawn at random if `allow_sampling`, and an error is returned if not.
pub fn strong_concentrability_check(
    mdp: &TabularMdp,
    data_dist: &Occupancy,
    d_opt: &Occupancy,
    budget: usize,
    allow_sampling: Option<(usize, u64)>,
) -> Result<StrongConcentrability> {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let data_states = data_dist.state_marginal();
    let opt_states = d_opt.state_marginal();
    let count = (na as f64).powi(ns as i32);
    let per_policy = |pi: &Policy| -> Result<f64> {
        let d = exact_occupancy(mdp, pi)?.state_marginal();
        Ok(ratio_max(&d, &data_states))
    };
    let (b_wu, mode) = if count <= budget as f64 {
        let total = count as usize;
        let best = (0..total)
            .into_par_iter()
            .map(|idx| per_policy(&decode_policy(idx, ns, na)))
            .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;
        (best, EnumerationMode::Enumerated { policies: total })
    } else if let Some((samples, seed)) = allow_sampling {
        let best = (0..samples)
            .into_par_iter()
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
                let actions: Vec<usize> = (0..ns).map(|_| rand::Rng::gen_range(&mut rng, 0..na)).collect();
                per_policy(&Policy::deterministic(&actions, na))
            })
            .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;
        (best, EnumerationMode::Sampled { policies: samples })
    } else {
        return Err(Error::EnumerationBudget { count, budget });
    };
    let b_wl = (0..ns)
        .map(|s| {
            if data_states[s] > 0.0 {
                opt_states[s] / data_states[s]
            } else if opt_states[s] > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .fold(f64::INFINITY, f64::min);
    let holds = b_wu.is_finite() && b_wl.is_finite() && b_wl > 0.0;
    Ok(StrongConcentrability { b_wu, b_wl, holds, mode })
}

fn ratio_max(d: &DVector<f64>, base: &DVector<f64>) -> f64 {
    d.iter()
        .zip(base.iter())
        .map(|(x, b)| {
            if *b > 0.0 {
                x / b
            } else if *x > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// The `idx`-th deterministic policy in base-`|A|` order (state 0 is the
/// least significant digit).
fn decode_policy(mut idx: usize, ns: usize, na: usize) -> Policy {
    let actions: Vec<usize> = (0..ns)
        .map(|_| {
            let a = idx % na;
            idx /= na;
            a
        })
        .collect();
    Policy::deterministic(&actions, na)
}

/// Exact `max_pi d^pi(s) / dD(s)` by value iteration with reward `1[s]` per
/// state. Used to cross-check the enumeration.
pub fn max_state_occupancy_ratio(mdp: &TabularMdp, data_dist: &Occupancy) -> Result<f64> {
    let ns = mdp.num_states();
    let data_states = data_dist.state_marginal();
    let mut best: f64 = 0.0;
    for target in 0..ns {
        let reward = nalgebra::DMatrix::from_fn(ns, mdp.num_actions(), |s, _| if s == target { 1.0 } else { 0.0 });
        let indicator = mdp.with_reward(reward)?;
        let sol = super::solve_unregularized(&indicator)?;
        let visit = (1.0 - mdp.gamma()) * mdp.init_dist().dot(&sol.v);
        let ratio = if data_states[target] > 0.0 {
            visit / data_states[target]
        } else if visit > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        best = best.max(ratio);
    }
    Ok(best)
}
