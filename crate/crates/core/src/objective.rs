//! The regularized Lagrangian, in its population form (exact expectations
//! from a known MDP) and its empirical form (averages over a dataset).
//!
//! Both forms share one structure:
//!
//! ```text
//! L(v, w) = (1 - gamma) * init_mean(v) - alpha * sum base(s,a) f(w(s,a))
//!           + sum w(s,a) * weighted_residual(v)(s,a)
//! ```
//!
//! where `base` is the data distribution (population) or the empirical cell
//! frequencies, and `weighted_residual(v) = base ⊙ e_v`. Cells with zero base
//! mass drop out of every term, which is the convention that `w` is zero
//! off the data support.

use nalgebra::{DMatrix, DVector};

use crate::dataset::{OfflineDataset, Transition};
use crate::error::{Error, Result};
use crate::mdp::{dot, Occupancy, TabularMdp};
use crate::regularizer::Regularizer;

/// Expectation terms that determine a Lagrangian.
pub trait LagrangianTerms: Sync {
    fn gamma(&self) -> f64;
    /// Measure over `(s, a)` weighting the penalty and residual terms.
    fn base(&self) -> &DMatrix<f64>;
    /// Mean of `v` under the initial-state distribution (or its samples).
    fn init_mean(&self, v: &DVector<f64>) -> f64;
    /// `base(s,a) * e_v(s,a)`, with the residual averaged over next states.
    fn weighted_residual(&self, v: &DVector<f64>) -> DMatrix<f64>;

    /// `sum base(s,a) f(w(s,a))`.
    fn penalty(&self, reg: &Regularizer, w: &DMatrix<f64>) -> f64 {
        self.base()
            .iter()
            .zip(w.iter())
            .filter(|(b, _)| **b > 0.0)
            .map(|(b, x)| b * reg.eval(*x))
            .sum()
    }

    /// Full Lagrangian value.
    fn lagrangian(&self, reg: &Regularizer, alpha: f64, v: &DVector<f64>, w: &DMatrix<f64>) -> f64 {
        let coupling = self.weighted_residual(v).component_mul(w).sum();
        self.lagrangian_from_parts(self.init_mean(v), coupling, self.penalty(reg, w), alpha)
    }

    fn lagrangian_from_parts(&self, init_mean: f64, coupling: f64, penalty: f64, alpha: f64) -> f64 {
        let reg_term = if alpha == 0.0 { 0.0 } else { alpha * penalty };
        (1.0 - self.gamma()) * init_mean - reg_term + coupling
    }
}

/// Exact expectations under a known MDP and data distribution.
#[derive(Debug, Clone)]
pub struct PopulationObjective<'a> {
    mdp: &'a TabularMdp,
    data_dist: &'a Occupancy,
}

impl<'a> PopulationObjective<'a> {
    pub fn new(mdp: &'a TabularMdp, data_dist: &'a Occupancy) -> Result<Self> {
        if data_dist.mass().shape() != (mdp.num_states(), mdp.num_actions()) {
            return Err(Error::Shape("data distribution does not match the MDP".into()));
        }
        Ok(Self { mdp, data_dist })
    }

    pub fn mdp(&self) -> &TabularMdp {
        self.mdp
    }

    pub fn data_dist(&self) -> &Occupancy {
        self.data_dist
    }
}

impl LagrangianTerms for PopulationObjective<'_> {
    fn gamma(&self) -> f64 {
        self.mdp.gamma()
    }

    fn base(&self) -> &DMatrix<f64> {
        self.data_dist.mass()
    }

    fn init_mean(&self, v: &DVector<f64>) -> f64 {
        self.mdp.init_dist().dot(v)
    }

    fn weighted_residual(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let base = self.data_dist.mass();
        DMatrix::from_fn(self.mdp.num_states(), self.mdp.num_actions(), |s, a| {
            let b = base[(s, a)];
            if b > 0.0 {
                b * (self.mdp.r(s, a) + self.mdp.gamma() * dot(self.mdp.next_dist(s, a), v.as_slice()) - v[s])
            } else {
                0.0
            }
        })
    }
}

/// Sample averages over a dataset, evaluated through aggregated counts so a
/// single evaluation costs `O(|S||A| + distinct transitions)`.
#[derive(Debug, Clone)]
pub struct EmpiricalObjective<'a> {
    data: &'a OfflineDataset,
    base: DMatrix<f64>,
}

impl<'a> EmpiricalObjective<'a> {
    pub fn new(data: &'a OfflineDataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Empty("transition dataset"));
        }
        if data.num_init() == 0 {
            return Err(Error::Empty("initial-state dataset"));
        }
        let base = &data.stats().counts / data.len() as f64;
        Ok(Self { data, base })
    }
}

impl LagrangianTerms for EmpiricalObjective<'_> {
    fn gamma(&self) -> f64 {
        self.data.gamma()
    }

    fn base(&self) -> &DMatrix<f64> {
        &self.base
    }

    fn init_mean(&self, v: &DVector<f64>) -> f64 {
        self.data.stats().init_counts.dot(v) / self.data.num_init() as f64
    }

    fn weighted_residual(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let stats = self.data.stats();
        let (ns, na) = (self.data.num_states(), self.data.num_actions());
        let n = self.data.len() as f64;
        let gamma = self.data.gamma();
        DMatrix::from_fn(ns, na, |s, a| {
            let count = stats.counts[(s, a)];
            if count == 0.0 {
                return 0.0;
            }
            let next: f64 = stats.next_counts[s * na + a]
                .iter()
                .map(|&(sp, c)| c * v[sp])
                .sum();
            (stats.reward_sums[(s, a)] + gamma * next - count * v[s]) / n
        })
    }
}

/// `e_v(s,a) = r(s,a) + gamma sum_s' P(s'|s,a) v(s') - v(s)` on every cell.
pub fn residual_ev(mdp: &TabularMdp, v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(mdp.num_states(), mdp.num_actions(), |s, a| {
        mdp.r(s, a) + mdp.gamma() * dot(mdp.next_dist(s, a), v.as_slice()) - v[s]
    })
}

/// Sampled residual `r + gamma v(s') - v(s)` of one transition.
#[inline]
pub fn sampled_residual(t: &Transition, gamma: f64, v: &DVector<f64>) -> f64 {
    t.r + gamma * v[t.sp] - v[t.s]
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    Ok(())
}

/// Population Lagrangian with exact expectations.
pub fn population_lagrangian(
    mdp: &TabularMdp,
    data_dist: &Occupancy,
    reg: &Regularizer,
    alpha: f64,
    v: &DVector<f64>,
    w: &DMatrix<f64>,
) -> Result<f64> {
    check_alpha(alpha)?;
    check_shapes(mdp.num_states(), mdp.num_actions(), v, w)?;
    Ok(PopulationObjective::new(mdp, data_dist)?.lagrangian(reg, alpha, v, w))
}

/// Empirical Lagrangian, summed transition by transition.
pub fn empirical_lagrangian(
    data: &OfflineDataset,
    reg: &Regularizer,
    alpha: f64,
    v: &DVector<f64>,
    w: &DMatrix<f64>,
) -> Result<f64> {
    check_alpha(alpha)?;
    if data.is_empty() {
        return Err(Error::Empty("transition dataset"));
    }
    if data.num_init() == 0 {
        return Err(Error::Empty("initial-state dataset"));
    }
    check_shapes(data.num_states(), data.num_actions(), v, w)?;
    let gamma = data.gamma();
    let init: f64 = data.init_states().iter().map(|&s| v[s]).sum::<f64>() / data.num_init() as f64;
    let body: f64 = data
        .transitions()
        .iter()
        .map(|t| {
            let x = w[(t.s, t.a)];
            let penalty = if alpha == 0.0 { 0.0 } else { alpha * reg.eval(x) };
            -penalty + x * sampled_residual(t, gamma, v)
        })
        .sum::<f64>()
        / data.len() as f64;
    Ok((1.0 - gamma) * init + body)
}

fn check_shapes(ns: usize, na: usize, v: &DVector<f64>, w: &DMatrix<f64>) -> Result<()> {
    if v.len() != ns || w.shape() != (ns, na) {
        return Err(Error::Shape(format!(
            "v has length {}, w is {:?}; expected {ns} and ({ns}, {na})",
            v.len(),
            w.shape()
        )));
    }
    Ok(())
}

/// Distribution of the next state under the data: `dD'(s) = sum dD(s',a') P(s|s',a')`.
pub fn next_state_dist(mdp: &TabularMdp, data_dist: &Occupancy) -> DVector<f64> {
    let mut out = DVector::zeros(mdp.num_states());
    for s in 0..mdp.num_states() {
        for a in 0..mdp.num_actions() {
            let m = data_dist.get(s, a);
            if m == 0.0 {
                continue;
            }
            for (sp, &p) in mdp.next_dist(s, a).iter().enumerate() {
                out[sp] += m * p;
            }
        }
    }
    out
}

/// Weighted l1 distance of `v` to `target` under initial, data-state and
/// next-state distributions combined.
pub fn value_approximation_distance(
    mdp: &TabularMdp,
    data_dist: &Occupancy,
    next_dist: &DVector<f64>,
    v: &DVector<f64>,
    target: &DVector<f64>,
) -> f64 {
    let data_states = data_dist.state_marginal();
    (0..mdp.num_states())
        .map(|s| {
            let gap = (v[s] - target[s]).abs();
            gap * (mdp.init_dist()[s] + data_states[s] + next_dist[s])
        })
        .sum()
}

/// `sum dD(s,a) |w(s,a) - target(s,a)|`.
pub fn weight_approximation_distance(data_dist: &Occupancy, w: &DMatrix<f64>, target: &DMatrix<f64>) -> f64 {
    data_dist
        .mass()
        .iter()
        .zip(w.iter().zip(target.iter()))
        .map(|(b, (x, y))| b * (x - y).abs())
        .sum()
}

/// Best achievable approximation errors `(eps_rv, eps_rw)` of finite classes
/// with respect to a target pair.
pub fn approximation_errors(
    mdp: &TabularMdp,
    data_dist: &Occupancy,
    v_target: &DVector<f64>,
    w_target: &DMatrix<f64>,
    values: &[DVector<f64>],
    weights: &[DMatrix<f64>],
) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Empty("value class"));
    }
    if weights.is_empty() {
        return Err(Error::Empty("weight class"));
    }
    let next = next_state_dist(mdp, data_dist);
    let eps_rv = values
        .iter()
        .map(|v| value_approximation_distance(mdp, data_dist, &next, v, v_target))
        .fold(f64::INFINITY, f64::min);
    let eps_rw = weights
        .iter()
        .map(|w| weight_approximation_distance(data_dist, w, w_target))
        .fold(f64::INFINITY, f64::min);
    Ok((eps_rv, eps_rw))
}

/// Largest deviation between the empirical and population Lagrangians over
/// all pairs of the given classes.
pub fn max_class_deviation(
    population: &PopulationObjective<'_>,
    empirical: &EmpiricalObjective<'_>,
    reg: &Regularizer,
    alpha: f64,
    values: &[DVector<f64>],
    weights: &[DMatrix<f64>],
) -> f64 {
    let pop_parts: Vec<(f64, DMatrix<f64>)> = values
        .iter()
        .map(|v| (population.init_mean(v), population.weighted_residual(v)))
        .collect();
    let emp_parts: Vec<(f64, DMatrix<f64>)> = values
        .iter()
        .map(|v| (empirical.init_mean(v), empirical.weighted_residual(v)))
        .collect();
    let mut worst: f64 = 0.0;
    for w in weights {
        let (pp, ep) = (population.penalty(reg, w), empirical.penalty(reg, w));
        for ((pi, pr), (ei, er)) in pop_parts.iter().zip(&emp_parts) {
            let lp = population.lagrangian_from_parts(*pi, pr.component_mul(w).sum(), pp, alpha);
            let le = empirical.lagrangian_from_parts(*ei, er.component_mul(w).sum(), ep, alpha);
            worst = worst.max((lp - le).abs());
        }
    }
    worst
}

/// `||x - y||_{2, dD}`.
pub fn weighted_l2(data_dist: &Occupancy, x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    data_dist
        .mass()
        .iter()
        .zip(x.iter().zip(y.iter()))
        .map(|(b, (p, q))| b * (p - q).powi(2))
        .sum::<f64>()
        .sqrt()
}
