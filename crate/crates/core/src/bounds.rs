//! Closed-form error terms and the guarantees built from them.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::regularizer::Regularizer;

/// Constants entering the concentration term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundConstants {
    /// Sup of the value class.
    pub b_v: f64,
    /// Sup of the Bellman residual, `(1 + gamma) b_v + 1`.
    pub b_e: f64,
    /// Sup of `|f|` on `[0, b_w]`.
    pub b_f: f64,
    /// Sup of `|f'|` on `[0, b_w]`.
    pub b_fprime: f64,
    /// Sup of the weight class.
    pub b_w: f64,
    pub alpha: f64,
    pub m_f: f64,
    pub gamma: f64,
    pub n: usize,
    pub n0: usize,
    pub delta: f64,
    pub num_values: usize,
    pub num_weights: usize,
}

/// Sup-norm bound on the regularized optimal values, `(alpha b_fprime + 1) / (1 - gamma)`.
pub fn value_bound(alpha: f64, b_fprime: f64, gamma: f64) -> f64 {
    (alpha * b_fprime + 1.0) / (1.0 - gamma)
}

/// Bound on `|r + gamma v(s') - v(s)|` given `|v| <= b_v`.
pub fn residual_bound(b_v: f64, gamma: f64) -> f64 {
    (1.0 + gamma) * b_v + 1.0
}

impl BoundConstants {
    /// Derives the f-bounds from `b_w`, and the residual bound from `b_v`.
    #[allow(clippy::too_many_arguments)]
    pub fn derive(
        reg: &Regularizer,
        alpha: f64,
        gamma: f64,
        b_w: f64,
        b_v: f64,
        n: usize,
        n0: usize,
        delta: f64,
        sizes: (usize, usize),
    ) -> Result<Self> {
        let (b_f, b_fprime) = reg.bounds(b_w)?;
        let out = Self {
            b_v,
            b_e: residual_bound(b_v, gamma),
            b_f,
            b_fprime,
            b_w,
            alpha,
            m_f: reg.strong_convexity(),
            gamma,
            n,
            n0,
            delta,
            num_values: sizes.0,
            num_weights: sizes.1,
        };
        out.validate()?;
        Ok(out)
    }

    fn validate(&self) -> Result<()> {
        let reals = [self.b_v, self.b_e, self.b_f, self.b_fprime, self.b_w, self.alpha, self.m_f];
        if reals.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidArgument("bound constants must be finite and >= 0".into()));
        }
        if self.n == 0 || self.n0 == 0 {
            return Err(Error::InvalidArgument("sample sizes must be >= 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidArgument(format!("gamma must lie in [0, 1), got {}", self.gamma)));
        }
        if self.num_values == 0 || self.num_weights == 0 {
            return Err(Error::InvalidArgument("class sizes must be >= 1".into()));
        }
        Ok(())
    }

    /// Uniform deviation bound between the empirical and population objectives.
    pub fn stat_error(&self) -> Result<f64> {
        self.validate()?;
        let (nv, nw) = (self.num_values as f64, self.num_weights as f64);
        let init = (1.0 - self.gamma) * self.b_v * (2.0 * (4.0 * nv / self.delta).ln() / self.n0 as f64).sqrt();
        let data = (self.alpha * self.b_f + self.b_w * self.b_e)
            * (2.0 * (4.0 * nv * nw / self.delta).ln() / self.n as f64).sqrt();
        Ok(init + data)
    }
}

/// Free-function form of [`BoundConstants::stat_error`].
#[allow(clippy::too_many_arguments)]
pub fn stat_error(
    n: usize,
    n0: usize,
    alpha: f64,
    gamma: f64,
    b_w: f64,
    b_f: f64,
    b_v: f64,
    b_e: f64,
    sizes: (usize, usize),
    delta: f64,
) -> Result<f64> {
    BoundConstants {
        b_v,
        b_e,
        b_f,
        b_fprime: 0.0,
        b_w,
        alpha,
        m_f: 1.0,
        gamma,
        n,
        n0,
        delta,
        num_values: sizes.0,
        num_weights: sizes.1,
    }
    .stat_error()
}

fn check_alpha(alpha: f64, m_f: f64) -> Result<()> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("alpha must be > 0, got {alpha}")));
    }
    if !(m_f > 0.0) {
        return Err(Error::InvalidArgument(format!("strong convexity must be > 0, got {m_f}")));
    }
    Ok(())
}

/// `(4 / (1 - gamma)) sqrt(eps_stat / (alpha m_f))`: bounds the return gap to
/// the regularized optimum given a uniform deviation `eps_stat`.
pub fn gap_bound(eps_stat: f64, alpha: f64, m_f: f64, gamma: f64) -> Result<f64> {
    check_alpha(alpha, m_f)?;
    if !(eps_stat >= 0.0) {
        return Err(Error::InvalidArgument("deviation must be >= 0".into()));
    }
    Ok(4.0 / (1.0 - gamma) * (eps_stat / (alpha * m_f)).sqrt())
}

/// Misspecification penalty `(b_w + 1) eps_rv + (b_e + alpha b_fprime) eps_rw`.
pub fn approximation_error(c: &BoundConstants, eps_rv: f64, eps_rw: f64) -> f64 {
    (c.b_w + 1.0) * eps_rv + (c.b_e + c.alpha * c.b_fprime) * eps_rw
}

/// Return-gap bound when the classes are misspecified and the saddle point is
/// only approximate.
pub fn inexact_gap_bound(eps_stat: f64, eps_opt: f64, eps_app: f64, alpha: f64, m_f: f64, gamma: f64) -> Result<f64> {
    let base = gap_bound(eps_stat, alpha, m_f, gamma)?;
    Ok(base + 2.0 / (1.0 - gamma) * (2.0 * (eps_opt + eps_app).max(0.0) / (alpha * m_f)).sqrt())
}

/// Which unregularized target a recommended `alpha` aims at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlphaTarget {
    /// Competing with the unregularized optimum: `eps / (2 b)`.
    Unregularized,
    /// Competing with the best capped-ratio policy: `eps / (4 b)`.
    Constrained,
}

pub fn recommended_alpha(target: AlphaTarget, eps: f64, b: f64) -> Result<f64> {
    if !(eps > 0.0 && b > 0.0) {
        return Err(Error::InvalidArgument("accuracy and bound must be > 0".into()));
    }
    Ok(match target {
        AlphaTarget::Unregularized => eps / (2.0 * b),
        AlphaTarget::Constrained => eps / (4.0 * b),
    })
}

/// Error floor `alpha b_f0 + (2 / (1 - gamma)) sqrt(2 (eps_opt + eps_app) / (alpha m_f))`
/// when competing with the unregularized optimum.
pub fn unregularized_floor(alpha: f64, b_f0: f64, eps_opt: f64, eps_app: f64, m_f: f64, gamma: f64) -> f64 {
    alpha * b_f0 + 2.0 / (1.0 - gamma) * (2.0 * (eps_opt + eps_app) / (alpha * m_f)).sqrt()
}

/// Grid minimizer of [`unregularized_floor`]; ties go to the smallest `alpha`.
pub fn alpha_un_selector(eps_opt: f64, eps_app: f64, b_f0: f64, m_f: f64, gamma: f64, grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::Empty("alpha grid"));
    }
    if grid.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::InvalidArgument("alpha grid must be positive".into()));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best = (f64::INFINITY, sorted[0]);
    for &a in &sorted {
        let val = unregularized_floor(a, b_f0, eps_opt, eps_app, m_f, gamma);
        if val < best.0 {
            best = (val, a);
        }
    }
    Ok(best.1)
}

/// Deviation term of the cloning step, `4 b_w sqrt(6 log(4 |Pi| / delta) / n2)`.
pub fn clone_term(b_w: f64, num_policies: usize, delta: f64, n2: usize) -> Result<f64> {
    if num_policies == 0 || n2 == 0 {
        return Err(Error::InvalidArgument("policy class and cloning sample must be nonempty".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(4.0 * b_w * (6.0 * (4.0 * num_policies as f64 / delta).ln() / n2 as f64).sqrt())
}

/// Return-gap bound for the cloned policy.
pub fn cloned_gap_bound(eps_stat: f64, clone_term: f64, alpha: f64, m_f: f64, gamma: f64) -> Result<f64> {
    check_alpha(alpha, m_f)?;
    Ok(clone_term / (1.0 - gamma) + 50.0 / (1.0 - gamma) * (eps_stat / (alpha * m_f)).sqrt())
}

/// Return-gap bound without regularization under strong coverage, where every
/// policy's state occupancy lies within `[b_wl, b_wu]` times the data's.
#[allow(clippy::too_many_arguments)]
pub fn alpha_zero_rhs(
    b_w0: f64,
    b_wu: f64,
    b_wl: f64,
    sizes: (usize, usize),
    n: usize,
    n0: usize,
    delta: f64,
    gamma: f64,
) -> Result<f64> {
    if !(b_wl > 0.0) {
        return Err(Error::InvalidArgument("lower ratio bound must be > 0".into()));
    }
    if n == 0 || n0 == 0 {
        return Err(Error::InvalidArgument("sample sizes must be >= 1".into()));
    }
    let (nv, nw) = (sizes.0 as f64, sizes.1 as f64);
    let ratio = b_wu / b_wl;
    Ok(2.0 * b_w0 * ratio / (1.0 - gamma) * (2.0 * (4.0 * nv * nw / delta).ln() / n as f64).sqrt()
        + ratio * (2.0 * (4.0 * nv / delta).ln() / n0 as f64).sqrt())
}

/// Return-gap bound against the best capped-ratio policy when solving at
/// `alpha`: the regularization bias `2 alpha b_f` plus the estimation term.
pub fn constrained_rhs(eps_stat: f64, alpha: f64, b_f: f64, m_f: f64, gamma: f64) -> Result<f64> {
    Ok(2.0 * alpha * b_f + gap_bound(eps_stat, alpha, m_f, gamma)?)
}

/// Per-run guarantee summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub eps_stat: f64,
    pub rhs_gap: f64,
    pub rhs_cloned: Option<f64>,
    pub constants: BoundConstants,
}

impl BoundReport {
    /// `alpha` must be positive; `clone` carries `(|Pi|, n2)` for the cloning bound.
    pub fn new(constants: BoundConstants, clone: Option<(usize, usize)>) -> Result<Self> {
        let eps_stat = constants.stat_error()?;
        let rhs_gap = gap_bound(eps_stat, constants.alpha, constants.m_f, constants.gamma)?;
        let rhs_cloned = clone
            .map(|(np, n2)| {
                let term = clone_term(constants.b_w, np, constants.delta, n2)?;
                cloned_gap_bound(eps_stat, term, constants.alpha, constants.m_f, constants.gamma)
            })
            .transpose()?;
        Ok(Self { eps_stat, rhs_gap, rhs_cloned, constants })
    }
}
