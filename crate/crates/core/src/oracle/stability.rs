//! Behaviour of the regularized optimum as `alpha` shrinks.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::flow::FlowProblem;
use super::{run, solve_regularized, solve_unregularized_on, SolveOptions};
use crate::error::{Error, Result};
use crate::mdp::{Occupancy, TabularMdp};
use crate::objective::residual_ev;
use crate::regularizer::Regularizer;

/// Residual tolerance for an action to count as optimal.
const OPTIMAL_ACTION_TOL: f64 = 1e-9;
/// Weights closer than this are treated as identical across the grid.
const WEIGHT_MATCH_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityRow {
    pub alpha: f64,
    #[serde(skip)]
    pub w_star: DMatrix<f64>,
    /// `||v*_alpha - v*_0||_{2, dD}` over states.
    pub v_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilitySweep {
    pub rows: Vec<StabilityRow>,
    /// Number of smallest-`alpha` grid points sharing the same weights.
    pub stable_len: usize,
    /// Least-squares slope of `v_gap` against `alpha` through the origin,
    /// fitted on the stable points.
    pub slope: f64,
    pub r_squared: f64,
    pub v_unregularized: DVector<f64>,
}

impl StabilitySweep {
    /// Weights at the smallest `alpha`.
    pub fn limit_weights(&self) -> &DMatrix<f64> {
        &self.rows.last().expect("sweep has rows").w_star
    }
}

/// Solves along a descending `alpha` grid and summarizes where the optimal
/// weights stop changing.
pub fn lp_stability_sweep(
    mdp: &TabularMdp,
    data_dist: &Occupancy,
    reg: &Regularizer,
    alphas: &[f64],
) -> Result<StabilitySweep> {
    if alphas.is_empty() {
        return Err(Error::Empty("alpha grid"));
    }
    if alphas.windows(2).any(|p| p[1] >= p[0]) {
        return Err(Error::InvalidArgument("alpha grid must be strictly descending".into()));
    }
    let covered = |s: usize, a: usize| data_dist.get(s, a) > 0.0;
    let v0 = solve_unregularized_on(mdp, &covered)?.v;
    let data_states = data_dist.state_marginal();
    let rows = alphas
        .iter()
        .map(|&alpha| {
            let sol = solve_regularized(mdp, data_dist, reg, alpha, None)?;
            let v_gap = (0..mdp.num_states())
                .map(|s| data_states[s] * (sol.v_star[s] - v0[s]).powi(2))
                .sum::<f64>()
                .sqrt();
            Ok(StabilityRow { alpha, w_star: sol.w_star, v_gap })
        })
        .collect::<Result<Vec<_>>>()?;
    let last = &rows[rows.len() - 1].w_star;
    let stable_len = rows
        .iter()
        .rev()
        .take_while(|r| (&r.w_star - last).amax() < WEIGHT_MATCH_TOL)
        .count();
    let tail = &rows[rows.len() - stable_len..];
    let (slope, r_squared) = fit_through_origin(
        &tail.iter().map(|r| r.alpha).collect::<Vec<_>>(),
        &tail.iter().map(|r| r.v_gap).collect::<Vec<_>>(),
    );
    Ok(StabilitySweep { rows, stable_len, slope, r_squared, v_unregularized: v0 })
}

/// Least-squares `y = c x` and its centered coefficient of determination.
pub(crate) fn fit_through_origin(x: &[f64], y: &[f64]) -> (f64, f64) {
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let c = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let mean = y.iter().sum::<f64>() / y.len().max(1) as f64;
    let ss_tot: f64 = y.iter().map(|b| (b - mean).powi(2)).sum();
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - c * a).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else if ss_res == 0.0 { 1.0 } else { 0.0 };
    (c, r2)
}

/// Among weights whose occupancy is optimal for the unregularized LP, the
/// one minimizing `E_dD[f(w)]`.
pub fn min_divergence_optimal_weights(
    mdp: &TabularMdp,
    data_dist: &Occupancy,
    reg: &Regularizer,
) -> Result<DMatrix<f64>> {
    let covered = |s: usize, a: usize| data_dist.get(s, a) > 0.0;
    let v0 = solve_unregularized_on(mdp, &covered)?.v;
    let e = residual_ev(mdp, &v0);
    let optimal = move |s: usize, a: usize| e[(s, a)] >= -OPTIMAL_ACTION_TOL;
    // With zero reward and unit alpha the objective is exactly -E_dD[f(w)].
    let zero = DMatrix::zeros(mdp.num_states(), mdp.num_actions());
    let problem = FlowProblem::new(mdp, data_dist, *reg, 1.0, None, Some(&optimal), Some(&zero))?;
    let (_, w, _) = run(&problem, SolveOptions::newton())?;
    Ok(problem.weight_matrix(&w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::instances::tied_actions;

    #[test]
    fn fit_recovers_line() {
        let (c, r2) = fit_through_origin(&[0.1, 0.2, 0.4], &[0.3, 0.6, 1.2]);
        assert!((c - 3.0).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sweep_stabilizes_on_minimum_divergence_weights() {
        let (mdp, dd) = tied_actions();
        let reg = Regularizer::quadratic(1.0);
        let sweep = lp_stability_sweep(&mdp, &dd, &reg, &[0.2, 0.1, 0.05, 0.02, 0.01, 0.005]).unwrap();
        assert!(sweep.stable_len >= 3, "stable_len {}", sweep.stable_len);
        let target = min_divergence_optimal_weights(&mdp, &dd, &reg).unwrap();
        assert!((sweep.limit_weights() - &target).amax() < 1e-6);
        assert!(sweep.r_squared > 0.99);
    }

    #[test]
    fn rejects_bad_grid() {
        let (mdp, dd) = tied_actions();
        let reg = Regularizer::default();
        assert!(lp_stability_sweep(&mdp, &dd, &reg, &[]).is_err());
        assert!(lp_stability_sweep(&mdp, &dd, &reg, &[0.1, 0.2]).is_err());
    }
}
