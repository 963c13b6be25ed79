//! Exact ground truth: the regularized (optionally capped) occupancy LP, the
//! unregularized optimum, concentrability constants and the small-`alpha`
//! stability sweep.

mod concentrability;
mod flow;
mod stability;

pub use concentrability::{
    concentrability, max_state_occupancy_ratio, strong_concentrability_check, EnumerationMode,
    StrongConcentrability,
};
pub use stability::{lp_stability_sweep, min_divergence_optimal_weights, StabilityRow, StabilitySweep};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{exact_occupancy, matrix_rows, q_from_values, Occupancy, Policy, TabularMdp};
use crate::regularizer::Regularizer;
use flow::FlowProblem;

/// Which numerical method solves the regularized LP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverPath {
    /// Semismooth Newton on the dual in `v`; weights follow in closed form.
    Newton,
    /// Projected extragradient on the joint `(v, w)` Lagrangian.
    Extragradient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub path: SolverPath,
    pub tol: f64,
    pub max_iter: usize,
}

impl SolveOptions {
    pub fn newton() -> Self {
        Self { path: SolverPath::Newton, tol: 1e-11, max_iter: 500 }
    }

    pub fn for_path(path: SolverPath) -> Self {
        match path {
            SolverPath::Newton => Self::newton(),
            SolverPath::Extragradient => Self::extragradient(),
        }
    }

    pub fn extragradient() -> Self {
        Self { path: SolverPath::Extragradient, tol: 1e-12, max_iter: 1_000_000 }
    }
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self::newton()
    }
}

/// Optimum of the regularized LP and the policy it induces.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedSolution {
    pub alpha: f64,
    pub cap: Option<f64>,
    pub v_star: DVector<f64>,
    /// Zero on cells outside the data support.
    pub w_star: DMatrix<f64>,
    pub d_star: Occupancy,
    pub pi_star: Policy,
    pub kkt_residual: f64,
    /// States with no optimal occupancy; `v_star` is not unique there.
    pub undetermined_states: Vec<usize>,
    pub iterations: usize,
    pub path: SolverPath,
}

/// On-disk layout of a solution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionFile {
    pub alpha: f64,
    pub v_star: Vec<f64>,
    pub w_star: Vec<Vec<f64>>,
    pub pi_star: Vec<Vec<f64>>,
    pub kkt_residual: f64,
}

impl RegularizedSolution {
    pub fn to_file(&self) -> SolutionFile {
        SolutionFile {
            alpha: self.alpha,
            v_star: self.v_star.iter().copied().collect(),
            w_star: matrix_rows(&self.w_star),
            pi_star: self.pi_star.to_rows(),
            kkt_residual: self.kkt_residual,
        }
    }

    /// Largest weight, the concentrability constant of the solution.
    pub fn max_weight(&self) -> f64 {
        self.w_star.max()
    }
}

fn validate(reg: &Regularizer, alpha: f64, cap: Option<f64>) -> Result<()> {
    reg.validate()?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
    }
    if let Some(b) = cap {
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::InvalidArgument(format!("weight cap must be positive, got {b}")));
        }
    }
    Ok(())
}

/// Solves the regularized LP with the default method.
pub fn solve_regularized(
    mdp: &TabularMdp,
    data_dist: &Occupancy,
    reg: &Regularizer,
    alpha: f64,
    cap: Option<f64>,
) -> Result<RegularizedSolution> {
    solve_regularized_with(mdp, data_dist, reg, alpha, cap, SolveOptions::default())
}

pub fn solve_regularized_with(
    mdp: &TabularMdp,
    data_dist: &Occupancy,
    reg: &Regularizer,
    alpha: f64,
    cap: Option<f64>,
    options: SolveOptions,
) -> Result<RegularizedSolution> {
    validate(reg, alpha, cap)?;
    let problem = FlowProblem::new(mdp, data_dist, *reg, alpha, cap, None, None)?;
    let (v, w, iterations) = run(&problem, options)?;
    let w_star = problem.weight_matrix(&w);
    finish(mdp, data_dist, &problem, v, w_star, alpha, cap, iterations, options.path)
}

pub(crate) fn run(problem: &FlowProblem, options: SolveOptions) -> Result<(DVector<f64>, Vec<f64>, usize)> {
    if let Some(state) = problem.support_infeasibility() {
        return Err(Error::Infeasible {
            state,
            reason: "every covered action leaks flow to states the data cannot support".into(),
        });
    }
    let sol = match options.path {
        SolverPath::Newton => problem.solve_newton(options.tol, options.max_iter)?,
        SolverPath::Extragradient => problem.solve_extragradient(options.tol, options.max_iter)?,
    };
    if !problem.capped && sol.w.iter().any(|&x| x >= problem.upper) {
        return Err(Error::InvalidArgument(
            "artificial weight box is active at the solution".into(),
        ));
    }
    Ok((sol.v, sol.w, sol.iterations))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    mdp: &TabularMdp,
    data_dist: &Occupancy,
    problem: &FlowProblem,
    v_star: DVector<f64>,
    w_star: DMatrix<f64>,
    alpha: f64,
    cap: Option<f64>,
    iterations: usize,
    path: SolverPath,
) -> Result<RegularizedSolution> {
    let cell_w: Vec<f64> = problem.cells.iter().map(|c| w_star[(c.s, c.a)]).collect();
    let kkt_residual = problem.kkt_residual(&v_star, &cell_w);
    let d_star = Occupancy::from_weights(&w_star, data_dist);
    let pi_star = d_star.conditional_policy();
    let marginal = d_star.state_marginal();
    let undetermined_states = (0..mdp.num_states()).filter(|&s| marginal[s] <= 1e-12).collect();
    Ok(RegularizedSolution {
        alpha,
        cap,
        v_star,
        w_star,
        d_star,
        pi_star,
        kkt_residual,
        undetermined_states,
        iterations,
        path,
    })
}

/// KKT residual of an arbitrary pair: the larger of the cellwise deviation
/// from the clipped closed-form best response and the flow residual of
/// `w ⊙ dD`.
pub fn kkt_residual(
    mdp: &TabularMdp,
    data_dist: &Occupancy,
    reg: &Regularizer,
    alpha: f64,
    cap: Option<f64>,
    v: &DVector<f64>,
    w: &DMatrix<f64>,
) -> Result<f64> {
    validate(reg, alpha, cap)?;
    let problem = FlowProblem::new(mdp, data_dist, *reg, alpha, cap, None, None)?;
    let cell_w: Vec<f64> = problem.cells.iter().map(|c| w[(c.s, c.a)]).collect();
    Ok(problem.kkt_residual(v, &cell_w))
}

/// The unregularized optimum: optimal values, a greedy optimal policy and its
/// occupancy.
#[derive(Debug, Clone, PartialEq)]
pub struct UnregularizedSolution {
    pub v: DVector<f64>,
    pub pi: Policy,
    pub d: Occupancy,
}

/// Tolerance within which greedy actions count as tied.
pub const GREEDY_TIE_TOL: f64 = 1e-9;

pub fn solve_unregularized(mdp: &TabularMdp) -> Result<UnregularizedSolution> {
    solve_unregularized_on(mdp, &|_, _| true)
}

/// Optimum when only actions with `allowed(s, a)` may be taken.
pub fn solve_unregularized_on(
    mdp: &TabularMdp,
    allowed: &dyn Fn(usize, usize) -> bool,
) -> Result<UnregularizedSolution> {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    if let Some(s) = (0..ns).find(|&s| !(0..na).any(|a| allowed(s, a))) {
        return Err(Error::InvalidArgument(format!("state {s} has no allowed action")));
    }
    let masked_max = |q: &DMatrix<f64>, s: usize| {
        (0..na)
            .filter(|&a| allowed(s, a))
            .map(|a| q[(s, a)])
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let mut v = DVector::zeros(ns);
    let max_iter = 1_000_000;
    for iter in 0.. {
        let q = q_from_values(mdp, &v);
        let next = DVector::from_fn(ns, |s, _| masked_max(&q, s));
        let gap = (&next - &v).amax();
        v = next;
        if gap < 1e-12 {
            break;
        }
        if iter >= max_iter {
            return Err(Error::NoConvergence { iterations: iter, residual: gap });
        }
    }
    let q = q_from_values(mdp, &v);
    let actions: Vec<usize> = (0..ns)
        .map(|s| {
            let best = masked_max(&q, s);
            (0..na)
                .find(|&a| allowed(s, a) && q[(s, a)] >= best - GREEDY_TIE_TOL)
                .expect("some allowed action attains the max")
        })
        .collect();
    let pi = Policy::deterministic(&actions, na);
    // Evaluate the greedy policy exactly so the values carry no iteration error.
    let (v, _) = crate::mdp::policy_values(mdp, &pi)?;
    let d = exact_occupancy(mdp, &pi)?;
    Ok(UnregularizedSolution { v, pi, d })
}
