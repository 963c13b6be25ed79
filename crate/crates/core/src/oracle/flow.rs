//! Numerical core of the regularized LP: a dual semismooth Newton method and
//! a projected extragradient method on the Lagrangian, both over the cells
//! covered by the data distribution.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mdp::{Occupancy, TabularMdp};
use crate::regularizer::Regularizer;

#[derive(Debug, Clone)]
pub(crate) struct Cell {
    pub s: usize,
    pub a: usize,
    pub base: f64,
    pub reward: f64,
    pub next: Vec<(usize, f64)>,
}

/// The regularized LP restricted to a set of cells.
#[derive(Debug, Clone)]
pub(crate) struct FlowProblem {
    pub num_states: usize,
    pub num_actions: usize,
    pub gamma: f64,
    pub init: Vec<f64>,
    pub cells: Vec<Cell>,
    pub alpha: f64,
    pub reg: Regularizer,
    /// Upper box on weights. Either the user cap or an artificial bound.
    pub upper: f64,
    pub capped: bool,
}

pub(crate) struct FlowSolution {
    pub v: DVector<f64>,
    pub w: Vec<f64>,
    pub iterations: usize,
}

impl FlowProblem {
    /// Builds the problem on cells where `data_dist > 0` and `allowed` holds.
    /// `reward` overrides the MDP reward when given.
    pub fn new(
        mdp: &TabularMdp,
        data_dist: &Occupancy,
        reg: Regularizer,
        alpha: f64,
        cap: Option<f64>,
        allowed: Option<&dyn Fn(usize, usize) -> bool>,
        reward: Option<&DMatrix<f64>>,
    ) -> Result<Self> {
        let (ns, na) = (mdp.num_states(), mdp.num_actions());
        if data_dist.mass().shape() != (ns, na) {
            return Err(Error::Shape("data distribution does not match the MDP".into()));
        }
        let mut cells = Vec::new();
        for s in 0..ns {
            for a in 0..na {
                let base = data_dist.get(s, a);
                if base <= 0.0 || !allowed.map_or(true, |f| f(s, a)) {
                    continue;
                }
                let next = mdp
                    .next_dist(s, a)
                    .iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(sp, &p)| (sp, p))
                    .collect();
                cells.push(Cell {
                    s,
                    a,
                    base,
                    reward: reward.map_or(mdp.r(s, a), |r| r[(s, a)]),
                    next,
                });
            }
        }
        if cells.is_empty() {
            return Err(Error::Empty("covered cells"));
        }
        let min_base = cells.iter().map(|c| c.base).fold(f64::INFINITY, f64::min);
        // Any occupancy has total mass one, so no feasible weight exceeds 1 / min base.
        let (upper, capped) = match cap {
            Some(b) => (b, true),
            None => (10.0 / min_base, false),
        };
        Ok(Self {
            num_states: ns,
            num_actions: na,
            gamma: mdp.gamma(),
            init: mdp.init_dist().iter().copied().collect(),
            cells,
            alpha,
            reg,
            upper,
            capped,
        })
    }

    /// Returns the first initial-support state whose flow cannot be routed
    /// through covered cells, if any.
    pub fn support_infeasibility(&self) -> Option<usize> {
        let mut alive = vec![true; self.num_states];
        loop {
            let mut changed = false;
            for s in 0..self.num_states {
                if !alive[s] {
                    continue;
                }
                let ok = self
                    .cells
                    .iter()
                    .any(|c| c.s == s && c.next.iter().all(|&(sp, _)| alive[sp]));
                if !ok {
                    alive[s] = false;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        (0..self.num_states).find(|&s| self.init[s] > 0.0 && !alive[s])
    }

    #[inline]
    fn residual(&self, c: &Cell, v: &DVector<f64>) -> f64 {
        c.reward + self.gamma * c.next.iter().map(|&(sp, p)| p * v[sp]).sum::<f64>() - v[c.s]
    }

    /// Closed-form best response `clip((f')^{-1}(e / alpha), 0, upper)`.
    #[inline]
    pub fn best_weight(&self, e: f64) -> f64 {
        self.reg.deriv_inverse(e / self.alpha).clamp(0.0, self.upper)
    }

    pub fn residuals(&self, v: &DVector<f64>) -> Vec<f64> {
        self.cells.iter().map(|c| self.residual(c, v)).collect()
    }

    /// Flow residual `d(s) - (1 - gamma) mu_0(s) - gamma (P^T d)(s)` for cell weights `w`.
    pub fn flow_residual(&self, w: &[f64]) -> DVector<f64> {
        let mut out = DVector::from_fn(self.num_states, |s, _| -(1.0 - self.gamma) * self.init[s]);
        for (c, &x) in self.cells.iter().zip(w) {
            let m = c.base * x;
            out[c.s] += m;
            for &(sp, p) in &c.next {
                out[sp] -= self.gamma * p * m;
            }
        }
        out
    }

    /// Max of the cellwise best-response deviation and the flow residual.
    pub fn kkt_residual(&self, v: &DVector<f64>, w: &[f64]) -> f64 {
        let dev = self
            .cells
            .iter()
            .zip(w)
            .map(|(c, &x)| (x - self.best_weight(self.residual(c, v))).abs())
            .fold(0.0, f64::max);
        dev.max(self.flow_residual(w).amax())
    }

    /// Dual objective `g(v) = (1 - gamma) mu_0 . v + sum base * phi(e_v)` with
    /// `phi(e) = max_{0 <= x <= upper} x e - alpha f(x)`.
    fn dual(&self, v: &DVector<f64>) -> f64 {
        let init: f64 = (0..self.num_states).map(|s| self.init[s] * v[s]).sum();
        let body: f64 = self
            .cells
            .iter()
            .map(|c| {
                let e = self.residual(c, v);
                let x = self.best_weight(e);
                c.base * (x * e - self.alpha * self.reg.eval(x))
            })
            .sum();
        (1.0 - self.gamma) * init + body
    }

    /// Gradient of the dual, equal to minus the flow residual of the best response.
    fn dual_gradient(&self, v: &DVector<f64>) -> (DVector<f64>, Vec<f64>) {
        let w: Vec<f64> = self.cells.iter().map(|c| self.best_weight(self.residual(c, v))).collect();
        (-self.flow_residual(&w), w)
    }

    /// Semismooth Newton with a Levenberg-Marquardt shift and Armijo search.
    pub fn solve_newton(&self, tol: f64, max_iter: usize) -> Result<FlowSolution> {
        let ns = self.num_states;
        let mut v = DVector::zeros(ns);
        let mut value = self.dual(&v);
        let (mut grad, mut w) = self.dual_gradient(&v);
        for iter in 0..max_iter {
            let gnorm = grad.amax();
            if gnorm < tol {
                return Ok(FlowSolution { v, w, iterations: iter });
            }
            let mut hess = DMatrix::zeros(ns, ns);
            for (c, &x) in self.cells.iter().zip(&w) {
                if x <= 0.0 || x >= self.upper {
                    continue;
                }
                let scale = c.base / (self.alpha * self.reg.second_deriv(x));
                let mut a = vec![(c.s, -1.0)];
                a.extend(c.next.iter().map(|&(sp, p)| (sp, self.gamma * p)));
                for &(i, ai) in &a {
                    for &(j, aj) in &a {
                        hess[(i, j)] += scale * ai * aj;
                    }
                }
            }
            let shift = gnorm.min(1.0).max(1e-12);
            for i in 0..ns {
                hess[(i, i)] += shift;
            }
            let step = match hess.clone().cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => hess
                    .lu()
                    .solve(&(-&grad))
                    .ok_or_else(|| Error::Singular("Newton system".into()))?,
            };
            let slope = grad.dot(&step);
            let mut t = 1.0;
            let mut accepted = false;
            while t > 1e-14 {
                let trial = &v + &step * t;
                let trial_value = self.dual(&trial);
                let (trial_grad, trial_w) = self.dual_gradient(&trial);
                let armijo = trial_value <= value + 1e-4 * t * slope;
                // Near the optimum the objective decrease drowns in round-off;
                // accept a full step that shrinks the gradient instead.
                let gradient_drop = t == 1.0 && trial_grad.amax() < 0.5 * gnorm;
                if armijo || gradient_drop {
                    v = trial;
                    value = trial_value;
                    grad = trial_grad;
                    w = trial_w;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                return Err(Error::NoConvergence { iterations: iter, residual: gnorm });
            }
            if v.amax() > 1e9 {
                let state = grad.iamax();
                return Err(Error::Infeasible {
                    state,
                    reason: "dual values diverge; the weight box cannot carry the flow".into(),
                });
            }
        }
        let (grad, _) = self.dual_gradient(&v);
        Err(Error::NoConvergence { iterations: max_iter, residual: grad.amax() })
    }

    /// Largest singular value of the coupling operator in the data-weighted metric.
    fn coupling_norm(&self) -> f64 {
        let ns = self.num_states;
        let mut gram = DMatrix::<f64>::zeros(ns, ns);
        for c in &self.cells {
            let mut a = vec![(c.s, -1.0)];
            a.extend(c.next.iter().map(|&(sp, p)| (sp, self.gamma * p)));
            for &(i, ai) in &a {
                for &(j, aj) in &a {
                    gram[(i, j)] += c.base * ai * aj;
                }
            }
        }
        gram.symmetric_eigenvalues().max().max(0.0).sqrt()
    }

    /// Projected extragradient on `(v, w)`, with the weight block measured in
    /// the data-weighted inner product.
    pub fn solve_extragradient(&self, tol: f64, max_iter: usize) -> Result<FlowSolution> {
        let lipschitz = self.coupling_norm() + self.alpha * self.reg.strong_convexity();
        let eta = 0.95 / lipschitz;
        let ns = self.num_states;
        let mut v = DVector::zeros(ns);
        let mut w = vec![0.0; self.cells.len()];
        // Gradient in v is the negated flow residual.
        let grad_v = |w: &[f64]| -> DVector<f64> { -self.flow_residual(w) };
        let grad_w = |v: &DVector<f64>, w: &[f64]| -> Vec<f64> {
            self.cells
                .iter()
                .zip(w)
                .map(|(c, &x)| self.residual(c, v) - self.alpha * self.reg.deriv(x))
                .collect()
        };
        let check_every = 50;
        for iter in 0..max_iter {
            let gv = grad_v(&w);
            let gw = grad_w(&v, &w);
            let v_half = &v - &gv * eta;
            let w_half: Vec<f64> = w
                .iter()
                .zip(&gw)
                .map(|(x, g)| (x + eta * g).clamp(0.0, self.upper))
                .collect();
            let gv = grad_v(&w_half);
            let gw = grad_w(&v_half, &w_half);
            v -= &gv * eta;
            for (x, g) in w.iter_mut().zip(&gw) {
                *x = (*x + eta * g).clamp(0.0, self.upper);
            }
            if iter % check_every == 0 {
                // Report the best response to the current values, which is
                // what the solution is judged on.
                let br: Vec<f64> = self.residuals(&v).into_iter().map(|e| self.best_weight(e)).collect();
                if self.kkt_residual(&v, &br) < tol {
                    return Ok(FlowSolution { v, w: br, iterations: iter + 1 });
                }
            }
        }
        let br: Vec<f64> = self.residuals(&v).into_iter().map(|e| self.best_weight(e)).collect();
        Err(Error::NoConvergence { iterations: max_iter, residual: self.kkt_residual(&v, &br) })
    }

    /// Scatters cell weights into a full `(s, a)` matrix, zero elsewhere.
    pub fn weight_matrix(&self, w: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.num_states, self.num_actions);
        for (c, &x) in self.cells.iter().zip(w) {
            out[(c.s, c.a)] = x;
        }
        out
    }
}
