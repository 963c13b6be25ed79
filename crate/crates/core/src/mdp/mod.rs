//! Finite discounted MDPs, policies, discounted occupancies and exact
//! policy evaluation.
//!
//! Everything here is computed with dense linear solves of size `|S|`, which
//! keeps results bit-stable at the problem sizes this crate targets.

mod counterexample;
pub mod instances;

pub use counterexample::{
    build_counterexample, Counterexample, CounterexampleInstance, ACTION_L, ACTION_R, STATE_A, STATE_B, STATE_C, STATE_T,
};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const STOCHASTIC_TOL: f64 = 1e-12;

/// A finite infinite-horizon discounted MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    gamma: f64,
    /// Row-major `(s, a, s')`.
    transition: Vec<f64>,
    reward: DMatrix<f64>,
    init_dist: DVector<f64>,
}

/// JSON layout of an MDP file. Nesting is `s -> a -> s'`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpFile {
    pub num_states: usize,
    pub num_actions: usize,
    pub gamma: f64,
    pub transition: Vec<Vec<Vec<f64>>>,
    pub reward: Vec<Vec<f64>>,
    pub init_dist: Vec<f64>,
}

impl TabularMdp {
    /// Builds and validates an MDP. The initial distribution must be strictly
    /// positive.
    pub fn new(
        gamma: f64,
        transition: Vec<Vec<Vec<f64>>>,
        reward: Vec<Vec<f64>>,
        init_dist: Vec<f64>,
    ) -> Result<Self> {
        let mdp = Self::assemble(gamma, transition, reward, init_dist)?;
        if let Some(s) = mdp.init_dist.iter().position(|&p| p <= 0.0) {
            return Err(Error::InvalidMdp(format!(
                "init_dist[{s}] = {} must be strictly positive",
                mdp.init_dist[s]
            )));
        }
        Ok(mdp)
    }

    /// Like [`TabularMdp::new`] but allows zero entries in the initial
    /// distribution. Used for episodic-style constructions with a single
    /// start state.
    pub fn with_sparse_init(
        gamma: f64,
        transition: Vec<Vec<Vec<f64>>>,
        reward: Vec<Vec<f64>>,
        init_dist: Vec<f64>,
    ) -> Result<Self> {
        Self::assemble(gamma, transition, reward, init_dist)
    }

    fn assemble(
        gamma: f64,
        transition: Vec<Vec<Vec<f64>>>,
        reward: Vec<Vec<f64>>,
        init_dist: Vec<f64>,
    ) -> Result<Self> {
        let num_states = transition.len();
        if num_states == 0 {
            return Err(Error::InvalidMdp("no states".into()));
        }
        let num_actions = transition[0].len();
        if num_actions == 0 {
            return Err(Error::InvalidMdp("no actions".into()));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidMdp(format!("gamma = {gamma} not in [0, 1)")));
        }
        if reward.len() != num_states || init_dist.len() != num_states {
            return Err(Error::InvalidMdp(
                "reward / init_dist length does not match num_states".into(),
            ));
        }
        let mut flat = Vec::with_capacity(num_states * num_actions * num_states);
        for (s, rows) in transition.iter().enumerate() {
            if rows.len() != num_actions {
                return Err(Error::InvalidMdp(format!(
                    "state {s} has {} actions, expected {num_actions}",
                    rows.len()
                )));
            }
            for (a, row) in rows.iter().enumerate() {
                if row.len() != num_states {
                    return Err(Error::InvalidMdp(format!(
                        "P(.|{s},{a}) has length {}, expected {num_states}",
                        row.len()
                    )));
                }
                check_distribution(row).map_err(|e| {
                    Error::InvalidMdp(format!("P(.|{s},{a}) is not a distribution: {e}"))
                })?;
                flat.extend_from_slice(row);
            }
        }
        let mut r = DMatrix::zeros(num_states, num_actions);
        for (s, row) in reward.iter().enumerate() {
            if row.len() != num_actions {
                return Err(Error::InvalidMdp(format!("reward row {s} has wrong length")));
            }
            for (a, &x) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&x) {
                    return Err(Error::InvalidMdp(format!("r({s},{a}) = {x} not in [0, 1]")));
                }
                r[(s, a)] = x;
            }
        }
        check_distribution(&init_dist)
            .map_err(|e| Error::InvalidMdp(format!("init_dist: {e}")))?;
        Ok(Self {
            num_states,
            num_actions,
            gamma,
            transition: flat,
            reward: r,
            init_dist: DVector::from_vec(init_dist),
        })
    }

    /// Random MDP with dense Dirichlet(1)-like transitions, uniform rewards in
    /// `[0, 1]` and a strictly positive initial distribution.
    pub fn random<R: Rng + ?Sized>(
        num_states: usize,
        num_actions: usize,
        gamma: f64,
        rng: &mut R,
    ) -> Self {
        let transition = (0..num_states)
            .map(|_| {
                (0..num_actions)
                    .map(|_| random_simplex(num_states, rng))
                    .collect()
            })
            .collect();
        let reward = (0..num_states)
            .map(|_| (0..num_actions).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let init = random_simplex(num_states, rng)
            .into_iter()
            .map(|p| p + 0.05)
            .collect::<Vec<_>>();
        let z: f64 = init.iter().sum();
        let init = init.into_iter().map(|p| p / z).collect();
        Self::new(gamma, transition, reward, init).expect("random MDP is valid by construction")
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    #[inline]
    pub fn p(&self, s: usize, a: usize, next: usize) -> f64 {
        self.transition[(s * self.num_actions + a) * self.num_states + next]
    }

    /// `P(. | s, a)` as a slice.
    #[inline]
    pub fn next_dist(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.num_actions + a) * self.num_states;
        &self.transition[start..start + self.num_states]
    }

    #[inline]
    pub fn r(&self, s: usize, a: usize) -> f64 {
        self.reward[(s, a)]
    }

    pub fn reward(&self) -> &DMatrix<f64> {
        &self.reward
    }

    pub fn init_dist(&self) -> &DVector<f64> {
        &self.init_dist
    }

    /// Returns a copy with a different reward table (same validation).
    pub fn with_reward(&self, reward: DMatrix<f64>) -> Result<Self> {
        if reward.shape() != self.reward.shape() {
            return Err(Error::Shape("reward table shape".into()));
        }
        if reward.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::InvalidMdp("reward outside [0, 1]".into()));
        }
        let mut out = self.clone();
        out.reward = reward;
        Ok(out)
    }

    /// `P_pi(s, s') = sum_a pi(a|s) P(s'|s,a)`.
    pub fn state_transition(&self, policy: &Policy) -> DMatrix<f64> {
        let n = self.num_states;
        let mut m = DMatrix::zeros(n, n);
        for s in 0..n {
            for a in 0..self.num_actions {
                let pa = policy.prob(s, a);
                if pa == 0.0 {
                    continue;
                }
                for (next, &p) in self.next_dist(s, a).iter().enumerate() {
                    m[(s, next)] += pa * p;
                }
            }
        }
        m
    }

    pub fn to_file(&self) -> MdpFile {
        MdpFile {
            num_states: self.num_states,
            num_actions: self.num_actions,
            gamma: self.gamma,
            transition: (0..self.num_states)
                .map(|s| {
                    (0..self.num_actions)
                        .map(|a| self.next_dist(s, a).to_vec())
                        .collect()
                })
                .collect(),
            reward: (0..self.num_states)
                .map(|s| (0..self.num_actions).map(|a| self.r(s, a)).collect())
                .collect(),
            init_dist: self.init_dist.iter().copied().collect(),
        }
    }

    pub fn from_file(file: MdpFile) -> Result<Self> {
        if file.transition.len() != file.num_states
            || file.transition.iter().any(|rows| rows.len() != file.num_actions)
        {
            return Err(Error::InvalidMdp(
                "declared num_states/num_actions do not match the transition tensor".into(),
            ));
        }
        let sparse = file.init_dist.iter().any(|&p| p == 0.0);
        if sparse {
            Self::with_sparse_init(file.gamma, file.transition, file.reward, file.init_dist)
        } else {
            Self::new(file.gamma, file.transition, file.reward, file.init_dist)
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("MDP serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(text)?)
    }
}

fn check_distribution(p: &[f64]) -> std::result::Result<(), String> {
    if let Some(i) = p.iter().position(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(format!("entry {i} = {} is negative or not finite", p[i]));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > STOCHASTIC_TOL {
        return Err(format!("sums to {total}"));
    }
    Ok(())
}

pub(crate) fn random_simplex<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    // Exponential spacings give a uniform draw from the simplex.
    let raw: Vec<f64> = (0..n)
        .map(|_| -(1.0 - rng.gen::<f64>()).ln() + 1e-12)
        .collect();
    let z: f64 = raw.iter().sum();
    let mut out: Vec<f64> = raw.into_iter().map(|x| x / z).collect();
    // Absorb the rounding error so the row sums to one within 1e-15.
    let drift: f64 = 1.0 - out.iter().sum::<f64>();
    out[0] += drift;
    out
}

/// A stationary stochastic policy, one row per state.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    probs: DMatrix<f64>,
}

impl Policy {
    pub fn new(probs: DMatrix<f64>) -> Result<Self> {
        for s in 0..probs.nrows() {
            let row: Vec<f64> = probs.row(s).iter().copied().collect();
            check_distribution(&row)
                .map_err(|e| Error::InvalidPolicy(format!("row {s}: {e}")))?;
        }
        Ok(Self { probs })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let ns = rows.len();
        let na = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != na) {
            return Err(Error::InvalidPolicy("ragged rows".into()));
        }
        Self::new(DMatrix::from_fn(ns, na, |s, a| rows[s][a]))
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Self {
            probs: DMatrix::from_element(num_states, num_actions, 1.0 / num_actions as f64),
        }
    }

    pub fn deterministic(actions: &[usize], num_actions: usize) -> Self {
        let mut probs = DMatrix::zeros(actions.len(), num_actions);
        for (s, &a) in actions.iter().enumerate() {
            probs[(s, a)] = 1.0;
        }
        Self { probs }
    }

    pub fn random<R: Rng + ?Sized>(num_states: usize, num_actions: usize, rng: &mut R) -> Self {
        let mut probs = DMatrix::zeros(num_states, num_actions);
        for s in 0..num_states {
            for (a, p) in random_simplex(num_actions, rng).into_iter().enumerate() {
                probs[(s, a)] = p;
            }
        }
        Self { probs }
    }

    /// Greedy policy w.r.t. `q`; actions within `tol` of the row maximum tie
    /// and the lowest index wins.
    pub fn greedy(q: &DMatrix<f64>, tol: f64) -> Self {
        let actions: Vec<usize> = (0..q.nrows())
            .map(|s| {
                let best = q.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (0..q.ncols())
                    .find(|&a| q[(s, a)] >= best - tol)
                    .unwrap_or(0)
            })
            .collect();
        Self::deterministic(&actions, q.ncols())
    }

    /// Convex combination `(1 - t) * self + t * other`.
    pub fn mix(&self, other: &Policy, t: f64) -> Policy {
        Policy {
            probs: &self.probs * (1.0 - t) + &other.probs * t,
        }
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[(s, a)]
    }

    pub fn probs(&self) -> &DMatrix<f64> {
        &self.probs
    }

    pub fn num_states(&self) -> usize {
        self.probs.nrows()
    }

    pub fn num_actions(&self) -> usize {
        self.probs.ncols()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        matrix_rows(&self.probs)
    }
}

/// A nonnegative measure over state-action pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Occupancy {
    mass: DMatrix<f64>,
}

impl Occupancy {
    pub fn new(mass: DMatrix<f64>) -> Result<Self> {
        if let Some(i) = mass.iter().position(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "occupancy entry {i} = {} is negative or not finite",
                mass[i]
            )));
        }
        Ok(Self { mass })
    }

    /// `w ⊙ d^D`, clamping tiny negative round-off to zero.
    pub fn from_weights(weights: &DMatrix<f64>, data_dist: &Occupancy) -> Self {
        Self {
            mass: weights.component_mul(&data_dist.mass).map(|x| x.max(0.0)),
        }
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.mass[(s, a)]
    }

    pub fn mass(&self) -> &DMatrix<f64> {
        &self.mass
    }

    pub fn total(&self) -> f64 {
        self.mass.sum()
    }

    /// State marginal `d(s) = sum_a d(s, a)`.
    pub fn state_marginal(&self) -> DVector<f64> {
        DVector::from_fn(self.mass.nrows(), |s, _| self.mass.row(s).sum())
    }

    /// `d(a|s)`, uniform on states without mass.
    pub fn conditional_policy(&self) -> Policy {
        let (ns, na) = self.mass.shape();
        let mut probs = DMatrix::zeros(ns, na);
        for s in 0..ns {
            let z = self.mass.row(s).sum();
            for a in 0..na {
                probs[(s, a)] = if z > 0.0 {
                    self.mass[(s, a)] / z
                } else {
                    1.0 / na as f64
                };
            }
        }
        Policy { probs }
    }

    pub fn scaled(&self, c: f64) -> Occupancy {
        Occupancy {
            mass: &self.mass * c,
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        matrix_rows(&self.mass)
    }
}

pub(crate) fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != nc) {
        return Err(Error::Shape("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

fn check_policy_shape(mdp: &TabularMdp, policy: &Policy) -> Result<()> {
    if policy.num_states() != mdp.num_states() || policy.num_actions() != mdp.num_actions() {
        return Err(Error::Shape(format!(
            "policy is {}x{}, MDP is {}x{}",
            policy.num_states(),
            policy.num_actions(),
            mdp.num_states(),
            mdp.num_actions()
        )));
    }
    Ok(())
}

/// Discounted state-action occupancy `d^pi`, from the linear flow system
/// `(I - gamma P_pi^T) d = (1 - gamma) mu_0`.
pub fn exact_occupancy(mdp: &TabularMdp, policy: &Policy) -> Result<Occupancy> {
    check_policy_shape(mdp, policy)?;
    let n = mdp.num_states();
    let p_pi = mdp.state_transition(policy);
    let system = DMatrix::identity(n, n) - p_pi.transpose() * mdp.gamma();
    let rhs = mdp.init_dist() * (1.0 - mdp.gamma());
    let d_state = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("occupancy flow system".into()))?;
    let mass = DMatrix::from_fn(n, mdp.num_actions(), |s, a| {
        (d_state[s] * policy.prob(s, a)).max(0.0)
    });
    Ok(Occupancy { mass })
}

/// Per-state Bellman flow residual
/// `d(s) - (1 - gamma) mu_0(s) - gamma sum_{s',a'} P(s|s',a') d(s',a')`.
pub fn flow_residual_vector(mdp: &TabularMdp, occ: &DMatrix<f64>) -> DVector<f64> {
    let n = mdp.num_states();
    let mut res = DVector::from_fn(n, |s, _| occ.row(s).sum() - (1.0 - mdp.gamma()) * mdp.init_dist()[s]);
    for s in 0..n {
        for a in 0..mdp.num_actions() {
            let m = occ[(s, a)];
            if m == 0.0 {
                continue;
            }
            for (next, &p) in mdp.next_dist(s, a).iter().enumerate() {
                res[next] -= mdp.gamma() * p * m;
            }
        }
    }
    res
}

/// `max_s |flow residual(s)|`.
pub fn flow_residual(mdp: &TabularMdp, occ: &Occupancy) -> f64 {
    flow_residual_vector(mdp, occ.mass()).amax()
}

/// `J(pi) = E_{d^pi}[r]`.
pub fn policy_return(mdp: &TabularMdp, policy: &Policy) -> Result<f64> {
    let d = exact_occupancy(mdp, policy)?;
    Ok(d.mass().component_mul(mdp.reward()).sum())
}

/// `V^pi` and `Q^pi` by solving `(I - gamma P_pi) V = r_pi`.
pub fn policy_values(mdp: &TabularMdp, policy: &Policy) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check_policy_shape(mdp, policy)?;
    let n = mdp.num_states();
    let p_pi = mdp.state_transition(policy);
    let r_pi = DVector::from_fn(n, |s, _| {
        (0..mdp.num_actions())
            .map(|a| policy.prob(s, a) * mdp.r(s, a))
            .sum::<f64>()
    });
    let system = DMatrix::identity(n, n) - p_pi * mdp.gamma();
    let v = system
        .lu()
        .solve(&r_pi)
        .ok_or_else(|| Error::Singular("policy evaluation system".into()))?;
    let q = q_from_values(mdp, &v);
    Ok((v, q))
}

/// `Q(s,a) = r(s,a) + gamma sum_s' P(s'|s,a) v(s')`.
pub fn q_from_values(mdp: &TabularMdp, v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(mdp.num_states(), mdp.num_actions(), |s, a| {
        mdp.r(s, a) + mdp.gamma() * dot(mdp.next_dist(s, a), v.as_slice())
    })
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `(1/(1-gamma)) E_{s~d^{pi_a}} <Q^{pi_b}(s,.), pi_a(.|s) - pi_b(.|s)>`, which
/// equals `V^{pi_a}(mu_0) - V^{pi_b}(mu_0)`.
pub fn performance_difference(mdp: &TabularMdp, policy_a: &Policy, policy_b: &Policy) -> Result<f64> {
    let d_a = exact_occupancy(mdp, policy_a)?.state_marginal();
    let (_, q_b) = policy_values(mdp, policy_b)?;
    let mut total = 0.0;
    for s in 0..mdp.num_states() {
        let inner: f64 = (0..mdp.num_actions())
            .map(|a| q_b[(s, a)] * (policy_a.prob(s, a) - policy_b.prob(s, a)))
            .sum();
        total += d_a[s] * inner;
    }
    Ok(total / (1.0 - mdp.gamma()))
}

/// `E_{s~d}[ ||pi(.|s) - pi'(.|s)||_1 ]` for a state weighting `d`.
pub fn expected_l1_distance(state_weights: &DVector<f64>, pi: &Policy, other: &Policy) -> f64 {
    (0..state_weights.len())
        .map(|s| {
            let l1: f64 = (0..pi.num_actions())
                .map(|a| (pi.prob(s, a) - other.prob(s, a)).abs())
                .sum();
            state_weights[s] * l1
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single_state(r: f64, gamma: f64) -> TabularMdp {
        TabularMdp::new(gamma, vec![vec![vec![1.0]]], vec![vec![r]], vec![1.0]).unwrap()
    }

    fn cycle(gamma: f64) -> TabularMdp {
        TabularMdp::new(
            gamma,
            vec![vec![vec![0.0, 1.0]], vec![vec![1.0, 0.0]]],
            vec![vec![0.0], vec![1.0]],
            vec![0.5, 0.5],
        )
        .unwrap()
    }

    #[test]
    fn single_state_occupancy_is_point_mass() {
        for gamma in [0.0, 0.5, 0.99] {
            let mdp = single_state(0.3, gamma);
            let d = exact_occupancy(&mdp, &Policy::uniform(1, 1)).unwrap();
            assert!((d.get(0, 0) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn cycle_occupancy_is_uniform() {
        let mdp = cycle(0.5);
        let d = exact_occupancy(&mdp, &Policy::uniform(2, 1)).unwrap();
        assert!((d.get(0, 0) - 0.5).abs() < 1e-15);
        assert!((d.get(1, 0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_state_returns() {
        assert!((policy_return(&single_state(1.0, 0.9), &Policy::uniform(1, 1)).unwrap() - 1.0).abs() < 1e-14);
        assert!((policy_return(&single_state(0.3, 0.9), &Policy::uniform(1, 1)).unwrap() - 0.3).abs() < 1e-14);
    }

    #[test]
    fn constant_rewards_give_constant_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let base = TabularMdp::random(5, 3, 0.8, &mut rng);
        let pi = Policy::random(5, 3, &mut rng);
        let ones = base.with_reward(DMatrix::from_element(5, 3, 1.0)).unwrap();
        let (v, _) = policy_values(&ones, &pi).unwrap();
        assert!(v.iter().all(|&x| (x - 5.0).abs() < 1e-10));
        let zeros = base.with_reward(DMatrix::zeros(5, 3)).unwrap();
        let (v, q) = policy_values(&zeros, &pi).unwrap();
        assert!(v.amax() == 0.0 && q.amax() == 0.0);
    }

    #[test]
    fn doubled_occupancy_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mdp = TabularMdp::random(4, 2, 0.7, &mut rng);
        let d = exact_occupancy(&mdp, &Policy::random(4, 2, &mut rng)).unwrap();
        assert!(flow_residual(&mdp, &d) < 1e-12);
        let expected = (1.0 - 0.7) * mdp.init_dist().max();
        assert!((flow_residual(&mdp, &d.scaled(2.0)) - expected).abs() < 1e-12);
    }

    #[test]
    fn validation_rejects_bad_inputs() {
        assert!(TabularMdp::new(1.0, vec![vec![vec![1.0]]], vec![vec![0.0]], vec![1.0]).is_err());
        assert!(TabularMdp::new(0.5, vec![vec![vec![0.7]]], vec![vec![0.0]], vec![1.0]).is_err());
        assert!(TabularMdp::new(0.5, vec![vec![vec![1.0]]], vec![vec![1.5]], vec![1.0]).is_err());
        let two = vec![vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]];
        let r = vec![vec![0.0], vec![0.0]];
        assert!(TabularMdp::new(0.5, two.clone(), r.clone(), vec![1.0, 0.0]).is_err());
        assert!(TabularMdp::with_sparse_init(0.5, two, r, vec![1.0, 0.0]).is_ok());
        assert!(Policy::from_rows(vec![vec![0.5, 0.6]]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mdp = TabularMdp::random(3, 2, 0.9, &mut rng);
        let back = TabularMdp::from_json(&mdp.to_json()).unwrap();
        assert_eq!(mdp, back);
    }

    #[test]
    fn greedy_breaks_ties_low() {
        let q = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.5, 0.0, 2.0, 2.0]);
        let pi = Policy::greedy(&q, 1e-12);
        assert_eq!(pi.prob(0, 0), 1.0);
        assert_eq!(pi.prob(1, 1), 1.0);
    }
}
