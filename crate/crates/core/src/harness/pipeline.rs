//! End-to-end estimation runs evaluated exactly on the MDP.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{BehaviorSpec, DataSpec, ExperimentConfig, MdpSource, ObjectiveKind, PolicyClassSpec};
use crate::bounds::{
    approximation_error, clone_term, constrained_rhs, gap_bound, inexact_gap_bound, value_bound, BoundConstants,
    BoundReport,
};
use crate::classes::{
    build_around, build_misspecified, BoundMode, ClassSpec, PolicyClass, ValueClass, WeightClass, WeightFloor,
};
use crate::dataset::{generate_dataset, OfflineDataset};
use crate::error::{Error, Result};
use crate::extraction::{clone_deviation, clone_policy, extract_policy};
use crate::mdp::{
    build_counterexample, exact_occupancy, expected_l1_distance, instances, policy_return, Counterexample,
    CounterexampleInstance, Occupancy, Policy, TabularMdp,
};
use crate::objective::{
    approximation_errors, max_class_deviation, weighted_l2, EmpiricalObjective, LagrangianTerms, PopulationObjective,
};
use crate::oracle::{
    max_state_occupancy_ratio, solve_regularized_with, solve_unregularized, RegularizedSolution, SolveOptions,
};
use crate::saddle::{solve_exact_with, solve_inexact_with, SaddleSolution};

/// `alpha` used to approximate the best capped-ratio policy.
const COMPARATOR_ALPHA: f64 = 1e-6;
/// KKT tolerance for that solve; far below the `2 alpha B_f` slack it adds.
const COMPARATOR_TOL: f64 = 1e-9;

/// The pair the estimator should recover and the policy it induces.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub v: DVector<f64>,
    pub w: DMatrix<f64>,
    pub d: Occupancy,
    pub pi: Policy,
    pub j: f64,
}

/// Everything about a config point that does not depend on the seed or the
/// sample size.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub mdp: TabularMdp,
    pub data_dist: Occupancy,
    pub behavior: Policy,
    pub target: Target,
    /// Return of an unregularized optimal policy.
    pub j_opt: f64,
    /// Upper estimate of the best return among policies whose weights stay
    /// within the cap.
    pub j_comparator: Option<f64>,
    /// `max_pi max_s d^pi(s) / dD(s)` and `min_s d_0(s) / dD(s)`, for runs
    /// without regularization.
    pub state_ratios: Option<(f64, f64)>,
    pub counterexample: Option<Counterexample>,
}

/// One CSV row per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub config_hash: String,
    pub seed: u64,
    pub n: usize,
    pub n0: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub cap: Option<f64>,
    pub j_hat: f64,
    pub j_target: f64,
    pub j_opt: f64,
    pub j_comparator: Option<f64>,
    /// `j_target - j_hat`.
    pub realized_gap: f64,
    /// `j_opt - j_hat`.
    pub gap_unregularized: f64,
    pub gap_comparator: Option<f64>,
    pub policy_l1: f64,
    pub weight_error: f64,
    /// Largest `|empirical - population|` objective gap over the classes.
    pub max_deviation: f64,
    pub eps_stat: Option<f64>,
    #[serde(rename = "rhs_theorem1")]
    pub rhs_gap: Option<f64>,
    /// Deterministic return-gap bound with `max_deviation` in place of `eps_stat`.
    pub rhs_realized: Option<f64>,
    pub eps_opt_v: f64,
    pub eps_opt_w: f64,
    pub eps_rv: f64,
    pub eps_rw: f64,
    pub rhs_inexact: Option<f64>,
    pub w_hat_index: usize,
    pub v_hat_index: usize,
    pub w_hat_max: f64,
    pub weight_bound: f64,
    pub zero_mass_states: usize,
    pub n2: Option<usize>,
    pub j_bar: Option<f64>,
    pub bc_policy_l1: Option<f64>,
    pub bc_deviation: Option<f64>,
    pub clone_term: Option<f64>,
    pub rhs_cloned: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub row: RunRow,
    pub saddle: SaddleSolution,
    pub pi_hat: Policy,
    pub pi_bar: Option<Policy>,
    pub bounds: Option<BoundReport>,
    pub dataset: Option<OfflineDataset>,
}

pub(crate) struct BuiltClasses {
    pub values: ValueClass,
    pub weights: WeightClass,
    pub eps_rv: f64,
    pub eps_rw: f64,
}

fn load_mdp(source: &MdpSource) -> Result<(TabularMdp, Option<Counterexample>, Option<Occupancy>)> {
    Ok(match source {
        MdpSource::Random { num_states, num_actions, gamma, seed } => {
            if *num_states == 0 || *num_actions == 0 {
                return Err(Error::Config("random MDP needs states and actions".into()));
            }
            if !(0.0..1.0).contains(gamma) {
                return Err(Error::Config(format!("gamma = {gamma} not in [0, 1)")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (TabularMdp::random(*num_states, *num_actions, *gamma, &mut rng), None, None)
        }
        MdpSource::File { path } => (TabularMdp::from_json(&std::fs::read_to_string(path)?)?, None, None),
        MdpSource::Inline { mdp } => (TabularMdp::from_file(mdp.clone())?, None, None),
        MdpSource::Counterexample { gamma, instance } => {
            let ce = build_counterexample(*gamma, CounterexampleInstance::try_from(*instance)?)?;
            let dd = ce.data_dist.clone();
            (ce.mdp.clone(), Some(ce), Some(dd))
        }
        MdpSource::TiedActions => {
            let (mdp, dd) = instances::tied_actions();
            (mdp, None, Some(dd))
        }
    })
}

fn behavior_policy(mdp: &TabularMdp, spec: &BehaviorSpec) -> Result<Policy> {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    match spec {
        BehaviorSpec::Uniform => Ok(Policy::uniform(ns, na)),
        BehaviorSpec::Random { seed } => Ok(Policy::random(ns, na, &mut ChaCha8Rng::seed_from_u64(*seed))),
        BehaviorSpec::AvoidOptimal { optimal_mass } => {
            if !(*optimal_mass > 0.0 && *optimal_mass < 1.0) || na < 2 {
                return Err(Error::Config("optimal_mass must lie in (0, 1) with at least two actions".into()));
            }
            let opt = solve_unregularized(mdp)?.pi;
            let rest = (1.0 - optimal_mass) / (na - 1) as f64;
            Policy::new(DMatrix::from_fn(ns, na, |s, a| if opt.prob(s, a) > 0.5 { *optimal_mass } else { rest }))
        }
        BehaviorSpec::Rows { rows } => Policy::from_rows(rows.clone()),
    }
}

fn target_from_solution(mdp: &TabularMdp, sol: &RegularizedSolution) -> Result<Target> {
    Ok(Target {
        v: sol.v_star.clone(),
        w: sol.w_star.clone(),
        d: sol.d_star.clone(),
        pi: sol.pi_star.clone(),
        j: policy_return(mdp, &sol.pi_star)?,
    })
}

/// Ratio `d / dD` on covered cells, zero elsewhere.
fn ratio(d: &Occupancy, data_dist: &Occupancy) -> Result<DMatrix<f64>> {
    let (ns, na) = d.mass().shape();
    let mut w = DMatrix::zeros(ns, na);
    for s in 0..ns {
        for a in 0..na {
            let b = data_dist.get(s, a);
            if b > 0.0 {
                w[(s, a)] = d.get(s, a) / b;
            } else if d.get(s, a) > 1e-12 {
                return Err(Error::AbsoluteContinuity { state: s, action: a, mass: d.get(s, a) });
            }
        }
    }
    Ok(w)
}

/// Resolves the MDP, the data distribution and the exact target.
pub fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    config.validate()?;
    let (mdp, counterexample, builtin) = load_mdp(&config.mdp).map_err(Error::at("mdp"))?;
    let (data_dist, behavior) = match config.data_spec() {
        DataSpec::Builtin => {
            let dd = builtin.ok_or_else(|| Error::Config("source has no builtin data".into()))?;
            let pi = dd.conditional_policy();
            (dd, pi)
        }
        DataSpec::Explicit { mass } => {
            let dd = Occupancy::new(crate::mdp::matrix_from_rows(&mass)?).map_err(Error::at("data_dist"))?;
            let pi = dd.conditional_policy();
            (dd, pi)
        }
        DataSpec::Behavior { policy } => {
            let pi = behavior_policy(&mdp, &policy).map_err(Error::at("data_dist"))?;
            (exact_occupancy(&mdp, &pi).map_err(Error::at("data_dist"))?, pi)
        }
    };
    if data_dist.mass().shape() != (mdp.num_states(), mdp.num_actions()) {
        return Err(Error::Stage {
            stage: "data_dist",
            source: Box::new(Error::Shape("data distribution does not match the MDP".into())),
        });
    }
    let optimum = solve_unregularized(&mdp).map_err(Error::at("oracle"))?;
    let j_opt = policy_return(&mdp, &optimum.pi).map_err(Error::at("oracle"))?;
    let options = SolveOptions::for_path(config.solver);
    let mut state_ratios = None;
    let mut j_comparator = None;
    let target = if config.alpha > 0.0 {
        let sol = solve_regularized_with(&mdp, &data_dist, &config.regularizer, config.alpha, config.cap, options)
            .map_err(Error::at("oracle"))?;
        if let Some(cap) = config.cap {
            let loose = SolveOptions { tol: COMPARATOR_TOL, ..options };
            let tiny = solve_regularized_with(&mdp, &data_dist, &config.regularizer, COMPARATOR_ALPHA, Some(cap), loose)
                .map_err(Error::at("oracle"))?;
            let (b_f, _) = config.regularizer.bounds(cap)?;
            let j_tiny = policy_return(&mdp, &tiny.pi_star).map_err(Error::at("oracle"))?;
            j_comparator = Some(j_tiny + 2.0 * COMPARATOR_ALPHA * b_f);
        }
        target_from_solution(&mdp, &sol).map_err(Error::at("oracle"))?
    } else if let Some(ce) = &counterexample {
        let left = ce.left_policy();
        let d = exact_occupancy(&mdp, &left)?;
        Target { v: ce.values.members()[0].clone(), w: ce.weights.members()[0].clone(), d, pi: left, j: j_opt }
    } else {
        let w = ratio(&optimum.d, &data_dist).map_err(Error::at("oracle"))?;
        let b_wu = max_state_occupancy_ratio(&mdp, &data_dist).map_err(Error::at("oracle"))?;
        let (opt_states, data_states) = (optimum.d.state_marginal(), data_dist.state_marginal());
        let b_wl = (0..mdp.num_states()).map(|s| opt_states[s] / data_states[s]).fold(f64::INFINITY, f64::min);
        state_ratios = Some((b_wu, b_wl));
        Target { v: optimum.v.clone(), w, d: optimum.d.clone(), pi: optimum.pi.clone(), j: j_opt }
    };
    Ok(Prepared {
        config: config.clone(),
        config_hash: config.config_hash(),
        mdp,
        data_dist,
        behavior,
        target,
        j_opt,
        j_comparator,
        state_ratios,
        counterexample,
    })
}

fn class_seed(base: u64, seed: u64) -> u64 {
    base.wrapping_add(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

impl Prepared {
    fn gamma(&self) -> f64 {
        self.mdp.gamma()
    }

    /// Weight bound used for the classes.
    pub fn weight_bound(&self) -> f64 {
        let c = &self.config;
        c.classes
            .weight_bound
            .or(c.cap)
            .unwrap_or_else(|| c.classes.weight_scale * self.target.w.max())
    }

    /// Value bound used for the classes.
    pub fn value_bound(&self) -> Result<f64> {
        let c = &self.config;
        if let Some(b) = c.classes.value_bound {
            return Ok(b);
        }
        if c.alpha == 0.0 {
            return Ok(1.0 / (1.0 - self.gamma()));
        }
        let (_, b_fprime) = c.regularizer.bounds(self.weight_bound())?;
        Ok(value_bound(c.alpha, b_fprime, self.gamma()))
    }

    pub(crate) fn build_classes(&self, seed: u64) -> Result<BuiltClasses> {
        let c = &self.config;
        let spec = ClassSpec {
            num_distractors: c.classes.num_distractors,
            kind: c.classes.kind.clone(),
            value_bound: self.value_bound()?,
            weight_bound: self.weight_bound(),
        };
        let seed = class_seed(c.classes.seed, seed);
        if let Some(ce) = &self.counterexample {
            return self.counterexample_classes(ce, &spec, seed);
        }
        if c.alpha == 0.0 {
            let (values, weights) = build_around(&self.target.v, &self.target.w, &spec, seed)?;
            let (_, b_wl) = self.state_ratios.expect("ratios are set without regularization");
            let floor = WeightFloor { level: c.classes.floor.unwrap_or(b_wl), behavior: self.behavior.clone() };
            let top = 1.0 / (1.0 - self.gamma());
            let values = ValueClass::with_box(values.members().to_vec(), 0.0, top.min(spec.value_bound), BoundMode::Clip)?;
            let weights = WeightClass::with_floor(weights.members().to_vec(), spec.weight_bound, Some(floor), BoundMode::Clip)?;
            return self.with_errors(values, weights);
        }
        let solution = self.target_solution();
        if let Some(shift) = c.classes.misspecification {
            let m = build_misspecified(&self.mdp, &self.data_dist, &solution, shift, &spec, seed)?;
            return Ok(BuiltClasses { values: m.values, weights: m.weights, eps_rv: m.eps_rv, eps_rw: m.eps_rw });
        }
        let (values, weights) = build_around(&self.target.v, &self.target.w, &spec, seed)?;
        Ok(BuiltClasses { values, weights, eps_rv: 0.0, eps_rw: 0.0 })
    }

    fn with_errors(&self, values: ValueClass, weights: WeightClass) -> Result<BuiltClasses> {
        let (eps_rv, eps_rw) = approximation_errors(
            &self.mdp,
            &self.data_dist,
            &self.target.v,
            &self.target.w,
            values.members(),
            weights.members(),
        )?;
        Ok(BuiltClasses { values, weights, eps_rv, eps_rw })
    }

    fn target_solution(&self) -> RegularizedSolution {
        RegularizedSolution {
            alpha: self.config.alpha,
            cap: self.config.cap,
            v_star: self.target.v.clone(),
            w_star: self.target.w.clone(),
            d_star: self.target.d.clone(),
            pi_star: self.target.pi.clone(),
            kkt_residual: 0.0,
            undetermined_states: Vec::new(),
            iterations: 0,
            path: self.config.solver,
        }
    }

    /// Without regularization: the unregularized values and the good and bad
    /// weights. With regularization: the target pair is added and the
    /// unregularized members stay as competitors.
    fn counterexample_classes(&self, ce: &Counterexample, spec: &ClassSpec, seed: u64) -> Result<BuiltClasses> {
        let adversarial = self.config.classes.adversarial;
        if self.config.alpha == 0.0 {
            let weights = if adversarial { ce.adversarial_weights() } else { ce.weights.clone() };
            return self.with_errors(ce.values.clone(), weights);
        }
        let (values, weights) = build_around(&self.target.v, &self.target.w, spec, seed)?;
        let mut vs = values.members().to_vec();
        vs.push(ce.values.members()[0].clone());
        let mut ws = weights.members().to_vec();
        let mut extra = ce.weights.members().to_vec();
        let bound = extra.iter().map(|w| w.max()).fold(spec.weight_bound, f64::max);
        if adversarial {
            extra.reverse();
            extra.extend(ws);
            ws = extra;
        } else {
            ws.extend(extra);
        }
        let values = ValueClass::new(vs, spec.value_bound, BoundMode::Clip)?;
        let weights = WeightClass::new(ws, bound, BoundMode::Clip)?;
        self.with_errors(values, weights)
    }

    fn policy_class(&self, spec: &PolicyClassSpec) -> Result<PolicyClass> {
        let (ns, na) = (self.mdp.num_states(), self.mdp.num_actions());
        let mut members = Vec::new();
        if spec.include_target {
            members.push(self.target.pi.clone());
        }
        if spec.include_behavior {
            members.push(self.behavior.clone());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        members.extend((0..spec.num_random).map(|_| Policy::random(ns, na, &mut rng)));
        PolicyClass::new(members)
    }

    /// Runs one seed at the configured sample sizes.
    pub fn run(&self, n: usize, n0: usize, seed: u64) -> Result<RunReport> {
        let c = &self.config;
        let gamma = self.gamma();
        let m_f = c.regularizer.strong_convexity();
        let classes = self.build_classes(seed).map_err(Error::at("classes"))?;
        let sizes = (classes.values.len(), classes.weights.len());

        let (n1, n2) = match &c.clone {
            None => (n, 0),
            Some(cc) => match cc.n2 {
                Some(n2) => (n, n2),
                None => {
                    let n1 = ((n as f64) * cc.split).floor() as usize;
                    (n1, n - n1)
                }
            },
        };
        let population = c.objective == ObjectiveKind::Population;
        let (estimation, cloning, full) = if population {
            (None, None, None)
        } else {
            let data = generate_dataset(&self.mdp, &self.data_dist, n1 + n2, n0, seed).map_err(Error::at("dataset"))?;
            let (d1, d2) = data.split(n1).map_err(Error::at("dataset"))?;
            (Some(d1), c.clone.as_ref().map(|_| d2), Some(data))
        };

        let pop = PopulationObjective::new(&self.mdp, &self.data_dist)?;
        let saddle = match &estimation {
            Some(d1) => {
                let emp = EmpiricalObjective::new(d1).map_err(Error::at("saddle"))?;
                self.solve_saddle(&emp, &classes, seed)
            }
            None => self.solve_saddle(&pop, &classes, seed),
        }
        .map_err(Error::at("saddle"))?;
        let max_deviation = match &estimation {
            Some(d1) => {
                let emp = EmpiricalObjective::new(d1)?;
                max_class_deviation(
                    &pop,
                    &emp,
                    &c.regularizer,
                    c.alpha,
                    classes.values.members(),
                    classes.weights.members(),
                )
            }
            None => 0.0,
        };

        let extracted = extract_policy(&saddle.w_hat, &self.behavior);
        let pi_hat = extracted.policy;
        let j_hat = policy_return(&self.mdp, &pi_hat).map_err(Error::at("evaluate"))?;
        let target_states = self.target.d.state_marginal();
        let policy_l1 = expected_l1_distance(&target_states, &self.target.pi, &pi_hat);
        let weight_error = weighted_l2(&self.data_dist, &saddle.w_hat, &self.target.w);

        let mut bounds = None;
        let mut rhs_realized = None;
        let mut rhs_inexact = None;
        let mut gap_comparator = None;
        if c.alpha > 0.0 {
            if !population && n1 > 0 && n0 > 0 {
                let constants = BoundConstants::derive(
                    &c.regularizer,
                    c.alpha,
                    gamma,
                    classes.weights.bound(),
                    classes.values.bound(),
                    n1,
                    n0,
                    c.delta,
                    sizes,
                )
                .map_err(Error::at("bounds"))?;
                let clone_info = c.clone.as_ref().map(|_| (self.policy_count(), n2));
                bounds = Some(BoundReport::new(constants, clone_info).map_err(Error::at("bounds"))?);
            }
            rhs_realized = Some(gap_bound(max_deviation, c.alpha, m_f, gamma)?);
            if let Some(cap) = c.cap {
                let (b_f, _) = c.regularizer.bounds(cap)?;
                rhs_realized = Some(constrained_rhs(max_deviation, c.alpha, b_f, m_f, gamma)?);
                gap_comparator = self.j_comparator.map(|j| j - j_hat);
            }
            if c.inexact.is_some() || c.classes.misspecification.is_some() {
                let (b_f, b_fprime) = c.regularizer.bounds(classes.weights.bound())?;
                let b_v = classes.values.bound();
                let constants = BoundConstants {
                    b_v,
                    b_e: crate::bounds::residual_bound(b_v, gamma),
                    b_f,
                    b_fprime,
                    b_w: classes.weights.bound(),
                    alpha: c.alpha,
                    m_f,
                    gamma,
                    n: n1.max(1),
                    n0: n0.max(1),
                    delta: c.delta,
                    num_values: sizes.0,
                    num_weights: sizes.1,
                };
                let eps_app = approximation_error(&constants, classes.eps_rv, classes.eps_rw);
                let eps_opt = saddle.eps_ov + saddle.eps_ow;
                rhs_inexact = Some(inexact_gap_bound(max_deviation, eps_opt, eps_app, c.alpha, m_f, gamma)?);
            }
        } else if let Some((b_wu, b_wl)) = self.state_ratios {
            let floor = c.classes.floor.unwrap_or(b_wl);
            rhs_realized = Some(2.0 * max_deviation * b_wu / floor);
        }

        let mut pi_bar = None;
        let (mut j_bar, mut bc_policy_l1, mut bc_deviation, mut clone_value) = (None, None, None, None);
        if let (Some(cc), Some(d2)) = (&c.clone, &cloning) {
            let policies = self.policy_class(&cc.policies).map_err(Error::at("clone"))?;
            let cloned = clone_policy(&saddle.w_hat, d2, &policies).map_err(Error::at("clone"))?;
            j_bar = Some(policy_return(&self.mdp, &cloned.policy).map_err(Error::at("evaluate"))?);
            bc_policy_l1 = Some(expected_l1_distance(&target_states, &self.target.pi, &cloned.policy));
            bc_deviation = Some(clone_deviation(&saddle.w_hat, d2, &self.data_dist, &policies)?);
            clone_value = Some(clone_term(classes.weights.bound(), policies.len(), c.delta, n2)?);
            pi_bar = Some(cloned.policy);
        }

        let row = RunRow {
            config_hash: self.config_hash.clone(),
            seed,
            n,
            n0,
            gamma,
            alpha: c.alpha,
            cap: c.cap,
            j_hat,
            j_target: self.target.j,
            j_opt: self.j_opt,
            j_comparator: self.j_comparator,
            realized_gap: self.target.j - j_hat,
            gap_unregularized: self.j_opt - j_hat,
            gap_comparator,
            policy_l1,
            weight_error,
            max_deviation,
            eps_stat: bounds.as_ref().map(|b| b.eps_stat),
            rhs_gap: bounds.as_ref().map(|b| b.rhs_gap),
            rhs_realized,
            eps_opt_v: saddle.eps_ov,
            eps_opt_w: saddle.eps_ow,
            eps_rv: classes.eps_rv,
            eps_rw: classes.eps_rw,
            rhs_inexact,
            w_hat_index: saddle.w_index,
            v_hat_index: saddle.v_index,
            w_hat_max: saddle.w_hat.max(),
            weight_bound: classes.weights.bound(),
            zero_mass_states: extracted.zero_mass_states.len(),
            n2: c.clone.as_ref().map(|_| n2),
            j_bar,
            bc_policy_l1,
            bc_deviation,
            clone_term: clone_value,
            rhs_cloned: bounds.as_ref().and_then(|b| b.rhs_cloned),
        };
        Ok(RunReport { row, saddle, pi_hat, pi_bar, bounds, dataset: full })
    }

    fn policy_count(&self) -> usize {
        self.config.clone.as_ref().map_or(0, |cc| {
            let p = &cc.policies;
            p.include_target as usize + p.include_behavior as usize + p.num_random
        })
    }

    fn solve_saddle<T: LagrangianTerms>(&self, terms: &T, classes: &BuiltClasses, seed: u64) -> Result<SaddleSolution> {
        let c = &self.config;
        match c.inexact {
            Some(s) => solve_inexact_with(
                terms,
                &classes.values,
                &classes.weights,
                &c.regularizer,
                c.alpha,
                s.eps_ov,
                s.eps_ow,
                seed,
            ),
            None => solve_exact_with(terms, &classes.values, &classes.weights, &c.regularizer, c.alpha),
        }
    }
}

/// Runs the configured estimator once, with known behavior policy.
pub fn run_pro_rl(config: &ExperimentConfig) -> Result<RunReport> {
    if config.clone.is_some() {
        return Err(Error::Config("config asks for cloning; use run_pro_rl_bc".into()));
    }
    prepare(config)?.run(config.n, config.n0(), config.seed)
}

/// Runs the estimator and replaces the known behavior policy by cloning on a
/// held-out split.
pub fn run_pro_rl_bc(config: &ExperimentConfig) -> Result<RunReport> {
    if config.clone.is_none() {
        return Err(Error::Config("config has no cloning section".into()));
    }
    prepare(config)?.run(config.n, config.n0(), config.seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::CloneConfig;

    fn random_config(alpha: f64) -> ExperimentConfig {
        ExperimentConfig::from_json(&format!(
            r#"{{"mdp": {{"kind": "random", "num_states": 5, "num_actions": 2, "gamma": 0.8, "seed": 3}},
                "data": {{"kind": "behavior", "policy": {{"kind": "random", "seed": 4}}}},
                "alpha": {alpha}, "n": 2000, "seed": 1,
                "classes": {{"num_distractors": 5}}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn singleton_classes_recover_target() {
        let mut c = random_config(0.5);
        c.classes.num_distractors = 0;
        let r = run_pro_rl(&c).unwrap();
        assert_eq!(r.saddle.w_index, 0);
        assert!(r.row.weight_error < 1e-12);
        assert!(r.row.realized_gap.abs() < 1e-12);
    }

    #[test]
    fn chain_holds() {
        for seed in 0..5 {
            let mut c = random_config(0.5);
            c.seed = seed;
            c.n = 200;
            let r = run_pro_rl(&c).unwrap().row;
            let scale = 1.0 / (1.0 - 0.8);
            assert!(r.realized_gap <= scale * r.policy_l1 + 1e-10);
            assert!(r.policy_l1 <= 2.0 * r.weight_error + 1e-10);
            assert!(r.realized_gap <= r.rhs_realized.unwrap() + 1e-10);
            assert!(r.rhs_gap.unwrap() >= r.rhs_realized.unwrap() || r.max_deviation > r.eps_stat.unwrap());
        }
    }

    #[test]
    fn counterexample_without_regularization_fails() {
        let c = ExperimentConfig::from_json(
            r#"{"mdp": {"kind": "counterexample", "gamma": 0.9, "instance": 2},
                "alpha": 0.0, "n": 1, "objective": "population", "classes": {"adversarial": true}}"#,
        )
        .unwrap();
        let r = run_pro_rl(&c).unwrap();
        let regret_right = 0.1 * 0.9 * 0.5;
        assert!((r.row.gap_unregularized - regret_right).abs() < 1e-12);
    }

    #[test]
    fn cloning_runs_and_reports() {
        let mut c = random_config(0.5);
        c.clone = Some(CloneConfig::default());
        assert!(run_pro_rl(&c).is_err());
        let r = run_pro_rl_bc(&c).unwrap();
        assert_eq!(r.row.n2, Some(200));
        assert!(r.row.bc_policy_l1.unwrap() >= 0.0);
        assert!(r.row.rhs_cloned.is_some());
    }

    #[test]
    fn errors_carry_stage() {
        let mut c = random_config(0.5);
        c.classes.weight_bound = Some(1e-3);
        match run_pro_rl(&c) {
            Err(Error::Stage { stage, .. }) => assert_eq!(stage, "classes"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
