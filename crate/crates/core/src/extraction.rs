//! Turning estimated density ratios into a policy.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::classes::{witness_class, PolicyClass, WitnessSet};
use crate::dataset::OfflineDataset;
use crate::error::{Error, Result};
use crate::mdp::{Occupancy, Policy};

/// State rows whose reweighted behavior mass is at or below this fall back to
/// the uniform policy.
pub const ZERO_MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionResult {
    pub policy: Policy,
    /// States where the reweighted behavior mass vanished.
    pub zero_mass_states: Vec<usize>,
}

/// `pi(a|s)` proportional to `w(s, a) * pi_D(a|s)`, uniform where that mass
/// vanishes.
pub fn extract_policy(w: &DMatrix<f64>, behavior: &Policy) -> ExtractionResult {
    let (ns, na) = (behavior.num_states(), behavior.num_actions());
    let mut probs = DMatrix::from_element(ns, na, 1.0 / na as f64);
    let mut zero_mass_states = Vec::new();
    for s in 0..ns {
        let row: Vec<f64> = (0..na).map(|a| w[(s, a)].max(0.0) * behavior.prob(s, a)).collect();
        let total: f64 = row.iter().sum();
        if total <= ZERO_MASS_TOL {
            zero_mass_states.push(s);
            continue;
        }
        for (a, x) in row.into_iter().enumerate() {
            probs[(s, a)] = x / total;
        }
    }
    let policy = Policy::new(probs).expect("normalized rows");
    ExtractionResult { policy, zero_mass_states }
}

/// `sum_{s,a} mass(s, a) w(s, a) (h^pi(s) - h(s, a))` where `h^pi` averages
/// `h` over `pi`.
pub fn clone_objective(mass: &DMatrix<f64>, w: &DMatrix<f64>, pi: &Policy, h: &DMatrix<f64>) -> f64 {
    let mut total = 0.0;
    for s in 0..mass.nrows() {
        let h_pi: f64 = (0..mass.ncols()).map(|a| pi.prob(s, a) * h[(s, a)]).sum();
        for a in 0..mass.ncols() {
            total += mass[(s, a)] * w[(s, a)] * (h_pi - h[(s, a)]);
        }
    }
    total
}

#[derive(Debug, Clone, PartialEq)]
pub struct CloneResult {
    pub index: usize,
    pub policy: Policy,
    /// Worst-case witness objective per class member, averaged over the
    /// cloning sample.
    pub objectives: Vec<f64>,
}

fn worst_case(mass: &DMatrix<f64>, w: &DMatrix<f64>, pi: &Policy, witnesses: &WitnessSet) -> f64 {
    witnesses
        .members()
        .iter()
        .map(|h| clone_objective(mass, w, pi, h))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Picks the class member whose reweighted action distribution is closest to
/// the data, measured through the witness class. Ties go to the lowest index.
pub fn clone_policy(w_hat: &DMatrix<f64>, data: &OfflineDataset, policies: &PolicyClass) -> Result<CloneResult> {
    if policies.is_empty() {
        return Err(Error::Empty("policy class"));
    }
    if data.is_empty() {
        return Err(Error::Empty("cloning dataset"));
    }
    let witnesses = witness_class(policies);
    let mass = &data.stats().counts / data.len() as f64;
    let objectives: Vec<f64> =
        policies.members().par_iter().map(|pi| worst_case(&mass, w_hat, pi, &witnesses)).collect();
    let mut index = 0;
    for (i, val) in objectives.iter().enumerate().skip(1) {
        if *val < objectives[index] {
            index = i;
        }
    }
    Ok(CloneResult { index, policy: policies.members()[index].clone(), objectives })
}

/// Largest gap between the sampled and population witness objectives over the
/// policy class and its witnesses.
pub fn clone_deviation(
    w_hat: &DMatrix<f64>,
    data: &OfflineDataset,
    data_dist: &Occupancy,
    policies: &PolicyClass,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("cloning dataset"));
    }
    let witnesses = witness_class(policies);
    let mass = &data.stats().counts / data.len() as f64;
    let dev = policies
        .members()
        .iter()
        .flat_map(|pi| witnesses.members().iter().map(move |h| (pi, h)))
        .map(|(pi, h)| {
            (clone_objective(&mass, w_hat, pi, h) - clone_objective(data_dist.mass(), w_hat, pi, h)).abs()
        })
        .fold(0.0, f64::max);
    Ok(dev)
}

/// Prefix for estimation, suffix for cloning.
pub fn split_dataset(data: &OfflineDataset, n1: usize) -> Result<(OfflineDataset, OfflineDataset)> {
    data.split(n1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::generate_dataset;
    use crate::mdp::{exact_occupancy, expected_l1_distance, TabularMdp};
    use crate::objective::weighted_l2;
    use crate::oracle::solve_regularized;
    use crate::regularizer::Regularizer;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn behavior_instance(seed: u64) -> (TabularMdp, Policy, Occupancy) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mdp = TabularMdp::random(5, 3, 0.85, &mut rng);
        let pi_d = Policy::random(5, 3, &mut rng);
        let dd = exact_occupancy(&mdp, &pi_d).unwrap();
        (mdp, pi_d, dd)
    }

    #[test]
    fn trivial_weights() {
        let (_, pi_d, _) = behavior_instance(1);
        let out = extract_policy(&DMatrix::from_element(5, 3, 1.0), &pi_d);
        assert!((out.policy.probs() - pi_d.probs()).amax() < 1e-15);
        assert!(out.zero_mass_states.is_empty());
        let out = extract_policy(&DMatrix::zeros(5, 3), &pi_d);
        assert_eq!(out.zero_mass_states, vec![0, 1, 2, 3, 4]);
        assert_eq!(out.policy, Policy::uniform(5, 3));
    }

    #[test]
    fn recovers_regularized_optimum() {
        for seed in 0..10 {
            let (mdp, pi_d, dd) = behavior_instance(seed);
            let sol = solve_regularized(&mdp, &dd, &Regularizer::default(), 0.3, None).unwrap();
            let out = extract_policy(&sol.w_star, &pi_d);
            let marginal = sol.d_star.state_marginal();
            for s in 0..5 {
                if marginal[s] > 1e-10 {
                    for a in 0..3 {
                        assert!((out.policy.prob(s, a) - sol.pi_star.prob(s, a)).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn policy_distance_bounded_by_weight_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for seed in 0..20 {
            let (mdp, pi_d, dd) = behavior_instance(seed);
            let sol = solve_regularized(&mdp, &dd, &Regularizer::default(), 0.5, None).unwrap();
            let noise = DMatrix::from_fn(5, 3, |_, _| rand::Rng::gen_range(&mut rng, -0.5..0.5));
            let w_hat = (&sol.w_star + noise).map(|x| x.max(0.0));
            let pi_hat = extract_policy(&w_hat, &pi_d).policy;
            let lhs = expected_l1_distance(&sol.d_star.state_marginal(), &sol.pi_star, &pi_hat);
            assert!(lhs <= 2.0 * weighted_l2(&dd, &w_hat, &sol.w_star) + 1e-12);
        }
    }

    #[test]
    fn cloning_picks_consistent_member() {
        let (mdp, pi_d, dd) = behavior_instance(3);
        let sol = solve_regularized(&mdp, &dd, &Regularizer::default(), 0.3, None).unwrap();
        let far = Policy::deterministic(&[2, 2, 2, 2, 2], 3);
        let data = generate_dataset(&mdp, &dd, 20_000, 10, 5).unwrap();
        let class = PolicyClass::new(vec![far.clone(), sol.pi_star.clone()]).unwrap();
        let out = clone_policy(&sol.w_star, &data, &class).unwrap();
        assert_eq!(out.index, 1);
        // The population objective at the worst witness is the expected L1
        // distance from the reweighted behavior, which is zero for pi*.
        let pi_hat = extract_policy(&sol.w_star, &pi_d).policy;
        let tv_far = expected_l1_distance(&sol.d_star.state_marginal(), &far, &pi_hat);
        let n2 = data.len() as f64;
        let env = 2.0 * 2.0 * sol.max_weight() * (6.0 * (4.0 * 2.0 / 0.1f64).ln() / n2).sqrt();
        assert!(((out.objectives[0] - out.objectives[1]) - tv_far).abs() <= env);

        let single = PolicyClass::new(vec![sol.pi_star.clone()]).unwrap();
        assert_eq!(clone_policy(&sol.w_star, &data, &single).unwrap().policy, sol.pi_star);
        let zero = clone_policy(&DMatrix::zeros(5, 3), &data, &class).unwrap();
        assert_eq!(zero.index, 0);
        assert!(zero.objectives.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn split_edges() {
        let (mdp, _, dd) = behavior_instance(4);
        let data = generate_dataset(&mdp, &dd, 50, 5, 1).unwrap();
        let (a, b) = split_dataset(&data, 30).unwrap();
        assert_eq!(a.len() + b.len(), 50);
        let class = PolicyClass::new(vec![Policy::uniform(5, 3)]).unwrap();
        let w = DMatrix::from_element(5, 3, 1.0);
        let (_, empty) = split_dataset(&data, 50).unwrap();
        assert!(clone_policy(&w, &empty, &class).is_err());
        let (empty, _) = split_dataset(&data, 0).unwrap();
        assert!(clone_policy(&w, &empty, &class).is_err());
        assert!(split_dataset(&data, 51).is_err());
    }

    proptest! {
        #[test]
        fn rows_normalized_and_scale_free(seed in 0u64..10_000, scale in 1e-3f64..1e3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pi_d = Policy::random(4, 3, &mut rng);
            let w = DMatrix::from_fn(4, 3, |_, _| {
                let x: f64 = rand::Rng::gen_range(&mut rng, -1.0..3.0);
                x.max(0.0)
            });
            let a = extract_policy(&w, &pi_d);
            let b = extract_policy(&(&w * scale), &pi_d);
            for s in 0..4 {
                prop_assert!((a.policy.probs().row(s).sum() - 1.0).abs() < 1e-12);
            }
            prop_assert!((a.policy.probs() - b.policy.probs()).amax() < 1e-12);
        }
    }
}
