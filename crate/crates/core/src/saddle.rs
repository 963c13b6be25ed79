//! Max-min estimation over finite classes by full enumeration.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::classes::{ValueClass, WeightClass};
use crate::dataset::OfflineDataset;
use crate::error::{Error, Result};
use crate::mdp::{Occupancy, TabularMdp};
use crate::objective::{EmpiricalObjective, LagrangianTerms, PopulationObjective};
use crate::oracle::RegularizedSolution;
use crate::regularizer::Regularizer;

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleSolution {
    pub w_index: usize,
    pub v_index: usize,
    pub w_hat: DMatrix<f64>,
    pub v_hat: DVector<f64>,
    /// Objective at the returned pair.
    pub value: f64,
    /// `L(v_hat, w_hat) - min_v L(v, w_hat)`.
    pub eps_ov: f64,
    /// `max_w min_v L(v, w) - min_v L(v, w_hat)`.
    pub eps_ow: f64,
}

/// `M[i, j] = L(values[j], weights[i])`, rows evaluated in parallel.
pub fn value_matrix<T: LagrangianTerms>(
    terms: &T,
    reg: &Regularizer,
    alpha: f64,
    values: &[DVector<f64>],
    weights: &[DMatrix<f64>],
) -> DMatrix<f64> {
    let parts: Vec<(f64, DMatrix<f64>)> = values
        .par_iter()
        .map(|v| (terms.init_mean(v), terms.weighted_residual(v)))
        .collect();
    let rows: Vec<Vec<f64>> = weights
        .par_iter()
        .map(|w| {
            let penalty = terms.penalty(reg, w);
            parts
                .iter()
                .map(|(init, resid)| terms.lagrangian_from_parts(*init, resid.component_mul(w).sum(), penalty, alpha))
                .collect()
        })
        .collect();
    DMatrix::from_fn(weights.len(), values.len(), |i, j| rows[i][j])
}

/// Per-row minimum and its first attaining column.
fn row_minima(m: &DMatrix<f64>) -> Vec<(f64, usize)> {
    (0..m.nrows())
        .map(|i| {
            let mut best = (m[(i, 0)], 0);
            for j in 1..m.ncols() {
                if m[(i, j)] < best.0 {
                    best = (m[(i, j)], j);
                }
            }
            best
        })
        .collect()
}

fn check_classes(values: &ValueClass, weights: &WeightClass) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Empty("value class"));
    }
    if weights.is_empty() {
        return Err(Error::Empty("weight class"));
    }
    Ok(())
}

/// Exact max-min over the classes for any objective. Ties go to the lowest
/// index, for both the inner minimum and the outer maximum.
pub fn solve_exact_with<T: LagrangianTerms>(
    terms: &T,
    values: &ValueClass,
    weights: &WeightClass,
    reg: &Regularizer,
    alpha: f64,
) -> Result<SaddleSolution> {
    check_classes(values, weights)?;
    let m = value_matrix(terms, reg, alpha, values.members(), weights.members());
    let minima = row_minima(&m);
    let mut best = 0;
    for (i, (val, _)) in minima.iter().enumerate().skip(1) {
        if *val > minima[best].0 {
            best = i;
        }
    }
    let (value, v_index) = minima[best];
    Ok(SaddleSolution {
        w_index: best,
        v_index,
        w_hat: weights.members()[best].clone(),
        v_hat: values.members()[v_index].clone(),
        value,
        eps_ov: 0.0,
        eps_ow: 0.0,
    })
}

/// Exact max-min of the empirical objective.
pub fn solve_exact(
    data: &OfflineDataset,
    values: &ValueClass,
    weights: &WeightClass,
    reg: &Regularizer,
    alpha: f64,
) -> Result<SaddleSolution> {
    solve_exact_with(&EmpiricalObjective::new(data)?, values, weights, reg, alpha)
}

/// Picks uniformly among pairs whose inner and outer suboptimality stay
/// within the given slacks.
#[allow(clippy::too_many_arguments)]
pub fn solve_inexact_with<T: LagrangianTerms>(
    terms: &T,
    values: &ValueClass,
    weights: &WeightClass,
    reg: &Regularizer,
    alpha: f64,
    eps_ov: f64,
    eps_ow: f64,
    seed: u64,
) -> Result<SaddleSolution> {
    if !(eps_ov >= 0.0 && eps_ow >= 0.0) {
        return Err(Error::InvalidArgument("optimization slacks must be >= 0".into()));
    }
    if eps_ov == 0.0 && eps_ow == 0.0 {
        return solve_exact_with(terms, values, weights, reg, alpha);
    }
    check_classes(values, weights)?;
    let m = value_matrix(terms, reg, alpha, values.members(), weights.members());
    let minima = row_minima(&m);
    let top = minima.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let candidates: Vec<(usize, usize)> = (0..m.nrows())
        .filter(|&i| top - minima[i].0 <= eps_ow)
        .flat_map(|i| {
            let row_min = minima[i].0;
            let m = &m;
            (0..m.ncols())
                .filter(move |&j| m[(i, j)] - row_min <= eps_ov)
                .map(move |j| (i, j))
        })
        .collect();
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no pair meets the requested slacks".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (i, j) = candidates[rng.gen_range(0..candidates.len())];
    Ok(SaddleSolution {
        w_index: i,
        v_index: j,
        w_hat: weights.members()[i].clone(),
        v_hat: values.members()[j].clone(),
        value: m[(i, j)],
        eps_ov: m[(i, j)] - minima[i].0,
        eps_ow: top - minima[i].0,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn solve_inexact(
    data: &OfflineDataset,
    values: &ValueClass,
    weights: &WeightClass,
    reg: &Regularizer,
    alpha: f64,
    eps_ov: f64,
    eps_ow: f64,
    seed: u64,
) -> Result<SaddleSolution> {
    solve_inexact_with(&EmpiricalObjective::new(data)?, values, weights, reg, alpha, eps_ov, eps_ow, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SaddleCheckStatus {
    Passed,
    Failed,
    NotRealizable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SaddleCheck {
    pub status: SaddleCheckStatus,
    /// `min_v L(v, w*) - max_w min_v L(v, w)`; nonnegative up to round-off when
    /// the check passes.
    pub margin: f64,
}

const MEMBER_MATCH_TOL: f64 = 1e-12;

/// Verifies that the oracle pair is a max-min point of the population
/// objective restricted to the classes.
pub fn population_saddle_check(
    mdp: &TabularMdp,
    data_dist: &Occupancy,
    reg: &Regularizer,
    solution: &RegularizedSolution,
    values: &ValueClass,
    weights: &WeightClass,
) -> Result<SaddleCheck> {
    check_classes(values, weights)?;
    let has_v = values.members().iter().any(|v| (v - &solution.v_star).amax() <= MEMBER_MATCH_TOL);
    let w_pos = weights.members().iter().position(|w| (w - &solution.w_star).amax() <= MEMBER_MATCH_TOL);
    let Some(w_pos) = w_pos.filter(|_| has_v) else {
        return Ok(SaddleCheck { status: SaddleCheckStatus::NotRealizable, margin: f64::NAN });
    };
    let pop = PopulationObjective::new(mdp, data_dist)?;
    let m = value_matrix(&pop, reg, solution.alpha, values.members(), weights.members());
    let minima = row_minima(&m);
    let top = minima.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let margin = minima[w_pos].0 - top;
    let status = if margin >= -1e-10 { SaddleCheckStatus::Passed } else { SaddleCheckStatus::Failed };
    Ok(SaddleCheck { status, margin })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::{build_realizable, BoundMode, ClassSpec, DistractorKind};
    use crate::dataset::generate_dataset;
    use crate::mdp::{exact_occupancy, Policy};
    use crate::objective::empirical_lagrangian;
    use crate::oracle::solve_regularized;

    struct Fixture {
        mdp: TabularMdp,
        dd: Occupancy,
        sol: RegularizedSolution,
    }

    fn fixture(seed: u64) -> Fixture {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mdp = TabularMdp::random(4, 2, 0.8, &mut rng);
        let dd = exact_occupancy(&mdp, &Policy::random(4, 2, &mut rng)).unwrap();
        let sol = solve_regularized(&mdp, &dd, &Regularizer::default(), 0.5, None).unwrap();
        Fixture { mdp, dd, sol }
    }

    fn classes(f: &Fixture, n: usize, seed: u64) -> (ValueClass, WeightClass) {
        let spec = ClassSpec {
            num_distractors: n,
            kind: DistractorKind::Uniform,
            value_bound: f.sol.v_star.amax() + 1.0,
            weight_bound: f.sol.w_star.max() + 1.0,
        };
        build_realizable(&f.sol, &spec, seed).unwrap()
    }

    #[test]
    fn singleton_returns_members() {
        let f = fixture(1);
        let (v, w) = classes(&f, 0, 0);
        let data = generate_dataset(&f.mdp, &f.dd, 100, 100, 1).unwrap();
        let sol = solve_exact(&data, &v, &w, &Regularizer::default(), 0.5).unwrap();
        assert_eq!((sol.w_index, sol.v_index), (0, 0));
        assert_eq!(sol.w_hat, f.sol.w_star);
    }

    #[test]
    fn matches_double_loop() {
        let f = fixture(2);
        let (v, w) = classes(&f, 2, 5);
        let data = generate_dataset(&f.mdp, &f.dd, 500, 100, 2).unwrap();
        let reg = Regularizer::default();
        let sol = solve_exact(&data, &v, &w, &reg, 0.5).unwrap();
        let mut best = (f64::NEG_INFINITY, 0, 0);
        for (i, wi) in w.members().iter().enumerate() {
            let mut inner = (f64::INFINITY, 0);
            for (j, vj) in v.members().iter().enumerate() {
                let l = empirical_lagrangian(&data, &reg, 0.5, vj, wi).unwrap();
                if l < inner.0 {
                    inner = (l, j);
                }
            }
            if inner.0 > best.0 {
                best = (inner.0, i, inner.1);
            }
        }
        assert_eq!((sol.w_index, sol.v_index), (best.1, best.2));
        assert!((sol.value - best.0).abs() < 1e-12);
    }

    #[test]
    fn inexact_slacks() {
        let f = fixture(3);
        let (v, w) = classes(&f, 6, 1);
        let reg = Regularizer::default();
        let data = generate_dataset(&f.mdp, &f.dd, 300, 100, 3).unwrap();
        let exact = solve_exact(&data, &v, &w, &reg, 0.5).unwrap();
        assert_eq!(solve_inexact(&data, &v, &w, &reg, 0.5, 0.0, 0.0, 9).unwrap(), exact);
        for seed in 0..100 {
            let (ov, ow) = (0.01 * (seed % 7) as f64, 0.02 * (seed % 5) as f64);
            let got = solve_inexact(&data, &v, &w, &reg, 0.5, ov, ow, seed).unwrap();
            assert!(got.eps_ov <= ov + 1e-15 && got.eps_ow <= ow + 1e-15);
            let emp = EmpiricalObjective::new(&data).unwrap();
            let m = value_matrix(&emp, &reg, 0.5, v.members(), w.members());
            let row_min = m.row(got.w_index).min();
            assert!((got.eps_ov - (m[(got.w_index, got.v_index)] - row_min)).abs() < 1e-15);
        }
        let loose = solve_inexact(&data, &v, &w, &reg, 0.5, f64::INFINITY, f64::INFINITY, 4).unwrap();
        assert!(loose.eps_ov.is_finite() && loose.eps_ow.is_finite());
    }

    #[test]
    fn population_check_statuses() {
        let f = fixture(4);
        let reg = Regularizer::default();
        for seed in 0..10 {
            let (v, w) = classes(&f, 20, seed);
            let check = population_saddle_check(&f.mdp, &f.dd, &reg, &f.sol, &v, &w).unwrap();
            assert_eq!(check.status, SaddleCheckStatus::Passed, "seed {seed}: {}", check.margin);
        }
        let (v, _) = classes(&f, 0, 0);
        let only_other = WeightClass::new(vec![DMatrix::from_element(4, 2, 0.5)], 2.0, BoundMode::Reject).unwrap();
        let check = population_saddle_check(&f.mdp, &f.dd, &reg, &f.sol, &v, &only_other).unwrap();
        assert_eq!(check.status, SaddleCheckStatus::NotRealizable);
    }

    #[test]
    fn empty_inputs_fail() {
        let f = fixture(5);
        let (v, w) = classes(&f, 0, 0);
        let empty = OfflineDataset::new(4, 2, 0.8, vec![], vec![0]).unwrap();
        assert!(solve_exact(&empty, &v, &w, &Regularizer::default(), 0.5).is_err());
        let none = WeightClass::new(vec![], 1.0, BoundMode::Reject).unwrap();
        let data = generate_dataset(&f.mdp, &f.dd, 10, 10, 1).unwrap();
        assert!(solve_exact(&data, &v, &none, &Regularizer::default(), 0.5).is_err());
    }
}
