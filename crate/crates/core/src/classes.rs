//! Finite function classes: value candidates, weight candidates, policies,
//! and the witness functions used by behavior cloning.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{matrix_from_rows, matrix_rows, Occupancy, Policy, TabularMdp};
use crate::objective::approximation_errors;
use crate::oracle::RegularizedSolution;

/// What a constructor does with a member outside the bound box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMode {
    Reject,
    Clip,
}

/// What happened to a member during construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Enforcement {
    Within,
    Clipped,
}

/// Finite set of state-value vectors confined to a box `[lower, upper]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueClass {
    members: Vec<DVector<f64>>,
    lower: f64,
    upper: f64,
    enforcement: Vec<Enforcement>,
}

impl ValueClass {
    /// Symmetric box `||v||_inf <= bound`.
    pub fn new(members: Vec<DVector<f64>>, bound: f64, mode: BoundMode) -> Result<Self> {
        Self::with_box(members, -bound, bound, mode)
    }

    pub fn with_box(members: Vec<DVector<f64>>, lower: f64, upper: f64, mode: BoundMode) -> Result<Self> {
        if !(lower <= upper) {
            return Err(Error::InvalidArgument(format!("empty value box [{lower}, {upper}]")));
        }
        let mut enforcement = Vec::with_capacity(members.len());
        let mut out = Vec::with_capacity(members.len());
        for (i, v) in members.into_iter().enumerate() {
            let inside = v.iter().all(|&x| x >= lower && x <= upper);
            if inside {
                enforcement.push(Enforcement::Within);
                out.push(v);
            } else {
                match mode {
                    BoundMode::Reject => {
                        return Err(Error::InvalidArgument(format!(
                            "value member {i} leaves the box [{lower}, {upper}]"
                        )))
                    }
                    BoundMode::Clip => {
                        enforcement.push(Enforcement::Clipped);
                        out.push(v.map(|x| x.clamp(lower, upper)));
                    }
                }
            }
        }
        Ok(Self { members: out, lower, upper, enforcement })
    }

    pub fn members(&self) -> &[DVector<f64>] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Sup-norm bound implied by the box.
    pub fn bound(&self) -> f64 {
        self.lower.abs().max(self.upper.abs())
    }

    pub fn bounds_box(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    pub fn enforcement(&self) -> &[Enforcement] {
        &self.enforcement
    }

    pub fn reversed(&self) -> Self {
        let mut out = self.clone();
        out.members.reverse();
        out.enforcement.reverse();
        out
    }
}

/// Lower bound on the behavior-averaged weight at every state.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFloor {
    pub level: f64,
    pub behavior: Policy,
}

impl WeightFloor {
    fn margin(&self, w: &DMatrix<f64>, s: usize) -> f64 {
        (0..w.ncols()).map(|a| self.behavior.prob(s, a) * w[(s, a)]).sum::<f64>() - self.level
    }
}

/// Finite set of nonnegative `(s, a)` weight matrices bounded by `bound`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightClass {
    members: Vec<DMatrix<f64>>,
    bound: f64,
    floor: Option<WeightFloor>,
    enforcement: Vec<Enforcement>,
}

impl WeightClass {
    pub fn new(members: Vec<DMatrix<f64>>, bound: f64, mode: BoundMode) -> Result<Self> {
        Self::with_floor(members, bound, None, mode)
    }

    pub fn with_floor(
        members: Vec<DMatrix<f64>>,
        bound: f64,
        floor: Option<WeightFloor>,
        mode: BoundMode,
    ) -> Result<Self> {
        if !(bound >= 0.0) {
            return Err(Error::InvalidArgument(format!("weight bound must be >= 0, got {bound}")));
        }
        let mut enforcement = Vec::with_capacity(members.len());
        let mut out = Vec::with_capacity(members.len());
        for (i, w) in members.into_iter().enumerate() {
            let boxed = w.iter().all(|&x| (0.0..=bound).contains(&x));
            let floored = floor
                .as_ref()
                .map_or(true, |f| (0..w.nrows()).all(|s| f.margin(&w, s) >= 0.0));
            if boxed && floored {
                enforcement.push(Enforcement::Within);
                out.push(w);
                continue;
            }
            if mode == BoundMode::Reject {
                return Err(Error::InvalidArgument(format!(
                    "weight member {i} violates the box [0, {bound}] or the floor"
                )));
            }
            let mut w = w.map(|x| x.clamp(0.0, bound));
            if let Some(f) = &floor {
                for s in 0..w.nrows() {
                    let deficit = -f.margin(&w, s);
                    if deficit > 0.0 {
                        for a in 0..w.ncols() {
                            w[(s, a)] = (w[(s, a)] + deficit).min(bound);
                        }
                    }
                    if f.margin(&w, s) < -1e-12 {
                        return Err(Error::InvalidArgument(format!(
                            "weight member {i} cannot meet the floor at state {s} inside the box"
                        )));
                    }
                }
            }
            enforcement.push(Enforcement::Clipped);
            out.push(w);
        }
        Ok(Self { members: out, bound, floor, enforcement })
    }

    pub fn members(&self) -> &[DMatrix<f64>] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn floor(&self) -> Option<&WeightFloor> {
        self.floor.as_ref()
    }

    pub fn enforcement(&self) -> &[Enforcement] {
        &self.enforcement
    }

    pub fn reversed(&self) -> Self {
        let mut out = self.clone();
        out.members.reverse();
        out.enforcement.reverse();
        out
    }
}

/// Finite policy class for behavior cloning.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyClass {
    members: Vec<Policy>,
}

impl PolicyClass {
    pub fn new(members: Vec<Policy>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Empty("policy class"));
        }
        let shape = (members[0].num_states(), members[0].num_actions());
        if members.iter().any(|p| (p.num_states(), p.num_actions()) != shape) {
            return Err(Error::Shape("policy class members differ in shape".into()));
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[Policy] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Test functions `h(s, a) ∈ {-1, +1}` attaining the variational l1 distance
/// between pairs of class members.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessSet {
    members: Vec<DMatrix<f64>>,
}

impl WitnessSet {
    pub fn members(&self) -> &[DMatrix<f64>] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// `h(s,a) = +1` where `pi(a|s) >= other(a|s)`, `-1` otherwise.
pub fn witness(pi: &Policy, other: &Policy) -> DMatrix<f64> {
    DMatrix::from_fn(pi.num_states(), pi.num_actions(), |s, a| {
        if pi.prob(s, a) >= other.prob(s, a) {
            1.0
        } else {
            -1.0
        }
    })
}

/// Witnesses for every ordered pair of members, deduplicated in first-seen order.
pub fn witness_class(policies: &PolicyClass) -> WitnessSet {
    let mut members: Vec<DMatrix<f64>> = Vec::new();
    for pi in policies.members() {
        for other in policies.members() {
            let h = witness(pi, other);
            if !members.contains(&h) {
                members.push(h);
            }
        }
    }
    WitnessSet { members }
}

/// How distractor members are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistractorKind {
    /// Uniform over the bound boxes.
    Uniform,
    /// Oracle member plus uniform noise in `[-scale, scale]` per entry, then
    /// clipped. Distractor `k` uses `scales[k % scales.len()]`; value and
    /// weight noise scales are listed separately.
    Perturbed { value_scales: Vec<f64>, weight_scales: Vec<f64> },
}

impl Default for DistractorKind {
    fn default() -> Self {
        DistractorKind::Uniform
    }
}

/// Boxes and distractors for class construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSpec {
    pub num_distractors: usize,
    pub kind: DistractorKind,
    pub value_bound: f64,
    pub weight_bound: f64,
}

/// Classes containing the oracle pair first, followed by seeded distractors.
pub fn build_realizable(
    solution: &RegularizedSolution,
    spec: &ClassSpec,
    seed: u64,
) -> Result<(ValueClass, WeightClass)> {
    build_around(&solution.v_star, &solution.w_star, spec, seed)
}

pub(crate) fn build_around(
    v_star: &DVector<f64>,
    w_star: &DMatrix<f64>,
    spec: &ClassSpec,
    seed: u64,
) -> Result<(ValueClass, WeightClass)> {
    if v_star.amax() > spec.value_bound + 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "target values reach {} beyond the value bound {}",
            v_star.amax(),
            spec.value_bound
        )));
    }
    if w_star.max() > spec.weight_bound + 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "target weights reach {} beyond the weight bound {}",
            w_star.max(),
            spec.weight_bound
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![v_star.map(|x| x.clamp(-spec.value_bound, spec.value_bound))];
    let mut weights = vec![w_star.map(|x| x.clamp(0.0, spec.weight_bound))];
    let (ns, na) = w_star.shape();
    for k in 0..spec.num_distractors {
        let (v, w) = match &spec.kind {
            DistractorKind::Uniform => (
                DVector::from_fn(ns, |_, _| rng.gen_range(-spec.value_bound..=spec.value_bound)),
                DMatrix::from_fn(ns, na, |_, _| rng.gen_range(0.0..=spec.weight_bound)),
            ),
            DistractorKind::Perturbed { value_scales, weight_scales } => {
                let vs = pick(value_scales, k);
                let ws = pick(weight_scales, k);
                (
                    DVector::from_fn(ns, |s, _| v_star[s] + vs * rng.gen_range(-1.0..=1.0)),
                    DMatrix::from_fn(ns, na, |s, a| w_star[(s, a)] + ws * rng.gen_range(-1.0..=1.0)),
                )
            }
        };
        values.push(v);
        weights.push(w);
    }
    Ok((
        ValueClass::new(values, spec.value_bound, BoundMode::Clip)?,
        WeightClass::new(weights, spec.weight_bound, BoundMode::Clip)?,
    ))
}

fn pick(scales: &[f64], k: usize) -> f64 {
    if scales.is_empty() {
        0.0
    } else {
        scales[k % scales.len()]
    }
}

/// Classes whose best members sit at controlled distance from the oracle pair.
#[derive(Debug, Clone)]
pub struct MisspecifiedClasses {
    pub values: ValueClass,
    pub weights: WeightClass,
    pub eps_rv: f64,
    pub eps_rw: f64,
}

/// Replaces the oracle pair by `v* + c` and `w* + c` (on covered cells,
/// clipped), keeps the distractors, and reports the realized approximation
/// errors.
pub fn build_misspecified(
    mdp: &TabularMdp,
    data_dist: &Occupancy,
    solution: &RegularizedSolution,
    perturbation: f64,
    spec: &ClassSpec,
    seed: u64,
) -> Result<MisspecifiedClasses> {
    if !(perturbation >= 0.0) {
        return Err(Error::InvalidArgument(format!("perturbation must be >= 0, got {perturbation}")));
    }
    let (values, weights) = build_realizable(solution, spec, seed)?;
    let mut vs = values.members().to_vec();
    let mut ws = weights.members().to_vec();
    vs[0] = solution.v_star.add_scalar(perturbation);
    ws[0] = DMatrix::from_fn(ws[0].nrows(), ws[0].ncols(), |s, a| {
        if data_dist.get(s, a) > 0.0 {
            solution.w_star[(s, a)] + perturbation
        } else {
            solution.w_star[(s, a)]
        }
    });
    let values = ValueClass::new(vs, spec.value_bound, BoundMode::Clip)?;
    let weights = WeightClass::new(ws, spec.weight_bound, BoundMode::Clip)?;
    let (eps_rv, eps_rw) = approximation_errors(
        mdp,
        data_dist,
        &solution.v_star,
        &solution.w_star,
        values.members(),
        weights.members(),
    )?;
    Ok(MisspecifiedClasses { values, weights, eps_rv, eps_rw })
}

/// JSON layout of a value/weight class pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassFile {
    pub value_bound: f64,
    pub values: Vec<Vec<f64>>,
    pub weight_bound: f64,
    pub weights: Vec<Vec<Vec<f64>>>,
}

impl ClassFile {
    pub fn from_classes(values: &ValueClass, weights: &WeightClass) -> Self {
        Self {
            value_bound: values.bound(),
            values: values.members().iter().map(|v| v.iter().copied().collect()).collect(),
            weight_bound: weights.bound(),
            weights: weights.members().iter().map(matrix_rows).collect(),
        }
    }

    pub fn into_classes(self, mode: BoundMode) -> Result<(ValueClass, WeightClass)> {
        let values = self.values.into_iter().map(DVector::from_vec).collect();
        let weights = self
            .weights
            .iter()
            .map(|rows| matrix_from_rows(rows))
            .collect::<Result<Vec<_>>>()?;
        Ok((
            ValueClass::new(values, self.value_bound, mode)?,
            WeightClass::new(weights, self.weight_bound, mode)?,
        ))
    }
}

/// JSON layout of a policy class.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyClassFile {
    pub policies: Vec<Vec<Vec<f64>>>,
}

impl PolicyClassFile {
    pub fn from_class(class: &PolicyClass) -> Self {
        Self { policies: class.members().iter().map(Policy::to_rows).collect() }
    }

    pub fn into_class(self) -> Result<PolicyClass> {
        PolicyClass::new(self.policies.into_iter().map(Policy::from_rows).collect::<Result<_>>()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{exact_occupancy, expected_l1_distance};
    use crate::oracle::solve_regularized;
    use crate::regularizer::Regularizer;
    use proptest::prelude::*;
    use rand::Rng;

    fn solved(seed: u64) -> (TabularMdp, Occupancy, RegularizedSolution) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mdp = TabularMdp::random(4, 2, 0.8, &mut rng);
        let dd = exact_occupancy(&mdp, &Policy::random(4, 2, &mut rng)).unwrap();
        let sol = solve_regularized(&mdp, &dd, &Regularizer::default(), 0.5, None).unwrap();
        (mdp, dd, sol)
    }

    fn spec(sol: &RegularizedSolution, n: usize) -> ClassSpec {
        ClassSpec {
            num_distractors: n,
            kind: DistractorKind::Uniform,
            value_bound: sol.v_star.amax() * 2.0 + 1.0,
            weight_bound: sol.w_star.max() * 1.5,
        }
    }

    #[test]
    fn singleton_classes() {
        let (_, _, sol) = solved(1);
        let (v, w) = build_realizable(&sol, &spec(&sol, 0), 3).unwrap();
        assert_eq!(v.members(), &[sol.v_star.clone()]);
        assert_eq!(w.members(), &[sol.w_star.clone()]);
    }

    #[test]
    fn distractors_respect_bounds_and_seed() {
        let (_, _, sol) = solved(2);
        for kind in [
            DistractorKind::Uniform,
            DistractorKind::Perturbed { value_scales: vec![10.0], weight_scales: vec![0.1, 50.0] },
        ] {
            let sp = ClassSpec { kind, ..spec(&sol, 20) };
            let (v, w) = build_realizable(&sol, &sp, 9).unwrap();
            assert_eq!((v.len(), w.len()), (21, 21));
            assert!(v.members().iter().all(|m| m.amax() <= sp.value_bound));
            assert!(w.members().iter().all(|m| m.min() >= 0.0 && m.max() <= sp.weight_bound));
            let again = build_realizable(&sol, &sp, 9).unwrap();
            assert_eq!((v, w), again);
        }
    }

    #[test]
    fn reject_and_clip_are_recorded() {
        let v = vec![DVector::from_vec(vec![0.5, 3.0])];
        assert!(ValueClass::new(v.clone(), 1.0, BoundMode::Reject).is_err());
        let c = ValueClass::new(v, 1.0, BoundMode::Clip).unwrap();
        assert_eq!(c.enforcement(), &[Enforcement::Clipped]);
        assert_eq!(c.members()[0][1], 1.0);

        let floor = WeightFloor { level: 0.5, behavior: Policy::uniform(2, 2) };
        let w = vec![DMatrix::from_row_slice(2, 2, &[0.1, 0.1, 1.0, 1.0])];
        let c = WeightClass::with_floor(w.clone(), 2.0, Some(floor.clone()), BoundMode::Clip).unwrap();
        assert_eq!(c.enforcement(), &[Enforcement::Clipped]);
        assert!((c.members()[0][(0, 0)] - 0.5).abs() < 1e-12);
        assert!(WeightClass::with_floor(w, 2.0, Some(floor), BoundMode::Reject).is_err());
    }

    #[test]
    fn misspecified_errors() {
        let (mdp, dd, sol) = solved(3);
        let sp = spec(&sol, 0);
        let m = build_misspecified(&mdp, &dd, &sol, 0.0, &sp, 1).unwrap();
        assert_eq!((m.eps_rv, m.eps_rw), (0.0, 0.0));
        let c = 0.05;
        let m = build_misspecified(&mdp, &dd, &sol, c, &sp, 1).unwrap();
        assert!((m.eps_rv - 3.0 * c).abs() < 1e-12);
        assert!((m.eps_rw - c).abs() < 1e-12);
    }

    #[test]
    fn witness_cases() {
        let pi = Policy::deterministic(&[0, 1, 1], 2);
        let h = witness(&pi, &pi);
        assert!(h.iter().all(|&x| x == 1.0));
        let other = Policy::deterministic(&[0, 0, 1], 2);
        let h = witness(&pi, &other);
        assert_eq!(h, DMatrix::from_row_slice(3, 2, &[1.0, 1.0, -1.0, 1.0, 1.0, 1.0]));
        let set = witness_class(&PolicyClass::new(vec![pi.clone(), pi]).unwrap());
        assert_eq!(set.len(), 1);
    }

    #[test]
    fn class_file_round_trip() {
        let (_, _, sol) = solved(4);
        let (v, w) = build_realizable(&sol, &spec(&sol, 3), 2).unwrap();
        let file = ClassFile::from_classes(&v, &w);
        let text = serde_json::to_string(&file).unwrap();
        let (v2, w2) = serde_json::from_str::<ClassFile>(&text).unwrap().into_classes(BoundMode::Reject).unwrap();
        assert_eq!(v.members(), v2.members());
        assert_eq!(w.members(), w2.members());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn witness_recovers_l1(seed in 0u64..1_000_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (ns, na) = (rng.gen_range(1..6), rng.gen_range(2..5));
            let pi = Policy::random(ns, na, &mut rng);
            let other = Policy::random(ns, na, &mut rng);
            let d = DVector::from_fn(ns, |_, _| rng.gen::<f64>());
            let h = witness(&pi, &other);
            let lhs: f64 = (0..ns)
                .map(|s| d[s] * (0..na).map(|a| (pi.prob(s, a) - other.prob(s, a)) * h[(s, a)]).sum::<f64>())
                .sum();
            prop_assert!((lhs - expected_l1_distance(&d, &pi, &other)).abs() < 1e-12);
        }
    }
}
