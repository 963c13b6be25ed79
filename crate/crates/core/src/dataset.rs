//! Offline datasets of i.i.d. transitions plus initial-state samples.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Occupancy, TabularMdp};

/// One logged transition `(s, a, r, s')`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub s: usize,
    pub a: usize,
    pub r: f64,
    pub sp: usize,
}

/// Sufficient statistics of a dataset for evaluating the empirical objective.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    /// Visit counts `N(s, a)`.
    pub counts: DMatrix<f64>,
    /// Summed rewards per cell.
    pub reward_sums: DMatrix<f64>,
    /// Sparse next-state counts per cell, indexed `s * A + a`.
    pub next_counts: Vec<Vec<(usize, f64)>>,
    /// Counts of each initial state.
    pub init_counts: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfflineDataset {
    num_states: usize,
    num_actions: usize,
    gamma: f64,
    transitions: Vec<Transition>,
    init_states: Vec<usize>,
    generating_dist: Option<Occupancy>,
    seed: Option<u64>,
    stats: DatasetStats,
}

impl OfflineDataset {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        gamma: f64,
        transitions: Vec<Transition>,
        init_states: Vec<usize>,
    ) -> Result<Self> {
        for (i, t) in transitions.iter().enumerate() {
            if t.s >= num_states || t.sp >= num_states || t.a >= num_actions {
                return Err(Error::InvalidArgument(format!(
                    "transition {i} {t:?} is out of range for {num_states} states / {num_actions} actions"
                )));
            }
            if !t.r.is_finite() {
                return Err(Error::InvalidArgument(format!("transition {i} has non-finite reward")));
            }
        }
        if let Some(&s) = init_states.iter().find(|&&s| s >= num_states) {
            return Err(Error::InvalidArgument(format!("initial state {s} out of range")));
        }
        let stats = aggregate(num_states, num_actions, &transitions, &init_states);
        Ok(Self {
            num_states,
            num_actions,
            gamma,
            transitions,
            init_states,
            generating_dist: None,
            seed: None,
            stats,
        })
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

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn init_states(&self) -> &[usize] {
        &self.init_states
    }

    /// Number of transitions `n`.
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Number of initial-state samples `n0`.
    pub fn num_init(&self) -> usize {
        self.init_states.len()
    }

    pub fn generating_dist(&self) -> Option<&Occupancy> {
        self.generating_dist.as_ref()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn stats(&self) -> &DatasetStats {
        &self.stats
    }

    /// Splits transitions into a prefix of `n1` and the remaining suffix. Both
    /// halves keep all initial-state samples.
    pub fn split(&self, n1: usize) -> Result<(OfflineDataset, OfflineDataset)> {
        if n1 > self.len() {
            return Err(Error::InvalidArgument(format!(
                "split point {n1} exceeds dataset size {}",
                self.len()
            )));
        }
        let make = |ts: &[Transition]| -> Result<OfflineDataset> {
            let mut out = OfflineDataset::new(
                self.num_states,
                self.num_actions,
                self.gamma,
                ts.to_vec(),
                self.init_states.clone(),
            )?;
            out.generating_dist = self.generating_dist.clone();
            out.seed = self.seed;
            Ok(out)
        };
        Ok((make(&self.transitions[..n1])?, make(&self.transitions[n1..])?))
    }

    /// Writes one JSON object per line.
    pub fn write_transitions_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for t in &self.transitions {
            serde_json::to_writer(&mut out, t)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Writes one initial state id per line.
    pub fn write_init_states<W: Write>(&self, mut out: W) -> Result<()> {
        for s in &self.init_states {
            writeln!(out, "{s}")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R1: BufRead, R2: BufRead>(
        num_states: usize,
        num_actions: usize,
        gamma: f64,
        transitions: R1,
        init_states: R2,
    ) -> Result<Self> {
        let mut ts = Vec::new();
        for line in transitions.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            ts.push(serde_json::from_str::<Transition>(&line)?);
        }
        let mut init = Vec::new();
        for line in init_states.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            init.push(serde_json::from_str::<usize>(line.trim())?);
        }
        Self::new(num_states, num_actions, gamma, ts, init)
    }
}

fn aggregate(
    num_states: usize,
    num_actions: usize,
    transitions: &[Transition],
    init_states: &[usize],
) -> DatasetStats {
    let mut counts = DMatrix::zeros(num_states, num_actions);
    let mut reward_sums = DMatrix::zeros(num_states, num_actions);
    let mut dense_next = vec![std::collections::BTreeMap::<usize, f64>::new(); num_states * num_actions];
    for t in transitions {
        counts[(t.s, t.a)] += 1.0;
        reward_sums[(t.s, t.a)] += t.r;
        *dense_next[t.s * num_actions + t.a].entry(t.sp).or_insert(0.0) += 1.0;
    }
    let next_counts = dense_next.into_iter().map(|m| m.into_iter().collect()).collect();
    let mut init_counts = DVector::zeros(num_states);
    for &s in init_states {
        init_counts[s] += 1.0;
    }
    DatasetStats {
        counts,
        reward_sums,
        next_counts,
        init_counts,
    }
}

/// Draws `n` transitions with `(s, a) ~ data_dist`, `s' ~ P(.|s,a)` and `n0`
/// initial states from `mu_0`. Fully determined by `seed`.
pub fn generate_dataset(
    mdp: &TabularMdp,
    data_dist: &Occupancy,
    n: usize,
    n0: usize,
    seed: u64,
) -> Result<OfflineDataset> {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    if data_dist.mass().shape() != (ns, na) {
        return Err(Error::Shape("data distribution does not match the MDP".into()));
    }
    let total = data_dist.total();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "data distribution sums to {total}, expected 1"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cell_cdf = cumulative((0..ns * na).map(|i| data_dist.get(i / na, i % na)));
    let init_cdf = cumulative(mdp.init_dist().iter().copied());
    let next_cdfs: Vec<Vec<f64>> = (0..ns * na)
        .map(|i| cumulative(mdp.next_dist(i / na, i % na).iter().copied()))
        .collect();
    let mut transitions = Vec::with_capacity(n);
    for _ in 0..n {
        let cell = sample_cdf(&cell_cdf, rng.gen());
        let (s, a) = (cell / na, cell % na);
        let sp = sample_cdf(&next_cdfs[cell], rng.gen());
        transitions.push(Transition {
            s,
            a,
            r: mdp.r(s, a),
            sp,
        });
    }
    let init_states = (0..n0).map(|_| sample_cdf(&init_cdf, rng.gen())).collect();
    let mut data = OfflineDataset::new(ns, na, mdp.gamma(), transitions, init_states)?;
    data.generating_dist = Some(data_dist.clone());
    data.seed = Some(seed);
    Ok(data)
}

fn cumulative(weights: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

/// Inverse-CDF draw. Zero-weight entries are never returned because the
/// search finds the first index whose cumulative mass strictly exceeds `u`.
fn sample_cdf(cdf: &[f64], u: f64) -> usize {
    let target = u * cdf[cdf.len() - 1];
    let idx = cdf.partition_point(|&c| c <= target);
    // Guard against round-off at the upper end landing on a trailing zero cell.
    let mut i = idx.min(cdf.len() - 1);
    while i > 0 && cdf[i] == cdf[i - 1] {
        i -= 1;
    }
    i
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{exact_occupancy, Policy};

    fn setup() -> (TabularMdp, Occupancy) {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mdp = TabularMdp::random(4, 2, 0.8, &mut rng);
        let d = exact_occupancy(&mdp, &Policy::random(4, 2, &mut rng)).unwrap();
        (mdp, d)
    }

    #[test]
    fn empty_dataset() {
        let (mdp, d) = setup();
        let data = generate_dataset(&mdp, &d, 0, 0, 1).unwrap();
        assert!(data.is_empty());
        assert_eq!(data.num_init(), 0);
    }

    #[test]
    fn cell_frequencies_match_distribution() {
        let (mdp, d) = setup();
        let n = 1_000_000;
        let data = generate_dataset(&mdp, &d, n, 10, 99).unwrap();
        let counts = &data.stats().counts;
        for s in 0..4 {
            for a in 0..2 {
                let p = d.get(s, a);
                let se = (p * (1.0 - p) / n as f64).sqrt();
                let freq = counts[(s, a)] / n as f64;
                assert!((freq - p).abs() < 3.0 * se + 1e-12, "cell ({s},{a}) {freq} vs {p}");
            }
        }
    }

    #[test]
    fn seeded_generation_is_byte_identical() {
        let (mdp, d) = setup();
        let bytes = |seed| {
            let data = generate_dataset(&mdp, &d, 500, 50, seed).unwrap();
            let mut buf = Vec::new();
            data.write_transitions_jsonl(&mut buf).unwrap();
            data.write_init_states(&mut buf).unwrap();
            buf
        };
        assert_eq!(bytes(3), bytes(3));
        assert_ne!(bytes(3), bytes(4));
    }

    #[test]
    fn rewards_match_source() {
        let (mdp, d) = setup();
        let data = generate_dataset(&mdp, &d, 1000, 10, 5).unwrap();
        for t in data.transitions() {
            assert_eq!(t.r, mdp.r(t.s, t.a));
            assert!(d.get(t.s, t.a) > 0.0);
        }
    }

    #[test]
    fn jsonl_reads_back() {
        let (mdp, d) = setup();
        let data = generate_dataset(&mdp, &d, 200, 20, 8).unwrap();
        let (mut ts, mut init) = (Vec::new(), Vec::new());
        data.write_transitions_jsonl(&mut ts).unwrap();
        data.write_init_states(&mut init).unwrap();
        let back = OfflineDataset::read_jsonl(4, 2, 0.8, &ts[..], &init[..]).unwrap();
        assert_eq!(back.transitions(), data.transitions());
        assert_eq!(back.init_states(), data.init_states());
        let line = std::str::from_utf8(&ts).unwrap().lines().next().unwrap();
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        for key in ["s", "a", "r", "sp"] {
            assert!(v.get(key).is_some());
        }
    }

    #[test]
    fn split_sizes() {
        let (mdp, d) = setup();
        let data = generate_dataset(&mdp, &d, 100, 10, 2).unwrap();
        let (a, b) = data.split(90).unwrap();
        assert_eq!(a.len() + b.len(), 100);
        assert_eq!(&data.transitions()[90..], b.transitions());
        assert!(data.split(101).is_err());
    }

    #[test]
    fn zero_weight_cells_never_drawn() {
        let cdf = cumulative([0.0, 0.5, 0.0, 0.5, 0.0].into_iter());
        for k in 0..=1000 {
            let i = sample_cdf(&cdf, k as f64 / 1000.0 * (1.0 - 1e-16));
            assert!(i == 1 || i == 3, "drew {i}");
        }
    }
}
