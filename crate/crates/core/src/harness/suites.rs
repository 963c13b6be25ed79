//! Grid sweeps over sample size, regularization strength and seeds.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, MdpSource};
use super::pipeline::{prepare, Prepared, RunRow};
use super::report::{fit_loglog, mean, median, write_csv, Chart, Series, SlopeFit};
use crate::classes::DistractorKind;
use crate::error::{Error, Result};
use crate::objective::population_lagrangian;
use crate::oracle::{lp_stability_sweep, min_divergence_optimal_weights};

/// Axis along which the slope is fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    #[default]
    N,
    N2,
}

/// Per-point aggregate fed to the slope fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    #[default]
    Median,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub name: String,
    pub base: ExperimentConfig,
    /// Defaults to `base.n`.
    #[serde(default)]
    pub n_grid: Vec<usize>,
    /// Fixes `n0` across the grid; otherwise `n0 = n`.
    #[serde(default)]
    pub n0: Option<usize>,
    /// Defaults to `base.alpha`.
    #[serde(default)]
    pub alpha_grid: Vec<f64>,
    /// Cloning sample sizes; requires a cloning section in `base`.
    #[serde(default)]
    pub n2_grid: Vec<usize>,
    /// Extra MDP sources; defaults to `base.mdp`.
    #[serde(default)]
    pub mdp_grid: Vec<MdpSource>,
    #[serde(default = "default_seeds")]
    pub seeds: u64,
    #[serde(default)]
    pub base_seed: u64,
    /// Row column whose per-point aggregate is fitted against the sweep axis.
    #[serde(default = "default_metric")]
    pub slope_metric: String,
    #[serde(default)]
    pub statistic: Statistic,
    #[serde(default)]
    pub axis: SweepAxis,
}

fn default_seeds() -> u64 {
    20
}

fn default_metric() -> String {
    "realized_gap".into()
}

/// Aggregates over the seeds of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub config_hash: String,
    pub series: String,
    pub alpha: f64,
    pub n: usize,
    pub n2: Option<usize>,
    pub runs: usize,
    pub medians: BTreeMap<String, f64>,
    pub means: BTreeMap<String, f64>,
    /// Share of runs with `max_deviation > eps_stat`.
    pub deviation_exceeds_eps: Option<f64>,
    /// Share of runs with `realized_gap <= rhs_gap`.
    pub gap_within_rhs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesFit {
    pub series: String,
    pub metric: String,
    pub fit: Option<SlopeFit>,
    /// Point aggregates in sweep order.
    pub medians: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub suite: String,
    pub groups: Vec<GroupSummary>,
    pub fits: Vec<SeriesFit>,
    /// Named scalar checks specific to a suite.
    pub certificates: BTreeMap<String, f64>,
}

#[derive(Debug, Clone)]
pub struct SuiteOutput {
    pub rows: Vec<RunRow>,
    pub summary: SuiteSummary,
}

const SUMMARY_METRICS: [&str; 12] = [
    "realized_gap",
    "gap_unregularized",
    "gap_comparator",
    "weight_error",
    "policy_l1",
    "max_deviation",
    "eps_stat",
    "rhs_theorem1",
    "rhs_realized",
    "bc_policy_l1",
    "bc_deviation",
    "clone_term",
];

/// Reads a numeric column of a row by name.
pub fn metric(row: &RunRow, name: &str) -> Option<f64> {
    serde_json::to_value(row).ok()?.get(name)?.as_f64()
}

fn series_label(mdp: &MdpSource, alpha: f64, n2: Option<usize>, axis: SweepAxis, n: usize) -> String {
    let source = match mdp {
        MdpSource::Random { seed, .. } => format!("random-{seed}"),
        MdpSource::File { path } => path.display().to_string(),
        MdpSource::Inline { .. } => "inline".into(),
        MdpSource::Counterexample { instance, .. } => format!("counterexample-{instance}"),
        MdpSource::TiedActions => "tied-actions".into(),
    };
    match (axis, n2) {
        (SweepAxis::N2, _) => format!("{source} alpha={alpha} n={n}"),
        (SweepAxis::N, Some(n2)) => format!("{source} alpha={alpha} n2={n2}"),
        (SweepAxis::N, None) => format!("{source} alpha={alpha}"),
    }
}

struct Point {
    prepared: usize,
    series: String,
    n: usize,
    n2: Option<usize>,
}

impl SuiteConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    fn grids(&self) -> (Vec<MdpSource>, Vec<f64>, Vec<Option<usize>>, Vec<usize>) {
        let mdps = if self.mdp_grid.is_empty() { vec![self.base.mdp.clone()] } else { self.mdp_grid.clone() };
        let alphas = if self.alpha_grid.is_empty() { vec![self.base.alpha] } else { self.alpha_grid.clone() };
        let n2s = if self.n2_grid.is_empty() { vec![None] } else { self.n2_grid.iter().map(|&x| Some(x)).collect() };
        let ns = if self.n_grid.is_empty() { vec![self.base.n] } else { self.n_grid.clone() };
        (mdps, alphas, n2s, ns)
    }

    /// Runs every grid point and seed, sorted by `(config_hash, seed)`.
    pub fn run(&self) -> Result<SuiteOutput> {
        if self.seeds == 0 {
            return Err(Error::Config("a suite needs at least one seed".into()));
        }
        if !self.n2_grid.is_empty() && self.base.clone.is_none() {
            return Err(Error::Config("n2_grid needs a cloning section".into()));
        }
        let (mdps, alphas, n2s, ns) = self.grids();
        let mut configs = Vec::new();
        let mut points = Vec::new();
        for mdp in &mdps {
            for &alpha in &alphas {
                for &n2 in &n2s {
                    let mut c = self.base.clone();
                    c.mdp = mdp.clone();
                    c.alpha = alpha;
                    if let (Some(cc), Some(n2)) = (c.clone.as_mut(), n2) {
                        cc.n2 = Some(n2);
                    }
                    for &n in &ns {
                        let series = series_label(mdp, alpha, n2, self.axis, n);
                        points.push(Point { prepared: configs.len(), series, n, n2 });
                    }
                    configs.push(c);
                }
            }
        }
        let prepared: Vec<Prepared> = configs
            .par_iter()
            .map(|c| {
                c.validate()?;
                prepare(c)
            })
            .collect::<Result<_>>()?;
        let tasks: Vec<(usize, u64)> =
            (0..points.len()).flat_map(|p| (0..self.seeds).map(move |s| (p, s))).collect();
        let mut rows: Vec<(usize, RunRow)> = tasks
            .par_iter()
            .map(|&(p, s)| {
                let point = &points[p];
                let mut prep = prepared[point.prepared].clone();
                prep.config.n = point.n;
                prep.config.n0 = Some(self.n0.unwrap_or(point.n));
                prep.config_hash = prep.config.config_hash();
                let seed = self.base_seed + s;
                prep.run(point.n, self.n0.unwrap_or(point.n), seed).map(|r| (p, r.row))
            })
            .collect::<Result<_>>()?;
        rows.sort_by(|a, b| (&a.1.config_hash, a.1.seed).cmp(&(&b.1.config_hash, b.1.seed)));
        let summary = self.summarize(&points, &rows)?;
        Ok(SuiteOutput { rows: rows.into_iter().map(|(_, r)| r).collect(), summary })
    }

    fn summarize(&self, points: &[Point], rows: &[(usize, RunRow)]) -> Result<SuiteSummary> {
        let mut groups = Vec::new();
        for (p, point) in points.iter().enumerate() {
            let group: Vec<&RunRow> = rows.iter().filter(|(q, _)| *q == p).map(|(_, r)| r).collect();
            let mut medians = BTreeMap::new();
            let mut means = BTreeMap::new();
            for name in SUMMARY_METRICS {
                let xs: Vec<f64> = group.iter().filter_map(|r| metric(r, name)).collect();
                if !xs.is_empty() {
                    medians.insert(name.to_string(), median(&xs));
                    means.insert(name.to_string(), mean(&xs));
                }
            }
            let share = |pred: &dyn Fn(&RunRow) -> Option<bool>| {
                let hits: Vec<bool> = group.iter().filter_map(|r| pred(r)).collect();
                (!hits.is_empty()).then(|| hits.iter().filter(|&&b| b).count() as f64 / hits.len() as f64)
            };
            groups.push(GroupSummary {
                config_hash: group[0].config_hash.clone(),
                series: point.series.clone(),
                alpha: group[0].alpha,
                n: point.n,
                n2: point.n2,
                runs: group.len(),
                medians,
                means,
                deviation_exceeds_eps: share(&|r| r.eps_stat.map(|e| r.max_deviation > e)),
                gap_within_rhs: share(&|r| r.rhs_gap.map(|b| r.realized_gap <= b)),
            });
        }
        let mut fits = Vec::new();
        let mut seen: Vec<&str> = Vec::new();
        for g in &groups {
            if seen.contains(&g.series.as_str()) {
                continue;
            }
            seen.push(&g.series);
            let mut pts: Vec<(f64, f64)> = groups
                .iter()
                .filter(|h| h.series == g.series)
                .filter_map(|h| {
                    let x = match self.axis {
                        SweepAxis::N => h.n as f64,
                        SweepAxis::N2 => h.n2? as f64,
                    };
                    let table = match self.statistic {
                        Statistic::Median => &h.medians,
                        Statistic::Mean => &h.means,
                    };
                    let y = *table.get(&self.slope_metric)?;
                    Some((x, y))
                })
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            fits.push(SeriesFit {
                series: g.series.clone(),
                metric: self.slope_metric.clone(),
                fit: fit_loglog(&pts, 0.95).ok(),
                medians: pts,
            });
        }
        Ok(SuiteSummary { suite: self.name.clone(), groups, fits, certificates: BTreeMap::new() })
    }
}

impl SuiteOutput {
    /// Writes `runs.csv`, `summary.json` and one SVG chart per fitted series.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_csv(&self.rows, &dir.join("runs.csv"))?;
        std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&self.summary)?)?;
        for (i, f) in self.summary.fits.iter().enumerate() {
            if f.medians.len() < 2 {
                continue;
            }
            let title = match &f.fit {
                Some(fit) => format!(
                    "{}: median {} slope {:.3} [{:.3}, {:.3}]",
                    f.series, f.metric, fit.slope, fit.lo, fit.hi
                ),
                None => format!("{}: median {}", f.series, f.metric),
            };
            let mut series = vec![Series { label: format!("median {}", f.metric), points: f.medians.clone() }];
            if let Some(fit) = &f.fit {
                let line = f.medians.iter().map(|&(x, _)| (x, (fit.intercept + fit.slope * x.ln()).exp())).collect();
                series.push(Series { label: "fit".into(), points: line });
            }
            Chart {
                title,
                x_label: "sample size".into(),
                y_label: f.metric.clone(),
                log_x: true,
                log_y: true,
                series,
            }
            .write(&dir.join(format!("fit_{i}.svg")))?;
        }
        Ok(())
    }
}

/// Names accepted by [`builtin_suite`].
pub const SUITE_NAMES: [&str; 8] = [
    "counterexample",
    "rate_regularized",
    "rate_unregularized",
    "lp_stability",
    "constrained_coverage",
    "alpha_zero_strong",
    "bc_scaling",
    "robustness",
];

fn parse(json: &str) -> SuiteConfig {
    serde_json::from_str(json).expect("builtin suite parses")
}

/// `k` scales spaced geometrically from `top` down to `bottom`.
pub fn geometric_ladder(top: f64, bottom: f64, k: usize) -> Vec<f64> {
    if k < 2 {
        return vec![top; k];
    }
    (0..k).map(|i| top * (bottom / top).powf(i as f64 / (k - 1) as f64)).collect()
}

/// Distractors with values shifted by `value_scale` and weights on a ladder
/// from 1 down to 1e-4, so that some member sits near the target at every
/// sample size of the grid.
fn ladder_distractors(value_scale: f64, k: usize) -> DistractorKind {
    DistractorKind::Perturbed { value_scales: vec![value_scale], weight_scales: geometric_ladder(1.0, 1e-4, k) }
}

/// Default grid for a named suite.
pub fn builtin_suite(name: &str) -> Result<SuiteConfig> {
    let s = match name {
        "counterexample" => parse(
            r#"{"name": "counterexample", "seeds": 1,
                "base": {"mdp": {"kind": "counterexample", "gamma": 0.9, "instance": 1},
                         "alpha": 0.0, "n": 1, "objective": "population", "classes": {"adversarial": true}},
                "mdp_grid": [{"kind": "counterexample", "gamma": 0.9, "instance": 1},
                             {"kind": "counterexample", "gamma": 0.9, "instance": 2}],
                "slope_metric": "gap_unregularized"}"#,
        ),
        "rate_regularized" => {
            let mut s = parse(
                r#"{"name": "rate_regularized",
                    "base": {"mdp": {"kind": "random", "num_states": 10, "num_actions": 3, "gamma": 0.8, "seed": 11},
                             "data": {"kind": "behavior", "policy": {"kind": "random", "seed": 12}},
                             "alpha": 0.3, "n": 100,
                             "classes": {"num_distractors": 30, "weight_scale": 3.0}},
                    "n_grid": [100, 1000, 10000, 100000],
                    "slope_metric": "weight_error"}"#,
            );
            s.base.classes.kind = ladder_distractors(0.5, 30);
            s
        }
        "rate_unregularized" => {
            let mut s = parse(
                r#"{"name": "rate_unregularized",
                    "base": {"mdp": {"kind": "random", "num_states": 10, "num_actions": 3, "gamma": 0.8, "seed": 11},
                             "data": {"kind": "behavior", "policy": {"kind": "random", "seed": 12}},
                             "alpha": 0.3, "n": 1000,
                             "classes": {"num_distractors": 30, "weight_scale": 3.0}},
                    "alpha_grid": [0.01, 0.03, 0.1, 0.3, 1.0],
                    "n_grid": [100, 1000, 10000, 100000],
                    "slope_metric": "gap_unregularized"}"#,
            );
            s.base.classes.kind = ladder_distractors(0.5, 30);
            s
        }
        "lp_stability" => parse(
            r#"{"name": "lp_stability", "seeds": 1,
                "base": {"mdp": {"kind": "tied_actions"}, "alpha": 0.2, "n": 1, "objective": "population"},
                "alpha_grid": [0.2, 0.1, 0.05, 0.02, 0.01, 0.005]}"#,
        ),
        "constrained_coverage" => {
            let mut s = parse(
                r#"{"name": "constrained_coverage",
                    "base": {"mdp": {"kind": "random", "num_states": 6, "num_actions": 3, "gamma": 0.8, "seed": 21},
                             "data": {"kind": "behavior", "policy": {"kind": "avoid_optimal", "optimal_mass": 0.02}},
                             "alpha": 0.1, "cap": 3.0, "n": 1000,
                             "classes": {"num_distractors": 30}},
                    "n_grid": [100, 1000, 10000, 100000],
                    "slope_metric": "gap_comparator",
                    "statistic": "mean"}"#,
            );
            s.base.classes.kind = ladder_distractors(0.5, 30);
            s
        }
        "alpha_zero_strong" => {
            let mut s = parse(
                r#"{"name": "alpha_zero_strong",
                    "base": {"mdp": {"kind": "random", "num_states": 5, "num_actions": 2, "gamma": 0.7, "seed": 31},
                             "data": {"kind": "behavior", "policy": {"kind": "uniform"}},
                             "alpha": 0.0, "n": 100,
                             "classes": {"num_distractors": 30, "weight_scale": 2.0}},
                    "n_grid": [100, 1000, 10000, 100000],
                    "slope_metric": "gap_unregularized",
                    "statistic": "mean"}"#,
            );
            s.base.classes.kind = ladder_distractors(0.5, 30);
            s
        }
        "bc_scaling" => parse(
            r#"{"name": "bc_scaling",
                "base": {"mdp": {"kind": "random", "num_states": 6, "num_actions": 3, "gamma": 0.8, "seed": 41},
                         "data": {"kind": "behavior", "policy": {"kind": "random", "seed": 42}},
                         "alpha": 0.5, "n": 20000,
                         "classes": {"num_distractors": 10},
                         "clone": {"n2": 100, "policies": {"num_random": 6, "seed": 43}}},
                "n2_grid": [100, 1000, 10000, 100000],
                "axis": "n2",
                "slope_metric": "bc_deviation"}"#,
        ),
        "robustness" => parse(
            r#"{"name": "robustness",
                "base": {"mdp": {"kind": "random", "num_states": 8, "num_actions": 3, "gamma": 0.8, "seed": 51},
                         "data": {"kind": "behavior", "policy": {"kind": "random", "seed": 52}},
                         "alpha": 0.3, "n": 1000,
                         "classes": {"num_distractors": 20, "misspecification": 0.05},
                         "inexact": {"eps_ov": 0.001, "eps_ow": 0.001}},
                "n_grid": [1000, 10000, 100000],
                "slope_metric": "realized_gap"}"#,
        ),
        other => return Err(Error::UnknownSuite(other.to_string())),
    };
    Ok(s)
}

/// Runs a suite config; the stability and counterexample suites add their
/// certificates.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteOutput> {
    match cfg.name.as_str() {
        "lp_stability" => stability_suite(cfg),
        "counterexample" => counterexample_suite(cfg),
        _ => cfg.run(),
    }
}

/// Runs a named suite and writes its artifacts to `out`.
pub fn run_experiment_suite(name: &str, out: &Path) -> Result<SuiteSummary> {
    let output = run_suite(&builtin_suite(name)?)?;
    output.write(out)?;
    Ok(output.summary)
}

/// Reports the objective tie at the unregularized values next to the runs.
pub fn counterexample_suite(cfg: &SuiteConfig) -> Result<SuiteOutput> {
    let mut output = cfg.run()?;
    let (mdps, ..) = cfg.grids();
    let mut worst = f64::NEG_INFINITY;
    let mut total = 0.0;
    for mdp in &mdps {
        let mut c = cfg.base.clone();
        c.mdp = mdp.clone();
        let prep = prepare(&c)?;
        let ce = prep.counterexample.as_ref().ok_or_else(|| Error::Config("suite needs counterexample sources".into()))?;
        let v = &ce.values.members()[0];
        let reg = &c.regularizer;
        let [good, bad] = [&ce.weights.members()[0], &ce.weights.members()[1]];
        let at = |w| population_lagrangian(&prep.mdp, &prep.data_dist, reg, 0.0, v, w);
        let tie = (at(good)? - at(bad)?).abs();
        let label = series_label(mdp, 0.0, None, SweepAxis::N, 0);
        output.summary.certificates.insert(format!("{label} tie"), tie);
        let r = output
            .summary
            .groups
            .iter()
            .filter(|g| g.series == label)
            .filter_map(|g| g.means.get("gap_unregularized").copied())
            .fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max(r);
        total += r;
    }
    output.summary.certificates.insert("worst regret".into(), worst);
    output.summary.certificates.insert("average regret".into(), total / mdps.len() as f64);
    Ok(output)
}

/// Sweeps the exact regularized solution toward zero regularization.
pub fn stability_suite(cfg: &SuiteConfig) -> Result<SuiteOutput> {
    let prep = prepare(&cfg.base)?;
    let reg = &cfg.base.regularizer;
    let sweep = lp_stability_sweep(&prep.mdp, &prep.data_dist, reg, &cfg.alpha_grid)?;
    let limit = min_divergence_optimal_weights(&prep.mdp, &prep.data_dist, reg)?;
    let mut certificates = BTreeMap::new();
    certificates.insert("stable prefix length".into(), sweep.stable_len as f64);
    certificates.insert("slope".into(), sweep.slope);
    certificates.insert("r squared".into(), sweep.r_squared);
    certificates.insert("limit distance".into(), (sweep.limit_weights() - &limit).amax());
    let medians: Vec<(f64, f64)> = sweep.rows.iter().map(|r| (r.alpha, r.v_gap)).collect();
    let summary = SuiteSummary {
        suite: cfg.name.clone(),
        groups: Vec::new(),
        fits: vec![SeriesFit { series: "tied-actions".into(), metric: "v_gap".into(), fit: None, medians }],
        certificates,
    };
    Ok(SuiteOutput { rows: Vec::new(), summary })
}
