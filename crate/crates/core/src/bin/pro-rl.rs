use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use pro_rl::dataset::generate_dataset;
use pro_rl::harness::report::{median, read_csv, write_csv, Chart, Series};
use pro_rl::harness::{
    builtin_suite, prepare, run_pro_rl, run_pro_rl_bc, run_suite, ExperimentConfig, RunReport, SuiteConfig,
};
use pro_rl::oracle::{solve_regularized_with, SolveOptions};
use pro_rl::{Error, Result};

#[derive(Parser)]
#[command(name = "pro-rl", about = "Primal-dual regularized offline RL on finite MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the run seed of the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Writes the configured MDP and data distribution.
    GenMdp(Common),
    /// Samples an offline dataset and its start states.
    GenData(Common),
    /// Solves the regularized problem exactly.
    Oracle(Common),
    /// Runs the estimator with the known behavior policy.
    Solve(Common),
    /// Runs the estimator and clones the behavior policy from held-out data.
    ExtractBc(Common),
    /// Runs a named suite or a suite config file.
    Experiment {
        #[command(flatten)]
        common: Common,
        /// Built-in suite name; ignored when --config is given.
        #[arg(long)]
        suite: Option<String>,
    },
    /// Summarizes a runs CSV by grid point and plots the gap against n.
    Report(Common),
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let path = common.config.as_ref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn write_run(out: &Path, report: &RunReport) -> Result<()> {
    write_csv(std::slice::from_ref(&report.row), &out.join("run.csv"))?;
    let rows = |m: &nalgebra::DMatrix<f64>| -> Vec<Vec<f64>> {
        m.row_iter().map(|r| r.iter().copied().collect()).collect()
    };
    let body = json!({
        "w_hat": rows(&report.saddle.w_hat),
        "v_hat": report.saddle.v_hat.iter().collect::<Vec<_>>(),
        "pi_hat": report.pi_hat.to_rows(),
        "pi_bar": report.pi_bar.as_ref().map(|p| p.to_rows()),
        "row": &report.row,
    });
    write_json(&out.join("run.json"), &body)
}

fn report(common: &Common) -> Result<()> {
    let csv = match &common.config {
        Some(p) => p.clone(),
        None => common.out.join("runs.csv"),
    };
    let rows = read_csv(&csv)?;
    let mut keys: Vec<(String, usize)> = rows.iter().map(|r| (r.config_hash.clone(), r.n)).collect();
    keys.dedup();
    println!("config_hash,n,runs,median_realized_gap,median_rhs_realized,median_eps_stat");
    let mut gap = Vec::new();
    let mut rhs = Vec::new();
    for (hash, n) in &keys {
        let group: Vec<_> = rows.iter().filter(|r| &r.config_hash == hash && r.n == *n).collect();
        let g = median(&group.iter().map(|r| r.realized_gap).collect::<Vec<_>>());
        let b = median(&group.iter().filter_map(|r| r.rhs_realized).collect::<Vec<_>>());
        let e = median(&group.iter().filter_map(|r| r.eps_stat).collect::<Vec<_>>());
        println!("{hash},{n},{},{g:e},{b:e},{e:e}", group.len());
        gap.push((*n as f64, g));
        rhs.push((*n as f64, b));
    }
    gap.sort_by(|a, b| a.0.total_cmp(&b.0));
    rhs.sort_by(|a, b| a.0.total_cmp(&b.0));
    fs::create_dir_all(&common.out)?;
    Chart {
        title: "realized gap against sample size".into(),
        x_label: "n".into(),
        y_label: "return gap".into(),
        log_x: true,
        log_y: true,
        series: vec![
            Series { label: "median realized gap".into(), points: gap },
            Series { label: "median bound with realized deviation".into(), points: rhs },
        ],
    }
    .write(&common.out.join("report.svg"))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenMdp(c) => {
            let prep = prepare(&load(&c)?)?;
            fs::create_dir_all(&c.out)?;
            fs::write(c.out.join("mdp.json"), prep.mdp.to_json())?;
            write_json(&c.out.join("data_dist.json"), &prep.data_dist.to_rows())
        }
        Command::GenData(c) => {
            let cfg = load(&c)?;
            let prep = prepare(&cfg)?;
            let data = generate_dataset(&prep.mdp, &prep.data_dist, cfg.n, cfg.n0(), cfg.seed)?;
            fs::create_dir_all(&c.out)?;
            data.write_transitions_jsonl(BufWriter::new(File::create(c.out.join("dataset.jsonl"))?))?;
            data.write_init_states(BufWriter::new(File::create(c.out.join("init_states.txt"))?))
        }
        Command::Oracle(c) => {
            let cfg = load(&c)?;
            let prep = prepare(&cfg)?;
            let options = SolveOptions::for_path(cfg.solver);
            let sol = solve_regularized_with(&prep.mdp, &prep.data_dist, &cfg.regularizer, cfg.alpha, cfg.cap, options)?;
            fs::create_dir_all(&c.out)?;
            write_json(&c.out.join("solution.json"), &sol.to_file())
        }
        Command::Solve(c) => {
            let r = run_pro_rl(&load(&c)?)?;
            fs::create_dir_all(&c.out)?;
            write_run(&c.out, &r)
        }
        Command::ExtractBc(c) => {
            let r = run_pro_rl_bc(&load(&c)?)?;
            fs::create_dir_all(&c.out)?;
            write_run(&c.out, &r)
        }
        Command::Experiment { common, suite } => {
            let mut cfg = match (&common.config, &suite) {
                (Some(p), _) => SuiteConfig::from_path(p)?,
                (None, Some(name)) => builtin_suite(name)?,
                (None, None) => return Err(Error::Config("give --suite or --config".into())),
            };
            if let Some(seed) = common.seed {
                cfg.base_seed = seed;
            }
            let output = run_suite(&cfg)?;
            output.write(&common.out)?;
            for f in &output.summary.fits {
                if let Some(fit) = &f.fit {
                    println!("{}: {} slope {:.3} [{:.3}, {:.3}]", f.series, f.metric, fit.slope, fit.lo, fit.hi);
                }
            }
            for (k, v) in &output.summary.certificates {
                println!("{k}: {v:e}");
            }
            Ok(())
        }
        Command::Report(c) => report(&c),
    }
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
