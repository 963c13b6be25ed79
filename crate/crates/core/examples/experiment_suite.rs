//! Runs a named experiment suite and prints its fitted slopes.
//!
//! cargo run --example experiment_suite -- rate_regularized /tmp/rate
//! cargo run --example experiment_suite -- my_suite.json /tmp/mine

use std::path::PathBuf;

use pro_rl::harness::{run_experiment_suite, run_suite, SuiteConfig};

fn main() -> pro_rl::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "counterexample".into());
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join(&name));
    // A path to a suite JSON file runs that grid instead of a named one.
    let summary = if name.ends_with(".json") {
        let output = run_suite(&SuiteConfig::from_path(name.as_ref())?)?;
        output.write(&out)?;
        output.summary
    } else {
        run_experiment_suite(&name, &out)?
    };
    for g in &summary.groups {
        let med = |k: &str| g.medians.get(k).copied().unwrap_or(f64::NAN);
        println!(
            "{:<40} n={:<7} n2={:<7?} gap={:.3e} werr={:.3e} dev={:.3e} eps={:.3e} bc_dev={:.3e}",
            g.series,
            g.n,
            g.n2,
            med("realized_gap"),
            med("weight_error"),
            med("max_deviation"),
            med("eps_stat"),
            med("bc_deviation")
        );
    }
    for f in &summary.fits {
        match &f.fit {
            Some(fit) => println!("{}: slope of {} = {:.3} [{:.3}, {:.3}]", f.series, f.metric, fit.slope, fit.lo, fit.hi),
            None => println!("{}: {} {:?}", f.series, f.metric, f.medians),
        }
    }
    for (k, v) in &summary.certificates {
        println!("{k}: {v:.6e}");
    }
    println!("artifacts in {}", out.display());
    Ok(())
}
