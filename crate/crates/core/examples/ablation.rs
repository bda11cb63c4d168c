//! Runs an ablation matrix file and prints the per-cell scores and the
//! per-variant performance profile at a few thresholds.
//!
//! ```text
//! cargo run --release --example ablation -- [matrix file] [out dir] [jobs]
//! ```

use std::path::PathBuf;

use boot_np::experiment::{run_ablation, Matrix};
use boot_np::report::ReportOptions;
use boot_np::TrainConfig;

fn main() -> boot_np::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let matrix = args.first().map_or_else(
        || {
            Matrix::parse(
                "seeds = 0 1\n\
                 base: env.n=10 max_frames=20000\n\
                 boot-dqn+np: noise.sigma=0.02\n\
                 boot-dqn*: noise.sigma=0\n",
                "builtin".as_ref(),
            )
        },
        |p| Matrix::load(p.as_ref()),
    )?;
    let out = PathBuf::from(args.get(1).map_or("ablation-out", String::as_str));
    let jobs = args.get(2).and_then(|j| j.parse().ok()).unwrap_or(1);

    let res = run_ablation(&TrainConfig::default(), &matrix, Some(&out), jobs, &ReportOptions::default())?;
    for c in &res.cells {
        match &c.outcome {
            Ok(r) => println!("{:<14} seed {}: max {:.3}, normalized {:.3}", c.variant, c.seed, r.max_score, r.normalized),
            Err(e) => println!("{:<14} seed {}: failed: {e}", c.variant, c.seed),
        }
    }
    if let Some(rep) = &res.report {
        for (variant, points) in &rep.profiles {
            let at = |tau: f64| points.iter().find(|p| (p.tau - tau).abs() < 1e-9).map_or(f64::NAN, |p| p.fraction);
            println!("{variant:<14} profile: tau 0 -> {:.2}, 0.5 -> {:.2}, 0.95 -> {:.2}", at(0.0), at(0.5), at(0.95));
        }
    }
    println!("report in {}", out.display());
    Ok(())
}
