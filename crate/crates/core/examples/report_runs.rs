//! Builds scores, profiles and learning curves from run directories written
//! by `bootnp train`.
//!
//! ```text
//! cargo run --example report_runs -- <out dir> <run dir>...
//! ```

use std::path::PathBuf;

use boot_np::report::{report, scores_csv, ReportOptions};

fn main() -> boot_np::Result<()> {
    let mut args = std::env::args().skip(1).map(PathBuf::from);
    let Some(out) = args.next() else {
        eprintln!("usage: report_runs <out dir> <run dir>...");
        std::process::exit(2);
    };
    let runs: Vec<PathBuf> = args.collect();
    let rep = report(&runs, &out, &ReportOptions::default())?;
    print!("{}", scores_csv(&rep.scores));
    for f in &rep.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
