//! Trains the default agent on NChain and prints each evaluation row.
//!
//! ```text
//! cargo run --release --example nchain_train -- [max_frames] [seed] [key=value ...]
//! ```

use boot_np::trainer::Trainer;
use boot_np::TrainConfig;

fn main() -> boot_np::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut cfg = TrainConfig::default();
    cfg.max_frames = args.first().and_then(|a| a.parse().ok()).unwrap_or(100_000);
    cfg.seed = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(0);
    for kv in args.iter().skip(2) {
        cfg.apply_override(kv)?;
    }
    let mut t = Trainer::new(&cfg)?;
    println!(
        "{}: optimal return {}, random return {:.4}",
        cfg.env.label(),
        t.spec().optimal_return,
        t.spec().random_return
    );
    let start = std::time::Instant::now();
    while let Some(ev) = t.advance()? {
        if let Some(row) = ev.evaluation {
            println!(
                "frames {:>8}  mean {:>7.3}  qmax {:>7.3}  disagreement {:.3}  {:>6.1}s",
                row.frames,
                row.mean,
                row.qmax,
                row.disagreement,
                start.elapsed().as_secs_f64()
            );
        }
    }
    Ok(())
}
