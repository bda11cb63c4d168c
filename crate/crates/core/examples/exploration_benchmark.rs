//! Noisy-target ensemble versus a single-head, noise-free control on
//! NChain-20. For each seed, prints the share of the final 20 evaluations
//! that reached the optimal return.
//!
//! ```text
//! cargo run --release --example exploration_benchmark -- [seeds] [key=value ...]
//! ```

use boot_np::trainer::train;
use boot_np::TrainConfig;

fn solved_share(cfg: &TrainConfig) -> boot_np::Result<(f64, f64)> {
    let out = train(cfg, None)?;
    let rows = &out.metrics.rows;
    let tail = &rows[rows.len().saturating_sub(20)..];
    let hits = tail
        .iter()
        .filter(|r| r.mean >= out.spec.optimal_return - 1e-9)
        .count();
    let last = rows.last().map_or(f64::NAN, |r| r.disagreement);
    Ok((hits as f64 / tail.len().max(1) as f64, last))
}

fn main() -> boot_np::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let seeds: u64 = args.first().and_then(|a| a.parse().ok()).unwrap_or(5);
    let mut base = TrainConfig::default();
    base.frames_per_step = 4;
    base.max_frames = 300_000;
    for kv in args.iter().skip(1) {
        base.apply_override(kv)?;
    }
    let variants = [
        ("boot-dqn+np", vec![]),
        ("single-head", vec!["k=1", "noise.sigma=0"]),
    ];
    for (label, deltas) in variants {
        let mut solved = 0;
        for seed in 0..seeds {
            let mut cfg = base.clone();
            cfg.seed = seed;
            for d in &deltas {
                cfg.apply_override(d)?;
            }
            let t = std::time::Instant::now();
            let (share, dis) = solved_share(&cfg)?;
            if share >= 0.9 {
                solved += 1;
            }
            println!(
                "{label:<12} seed {seed}: {:>5.1}% of final evaluations optimal, disagreement {dis:.3} ({:.0}s)",
                100.0 * share,
                t.elapsed().as_secs_f64()
            );
        }
        println!("{label}: solved in {solved}/{seeds} seeds");
    }
    Ok(())
}
