//! The target-noise multiplier over a range of Q maxima, and the sample
//! moments of the default noise distribution.
//!
//! ```text
//! cargo run --example noise_scale -- [beta]
//! ```

use boot_np::metrics::mean_std;
use boot_np::noise::{compute_scale, sample_noise, NoiseConfig, NoiseGranularity};
use boot_np::{Stream, StreamRng};

fn main() -> boot_np::Result<()> {
    let beta = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(0.05);
    for qmax in [-10.0, 0.0, 1.0, 10.0, 20.0, 100.0] {
        println!("qmax {qmax:>6}: scale {}", compute_scale(qmax, beta)?);
    }
    let cfg = NoiseConfig::default();
    let mut rng = StreamRng::new(0, Stream::Noise);
    let draws = sample_noise(9, 100_000, &cfg, NoiseGranularity::PerSample, &mut rng);
    let (mean, std) = mean_std(draws.as_slice().unwrap());
    println!("900000 draws: mean {mean:+.2e}, std {std:.5} (sigma {})", cfg.sigma);
    Ok(())
}
