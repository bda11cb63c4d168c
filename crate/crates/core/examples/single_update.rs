//! One update on a hand-built minibatch: per-head targets, the masked loss
//! and what moved.
//!
//! ```text
//! cargo run --example single_update
//! ```

use boot_np::noise::{NoiseConfig, NoiseGranularity, QmaxSource, ScaleState};
use boot_np::qnet::{MultiHeadNet, NetArch, NetPair};
use boot_np::replay::Transition;
use boot_np::update::{compute_targets_noiseless, update_step, Batch, HeadOptimizers, UpdateConfig};
use boot_np::{Stream, StreamRng};

fn main() -> boot_np::Result<()> {
    let arch = NetArch::desk(4, 2, 3);
    let mut rng = StreamRng::new(0, Stream::Weights);
    let mut pair = NetPair::new(MultiHeadNet::init(&arch, &mut rng)?);
    let one_hot = |i: usize| (0..4).map(|j| (i == j) as u8 as f64).collect::<Vec<_>>();
    let ts: Vec<Transition> = (0..4)
        .map(|i| Transition {
            state: one_hot(i),
            action: i % 2,
            reward: if i == 3 { 1.0 } else { 0.0 },
            next_state: one_hot((i + 1).min(3)),
            terminal: i == 3,
            // head 2 never sees this batch
            mask: vec![true, i % 2 == 0, false],
        })
        .collect();
    let batch = Batch::from_transitions(&ts.iter().collect::<Vec<_>>())?;

    println!("noiseless targets (head x sample):\n{:.4}", compute_targets_noiseless(&pair, &batch, 0.99)?);
    let before = pair.policy.clone();
    let cfg = UpdateConfig {
        gamma: 0.99,
        noise: NoiseConfig::default(),
        granularity: NoiseGranularity::PerSample,
        noise_enabled: true,
    };
    let mut opts = HeadOptimizers::new(&pair.policy, 1e-3);
    let stats = update_step(
        &mut pair,
        &batch,
        &cfg,
        &mut opts,
        &mut ScaleState::new(QmaxSource::Batch),
        &mut StreamRng::new(0, Stream::Noise),
    )?;
    println!("loss {:.6}, batch qmax {:.4}, scale {:.6}", stats.total_loss, stats.batch_qmax, stats.scale);
    for k in 0..3 {
        println!("head {k} changed: {}", pair.policy.heads()[k] != before.heads()[k]);
    }
    println!("body changed: {}", pair.policy.body() != before.body());
    println!("target untouched: {}", pair.target == before);
    Ok(())
}
