//! Fills a small replay buffer past capacity with masked transitions and
//! checks eviction order, mask rate and sampling frequencies.
//!
//! ```text
//! cargo run --example replay_masks
//! ```

use boot_np::replay::{sample_mask, ReplayBuffer, Transition};
use boot_np::{Stream, StreamRng};

fn main() -> boot_np::Result<()> {
    let (capacity, heads) = (8, 9);
    let mut buf = ReplayBuffer::new(capacity, 2, heads)?;
    let mut masks = StreamRng::new(0, Stream::Masks);
    let (mut bits, mut set) = (0, 0);
    for i in 0..100 {
        let mask = sample_mask(heads, 0.9, &mut masks);
        bits += mask.len();
        set += mask.iter().filter(|m| **m).count();
        buf.push(Transition {
            state: vec![i as f64],
            action: i % 2,
            reward: 0.0,
            next_state: vec![i as f64 + 1.0],
            terminal: false,
            mask,
        })?;
    }
    let kept: Vec<f64> = buf.iter_ordered().map(|t| t.state[0]).collect();
    println!("kept after 100 pushes: {kept:?}");
    println!("mask bit rate {:.3}", set as f64 / bits as f64);

    let mut rng = StreamRng::new(0, Stream::ReplaySample);
    let mut counts = vec![0; capacity];
    for i in buf.sample_indices(80_000, &mut rng)? {
        counts[i] += 1;
    }
    println!("sample counts per slot over 80000 draws: {counts:?}");
    Ok(())
}
