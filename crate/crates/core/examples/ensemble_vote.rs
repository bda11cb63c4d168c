//! Trains briefly on NChain, then shows each head's greedy action, the
//! ensemble vote and the head disagreement on every probe state.
//!
//! ```text
//! cargo run --release --example ensemble_vote -- [max_frames]
//! ```

use boot_np::agent::{act_evaluate, head_disagreement};
use boot_np::qnet::argmax;
use boot_np::trainer::Trainer;
use boot_np::TrainConfig;

fn main() -> boot_np::Result<()> {
    let mut cfg = TrainConfig::default();
    cfg.env.n = 10;
    cfg.max_frames = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20_000);
    let mut t = Trainer::new(&cfg)?;
    while t.advance()?.is_some() {}

    let policy = &t.pair().policy;
    let probes = t.probes();
    println!("state  head actions  vote");
    for (s, row) in probes.rows().into_iter().enumerate() {
        let state = row.to_vec();
        let q = policy.q_one(&state)?;
        let votes: String = q
            .rows()
            .into_iter()
            .map(|r| char::from(b'0' + argmax(r.iter().copied()) as u8))
            .collect();
        println!("{s:>5}  {votes:<12}  {}", act_evaluate(policy, &state)?);
    }
    println!("disagreement {:.3}", head_disagreement(policy, probes.view())?);
    Ok(())
}
