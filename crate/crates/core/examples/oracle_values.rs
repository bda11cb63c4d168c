//! Exact reference values for every environment in the suite: optimal and
//! uniform-random returns, and the optimal policy's first moves on NChain.
//!
//! ```text
//! cargo run --example oracle_values
//! ```

use boot_np::envs::oracle::value_iteration;
use boot_np::envs::{AsMdp, EnvConfig, EnvName, EnvSpec};

fn main() -> boot_np::Result<()> {
    for (name, n) in [(EnvName::NChain, 20), (EnvName::DeepSea, 10), (EnvName::SparseCliff, 0)] {
        let cfg = EnvConfig { name, n, ..Default::default() };
        let d = cfg.build()?;
        let spec = EnvSpec::of(d.as_ref())?;
        println!(
            "{:<16} states {:>4}  horizon {:>3}  optimal {:>8.4}  random {:>8.4}",
            cfg.label(),
            d.state_count(),
            spec.max_episode_steps,
            spec.optimal_return,
            spec.random_return
        );
    }

    let chain = EnvConfig::default().build()?;
    let mdp = AsMdp { dynamics: chain.as_ref(), clip: true };
    let finite = value_iteration(&mdp, 1.0, Some(chain.horizon()))?;
    let moves: String = (0..chain.state_count())
        .map(|s| if finite.greedy_action(0, s) == 1 { 'R' } else { 'L' })
        .collect();
    println!("nchain-20 greedy first move per state: {moves}");
    let discounted = value_iteration(&mdp, 0.99, None)?;
    println!(
        "nchain-20 discounted values (gamma 0.99): start {:.3}, goal {:.3}, residual {:.1e}",
        discounted.values[chain.start_state()],
        discounted.values[chain.state_count() - 1],
        discounted.residual
    );
    Ok(())
}
