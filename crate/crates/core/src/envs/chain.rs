use super::Dynamics;
use crate::error::{Error, Result};

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;

/// Chain of `n` states starting at the left end.
///
/// `left` moves one state left (staying put at state 0, where it pays
/// 0.001); `right` moves one state right (staying put at state `n - 1`,
/// where it pays 1.0). Episodes last `n + 9` steps unless configured
/// otherwise and never end early.
#[derive(Clone, Debug)]
pub struct NChain {
    n: usize,
    horizon: usize,
}

impl NChain {
    pub const SMALL_REWARD: f64 = 0.001;
    pub const BIG_REWARD: f64 = 1.0;

    pub fn new(n: usize, horizon: Option<usize>) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config(format!("env.n = {n}: a chain needs at least 2 states")));
        }
        let horizon = horizon.unwrap_or(n + 9);
        if horizon == 0 {
            return Err(Error::Config("env.horizon must be positive".into()));
        }
        Ok(Self { n, horizon })
    }
}

impl Dynamics for NChain {
    fn name(&self) -> &'static str {
        "nchain"
    }

    fn state_count(&self) -> usize {
        self.n
    }

    fn action_count(&self) -> usize {
        2
    }

    fn start_state(&self) -> usize {
        0
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn transition(&self, s: usize, action: usize) -> (usize, f64, bool) {
        match action {
            LEFT if s == 0 => (0, Self::SMALL_REWARD, false),
            LEFT => (s - 1, 0.0, false),
            _ if s == self.n - 1 => (s, Self::BIG_REWARD, false),
            _ => (s + 1, 0.0, false),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::oracle::{value_iteration, TabularMdp};
    use crate::envs::{AsMdp, Env, EnvSpec};
    use std::sync::Arc;

    #[test]
    fn documented_dynamics() {
        let mut env = Env::new(Arc::new(NChain::new(10, None).unwrap()));
        env.reset(Some(0), 30);
        let r = env.step(LEFT).unwrap();
        assert_eq!(r.raw_reward, 0.001);
        assert_eq!(env.state(), 0);

        env.reset(None, 0);
        for _ in 0..9 {
            assert_eq!(env.step(RIGHT).unwrap().raw_reward, 0.0);
        }
        assert_eq!(env.step(RIGHT).unwrap().raw_reward, 1.0);
        assert_eq!(env.state(), 9);
    }

    #[test]
    fn episode_length_is_n_plus_nine() {
        let mut env = Env::new(Arc::new(NChain::new(10, None).unwrap()));
        env.reset(Some(0), 30);
        let mut steps = 0;
        loop {
            steps += 1;
            if env.step(steps % 2).unwrap().terminal {
                break;
            }
        }
        assert_eq!(steps, 19);
    }

    /// Best return over every open-loop action sequence, which suffices for
    /// deterministic dynamics and a fixed start.
    fn brute_force_best(chain: &NChain) -> f64 {
        let h = chain.horizon();
        let mut best = f64::NEG_INFINITY;
        for bits in 0u64..(1 << h) {
            let (mut s, mut ret) = (0, 0.0);
            for t in 0..h {
                let (n, r, _) = chain.transition(s, ((bits >> t) & 1) as usize);
                s = n;
                ret += r;
            }
            best = best.max(ret);
        }
        best
    }

    #[test]
    fn oracle_matches_exhaustive_enumeration() {
        for n in 2..=6 {
            let chain = NChain::new(n, None).unwrap();
            let sol = value_iteration(&AsMdp { dynamics: &chain, clip: false }, 1.0, Some(chain.horizon())).unwrap();
            assert!((sol.values[0] - brute_force_best(&chain)).abs() < 1e-12, "n = {n}");
            assert!((sol.optimal_return - brute_force_best(&chain)).abs() < 1e-12);
        }
    }

    #[test]
    fn greedy_oracle_policy_walks_right() {
        let chain = NChain::new(10, Some(19)).unwrap();
        let mdp = AsMdp { dynamics: &chain, clip: true };
        let sol = value_iteration(&mdp, 0.99, Some(19)).unwrap();
        assert!(sol.residual < 1e-10);
        let mut s = mdp.start_state();
        for t in 0..19 {
            assert_eq!(sol.greedy_action(t, s), RIGHT, "step {t}");
            s = chain.transition(s, RIGHT).0;
        }
        let spec = EnvSpec::of(&chain).unwrap();
        assert!((spec.optimal_return - 10.0).abs() < 1e-12);
        assert!(spec.random_return < 1.0);
    }
}
