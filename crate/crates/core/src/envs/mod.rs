//! Deterministic, enumerable episodic environments with one-hot
//! observations, reward clipping and randomised no-op starts.

pub mod chain;
pub mod cliff;
mod deep_sea;
pub mod oracle;

use std::sync::Arc;

use ndarray::Array2;
use rand::Rng;

pub use chain::NChain;
pub use cliff::SparseCliff;
pub use deep_sea::DeepSea;
use oracle::{random_policy_return, value_iteration, Outcome, TabularMdp};

use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// Deterministic tabular dynamics with a fixed start state and horizon.
pub trait Dynamics: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &'static str;
    fn state_count(&self) -> usize;
    fn action_count(&self) -> usize;
    fn start_state(&self) -> usize;
    fn horizon(&self) -> usize;
    /// `(next state, raw reward, terminal)`.
    fn transition(&self, state: usize, action: usize) -> (usize, f64, bool);
    /// Action that leaves the environment unchanged, if there is one.
    fn noop_action(&self) -> Option<usize> {
        None
    }

    fn obs_dim(&self) -> usize {
        self.state_count()
    }

    fn observe(&self, state: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.state_count()];
        v[state] = 1.0;
        v
    }
}

/// Adapter exposing [`Dynamics`] to the oracle, with rewards either raw or
/// clipped.
pub struct AsMdp<'a> {
    pub dynamics: &'a dyn Dynamics,
    pub clip: bool,
}

impl TabularMdp for AsMdp<'_> {
    fn state_count(&self) -> usize {
        self.dynamics.state_count()
    }

    fn action_count(&self) -> usize {
        self.dynamics.action_count()
    }

    fn start_state(&self) -> usize {
        self.dynamics.start_state()
    }

    fn outcomes(&self, state: usize, action: usize) -> Vec<Outcome> {
        let (next, r, terminal) = self.dynamics.transition(state, action);
        let reward = if self.clip { clip_reward(r) } else { r };
        vec![Outcome {
            prob: 1.0,
            next,
            reward,
            terminal,
        }]
    }
}

pub fn clip_reward(r: f64) -> f64 {
    r.clamp(-1.0, 1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvSpec {
    pub name: String,
    pub obs_dim: usize,
    pub action_count: usize,
    pub max_episode_steps: usize,
    /// Best achievable raw (undiscounted) return from the start state.
    pub optimal_return: f64,
    /// Expected raw return of the uniform-random policy.
    pub random_return: f64,
}

impl EnvSpec {
    pub fn of(dynamics: &dyn Dynamics) -> Result<Self> {
        let mdp = AsMdp { dynamics, clip: false };
        let h = dynamics.horizon();
        Ok(Self {
            name: dynamics.name().to_string(),
            obs_dim: dynamics.obs_dim(),
            action_count: dynamics.action_count(),
            max_episode_steps: h,
            optimal_return: value_iteration(&mdp, 1.0, Some(h))?.optimal_return,
            random_return: random_policy_return(&mdp, h)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub raw_reward: f64,
    pub clipped_reward: f64,
    /// The episode is over, by reaching an absorbing state or the step limit.
    pub terminal: bool,
    /// Set when the episode ended only because of the step limit.
    pub truncated: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnvName {
    NChain,
    DeepSea,
    SparseCliff,
}

impl std::str::FromStr for EnvName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nchain" => Ok(EnvName::NChain),
            "deepsea" => Ok(EnvName::DeepSea),
            "sparsecliff" => Ok(EnvName::SparseCliff),
            other => Err(Error::Config(format!(
                "unknown env.name {other:?} (expected nchain, deepsea or sparsecliff)"
            ))),
        }
    }
}

impl EnvName {
    pub fn as_str(self) -> &'static str {
        match self {
            EnvName::NChain => "nchain",
            EnvName::DeepSea => "deepsea",
            EnvName::SparseCliff => "sparsecliff",
        }
    }
}

/// Environment selection and dynamics parameters (`env.*` config keys).
#[derive(Clone, Debug, PartialEq)]
pub struct EnvConfig {
    pub name: EnvName,
    /// Chain length or deep-sea size.
    pub n: usize,
    /// Step limit; `None` uses the environment's default.
    pub horizon: Option<usize>,
    pub width: usize,
    pub height: usize,
    /// Seeds the deep-sea action layout.
    pub layout_seed: u64,
    pub noop_max: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            name: EnvName::NChain,
            n: 20,
            horizon: None,
            width: 8,
            height: 4,
            layout_seed: 0,
            noop_max: 30,
        }
    }
}

impl EnvConfig {
    pub fn build(&self) -> Result<Arc<dyn Dynamics>> {
        Ok(match self.name {
            EnvName::NChain => Arc::new(NChain::new(self.n, self.horizon)?),
            EnvName::DeepSea => Arc::new(DeepSea::new(self.n, self.layout_seed)?),
            EnvName::SparseCliff => {
                Arc::new(SparseCliff::new(self.width, self.height, self.horizon)?)
            }
        })
    }

    /// Short identifier used to group runs in reports, e.g. `nchain-20`.
    pub fn label(&self) -> String {
        match self.name {
            EnvName::NChain => format!("nchain-{}", self.n),
            EnvName::DeepSea => format!("deepsea-{}", self.n),
            EnvName::SparseCliff => format!("sparsecliff-{}x{}", self.width, self.height),
        }
    }
}

/// One running instance of some [`Dynamics`].
#[derive(Debug)]
pub struct Env {
    dynamics: Arc<dyn Dynamics>,
    state: usize,
    steps: usize,
    done: bool,
    rng: StreamRng,
    last_noops: usize,
}

impl Env {
    pub fn new(dynamics: Arc<dyn Dynamics>) -> Self {
        let state = dynamics.start_state();
        Self {
            dynamics,
            state,
            steps: 0,
            done: false,
            rng: StreamRng::from_seed(0),
            last_noops: 0,
        }
    }

    pub fn dynamics(&self) -> &Arc<dyn Dynamics> {
        &self.dynamics
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// No-op steps applied by the most recent reset.
    pub fn last_noops(&self) -> usize {
        self.last_noops
    }

    /// Starts a new episode. `Some(seed)` reseeds the start randomisation;
    /// `None` continues its stream. For environments with a no-op action,
    /// `U{0, .., noop_max - 1}` no-ops are applied first; they count against
    /// the step limit and their rewards are discarded.
    pub fn reset(&mut self, seed: Option<u64>, noop_max: usize) -> Vec<f64> {
        if let Some(seed) = seed {
            self.rng = StreamRng::from_seed(seed);
        }
        self.state = self.dynamics.start_state();
        self.steps = 0;
        self.done = false;
        self.last_noops = 0;
        if let (Some(noop), true) = (self.dynamics.noop_action(), noop_max > 0) {
            let count = self.rng.random_range(0..noop_max);
            for _ in 0..count.min(self.dynamics.horizon().saturating_sub(1)) {
                let (next, _, terminal) = self.dynamics.transition(self.state, noop);
                debug_assert!(!terminal, "no-op ended the episode");
                self.state = next;
                self.steps += 1;
            }
            self.last_noops = count;
        }
        self.dynamics.observe(self.state)
    }

    pub fn step(&mut self, action: usize) -> Result<StepResult> {
        if self.done {
            return Err(Error::State("step after the episode ended; call reset".into()));
        }
        if action >= self.dynamics.action_count() {
            return Err(Error::Argument(format!(
                "action {action} outside [0, {})",
                self.dynamics.action_count()
            )));
        }
        let (next, raw, absorbing) = self.dynamics.transition(self.state, action);
        self.state = next;
        self.steps += 1;
        let truncated = !absorbing && self.steps >= self.dynamics.horizon();
        self.done = absorbing || truncated;
        Ok(StepResult {
            observation: self.dynamics.observe(next),
            raw_reward: raw,
            clipped_reward: clip_reward(raw),
            terminal: self.done,
            truncated,
        })
    }
}

/// States reachable from the start state within the horizon, ascending.
pub fn reachable_states(dynamics: &dyn Dynamics) -> Vec<usize> {
    let mut seen = vec![false; dynamics.state_count()];
    let mut frontier = vec![dynamics.start_state()];
    seen[dynamics.start_state()] = true;
    for _ in 1..dynamics.horizon() {
        let mut next = Vec::new();
        for &s in &frontier {
            for a in 0..dynamics.action_count() {
                let (n, _, terminal) = dynamics.transition(s, a);
                if !terminal && !seen[n] {
                    seen[n] = true;
                    next.push(n);
                }
            }
        }
        frontier = next;
    }
    (0..seen.len()).filter(|s| seen[*s]).collect()
}

/// Observations of every reachable state, one row each.
pub fn probe_states(dynamics: &dyn Dynamics) -> Array2<f64> {
    let states = reachable_states(dynamics);
    let mut m = Array2::zeros((states.len(), dynamics.obs_dim()));
    for (i, s) in states.into_iter().enumerate() {
        for (j, v) in dynamics.observe(s).into_iter().enumerate() {
            m[[i, j]] = v;
        }
    }
    m
}
