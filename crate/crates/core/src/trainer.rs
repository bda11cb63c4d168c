//! The training loop: one exploration head per episode, ε-greedy acting,
//! masked replay writes, one update per step, periodic target syncs,
//! evaluation and checkpointing.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use ndarray::Array2;
use rand::RngCore;

use crate::agent::{act_evaluate, act_explore, head_disagreement, pick_head};
use crate::checkpoint::Checkpoint;
use crate::config::TrainConfig;
use crate::envs::{probe_states, Dynamics, Env, EnvSpec};
use crate::error::{Error, Result};
use crate::metrics::{mean_std, MetricsRow, RunMetrics};
use crate::noise::ScaleState;
use crate::qnet::{MultiHeadNet, NetPair};
use crate::replay::{sample_mask, ReplayBuffer, Transition};
use crate::rng::{RngStreams, Stream};
use crate::update::{update_step, Batch, HeadOptimizers, UpdateStats};

/// Raw returns of `episodes` ensemble-vote episodes, each started from a
/// fresh seed drawn from `rng`.
pub fn evaluate<R: RngCore + ?Sized>(
    policy: &MultiHeadNet,
    dynamics: &Arc<dyn Dynamics>,
    episodes: usize,
    noop_max: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if episodes == 0 {
        return Err(Error::Argument("evaluation needs at least one episode".into()));
    }
    let mut env = Env::new(dynamics.clone());
    (0..episodes)
        .map(|_| {
            let mut obs = env.reset(Some(rng.next_u64()), noop_max);
            let mut total = 0.0;
            loop {
                let step = env.step(act_evaluate(policy, &obs)?)?;
                total += step.raw_reward;
                if step.terminal {
                    return Ok(total);
                }
                obs = step.observation;
            }
        })
        .collect()
}

/// What happened during one environment step.
#[derive(Clone, Debug)]
pub struct StepEvent {
    pub frames: u64,
    pub head: usize,
    pub action: usize,
    pub mask: Vec<bool>,
    pub episode_start: bool,
    pub episode_end: bool,
    pub update: Option<UpdateStats>,
    pub synced: bool,
    pub evaluation: Option<MetricsRow>,
}

pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub metrics: RunMetrics,
    pub spec: EnvSpec,
    pub run_dir: Option<PathBuf>,
    /// Words drawn from each random stream over the whole run.
    pub draw_counts: Vec<(Stream, u64)>,
}

/// Training state, advanced one environment step at a time.
pub struct Trainer {
    cfg: TrainConfig,
    dynamics: Arc<dyn Dynamics>,
    spec: EnvSpec,
    pair: NetPair,
    optimizers: HeadOptimizers,
    replay: ReplayBuffer,
    streams: RngStreams,
    scale: ScaleState,
    env: Env,
    obs: Option<Vec<f64>>,
    head: usize,
    frames: u64,
    steps: u64,
    episodes: u64,
    probes: Array2<f64>,
    metrics: RunMetrics,
    last_update: Option<UpdateStats>,
    started: Instant,
    out: Option<PathBuf>,
}

impl Trainer {
    pub fn new(cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let dynamics = cfg.env.build()?;
        let spec = EnvSpec::of(dynamics.as_ref())?;
        let mut streams = RngStreams::new(cfg.seed);
        let arch = cfg.arch(dynamics.obs_dim(), dynamics.action_count());
        let policy = MultiHeadNet::init(&arch, streams.get(Stream::Weights))?;
        let optimizers = HeadOptimizers::new(&policy, cfg.lr);
        let mut env = Env::new(dynamics.clone());
        // Fixes the training environment's own randomisation for the run.
        env.reset(Some(streams.get(Stream::Env).next_u64()), 0);
        Ok(Self {
            replay: ReplayBuffer::new(cfg.replay_size, dynamics.action_count(), cfg.heads)?,
            probes: probe_states(dynamics.as_ref()),
            metrics: RunMetrics::new(cfg.eval_episodes),
            scale: ScaleState::new(cfg.qmax_source),
            pair: NetPair::new(policy),
            cfg: cfg.clone(),
            dynamics,
            spec,
            optimizers,
            streams,
            env,
            obs: None,
            head: 0,
            frames: 0,
            steps: 0,
            episodes: 0,
            last_update: None,
            started: Instant::now(),
            out: None,
        })
    }

    /// Writes `config.txt`, `metrics.csv` and checkpoints under `dir`.
    pub fn with_output(mut self, dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("config.txt"), self.cfg.to_text())?;
        self.metrics.save(&dir.join("metrics.csv"))?;
        self.out = Some(dir.to_path_buf());
        Ok(self)
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn dynamics(&self) -> &Arc<dyn Dynamics> {
        &self.dynamics
    }

    pub fn pair(&self) -> &NetPair {
        &self.pair
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn streams(&self) -> &RngStreams {
        &self.streams
    }

    pub fn metrics(&self) -> &RunMetrics {
        &self.metrics
    }

    pub fn frames(&self) -> u64 {
        self.frames
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn probes(&self) -> &Array2<f64> {
        &self.probes
    }

    pub fn is_done(&self) -> bool {
        self.frames >= self.cfg.max_frames
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            frames: self.frames,
            steps: self.steps,
            pair: self.pair.clone(),
            optimizers: self.optimizers.clone(),
        }
    }

    /// Runs one environment step, or returns `None` once the frame budget
    /// is spent.
    pub fn advance(&mut self) -> Result<Option<StepEvent>> {
        if self.is_done() {
            return Ok(None);
        }
        let cfg = &self.cfg;
        let episode_start = self.obs.is_none();
        let obs = match self.obs.take() {
            Some(o) => o,
            None => {
                self.head = pick_head(cfg.heads, self.streams.get(Stream::HeadSelect));
                self.episodes += 1;
                let seed = self.streams.get(Stream::Noop).next_u64();
                self.env.reset(Some(seed), cfg.env.noop_max)
            }
        };
        self.frames += cfg.frames_per_step;
        self.steps += 1;

        let eps = cfg.epsilon.at(self.frames);
        let action = act_explore(
            &self.pair.policy,
            self.head,
            &obs,
            eps,
            self.streams.get(Stream::Epsilon),
        )?;
        let step = self.env.step(action)?;
        let mask = sample_mask(cfg.heads, cfg.bernoulli_p, self.streams.get(Stream::Masks));
        self.replay.push(Transition {
            state: obs,
            action,
            reward: step.clipped_reward,
            next_state: step.observation.clone(),
            terminal: step.terminal,
            mask: mask.clone(),
        })?;

        let mut update = None;
        if self.replay.len() >= cfg.learn_start {
            let batch = {
                let ts = self
                    .replay
                    .sample(cfg.batch_size, self.streams.get(Stream::ReplaySample))?;
                Batch::from_transitions(&ts)?
            };
            let stats = update_step(
                &mut self.pair,
                &batch,
                &cfg.update_config(),
                &mut self.optimizers,
                &mut self.scale,
                self.streams.get(Stream::Noise),
            )
            .map_err(|e| match e {
                Error::Numeric(m) => Error::Numeric(format!("at frame {}: {m}", self.frames)),
                other => other,
            })?;
            update = Some(stats);
            self.last_update = Some(stats);
        }

        self.pair.frames_since_sync += cfg.frames_per_step;
        let synced = self.frames % cfg.sync == 0;
        if synced {
            self.pair.sync_target();
        }

        let evaluation = if self.steps % cfg.steps_per_evaluation == 0 {
            Some(self.evaluate_now()?)
        } else {
            None
        };

        let episode_end = step.terminal;
        if !episode_end {
            self.obs = Some(step.observation);
        }
        Ok(Some(StepEvent {
            frames: self.frames,
            head: self.head,
            action,
            mask,
            episode_start,
            episode_end,
            update,
            synced,
            evaluation,
        }))
    }

    fn evaluate_now(&mut self) -> Result<MetricsRow> {
        let returns = evaluate(
            &self.pair.policy,
            &self.dynamics,
            self.cfg.eval_episodes,
            self.cfg.env.noop_max,
            self.streams.get(Stream::EvalSeeds),
        )?;
        let (mean, std) = mean_std(&returns);
        let (qmax, scale) = self
            .last_update
            .map_or((0.0, 1.0), |u| (u.batch_qmax, u.scale));
        let row = MetricsRow {
            frames: self.frames,
            returns,
            mean,
            std,
            qmax,
            scale,
            disagreement: head_disagreement(&self.pair.policy, self.probes.view())?,
            wallclock_s: if self.cfg.record_wallclock {
                self.started.elapsed().as_secs_f64()
            } else {
                0.0
            },
        };
        self.metrics.push(row.clone())?;
        if let Some(dir) = &self.out {
            self.metrics.save(&dir.join("metrics.csv"))?;
            if self.cfg.checkpoints {
                self.checkpoint()
                    .save(&dir.join(format!("ckpt-{:012}.bin", self.frames)))?;
            }
        }
        Ok(row)
    }

    /// Runs to the frame budget and writes the final checkpoint.
    pub fn run(mut self) -> Result<TrainOutcome> {
        while self.advance()?.is_some() {}
        let checkpoint = self.checkpoint();
        if let Some(dir) = &self.out {
            checkpoint.save(&dir.join("final.bin"))?;
        }
        Ok(TrainOutcome {
            checkpoint,
            metrics: self.metrics,
            spec: self.spec,
            run_dir: self.out,
            draw_counts: self.streams.draw_counts(),
        })
    }
}

/// Trains `cfg` to completion, writing run artifacts under `out` if given.
pub fn train(cfg: &TrainConfig, out: Option<&Path>) -> Result<TrainOutcome> {
    let t = Trainer::new(cfg)?;
    match out {
        Some(dir) => t.with_output(dir)?.run(),
        None => t.run(),
    }
}
