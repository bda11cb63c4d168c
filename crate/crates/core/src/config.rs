//! Training configuration and its flat `key = value` text form.
//!
//! Every key has a desk-scale default; [`TrainConfig::atari_scale`] returns the
//! Atari-scale values. Lines starting with `#`
//! are comments. Unknown keys are errors.

use std::fmt::Write as _;
use std::path::Path;

use crate::agent::EpsilonSchedule;
use crate::envs::{EnvConfig, EnvName};
use crate::error::{Error, Result};
use crate::noise::{NoiseConfig, NoiseGranularity, QmaxSource};
use crate::qnet::NetArch;
use crate::update::UpdateConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub label: String,
    pub seed: u64,
    pub env: EnvConfig,
    pub heads: usize,
    pub body_hidden: usize,
    pub head_hidden: usize,
    pub output_scale: f64,
    pub bernoulli_p: f64,
    pub gamma: f64,
    pub lr: f64,
    pub epsilon: EpsilonSchedule,
    pub sync: u64,
    pub frames_per_step: u64,
    pub steps_per_evaluation: u64,
    pub max_frames: u64,
    pub replay_size: usize,
    pub batch_size: usize,
    pub learn_start: usize,
    pub noise: NoiseConfig,
    pub noise_enabled: bool,
    pub noise_granularity: NoiseGranularity,
    pub qmax_source: QmaxSource,
    pub eval_episodes: usize,
    pub record_wallclock: bool,
    pub checkpoints: bool,
}

impl Default for TrainConfig {
    /// Desk-scale defaults.
    fn default() -> Self {
        Self {
            label: "boot-dqn+np".into(),
            seed: 0,
            env: EnvConfig::default(),
            heads: 9,
            body_hidden: 32,
            head_hidden: 16,
            output_scale: 0.01,
            bernoulli_p: 0.9,
            gamma: 0.99,
            lr: 1e-3,
            epsilon: EpsilonSchedule {
                initial: 1.0,
                final_value: 0.01,
                decay_frames: 40_000,
            },
            sync: 4_000,
            frames_per_step: 1,
            steps_per_evaluation: 2_000,
            max_frames: 400_000,
            replay_size: 100_000,
            batch_size: 32,
            learn_start: 32,
            noise: NoiseConfig::default(),
            noise_enabled: true,
            noise_granularity: NoiseGranularity::PerSample,
            qmax_source: QmaxSource::Batch,
            eval_episodes: 5,
            record_wallclock: false,
            checkpoints: true,
        }
    }
}

const KEYS: &[&str] = &[
    "label",
    "seed",
    "env.name",
    "env.n",
    "env.horizon",
    "env.width",
    "env.height",
    "env.layout_seed",
    "env.noop_max",
    "k",
    "net.body_hidden",
    "net.head_hidden",
    "net.output_scale",
    "bernoulli_p",
    "gamma",
    "lr",
    "epsilon.initial",
    "epsilon.final",
    "epsilon.decay_frames",
    "sync",
    "frames_per_step",
    "steps_per_evaluation",
    "max_frames",
    "replay_size",
    "batch_size",
    "learn_start",
    "noise.mu",
    "noise.sigma",
    "noise.beta",
    "noise.enabled",
    "noise.granularity",
    "noise.qmax",
    "eval.episodes",
    "metrics.wallclock",
    "checkpoints",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got {value:?}"))),
    }
}

impl TrainConfig {
    /// Values used for the Atari experiments, at full scale.
    pub fn atari_scale() -> Self {
        Self {
            lr: 0.0000625,
            epsilon: EpsilonSchedule::default(),
            sync: 40_000,
            frames_per_step: 4,
            steps_per_evaluation: 250_000,
            max_frames: 200_000_000,
            replay_size: 1_000_000,
            ..Self::default()
        }
    }

    pub fn arch(&self, obs_dim: usize, actions: usize) -> NetArch {
        NetArch {
            obs_dim,
            body_hidden: vec![self.body_hidden],
            head_hidden: vec![self.head_hidden],
            heads: self.heads,
            actions,
            output_scale: self.output_scale,
        }
    }

    pub fn update_config(&self) -> UpdateConfig {
        UpdateConfig {
            gamma: self.gamma,
            noise: self.noise,
            granularity: self.noise_granularity,
            noise_enabled: self.noise_enabled,
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "label" => self.label = v.to_string(),
            "seed" => self.seed = parse(key, v)?,
            "env.name" => self.env.name = v.parse::<EnvName>()?,
            "env.n" => self.env.n = parse(key, v)?,
            "env.horizon" => {
                self.env.horizon = match v {
                    "default" => None,
                    _ => Some(parse(key, v)?),
                }
            }
            "env.width" => self.env.width = parse(key, v)?,
            "env.height" => self.env.height = parse(key, v)?,
            "env.layout_seed" => self.env.layout_seed = parse(key, v)?,
            "env.noop_max" => self.env.noop_max = parse(key, v)?,
            "k" => self.heads = parse(key, v)?,
            "net.body_hidden" => self.body_hidden = parse(key, v)?,
            "net.head_hidden" => self.head_hidden = parse(key, v)?,
            "net.output_scale" => self.output_scale = parse(key, v)?,
            "bernoulli_p" => self.bernoulli_p = parse(key, v)?,
            "gamma" => self.gamma = parse(key, v)?,
            "lr" => self.lr = parse(key, v)?,
            "epsilon.initial" => self.epsilon.initial = parse(key, v)?,
            "epsilon.final" => self.epsilon.final_value = parse(key, v)?,
            "epsilon.decay_frames" => self.epsilon.decay_frames = parse(key, v)?,
            "sync" => self.sync = parse(key, v)?,
            "frames_per_step" => self.frames_per_step = parse(key, v)?,
            "steps_per_evaluation" => self.steps_per_evaluation = parse(key, v)?,
            "max_frames" => self.max_frames = parse(key, v)?,
            "replay_size" => self.replay_size = parse(key, v)?,
            "batch_size" => self.batch_size = parse(key, v)?,
            "learn_start" => self.learn_start = parse(key, v)?,
            "noise.mu" => self.noise.mu = parse(key, v)?,
            "noise.sigma" => self.noise.sigma = parse(key, v)?,
            "noise.beta" => self.noise.beta = parse(key, v)?,
            "noise.enabled" => self.noise_enabled = parse_bool(key, v)?,
            "noise.granularity" => {
                self.noise_granularity = match v {
                    "per_sample" => NoiseGranularity::PerSample,
                    "per_head" => NoiseGranularity::PerHead,
                    _ => {
                        return Err(Error::Config(format!(
                            "noise.granularity: expected per_sample or per_head, got {v:?}"
                        )))
                    }
                }
            }
            "noise.qmax" => {
                self.qmax_source = match v {
                    "batch" => QmaxSource::Batch,
                    "running" => QmaxSource::Running,
                    _ => {
                        return Err(Error::Config(format!(
                            "noise.qmax: expected batch or running, got {v:?}"
                        )))
                    }
                }
            }
            "eval.episodes" => self.eval_episodes = parse(key, v)?,
            "metrics.wallclock" => self.record_wallclock = parse_bool(key, v)?,
            "checkpoints" => self.checkpoints = parse_bool(key, v)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {kv:?} is not key=value")))?;
        self.set(k, v)
    }

    /// Parses config text on top of the desk defaults.
    pub fn from_text(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.merge_text(text, origin)?;
        Ok(cfg)
    }

    pub fn merge_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let wrap = |msg: String| Error::Parse {
                file: origin.to_path_buf(),
                line: i + 1,
                msg,
            };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| wrap(format!("expected key = value, got {line:?}")))?;
            self.set(k, v).map_err(|e| wrap(e.to_string()))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?, path)
    }

    /// Canonical text form listing every key.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("label", self.label.clone());
        put("seed", self.seed.to_string());
        put("env.name", self.env.name.as_str().into());
        put("env.n", self.env.n.to_string());
        put(
            "env.horizon",
            self.env.horizon.map_or("default".into(), |h| h.to_string()),
        );
        put("env.width", self.env.width.to_string());
        put("env.height", self.env.height.to_string());
        put("env.layout_seed", self.env.layout_seed.to_string());
        put("env.noop_max", self.env.noop_max.to_string());
        put("k", self.heads.to_string());
        put("net.body_hidden", self.body_hidden.to_string());
        put("net.head_hidden", self.head_hidden.to_string());
        put("net.output_scale", self.output_scale.to_string());
        put("bernoulli_p", self.bernoulli_p.to_string());
        put("gamma", self.gamma.to_string());
        put("lr", self.lr.to_string());
        put("epsilon.initial", self.epsilon.initial.to_string());
        put("epsilon.final", self.epsilon.final_value.to_string());
        put("epsilon.decay_frames", self.epsilon.decay_frames.to_string());
        put("sync", self.sync.to_string());
        put("frames_per_step", self.frames_per_step.to_string());
        put("steps_per_evaluation", self.steps_per_evaluation.to_string());
        put("max_frames", self.max_frames.to_string());
        put("replay_size", self.replay_size.to_string());
        put("batch_size", self.batch_size.to_string());
        put("learn_start", self.learn_start.to_string());
        put("noise.mu", self.noise.mu.to_string());
        put("noise.sigma", self.noise.sigma.to_string());
        put("noise.beta", self.noise.beta.to_string());
        put("noise.enabled", self.noise_enabled.to_string());
        put(
            "noise.granularity",
            match self.noise_granularity {
                NoiseGranularity::PerSample => "per_sample",
                NoiseGranularity::PerHead => "per_head",
            }
            .into(),
        );
        put(
            "noise.qmax",
            match self.qmax_source {
                QmaxSource::Batch => "batch",
                QmaxSource::Running => "running",
            }
            .into(),
        );
        put("eval.episodes", self.eval_episodes.to_string());
        put("metrics.wallclock", self.record_wallclock.to_string());
        put("checkpoints", self.checkpoints.to_string());
        s
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.heads == 0 {
            return bad("k must be positive".into());
        }
        if self.body_hidden == 0 || self.head_hidden == 0 {
            return bad("hidden widths must be positive".into());
        }
        if !(self.output_scale >= 0.0 && self.output_scale.is_finite()) {
            return bad(format!("net.output_scale = {} must be finite and >= 0", self.output_scale));
        }
        if !(0.0..=1.0).contains(&self.bernoulli_p) {
            return bad(format!("bernoulli_p = {} outside [0, 1]", self.bernoulli_p));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma = {} outside [0, 1]", self.gamma));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad(format!("lr = {} must be finite and >= 0", self.lr));
        }
        self.epsilon.validate()?;
        if self.frames_per_step == 0 {
            return bad("frames_per_step must be positive".into());
        }
        if self.sync == 0 || self.sync % self.frames_per_step != 0 {
            return bad(format!(
                "sync = {} must be a positive multiple of frames_per_step = {}",
                self.sync, self.frames_per_step
            ));
        }
        if self.steps_per_evaluation == 0 {
            return bad("steps_per_evaluation must be positive".into());
        }
        if self.replay_size == 0 || self.batch_size == 0 {
            return bad("replay_size and batch_size must be positive".into());
        }
        if self.learn_start == 0 {
            return bad("learn_start must be at least 1".into());
        }
        self.noise.validate()?;
        if self.eval_episodes == 0 {
            return bad("eval.episodes must be positive".into());
        }
        Ok(())
    }
}

/// All config keys, in canonical order.
pub fn keys() -> &'static [&'static str] {
    KEYS
}
