//! Bootstrapped DQN whose ensemble diversity comes from Gaussian noise added
//! to each head's bootstrap target, plus the small deterministic
//! environments, training loop and score analysis needed to study it.
//!
//! The crate is organised bottom-up:
//!
//! - [`nn`]: dense layers, backpropagation, Smooth-L1 and Adam.
//! - [`qnet`]: the shared-body, K-head Q-network and its target copy.
//! - [`replay`], [`noise`], [`agent`], [`update`]: the pieces of one
//!   learning step.
//! - [`envs`]: NChain, DeepSea and SparseCliff with a tabular oracle.
//! - [`trainer`], [`report`], [`experiment`]: runs, score tables and
//!   ablation matrices.

pub mod agent;
pub mod checkpoint;
pub mod config;
pub mod envs;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod nn;
pub mod noise;
pub mod qnet;
pub mod replay;
pub mod report;
pub mod rng;
pub mod trainer;
pub mod update;

pub use config::TrainConfig;
pub use error::{Error, Result};
pub use rng::{RngStreams, Stream, StreamRng};
