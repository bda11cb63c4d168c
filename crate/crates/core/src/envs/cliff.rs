use super::Dynamics;
use crate::error::{Error, Result};

pub const NOOP: usize = 0;
pub const UP: usize = 1;
pub const RIGHT: usize = 2;
pub const DOWN: usize = 3;
pub const LEFT: usize = 4;

/// `width × height` grid with the start in the bottom-left corner, the
/// goal in the bottom-right corner and a cliff between them.
///
/// Reaching the goal pays 10 and ends the episode; stepping into the cliff
/// costs 5 and ends it. Every other move pays nothing. Moves into a wall
/// leave the agent in place; action 0 is a no-op.
#[derive(Clone, Debug)]
pub struct SparseCliff {
    width: usize,
    height: usize,
    horizon: usize,
}

impl SparseCliff {
    pub const GOAL_REWARD: f64 = 10.0;
    pub const CLIFF_REWARD: f64 = -5.0;

    pub fn new(width: usize, height: usize, horizon: Option<usize>) -> Result<Self> {
        if width < 3 || height < 2 {
            return Err(Error::Config(format!(
                "sparse cliff needs width >= 3 and height >= 2, got {width}x{height}"
            )));
        }
        let horizon = horizon.unwrap_or(3 * (width + height));
        if horizon == 0 {
            return Err(Error::Config("env.horizon must be positive".into()));
        }
        Ok(Self { width, height, horizon })
    }

    fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }
}

impl Dynamics for SparseCliff {
    fn name(&self) -> &'static str {
        "sparsecliff"
    }

    fn state_count(&self) -> usize {
        self.width * self.height
    }

    fn action_count(&self) -> usize {
        5
    }

    fn start_state(&self) -> usize {
        self.index(self.height - 1, 0)
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn noop_action(&self) -> Option<usize> {
        Some(NOOP)
    }

    fn transition(&self, s: usize, action: usize) -> (usize, f64, bool) {
        let (row, col) = (s / self.width, s % self.width);
        let (row, col) = match action {
            UP => (row.saturating_sub(1), col),
            RIGHT => (row, (col + 1).min(self.width - 1)),
            DOWN => ((row + 1).min(self.height - 1), col),
            LEFT => (row, col.saturating_sub(1)),
            _ => (row, col),
        };
        let next = self.index(row, col);
        if next == s {
            return (s, 0.0, false);
        }
        if row == self.height - 1 && col == self.width - 1 {
            (next, Self::GOAL_REWARD, true)
        } else if row == self.height - 1 && col > 0 {
            (next, Self::CLIFF_REWARD, true)
        } else {
            (next, 0.0, false)
        }
    }
}
