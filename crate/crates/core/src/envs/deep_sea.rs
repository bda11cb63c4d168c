use rand::Rng;

use super::Dynamics;
use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// `n × n` grid descended one row per step from the top-left corner.
///
/// Each cell maps the two actions to "left" and "right" through a fixed
/// random layout. Moving right costs `0.01 / n`; moving right in the
/// bottom-right cell pays 1.0. Episodes last exactly `n` steps.
#[derive(Clone, Debug)]
pub struct DeepSea {
    n: usize,
    /// `true` where action 0 means "right".
    flipped: Vec<bool>,
}

impl DeepSea {
    pub fn new(n: usize, layout_seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config(format!("env.n = {n}: deep sea needs n >= 2")));
        }
        let mut rng = StreamRng::from_seed(layout_seed);
        let flipped = (0..n * n).map(|_| rng.random::<bool>()).collect();
        Ok(Self { n, flipped })
    }

    fn cell(&self, s: usize) -> (usize, usize) {
        (s / self.n, s % self.n)
    }

    pub fn is_right(&self, s: usize, action: usize) -> bool {
        (action == 1) != self.flipped[s]
    }
}

impl Dynamics for DeepSea {
    fn name(&self) -> &'static str {
        "deepsea"
    }

    fn state_count(&self) -> usize {
        self.n * self.n
    }

    fn action_count(&self) -> usize {
        2
    }

    fn start_state(&self) -> usize {
        0
    }

    fn horizon(&self) -> usize {
        self.n
    }

    fn transition(&self, s: usize, action: usize) -> (usize, f64, bool) {
        let (row, col) = self.cell(s);
        let right = self.is_right(s, action);
        let mut reward = if right { -0.01 / self.n as f64 } else { 0.0 };
        if right && row == self.n - 1 && col == self.n - 1 {
            reward += 1.0;
        }
        let col = if right { (col + 1).min(self.n - 1) } else { col.saturating_sub(1) };
        if row == self.n - 1 {
            (s, reward, true)
        } else {
            ((row + 1) * self.n + col, reward, false)
        }
    }
}
