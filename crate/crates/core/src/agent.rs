//! Action selection: ε-greedy on one episode head while exploring, a
//! majority vote of all heads while evaluating.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::qnet::{argmax, MultiHeadNet};

/// Linear ε annealing over `decay_frames`, then constant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpsilonSchedule {
    pub initial: f64,
    pub final_value: f64,
    pub decay_frames: u64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            initial: 1.0,
            final_value: 0.01,
            decay_frames: 1_000_000,
        }
    }
}

impl EpsilonSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial >= self.final_value && self.final_value >= 0.0 && self.initial <= 1.0) {
            return Err(Error::Validation(format!(
                "epsilon schedule needs 1 >= initial ({}) >= final ({}) >= 0",
                self.initial, self.final_value
            )));
        }
        if self.decay_frames == 0 {
            return Err(Error::Validation("epsilon.decay_frames must be positive".into()));
        }
        Ok(())
    }

    pub fn at(&self, frames: u64) -> f64 {
        if frames >= self.decay_frames {
            return self.final_value;
        }
        let frac = frames as f64 / self.decay_frames as f64;
        self.initial + (self.final_value - self.initial) * frac
    }
}

/// Uniform head index for the next exploration episode.
pub fn pick_head<R: Rng + ?Sized>(heads: usize, rng: &mut R) -> usize {
    rng.random_range(0..heads)
}

/// ε-greedy action from head `k` of `policy`.
///
/// Always draws one uniform for the ε test, plus one for the random action
/// when exploring, so the draw count depends only on ε and the stream.
pub fn act_explore<R: Rng + ?Sized>(
    policy: &MultiHeadNet,
    head: usize,
    state: &[f64],
    eps: f64,
    rng: &mut R,
) -> Result<usize> {
    if head >= policy.head_count() {
        return Err(Error::Argument(format!(
            "head {head} out of range for {} heads",
            policy.head_count()
        )));
    }
    if rng.random::<f64>() < eps {
        return Ok(rng.random_range(0..policy.action_count()));
    }
    let view = ArrayView2::from_shape((1, state.len()), state)
        .map_err(|e| Error::Shape(e.to_string()))?;
    let q = policy.q_head(head, view)?;
    Ok(argmax(q.row(0).iter().copied()))
}

/// Majority vote over the heads' greedy actions for a `K × actions`
/// Q-matrix. Ties go to the larger Q summed over heads, then to the lowest
/// action index.
pub fn vote(q: ArrayView2<f64>) -> usize {
    let actions = q.ncols();
    let mut votes = vec![0usize; actions];
    for row in q.rows() {
        votes[argmax(row.iter().copied())] += 1;
    }
    let sums = q.sum_axis(Axis(0));
    let mut best = 0;
    for a in 1..actions {
        let better = votes[a] > votes[best] || (votes[a] == votes[best] && sums[a] > sums[best]);
        if better {
            best = a;
        }
    }
    best
}

/// Ensemble-vote action for one state.
pub fn act_evaluate(policy: &MultiHeadNet, state: &[f64]) -> Result<usize> {
    Ok(vote(policy.q_one(state)?.view()))
}

/// Fraction of `states` on which the heads' greedy actions are not all
/// equal.
pub fn head_disagreement(policy: &MultiHeadNet, states: ArrayView2<f64>) -> Result<f64> {
    if states.nrows() == 0 {
        return Err(Error::Argument("head disagreement needs at least one state".into()));
    }
    let q = policy.q_all(states)?;
    let split = q
        .outer_iter()
        .filter(|per_state| {
            let mut greedy = per_state.rows().into_iter().map(|r| argmax(r.iter().copied()));
            let first = greedy.next().unwrap();
            greedy.any(|a| a != first)
        })
        .count();
    Ok(split as f64 / states.nrows() as f64)
}

/// Stack observation vectors into a batch matrix.
pub fn stack(states: &[Vec<f64>]) -> Result<Array2<f64>> {
    let width = states.first().map_or(0, Vec::len);
    let flat: Vec<f64> = states.iter().flatten().copied().collect();
    Array2::from_shape_vec((states.len(), width), flat).map_err(|e| Error::Shape(e.to_string()))
}
