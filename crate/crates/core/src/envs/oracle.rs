//! Tabular dynamic programming over enumerable MDPs: Bellman optimality
//! fixed points and exact expected returns of fixed policies.

use crate::error::{Error, Result};

/// Largest state space the oracle will enumerate.
pub const MAX_STATES: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Outcome {
    pub prob: f64,
    pub next: usize,
    pub reward: f64,
    pub terminal: bool,
}

/// An MDP whose states and actions can be enumerated.
pub trait TabularMdp {
    fn state_count(&self) -> usize;
    fn action_count(&self) -> usize;
    fn start_state(&self) -> usize;
    fn outcomes(&self, state: usize, action: usize) -> Vec<Outcome>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleSolution {
    /// Optimal values at the first decision step, one per state.
    pub values: Vec<f64>,
    /// For finite horizons, `stage_values[t][s]` is the optimal value with
    /// `horizon - t` decisions left; `stage_values[horizon]` is all zero.
    /// Empty for infinite horizons.
    pub stage_values: Vec<Vec<f64>>,
    /// Greedy action per (stage, state); a single stage when the horizon is
    /// infinite.
    pub greedy: Vec<Vec<usize>>,
    /// Expected undiscounted return of the greedy policy from the start
    /// state.
    pub optimal_return: f64,
    /// Sup-norm Bellman residual of the returned values.
    pub residual: f64,
}

impl OracleSolution {
    pub fn greedy_action(&self, stage: usize, state: usize) -> usize {
        let t = stage.min(self.greedy.len() - 1);
        self.greedy[t][state]
    }
}

fn check_size(mdp: &dyn TabularMdp) -> Result<()> {
    if mdp.state_count() == 0 || mdp.action_count() == 0 {
        return Err(Error::Argument("MDP with no states or actions".into()));
    }
    if mdp.state_count() > MAX_STATES {
        return Err(Error::Unsupported(format!(
            "{} states exceed the oracle limit of {MAX_STATES}",
            mdp.state_count()
        )));
    }
    Ok(())
}

fn backup(mdp: &dyn TabularMdp, s: usize, a: usize, gamma: f64, next_values: &[f64]) -> f64 {
    mdp.outcomes(s, a)
        .iter()
        .map(|o| {
            let cont = if o.terminal { 0.0 } else { gamma * next_values[o.next] };
            o.prob * (o.reward + cont)
        })
        .sum()
}

fn best(mdp: &dyn TabularMdp, s: usize, gamma: f64, next_values: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for a in 0..mdp.action_count() {
        let q = backup(mdp, s, a, gamma, next_values);
        if q > best.1 {
            best = (a, q);
        }
    }
    best
}

/// Solves the Bellman optimality equation for `mdp`.
///
/// With `Some(horizon)` this is backward induction over `horizon`
/// decision steps and any `gamma` in `[0, 1]` works. With `None` it is
/// value iteration to a fixed point, which needs `gamma < 1`.
pub fn value_iteration(
    mdp: &dyn TabularMdp,
    gamma: f64,
    horizon: Option<usize>,
) -> Result<OracleSolution> {
    check_size(mdp)?;
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Argument(format!("gamma {gamma} outside [0, 1]")));
    }
    let n = mdp.state_count();
    match horizon {
        Some(h) => {
            let mut stage_values = vec![vec![0.0; n]; h + 1];
            let mut greedy = vec![vec![0; n]; h.max(1)];
            for t in (0..h).rev() {
                for s in 0..n {
                    let (a, v) = best(mdp, s, gamma, &stage_values[t + 1]);
                    stage_values[t][s] = v;
                    greedy[t][s] = a;
                }
            }
            let mut residual: f64 = 0.0;
            for t in 0..h {
                for s in 0..n {
                    let (_, v) = best(mdp, s, gamma, &stage_values[t + 1]);
                    residual = residual.max((v - stage_values[t][s]).abs());
                }
            }
            let optimal_return =
                policy_return(mdp, h, |t, s| one_hot(mdp.action_count(), greedy[t][s]))?;
            Ok(OracleSolution {
                values: stage_values[0].clone(),
                stage_values,
                greedy,
                optimal_return,
                residual,
            })
        }
        None => {
            if gamma >= 1.0 {
                return Err(Error::Argument(
                    "infinite-horizon value iteration needs gamma < 1".into(),
                ));
            }
            let mut values = vec![0.0; n];
            for _ in 0..1_000_000 {
                let next: Vec<f64> = (0..n).map(|s| best(mdp, s, gamma, &values).1).collect();
                let change = next
                    .iter()
                    .zip(&values)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                values = next;
                if change < 1e-13 {
                    break;
                }
            }
            let greedy: Vec<usize> = (0..n).map(|s| best(mdp, s, gamma, &values).0).collect();
            let residual = (0..n)
                .map(|s| (best(mdp, s, gamma, &values).1 - values[s]).abs())
                .fold(0.0, f64::max);
            // Undiscounted return is only finite for absorbing chains, so
            // report the discounted start value here.
            let optimal_return = values[mdp.start_state()];
            Ok(OracleSolution {
                values,
                stage_values: Vec::new(),
                greedy: vec![greedy],
                optimal_return,
                residual,
            })
        }
    }
}

fn one_hot(n: usize, a: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[a] = 1.0;
    v
}

/// Exact expected undiscounted return over `horizon` steps from the start
/// state of the policy `policy(t, s) -> action probabilities`.
pub fn policy_return(
    mdp: &dyn TabularMdp,
    horizon: usize,
    policy: impl Fn(usize, usize) -> Vec<f64>,
) -> Result<f64> {
    check_size(mdp)?;
    let n = mdp.state_count();
    let mut dist = vec![0.0; n];
    dist[mdp.start_state()] = 1.0;
    let mut total = 0.0;
    for t in 0..horizon {
        let mut next = vec![0.0; n];
        for s in 0..n {
            if dist[s] == 0.0 {
                continue;
            }
            for (a, pa) in policy(t, s).into_iter().enumerate() {
                if pa == 0.0 {
                    continue;
                }
                for o in mdp.outcomes(s, a) {
                    let w = dist[s] * pa * o.prob;
                    total += w * o.reward;
                    if !o.terminal {
                        next[o.next] += w;
                    }
                }
            }
        }
        dist = next;
    }
    Ok(total)
}

/// Expected undiscounted return of the uniformly random policy.
pub fn random_policy_return(mdp: &dyn TabularMdp, horizon: usize) -> Result<f64> {
    let a = mdp.action_count();
    policy_return(mdp, horizon, |_, _| vec![1.0 / a as f64; a])
}
