//! One network update: per-head double-Q targets perturbed by scaled
//! Gaussian noise, masked Smooth-L1 losses averaged over heads, and an Adam
//! step on the policy network.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;

use crate::error::{shape_err, Error, Result};
use crate::nn::{adam_step, smooth_l1, smooth_l1_grad, AdamState};
use crate::noise::{compute_scale, sample_noise, NoiseConfig, NoiseGranularity, ScaleState};
use crate::qnet::{argmax, MultiHeadNet, NetPair};
use crate::replay::Transition;

/// A sampled minibatch in matrix form.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub states: Array2<f64>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub next_states: Array2<f64>,
    pub terminals: Vec<bool>,
    /// `batch × K`; entry `[i, k]` gates head k on sample i.
    pub masks: Array2<bool>,
}

impl Batch {
    pub fn from_transitions(ts: &[&Transition]) -> Result<Self> {
        let Some(first) = ts.first() else {
            return Err(Error::Argument("empty batch".into()));
        };
        let (n, dim, k) = (ts.len(), first.state.len(), first.mask.len());
        if ts.iter().any(|t| t.state.len() != dim || t.next_state.len() != dim || t.mask.len() != k) {
            return shape_err("transitions in a batch differ in width");
        }
        Ok(Self {
            states: Array2::from_shape_fn((n, dim), |(i, j)| ts[i].state[j]),
            actions: ts.iter().map(|t| t.action).collect(),
            rewards: ts.iter().map(|t| t.reward).collect(),
            next_states: Array2::from_shape_fn((n, dim), |(i, j)| ts[i].next_state[j]),
            terminals: ts.iter().map(|t| t.terminal).collect(),
            masks: Array2::from_shape_fn((n, k), |(i, j)| ts[i].mask[j]),
        })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    fn check(&self, net: &MultiHeadNet) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Argument("empty batch".into()));
        }
        if self.masks.ncols() != net.head_count() {
            return shape_err(format!(
                "masks have {} heads, network has {}",
                self.masks.ncols(),
                net.head_count()
            ));
        }
        if let Some(a) = self.actions.iter().find(|a| **a >= net.action_count()) {
            return shape_err(format!("action {a} out of range"));
        }
        Ok(())
    }
}

/// Adam state for the shared body and for each head separately. A head
/// whose masks are all zero in a batch takes no optimizer step at all.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadOptimizers {
    pub body: AdamState,
    pub heads: Vec<AdamState>,
}

impl HeadOptimizers {
    pub fn new(net: &MultiHeadNet, lr: f64) -> Self {
        Self {
            body: AdamState::new(net.body(), lr),
            heads: net.heads().iter().map(|h| AdamState::new(h, lr)).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateConfig {
    pub gamma: f64,
    pub noise: NoiseConfig,
    pub granularity: NoiseGranularity,
    /// `false` selects the noiseless target path; the noise stream is then
    /// never touched.
    pub noise_enabled: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateStats {
    pub total_loss: f64,
    pub batch_qmax: f64,
    pub scale: f64,
}

fn max_of(q: impl IntoIterator<Item = f64>) -> f64 {
    q.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// Largest Q^A(s_i, a) over every sample, head and action.
pub fn batch_qmax(policy: &MultiHeadNet, states: ArrayView2<f64>) -> Result<f64> {
    if states.nrows() == 0 {
        return Err(Error::Argument("batch_qmax of an empty batch".into()));
    }
    Ok(max_of(policy.q_all(states)?.iter().copied()))
}

/// Double-Q bootstrap values `γ · Q^B_k(s', a*_k) · (1 − terminal)` with
/// `a*_k = argmax_a Q^A_k(s', a)`, shaped `K × batch`.
fn bootstrap(pair: &NetPair, batch: &Batch, gamma: f64) -> Result<Array2<f64>> {
    let next = batch.next_states.view();
    let q_policy = pair.policy.q_all(next)?;
    let q_target = pair.target.q_all(next)?;
    let k = pair.policy.head_count();
    Ok(Array2::from_shape_fn((k, batch.len()), |(h, i)| {
        let a_star = argmax(q_policy.slice(ndarray::s![i, h, ..]).iter().copied());
        let not_done = 1.0 - batch.terminals[i] as u8 as f64;
        gamma * q_target[[i, h, a_star]] * not_done
    }))
}

/// Noisy per-head targets
/// `r + γ · Q^B_k(s', a*) · (1 − terminal) + scale · noise[k, i]`.
pub fn compute_targets(
    pair: &NetPair,
    batch: &Batch,
    scale: f64,
    noise: ArrayView2<f64>,
    gamma: f64,
) -> Result<Array2<f64>> {
    batch.check(&pair.policy)?;
    let k = pair.policy.head_count();
    if noise.dim() != (k, batch.len()) {
        return shape_err(format!(
            "noise is {:?}, expected ({k}, {})",
            noise.dim(),
            batch.len()
        ));
    }
    let mut targets = bootstrap(pair, batch, gamma)?;
    for ((h, i), t) in targets.indexed_iter_mut() {
        *t = batch.rewards[i] + *t + scale * noise[[h, i]];
    }
    Ok(targets)
}

/// Targets without the noise term: `r + γ · Q^B_k(s', a*) · (1 − terminal)`.
pub fn compute_targets_noiseless(pair: &NetPair, batch: &Batch, gamma: f64) -> Result<Array2<f64>> {
    batch.check(&pair.policy)?;
    let mut targets = bootstrap(pair, batch, gamma)?;
    for ((_, i), t) in targets.indexed_iter_mut() {
        *t += batch.rewards[i];
    }
    Ok(targets)
}

/// Per-head predictions `Q^A_k(s_i, a_i)`, `K × batch`, from
/// `batch × K × actions` Q-values.
fn taken_action_values(q: &ndarray::Array3<f64>, batch: &Batch) -> Array2<f64> {
    Array2::from_shape_fn((q.len_of(Axis(1)), batch.len()), |(h, i)| {
        q[[i, h, batch.actions[i]]]
    })
}

/// `(1/K) Σ_k mean_i m_ik · L(Q^A_k(s_i, a_i), target_ki)`.
pub fn total_loss(policy: &MultiHeadNet, batch: &Batch, targets: ArrayView2<f64>) -> Result<f64> {
    batch.check(policy)?;
    let preds = taken_action_values(&policy.q_all(batch.states.view())?, batch);
    masked_loss(&preds, batch, targets)
}

fn masked_loss(preds: &Array2<f64>, batch: &Batch, targets: ArrayView2<f64>) -> Result<f64> {
    let (k, b) = preds.dim();
    if targets.dim() != (k, b) {
        return shape_err(format!("targets are {:?}, expected ({k}, {b})", targets.dim()));
    }
    let mut total = 0.0;
    for h in 0..k {
        let mut head = 0.0;
        for i in 0..b {
            if batch.masks[[i, h]] {
                head += smooth_l1(preds[[h, i]], targets[[h, i]])?;
            }
        }
        total += head / b as f64;
    }
    Ok(total / k as f64)
}

/// Runs one full update of `pair.policy` on `batch`; the target network is
/// left untouched.
pub fn update_step<R: Rng + ?Sized>(
    pair: &mut NetPair,
    batch: &Batch,
    cfg: &UpdateConfig,
    optimizers: &mut HeadOptimizers,
    scale_state: &mut ScaleState,
    noise_rng: &mut R,
) -> Result<UpdateStats> {
    batch.check(&pair.policy)?;
    let k = pair.policy.head_count();
    let b = batch.len();

    let trace = pair.policy.trace(batch.states.view())?;
    let batch_qmax = max_of(trace.heads.iter().flat_map(|t| t.output().iter().copied()));
    let scale = compute_scale(scale_state.observe(batch_qmax), cfg.noise.beta)?;

    let targets = if cfg.noise_enabled {
        let noise = sample_noise(k, b, &cfg.noise, cfg.granularity, noise_rng);
        compute_targets(pair, batch, scale, noise.view(), cfg.gamma)?
    } else {
        compute_targets_noiseless(pair, batch, cfg.gamma)?
    };

    let preds = Array2::from_shape_fn((k, b), |(h, i)| {
        trace.heads[h].output()[[i, batch.actions[i]]]
    });
    let total_loss = masked_loss(&preds, batch, targets.view()).map_err(|e| diagnose(e, batch_qmax, scale))?;
    if !total_loss.is_finite() {
        return Err(diagnose(
            Error::Numeric(format!("total loss {total_loss}")),
            batch_qmax,
            scale,
        ));
    }

    let norm = 1.0 / (k * b) as f64;
    let mut feature_grad = Array2::<f64>::zeros(trace.body.output().dim());
    let mut any_mask = false;
    for h in 0..k {
        if !batch.masks.column(h).iter().any(|m| *m) {
            continue;
        }
        any_mask = true;
        let mut seed = Array2::<f64>::zeros((b, pair.policy.action_count()));
        for i in 0..b {
            if batch.masks[[i, h]] {
                seed[[i, batch.actions[i]]] = norm * smooth_l1_grad(preds[[h, i]], targets[[h, i]]);
            }
        }
        let head = &pair.policy.heads()[h];
        let (grads, dfeat) = head.backward_trace(&trace.heads[h], seed.view())?;
        feature_grad += &dfeat;
        adam_step(pair.policy.head_mut(h), &grads, &mut optimizers.heads[h])?;
    }
    if any_mask {
        let (grads, _) = pair
            .policy
            .body()
            .backward_trace(&trace.body, feature_grad.view())?;
        adam_step(pair.policy.body_mut(), &grads, &mut optimizers.body)?;
    }

    Ok(UpdateStats {
        total_loss,
        batch_qmax,
        scale,
    })
}

fn diagnose(err: Error, qmax: f64, scale: f64) -> Error {
    match err {
        Error::Numeric(msg) => Error::Numeric(format!("{msg} (batch qmax {qmax}, scale {scale})")),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qnet::NetArch;
    use crate::rng::StreamRng;
    use ndarray::array;

    fn transition(s: f64, a: usize, r: f64, s2: f64, terminal: bool, mask: Vec<bool>) -> Transition {
        Transition {
            state: vec![s, 1.0 - s],
            action: a,
            reward: r,
            next_state: vec![s2, 1.0 - s2],
            terminal,
            mask,
        }
    }

    fn arch(k: usize) -> NetArch {
        NetArch {
            obs_dim: 2,
            body_hidden: vec![5],
            head_hidden: vec![4],
            heads: k,
            actions: 2,
            output_scale: 1.0,
        }
    }

    fn pair(k: usize, seed: u64) -> NetPair {
        let mut rng = StreamRng::from_seed(seed);
        let mut p = NetPair::new(MultiHeadNet::init(&arch(k), &mut rng).unwrap());
        p.target = MultiHeadNet::init(&arch(k), &mut rng).unwrap();
        p
    }

    #[test]
    fn terminal_targets_are_reward_plus_noise() {
        let p = pair(1, 1);
        let ts = [transition(0.2, 1, 0.5, 0.7, true, vec![true])];
        let batch = Batch::from_transitions(&ts.iter().collect::<Vec<_>>()).unwrap();
        let t = compute_targets(&p, &batch, 1.0, array![[0.0]].view(), 0.99).unwrap();
        assert_eq!(t[[0, 0]], 0.5);
        let t = compute_targets(&p, &batch, 2.0, array![[0.01]].view(), 0.99).unwrap();
        assert!((t[[0, 0]] - 0.52).abs() < 1e-15);
        assert!(compute_targets(&p, &batch, 1.0, array![[0.0, 0.0]].view(), 0.99).is_err());
    }

    #[test]
    fn qmax_of_zero_and_fixed_nets() {
        let zero = MultiHeadNet::zeros(&arch(2)).unwrap();
        assert_eq!(batch_qmax(&zero, array![[0.3, 0.7]].view()).unwrap(), 0.0);
        let mut one = MultiHeadNet::zeros(&arch(1)).unwrap();
        one.head_mut(0).layers_mut()[1].bias.assign(&array![-1.0, 3.0]);
        assert_eq!(batch_qmax(&one, array![[0.3, 0.7]].view()).unwrap(), 3.0);
    }

    #[test]
    fn qmax_matches_triple_loop() {
        let p = pair(3, 7);
        let mut rng = StreamRng::from_seed(8);
        let states = Array2::from_shape_fn((6, 2), |_| rng.random_range(-1.0..1.0));
        let mut best = f64::NEG_INFINITY;
        for i in 0..6 {
            let feat = p.policy.body().forward_one(&states.row(i).to_vec()).unwrap();
            for h in p.policy.heads() {
                for q in h.forward_one(&feat).unwrap() {
                    best = best.max(q);
                }
            }
        }
        assert_eq!(batch_qmax(&p.policy, states.view()).unwrap(), best);
    }

    fn cfg(sigma: f64, enabled: bool) -> UpdateConfig {
        UpdateConfig {
            gamma: 0.99,
            noise: NoiseConfig { mu: 0.0, sigma, beta: 0.05 },
            granularity: NoiseGranularity::PerSample,
            noise_enabled: enabled,
        }
    }

    fn random_batch(k: usize, seed: u64, mask: impl Fn(usize, usize) -> bool) -> Batch {
        let mut rng = StreamRng::from_seed(seed);
        let ts: Vec<Transition> = (0..6)
            .map(|i| {
                transition(
                    rng.random_range(0.0..1.0),
                    i % 2,
                    rng.random_range(-1.0..1.0),
                    rng.random_range(0.0..1.0),
                    i == 5,
                    (0..k).map(|h| mask(i, h)).collect(),
                )
            })
            .collect();
        Batch::from_transitions(&ts.iter().collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn fully_masked_update_changes_nothing() {
        let mut p = pair(3, 3);
        let before = p.clone();
        let batch = random_batch(3, 4, |_, _| false);
        let mut opt = HeadOptimizers::new(&p.policy, 0.01);
        let mut sc = ScaleState::new(Default::default());
        let st = update_step(&mut p, &batch, &cfg(0.02, true), &mut opt, &mut sc, &mut StreamRng::from_seed(1)).unwrap();
        assert_eq!(st.total_loss, 0.0);
        assert_eq!(p, before);
    }

    #[test]
    fn masked_head_is_frozen_but_body_learns() {
        let mut p = pair(3, 5);
        let batch = random_batch(3, 6, |_, h| h != 1);
        let mut opt = HeadOptimizers::new(&p.policy, 0.01);
        let mut sc = ScaleState::new(Default::default());
        let mut rng = StreamRng::from_seed(2);
        // several steps so the frozen head would move under shared momentum
        let warm = random_batch(3, 9, |_, _| true);
        update_step(&mut p, &warm, &cfg(0.02, true), &mut opt, &mut sc, &mut rng).unwrap();
        let before = p.clone();
        update_step(&mut p, &batch, &cfg(0.02, true), &mut opt, &mut sc, &mut rng).unwrap();
        assert_eq!(p.policy.heads()[1], before.policy.heads()[1]);
        assert_ne!(p.policy.heads()[0], before.policy.heads()[0]);
        assert_ne!(p.policy.body(), before.policy.body());
        assert_eq!(p.target, before.target);
    }

    #[test]
    fn zero_sigma_matches_noiseless_path_bitwise() {
        let batch = random_batch(3, 10, |i, h| (i + h) % 3 != 0);
        let mut a = pair(3, 11);
        let mut b = a.clone();
        let mut oa = HeadOptimizers::new(&a.policy, 0.01);
        let mut ob = oa.clone();
        let mut sa = ScaleState::new(Default::default());
        let mut sb = sa;
        let mut ra = StreamRng::from_seed(1);
        let mut rb = StreamRng::from_seed(1);
        for _ in 0..5 {
            let x = update_step(&mut a, &batch, &cfg(0.0, true), &mut oa, &mut sa, &mut ra).unwrap();
            let y = update_step(&mut b, &batch, &cfg(0.0, false), &mut ob, &mut sb, &mut rb).unwrap();
            assert_eq!(x, y);
        }
        assert_eq!(a, b);
        assert_eq!(oa, ob);
        assert_eq!(rb.words_drawn(), 0);
    }

    #[test]
    fn targets_are_affine_in_noise_with_slope_scale() {
        let p = pair(2, 12);
        let batch = random_batch(2, 13, |_, _| true);
        let zero = Array2::zeros((2, 6));
        let base = compute_targets(&p, &batch, 1.7, zero.view(), 0.99).unwrap();
        let mut bumped = zero.clone();
        bumped[[1, 3]] = 0.5;
        let moved = compute_targets(&p, &batch, 1.7, bumped.view(), 0.99).unwrap();
        for ((h, i), v) in moved.indexed_iter() {
            let expect = if (h, i) == (1, 3) { base[[h, i]] + 1.7 * 0.5 } else { base[[h, i]] };
            assert!((v - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn target_network_is_not_differentiated() {
        // Gradients through the update only depend on the target network
        // through the (constant) target values.
        let batch = random_batch(2, 14, |_, _| true);
        let p = pair(2, 15);
        let targets = compute_targets_noiseless(&p, &batch, 0.99).unwrap();
        let mut q = p.clone();
        q.target.head_mut(0).layers_mut()[0].weights.mapv_inplace(|w| w * 1.5);
        let other = compute_targets_noiseless(&q, &batch, 0.99).unwrap();
        assert_ne!(targets, other);
        assert_eq!(
            total_loss(&p.policy, &batch, targets.view()).unwrap(),
            total_loss(&q.policy, &batch, targets.view()).unwrap()
        );
    }
}
