//! Independent scalar reimplementations used as test oracles. Nothing here
//! calls the library's math; networks are only read for their parameters.

#![allow(dead_code)]

use boot_np::nn::{Activation, DenseNet};
use boot_np::qnet::{MultiHeadNet, NetArch, NetPair};
use boot_np::replay::Transition;
use boot_np::StreamRng;
use rand::Rng;

#[derive(Clone, Debug)]
pub struct ScalarLayer {
    /// `w[o][i]`
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub relu: bool,
}

#[derive(Clone, Debug)]
pub struct ScalarNet {
    pub layers: Vec<ScalarLayer>,
}

impl ScalarNet {
    pub fn of(net: &DenseNet) -> Self {
        let layers = net
            .layers()
            .iter()
            .map(|l| ScalarLayer {
                w: (0..l.out_dim())
                    .map(|o| (0..l.in_dim()).map(|i| l.weights[[o, i]]).collect())
                    .collect(),
                b: l.bias.to_vec(),
                relu: l.activation == Activation::Relu,
            })
            .collect();
        Self { layers }
    }

    /// All activations, input first.
    pub fn forward(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        for l in &self.layers {
            let prev = acts.last().unwrap();
            let mut out = Vec::with_capacity(l.b.len());
            for o in 0..l.b.len() {
                let mut z = l.b[o];
                for (i, xi) in prev.iter().enumerate() {
                    z += l.w[o][i] * xi;
                }
                out.push(if l.relu && z < 0.0 { 0.0 } else { z });
            }
            acts.push(out);
        }
        acts
    }

    pub fn output(&self, x: &[f64]) -> Vec<f64> {
        self.forward(x).pop().unwrap()
    }

    /// Adds dLoss/dparams into `grads` (same layout as `self`) and returns
    /// dLoss/dinput.
    pub fn backward(&self, acts: &[Vec<f64>], dout: &[f64], grads: &mut ScalarNet) -> Vec<f64> {
        let mut delta = dout.to_vec();
        for li in (0..self.layers.len()).rev() {
            let l = &self.layers[li];
            let out = &acts[li + 1];
            let inp = &acts[li];
            if l.relu {
                for (d, a) in delta.iter_mut().zip(out) {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let g = &mut grads.layers[li];
            for o in 0..l.b.len() {
                g.b[o] += delta[o];
                for i in 0..inp.len() {
                    g.w[o][i] += delta[o] * inp[i];
                }
            }
            let mut next = vec![0.0; inp.len()];
            for o in 0..l.b.len() {
                for (i, n) in next.iter_mut().enumerate() {
                    *n += l.w[o][i] * delta[o];
                }
            }
            delta = next;
        }
        delta
    }

    pub fn zeros_like(&self) -> ScalarNet {
        let mut z = self.clone();
        for l in &mut z.layers {
            l.b.iter_mut().for_each(|v| *v = 0.0);
            l.w.iter_mut().flatten().for_each(|v| *v = 0.0);
        }
        z
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::new();
        for l in &self.layers {
            for row in &l.w {
                p.extend(row);
            }
            p.extend(&l.b);
        }
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut f64> {
        let mut p = Vec::new();
        for l in &mut self.layers {
            for row in &mut l.w {
                p.extend(row.iter_mut());
            }
            p.extend(l.b.iter_mut());
        }
        p
    }
}

pub fn huber(d: f64) -> f64 {
    if d.abs() < 1.0 {
        0.5 * d * d
    } else {
        d.abs() - 0.5
    }
}

pub fn huber_grad(d: f64) -> f64 {
    d.clamp(-1.0, 1.0)
}

pub fn first_argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Body plus heads as scalar nets.
#[derive(Clone, Debug)]
pub struct ScalarQ {
    pub body: ScalarNet,
    pub heads: Vec<ScalarNet>,
}

impl ScalarQ {
    pub fn of(net: &MultiHeadNet) -> Self {
        Self {
            body: ScalarNet::of(net.body()),
            heads: net.heads().iter().map(ScalarNet::of).collect(),
        }
    }

    pub fn q(&self, k: usize, s: &[f64]) -> Vec<f64> {
        self.heads[k].output(&self.body.output(s))
    }
}

/// Algorithm 2 targets written out per head and sample.
pub fn oracle_targets(
    policy: &ScalarQ,
    target: &ScalarQ,
    batch: &[Transition],
    scale: f64,
    noise: &[Vec<f64>],
    gamma: f64,
) -> Vec<Vec<f64>> {
    (0..policy.heads.len())
        .map(|k| {
            batch
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    let a_star = first_argmax(&policy.q(k, &t.next_state));
                    let boot = if t.terminal {
                        0.0
                    } else {
                        gamma * target.q(k, &t.next_state)[a_star]
                    };
                    t.reward + boot + scale * noise[k][i]
                })
                .collect()
        })
        .collect()
}

/// `(1/K) Σ_k (1/B) Σ_i m_ik · huber(Q_k(s_i, a_i) − target_ki)`.
pub fn oracle_loss(policy: &ScalarQ, batch: &[Transition], targets: &[Vec<f64>]) -> f64 {
    let k = policy.heads.len();
    let b = batch.len() as f64;
    let mut total = 0.0;
    for h in 0..k {
        let mut sum = 0.0;
        for (i, t) in batch.iter().enumerate() {
            if t.mask[h] {
                sum += huber(policy.q(h, &t.state)[t.action] - targets[h][i]);
            }
        }
        total += sum / b;
    }
    total / k as f64
}

pub fn oracle_qmax(policy: &ScalarQ, batch: &[Transition]) -> f64 {
    let mut m = f64::NEG_INFINITY;
    for t in batch {
        for k in 0..policy.heads.len() {
            for q in policy.q(k, &t.state) {
                m = m.max(q);
            }
        }
    }
    m
}

/// Plain Adam over a flat parameter list.
#[derive(Clone, Debug)]
pub struct ScalarAdam {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: i32,
    pub lr: f64,
}

impl ScalarAdam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
        }
    }

    pub fn step(&mut self, params: &mut [&mut f64], grads: &[f64]) {
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        self.t += 1;
        for j in 0..grads.len() {
            self.m[j] = b1 * self.m[j] + (1.0 - b1) * grads[j];
            self.v[j] = b2 * self.v[j] + (1.0 - b2) * grads[j] * grads[j];
            let mh = self.m[j] / (1.0 - b1.powi(self.t));
            let vh = self.v[j] / (1.0 - b2.powi(self.t));
            *params[j] -= self.lr * mh / (vh.sqrt() + eps);
        }
    }
}

/// One noiseless single-head double-DQN update, entirely in scalar code.
/// Returns the pre-step loss.
pub fn oracle_k1_update(
    policy: &mut ScalarQ,
    target: &ScalarQ,
    batch: &[Transition],
    gamma: f64,
    body_adam: &mut ScalarAdam,
    head_adam: &mut ScalarAdam,
) -> f64 {
    let zero_noise = vec![vec![0.0; batch.len()]];
    let targets = oracle_targets(policy, target, batch, 1.0, &zero_noise, gamma);
    let loss = oracle_loss(policy, batch, &targets);
    let b = batch.len() as f64;
    let mut gbody = policy.body.zeros_like();
    let mut ghead = policy.heads[0].zeros_like();
    for (i, t) in batch.iter().enumerate() {
        if !t.mask[0] {
            continue;
        }
        let body_acts = policy.body.forward(&t.state);
        let feat = body_acts.last().unwrap().clone();
        let head_acts = policy.heads[0].forward(&feat);
        let q = head_acts.last().unwrap();
        let mut dout = vec![0.0; q.len()];
        dout[t.action] = huber_grad(q[t.action] - targets[0][i]) / b;
        let dfeat = policy.heads[0].backward(&head_acts, &dout, &mut ghead);
        policy.body.backward(&body_acts, &dfeat, &mut gbody);
    }
    let gh = ghead.params();
    head_adam.step(&mut policy.heads[0].params_mut(), &gh);
    let gb = gbody.params();
    body_adam.step(&mut policy.body.params_mut(), &gb);
    loss
}

pub fn micro_arch(k: usize) -> NetArch {
    NetArch {
        obs_dim: 2,
        body_hidden: vec![3],
        head_hidden: vec![2],
        heads: k,
        actions: 2,
        output_scale: 1.0,
    }
}

/// Random policy/target pair with independent parameters.
pub fn random_pair(arch: &NetArch, rng: &mut StreamRng) -> NetPair {
    let mut pair = NetPair::new(MultiHeadNet::init(arch, rng).unwrap());
    pair.target = MultiHeadNet::init(arch, rng).unwrap();
    // nonzero biases so every parameter is exercised
    for net in [&mut pair.policy, &mut pair.target] {
        for l in net.body_mut().layers_mut() {
            l.bias.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        }
        for k in 0..arch.heads {
            for l in net.head_mut(k).layers_mut() {
                l.bias.mapv_inplace(|_| rng.random_range(-0.5..0.5));
            }
        }
    }
    pair
}

pub fn random_transitions(
    n: usize,
    dim: usize,
    actions: usize,
    heads: usize,
    rng: &mut StreamRng,
) -> Vec<Transition> {
    (0..n)
        .map(|_| Transition {
            state: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            action: rng.random_range(0..actions),
            reward: rng.random_range(-1.0..1.0),
            next_state: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            terminal: rng.random_bool(0.3),
            mask: (0..heads).map(|_| rng.random_bool(0.7)).collect(),
        })
        .collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    if d == 0.0 {
        0.0
    } else {
        d / a.abs().max(b.abs())
    }
}

/// Largest relative error between analytic and central-difference
/// gradients of `Σ huber(net(x)_j − y_j)` over every parameter. Partials
/// where both values are below `floor` in magnitude are skipped.
pub fn finite_difference_check(net: &DenseNet, x: &[f64], y: &[f64], h: f64, floor: f64) -> f64 {
    let scalar = ScalarNet::of(net);
    let loss = |n: &ScalarNet| -> f64 {
        n.output(x).iter().zip(y).map(|(o, t)| huber(o - t)).sum()
    };
    let acts = scalar.forward(x);
    let out = acts.last().unwrap();
    let dout: Vec<f64> = out.iter().zip(y).map(|(o, t)| huber_grad(o - t)).collect();
    let input = ndarray::Array2::from_shape_vec((1, x.len()), x.to_vec()).unwrap();
    let seed = ndarray::Array2::from_shape_vec((1, dout.len()), dout).unwrap();
    let analytic = net.backward(input.view(), seed.view()).unwrap();
    let mut flat: Vec<f64> = Vec::new();
    for g in &analytic.layers {
        flat.extend(g.weights.iter());
        flat.extend(g.bias.iter());
    }
    let n = scalar.params().len();
    assert_eq!(flat.len(), n);
    let mut worst: f64 = 0.0;
    for j in 0..n {
        let mut plus = scalar.clone();
        *plus.params_mut()[j] += h;
        let mut minus = scalar.clone();
        *minus.params_mut()[j] -= h;
        let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
        if flat[j].abs() < floor && numeric.abs() < floor {
            continue;
        }
        worst = worst.max(rel_err(flat[j], numeric));
    }
    worst
}

/// Random dense net with at most `max_params` parameters and random biases.
pub fn small_random_net(rng: &mut StreamRng, max_params: usize) -> DenseNet {
    loop {
        let depth = rng.random_range(1..=3);
        let mut dims = vec![rng.random_range(1..=4)];
        for _ in 0..depth {
            dims.push(rng.random_range(1..=5));
        }
        let mut net = DenseNet::init(&dims, rng).unwrap();
        if net.param_count() > max_params {
            continue;
        }
        for l in net.layers_mut() {
            l.bias.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        }
        return net;
    }
}

/// Builds one randomized micro-instance (K ≤ 3, batch ≤ 4, 2 actions) and
/// returns the largest absolute gap between the library and the scalar
/// oracle over targets and the pre-step total loss.
pub fn update_oracle_gap(seed: u64) -> f64 {
    use boot_np::noise::{sample_noise, NoiseConfig, NoiseGranularity, ScaleState, QmaxSource};
    use boot_np::update::{compute_targets, total_loss, update_step, Batch, HeadOptimizers, UpdateConfig};

    let mut rng = StreamRng::from_seed(seed);
    let k = rng.random_range(1..=3);
    let b = rng.random_range(1..=4);
    let arch = micro_arch(k);
    let mut pair = random_pair(&arch, &mut rng);
    let ts = random_transitions(b, arch.obs_dim, 2, k, &mut rng);
    let refs: Vec<&Transition> = ts.iter().collect();
    let batch = Batch::from_transitions(&refs).unwrap();
    let gamma = 0.99;
    let noise_cfg = NoiseConfig {
        mu: 0.0,
        sigma: 0.5,
        beta: 0.05,
    };

    let policy = ScalarQ::of(&pair.policy);
    let target = ScalarQ::of(&pair.target);
    let qmax = oracle_qmax(&policy, &ts);
    let scale = 1.0 + noise_cfg.beta * qmax;

    let noise_rng = StreamRng::from_seed(seed ^ 0xA5A5);
    let noise = sample_noise(k, b, &noise_cfg, NoiseGranularity::PerSample, &mut noise_rng.clone());
    let noise_rows: Vec<Vec<f64>> = noise.rows().into_iter().map(|r| r.to_vec()).collect();
    let want_targets = oracle_targets(&policy, &target, &ts, scale, &noise_rows, gamma);
    let want_loss = oracle_loss(&policy, &ts, &want_targets);

    let mut gap: f64 = 0.0;
    let got = compute_targets(&pair, &batch, scale, noise.view(), gamma).unwrap();
    for h in 0..k {
        for i in 0..b {
            gap = gap.max((got[[h, i]] - want_targets[h][i]).abs());
        }
    }
    gap = gap.max((total_loss(&pair.policy, &batch, got.view()).unwrap() - want_loss).abs());

    let cfg = UpdateConfig {
        gamma,
        noise: noise_cfg,
        granularity: NoiseGranularity::PerSample,
        noise_enabled: true,
    };
    let mut opts = HeadOptimizers::new(&pair.policy, 1e-3);
    let mut scale_state = ScaleState::new(QmaxSource::Batch);
    let stats = update_step(&mut pair, &batch, &cfg, &mut opts, &mut scale_state, &mut noise_rng.clone()).unwrap();
    gap = gap.max((stats.total_loss - want_loss).abs());
    gap = gap.max((stats.batch_qmax - qmax).abs());
    gap = gap.max((stats.scale - scale).abs());
    gap
}

/// Runs `performance_profile` on 1000 random scores and compares every
/// point with a direct count. Returns the number of mismatching points and
/// whether the profile is non-increasing in tau.
pub fn profile_recount(seed: u64) -> (usize, bool) {
    use boot_np::report::{default_taus, performance_profile};

    let mut rng = StreamRng::from_seed(seed);
    let scores: Vec<f64> = (0..1000).map(|_| rng.random_range(-0.6..1.6)).collect();
    let mut taus = default_taus();
    // thresholds sitting exactly on sample values exercise the strict comparison
    let mut on_samples: Vec<f64> = scores.iter().step_by(50).copied().collect();
    taus.append(&mut on_samples);
    taus.sort_by(f64::total_cmp);
    taus.dedup();
    let profile = performance_profile(&scores, &taus).unwrap();
    let mut mismatches = 0;
    for (p, tau) in profile.iter().zip(&taus) {
        let above = scores.iter().filter(|s| **s > *tau).count();
        if p.tau != *tau || p.fraction != above as f64 / scores.len() as f64 {
            mismatches += 1;
        }
    }
    if profile.len() != taus.len() {
        mismatches += 1;
    }
    let monotone = profile.windows(2).all(|w| w[1].fraction <= w[0].fraction);
    (mismatches, monotone)
}
