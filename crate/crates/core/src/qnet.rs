//! Shared-body, K-head Q-networks and the policy/target pair.

use ndarray::{s, Array2, Array3, ArrayView2};
use rand::Rng;

use crate::error::{shape_err, Result};
use crate::nn::{Activation, DenseNet, Trace};

/// Widths of the shared body and of every head.
#[derive(Clone, Debug, PartialEq)]
pub struct NetArch {
    pub obs_dim: usize,
    pub body_hidden: Vec<usize>,
    pub head_hidden: Vec<usize>,
    pub heads: usize,
    pub actions: usize,
    /// Multiplier on the initial weights of each head's output layer.
    pub output_scale: f64,
}

impl NetArch {
    /// Desk-scale default: one 32-unit relu body layer, heads with one
    /// 16-unit relu layer and a linear output initialised at 1% scale.
    pub fn desk(obs_dim: usize, actions: usize, heads: usize) -> Self {
        Self {
            obs_dim,
            body_hidden: vec![32],
            head_hidden: vec![16],
            heads,
            actions,
            output_scale: 0.01,
        }
    }

    fn body_dims(&self) -> Vec<usize> {
        std::iter::once(self.obs_dim)
            .chain(self.body_hidden.iter().copied())
            .collect()
    }

    fn feature_dim(&self) -> usize {
        *self.body_hidden.last().unwrap_or(&self.obs_dim)
    }

    fn head_dims(&self) -> Vec<usize> {
        std::iter::once(self.feature_dim())
            .chain(self.head_hidden.iter().copied())
            .chain(std::iter::once(self.actions))
            .collect()
    }
}

/// A relu body `obs_dim → feature_dim` feeding K heads
/// `feature_dim → action_count`.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiHeadNet {
    body: DenseNet,
    heads: Vec<DenseNet>,
}

/// Forward record of one batch through body and every head.
#[derive(Clone, Debug)]
pub struct MultiTrace {
    pub body: Trace,
    pub heads: Vec<Trace>,
}

impl MultiHeadNet {
    pub fn new(body: DenseNet, heads: Vec<DenseNet>) -> Result<Self> {
        if heads.is_empty() {
            return shape_err("need at least one head");
        }
        if heads.iter().any(|h| !h.same_shape(&heads[0])) {
            return shape_err("heads differ in shape");
        }
        if heads[0].in_dim() != body.out_dim() {
            return shape_err(format!(
                "body emits {} features but heads expect {}",
                body.out_dim(),
                heads[0].in_dim()
            ));
        }
        Ok(Self { body, heads })
    }

    pub fn init<R: Rng + ?Sized>(arch: &NetArch, rng: &mut R) -> Result<Self> {
        if arch.body_hidden.is_empty() {
            return shape_err("the shared body needs at least one layer");
        }
        let body = DenseNet::init_with(&arch.body_dims(), Activation::Relu, rng)?;
        let heads = (0..arch.heads)
            .map(|_| {
                let mut h = DenseNet::init(&arch.head_dims(), rng)?;
                if let Some(out) = h.layers_mut().last_mut() {
                    out.weights *= arch.output_scale;
                }
                Ok(h)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(body, heads)
    }

    pub fn zeros(arch: &NetArch) -> Result<Self> {
        if arch.body_hidden.is_empty() {
            return shape_err("the shared body needs at least one layer");
        }
        let body = DenseNet::zeros_with(&arch.body_dims(), Activation::Relu)?;
        let heads = (0..arch.heads)
            .map(|_| DenseNet::zeros(&arch.head_dims()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(body, heads)
    }

    pub fn body(&self) -> &DenseNet {
        &self.body
    }

    pub fn body_mut(&mut self) -> &mut DenseNet {
        &mut self.body
    }

    pub fn heads(&self) -> &[DenseNet] {
        &self.heads
    }

    pub fn head_mut(&mut self, k: usize) -> &mut DenseNet {
        &mut self.heads[k]
    }

    pub fn head_count(&self) -> usize {
        self.heads.len()
    }

    pub fn action_count(&self) -> usize {
        self.heads[0].out_dim()
    }

    pub fn obs_dim(&self) -> usize {
        self.body.in_dim()
    }

    pub fn same_shape(&self, other: &MultiHeadNet) -> bool {
        self.body.same_shape(&other.body)
            && self.heads.len() == other.heads.len()
            && self.heads.iter().zip(&other.heads).all(|(a, b)| a.same_shape(b))
    }

    pub fn is_finite(&self) -> bool {
        self.body.is_finite() && self.heads.iter().all(DenseNet::is_finite)
    }

    /// Q-values for a batch of states, shaped `batch × K × actions`.
    pub fn q_all(&self, states: ArrayView2<f64>) -> Result<Array3<f64>> {
        let features = self.body.forward(states)?;
        let mut q = Array3::zeros((states.nrows(), self.heads.len(), self.action_count()));
        for (k, head) in self.heads.iter().enumerate() {
            let out = head.forward(features.view())?;
            q.slice_mut(s![.., k, ..]).assign(&out);
        }
        Ok(q)
    }

    /// `K × actions` Q-matrix for one state.
    pub fn q_one(&self, state: &[f64]) -> Result<Array2<f64>> {
        let view = ArrayView2::from_shape((1, state.len()), state)
            .map_err(|e| crate::Error::Shape(e.to_string()))?;
        Ok(self.q_all(view)?.index_axis_move(ndarray::Axis(0), 0))
    }

    /// Q-values of a single head for a batch, `batch × actions`.
    pub fn q_head(&self, k: usize, states: ArrayView2<f64>) -> Result<Array2<f64>> {
        let features = self.body.forward(states)?;
        self.heads[k].forward(features.view())
    }

    pub fn trace(&self, states: ArrayView2<f64>) -> Result<MultiTrace> {
        let body = self.body.trace(states)?;
        let heads = self
            .heads
            .iter()
            .map(|h| h.trace(body.output().view()))
            .collect::<Result<Vec<_>>>()?;
        Ok(MultiTrace { body, heads })
    }
}

/// Policy network Q^A and its periodically synchronised copy Q^B.
#[derive(Clone, Debug, PartialEq)]
pub struct NetPair {
    pub policy: MultiHeadNet,
    pub target: MultiHeadNet,
    pub frames_since_sync: u64,
}

impl NetPair {
    /// A pair whose target starts as an exact copy of `policy`.
    pub fn new(policy: MultiHeadNet) -> Self {
        Self {
            target: policy.clone(),
            policy,
            frames_since_sync: 0,
        }
    }

    pub fn sync_target(&mut self) {
        self.target.clone_from(&self.policy);
        self.frames_since_sync = 0;
    }

    pub fn in_sync(&self) -> bool {
        self.policy == self.target
    }
}

/// First index of the largest value.
pub fn argmax(row: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, v) in row.into_iter().enumerate() {
        if v > best_val || i == 0 {
            best = i;
            best_val = v;
        }
    }
    best
}
