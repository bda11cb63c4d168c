//! Dense feed-forward networks with exact reverse-mode gradients, the
//! Smooth-L1 loss and a bias-corrected Adam optimizer.
//!
//! Batches are row-major `ndarray` matrices: one sample per row. All
//! arithmetic is `f64`.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;

use crate::error::{shape_err, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Relu => 1,
            Activation::Identity => 0,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Relu),
            _ => None,
        }
    }
}

/// One fully connected layer. `weights` is `out × in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            weights: Array2::zeros((out_dim, in_dim)),
            bias: Array1::zeros(out_dim),
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseNet {
    layers: Vec<Dense>,
}

/// Post-activation outputs of every layer for one batch, input first.
#[derive(Clone, Debug)]
pub struct Trace {
    pub activations: Vec<Array2<f64>>,
}

impl Trace {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("trace always holds the input")
    }
}

impl DenseNet {
    pub fn new(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return shape_err("a network needs at least one layer");
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.in_dim() == 0 || layer.out_dim() == 0 {
                return shape_err(format!("layer {i} has a zero dimension"));
            }
            if layer.bias.len() != layer.out_dim() {
                return shape_err(format!(
                    "layer {i}: bias length {} != out dim {}",
                    layer.bias.len(),
                    layer.out_dim()
                ));
            }
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return shape_err(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    pair[0].out_dim(),
                    i + 1,
                    pair[1].in_dim()
                ));
            }
        }
        Ok(Self { layers })
    }

    /// All-zero network with relu hidden layers and a linear output layer.
    /// `dims` lists the widths from input to output.
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        Self::zeros_with(dims, Activation::Identity)
    }

    /// All-zero network with relu hidden layers and the given activation on
    /// the last layer.
    pub fn zeros_with(dims: &[usize], output: Activation) -> Result<Self> {
        if dims.len() < 2 {
            return shape_err("need at least input and output widths");
        }
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i == last { output } else { Activation::Relu };
                Dense::zeros(w[0], w[1], act)
            })
            .collect();
        Self::new(layers)
    }

    /// Random initialisation: He-uniform for relu layers, `U(±1/√fan_in)`
    /// for a linear output layer, zero biases.
    pub fn init<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<Self> {
        Self::init_with(dims, Activation::Identity, rng)
    }

    pub fn init_with<R: Rng + ?Sized>(
        dims: &[usize],
        output: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeros_with(dims, output)?;
        for layer in &mut net.layers {
            let fan_in = layer.in_dim() as f64;
            let bound = match layer.activation {
                Activation::Relu => (6.0 / fan_in).sqrt(),
                Activation::Identity => 1.0 / fan_in.sqrt(),
            };
            layer
                .weights
                .mapv_inplace(|_| rng.random_range(-bound..=bound));
        }
        Ok(net)
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.weights.iter().all(|w| w.is_finite()) && l.bias.iter().all(|b| b.is_finite())
        })
    }

    /// Same layer dimensions and activations.
    pub fn same_shape(&self, other: &DenseNet) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| {
                a.weights.dim() == b.weights.dim() && a.activation == b.activation
            })
    }

    fn check_input(&self, input: &ArrayView2<f64>) -> Result<()> {
        if input.ncols() != self.in_dim() {
            return shape_err(format!(
                "input width {} != network input dim {}",
                input.ncols(),
                self.in_dim()
            ));
        }
        Ok(())
    }

    pub fn forward(&self, input: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&input)?;
        let mut x = dense_forward(&self.layers[0], input);
        for layer in &self.layers[1..] {
            x = dense_forward(layer, x.view());
        }
        Ok(x)
    }

    pub fn forward_one(&self, input: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|e| Error::Shape(e.to_string()))?;
        Ok(self.forward(view)?.into_raw_vec_and_offset().0)
    }

    /// Forward pass that keeps every intermediate activation for
    /// [`DenseNet::backward_trace`].
    pub fn trace(&self, input: ArrayView2<f64>) -> Result<Trace> {
        self.check_input(&input)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.to_owned());
        for layer in &self.layers {
            let next = dense_forward(layer, activations.last().unwrap().view());
            activations.push(next);
        }
        Ok(Trace { activations })
    }

    pub fn backward(
        &self,
        input: ArrayView2<f64>,
        loss_grad: ArrayView2<f64>,
    ) -> Result<GradientSet> {
        let trace = self.trace(input)?;
        Ok(self.backward_trace(&trace, loss_grad)?.0)
    }

    /// Backpropagates `loss_grad` (∂loss/∂output, one row per sample)
    /// through a recorded forward pass. Returns the parameter gradients and
    /// ∂loss/∂input.
    pub fn backward_trace(
        &self,
        trace: &Trace,
        loss_grad: ArrayView2<f64>,
    ) -> Result<(GradientSet, Array2<f64>)> {
        if trace.activations.len() != self.layers.len() + 1 {
            return shape_err("trace does not belong to this network");
        }
        if loss_grad.dim() != trace.output().dim() {
            return shape_err(format!(
                "loss gradient shape {:?} != output shape {:?}",
                loss_grad.dim(),
                trace.output().dim()
            ));
        }
        let mut grads: Vec<LayerGrad> = Vec::with_capacity(self.layers.len());
        let mut delta = loss_grad.to_owned();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            if layer.activation == Activation::Relu {
                // relu'(z) is 1 exactly where the output is positive, 0 at z = 0
                Zip::from(&mut delta)
                    .and(&trace.activations[i + 1])
                    .for_each(|d, &a| {
                        if a <= 0.0 {
                            *d = 0.0;
                        }
                    });
            }
            let input = &trace.activations[i];
            let weights = delta.t().dot(input);
            let bias = delta.sum_axis(Axis(0));
            delta = delta.dot(&layer.weights);
            grads.push(LayerGrad { weights, bias });
        }
        grads.reverse();
        Ok((GradientSet { layers: grads }, delta))
    }
}

fn dense_forward(layer: &Dense, input: ArrayView2<f64>) -> Array2<f64> {
    let mut z = input.dot(&layer.weights.t());
    z += &layer.bias;
    if layer.activation == Activation::Relu {
        z.mapv_inplace(|v| if v > 0.0 { v } else { 0.0 });
    }
    z
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrad {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// ∂loss/∂θ for every parameter of a [`DenseNet`], same layout.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSet {
    pub layers: Vec<LayerGrad>,
}

impl GradientSet {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weights: Array2::zeros(l.weights.dim()),
                    bias: Array1::zeros(l.bias.len()),
                })
                .collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.layers
            .iter()
            .all(|g| g.weights.iter().all(|w| *w == 0.0) && g.bias.iter().all(|b| *b == 0.0))
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|g| g.weights.iter().all(|w| w.is_finite()) && g.bias.iter().all(|b| b.is_finite()))
    }

    fn matches(&self, net: &DenseNet) -> bool {
        self.layers.len() == net.layers.len()
            && self
                .layers
                .iter()
                .zip(&net.layers)
                .all(|(g, l)| g.weights.dim() == l.weights.dim() && g.bias.len() == l.bias.len())
    }
}

/// Smooth-L1 (Huber, transition at |d| = 1) loss between a prediction and
/// its target.
pub fn smooth_l1(prediction: f64, target: f64) -> Result<f64> {
    if !prediction.is_finite() || !target.is_finite() {
        return Err(Error::Numeric(format!(
            "smooth_l1 on non-finite input ({prediction}, {target})"
        )));
    }
    let d = prediction - target;
    Ok(if d.abs() <= 1.0 { 0.5 * d * d } else { d.abs() - 0.5 })
}

/// Derivative of [`smooth_l1`] with respect to the prediction.
pub fn smooth_l1_grad(prediction: f64, target: f64) -> f64 {
    (prediction - target).clamp(-1.0, 1.0)
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Adam moments for one [`DenseNet`].
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<LayerGrad>,
    pub v: Vec<LayerGrad>,
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(net: &DenseNet, lr: f64) -> Self {
        let zeros = GradientSet::zeros_like(net).layers;
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
            lr,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
        }
    }

    fn matches(&self, net: &DenseNet) -> bool {
        let probe = GradientSet { layers: self.m.clone() };
        probe.matches(net)
            && self
                .v
                .iter()
                .zip(&self.m)
                .all(|(v, m)| v.weights.dim() == m.weights.dim() && v.bias.len() == m.bias.len())
            && self.v.len() == self.m.len()
    }
}

/// One bias-corrected Adam step on `net`.
pub fn adam_step(net: &mut DenseNet, grads: &GradientSet, state: &mut AdamState) -> Result<()> {
    if !grads.matches(net) {
        return shape_err("gradient set does not match the network");
    }
    if !state.matches(net) {
        return shape_err("adam state does not match the network");
    }
    state.t += 1;
    let (b1, b2, eps, lr) = (state.beta1, state.beta2, state.eps, state.lr);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    };
    for (((layer, g), m), v) in net
        .layers
        .iter_mut()
        .zip(&grads.layers)
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        Zip::from(&mut layer.weights)
            .and(&mut m.weights)
            .and(&mut v.weights)
            .and(&g.weights)
            .for_each(|p, m, v, &g| update(p, m, v, g));
        Zip::from(&mut layer.bias)
            .and(&mut m.bias)
            .and(&mut v.bias)
            .and(&g.bias)
            .for_each(|p, m, v, &g| update(p, m, v, g));
    }
    if !net.is_finite() {
        return Err(Error::Numeric(format!(
            "non-finite parameters after adam step {}",
            state.t
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;
    use ndarray::{arr1, arr2, array};

    fn identity_layer(n: usize, act: Activation) -> Dense {
        Dense {
            weights: Array2::eye(n),
            bias: Array1::zeros(n),
            activation: act,
        }
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let net = DenseNet::new(vec![identity_layer(3, Activation::Identity)]).unwrap();
        let out = net.forward_one(&[1.5, -2.0, 0.25]).unwrap();
        assert_eq!(out, vec![1.5, -2.0, 0.25]);
    }

    #[test]
    fn relu_layer_clips_negatives() {
        let net = DenseNet::new(vec![identity_layer(2, Activation::Relu)]).unwrap();
        assert_eq!(net.forward_one(&[-1.0, 2.0]).unwrap(), vec![0.0, 2.0]);
    }

    #[test]
    fn rejects_unchained_layers_and_bad_input() {
        let bad = DenseNet::new(vec![
            Dense::zeros(2, 3, Activation::Relu),
            Dense::zeros(4, 1, Activation::Identity),
        ]);
        assert!(matches!(bad, Err(Error::Shape(_))));
        let net = DenseNet::zeros(&[2, 3, 1]).unwrap();
        assert!(matches!(net.forward_one(&[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn smooth_l1_branches() {
        assert_eq!(smooth_l1(0.3, 0.3).unwrap(), 0.0);
        assert_eq!(smooth_l1(0.0, 2.0).unwrap(), 1.5);
        assert_eq!(smooth_l1(0.0, 0.5).unwrap(), 0.125);
        assert_eq!(smooth_l1(2.0, 0.0).unwrap(), smooth_l1(0.0, 2.0).unwrap());
        assert!(matches!(smooth_l1(f64::NAN, 0.0), Err(Error::Numeric(_))));
    }

    #[test]
    fn smooth_l1_is_c1_at_the_transition() {
        let h = 1e-7;
        let left = (smooth_l1(1.0, 0.0).unwrap() - smooth_l1(1.0 - h, 0.0).unwrap()) / h;
        let right = (smooth_l1(1.0 + h, 0.0).unwrap() - smooth_l1(1.0, 0.0).unwrap()) / h;
        assert!((left - 1.0).abs() < 1e-6);
        assert!((right - 1.0).abs() < 1e-6);
        assert!((smooth_l1(1.0 + 1e-12, 0.0).unwrap() - 0.5).abs() < 1e-11);
        assert_eq!(smooth_l1_grad(1.0, 0.0), 1.0);
        assert_eq!(smooth_l1_grad(-3.0, 0.0), -1.0);
    }

    #[test]
    fn zero_seed_gives_zero_gradients() {
        let mut rng = StreamRng::from_seed(3);
        let net = DenseNet::init(&[3, 4, 2], &mut rng).unwrap();
        let x = arr2(&[[0.1, -0.2, 0.3], [1.0, 0.5, -0.5]]);
        let g = net.backward(x.view(), Array2::zeros((2, 2)).view()).unwrap();
        assert!(g.is_zero());
    }

    #[test]
    fn scalar_layer_hand_derivative() {
        // loss = 0.5 (w x - y)^2 so dL/dw = (w x - y) x
        let (w, x, y) = (0.7, 2.0, 0.4);
        let net = DenseNet::new(vec![Dense {
            weights: arr2(&[[w]]),
            bias: arr1(&[0.0]),
            activation: Activation::Identity,
        }])
        .unwrap();
        let out = net.forward_one(&[x]).unwrap()[0];
        let g = net
            .backward(arr2(&[[x]]).view(), arr2(&[[out - y]]).view())
            .unwrap();
        assert!((g.layers[0].weights[[0, 0]] - (w * x - y) * x).abs() < 1e-15);
        assert!((g.layers[0].bias[0] - (w * x - y)).abs() < 1e-15);
    }

    #[test]
    fn backward_rejects_wrong_seed_shape() {
        let net = DenseNet::zeros(&[2, 3, 2]).unwrap();
        let x = array![[1.0, 2.0]];
        let r = net.backward(x.view(), Array2::zeros((1, 3)).view());
        assert!(matches!(r, Err(Error::Shape(_))));
    }

    #[test]
    fn adam_zero_grads_leave_net_unchanged() {
        let mut rng = StreamRng::from_seed(9);
        let mut net = DenseNet::init(&[3, 5, 2], &mut rng).unwrap();
        let before = net.clone();
        let mut st = AdamState::new(&net, 0.01);
        let zero = GradientSet::zeros_like(&net);
        adam_step(&mut net, &zero, &mut st).unwrap();
        assert_eq!(net, before);
        assert_eq!(st.t, 1);
    }

    #[test]
    fn adam_rejects_mismatched_shapes() {
        let mut net = DenseNet::zeros(&[2, 3, 2]).unwrap();
        let other = DenseNet::zeros(&[2, 4, 2]).unwrap();
        let mut st = AdamState::new(&net, 0.01);
        let r = adam_step(&mut net, &GradientSet::zeros_like(&other), &mut st);
        assert!(matches!(r, Err(Error::Shape(_))));
        assert_eq!(st.t, 0);
    }

    #[test]
    fn adam_with_zero_learning_rate_is_identity() {
        let mut rng = StreamRng::from_seed(2);
        let mut net = DenseNet::init(&[3, 4, 2], &mut rng).unwrap();
        let before = net.clone();
        let x = array![[0.3, -0.1, 0.9]];
        let g = net.backward(x.view(), array![[1.0, -2.0]].view()).unwrap();
        let mut st = AdamState::new(&net, 0.0);
        for _ in 0..3 {
            adam_step(&mut net, &g, &mut st).unwrap();
        }
        assert_eq!(net, before);
    }
}
