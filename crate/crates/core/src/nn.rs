//! Dense layers, per-frame MLPs, and an Adam optimizer.
//!
//! Inputs are `frames x features` matrices and every layer is applied row by
//! row, so a batch of windows can be stacked into one matrix and run through
//! a single forward/backward pass.

use ndarray::{Array1, Array2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Linear,
    #[default]
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Linear => z,
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// `out = act(in . W^T + b)`, with `W` stored `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
    /// Frozen layers never accumulate gradients and are skipped by the optimizer.
    pub trainable: bool,
}

impl DenseLayer {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>, activation: Activation) -> Result<Self> {
        if weights.nrows() != bias.len() {
            return Err(Error::contract(format!(
                "weights have {} rows, bias has {} entries",
                weights.nrows(),
                bias.len()
            )));
        }
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::contract("layer parameters must be finite"));
        }
        Ok(Self {
            weights,
            bias,
            activation,
            trainable: true,
        })
    }

    /// Uniform in `+-sqrt(6 / (in + out))`, zero bias.
    pub fn init(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weights = Array2::from_shape_fn((out_dim, in_dim), |_| rng.random_range(-limit..limit));
        Self {
            weights,
            bias: Array1::zeros(out_dim),
            activation,
            trainable: true,
        }
    }

    pub fn frozen(mut self) -> Self {
        self.trainable = false;
        self
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn forward(&self, input: &Array2<f64>) -> Array2<f64> {
        let mut z = input.dot(&self.weights.t());
        z += &self.bias;
        let act = self.activation;
        z.mapv_inplace(|v| act.apply(v));
        z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl LayerGrads {
    fn zeros_like(layer: &DenseLayer) -> Self {
        Self {
            weights: Array2::zeros(layer.weights.raw_dim()),
            bias: Array1::zeros(layer.bias.raw_dim()),
        }
    }

    fn clear(&mut self) {
        self.weights.fill(0.0);
        self.bias.fill(0.0);
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Moments {
    m: LayerGrads,
    v: LayerGrads,
}

#[derive(Debug, Clone)]
struct LayerCache {
    input: Array2<f64>,
    output: Array2<f64>,
}

/// Adam hyperparameters. The learning rate default is the training protocol's 5e-4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub grad_clip_norm: Option<f64>,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            grad_clip_norm: Some(5.0),
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("optim.learning_rate must be positive"));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::config(format!("optim.{name} must lie in (0, 1)")));
            }
        }
        if !(self.eps > 0.0) {
            return Err(Error::config("optim.eps must be positive"));
        }
        if self.grad_clip_norm.is_some_and(|c| !(c > 0.0)) {
            return Err(Error::config("optim.grad_clip_norm must be positive"));
        }
        Ok(())
    }
}

/// What an optimizer step did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    /// Global gradient norm before clipping.
    pub grad_norm: f64,
    pub clip_scale: f64,
}

/// Ordered stack of dense layers with gradient slots and Adam moments.
#[derive(Debug, Clone)]
pub struct Network {
    layers: Vec<DenseLayer>,
    grads: Vec<LayerGrads>,
    moments: Vec<Moments>,
    cache: Option<Vec<LayerCache>>,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers && self.grads == other.grads && self.moments == other.moments
    }
}

impl Network {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::contract("network needs at least one layer"));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::contract(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    pair[0].out_dim(),
                    i + 1,
                    pair[1].in_dim()
                )));
            }
        }
        let grads = layers.iter().map(LayerGrads::zeros_like).collect();
        let moments = layers
            .iter()
            .map(|l| Moments {
                m: LayerGrads::zeros_like(l),
                v: LayerGrads::zeros_like(l),
            })
            .collect();
        Ok(Self {
            layers,
            grads,
            moments,
            cache: None,
        })
    }

    /// `in_dim -> hidden... -> out_dim`, hidden layers share one activation.
    pub fn mlp(
        in_dim: usize,
        hidden: &[usize],
        hidden_activation: Activation,
        out_dim: usize,
        output_activation: Activation,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 || hidden.contains(&0) {
            return Err(Error::config("layer widths must be positive"));
        }
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut prev = in_dim;
        for &h in hidden {
            layers.push(DenseLayer::init(prev, h, hidden_activation, rng));
            prev = h;
        }
        layers.push(DenseLayer::init(prev, out_dim, output_activation, rng));
        Self::new(layers)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    /// Mutable access to parameters. Shapes must not change.
    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn grads(&self) -> &[LayerGrads] {
        &self.grads
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn trainable_param_count(&self) -> usize {
        self.layers.iter().filter(|l| l.trainable).map(DenseLayer::param_count).sum()
    }

    fn check_input(&self, input: &Array2<f64>) -> Result<()> {
        if input.ncols() != self.in_dim() {
            return Err(Error::contract(format!(
                "network expects {} input columns, got {}",
                self.in_dim(),
                input.ncols()
            )));
        }
        Ok(())
    }

    /// Forward pass without touching the cache; safe on shared snapshots.
    pub fn infer(&self, input: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_input(input)?;
        let mut x = self.layers[0].forward(input);
        for layer in &self.layers[1..] {
            x = layer.forward(&x);
        }
        Ok(x)
    }

    /// Forward pass that retains activations for `backward`.
    pub fn forward(&mut self, input: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_input(input)?;
        let mut cache = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for layer in &self.layers {
            let out = layer.forward(&x);
            cache.push(LayerCache {
                input: x,
                output: out.clone(),
            });
            x = out;
        }
        self.cache = Some(cache);
        Ok(x)
    }

    /// Accumulates parameter gradients for the cached forward pass and
    /// returns the gradient with respect to the network input.
    pub fn backward(&mut self, upstream: &Array2<f64>) -> Result<Array2<f64>> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::contract("backward called without a forward cache"))?;
        let last = &cache[cache.len() - 1].output;
        if upstream.dim() != last.dim() {
            return Err(Error::contract(format!(
                "upstream gradient shape {:?} does not match output shape {:?}",
                upstream.dim(),
                last.dim()
            )));
        }
        let mut delta = upstream.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let c = &cache[i];
            let act = layer.activation;
            if act != Activation::Linear {
                Zip::from(&mut delta)
                    .and(&c.output)
                    .for_each(|d, &a| *d *= act.derivative_from_output(a));
            }
            if layer.trainable {
                let g = &mut self.grads[i];
                g.weights += &delta.t().dot(&c.input);
                g.bias += &delta.sum_axis(Axis(0));
            }
            delta = delta.dot(&layer.weights);
        }
        Ok(delta)
    }

    pub fn zero_grads(&mut self) {
        self.grads.iter_mut().for_each(LayerGrads::clear);
    }

    /// Global L2 norm over trainable gradients.
    pub fn grad_norm(&self) -> f64 {
        self.layers
            .iter()
            .zip(&self.grads)
            .filter(|(l, _)| l.trainable)
            .flat_map(|(_, g)| g.weights.iter().chain(g.bias.iter()))
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Bias-corrected Adam update at 1-based `step`, with optional global
    /// norm clipping beforehand. Gradients are zeroed afterwards.
    pub fn optimizer_step(&mut self, cfg: &OptimConfig, step: u64) -> Result<StepReport> {
        if step == 0 {
            return Err(Error::contract("optimizer steps are 1-based"));
        }
        for (i, (layer, g)) in self.layers.iter().zip(&self.grads).enumerate() {
            if !layer.trainable {
                continue;
            }
            if let Some(bad) = g.weights.iter().chain(g.bias.iter()).find(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    layer: i,
                    detail: format!("gradient value {bad}"),
                });
            }
        }
        let grad_norm = self.grad_norm();
        let clip_scale = match cfg.grad_clip_norm {
            Some(c) if grad_norm > c => c / grad_norm,
            _ => 1.0,
        };
        let t = step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        let (b1, b2, lr, eps) = (cfg.beta1, cfg.beta2, cfg.learning_rate, cfg.eps);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            let g = g * clip_scale;
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        };
        for ((layer, g), mom) in self.layers.iter_mut().zip(&self.grads).zip(&mut self.moments) {
            if !layer.trainable {
                continue;
            }
            Zip::from(&mut layer.weights)
                .and(&g.weights)
                .and(&mut mom.m.weights)
                .and(&mut mom.v.weights)
                .for_each(|p, &g, m, v| update(p, g, m, v));
            Zip::from(&mut layer.bias)
                .and(&g.bias)
                .and(&mut mom.m.bias)
                .and(&mut mom.v.bias)
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
        self.zero_grads();
        Ok(StepReport { grad_norm, clip_scale })
    }

    /// Trainable parameters in layer order, weights row-major then bias.
    pub fn params_flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .filter(|l| l.trainable)
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
            .collect()
    }

    /// Gradients in the same order as `params_flat`.
    pub fn grads_flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .zip(&self.grads)
            .filter(|(l, _)| l.trainable)
            .flat_map(|(_, g)| g.weights.iter().chain(g.bias.iter()).copied())
            .collect()
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.trainable_param_count() {
            return Err(Error::contract(format!(
                "expected {} parameters, got {}",
                self.trainable_param_count(),
                params.len()
            )));
        }
        let mut it = params.iter();
        for layer in self.layers.iter_mut().filter(|l| l.trainable) {
            for p in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *p = *it.next().unwrap();
            }
        }
        Ok(())
    }

    pub fn to_state(&self) -> NetworkState {
        NetworkState {
            layers: self
                .layers
                .iter()
                .zip(&self.moments)
                .map(|(l, m)| LayerState {
                    in_dim: l.in_dim(),
                    out_dim: l.out_dim(),
                    activation: l.activation,
                    trainable: l.trainable,
                    weights: l.weights.iter().copied().collect(),
                    bias: l.bias.to_vec(),
                    adam_m: m.m.weights.iter().chain(m.m.bias.iter()).copied().collect(),
                    adam_v: m.v.weights.iter().chain(m.v.bias.iter()).copied().collect(),
                })
                .collect(),
        }
    }

    pub fn from_state(state: &NetworkState) -> Result<Self> {
        let mut layers = Vec::with_capacity(state.layers.len());
        let mut moments = Vec::with_capacity(state.layers.len());
        for (i, s) in state.layers.iter().enumerate() {
            let n_w = s.in_dim * s.out_dim;
            let n = n_w + s.out_dim;
            if s.weights.len() != n_w || s.bias.len() != s.out_dim || s.adam_m.len() != n || s.adam_v.len() != n {
                return Err(Error::contract(format!("checkpoint layer {i} has inconsistent shapes")));
            }
            let to_grads = |flat: &[f64]| -> Result<LayerGrads> {
                Ok(LayerGrads {
                    weights: Array2::from_shape_vec((s.out_dim, s.in_dim), flat[..n_w].to_vec())
                        .map_err(|e| Error::Internal(e.to_string()))?,
                    bias: Array1::from(flat[n_w..].to_vec()),
                })
            };
            let mut layer = DenseLayer::new(
                Array2::from_shape_vec((s.out_dim, s.in_dim), s.weights.clone())
                    .map_err(|e| Error::Internal(e.to_string()))?,
                Array1::from(s.bias.clone()),
                s.activation,
            )?;
            layer.trainable = s.trainable;
            layers.push(layer);
            moments.push(Moments {
                m: to_grads(&s.adam_m)?,
                v: to_grads(&s.adam_v)?,
            });
        }
        let mut net = Network::new(layers)?;
        net.moments = moments;
        Ok(net)
    }
}

/// Serialized form of one layer, including its Adam moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerState {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    pub trainable: bool,
    /// Row-major `out_dim x in_dim`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    /// Weights then bias, same order as `weights` + `bias`.
    pub adam_m: Vec<f64>,
    pub adam_v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkState {
    pub layers: Vec<LayerState>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, arr2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_layer_passes_input_through() {
        let layer = DenseLayer::new(Array2::eye(3), Array1::zeros(3), Activation::Linear).unwrap();
        let mut net = Network::new(vec![layer]).unwrap();
        let x = arr2(&[[0.1, -0.2, 0.3], [1.0, 2.0, 3.0]]);
        assert_eq!(net.forward(&x).unwrap(), x);
        let up = arr2(&[[1.0, 0.5, -1.0], [0.0, 2.0, 0.25]]);
        assert_eq!(net.backward(&up).unwrap(), up);
    }

    #[test]
    fn mean_as_dense_layer() {
        let layer = DenseLayer::new(arr2(&[[0.5, 0.5]]), arr1(&[0.0]), Activation::Linear).unwrap();
        let net = Network::new(vec![layer]).unwrap();
        let y = net.infer(&arr2(&[[0.2, 0.4]])).unwrap();
        assert!((y[[0, 0]] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn zero_tanh_layer_outputs_zero() {
        let layer = DenseLayer::new(Array2::zeros((2, 3)), Array1::zeros(2), Activation::Tanh).unwrap();
        let net = Network::new(vec![layer]).unwrap();
        let y = net.infer(&arr2(&[[0.3, -5.0, 2.0]])).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_mismatch_and_missing_cache() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = Network::mlp(3, &[4], Activation::Tanh, 1, Activation::Linear, &mut rng).unwrap();
        assert!(net.infer(&Array2::zeros((2, 2))).is_err());
        assert!(matches!(net.backward(&Array2::zeros((2, 1))), Err(Error::Contract(_))));
        net.forward(&Array2::zeros((2, 3))).unwrap();
        assert!(net.backward(&Array2::zeros((3, 1))).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut net = Network::mlp(3, &[5, 4], Activation::Tanh, 2, Activation::Tanh, &mut rng).unwrap();
        let x = Array2::from_shape_fn((6, 3), |(i, j)| (i as f64 - j as f64) * 0.1);
        net.forward(&x).unwrap();
        net.backward(&Array2::zeros((6, 2))).unwrap();
        assert!(net.grads_flat().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn backward_accumulates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = Network::mlp(2, &[3], Activation::Relu, 1, Activation::Tanh, &mut rng).unwrap();
        let x = arr2(&[[0.3, -0.1], [0.5, 0.9], [-0.7, 0.2]]);
        let up = arr2(&[[1.0], [-0.5], [0.25]]);
        net.forward(&x).unwrap();
        net.backward(&up).unwrap();
        let once = net.grads_flat();
        net.backward(&up).unwrap();
        let twice = net.grads_flat();
        for (a, b) in once.iter().zip(&twice) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn adam_fixed_point_and_first_step() {
        let layer = DenseLayer::new(arr2(&[[0.7]]), arr1(&[0.0]), Activation::Linear).unwrap();
        let mut net = Network::new(vec![layer]).unwrap();
        let cfg = OptimConfig::default();
        net.optimizer_step(&cfg, 1).unwrap();
        assert_eq!(net.layers()[0].weights[[0, 0]], 0.7);

        net.grads[0].weights[[0, 0]] = 1.0;
        net.optimizer_step(&cfg, 1).unwrap();
        let delta = 0.7 - net.layers()[0].weights[[0, 0]];
        assert!((delta - cfg.learning_rate).abs() < 1e-10, "{delta}");
        assert!(net.grads_flat().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn clipping_scales_global_norm() {
        let layer = DenseLayer::new(arr2(&[[0.0, 0.0]]), arr1(&[0.0]), Activation::Linear).unwrap();
        let mut net = Network::new(vec![layer]).unwrap();
        net.grads[0].weights = arr2(&[[6.0, 8.0]]);
        let cfg = OptimConfig {
            grad_clip_norm: Some(1.0),
            ..OptimConfig::default()
        };
        let rep = net.optimizer_step(&cfg, 1).unwrap();
        assert!((rep.grad_norm - 10.0).abs() < 1e-12);
        assert!((rep.clip_scale - 0.1).abs() < 1e-12);
        // first moment holds (1 - beta1) * clipped grad
        let m = &net.moments[0].m.weights;
        assert!((m[[0, 0]] - 0.1 * 0.6).abs() < 1e-12);
        assert!((m[[0, 1]] - 0.1 * 0.8).abs() < 1e-12);
    }

    #[test]
    fn non_finite_gradient_names_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut net = Network::mlp(2, &[2], Activation::Tanh, 1, Activation::Linear, &mut rng).unwrap();
        net.grads[1].bias[0] = f64::NAN;
        match net.optimizer_step(&OptimConfig::default(), 1) {
            Err(Error::NonFinite { layer, .. }) => assert_eq!(layer, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn frozen_layer_untouched() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let frozen = DenseLayer::init(3, 3, Activation::Linear, &mut rng).frozen();
        let head = DenseLayer::init(3, 1, Activation::Tanh, &mut rng);
        let mut net = Network::new(vec![frozen.clone(), head]).unwrap();
        let x = Array2::from_shape_fn((4, 3), |(i, j)| ((i * 3 + j) as f64).sin());
        for step in 1..=5 {
            net.forward(&x).unwrap();
            net.backward(&Array2::ones((4, 1))).unwrap();
            assert!(net.grads()[0].weights.iter().all(|&g| g == 0.0));
            net.optimizer_step(&OptimConfig::default(), step).unwrap();
        }
        assert_eq!(net.layers()[0], frozen);
        assert_eq!(net.trainable_param_count(), 4);
    }

    #[test]
    fn state_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut net = Network::mlp(3, &[4], Activation::Tanh, 2, Activation::Linear, &mut rng).unwrap();
        let x = Array2::from_shape_fn((5, 3), |(i, j)| (i as f64 * 0.3 - j as f64 * 0.2).cos());
        net.forward(&x).unwrap();
        net.backward(&Array2::ones((5, 2))).unwrap();
        net.optimizer_step(&OptimConfig::default(), 1).unwrap();
        let json = serde_json::to_string(&net.to_state()).unwrap();
        let back = Network::from_state(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, net);
    }
}
