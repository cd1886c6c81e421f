//! Per-frame emotion predictor: a fixed (frozen) frontend followed by a
//! trainable encoder MLP and a one- or two-unit regression head.
//!
//! The frontend stands in for a pretrained feature extractor whose weights
//! are never updated. Optional causal context appends the moving average of
//! the last `k` frames to every frame before the frontend.

use ndarray::{s, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::annotations::{Dimension, FeatureSequence};
use crate::error::{Error, Result};
use crate::nn::{Activation, DenseLayer, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frontend {
    #[default]
    Identity,
    /// Frozen Gaussian projection to `dim` outputs, scaled by `1/sqrt(in)`.
    FixedRandomProjection { dim: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Heads {
    Single,
    /// Arousal then valence.
    Dual,
}

impl Heads {
    pub fn outputs(self) -> usize {
        match self {
            Heads::Single => 1,
            Heads::Dual => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictorConfig {
    pub feature_dim: usize,
    pub frontend: Frontend,
    pub encoder_dims: Vec<usize>,
    pub encoder_activation: Activation,
    pub heads: Heads,
    pub head_activation: Activation,
    /// Causal moving-average context length in frames.
    pub context_frames: Option<usize>,
}

impl PredictorConfig {
    pub fn new(feature_dim: usize, heads: Heads) -> Self {
        Self {
            feature_dim,
            frontend: Frontend::Identity,
            encoder_dims: vec![64, 64],
            encoder_activation: Activation::Tanh,
            heads,
            head_activation: Activation::Tanh,
            context_frames: None,
        }
    }

    fn input_dim(&self) -> usize {
        match self.context_frames {
            Some(k) if k > 1 => 2 * self.feature_dim,
            _ => self.feature_dim,
        }
    }
}

/// Per-frame predictions, one column per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTrace {
    pub values: Array2<f64>,
    pub dimensions: Vec<Dimension>,
}

impl PredictionTrace {
    pub fn frames(&self) -> usize {
        self.values.nrows()
    }

    pub fn column(&self, dim: Dimension) -> Option<Vec<f64>> {
        let j = self.dimensions.iter().position(|&d| d == dim)?;
        Some(self.values.column(j).to_vec())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Predictor {
    config: PredictorConfig,
    dimensions: Vec<Dimension>,
    net: Network,
    frontend_layers: usize,
}

fn check_dimensions(heads: Heads, dimensions: &[Dimension]) -> Result<()> {
    match (heads, dimensions) {
        (Heads::Single, [_]) => Ok(()),
        (Heads::Dual, [Dimension::Arousal, Dimension::Valence]) => Ok(()),
        (Heads::Single, _) => Err(Error::config(format!(
            "single-head predictor cannot serve dimensions {dimensions:?}"
        ))),
        (Heads::Dual, _) => Err(Error::config("dual-head predictor serves [arousal, valence] in that order")),
    }
}

impl Predictor {
    pub fn new(config: PredictorConfig, dimensions: Vec<Dimension>, rng: &mut impl Rng) -> Result<Self> {
        check_dimensions(config.heads, &dimensions)?;
        if config.feature_dim == 0 || config.encoder_dims.contains(&0) {
            return Err(Error::config("predictor widths must be positive"));
        }
        let mut layers = Vec::new();
        let mut width = config.input_dim();
        if let Frontend::FixedRandomProjection { dim } = config.frontend {
            if dim == 0 {
                return Err(Error::config("frontend projection dim must be positive"));
            }
            let scale = 1.0 / (width as f64).sqrt();
            let w = Array2::from_shape_fn((dim, width), |_| {
                let z: f64 = StandardNormal.sample(rng);
                z * scale
            });
            layers.push(DenseLayer::new(w, ndarray::Array1::zeros(dim), Activation::Linear)?.frozen());
            width = dim;
        }
        let frontend_layers = layers.len();
        for &h in &config.encoder_dims {
            layers.push(DenseLayer::init(width, h, config.encoder_activation, rng));
            width = h;
        }
        layers.push(DenseLayer::init(width, config.heads.outputs(), config.head_activation, rng));
        Ok(Self {
            net: Network::new(layers)?,
            config,
            dimensions,
            frontend_layers,
        })
    }

    pub fn from_network(config: PredictorConfig, dimensions: Vec<Dimension>, net: Network) -> Result<Self> {
        check_dimensions(config.heads, &dimensions)?;
        let frontend_layers = usize::from(matches!(config.frontend, Frontend::FixedRandomProjection { .. }));
        if net.in_dim() != config.input_dim() || net.out_dim() != config.heads.outputs() {
            return Err(Error::contract("predictor network shape does not match its config"));
        }
        if net.layers()[..frontend_layers].iter().any(|l| l.trainable) {
            return Err(Error::contract("predictor frontend must be frozen"));
        }
        Ok(Self {
            config,
            dimensions,
            net,
            frontend_layers,
        })
    }

    pub fn config(&self) -> &PredictorConfig {
        &self.config
    }

    pub fn dimensions(&self) -> &[Dimension] {
        &self.dimensions
    }

    pub fn net(&self) -> &Network {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Network {
        &mut self.net
    }

    /// Number of leading frozen layers.
    pub fn frontend_layers(&self) -> usize {
        self.frontend_layers
    }

    /// Network input rows for a feature sequence (context appended if configured).
    pub fn prepare(&self, features: &FeatureSequence) -> Result<Array2<f64>> {
        if features.dim() != self.config.feature_dim {
            return Err(Error::contract(format!(
                "predictor expects {} feature columns, got {}",
                self.config.feature_dim,
                features.dim()
            )));
        }
        match self.config.context_frames {
            Some(k) if k > 1 => {
                let x = &features.data;
                let (m, d) = x.dim();
                let mut out = Array2::zeros((m, 2 * d));
                out.slice_mut(s![.., ..d]).assign(x);
                for t in 0..m {
                    let lo = (t + 1).saturating_sub(k);
                    let avg = x.slice(s![lo..=t, ..]).mean_axis(Axis(0)).unwrap();
                    out.slice_mut(s![t, d..]).assign(&avg);
                }
                Ok(out)
            }
            _ => Ok(features.data.clone()),
        }
    }

    fn wrap(&self, values: Array2<f64>) -> PredictionTrace {
        PredictionTrace {
            values,
            dimensions: self.dimensions.clone(),
        }
    }

    /// Forward on prepared rows, caching for `backward`.
    pub fn forward_rows(&mut self, rows: &Array2<f64>) -> Result<Array2<f64>> {
        self.net.forward(rows)
    }

    pub fn forward(&mut self, features: &FeatureSequence) -> Result<PredictionTrace> {
        let rows = self.prepare(features)?;
        let out = self.net.forward(&rows)?;
        Ok(self.wrap(out))
    }

    pub fn infer(&self, features: &FeatureSequence) -> Result<PredictionTrace> {
        let rows = self.prepare(features)?;
        Ok(self.wrap(self.net.infer(&rows)?))
    }

    /// Accumulates encoder and head gradients; frozen frontend slots stay zero.
    pub fn backward(&mut self, upstream: &Array2<f64>) -> Result<()> {
        self.net.backward(upstream).map(|_| ())
    }
}
