//! Annotators Consensus Network (ACN) and fixed aggregation baselines.
//!
//! The ACN is a per-frame MLP with weights shared across frames: each row of
//! an `M x U` annotation block maps to one consensus value, so the trace has
//! length `M` whatever the window length. It is not constrained to be
//! invariant to annotator order; columns are sorted by annotator id upstream.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::annotations::{AnnotationMatrix, GoldStandardTrack};
use crate::ccc;
use crate::error::{Error, Result};
use crate::nn::{Activation, DenseLayer, Network};

/// Shape of the network; `annotators` is U.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcnConfig {
    pub annotators: usize,
    pub hidden_dims: Vec<usize>,
    pub activation: Activation,
    pub output_activation: Activation,
}

impl AcnConfig {
    pub fn new(annotators: usize) -> Self {
        Self {
            annotators,
            hidden_dims: vec![16, 16],
            activation: Activation::Tanh,
            output_activation: Activation::Tanh,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsensusSource {
    Acn,
    Mean,
    Median,
    Weighted,
}

/// Per-frame consensus `y_bar`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusTrace {
    pub values: Vec<f64>,
    pub source: ConsensusSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Acn {
    config: AcnConfig,
    net: Network,
}

impl Acn {
    pub fn new(config: AcnConfig, rng: &mut impl Rng) -> Result<Self> {
        if config.annotators == 0 {
            return Err(Error::config("acn needs at least one annotator"));
        }
        let net = Network::mlp(
            config.annotators,
            &config.hidden_dims,
            config.activation,
            1,
            config.output_activation,
            rng,
        )?;
        Ok(Self { config, net })
    }

    /// Single linear layer with weights `1/U`: reproduces the per-frame mean.
    pub fn mean(annotators: usize) -> Result<Self> {
        if annotators == 0 {
            return Err(Error::config("acn needs at least one annotator"));
        }
        let layer = DenseLayer::new(
            Array2::from_elem((1, annotators), 1.0 / annotators as f64),
            ndarray::Array1::zeros(1),
            Activation::Linear,
        )?;
        Ok(Self {
            config: AcnConfig {
                annotators,
                hidden_dims: Vec::new(),
                activation: Activation::Linear,
                output_activation: Activation::Linear,
            },
            net: Network::new(vec![layer])?,
        })
    }

    /// Rebuilds from a stored network, checking it matches `config`.
    pub fn from_network(config: AcnConfig, net: Network) -> Result<Self> {
        if net.in_dim() != config.annotators || net.out_dim() != 1 {
            return Err(Error::contract("acn network shape does not match its config"));
        }
        Ok(Self { config, net })
    }

    pub fn config(&self) -> &AcnConfig {
        &self.config
    }

    pub fn net(&self) -> &Network {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Network {
        &mut self.net
    }

    fn check(&self, u: usize) -> Result<()> {
        if u != self.config.annotators {
            return Err(Error::contract(format!(
                "acn configured for {} annotators, got {u}",
                self.config.annotators
            )));
        }
        Ok(())
    }

    /// Consensus over stacked annotation rows; caches for `backward`.
    pub fn forward_frames(&mut self, rows: &Array2<f64>) -> Result<Vec<f64>> {
        self.check(rows.ncols())?;
        Ok(self.net.forward(rows)?.into_raw_vec_and_offset().0)
    }

    pub fn forward(&mut self, annotations: &AnnotationMatrix) -> Result<ConsensusTrace> {
        Ok(ConsensusTrace {
            values: self.forward_frames(annotations.data())?,
            source: ConsensusSource::Acn,
        })
    }

    /// Forward pass on a snapshot, leaving no cache.
    pub fn infer(&self, annotations: &AnnotationMatrix) -> Result<ConsensusTrace> {
        self.check(annotations.annotators())?;
        Ok(ConsensusTrace {
            values: self.net.infer(annotations.data())?.into_raw_vec_and_offset().0,
            source: ConsensusSource::Acn,
        })
    }

    /// Accumulates parameter gradients from `d loss / d y_bar` and returns
    /// `d loss / d annotations` (diagnostic only; annotations are data).
    pub fn backward(&mut self, upstream: &[f64]) -> Result<Array2<f64>> {
        let up = Array2::from_shape_vec((upstream.len(), 1), upstream.to_vec())
            .map_err(|e| Error::Internal(e.to_string()))?;
        self.net.backward(&up)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregateMethod {
    Mean,
    Median,
    Weighted,
}

fn median(row: &mut [f64]) -> f64 {
    row.sort_by(f64::total_cmp);
    let n = row.len();
    if n % 2 == 1 {
        row[n / 2]
    } else {
        0.5 * (row[n / 2 - 1] + row[n / 2])
    }
}

/// Per-frame mean, median, or convex combination of annotators.
pub fn aggregate_baseline(
    annotations: &AnnotationMatrix,
    method: AggregateMethod,
    weights: Option<&[f64]>,
) -> Result<ConsensusTrace> {
    let data = annotations.data();
    let u = annotations.annotators();
    let values = match method {
        AggregateMethod::Mean => data.rows().into_iter().map(|r| r.sum() / u as f64).collect(),
        AggregateMethod::Median => data.rows().into_iter().map(|r| median(&mut r.to_vec())).collect(),
        AggregateMethod::Weighted => {
            let w = weights.ok_or_else(|| Error::contract("weighted aggregation needs weights"))?;
            if w.len() != u {
                return Err(Error::contract(format!("{} weights for {u} annotators", w.len())));
            }
            if w.iter().any(|&x| !(x >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::contract("weights must be non-negative and sum to 1"));
            }
            data.rows()
                .into_iter()
                .map(|r| r.iter().zip(w).map(|(a, b)| a * b).sum())
                .collect()
        }
    };
    Ok(ConsensusTrace {
        values,
        source: match method {
            AggregateMethod::Mean => ConsensusSource::Mean,
            AggregateMethod::Median => ConsensusSource::Median,
            AggregateMethod::Weighted => ConsensusSource::Weighted,
        },
    })
}

/// Reference trace for reliability weighting.
#[derive(Debug, Clone, Copy)]
pub enum Reference<'a> {
    Gold(&'a GoldStandardTrack),
    /// Each annotator against the mean of the others.
    LeaveOneOutMean,
}

/// Weights proportional to `max(0, CCC(annotator, reference))`, normalized
/// to sum to one; uniform when no annotator agrees positively.
pub fn compute_reliability_weights(annotations: &AnnotationMatrix, reference: Reference<'_>) -> Result<Vec<f64>> {
    let u = annotations.annotators();
    let data = annotations.data();
    let mut raw = Vec::with_capacity(u);
    for k in 0..u {
        let col = annotations.column(k);
        let score = match reference {
            Reference::Gold(g) => {
                if g.len() != annotations.frames() {
                    return Err(Error::contract(format!(
                        "reference has {} frames, annotations have {}",
                        g.len(),
                        annotations.frames()
                    )));
                }
                ccc::ccc(&col, &g.values)?
            }
            Reference::LeaveOneOutMean => {
                if u < 2 {
                    return Err(Error::contract("leave-one-out reference needs at least 2 annotators"));
                }
                let others: Vec<f64> = data
                    .rows()
                    .into_iter()
                    .map(|r| (r.sum() - r[k]) / (u - 1) as f64)
                    .collect();
                ccc::ccc(&col, &others)?
            }
        };
        raw.push(score.max(0.0));
    }
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Ok(vec![1.0 / u as f64; u]);
    }
    Ok(raw.into_iter().map(|w| w / total).collect())
}
