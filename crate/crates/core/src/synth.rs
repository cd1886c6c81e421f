//! Synthetic multi-annotator corpus.
//!
//! Each source gets a smooth ground-truth trajectory per dimension, a feature
//! sequence that is a fixed linear lift of those trajectories plus white
//! noise, and `U` simulated annotators that distort the truth with their own
//! scale, bias, lag, white noise, and random-walk drift. The gold standard is
//! the truth itself; the annotators are the consensus network's input.

use std::f64::consts::TAU;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::annotations::{
    AnnotationMatrix, Dimension, FeatureSequence, GoldStandardTrack, PerDimension, Provenance, Segment,
};
use crate::error::{Error, Result};
use crate::seed::substream;

/// How one simulated annotator deviates from the truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotatorProfile {
    pub bias: f64,
    pub scale: f64,
    pub noise_sd: f64,
    pub lag_frames: usize,
    pub drift_sd: f64,
}

impl AnnotatorProfile {
    pub const IDENTITY: AnnotatorProfile = AnnotatorProfile {
        bias: 0.0,
        scale: 1.0,
        noise_sd: 0.0,
        lag_frames: 0,
        drift_sd: 0.0,
    };
}

/// Ranges from which per-annotator profiles are drawn for one dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileRanges {
    pub noise_sd: f64,
    pub scale: (f64, f64),
    pub bias: (f64, f64),
    pub max_lag_frames: usize,
    pub drift_sd: f64,
}

impl ProfileRanges {
    fn draw(&self, u: usize, rng: &mut impl Rng) -> Vec<AnnotatorProfile> {
        let uniform = |rng: &mut _, (lo, hi): (f64, f64)| if hi > lo { Rng::random_range(rng, lo..hi) } else { lo };
        (0..u)
            .map(|_| AnnotatorProfile {
                scale: uniform(rng, self.scale),
                bias: uniform(rng, self.bias),
                noise_sd: self.noise_sd,
                lag_frames: if self.max_lag_frames > 0 {
                    rng.random_range(0..=self.max_lag_frames)
                } else {
                    0
                },
                drift_sd: self.drift_sd,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub sources: usize,
    pub frames_per_source: usize,
    pub rate_hz: f64,
    pub feature_dim: usize,
    pub annotators: usize,
    /// Per-feature signal-to-noise variance ratio. `inf` means noiseless, `0` noise only.
    pub feature_snr: f64,
    /// Profile ranges per dimension; valence is the noisier one by default.
    pub ranges: PerDimension<ProfileRanges>,
    /// Explicit profiles, overriding `ranges` where present.
    pub profiles: PerDimension<Vec<AnnotatorProfile>>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            sources: 7,
            frames_per_source: 11_250,
            rate_hz: 25.0,
            feature_dim: 16,
            annotators: 6,
            feature_snr: 2.0,
            ranges: PerDimension {
                arousal: Some(ProfileRanges {
                    noise_sd: 0.15,
                    scale: (0.8, 1.2),
                    bias: (-0.1, 0.1),
                    max_lag_frames: 0,
                    drift_sd: 0.0,
                }),
                valence: Some(ProfileRanges {
                    noise_sd: 0.3,
                    scale: (0.6, 1.4),
                    bias: (-0.2, 0.2),
                    max_lag_frames: 0,
                    drift_sd: 0.0,
                }),
            },
            profiles: PerDimension::default(),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.annotators < 2 {
            return Err(Error::config("synth.annotators must be at least 2"));
        }
        if self.sources == 0 || self.feature_dim == 0 {
            return Err(Error::config("synth.sources and synth.feature_dim must be positive"));
        }
        if !(self.rate_hz > 0.0) {
            return Err(Error::config("synth.rate_hz must be positive"));
        }
        if self.frames_per_source < 2 {
            return Err(Error::config("synth.frames_per_source must be at least 2"));
        }
        if !(self.feature_snr >= 0.0) {
            return Err(Error::config("synth.feature_snr must be non-negative"));
        }
        for (d, p) in self.profiles.iter() {
            if p.len() != self.annotators {
                return Err(Error::config(format!(
                    "synth.profiles.{d} lists {} profiles for {} annotators",
                    p.len(),
                    self.annotators
                )));
            }
        }
        for d in Dimension::ALL {
            if self.ranges.get(d).is_none() && self.profiles.get(d).is_none() {
                return Err(Error::config(format!("synth: no profiles or ranges for {d}")));
            }
        }
        Ok(())
    }

    /// Seconds of data per source.
    pub fn duration_s(&self) -> f64 {
        self.frames_per_source as f64 / self.rate_hz
    }

    /// Explicit profiles where given, otherwise drawn from `ranges`.
    pub fn resolve_profiles(&self) -> PerDimension<Vec<AnnotatorProfile>> {
        let mut out = PerDimension::default();
        for d in Dimension::ALL {
            let profiles = match (self.profiles.get(d), self.ranges.get(d)) {
                (Some(p), _) => p.clone(),
                (None, Some(r)) => r.draw(self.annotators, &mut substream(self.seed, &format!("profiles/{d}"))),
                (None, None) => continue,
            };
            out.set(d, profiles);
        }
        out
    }
}

pub fn source_id(index: usize) -> String {
    format!("src{index:02}")
}

/// Smooth trajectory in (-0.9, 0.9): 3-6 random-phase sinusoids with periods
/// of 5-60 s, a per-source offset, and a tanh squashing.
pub fn generate_truth(cfg: &SynthConfig, source: usize, dim: Dimension) -> Result<GoldStandardTrack> {
    let mut rng = substream(cfg.seed, &format!("truth/{}/{dim}", source_id(source)));
    let k = rng.random_range(3..=6);
    let comps: Vec<(f64, f64, f64)> = (0..k)
        .map(|_| {
            let amp = rng.random_range(0.5..1.0);
            let period = rng.random_range(5.0..60.0);
            let phase = rng.random_range(0.0..TAU);
            (amp, period, phase)
        })
        .collect();
    let norm: f64 = comps.iter().map(|c| c.0).sum();
    let offset = rng.random_range(-0.5..0.5);
    let values = (0..cfg.frames_per_source)
        .map(|i| {
            let t = i as f64 / cfg.rate_hz;
            let s: f64 = comps.iter().map(|&(a, p, ph)| a * (TAU * t / p + ph).sin()).sum::<f64>() / norm;
            0.9 * (2.0 * s + offset).tanh()
        })
        .collect();
    GoldStandardTrack::new(dim, cfg.rate_hz, values, Provenance::IntendedEmotion)
}

/// Causal moving average over `k` frames.
fn moving_average(x: &[f64], k: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    for i in 0..x.len() {
        acc += x[i];
        if i >= k {
            acc -= x[i - k];
        }
        out.push(acc / (i + 1).min(k) as f64);
    }
    out
}

/// Basis signals per frame: for each dimension, truth, truth^2, and its 1 s moving average.
fn basis(truths: &[&[f64]], rate_hz: f64) -> Array2<f64> {
    let frames = truths[0].len();
    let k = (rate_hz.round() as usize).max(1);
    let mut b = Array2::zeros((frames, 3 * truths.len()));
    for (d, z) in truths.iter().enumerate() {
        let ma = moving_average(z, k);
        for i in 0..frames {
            b[[i, 3 * d]] = z[i];
            b[[i, 3 * d + 1]] = z[i] * z[i];
            b[[i, 3 * d + 2]] = ma[i];
        }
    }
    b
}

/// Fixed random lift shared by every source (the "sensor").
fn feature_mixing(cfg: &SynthConfig, basis_dim: usize) -> Array2<f64> {
    let mut rng = substream(cfg.seed, "features/mixing");
    let scale = 1.0 / (basis_dim as f64).sqrt();
    Array2::from_shape_fn((cfg.feature_dim, basis_dim), |_| {
        let z: f64 = StandardNormal.sample(&mut rng);
        z * scale
    })
}

/// Features for one source from its per-dimension truths.
pub fn generate_features(truth: &PerDimension<GoldStandardTrack>, cfg: &SynthConfig, source: usize) -> Result<FeatureSequence> {
    let truths: Vec<&[f64]> = truth.iter().map(|(_, g)| g.values.as_slice()).collect();
    if truths.is_empty() {
        return Err(Error::contract("features need at least one truth trace"));
    }
    let frames = truths[0].len();
    if truths.iter().any(|t| t.len() != frames) {
        return Err(Error::contract("truth traces differ in length"));
    }
    let b = basis(&truths, cfg.rate_hz);
    let w = feature_mixing(cfg, b.ncols());
    let mut x = b.dot(&w.t());
    let mut rng = substream(cfg.seed, &format!("features/noise/{}", source_id(source)));
    for mut col in x.columns_mut() {
        let n = col.len() as f64;
        let mean = col.sum() / n;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        let (signal_gain, noise_sd) = if cfg.feature_snr.is_infinite() {
            (1.0, 0.0)
        } else if cfg.feature_snr == 0.0 {
            (0.0, 1.0)
        } else {
            (1.0, sd / cfg.feature_snr.sqrt())
        };
        for v in col.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = signal_gain * *v + noise_sd * z;
        }
    }
    FeatureSequence::new(cfg.rate_hz, x)
}

/// `annotator_u(t) = clamp(scale_u * truth(t - lag_u) + bias_u + noise + drift)`,
/// with the first `lag_u` frames holding the first truth value.
pub fn simulate_annotators(
    truth: &GoldStandardTrack,
    profiles: &[AnnotatorProfile],
    seed: u64,
) -> Result<AnnotationMatrix> {
    let frames = truth.len();
    if profiles.is_empty() {
        return Err(Error::contract("need at least one annotator profile"));
    }
    let mut columns = Vec::with_capacity(profiles.len());
    for (u, p) in profiles.iter().enumerate() {
        if p.lag_frames >= frames {
            return Err(Error::contract(format!(
                "annotator {u} lag {} exceeds {frames} frames",
                p.lag_frames
            )));
        }
        if !(p.noise_sd >= 0.0 && p.drift_sd >= 0.0 && p.scale > 0.0) {
            return Err(Error::contract(format!("annotator {u} has an invalid profile")));
        }
        let mut rng = substream(seed, &format!("annotator/{}/{u}", truth.dimension));
        let noise = Normal::new(0.0, p.noise_sd).map_err(|e| Error::Internal(e.to_string()))?;
        let step = Normal::new(0.0, p.drift_sd).map_err(|e| Error::Internal(e.to_string()))?;
        let mut drift = 0.0;
        let col = (0..frames)
            .map(|t| {
                let lagged = truth.values[t.saturating_sub(p.lag_frames)];
                drift += step.sample(&mut rng);
                let v = p.scale * lagged + p.bias + noise.sample(&mut rng) + drift;
                v.clamp(-1.0, 1.0)
            })
            .collect();
        columns.push((format!("ann{u}"), col));
    }
    AnnotationMatrix::from_columns(truth.dimension, truth.rate_hz, columns)
}

/// A generated corpus: one full-length recording per source.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub recordings: Vec<Segment>,
    pub profiles: PerDimension<Vec<AnnotatorProfile>>,
}

pub fn generate_corpus(cfg: &SynthConfig) -> Result<SyntheticCorpus> {
    cfg.validate()?;
    let profiles = cfg.resolve_profiles();
    let mut recordings = Vec::with_capacity(cfg.sources);
    for s in 0..cfg.sources {
        let mut gold = PerDimension::default();
        for d in Dimension::ALL {
            gold.set(d, generate_truth(cfg, s, d)?);
        }
        let features = generate_features(&gold, cfg, s)?;
        let mut annotations = PerDimension::default();
        for (d, p) in profiles.iter() {
            let seed = substream(cfg.seed, &format!("annotators/{}", source_id(s))).random();
            annotations.set(d, simulate_annotators(gold.get(d).unwrap(), p, seed)?);
        }
        recordings.push(Segment::new(source_id(s), 0, features, gold, annotations)?);
    }
    Ok(SyntheticCorpus { recordings, profiles })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ccc::ccc;

    fn small() -> SynthConfig {
        SynthConfig {
            sources: 2,
            frames_per_source: 1500,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn truth_is_bounded_smooth_and_seeded() {
        let cfg = small();
        for s in 0..2 {
            let t = generate_truth(&cfg, s, Dimension::Valence).unwrap();
            assert!(t.values.iter().all(|v| v.abs() < 0.9));
            assert_eq!(t, generate_truth(&cfg, s, Dimension::Valence).unwrap());
            let x = &t.values;
            let r = crate::ccc::ccc_stats(&x[..x.len() - 1], &x[1..]).unwrap();
            let corr = r.cov / (r.var_x * r.var_y).sqrt();
            assert!(corr > 0.99, "lag-1 autocorrelation {corr}");
        }
        assert_ne!(
            generate_truth(&cfg, 0, Dimension::Valence).unwrap(),
            generate_truth(&cfg, 0, Dimension::Arousal).unwrap()
        );
    }

    #[test]
    fn identity_and_bias_profiles() {
        let cfg = small();
        let t = generate_truth(&cfg, 0, Dimension::Arousal).unwrap();
        let m = simulate_annotators(&t, &[AnnotatorProfile::IDENTITY; 3], 1).unwrap();
        for u in 0..3 {
            assert_eq!(m.column(u), t.values);
            assert!(ccc(&m.column(u), &t.values).unwrap() > 1.0 - 1e-7);
        }
        let biased = AnnotatorProfile {
            bias: 0.2,
            ..AnnotatorProfile::IDENTITY
        };
        let m = simulate_annotators(&t, &[biased], 1).unwrap();
        let expect: Vec<f64> = t.values.iter().map(|v| (v + 0.2).clamp(-1.0, 1.0)).collect();
        assert_eq!(m.column(0), expect);
    }

    #[test]
    fn lag_holds_first_value() {
        let cfg = small();
        let t = generate_truth(&cfg, 0, Dimension::Arousal).unwrap();
        let lagged = AnnotatorProfile {
            lag_frames: 5,
            ..AnnotatorProfile::IDENTITY
        };
        let col = simulate_annotators(&t, &[lagged], 1).unwrap().column(0);
        assert!(col[..6].iter().all(|&v| v == t.values[0]));
        assert_eq!(col[6], t.values[1]);
        let too_long = AnnotatorProfile {
            lag_frames: 1500,
            ..AnnotatorProfile::IDENTITY
        };
        assert!(simulate_annotators(&t, &[too_long], 1).is_err());
    }

    #[test]
    fn features_have_requested_shape_and_are_seeded() {
        let cfg = small();
        let a = generate_corpus(&cfg).unwrap();
        let b = generate_corpus(&cfg).unwrap();
        assert_eq!(a.recordings, b.recordings);
        let r = &a.recordings[0];
        assert_eq!(r.features.data.dim(), (1500, 16));
        assert_eq!(r.annotations.get(Dimension::Valence).unwrap().annotators(), 6);
    }

    #[test]
    fn validation_rules() {
        let mut cfg = small();
        cfg.annotators = 1;
        assert!(cfg.validate().is_err());
        let mut cfg = small();
        cfg.profiles.set(Dimension::Arousal, vec![AnnotatorProfile::IDENTITY; 2]);
        assert!(cfg.validate().is_err());
    }
}
