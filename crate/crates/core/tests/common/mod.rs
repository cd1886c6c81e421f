#![allow(dead_code)]

use cer_core::annotations::{AnnotationMatrix, Dimension, FeatureSequence, GoldStandardTrack, PerDimension, Provenance, Segment};
use ndarray::Array2;
use rand::Rng;

/// Central-difference gradient of `f` at `p`.
pub fn numeric_grad(p: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut q = p.to_vec();
    (0..p.len())
        .map(|i| {
            q[i] = p[i] + h;
            let up = f(&q);
            q[i] = p[i] - h;
            let down = f(&q);
            q[i] = p[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest elementwise `|a - n| / (max(|a|, |n|) + atol)`.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64], atol: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / (a.abs().max(n.abs()) + atol))
        .fold(0.0, f64::max)
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(lo..hi))
}

pub fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("a{i}")).collect()
}

/// A segment with random features, gold and annotations for `dims`.
pub fn random_segment(
    rng: &mut impl Rng,
    source: &str,
    frames: usize,
    feature_dim: usize,
    annotators: usize,
    dims: &[Dimension],
) -> Segment {
    let features = FeatureSequence::new(25.0, random_matrix(rng, frames, feature_dim, -1.0, 1.0)).unwrap();
    let mut gold = PerDimension::default();
    let mut ann = PerDimension::default();
    for &d in dims {
        let g: Vec<f64> = (0..frames).map(|_| rng.random_range(-0.9..0.9)).collect();
        gold.set(d, GoldStandardTrack::new(d, 25.0, g, Provenance::ExternalGold).unwrap());
        let a = random_matrix(rng, frames, annotators, -1.0, 1.0);
        ann.set(d, AnnotationMatrix::from_array(d, 25.0, ids(annotators), a).unwrap());
    }
    Segment::new(source, 0, features, gold, ann).unwrap()
}
