//! Generator properties: disagreement band, noise monotonicity, learnability.

use cer_core::annotations::{Dimension, PerDimension};
use cer_core::ccc::ccc;
use cer_core::synth::{generate_corpus, generate_features, generate_truth, simulate_annotators, AnnotatorProfile, SynthConfig};

fn mean_pairwise_ccc(cols: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    let mut n = 0;
    for i in 0..cols.len() {
        for j in i + 1..cols.len() {
            total += ccc(&cols[i], &cols[j]).unwrap();
            n += 1;
        }
    }
    total / n as f64
}

#[test]
fn noisy_profiles_fall_in_disagreement_band() {
    for seed in 0..5 {
        let cfg = SynthConfig {
            sources: 2,
            frames_per_source: 3000,
            seed,
            ..SynthConfig::default()
        };
        let corpus = generate_corpus(&cfg).unwrap();
        for rec in &corpus.recordings {
            let m = rec.annotations.get(Dimension::Valence).unwrap();
            let cols: Vec<Vec<f64>> = (0..m.annotators()).map(|u| m.column(u).to_vec()).collect();
            let c = mean_pairwise_ccc(&cols);
            assert!((0.3..=0.8).contains(&c), "seed {seed}: mean inter-annotator CCC {c}");
        }
    }
}

#[test]
fn identity_profiles_reproduce_truth() {
    let cfg = SynthConfig {
        sources: 1,
        frames_per_source: 500,
        ..SynthConfig::default()
    };
    let truth = generate_truth(&cfg, 0, Dimension::Arousal).unwrap();
    let m = simulate_annotators(&truth, &[AnnotatorProfile::IDENTITY; 4], 3).unwrap();
    for u in 0..4 {
        assert_eq!(m.column(u).to_vec(), truth.values);
        // only the denominator epsilon separates this from 1
        let s = cer_core::ccc::ccc_stats(&truth.values, &truth.values).unwrap();
        let c = ccc(&m.column(u).to_vec(), &truth.values).unwrap();
        assert!((c - 2.0 * s.var_x / (2.0 * s.var_x + 1e-8)).abs() < 1e-14);
    }
}

#[test]
fn more_noise_means_less_agreement_with_truth() {
    let grid = [0.0, 0.1, 0.2, 0.3, 0.5, 0.8];
    let mut prev = f64::INFINITY;
    for &noise_sd in &grid {
        let mut total = 0.0;
        for seed in 0..20 {
            let cfg = SynthConfig {
                sources: 1,
                frames_per_source: 1000,
                seed,
                ..SynthConfig::default()
            };
            let truth = generate_truth(&cfg, 0, Dimension::Valence).unwrap();
            let p = AnnotatorProfile {
                noise_sd,
                ..AnnotatorProfile::IDENTITY
            };
            let m = simulate_annotators(&truth, &[p, p], seed).unwrap();
            total += ccc(&m.column(0).to_vec(), &truth.values).unwrap();
        }
        let mean = total / 20.0;
        assert!(mean < prev, "noise {noise_sd}: {mean} not below {prev}");
        prev = mean;
    }
}

/// Least-squares fit of `y` on `[x, 1]` via the normal equations.
fn linear_probe(x: &ndarray::Array2<f64>, y: &[f64]) -> Vec<f64> {
    let (n, d) = x.dim();
    let k = d + 1;
    let row = |t: usize, j: usize| if j < d { x[[t, j]] } else { 1.0 };
    let mut a = vec![vec![0.0; k + 1]; k];
    for t in 0..n {
        for i in 0..k {
            for j in 0..k {
                a[i][j] += row(t, i) * row(t, j);
            }
            a[i][k] += row(t, i) * y[t];
        }
    }
    for c in 0..k {
        let p = (c..k).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        for r in 0..k {
            if r != c {
                let f = a[r][c] / a[c][c];
                for j in c..=k {
                    a[r][j] -= f * a[c][j];
                }
            }
        }
    }
    let w: Vec<f64> = (0..k).map(|i| a[i][k] / a[i][i]).collect();
    (0..n).map(|t| (0..k).map(|j| row(t, j) * w[j]).sum()).collect()
}

fn probe_ccc(snr: f64) -> f64 {
    let cfg = SynthConfig {
        sources: 1,
        frames_per_source: 3000,
        feature_snr: snr,
        ..SynthConfig::default()
    };
    let mut truth = PerDimension::default();
    for d in Dimension::ALL {
        truth.set(d, generate_truth(&cfg, 0, d).unwrap());
    }
    let f = generate_features(&truth, &cfg, 0).unwrap();
    assert_eq!(f.data.dim(), (3000, 16));
    let y = &truth.get(Dimension::Arousal).unwrap().values;
    ccc(&linear_probe(&f.data, y), y).unwrap()
}

#[test]
fn noiseless_features_are_linearly_decodable() {
    let c = probe_ccc(f64::INFINITY);
    assert!(c > 0.99, "probe CCC {c}");
}

#[test]
fn noise_only_features_carry_nothing() {
    let c = probe_ccc(0.0);
    assert!(c.abs() < 0.1, "probe CCC {c}");
}
