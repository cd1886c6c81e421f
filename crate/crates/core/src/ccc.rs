//! Concordance correlation coefficient and its loss `1 - CCC`.
//!
//! CCC is computed in covariance form,
//!
//! ```text
//! ccc = 2 cov(x, y) / (var_x + var_y + (mu_x - mu_y)^2 + eps)
//! ```
//!
//! with population (1/n) moments and `eps = 1e-8`. This equals
//! `2 rho sigma_x sigma_y / (...)` whenever both sigmas are positive and stays
//! defined when either trace is constant (two constant traces give ccc = 0).
//!
//! Gradients of the loss with respect to both arguments are analytic:
//!
//! ```text
//! d ccc / d x_i = 2 / (n D) * [ (y_i - mu_y) - ccc * ((x_i - mu_x) + (mu_x - mu_y)) ]
//! d ccc / d y_i = 2 / (n D) * [ (x_i - mu_x) - ccc * ((y_i - mu_y) - (mu_x - mu_y)) ]
//! ```
//!
//! where `D` is the denominator above.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Denominator stabilizer.
pub const CCC_EPS: f64 = 1e-8;

/// Kahan-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    fn add(&mut self, v: f64) {
        let y = v - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }
}

/// First and second moments of a pair of traces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CccStats {
    pub mu_x: f64,
    pub mu_y: f64,
    pub var_x: f64,
    pub var_y: f64,
    pub cov: f64,
    pub n: usize,
}

impl CccStats {
    pub fn denominator(&self) -> f64 {
        let d = self.mu_x - self.mu_y;
        self.var_x + self.var_y + d * d + CCC_EPS
    }

    pub fn ccc(&self) -> f64 {
        2.0 * self.cov / self.denominator()
    }
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::contract(format!(
            "ccc inputs differ in length ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::contract(format!("ccc needs n >= 2, got {}", x.len())));
    }
    Ok(())
}

/// Population moments of `x` and `y`.
///
/// Means come from a compensated pass; the centered second moments and the
/// covariance are then accumulated together in a single compensated pass.
pub fn ccc_stats(x: &[f64], y: &[f64]) -> Result<CccStats> {
    check_pair(x, y)?;
    let n = x.len();
    let inv_n = 1.0 / n as f64;
    let (mut sx, mut sy) = (KahanSum::default(), KahanSum::default());
    for (&a, &b) in x.iter().zip(y) {
        sx.add(a);
        sy.add(b);
    }
    let (mu_x, mu_y) = (sx.sum * inv_n, sy.sum * inv_n);
    let (mut vx, mut vy, mut cxy) = (KahanSum::default(), KahanSum::default(), KahanSum::default());
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mu_x, b - mu_y);
        vx.add(dx * dx);
        vy.add(dy * dy);
        cxy.add(dx * dy);
    }
    Ok(CccStats {
        mu_x,
        mu_y,
        var_x: vx.sum * inv_n,
        var_y: vy.sum * inv_n,
        cov: cxy.sum * inv_n,
        n,
    })
}

/// Which gradients `ccc_loss` should return.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WantGrads {
    pub x: bool,
    pub y: bool,
}

impl WantGrads {
    pub const NONE: WantGrads = WantGrads { x: false, y: false };
    pub const BOTH: WantGrads = WantGrads { x: true, y: true };
    pub const X: WantGrads = WantGrads { x: true, y: false };
    pub const Y: WantGrads = WantGrads { x: false, y: true };
}

#[derive(Debug, Clone, PartialEq)]
pub struct CccResult {
    pub ccc: f64,
    pub loss: f64,
    /// d loss / d x
    pub grad_x: Option<Vec<f64>>,
    /// d loss / d y
    pub grad_y: Option<Vec<f64>>,
    pub stats: CccStats,
}

/// CCC loss between `x` and `y` with optional analytic gradients.
pub fn ccc_loss(x: &[f64], y: &[f64], want: WantGrads) -> Result<CccResult> {
    let stats = ccc_stats(x, y)?;
    let denom = stats.denominator();
    let ccc = 2.0 * stats.cov / denom;
    let shift = stats.mu_x - stats.mu_y;
    // d loss = -d ccc
    let k = -2.0 / (stats.n as f64 * denom);
    let grad_x = want.x.then(|| {
        x.iter()
            .zip(y)
            .map(|(&a, &b)| k * ((b - stats.mu_y) - ccc * ((a - stats.mu_x) + shift)))
            .collect()
    });
    let grad_y = want.y.then(|| {
        x.iter()
            .zip(y)
            .map(|(&a, &b)| k * ((a - stats.mu_x) - ccc * ((b - stats.mu_y) - shift)))
            .collect()
    });
    Ok(CccResult {
        ccc,
        loss: 1.0 - ccc,
        grad_x,
        grad_y,
        stats,
    })
}

/// CCC with no gradients.
pub fn ccc(x: &[f64], y: &[f64]) -> Result<f64> {
    Ok(ccc_stats(x, y)?.ccc())
}

/// Reduction over a batch of sequence pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// Concatenate all frames, then one CCC.
    Pooled,
    /// Mean of per-pair losses.
    #[default]
    PerWindowMean,
}

/// Batch-level loss with per-sequence gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchCccResult {
    /// Pooled CCC, or the mean per-pair CCC.
    pub ccc: f64,
    pub loss: f64,
    pub grad_x: Option<Vec<Vec<f64>>>,
    pub grad_y: Option<Vec<Vec<f64>>>,
    /// Pairs that entered the reduction (all of them unless masked).
    pub used: usize,
}

/// Batch CCC loss over all pairs.
pub fn ccc_batch_loss<X, Y>(xs: &[X], ys: &[Y], pooling: Pooling, want: WantGrads) -> Result<BatchCccResult>
where
    X: AsRef<[f64]>,
    Y: AsRef<[f64]>,
{
    ccc_batch_loss_masked(xs, ys, None, pooling, want)
}

/// Batch CCC loss where pairs with `mask[i] == false` contribute neither loss
/// nor gradient. With every pair masked out the loss is 0.
pub fn ccc_batch_loss_masked<X, Y>(
    xs: &[X],
    ys: &[Y],
    mask: Option<&[bool]>,
    pooling: Pooling,
    want: WantGrads,
) -> Result<BatchCccResult>
where
    X: AsRef<[f64]>,
    Y: AsRef<[f64]>,
{
    if xs.is_empty() {
        return Err(Error::contract("ccc batch is empty"));
    }
    if xs.len() != ys.len() {
        return Err(Error::contract(format!(
            "batch has {} predictions and {} targets",
            xs.len(),
            ys.len()
        )));
    }
    if mask.is_some_and(|m| m.len() != xs.len()) {
        return Err(Error::contract("mask length differs from batch length"));
    }
    for (x, y) in xs.iter().zip(ys) {
        if x.as_ref().len() != y.as_ref().len() {
            return Err(Error::contract("pair lengths differ within batch"));
        }
    }
    let active = |i: usize| mask.is_none_or(|m| m[i]);
    let used = (0..xs.len()).filter(|&i| active(i)).count();
    let zeros = || -> Vec<Vec<f64>> { xs.iter().map(|x| vec![0.0; x.as_ref().len()]).collect() };
    let mut grad_x = want.x.then(zeros);
    let mut grad_y = want.y.then(zeros);
    if used == 0 {
        return Ok(BatchCccResult {
            ccc: 1.0,
            loss: 0.0,
            grad_x,
            grad_y,
            used,
        });
    }

    match pooling {
        Pooling::Pooled => {
            let mut cx = Vec::new();
            let mut cy = Vec::new();
            for i in (0..xs.len()).filter(|&i| active(i)) {
                cx.extend_from_slice(xs[i].as_ref());
                cy.extend_from_slice(ys[i].as_ref());
            }
            let r = ccc_loss(&cx, &cy, want)?;
            let mut offset = 0;
            for i in (0..xs.len()).filter(|&i| active(i)) {
                let len = xs[i].as_ref().len();
                if let (Some(g), Some(src)) = (grad_x.as_mut(), r.grad_x.as_ref()) {
                    g[i].copy_from_slice(&src[offset..offset + len]);
                }
                if let (Some(g), Some(src)) = (grad_y.as_mut(), r.grad_y.as_ref()) {
                    g[i].copy_from_slice(&src[offset..offset + len]);
                }
                offset += len;
            }
            Ok(BatchCccResult {
                ccc: r.ccc,
                loss: r.loss,
                grad_x,
                grad_y,
                used,
            })
        }
        Pooling::PerWindowMean => {
            let scale = 1.0 / used as f64;
            let (mut ccc_sum, mut loss_sum) = (0.0, 0.0);
            for i in (0..xs.len()).filter(|&i| active(i)) {
                let r = ccc_loss(xs[i].as_ref(), ys[i].as_ref(), want)?;
                ccc_sum += r.ccc;
                loss_sum += r.loss;
                if let (Some(g), Some(src)) = (grad_x.as_mut(), r.grad_x) {
                    g[i].iter_mut().zip(src).for_each(|(d, s)| *d = s * scale);
                }
                if let (Some(g), Some(src)) = (grad_y.as_mut(), r.grad_y) {
                    g[i].iter_mut().zip(src).for_each(|(d, s)| *d = s * scale);
                }
            }
            Ok(BatchCccResult {
                ccc: ccc_sum * scale,
                loss: loss_sum * scale,
                grad_x,
                grad_y,
                used,
            })
        }
    }
}
