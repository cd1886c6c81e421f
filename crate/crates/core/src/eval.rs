//! Evaluation, cross-validation folds, reports and paired A/B comparison.
//!
//! Pooled evaluation concatenates the test frames of each source, scores
//! them, then averages over sources. This choice moves absolute CCC values,
//! so reports always name the pooling in use.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::annotations::{Dimension, PerDimension, Segment};
use crate::ccc::{ccc, Pooling};
use crate::error::{Error, Result};
use crate::predictor::Predictor;
use crate::trainer::{self, DimensionSet, Mode, TrainConfig};

/// Per-dimension CCC of `predictor` against the gold standard of `segments`.
pub fn evaluate(predictor: &Predictor, segments: &[Segment], pooling: Pooling) -> Result<PerDimension<f64>> {
    if segments.is_empty() {
        return Err(Error::contract("no evaluation segments"));
    }
    let mut per_dim: PerDimension<Vec<(String, Vec<f64>, Vec<f64>)>> = PerDimension::default();
    for seg in segments {
        let trace = predictor.infer(&seg.features)?;
        for &d in predictor.dimensions() {
            let gold = seg
                .gold
                .get(d)
                .ok_or_else(|| Error::contract(format!("{}: missing {d} gold standard", seg.source_id)))?;
            let pred = trace.column(d).expect("predictor emits its own dimensions");
            let list = match per_dim.get_mut(d) {
                Some(l) => l,
                None => {
                    per_dim.set(d, Vec::new());
                    per_dim.get_mut(d).unwrap()
                }
            };
            list.push((seg.source_id.clone(), gold.values.clone(), pred));
        }
    }
    per_dim.try_map(|_, items| match pooling {
        Pooling::Pooled => {
            let mut by_source: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
            for (src, g, p) in items {
                let e = by_source.entry(src.as_str()).or_default();
                e.0.extend_from_slice(g);
                e.1.extend_from_slice(p);
            }
            let scores = by_source
                .values()
                .map(|(g, p)| ccc(p, g))
                .collect::<Result<Vec<_>>>()?;
            Ok(mean(&scores))
        }
        Pooling::PerWindowMean => {
            let scores = items.iter().map(|(_, g, p)| ccc(p, g)).collect::<Result<Vec<_>>>()?;
            Ok(mean(&scores))
        }
    })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Median; the two middle values are averaged for even counts.
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldScheme {
    LeaveOneSourceOut,
    FixedSplit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fold {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoldPlan {
    pub scheme: FoldScheme,
    pub folds: Vec<Fold>,
}

impl FoldPlan {
    /// One fold per source, tested alone against all others.
    pub fn leave_one_source_out(source_ids: &[String]) -> Result<Self> {
        let ids: BTreeSet<&String> = source_ids.iter().collect();
        if ids.len() != source_ids.len() {
            return Err(Error::contract("duplicate source ids"));
        }
        if ids.len() < 2 {
            return Err(Error::contract("cross-validation needs at least 2 sources"));
        }
        let folds = ids
            .iter()
            .map(|&test| Fold {
                train: ids.iter().filter(|&&s| s != test).map(|s| (*s).clone()).collect(),
                test: vec![test.clone()],
            })
            .collect();
        Ok(Self {
            scheme: FoldScheme::LeaveOneSourceOut,
            folds,
        })
    }

    /// A single train/test split, such as a fixed subject partition.
    pub fn fixed_split(train: Vec<String>, test: Vec<String>) -> Result<Self> {
        let plan = Self {
            scheme: FoldScheme::FixedSplit,
            folds: vec![Fold { train, test }],
        };
        plan.check_leakage()?;
        Ok(plan)
    }

    pub fn check_leakage(&self) -> Result<()> {
        for (i, f) in self.folds.iter().enumerate() {
            if f.train.is_empty() || f.test.is_empty() {
                return Err(Error::config(format!("fold {i} has an empty train or test side")));
            }
            if let Some(s) = f.train.iter().find(|s| f.test.contains(s)) {
                return Err(Error::config(format!("fold {i}: source {s} is in both train and test")));
            }
        }
        Ok(())
    }

    /// Checks leakage and that every referenced source exists.
    pub fn validate(&self, available: &[String]) -> Result<()> {
        self.check_leakage()?;
        for f in &self.folds {
            if let Some(s) = f.train.iter().chain(&f.test).find(|s| !available.contains(s)) {
                return Err(Error::config(format!("fold references unknown source {s}")));
            }
        }
        if self.scheme == FoldScheme::LeaveOneSourceOut {
            let mut tested: Vec<&String> = self.folds.iter().flat_map(|f| &f.test).collect();
            tested.sort();
            let mut all: Vec<&String> = available.iter().collect();
            all.sort();
            if tested != all {
                return Err(Error::config("leave-one-source-out folds must test each source exactly once"));
            }
        }
        Ok(())
    }
}

/// One trained configuration inside a cross-validation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Arm {
    pub mode: Mode,
    pub dimensions: DimensionSet,
}

impl std::fmt::Display for Arm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.mode, self.dimensions)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub test: Vec<String>,
    pub arm: Arm,
    pub seed: u64,
    pub config_hash: String,
    pub ccc: PerDimension<f64>,
    pub degenerate_windows: usize,
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub arm: Arm,
    pub folds: usize,
    pub ccc: PerDimension<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scheme: FoldScheme,
    pub eval_pooling: Pooling,
    pub seeds: Vec<u64>,
    pub config_hashes: Vec<String>,
    pub folds: Vec<FoldResult>,
    pub aggregate: Vec<AggregateRow>,
}

impl Report {
    fn new(plan: &FoldPlan, eval_pooling: Pooling) -> Self {
        Self {
            scheme: plan.scheme,
            eval_pooling,
            seeds: Vec::new(),
            config_hashes: Vec::new(),
            folds: Vec::new(),
            aggregate: Vec::new(),
        }
    }

    /// Recomputes `aggregate` as the arithmetic mean over folds, per arm.
    pub fn recompute_aggregate(&mut self) {
        let mut arms: Vec<Arm> = Vec::new();
        for f in &self.folds {
            if !arms.contains(&f.arm) {
                arms.push(f.arm);
            }
        }
        self.aggregate = arms
            .into_iter()
            .map(|arm| {
                let rows: Vec<&FoldResult> = self.folds.iter().filter(|f| f.arm == arm).collect();
                let mut ccc = PerDimension::default();
                for d in Dimension::ALL {
                    let vals: Vec<f64> = rows.iter().filter_map(|r| r.ccc.get(d).copied()).collect();
                    if !vals.is_empty() {
                        ccc.set(d, mean(&vals));
                    }
                }
                AggregateRow {
                    arm,
                    folds: rows.len(),
                    ccc,
                }
            })
            .collect();
    }

    pub fn aggregate_for(&self, arm: Arm) -> Option<&AggregateRow> {
        self.aggregate.iter().find(|r| r.arm == arm)
    }

    /// Aligned text table: rows Valence, Arousal, Valence & Arousal;
    /// columns baseline and acn. Joint cells show `valence / arousal`.
    pub fn table(&self) -> String {
        let cell = |mode: Mode, dims: DimensionSet| -> String {
            let Some(row) = self.aggregate_for(Arm { mode, dimensions: dims }) else {
                return "-".into();
            };
            let f = |d| row.ccc.get(d).map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into());
            match dims {
                DimensionSet::Valence => f(Dimension::Valence),
                DimensionSet::Arousal => f(Dimension::Arousal),
                DimensionSet::Both => format!("{} / {}", f(Dimension::Valence), f(Dimension::Arousal)),
            }
        };
        let rows = [
            ("Valence", DimensionSet::Valence),
            ("Arousal", DimensionSet::Arousal),
            ("Valence & Arousal", DimensionSet::Both),
        ];
        let mut out = String::new();
        let _ = writeln!(out, "CCC ({:?} evaluation, {} folds)", self.eval_pooling, self.folds_per_arm());
        let _ = writeln!(out, "{:<20}{:>16}{:>16}", "Attribute", "baseline", "acn");
        for (name, dims) in rows {
            let _ = writeln!(
                out,
                "{:<20}{:>16}{:>16}",
                name,
                cell(Mode::Baseline, dims),
                cell(Mode::Acn, dims)
            );
        }
        out
    }

    fn folds_per_arm(&self) -> usize {
        self.aggregate.iter().map(|a| a.folds).max().unwrap_or(0)
    }

    pub fn write(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let json = dir.join(format!("{stem}.json"));
        fs::write(&json, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(&json, e))?;
        let txt = dir.join(format!("{stem}.txt"));
        fs::write(&txt, self.table()).map_err(|e| Error::io(&txt, e))
    }
}

fn select<'a>(recordings: &'a [Segment], ids: &[String]) -> Vec<Segment> {
    recordings
        .iter()
        .filter(|r| ids.contains(&r.source_id))
        .cloned()
        .collect::<Vec<_>>()
}

/// Trains every arm on every fold and scores the test side.
///
/// With `out_dir`, `cv_partial.json` is rewritten after each fold, so a
/// failing fold leaves the completed ones on disk; the final report is
/// written as `cv_report.json` and `cv_report.txt`.
pub fn run_cv(
    recordings: &[Segment],
    cfg: &TrainConfig,
    plan: &FoldPlan,
    arms: &[Arm],
    out_dir: Option<&Path>,
) -> Result<Report> {
    let ids: Vec<String> = {
        let set: BTreeSet<String> = recordings.iter().map(|r| r.source_id.clone()).collect();
        set.into_iter().collect()
    };
    if ids.len() < 2 {
        return Err(Error::contract("cross-validation needs at least 2 sources"));
    }
    plan.validate(&ids)?;
    if arms.is_empty() {
        return Err(Error::config("no arms to train"));
    }
    let mut report = Report::new(plan, cfg.eval_pooling);
    report.seeds.push(cfg.seed);
    for (i, fold) in plan.folds.iter().enumerate() {
        let train = select(recordings, &fold.train);
        let test = select(recordings, &fold.test);
        for &arm in arms {
            let mut c = cfg.clone();
            c.mode = arm.mode;
            c.dimensions = arm.dimensions;
            c.predictor.heads = None;
            let hash = c.hash();
            if !report.config_hashes.contains(&hash) {
                report.config_hashes.push(hash.clone());
            }
            let outcome = trainer::train(&train, &[], &c).and_then(|o| {
                let score = evaluate(&o.model.predictor, &test, c.eval_pooling)?;
                Ok((o, score))
            });
            let (o, score) = match outcome {
                Ok(v) => v,
                Err(e) => {
                    warn!("fold {i} ({arm}) failed: {e}");
                    if let Some(dir) = out_dir {
                        report.recompute_aggregate();
                        report.write(dir, "cv_partial")?;
                    }
                    return Err(e);
                }
            };
            info!("fold {i} {arm} test={:?} ccc={:?}", fold.test, score);
            report.folds.push(FoldResult {
                fold: i,
                test: fold.test.clone(),
                arm,
                seed: c.seed,
                config_hash: hash,
                ccc: score,
                degenerate_windows: o.run.degenerate_windows,
                wall_clock_s: o.run.wall_clock_s,
            });
            if let Some(dir) = out_dir {
                report.recompute_aggregate();
                report.write(dir, "cv_partial")?;
            }
        }
    }
    report.recompute_aggregate();
    if let Some(dir) = out_dir {
        report.write(dir, "cv_report")?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbRow {
    pub seed: u64,
    pub dimension: Dimension,
    pub baseline: f64,
    pub acn: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbReport {
    pub dimensions: DimensionSet,
    pub seeds: Vec<u64>,
    pub rows: Vec<AbRow>,
    pub median_delta: PerDimension<f64>,
    pub reports: Vec<Report>,
}

impl AbReport {
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<10}{:>8}{:>12}{:>12}{:>12}", "dimension", "seed", "baseline", "acn", "delta");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<10}{:>8}{:>12.4}{:>12.4}{:>+12.4}",
                r.dimension.as_str(),
                r.seed,
                r.baseline,
                r.acn,
                r.delta
            );
        }
        for (d, m) in self.median_delta.iter() {
            let _ = writeln!(out, "median delta {}: {m:+.4}", d.as_str());
        }
        out
    }
}

/// Paired baseline-vs-consensus comparison over seeds on one dataset.
///
/// Both modes of one seed see the same folds, the same predictor
/// initialization and the same batch order; only the objective differs.
pub fn ab_compare(
    recordings: &[Segment],
    base: &TrainConfig,
    plan: &FoldPlan,
    seeds: &[u64],
    out_dir: Option<&Path>,
) -> Result<AbReport> {
    ab_compare_with(base, seeds, [Mode::Baseline, Mode::Acn], Some(plan), out_dir, |_| Ok(recordings.to_vec()))
}

/// General paired comparison. `data` yields the recordings for a seed, so
/// the corpus itself may be seed-derived; without `plan`, every seed uses
/// leave-one-source-out over its recordings.
pub fn ab_compare_with(
    base: &TrainConfig,
    seeds: &[u64],
    modes: [Mode; 2],
    plan: Option<&FoldPlan>,
    out_dir: Option<&Path>,
    mut data: impl FnMut(u64) -> Result<Vec<Segment>>,
) -> Result<AbReport> {
    if seeds.len() < 3 {
        return Err(Error::config("A/B comparison needs at least 3 seeds"));
    }
    let arms: Vec<Arm> = modes
        .iter()
        .map(|&mode| Arm {
            mode,
            dimensions: base.dimensions,
        })
        .collect();
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for &seed in seeds {
        let recordings = data(seed)?;
        let loso;
        let plan = match plan {
            Some(p) => p,
            None => {
                let ids: BTreeSet<String> = recordings.iter().map(|r| r.source_id.clone()).collect();
                loso = FoldPlan::leave_one_source_out(&ids.into_iter().collect::<Vec<_>>())?;
                &loso
            }
        };
        let mut cfg = base.clone();
        cfg.seed = seed;
        let dir = out_dir.map(|d| d.join(format!("seed{seed}")));
        let report = if arms[0] == arms[1] {
            run_cv(&recordings, &cfg, plan, &arms[..1], dir.as_deref())?
        } else {
            run_cv(&recordings, &cfg, plan, &arms, dir.as_deref())?
        };
        let a = report.aggregate[0].ccc.clone();
        let b = report.aggregate.get(1).map(|r| r.ccc.clone()).unwrap_or_else(|| a.clone());
        for d in base.dimensions.dims() {
            let (x, y) = (a.get(d).copied().unwrap_or(f64::NAN), b.get(d).copied().unwrap_or(f64::NAN));
            info!("seed {seed} {d}: {} {x:.4} vs {} {y:.4}", modes[0], modes[1]);
            rows.push(AbRow {
                seed,
                dimension: d,
                baseline: x,
                acn: y,
                delta: y - x,
            });
        }
        reports.push(report);
    }
    let mut median_delta = PerDimension::default();
    for d in base.dimensions.dims() {
        let deltas: Vec<f64> = rows.iter().filter(|r| r.dimension == d).map(|r| r.delta).collect();
        median_delta.set(d, median(&deltas));
    }
    let ab = AbReport {
        dimensions: base.dimensions,
        seeds: seeds.to_vec(),
        rows,
        median_delta,
        reports,
    };
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let p = dir.join("ab_report.json");
        fs::write(&p, serde_json::to_string_pretty(&ab)?).map_err(|e| Error::io(&p, e))?;
        let p = dir.join("ab_report.txt");
        fs::write(&p, ab.table()).map_err(|e| Error::io(&p, e))?;
    }
    Ok(ab)
}
