//! Baseline and joint (predictor + ACN) training.
//!
//! Baseline mode minimizes `L_ccc(gold, prediction)`. Consensus mode runs the
//! ACN over the annotator streams and minimizes
//! `alpha * L_ccc(gold, consensus) + beta * L_ccc(consensus, prediction)`
//! per dimension, summing over dimensions in `both` mode. The ACN receives
//! gradient from both terms unless `detach_consensus_in_second_term` is set;
//! the predictor only from the second.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use log::{debug, info};
use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::annotations::{windowize, Dimension, PerDimension, Segment, WindowSpec};
use crate::ccc::{ccc_batch_loss_masked, ccc_stats, Pooling, WantGrads};
use crate::consensus::{Acn, AcnConfig};
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::nn::{Activation, OptimConfig};
use crate::predictor::{Frontend, Heads, Predictor, PredictorConfig};
use crate::seed::substream;

/// Windows whose target variance falls below this are skipped.
pub const DEGENERATE_VARIANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Baseline,
    Acn,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Baseline => "baseline",
            Mode::Acn => "acn",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimensionSet {
    Arousal,
    Valence,
    Both,
}

impl DimensionSet {
    pub fn dims(self) -> Vec<Dimension> {
        match self {
            DimensionSet::Arousal => vec![Dimension::Arousal],
            DimensionSet::Valence => vec![Dimension::Valence],
            DimensionSet::Both => Dimension::ALL.to_vec(),
        }
    }
}

impl std::fmt::Display for DimensionSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DimensionSet::Arousal => "arousal",
            DimensionSet::Valence => "valence",
            DimensionSet::Both => "both",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictorSettings {
    pub frontend: Frontend,
    pub encoder_dims: Vec<usize>,
    pub encoder_activation: Activation,
    pub head_activation: Activation,
    /// Derived from `dimensions` when unset.
    pub heads: Option<Heads>,
    pub context_frames: Option<usize>,
}

impl Default for PredictorSettings {
    fn default() -> Self {
        Self {
            frontend: Frontend::Identity,
            encoder_dims: vec![64, 64],
            encoder_activation: Activation::Tanh,
            head_activation: Activation::Tanh,
            heads: None,
            context_frames: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcnSettings {
    pub hidden_dims: Vec<usize>,
    pub activation: Activation,
    pub output_activation: Activation,
}

impl Default for AcnSettings {
    fn default() -> Self {
        let c = AcnConfig::new(0);
        Self {
            hidden_dims: c.hidden_dims,
            activation: c.activation,
            output_activation: c.output_activation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub mode: Mode,
    pub dimensions: DimensionSet,
    pub alpha: f64,
    pub beta: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub window: WindowSpec,
    pub optim: OptimConfig,
    /// Reduction for the training loss.
    pub pooling: Pooling,
    /// Reduction for validation CCC.
    pub eval_pooling: Pooling,
    pub seed: u64,
    pub detach_consensus_in_second_term: bool,
    /// Keep the ACN at its initial parameters.
    pub freeze_acn: bool,
    pub predictor: PredictorSettings,
    pub acn: AcnSettings,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Acn,
            dimensions: DimensionSet::Arousal,
            alpha: 0.5,
            beta: 0.5,
            epochs: 15,
            batch_size: 32,
            window: WindowSpec::RECOLA,
            optim: OptimConfig::default(),
            pooling: Pooling::PerWindowMean,
            eval_pooling: Pooling::Pooled,
            seed: 0,
            detach_consensus_in_second_term: false,
            freeze_acn: false,
            predictor: PredictorSettings::default(),
            acn: AcnSettings::default(),
        }
    }
}

impl TrainConfig {
    /// Speech-corpus regime: 3 s windows, 0.4 s hop.
    pub fn recola() -> Self {
        Self::default()
    }

    /// Film-corpus regime: 5 s windows, 3 s hop.
    pub fn cognimuse() -> Self {
        Self {
            window: WindowSpec::COGNIMUSE,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.beta >= 0.0 && self.alpha + self.beta > 0.0) {
            return Err(Error::config("alpha and beta must be non-negative with a positive sum"));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::config("epochs and batch_size must be at least 1"));
        }
        self.window.frames(25.0)?;
        self.optim.validate()?;
        if self.dimensions == DimensionSet::Both && self.predictor.heads == Some(Heads::Single) {
            return Err(Error::config("dimensions=both needs a dual-head predictor"));
        }
        if self.dimensions != DimensionSet::Both && self.predictor.heads == Some(Heads::Dual) {
            return Err(Error::config("a dual-head predictor needs dimensions=both"));
        }
        Ok(())
    }

    pub fn heads(&self) -> Heads {
        self.predictor.heads.unwrap_or(match self.dimensions {
            DimensionSet::Both => Heads::Dual,
            _ => Heads::Single,
        })
    }

    /// Short SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(&Sha256::digest(json.as_bytes())[..8])
    }

    fn objective(&self) -> Objective {
        Objective {
            mode: self.mode,
            alpha: self.alpha,
            beta: self.beta,
            pooling: self.pooling,
            detach: self.detach_consensus_in_second_term,
        }
    }
}

/// How a batch is scored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub mode: Mode,
    pub alpha: f64,
    pub beta: f64,
    pub pooling: Pooling,
    pub detach: bool,
}

/// `alpha * term1 + beta * term2` for one dimension.
pub fn cer_acn_loss(alpha: f64, beta: f64, term1: f64, term2: f64) -> f64 {
    alpha * term1 + beta * term2
}

/// Joint arousal/valence objective: the unweighted sum of per-dimension losses.
pub fn joint_dimension_loss(losses: &PerDimension<f64>) -> f64 {
    losses.iter().map(|(_, l)| *l).sum()
}

/// Predictor plus one ACN per trained dimension (ACNs only in consensus mode).
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusModel {
    pub predictor: Predictor,
    pub acns: PerDimension<Acn>,
}

/// One training window with its network inputs precomputed.
#[derive(Debug, Clone)]
pub struct WindowData {
    pub inputs: Array2<f64>,
    pub gold: PerDimension<Vec<f64>>,
    pub annotations: PerDimension<Array2<f64>>,
}

impl WindowData {
    pub fn from_segment(predictor: &Predictor, seg: &Segment) -> Result<Self> {
        Ok(Self {
            inputs: predictor.prepare(&seg.features)?,
            gold: seg.gold.map(|_, g| g.values.clone()),
            annotations: seg.annotations.map(|_, a| a.data().clone()),
        })
    }

    pub fn frames(&self) -> usize {
        self.inputs.nrows()
    }
}

/// Loss terms for one batch, summed over dimensions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchLosses {
    /// `L(gold, consensus)`; zero in baseline mode.
    pub term1: f64,
    /// `L(consensus, prediction)`, or `L(gold, prediction)` in baseline mode.
    pub term2: f64,
    pub total: f64,
    /// Window-term pairs excluded by the degenerate-variance guard.
    pub degenerate: usize,
}

fn variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    ccc_stats(x, x).map(|s| s.var_x).unwrap_or(0.0)
}

fn stack(views: Vec<ArrayView2<'_, f64>>) -> Result<Array2<f64>> {
    concatenate(Axis(0), &views).map_err(|e| Error::contract(format!("cannot stack batch: {e}")))
}

fn split(values: &[f64], lens: &[usize]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(lens.len());
    let mut off = 0;
    for &l in lens {
        out.push(values[off..off + l].to_vec());
        off += l;
    }
    out
}

impl ConsensusModel {
    /// Fresh model for `cfg`; `annotators` gives U per dimension for ACN mode.
    pub fn init(cfg: &TrainConfig, feature_dim: usize, annotators: &PerDimension<usize>) -> Result<Self> {
        let dims = cfg.dimensions.dims();
        let mut pcfg = PredictorConfig::new(feature_dim, cfg.heads());
        pcfg.frontend = cfg.predictor.frontend;
        pcfg.encoder_dims = cfg.predictor.encoder_dims.clone();
        pcfg.encoder_activation = cfg.predictor.encoder_activation;
        pcfg.head_activation = cfg.predictor.head_activation;
        pcfg.context_frames = cfg.predictor.context_frames;
        let predictor = Predictor::new(pcfg, dims.clone(), &mut substream(cfg.seed, "init/predictor"))?;
        let mut acns = PerDimension::default();
        if cfg.mode == Mode::Acn {
            for &d in &dims {
                let u = *annotators
                    .get(d)
                    .ok_or_else(|| Error::contract(format!("no annotator count for {d}")))?;
                let acfg = AcnConfig {
                    annotators: u,
                    hidden_dims: cfg.acn.hidden_dims.clone(),
                    activation: cfg.acn.activation,
                    output_activation: cfg.acn.output_activation,
                };
                acns.set(d, Acn::new(acfg, &mut substream(cfg.seed, &format!("init/acn/{d}")))?);
            }
        }
        Ok(Self { predictor, acns })
    }

    /// Scores a batch and, with `backprop`, accumulates gradients into both
    /// networks. Gradients are not applied here.
    pub fn batch_loss(&mut self, obj: &Objective, batch: &[&WindowData], backprop: bool) -> Result<BatchLosses> {
        if batch.is_empty() {
            return Err(Error::contract("empty batch"));
        }
        let lens: Vec<usize> = batch.iter().map(|w| w.frames()).collect();
        if lens.iter().any(|&l| l != lens[0]) {
            return Err(Error::contract("windows in a batch must share one length"));
        }
        let rows = stack(batch.iter().map(|w| w.inputs.view()).collect())?;
        let yhat = self.predictor.forward_rows(&rows)?;
        let mut upstream = Array2::<f64>::zeros(yhat.raw_dim());
        let dims = self.predictor.dimensions().to_vec();
        let mut out = BatchLosses::default();

        for (j, &d) in dims.iter().enumerate() {
            let preds = split(&yhat.column(j).to_vec(), &lens);
            let gold = batch
                .iter()
                .map(|w| w.gold.get(d).cloned().ok_or_else(|| Error::contract(format!("window lacks {d} gold"))))
                .collect::<Result<Vec<_>>>()?;
            let gold_ok: Vec<bool> = gold.iter().map(|g| variance(g) >= DEGENERATE_VARIANCE).collect();

            let pred_grad: Vec<f64> = match obj.mode {
                Mode::Baseline => {
                    let r = ccc_batch_loss_masked(&gold, &preds, Some(&gold_ok), obj.pooling, WantGrads::Y)?;
                    out.degenerate += batch.len() - r.used;
                    out.term2 += r.loss;
                    out.total += r.loss;
                    r.grad_y.unwrap().concat()
                }
                Mode::Acn => {
                    let acn = self
                        .acns
                        .get_mut(d)
                        .ok_or_else(|| Error::contract(format!("no consensus network for {d}")))?;
                    let ann = batch
                        .iter()
                        .map(|w| {
                            w.annotations
                                .get(d)
                                .map(|a| a.view())
                                .ok_or_else(|| Error::contract(format!("window lacks {d} annotations")))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let consensus = split(&acn.forward_frames(&stack(ann)?)?, &lens);
                    let cons_ok: Vec<bool> = consensus.iter().map(|c| variance(c) >= DEGENERATE_VARIANCE).collect();
                    let both_ok: Vec<bool> = gold_ok.iter().zip(&cons_ok).map(|(a, b)| *a && *b).collect();

                    let r1 = ccc_batch_loss_masked(&gold, &consensus, Some(&both_ok), obj.pooling, WantGrads::Y)?;
                    let r2 = ccc_batch_loss_masked(&consensus, &preds, Some(&cons_ok), obj.pooling, WantGrads::BOTH)?;
                    out.degenerate += (batch.len() - r1.used) + (batch.len() - r2.used);
                    out.term1 += r1.loss;
                    out.term2 += r2.loss;
                    out.total += cer_acn_loss(obj.alpha, obj.beta, r1.loss, r2.loss);

                    if backprop {
                        let g1 = r1.grad_y.unwrap().concat();
                        let g2 = r2.grad_x.unwrap().concat();
                        let up: Vec<f64> = g1
                            .iter()
                            .zip(&g2)
                            .map(|(a, b)| obj.alpha * a + if obj.detach { 0.0 } else { obj.beta * b })
                            .collect();
                        acn.backward(&up)?;
                    }
                    r2.grad_y.unwrap().concat().into_iter().map(|g| obj.beta * g).collect()
                }
            };
            upstream.column_mut(j).iter_mut().zip(pred_grad).for_each(|(u, g)| *u = g);
        }
        if backprop {
            self.predictor.backward(&upstream)?;
        }
        Ok(out)
    }
}

/// Indices of the segments in one batch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub indices: Vec<usize>,
}

/// Splits `0..n` into batches of `batch_size`, keeping the final partial
/// batch; optionally shuffled with a seeded permutation.
pub fn make_batches(n: usize, batch_size: usize, seed: u64, shuffle: bool) -> Vec<Batch> {
    let mut order: Vec<usize> = (0..n).collect();
    if shuffle {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    order
        .chunks(batch_size.max(1))
        .map(|c| Batch { indices: c.to_vec() })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub term1: f64,
    pub term2: f64,
    pub total: f64,
    pub val_ccc: PerDimension<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRun {
    pub config_hash: String,
    pub mode: Mode,
    pub dimensions: DimensionSet,
    pub train_windows: usize,
    pub epochs: Vec<EpochRecord>,
    /// Per optimizer step, in order.
    pub steps: Vec<BatchLosses>,
    pub degenerate_windows: usize,
    pub wall_clock_s: f64,
}

impl TrainRun {
    pub fn final_val_ccc(&self) -> PerDimension<f64> {
        self.epochs.last().map(|e| e.val_ccc.clone()).unwrap_or_default()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub run: TrainRun,
    pub model: ConsensusModel,
}

fn check_data(train: &[Segment], val: &[Segment], cfg: &TrainConfig) -> Result<PerDimension<usize>> {
    if train.is_empty() {
        return Err(Error::contract("no training recordings"));
    }
    let feature_dim = train[0].features.dim();
    let mut annotators = PerDimension::default();
    for seg in train.iter().chain(val) {
        if seg.features.dim() != feature_dim {
            return Err(Error::contract(format!(
                "{}: feature dim {} differs from {feature_dim}",
                seg.source_id,
                seg.features.dim()
            )));
        }
        for d in cfg.dimensions.dims() {
            if seg.gold.get(d).is_none() {
                return Err(Error::contract(format!("{}: missing {d} gold standard", seg.source_id)));
            }
        }
    }
    if cfg.mode == Mode::Acn {
        for seg in train {
            for d in cfg.dimensions.dims() {
                let a = seg
                    .annotations
                    .get(d)
                    .ok_or_else(|| Error::contract(format!("{}: missing {d} annotations", seg.source_id)))?;
                match annotators.get(d) {
                    Some(&u) if u != a.annotators() => {
                        return Err(Error::contract(format!(
                            "{}: {} {d} annotators, others have {u}",
                            seg.source_id,
                            a.annotators()
                        )))
                    }
                    _ => annotators.set(d, a.annotators()),
                }
            }
        }
    }
    Ok(annotators)
}

/// Trains the predictor against the gold standard.
pub fn train_baseline(train: &[Segment], val: &[Segment], cfg: &TrainConfig) -> Result<TrainOutcome> {
    if cfg.mode != Mode::Baseline {
        return Err(Error::config("train_baseline needs mode=baseline"));
    }
    self::train(train, val, cfg)
}

/// Trains predictor and ACN jointly under the weighted dual loss.
pub fn train_joint(train: &[Segment], val: &[Segment], cfg: &TrainConfig) -> Result<TrainOutcome> {
    if cfg.mode != Mode::Acn {
        return Err(Error::config("train_joint needs mode=acn"));
    }
    self::train(train, val, cfg)
}

/// Initializes a model from `cfg.seed` and trains it.
pub fn train(train: &[Segment], val: &[Segment], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let annotators = check_data(train, val, cfg)?;
    let model = ConsensusModel::init(cfg, train[0].features.dim(), &annotators)?;
    fit(model, train, val, cfg)
}

/// Trains an existing model. `train` holds full recordings, windowed here.
pub fn fit(mut model: ConsensusModel, train: &[Segment], val: &[Segment], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_data(train, val, cfg)?;
    let started = Instant::now();
    let mut windows = Vec::new();
    for rec in train {
        for w in windowize(rec, &cfg.window)? {
            windows.push(WindowData::from_segment(&model.predictor, &w)?);
        }
    }
    if windows.is_empty() {
        return Err(Error::contract("training recordings are shorter than one window"));
    }
    info!(
        "training {} mode on {} windows from {} recordings ({} epochs)",
        cfg.mode,
        windows.len(),
        train.len(),
        cfg.epochs
    );
    let obj = cfg.objective();
    let mut shuffle_rng = substream(cfg.seed, "shuffle");
    let mut step: u64 = 0;
    let mut run = TrainRun {
        config_hash: cfg.hash(),
        mode: cfg.mode,
        dimensions: cfg.dimensions,
        train_windows: windows.len(),
        epochs: Vec::with_capacity(cfg.epochs),
        steps: Vec::new(),
        degenerate_windows: 0,
        wall_clock_s: 0.0,
    };
    for epoch in 1..=cfg.epochs {
        let batches = make_batches(windows.len(), cfg.batch_size, shuffle_rng.random(), true);
        let mut sums = BatchLosses::default();
        for batch in &batches {
            let items: Vec<&WindowData> = batch.indices.iter().map(|&i| &windows[i]).collect();
            let losses = model.batch_loss(&obj, &items, true)?;
            step += 1;
            model.predictor.net_mut().optimizer_step(&cfg.optim, step)?;
            for d in Dimension::ALL {
                if let Some(acn) = model.acns.get_mut(d) {
                    if cfg.freeze_acn {
                        acn.net_mut().zero_grads();
                    } else {
                        acn.net_mut().optimizer_step(&cfg.optim, step)?;
                    }
                }
            }
            sums.term1 += losses.term1;
            sums.term2 += losses.term2;
            sums.total += losses.total;
            run.degenerate_windows += losses.degenerate;
            run.steps.push(losses);
        }
        let nb = batches.len() as f64;
        let val_ccc = if val.is_empty() {
            PerDimension::default()
        } else {
            evaluate(&model.predictor, val, cfg.eval_pooling)?
        };
        let rec = EpochRecord {
            epoch,
            term1: sums.term1 / nb,
            term2: sums.term2 / nb,
            total: sums.total / nb,
            val_ccc,
        };
        debug!(
            "epoch {epoch}: term1 {:.4} term2 {:.4} total {:.4} val {:?}",
            rec.term1, rec.term2, rec.total, rec.val_ccc
        );
        run.epochs.push(rec);
    }
    run.wall_clock_s = started.elapsed().as_secs_f64();
    Ok(TrainOutcome { run, model })
}

fn opt_field(v: Option<&f64>) -> String {
    v.map(|x| format!("{x:.12}")).unwrap_or_default()
}

/// `epoch,term1,term2,total,val_ccc_arousal,val_ccc_valence`
pub fn write_epochs_csv(path: impl AsRef<Path>, run: &TrainRun) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(out, "epoch,term1,term2,total,val_ccc_arousal,val_ccc_valence").map_err(io)?;
    for e in &run.epochs {
        writeln!(
            out,
            "{},{:.12},{:.12},{:.12},{},{}",
            e.epoch,
            e.term1,
            e.term2,
            e.total,
            opt_field(e.val_ccc.get(Dimension::Arousal)),
            opt_field(e.val_ccc.get(Dimension::Valence)),
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_arithmetic() {
        let b = make_batches(70, 32, 1, false);
        assert_eq!(b.iter().map(|b| b.indices.len()).collect::<Vec<_>>(), vec![32, 32, 6]);
        assert_eq!(b[0].indices, (0..32).collect::<Vec<_>>());
        let s1 = make_batches(70, 32, 9, true);
        assert_eq!(s1, make_batches(70, 32, 9, true));
        assert_ne!(s1, make_batches(70, 32, 10, true));
        let mut all: Vec<usize> = s1.iter().flat_map(|b| b.indices.clone()).collect();
        all.sort();
        assert_eq!(all, (0..70).collect::<Vec<_>>());
    }

    #[test]
    fn dimension_losses_sum() {
        let mut l = PerDimension::default();
        l.set(Dimension::Arousal, 0.3);
        l.set(Dimension::Valence, 0.3);
        assert_eq!(joint_dimension_loss(&l), 0.6);
        let mut l = PerDimension::default();
        l.set(Dimension::Arousal, cer_acn_loss(0.5, 0.5, 0.4, 0.2));
        l.set(Dimension::Valence, cer_acn_loss(0.0, 0.0, 0.9, 0.7));
        assert_eq!(joint_dimension_loss(&l), cer_acn_loss(0.5, 0.5, 0.4, 0.2));
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::default();
        c.alpha = 0.0;
        c.beta = 0.0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.dimensions = DimensionSet::Both;
        c.predictor.heads = Some(Heads::Single);
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = TrainConfig::default();
        c.epochs = 0;
        assert!(c.validate().is_err());
        assert_eq!(TrainConfig::default().heads(), Heads::Single);
    }

    #[test]
    fn protocol_defaults() {
        let c = TrainConfig::default();
        assert_eq!((c.epochs, c.batch_size, c.alpha, c.beta), (15, 32, 0.5, 0.5));
        assert_eq!(c.optim.learning_rate, 5e-4);
        assert_eq!(c.window, WindowSpec { window_s: 3.0, shift_s: 0.4 });
        assert_eq!(TrainConfig::cognimuse().window, WindowSpec { window_s: 5.0, shift_s: 3.0 });
    }

    #[test]
    fn unknown_config_keys_rejected() {
        assert!(serde_json::from_str::<TrainConfig>(r#"{"alpah": 0.3}"#).is_err());
        let c: TrainConfig = serde_json::from_str(r#"{"alpha": 0.3}"#).unwrap();
        assert_eq!((c.alpha, c.beta), (0.3, 0.5));
    }
}
