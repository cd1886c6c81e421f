//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};

use cer_core::annotations::{
    load_annotation_csv, load_feature_csv, load_gold_csv, write_gold_csv, write_time_series, Dimension, Provenance,
    Segment,
};
use cer_core::ccc::{ccc_loss, Pooling, WantGrads};
use cer_core::checkpoint::Checkpoint;
use cer_core::consensus::{aggregate_baseline, compute_reliability_weights, AggregateMethod, Reference};
use cer_core::dataset::{load_dataset, write_synthetic_dataset};
use cer_core::eval::{ab_compare_with, evaluate, run_cv, Arm};
use cer_core::synth::generate_corpus;
use cer_core::trainer::{self, write_epochs_csv, DimensionSet, Mode};
use log::info;

use crate::config::{self, CliConfig, Override, SchemeChoice};
use crate::{
    AbArgs, AggregateArgs, CliError, Command, ConfigArg, CvArgs, DimensionArg, EvaluateArgs, MethodArg, MetricsArgs,
    ModeArg, PoolingArg, PredictArgs, SimulateArgs, SingleDimensionArg, TrainArgs,
};

type Result<T> = std::result::Result<T, CliError>;

pub fn dispatch(command: Command, mut overrides: Vec<Override>) -> Result<()> {
    let takes_config = matches!(
        command,
        Command::Simulate(_) | Command::Train(_) | Command::Cv(_) | Command::Ab(_)
    );
    if !takes_config && !overrides.is_empty() {
        return Err(CliError::usage(format!(
            "{} does not take config overrides",
            overrides[0].origin
        )));
    }
    match command {
        Command::Simulate(a) => simulate(a, &mut overrides),
        Command::Train(a) => train(a, &mut overrides),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Aggregate(a) => aggregate(a),
        Command::Predict(a) => predict(a),
        Command::Metrics(a) => metrics(a),
        Command::Cv(a) => cv(a, &mut overrides),
        Command::Ab(a) => ab(a, &mut overrides),
    }
}

fn push(overrides: &mut Vec<Override>, path: &str, value: Option<serde_json::Value>, flag: &str) {
    if let Some(v) = value {
        overrides.push(Override {
            path: path.into(),
            value: v,
            origin: flag.into(),
        });
    }
}

fn path_value(p: &Option<PathBuf>) -> Option<serde_json::Value> {
    p.as_ref().map(|p| serde_json::Value::String(p.display().to_string()))
}

fn load(config: &ConfigArg, overrides: &[Override]) -> Result<CliConfig> {
    config::resolve(config.config.as_deref(), overrides)
}

fn require<'a>(value: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| CliError::usage(format!("{what} is required")))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(cer_core::Error::from)?;
    fs::write(path, text + "\n").map_err(|e| io(path, e))
}

fn io(path: &Path, source: std::io::Error) -> CliError {
    CliError::Core(cer_core::Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| io(path, e))
}

fn simulate(a: SimulateArgs, overrides: &mut Vec<Override>) -> Result<()> {
    push(overrides, "synth.seed", a.seed.map(Into::into), "--seed");
    push(overrides, "dataset_dir", path_value(&a.out), "--out");
    let cfg = load(&a.config, overrides)?;
    let out = require(&cfg.dataset_dir, "--out (dataset_dir)")?;
    let corpus = generate_corpus(&cfg.synth)?;
    let manifest = write_synthetic_dataset(out, &corpus, &cfg.synth)?;
    println!(
        "wrote {} sources x {} frames to {}",
        manifest.sources.len(),
        cfg.synth.frames_per_source,
        out.display()
    );
    Ok(())
}

fn mode_value(m: ModeArg) -> serde_json::Value {
    match m {
        ModeArg::Baseline => "baseline",
        ModeArg::Acn => "acn",
    }
    .into()
}

fn dimension_value(d: DimensionArg) -> serde_json::Value {
    match d {
        DimensionArg::Arousal => "arousal",
        DimensionArg::Valence => "valence",
        DimensionArg::Both => "both",
    }
    .into()
}

fn pick(recordings: &[Segment], ids: &[String]) -> Result<Vec<Segment>> {
    if let Some(missing) = ids.iter().find(|id| !recordings.iter().any(|r| &&r.source_id == id)) {
        return Err(CliError::config(format!("unknown source {missing}")));
    }
    Ok(recordings.iter().filter(|r| ids.contains(&r.source_id)).cloned().collect())
}

fn train(a: TrainArgs, overrides: &mut Vec<Override>) -> Result<()> {
    push(overrides, "train.mode", a.mode.map(mode_value), "--mode");
    push(overrides, "train.dimensions", a.dimension.map(dimension_value), "--dimension");
    push(overrides, "train.seed", a.seed.map(Into::into), "--seed");
    push(overrides, "dataset_dir", path_value(&a.data), "--data");
    push(overrides, "run_dir", path_value(&a.out), "--out");
    push(
        overrides,
        "val_sources",
        a.val.as_ref().map(|v| serde_json::to_value(v).unwrap()),
        "--val",
    );
    let mut cfg = load(&a.config, overrides)?;
    let data_dir = require(&cfg.dataset_dir, "--data (dataset_dir)")?.to_path_buf();
    let run_dir = require(&cfg.run_dir, "--out (run_dir)")?.to_path_buf();
    let dataset = load_dataset(&data_dir)?;
    let ids = dataset.source_ids();
    let val_ids = match &cfg.val_sources {
        Some(v) => v.clone(),
        None if ids.len() >= 2 => vec![ids[ids.len() - 1].clone()],
        None => Vec::new(),
    };
    cfg.val_sources = Some(val_ids.clone());
    let val = pick(&dataset.recordings, &val_ids)?;
    let train_set: Vec<Segment> = dataset
        .recordings
        .iter()
        .filter(|r| !val_ids.contains(&r.source_id))
        .cloned()
        .collect();
    if train_set.is_empty() {
        return Err(CliError::config("no training sources left after the validation split"));
    }
    create_dir(&run_dir)?;
    write_json(&run_dir.join("config.json"), &cfg)?;
    let outcome = trainer::train(&train_set, &val, &cfg.train)?;
    write_epochs_csv(run_dir.join("epochs.csv"), &outcome.run)?;
    let steps = outcome.run.steps.len() as u64;
    Checkpoint::capture(&outcome.model, &cfg.train, steps).save(run_dir.join("checkpoint.json"))?;
    write_json(&run_dir.join("run.json"), &outcome.run)?;
    let last = outcome.run.epochs.last().expect("at least one epoch");
    print!("{} {} epochs={} loss={:.4}", cfg.train.mode, cfg.train.dimensions, last.epoch, last.total);
    for (d, v) in last.val_ccc.iter() {
        print!(" val_ccc_{d}={v:.4}");
    }
    println!(" -> {}", run_dir.display());
    Ok(())
}

fn pooling(p: PoolingArg) -> Pooling {
    match p {
        PoolingArg::Pooled => Pooling::Pooled,
        PoolingArg::PerWindowMean => Pooling::PerWindowMean,
    }
}

fn evaluate_cmd(a: EvaluateArgs) -> Result<()> {
    let model = Checkpoint::load(&a.checkpoint)?.restore()?;
    let dataset = load_dataset(&a.data)?;
    let segments = match &a.sources {
        Some(ids) => pick(&dataset.recordings, ids)?,
        None => dataset.recordings.clone(),
    };
    let scores = evaluate(&model.predictor, &segments, pooling(a.pooling))?;
    if a.json {
        println!("{}", serde_json::to_string(&scores).map_err(cer_core::Error::from)?);
    } else {
        for (d, v) in scores.iter() {
            println!("{d} ccc={v:.6}");
        }
    }
    Ok(())
}

fn single_dimension(d: SingleDimensionArg) -> Dimension {
    match d {
        SingleDimensionArg::Arousal => Dimension::Arousal,
        SingleDimensionArg::Valence => Dimension::Valence,
    }
}

fn aggregate(a: AggregateArgs) -> Result<()> {
    let dim = single_dimension(a.dimension);
    let matrix = load_annotation_csv(&a.annotations, dim)?.value.into_matrix()?;
    let values = match a.method {
        MethodArg::Mean => aggregate_baseline(&matrix, AggregateMethod::Mean, None)?.values,
        MethodArg::Median => aggregate_baseline(&matrix, AggregateMethod::Median, None)?.values,
        MethodArg::Weighted => {
            let w = match &a.weights {
                Some(w) => w.clone(),
                None => compute_reliability_weights(&matrix, Reference::LeaveOneOutMean)?,
            };
            aggregate_baseline(&matrix, AggregateMethod::Weighted, Some(&w))?.values
        }
        MethodArg::Acn => {
            let path = a
                .checkpoint
                .as_ref()
                .ok_or_else(|| CliError::usage("--method acn needs --checkpoint"))?;
            let model = Checkpoint::load(path)?.restore()?;
            let acn = model
                .acns
                .get(dim)
                .ok_or_else(|| CliError::config(format!("checkpoint has no {dim} consensus network")))?;
            acn.infer(&matrix)?.values
        }
    };
    write_gold_csv(&a.out, matrix.rate_hz(), &values)?;
    info!("wrote {} frames to {}", values.len(), a.out.display());
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let model = Checkpoint::load(&a.checkpoint)?.restore()?;
    let features = load_feature_csv(&a.features)?;
    let trace = model.predictor.infer(&features)?;
    let names: Vec<String> = trace.dimensions.iter().map(|d| d.to_string()).collect();
    write_time_series(&a.out, features.rate_hz, &names, trace.frames(), |i, j| trace.values[[i, j]])?;
    Ok(())
}

/// Rounds to 6 decimals, normalizing negative zero.
fn tidy(v: f64) -> f64 {
    (v * 1e6).round() / 1e6 + 0.0
}

fn metrics(a: MetricsArgs) -> Result<()> {
    let x = load_gold_csv(&a.x, Dimension::Arousal, Provenance::ExternalGold)?.value;
    let y = load_gold_csv(&a.y, Dimension::Arousal, Provenance::ExternalGold)?.value;
    let r = ccc_loss(&x.values, &y.values, WantGrads::NONE)?;
    println!("ccc={:?} loss={:?}", tidy(r.ccc), tidy(r.loss));
    Ok(())
}

fn default_arms(dims: DimensionSet, full: bool) -> Vec<Arm> {
    let dim_sets = if full {
        vec![DimensionSet::Valence, DimensionSet::Arousal, DimensionSet::Both]
    } else {
        vec![dims]
    };
    dim_sets
        .into_iter()
        .flat_map(|dimensions| [Mode::Baseline, Mode::Acn].map(|mode| Arm { mode, dimensions }))
        .collect()
}

fn cv(a: CvArgs, overrides: &mut Vec<Override>) -> Result<()> {
    push(overrides, "dataset_dir", path_value(&a.data), "--data");
    push(overrides, "run_dir", path_value(&a.out), "--out");
    let cfg = load(&a.config, overrides)?;
    let dataset = load_dataset(require(&cfg.dataset_dir, "--data (dataset_dir)")?)?;
    let plan = cfg.eval.plan(&dataset.source_ids())?;
    let arms = if cfg.eval.arms.is_empty() {
        default_arms(cfg.train.dimensions, a.full_table)
    } else {
        cfg.eval.arms.clone()
    };
    if let Some(dir) = &cfg.run_dir {
        create_dir(dir)?;
        write_json(&dir.join("config.json"), &cfg)?;
    }
    let report = run_cv(&dataset.recordings, &cfg.train, &plan, &arms, cfg.run_dir.as_deref())?;
    print!("{}", report.table());
    Ok(())
}

fn ab(a: AbArgs, overrides: &mut Vec<Override>) -> Result<()> {
    push(overrides, "dataset_dir", path_value(&a.data), "--data");
    push(overrides, "run_dir", path_value(&a.out), "--out");
    push(
        overrides,
        "eval.seeds",
        a.seeds.as_ref().map(|s| serde_json::to_value(s).unwrap()),
        "--seeds",
    );
    let cfg = load(&a.config, overrides)?;
    if let Some(dir) = &cfg.run_dir {
        create_dir(dir)?;
        write_json(&dir.join("config.json"), &cfg)?;
    }
    let modes = [Mode::Baseline, Mode::Acn];
    let report = match &cfg.dataset_dir {
        Some(dir) => {
            let dataset = load_dataset(dir)?;
            let plan = cfg.eval.plan(&dataset.source_ids())?;
            ab_compare_with(&cfg.train, &cfg.eval.seeds, modes, Some(&plan), cfg.run_dir.as_deref(), |_| {
                Ok(dataset.recordings.clone())
            })?
        }
        None => {
            if cfg.eval.scheme == SchemeChoice::FixedSplit {
                return Err(CliError::config("fixed_split needs --data"));
            }
            ab_compare_with(&cfg.train, &cfg.eval.seeds, modes, None, cfg.run_dir.as_deref(), |seed| {
                let mut synth = cfg.synth.clone();
                synth.seed = seed;
                Ok(generate_corpus(&synth)?.recordings)
            })?
        }
    };
    print!("{}", report.table());
    Ok(())
}
