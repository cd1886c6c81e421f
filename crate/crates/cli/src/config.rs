//! The JSON run configuration and dotted flag overrides.

use std::path::{Path, PathBuf};

use cer_core::eval::{Arm, FoldPlan};
use cer_core::synth::SynthConfig;
use cer_core::trainer::TrainConfig;
use log::warn;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Top-level sections that accept `--<section>.<field>` overrides.
pub const OVERRIDE_SECTIONS: [&str; 3] = ["train", "synth", "eval"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub dataset_dir: Option<PathBuf>,
    #[serde(default)]
    pub run_dir: Option<PathBuf>,
    /// Validation sources for `train`; unset means the last source.
    #[serde(default)]
    pub val_sources: Option<Vec<String>>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub synth: SynthConfig,
    #[serde(default)]
    pub eval: EvalSettings,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            dataset_dir: None,
            run_dir: None,
            val_sources: None,
            train: TrainConfig::default(),
            synth: SynthConfig::default(),
            eval: EvalSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeChoice {
    #[default]
    LeaveOneSourceOut,
    FixedSplit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSettings {
    pub scheme: SchemeChoice,
    /// Sources for `fixed_split`.
    pub train_sources: Vec<String>,
    pub test_sources: Vec<String>,
    /// Arms for `cv`; empty means baseline and acn on `train.dimensions`.
    pub arms: Vec<Arm>,
    pub seeds: Vec<u64>,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            scheme: SchemeChoice::LeaveOneSourceOut,
            train_sources: Vec::new(),
            test_sources: Vec::new(),
            arms: Vec::new(),
            seeds: vec![0, 1, 2, 3, 4],
        }
    }
}

impl EvalSettings {
    pub fn plan(&self, sources: &[String]) -> cer_core::Result<FoldPlan> {
        match self.scheme {
            SchemeChoice::LeaveOneSourceOut => FoldPlan::leave_one_source_out(sources),
            SchemeChoice::FixedSplit => FoldPlan::fixed_split(self.train_sources.clone(), self.test_sources.clone()),
        }
    }
}

/// One `path = value` assignment; `path` is dotted from the config root.
#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub path: String,
    pub value: Value,
    /// How the user spelled it, for messages.
    pub origin: String,
}

impl Override {
    /// Values parse as JSON when they can, otherwise as plain strings.
    pub fn new(path: impl Into<String>, raw: &str, origin: impl Into<String>) -> Self {
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        Self {
            path: path.into(),
            value,
            origin: origin.into(),
        }
    }
}

/// Pulls `--section.field value` and `--section.field=value` pairs out of
/// argv, returning the remaining arguments and the overrides in order.
pub fn split_dotted(args: Vec<String>) -> Result<(Vec<String>, Vec<Override>), CliError> {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let Some(body) = arg.strip_prefix("--") else {
            rest.push(arg);
            continue;
        };
        let (key, inline) = match body.split_once('=') {
            Some((k, v)) => (k.to_string(), Some(v.to_string())),
            None => (body.to_string(), None),
        };
        let dotted = key
            .split_once('.')
            .is_some_and(|(head, tail)| OVERRIDE_SECTIONS.contains(&head) && !tail.is_empty());
        if !dotted {
            rest.push(arg);
            continue;
        }
        let raw = match inline {
            Some(v) => v,
            None => it
                .next()
                .ok_or_else(|| CliError::usage(format!("--{key} needs a value")))?,
        };
        overrides.push(Override::new(key.clone(), &raw, format!("--{key}")));
    }
    Ok((rest, overrides))
}

/// Reads the config file (or starts from defaults) and applies overrides.
/// An override replacing a different value from the file logs a warning.
pub fn resolve(path: Option<&Path>, overrides: &[Override]) -> Result<CliConfig, CliError> {
    let (mut value, from_file) = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Core(cer_core::Error::Io {
                path: p.to_path_buf(),
                source: e,
            }))?;
            let v: Value = serde_json::from_str(&text)
                .map_err(|e| CliError::config(format!("{}: {e}", p.display())))?;
            if v.get("schema_version").is_none() {
                return Err(CliError::config(format!("{}: missing schema_version", p.display())));
            }
            (v, true)
        }
        None => (serde_json::to_value(CliConfig::default()).expect("defaults serialize"), false),
    };
    if !value.is_object() {
        return Err(CliError::config("config must be a JSON object"));
    }
    for o in overrides {
        let previous = set_path(&mut value, &o.path, o.value.clone())?;
        if from_file {
            if let Some(prev) = previous {
                if prev != o.value {
                    warn!("{} overrides config value {} with {}", o.origin, prev, o.value);
                }
            }
        }
    }
    let cfg: CliConfig = serde_json::from_value(value).map_err(|e| CliError::config(format!("config: {e}")))?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(CliError::config(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            cfg.schema_version
        )));
    }
    cfg.train.validate().map_err(CliError::Core)?;
    cfg.synth.validate().map_err(CliError::Core)?;
    Ok(cfg)
}

/// Sets a dotted path, creating intermediate objects; returns the old value.
fn set_path(root: &mut Value, path: &str, value: Value) -> Result<Option<Value>, CliError> {
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::usage(format!("bad override path {path}")));
    }
    let mut cur = root;
    for part in &parts[..parts.len() - 1] {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| CliError::config(format!("override {path}: {part} is not an object")))?;
        cur = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
        if cur.is_null() {
            *cur = Value::Object(Default::default());
        }
    }
    let obj = cur
        .as_object_mut()
        .ok_or_else(|| CliError::config(format!("override {path}: parent is not an object")))?;
    Ok(obj.insert(parts[parts.len() - 1].to_string(), value))
}
