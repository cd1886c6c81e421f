//! Dataset directories: a `manifest.json` plus per-source CSV files in the
//! ingestion formats of [`crate::annotations`].
//!
//! ```text
//! <dir>/manifest.json
//! <dir>/<source>/features.csv
//! <dir>/<source>/gold_<dimension>.csv
//! <dir>/<source>/annotations_<dimension>.csv
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::annotations::{
    load_annotation_csv, load_feature_csv, load_gold_csv, write_annotation_csv, write_feature_csv, write_gold_csv,
    Dimension, PerDimension, Provenance, Segment,
};
use crate::error::{Error, Result};
use crate::synth::{AnnotatorProfile, SynthConfig, SyntheticCorpus};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceEntry {
    pub id: String,
    /// Paths relative to the dataset directory.
    pub features: String,
    #[serde(default)]
    pub gold: PerDimension<String>,
    #[serde(default)]
    pub annotations: PerDimension<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    pub rate_hz: f64,
    pub gold_provenance: Provenance,
    pub sources: Vec<SourceEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profiles: Option<PerDimension<Vec<AnnotatorProfile>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthConfig>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: Manifest,
    /// One aligned full-length recording per source, in manifest order.
    pub recordings: Vec<Segment>,
}

impl Dataset {
    pub fn source_ids(&self) -> Vec<String> {
        self.recordings.iter().map(|r| r.source_id.clone()).collect()
    }
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    if manifest.schema_version != MANIFEST_SCHEMA_VERSION {
        return Err(Error::config(format!(
            "manifest schema_version {} is not supported (expected {MANIFEST_SCHEMA_VERSION})",
            manifest.schema_version
        )));
    }
    Ok(manifest)
}

/// Loads every source and aligns its streams to the manifest rate.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let manifest = read_manifest(dir)?;
    let mut recordings = Vec::with_capacity(manifest.sources.len());
    for src in &manifest.sources {
        let features = load_feature_csv(dir.join(&src.features))?;
        let gold = src
            .gold
            .try_map(|d, p| Ok(load_gold_csv(dir.join(p), d, manifest.gold_provenance)?.value))?;
        let annotations = src
            .annotations
            .try_map(|d, p| load_annotation_csv(dir.join(p), d)?.value.into_matrix())?;
        recordings.push(Segment::aligned(&src.id, features, gold, annotations, manifest.rate_hz)?);
    }
    Ok(Dataset { manifest, recordings })
}

fn rel(source: &str, file: &str) -> String {
    format!("{source}/{file}")
}

/// Writes a synthetic corpus as a dataset directory.
pub fn write_synthetic_dataset(dir: impl AsRef<Path>, corpus: &SyntheticCorpus, cfg: &SynthConfig) -> Result<Manifest> {
    let dir = dir.as_ref();
    let mut sources = Vec::with_capacity(corpus.recordings.len());
    for rec in &corpus.recordings {
        let sub: PathBuf = dir.join(&rec.source_id);
        fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        write_feature_csv(sub.join("features.csv"), &rec.features)?;
        let mut entry = SourceEntry {
            id: rec.source_id.clone(),
            features: rel(&rec.source_id, "features.csv"),
            gold: PerDimension::default(),
            annotations: PerDimension::default(),
        };
        for d in Dimension::ALL {
            if let Some(g) = rec.gold.get(d) {
                let name = format!("gold_{d}.csv");
                write_gold_csv(sub.join(&name), g.rate_hz, &g.values)?;
                entry.gold.set(d, rel(&rec.source_id, &name));
            }
            if let Some(a) = rec.annotations.get(d) {
                let name = format!("annotations_{d}.csv");
                write_annotation_csv(sub.join(&name), a)?;
                entry.annotations.set(d, rel(&rec.source_id, &name));
            }
        }
        sources.push(entry);
    }
    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        rate_hz: cfg.rate_hz,
        gold_provenance: Provenance::IntendedEmotion,
        sources,
        profiles: Some(corpus.profiles.clone()),
        synth: Some(cfg.clone()),
    };
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
