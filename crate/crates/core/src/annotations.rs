//! Continuous annotation data model: per-annotator tracks, the frames x
//! annotators matrix fed to the consensus network, gold-standard traces,
//! per-frame feature sequences, and sliding-window segmentation.
//!
//! All values live in `[-1, 1]`. Ingestion clamps out-of-range values and
//! reports how many it touched. Resampling is linear with held endpoints.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use log::warn;
use ndarray::{s, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Annotation rate used by both reference corpora.
pub const DEFAULT_RATE_HZ: f64 = 25.0;

/// Affect dimension carried by a track.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Arousal,
    Valence,
}

impl Dimension {
    /// Fixed order used by dual-head models and reports.
    pub const ALL: [Dimension; 2] = [Dimension::Arousal, Dimension::Valence];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Arousal => "arousal",
            Dimension::Valence => "valence",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Dimension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "arousal" => Ok(Dimension::Arousal),
            "valence" => Ok(Dimension::Valence),
            other => Err(Error::config(format!("unknown dimension `{other}`"))),
        }
    }
}

/// One optional value per affect dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound(deserialize = "T: Deserialize<'de>"))]
pub struct PerDimension<T> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arousal: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valence: Option<T>,
}

impl<T> Default for PerDimension<T> {
    fn default() -> Self {
        Self {
            arousal: None,
            valence: None,
        }
    }
}

impl<T> PerDimension<T> {
    pub fn get(&self, dim: Dimension) -> Option<&T> {
        match dim {
            Dimension::Arousal => self.arousal.as_ref(),
            Dimension::Valence => self.valence.as_ref(),
        }
    }

    pub fn get_mut(&mut self, dim: Dimension) -> Option<&mut T> {
        match dim {
            Dimension::Arousal => self.arousal.as_mut(),
            Dimension::Valence => self.valence.as_mut(),
        }
    }

    pub fn set(&mut self, dim: Dimension, value: T) {
        match dim {
            Dimension::Arousal => self.arousal = Some(value),
            Dimension::Valence => self.valence = Some(value),
        }
    }

    /// Present entries in `Dimension::ALL` order.
    pub fn iter(&self) -> impl Iterator<Item = (Dimension, &T)> {
        Dimension::ALL
            .into_iter()
            .filter_map(move |d| self.get(d).map(|v| (d, v)))
    }

    pub fn map<U>(&self, mut f: impl FnMut(Dimension, &T) -> U) -> PerDimension<U> {
        PerDimension {
            arousal: self.arousal.as_ref().map(|v| f(Dimension::Arousal, v)),
            valence: self.valence.as_ref().map(|v| f(Dimension::Valence, v)),
        }
    }

    pub fn try_map<U>(&self, mut f: impl FnMut(Dimension, &T) -> Result<U>) -> Result<PerDimension<U>> {
        Ok(PerDimension {
            arousal: self.arousal.as_ref().map(|v| f(Dimension::Arousal, v)).transpose()?,
            valence: self.valence.as_ref().map(|v| f(Dimension::Valence, v)).transpose()?,
        })
    }
}

/// Clamps every value into `[-1, 1]` and returns how many were changed.
pub fn clamp_unit(values: &mut [f64]) -> usize {
    let mut clamped = 0;
    for v in values.iter_mut() {
        if *v > 1.0 || *v < -1.0 {
            *v = v.clamp(-1.0, 1.0);
            clamped += 1;
        }
    }
    clamped
}

fn check_rate(rate_hz: f64) -> Result<()> {
    if !(rate_hz.is_finite() && rate_hz > 0.0) {
        return Err(Error::contract(format!("rate_hz must be positive, got {rate_hz}")));
    }
    Ok(())
}

fn check_unit_values(values: &[f64]) -> Result<()> {
    if let Some(v) = values.iter().find(|v| !v.is_finite() || v.abs() > 1.0) {
        return Err(Error::contract(format!("annotation value {v} outside [-1, 1]")));
    }
    Ok(())
}

/// A single annotator's trace for one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationTrack {
    pub annotator_id: String,
    pub dimension: Dimension,
    pub rate_hz: f64,
    pub values: Vec<f64>,
}

impl AnnotationTrack {
    pub fn new(
        annotator_id: impl Into<String>,
        dimension: Dimension,
        rate_hz: f64,
        values: Vec<f64>,
    ) -> Result<Self> {
        check_rate(rate_hz)?;
        if values.is_empty() {
            return Err(Error::contract("annotation track has no values"));
        }
        check_unit_values(&values)?;
        Ok(Self {
            annotator_id: annotator_id.into(),
            dimension,
            rate_hz,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Frames x annotators block of annotation values for one dimension.
///
/// Columns are always sorted lexicographically by annotator id.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationMatrix {
    dimension: Dimension,
    rate_hz: f64,
    annotator_ids: Vec<String>,
    data: Array2<f64>,
}

impl AnnotationMatrix {
    /// Builds a matrix from `(id, column)` pairs, sorting columns by id.
    pub fn from_columns(
        dimension: Dimension,
        rate_hz: f64,
        mut columns: Vec<(String, Vec<f64>)>,
    ) -> Result<Self> {
        check_rate(rate_hz)?;
        if columns.is_empty() {
            return Err(Error::contract("annotation matrix needs at least one annotator"));
        }
        columns.sort_by(|a, b| a.0.cmp(&b.0));
        if columns.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::contract("duplicate annotator id"));
        }
        let frames = columns[0].1.len();
        if frames == 0 {
            return Err(Error::contract("annotation matrix has no frames"));
        }
        if let Some((id, col)) = columns.iter().find(|(_, c)| c.len() != frames) {
            return Err(Error::contract(format!(
                "annotator `{id}` has {} frames, expected {frames}",
                col.len()
            )));
        }
        let mut data = Array2::zeros((frames, columns.len()));
        for (u, (_, col)) in columns.iter().enumerate() {
            check_unit_values(col)?;
            data.column_mut(u).assign(&ArrayView1::from(col.as_slice()));
        }
        Ok(Self {
            dimension,
            rate_hz,
            annotator_ids: columns.into_iter().map(|(id, _)| id).collect(),
            data,
        })
    }

    /// Stacks tracks that share a length and rate.
    pub fn from_tracks(tracks: Vec<AnnotationTrack>) -> Result<Self> {
        let first = tracks
            .first()
            .ok_or_else(|| Error::contract("annotation matrix needs at least one track"))?;
        let (dimension, rate_hz) = (first.dimension, first.rate_hz);
        for t in &tracks {
            if t.dimension != dimension {
                return Err(Error::contract("tracks mix dimensions"));
            }
            if t.rate_hz != rate_hz {
                return Err(Error::contract(format!(
                    "track `{}` at {} Hz, expected {rate_hz} Hz",
                    t.annotator_id, t.rate_hz
                )));
            }
        }
        Self::from_columns(
            dimension,
            rate_hz,
            tracks.into_iter().map(|t| (t.annotator_id, t.values)).collect(),
        )
    }

    /// Wraps an existing array. `ids` must already be sorted.
    pub fn from_array(
        dimension: Dimension,
        rate_hz: f64,
        annotator_ids: Vec<String>,
        data: Array2<f64>,
    ) -> Result<Self> {
        let cols = annotator_ids.into_iter().zip(data.columns().into_iter().map(|c| c.to_vec())).collect();
        Self::from_columns(dimension, rate_hz, cols)
    }

    pub fn dimension(&self) -> Dimension {
        self.dimension
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    /// M
    pub fn frames(&self) -> usize {
        self.data.nrows()
    }

    /// U
    pub fn annotators(&self) -> usize {
        self.data.ncols()
    }

    pub fn annotator_ids(&self) -> &[String] {
        &self.annotator_ids
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn column(&self, u: usize) -> Vec<f64> {
        self.data.column(u).to_vec()
    }

    pub fn slice(&self, start: usize, len: usize) -> AnnotationMatrix {
        AnnotationMatrix {
            dimension: self.dimension,
            rate_hz: self.rate_hz,
            annotator_ids: self.annotator_ids.clone(),
            data: self.data.slice(s![start..start + len, ..]).to_owned(),
        }
    }

    pub fn tracks(&self) -> Vec<AnnotationTrack> {
        self.annotator_ids
            .iter()
            .enumerate()
            .map(|(u, id)| AnnotationTrack {
                annotator_id: id.clone(),
                dimension: self.dimension,
                rate_hz: self.rate_hz,
                values: self.column(u),
            })
            .collect()
    }

    pub fn resample(&self, target_hz: f64) -> Result<AnnotationMatrix> {
        let cols = self
            .annotator_ids
            .iter()
            .enumerate()
            .map(|(u, id)| Ok((id.clone(), resample_values(&self.column(u), self.rate_hz, target_hz)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_columns(self.dimension, target_hz, cols)
    }

    fn truncate(&mut self, frames: usize) {
        self.data = self.data.slice(s![..frames, ..]).to_owned();
    }
}

/// Where a gold-standard trace came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ExternalGold,
    IntendedEmotion,
    Aggregated,
}

/// The single reference trace `y` used as ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct GoldStandardTrack {
    pub dimension: Dimension,
    pub rate_hz: f64,
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

impl GoldStandardTrack {
    pub fn new(dimension: Dimension, rate_hz: f64, values: Vec<f64>, provenance: Provenance) -> Result<Self> {
        check_rate(rate_hz)?;
        if values.is_empty() {
            return Err(Error::contract("gold standard has no values"));
        }
        check_unit_values(&values)?;
        Ok(Self {
            dimension,
            rate_hz,
            values,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn slice(&self, start: usize, len: usize) -> GoldStandardTrack {
        GoldStandardTrack {
            values: self.values[start..start + len].to_vec(),
            ..self.clone()
        }
    }

    pub fn resample(&self, target_hz: f64) -> Result<GoldStandardTrack> {
        Ok(GoldStandardTrack {
            values: resample_values(&self.values, self.rate_hz, target_hz)?,
            rate_hz: target_hz,
            ..self.clone()
        })
    }
}

/// Per-frame feature vectors, frames x dim.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    pub rate_hz: f64,
    pub data: Array2<f64>,
}

impl FeatureSequence {
    pub fn new(rate_hz: f64, data: Array2<f64>) -> Result<Self> {
        check_rate(rate_hz)?;
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::contract("feature sequence must be non-empty"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("feature sequence contains non-finite values"));
        }
        Ok(Self { rate_hz, data })
    }

    pub fn frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn slice(&self, start: usize, len: usize) -> FeatureSequence {
        FeatureSequence {
            rate_hz: self.rate_hz,
            data: self.data.slice(s![start..start + len, ..]).to_owned(),
        }
    }

    pub fn resample(&self, target_hz: f64) -> Result<FeatureSequence> {
        let cols = self
            .data
            .columns()
            .into_iter()
            .map(|c| resample_values(&c.to_vec(), self.rate_hz, target_hz))
            .collect::<Result<Vec<_>>>()?;
        let frames = cols[0].len();
        let mut data = Array2::zeros((frames, cols.len()));
        for (j, c) in cols.iter().enumerate() {
            data.column_mut(j).assign(&ArrayView1::from(c.as_slice()));
        }
        Ok(FeatureSequence { rate_hz: target_hz, data })
    }
}

/// Sliding-window length and hop, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub window_s: f64,
    pub shift_s: f64,
}

impl WindowSpec {
    /// 3 s windows, 0.4 s hop (conversational speech corpus).
    pub const RECOLA: WindowSpec = WindowSpec {
        window_s: 3.0,
        shift_s: 0.4,
    };
    /// 5 s windows, 3 s hop (film corpus).
    pub const COGNIMUSE: WindowSpec = WindowSpec {
        window_s: 5.0,
        shift_s: 3.0,
    };

    /// Window and hop in frames at `rate_hz`.
    pub fn frames(&self, rate_hz: f64) -> Result<(usize, usize)> {
        check_rate(rate_hz)?;
        if !(self.shift_s > 0.0 && self.window_s >= self.shift_s) {
            return Err(Error::contract(format!(
                "window spec needs window_s >= shift_s > 0, got {}/{}",
                self.window_s, self.shift_s
            )));
        }
        let w = (self.window_s * rate_hz).round();
        let s = (self.shift_s * rate_hz).round();
        if s < 1.0 || w < 1.0 {
            return Err(Error::contract("window or shift rounds to zero frames"));
        }
        Ok((w as usize, s as usize))
    }
}

/// Number of full windows of `window` frames at stride `shift` in `total` frames.
pub fn window_count(total: usize, window: usize, shift: usize) -> usize {
    if total < window || shift == 0 {
        0
    } else {
        (total - window) / shift + 1
    }
}

/// Aligned features, gold traces, and annotator matrices over one frame range.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub source_id: String,
    pub start_frame: usize,
    pub features: FeatureSequence,
    pub gold: PerDimension<GoldStandardTrack>,
    pub annotations: PerDimension<AnnotationMatrix>,
}

impl Segment {
    pub fn new(
        source_id: impl Into<String>,
        start_frame: usize,
        features: FeatureSequence,
        gold: PerDimension<GoldStandardTrack>,
        annotations: PerDimension<AnnotationMatrix>,
    ) -> Result<Self> {
        let frames = features.frames();
        for (d, g) in gold.iter() {
            if g.len() != frames {
                return Err(Error::contract(format!(
                    "{d} gold has {} frames, features have {frames}",
                    g.len()
                )));
            }
        }
        for (d, a) in annotations.iter() {
            if a.frames() != frames {
                return Err(Error::contract(format!(
                    "{d} annotations have {} frames, features have {frames}",
                    a.frames()
                )));
            }
        }
        Ok(Self {
            source_id: source_id.into(),
            start_frame,
            features,
            gold,
            annotations,
        })
    }

    /// Resamples every stream to `rate_hz` and truncates to the shortest.
    pub fn aligned(
        source_id: impl Into<String>,
        features: FeatureSequence,
        gold: PerDimension<GoldStandardTrack>,
        annotations: PerDimension<AnnotationMatrix>,
        rate_hz: f64,
    ) -> Result<Self> {
        let source_id = source_id.into();
        let resample = |r: f64| (r - rate_hz).abs() > 1e-9;
        let mut features = if resample(features.rate_hz) {
            features.resample(rate_hz)?
        } else {
            features
        };
        let mut gold = gold.try_map(|_, g| if resample(g.rate_hz) { g.resample(rate_hz) } else { Ok(g.clone()) })?;
        let mut annotations =
            annotations.try_map(|_, a| if resample(a.rate_hz) { a.resample(rate_hz) } else { Ok(a.clone()) })?;

        let mut lens = vec![features.frames()];
        lens.extend(gold.iter().map(|(_, g)| g.len()));
        lens.extend(annotations.iter().map(|(_, a)| a.frames()));
        let frames = *lens.iter().min().unwrap();
        if lens.iter().any(|&l| l != frames) {
            warn!("{source_id}: stream lengths {lens:?} differ, truncating to {frames} frames");
            features = features.slice(0, frames);
            for d in Dimension::ALL {
                if let Some(g) = gold.get_mut(d) {
                    g.values.truncate(frames);
                }
                if let Some(a) = annotations.get_mut(d) {
                    a.truncate(frames);
                }
            }
        }
        Segment::new(source_id, 0, features, gold, annotations)
    }

    pub fn frames(&self) -> usize {
        self.features.frames()
    }

    pub fn slice(&self, start: usize, len: usize) -> Segment {
        Segment {
            source_id: self.source_id.clone(),
            start_frame: self.start_frame + start,
            features: self.features.slice(start, len),
            gold: self.gold.map(|_, g| g.slice(start, len)),
            annotations: self.annotations.map(|_, a| a.slice(start, len)),
        }
    }
}

/// Cuts an aligned recording into full windows; the trailing partial window
/// is dropped. A recording shorter than one window yields no segments.
pub fn windowize(source: &Segment, spec: &WindowSpec) -> Result<Vec<Segment>> {
    let (w, s) = spec.frames(source.features.rate_hz)?;
    let total = source.frames();
    let n = window_count(total, w, s);
    if n == 0 {
        warn!(
            "{}: {total} frames is shorter than one {w}-frame window",
            source.source_id
        );
    }
    Ok((0..n).map(|k| source.slice(k * s, w)).collect())
}

/// Linear interpolation onto a `target_hz` grid starting at t = 0.
///
/// The output covers the input duration, `floor(duration * target_hz) + 1`
/// samples; positions past the last input sample hold the last value.
pub fn resample_values(values: &[f64], source_hz: f64, target_hz: f64) -> Result<Vec<f64>> {
    check_rate(source_hz)?;
    check_rate(target_hz)?;
    if values.len() < 2 {
        return Err(Error::Degenerate(format!(
            "resampling needs at least 2 samples, got {}",
            values.len()
        )));
    }
    if (source_hz - target_hz).abs() < 1e-12 {
        return Ok(values.to_vec());
    }
    let last = values.len() - 1;
    let duration = last as f64 / source_hz;
    let out_len = (duration * target_hz + 1e-9).floor() as usize + 1;
    Ok((0..out_len)
        .map(|k| {
            let pos = k as f64 / target_hz * source_hz;
            let i = pos.floor() as usize;
            if i >= last {
                values[last]
            } else {
                let frac = pos - i as f64;
                values[i] + (values[i + 1] - values[i]) * frac
            }
        })
        .collect())
}

pub fn resample(track: &AnnotationTrack, target_hz: f64) -> Result<AnnotationTrack> {
    Ok(AnnotationTrack {
        values: resample_values(&track.values, track.rate_hz, target_hz)?,
        rate_hz: target_hz,
        ..track.clone()
    })
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

/// Result of reading annotations: one track (long format, single annotator)
/// or a matrix (wide format, or long format with several annotators).
#[derive(Debug, Clone, PartialEq)]
pub enum Annotations {
    Track(AnnotationTrack),
    Matrix(AnnotationMatrix),
}

impl Annotations {
    pub fn into_matrix(self) -> Result<AnnotationMatrix> {
        match self {
            Annotations::Matrix(m) => Ok(m),
            Annotations::Track(t) => AnnotationMatrix::from_tracks(vec![t]),
        }
    }
}

/// A parsed value together with the number of values clamped into range.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded<T> {
    pub value: T,
    pub clamped: usize,
}

struct Table {
    header: Vec<String>,
    rows: Vec<(u64, Vec<String>)>,
}

fn read_table(path: &Path) -> Result<Table> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let structural = |message: String| Error::Structure {
        path: path.to_path_buf(),
        message,
    };
    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let fields: Vec<String> = rec.iter().map(|s| s.trim_start_matches('\u{feff}').to_string()).collect();
        if fields.iter().all(|f| f.is_empty()) {
            continue;
        }
        match &header {
            None => header = Some(fields),
            Some(h) => {
                if fields.len() != h.len() {
                    return Err(structural(format!(
                        "line {line}: {} columns, header has {}",
                        fields.len(),
                        h.len()
                    )));
                }
                rows.push((line, fields));
            }
        }
    }
    let header = header.ok_or_else(|| structural("file is empty".into()))?;
    if header.first().map(String::as_str) != Some("time") {
        return Err(structural("first column must be `time`".into()));
    }
    if rows.is_empty() {
        return Err(structural("no data rows".into()));
    }
    Ok(Table { header, rows })
}

fn parse_num(path: &Path, line: u64, field: &str) -> Result<f64> {
    field
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("cannot parse `{field}` as a number"),
        })
}

/// Infers the sampling rate from evenly spaced timestamps.
fn infer_rate(path: &Path, times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Ok(DEFAULT_RATE_HZ);
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Structure {
            path: path.to_path_buf(),
            message: "time column must be strictly increasing".into(),
        });
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    Ok((1e6 / dt).round() / 1e6)
}

/// Reads a wide (`time,<id1>,<id2>,...`) or long (`time,annotator,value`)
/// annotation CSV.
pub fn load_annotation_csv(path: impl AsRef<Path>, dimension: Dimension) -> Result<Loaded<Annotations>> {
    let path = path.as_ref();
    let table = read_table(path)?;
    let long = table.header == ["time", "annotator", "value"];
    let mut clamped = 0;
    if long {
        let mut per: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for (line, row) in &table.rows {
            let t = parse_num(path, *line, &row[0])?;
            let v = parse_num(path, *line, &row[2])?;
            let e = per.entry(row[1].clone()).or_default();
            e.0.push(t);
            e.1.push(v);
        }
        let mut tracks = Vec::with_capacity(per.len());
        let mut rate = None;
        for (id, (times, mut values)) in per {
            let r = infer_rate(path, &times)?;
            if rate.is_some_and(|prev| prev != r) {
                return Err(Error::Structure {
                    path: path.to_path_buf(),
                    message: format!("annotator `{id}` sampled at {r} Hz, others differ"),
                });
            }
            rate = Some(r);
            clamped += clamp_unit(&mut values);
            tracks.push(AnnotationTrack::new(id, dimension, r, values)?);
        }
        if clamped > 0 {
            warn!("{}: clamped {clamped} values into [-1, 1]", path.display());
        }
        let value = if tracks.len() == 1 {
            Annotations::Track(tracks.pop().unwrap())
        } else {
            let frames = tracks[0].len();
            if tracks.iter().any(|t| t.len() != frames) {
                return Err(Error::Structure {
                    path: path.to_path_buf(),
                    message: "annotators have different track lengths".into(),
                });
            }
            Annotations::Matrix(AnnotationMatrix::from_tracks(tracks)?)
        };
        return Ok(Loaded { value, clamped });
    }

    let ids: Vec<String> = table.header[1..].to_vec();
    if ids.is_empty() {
        return Err(Error::Structure {
            path: path.to_path_buf(),
            message: "no annotator columns".into(),
        });
    }
    if ids.iter().collect::<BTreeSet<_>>().len() != ids.len() {
        return Err(Error::Structure {
            path: path.to_path_buf(),
            message: "duplicate annotator column".into(),
        });
    }
    let mut times = Vec::with_capacity(table.rows.len());
    let mut cols = vec![Vec::with_capacity(table.rows.len()); ids.len()];
    for (line, row) in &table.rows {
        times.push(parse_num(path, *line, &row[0])?);
        for (u, field) in row[1..].iter().enumerate() {
            cols[u].push(parse_num(path, *line, field)?);
        }
    }
    for c in cols.iter_mut() {
        clamped += clamp_unit(c);
    }
    if clamped > 0 {
        warn!("{}: clamped {clamped} values into [-1, 1]", path.display());
    }
    let rate = infer_rate(path, &times)?;
    let matrix = AnnotationMatrix::from_columns(dimension, rate, ids.into_iter().zip(cols).collect())?;
    Ok(Loaded {
        value: Annotations::Matrix(matrix),
        clamped,
    })
}

/// Reads a `time,value` gold-standard CSV.
pub fn load_gold_csv(
    path: impl AsRef<Path>,
    dimension: Dimension,
    provenance: Provenance,
) -> Result<Loaded<GoldStandardTrack>> {
    let path = path.as_ref();
    let table = read_table(path)?;
    if table.header != ["time", "value"] {
        return Err(Error::Structure {
            path: path.to_path_buf(),
            message: "gold standard header must be `time,value`".into(),
        });
    }
    let mut times = Vec::with_capacity(table.rows.len());
    let mut values = Vec::with_capacity(table.rows.len());
    for (line, row) in &table.rows {
        times.push(parse_num(path, *line, &row[0])?);
        values.push(parse_num(path, *line, &row[1])?);
    }
    let clamped = clamp_unit(&mut values);
    if clamped > 0 {
        warn!("{}: clamped {clamped} values into [-1, 1]", path.display());
    }
    let rate = infer_rate(path, &times)?;
    Ok(Loaded {
        value: GoldStandardTrack::new(dimension, rate, values, provenance)?,
        clamped,
    })
}

/// Reads a `time,f0,f1,...` feature CSV.
pub fn load_feature_csv(path: impl AsRef<Path>) -> Result<FeatureSequence> {
    let path = path.as_ref();
    let table = read_table(path)?;
    let dim = table.header.len() - 1;
    for (j, name) in table.header[1..].iter().enumerate() {
        if *name != format!("f{j}") {
            return Err(Error::Structure {
                path: path.to_path_buf(),
                message: format!("feature column {j} must be named `f{j}`, got `{name}`"),
            });
        }
    }
    if dim == 0 {
        return Err(Error::Structure {
            path: path.to_path_buf(),
            message: "no feature columns".into(),
        });
    }
    let mut times = Vec::with_capacity(table.rows.len());
    let mut data = Array2::zeros((table.rows.len(), dim));
    for (i, (line, row)) in table.rows.iter().enumerate() {
        times.push(parse_num(path, *line, &row[0])?);
        for (j, field) in row[1..].iter().enumerate() {
            data[[i, j]] = parse_num(path, *line, field)?;
        }
    }
    FeatureSequence::new(infer_rate(path, &times)?, data)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Writes `time,<names...>` rows, one per frame. `columns` are frame-major
/// accessors returning the value of column `j` at frame `i`.
pub fn write_time_series(
    path: impl AsRef<Path>,
    rate_hz: f64,
    names: &[String],
    frames: usize,
    value: impl Fn(usize, usize) -> f64,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    write!(out, "time").map_err(io)?;
    for n in names {
        write!(out, ",{n}").map_err(io)?;
    }
    writeln!(out).map_err(io)?;
    for i in 0..frames {
        write!(out, "{:.6}", i as f64 / rate_hz).map_err(io)?;
        for j in 0..names.len() {
            write!(out, ",{:.6}", value(i, j)).map_err(io)?;
        }
        writeln!(out).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Writes a wide annotation CSV.
pub fn write_annotation_csv(path: impl AsRef<Path>, matrix: &AnnotationMatrix) -> Result<()> {
    write_time_series(path, matrix.rate_hz, &matrix.annotator_ids, matrix.frames(), |i, j| {
        matrix.data[[i, j]]
    })
}

/// Writes a `time,value` trace.
pub fn write_gold_csv(path: impl AsRef<Path>, rate_hz: f64, values: &[f64]) -> Result<()> {
    write_time_series(path, rate_hz, &["value".to_string()], values.len(), |i, _| values[i])
}

pub fn write_feature_csv(path: impl AsRef<Path>, features: &FeatureSequence) -> Result<()> {
    let names: Vec<String> = (0..features.dim()).map(|j| format!("f{j}")).collect();
    write_time_series(path, features.rate_hz, &names, features.frames(), |i, j| features.data[[i, j]])
}
