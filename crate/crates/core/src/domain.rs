//! Core vocabulary: electric lines, load series, label taxonomies, feature
//! vectors and labeled datasets.
//!
//! All values are immutable once constructed and can be shared freely
//! between threads.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{Read, Write};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Process equipment groups that an electric line can supply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Equipment {
    Immersion,
    Spray,
    Rinse,
    Oven,
    Pump,
    AshHouse,
}

impl Equipment {
    pub const ALL: [Equipment; 6] = [
        Equipment::Immersion,
        Equipment::Spray,
        Equipment::Rinse,
        Equipment::Oven,
        Equipment::Pump,
        Equipment::AshHouse,
    ];
}

/// One metered supply line and the equipment it feeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectricLine {
    pub id: String,
    pub equipment: Vec<Equipment>,
    pub base_load_kw: f64,
}

/// Mapping from metered lines to process equipment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessElectricityMap {
    pub version: String,
    pub lines: Vec<ElectricLine>,
}

impl ProcessElectricityMap {
    pub fn validate(&self) -> Result<()> {
        if self.lines.is_empty() {
            return Err(Error::Config("process-electricity map has no lines".into()));
        }
        let mut seen = HashSet::new();
        for line in &self.lines {
            if line.id.is_empty() {
                return Err(Error::Config("electric line with empty id".into()));
            }
            if !seen.insert(line.id.as_str()) {
                return Err(Error::Config(format!("duplicate line id {}", line.id)));
            }
            if line.equipment.is_empty() {
                return Err(Error::Config(format!("line {} has no equipment", line.id)));
            }
            if !(line.base_load_kw >= 0.0 && line.base_load_kw.is_finite()) {
                return Err(Error::Config(format!(
                    "line {} has invalid base load {}",
                    line.id, line.base_load_kw
                )));
            }
        }
        Ok(())
    }

    pub fn line(&self, id: &str) -> Option<&ElectricLine> {
        self.lines.iter().find(|l| l.id == id)
    }
}

impl Default for ProcessElectricityMap {
    /// Representative three-line pre-treatment / electro-dip section.
    fn default() -> Self {
        use Equipment::*;
        Self {
            version: "pted-synthetic-1".into(),
            lines: vec![
                ElectricLine {
                    id: "LINE-1".into(),
                    equipment: vec![Immersion, Pump],
                    base_load_kw: 410.0,
                },
                ElectricLine {
                    id: "LINE-2".into(),
                    equipment: vec![Oven, Rinse],
                    base_load_kw: 400.0,
                },
                ElectricLine {
                    id: "LINE-3".into(),
                    equipment: vec![Spray, AshHouse, Pump],
                    base_load_kw: 390.0,
                },
            ],
        }
    }
}

/// Timestamped kW readings of one line at a fixed resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadSeries {
    pub line_id: String,
    pub start: DateTime<Utc>,
    pub resolution_s: u32,
    pub values: Vec<f64>,
}

impl LoadSeries {
    pub fn new(
        line_id: impl Into<String>,
        start: DateTime<Utc>,
        resolution_s: u32,
        values: Vec<f64>,
    ) -> Result<Self> {
        let line_id = line_id.into();
        if resolution_s == 0 {
            return Err(Error::Data(format!("series {line_id}: resolution must be positive")));
        }
        if values.is_empty() {
            return Err(Error::Data(format!("series {line_id}: no readings")));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::Data(format!(
                "series {line_id}: reading {i} is {v}, expected a finite nonnegative kW value"
            )));
        }
        Ok(Self {
            line_id,
            start,
            resolution_s,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn timestamp(&self, index: usize) -> DateTime<Utc> {
        self.start + chrono::Duration::seconds(index as i64 * self.resolution_s as i64)
    }
}

/// Writes series as `timestamp,line_id,kw` rows, series after series.
pub fn write_series_csv<W: Write>(writer: W, series: &[LoadSeries]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["timestamp", "line_id", "kw"])?;
    for s in series {
        for (i, v) in s.values.iter().enumerate() {
            w.write_record([
                iso8601(s.timestamp(i)),
                s.line_id.clone(),
                format!("{v}"),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Parses `timestamp,line_id,kw` rows into one series per line, in order of
/// first appearance. Resolution is inferred from the first two readings of
/// each line and must stay constant.
pub fn read_series_csv<R: Read>(reader: R) -> Result<Vec<LoadSeries>> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["timestamp", "line_id", "kw"] {
        return Err(Error::Data(format!(
            "expected header timestamp,line_id,kw, found {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut order: Vec<String> = Vec::new();
    let mut rows: BTreeMap<String, Vec<(DateTime<Utc>, f64)>> = BTreeMap::new();
    for (n, rec) in r.records().enumerate() {
        let rec = rec?;
        let ts = DateTime::parse_from_rfc3339(&rec[0])
            .map_err(|e| Error::Data(format!("row {}: bad timestamp {:?}: {e}", n + 1, &rec[0])))?
            .with_timezone(&Utc);
        let line = rec[1].to_string();
        let kw: f64 = rec[2]
            .trim()
            .parse()
            .map_err(|e| Error::Data(format!("row {}: bad kw {:?}: {e}", n + 1, &rec[2])))?;
        if !rows.contains_key(&line) {
            order.push(line.clone());
        }
        rows.entry(line).or_default().push((ts, kw));
    }
    if order.is_empty() {
        return Err(Error::Data("series file contains no readings".into()));
    }
    let mut out = Vec::with_capacity(order.len());
    for line in order {
        let readings = &rows[&line];
        let resolution = if readings.len() > 1 {
            let step = (readings[1].0 - readings[0].0).num_seconds();
            if step <= 0 {
                return Err(Error::Data(format!("line {line}: timestamps not increasing")));
            }
            step
        } else {
            3600
        };
        for pair in readings.windows(2) {
            let step = (pair[1].0 - pair[0].0).num_seconds();
            if step <= 0 {
                return Err(Error::Data(format!(
                    "line {line}: timestamps not strictly increasing at {}",
                    iso8601(pair[1].0)
                )));
            }
            if step != resolution {
                return Err(Error::Data(format!(
                    "line {line}: irregular spacing at {} ({step}s, expected {resolution}s)",
                    iso8601(pair[1].0)
                )));
            }
        }
        let resolution = u32::try_from(resolution)
            .map_err(|_| Error::Data(format!("line {line}: resolution too large")))?;
        out.push(LoadSeries::new(
            line,
            readings[0].0,
            resolution,
            readings.iter().map(|(_, v)| *v).collect(),
        )?);
    }
    Ok(out)
}

pub fn iso8601(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

/// Which temporal scale a dataset or model operates at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Weekly,
    Daily,
}

impl Stage {
    /// Feature dimensionality: seven day means per week, four block means per day.
    pub fn dim(self) -> usize {
        match self {
            Stage::Weekly => 7,
            Stage::Daily => 4,
        }
    }

    pub fn class_count(self) -> usize {
        match self {
            Stage::Weekly => WeeklyLabel::ALL.len(),
            Stage::Daily => DailyLabel::ALL.len(),
        }
    }

    pub fn class_names(self) -> Vec<String> {
        match self {
            Stage::Weekly => WeeklyLabel::ALL.iter().map(|l| l.name().to_string()).collect(),
            Stage::Daily => DailyLabel::ALL.iter().map(|l| l.name().to_string()).collect(),
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Weekly => "weekly",
            Stage::Daily => "daily",
        })
    }
}

impl std::str::FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weekly" => Ok(Stage::Weekly),
            "daily" => Ok(Stage::Daily),
            other => Err(Error::Config(format!("unknown stage {other:?}"))),
        }
    }
}

/// Stage-one label for a whole week.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum WeeklyLabel {
    Normal,
    Higher,
    Anomaly,
    StartIssues,
}

impl WeeklyLabel {
    pub const ALL: [WeeklyLabel; 4] = [
        WeeklyLabel::Normal,
        WeeklyLabel::Higher,
        WeeklyLabel::Anomaly,
        WeeklyLabel::StartIssues,
    ];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Result<Self> {
        Self::ALL.get(code).copied().ok_or(Error::InvalidLabel {
            kind: "weekly label",
            code,
            count: Self::ALL.len(),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            WeeklyLabel::Normal => "normal",
            WeeklyLabel::Higher => "higher",
            WeeklyLabel::Anomaly => "anomaly",
            WeeklyLabel::StartIssues => "start_issues",
        }
    }
}

/// Stage-two label for a single day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DailyLabel {
    Production,
    MaintenanceStartup,
    Shutdown,
    Maintenance,
    Anomaly,
}

impl DailyLabel {
    pub const ALL: [DailyLabel; 5] = [
        DailyLabel::Production,
        DailyLabel::MaintenanceStartup,
        DailyLabel::Shutdown,
        DailyLabel::Maintenance,
        DailyLabel::Anomaly,
    ];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Result<Self> {
        Self::ALL.get(code).copied().ok_or(Error::InvalidLabel {
            kind: "daily label",
            code,
            count: Self::ALL.len(),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            DailyLabel::Production => "production",
            DailyLabel::MaintenanceStartup => "maintenance_startup",
            DailyLabel::Shutdown => "shutdown",
            DailyLabel::Maintenance => "maintenance",
            DailyLabel::Anomaly => "anomaly",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StageLabel {
    Weekly(WeeklyLabel),
    Daily(DailyLabel),
}

impl StageLabel {
    pub fn stage(self) -> Stage {
        match self {
            StageLabel::Weekly(_) => Stage::Weekly,
            StageLabel::Daily(_) => Stage::Daily,
        }
    }

    pub fn code(self) -> usize {
        match self {
            StageLabel::Weekly(l) => l.code(),
            StageLabel::Daily(l) => l.code(),
        }
    }
}

/// Where a feature window came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Origin {
    pub line_id: String,
    pub start: DateTime<Utc>,
}

/// One labeled window: 7 day means (weekly) or 4 block means (daily).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    values: Vec<f64>,
    label: StageLabel,
    origin: Origin,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>, label: StageLabel, origin: Origin) -> Result<Self> {
        let expected = label.stage().dim();
        if values.len() != expected {
            return Err(Error::Dimension {
                expected,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("feature vector has non-finite entries".into()));
        }
        Ok(Self {
            values,
            label,
            origin,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> StageLabel {
        self.label
    }

    pub fn origin(&self) -> &Origin {
        &self.origin
    }
}

/// Where a dataset came from: generator seed and a digest of its config.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub config_hash: String,
}

/// Labeled feature matrix for one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub stage: Stage,
    pub class_names: Vec<String>,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub provenance: Provenance,
}

/// A broken dataset invariant, located by row when it concerns one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub row: Option<usize>,
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.row {
            Some(row) => write!(f, "row {row}, {}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

/// Lists every broken invariant of `ds`; an empty list means the dataset is
/// well formed.
pub fn validate_dataset(ds: &Dataset) -> Vec<Violation> {
    let mut out = Vec::new();
    let dim = ds.stage.dim();
    let classes = ds.stage.class_count();

    if ds.class_names.len() != classes {
        out.push(Violation {
            row: None,
            field: "class_names",
            message: format!(
                "{} stage has {classes} classes, found {} names",
                ds.stage,
                ds.class_names.len()
            ),
        });
    }
    let mut seen = HashSet::new();
    for name in &ds.class_names {
        if !seen.insert(name) {
            out.push(Violation {
                row: None,
                field: "class_names",
                message: format!("duplicate class name {name:?}"),
            });
        }
    }
    if ds.features.len() != ds.labels.len() {
        out.push(Violation {
            row: None,
            field: "labels",
            message: format!(
                "{} feature rows but {} labels",
                ds.features.len(),
                ds.labels.len()
            ),
        });
    }
    for (i, row) in ds.features.iter().enumerate() {
        if row.len() != dim {
            out.push(Violation {
                row: Some(i),
                field: "features",
                message: format!("length {} but {} stage requires {dim}", row.len(), ds.stage),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            out.push(Violation {
                row: Some(i),
                field: "features",
                message: "non-finite entry".into(),
            });
        }
    }
    for (i, &label) in ds.labels.iter().enumerate() {
        if label >= classes {
            out.push(Violation {
                row: Some(i),
                field: "labels",
                message: format!("label {label} outside 0..{classes}"),
            });
        }
    }
    out
}

impl Dataset {
    /// Empty dataset for `stage` with the canonical class names.
    pub fn empty(stage: Stage, provenance: Provenance) -> Self {
        Self {
            stage,
            class_names: stage.class_names(),
            features: Vec::new(),
            labels: Vec::new(),
            provenance,
        }
    }

    pub fn from_vectors(
        stage: Stage,
        vectors: &[FeatureVector],
        provenance: Provenance,
    ) -> Result<Self> {
        let mut ds = Self::empty(stage, provenance);
        for v in vectors {
            if v.label().stage() != stage {
                return Err(Error::StageMismatch {
                    expected: stage.to_string(),
                    got: v.label().stage().to_string(),
                });
            }
            ds.features.push(v.values().to_vec());
            ds.labels.push(v.label().code());
        }
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.stage.dim()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Returns an error describing the first few violations, if any.
    pub fn check(&self) -> Result<()> {
        let v = validate_dataset(self);
        if v.is_empty() {
            return Ok(());
        }
        let shown: Vec<String> = v.iter().take(5).map(|x| x.to_string()).collect();
        let more = if v.len() > 5 {
            format!(" (+{} more)", v.len() - 5)
        } else {
            String::new()
        };
        // Wrong row width is the one violation callers care to tell apart.
        if let Some(row) = self.features.iter().find(|r| r.len() != self.dim()) {
            if v.iter().all(|x| x.field == "features") {
                return Err(Error::Dimension {
                    expected: self.dim(),
                    got: row.len(),
                });
            }
        }
        Err(Error::Data(format!("invalid dataset: {}{more}", shown.join("; "))))
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            if l < counts.len() {
                counts[l] += 1;
            }
        }
        counts
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            stage: self.stage,
            class_names: self.class_names.clone(),
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ds: Self = serde_json::from_str(s)?;
        ds.check()?;
        Ok(ds)
    }
}
