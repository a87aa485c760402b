//! Hierarchical decomposition: multi-year series into 13-week chunks, weeks
//! into seven day means, days into four six-hour block means, plus min-max
//! scaling fitted on training data.
//!
//! Week and day indices count from the series start, which the generator
//! always places on a Monday at 00:00 UTC.

use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, LoadSeries, Stage};
use crate::error::{Error, Result};

pub const DAYS_PER_WEEK: usize = 7;
pub const WEEKS_PER_QUARTER: usize = 13;
pub const BLOCKS_PER_DAY: usize = 4;

/// Samples per day for a series, requiring the resolution to divide a
/// six-hour block evenly.
pub fn samples_per_day(series: &LoadSeries) -> Result<usize> {
    let res = series.resolution_s as usize;
    let block = 6 * 3600;
    if res == 0 || block % res != 0 {
        return Err(Error::Data(format!(
            "resolution {}s does not divide a 6-hour block",
            series.resolution_s
        )));
    }
    Ok(86_400 / res)
}

pub fn full_weeks(series: &LoadSeries) -> Result<usize> {
    Ok(series.len() / (samples_per_day(series)? * DAYS_PER_WEEK))
}

pub fn full_days(series: &LoadSeries) -> Result<usize> {
    Ok(series.len() / samples_per_day(series)?)
}

/// A 13-week slice of a longer series. The trailing slice is marked
/// `partial` when fewer than 13 weeks remain.
#[derive(Debug, Clone, PartialEq)]
pub struct Chunk {
    pub series: LoadSeries,
    pub partial: bool,
}

pub fn chunk_quarters(series: &LoadSeries) -> Result<Vec<Chunk>> {
    let spd = samples_per_day(series)?;
    let week = spd * DAYS_PER_WEEK;
    if series.len() < week {
        return Err(Error::Data(format!(
            "series {} covers {} samples, less than one week ({week})",
            series.line_id,
            series.len()
        )));
    }
    let quarter = week * WEEKS_PER_QUARTER;
    let chunks = series
        .values
        .chunks(quarter)
        .enumerate()
        .map(|(i, values)| Chunk {
            series: LoadSeries {
                line_id: series.line_id.clone(),
                start: series.timestamp(i * quarter),
                resolution_s: series.resolution_s,
                values: values.to_vec(),
            },
            partial: values.len() < quarter,
        })
        .collect();
    Ok(chunks)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Mean kW of each of the seven days of week `week_index`.
pub fn weekly_features(series: &LoadSeries, week_index: usize) -> Result<[f64; 7]> {
    let spd = samples_per_day(series)?;
    let week = spd * DAYS_PER_WEEK;
    let start = week_index * week;
    let end = start + week;
    if end > series.len() {
        return Err(Error::Data(format!(
            "week {week_index} of {} needs samples {start}..{end} but only {} exist (missing {})",
            series.line_id,
            series.len(),
            end - series.len().max(start),
        )));
    }
    let mut out = [0.0; 7];
    for (slot, day) in out.iter_mut().zip(series.values[start..end].chunks(spd)) {
        *slot = mean(day);
    }
    Ok(out)
}

/// Mean kW of each six-hour block of day `day_index`.
pub fn daily_features(series: &LoadSeries, day_index: usize) -> Result<[f64; 4]> {
    let spd = samples_per_day(series)?;
    let start = day_index * spd;
    let end = start + spd;
    if end > series.len() {
        return Err(Error::Data(format!(
            "day {day_index} of {} needs samples {start}..{end} but only {} exist",
            series.line_id,
            series.len()
        )));
    }
    let mut out = [0.0; 4];
    for (slot, block) in out
        .iter_mut()
        .zip(series.values[start..end].chunks(spd / BLOCKS_PER_DAY))
    {
        *slot = mean(block);
    }
    Ok(out)
}

/// Per-feature training minimum and maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub stage: Stage,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl NormStats {
    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.stage.dim();
        if self.min.len() != d || self.max.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: self.min.len().max(self.max.len()),
            });
        }
        if self.min.iter().zip(&self.max).any(|(lo, hi)| lo.is_nan() || hi.is_nan() || hi < lo) {
            return Err(Error::Data("normalization max below min".into()));
        }
        Ok(())
    }

    /// Scales one row. Degenerate features (max = min) map to 0; values
    /// outside the training range extend linearly beyond [0, 1].
    pub fn apply_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: row.len(),
            });
        }
        Ok(row
            .iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&v, (&lo, &hi))| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
            .collect())
    }
}

pub fn fit_norm(train: &Dataset) -> Result<NormStats> {
    if train.is_empty() {
        return Err(Error::Data("cannot fit normalization on an empty dataset".into()));
    }
    let d = train.dim();
    let mut min = vec![f64::INFINITY; d];
    let mut max = vec![f64::NEG_INFINITY; d];
    for row in &train.features {
        if row.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: row.len(),
            });
        }
        for j in 0..d {
            min[j] = min[j].min(row[j]);
            max[j] = max[j].max(row[j]);
        }
    }
    Ok(NormStats {
        stage: train.stage,
        min,
        max,
    })
}

pub fn apply_norm(stats: &NormStats, ds: &Dataset) -> Result<Dataset> {
    if stats.stage != ds.stage {
        return Err(Error::StageMismatch {
            expected: stats.stage.to_string(),
            got: ds.stage.to_string(),
        });
    }
    let features = ds
        .features
        .iter()
        .map(|r| stats.apply_row(r))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        features,
        ..ds.clone()
    })
}
