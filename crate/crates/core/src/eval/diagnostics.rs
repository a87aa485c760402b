use serde::{Deserialize, Serialize};

use crate::decompose::{daily_features, full_weeks, samples_per_day, weekly_features, DAYS_PER_WEEK};
use crate::domain::{iso8601, LoadSeries, Stage, WeeklyLabel};
use crate::error::{Error, Result};
use crate::models::{predict, ModelArtifact, TrainProvenance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayDiagnosis {
    /// 0 = first day of the week.
    pub day: usize,
    pub start: String,
    pub label: String,
    pub code: usize,
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekDiagnosis {
    pub week: usize,
    pub start: String,
    pub label: String,
    pub code: usize,
    pub probabilities: Vec<f64>,
    pub flagged: bool,
    /// Seven entries for flagged weeks, empty otherwise.
    pub days: Vec<DayDiagnosis>,
}

/// Stage-one labels for every whole week of a series, with stage-two day
/// labels for each week that is not classified normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub line_id: String,
    pub weeks: Vec<WeekDiagnosis>,
    pub warnings: Vec<String>,
    pub weekly_model: TrainProvenance,
    pub daily_model: TrainProvenance,
}

impl DiagnosticReport {
    pub fn flagged(&self) -> impl Iterator<Item = &WeekDiagnosis> {
        self.weeks.iter().filter(|w| w.flagged)
    }

    /// Fixed-width text table: one line per week, indented day lines under
    /// flagged weeks.
    pub fn table(&self) -> String {
        let mut out = format!("line {}\n{:<6} {:<22} {:<14} {:>6}\n", self.line_id, "week", "start", "label", "p");
        for w in &self.weeks {
            out.push_str(&format!(
                "{:<6} {:<22} {:<14} {:>6.3}{}\n",
                w.week,
                w.start,
                w.label,
                w.probabilities[w.code],
                if w.flagged { "  *" } else { "" }
            ));
            for d in &w.days {
                out.push_str(&format!(
                    "  day {:<2} {:<22} {:<20} {:>6.3}\n",
                    d.day, d.start, d.label, d.probabilities[d.code]
                ));
            }
        }
        for warning in &self.warnings {
            out.push_str(&format!("warning: {warning}\n"));
        }
        out
    }
}

pub fn hierarchical_label(
    weekly: &ModelArtifact,
    daily: &ModelArtifact,
    series: &LoadSeries,
) -> Result<DiagnosticReport> {
    if weekly.stage != Stage::Weekly {
        return Err(Error::StageMismatch {
            expected: "weekly".into(),
            got: weekly.stage.to_string(),
        });
    }
    if daily.stage != Stage::Daily {
        return Err(Error::StageMismatch {
            expected: "daily".into(),
            got: daily.stage.to_string(),
        });
    }
    let spd = samples_per_day(series)?;
    let weeks = full_weeks(series)?;
    let mut warnings = Vec::new();
    let leftover = series.len() - weeks * spd * DAYS_PER_WEEK;
    if leftover > 0 {
        warnings.push(format!(
            "trailing partial week starting {} omitted ({leftover} of {} samples)",
            iso8601(series.timestamp(weeks * spd * DAYS_PER_WEEK)),
            spd * DAYS_PER_WEEK
        ));
    }

    let mut out = Vec::with_capacity(weeks);
    for w in 0..weeks {
        let (code, probabilities) = predict(weekly, &weekly_features(series, w)?)?;
        let flagged = code != WeeklyLabel::Normal.code();
        let days = if flagged {
            (0..DAYS_PER_WEEK)
                .map(|d| {
                    let day = w * DAYS_PER_WEEK + d;
                    let (code, probabilities) = predict(daily, &daily_features(series, day)?)?;
                    Ok(DayDiagnosis {
                        day: d,
                        start: iso8601(series.timestamp(day * spd)),
                        label: daily.class_names[code].clone(),
                        code,
                        probabilities,
                    })
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        out.push(WeekDiagnosis {
            week: w,
            start: iso8601(series.timestamp(w * spd * DAYS_PER_WEEK)),
            label: weekly.class_names[code].clone(),
            code,
            probabilities,
            flagged,
            days,
        });
    }
    Ok(DiagnosticReport {
        line_id: series.line_id.clone(),
        weeks: out,
        warnings,
        weekly_model: weekly.provenance.clone(),
        daily_model: daily.provenance.clone(),
    })
}
