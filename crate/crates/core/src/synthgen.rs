//! Labeled synthetic load data for a process-electricity map.
//!
//! Every line gets its own ground-truth schedule of weekly labels and daily
//! operating states, rendered into an hourly kW series:
//!
//! ```text
//! kW(h) = base_load × multiplier(day state) × diurnal(h) [× higher_factor] + N(0, σ²), clamped at 0
//! ```
//!
//! with a linear ramp replacing the first `ramp_hours` of start-issue weeks
//! and one contiguous high excursion on each anomaly day. The rules that map
//! weekly labels to day states are a modeling choice of this generator.

use std::collections::BTreeMap;

use chrono::{DateTime, TimeZone, Utc};
use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decompose::{daily_features, full_weeks, weekly_features, DAYS_PER_WEEK};
use crate::domain::{
    DailyLabel, Dataset, ElectricLine, Equipment, FeatureVector, LoadSeries, Origin,
    ProcessElectricityMap, Provenance, Stage, StageLabel, WeeklyLabel,
};
use crate::error::{Error, Result};
use crate::repro::{config_hash, derive_seed, rng, stream};

pub const HOURS_PER_DAY: usize = 24;
pub const HOURS_PER_WEEK: usize = HOURS_PER_DAY * DAYS_PER_WEEK;

/// Ground truth for one week: its label and the state of each day,
/// Monday first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeekSchedule {
    pub week_label: WeeklyLabel,
    pub day_states: [DailyLabel; 7],
}

/// Generator configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub seed: u64,
    pub weeks: usize,
    /// First hour of the series; should fall on a Monday at 00:00 UTC.
    pub start: DateTime<Utc>,
    pub class_mix: BTreeMap<WeeklyLabel, f64>,
    pub noise_sigma_kw: f64,
    pub state_multipliers: BTreeMap<DailyLabel, f64>,
    pub ramp_hours: usize,
    /// Excursion level on anomaly days, as a multiple of the production level.
    pub anomaly_magnitude: f64,
    /// Inclusive bounds on excursion length in hours.
    pub anomaly_hours: [usize; 2],
    /// Upper bound on anomaly days in an anomaly week.
    pub max_anomaly_days: usize,
    /// Production elevation applied throughout `Higher` weeks.
    pub higher_factor: f64,
    /// 24 hourly shape factors per equipment kind; a line uses the mean of
    /// its equipment's profiles.
    pub diurnal_profiles: BTreeMap<Equipment, Vec<f64>>,
}

/// Shape `1 + amplitude·cos(2π(h − peak)/24)`; averages exactly 1 over a day.
fn cosine_profile(amplitude: f64, peak_hour: f64) -> Vec<f64> {
    (0..HOURS_PER_DAY)
        .map(|h| {
            let phase = 2.0 * std::f64::consts::PI * (h as f64 - peak_hour) / HOURS_PER_DAY as f64;
            1.0 + amplitude * phase.cos()
        })
        .collect()
}

/// Built-in diurnal profiles (amplitude, peak hour): immersion (0.05, 14),
/// spray (0.12, 11), rinse (0.08, 13), oven (0.10, 16), pump (0.06, 10),
/// ash house (0.15, 12).
pub fn default_diurnal_profiles() -> BTreeMap<Equipment, Vec<f64>> {
    use Equipment::*;
    [
        (Immersion, 0.05, 14.0),
        (Spray, 0.12, 11.0),
        (Rinse, 0.08, 13.0),
        (Oven, 0.10, 16.0),
        (Pump, 0.06, 10.0),
        (AshHouse, 0.15, 12.0),
    ]
    .into_iter()
    .map(|(eq, amp, peak)| (eq, cosine_profile(amp, peak)))
    .collect()
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            weeks: 156,
            start: Utc.with_ymd_and_hms(2020, 1, 6, 0, 0, 0).unwrap(),
            class_mix: [
                (WeeklyLabel::Normal, 0.60),
                (WeeklyLabel::Higher, 0.15),
                (WeeklyLabel::Anomaly, 0.15),
                (WeeklyLabel::StartIssues, 0.10),
            ]
            .into_iter()
            .collect(),
            noise_sigma_kw: 25.0,
            state_multipliers: [
                (DailyLabel::Production, 1.0),
                (DailyLabel::MaintenanceStartup, 0.55),
                (DailyLabel::Shutdown, 0.15),
                (DailyLabel::Maintenance, 0.35),
                (DailyLabel::Anomaly, 1.0),
            ]
            .into_iter()
            .collect(),
            ramp_hours: 24,
            anomaly_magnitude: 3.0,
            anomaly_hours: [6, 10],
            max_anomaly_days: 2,
            higher_factor: 1.25,
            diurnal_profiles: default_diurnal_profiles(),
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.weeks == 0 {
            return bad("weeks must be positive".into());
        }
        if self.class_mix.values().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return bad("class_mix probabilities must be finite and nonnegative".into());
        }
        let total: f64 = self.class_mix.values().sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("class_mix sums to {total}, expected 1"));
        }
        if !(self.noise_sigma_kw.is_finite() && self.noise_sigma_kw >= 0.0) {
            return bad(format!("noise_sigma_kw {} must be >= 0", self.noise_sigma_kw));
        }
        for label in DailyLabel::ALL {
            match self.state_multipliers.get(&label) {
                Some(m) if m.is_finite() && *m > 0.0 => {}
                Some(m) => return bad(format!("multiplier for {} is {m}, must be > 0", label.name())),
                None => return bad(format!("missing multiplier for {}", label.name())),
            }
        }
        if self.ramp_hours == 0 {
            return bad("ramp_hours must be positive".into());
        }
        if !(self.anomaly_magnitude.is_finite() && self.anomaly_magnitude > 0.0) {
            return bad(format!("anomaly_magnitude {} must be > 0", self.anomaly_magnitude));
        }
        let [lo, hi] = self.anomaly_hours;
        if lo == 0 || lo > hi || hi > HOURS_PER_DAY {
            return bad(format!("anomaly_hours [{lo}, {hi}] must satisfy 1 <= min <= max <= 24"));
        }
        if !(1..=DAYS_PER_WEEK).contains(&self.max_anomaly_days) {
            return bad("max_anomaly_days must be within 1..=7".into());
        }
        if !(self.higher_factor.is_finite() && self.higher_factor > 0.0) {
            return bad(format!("higher_factor {} must be > 0", self.higher_factor));
        }
        for (eq, profile) in &self.diurnal_profiles {
            if profile.len() != HOURS_PER_DAY || profile.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return bad(format!("diurnal profile for {eq:?} must hold 24 positive values"));
            }
        }
        Ok(())
    }

    fn multiplier(&self, state: DailyLabel) -> f64 {
        self.state_multipliers[&state]
    }

    fn line_shape(&self, line: &ElectricLine) -> Result<Vec<f64>> {
        let mut shape = vec![0.0; HOURS_PER_DAY];
        for eq in &line.equipment {
            let profile = self.diurnal_profiles.get(eq).ok_or_else(|| {
                Error::Config(format!("no diurnal profile for {eq:?} (line {})", line.id))
            })?;
            for (s, p) in shape.iter_mut().zip(profile) {
                *s += p / line.equipment.len() as f64;
            }
        }
        Ok(shape)
    }
}

fn weekend_state(r: &mut ChaCha8Rng) -> DailyLabel {
    if r.random_bool(0.5) {
        DailyLabel::Shutdown
    } else {
        DailyLabel::Maintenance
    }
}

fn draw_week_label(cfg: &GenConfig, r: &mut ChaCha8Rng) -> WeeklyLabel {
    let u: f64 = r.random();
    let mut acc = 0.0;
    let mut last = WeeklyLabel::Normal;
    for label in WeeklyLabel::ALL {
        let p = cfg.class_mix.get(&label).copied().unwrap_or(0.0);
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = label;
        if u < acc {
            return label;
        }
    }
    last
}

/// Draws `cfg.weeks` weekly labels i.i.d. from `class_mix` and expands each
/// into day states:
///
/// * normal / higher: production Monday–Friday, shutdown or maintenance on
///   each weekend day;
/// * anomaly: between one and `max_anomaly_days` anomaly days, every other
///   day in production;
/// * start issues: maintenance & startup on Monday, production through
///   Friday, weekend as for normal weeks.
pub fn generate_schedule(cfg: &GenConfig) -> Result<Vec<WeekSchedule>> {
    cfg.validate()?;
    let mut r = rng(cfg.seed, stream::SCHEDULE);
    let mut out = Vec::with_capacity(cfg.weeks);
    for _ in 0..cfg.weeks {
        let week_label = draw_week_label(cfg, &mut r);
        let mut days = [DailyLabel::Production; 7];
        match week_label {
            WeeklyLabel::Normal | WeeklyLabel::Higher => {
                days[5] = weekend_state(&mut r);
                days[6] = weekend_state(&mut r);
            }
            WeeklyLabel::Anomaly => {
                let count = r.random_range(1..=cfg.max_anomaly_days);
                for d in sample(&mut r, DAYS_PER_WEEK, count) {
                    days[d] = DailyLabel::Anomaly;
                }
            }
            WeeklyLabel::StartIssues => {
                days[0] = DailyLabel::MaintenanceStartup;
                days[5] = weekend_state(&mut r);
                days[6] = weekend_state(&mut r);
            }
        }
        out.push(WeekSchedule {
            week_label,
            day_states: days,
        });
    }
    Ok(out)
}

/// Renders `schedule` into an hourly series for `line`. The returned
/// schedule is the ground truth that was rendered.
pub fn synthesize_line(
    cfg: &GenConfig,
    line: &ElectricLine,
    schedule: &[WeekSchedule],
) -> Result<(LoadSeries, Vec<WeekSchedule>)> {
    cfg.validate()?;
    if schedule.is_empty() {
        return Err(Error::Config("schedule is empty".into()));
    }
    let shape = cfg.line_shape(line)?;
    let base = line.base_load_kw;
    let production = cfg.multiplier(DailyLabel::Production);
    let shutdown = cfg.multiplier(DailyLabel::Shutdown);

    let mut r = rng(derive_seed(cfg.seed, &line.id), stream::NOISE);
    let noise = Normal::new(0.0, cfg.noise_sigma_kw)
        .map_err(|e| Error::Config(format!("noise distribution: {e}")))?;

    let mut values = Vec::with_capacity(schedule.len() * HOURS_PER_WEEK);
    for week in schedule {
        let week_start = values.len();
        for &state in &week.day_states {
            let excursion = if state == DailyLabel::Anomaly {
                let [lo, hi] = cfg.anomaly_hours;
                let len = r.random_range(lo..=hi);
                let first = r.random_range(0..=HOURS_PER_DAY - len);
                first..first + len
            } else {
                0..0
            };
            for (h, &s) in shape.iter().enumerate() {
                let production_level = base * production * s;
                let mut kw = if excursion.contains(&h) {
                    cfg.anomaly_magnitude * production_level
                } else {
                    base * cfg.multiplier(state) * s
                };
                if week.week_label == WeeklyLabel::Higher && state == DailyLabel::Production {
                    kw *= cfg.higher_factor;
                }
                values.push(kw);
            }
        }
        if week.week_label == WeeklyLabel::StartIssues {
            let from = base * shutdown;
            let to = base * production;
            let ramp = cfg.ramp_hours.min(HOURS_PER_WEEK);
            for i in 0..ramp {
                values[week_start + i] = from + (to - from) * i as f64 / cfg.ramp_hours as f64;
            }
        }
    }
    for v in values.iter_mut() {
        *v = (*v + noise.sample(&mut r)).max(0.0);
    }
    let series = LoadSeries::new(line.id.clone(), cfg.start, 3600, values)?;
    Ok((series, schedule.to_vec()))
}

/// Everything generated for one map: series and schedules per line (ordered
/// by line id) and the weekly and daily datasets built from them.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub series: Vec<LoadSeries>,
    pub schedules: Vec<Vec<WeekSchedule>>,
    pub weekly: Dataset,
    pub daily: Dataset,
}

pub fn corpus_hash(cfg: &GenConfig, map: &ProcessElectricityMap) -> String {
    config_hash(&(cfg, map))
}

/// Generates every line of `map`, decomposes the series and labels the
/// rows from the ground-truth schedules.
pub fn generate_corpus(cfg: &GenConfig, map: &ProcessElectricityMap) -> Result<Corpus> {
    cfg.validate()?;
    map.validate()?;
    let mut lines: Vec<&ElectricLine> = map.lines.iter().collect();
    lines.sort_by(|a, b| a.id.cmp(&b.id));

    let rendered = lines
        .par_iter()
        .map(|line| {
            let line_cfg = GenConfig {
                seed: derive_seed(cfg.seed, &format!("schedule/{}", line.id)),
                ..cfg.clone()
            };
            let schedule = generate_schedule(&line_cfg)?;
            synthesize_line(cfg, line, &schedule)
        })
        .collect::<Result<Vec<_>>>()?;

    let provenance = Provenance {
        seed: cfg.seed,
        config_hash: corpus_hash(cfg, map),
    };
    let mut weekly_rows = Vec::new();
    let mut daily_rows = Vec::new();
    for (series, schedule) in &rendered {
        let weeks = full_weeks(series)?.min(schedule.len());
        for (w, week) in schedule.iter().enumerate().take(weeks) {
            weekly_rows.push(FeatureVector::new(
                weekly_features(series, w)?.to_vec(),
                StageLabel::Weekly(week.week_label),
                Origin {
                    line_id: series.line_id.clone(),
                    start: series.timestamp(w * HOURS_PER_WEEK),
                },
            )?);
            for (d, &state) in week.day_states.iter().enumerate() {
                let day = w * DAYS_PER_WEEK + d;
                daily_rows.push(FeatureVector::new(
                    daily_features(series, day)?.to_vec(),
                    StageLabel::Daily(state),
                    Origin {
                        line_id: series.line_id.clone(),
                        start: series.timestamp(day * HOURS_PER_DAY),
                    },
                )?);
            }
        }
    }
    let weekly = Dataset::from_vectors(Stage::Weekly, &weekly_rows, provenance.clone())?;
    let daily = Dataset::from_vectors(Stage::Daily, &daily_rows, provenance)?;
    let (series, schedules) = rendered.into_iter().unzip();
    Ok(Corpus {
        series,
        schedules,
        weekly,
        daily,
    })
}
