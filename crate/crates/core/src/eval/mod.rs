//! Repeated hold-out cross-validation, confusion matrices, and two-stage
//! week-then-day diagnostics.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, Stage};
use crate::error::{Error, Result};
use crate::models::{self, accuracy, Family, TrainConfig};
use crate::repro::{config_hash, rng, stream};

mod diagnostics;

pub use diagnostics::{hierarchical_label, DayDiagnosis, DiagnosticReport, WeekDiagnosis};

pub const DEFAULT_TRAIN_FRAC: f64 = 0.75;
pub const DEFAULT_TRIALS: usize = 100;

/// Row indices of one train/test partition, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn apply(&self, ds: &Dataset) -> (Dataset, Dataset) {
        (ds.subset(&self.train), ds.subset(&self.test))
    }
}

/// Stratified random split: for each class, `round(train_frac × count)`
/// rows (at least one, and at least one left for testing) go to training.
pub fn split(ds: &Dataset, train_frac: f64, seed: u64) -> Result<Split> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::Config(format!("train fraction {train_frac} must lie in (0, 1)")));
    }
    let mut r = rng(seed, stream::SPLIT);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in 0..ds.n_classes() {
        let mut rows: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == class).collect();
        if rows.len() < 2 {
            return Err(Error::Stratification(format!(
                "class {} has {} rows; each class needs at least 2",
                ds.class_names[class],
                rows.len()
            )));
        }
        rows.shuffle(&mut r);
        let n_train = ((train_frac * rows.len() as f64).round() as usize).clamp(1, rows.len() - 1);
        train.extend_from_slice(&rows[..n_train]);
        test.extend_from_slice(&rows[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

/// Counts of true class `i` predicted as `j`.
pub fn confusion(labels: &[usize], predictions: &[usize], classes: usize) -> Result<Vec<Vec<usize>>> {
    if labels.len() != predictions.len() {
        return Err(Error::Data(format!(
            "{} labels but {} predictions",
            labels.len(),
            predictions.len()
        )));
    }
    let mut m = vec![vec![0; classes]; classes];
    for (&t, &p) in labels.iter().zip(predictions) {
        if t >= classes || p >= classes {
            return Err(Error::InvalidLabel {
                kind: "confusion entry",
                code: t.max(p),
                count: classes,
            });
        }
        m[t][p] += 1;
    }
    Ok(m)
}

/// Everything produced by one split–train–test cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub seed: u64,
    pub split: Split,
    pub truth: Vec<usize>,
    pub predictions: Vec<usize>,
    pub accuracy: f64,
}

/// Splits with `seed`, trains on the training part (model seed = `seed`)
/// and scores the held-out part.
pub fn run_trial(
    family: Family,
    ds: &Dataset,
    train_frac: f64,
    seed: u64,
    cfg: &TrainConfig,
) -> Result<TrialOutcome> {
    let split = split(ds, train_frac, seed)?;
    let (train, test) = split.apply(ds);
    let artifact = models::train(family, ds.stage, &train, &cfg.with_seed(seed))?;
    let predictions = models::predict_all(&artifact, &test)?;
    let accuracy = accuracy(&test.labels, &predictions);
    Ok(TrialOutcome {
        seed,
        split,
        truth: test.labels,
        predictions,
        accuracy,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub family: Family,
    pub stage: Stage,
    pub trials: usize,
    pub train_frac: f64,
    pub base_seed: u64,
    pub seeds: Vec<u64>,
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation (divisor n).
    pub std: f64,
    pub class_names: Vec<String>,
    /// Summed over all trials.
    pub confusion: Vec<Vec<usize>>,
    pub config_hash: String,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl CvReport {
    /// `trial,seed,accuracy` rows.
    pub fn trials_csv(&self) -> String {
        let mut out = String::from("trial,seed,accuracy\n");
        for (t, (seed, acc)) in self.seeds.iter().zip(&self.accuracies).enumerate() {
            writeln!(out, "{t},{seed},{acc}").expect("writing to a String cannot fail");
        }
        out
    }

    pub fn summary(&self) -> String {
        format!(
            "{} {} accuracy {:.4} ± {:.4} over {} trials",
            self.family, self.stage, self.mean, self.std, self.trials
        )
    }
}

/// Repeats split → train → test `trials` times with seeds
/// `base_seed, base_seed + 1, …` and a 75/25 split. Trials may run in
/// parallel; results are assembled in trial order.
pub fn cross_validate(
    family: Family,
    stage: Stage,
    ds: &Dataset,
    trials: usize,
    base_seed: u64,
    cfg: &TrainConfig,
) -> Result<CvReport> {
    cross_validate_with(family, stage, ds, trials, base_seed, DEFAULT_TRAIN_FRAC, cfg)
}

pub fn cross_validate_with(
    family: Family,
    stage: Stage,
    ds: &Dataset,
    trials: usize,
    base_seed: u64,
    train_frac: f64,
    cfg: &TrainConfig,
) -> Result<CvReport> {
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    if ds.stage != stage {
        return Err(Error::StageMismatch {
            expected: stage.to_string(),
            got: ds.stage.to_string(),
        });
    }
    ds.check()?;
    cfg.validate()?;
    let seeds: Vec<u64> = (0..trials as u64).map(|t| base_seed.wrapping_add(t)).collect();
    let outcomes = seeds
        .par_iter()
        .map(|&seed| run_trial(family, ds, train_frac, seed, cfg))
        .collect::<Result<Vec<_>>>()?;

    let c = ds.n_classes();
    let mut total = vec![vec![0; c]; c];
    for o in &outcomes {
        let m = confusion(&o.truth, &o.predictions, c)?;
        for (row, add) in total.iter_mut().zip(m) {
            for (a, b) in row.iter_mut().zip(add) {
                *a += b;
            }
        }
    }
    let accuracies: Vec<f64> = outcomes.iter().map(|o| o.accuracy).collect();
    let (mean, std) = mean_std(&accuracies);
    Ok(CvReport {
        family,
        stage,
        trials,
        train_frac,
        base_seed,
        seeds,
        accuracies,
        mean,
        std,
        class_names: ds.class_names.clone(),
        confusion: total,
        config_hash: config_hash(&(family, stage, trials, base_seed, train_frac, cfg, &ds.provenance)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Provenance;

    fn ds(counts: &[usize]) -> Dataset {
        let mut d = Dataset::empty(Stage::Weekly, Provenance::default());
        for (class, &n) in counts.iter().enumerate() {
            for i in 0..n {
                d.features.push(vec![i as f64; 7]);
                d.labels.push(class);
            }
        }
        d
    }

    #[test]
    fn seventy_five_twenty_five() {
        let mut d = ds(&[100]);
        d.class_names = d.class_names[..1].to_vec();
        let s = split(&d, 0.75, 3).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (75, 25));
    }

    #[test]
    fn split_is_repeatable_and_partitions() {
        let d = ds(&[10, 7, 5, 3]);
        let a = split(&d, 0.75, 11).unwrap();
        assert_eq!(a, split(&d, 0.75, 11).unwrap());
        assert_ne!(a, split(&d, 0.75, 12).unwrap());
        let mut all: Vec<usize> = a.train.iter().chain(&a.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..d.len()).collect::<Vec<_>>());
    }

    #[test]
    fn every_class_on_both_sides() {
        let d = ds(&[2, 2, 2, 2]);
        let s = split(&d, 0.75, 0).unwrap();
        let (train, test) = s.apply(&d);
        assert_eq!(train.class_counts(), vec![1; 4]);
        assert_eq!(test.class_counts(), vec![1; 4]);
    }

    #[test]
    fn singleton_class_cannot_be_split() {
        assert!(matches!(split(&ds(&[5, 1, 5, 5]), 0.75, 0), Err(Error::Stratification(_))));
        assert!(split(&ds(&[5, 5, 5, 5]), 1.0, 0).is_err());
    }

    #[test]
    fn confusion_counts() {
        let m = confusion(&[0, 1, 2, 2], &[0, 1, 2, 2], 3).unwrap();
        assert_eq!(m, vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 2]]);
        let m = confusion(&[0, 1, 1, 2], &[1, 1, 0, 2], 3).unwrap();
        assert_eq!(m.iter().flatten().sum::<usize>(), 4);
        assert_eq!(m[1].iter().sum::<usize>(), 2);
        assert!(confusion(&[0, 3], &[0, 0], 3).is_err());
        assert!(confusion(&[0], &[0, 0], 3).is_err());
    }

    #[test]
    fn population_std() {
        let (m, s) = mean_std(&[0.9, 1.0]);
        assert!((m - 0.95).abs() < 1e-15);
        assert!((s - 0.05).abs() < 1e-15);
        assert_eq!(mean_std(&[0.8]), (0.8, 0.0));
    }
}
