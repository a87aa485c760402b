//! From-scratch neural classifiers (MLP and 1-D CNN), their training loop,
//! persisted artifacts and a finite-difference gradient checker.

use std::fmt;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decompose::{apply_norm, fit_norm};
use crate::domain::{Dataset, Stage};
use crate::error::{Error, Result};
use crate::pcalr::{self, GridSpec, LogRegConfig};
use crate::repro::{config_hash, rng, stream};

mod artifact;
pub mod cnn;
pub mod gradcheck;
pub mod mlp;
pub mod optim;
pub mod tensor;

pub use artifact::{ModelArtifact, Params, TrainProvenance};
pub use cnn::{cnn_forward, CnnArch, CnnParams};
pub use mlp::{mlp_forward, Activation, MlpParams};
pub use optim::{Optimizer, OptimizerKind};
pub use tensor::Tensor;

/// Numerically stable softmax (max subtracted before exponentiating).
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn log_softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    z.iter().map(|v| v - lse).collect()
}

/// Writes `softmax(z) − onehot(label)` into `grad` and returns
/// `−log softmax(z)[label]`, sharing one set of exponentials.
pub(crate) fn softmax_xent(z: &[f64], label: usize, grad: &mut [f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (g, v) in grad.iter_mut().zip(z) {
        *g = (v - max).exp();
        sum += *g;
    }
    for g in grad.iter_mut() {
        *g /= sum;
    }
    grad[label] -= 1.0;
    max + sum.ln() - z[label]
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// A differentiable classifier whose parameters are a list of tensors.
pub trait Network: Clone {
    fn input_dim(&self) -> usize;
    fn n_classes(&self) -> usize;
    fn tensors(&self) -> Vec<&Tensor>;
    fn tensors_mut(&mut self) -> Vec<&mut Tensor>;
    fn zeros_like(&self) -> Self;

    /// Pre-softmax scores for one input; dropout is applied only when an RNG
    /// is supplied.
    fn logits(&self, x: &[f64], dropout: Option<&mut ChaCha8Rng>) -> Vec<f64>;

    /// Mean cross-entropy over the batch and its gradient with respect to
    /// every parameter, returned in a value shaped like `self`.
    fn loss_and_gradients(
        &self,
        xs: &[&[f64]],
        ys: &[usize],
        dropout: Option<&mut ChaCha8Rng>,
    ) -> (f64, Self);

    /// Mean cross-entropy from the forward pass alone (no dropout).
    fn loss(&self, xs: &[&[f64]], ys: &[usize]) -> f64 {
        let total: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, &y)| -log_softmax(&self.logits(x, None))[y])
            .sum();
        total / xs.len() as f64
    }

    fn flat_params(&self) -> Vec<f64> {
        self.tensors().iter().flat_map(|t| t.data.iter().copied()).collect()
    }

    fn set_flat_params(&mut self, flat: &[f64]) {
        let mut offset = 0;
        for t in self.tensors_mut() {
            let n = t.len();
            t.data.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "MLP")]
    Mlp,
    #[serde(rename = "CNN")]
    Cnn,
    #[serde(rename = "PCALR")]
    Pcalr,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Mlp, Family::Cnn, Family::Pcalr];
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Mlp => "mlp",
            Family::Cnn => "cnn",
            Family::Pcalr => "pcalr",
        })
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mlp" => Ok(Family::Mlp),
            "cnn" => Ok(Family::Cnn),
            "pcalr" | "pca+lr" => Ok(Family::Pcalr),
            other => Err(Error::Config(format!("unknown model family {other:?}"))),
        }
    }
}

/// Training hyperparameters. The neural fields apply to MLP and CNN; `grid`
/// and `logreg` configure the PCA + logistic regression pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    /// Zero means full batch.
    pub batch_size: usize,
    pub mlp_hidden: [usize; 2],
    pub cnn: CnnArch,
    /// Stage default when absent.
    pub grid: Option<GridSpec>,
    pub logreg: LogRegConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            learning_rate: 1e-2,
            optimizer: OptimizerKind::Adam,
            seed: 0,
            batch_size: 0,
            mlp_hidden: [16, 16],
            cnn: CnnArch::default(),
            grid: None,
            logreg: LogRegConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if self.mlp_hidden.contains(&0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        self.cnn.validate()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

/// Checks the preconditions shared by every family: matching stage, a valid
/// non-empty dataset, and every class represented.
pub(crate) fn check_training_set(stage: Stage, ds: &Dataset) -> Result<()> {
    if ds.stage != stage {
        return Err(Error::StageMismatch {
            expected: stage.to_string(),
            got: ds.stage.to_string(),
        });
    }
    if ds.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    ds.check()?;
    let missing: Vec<String> = ds
        .class_counts()
        .iter()
        .zip(&ds.class_names)
        .filter(|(n, _)| **n == 0)
        .map(|(_, name)| name.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingClasses(missing));
    }
    Ok(())
}

/// Runs the optimizer over (already normalized) rows.
pub fn fit_network<N: Network>(net: &mut N, xs: &[Vec<f64>], ys: &[usize], cfg: &TrainConfig) {
    let n = xs.len();
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, &net.tensors());
    let mut r = rng(cfg.seed, stream::SHUFFLE);
    let batch = if cfg.batch_size == 0 { n } else { cfg.batch_size.min(n) };
    let mut order: Vec<usize> = (0..n).collect();
    let mut bx: Vec<&[f64]> = Vec::with_capacity(batch);
    let mut by: Vec<usize> = Vec::with_capacity(batch);
    for _ in 0..cfg.epochs {
        if batch < n {
            order.shuffle(&mut r);
        }
        for chunk in order.chunks(batch) {
            bx.clear();
            by.clear();
            for &i in chunk {
                bx.push(&xs[i]);
                by.push(ys[i]);
            }
            let (_, grad) = net.loss_and_gradients(&bx, &by, Some(&mut r));
            opt.step(net.tensors_mut(), grad.tensors());
        }
    }
}

/// Trains one family on `train_ds`. Normalization statistics are fitted on
/// `train_ds` and embedded in the artifact. Fully determined by
/// `(family, stage, train_ds, cfg)`.
pub fn train(family: Family, stage: Stage, train_ds: &Dataset, cfg: &TrainConfig) -> Result<ModelArtifact> {
    cfg.validate()?;
    check_training_set(stage, train_ds)?;
    if family == Family::Pcalr {
        return pcalr::pcalr_train(stage, train_ds, cfg);
    }
    let norm = fit_norm(train_ds)?;
    let scaled = apply_norm(&norm, train_ds)?;
    let d = stage.dim();
    let c = train_ds.n_classes();
    let mut init = rng(cfg.seed, stream::INIT);
    let params = match family {
        Family::Mlp => {
            let mut net = MlpParams::init(d, cfg.mlp_hidden, c, &mut init);
            fit_network(&mut net, &scaled.features, &scaled.labels, cfg);
            Params::Mlp(net)
        }
        Family::Cnn => {
            let mut net = CnnParams::init(d, c, cfg.cnn, &mut init)?;
            fit_network(&mut net, &scaled.features, &scaled.labels, cfg);
            Params::Cnn(net)
        }
        Family::Pcalr => unreachable!("handled above"),
    };
    Ok(ModelArtifact {
        family,
        stage,
        class_names: train_ds.class_names.clone(),
        norm,
        params,
        provenance: TrainProvenance {
            seed: cfg.seed,
            config_hash: config_hash(cfg),
            dataset: train_ds.provenance.clone(),
            rows: train_ds.len(),
        },
    })
}

/// Label (argmax, lowest index on ties) and class probabilities for one raw
/// feature vector.
pub fn predict(artifact: &ModelArtifact, x: &[f64]) -> Result<(usize, Vec<f64>)> {
    let probs = softmax(&artifact.logits(x)?);
    Ok((argmax(&probs), probs))
}

/// Labels for every row of `ds`.
pub fn predict_all(artifact: &ModelArtifact, ds: &Dataset) -> Result<Vec<usize>> {
    artifact.check_stage(ds.stage)?;
    ds.features
        .iter()
        .map(|x| predict(artifact, x).map(|(label, _)| label))
        .collect()
}

/// Mean cross-entropy of the artifact on a labeled dataset.
pub fn mean_loss(artifact: &ModelArtifact, ds: &Dataset) -> Result<f64> {
    artifact.check_stage(ds.stage)?;
    let mut total = 0.0;
    for (x, &y) in ds.features.iter().zip(&ds.labels) {
        total -= log_softmax(&artifact.logits(x)?)[y];
    }
    Ok(total / ds.len() as f64)
}

pub fn accuracy(truth: &[usize], predicted: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let hits = truth.iter().zip(predicted).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn softmax_of_zeros_is_uniform() {
        assert_eq!(softmax(&[0.0; 4]), vec![0.25; 4]);
    }

    #[test]
    fn softmax_handles_large_logits() {
        let p = softmax(&[1000.0, 0.0]);
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p[0] - 1.0).abs() < 1e-15);
        assert!(p[1] < 1e-300);
        let lp = log_softmax(&[1000.0, 0.0]);
        assert!((lp[1] + 1000.0).abs() < 1e-9);
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.1, 0.4, 0.1, 0.4]), 1);
        assert_eq!(argmax(&[0.2; 5]), 0);
    }

    #[test]
    fn family_names() {
        assert_eq!("mlp".parse::<Family>().unwrap(), Family::Mlp);
        assert_eq!("CNN".parse::<Family>().unwrap(), Family::Cnn);
        assert_eq!("pcalr".parse::<Family>().unwrap(), Family::Pcalr);
        assert!("svm".parse::<Family>().is_err());
        assert_eq!(serde_json::to_string(&Family::Pcalr).unwrap(), "\"PCALR\"");
    }

    #[test]
    fn config_rejects_nonsense() {
        let mut cfg = TrainConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.epochs = 0;
        assert!(cfg.validate().is_err());
        let cfg = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    proptest! {
        #[test]
        fn softmax_is_a_distribution(z in prop::collection::vec(-50.0f64..50.0, 1..8)) {
            let p = softmax(&z);
            prop_assert!(p.iter().all(|v| *v > 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn softmax_is_shift_invariant(z in prop::collection::vec(-20.0f64..20.0, 2..8), c in -100.0f64..100.0) {
            let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
            for (a, b) in softmax(&z).iter().zip(softmax(&shifted)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn label_ignores_logit_shift(z in prop::collection::vec(-20.0f64..20.0, 2..8), c in -100.0f64..100.0) {
            let mut sorted = z.clone();
            sorted.sort_by(f64::total_cmp);
            prop_assume!(sorted.windows(2).all(|w| w[1] - w[0] > 1e-9));
            let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
            prop_assert_eq!(argmax(&softmax(&z)), argmax(&softmax(&shifted)));
        }
    }
}
