//! Principal component analysis piped into multinomial logistic regression,
//! with a stratified grid search over the L2 strength and component count.

use serde::{Deserialize, Serialize};

use crate::decompose::{apply_norm, fit_norm};
use crate::domain::{Dataset, Stage};
use crate::error::{Error, Result};
use crate::models::{self, check_training_set, Family, ModelArtifact, Params, TrainConfig, TrainProvenance};
use crate::repro::config_hash;

pub mod grid;
pub mod logreg;
pub mod pca;

pub use grid::{grid_search, grid_search_with_hook, FoldEvent, GridCell, GridResult, GridSpec};
pub use logreg::{fit_logreg, logreg_loss, logreg_loss_and_gradient, LogRegConfig, LogRegModel};
pub use pca::{fit_pca, pca_reconstruct, pca_transform, PcaModel};

/// Fitted pipeline parameters plus the grid search that chose them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaLrParams {
    pub pca: PcaModel,
    pub logreg: LogRegModel,
    pub lambda: f64,
    pub k: usize,
    pub grid: Vec<GridCell>,
}

impl PcaLrParams {
    /// Scores for one already-normalized row.
    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.logreg.scores(&self.pca.transform_row(x)?))
    }

    pub fn validate(&self) -> Result<()> {
        self.logreg.validate()?;
        let d = self.pca.input_dim();
        if self.pca.components.iter().any(|c| c.len() != d) {
            return Err(Error::Data("PCA component length differs from input dimension".into()));
        }
        if self.pca.n_components() != self.k || self.logreg.n_features() != self.k {
            return Err(Error::Data(format!(
                "pipeline expects {} components, PCA has {} and regression {}",
                self.k,
                self.pca.n_components(),
                self.logreg.n_features()
            )));
        }
        Ok(())
    }
}

/// Normalization, grid search, then PCA and logistic regression refitted on
/// the whole training set with the winning cell.
pub fn pcalr_train(stage: Stage, ds: &Dataset, cfg: &TrainConfig) -> Result<ModelArtifact> {
    check_training_set(stage, ds)?;
    let grid = cfg.grid.clone().unwrap_or_else(|| GridSpec::default_for(stage));
    grid.validate(stage)?;
    let search = grid_search(ds, &grid, cfg.seed, &cfg.logreg)?;

    let norm = fit_norm(ds)?;
    let scaled = apply_norm(&norm, ds)?;
    let pca = fit_pca(&scaled.features, search.best_k)?;
    let scores = pca_transform(&pca, &scaled.features)?;
    let logreg = fit_logreg(&scores, &scaled.labels, ds.n_classes(), search.best_lambda, &cfg.logreg)?;

    Ok(ModelArtifact {
        family: Family::Pcalr,
        stage,
        class_names: ds.class_names.clone(),
        norm,
        params: Params::Pcalr(PcaLrParams {
            pca,
            logreg,
            lambda: search.best_lambda,
            k: search.best_k,
            grid: search.table,
        }),
        provenance: TrainProvenance {
            seed: cfg.seed,
            config_hash: config_hash(cfg),
            dataset: ds.provenance.clone(),
            rows: ds.len(),
        },
    })
}

/// Same contract as [`models::predict`], restricted to PCALR artifacts.
pub fn pcalr_predict(artifact: &ModelArtifact, x: &[f64]) -> Result<(usize, Vec<f64>)> {
    if artifact.family != Family::Pcalr {
        return Err(Error::Config(format!(
            "expected a PCALR artifact, got {}",
            artifact.family
        )));
    }
    models::predict(artifact, x)
}
