use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::logreg::{fit_logreg_from, LogRegConfig};
use super::pca::{fit_pca, PcaModel};
use crate::decompose::{apply_norm, fit_norm};
use crate::domain::{Dataset, Stage};
use crate::error::{Error, Result};
use crate::models::argmax;
use crate::repro::{rng, stream};

/// Candidate hyperparameters for the PCA + logistic regression pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lambdas: Vec<f64>,
    pub components: Vec<usize>,
    pub folds: usize,
}

impl GridSpec {
    /// λ over the decades 1e-6 … 100 with 3 folds; five components for
    /// weekly data, {2, 3, 4} for daily data.
    pub fn default_for(stage: Stage) -> Self {
        Self {
            lambdas: vec![1e-6, 1e-5, 1e-4, 1e-3, 0.01, 0.1, 1.0, 10.0, 100.0],
            components: match stage {
                Stage::Weekly => vec![5],
                Stage::Daily => vec![2, 3, 4],
            },
            folds: 3,
        }
    }

    pub fn validate(&self, stage: Stage) -> Result<()> {
        if self.lambdas.is_empty() || self.components.is_empty() {
            return Err(Error::Config("grid needs at least one λ and one component count".into()));
        }
        if self.folds < 2 {
            return Err(Error::Config(format!("grid needs at least 2 folds, got {}", self.folds)));
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
            return Err(Error::Config(format!("invalid L2 strength {l}")));
        }
        let d = stage.dim();
        if let Some(k) = self.components.iter().find(|k| **k == 0 || **k > d) {
            return Err(Error::Config(format!(
                "component count {k} outside 1..={d} for the {stage} stage"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub lambda: f64,
    pub k: usize,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best_lambda: f64,
    pub best_k: usize,
    pub table: Vec<GridCell>,
}

/// Emitted once per (cell, fold) before evaluation; row indices refer to the
/// dataset handed to the grid search.
#[derive(Debug)]
pub struct FoldEvent<'a> {
    pub fold: usize,
    pub lambda: f64,
    pub k: usize,
    pub fit_rows: &'a [usize],
    pub eval_rows: &'a [usize],
}

/// Assigns every row to one of `folds` folds, dealing each class's shuffled
/// rows round-robin.
pub fn stratified_folds(ds: &Dataset, folds: usize, seed: u64) -> Result<Vec<usize>> {
    let mut r = rng(seed, stream::FOLDS);
    let mut assignment = vec![0; ds.len()];
    for class in 0..ds.n_classes() {
        let mut rows: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == class).collect();
        if rows.len() < folds {
            return Err(Error::Stratification(format!(
                "class {} has {} rows, fewer than {folds} folds",
                ds.class_names[class],
                rows.len()
            )));
        }
        rows.shuffle(&mut r);
        for (pos, row) in rows.into_iter().enumerate() {
            assignment[row] = pos % folds;
        }
    }
    Ok(assignment)
}

pub fn grid_search(ds: &Dataset, grid: &GridSpec, seed: u64, cfg: &LogRegConfig) -> Result<GridResult> {
    grid_search_with_hook(ds, grid, seed, cfg, &|_| {})
}

/// Stratified k-fold search over (λ, k). Picks the highest mean fold
/// accuracy, breaking ties by larger λ and then smaller k. Every fold runs
/// the full pipeline (scaling, PCA, regression) fitted on its own training
/// rows only.
pub fn grid_search_with_hook(
    ds: &Dataset,
    grid: &GridSpec,
    seed: u64,
    cfg: &LogRegConfig,
    hook: &(dyn Fn(&FoldEvent<'_>) + Sync),
) -> Result<GridResult> {
    grid.validate(ds.stage)?;
    let assignment = stratified_folds(ds, grid.folds, seed)?;
    let c = ds.n_classes();
    let k_max = *grid.components.iter().max().expect("validated nonempty");

    struct Fold {
        fit_rows: Vec<usize>,
        eval_rows: Vec<usize>,
        pca: PcaModel,
        fit_x: Vec<Vec<f64>>,
        fit_y: Vec<usize>,
        eval_x: Vec<Vec<f64>>,
        eval_y: Vec<usize>,
    }
    let folds = (0..grid.folds)
        .into_par_iter()
        .map(|f| -> Result<Fold> {
            let fit_rows: Vec<usize> = (0..ds.len()).filter(|&i| assignment[i] != f).collect();
            let eval_rows: Vec<usize> = (0..ds.len()).filter(|&i| assignment[i] == f).collect();
            let fit = ds.subset(&fit_rows);
            let eval = ds.subset(&eval_rows);
            let norm = fit_norm(&fit)?;
            let fit = apply_norm(&norm, &fit)?;
            let eval = apply_norm(&norm, &eval)?;
            // components of a smaller k are a prefix of the largest fit
            let pca = fit_pca(&fit.features, k_max)?;
            Ok(Fold {
                fit_rows,
                eval_rows,
                pca,
                fit_x: fit.features,
                fit_y: fit.labels,
                eval_x: eval.features,
                eval_y: eval.labels,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let cells: Vec<(f64, usize)> = grid
        .lambdas
        .iter()
        .flat_map(|&l| grid.components.iter().map(move |&k| (l, k)))
        .collect();
    // each (fold, k) chain visits λ from largest to smallest, warm-starting
    // every fit from the previous optimum
    let mut lambda_order: Vec<usize> = (0..grid.lambdas.len()).collect();
    lambda_order.sort_by(|&a, &b| grid.lambdas[b].total_cmp(&grid.lambdas[a]).then(a.cmp(&b)));
    let chains: Vec<(usize, usize)> = (0..folds.len())
        .flat_map(|f| (0..grid.components.len()).map(move |ki| (f, ki)))
        .collect();
    let chain_results = chains
        .par_iter()
        .map(|&(f, ki)| -> Result<Vec<(usize, f64)>> {
            let fold = &folds[f];
            let k = grid.components[ki];
            let pca = truncate(&fold.pca, k);
            let z_fit = super::pca::pca_transform(&pca, &fold.fit_x)?;
            let z_eval = super::pca::pca_transform(&pca, &fold.eval_x)?;
            let mut previous = None;
            let mut out = Vec::with_capacity(lambda_order.len());
            for &li in &lambda_order {
                let lambda = grid.lambdas[li];
                hook(&FoldEvent {
                    fold: f,
                    lambda,
                    k,
                    fit_rows: &fold.fit_rows,
                    eval_rows: &fold.eval_rows,
                });
                let model = fit_logreg_from(&z_fit, &fold.fit_y, c, lambda, cfg, previous.as_ref())?;
                let hits = z_eval
                    .iter()
                    .zip(&fold.eval_y)
                    .filter(|(z, y)| argmax(&model.scores(z)) == **y)
                    .count();
                out.push((li * grid.components.len() + ki, hits as f64 / fold.eval_y.len() as f64));
                previous = Some(model);
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut accuracies = vec![0.0; cells.len() * folds.len()];
    for (&(f, _), results) in chains.iter().zip(&chain_results) {
        for &(cell, acc) in results {
            accuracies[cell * folds.len() + f] = acc;
        }
    }

    let table: Vec<GridCell> = cells
        .iter()
        .enumerate()
        .map(|(cell, &(lambda, k))| {
            let fold_accuracies = accuracies[cell * folds.len()..(cell + 1) * folds.len()].to_vec();
            let mean_accuracy = fold_accuracies.iter().sum::<f64>() / fold_accuracies.len() as f64;
            GridCell {
                lambda,
                k,
                fold_accuracies,
                mean_accuracy,
            }
        })
        .collect();
    let best = select_best(&table);
    Ok(GridResult {
        best_lambda: best.lambda,
        best_k: best.k,
        table,
    })
}

/// Highest mean accuracy; ties go to the larger λ, then the smaller k.
pub fn select_best(table: &[GridCell]) -> &GridCell {
    let mut best = &table[0];
    for cell in &table[1..] {
        let better = cell.mean_accuracy > best.mean_accuracy
            || (cell.mean_accuracy == best.mean_accuracy
                && (cell.lambda > best.lambda || (cell.lambda == best.lambda && cell.k < best.k)));
        if better {
            best = cell;
        }
    }
    best
}

fn truncate(pca: &PcaModel, k: usize) -> PcaModel {
    PcaModel {
        mean: pca.mean.clone(),
        components: pca.components[..k].to_vec(),
        eigenvalues: pca.eigenvalues[..k].to_vec(),
    }
}
