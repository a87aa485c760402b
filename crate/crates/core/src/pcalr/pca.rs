use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, symmetric_eigen};

/// Principal axes of a training matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// k × d, orthonormal rows ordered by descending eigenvalue.
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
}

/// Sample covariance (divisor n − 1) of the rows of `x` about `mean`.
#[allow(clippy::needless_range_loop)]
pub fn sample_covariance(x: &[Vec<f64>], mean: &[f64]) -> Vec<Vec<f64>> {
    let d = mean.len();
    let mut cov = vec![vec![0.0; d]; d];
    for row in x {
        for i in 0..d {
            let ci = row[i] - mean[i];
            for j in i..d {
                cov[i][j] += ci * (row[j] - mean[j]);
            }
        }
    }
    let denom = (x.len() - 1) as f64;
    for i in 0..d {
        for j in i..d {
            cov[i][j] /= denom;
            cov[j][i] = cov[i][j];
        }
    }
    cov
}

/// Flips `v` so its largest-magnitude entry (lowest index on ties) is positive.
pub fn canonical_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

pub fn fit_pca(x: &[Vec<f64>], k: usize) -> Result<PcaModel> {
    let n = x.len();
    if n < 2 {
        return Err(Error::Data(format!("PCA needs at least 2 rows, got {n}")));
    }
    let d = x[0].len();
    if let Some(row) = x.iter().find(|r| r.len() != d) {
        return Err(Error::Dimension {
            expected: d,
            got: row.len(),
        });
    }
    if k == 0 || k > d {
        return Err(Error::Config(format!(
            "component count {k} must be within 1..={d}"
        )));
    }
    let mut mean = vec![0.0; d];
    for row in x {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let eig = symmetric_eigen(&sample_covariance(x, &mean));
    let mut order: Vec<usize> = (0..d).collect();
    // stable sort keeps the lower index first among equal eigenvalues
    order.sort_by(|&a, &b| eig.values[b].total_cmp(&eig.values[a]));
    let mut components = Vec::with_capacity(k);
    let mut eigenvalues = Vec::with_capacity(k);
    for &i in order.iter().take(k) {
        let mut v = eig.vectors[i].clone();
        canonical_sign(&mut v);
        components.push(v);
        eigenvalues.push(eig.values[i]);
    }
    Ok(PcaModel {
        mean,
        components,
        eigenvalues,
    })
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: row.len(),
            });
        }
        let centered: Vec<f64> = row.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        Ok(self.components.iter().map(|c| dot(c, &centered)).collect())
    }

    pub fn reconstruct_row(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.n_components() {
            return Err(Error::Dimension {
                expected: self.n_components(),
                got: z.len(),
            });
        }
        let mut out = self.mean.clone();
        for (zi, c) in z.iter().zip(&self.components) {
            for (o, cj) in out.iter_mut().zip(c) {
                *o += zi * cj;
            }
        }
        Ok(out)
    }
}

/// Scores `(X − mean)·componentsᵀ`.
pub fn pca_transform(m: &PcaModel, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    x.iter().map(|r| m.transform_row(r)).collect()
}

/// Maps scores back to feature space, adding the mean.
pub fn pca_reconstruct(m: &PcaModel, z: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    z.iter().map(|r| m.reconstruct_row(r)).collect()
}
