use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, cholesky_solve};
use crate::models::{log_softmax, softmax};

/// Multinomial logistic regression on principal-component scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    /// k × c.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogRegConfig {
    /// Newton step cap.
    pub max_iter: usize,
    /// Stop once every gradient entry is below this in magnitude.
    pub tol: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-6,
        }
    }
}

impl LogRegModel {
    pub fn zeros(k: usize, c: usize, lambda: f64) -> Self {
        Self {
            weights: vec![vec![0.0; c]; k],
            bias: vec![0.0; c],
            lambda,
        }
    }

    pub fn n_features(&self) -> usize {
        self.weights.len()
    }

    pub fn n_classes(&self) -> usize {
        self.bias.len()
    }

    pub fn scores(&self, z: &[f64]) -> Vec<f64> {
        let mut s = self.bias.clone();
        for (zi, row) in z.iter().zip(&self.weights) {
            for (o, w) in s.iter_mut().zip(row) {
                *o += zi * w;
            }
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.n_classes();
        if self.weights.iter().any(|r| r.len() != c) {
            return Err(Error::Data("logistic regression weight rows disagree on class count".into()));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::Data(format!("invalid L2 strength {}", self.lambda)));
        }
        if self.bias.iter().chain(self.weights.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::Data("logistic regression has non-finite parameters".into()));
        }
        Ok(())
    }

    /// Weights then bias, row-major.
    pub fn flat(&self) -> Vec<f64> {
        self.weights.iter().flatten().chain(&self.bias).copied().collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let c = self.n_classes();
        for (i, row) in self.weights.iter_mut().enumerate() {
            row.copy_from_slice(&flat[i * c..(i + 1) * c]);
        }
        let k = self.weights.len();
        self.bias.copy_from_slice(&flat[k * c..(k + 1) * c]);
    }

    pub fn weight_norm(&self) -> f64 {
        self.weights.iter().flatten().map(|w| w * w).sum::<f64>().sqrt()
    }
}

/// Mean cross-entropy of `softmax(W·z + b)` plus `(λ/2)‖W‖²`.
pub fn logreg_loss(m: &LogRegModel, z: &[Vec<f64>], y: &[usize]) -> f64 {
    let ce: f64 = z
        .iter()
        .zip(y)
        .map(|(row, &label)| -log_softmax(&m.scores(row))[label])
        .sum::<f64>()
        / z.len() as f64;
    let norm = m.weight_norm();
    ce + 0.5 * m.lambda * norm * norm
}

/// Regularized loss and its gradient, laid out like [`LogRegModel::flat`].
pub fn logreg_loss_and_gradient(m: &LogRegModel, z: &[Vec<f64>], y: &[usize]) -> (f64, Vec<f64>) {
    let k = m.n_features();
    let c = m.n_classes();
    let n = z.len() as f64;
    let mut grad = vec![0.0; (k + 1) * c];
    let mut ce = 0.0;
    for (row, &label) in z.iter().zip(y) {
        let s = m.scores(row);
        ce -= log_softmax(&s)[label];
        let mut d = softmax(&s);
        d[label] -= 1.0;
        for (i, zi) in row.iter().enumerate() {
            for (g, dj) in grad[i * c..(i + 1) * c].iter_mut().zip(&d) {
                *g += zi * dj / n;
            }
        }
        for (g, dj) in grad[k * c..].iter_mut().zip(&d) {
            *g += dj / n;
        }
    }
    for (i, row) in m.weights.iter().enumerate() {
        for (j, w) in row.iter().enumerate() {
            grad[i * c + j] += m.lambda * w;
        }
    }
    let norm = m.weight_norm();
    (ce / n + 0.5 * m.lambda * norm * norm, grad)
}

/// Fits from zero; see [`fit_logreg_from`].
pub fn fit_logreg(
    z: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    lambda: f64,
    cfg: &LogRegConfig,
) -> Result<LogRegModel> {
    fit_logreg_from(z, y, n_classes, lambda, cfg, None)
}

/// Minimizes [`logreg_loss`] by damped Newton steps: each step solves
/// against the exact Hessian (plus a tiny ridge for the softmax's
/// shift-invariant bias direction) and backtracks until the loss drops
/// sufficiently. Starts at `start` (or zero) and stops once the gradient
/// max-norm falls below `cfg.tol`, no step decreases the loss, or after
/// `cfg.max_iter` steps. Deterministic; no randomness is involved.
pub fn fit_logreg_from(
    z: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    lambda: f64,
    cfg: &LogRegConfig,
    start: Option<&LogRegModel>,
) -> Result<LogRegModel> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::Config(format!("L2 strength {lambda} must be >= 0")));
    }
    if z.len() != y.len() {
        return Err(Error::Data(format!("{} rows but {} labels", z.len(), y.len())));
    }
    if z.len() < n_classes {
        return Err(Error::Data(format!(
            "{} rows cannot cover {n_classes} classes",
            z.len()
        )));
    }
    let k = z[0].len();
    if let Some(row) = z.iter().find(|r| r.len() != k) {
        return Err(Error::Dimension { expected: k, got: row.len() });
    }
    let mut counts = vec![0usize; n_classes];
    for &label in y {
        if label >= n_classes {
            return Err(Error::InvalidLabel {
                kind: "class label",
                code: label,
                count: n_classes,
            });
        }
        counts[label] += 1;
    }
    let missing: Vec<String> = counts
        .iter()
        .enumerate()
        .filter(|(_, n)| **n == 0)
        .map(|(i, _)| format!("class {i}"))
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingClasses(missing));
    }

    let c = n_classes;
    let mut model = match start {
        Some(m) if m.n_features() == k && m.n_classes() == c => LogRegModel { lambda, ..m.clone() },
        _ => LogRegModel::zeros(k, c, lambda),
    };
    let mut theta = model.flat();
    let mut loss = logreg_loss(&model, z, y);
    for _ in 0..cfg.max_iter {
        let (grad, hessian) = gradient_and_hessian(&model, z, y);
        if grad.iter().all(|g| g.abs() < cfg.tol) {
            break;
        }
        let Some(dir) = newton_direction(&hessian, &grad) else {
            break;
        };
        let slope: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t - step * d).collect();
            let mut candidate = model.clone();
            candidate.set_flat(&trial);
            let l = logreg_loss(&candidate, z, y);
            if l <= loss - 1e-4 * step * slope {
                accepted = Some((trial, candidate, l));
                break;
            }
            step *= 0.5;
        }
        let Some((trial, candidate, l)) = accepted else {
            break;
        };
        theta = trial;
        model = candidate;
        loss = l;
    }
    Ok(model)
}

/// Gradient (flat layout) and the dense Hessian of the regularized loss,
/// row-major over the same layout.
fn gradient_and_hessian(m: &LogRegModel, z: &[Vec<f64>], y: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let k = m.n_features();
    let c = m.n_classes();
    let dim = k + 1;
    let size = dim * c;
    let n = z.len() as f64;
    let mut grad = vec![0.0; size];
    // blocks[a][b] is the c × c block for feature pair a ≤ b
    let mut blocks = vec![0.0; dim * dim * c * c];
    let mut zt = vec![1.0; dim];
    let mut p = vec![0.0; c];
    let mut curv = vec![0.0; c * c];
    for (row, &label) in z.iter().zip(y) {
        zt[..k].copy_from_slice(row);
        let s = m.scores(row);
        let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (pj, sj) in p.iter_mut().zip(&s) {
            *pj = (sj - max).exp();
            sum += *pj;
        }
        p.iter_mut().for_each(|v| *v /= sum);
        for i in 0..c {
            for j in 0..c {
                curv[i * c + j] = (if i == j { p[i] } else { 0.0 } - p[i] * p[j]) / n;
            }
        }
        for a in 0..dim {
            let d = (p.iter().enumerate())
                .map(|(j, pj)| pj - if j == label { 1.0 } else { 0.0 });
            for (g, dj) in grad[a * c..(a + 1) * c].iter_mut().zip(d) {
                *g += zt[a] * dj / n;
            }
            for b in a..dim {
                let w = zt[a] * zt[b];
                if w != 0.0 {
                    axpy(&mut blocks[(a * dim + b) * c * c..(a * dim + b + 1) * c * c], w, &curv);
                }
            }
        }
    }
    let mut h = vec![0.0; size * size];
    for a in 0..dim {
        for b in a..dim {
            let block = &blocks[(a * dim + b) * c * c..(a * dim + b + 1) * c * c];
            for i in 0..c {
                for j in 0..c {
                    let v = block[i * c + j];
                    h[(a * c + i) * size + b * c + j] = v;
                    h[(b * c + j) * size + a * c + i] = v;
                }
            }
        }
    }
    for (a, row) in m.weights.iter().enumerate() {
        for (j, w) in row.iter().enumerate() {
            let idx = a * c + j;
            grad[idx] += m.lambda * w;
            h[idx * size + idx] += m.lambda;
        }
    }
    (grad, h)
}

/// Solves `(H + δI)·d = g` with a ridge that grows until the factorization
/// succeeds.
fn newton_direction(h: &[f64], g: &[f64]) -> Option<Vec<f64>> {
    let size = g.len();
    let scale = (0..size).map(|i| h[i * size + i]).fold(0.0, f64::max).max(1e-300);
    let mut ridge = 1e-12 * scale;
    for _ in 0..12 {
        let mut damped = h.to_vec();
        for i in 0..size {
            damped[i * size + i] += ridge;
        }
        if let Some(d) = cholesky_solve(&damped, g) {
            return Some(d);
        }
        ridge *= 100.0;
    }
    None
}
