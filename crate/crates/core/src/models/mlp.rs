use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use super::{softmax, softmax_xent, Network};
use crate::error::{Error, Result};
use crate::linalg::dot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
}

/// Three weight layers: d → h1 → h2 → c, ReLU between, softmax on top.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
    pub w3: Tensor,
    pub b3: Tensor,
    pub activation: Activation,
}

/// `out = x·W + b` with W stored row-major as (inputs × outputs).
fn affine(x: &[f64], w: &Tensor, b: &Tensor, out: &mut [f64]) {
    let n_out = out.len();
    out.copy_from_slice(&b.data);
    for (i, xi) in x.iter().enumerate() {
        if *xi == 0.0 {
            continue;
        }
        let row = &w.data[i * n_out..(i + 1) * n_out];
        for (o, wij) in out.iter_mut().zip(row) {
            *o += xi * wij;
        }
    }
}

fn relu_in_place(v: &mut [f64]) {
    for x in v.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// Accumulates `dW += xᵀ·dy`, `db += dy` and, if requested, `dx = dy·Wᵀ`.
fn affine_backward(
    x: &[f64],
    w: &Tensor,
    dy: &[f64],
    dw: &mut Tensor,
    db: &mut Tensor,
    dx: Option<&mut [f64]>,
) {
    let n_out = dy.len();
    for (g, d) in db.data.iter_mut().zip(dy) {
        *g += d;
    }
    for (i, xi) in x.iter().enumerate() {
        if *xi == 0.0 {
            continue;
        }
        let row = &mut dw.data[i * n_out..(i + 1) * n_out];
        for (g, d) in row.iter_mut().zip(dy) {
            *g += xi * d;
        }
    }
    if let Some(dx) = dx {
        for (i, slot) in dx.iter_mut().enumerate() {
            let row = &w.data[i * n_out..(i + 1) * n_out];
            *slot = dot(row, dy);
        }
    }
}

impl MlpParams {
    pub fn init(input: usize, hidden: [usize; 2], classes: usize, rng: &mut ChaCha8Rng) -> Self {
        let [h1, h2] = hidden;
        Self {
            w1: Tensor::glorot(&[input, h1], input, h1, rng),
            b1: Tensor::zeros(&[h1]),
            w2: Tensor::glorot(&[h1, h2], h1, h2, rng),
            b2: Tensor::zeros(&[h2]),
            w3: Tensor::glorot(&[h2, classes], h2, classes, rng),
            b3: Tensor::zeros(&[classes]),
            activation: Activation::Relu,
        }
    }

    /// All weights and biases zero: a uniform predictor.
    pub fn zeros(input: usize, hidden: [usize; 2], classes: usize) -> Self {
        let [h1, h2] = hidden;
        Self {
            w1: Tensor::zeros(&[input, h1]),
            b1: Tensor::zeros(&[h1]),
            w2: Tensor::zeros(&[h1, h2]),
            b2: Tensor::zeros(&[h2]),
            w3: Tensor::zeros(&[h2, classes]),
            b3: Tensor::zeros(&[classes]),
            activation: Activation::Relu,
        }
    }

    pub fn hidden(&self) -> [usize; 2] {
        [self.b1.len(), self.b2.len()]
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.w1.shape.first().copied().unwrap_or(0);
        let [h1, h2] = self.hidden();
        let c = self.b3.len();
        self.w1.expect_shape("w1", &[d, h1])?;
        self.b1.expect_shape("b1", &[h1])?;
        self.w2.expect_shape("w2", &[h1, h2])?;
        self.b2.expect_shape("b2", &[h2])?;
        self.w3.expect_shape("w3", &[h2, c])?;
        self.b3.expect_shape("b3", &[c])?;
        Ok(())
    }

    fn forward_into(&self, x: &[f64], a1: &mut [f64], a2: &mut [f64], z3: &mut [f64]) {
        affine(x, &self.w1, &self.b1, a1);
        relu_in_place(a1);
        affine(a1, &self.w2, &self.b2, a2);
        relu_in_place(a2);
        affine(a2, &self.w3, &self.b3, z3);
    }

    fn logits_of(&self, x: &[f64]) -> Vec<f64> {
        let [h1, h2] = self.hidden();
        let mut z3 = vec![0.0; self.n_classes()];
        self.forward_into(x, &mut vec![0.0; h1], &mut vec![0.0; h2], &mut z3);
        z3
    }
}

/// Class probabilities for one input.
pub fn mlp_forward(p: &MlpParams, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != p.input_dim() {
        return Err(Error::Dimension {
            expected: p.input_dim(),
            got: x.len(),
        });
    }
    Ok(softmax(&p.logits_of(x)))
}

impl Network for MlpParams {
    fn input_dim(&self) -> usize {
        self.w1.shape[0]
    }

    fn n_classes(&self) -> usize {
        self.b3.len()
    }

    fn tensors(&self) -> Vec<&Tensor> {
        vec![&self.w1, &self.b1, &self.w2, &self.b2, &self.w3, &self.b3]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
            &mut self.w3,
            &mut self.b3,
        ]
    }

    fn logits(&self, x: &[f64], _dropout: Option<&mut ChaCha8Rng>) -> Vec<f64> {
        self.logits_of(x)
    }

    fn loss_and_gradients(
        &self,
        xs: &[&[f64]],
        ys: &[usize],
        _dropout: Option<&mut ChaCha8Rng>,
    ) -> (f64, Self) {
        let mut grad = self.zeros_like();
        let n = xs.len() as f64;
        let [h1, h2] = self.hidden();
        let mut da1 = vec![0.0; h1];
        let mut da2 = vec![0.0; h2];
        let mut a1 = vec![0.0; h1];
        let mut a2 = vec![0.0; h2];
        let mut z3 = vec![0.0; self.n_classes()];
        let mut dz3 = vec![0.0; self.n_classes()];
        let mut loss = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            self.forward_into(x, &mut a1, &mut a2, &mut z3);
            loss += softmax_xent(&z3, y, &mut dz3);
            dz3.iter_mut().for_each(|g| *g /= n);
            affine_backward(&a2, &self.w3, &dz3, &mut grad.w3, &mut grad.b3, Some(&mut da2));
            for (g, a) in da2.iter_mut().zip(&a2) {
                if *a <= 0.0 {
                    *g = 0.0;
                }
            }
            affine_backward(&a1, &self.w2, &da2, &mut grad.w2, &mut grad.b2, Some(&mut da1));
            for (g, a) in da1.iter_mut().zip(&a1) {
                if *a <= 0.0 {
                    *g = 0.0;
                }
            }
            affine_backward(x, &self.w1, &da1, &mut grad.w1, &mut grad.b1, None);
        }
        (loss / n, grad)
    }

    fn zeros_like(&self) -> Self {
        Self::zeros(self.input_dim(), self.hidden(), self.n_classes())
    }
}
