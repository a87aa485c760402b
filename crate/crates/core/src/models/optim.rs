use serde::{Deserialize, Serialize};

use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

/// Per-tensor optimizer state.
pub enum Optimizer {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
        step: i32,
        m: Vec<Vec<f64>>,
        v: Vec<Vec<f64>>,
    },
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, params: &[&Tensor]) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd { lr },
            OptimizerKind::Adam => Optimizer::Adam {
                lr,
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
                step: 0,
                m: params.iter().map(|t| vec![0.0; t.len()]).collect(),
                v: params.iter().map(|t| vec![0.0; t.len()]).collect(),
            },
        }
    }

    pub fn step(&mut self, params: Vec<&mut Tensor>, grads: Vec<&Tensor>) {
        match self {
            Optimizer::Sgd { lr } => {
                for (p, g) in params.into_iter().zip(grads) {
                    for (w, dw) in p.data.iter_mut().zip(&g.data) {
                        *w -= *lr * dw;
                    }
                }
            }
            Optimizer::Adam {
                lr,
                beta1,
                beta2,
                eps,
                step,
                m,
                v,
            } => {
                *step += 1;
                let c1 = 1.0 - beta1.powi(*step);
                let c2 = 1.0 - beta2.powi(*step);
                for (i, (p, g)) in params.into_iter().zip(grads).enumerate() {
                    for (j, (w, dw)) in p.data.iter_mut().zip(&g.data).enumerate() {
                        m[i][j] = *beta1 * m[i][j] + (1.0 - *beta1) * dw;
                        v[i][j] = *beta2 * v[i][j] + (1.0 - *beta2) * dw * dw;
                        let m_hat = m[i][j] / c1;
                        let v_hat = v[i][j] / c2;
                        *w -= *lr * m_hat / (v_hat.sqrt() + *eps);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut p = Tensor { shape: vec![2], data: vec![1.0, -1.0] };
        let g = Tensor { shape: vec![2], data: vec![0.3, -20.0] };
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.01, &[&p]);
        opt.step(vec![&mut p], vec![&g]);
        assert!((p.data[0] - 0.99).abs() < 1e-6);
        assert!((p.data[1] + 0.99).abs() < 1e-6);
    }

    #[test]
    fn sgd_step() {
        let mut p = Tensor { shape: vec![1], data: vec![1.0] };
        let g = Tensor { shape: vec![1], data: vec![2.0] };
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.5, &[&p]);
        opt.step(vec![&mut p], vec![&g]);
        assert_eq!(p.data, vec![0.0]);
    }
}
