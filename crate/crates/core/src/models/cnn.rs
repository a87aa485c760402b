use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use super::{softmax, softmax_xent, Network};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot};

/// Two same-padded ReLU convolutions, max pooling, dropout, flatten and a
/// dense softmax head over a single-channel sequence.
///
/// Layouts (row-major): `conv1_w` is (k, 1, f1), `conv2_w` is (k, f1, f2),
/// activations are (position, channel) and the flattened vector is indexed
/// `position · f2 + channel`; `dense_w` is (flat, classes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnParams {
    pub input_len: usize,
    pub kernel: usize,
    pub pool: usize,
    pub dropout: f64,
    pub conv1_w: Tensor,
    pub conv1_b: Tensor,
    pub conv2_w: Tensor,
    pub conv2_b: Tensor,
    pub dense_w: Tensor,
    pub dense_b: Tensor,
}

/// Architecture knobs for [`CnnParams::init`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CnnArch {
    pub kernel: usize,
    pub filters: [usize; 2],
    pub pool: usize,
    pub dropout: f64,
}

impl Default for CnnArch {
    fn default() -> Self {
        Self {
            kernel: 3,
            filters: [8, 16],
            pool: 2,
            dropout: 0.25,
        }
    }
}

/// Samples per cache-sized block of the batched training pass.
const BLOCK: usize = 64;

/// Pooled length with a short final window: ceil(len / pool).
pub fn pooled_len(len: usize, pool: usize) -> usize {
    len.div_ceil(pool)
}

impl CnnParams {
    pub fn init(input_len: usize, classes: usize, arch: CnnArch, rng: &mut ChaCha8Rng) -> Result<Self> {
        arch.validate()?;
        let [f1, f2] = arch.filters;
        let k = arch.kernel;
        let flat = pooled_len(input_len, arch.pool) * f2;
        Ok(Self {
            input_len,
            kernel: k,
            pool: arch.pool,
            dropout: arch.dropout,
            conv1_w: Tensor::glorot(&[k, 1, f1], k, k * f1, rng),
            conv1_b: Tensor::zeros(&[f1]),
            conv2_w: Tensor::glorot(&[k, f1, f2], k * f1, k * f2, rng),
            conv2_b: Tensor::zeros(&[f2]),
            dense_w: Tensor::glorot(&[flat, classes], flat, classes, rng),
            dense_b: Tensor::zeros(&[classes]),
        })
    }

    pub fn filters(&self) -> [usize; 2] {
        [self.conv1_b.len(), self.conv2_b.len()]
    }

    pub fn flat_dim(&self) -> usize {
        pooled_len(self.input_len, self.pool) * self.filters()[1]
    }

    pub fn validate(&self) -> Result<()> {
        CnnArch {
            kernel: self.kernel,
            filters: self.filters(),
            pool: self.pool,
            dropout: self.dropout,
        }
        .validate()?;
        let [f1, f2] = self.filters();
        let k = self.kernel;
        let c = self.dense_b.len();
        self.conv1_w.expect_shape("conv1_w", &[k, 1, f1])?;
        self.conv2_w.expect_shape("conv2_w", &[k, f1, f2])?;
        self.dense_w.expect_shape("dense_w", &[self.flat_dim(), c])?;
        self.dense_b.expect_shape("dense_b", &[c])?;
        Ok(())
    }

    /// Forward pass for one sample into `cache`, keeping every intermediate
    /// needed by the backward pass.
    fn forward_into(&self, x: &[f64], dropout: Option<&mut ChaCha8Rng>, cache: &mut Cache) {
        let l = self.input_len;
        let k = self.kernel;
        let r = k / 2;
        let [f1, f2] = self.filters();
        let c = self.dense_b.len();

        for t in 0..l {
            let out = &mut cache.h1[t * f1..(t + 1) * f1];
            out.copy_from_slice(&self.conv1_b.data);
            for j in 0..k {
                let Some(src) = (t + j).checked_sub(r).filter(|s| *s < l) else {
                    continue;
                };
                axpy(out, x[src], &self.conv1_w.data[j * f1..(j + 1) * f1]);
            }
            relu(out);
        }

        for t in 0..l {
            let out = &mut cache.h2[t * f2..(t + 1) * f2];
            out.copy_from_slice(&self.conv2_b.data);
            for j in 0..k {
                let Some(src) = (t + j).checked_sub(r).filter(|s| *s < l) else {
                    continue;
                };
                for (f, &hv) in cache.h1[src * f1..(src + 1) * f1].iter().enumerate() {
                    if hv != 0.0 {
                        let off = (j * f1 + f) * f2;
                        axpy(out, hv, &self.conv2_w.data[off..off + f2]);
                    }
                }
            }
            relu(out);
        }

        let pl = pooled_len(l, self.pool);
        for u in 0..pl {
            let lo = u * self.pool;
            let hi = ((u + 1) * self.pool).min(l);
            for g in 0..f2 {
                let mut best = lo;
                for t in lo + 1..hi {
                    if cache.h2[t * f2 + g] > cache.h2[best * f2 + g] {
                        best = t;
                    }
                }
                cache.flat[u * f2 + g] = cache.h2[best * f2 + g];
                cache.argmax[u * f2 + g] = best;
            }
        }

        match dropout {
            Some(rng) if self.dropout > 0.0 => {
                let keep = 1.0 - self.dropout;
                for (m, v) in cache.mask.iter_mut().zip(cache.flat.iter_mut()) {
                    *m = if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 };
                    *v *= *m;
                }
            }
            _ => cache.mask.fill(1.0),
        }

        cache.logits.copy_from_slice(&self.dense_b.data);
        for (i, &v) in cache.flat.iter().enumerate() {
            if v != 0.0 {
                axpy(&mut cache.logits, v, &self.dense_w.data[i * c..(i + 1) * c]);
            }
        }
    }
}

impl CnnParams {
    /// Adds one block's gradient (scaled by `1 / total`) into `grad` and
    /// returns its summed loss. Activations are laid out (position, channel,
    /// sample) so inner loops run over the block.
    fn accumulate_block(
        &self,
        xs: &[&[f64]],
        ys: &[usize],
        total: f64,
        dropout: Option<&mut ChaCha8Rng>,
        grad: &mut Self,
    ) -> f64 {
        let n = xs.len();
        let l = self.input_len;
        let k = self.kernel;
        let r = k / 2;
        let [f1, f2] = self.filters();
        let c = self.dense_b.len();
        let pl = pooled_len(l, self.pool);
        let flat_dim = pl * f2;
        let taps = |t: usize| (0..k).filter_map(move |j| (t + j).checked_sub(r).filter(|s| *s < l).map(|s| (j, s)));

        let mut x = vec![0.0; l * n];
        for (si, xv) in xs.iter().enumerate() {
            for (t, v) in xv.iter().enumerate() {
                x[t * n + si] = *v;
            }
        }

        // forward
        let mut h1 = vec![0.0; l * f1 * n];
        for t in 0..l {
            for f in 0..f1 {
                let out = &mut h1[(t * f1 + f) * n..(t * f1 + f + 1) * n];
                out.fill(self.conv1_b.data[f]);
                for (j, src) in taps(t) {
                    axpy(out, self.conv1_w.data[j * f1 + f], &x[src * n..(src + 1) * n]);
                }
                relu(out);
            }
        }
        let mut h2 = vec![0.0; l * f2 * n];
        for t in 0..l {
            for g in 0..f2 {
                let out = &mut h2[(t * f2 + g) * n..(t * f2 + g + 1) * n];
                out.fill(self.conv2_b.data[g]);
                for (j, src) in taps(t) {
                    for f in 0..f1 {
                        let w = self.conv2_w.data[(j * f1 + f) * f2 + g];
                        axpy(out, w, &h1[(src * f1 + f) * n..(src * f1 + f + 1) * n]);
                    }
                }
                relu(out);
            }
        }
        let mut flat = vec![0.0; flat_dim * n];
        let mut from = vec![0usize; flat_dim * n];
        for u in 0..pl {
            let lo = u * self.pool;
            let hi = ((u + 1) * self.pool).min(l);
            for g in 0..f2 {
                let i = u * f2 + g;
                flat[i * n..(i + 1) * n].copy_from_slice(&h2[(lo * f2 + g) * n..(lo * f2 + g + 1) * n]);
                from[i * n..(i + 1) * n].fill(lo);
                for t in lo + 1..hi {
                    let src = &h2[(t * f2 + g) * n..(t * f2 + g + 1) * n];
                    for si in 0..n {
                        if src[si] > flat[i * n + si] {
                            flat[i * n + si] = src[si];
                            from[i * n + si] = t;
                        }
                    }
                }
            }
        }
        let mut mask = vec![1.0; flat_dim * n];
        if let Some(rng) = dropout.filter(|_| self.dropout > 0.0) {
            let keep = 1.0 - self.dropout;
            for si in 0..n {
                for i in 0..flat_dim {
                    let m = if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 };
                    mask[i * n + si] = m;
                    flat[i * n + si] *= m;
                }
            }
        }
        let mut logits = vec![0.0; c * n];
        for cls in 0..c {
            let out = &mut logits[cls * n..(cls + 1) * n];
            out.fill(self.dense_b.data[cls]);
            for i in 0..flat_dim {
                axpy(out, self.dense_w.data[i * c + cls], &flat[i * n..(i + 1) * n]);
            }
        }

        // loss and output gradient
        let mut loss = 0.0;
        let mut dz = vec![0.0; c * n];
        let mut zs = vec![0.0; c];
        let mut gs = vec![0.0; c];
        for (si, &y) in ys.iter().enumerate() {
            for cls in 0..c {
                zs[cls] = logits[cls * n + si];
            }
            loss += softmax_xent(&zs, y, &mut gs);
            for cls in 0..c {
                dz[cls * n + si] = gs[cls] / total;
            }
        }

        // dense; a zero flat entry is dropped or dead and passes no gradient
        let mut dflat = vec![0.0; flat_dim * n];
        for cls in 0..c {
            let d = &dz[cls * n..(cls + 1) * n];
            grad.dense_b.data[cls] += d.iter().sum::<f64>();
            for i in 0..flat_dim {
                grad.dense_w.data[i * c + cls] += dot(&flat[i * n..(i + 1) * n], d);
                axpy(&mut dflat[i * n..(i + 1) * n], self.dense_w.data[i * c + cls], d);
            }
        }
        let mut dh2 = vec![0.0; l * f2 * n];
        for i in 0..flat_dim {
            let g = i % f2;
            for si in 0..n {
                if flat[i * n + si] != 0.0 {
                    dh2[(from[i * n + si] * f2 + g) * n + si] += dflat[i * n + si] * mask[i * n + si];
                }
            }
        }

        // conv2, then the first ReLU gate
        let mut dh1 = vec![0.0; l * f1 * n];
        for t in 0..l {
            for g in 0..f2 {
                let d = &dh2[(t * f2 + g) * n..(t * f2 + g + 1) * n];
                grad.conv2_b.data[g] += d.iter().sum::<f64>();
                for (j, src) in taps(t) {
                    for f in 0..f1 {
                        let wi = (j * f1 + f) * f2 + g;
                        let hin = (src * f1 + f) * n..(src * f1 + f + 1) * n;
                        grad.conv2_w.data[wi] += dot(&h1[hin.clone()], d);
                        axpy(&mut dh1[hin], self.conv2_w.data[wi], d);
                    }
                }
            }
        }
        for (d, h) in dh1.iter_mut().zip(&h1) {
            if *h <= 0.0 {
                *d = 0.0;
            }
        }

        // conv1
        for t in 0..l {
            for f in 0..f1 {
                let d = &dh1[(t * f1 + f) * n..(t * f1 + f + 1) * n];
                grad.conv1_b.data[f] += d.iter().sum::<f64>();
                for (j, src) in taps(t) {
                    grad.conv1_w.data[j * f1 + f] += dot(&x[src * n..(src + 1) * n], d);
                }
            }
        }
        loss
    }

}

fn relu(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

impl CnnArch {
    pub fn validate(&self) -> Result<()> {
        if self.kernel.is_multiple_of(2) {
            return Err(Error::Config(format!("kernel width {} must be odd", self.kernel)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} must be in [0, 1)", self.dropout)));
        }
        if self.pool == 0 || self.filters.contains(&0) {
            return Err(Error::Config("pool width and filter counts must be positive".into()));
        }
        Ok(())
    }
}

/// Per-sample activations; reused across the samples of a batch.
struct Cache {
    h1: Vec<f64>,
    h2: Vec<f64>,
    argmax: Vec<usize>,
    mask: Vec<f64>,
    /// Pooled activations after dropout.
    flat: Vec<f64>,
    logits: Vec<f64>,
}

impl Cache {
    fn new(p: &CnnParams) -> Self {
        let [f1, f2] = p.filters();
        let flat = p.flat_dim();
        Self {
            h1: vec![0.0; p.input_len * f1],
            h2: vec![0.0; p.input_len * f2],
            argmax: vec![0; flat],
            mask: vec![1.0; flat],
            flat: vec![0.0; flat],
            logits: vec![0.0; p.dense_b.len()],
        }
    }
}

/// Class probabilities for one input. `training` enables dropout and then
/// requires `rng`.
pub fn cnn_forward(
    p: &CnnParams,
    x: &[f64],
    training: bool,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<Vec<f64>> {
    if x.len() != p.input_len {
        return Err(Error::Dimension {
            expected: p.input_len,
            got: x.len(),
        });
    }
    let dropout = match (training, rng) {
        (true, None) => {
            return Err(Error::Config("training-mode forward pass needs an RNG for dropout".into()))
        }
        (true, Some(r)) => Some(r),
        (false, _) => None,
    };
    let mut cache = Cache::new(p);
    p.forward_into(x, dropout, &mut cache);
    Ok(softmax(&cache.logits))
}

impl Network for CnnParams {
    fn input_dim(&self) -> usize {
        self.input_len
    }

    fn n_classes(&self) -> usize {
        self.dense_b.len()
    }

    fn tensors(&self) -> Vec<&Tensor> {
        vec![
            &self.conv1_w,
            &self.conv1_b,
            &self.conv2_w,
            &self.conv2_b,
            &self.dense_w,
            &self.dense_b,
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.conv1_w,
            &mut self.conv1_b,
            &mut self.conv2_w,
            &mut self.conv2_b,
            &mut self.dense_w,
            &mut self.dense_b,
        ]
    }

    fn logits(&self, x: &[f64], dropout: Option<&mut ChaCha8Rng>) -> Vec<f64> {
        let mut cache = Cache::new(self);
        self.forward_into(x, dropout, &mut cache);
        cache.logits
    }

    fn loss_and_gradients(
        &self,
        xs: &[&[f64]],
        ys: &[usize],
        mut dropout: Option<&mut ChaCha8Rng>,
    ) -> (f64, Self) {
        let mut grad = self.zeros_like();
        let total = xs.len() as f64;
        let mut loss = 0.0;
        for (bx, by) in xs.chunks(BLOCK).zip(ys.chunks(BLOCK)) {
            loss += self.accumulate_block(bx, by, total, dropout.as_deref_mut(), &mut grad);
        }
        (loss / total, grad)
    }

    fn zeros_like(&self) -> Self {
        let [f1, f2] = self.filters();
        let k = self.kernel;
        let c = self.dense_b.len();
        Self {
            input_len: self.input_len,
            kernel: k,
            pool: self.pool,
            dropout: self.dropout,
            conv1_w: Tensor::zeros(&[k, 1, f1]),
            conv1_b: Tensor::zeros(&[f1]),
            conv2_w: Tensor::zeros(&[k, f1, f2]),
            conv2_b: Tensor::zeros(&[f2]),
            dense_w: Tensor::zeros(&[self.flat_dim(), c]),
            dense_b: Tensor::zeros(&[c]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::repro::rng;

    /// Walks the layer stack by hand: same padding keeps the length, the
    /// pool yields one output per started window.
    fn traced_flat_dim(len: usize, kernel: usize, pool: usize, f2: usize) -> usize {
        let pad = kernel / 2;
        let after_conv1 = len + 2 * pad - kernel + 1;
        let after_conv2 = after_conv1 + 2 * pad - kernel + 1;
        let mut windows = 0;
        let mut start = 0;
        while start < after_conv2 {
            windows += 1;
            start += pool;
        }
        windows * f2
    }

    #[test]
    fn flattened_dimension_matches_shape_trace() {
        assert_eq!(traced_flat_dim(7, 3, 2, 16), 64);
        for (len, classes) in [(7, 4), (4, 5)] {
            let p = CnnParams::init(len, classes, CnnArch::default(), &mut rng(0, 0)).unwrap();
            assert_eq!(p.flat_dim(), traced_flat_dim(len, 3, 2, 16));
            assert_eq!(p.dense_w.shape, vec![traced_flat_dim(len, 3, 2, 16), classes]);
        }
    }

    #[test]
    fn inference_is_deterministic() {
        let p = CnnParams::init(7, 4, CnnArch::default(), &mut rng(5, 0)).unwrap();
        let x = [0.1, 0.9, 0.3, 0.4, 0.5, 0.2, 0.8];
        let a = cnn_forward(&p, &x, false, None).unwrap();
        let b = cnn_forward(&p, &x, false, Some(&mut rng(1, 0))).unwrap();
        assert_eq!(a, b);
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_dropout_makes_training_match_inference() {
        let arch = CnnArch {
            dropout: 0.0,
            ..CnnArch::default()
        };
        let p = CnnParams::init(4, 5, arch, &mut rng(2, 0)).unwrap();
        let x = [0.3, 0.6, 0.1, 0.9];
        let train = cnn_forward(&p, &x, true, Some(&mut rng(9, 0))).unwrap();
        assert_eq!(train, cnn_forward(&p, &x, false, None).unwrap());
    }

    #[test]
    fn dropout_changes_training_output() {
        let p = CnnParams::init(7, 4, CnnArch::default(), &mut rng(2, 0)).unwrap();
        let x = [0.3, 0.6, 0.1, 0.9, 0.5, 0.5, 0.2];
        let mut r = rng(9, 0);
        let outs: Vec<Vec<f64>> = (0..5).map(|_| cnn_forward(&p, &x, true, Some(&mut r)).unwrap()).collect();
        assert!(outs.windows(2).any(|w| w[0] != w[1]));
        assert!(cnn_forward(&p, &x, true, None).is_err());
    }

    #[test]
    fn rejects_bad_shapes_and_arch() {
        let p = CnnParams::init(7, 4, CnnArch::default(), &mut rng(0, 0)).unwrap();
        assert!(matches!(cnn_forward(&p, &[0.0; 4], false, None), Err(Error::Dimension { .. })));
        let even = CnnArch { kernel: 4, ..CnnArch::default() };
        assert!(CnnParams::init(7, 4, even, &mut rng(0, 0)).is_err());
        let full = CnnArch { dropout: 1.0, ..CnnArch::default() };
        assert!(CnnParams::init(7, 4, full, &mut rng(0, 0)).is_err());
        assert!(p.validate().is_ok());
    }
}
