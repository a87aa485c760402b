use esig_core::models::gradcheck::{check_flat, check_network};
use esig_core::models::{CnnArch, CnnParams, MlpParams, Network};
use esig_core::pcalr::{logreg_loss, logreg_loss_and_gradient, LogRegModel};
use esig_core::repro::rng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const DRAWS: u64 = 20;
pub const EPS: f64 = 1e-5;
pub const TOL: f64 = 1e-4;

pub fn batch(r: &mut ChaCha8Rng, n: usize, d: usize, c: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let xs = (0..n).map(|_| (0..d).map(|_| r.random_range(-1.0..1.5)).collect()).collect();
    let ys = (0..n).map(|_| r.random_range(0..c)).collect();
    (xs, ys)
}

fn shapes(draw: u64) -> (usize, usize) {
    if draw.is_multiple_of(2) {
        (7, 4)
    } else {
        (4, 5)
    }
}

/// Worst relative error over `draws` random MLPs with nonzero biases.
pub fn mlp_worst(draws: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for draw in 0..draws {
        let mut r = rng(100 + draw, 0);
        let (d, c) = shapes(draw);
        let mut net = MlpParams::init(d, [16, 16], c, &mut r);
        for b in [&mut net.b1, &mut net.b2, &mut net.b3] {
            b.data.iter_mut().for_each(|v| *v = r.random_range(-0.3..0.3));
        }
        let (xs, ys) = batch(&mut r, 9, d, c);
        let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let g = check_network(&net, &refs, &ys, EPS);
        assert_eq!(g.checked, net.flat_params().len());
        worst = worst.max(g.max_rel_error);
    }
    worst
}

pub fn cnn_worst(draws: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for draw in 0..draws {
        let mut r = rng(200 + draw, 0);
        let (d, c) = shapes(draw);
        let mut net = CnnParams::init(d, c, CnnArch::default(), &mut r).unwrap();
        for b in [&mut net.conv1_b, &mut net.conv2_b, &mut net.dense_b] {
            b.data.iter_mut().for_each(|v| *v = r.random_range(-0.3..0.3));
        }
        let (xs, ys) = batch(&mut r, 9, d, c);
        let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        worst = worst.max(check_network(&net, &refs, &ys, EPS).max_rel_error);
    }
    worst
}

/// Regularized multinomial regression over varied k, class count and λ.
pub fn logreg_worst(draws: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for draw in 0..draws {
        let mut r = rng(300 + draw, 0);
        let k = 1 + (draw as usize % 5);
        let c = if draw % 2 == 0 { 4 } else { 5 };
        let lambda = [0.0, 0.01, 0.3, 2.0][draw as usize % 4];
        let mut m = LogRegModel::zeros(k, c, lambda);
        let theta: Vec<f64> = (0..(k + 1) * c).map(|_| r.random_range(-1.0..1.0)).collect();
        m.set_flat(&theta);
        let (z, y) = batch(&mut r, 12, k, c);
        let (_, analytic) = logreg_loss_and_gradient(&m, &z, &y);
        let mut probe = m.clone();
        let g = check_flat(&theta, &analytic, EPS, |t| {
            probe.set_flat(t);
            logreg_loss(&probe, &z, &y)
        });
        worst = worst.max(g.max_rel_error);
    }
    worst
}
