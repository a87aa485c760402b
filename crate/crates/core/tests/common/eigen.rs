use esig_core::repro::rng;
use rand::Rng;

pub fn covariance(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = x.len() as f64;
    let d = x[0].len();
    let mean: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    (0..d)
        .map(|a| {
            (0..d)
                .map(|b| x.iter().map(|r| (r[a] - mean[a]) * (r[b] - mean[b])).sum::<f64>() / (n - 1.0))
                .collect()
        })
        .collect()
}

/// det(A − λI) by cofactor expansion.
pub fn char_poly(a: &[Vec<f64>], lambda: f64) -> f64 {
    let m: Vec<Vec<f64>> = (0..a.len())
        .map(|i| (0..a.len()).map(|j| a[i][j] - if i == j { lambda } else { 0.0 }).collect())
        .collect();
    match m.len() {
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        3 => {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
        _ => unreachable!(),
    }
}

/// Roots of the characteristic polynomial: scan the Gershgorin interval for
/// sign changes, then bisect each bracket. Descending order.
pub fn brute_force_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let radius = a
        .iter()
        .enumerate()
        .map(|(i, r)| r.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let lo = a.iter().enumerate().map(|(i, r)| r[i]).fold(f64::INFINITY, f64::min) - radius - 1e-9;
    let hi = a.iter().enumerate().map(|(i, r)| r[i]).fold(f64::NEG_INFINITY, f64::max) + radius + 1e-9;
    let steps = 200_000;
    let mut roots = Vec::new();
    let mut prev_x = lo;
    let mut prev_f = char_poly(a, lo);
    for s in 1..=steps {
        let x = lo + (hi - lo) * s as f64 / steps as f64;
        let f = char_poly(a, x);
        if f == 0.0 {
            roots.push(x);
        } else if prev_f != 0.0 && (f < 0.0) != (prev_f < 0.0) {
            let (mut l, mut h, mut fl) = (prev_x, x, prev_f);
            for _ in 0..200 {
                let m = 0.5 * (l + h);
                let fm = char_poly(a, m);
                if (fm < 0.0) == (fl < 0.0) {
                    l = m;
                    fl = fm;
                } else {
                    h = m;
                }
            }
            roots.push(0.5 * (l + h));
        }
        prev_x = x;
        prev_f = f;
    }
    roots.sort_by(|a, b| b.total_cmp(a));
    roots
}

pub fn random_rows(seed: u64, n: usize, d: usize) -> Vec<Vec<f64>> {
    let mut r = rng(seed, 0);
    let mix: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
    (0..n)
        .map(|_| {
            let g: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
            (0..d).map(|j| (0..d).map(|i| g[i] * mix[i][j]).sum::<f64>() + 3.0).collect()
        })
        .collect()
}
