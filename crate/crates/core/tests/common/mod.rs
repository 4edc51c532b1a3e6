#![allow(dead_code)]

use ipop_core::linalg::Matrix;
use rand::Rng;

/// `A Aᵀ + 0.5 I` for a uniform random `A`.
pub fn random_spd(rng: &mut impl Rng, n: usize) -> Matrix {
    let a: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut c = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut s = if i == j { 0.5 } else { 0.0 };
            for k in 0..n {
                s += a[i * n + k] * a[j * n + k];
            }
            c[(i, j)] = s;
        }
    }
    c
}

/// SPD matrix with a known spectrum: `Q diag(values) Qᵀ`, `Q` from
/// Gram-Schmidt on a random matrix.
pub fn spd_with_spectrum(rng: &mut impl Rng, values: &[f64]) -> Matrix {
    let n = values.len();
    let mut q: Vec<Vec<f64>> = Vec::new();
    while q.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        for u in &q {
            let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= d * ui;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            q.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    let mut c = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            c[(i, j)] = (0..n).map(|k| q[k][i] * values[k] * q[k][j]).sum();
        }
    }
    c.symmetrized()
}

/// `C + c_mu Σ w_i (y_i y_iᵀ − C) + c_1 (p_c p_cᵀ − C)`, element by element.
pub fn elementwise_oracle(
    c: &Matrix,
    p_c: &[f64],
    ys: &[Vec<f64>],
    w: &[f64],
    c_mu: f64,
    c_1: f64,
) -> Matrix {
    let n = c.rows();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut rank_mu = 0.0;
            for (y, wi) in ys.iter().zip(w) {
                rank_mu += wi * (y[i] * y[j] - c[(i, j)]);
            }
            out[(i, j)] = c[(i, j)] + c_mu * rank_mu + c_1 * (p_c[i] * p_c[j] - c[(i, j)]);
        }
    }
    out
}

pub fn frobenius_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Largest entry of `VᵀV − I`.
pub fn orthonormality_error(v: &Matrix) -> f64 {
    let n = v.cols();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let dot: f64 = (0..v.rows()).map(|r| v[(r, i)] * v[(r, j)]).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot - want).abs());
        }
    }
    worst
}
