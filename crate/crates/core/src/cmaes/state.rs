use std::collections::VecDeque;

use rand::Rng;
use rand_distr::StandardNormal;

use super::params::CmaParams;
use crate::error::{Error, Result};
use crate::linalg::{self, gemm, syr1, LinalgError, Matrix};

/// Best sampled point seen by a descent.
#[derive(Debug, Clone, PartialEq)]
pub struct Best {
    pub x: Vec<f64>,
    pub quality: f64,
}

/// Evolving search state of one descent.
#[derive(Debug, Clone)]
pub struct CmaState {
    pub mean: Vec<f64>,
    pub cov: Matrix,
    pub sigma: f64,
    pub sigma0: f64,
    pub p_sigma: Vec<f64>,
    pub p_c: Vec<f64>,
    /// Orthonormal eigenvectors of `cov` (as of the last refresh).
    pub basis: Matrix,
    /// Square roots of the eigenvalues of `cov`, matching `basis` columns.
    pub scales: Vec<f64>,
    pub eval_count: u64,
    pub iter_count: u64,
    pub evals_since_eigen: u64,
    pub best: Best,
    /// Best quality of each of the most recent iterations.
    pub recent_best: VecDeque<f64>,
    pub iters_since_improvement: u64,
}

impl CmaState {
    pub fn new(params: &CmaParams, m0: Vec<f64>, sigma0: f64) -> Result<Self> {
        if !(sigma0 > 0.0 && sigma0.is_finite()) {
            return Err(Error::Config(format!(
                "initial step size must be positive, got {sigma0}"
            )));
        }
        if m0.len() != params.n {
            return Err(Error::Shape(format!(
                "initial mean has {} coordinates, expected {}",
                m0.len(),
                params.n
            )));
        }
        let n = params.n;
        Ok(Self {
            best: Best {
                x: m0.clone(),
                quality: f64::INFINITY,
            },
            mean: m0,
            cov: Matrix::identity(n),
            sigma: sigma0,
            sigma0,
            p_sigma: vec![0.0; n],
            p_c: vec![0.0; n],
            basis: Matrix::identity(n),
            scales: vec![1.0; n],
            eval_count: 0,
            iter_count: 0,
            evals_since_eigen: 0,
            recent_best: VecDeque::with_capacity(params.history_window()),
            iters_since_improvement: 0,
        })
    }

    /// `B · diag(D)`.
    pub fn scaled_basis(&self) -> Matrix {
        let mut bd = self.basis.clone();
        let n = bd.rows();
        for i in 0..n {
            for j in 0..n {
                bd[(i, j)] *= self.scales[j];
            }
        }
        bd
    }
}

/// One iteration's candidates. All matrices are `n × λ`, one column per
/// candidate.
#[derive(Debug, Clone)]
pub struct Population {
    pub z: Matrix,
    pub x: Matrix,
    /// `y_k = B·D·z_k`, so that `x_k = m + σ·y_k`.
    pub y: Matrix,
    pub qualities: Vec<f64>,
    /// Candidate indices from best to worst.
    pub ranking: Vec<usize>,
}

impl Population {
    pub fn lambda(&self) -> usize {
        self.x.cols()
    }

    pub fn candidate(&self, k: usize) -> Vec<f64> {
        self.x.column(k)
    }

    /// Stores the qualities and ranks them. Non-finite values rank after every
    /// finite one; ties keep sample order.
    pub fn set_qualities(&mut self, qualities: Vec<f64>) -> Result<()> {
        if qualities.len() != self.lambda() {
            return Err(Error::Shape(format!(
                "{} qualities for a population of {}",
                qualities.len(),
                self.lambda()
            )));
        }
        self.ranking = rank_qualities(&qualities);
        self.qualities = qualities;
        Ok(())
    }
}

pub fn rank_qualities(qualities: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..qualities.len()).collect();
    order.sort_by(|&a, &b| {
        let (qa, qb) = (qualities[a], qualities[b]);
        match (qa.is_finite(), qb.is_finite()) {
            (true, true) => qa.partial_cmp(&qb).expect("finite values compare"),
            (true, false) => std::cmp::Ordering::Less,
            (false, true) => std::cmp::Ordering::Greater,
            (false, false) => std::cmp::Ordering::Equal,
        }
    });
    order
}

/// Draws `λ` standard-normal columns (column by column, coordinate by
/// coordinate) and maps them through the current distribution.
pub fn sample_population<R: Rng + ?Sized>(
    state: &CmaState,
    params: &CmaParams,
    rng: &mut R,
) -> Population {
    let n = params.n;
    let lambda = params.lambda;
    let mut z = Matrix::zeros(n, lambda);
    for k in 0..lambda {
        for i in 0..n {
            z[(i, k)] = rng.sample(StandardNormal);
        }
    }
    population_from_normals(state, z).expect("z has the state's dimension")
}

/// Batched form of `x_k = m + σ·B·D·z_k`: one matrix product for all columns.
pub fn population_from_normals(state: &CmaState, z: Matrix) -> Result<Population> {
    let n = state.mean.len();
    if z.rows() != n {
        return Err(Error::Shape(format!(
            "normal draws have {} rows, expected {n}",
            z.rows()
        )));
    }
    let lambda = z.cols();
    let bd = state.scaled_basis();
    let y = gemm(1.0, &bd, &z, 0.0, &Matrix::zeros(n, lambda))?;
    let mut x = Matrix::zeros(n, lambda);
    for i in 0..n {
        for k in 0..lambda {
            x[(i, k)] = state.mean[i] + state.sigma * y[(i, k)];
        }
    }
    Ok(Population {
        z,
        x,
        y,
        qualities: Vec::new(),
        ranking: Vec::new(),
    })
}

/// Covariance adaptation as one matrix product:
/// `C ← (1 − c_μ − c_1)·C + c_μ·A·W + c_1·p_c·p_cᵀ`
/// where `A` holds the selected steps `y_i` as columns and `W` holds the rows
/// `w_i·y_iᵀ`. The result is symmetrized.
pub fn adapt_covariance(
    cov: &Matrix,
    p_c: &[f64],
    y_ranked: &Matrix,
    params: &CmaParams,
) -> Result<Matrix> {
    let n = params.n;
    let mu = params.mu;
    if cov.shape() != (n, n) || p_c.len() != n || y_ranked.shape() != (n, mu) {
        return Err(Error::Shape(format!(
            "adapt_covariance: C {:?}, p_c {}, Y {:?} for n={n}, μ={mu}",
            cov.shape(),
            p_c.len(),
            y_ranked.shape()
        )));
    }
    let mut weighted = Matrix::zeros(mu, n);
    for i in 0..mu {
        for j in 0..n {
            weighted[(i, j)] = params.weights[i] * y_ranked[(j, i)];
        }
    }
    let keep = 1.0 - params.c_mu - params.c_1;
    let rank_mu = gemm(params.c_mu, y_ranked, &weighted, keep, cov)?;
    let out = syr1(&rank_mu.symmetrized(), p_c, params.c_1)?;
    Ok(out.symmetrized())
}

/// Mean, path, step-size and covariance update from an evaluated population.
pub fn update(state: &mut CmaState, params: &CmaParams, pop: &Population) -> Result<()> {
    let n = params.n;
    if pop.lambda() != params.lambda || pop.ranking.len() != params.lambda {
        return Err(Error::Contract(
            "population must be evaluated and ranked before update".into(),
        ));
    }

    let mut new_mean = vec![0.0; n];
    let mut y_ranked = Matrix::zeros(n, params.mu);
    for (i, &w) in params.weights.iter().enumerate() {
        let k = pop.ranking[i];
        for j in 0..n {
            new_mean[j] += w * pop.x[(j, k)];
            y_ranked[(j, i)] = pop.y[(j, k)];
        }
    }
    let y_w: Vec<f64> = new_mean
        .iter()
        .zip(&state.mean)
        .map(|(a, b)| (a - b) / state.sigma)
        .collect();

    // C^{-1/2}·y_w = B·D⁻¹·Bᵀ·y_w
    let mut whitened = state.basis.matvec_transposed(&y_w)?;
    for (v, d) in whitened.iter_mut().zip(&state.scales) {
        *v /= d;
    }
    let whitened = state.basis.matvec(&whitened)?;

    let cs = params.c_sigma;
    let ps_gain = (cs * (2.0 - cs) * params.mu_eff).sqrt();
    for (p, w) in state.p_sigma.iter_mut().zip(&whitened) {
        *p = (1.0 - cs) * *p + ps_gain * w;
    }
    let ps_norm = norm(&state.p_sigma);

    let generation = state.iter_count + 1;
    let h_sigma = ps_norm / (1.0 - (1.0 - cs).powf(2.0 * generation as f64)).sqrt() / params.chi_n
        < 1.4 + 2.0 / (n as f64 + 1.0);
    let cc = params.c_c;
    let pc_gain = if h_sigma {
        (cc * (2.0 - cc) * params.mu_eff).sqrt()
    } else {
        0.0
    };
    for (p, y) in state.p_c.iter_mut().zip(&y_w) {
        *p = (1.0 - cc) * *p + pc_gain * y;
    }

    state.cov = adapt_covariance(&state.cov, &state.p_c, &y_ranked, params)?;
    state.sigma *= ((cs / params.d_sigma) * (ps_norm / params.chi_n - 1.0)).exp();
    state.mean = new_mean;

    state.iter_count += 1;
    state.eval_count += params.lambda as u64;
    state.evals_since_eigen += params.lambda as u64;

    let best_k = pop.ranking[0];
    let iteration_best = pop.qualities[best_k];
    let iteration_best = if iteration_best.is_finite() {
        iteration_best
    } else {
        f64::INFINITY
    };
    if iteration_best < state.best.quality {
        state.best = Best {
            x: pop.candidate(best_k),
            quality: iteration_best,
        };
        state.iters_since_improvement = 0;
    } else {
        state.iters_since_improvement += 1;
    }
    if state.recent_best.len() == params.history_window() {
        state.recent_best.pop_front();
    }
    state.recent_best.push_back(iteration_best);
    Ok(())
}

/// Refreshes `(B, D)` from the symmetrized covariance once more than
/// [`CmaParams::eigen_period`] evaluations have passed. Returns whether a
/// refresh happened.
pub fn maybe_eigendecompose(
    state: &mut CmaState,
    params: &CmaParams,
) -> std::result::Result<bool, LinalgError> {
    if state.evals_since_eigen <= params.eigen_period() {
        return Ok(false);
    }
    state.cov = state.cov.symmetrized();
    let eig = linalg::eig_symmetric(&state.cov)?;
    if eig.values.iter().any(|&v| !(v > 0.0)) {
        return Err(LinalgError::NonFinite {
            op: "covariance spectrum",
        });
    }
    state.scales = eig.values.iter().map(|v| v.sqrt()).collect();
    state.basis = eig.vectors;
    state.evals_since_eigen = 0;
    Ok(true)
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    #[test]
    fn init_is_identity_with_zero_paths() {
        let p = CmaParams::new(4, 8).unwrap();
        let s = CmaState::new(&p, vec![0.5; 4], 2.5).unwrap();
        assert_eq!(s.cov, Matrix::identity(4));
        assert_eq!(s.basis, Matrix::identity(4));
        assert_eq!(s.scales, vec![1.0; 4]);
        assert_eq!(s.p_sigma, vec![0.0; 4]);
        assert_eq!(s.p_c, vec![0.0; 4]);
        assert_eq!((s.eval_count, s.iter_count, s.evals_since_eigen), (0, 0, 0));
    }

    #[test]
    fn init_rejects_non_positive_sigma() {
        let p = CmaParams::new(2, 4).unwrap();
        assert!(matches!(
            CmaState::new(&p, vec![0.0; 2], 0.0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            CmaState::new(&p, vec![0.0; 2], -1.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn identity_covariance_sampling() {
        let p = CmaParams::new(3, 5).unwrap();
        let s = CmaState::new(&p, vec![1.0, -2.0, 0.5], 0.7).unwrap();
        let mut rng = rng_from_seed(5);
        let pop = sample_population(&s, &p, &mut rng);
        for k in 0..5 {
            for i in 0..3 {
                let expected = s.mean[i] + 0.7 * pop.z[(i, k)];
                assert!((pop.x[(i, k)] - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn vanishing_sigma_collapses_on_mean() {
        let p = CmaParams::new(3, 6).unwrap();
        let s = CmaState::new(&p, vec![1.0, 2.0, 3.0], 1e-300).unwrap();
        let pop = sample_population(&s, &p, &mut rng_from_seed(1));
        for k in 0..6 {
            for i in 0..3 {
                assert!((pop.x[(i, k)] - s.mean[i]).abs() < 1e-290);
            }
        }
    }

    #[test]
    fn same_seed_same_samples() {
        let p = CmaParams::new(5, 10).unwrap();
        let s = CmaState::new(&p, vec![0.0; 5], 1.0).unwrap();
        let a = sample_population(&s, &p, &mut rng_from_seed(77));
        let b = sample_population(&s, &p, &mut rng_from_seed(77));
        assert_eq!(a.x, b.x);
    }

    #[test]
    fn ranking_puts_non_finite_last_and_keeps_ties_stable() {
        let r = rank_qualities(&[3.0, f64::NAN, 1.0, 3.0, f64::INFINITY, -1.0]);
        assert_eq!(r, vec![5, 2, 0, 3, 1, 4]);
    }

    #[test]
    fn single_parent_mean_is_best_point() {
        let p = CmaParams::new(3, 2).unwrap();
        let mut s = CmaState::new(&p, vec![1.0, 1.0, 1.0], 0.5).unwrap();
        let mut pop = sample_population(&s, &p, &mut rng_from_seed(3));
        let q: Vec<f64> = (0..2).map(|k| sphere(&pop.candidate(k))).collect();
        pop.set_qualities(q).unwrap();
        let best = pop.candidate(pop.ranking[0]);
        update(&mut s, &p, &pop).unwrap();
        assert_eq!(s.mean, best);
        assert_eq!(s.best.x, best);
    }

    #[test]
    fn equal_qualities_use_sample_order() {
        let p = CmaParams::new(2, 6).unwrap();
        let mut s = CmaState::new(&p, vec![0.0, 0.0], 1.0).unwrap();
        s.best.quality = 1.0;
        let mut pop = sample_population(&s, &p, &mut rng_from_seed(9));
        pop.set_qualities(vec![4.0; 6]).unwrap();
        assert_eq!(pop.ranking, (0..6).collect::<Vec<_>>());
        let mut expected = [0.0; 2];
        for (i, w) in p.weights.iter().enumerate() {
            expected[0] += w * pop.x[(0, i)];
            expected[1] += w * pop.x[(1, i)];
        }
        update(&mut s, &p, &pop).unwrap();
        assert!((s.mean[0] - expected[0]).abs() < 1e-15);
        assert!((s.mean[1] - expected[1]).abs() < 1e-15);
        assert_eq!(s.best.quality, 1.0);
    }

    #[test]
    fn zero_learning_rates_leave_covariance() {
        let mut p = CmaParams::new(3, 8).unwrap();
        p.c_1 = 0.0;
        p.c_mu = 0.0;
        let cov = Matrix::from_rows(&[
            vec![2.0, 0.3, 0.1],
            vec![0.3, 1.0, -0.2],
            vec![0.1, -0.2, 0.5],
        ])
        .unwrap();
        let y = Matrix::from_vec(3, 4, (0..12).map(|v| v as f64 * 0.1).collect()).unwrap();
        let out = adapt_covariance(&cov, &[1.0, 2.0, 3.0], &y, &p).unwrap();
        assert_eq!(out, cov);
    }

    #[test]
    fn eigendecomposition_respects_period() {
        let p = CmaParams::new(4, 8).unwrap();
        let mut s = CmaState::new(&p, vec![0.0; 4], 1.0).unwrap();
        s.cov = Matrix::from_diag(&[4.0, 1.0, 9.0, 1.0]);
        s.evals_since_eigen = p.eigen_period();
        assert!(!maybe_eigendecompose(&mut s, &p).unwrap());
        assert_eq!(s.scales, vec![1.0; 4]);
        s.evals_since_eigen += 1;
        assert!(maybe_eigendecompose(&mut s, &p).unwrap());
        assert_eq!(s.evals_since_eigen, 0);
        assert_eq!(s.scales, vec![1.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn eigendecomposition_of_identity() {
        let p = CmaParams::new(3, 6).unwrap();
        let mut s = CmaState::new(&p, vec![0.0; 3], 1.0).unwrap();
        s.evals_since_eigen = u64::MAX / 2;
        maybe_eigendecompose(&mut s, &p).unwrap();
        assert_eq!(s.scales, vec![1.0; 3]);
        assert_eq!(s.basis, Matrix::identity(3));
    }
}
