use crate::error::{Error, Result};

/// Strategy constants for one descent, derived from `(n, λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CmaParams {
    pub n: usize,
    pub lambda: usize,
    pub mu: usize,
    /// Positive recombination weights, strictly decreasing, summing to one.
    pub weights: Vec<f64>,
    pub mu_eff: f64,
    pub c_sigma: f64,
    pub d_sigma: f64,
    pub c_c: f64,
    pub c_1: f64,
    pub c_mu: f64,
    /// Expected norm of an `n`-dimensional standard normal vector.
    pub chi_n: f64,
}

impl CmaParams {
    /// Default parameter formulas with log-linear positive weights.
    pub fn new(n: usize, lambda: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        if lambda < 2 {
            return Err(Error::Config(format!(
                "population size must be at least 2, got {lambda}"
            )));
        }
        let nf = n as f64;
        let mu = lambda / 2;
        let raw: Vec<f64> = (1..=mu)
            .map(|i| (mu as f64 + 0.5).ln() - (i as f64).ln())
            .collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

        let c_sigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
        let c_1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
        let c_mu =
            (1.0 - c_1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff));
        let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));

        Ok(Self {
            n,
            lambda,
            mu,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
        })
    }

    /// Evaluations between two eigendecompositions of C.
    pub fn eigen_period(&self) -> u64 {
        let per_iter = 1.0 / (10.0 * self.n as f64 * (self.c_1 + self.c_mu));
        self.lambda as u64 * (per_iter.floor() as u64).max(1)
    }

    /// Length of the best-quality history used by the flat-fitness test.
    pub fn history_window(&self) -> usize {
        10 + (30.0 * self.n as f64 / self.lambda as f64).ceil() as usize
    }

    /// Iterations without improvement before a descent is declared stagnant.
    pub fn stagnation_window(&self) -> usize {
        (100.0 + 100.0 * (self.n as f64).powf(1.5) / self.lambda as f64).ceil() as usize
    }
}
