use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{m_for, ols_slope, Drawer, ExperimentConfig};
use crate::error::Result;
use crate::seed::{derive_seed, rng_from_seed};

/// Margin above the right edge `√c + 1` for the largest-eigenvalue check.
pub const EDGE_MARGIN: f64 = 0.5;

/// The even 1-Lipschitz soft clip `tanh|x|`. An odd statistic such as
/// `Tr W` vanishes identically on the symmetric spectrum of `W`.
pub fn soft_clip(x: f64) -> f64 {
    x.abs().tanh()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationRow {
    pub n: usize,
    pub m: usize,
    /// `E|XᵀAX − Tr A|²` over all vectors of all replications.
    pub quad_form_mse: f64,
    /// Replication variance of `Tr f(W)`.
    pub trace_variance: f64,
    pub lambda_max: f64,
    /// Replications with `λ_max > √c + 1 + EDGE_MARGIN`.
    pub edge_exceedances: usize,
    pub replications: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub rows: Vec<ConcentrationRow>,
    /// Slope of `log E|XᵀAX − Tr A|²` on `log n`.
    pub quad_form_slope: f64,
    /// Slope of `log Var Tr f(W)` on `log n`.
    pub trace_variance_slope: f64,
    pub edge_threshold: f64,
}

impl ConcentrationReport {
    pub fn total_exceedances(&self) -> usize {
        self.rows.iter().map(|r| r.edge_exceedances).sum()
    }
}

/// Symmetric Gaussian matrix scaled to unit operator norm.
pub fn unit_norm_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng_from_seed(seed);
    let mut a = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let v: f64 = rng.sample(StandardNormal);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    let norm = SymmetricEigen::new(a.clone())
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    a / norm
}

struct Single {
    quad_sum: f64,
    quad_count: usize,
    trace_f: f64,
    lambda_max: f64,
}

pub fn run_concentration_suite(cfg: &ExperimentConfig) -> Result<ConcentrationReport> {
    cfg.validate()?;
    let threshold = cfg.c_target.sqrt() + 1.0 + EDGE_MARGIN;
    let mut rows = Vec::new();
    for (k, &n) in cfg.concentration.sizes.iter().enumerate() {
        let m = m_for(n, cfg.c_target, cfg.sigma_target);
        let size_seed = derive_seed(cfg.master_seed, k as u64);
        let a = unit_norm_symmetric(n, derive_seed(size_seed, u64::MAX - 1));
        let trace_a = a.trace();
        let drawer = Drawer::new(&cfg.source, n, size_seed, cfg.pilot_samples)?;
        let reps: Vec<Result<Single>> = (0..cfg.replications)
            .into_par_iter()
            .map(|r| {
                let (spec, batch) = drawer.spectrum(m, r)?;
                let mut quad_sum = 0.0;
                for v in batch.vectors() {
                    let x = DVector::from_column_slice(v);
                    let q = x.dot(&(&a * &x)) - trace_a;
                    quad_sum += q * q;
                }
                Ok(Single {
                    quad_sum,
                    quad_count: batch.m,
                    trace_f: spec.linear_statistic(soft_clip),
                    lambda_max: spec.lambda_max(),
                })
            })
            .collect();
        let reps = reps.into_iter().collect::<Result<Vec<_>>>()?;
        let count = reps.len() as f64;
        let quad_total: f64 = reps.iter().map(|s| s.quad_sum).sum();
        let quad_n: usize = reps.iter().map(|s| s.quad_count).sum();
        let mean_f = reps.iter().map(|s| s.trace_f).sum::<f64>() / count;
        let var_f = reps.iter().map(|s| (s.trace_f - mean_f).powi(2)).sum::<f64>() / (count - 1.0);
        rows.push(ConcentrationRow {
            n,
            m,
            quad_form_mse: quad_total / quad_n as f64,
            trace_variance: var_f,
            lambda_max: reps.iter().map(|s| s.lambda_max).fold(0.0, f64::max),
            edge_exceedances: reps.iter().filter(|s| s.lambda_max > threshold).count(),
            replications: reps.len(),
        });
    }
    let log_n: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let log_q: Vec<f64> = rows.iter().map(|r| r.quad_form_mse.ln()).collect();
    let log_v: Vec<f64> = rows.iter().map(|r| r.trace_variance.ln()).collect();
    Ok(ConcentrationReport {
        quad_form_slope: ols_slope(&log_n, &log_q),
        trace_variance_slope: ols_slope(&log_n, &log_v),
        edge_threshold: threshold,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_norm_matrix() {
        let a = unit_norm_symmetric(30, 4);
        assert_eq!(a, a.transpose());
        let eig = SymmetricEigen::new(a).eigenvalues;
        let norm = eig.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn soft_clip_is_even_and_lipschitz() {
        for &x in &[-3.0, -0.2, 0.0, 0.7, 5.0] {
            assert_eq!(soft_clip(x), soft_clip(-x));
            assert!((soft_clip(x) - soft_clip(x + 1e-3)).abs() <= 1e-3);
        }
    }

    #[test]
    fn gaussian_quadratic_form_matches_frobenius_oracle() {
        // for i.i.d. N(0,1) entries E|XᵀAX − Tr A|² = 2‖A‖_F²
        let mut cfg = ExperimentConfig::new(50, 1.0);
        cfg.replications = 40;
        cfg.concentration.sizes = vec![20, 50];
        let rep = run_concentration_suite(&cfg).unwrap();
        for (k, row) in rep.rows.iter().enumerate() {
            let a = unit_norm_symmetric(row.n, derive_seed(derive_seed(0, k as u64), u64::MAX - 1));
            let exact = 2.0 * a.norm_squared();
            // 40·n samples of a chi-square-like variable
            let rel = (row.quad_form_mse - exact).abs() / exact;
            assert!(rel < 0.15, "n={} {} vs {}", row.n, row.quad_form_mse, exact);
        }
    }
}
