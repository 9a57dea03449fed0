use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{limit_moments, Drawer, ExperimentConfig, Moments};
use crate::error::Result;
use crate::sampler::{vector_stats, MomentEstimates};
use crate::theory::hs::{hs_functional, HsSettings, TestFunction};
use crate::theory::{integrate_against_limit, TheoryParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HsReport {
    /// `(n + m)(mean_r ∫f dF_{n,m} − ∫f dF)`.
    pub monte_carlo: f64,
    pub stderr: f64,
    /// `∫f dM` through the Helffer–Sjöstrand pairing.
    pub theory: f64,
    /// `∫f dF` for the limit law.
    pub limit_integral: f64,
    pub moments: Moments,
    pub moment_estimates: Option<MomentEstimates>,
    pub settings: HsSettings,
    pub replications: usize,
}

impl HsReport {
    pub fn discrepancy(&self) -> f64 {
        (self.monte_carlo - self.theory).abs()
    }

    pub fn within(&self, budget: f64) -> bool {
        self.discrepancy() <= 3.0 * self.stderr + budget
    }
}

/// Simulated `M_{n,m}(f)` against its limit `∫f dM`, with extension order
/// `order` and the remaining quadrature settings from `cfg.hs`.
pub fn run_hs_reconstruction(cfg: &ExperimentConfig, f: &dyn TestFunction, order: usize) -> Result<HsReport> {
    cfg.validate()?;
    let settings = HsSettings {
        order,
        ..cfg.hs.quadrature
    };
    settings.validate()?;
    let m = cfg.m();
    let big_n = (cfg.n + m) as f64;
    let drawer = Drawer::new(&cfg.source, cfg.n, cfg.master_seed, cfg.pilot_samples)?;
    // per replication: the linear statistic and per-vector moment stats
    type Rep = (f64, Vec<(f64, f64)>);
    let reps: Vec<Result<Rep>> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| {
            let (spec, batch) = drawer.spectrum(m, r)?;
            let stat = spec.linear_statistic(|x| f.derivative(0, x));
            let stats = if drawer.is_gaussian() {
                Vec::new()
            } else {
                vector_stats(&batch)
            };
            Ok((stat, stats))
        })
        .collect();
    let reps = reps.into_iter().collect::<Result<Vec<_>>>()?;
    let stats: Vec<(f64, f64)> = reps.iter().flat_map(|r| r.1.iter().copied()).collect();
    let (moments, estimates) = limit_moments(cfg, drawer.is_gaussian(), &stats);
    let params = TheoryParams::new(cfg.c_target, cfg.sigma_target, moments.mu, moments.kappa)?;

    let count = reps.len() as f64;
    let mean = reps.iter().map(|r| r.0).sum::<f64>() / count;
    let var = reps.iter().map(|r| (r.0 - mean).powi(2)).sum::<f64>() / (count - 1.0);
    let limit = integrate_against_limit(|x| f.derivative(0, x), cfg.c_target)?;
    Ok(HsReport {
        monte_carlo: mean - big_n * limit,
        stderr: (var / count).sqrt(),
        theory: hs_functional(f, &params, &settings)?,
        limit_integral: limit,
        moments,
        moment_estimates: estimates,
        settings,
        replications: reps.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::hs::{DerivativeList, PolyBump};

    #[test]
    fn zero_function_reports_zero() {
        let mut cfg = ExperimentConfig::new(20, 2.0);
        cfg.replications = 3;
        let f = DerivativeList::zero((-1.0, 1.0), 8).unwrap();
        let rep = run_hs_reconstruction(&cfg, &f, 5).unwrap();
        assert_eq!(rep.monte_carlo, 0.0);
        assert_eq!(rep.theory, 0.0);
        assert_eq!(rep.stderr, 0.0);
    }

    #[test]
    fn gap_bump_sees_no_eigenvalues() {
        let mut cfg = ExperimentConfig::new(40, 4.0);
        cfg.replications = 4;
        let f = PolyBump::on_interval(0.3, 0.7, 10).unwrap();
        let rep = run_hs_reconstruction(&cfg, &f, 5).unwrap();
        assert_eq!(rep.monte_carlo, 0.0);
        assert!(rep.limit_integral.abs() < 1e-12);
        assert!(rep.theory.abs() < 1e-3, "{}", rep.theory);
    }
}
