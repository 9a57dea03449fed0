use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Drawer, ExperimentConfig};
use crate::ensemble::{eigenvalues_w, Spectrum};
use crate::error::Result;
use crate::theory::{mp_support, SupportDescription};

/// Per-replication spectrum extremes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportRow {
    pub replication: usize,
    /// Eigenvalues outside the fattened support (and away from 0 when `c > 1`).
    pub outliers: usize,
    pub zero_count: usize,
    pub max_abs: f64,
    pub min_positive: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportReport {
    pub n: usize,
    pub m: usize,
    pub epsilon: f64,
    pub support: SupportDescription,
    pub rows: Vec<SupportRow>,
}

impl SupportReport {
    pub fn total_outliers(&self) -> usize {
        self.rows.iter().map(|r| r.outliers).sum()
    }

    /// Every replication has exactly `m − n` zero eigenvalues.
    pub fn zero_counts_exact(&self) -> bool {
        self.rows.iter().all(|r| r.zero_count == self.m - self.n)
    }

    pub fn max_eigenvalue_sd(&self) -> f64 {
        let k = self.rows.len() as f64;
        let mean = self.rows.iter().map(|r| r.max_abs).sum::<f64>() / k;
        (self.rows.iter().map(|r| (r.max_abs - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
    }
}

/// Eigenvalues of `W` outside `support` fattened by `eps`; the structural
/// zeros are never outliers when the limit has an atom there.
pub fn count_outliers(spec: &Spectrum, support: &SupportDescription, eps: f64) -> usize {
    let outside = |x: f64| !support.contains_fattened(x, eps);
    let zeros = if support.has_atom() || spec.m == spec.n {
        0
    } else {
        usize::from(outside(0.0)) * (spec.m - spec.n)
    };
    zeros
        + spec
            .singular_values
            .iter()
            .map(|&s| usize::from(outside(s)) + usize::from(outside(-s)))
            .sum::<usize>()
}

fn row(spec: &Spectrum, support: &SupportDescription, eps: f64, replication: usize) -> SupportRow {
    SupportRow {
        replication,
        outliers: count_outliers(spec, support, eps),
        zero_count: eigenvalues_w(spec).iter().filter(|&&l| l == 0.0).count(),
        max_abs: spec.lambda_max(),
        min_positive: spec.singular_values.last().copied().unwrap_or(0.0),
    }
}

pub fn run_support_experiment(cfg: &ExperimentConfig) -> Result<SupportReport> {
    cfg.validate()?;
    let m = cfg.m();
    let support = mp_support(cfg.c_target)?;
    let drawer = Drawer::new(&cfg.source, cfg.n, cfg.master_seed, cfg.pilot_samples)?;
    let rows: Vec<Result<SupportRow>> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| {
            let (spec, _) = drawer.spectrum(m, r)?;
            Ok(row(&spec, &support, cfg.epsilon, r))
        })
        .collect();
    Ok(SupportReport {
        n: cfg.n,
        m,
        epsilon: cfg.epsilon,
        support,
        rows: rows.into_iter().collect::<Result<_>>()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spectrum(n: usize, m: usize, sv: Vec<f64>) -> Spectrum {
        Spectrum {
            n,
            m,
            singular_values: sv,
        }
    }

    #[test]
    fn counts_both_signs_and_ignores_atom() {
        let support = mp_support(2.0).unwrap();
        // edges at ±0.414 and ±2.414
        let s = spectrum(3, 6, vec![3.0, 1.0, 0.1]);
        assert_eq!(count_outliers(&s, &support, 0.15), 4);
        assert_eq!(count_outliers(&s, &support, 0.7), 0);
    }

    #[test]
    fn fattening_never_increases_outliers() {
        let support = mp_support(1.5).unwrap();
        let s = spectrum(4, 6, vec![2.6, 2.1, 0.9, 0.05]);
        let mut last = usize::MAX;
        for k in 0..20 {
            let c = count_outliers(&s, &support, 0.01 + 0.05 * k as f64);
            assert!(c <= last);
            last = c;
        }
    }

    #[test]
    fn gaussian_smoke() {
        let mut cfg = ExperimentConfig::new(30, 2.0);
        cfg.replications = 4;
        let rep = run_support_experiment(&cfg).unwrap();
        assert_eq!(rep.rows.len(), 4);
        assert!(rep.zero_counts_exact());
        assert!(rep.rows.iter().all(|r| r.max_abs > r.min_positive));
    }
}
