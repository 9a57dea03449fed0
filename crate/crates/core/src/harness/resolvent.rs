use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{m_for, Drawer, ExperimentConfig};
use crate::ensemble::{block_stieltjes, build_data_matrix, resolvent, spectrum_of};
use crate::error::{Error, Result};
use crate::theory::{s1_closed, s2_closed};

/// Largest size for which the full resolvent is formed.
pub const MAX_DENSE_N: usize = 400;

/// Averages over replications at one size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventRow {
    pub n: usize,
    pub m: usize,
    /// Mean of `max_{i ≤ m} |S_ii − s²(z)|²` (the `m`-block).
    pub m_block: f64,
    /// Mean of `max_{i > m} |S_ii − s¹(z)|²` (the `n`-block).
    pub n_block: f64,
    /// Largest deviation between the block traces of the inverse and the
    /// spectral formulas, over all replications.
    pub trace_identity_error: f64,
    pub replications: usize,
}

impl ResolventRow {
    pub fn statistic(&self) -> f64 {
        self.m_block.max(self.n_block)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolventReport {
    pub z: Complex64,
    pub rows: Vec<ResolventRow>,
}

impl ResolventReport {
    /// The statistic strictly decreases from each size to the next.
    pub fn decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].statistic() < w[0].statistic())
    }
}

struct Single {
    m_block: f64,
    n_block: f64,
    trace_err: f64,
}

fn one_replication(drawer: &Drawer, n: usize, m: usize, r: usize, z: Complex64, limits: (Complex64, Complex64)) -> Result<Single> {
    let batch = drawer.batch(m, r)?;
    let y = build_data_matrix(&batch)?;
    let s = resolvent(&y.block_matrix(), z)?;
    let (s1, s2) = limits;
    let mut m_block: f64 = 0.0;
    let mut n_block: f64 = 0.0;
    let mut tr_m = Complex64::new(0.0, 0.0);
    let mut tr_n = Complex64::new(0.0, 0.0);
    for i in 0..m {
        m_block = m_block.max((s[(i, i)] - s2).norm_sqr());
        tr_m += s[(i, i)];
    }
    for i in m..m + n {
        n_block = n_block.max((s[(i, i)] - s1).norm_sqr());
        tr_n += s[(i, i)];
    }
    let (e1, e2) = block_stieltjes(&spectrum_of(&y)?, z)?;
    let trace_err = (tr_n / n as f64 - e1).norm().max((tr_m / m as f64 - e2).norm());
    Ok(Single {
        m_block,
        n_block,
        trace_err,
    })
}

/// Diagonal resolvent entries against `s¹`, `s²` at sizes `n` and `2n`.
pub fn run_resolvent_diagonal_check(cfg: &ExperimentConfig, z: Complex64) -> Result<ResolventReport> {
    cfg.validate()?;
    if cfg.n > MAX_DENSE_N {
        return Err(Error::invalid(
            "n",
            format!("dense resolvent check is limited to n <= {MAX_DENSE_N}"),
        ));
    }
    let limits = (s1_closed(z, cfg.c_target)?, s2_closed(z, cfg.c_target)?);
    let mut rows = Vec::new();
    for (k, n) in [cfg.n, 2 * cfg.n].into_iter().enumerate() {
        let m = m_for(n, cfg.c_target, cfg.sigma_target);
        let drawer = Drawer::new(
            &cfg.source,
            n,
            crate::seed::derive_seed(cfg.master_seed, k as u64),
            cfg.pilot_samples,
        )?;
        let reps: Vec<Result<Single>> = (0..cfg.replications)
            .into_par_iter()
            .map(|r| one_replication(&drawer, n, m, r, z, limits))
            .collect();
        let reps = reps.into_iter().collect::<Result<Vec<_>>>()?;
        let count = reps.len() as f64;
        rows.push(ResolventRow {
            n,
            m,
            m_block: reps.iter().map(|s| s.m_block).sum::<f64>() / count,
            n_block: reps.iter().map(|s| s.n_block).sum::<f64>() / count,
            trace_identity_error: reps.iter().map(|s| s.trace_err).fold(0.0, f64::max),
            replications: reps.len(),
        });
    }
    Ok(ResolventReport { z, rows })
}
