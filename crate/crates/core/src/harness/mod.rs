//! Monte Carlo experiments confronting simulated spectra with the limits in
//! [`crate::theory`].
//!
//! Every experiment is a pure function of its [`ExperimentConfig`]:
//! replication `r` draws its data from `derive_seed(master_seed, r)`, runs
//! on the ambient rayon pool, and results are reduced in replication order.

mod clt;
mod concentration;
mod hs;
mod resolvent;
mod support;

pub use clt::{run_clt_experiment, CltRow, ExperimentResult};
pub use concentration::{
    run_concentration_suite, soft_clip, unit_norm_symmetric, ConcentrationReport, ConcentrationRow,
};
pub use hs::{run_hs_reconstruction, HsReport};
pub use resolvent::{run_resolvent_diagonal_check, MAX_DENSE_N, ResolventReport, ResolventRow};
pub use support::{count_outliers, run_support_experiment, SupportReport, SupportRow};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ensemble::{build_data_matrix, spectrum_of, Spectrum};
use crate::error::{Error, Result};
use crate::potential::{finite_n_moments, PotentialParams};
use crate::sampler::{self, ChainConfig, MomentEstimates, SampleBatch, Tuning};
use crate::seed::derive_seed;
use crate::theory::hs::HsSettings;
use crate::theory::{standard_grid, EvalRegion, TheoryParams};

/// Where the columns of `Y` come from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Source {
    /// i.i.d. standard normal entries (`μ = 3`, `κ = 2`).
    #[default]
    GaussianBaseline,
    /// MALA draws from the example potential, rescaled to unit variance.
    ExamplePotential {
        potential: PotentialParams,
        /// Overrides the default burn-in of `50n` steps. Chains start from an
        /// exact draw of the uncoupled law, so a few hundred steps suffice.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        burn_in: Option<usize>,
        #[serde(default)]
        rescale: RescaleMode,
    },
}

/// How the unit-variance factor is obtained for the example potential.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RescaleMode {
    /// `1/√E[X₁²]` computed exactly at dimension `n`.
    #[default]
    Exact,
    /// Estimated from the sampler's pilot run. Its relative error is
    /// multiplied by `n + m` in the mean process.
    Pilot,
}

/// Test function and quadrature for the Helffer–Sjöstrand experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HsExperiment {
    /// Support `[lo, hi]` of the bump `(1 − t²)ᵖ`.
    pub lo: f64,
    pub hi: f64,
    pub power: u32,
    #[serde(default)]
    pub quadrature: HsSettings,
}

impl Default for HsExperiment {
    fn default() -> Self {
        HsExperiment {
            lo: 0.2,
            hi: 1.4,
            power: 10,
            quadrature: HsSettings {
                order: 5,
                ..HsSettings::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcentrationSettings {
    pub sizes: Vec<usize>,
}

impl Default for ConcentrationSettings {
    fn default() -> Self {
        ConcentrationSettings {
            sizes: vec![50, 100, 200, 400],
        }
    }
}

/// Known moments used instead of estimating them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Moments {
    pub mu: f64,
    pub kappa: f64,
}

fn default_sigma() -> f64 {
    0.0
}
fn default_replications() -> usize {
    100
}
fn default_epsilon() -> f64 {
    0.15
}
fn default_resolvent_z() -> [f64; 2] {
    [0.0, 2.0]
}
fn default_pilot() -> usize {
    sampler::DEFAULT_PILOT_SAMPLES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub c_target: f64,
    /// `m = round(c_target·n − sigma_target)`.
    #[serde(default = "default_sigma")]
    pub sigma_target: f64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    /// Evaluation points as `[re, im]`; the 200-point standard grid if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_grid: Option<Vec<[f64; 2]>>,
    #[serde(default = "Source::default")]
    pub source: Source,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub region: EvalRegion,
    /// Fattening of the support in the outlier count.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Moments for the limit; Gaussian values or estimates if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moments: Option<Moments>,
    #[serde(default = "default_pilot")]
    pub pilot_samples: usize,
    #[serde(default = "default_resolvent_z")]
    pub resolvent_z: [f64; 2],
    #[serde(default)]
    pub concentration: ConcentrationSettings,
    #[serde(default)]
    pub hs: HsExperiment,
    /// Worker threads; all available if absent. Not part of the config hash.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    /// Gaussian baseline with defaults for everything but the shape.
    pub fn new(n: usize, c_target: f64) -> Self {
        ExperimentConfig {
            n,
            c_target,
            sigma_target: 0.0,
            replications: default_replications(),
            z_grid: None,
            source: Source::GaussianBaseline,
            master_seed: 0,
            region: EvalRegion::default(),
            epsilon: default_epsilon(),
            moments: None,
            pilot_samples: default_pilot(),
            resolvent_z: default_resolvent_z(),
            concentration: ConcentrationSettings::default(),
            hs: HsExperiment::default(),
            threads: None,
        }
    }

    pub fn with_grid(mut self, grid: &[Complex64]) -> Self {
        self.z_grid = Some(grid.iter().map(|z| [z.re, z.im]).collect());
        self
    }

    /// Number of vectors per replication.
    pub fn m(&self) -> usize {
        m_for(self.n, self.c_target, self.sigma_target)
    }

    pub fn grid(&self) -> Vec<Complex64> {
        match &self.z_grid {
            Some(points) => points.iter().map(|p| Complex64::new(p[0], p[1])).collect(),
            None => standard_grid(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n", "must be >= 1"));
        }
        if !self.c_target.is_finite() || self.c_target < 1.0 {
            return Err(Error::invalid(
                "c_target",
                format!(
                    "the aspect ratio m/n must converge to c >= 1; got c_target = {}",
                    self.c_target
                ),
            ));
        }
        if !self.sigma_target.is_finite() {
            return Err(Error::NonFinite("sigma_target"));
        }
        let m = self.c_target * self.n as f64 - self.sigma_target;
        if m.round() < self.n as f64 {
            return Err(Error::AspectRatio {
                n: self.n,
                m: m.round().max(0.0) as usize,
            });
        }
        if self.replications < 2 {
            return Err(Error::invalid("replications", "need at least 2"));
        }
        self.region.validate()?;
        for z in self.grid() {
            if !self.region.contains(z) {
                return Err(Error::invalid(
                    "z_grid",
                    format!(
                        "point {z} lies outside |Im z| >= {}, |z| <= {}",
                        self.region.v0, self.region.r
                    ),
                ));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid("epsilon", "must be positive"));
        }
        if let Source::ExamplePotential { potential, .. } = &self.source {
            potential.check_log_concave()?;
        }
        if let Some(mo) = &self.moments {
            TheoryParams::new(self.c_target, self.sigma_target, mo.mu, mo.kappa)?;
        }
        if self.concentration.sizes.len() < 2 || self.concentration.sizes.contains(&0) {
            return Err(Error::invalid(
                "concentration.sizes",
                "need at least two positive sizes",
            ));
        }
        self.hs.quadrature.validate()?;
        if !(self.hs.lo < self.hs.hi) {
            return Err(Error::invalid("hs", "need lo < hi"));
        }
        Ok(())
    }
}

pub(crate) fn m_for(n: usize, c: f64, sigma: f64) -> usize {
    (c * n as f64 - sigma).round().max(0.0) as usize
}

/// Draws replications for one `(n, m)` shape from a [`Source`].
pub(crate) struct Drawer {
    source: Source,
    n: usize,
    master_seed: u64,
    tuning: Option<(PotentialParams, ChainConfig, Tuning)>,
}

impl Drawer {
    pub(crate) fn new(source: &Source, n: usize, master_seed: u64, pilot_samples: usize) -> Result<Self> {
        let tuning = match source {
            Source::GaussianBaseline => None,
            Source::ExamplePotential {
                potential,
                burn_in,
                rescale,
            } => {
                let mut cfg = ChainConfig::new(n, master_seed);
                if let Some(b) = burn_in {
                    cfg = cfg.with_burn_in(*b);
                }
                let mut t = sampler::tune(potential, &cfg, pilot_samples)?;
                if *rescale == RescaleMode::Exact {
                    t.rescale = 1.0 / finite_n_moments(potential, n)?.second.sqrt();
                }
                Some((*potential, cfg, t))
            }
        };
        Ok(Drawer {
            source: *source,
            n,
            master_seed,
            tuning,
        })
    }

    pub(crate) fn batch(&self, m: usize, replication: usize) -> Result<SampleBatch> {
        let seed = derive_seed(self.master_seed, replication as u64);
        match &self.tuning {
            None => Ok(sampler::gaussian_baseline(self.n, m, seed)),
            Some((params, cfg, tuning)) => {
                let cfg = cfg.with_seed(seed);
                sampler::draw_batch_tuned(params, m, &cfg, tuning).map_err(|e| match e {
                    Error::Tuning {
                        acceptance,
                        step_size,
                        ..
                    } => Error::Tuning {
                        acceptance,
                        step_size,
                        replication: Some(replication),
                    },
                    other => other,
                })
            }
        }
    }

    pub(crate) fn spectrum(&self, m: usize, replication: usize) -> Result<(Spectrum, SampleBatch)> {
        let batch = self.batch(m, replication)?;
        let spec = spectrum_of(&build_data_matrix(&batch)?)?;
        Ok((spec, batch))
    }

    pub(crate) fn is_gaussian(&self) -> bool {
        matches!(self.source, Source::GaussianBaseline)
    }
}

/// Moments entering the limit: explicit, Gaussian, or estimated from the
/// per-vector statistics of the experiment.
pub(crate) fn limit_moments(
    cfg: &ExperimentConfig,
    gaussian: bool,
    stats: &[(f64, f64)],
) -> (Moments, Option<MomentEstimates>) {
    if let Some(m) = cfg.moments {
        return (m, None);
    }
    if gaussian {
        return (Moments { mu: 3.0, kappa: 2.0 }, None);
    }
    let est = MomentEstimates::from_stats(cfg.n, stats);
    (
        Moments {
            mu: est.mu_hat,
            kappa: est.kappa_hat,
        },
        Some(est),
    )
}

/// Ordinary least squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_roundtrips_and_rejects_unknown_keys() {
        let cfg = ExperimentConfig::new(20, 2.0);
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let minimal: ExperimentConfig = serde_json::from_str(r#"{"n": 10, "c_target": 1.5}"#).unwrap();
        assert_eq!(minimal.m(), 15);
        let err = serde_json::from_str::<ExperimentConfig>(r#"{"n": 10, "c_target": 1.5, "replication": 3}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("replication"), "{err}");
    }

    #[test]
    fn validation() {
        assert!(ExperimentConfig::new(20, 2.0).validate().is_ok());
        let err = ExperimentConfig::new(20, 0.5).validate().unwrap_err();
        assert!(err.to_string().contains("c >= 1"));
        let mut cfg = ExperimentConfig::new(20, 1.0);
        cfg.sigma_target = 3.0;
        assert!(matches!(cfg.validate(), Err(Error::AspectRatio { .. })));
        let cfg = ExperimentConfig::new(20, 2.0).with_grid(&[Complex64::new(0.0, 0.05)]);
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::new(20, 2.0);
        cfg.replications = 1;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn m_follows_sigma_convention() {
        assert_eq!(m_for(400, 2.0, 0.0), 800);
        assert_eq!(m_for(400, 2.0, 2.0), 798);
        assert_eq!(m_for(10, 1.0, -1.0), 11);
    }

    #[test]
    fn slope_of_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
        assert!((ols_slope(&x, &y) - 2.5).abs() < 1e-14);
    }
}
