//! Metropolis-adjusted Langevin sampling of `dP(x) ∝ e^{−V(x)} dx`.
//!
//! Each copy of the random vector comes from its own chain, seeded from the
//! batch seed and the copy index. Chains start from an exact draw of the
//! `a = 0` product law (per-coordinate rejection from a Gaussian envelope)
//! and then run `burn_in` MALA steps. A pilot run, separate from the batch,
//! fixes the step size and the rescaling to unit per-coordinate variance.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::PotentialParams;
use crate::seed::{derive_seed, rng_from_seed};

/// Stream index reserved for the pilot run.
const PILOT_STREAM: u64 = u64::MAX;
const MIN_ACCEPTANCE: f64 = 0.01;
const TARGET_ACCEPTANCE: (f64, f64) = (0.4, 0.8);
const MAX_HALVINGS: usize = 40;
/// Default number of coordinate samples used to estimate the rescale factor.
pub const DEFAULT_PILOT_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub n: usize,
    pub step_size: f64,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
}

impl ChainConfig {
    /// Defaults: step `1.6/√n`, burn-in `50·n`, thin 10.
    pub fn new(n: usize, seed: u64) -> Self {
        ChainConfig {
            n,
            step_size: 1.6 / (n.max(1) as f64).sqrt(),
            burn_in: 50 * n,
            thin: 10,
            seed,
        }
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n", "dimension must be >= 1"));
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::invalid(
                "step_size",
                format!("must be finite and > 0, got {}", self.step_size),
            ));
        }
        if self.thin == 0 {
            return Err(Error::invalid("thin", "must be >= 1"));
        }
        Ok(())
    }
}

/// Outcome of the pilot run: tuned step size and rescale factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tuning {
    pub step_size: f64,
    pub acceptance: f64,
    /// `1/√(pilot estimate of E[X_i²])`.
    pub rescale: f64,
    pub pilot_samples: usize,
}

/// Where a batch came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    GaussianBaseline { seed: u64 },
    Mala {
        potential: PotentialParams,
        config: ChainConfig,
        tuning: Tuning,
    },
}

/// `m` vectors of dimension `n`, stored column-major (vector `p` occupies
/// `data[p*n .. (p+1)*n]`), already multiplied by `rescale`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub n: usize,
    pub m: usize,
    pub data: Vec<f64>,
    pub rescale: f64,
    pub acceptance_rate: f64,
    pub provenance: Provenance,
}

impl SampleBatch {
    pub fn vector(&self, p: usize) -> &[f64] {
        &self.data[p * self.n..(p + 1) * self.n]
    }

    pub fn vectors(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n)
    }

    /// Pooled `E[X_i²]` with its Monte Carlo standard error.
    pub fn pooled_second_moment(&self) -> (f64, f64) {
        mean_and_se(self.data.iter().map(|x| x * x))
    }
}

fn mean_and_se(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut count, mut mean, mut m2) = (0usize, 0.0, 0.0);
    for v in values {
        count += 1;
        let d = v - mean;
        mean += d / count as f64;
        m2 += d * (v - mean);
    }
    if count < 2 {
        return (mean, f64::INFINITY);
    }
    let var = m2 / (count - 1) as f64;
    (mean, (var / count as f64).sqrt())
}

/// Exact draw from `∝ exp(−b x² − c_pot x⁴)` by rejection from `N(0, 1/(2b))`.
fn reference_coordinate(rng: &mut ChaCha8Rng, b: f64, c_pot: f64) -> f64 {
    let sd = (0.5 / b).sqrt();
    loop {
        let g: f64 = rng.sample(StandardNormal);
        let x = sd * g;
        if c_pot == 0.0 || rng.random::<f64>() < (-c_pot * x.powi(4)).exp() {
            return x;
        }
    }
}

struct Chain<'a> {
    params: &'a PotentialParams,
    rng: ChaCha8Rng,
    x: Vec<f64>,
    grad: Vec<f64>,
    value: f64,
    prop: Vec<f64>,
    prop_grad: Vec<f64>,
    accepted: usize,
    proposed: usize,
}

impl<'a> Chain<'a> {
    fn start(params: &'a PotentialParams, n: usize, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let x: Vec<f64> = (0..n)
            .map(|_| reference_coordinate(&mut rng, params.b(), params.c_pot()))
            .collect();
        let mut grad = vec![0.0; n];
        let value = params.value_and_gradient(&x, &mut grad);
        Chain {
            params,
            rng,
            x,
            grad,
            value,
            prop: vec![0.0; n],
            prop_grad: vec![0.0; n],
            accepted: 0,
            proposed: 0,
        }
    }

    fn step(&mut self, h: f64) {
        let half_h2 = 0.5 * h * h;
        let mut forward = 0.0;
        for ((p, &xi), &gi) in self.prop.iter_mut().zip(&self.x).zip(&self.grad) {
            let xi_noise: f64 = self.rng.sample(StandardNormal);
            *p = xi - half_h2 * gi + h * xi_noise;
            forward += xi_noise * xi_noise;
        }
        let prop_value = self.params.value_and_gradient(&self.prop, &mut self.prop_grad);
        // log q(x | x') with x' the proposal
        let mut backward = 0.0;
        for ((&xi, &pi), &gp) in self.x.iter().zip(&self.prop).zip(&self.prop_grad) {
            let r = (xi - pi + half_h2 * gp) / h;
            backward += r * r;
        }
        let log_alpha = -prop_value + self.value - 0.5 * backward + 0.5 * forward;
        self.proposed += 1;
        let u: f64 = self.rng.random();
        if log_alpha.is_finite() && u.ln() < log_alpha || log_alpha == f64::INFINITY {
            std::mem::swap(&mut self.x, &mut self.prop);
            std::mem::swap(&mut self.grad, &mut self.prop_grad);
            self.value = prop_value;
            self.accepted += 1;
        }
    }

    fn run(&mut self, steps: usize, h: f64) {
        for _ in 0..steps {
            self.step(h);
        }
    }

    fn acceptance(&self) -> f64 {
        if self.proposed == 0 {
            1.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

fn check_target(params: &PotentialParams, cfg: &ChainConfig) -> Result<()> {
    cfg.validate()?;
    params.check_log_concave()
}

/// Runs one chain for `cfg.burn_in` steps at `cfg.step_size`; returns the
/// final state and the acceptance rate over the burn-in.
fn run_single(params: &PotentialParams, cfg: &ChainConfig, seed: u64) -> Result<(Vec<f64>, f64)> {
    let mut chain = Chain::start(params, cfg.n, seed);
    chain.run(cfg.burn_in, cfg.step_size);
    let acc = chain.acceptance();
    if cfg.burn_in > 0 && acc < MIN_ACCEPTANCE {
        return Err(Error::Tuning {
            acceptance: acc,
            step_size: cfg.step_size,
            replication: None,
        });
    }
    Ok((chain.x, acc))
}

/// One draw from `e^{−V}` after `cfg.burn_in` MALA steps (unscaled).
pub fn sample_vector(params: &PotentialParams, cfg: &ChainConfig) -> Result<Vec<f64>> {
    check_target(params, cfg)?;
    run_single(params, cfg, cfg.seed).map(|(x, _)| x)
}

/// `draws` states of a single chain, recorded every `cfg.thin` steps after
/// `cfg.burn_in` (unscaled, `draws × n` row-major).
pub fn run_chain(params: &PotentialParams, cfg: &ChainConfig, draws: usize) -> Result<Vec<f64>> {
    check_target(params, cfg)?;
    let mut chain = Chain::start(params, cfg.n, cfg.seed);
    chain.run(cfg.burn_in, cfg.step_size);
    let mut out = Vec::with_capacity(draws * cfg.n);
    for _ in 0..draws {
        chain.run(cfg.thin, cfg.step_size);
        out.extend_from_slice(&chain.x);
    }
    if chain.acceptance() < MIN_ACCEPTANCE {
        return Err(Error::Tuning {
            acceptance: chain.acceptance(),
            step_size: cfg.step_size,
            replication: None,
        });
    }
    Ok(out)
}

/// Pilot run: halves the step size until acceptance reaches 0.4, then
/// estimates `E[X_i²]` from at least `pilot_samples` coordinates.
pub fn tune(params: &PotentialParams, cfg: &ChainConfig, pilot_samples: usize) -> Result<Tuning> {
    check_target(params, cfg)?;
    let n = cfg.n;
    let pilot_seed = derive_seed(cfg.seed, PILOT_STREAM);
    let tuning_steps = cfg.burn_in.max(200);
    let mut h = cfg.step_size;
    let mut acceptance = 0.0;
    for attempt in 0..=MAX_HALVINGS {
        let mut chain = Chain::start(params, n, derive_seed(pilot_seed, attempt as u64));
        chain.run(tuning_steps, h);
        acceptance = chain.acceptance();
        if acceptance >= TARGET_ACCEPTANCE.0 {
            break;
        }
        h *= 0.5;
    }
    if acceptance < MIN_ACCEPTANCE {
        return Err(Error::Tuning {
            acceptance,
            step_size: h,
            replication: None,
        });
    }

    let vectors_needed = pilot_samples.div_ceil(n).max(1);
    let chains = vectors_needed.min(16);
    let per_chain = vectors_needed.div_ceil(chains);
    let sums: Vec<(f64, usize)> = (0..chains)
        .into_par_iter()
        .map(|k| {
            let mut chain = Chain::start(params, n, derive_seed(pilot_seed, 1000 + k as u64));
            chain.run(cfg.burn_in, h);
            let (mut s, mut count) = (0.0, 0);
            for _ in 0..per_chain {
                chain.run(cfg.thin, h);
                s += chain.x.iter().map(|v| v * v).sum::<f64>();
                count += n;
            }
            (s, count)
        })
        .collect();
    let (total, count) = sums
        .iter()
        .fold((0.0, 0usize), |(s, c), &(ds, dc)| (s + ds, c + dc));
    let second = total / count as f64;
    Ok(Tuning {
        step_size: h,
        acceptance,
        rescale: 1.0 / second.sqrt(),
        pilot_samples: count,
    })
}

/// `m` independent copies with an already computed [`Tuning`]. Copy `p`
/// runs on seed `derive_seed(cfg.seed, p)`.
pub fn draw_batch_tuned(
    params: &PotentialParams,
    m: usize,
    cfg: &ChainConfig,
    tuning: &Tuning,
) -> Result<SampleBatch> {
    check_target(params, cfg)?;
    if m == 0 {
        return Err(Error::invalid("m", "batch size must be >= 1"));
    }
    let run_cfg = ChainConfig {
        step_size: tuning.step_size,
        ..*cfg
    };
    let draws: Vec<Result<(Vec<f64>, f64)>> = (0..m)
        .into_par_iter()
        .map(|p| run_single(params, &run_cfg, derive_seed(cfg.seed, p as u64)))
        .collect();
    let mut data = Vec::with_capacity(cfg.n * m);
    let mut acc_sum = 0.0;
    for draw in draws {
        let (x, acc) = draw?;
        data.extend(x.iter().map(|v| v * tuning.rescale));
        acc_sum += acc;
    }
    Ok(SampleBatch {
        n: cfg.n,
        m,
        data,
        rescale: tuning.rescale,
        acceptance_rate: acc_sum / m as f64,
        provenance: Provenance::Mala {
            potential: *params,
            config: run_cfg,
            tuning: *tuning,
        },
    })
}

/// Pilot run followed by `m` independent rescaled copies.
pub fn draw_batch(params: &PotentialParams, m: usize, cfg: &ChainConfig) -> Result<SampleBatch> {
    let tuning = tune(params, cfg, DEFAULT_PILOT_SAMPLES)?;
    draw_batch_tuned(params, m, cfg, &tuning)
}

/// `m` vectors of `n` i.i.d. standard normal coordinates.
pub fn gaussian_baseline(n: usize, m: usize, seed: u64) -> SampleBatch {
    let mut rng = rng_from_seed(seed);
    let data = (0..n * m).map(|_| rng.sample(StandardNormal)).collect();
    SampleBatch {
        n,
        m,
        data,
        rescale: 1.0,
        acceptance_rate: 1.0,
        provenance: Provenance::GaussianBaseline { seed },
    }
}

/// Fourth moment and dependence parameter with standard errors taken across
/// independent vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimates {
    /// Pooled `E[X_i⁴]`.
    pub mu_hat: f64,
    /// `n⁻¹ Var(Σ X_i²)` across vectors.
    pub kappa_hat: f64,
    pub se_mu: f64,
    pub se_kappa: f64,
    /// Standard error of `mu_hat − 1 − kappa_hat` (joint delta method).
    pub se_gap: f64,
    pub replications: usize,
}

impl MomentEstimates {
    /// `μ̂ − 1 − κ̂`, zero for independent coordinates.
    pub fn dependence_gap(&self) -> f64 {
        self.mu_hat - 1.0 - self.kappa_hat
    }

    /// Computes the estimates from a batch, one replication per vector.
    pub fn from_batch(batch: &SampleBatch) -> Self {
        Self::from_stats(batch.n, &vector_stats(batch))
    }

    /// Reduces per-vector `(n⁻¹ Σ x_i⁴, Σ x_i²)` pairs, in order.
    pub fn from_stats(n: usize, stats: &[(f64, f64)]) -> Self {
        let n = n as f64;
        let r = stats.len() as f64;
        let mu_hat = stats.iter().map(|s| s.0).sum::<f64>() / r;
        let sq_mean = stats.iter().map(|s| s.1).sum::<f64>() / r;
        let var_sq = stats.iter().map(|s| (s.1 - sq_mean).powi(2)).sum::<f64>() / (r - 1.0);
        let kappa_hat = var_sq / n;
        // influence functions of the two estimators
        let if_mu: Vec<f64> = stats.iter().map(|s| s.0 - mu_hat).collect();
        let if_kappa: Vec<f64> = stats
            .iter()
            .map(|s| ((s.1 - sq_mean).powi(2) - var_sq) / n)
            .collect();
        let se = |vals: &mut dyn Iterator<Item = f64>| -> f64 {
            let v: f64 = vals.map(|x| x * x).sum::<f64>() / (r - 1.0);
            (v / r).sqrt()
        };
        let se_mu = se(&mut if_mu.iter().copied());
        let se_kappa = se(&mut if_kappa.iter().copied());
        let se_gap = se(&mut if_mu.iter().zip(&if_kappa).map(|(a, b)| a - b));
        MomentEstimates {
            mu_hat,
            kappa_hat,
            se_mu,
            se_kappa,
            se_gap,
            replications: stats.len(),
        }
    }
}

/// `(n⁻¹ Σ x_i⁴, Σ x_i²)` for every vector of the batch.
pub fn vector_stats(batch: &SampleBatch) -> Vec<(f64, f64)> {
    let n = batch.n as f64;
    batch
        .vectors()
        .map(|v| {
            let q = v.iter().map(|x| x.powi(4)).sum::<f64>() / n;
            let s = v.iter().map(|x| x * x).sum::<f64>();
            (q, s)
        })
        .collect()
}

/// Moment estimates from `replications` independent rescaled vectors.
pub fn estimate_moments(
    params: &PotentialParams,
    replications: usize,
    cfg: &ChainConfig,
) -> Result<MomentEstimates> {
    if replications < 30 {
        return Err(Error::invalid(
            "replications",
            format!("moment estimation needs >= 30 replications, got {replications}"),
        ));
    }
    let batch = draw_batch(params, replications, cfg)?;
    Ok(MomentEstimates::from_batch(&batch))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_config_defaults_and_validation() {
        let cfg = ChainConfig::new(100, 7);
        assert!((cfg.step_size - 0.16).abs() < 1e-15);
        assert_eq!(cfg.burn_in, 5000);
        assert!(cfg.validate().is_ok());
        assert!(ChainConfig { thin: 0, ..cfg }.validate().is_err());
        assert!(ChainConfig { step_size: 0.0, ..cfg }.validate().is_err());
        assert!(ChainConfig { n: 0, ..cfg }.validate().is_err());
    }

    #[test]
    fn sample_vector_is_deterministic() {
        let p = PotentialParams::new(1.0, 1.0, 1.0).unwrap();
        let cfg = ChainConfig::new(8, 99).with_burn_in(50);
        let a = sample_vector(&p, &cfg).unwrap();
        let b = sample_vector(&p, &cfg).unwrap();
        assert_eq!(a, b);
        let c = sample_vector(&p, &cfg.with_seed(100)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn non_convex_target_is_rejected() {
        let p = PotentialParams::new(2.0, 0.5, 0.0).unwrap();
        let cfg = ChainConfig::new(4, 1);
        assert!(matches!(
            sample_vector(&p, &cfg),
            Err(Error::InvalidParameter { name: "a", .. })
        ));
    }

    #[test]
    fn huge_step_is_a_tuning_failure() {
        let p = PotentialParams::new(0.0, 1.0, 1.0).unwrap();
        let cfg = ChainConfig {
            step_size: 1e3,
            ..ChainConfig::new(50, 3).with_burn_in(200)
        };
        assert!(matches!(sample_vector(&p, &cfg), Err(Error::Tuning { .. })));
    }

    #[test]
    fn gaussian_baseline_reproducible() {
        let a = gaussian_baseline(2, 3, 11);
        let b = gaussian_baseline(2, 3, 11);
        assert_eq!(a.data.len(), 6);
        assert_eq!(a, b);
        assert_eq!(a.rescale, 1.0);
        assert_ne!(a.data, gaussian_baseline(2, 3, 12).data);
    }

    #[test]
    fn single_vector_batch() {
        let p = PotentialParams::new(0.5, 1.0, 1.0).unwrap();
        let cfg = ChainConfig::new(20, 5).with_burn_in(100);
        let batch = draw_batch(&p, 1, &cfg).unwrap();
        assert_eq!(batch.m, 1);
        assert_eq!(batch.vector(0).len(), 20);
        assert!(batch.rescale > 0.0);
        assert!((0.0..=1.0).contains(&batch.acceptance_rate));
    }

    #[test]
    fn tuning_halves_step_until_acceptable() {
        let p = PotentialParams::new(0.0, 1.0, 1.0).unwrap();
        let cfg = ChainConfig {
            step_size: 4.0,
            ..ChainConfig::new(1, 17).with_burn_in(400)
        };
        let t = tune(&p, &cfg, 2000).unwrap();
        assert!(t.step_size < 4.0);
        assert!(t.acceptance >= 0.4);
        assert!(t.pilot_samples >= 2000);
    }

    #[test]
    fn moment_estimation_needs_replications() {
        let p = PotentialParams::gaussian();
        assert!(estimate_moments(&p, 10, &ChainConfig::new(5, 1)).is_err());
    }
}
