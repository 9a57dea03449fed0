//! The example confining potential
//!
//! ```text
//! V(x) = (a/n) (Σ (x_i² − m_bc))² + b Σ x_i² + c_pot Σ x_i⁴
//! ```
//!
//! where `m_bc` is the second moment of the one-dimensional law
//! `∝ exp(−b x² − c_pot x⁴)` (the `a = 0` product law). With `a = 0, b = ½,
//! c_pot = 0` the measure `e^{−V}` is the standard Gaussian.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_adaptive, GaussLegendre};

/// Integrand cut-off relative to the peak of `exp(−b x² − c_pot x⁴)`.
const TAIL_RATIO: f64 = 1e-18;
const MOMENT_TOL: f64 = 1e-13;

/// `(a, b, c_pot)` plus the cached reference moments `m_bc` and `sigma_bc`.
///
/// Serialized as `{"a": …, "b": …, "c_pot": …}`; the derived constants are
/// always recomputed on load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PotentialSpec", into = "PotentialSpec")]
pub struct PotentialParams {
    a: f64,
    b: f64,
    c_pot: f64,
    m_bc: f64,
    sigma_bc: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PotentialSpec {
    a: f64,
    b: f64,
    c_pot: f64,
}

impl TryFrom<PotentialSpec> for PotentialParams {
    type Error = Error;
    fn try_from(s: PotentialSpec) -> Result<Self> {
        PotentialParams::new(s.a, s.b, s.c_pot)
    }
}

impl From<PotentialParams> for PotentialSpec {
    fn from(p: PotentialParams) -> Self {
        PotentialSpec {
            a: p.a,
            b: p.b,
            c_pot: p.c_pot,
        }
    }
}

impl PotentialParams {
    /// Validates the triple and computes `m_bc`, `sigma_bc` by quadrature.
    pub fn new(a: f64, b: f64, c_pot: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && c_pot.is_finite()) {
            return Err(Error::NonFinite("potential parameters"));
        }
        if a < 0.0 {
            return Err(Error::invalid("a", format!("must be >= 0, got {a}")));
        }
        if b <= 0.0 {
            return Err(Error::invalid("b", format!("must be > 0, got {b}")));
        }
        if c_pot < 0.0 {
            return Err(Error::invalid("c_pot", format!("must be >= 0, got {c_pot}")));
        }
        let m_bc = compute_mbc(b, c_pot)?;
        let sigma_bc = compute_sigma_bc(b, c_pot)?;
        Ok(PotentialParams {
            a,
            b,
            c_pot,
            m_bc,
            sigma_bc,
        })
    }

    /// Standard Gaussian product law (`a = 0, b = ½, c_pot = 0`).
    pub fn gaussian() -> Self {
        PotentialParams {
            a: 0.0,
            b: 0.5,
            c_pot: 0.0,
            m_bc: 1.0,
            sigma_bc: 2.0,
        }
    }

    /// Same potential with the centering constant replaced by `m_bc`.
    /// Intended for evaluating the formula at hand-picked constants.
    pub fn with_centering(self, m_bc: f64) -> Self {
        PotentialParams { m_bc, ..self }
    }

    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn c_pot(&self) -> f64 {
        self.c_pot
    }
    pub fn m_bc(&self) -> f64 {
        self.m_bc
    }
    pub fn sigma_bc(&self) -> f64 {
        self.sigma_bc
    }

    /// `inf_x λ_min(Hess V(x)) = 2b − 4a·m_bc`, reached at the origin.
    pub fn hessian_lower_bound(&self) -> f64 {
        2.0 * self.b - 4.0 * self.a * self.m_bc
    }

    /// Errors unless `e^{−V}` is uniformly log-concave.
    pub fn check_log_concave(&self) -> Result<()> {
        let bound = self.hessian_lower_bound();
        if bound <= 0.0 {
            return Err(Error::invalid(
                "a",
                format!("potential is not uniformly convex: 2b - 4a*m_bc = {bound:.4} <= 0"),
            ));
        }
        Ok(())
    }

    /// Fused value and gradient without input validation; `grad` must have
    /// the length of `x`.
    pub(crate) fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let n = x.len() as f64;
        let mut centered = 0.0;
        let mut sq = 0.0;
        let mut quart = 0.0;
        for &xi in x {
            let x2 = xi * xi;
            centered += x2 - self.m_bc;
            sq += x2;
            quart += x2 * x2;
        }
        let coupling = 4.0 * self.a / n * centered;
        for (g, &xi) in grad.iter_mut().zip(x) {
            *g = coupling * xi + 2.0 * self.b * xi + 4.0 * self.c_pot * xi * xi * xi;
        }
        self.a / n * centered * centered + self.b * sq + self.c_pot * quart
    }
}

fn check_vector(x: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::invalid("x", "vector must have length >= 1"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("potential argument"));
    }
    Ok(())
}

pub fn eval_potential(params: &PotentialParams, x: &[f64]) -> Result<f64> {
    check_vector(x)?;
    let mut scratch = vec![0.0; x.len()];
    Ok(params.value_and_gradient(x, &mut scratch))
}

/// `∂_i V = (4a/n) Σ_j (x_j² − m_bc) · x_i + 2b x_i + 4 c_pot x_i³`.
pub fn grad_potential(params: &PotentialParams, x: &[f64]) -> Result<Vec<f64>> {
    check_vector(x)?;
    let mut g = vec![0.0; x.len()];
    params.value_and_gradient(x, &mut g);
    Ok(g)
}

/// Point where `b x² + c_pot x⁴` reaches `−ln(TAIL_RATIO)`.
fn truncation_point(b: f64, c_pot: f64) -> f64 {
    let level = -TAIL_RATIO.ln();
    let x2 = if c_pot > 0.0 {
        (-b + (b * b + 4.0 * c_pot * level).sqrt()) / (2.0 * c_pot)
    } else {
        level / b
    };
    x2.sqrt()
}

fn check_weight_params(b: f64, c_pot: f64) -> Result<()> {
    if !(b.is_finite() && b > 0.0) {
        return Err(Error::invalid("b", format!("must be finite and > 0, got {b}")));
    }
    if !(c_pot.is_finite() && c_pot >= 0.0) {
        return Err(Error::invalid(
            "c_pot",
            format!("must be finite and >= 0, got {c_pot}"),
        ));
    }
    Ok(())
}

/// `k`-th moment of the law `∝ exp(−b x² − c_pot x⁴)`. Odd moments are
/// exactly zero.
pub fn moment_1d(b: f64, c_pot: f64, k: u32) -> Result<f64> {
    check_weight_params(b, c_pot)?;
    if k % 2 == 1 {
        return Ok(0.0);
    }
    let x_max = truncation_point(b, c_pot);
    let weight = |x: f64| (-b * x * x - c_pot * x.powi(4)).exp();
    let z = integrate_adaptive(weight, 0.0, x_max, MOMENT_TOL, 400)?;
    if k == 0 {
        return Ok(1.0);
    }
    let num = integrate_adaptive(|x| x.powi(k as i32) * weight(x), 0.0, x_max, MOMENT_TOL, 400)?;
    Ok(num / z)
}

/// `m_bc = E[X²]` under the one-dimensional reference law.
pub fn compute_mbc(b: f64, c_pot: f64) -> Result<f64> {
    moment_1d(b, c_pot, 2)
}

/// `sigma_bc = E[(X² − m_bc)²]` under the one-dimensional reference law.
pub fn compute_sigma_bc(b: f64, c_pot: f64) -> Result<f64> {
    let m2 = compute_mbc(b, c_pot)?;
    let m4 = moment_1d(b, c_pot, 4)?;
    Ok((m4 - m2 * m2).max(0.0))
}

/// Distribution function of the one-dimensional reference law.
pub fn cdf_1d(b: f64, c_pot: f64, x: f64) -> Result<f64> {
    check_weight_params(b, c_pot)?;
    let x_max = truncation_point(b, c_pot);
    if x >= x_max {
        return Ok(1.0);
    }
    if x <= -x_max {
        return Ok(0.0);
    }
    let weight = |t: f64| (-b * t * t - c_pot * t.powi(4)).exp();
    let half = integrate_adaptive(weight, 0.0, x_max, MOMENT_TOL, 400)?;
    let partial = integrate_adaptive(weight, 0.0, x.abs(), MOMENT_TOL, 400)?;
    let f = 0.5 * partial / half;
    Ok(if x >= 0.0 { 0.5 + f } else { 0.5 - f })
}

/// Exact moments of one coordinate of `e^{−V}` at dimension `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteMoments {
    pub n: usize,
    /// `E[X₁²]` before rescaling.
    pub second: f64,
    /// `E[X₁⁴]/E[X₁²]²`: the fourth moment after rescaling to unit variance.
    pub mu: f64,
    /// `n⁻¹ Var(Σ X_i²)/E[X₁²]²`, likewise after rescaling.
    pub kappa: f64,
}

const HS_G_MAX: f64 = 9.0;
const HS_G_PANELS: usize = 12;
const HS_X_PANELS: usize = 64;
const HS_NODES: usize = 20;

/// Finite-`n` moments of the coupled law by linearizing the square,
///
/// ```text
/// e^{−(a/n)T²} = π^{−1/2} ∫ e^{−g²} e^{2ig√(a/n) T} dg,   T = Σ (x_i² − m_bc),
/// ```
///
/// which turns every moment into a one-dimensional `g` integral of products
/// of one-coordinate transforms `φ_k(t) = E₀[X^k e^{it(X² − m_bc)}]`.
pub fn finite_n_moments(params: &PotentialParams, n: usize) -> Result<FiniteMoments> {
    if n == 0 {
        return Err(Error::invalid("n", "dimension must be >= 1"));
    }
    let (b, c, m) = (params.b, params.c_pot, params.m_bc);
    if params.a == 0.0 {
        let m4 = moment_1d(b, c, 4)?;
        let mu = m4 / (m * m);
        return Ok(FiniteMoments {
            n,
            second: m,
            mu,
            kappa: mu - 1.0,
        });
    }
    let rule = GaussLegendre::new(HS_NODES);
    let (xs, wx) = rule.composite(0.0, truncation_point(b, c), HS_X_PANELS);
    let weights: Vec<f64> = xs
        .iter()
        .zip(&wx)
        .map(|(&x, &w)| w * (-b * x * x - c * x.powi(4)).exp())
        .collect();
    let norm: f64 = weights.iter().sum();
    let phis = |t: f64| -> [Complex64; 3] {
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for (&x, &w) in xs.iter().zip(&weights) {
            let x2 = x * x;
            let e = Complex64::from_polar(w / norm, t * (x2 - m));
            out[0] += e;
            out[1] += e * x2;
            out[2] += e * x2 * x2;
        }
        out
    };
    let nf = n as f64;
    let scale = 2.0 * (params.a / nf).sqrt();
    let (gs, wg) = rule.composite(0.0, HS_G_MAX, HS_G_PANELS);
    // [Z, E x₁², E x₁⁴, E x₁²x₂²] up to the common factor; g ↦ −g conjugates
    let mut acc = [0.0f64; 4];
    for (&g, &w) in gs.iter().zip(&wg) {
        let [p0, p2, p4] = phis(scale * g);
        let base = w * (-g * g).exp();
        let pow_n2 = if n >= 2 { p0.powi(n as i32 - 2) } else { Complex64::new(0.0, 0.0) };
        let pow_n1 = p0.powi(n as i32 - 1);
        acc[0] += base * (pow_n1 * p0).re;
        acc[1] += base * (pow_n1 * p2).re;
        acc[2] += base * (pow_n1 * p4).re;
        acc[3] += base * (pow_n2 * p2 * p2).re;
    }
    let second = acc[1] / acc[0];
    let fourth = acc[2] / acc[0];
    let cross = acc[3] / acc[0];
    let var_sum = nf * fourth + nf * (nf - 1.0) * cross - (nf * second).powi(2);
    let s2 = second * second;
    Ok(FiniteMoments {
        n,
        second,
        mu: fourth / s2,
        kappa: var_sum / (nf * s2),
    })
}
