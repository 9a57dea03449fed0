//! Closed-form limits for the block matrix `W`.
//!
//! `s¹` and `s²` are the limiting normalized traces of the `n`- and
//! `m`-blocks of `(W − z)⁻¹`. They are the Herglotz roots of
//!
//! ```text
//! z s¹² + (z² − c + 1) s¹ + z = 0
//! c z s²² + (z² + c − 1) s² + z = 0
//! ```
//!
//! and satisfy `s² = −1/(z + s¹)`, `s¹ = −1/(z + c s²)`. The square-root
//! branch is never fixed globally: both roots are formed and the one with
//! `Im s · Im z > 0` is kept. The two roots of each quadratic have product
//! `1` (resp. `1/c`), so exactly one of them qualifies off the real axis.

pub mod hs;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// Threshold on `|discriminant|` below which derivatives are refused.
const BRANCH_EPS: f64 = 1e-12;

/// Limit parameters: aspect ratio `c`, offset `σ = lim (cn − m)`, fourth
/// moment `μ` and dependence `κ = lim n⁻¹ Var(Σ X_i²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryParams {
    pub c: f64,
    pub sigma: f64,
    pub mu: f64,
    pub kappa: f64,
}

impl TheoryParams {
    pub fn new(c: f64, sigma: f64, mu: f64, kappa: f64) -> Result<Self> {
        let p = TheoryParams {
            c,
            sigma,
            mu,
            kappa,
        };
        p.validate()?;
        Ok(p)
    }

    /// The i.i.d. Gaussian values `μ = 3`, `κ = 2`.
    pub fn gaussian(c: f64, sigma: f64) -> Result<Self> {
        Self::new(c, sigma, 3.0, 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        check_ratio(self.c)?;
        if !(self.sigma.is_finite() && self.mu.is_finite() && self.kappa.is_finite()) {
            return Err(Error::NonFinite("theory parameters"));
        }
        if self.kappa < 0.0 {
            return Err(Error::invalid("kappa", format!("must be >= 0, got {}", self.kappa)));
        }
        Ok(())
    }
}

/// `{z : |Im z| ≥ v0, |z| < r}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalRegion {
    pub v0: f64,
    pub r: f64,
}

impl Default for EvalRegion {
    fn default() -> Self {
        EvalRegion { v0: 0.1, r: 10.0 }
    }
}

impl EvalRegion {
    pub fn validate(&self) -> Result<()> {
        if !(self.v0 > 0.0 && self.v0 < self.r && self.r.is_finite()) {
            return Err(Error::invalid(
                "region",
                format!("need 0 < v0 < r, got v0 = {}, r = {}", self.v0, self.r),
            ));
        }
        Ok(())
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.im.abs() >= self.v0 && z.norm() <= self.r
    }
}

/// The 200-point reference grid in the default region: 20 real parts in
/// `[−6, 6]` against imaginary parts `±{0.1, 0.3, 1, 3, 7}`.
pub fn standard_grid() -> Vec<Complex64> {
    let ims = [0.1, -0.1, 0.3, -0.3, 1.0, -1.0, 3.0, -3.0, 7.0, -7.0];
    let mut out = Vec::with_capacity(200);
    for im in ims {
        for k in 0..20 {
            let re = -6.0 + 12.0 * k as f64 / 19.0;
            out.push(Complex64::new(re, im));
        }
    }
    out
}

fn check_ratio(c: f64) -> Result<()> {
    if !c.is_finite() {
        return Err(Error::NonFinite("aspect ratio"));
    }
    if c < 1.0 {
        return Err(Error::invalid(
            "c",
            format!("aspect ratio must satisfy c >= 1 (m >= n), got {c}"),
        ));
    }
    Ok(())
}

fn check_point(z: Complex64) -> Result<()> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::NonFinite("evaluation point"));
    }
    if z.im == 0.0 {
        return Err(Error::RealAxis { re: z.re, im: z.im });
    }
    Ok(())
}

fn herglotz_pick(a: Complex64, b: Complex64, z: Complex64) -> Complex64 {
    let sign = z.im.signum();
    if a.im * sign >= b.im * sign {
        a
    } else {
        b
    }
}

/// `s¹(z) = −(1/2z)(z² − c + 1 − √((z² − c + 1)² − 4z²))`.
pub fn s1_closed(z: Complex64, c: f64) -> Result<Complex64> {
    check_point(z)?;
    check_ratio(c)?;
    let u = z * z - c + 1.0;
    let root = (u * u - 4.0 * z * z).sqrt();
    Ok(herglotz_pick(-(u - root) / (2.0 * z), -(u + root) / (2.0 * z), z))
}

/// `s²(z) = −(1/2cz)(z² + c − 1 − √((z² − 1 + c)² − 4cz²))`.
pub fn s2_closed(z: Complex64, c: f64) -> Result<Complex64> {
    check_point(z)?;
    check_ratio(c)?;
    let u = z * z + c - 1.0;
    let root = (u * u - 4.0 * c * z * z).sqrt();
    Ok(herglotz_pick(
        -(u - root) / (2.0 * c * z),
        -(u + root) / (2.0 * c * z),
        z,
    ))
}

/// Stieltjes transform of the limit law, `(s¹ + c s²)/(1 + c)`.
pub fn s_closed(z: Complex64, c: f64) -> Result<Complex64> {
    Ok((s1_closed(z, c)? + c * s2_closed(z, c)?) / (1.0 + c))
}

/// `∂_z s¹`. Differentiating the quadratic gives
/// `∂_z s¹ = −(s¹² + 2z s¹ + 1)/(2z s¹ + z² − c + 1)`, where the denominator
/// is the selected square root of the discriminant.
pub fn ds1(z: Complex64, c: f64) -> Result<Complex64> {
    let s = s1_closed(z, c)?;
    let root = 2.0 * z * s + z * z - c + 1.0;
    if root.norm_sqr() < BRANCH_EPS {
        return Err(Error::BranchPoint(root.norm_sqr()));
    }
    Ok(-(s * s + 2.0 * z * s + 1.0) / root)
}

/// `∂_z s² = −(c s²² + 2z s² + 1)/(2cz s² + z² + c − 1)`.
pub fn ds2(z: Complex64, c: f64) -> Result<Complex64> {
    let s = s2_closed(z, c)?;
    let root = 2.0 * c * z * s + z * z + c - 1.0;
    if root.norm_sqr() < BRANCH_EPS {
        return Err(Error::BranchPoint(root.norm_sqr()));
    }
    Ok(-(c * s * s + 2.0 * z * s + 1.0) / root)
}

/// Limit `M(z)` of `(n + m)(E[s_{n,m}(z)] − s(z))`:
///
/// ```text
/// M(z) = σ s² + (1 + c ∂s²) (s¹)³ [ −∂s¹/(s¹)² + c((4μ − 5)(s²)² + 2∂s²) ]
///      + (1 + ∂s¹) c (s²)³ [ −∂s²/(s²)² + 2(μ − 2 + κ/2)(s¹)² + 2∂s¹ ]
/// ```
pub fn mean_process(z: Complex64, p: &TheoryParams) -> Result<Complex64> {
    p.validate()?;
    let c = p.c;
    let s1 = s1_closed(z, c)?;
    let s2 = s2_closed(z, c)?;
    let d1 = ds1(z, c)?;
    let d2 = ds2(z, c)?;
    let first = (1.0 + c * d2)
        * s1.powi(3)
        * (-d1 / (s1 * s1) + c * ((4.0 * p.mu - 5.0) * s2 * s2 + 2.0 * d2));
    let second = (1.0 + d1)
        * c
        * s2.powi(3)
        * (-d2 / (s2 * s2) + (2.0 * (p.mu - 2.0 + p.kappa / 2.0) * s1 * s1 + 2.0 * d1));
    Ok(p.sigma * s2 + first + second)
}

const FIXED_POINT_TOL: f64 = 1e-12;
const FIXED_POINT_MAX_ITER: usize = 100_000;
const FIXED_POINT_DAMPING: f64 = 0.5;

/// Damped iteration of `s¹ ← −1/(z + c s²)`, `s² ← −1/(z + s¹)` from
/// `(−1/z, −1/z)`. Requires `|Im z| ≥ 0.1`.
pub fn self_consistent_solve(z: Complex64, c: f64) -> Result<(Complex64, Complex64)> {
    check_point(z)?;
    check_ratio(c)?;
    if z.im.abs() < 0.1 {
        return Err(Error::invalid(
            "z",
            format!("fixed point needs |Im z| >= 0.1, got {}", z.im),
        ));
    }
    let mut s1 = -1.0 / z;
    let mut s2 = -1.0 / z;
    let mut residual = f64::INFINITY;
    for _ in 0..FIXED_POINT_MAX_ITER {
        let next1 = -1.0 / (z + c * s2);
        s1 += FIXED_POINT_DAMPING * (next1 - s1);
        let next2 = -1.0 / (z + s1);
        s2 += FIXED_POINT_DAMPING * (next2 - s2);
        residual = (s1 + 1.0 / (z + c * s2))
            .norm()
            .max((s2 + 1.0 / (z + s1)).norm());
        if residual < FIXED_POINT_TOL {
            return Ok((s1, s2));
        }
    }
    Err(Error::FixedPoint {
        iterations: FIXED_POINT_MAX_ITER,
        residual,
    })
}

/// Limit support of the spectrum of `W` plus the structural atom at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportDescription {
    /// `[−1 − √c, 1 − √c]` and `[√c − 1, √c + 1]`.
    pub intervals: [(f64, f64); 2],
    /// `(c − 1)/(c + 1)`: the share of the `m − n` zero eigenvalues.
    pub atom_at_zero_mass: f64,
}

impl SupportDescription {
    /// Is `x` within `eps` of the support intervals?
    pub fn contains_fattened(&self, x: f64, eps: f64) -> bool {
        self.intervals
            .iter()
            .any(|&(lo, hi)| x >= lo - eps && x <= hi + eps)
    }

    pub fn has_atom(&self) -> bool {
        self.atom_at_zero_mass > 0.0
    }
}

pub fn mp_support(c: f64) -> Result<SupportDescription> {
    check_ratio(c)?;
    let r = c.sqrt();
    Ok(SupportDescription {
        intervals: [(-1.0 - r, 1.0 - r), (r - 1.0, r + 1.0)],
        atom_at_zero_mass: (c - 1.0) / (c + 1.0),
    })
}

/// `(1/π) Im s(x + i·eps)` with the zero atom removed.
pub fn density_f(x: f64, c: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps <= 1e-2) {
        return Err(Error::invalid("eps", format!("must lie in (0, 1e-2], got {eps}")));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("density argument"));
    }
    let z = Complex64::new(x, eps);
    let atom = mp_support(c)?.atom_at_zero_mass;
    let continuous = s_closed(z, c)? + atom / z;
    Ok(continuous.im / std::f64::consts::PI)
}

const LIMIT_QUAD_ORDER: usize = 64;
const LIMIT_QUAD_PANELS: usize = 8;
const LIMIT_EPS: f64 = 1e-13;

/// `∫ f dF` for the limit law: the zero atom plus the continuous part on
/// each interval, integrated after `x = mid + half·cos θ` to absorb the
/// square-root edges.
pub fn integrate_against_limit(f: impl Fn(f64) -> f64, c: f64) -> Result<f64> {
    let support = mp_support(c)?;
    let intervals: Vec<(f64, f64)> = if support.has_atom() {
        support.intervals.to_vec()
    } else {
        // c = 1: both intervals touch at 0 where the density does not vanish
        vec![(support.intervals[0].0, support.intervals[1].1)]
    };
    let rule = GaussLegendre::new(LIMIT_QUAD_ORDER);
    let (thetas, weights) = rule.composite(0.0, std::f64::consts::PI, LIMIT_QUAD_PANELS);
    let mut total = support.atom_at_zero_mass * f(0.0);
    for (lo, hi) in intervals {
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        for (&t, &w) in thetas.iter().zip(&weights) {
            let x = mid + half * t.cos();
            total += w * half * t.sin() * f(x) * density_f(x, c, LIMIT_EPS)?;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn semicircle_degeneration() {
        let v = s1_closed(c(0.0, 2.0), 1.0).unwrap();
        assert!((v - c(0.0, 2f64.sqrt() - 1.0)).norm() < 1e-12);
        let v = s2_closed(c(0.0, 2.0), 1.0).unwrap();
        assert!((v - c(0.0, 0.414_213_562_4)).norm() < 1e-10);
        for z in standard_grid() {
            let a = s1_closed(z, 1.0).unwrap();
            let b = s2_closed(z, 1.0).unwrap();
            assert!((a - b).norm() < 1e-14);
            assert!((s_closed(z, 1.0).unwrap() - a).norm() < 1e-15);
        }
    }

    #[test]
    fn far_field_asymptotics() {
        let z = c(0.0, 100.0);
        let v = s1_closed(z, 2.0).unwrap();
        assert!(((v - (-1.0 / z)) / (-1.0 / z)).norm() < 1e-3);
        let v = s_closed(z, 2.0).unwrap();
        assert!(((v + 1.0 / z) * z).norm() < 1e-3);
        let d = ds1(z, 2.0).unwrap();
        assert!(((d - 1.0 / (z * z)) * z * z).norm() < 1e-3);
    }

    #[test]
    fn quadratic_and_pair_identities() {
        let z = c(1.0, 1.0);
        let s1 = s1_closed(z, 2.0).unwrap();
        let s2 = s2_closed(z, 2.0).unwrap();
        assert!((z * s1 * s1 + (z * z - 1.0) * s1 + z).norm() < 1e-12);
        assert!((s2 + 1.0 / (z + s1)).norm() < 1e-12);
        let s = s_closed(c(0.0, 2.0), 2.0).unwrap();
        let parts = (s1_closed(c(0.0, 2.0), 2.0).unwrap() + 2.0 * s2_closed(c(0.0, 2.0), 2.0).unwrap()) / 3.0;
        assert!((s - parts).norm() < 1e-15);
    }

    #[test]
    fn schwarz_reflection() {
        for z in [c(0.7, 0.4), c(-2.0, 1.5), c(3.0, 0.1)] {
            for cc in [1.0, 2.5] {
                let w = -z.conj();
                // s(−z̄) = −conj(s(z)) for a symmetric law
                assert!((s1_closed(w, cc).unwrap() + s1_closed(z, cc).unwrap().conj()).norm() < 1e-13);
                assert!((ds1(w, cc).unwrap() - ds1(z, cc).unwrap().conj()).norm() < 1e-12);
                assert!((s2_closed(z.conj(), cc).unwrap() - s2_closed(z, cc).unwrap().conj()).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn rejects_real_axis_and_small_ratio() {
        assert!(matches!(s1_closed(c(1.0, 0.0), 2.0), Err(Error::RealAxis { .. })));
        assert!(s2_closed(c(1.0, 1.0), 0.5).is_err());
        assert!(TheoryParams::new(2.0, 0.0, 3.0, -1.0).is_err());
    }

    #[test]
    fn branch_point_proximity_is_reported() {
        // s¹ has a branch point at z = √c − 1 on the real axis
        let z = c(2f64.sqrt() - 1.0, 1e-14);
        assert!(matches!(ds1(z, 2.0), Err(Error::BranchPoint(_))));
    }

    #[test]
    fn sigma_and_kappa_enter_linearly() {
        let z = c(0.3, 1.2);
        let base = TheoryParams::new(2.0, 0.0, 3.0, 2.0).unwrap();
        let m0 = mean_process(z, &base).unwrap();
        let m1 = mean_process(z, &TheoryParams { sigma: 1.0, ..base }).unwrap();
        assert!((m1 - m0 - s2_closed(z, 2.0).unwrap()).norm() < 1e-13);
        let mk = mean_process(z, &TheoryParams { kappa: 3.0, ..base }).unwrap();
        let s1 = s1_closed(z, 2.0).unwrap();
        let s2 = s2_closed(z, 2.0).unwrap();
        let slope = (1.0 + ds1(z, 2.0).unwrap()) * 2.0 * s2.powi(3) * s1 * s1;
        assert!((mk - m0 - slope).norm() < 1e-12);
    }

    #[test]
    fn fixed_point_matches_closed_forms() {
        let (a, b) = self_consistent_solve(c(0.0, 2.0), 1.0).unwrap();
        assert!((a - c(0.0, 0.414_21)).norm() < 1e-5);
        assert!((b - c(0.0, 0.414_21)).norm() < 1e-5);
        for z in [c(1.0, 1.0), c(-0.5, 0.1), c(2.2, 0.1), c(0.0, -0.3)] {
            for cc in [1.0, 1.5, 2.0, 4.0] {
                let (a, b) = self_consistent_solve(z, cc).unwrap();
                assert!((a - s1_closed(z, cc).unwrap()).norm() < 1e-10, "z={z} c={cc}");
                assert!((b - s2_closed(z, cc).unwrap()).norm() < 1e-10);
            }
        }
        assert!(self_consistent_solve(c(0.0, 0.05), 1.0).is_err());
    }

    #[test]
    fn support_descriptions() {
        let s = mp_support(1.0).unwrap();
        assert_eq!(s.intervals, [(-2.0, 0.0), (0.0, 2.0)]);
        assert_eq!(s.atom_at_zero_mass, 0.0);
        let s = mp_support(2.0).unwrap();
        assert!((s.intervals[0].0 + 2.414_213_562).abs() < 1e-9);
        assert!((s.intervals[0].1 + 0.414_213_562).abs() < 1e-9);
        assert!((s.intervals[1].0 - 0.414_213_562).abs() < 1e-9);
        assert!((s.intervals[1].1 - 2.414_213_562).abs() < 1e-9);
        assert!((mp_support(4.0).unwrap().atom_at_zero_mass - 0.6).abs() < 1e-15);
        assert!(mp_support(0.9).is_err());
    }

    #[test]
    fn density_values() {
        let d = density_f(0.5, 1.0, 1e-6).unwrap();
        let semicircle = (4.0f64 - 0.25).sqrt() / (2.0 * std::f64::consts::PI);
        assert!((d - semicircle).abs() < 1e-4);
        assert!((d - 0.308_214).abs() < 1e-4);
        assert!(density_f(10.0, 2.0, 1e-6).unwrap().abs() < 1e-4);
        assert!(density_f(0.5, 1.0, 0.1).is_err());
    }

    #[test]
    fn density_is_nonnegative_and_normalized() {
        for cc in [1.0f64, 2.0, 4.0] {
            let lim = 1.0 + cc.sqrt() + 0.5;
            let steps = 40_000;
            let h = 2.0 * lim / steps as f64;
            let mut total = 0.0;
            for k in 0..=steps {
                let x = -lim + h * k as f64;
                let d = density_f(x, cc, 1e-9).unwrap();
                assert!(d >= -1e-10, "c={cc} x={x} d={d}");
                let w = if k == 0 || k == steps { 0.5 } else { 1.0 };
                total += w * h * d;
            }
            let atom = mp_support(cc).unwrap().atom_at_zero_mass;
            assert!((total + atom - 1.0).abs() < 1e-3, "c={cc}: {}", total + atom);
        }
    }

    #[test]
    fn limit_integration_moments() {
        // W² has the same nonzero spectrum as Y Yᵀ (twice); ∫ x² dF = 2c/(1+c)
        for cc in [1.0, 2.0, 4.0] {
            let total = integrate_against_limit(|_| 1.0, cc).unwrap();
            assert!((total - 1.0).abs() < 1e-9, "c={cc}: {total}");
            let second = integrate_against_limit(|x| x * x, cc).unwrap();
            assert!((second - 2.0 * cc / (1.0 + cc)).abs() < 1e-9, "c={cc}: {second}");
        }
    }
}
