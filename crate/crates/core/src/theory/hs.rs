//! Helffer–Sjöstrand pairing of a compactly supported test function with a
//! transform that is analytic off the real axis.
//!
//! With the almost-analytic extension
//! `Ψ_f(x, y) = Σ_{l ≤ K} (iˡ/l!) f⁽ˡ⁾(x) g(y) yˡ` and
//! `∂̄ = π⁻¹(∂_x + i∂_y)`,
//!
//! ```text
//! ∫ f dμ = Re ∫_{y>0} ∫ ∂̄Ψ_f(x, y) s_μ(x + iy) dx dy
//! ```
//!
//! The `g ≡ 1` part of `∂̄Ψ_f` telescopes to `(i^K/K!) f⁽ᴷ⁺¹⁾ g yᴷ / π`, so
//! the integrand vanishes like `yᴷ` near the axis.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{mean_process, TheoryParams};
use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// A compactly supported function with derivatives available to any order
/// the extension needs.
pub trait TestFunction: Sync {
    /// `f⁽ᵒʳᵈᵉʳ⁾(x)`; zero outside the support.
    fn derivative(&self, order: usize, x: f64) -> f64;
    /// Closed interval containing the support.
    fn support(&self) -> (f64, f64);
    /// Highest derivative order available, if limited.
    fn max_order(&self) -> Option<usize> {
        None
    }
}

/// `f(x) = (1 − t²)ᵖ` with `t = (x − center)/half_width`, zero for `|t| ≥ 1`.
/// `C^{p−1}` across the endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyBump {
    center: f64,
    half_width: f64,
    power: u32,
    // coefficients of (1 − t²)^p in t, ascending
    coeffs: Vec<f64>,
}

impl PolyBump {
    pub fn new(center: f64, half_width: f64, power: u32) -> Result<Self> {
        if !(center.is_finite() && half_width.is_finite()) {
            return Err(Error::NonFinite("bump parameters"));
        }
        if half_width <= 0.0 {
            return Err(Error::invalid("half_width", "must be positive"));
        }
        if power == 0 {
            return Err(Error::invalid("power", "must be at least 1"));
        }
        let p = power as usize;
        let mut coeffs = vec![0.0; 2 * p + 1];
        let mut binom = 1.0;
        for k in 0..=p {
            coeffs[2 * k] = if k % 2 == 0 { binom } else { -binom };
            binom = binom * (p - k) as f64 / (k + 1) as f64;
        }
        Ok(PolyBump {
            center,
            half_width,
            power,
            coeffs,
        })
    }

    /// Bump on `[lo, hi]`.
    pub fn on_interval(lo: f64, hi: f64, power: u32) -> Result<Self> {
        Self::new(0.5 * (lo + hi), 0.5 * (hi - lo), power)
    }

    pub fn power(&self) -> u32 {
        self.power
    }

    pub fn value(&self, x: f64) -> f64 {
        self.derivative(0, x)
    }
}

impl TestFunction for PolyBump {
    fn derivative(&self, order: usize, x: f64) -> f64 {
        let t = (x - self.center) / self.half_width;
        if t.abs() >= 1.0 || order >= self.coeffs.len() {
            return 0.0;
        }
        // Horner on the order-th derivative of the polynomial in t
        let mut acc = 0.0;
        for k in (order..self.coeffs.len()).rev() {
            let falling: f64 = (k - order + 1..=k).map(|j| j as f64).product();
            acc = acc * t + self.coeffs[k] * falling;
        }
        acc / self.half_width.powi(order as i32)
    }

    fn support(&self) -> (f64, f64) {
        (self.center - self.half_width, self.center + self.half_width)
    }
}

type Derivative = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// A test function given as an explicit list of derivative handles
/// `f, f', …, f⁽ᴷ⁺¹⁾`.
pub struct DerivativeList {
    derivatives: Vec<Derivative>,
    support: (f64, f64),
}

impl DerivativeList {
    pub fn new(derivatives: Vec<Derivative>, support: (f64, f64)) -> Result<Self> {
        if derivatives.is_empty() {
            return Err(Error::invalid("derivatives", "need at least f itself"));
        }
        if !(support.0 < support.1) {
            return Err(Error::invalid("support", "need lo < hi"));
        }
        Ok(DerivativeList {
            derivatives,
            support,
        })
    }

    /// `f ≡ 0` on `support`.
    pub fn zero(support: (f64, f64), orders: usize) -> Result<Self> {
        Self::new((0..orders).map(|_| Box::new(|_| 0.0) as Derivative).collect(), support)
    }
}

impl TestFunction for DerivativeList {
    fn derivative(&self, order: usize, x: f64) -> f64 {
        match self.derivatives.get(order) {
            Some(d) if x >= self.support.0 && x <= self.support.1 => d(x),
            _ => 0.0,
        }
    }

    fn support(&self) -> (f64, f64) {
        self.support
    }

    fn max_order(&self) -> Option<usize> {
        Some(self.derivatives.len() - 1)
    }
}

/// Smooth plateau cutoff: `1` on `|y| ≤ c0/2`, `0` for `|y| ≥ c0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    c0: f64,
}

fn phi(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

fn dphi(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        phi(t) / (t * t)
    }
}

impl Cutoff {
    pub fn new(c0: f64) -> Result<Self> {
        if !(c0 > 0.0 && c0.is_finite()) {
            return Err(Error::invalid("c0", format!("must be positive, got {c0}")));
        }
        Ok(Cutoff { c0 })
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    fn ramp(&self, y: f64) -> f64 {
        (self.c0 - y.abs()) / (0.5 * self.c0)
    }

    pub fn value(&self, y: f64) -> f64 {
        let t = self.ramp(y);
        if t >= 1.0 {
            return 1.0;
        }
        if t <= 0.0 {
            return 0.0;
        }
        phi(t) / (phi(t) + phi(1.0 - t))
    }

    pub fn derivative(&self, y: f64) -> f64 {
        let t = self.ramp(y);
        if t >= 1.0 || t <= 0.0 {
            return 0.0;
        }
        let (a, b) = (phi(t), phi(1.0 - t));
        let ds = (dphi(t) * b + a * dphi(1.0 - t)) / ((a + b) * (a + b));
        ds * (-y.signum() / (0.5 * self.c0))
    }
}

fn i_pow(l: usize) -> Complex64 {
    match l % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

fn check_order(f: &dyn TestFunction, k: usize, extra: usize) -> Result<()> {
    if let Some(max) = f.max_order() {
        if max < k + extra {
            return Err(Error::invalid(
                "derivatives",
                format!("order K = {k} needs {} derivatives, only {max} given", k + extra),
            ));
        }
    }
    Ok(())
}

/// `Ψ_f(x, y)` for `y ≥ 0`.
pub fn psi_extension(f: &dyn TestFunction, k: usize, cutoff: &Cutoff, x: f64, y: f64) -> Result<Complex64> {
    if y < 0.0 {
        return Err(Error::invalid("y", "extension is defined for y >= 0"));
    }
    check_order(f, k, 0)?;
    let g = cutoff.value(y);
    Ok(g * taylor_sum(f, k, x, y))
}

fn taylor_sum(f: &dyn TestFunction, k: usize, x: f64, y: f64) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    let mut term = 1.0;
    for l in 0..=k {
        sum += i_pow(l) * (f.derivative(l, x) * term);
        term *= y / (l + 1) as f64;
    }
    sum
}

/// `∂̄Ψ_f(x, y) = π⁻¹[(i^K/K!) f⁽ᴷ⁺¹⁾(x) g(y) yᴷ + i g'(y) Σ_l (iˡ/l!) f⁽ˡ⁾(x) yˡ]`.
pub fn dbar_psi(f: &dyn TestFunction, k: usize, cutoff: &Cutoff, x: f64, y: f64) -> Result<Complex64> {
    if y < 0.0 {
        return Err(Error::invalid("y", "extension is defined for y >= 0"));
    }
    check_order(f, k, 1)?;
    Ok(dbar_unchecked(f, k, cutoff, x, y))
}

fn dbar_unchecked(f: &dyn TestFunction, k: usize, cutoff: &Cutoff, x: f64, y: f64) -> Complex64 {
    let factorial: f64 = (1..=k).map(|j| j as f64).product();
    let mut out = i_pow(k) * (f.derivative(k + 1, x) * cutoff.value(y) * y.powi(k as i32) / factorial);
    let dg = cutoff.derivative(y);
    if dg != 0.0 {
        out += Complex64::new(0.0, dg) * taylor_sum(f, k, x, y);
    }
    out / PI
}

/// Quadrature settings for the pairing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HsSettings {
    /// Truncation order `K` of the extension.
    pub order: usize,
    /// Cutoff scale `c0`.
    pub c0: f64,
    /// Lower edge of the `y` range before extrapolation.
    pub y_min: f64,
    /// Stop refining once successive estimates differ by less than this.
    pub tolerance: f64,
}

impl Default for HsSettings {
    fn default() -> Self {
        HsSettings {
            order: 3,
            c0: 1.0,
            y_min: 1e-4,
            tolerance: 1e-7,
        }
    }
}

/// Largest tolerated change between the last two refinements.
pub const REFINEMENT_LIMIT: f64 = 1e-3;
const NODES: usize = 16;
const START_PANELS: usize = 8;
const MAX_LEVELS: usize = 5;

impl HsSettings {
    pub fn validate(&self) -> Result<()> {
        Cutoff::new(self.c0)?;
        if !(self.y_min > 0.0 && self.y_min < 0.5 * self.c0) {
            return Err(Error::invalid("y_min", "need 0 < y_min < c0/2"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid("tolerance", "must be positive"));
        }
        Ok(())
    }
}

fn strip_integral<T>(
    f: &dyn TestFunction,
    settings: &HsSettings,
    transform: &T,
    rule: &GaussLegendre,
    (y_lo, y_hi): (f64, f64),
    panels: usize,
) -> Result<f64>
where
    T: Fn(Complex64) -> Result<Complex64>,
{
    let cutoff = Cutoff::new(settings.c0)?;
    let (lo, hi) = f.support();
    let (xs, wx) = rule.composite(lo, hi, panels);
    let (ys, wy) = rule.composite(y_lo, y_hi, panels);
    let mut total = 0.0;
    for (&y, &wy) in ys.iter().zip(&wy) {
        let mut row = 0.0;
        for (&x, &wx) in xs.iter().zip(&wx) {
            let d = dbar_unchecked(f, settings.order, &cutoff, x, y);
            if d == Complex64::new(0.0, 0.0) {
                continue;
            }
            row += wx * (d * transform(Complex64::new(x, y))?).re;
        }
        total += wy * row;
    }
    Ok(total)
}

fn pairing_at<T>(
    f: &dyn TestFunction,
    settings: &HsSettings,
    transform: &T,
    rule: &GaussLegendre,
    panels: usize,
) -> Result<f64>
where
    T: Fn(Complex64) -> Result<Complex64>,
{
    let y0 = settings.y_min;
    let half = 0.5 * settings.c0;
    let near = strip_integral(f, settings, transform, rule, (y0, half), panels)?;
    let far = strip_integral(f, settings, transform, rule, (half, settings.c0), panels)?;
    let base = near + far;
    // The integrand is O(yᴷ) near the axis, so the neglected strip
    // [0, y0] scales like y0^{K+1}; one halving gives an extrapolated value.
    let sliver = strip_integral(f, settings, transform, rule, (0.5 * y0, y0), 2)?;
    let halved = base + sliver;
    let ratio = 2f64.powi(settings.order as i32 + 1);
    Ok(halved + (halved - base) / (ratio - 1.0))
}

/// `Re ∫∫ ∂̄Ψ_f · T` over `[y_min, c0] × supp f`, refined by doubling the
/// panel count until successive values agree to `tolerance`.
pub fn hs_integral<T>(f: &dyn TestFunction, settings: &HsSettings, transform: T) -> Result<f64>
where
    T: Fn(Complex64) -> Result<Complex64>,
{
    settings.validate()?;
    check_order(f, settings.order, 1)?;
    let rule = GaussLegendre::new(NODES);
    let mut panels = START_PANELS;
    let mut prev = pairing_at(f, settings, &transform, &rule, panels)?;
    let mut change = f64::INFINITY;
    for _ in 0..MAX_LEVELS {
        panels *= 2;
        let next = pairing_at(f, settings, &transform, &rule, panels)?;
        change = (next - prev).abs();
        prev = next;
        if change < settings.tolerance * prev.abs().max(1.0) {
            return Ok(prev);
        }
    }
    if change > REFINEMENT_LIMIT {
        return Err(Error::Refinement(change));
    }
    Ok(prev)
}

/// `∫ f dM` where `M` is the limit mean process.
pub fn hs_functional(f: &dyn TestFunction, params: &TheoryParams, settings: &HsSettings) -> Result<f64> {
    params.validate()?;
    hs_integral(f, settings, |z| mean_process(z, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::{integrate_against_limit, s_closed};

    #[test]
    fn bump_derivatives_match_finite_differences() {
        let f = PolyBump::new(0.5, 0.2, 6).unwrap();
        let h = 1e-5;
        for &x in &[0.35, 0.5, 0.61, 0.68] {
            for order in 0..5 {
                let fd = (f.derivative(order, x + h) - f.derivative(order, x - h)) / (2.0 * h);
                let exact = f.derivative(order + 1, x);
                assert!((fd - exact).abs() < 1e-5 * exact.abs().max(1.0), "order {order} x {x}");
            }
        }
        assert_eq!(f.derivative(0, 0.9), 0.0);
        assert!((f.value(0.5) - 1.0).abs() < 1e-15);
        assert!((f.value(0.6) - 0.75f64.powi(6)).abs() < 1e-14);
    }

    #[test]
    fn cutoff_shape() {
        let g = Cutoff::new(1.0).unwrap();
        assert_eq!(g.value(0.3), 1.0);
        assert_eq!(g.value(1.2), 0.0);
        assert!((g.value(0.75) - 0.5).abs() < 1e-14);
        let h = 1e-6;
        for &y in &[0.55, 0.7, 0.9] {
            let fd = (g.value(y + h) - g.value(y - h)) / (2.0 * h);
            assert!((fd - g.derivative(y)).abs() < 1e-6);
        }
    }

    #[test]
    fn extension_reduces_to_f_on_axis() {
        let f = PolyBump::new(0.0, 1.0, 5).unwrap();
        let g = Cutoff::new(1.0).unwrap();
        for &x in &[-0.7, 0.0, 0.4] {
            let v = psi_extension(&f, 3, &g, x, 0.0).unwrap();
            assert_eq!(v, Complex64::new(f.value(x), 0.0));
        }
        assert!(psi_extension(&f, 3, &g, 0.0, -0.1).is_err());
    }

    #[test]
    fn dbar_matches_finite_differences_of_extension() {
        let f = PolyBump::new(0.2, 0.8, 7).unwrap();
        let g = Cutoff::new(1.0).unwrap();
        let h = 1e-6;
        for &(x, y) in &[(0.1, 0.2), (0.5, 0.6), (-0.3, 0.85), (0.9, 0.3)] {
            for k in [1usize, 3, 5] {
                let psi = |x: f64, y: f64| psi_extension(&f, k, &g, x, y).unwrap();
                let dx = (psi(x + h, y) - psi(x - h, y)) / (2.0 * h);
                let dy = (psi(x, y + h) - psi(x, y - h)) / (2.0 * h);
                let fd = (dx + Complex64::i() * dy) / PI;
                let exact = dbar_psi(&f, k, &g, x, y).unwrap();
                assert!((fd - exact).norm() < 1e-6, "k={k} ({x},{y}): {fd} vs {exact}");
            }
        }
    }

    #[test]
    fn zero_function_gives_zero() {
        let f = DerivativeList::zero((-1.0, 1.0), 5).unwrap();
        let v = hs_integral(&f, &HsSettings::default(), |z| s_closed(z, 2.0)).unwrap();
        assert_eq!(v, 0.0);
        let short = DerivativeList::zero((-1.0, 1.0), 2).unwrap();
        assert!(hs_integral(&short, &HsSettings::default(), |z| s_closed(z, 2.0)).is_err());
    }

    #[test]
    fn reproduces_integral_against_limit_law() {
        for (c, lo, hi) in [(1.0, -0.5, 1.5), (4.0, 1.2, 2.6), (4.0, -0.5, 0.5)] {
            let f = PolyBump::on_interval(lo, hi, 8).unwrap();
            let direct = integrate_against_limit(|x| f.value(x), c).unwrap();
            let via_hs = hs_integral(&f, &HsSettings::default(), |z| s_closed(z, c)).unwrap();
            assert!((direct - via_hs).abs() < 1e-6, "c={c}: {direct} vs {via_hs}");
        }
    }

    #[test]
    fn reproduces_point_masses() {
        // s(z) = −1/(z − a) is the transform of δ_a
        let f = PolyBump::new(0.3, 0.5, 8).unwrap();
        for a in [0.1, 0.3, 0.55] {
            let v = hs_integral(&f, &HsSettings::default(), |z| Ok(-1.0 / (z - a))).unwrap();
            assert!((v - f.value(a)).abs() < 1e-6, "a={a}: {v} vs {}", f.value(a));
        }
    }
}
