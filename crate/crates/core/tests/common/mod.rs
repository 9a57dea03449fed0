//! Test oracles shared by the integration targets.

#![allow(dead_code)]

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;

/// Forward-mode dual number over the complex field: `v + d·ε`, `ε² = 0`.
#[derive(Clone, Copy, Debug)]
pub struct Dual {
    pub v: Complex64,
    pub d: Complex64,
}

impl Dual {
    fn var(z: Complex64) -> Self {
        Dual { v: z, d: Complex64::new(1.0, 0.0) }
    }
    fn cst(x: f64) -> Self {
        Dual { v: Complex64::new(x, 0.0), d: Complex64::new(0.0, 0.0) }
    }
    fn sqrt(self) -> Self {
        let r = self.v.sqrt();
        Dual { v: r, d: self.d / (2.0 * r) }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual { v: self.v + o.v, d: self.d + o.d }
    }
}
impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual { v: self.v - o.v, d: self.d - o.d }
    }
}
impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual { v: self.v * o.v, d: self.d * o.v + self.v * o.d }
    }
}
impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        Dual { v: self.v / o.v, d: (self.d * o.v - self.v * o.d) / (o.v * o.v) }
    }
}
impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual { v: -self.v, d: -self.d }
    }
}

/// Roots of `α s² + β s + γ = 0`, the one with `Im s` of the sign of `Im z`.
pub fn herglotz_root(alpha: Dual, beta: Dual, gamma: Dual, z: Complex64) -> Dual {
    let disc = (beta * beta - Dual::cst(4.0) * alpha * gamma).sqrt();
    let two_a = Dual::cst(2.0) * alpha;
    let plus = (-beta + disc) / two_a;
    let minus = (-beta - disc) / two_a;
    if plus.v.im * z.im.signum() >= minus.v.im * z.im.signum() {
        plus
    } else {
        minus
    }
}

/// `z s² + (z² − c + 1) s + z = 0`.
pub fn dual_s1(z: Complex64, c: f64) -> Dual {
    let zd = Dual::var(z);
    herglotz_root(zd, zd * zd - Dual::cst(c - 1.0), zd, z)
}

/// `c z s² + (z² + c − 1) s + z = 0`.
pub fn dual_s2(z: Complex64, c: f64) -> Dual {
    let zd = Dual::var(z);
    herglotz_root(Dual::cst(c) * zd, zd * zd + Dual::cst(c - 1.0), zd, z)
}
