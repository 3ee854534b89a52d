//! Edge phases with a dual representation: an exact rational multiple of
//! 2π when one is available, a plain radian value otherwise. Arithmetic
//! stays on the exact path as long as both operands are rational, which is
//! what makes holonomy and coupling-period statements certifiable.

use num_complex::Complex64;
use num_rational::Rational64;
use num_traits::{Signed, Zero};
use std::f64::consts::PI;

pub const TWO_PI: f64 = 2.0 * PI;

/// A phase in R/2πZ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Phase {
    /// Exactly `2π · r`.
    TwoPi(Rational64),
    /// Radians.
    Rad(f64),
}

/// Reduce `r` mod 1 into (-1/2, 1/2].
fn reduce_unit(r: Rational64) -> Rational64 {
    let mut x = r - r.floor();
    if x > Rational64::new(1, 2) {
        x -= Rational64::new(1, 1);
    }
    x
}

/// Wrap radians into (-π, π].
pub fn wrap_radians(x: f64) -> f64 {
    let mut y = x.rem_euclid(TWO_PI);
    if y > PI {
        y -= TWO_PI;
    }
    y
}

impl Phase {
    pub fn zero() -> Self {
        Phase::TwoPi(Rational64::zero())
    }

    pub fn two_pi_rational(p: i64, q: i64) -> Self {
        Phase::TwoPi(reduce_unit(Rational64::new(p, q)))
    }

    pub fn radians_value(self) -> f64 {
        match self {
            Phase::TwoPi(r) => wrap_radians(TWO_PI * (*r.numer() as f64) / (*r.denom() as f64)),
            Phase::Rad(x) => wrap_radians(x),
        }
    }

    pub fn normalized(self) -> Self {
        match self {
            Phase::TwoPi(r) => Phase::TwoPi(reduce_unit(r)),
            Phase::Rad(x) => Phase::Rad(wrap_radians(x)),
        }
    }

    pub fn rational(self) -> Option<Rational64> {
        match self {
            Phase::TwoPi(r) => Some(reduce_unit(r)),
            Phase::Rad(_) => None,
        }
    }

    pub fn neg(self) -> Self {
        match self {
            Phase::TwoPi(r) => Phase::TwoPi(reduce_unit(-r)),
            Phase::Rad(x) => Phase::Rad(wrap_radians(-x)),
        }
    }

    pub fn add(self, other: Phase) -> Self {
        match (self, other) {
            (Phase::TwoPi(a), Phase::TwoPi(b)) => Phase::TwoPi(reduce_unit(a + b)),
            (a, b) => Phase::Rad(wrap_radians(a.radians_value() + b.radians_value())),
        }
    }

    /// Scale by a rational coupling constant.
    pub fn scale(self, k: Rational64) -> Self {
        match self {
            Phase::TwoPi(r) => Phase::TwoPi(reduce_unit(r * k)),
            Phase::Rad(x) => {
                Phase::Rad(wrap_radians(x * (*k.numer() as f64) / (*k.denom() as f64)))
            }
        }
    }

    pub fn scale_f64(self, k: f64) -> Self {
        Phase::Rad(wrap_radians(self.radians_value() * k))
    }

    pub fn is_zero(self, tol: f64) -> bool {
        match self.normalized() {
            Phase::TwoPi(r) => r.is_zero(),
            Phase::Rad(x) => x.abs() <= tol,
        }
    }

    pub fn is_exactly_zero(self) -> bool {
        match self.normalized() {
            Phase::TwoPi(r) => r.is_zero(),
            Phase::Rad(x) => x == 0.0,
        }
    }

    /// e^{iθ}, exact on the axis points 0, ±π/2, π.
    pub fn unit(self) -> Complex64 {
        if let Phase::TwoPi(r) = self.normalized() {
            let r = reduce_unit(r);
            if r.is_zero() {
                return Complex64::new(1.0, 0.0);
            }
            if r == Rational64::new(1, 2) {
                return Complex64::new(-1.0, 0.0);
            }
            if r == Rational64::new(1, 4) {
                return Complex64::new(0.0, 1.0);
            }
            if r == Rational64::new(-1, 4) {
                return Complex64::new(0.0, -1.0);
            }
        }
        let x = self.radians_value();
        Complex64::new(x.cos(), x.sin())
    }

    /// Distance to `other` in R/2πZ, exact (0 or not) on the rational path.
    pub fn approx_eq(self, other: Phase, tol: f64) -> bool {
        self.add(other.neg()).is_zero(tol)
    }
}

impl Default for Phase {
    fn default() -> Self {
        Phase::zero()
    }
}

/// Least common multiple of positive rationals, `lcm(a/b, c/d) = lcm(a,c)/gcd(b,d)`.
pub fn rational_lcm(a: Rational64, b: Rational64) -> Rational64 {
    let (a, b) = (a.abs(), b.abs());
    let n = num_integer::lcm(*a.numer(), *b.numer());
    let d = num_integer::gcd(*a.denom(), *b.denom());
    Rational64::new(n, d)
}
