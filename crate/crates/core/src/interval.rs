//! Closed real intervals with outward rounding.
//!
//! Every arithmetic result is widened by one ulp on each side (four for
//! `powf`, whose libm implementation is not correctly rounded), so an
//! enclosure computed here contains the exact real result of the same
//! expression evaluated on any points of the input intervals.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

/// Rounding for sums and differences: a zero sum of floats is exact.
#[inline]
fn down_sum(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        down(x)
    }
}

#[inline]
fn up_sum(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        up(x)
    }
}

#[inline]
fn down(x: f64) -> f64 {
    if x.is_finite() {
        x.next_down()
    } else {
        x
    }
}

#[inline]
fn up(x: f64) -> f64 {
    if x.is_finite() {
        x.next_up()
    } else {
        x
    }
}

impl Interval {
    pub const ENTIRE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi || lo.is_nan() || hi.is_nan(), "[{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    /// Symmetric enclosure `[c - r, c + r]`.
    pub fn around(c: f64, r: f64) -> Self {
        Interval::new(down(c - r), up(c + r))
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    pub fn is_positive(&self) -> bool {
        self.lo > 0.0
    }

    pub fn is_negative(&self) -> bool {
        self.hi < 0.0
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval::new(self.lo.min(other.lo), self.hi.max(other.hi))
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    /// Smallest absolute value attained on the interval (the mignitude).
    pub fn mig(&self) -> f64 {
        if self.contains_zero() {
            0.0
        } else {
            self.lo.abs().min(self.hi.abs())
        }
    }

    /// Largest absolute value attained on the interval (the magnitude).
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    /// Distance between two intervals, zero when they overlap.
    pub fn gap(&self, other: &Interval) -> f64 {
        (other.lo - self.hi).max(self.lo - other.hi).max(0.0)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:e}, {:e}]", self.lo, self.hi)
    }
}

impl Add for Interval {
    type Output = Interval;
    #[inline]
    fn add(self, o: Interval) -> Interval {
        Interval::new(down_sum(self.lo + o.lo), up_sum(self.hi + o.hi))
    }
}

impl Sub for Interval {
    type Output = Interval;
    #[inline]
    fn sub(self, o: Interval) -> Interval {
        Interval::new(down_sum(self.lo - o.hi), up_sum(self.hi - o.lo))
    }
}

impl Neg for Interval {
    type Output = Interval;
    #[inline]
    fn neg(self) -> Interval {
        Interval::new(-self.hi, -self.lo)
    }
}

/// Rounded enclosure `(lo, hi)` of one corner product. A zero factor gives
/// an exact zero, also against an infinite endpoint.
#[inline]
fn mul_corner(a: f64, b: f64) -> (f64, f64) {
    if a == 0.0 || b == 0.0 {
        (0.0, 0.0)
    } else {
        let p = a * b;
        (down(p), up(p))
    }
}

impl Mul for Interval {
    type Output = Interval;
    #[inline]
    fn mul(self, o: Interval) -> Interval {
        let c = [
            mul_corner(self.lo, o.lo),
            mul_corner(self.lo, o.hi),
            mul_corner(self.hi, o.lo),
            mul_corner(self.hi, o.hi),
        ];
        let lo = c.iter().map(|x| x.0).fold(f64::INFINITY, f64::min);
        let hi = c.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
        Interval::new(lo, hi)
    }
}

impl Div for Interval {
    type Output = Interval;
    #[inline]
    fn div(self, o: Interval) -> Interval {
        if o.contains_zero() {
            return Interval::ENTIRE;
        }
        let corner = |a: f64, b: f64| {
            if a == 0.0 {
                (0.0, 0.0)
            } else {
                let q = a / b;
                (down(q), up(q))
            }
        };
        let c = [
            corner(self.lo, o.lo),
            corner(self.lo, o.hi),
            corner(self.hi, o.lo),
            corner(self.hi, o.hi),
        ];
        let lo = c.iter().map(|x| x.0).fold(f64::INFINITY, f64::min);
        let hi = c.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
        Interval::new(lo, hi)
    }
}

impl Real for Interval {
    #[inline]
    fn cst(x: f64) -> Self {
        Interval::point(x)
    }

    #[inline]
    fn sqr(self) -> Self {
        let a = mul_corner(self.lo, self.lo);
        let b = mul_corner(self.hi, self.hi);
        if self.contains_zero() {
            Interval::new(0.0, a.1.max(b.1))
        } else {
            Interval::new(a.0.min(b.0).max(0.0), a.1.max(b.1))
        }
    }

    #[inline]
    fn sqrt(self) -> Self {
        let lo = self.lo.max(0.0);
        let hi = self.hi.max(0.0);
        let down0 = |x: f64| if x == 0.0 { 0.0 } else { down(x) };
        let up0 = |x: f64| if x == 0.0 { 0.0 } else { up(x) };
        Interval::new(down0(lo.sqrt()).max(0.0), up0(hi.sqrt()))
    }

    fn powf(self, e: f64) -> Self {
        let lo = self.lo.max(0.0);
        let hi = self.hi.max(0.0);
        let widen = 4.0 * f64::EPSILON;
        let (a, b) = (lo.powf(e), hi.powf(e));
        let (a, b) = if e >= 0.0 { (a, b) } else { (b, a) };
        Interval::new((a * (1.0 - widen)).max(0.0), b * (1.0 + widen))
    }
}
