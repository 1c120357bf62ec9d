//! Closed real intervals with the handful of operations needed to enclose
//! coefficient expressions. Endpoints may be infinite.
//!
//! No directed rounding: enclosures are outer bounds up to a few ulps.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const ENTIRE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi || lo.is_nan() || hi.is_nan());
        Self { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval::new(self.lo.min(other.lo), self.hi.max(other.hi))
    }

    pub fn abs(self) -> Interval {
        if self.lo >= 0.0 {
            self
        } else if self.hi <= 0.0 {
            -self
        } else {
            Interval::new(0.0, (-self.lo).max(self.hi))
        }
    }

    pub fn sin(self) -> Interval {
        if !self.is_finite() || self.width() >= TAU {
            return Interval::new(-1.0, 1.0);
        }
        let (a, b) = (self.lo.sin(), self.hi.sin());
        let mut lo = a.min(b);
        let mut hi = a.max(b);
        // maxima at pi/2 + 2k pi, minima at -pi/2 + 2k pi
        if contains_phase(self, FRAC_PI_2) {
            hi = 1.0;
        }
        if contains_phase(self, -FRAC_PI_2) {
            lo = -1.0;
        }
        Interval::new(lo, hi)
    }

    pub fn cos(self) -> Interval {
        if !self.is_finite() || self.width() >= TAU {
            return Interval::new(-1.0, 1.0);
        }
        let (a, b) = (self.lo.cos(), self.hi.cos());
        let mut lo = a.min(b);
        let mut hi = a.max(b);
        if contains_phase(self, 0.0) {
            hi = 1.0;
        }
        if contains_phase(self, PI) {
            lo = -1.0;
        }
        Interval::new(lo, hi)
    }

    pub fn exp(self) -> Interval {
        Interval::new(self.lo.exp(), self.hi.exp())
    }

    /// Natural log; only meaningful for strictly positive intervals.
    pub fn ln(self) -> Interval {
        Interval::new(self.lo.ln(), self.hi.ln())
    }

    pub fn sign(self) -> Interval {
        Interval::new(signum0(self.lo), signum0(self.hi))
    }

    pub fn powi(self, n: i32) -> Interval {
        if n == 0 {
            return Interval::point(1.0);
        }
        if n < 0 {
            return self.powi(-n).recip();
        }
        let (a, b) = (self.lo.powi(n), self.hi.powi(n));
        if n % 2 == 1 || self.lo >= 0.0 {
            Interval::new(a, b)
        } else if self.hi <= 0.0 {
            Interval::new(b, a)
        } else {
            Interval::new(0.0, a.max(b))
        }
    }

    pub fn recip(self) -> Interval {
        if self.contains_zero() {
            Interval::ENTIRE
        } else {
            Interval::new(1.0 / self.hi, 1.0 / self.lo)
        }
    }

    pub fn div(self, rhs: Interval) -> Interval {
        self * rhs.recip()
    }
}

fn signum0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Whether `phase + 2k pi` lies in `x` for some integer `k`.
fn contains_phase(x: Interval, phase: f64) -> bool {
    let k = ((x.lo - phase) / TAU).ceil();
    phase + k * TAU <= x.hi
}

fn mul0(a: f64, b: f64) -> f64 {
    // 0 * inf is taken as 0 for enclosure purposes
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        Interval::new(self.lo + rhs.lo, self.hi + rhs.hi)
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        Interval::new(self.lo - rhs.hi, self.hi - rhs.lo)
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval::new(-self.hi, -self.lo)
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        let c = [
            mul0(self.lo, rhs.lo),
            mul0(self.lo, rhs.hi),
            mul0(self.hi, rhs.lo),
            mul0(self.hi, rhs.hi),
        ];
        Interval::new(
            c.iter().cloned().fold(f64::INFINITY, f64::min),
            c.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn trig_ranges() {
        let s = Interval::new(0.0, 1.0).sin();
        assert_eq!(s.lo, 0.0);
        assert!((s.hi - 1f64.sin()).abs() < 1e-15);
        assert_eq!(Interval::new(1.0, 2.0).sin().hi, 1.0);
        assert_eq!(Interval::new(3.0, 3.5).cos().lo, -1.0);
        assert_eq!(Interval::new(0.0, f64::INFINITY).sin(), Interval::new(-1.0, 1.0));
    }

    #[test]
    fn mul_with_unbounded() {
        let t = Interval::new(0.0, f64::INFINITY);
        let w = Interval::point(2.0) * t;
        assert_eq!(w, Interval::new(0.0, f64::INFINITY));
        let z = Interval::point(0.0) * t;
        assert_eq!(z, Interval::point(0.0));
    }

    #[test]
    fn even_powers() {
        assert_eq!(Interval::new(-1.0, 1.0).powi(2), Interval::new(0.0, 1.0));
        assert_eq!(Interval::new(-3.0, -2.0).powi(2), Interval::new(4.0, 9.0));
        assert_eq!(Interval::new(-2.0, 1.0).powi(3), Interval::new(-8.0, 1.0));
    }

    proptest! {
        #[test]
        fn sin_cos_enclose_samples(lo in -20.0f64..20.0, w in 0.0f64..8.0, s in 0.0f64..1.0) {
            let x = Interval::new(lo, lo + w);
            let v = lo + s * w;
            let si = x.sin();
            let ci = x.cos();
            prop_assert!(si.lo - 1e-12 <= v.sin() && v.sin() <= si.hi + 1e-12);
            prop_assert!(ci.lo - 1e-12 <= v.cos() && v.cos() <= ci.hi + 1e-12);
        }

        #[test]
        fn products_enclose(a in -5.0f64..5.0, b in 0.0f64..5.0, c in -5.0f64..5.0, d in 0.0f64..5.0,
                            s in 0.0f64..1.0, u in 0.0f64..1.0) {
            let x = Interval::new(a, a + b);
            let y = Interval::new(c, c + d);
            let xv = a + s * b;
            let yv = c + u * d;
            let p = x * y;
            prop_assert!(p.lo - 1e-9 <= xv * yv && xv * yv <= p.hi + 1e-9);
            let q = x - y;
            prop_assert!(q.lo - 1e-9 <= xv - yv && xv - yv <= q.hi + 1e-9);
        }
    }
}
