//! Time-scale calculus kernel for the two supported time scales: the real
//! line and the uniform lattice `hZ`.
//!
//! Everything here is a pure function of its inputs. Rates are passed as
//! [`ScalarFn`] so that parsed coefficient expressions and plain closures can
//! be used interchangeably.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance (in units of the step) for lattice membership.
pub const LATTICE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TimeScaleError {
    #[error("lattice step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("time {t} is not a point of the lattice with step {step}")]
    OffLattice { t: f64, step: f64 },
    #[error("regressivity violated at t = {t}: 1 + mu*p = {factor}")]
    Regressivity { t: f64, factor: f64 },
    #[error("empty or reversed interval [{s}, {t}]")]
    Interval { s: f64, t: f64 },
    #[error("graininess must be nonnegative, got {0}")]
    NegativeGraininess(f64),
}

pub type Result<T> = std::result::Result<T, TimeScaleError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeScaleKind {
    #[serde(alias = "Reals", alias = "R")]
    Reals,
    #[serde(alias = "Lattice", alias = "Z", alias = "integers")]
    Lattice,
}

/// Either the real line or a lattice `{k * step}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeScaleSpec {
    kind: TimeScaleKind,
    step: f64,
}

impl TimeScaleSpec {
    pub fn reals() -> Self {
        Self {
            kind: TimeScaleKind::Reals,
            step: 0.0,
        }
    }

    pub fn lattice(step: f64) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(TimeScaleError::InvalidStep(step));
        }
        Ok(Self {
            kind: TimeScaleKind::Lattice,
            step,
        })
    }

    pub fn integers() -> Self {
        Self {
            kind: TimeScaleKind::Lattice,
            step: 1.0,
        }
    }

    pub fn kind(&self) -> TimeScaleKind {
        self.kind
    }

    /// Lattice spacing; zero for the reals.
    pub fn step(&self) -> f64 {
        self.step
    }

    /// Supremum of the graininess (`0` on the reals, `step` on a lattice).
    pub fn graininess_sup(&self) -> f64 {
        match self.kind {
            TimeScaleKind::Reals => 0.0,
            TimeScaleKind::Lattice => self.step,
        }
    }

    pub fn is_lattice(&self) -> bool {
        self.kind == TimeScaleKind::Lattice
    }

    pub fn contains(&self, t: f64) -> bool {
        match self.kind {
            TimeScaleKind::Reals => t.is_finite(),
            TimeScaleKind::Lattice => {
                let k = (t / self.step).round();
                (t - k * self.step).abs() <= LATTICE_TOL * self.step
            }
        }
    }

    /// Index `k` with `t = k * step`, or an error off the lattice.
    pub fn lattice_index(&self, t: f64) -> Result<i64> {
        if !self.contains(t) {
            return Err(TimeScaleError::OffLattice { t, step: self.step });
        }
        Ok((t / self.step).round() as i64)
    }

    fn check(&self, t: f64) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(TimeScaleError::OffLattice { t, step: self.step })
        }
    }
}

/// A real-valued function of time.
pub trait ScalarFn {
    fn eval(&self, t: f64) -> f64;
}

impl<F: Fn(f64) -> f64> ScalarFn for F {
    fn eval(&self, t: f64) -> f64 {
        self(t)
    }
}

pub fn graininess(ts: &TimeScaleSpec, t: f64) -> Result<f64> {
    ts.check(t)?;
    Ok(ts.graininess_sup())
}

/// Forward jump operator.
pub fn sigma(ts: &TimeScaleSpec, t: f64) -> Result<f64> {
    ts.check(t)?;
    Ok(match ts.kind {
        TimeScaleKind::Reals => t,
        TimeScaleKind::Lattice => snap(ts, t) + ts.step,
    })
}

/// Backward jump operator.
pub fn rho(ts: &TimeScaleSpec, t: f64) -> Result<f64> {
    ts.check(t)?;
    Ok(match ts.kind {
        TimeScaleKind::Reals => t,
        TimeScaleKind::Lattice => snap(ts, t) - ts.step,
    })
}

fn snap(ts: &TimeScaleSpec, t: f64) -> f64 {
    (t / ts.step).round() * ts.step
}

/// Cylinder transform `log(1 + h z) / h`, reducing to `z` at `h = 0`.
pub fn cylinder(h: f64, z: f64) -> Result<f64> {
    if h < 0.0 {
        return Err(TimeScaleError::NegativeGraininess(h));
    }
    if h == 0.0 {
        return Ok(z);
    }
    let factor = 1.0 + h * z;
    if !(factor > 0.0) {
        return Err(TimeScaleError::Regressivity { t: f64::NAN, factor });
    }
    Ok((h * z).ln_1p() / h)
}

/// Circle-plus `p + q + mu p q`.
pub fn oplus(p: f64, q: f64, mu: f64) -> f64 {
    p + q + mu * p * q
}

/// Circle-minus `-p / (1 + mu p)`.
pub fn ominus(p: f64, mu: f64) -> Result<f64> {
    let factor = 1.0 + mu * p;
    if factor == 0.0 {
        return Err(TimeScaleError::Regressivity { t: f64::NAN, factor });
    }
    Ok(-p / factor)
}

/// `p ⊖ q = (p - q) / (1 + mu q)`.
pub fn ominus_diff(p: f64, q: f64, mu: f64) -> Result<f64> {
    let factor = 1.0 + mu * q;
    if factor == 0.0 {
        return Err(TimeScaleError::Regressivity { t: f64::NAN, factor });
    }
    Ok((p - q) / factor)
}

/// Checks `1 + mu(t) p(t) > 0` on `[from, to]`.
///
/// On a lattice every lattice point of the interval is checked and `samples`
/// is ignored; on the reals `mu = 0`, so only finiteness of `p` at `samples`
/// evenly spaced points matters.
pub fn is_positively_regressive(ts: &TimeScaleSpec, p: &dyn ScalarFn, from: f64, to: f64, samples: usize) -> bool {
    match ts.kind {
        TimeScaleKind::Reals => {
            let n = samples.max(1);
            (0..=n).all(|k| {
                let t = if n == 0 {
                    from
                } else {
                    from + (to - from) * k as f64 / n as f64
                };
                p.eval(t).is_finite()
            })
        }
        TimeScaleKind::Lattice => {
            let h = ts.step;
            let k0 = (from / h).ceil() as i64;
            let k1 = (to / h).floor() as i64;
            (k0..=k1).all(|k| 1.0 + h * p.eval(k as f64 * h) > 0.0)
        }
    }
}

/// Default Simpson panel count on the reals: `10` per unit time, at least `100`.
pub fn default_steps(s: f64, t: f64) -> usize {
    ((10.0 * (t - s).abs()).ceil() as usize).max(100)
}

/// Delta integral of `f` over `[s, t)`.
///
/// Exact left sum on a lattice; composite Simpson with `steps` panels on the
/// reals.
pub fn delta_integral(ts: &TimeScaleSpec, f: &dyn ScalarFn, s: f64, t: f64, steps: usize) -> Result<f64> {
    if s > t {
        return Err(TimeScaleError::Interval { s, t });
    }
    match ts.kind {
        TimeScaleKind::Lattice => {
            let h = ts.step;
            let ks = ts.lattice_index(s)?;
            let kt = ts.lattice_index(t)?;
            Ok((ks..kt).map(|k| h * f.eval(k as f64 * h)).sum())
        }
        TimeScaleKind::Reals => Ok(simpson(f, s, t, steps.max(1))),
    }
}

fn simpson(f: &dyn ScalarFn, a: f64, b: f64, panels: usize) -> f64 {
    if a == b {
        return 0.0;
    }
    let n = 2 * panels;
    let h = (b - a) / n as f64;
    let mut acc = f.eval(a) + f.eval(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f.eval(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Generalized exponential `e_p(t, s)` with the default quadrature resolution.
pub fn exp_fn(ts: &TimeScaleSpec, p: &dyn ScalarFn, t: f64, s: f64) -> Result<f64> {
    exp_fn_with(ts, p, t, s, default_steps(s, t))
}

/// Generalized exponential `e_p(t, s)`.
///
/// On a lattice this is the exact product of `1 + h p(tau)` over
/// `tau = s, s+h, ..., t-h` (reciprocal for `t < s`). On the reals it is
/// `exp(∫_s^t p)`.
pub fn exp_fn_with(ts: &TimeScaleSpec, p: &dyn ScalarFn, t: f64, s: f64, steps: usize) -> Result<f64> {
    ts.check(t)?;
    ts.check(s)?;
    if t == s {
        return Ok(1.0);
    }
    match ts.kind {
        TimeScaleKind::Reals => {
            let (lo, hi, sign) = if s < t { (s, t, 1.0) } else { (t, s, -1.0) };
            Ok((sign * simpson(p, lo, hi, steps.max(1))).exp())
        }
        TimeScaleKind::Lattice => {
            let h = ts.step;
            let ks = ts.lattice_index(s)?;
            let kt = ts.lattice_index(t)?;
            let (lo, hi) = if ks < kt { (ks, kt) } else { (kt, ks) };
            // running product, renormalized by exact powers of two
            let mut mant = 1.0f64;
            let mut exp2 = 0i64;
            for k in lo..hi {
                let tau = k as f64 * h;
                let factor = 1.0 + h * p.eval(tau);
                if factor == 0.0 || !factor.is_finite() {
                    return Err(TimeScaleError::Regressivity { t: tau, factor });
                }
                mant *= factor;
                let a = mant.abs();
                if !(RENORM_LO..=RENORM_HI).contains(&a) {
                    let e = a.log2().floor() as i64;
                    mant = ldexp(mant, -e);
                    exp2 += e;
                }
            }
            Ok(if ks < kt {
                ldexp(mant, exp2)
            } else {
                ldexp(1.0 / mant, -exp2)
            })
        }
    }
}

const RENORM_HI: f64 = 1.157_920_892_373_162e77; // 2^256
const RENORM_LO: f64 = 8.636_168_555_094_445e-78; // 2^-256

/// `m * 2^e`, exact whenever the result is a normal number.
fn ldexp(mut m: f64, mut e: i64) -> f64 {
    while e > 512 {
        m *= 2f64.powi(512);
        e -= 512;
    }
    while e < -512 {
        m *= 2f64.powi(-512);
        e += 512;
    }
    m * 2f64.powi(e as i32)
}
