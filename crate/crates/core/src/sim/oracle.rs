//! Scalar oracles: simulate the equality cases of the comparison estimates
//! and compare with their closed forms.

use serde::{Deserialize, Serialize};

use super::continuous::{integrate, DelaySystem, Lookup};
use super::history::{InitialHistory, Interpolation};
use super::SimError;
use crate::analysis::{lower_plain, lower_sigma, upper_plain, upper_sigma, ComparisonParams};
use crate::model::{CoeffExpr, ImpulseTimes};
use crate::timescale::{delta_integral, exp_fn_with, TimeScaleKind, TimeScaleSpec};

/// Relative slack allowed when comparing empirical extremes with a bound.
pub const ORACLE_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundMode {
    Upper,
    Lower,
}

/// Jumps `x(t_k+) = d_k x(t_k) + b_k`, with `d_k`, `b_k` expressions in `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSchedule {
    pub times: ImpulseTimes,
    pub d: CoeffExpr,
    pub b: CoeffExpr,
}

impl ScalarSchedule {
    pub fn none() -> Self {
        Self {
            times: ImpulseTimes::none(),
            d: CoeffExpr::constant(1.0),
            b: CoeffExpr::constant(0.0),
        }
    }

    fn jump(&self, k: usize, x: f64) -> f64 {
        let kf = k as f64;
        self.d.eval(kf) * x + self.b.eval(kf)
    }

    /// Impulses strictly inside `(from, to)`.
    fn inside(&self, from: f64, to: f64) -> Vec<(usize, f64)> {
        self.times
            .between(from, to)
            .into_iter()
            .filter(|&(_, t)| t < to)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub ts: TimeScaleSpec,
    pub t0: f64,
    /// Constant initial history.
    pub x0: f64,
    pub horizon: f64,
    /// Integration step on the reals.
    pub step: f64,
    pub transient_fraction: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            ts: TimeScaleSpec::reals(),
            t0: 0.0,
            x0: 0.5,
            horizon: 200.0,
            step: 0.01,
            transient_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub mode: BoundMode,
    /// `M` or `m` for the sigma form.
    pub bound: f64,
    /// Tail sup (upper mode) or inf (lower mode).
    pub empirical: f64,
    pub satisfied: bool,
    /// Bound for the plain form; equal to `bound` on the reals.
    pub plain_bound: f64,
    pub plain_satisfied: bool,
    /// A-priori bound `N` used by the lower estimates.
    pub n_bound: f64,
    pub tail_sup: f64,
    pub tail_inf: f64,
}

/// `x' = x (b - a x(t - tau)) + d` with impulses.
struct Logistic<'a> {
    p: &'a ComparisonParams,
    sched: &'a ScalarSchedule,
}

impl DelaySystem for Logistic<'_> {
    fn dim(&self) -> usize {
        1
    }

    fn max_delay(&self) -> f64 {
        self.p.tau_bar
    }

    fn rhs(&self, t: f64, y: &[f64], past: &Lookup<'_>, out: &mut [f64]) -> Result<(), SimError> {
        let lagged = past.value(0, t - self.p.tau_bar)?;
        out[0] = y[0] * (self.p.b - self.p.a * lagged) + self.p.d;
        Ok(())
    }

    fn impulses(&self, from: f64, to: f64) -> Vec<(usize, f64)> {
        self.sched.times.between(from, to)
    }

    fn jump(&self, k: usize, y: &mut [f64]) {
        y[0] = self.sched.jump(k, y[0]);
    }
}

/// Path of the scalar delayed logistic system as `(t, x)`, post-jump values.
fn logistic_path(
    p: &ComparisonParams,
    sched: &ScalarSchedule,
    cfg: &OracleConfig,
) -> Result<Vec<(f64, f64)>, SimError> {
    let init = InitialHistory::Constant(vec![cfg.x0]);
    match cfg.ts.kind() {
        TimeScaleKind::Reals => {
            let sys = Logistic { p, sched };
            let raw = integrate(&sys, &init, cfg.t0, cfg.step, cfg.horizon, Interpolation::Hermite)?;
            Ok(raw.into_iter().map(|r| (r.t, r.y[0])).collect())
        }
        TimeScaleKind::Lattice => {
            let h = cfg.ts.step();
            let steps = (cfg.horizon / h).round() as usize;
            let lag = (p.tau_bar / h).round() as usize;
            let mut xs = vec![cfg.x0];
            let mut out = vec![(cfg.t0, cfg.x0)];
            let mut jumps = sched.times.between(cfg.t0, cfg.t0 + steps as f64 * h);
            jumps.reverse();
            for i in 0..steps {
                let x = xs[i];
                let lagged = if i >= lag { xs[i - lag] } else { cfg.x0 };
                let mut next = x + h * (x * (p.b - p.a * lagged) + p.d);
                let t1 = cfg.t0 + (i + 1) as f64 * h;
                while let Some(&(k, tk)) = jumps.last() {
                    if (tk - t1).abs() > 1e-9 * h {
                        break;
                    }
                    jumps.pop();
                    next = sched.jump(k, next);
                }
                if !(next > 0.0 && next.is_finite()) {
                    return Err(SimError::BlowDown {
                        t: t1,
                        species: "x".into(),
                        value: next,
                    });
                }
                xs.push(next);
                out.push((t1, next));
            }
            Ok(out)
        }
    }
}

/// Simulates the equality case of the delayed logistic comparison system and
/// checks the empirical tail against the closed-form bound.
///
/// The graininess in `p` is replaced by that of `cfg.ts`. In lower mode `N`
/// is raised to the empirical tail sup plus a relative margin.
pub fn comparison_oracle(
    p: &ComparisonParams,
    mode: BoundMode,
    sched: &ScalarSchedule,
    cfg: &OracleConfig,
) -> Result<OracleReport, SimError> {
    let path = logistic_path(p, sched, cfg)?;
    let tail_start = cfg.t0 + cfg.transient_fraction * cfg.horizon;
    let (tail_inf, tail_sup) = path
        .iter()
        .filter(|(t, _)| *t >= tail_start)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, x)| {
            (lo.min(x), hi.max(x))
        });
    let mut q = ComparisonParams {
        mu_bar: cfg.ts.graininess_sup(),
        ..*p
    };
    Ok(match mode {
        BoundMode::Upper => {
            let bound = upper_sigma(&q)?;
            let plain_bound = upper_plain(&q)?;
            OracleReport {
                mode,
                bound,
                empirical: tail_sup,
                satisfied: tail_sup <= bound * (1.0 + ORACLE_TOL),
                plain_bound,
                plain_satisfied: tail_sup <= plain_bound * (1.0 + ORACLE_TOL),
                n_bound: q.n_bound,
                tail_sup,
                tail_inf,
            }
        }
        BoundMode::Lower => {
            q.n_bound = q.n_bound.max(tail_sup * (1.0 + ORACLE_TOL));
            let bound = lower_sigma(&q)?;
            let plain_bound = lower_plain(&q)?;
            OracleReport {
                mode,
                bound,
                empirical: tail_inf,
                satisfied: tail_inf >= bound * (1.0 - ORACLE_TOL),
                plain_bound,
                plain_satisfied: tail_inf >= plain_bound * (1.0 - ORACLE_TOL),
                n_bound: q.n_bound,
                tail_sup,
                tail_inf,
            }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GronwallReport {
    pub simulated: f64,
    pub closed_form: f64,
}

impl GronwallReport {
    pub fn relative_error(&self) -> f64 {
        (self.simulated - self.closed_form).abs() / self.closed_form.abs().max(1.0)
    }
}

/// `x^D = p x + q` with jumps.
struct Linear<'a> {
    p: &'a CoeffExpr,
    q: &'a CoeffExpr,
    sched: &'a ScalarSchedule,
    t_end: f64,
}

impl DelaySystem for Linear<'_> {
    fn dim(&self) -> usize {
        1
    }

    fn max_delay(&self) -> f64 {
        0.0
    }

    fn rhs(&self, t: f64, y: &[f64], _: &Lookup<'_>, out: &mut [f64]) -> Result<(), SimError> {
        out[0] = self.p.eval(t) * y[0] + self.q.eval(t);
        Ok(())
    }

    fn impulses(&self, from: f64, to: f64) -> Vec<(usize, f64)> {
        self.sched.inside(from, to.min(self.t_end))
    }

    fn jump(&self, k: usize, y: &mut [f64]) {
        y[0] = self.sched.jump(k, y[0]);
    }

    fn check_state(&self, t: f64, y: &[f64]) -> Result<(), SimError> {
        if y[0].is_finite() {
            Ok(())
        } else {
            Err(SimError::BlowDown {
                t,
                species: "x".into(),
                value: y[0],
            })
        }
    }
}

fn quad_steps(len: f64) -> usize {
    ((50.0 * len.abs()).ceil() as usize).max(200)
}

/// Simulates `x^D = p x + q` with jumps `x(t_k+) = d_k x(t_k) + b_k` from
/// `x(t0) = x0` to `t0 + horizon`, and evaluates the variation-of-constants
/// formula for the same value.
pub fn gronwall_oracle(
    p: &CoeffExpr,
    q: &CoeffExpr,
    sched: &ScalarSchedule,
    cfg: &OracleConfig,
) -> Result<GronwallReport, SimError> {
    let (ts, t0) = (&cfg.ts, cfg.t0);
    let t = t0 + cfg.horizon;
    let jumps = sched.inside(t0, t);

    let simulated = match ts.kind() {
        TimeScaleKind::Reals => {
            let sys = Linear { p, q, sched, t_end: t };
            let init = InitialHistory::Constant(vec![cfg.x0]);
            let raw = integrate(&sys, &init, t0, cfg.step, cfg.horizon, Interpolation::Hermite)?;
            raw.last().map_or(cfg.x0, |r| r.y[0])
        }
        TimeScaleKind::Lattice => {
            let h = ts.step();
            let steps = (cfg.horizon / h).round() as usize;
            let mut x = cfg.x0;
            let mut pending = jumps.clone();
            pending.reverse();
            for i in 0..steps {
                let s = t0 + i as f64 * h;
                x += h * (p.eval(s) * x + q.eval(s));
                let s1 = t0 + (i + 1) as f64 * h;
                while let Some(&(k, tk)) = pending.last() {
                    if (tk - s1).abs() > 1e-9 * h {
                        break;
                    }
                    pending.pop();
                    x = sched.jump(k, x);
                }
            }
            x
        }
    };

    let pf = |s: f64| p.eval(s);
    let ep = |from: f64| exp_fn_with(ts, &pf, t, from, quad_steps(t - from));
    // product of d_j over impulses strictly after s
    let dprod = |s: f64| -> f64 {
        jumps
            .iter()
            .filter(|&&(_, tj)| tj > s)
            .map(|&(j, _)| sched.d.eval(j as f64))
            .product()
    };

    let mut closed = cfg.x0 * dprod(t0) * ep(t0)?;
    for &(k, tk) in &jumps {
        closed += dprod(tk) * ep(tk)? * sched.b.eval(k as f64);
    }
    closed += match ts.kind() {
        TimeScaleKind::Lattice => {
            let h = ts.step();
            let f = |s: f64| dprod(s) * ep(s + h).unwrap_or(f64::NAN) * q.eval(s);
            delta_integral(ts, &f, t0, t, 0)?
        }
        TimeScaleKind::Reals => {
            let mut cuts = vec![t0];
            cuts.extend(jumps.iter().map(|j| j.1));
            cuts.push(t);
            let mut acc = 0.0;
            for w in cuts.windows(2) {
                let weight = dprod(0.5 * (w[0] + w[1]));
                let f = |s: f64| weight * ep(s).unwrap_or(f64::NAN) * q.eval(s);
                acc += delta_integral(ts, &f, w[0], w[1], quad_steps(w[1] - w[0]))?;
            }
            acc
        }
    };

    Ok(GronwallReport {
        simulated,
        closed_form: closed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_expr, parse_sequence_expr};

    fn c(v: f64) -> CoeffExpr {
        CoeffExpr::constant(v)
    }

    #[test]
    fn gronwall_trivial() {
        let cfg = OracleConfig {
            x0: 1.7,
            horizon: 4.0,
            ..OracleConfig::default()
        };
        let r = gronwall_oracle(&c(0.0), &c(0.0), &ScalarSchedule::none(), &cfg).unwrap();
        assert!((r.simulated - 1.7).abs() < 1e-14);
        assert!((r.closed_form - 1.7).abs() < 1e-14);
    }

    #[test]
    fn gronwall_lattice_hand_product() {
        let sched = ScalarSchedule {
            times: ImpulseTimes::Explicit(vec![5.0]),
            d: c(0.5),
            b: c(0.0),
        };
        let cfg = OracleConfig {
            ts: TimeScaleSpec::integers(),
            x0: 1.0,
            horizon: 10.0,
            ..OracleConfig::default()
        };
        let r = gronwall_oracle(&c(0.1), &c(0.0), &sched, &cfg).unwrap();
        let expect = 0.5 * 1.1f64.powi(10);
        assert!((r.simulated - expect).abs() < 1e-12);
        assert!((r.closed_form - expect).abs() < 1e-12);
        assert!((expect - 1.29687).abs() < 1e-5);
    }

    #[test]
    fn gronwall_linear_ode() {
        let cfg = OracleConfig {
            x0: 3.0,
            horizon: 3.0,
            step: 0.001,
            ..OracleConfig::default()
        };
        let r = gronwall_oracle(&c(-1.0), &c(1.0), &ScalarSchedule::none(), &cfg).unwrap();
        let expect = 1.0 + 2.0 * (-3f64).exp();
        assert!((r.simulated - expect).abs() < 1e-10);
        assert!((r.closed_form - expect).abs() < 1e-9);
    }

    #[test]
    fn gronwall_with_additive_jumps() {
        let sched = ScalarSchedule {
            times: ImpulseTimes::Periodic {
                period: 1.0,
                offset: 0.0,
            },
            d: parse_sequence_expr("1 - 0.3/2^k").unwrap(),
            b: parse_sequence_expr("0.2*cos(k)").unwrap(),
        };
        for ts in [TimeScaleSpec::reals(), TimeScaleSpec::lattice(0.25).unwrap()] {
            let cfg = OracleConfig {
                ts,
                x0: 0.8,
                horizon: 4.5,
                step: 0.005,
                ..OracleConfig::default()
            };
            let p = parse_expr("0.2*sin(t) - 0.1").unwrap();
            let q = parse_expr("0.3 + 0.1*cos(2*t)").unwrap();
            let r = gronwall_oracle(&p, &q, &sched, &cfg).unwrap();
            assert!(r.relative_error() < 1e-8, "{r:?}");
        }
    }

    #[test]
    fn logistic_upper_equality() {
        let p = ComparisonParams::new(1.0, 2.0);
        let r = comparison_oracle(&p, BoundMode::Upper, &ScalarSchedule::none(), &OracleConfig::default()).unwrap();
        assert!((r.empirical - 2.0).abs() < 1e-9);
        assert_eq!(r.bound, 2.0);
        assert!(r.satisfied);
    }

    #[test]
    fn delayed_logistic_both_modes() {
        let p = ComparisonParams {
            tau_bar: 0.1,
            ..ComparisonParams::new(1.0, 1.0)
        };
        let up = comparison_oracle(&p, BoundMode::Upper, &ScalarSchedule::none(), &OracleConfig::default()).unwrap();
        assert!((up.bound - 0.1f64.exp()).abs() < 1e-15);
        assert!(up.satisfied);
        let q = ComparisonParams { n_bound: up.bound, ..p };
        let lo = comparison_oracle(&q, BoundMode::Lower, &ScalarSchedule::none(), &OracleConfig::default()).unwrap();
        assert!(lo.satisfied, "{lo:?}");
    }

    #[test]
    fn lattice_delayed_logistic() {
        let p = ComparisonParams {
            tau_bar: 1.0,
            ..ComparisonParams::new(0.1, 0.1)
        };
        let cfg = OracleConfig {
            ts: TimeScaleSpec::integers(),
            horizon: 400.0,
            ..OracleConfig::default()
        };
        let up = comparison_oracle(&p, BoundMode::Upper, &ScalarSchedule::none(), &cfg).unwrap();
        assert!(up.satisfied && up.plain_satisfied, "{up:?}");
        let lo = comparison_oracle(&p, BoundMode::Lower, &ScalarSchedule::none(), &cfg).unwrap();
        assert!(1.0 - p.a * lo.n_bound > 0.0);
        assert!(lo.satisfied, "{lo:?}");
    }
}
