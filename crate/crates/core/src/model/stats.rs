//! Coefficient statistics: suprema/infima of coefficients, delay extrema,
//! delay-derivative suprema and impulse product bounds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::expr::CoeffExpr;
use super::interval::Interval;
use super::spec::{ImpulseSchedule, ModelError, ModelSpec};
use crate::timescale::{TimeScaleKind, TimeScaleSpec};

/// Sampling and aggregation settings for [`compute_stats`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsConfig {
    /// Length of the sampling window `[t0, t0 + window]`.
    pub window: f64,
    /// Grid points per unit time on the reals.
    pub density: f64,
    /// Golden-section refinement of every coarse-grid local extremum.
    pub refine: bool,
    /// Number of impulses entering the product bounds.
    pub product_horizon: usize,
    /// Replace computed fields by the model's `stats_override`, if any.
    pub use_override: bool,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            window: 2000.0,
            density: 40.0,
            refine: true,
            product_horizon: 100,
            use_override: true,
        }
    }
}

/// Result of [`extremes`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremes {
    pub sup: f64,
    pub inf: f64,
    /// Guaranteed outer bound over `[t0, inf)`.
    pub enclosure: Interval,
    /// The enclosure itself is exact and was reported directly.
    pub tight: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub sup: f64,
    pub inf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayStats {
    /// Largest delay value.
    pub plus: f64,
    /// Smallest delay value.
    pub minus: f64,
    /// Supremum of the delta derivative.
    pub delta_sup: f64,
}

/// Running products of `1 + lambda_k` for one species.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductBounds {
    /// Minimum over prefixes, including the empty product.
    #[serde(with = "crate::serde_float")]
    pub r_lo: f64,
    /// Maximum over prefixes, including the empty product.
    #[serde(with = "crate::serde_float")]
    pub r_hi: f64,
    #[serde(with = "crate::serde_float")]
    pub lambda_min: f64,
    #[serde(with = "crate::serde_float")]
    pub lambda_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffStats {
    pub b: Vec<Bound>,
    pub r: Vec<Bound>,
    pub a: Vec<Vec<Bound>>,
    pub c: Vec<Vec<Bound>>,
    pub d: Vec<Vec<Bound>>,
    pub e: Vec<Vec<Bound>>,
    pub tau: DelayStats,
    pub delta: DelayStats,
    pub xi: DelayStats,
    pub eta: DelayStats,
    /// Lower impulse product bound `r`.
    #[serde(with = "crate::serde_float")]
    pub impulse_r: f64,
    /// Upper impulse product bound (must not exceed one).
    #[serde(with = "crate::serde_float")]
    pub impulse_upper: f64,
    #[serde(with = "crate::serde_float")]
    pub lambda_min: f64,
    #[serde(with = "crate::serde_float")]
    pub lambda_max: f64,
    pub mu_bar: f64,
}

impl CoeffStats {
    /// All-zero statistics of the given shape.
    pub fn zeros(n: usize, m: usize) -> Self {
        let z = Bound { sup: 0.0, inf: 0.0 };
        let dz = DelayStats {
            plus: 0.0,
            minus: 0.0,
            delta_sup: 0.0,
        };
        Self {
            b: vec![z; n],
            r: vec![z; m],
            a: vec![vec![z; n]; n],
            c: vec![vec![z; m]; n],
            d: vec![vec![z; n]; m],
            e: vec![vec![z; m]; m],
            tau: dz,
            delta: dz,
            xi: dz,
            eta: dz,
            impulse_r: 1.0,
            impulse_upper: 1.0,
            lambda_min: 0.0,
            lambda_max: 0.0,
            mu_bar: 0.0,
        }
    }

    pub fn n(&self) -> usize {
        self.b.len()
    }

    pub fn m(&self) -> usize {
        self.r.len()
    }
}

/// Optional replacements for computed statistics.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_sup: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_inf: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_sup: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_inf: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_sup: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_inf: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_sup: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_inf: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_sup: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_inf: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_sup: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_inf: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_plus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_minus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_plus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_minus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi_plus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi_minus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi_delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_plus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_minus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_delta: Option<f64>,
    /// Lower impulse product bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_upper: Option<f64>,
}

fn set_vec(
    name: &str,
    src: &Option<Vec<f64>>,
    dst: &mut [Bound],
    pick: fn(&mut Bound) -> &mut f64,
    changed: &mut Vec<String>,
) -> Result<(), ModelError> {
    if let Some(v) = src {
        if v.len() != dst.len() {
            return Err(ModelError::Dimension {
                field: format!("stats_override.{name}"),
                expected: dst.len(),
                got: v.len(),
            });
        }
        for (b, &x) in dst.iter_mut().zip(v) {
            *pick(b) = x;
        }
        changed.push(name.to_string());
    }
    Ok(())
}

fn set_mat(
    name: &str,
    src: &Option<Vec<Vec<f64>>>,
    dst: &mut [Vec<Bound>],
    pick: fn(&mut Bound) -> &mut f64,
    changed: &mut Vec<String>,
) -> Result<(), ModelError> {
    if let Some(rows) = src {
        if rows.len() != dst.len() {
            return Err(ModelError::Dimension {
                field: format!("stats_override.{name}"),
                expected: dst.len(),
                got: rows.len(),
            });
        }
        for (i, (row, drow)) in rows.iter().zip(dst.iter_mut()).enumerate() {
            if row.len() != drow.len() {
                return Err(ModelError::Dimension {
                    field: format!("stats_override.{name}[{i}]"),
                    expected: drow.len(),
                    got: row.len(),
                });
            }
            for (b, &x) in drow.iter_mut().zip(row) {
                *pick(b) = x;
            }
        }
        changed.push(name.to_string());
    }
    Ok(())
}

fn set_scalar(name: &str, src: Option<f64>, dst: &mut f64, changed: &mut Vec<String>) {
    if let Some(v) = src {
        *dst = v;
        changed.push(name.to_string());
    }
}

fn sup_of(b: &mut Bound) -> &mut f64 {
    &mut b.sup
}

fn inf_of(b: &mut Bound) -> &mut f64 {
    &mut b.inf
}

impl StatsOverride {
    /// Writes every present field into `stats`; returns the overridden field names.
    pub fn apply(&self, stats: &mut CoeffStats) -> Result<Vec<String>, ModelError> {
        let mut ch = Vec::new();
        set_vec("b_sup", &self.b_sup, &mut stats.b, sup_of, &mut ch)?;
        set_vec("b_inf", &self.b_inf, &mut stats.b, inf_of, &mut ch)?;
        set_vec("r_sup", &self.r_sup, &mut stats.r, sup_of, &mut ch)?;
        set_vec("r_inf", &self.r_inf, &mut stats.r, inf_of, &mut ch)?;
        set_mat("a_sup", &self.a_sup, &mut stats.a, sup_of, &mut ch)?;
        set_mat("a_inf", &self.a_inf, &mut stats.a, inf_of, &mut ch)?;
        set_mat("c_sup", &self.c_sup, &mut stats.c, sup_of, &mut ch)?;
        set_mat("c_inf", &self.c_inf, &mut stats.c, inf_of, &mut ch)?;
        set_mat("d_sup", &self.d_sup, &mut stats.d, sup_of, &mut ch)?;
        set_mat("d_inf", &self.d_inf, &mut stats.d, inf_of, &mut ch)?;
        set_mat("e_sup", &self.e_sup, &mut stats.e, sup_of, &mut ch)?;
        set_mat("e_inf", &self.e_inf, &mut stats.e, inf_of, &mut ch)?;
        set_scalar("tau_plus", self.tau_plus, &mut stats.tau.plus, &mut ch);
        set_scalar("tau_minus", self.tau_minus, &mut stats.tau.minus, &mut ch);
        set_scalar("tau_delta", self.tau_delta, &mut stats.tau.delta_sup, &mut ch);
        set_scalar("delta_plus", self.delta_plus, &mut stats.delta.plus, &mut ch);
        set_scalar("delta_minus", self.delta_minus, &mut stats.delta.minus, &mut ch);
        set_scalar("delta_delta", self.delta_delta, &mut stats.delta.delta_sup, &mut ch);
        set_scalar("xi_plus", self.xi_plus, &mut stats.xi.plus, &mut ch);
        set_scalar("xi_minus", self.xi_minus, &mut stats.xi.minus, &mut ch);
        set_scalar("xi_delta", self.xi_delta, &mut stats.xi.delta_sup, &mut ch);
        set_scalar("eta_plus", self.eta_plus, &mut stats.eta.plus, &mut ch);
        set_scalar("eta_minus", self.eta_minus, &mut stats.eta.minus, &mut ch);
        set_scalar("eta_delta", self.eta_delta, &mut stats.eta.delta_sup, &mut ch);
        set_scalar("r", self.r, &mut stats.impulse_r, &mut ch);
        set_scalar("r_upper", self.r_upper, &mut stats.impulse_upper, &mut ch);
        Ok(ch)
    }
}

/// Computed and effective statistics of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsBundle {
    pub computed: CoeffStats,
    pub effective: CoeffStats,
    pub overridden: Vec<String>,
}

impl StatsBundle {
    pub fn is_overridden(&self, field: &str) -> bool {
        self.overridden.iter().any(|f| f == field)
    }
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;

fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut best = fc.max(fd);
    for _ in 0..90 {
        if (b - a) <= 1e-14 * (1.0 + a.abs()) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
            best = best.max(fc);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
            best = best.max(fd);
        }
    }
    best
}

fn sample_window(f: &(dyn Fn(f64) -> f64 + Sync), t0: f64, window: f64, density: f64, refine: bool) -> (f64, f64) {
    let n = ((window * density).ceil() as usize).max(2);
    let dt = window / n as f64;
    let grid: Vec<f64> = (0..=n).into_par_iter().map(|i| f(t0 + i as f64 * dt)).collect();
    let mut hi = grid.par_iter().cloned().reduce(|| f64::NEG_INFINITY, f64::max);
    let mut lo = grid.par_iter().cloned().reduce(|| f64::INFINITY, f64::min);
    if refine {
        let local = |i: usize, sgn: f64| {
            let v = sgn * grid[i];
            let left = if i > 0 { sgn * grid[i - 1] } else { f64::NEG_INFINITY };
            let right = if i < n { sgn * grid[i + 1] } else { f64::NEG_INFINITY };
            v >= left && v >= right
        };
        let bracket = |i: usize| {
            let a = t0 + i.saturating_sub(1) as f64 * dt;
            let b = t0 + (i + 1).min(n) as f64 * dt;
            (a, b)
        };
        let rmax = (0..=n)
            .into_par_iter()
            .filter(|&i| local(i, 1.0))
            .map(|i| {
                let (a, b) = bracket(i);
                golden_max(&|t| f(t), a, b)
            })
            .reduce(|| f64::NEG_INFINITY, f64::max);
        let rmin = (0..=n)
            .into_par_iter()
            .filter(|&i| local(i, -1.0))
            .map(|i| {
                let (a, b) = bracket(i);
                -golden_max(&|t| -f(t), a, b)
            })
            .reduce(|| f64::INFINITY, f64::min);
        hi = hi.max(rmax);
        lo = lo.min(rmin);
    }
    (hi, lo)
}

fn lattice_points(ts: &TimeScaleSpec, t0: f64, window: f64) -> impl Iterator<Item = f64> + '_ {
    let h = ts.step();
    let k0 = (t0 / h).round() as i64;
    let n = (window / h).round().max(1.0) as i64;
    (0..=n).map(move |k| (k0 + k) as f64 * h)
}

/// Supremum and infimum of `expr` over the time scale from `t0` on.
///
/// Exact interval enclosures are reported directly for single-use
/// expressions on the reals; everything else is sampled over the configured
/// window (with refinement on the reals) and clipped to the enclosure.
pub fn extremes(expr: &CoeffExpr, ts: &TimeScaleSpec, cfg: &StatsConfig, t0: f64) -> Extremes {
    let enclosure = expr.enclose(Interval::new(t0, f64::INFINITY));
    if expr.is_constant() {
        let v = expr.eval(t0);
        return Extremes {
            sup: v,
            inf: v,
            enclosure,
            tight: true,
        };
    }
    if ts.kind() == TimeScaleKind::Reals && expr.var_count() == 1 && enclosure.is_finite() {
        return Extremes {
            sup: enclosure.hi,
            inf: enclosure.lo,
            enclosure,
            tight: true,
        };
    }
    let (hi, lo) = match ts.kind() {
        TimeScaleKind::Reals => sample_window(&|t| expr.eval(t), t0, cfg.window, cfg.density, cfg.refine),
        TimeScaleKind::Lattice => lattice_points(ts, t0, cfg.window)
            .map(|t| expr.eval(t))
            .fold((f64::NEG_INFINITY, f64::INFINITY), |(h, l), v| (h.max(v), l.min(v))),
    };
    Extremes {
        sup: hi.min(enclosure.hi),
        inf: lo.max(enclosure.lo),
        enclosure,
        tight: false,
    }
}

/// Supremum of the delta derivative of a delay expression.
pub fn derivative_sup(expr: &CoeffExpr, ts: &TimeScaleSpec, cfg: &StatsConfig, t0: f64) -> f64 {
    if expr.is_constant() {
        return 0.0;
    }
    match ts.kind() {
        TimeScaleKind::Reals => extremes(&expr.derivative(), ts, cfg, t0).sup,
        TimeScaleKind::Lattice => {
            let h = ts.step();
            lattice_points(ts, t0, cfg.window)
                .map(|t| (expr.eval(t + h) - expr.eval(t)) / h)
                .fold(f64::NEG_INFINITY, f64::max)
        }
    }
}

/// Prefix products of `1 + lambda_k`, `k = 1..=horizon_k`.
pub fn impulse_product_bound(lambda: &CoeffExpr, horizon_k: usize) -> Result<ProductBounds, ModelError> {
    let mut p = 1.0;
    let mut out = ProductBounds {
        r_lo: 1.0,
        r_hi: 1.0,
        lambda_min: f64::INFINITY,
        lambda_max: f64::NEG_INFINITY,
    };
    for k in 1..=horizon_k.max(1) {
        let lam = lambda.eval(k as f64);
        if !(lam > -1.0) {
            return Err(ModelError::Impulse(format!("lambda_{k} = {lam} must exceed -1")));
        }
        p *= 1.0 + lam;
        out.r_lo = out.r_lo.min(p);
        out.r_hi = out.r_hi.max(p);
        out.lambda_min = out.lambda_min.min(lam);
        out.lambda_max = out.lambda_max.max(lam);
    }
    Ok(out)
}

/// Product bounds over every species of a schedule, limited to the number
/// of impulses actually scheduled.
pub fn schedule_product_bounds(sched: &ImpulseSchedule, horizon_k: usize) -> Result<Vec<ProductBounds>, ModelError> {
    let k = sched.times.count().map_or(horizon_k, |c| c.min(horizon_k));
    if k == 0 {
        let none = ProductBounds {
            r_lo: 1.0,
            r_hi: 1.0,
            lambda_min: 0.0,
            lambda_max: 0.0,
        };
        return Ok(vec![none; sched.lambda_x.len() + sched.lambda_y.len()]);
    }
    sched
        .lambda_x
        .iter()
        .chain(&sched.lambda_y)
        .map(|l| impulse_product_bound(l, k))
        .collect()
}

fn bound(expr: &CoeffExpr, ts: &TimeScaleSpec, cfg: &StatsConfig, t0: f64) -> Bound {
    let e = extremes(expr, ts, cfg, t0);
    Bound { sup: e.sup, inf: e.inf }
}

fn matrix_bounds(mat: &[Vec<CoeffExpr>], ts: &TimeScaleSpec, cfg: &StatsConfig, t0: f64) -> Vec<Vec<Bound>> {
    mat.iter()
        .map(|row| row.iter().map(|e| bound(e, ts, cfg, t0)).collect())
        .collect()
}

fn delay_stats(mat: &[Vec<CoeffExpr>], ts: &TimeScaleSpec, cfg: &StatsConfig, t0: f64) -> DelayStats {
    let entries: Vec<&CoeffExpr> = mat.iter().flatten().collect();
    if entries.is_empty() {
        return DelayStats {
            plus: 0.0,
            minus: 0.0,
            delta_sup: 0.0,
        };
    }
    let per: Vec<(Bound, f64)> = entries
        .par_iter()
        .map(|e| (bound(e, ts, cfg, t0), derivative_sup(e, ts, cfg, t0)))
        .collect();
    DelayStats {
        plus: per.iter().map(|(b, _)| b.sup).fold(f64::NEG_INFINITY, f64::max),
        minus: per.iter().map(|(b, _)| b.inf).fold(f64::INFINITY, f64::min),
        delta_sup: per.iter().map(|(_, d)| *d).fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Computes every statistic of `model`; applies its override when
/// `cfg.use_override` is set.
pub fn compute_stats(model: &ModelSpec, cfg: &StatsConfig) -> Result<StatsBundle, ModelError> {
    let ts = &model.ts;
    let t0 = model.t0;
    let (b, r) = rayon::join(
        || model.b.iter().map(|e| bound(e, ts, cfg, t0)).collect::<Vec<_>>(),
        || model.r.iter().map(|e| bound(e, ts, cfg, t0)).collect::<Vec<_>>(),
    );
    let mats: Vec<Vec<Vec<Bound>>> = [&model.a, &model.c, &model.d, &model.e]
        .par_iter()
        .map(|m| matrix_bounds(m, ts, cfg, t0))
        .collect();
    let delays: Vec<DelayStats> = [&model.tau, &model.delta, &model.xi, &model.eta]
        .par_iter()
        .map(|m| delay_stats(m, ts, cfg, t0))
        .collect();
    let products = schedule_product_bounds(&model.impulses, cfg.product_horizon)?;
    let fold = |f: fn(&ProductBounds) -> f64, init: f64, op: fn(f64, f64) -> f64| products.iter().map(f).fold(init, op);
    let mut mats = mats.into_iter();
    let computed = CoeffStats {
        b,
        r,
        a: mats.next().unwrap(),
        c: mats.next().unwrap(),
        d: mats.next().unwrap(),
        e: mats.next().unwrap(),
        tau: delays[0],
        delta: delays[1],
        xi: delays[2],
        eta: delays[3],
        impulse_r: fold(|p| p.r_lo, f64::INFINITY, f64::min),
        impulse_upper: fold(|p| p.r_hi, f64::NEG_INFINITY, f64::max),
        lambda_min: fold(|p| p.lambda_min, f64::INFINITY, f64::min),
        lambda_max: fold(|p| p.lambda_max, f64::NEG_INFINITY, f64::max),
        mu_bar: ts.graininess_sup(),
    };
    let mut effective = computed.clone();
    let mut overridden = Vec::new();
    if cfg.use_override {
        if let Some(ov) = &model.stats_override {
            overridden = ov.apply(&mut effective)?;
        }
    }
    Ok(StatsBundle {
        computed,
        effective,
        overridden,
    })
}
