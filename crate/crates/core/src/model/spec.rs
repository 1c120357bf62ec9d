//! Model documents (JSON) and the validated [`ModelSpec`].

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::expr::{parse_expr, parse_sequence_expr, CoeffExpr, ExprError};
use super::stats::StatsOverride;
use crate::timescale::{TimeScaleError, TimeScaleKind, TimeScaleSpec};

/// Span of the nonnegativity validation grid after `t0`.
pub const VALIDATION_WINDOW: f64 = 200.0;
/// Number of impulse indices checked for `lambda_k > -1` at load time.
pub const VALIDATION_IMPULSES: usize = 100;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot read model file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed model document: {0}")]
    Schema(#[from] serde_json::Error),
    #[error("dimension mismatch in {field}: expected {expected}, got {got}")]
    Dimension { field: String, expected: usize, got: usize },
    #[error("bad expression in {entry}: {source}")]
    Expr {
        entry: String,
        #[source]
        source: ExprError,
    },
    #[error("{entry} is negative at t = {t}: {value}")]
    Negative { entry: String, t: f64, value: f64 },
    #[error("invalid impulse schedule: {0}")]
    Impulse(String),
    #[error(transparent)]
    TimeScale(#[from] TimeScaleError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeScaleDoc {
    pub kind: TimeScaleKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImpulseTimesDoc {
    Periodic {
        period: f64,
        #[serde(default)]
        offset: f64,
    },
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpulsesDoc {
    pub times: ImpulseTimesDoc,
    pub lambda_x: Vec<String>,
    pub lambda_y: Vec<String>,
}

/// The model file as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub time_scale: TimeScaleDoc,
    pub n: usize,
    pub m: usize,
    pub b: Vec<String>,
    pub r: Vec<String>,
    pub a: Vec<Vec<String>>,
    pub c: Vec<Vec<String>>,
    pub d: Vec<Vec<String>>,
    pub e: Vec<Vec<String>>,
    pub tau: Vec<Vec<String>>,
    pub delta: Vec<Vec<String>>,
    pub xi: Vec<Vec<String>>,
    pub eta: Vec<Vec<String>>,
    pub impulses: ImpulsesDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats_override: Option<StatsOverride>,
    #[serde(default)]
    pub t0: f64,
}

/// Impulse instants.
#[derive(Debug, Clone, PartialEq)]
pub enum ImpulseTimes {
    /// `t_k = offset + k * period`, `k >= 1`.
    Periodic { period: f64, offset: f64 },
    /// Strictly increasing list; `t_k` is the `k`-th entry (1-based).
    Explicit(Vec<f64>),
}

impl ImpulseTimes {
    pub fn none() -> Self {
        ImpulseTimes::Explicit(Vec::new())
    }

    /// Number of scheduled impulses, `None` if infinite.
    pub fn count(&self) -> Option<usize> {
        match self {
            ImpulseTimes::Periodic { .. } => None,
            ImpulseTimes::Explicit(v) => Some(v.len()),
        }
    }

    /// Impulses `(k, t_k)` with `from < t_k <= to`.
    pub fn between(&self, from: f64, to: f64) -> Vec<(usize, f64)> {
        match self {
            ImpulseTimes::Periodic { period, offset } => {
                let mut k = (((from - offset) / period).floor().max(0.0)) as usize;
                let mut out = Vec::new();
                loop {
                    let t = offset + k as f64 * period;
                    if t > to + 1e-12 * to.abs().max(1.0) {
                        break;
                    }
                    if k >= 1 && t > from + 1e-12 * from.abs().max(1.0) {
                        out.push((k, t));
                    }
                    k += 1;
                }
                out
            }
            ImpulseTimes::Explicit(v) => v
                .iter()
                .enumerate()
                .filter(|(_, &t)| t > from && t <= to)
                .map(|(i, &t)| (i + 1, t))
                .collect(),
        }
    }

    /// Infimum of the gaps between consecutive impulses (`inf` if fewer than two).
    pub fn min_gap(&self) -> f64 {
        match self {
            ImpulseTimes::Periodic { period, .. } => *period,
            ImpulseTimes::Explicit(v) => v.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseSchedule {
    pub times: ImpulseTimes,
    /// Jump sizes in the impulse index `k`, one per prey species.
    pub lambda_x: Vec<CoeffExpr>,
    /// Jump sizes in `k`, one per predator species.
    pub lambda_y: Vec<CoeffExpr>,
}

impl ImpulseSchedule {
    pub fn none(n: usize, m: usize) -> Self {
        Self {
            times: ImpulseTimes::none(),
            lambda_x: vec![CoeffExpr::constant(0.0); n],
            lambda_y: vec![CoeffExpr::constant(0.0); m],
        }
    }
}

/// A validated system of `n` prey and `m` predators.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub ts: TimeScaleSpec,
    pub n: usize,
    pub m: usize,
    pub b: Vec<CoeffExpr>,
    pub r: Vec<CoeffExpr>,
    pub a: Vec<Vec<CoeffExpr>>,
    pub c: Vec<Vec<CoeffExpr>>,
    pub d: Vec<Vec<CoeffExpr>>,
    pub e: Vec<Vec<CoeffExpr>>,
    pub tau: Vec<Vec<CoeffExpr>>,
    pub delta: Vec<Vec<CoeffExpr>>,
    pub xi: Vec<Vec<CoeffExpr>>,
    pub eta: Vec<Vec<CoeffExpr>>,
    pub impulses: ImpulseSchedule,
    pub stats_override: Option<StatsOverride>,
    pub t0: f64,
    /// SHA-256 of the canonical document, hex encoded.
    pub hash: String,
}

impl ModelSpec {
    /// Largest delay value seen on the validation grid.
    pub fn max_delay_sample(&self) -> f64 {
        let grid = validation_grid(&self.ts, self.t0);
        [&self.tau, &self.delta, &self.xi, &self.eta]
            .iter()
            .flat_map(|m| m.iter().flatten())
            .flat_map(|e| grid.iter().map(move |&t| e.eval(t)))
            .fold(0.0, f64::max)
    }
}

fn validation_grid(ts: &TimeScaleSpec, t0: f64) -> Vec<f64> {
    match ts.kind() {
        TimeScaleKind::Reals => {
            let n = (VALIDATION_WINDOW * 10.0) as usize;
            (0..=n).map(|i| t0 + i as f64 * 0.1 + 0.0123 * (i % 7) as f64).collect()
        }
        TimeScaleKind::Lattice => {
            let h = ts.step();
            let k0 = (t0 / h).round() as i64;
            (0..=(VALIDATION_WINDOW / h).round().max(2000.0) as i64)
                .map(|k| (k0 + k) as f64 * h)
                .collect()
        }
    }
}

fn check_len(field: &str, expected: usize, got: usize) -> Result<(), ModelError> {
    if expected == got {
        Ok(())
    } else {
        Err(ModelError::Dimension {
            field: field.to_string(),
            expected,
            got,
        })
    }
}

fn parse_vec(field: &str, v: &[String], len: usize) -> Result<Vec<CoeffExpr>, ModelError> {
    check_len(field, len, v.len())?;
    v.iter()
        .enumerate()
        .map(|(i, s)| {
            parse_expr(s).map_err(|source| ModelError::Expr {
                entry: format!("{field}[{i}]"),
                source,
            })
        })
        .collect()
}

fn parse_mat(field: &str, v: &[Vec<String>], rows: usize, cols: usize) -> Result<Vec<Vec<CoeffExpr>>, ModelError> {
    check_len(field, rows, v.len())?;
    v.iter()
        .enumerate()
        .map(|(i, row)| parse_vec(&format!("{field}[{i}]"), row, cols))
        .collect()
}

fn check_nonnegative(field: &str, entries: &[(String, &CoeffExpr)], grid: &[f64]) -> Result<(), ModelError> {
    for (name, e) in entries {
        for &t in grid {
            let v = e.eval(t);
            if !(v >= 0.0) {
                return Err(ModelError::Negative {
                    entry: format!("{field}{name}"),
                    t,
                    value: v,
                });
            }
        }
    }
    Ok(())
}

fn named_vec(v: &[CoeffExpr]) -> Vec<(String, &CoeffExpr)> {
    v.iter().enumerate().map(|(i, e)| (format!("[{i}]"), e)).collect()
}

fn named_mat(v: &[Vec<CoeffExpr>]) -> Vec<(String, &CoeffExpr)> {
    v.iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, e)| (format!("[{i}][{j}]"), e)))
        .collect()
}

impl ModelDoc {
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("model document serializes");
        Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn into_spec(self) -> Result<ModelSpec, ModelError> {
        let ts = match self.time_scale.kind {
            TimeScaleKind::Reals => TimeScaleSpec::reals(),
            TimeScaleKind::Lattice => TimeScaleSpec::lattice(self.time_scale.step.unwrap_or(1.0))?,
        };
        let (n, m) = (self.n, self.m);
        if n == 0 {
            return Err(ModelError::Dimension {
                field: "n".into(),
                expected: 1,
                got: 0,
            });
        }
        if !self.t0.is_finite() || !ts.contains(self.t0) {
            return Err(TimeScaleError::OffLattice {
                t: self.t0,
                step: ts.step(),
            }
            .into());
        }
        let b = parse_vec("b", &self.b, n)?;
        let r = parse_vec("r", &self.r, m)?;
        let a = parse_mat("a", &self.a, n, n)?;
        let c = parse_mat("c", &self.c, n, m)?;
        let d = parse_mat("d", &self.d, m, n)?;
        let e = parse_mat("e", &self.e, m, m)?;
        let tau = parse_mat("tau", &self.tau, n, n)?;
        let delta = parse_mat("delta", &self.delta, n, m)?;
        let xi = parse_mat("xi", &self.xi, m, n)?;
        let eta = parse_mat("eta", &self.eta, m, m)?;

        let grid = validation_grid(&ts, self.t0);
        check_nonnegative("b", &named_vec(&b), &grid)?;
        check_nonnegative("r", &named_vec(&r), &grid)?;
        for (name, mat) in [
            ("a", &a),
            ("c", &c),
            ("d", &d),
            ("e", &e),
            ("tau", &tau),
            ("delta", &delta),
            ("xi", &xi),
            ("eta", &eta),
        ] {
            check_nonnegative(name, &named_mat(mat), &grid)?;
        }

        let impulses = self.impulses_spec(&ts)?;
        if let Some(ov) = &self.stats_override {
            // dimension check only; the values are applied by compute_stats
            let mut probe = super::stats::CoeffStats::zeros(n, m);
            ov.apply(&mut probe)?;
        }
        let hash = self.hash();
        Ok(ModelSpec {
            ts,
            n,
            m,
            b,
            r,
            a,
            c,
            d,
            e,
            tau,
            delta,
            xi,
            eta,
            impulses,
            stats_override: self.stats_override,
            t0: self.t0,
            hash,
        })
    }

    fn impulses_spec(&self, ts: &TimeScaleSpec) -> Result<ImpulseSchedule, ModelError> {
        let doc = &self.impulses;
        let seq = |field: &str, v: &[String], len: usize| -> Result<Vec<CoeffExpr>, ModelError> {
            check_len(field, len, v.len())?;
            v.iter()
                .enumerate()
                .map(|(i, s)| {
                    parse_sequence_expr(s).map_err(|source| ModelError::Expr {
                        entry: format!("{field}[{i}]"),
                        source,
                    })
                })
                .collect()
        };
        let lambda_x = seq("impulses.lambda_x", &doc.lambda_x, self.n)?;
        let lambda_y = seq("impulses.lambda_y", &doc.lambda_y, self.m)?;
        let times = match &doc.times {
            ImpulseTimesDoc::Periodic { period, offset } => {
                if !(*period > 0.0) || !period.is_finite() {
                    return Err(ModelError::Impulse(format!("period must be positive, got {period}")));
                }
                if !(*offset >= 0.0) || !offset.is_finite() {
                    return Err(ModelError::Impulse(format!("offset must be nonnegative, got {offset}")));
                }
                if ts.is_lattice() && (!ts.contains(*period) || !ts.contains(*offset)) {
                    return Err(ModelError::Impulse("impulse times must lie on the lattice".into()));
                }
                ImpulseTimes::Periodic {
                    period: *period,
                    offset: *offset,
                }
            }
            ImpulseTimesDoc::Explicit(v) => {
                if let Some(w) = v.windows(2).find(|w| !(w[1] > w[0])) {
                    return Err(ModelError::Impulse(format!(
                        "impulse times must be strictly increasing: {} then {}",
                        w[0], w[1]
                    )));
                }
                if let Some(t) = v.iter().find(|t| !t.is_finite() || !ts.contains(**t)) {
                    return Err(ModelError::Impulse(format!(
                        "impulse time {t} is not on the time scale"
                    )));
                }
                ImpulseTimes::Explicit(v.clone())
            }
        };
        let kmax = times
            .count()
            .map_or(VALIDATION_IMPULSES, |c| c.min(VALIDATION_IMPULSES));
        for (name, l) in named_vec(&lambda_x)
            .into_iter()
            .map(|(s, e)| (format!("lambda_x{s}"), e))
            .chain(
                named_vec(&lambda_y)
                    .into_iter()
                    .map(|(s, e)| (format!("lambda_y{s}"), e)),
            )
        {
            for k in 1..=kmax {
                let v = l.eval(k as f64);
                if !(v > -1.0) || !v.is_finite() {
                    return Err(ModelError::Impulse(format!("{name} at k = {k} is {v}, must exceed -1")));
                }
            }
        }
        Ok(ImpulseSchedule {
            times,
            lambda_x,
            lambda_y,
        })
    }
}

/// Parses and validates a JSON model document.
pub fn load_model(text: &str) -> Result<ModelSpec, ModelError> {
    let doc: ModelDoc = serde_json::from_str(text)?;
    doc.into_spec()
}

pub fn load_model_file(path: impl AsRef<Path>) -> Result<ModelSpec, ModelError> {
    load_model(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(extra: &str) -> String {
        format!(
            r#"{{
              "time_scale": {{"kind": "reals"}},
              "n": 1, "m": 1,
              "b": ["2"], "r": ["0.1"],
              "a": [["1"]], "c": [["0.1"]], "d": [["0.2"]], "e": [["1"]],
              "tau": [["0"]], "delta": [["0"]], "xi": [["0"]], "eta": [["0"]],
              "impulses": {{"times": {{"explicit": []}}, "lambda_x": ["0"], "lambda_y": ["0"]}}
              {extra}
            }}"#
        )
    }

    #[test]
    fn loads_minimal_model() {
        let m = load_model(&toy("")).unwrap();
        assert_eq!((m.n, m.m), (1, 1));
        assert_eq!(m.ts, TimeScaleSpec::reals());
        assert_eq!(m.hash.len(), 64);
        assert_eq!(m.hash, load_model(&toy("")).unwrap().hash);
    }

    #[test]
    fn dimension_errors() {
        let bad = toy("").replace(r#""a": [["1"]]"#, r#""a": [[]]"#);
        match load_model(&bad) {
            Err(ModelError::Dimension { field, .. }) => assert_eq!(field, "a[0]"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_coefficient_rejected() {
        let bad = toy("").replace(r#""b": ["2"]"#, r#""b": ["sin(t)"]"#);
        assert!(matches!(load_model(&bad), Err(ModelError::Negative { .. })));
    }

    #[test]
    fn impulse_schedule_checks() {
        let bad = toy("").replace(r#"{"explicit": []}"#, r#"{"explicit": [1, 3, 2]}"#);
        assert!(matches!(load_model(&bad), Err(ModelError::Impulse(_))));
        let bad = toy("")
            .replace(r#""lambda_x": ["0"]"#, r#""lambda_x": ["-1"]"#)
            .replace(r#"{"explicit": []}"#, r#"{"explicit": [1]}"#);
        assert!(matches!(load_model(&bad), Err(ModelError::Impulse(_))));
        let ok = toy("").replace(r#"{"explicit": []}"#, r#"{"periodic": {"period": 1}}"#);
        let m = load_model(&ok).unwrap();
        assert_eq!(m.impulses.times.between(0.0, 3.0), vec![(1, 1.0), (2, 2.0), (3, 3.0)]);
        assert_eq!(m.impulses.times.between(1.0, 2.5), vec![(2, 2.0)]);
    }

    #[test]
    fn unknown_fields_and_bad_json() {
        assert!(matches!(load_model("{"), Err(ModelError::Schema(_))));
        assert!(matches!(
            load_model(&toy(r#", "bogus": 1"#)),
            Err(ModelError::Schema(_))
        ));
    }

    #[test]
    fn override_dimensions_checked() {
        let bad = toy(r#", "stats_override": {"b_sup": [1, 2]}"#);
        assert!(matches!(load_model(&bad), Err(ModelError::Dimension { .. })));
        let ok = toy(r#", "stats_override": {"b_sup": [3], "r": 0.9}"#);
        assert!(load_model(&ok).unwrap().stats_override.is_some());
    }
}
