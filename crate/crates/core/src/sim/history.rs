//! Delay history: a pruned ring of past samples with interpolation.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::model::CoeffExpr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    /// Cubic Hermite when both end slopes are known, quadratic otherwise.
    #[default]
    Hermite,
    Linear,
    HoldLeft,
}

/// State before the start time.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialHistory {
    Constant(Vec<f64>),
    Exprs(Vec<CoeffExpr>),
}

impl InitialHistory {
    pub fn dim(&self) -> usize {
        match self {
            InitialHistory::Constant(v) => v.len(),
            InitialHistory::Exprs(v) => v.len(),
        }
    }

    pub fn value(&self, k: usize, t: f64) -> f64 {
        match self {
            InitialHistory::Constant(v) => v[k],
            InitialHistory::Exprs(v) => v[k].eval(t),
        }
    }

    pub fn at(&self, t: f64) -> Vec<f64> {
        (0..self.dim()).map(|k| self.value(k, t)).collect()
    }
}

#[derive(Debug, Clone)]
struct Sample {
    t: f64,
    y: Vec<f64>,
    /// Slope at this sample, once known. For a pre-jump sample this is the
    /// left derivative; otherwise the right derivative.
    dy: Option<Vec<f64>>,
}

/// Past samples on `[t_now - span, t_now]`, plus the initial history before `t0`.
///
/// Lookups are left-continuous at impulse instants: at a jump time the
/// pre-impulse value is returned.
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    samples: VecDeque<Sample>,
    initial: InitialHistory,
    t0: f64,
    span: f64,
    interp: Interpolation,
}

impl HistoryBuffer {
    pub fn new(initial: InitialHistory, t0: f64, span: f64, interp: Interpolation) -> Self {
        let y0 = initial.at(t0);
        let mut samples = VecDeque::new();
        samples.push_back(Sample { t: t0, y: y0, dy: None });
        Self {
            samples,
            initial,
            t0,
            span,
            interp,
        }
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    pub fn last_time(&self) -> f64 {
        self.samples.back().map_or(self.t0, |s| s.t)
    }

    pub fn last_state(&self) -> &[f64] {
        &self.samples.back().expect("history is never empty").y
    }

    /// Sets the slope of the newest sample.
    pub fn set_last_slope(&mut self, dy: Vec<f64>) {
        if let Some(s) = self.samples.back_mut() {
            s.dy = Some(dy);
        }
    }

    pub fn last_slope(&self) -> Option<&[f64]> {
        self.samples.back().and_then(|s| s.dy.as_deref())
    }

    /// Appends a sample; a sample at the same time as the newest one records a jump.
    pub fn push(&mut self, t: f64, y: Vec<f64>) {
        debug_assert!(t >= self.last_time());
        self.samples.push_back(Sample { t, y, dy: None });
        let keep_from = t - self.span;
        while self.samples.len() > 2 && self.samples[1].t <= keep_from {
            self.samples.pop_front();
        }
    }

    /// Component `k` at time `t <= last_time()`.
    pub fn value(&self, k: usize, t: f64) -> Result<f64, SimError> {
        if t < self.t0 {
            return Ok(self.initial.value(k, t));
        }
        let first = &self.samples[0];
        if t < first.t {
            return Err(SimError::HistoryExhausted { t, oldest: first.t });
        }
        let n = self.samples.len();
        if t == first.t || n == 1 {
            return Ok(first.y[k]);
        }
        // last index i with samples[i].t < t, so that t lies in (t_i, t_{i+1}]
        let i = self.partition(t).saturating_sub(1);
        if i + 1 >= n {
            return Ok(self.samples[n - 1].y[k]);
        }
        let (a, b) = (&self.samples[i], &self.samples[i + 1]);
        if t == b.t {
            return Ok(b.y[k]);
        }
        let h = b.t - a.t;
        let s = (t - a.t) / h;
        Ok(match self.interp {
            Interpolation::HoldLeft => a.y[k],
            Interpolation::Linear => a.y[k] + s * (b.y[k] - a.y[k]),
            Interpolation::Hermite => {
                let (y0, y1) = (a.y[k], b.y[k]);
                let m0 = a.dy.as_ref().map(|d| d[k]);
                let m1 = b.dy.as_ref().map(|d| d[k]);
                match (m0, m1) {
                    (Some(m0), Some(m1)) => hermite(y0, m0 * h, y1, m1 * h, s),
                    (Some(m0), None) => y0 + s * (m0 * h) + s * s * (y1 - y0 - m0 * h),
                    _ => y0 + s * (y1 - y0),
                }
            }
        })
    }

    /// Number of samples with time strictly below `t`.
    fn partition(&self, t: f64) -> usize {
        let (mut lo, mut hi) = (0, self.samples.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.samples[mid].t < t {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo
    }
}

fn hermite(y0: f64, d0: f64, y1: f64, d1: f64, s: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * d0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * d1
}
