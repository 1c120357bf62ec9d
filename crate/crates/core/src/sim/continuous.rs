//! Fixed-step RK4 for impulsive delay systems on the reals.

use super::history::{HistoryBuffer, InitialHistory, Interpolation};
use super::{check_initial, species_name, Sample, SimConfig, SimError, Trajectory};
use crate::model::{Interval, ModelSpec};
use crate::timescale::TimeScaleKind;

/// Relative tolerance for impulse/step alignment.
const ALIGN_TOL: f64 = 1e-9;

/// A delay system `y' = f(t, y, y(t - .))` with state jumps.
pub trait DelaySystem: Sync {
    fn dim(&self) -> usize;

    /// Upper bound of every delay the right-hand side may request.
    fn max_delay(&self) -> f64;

    fn rhs(&self, t: f64, y: &[f64], past: &Lookup<'_>, out: &mut [f64]) -> Result<(), SimError>;

    /// Jumps `(k, t_k)` with `from < t_k <= to`.
    fn impulses(&self, from: f64, to: f64) -> Vec<(usize, f64)>;

    fn jump(&self, k: usize, y: &mut [f64]);

    /// Rejects states outside the domain; positivity by default.
    fn check_state(&self, t: f64, y: &[f64]) -> Result<(), SimError> {
        match y.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
            None => Ok(()),
            Some(k) => Err(SimError::BlowDown {
                t,
                species: format!("y{}", k + 1),
                value: y[k],
            }),
        }
    }
}

struct Stage<'a> {
    t1: f64,
    y1: &'a [f64],
    m0: &'a [f64],
}

/// Access to past states from inside a right-hand side evaluation.
pub struct Lookup<'a> {
    hist: &'a HistoryBuffer,
    t0: f64,
    y0: &'a [f64],
    stage: Option<Stage<'a>>,
    interp: Interpolation,
}

impl Lookup<'_> {
    /// Component `k` at time `t`; times inside the current step use the
    /// stage prediction.
    pub fn value(&self, k: usize, t: f64) -> Result<f64, SimError> {
        if t < self.t0 {
            return self.hist.value(k, t);
        }
        let Some(st) = &self.stage else {
            return Ok(self.y0[k]);
        };
        if t >= st.t1 {
            return Ok(st.y1[k]);
        }
        let h = st.t1 - self.t0;
        let s = (t - self.t0) / h;
        let (a, b) = (self.y0[k], st.y1[k]);
        Ok(match self.interp {
            Interpolation::HoldLeft => a,
            Interpolation::Linear => a + s * (b - a),
            Interpolation::Hermite => {
                let d = st.m0[k] * h;
                a + s * d + s * s * (b - a - d)
            }
        })
    }
}

/// One stored row of a raw run.
pub struct RawSample {
    pub t: f64,
    pub y: Vec<f64>,
    pub impulse: bool,
}

fn eval<S: DelaySystem + ?Sized>(
    sys: &S,
    hist: &HistoryBuffer,
    interp: Interpolation,
    t: f64,
    y: &[f64],
    stage: Option<Stage<'_>>,
    out: &mut [f64],
) -> Result<(), SimError> {
    let past = Lookup {
        hist,
        t0: hist.last_time(),
        y0: hist.last_state(),
        stage,
        interp,
    };
    sys.rhs(t, y, &past, out)
}

/// Evaluates the stage at `t + dt` predicted from slope `prev`.
#[allow(clippy::too_many_arguments)]
fn stage<S: DelaySystem + ?Sized>(
    sys: &S,
    hist: &HistoryBuffer,
    interp: Interpolation,
    t: f64,
    dt: f64,
    y: &[f64],
    k1: &[f64],
    prev: &[f64],
    ys: &mut [f64],
    out: &mut [f64],
) -> Result<(), SimError> {
    for q in 0..y.len() {
        ys[q] = y[q] + dt * prev[q];
    }
    let ts = t + dt;
    let st = Stage { t1: ts, y1: ys, m0: k1 };
    eval(sys, hist, interp, ts, ys, Some(st), out)
}

/// Integrates `sys` over `[t0, t0 + horizon]` with the classic four-stage
/// method. Impulses must fall on the step grid.
pub fn integrate<S: DelaySystem + ?Sized>(
    sys: &S,
    initial: &InitialHistory,
    t0: f64,
    step: f64,
    horizon: f64,
    interp: Interpolation,
) -> Result<Vec<RawSample>, SimError> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(SimError::Config(format!("step must be positive, got {step}")));
    }
    if initial.dim() != sys.dim() {
        return Err(SimError::Config(format!(
            "initial history has {} components, system has {}",
            initial.dim(),
            sys.dim()
        )));
    }
    let span = sys.max_delay();
    check_initial(initial, t0, span)?;
    let steps = ((horizon / step) - ALIGN_TOL).ceil().max(1.0) as usize;
    let t_end = t0 + horizon;
    let grid = |i: usize| if i == steps { t_end } else { t0 + i as f64 * step };

    let mut jumps: Vec<(usize, usize)> = Vec::new();
    for (k, tk) in sys.impulses(t0, t_end) {
        let q = (tk - t0) / step;
        let i = q.round();
        if (q - i).abs() > ALIGN_TOL * q.abs().max(1.0) || i < 1.0 {
            return Err(SimError::Misaligned { t: tk, step });
        }
        jumps.push((i as usize, k));
    }
    jumps.reverse();

    let dim = sys.dim();
    let mut hist = HistoryBuffer::new(initial.clone(), t0, span + 2.0 * step, interp);
    let mut y = hist.last_state().to_vec();
    let mut out = vec![RawSample {
        t: t0,
        y: y.clone(),
        impulse: false,
    }];
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
    let mut ys = vec![0.0; dim];

    for i in 0..steps {
        let t = grid(i);
        let t1 = grid(i + 1);
        let h = t1 - t;
        match hist.last_slope() {
            Some(d) => k1.copy_from_slice(d),
            None => {
                eval(sys, &hist, interp, t, &y, None, &mut k1)?;
                hist.set_last_slope(k1.clone());
            }
        }
        stage(sys, &hist, interp, t, 0.5 * h, &y, &k1, &k1, &mut ys, &mut k2)?;
        stage(sys, &hist, interp, t, 0.5 * h, &y, &k1, &k2, &mut ys, &mut k3)?;
        stage(sys, &hist, interp, t, h, &y, &k1, &k3, &mut ys, &mut k4)?;
        for q in 0..dim {
            y[q] += h / 6.0 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q]);
        }
        sys.check_state(t1, &y)?;
        hist.push(t1, y.clone());

        let jump = match jumps.last() {
            Some(&(idx, k)) if idx == i + 1 => {
                jumps.pop();
                Some(k)
            }
            _ => None,
        };
        match jump {
            None => out.push(RawSample {
                t: t1,
                y: y.clone(),
                impulse: false,
            }),
            Some(k) => {
                // left slope at the jump closes the Hermite cell
                let mut d = vec![0.0; dim];
                eval(sys, &hist, interp, t1, &y, None, &mut d)?;
                hist.set_last_slope(d);
                out.push(RawSample {
                    t: t1,
                    y: y.clone(),
                    impulse: true,
                });
                sys.jump(k, &mut y);
                sys.check_state(t1, &y)?;
                hist.push(t1, y.clone());
                out.push(RawSample {
                    t: t1,
                    y: y.clone(),
                    impulse: true,
                });
            }
        }
    }
    Ok(out)
}

/// The prey/predator system in population form.
pub(crate) struct Population<'a> {
    pub model: &'a ModelSpec,
    pub max_delay: f64,
}

impl<'a> Population<'a> {
    pub fn new(model: &'a ModelSpec, horizon: f64) -> Self {
        let window = Interval::new(model.t0, model.t0 + horizon);
        let sampled = model.max_delay_sample();
        let max_delay = [&model.tau, &model.delta, &model.xi, &model.eta]
            .iter()
            .flat_map(|m| m.iter().flatten())
            .map(|e| {
                let hi = e.enclose(window).hi;
                if hi.is_finite() {
                    hi.max(0.0)
                } else {
                    1.5 * sampled
                }
            })
            .fold(0.0, f64::max);
        Self { model, max_delay }
    }

    pub fn apply_jump(&self, k: usize, y: &mut [f64]) {
        let n = self.model.n;
        let kf = k as f64;
        for (i, lam) in self.model.impulses.lambda_x.iter().enumerate() {
            y[i] *= 1.0 + lam.eval(kf);
        }
        for (j, lam) in self.model.impulses.lambda_y.iter().enumerate() {
            y[n + j] *= 1.0 + lam.eval(kf);
        }
    }
}

impl DelaySystem for Population<'_> {
    fn dim(&self) -> usize {
        self.model.n + self.model.m
    }

    fn max_delay(&self) -> f64 {
        self.max_delay
    }

    fn rhs(&self, t: f64, y: &[f64], past: &Lookup<'_>, out: &mut [f64]) -> Result<(), SimError> {
        let md = self.model;
        let n = md.n;
        for i in 0..n {
            let mut f = md.b[i].eval(t);
            for l in 0..n {
                f -= md.a[i][l].eval(t) * past.value(l, t - md.tau[i][l].eval(t))?;
            }
            for h in 0..md.m {
                f -= md.c[i][h].eval(t) * past.value(n + h, t - md.delta[i][h].eval(t))?;
            }
            out[i] = y[i] * f;
        }
        for j in 0..md.m {
            let mut g = -md.r[j].eval(t);
            for l in 0..n {
                g += md.d[j][l].eval(t) * past.value(l, t - md.xi[j][l].eval(t))?;
            }
            for h in 0..md.m {
                g -= md.e[j][h].eval(t) * past.value(n + h, t - md.eta[j][h].eval(t))?;
            }
            out[n + j] = y[n + j] * g;
        }
        Ok(())
    }

    fn impulses(&self, from: f64, to: f64) -> Vec<(usize, f64)> {
        self.model.impulses.times.between(from, to)
    }

    fn jump(&self, k: usize, y: &mut [f64]) {
        self.apply_jump(k, y);
    }

    fn check_state(&self, t: f64, y: &[f64]) -> Result<(), SimError> {
        match y.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
            None => Ok(()),
            Some(k) => Err(SimError::BlowDown {
                t,
                species: species_name(self.model.n, k),
                value: y[k],
            }),
        }
    }
}

pub(crate) fn to_samples(n: usize, raw: Vec<RawSample>) -> Vec<Sample> {
    raw.into_iter()
        .map(|r| {
            let (z, w) = r.y.split_at(n);
            Sample {
                t: r.t,
                z: z.to_vec(),
                w: w.to_vec(),
                impulse: r.impulse,
            }
        })
        .collect()
}

/// Simulates a model on the reals.
pub fn simulate_continuous(model: &ModelSpec, cfg: &SimConfig) -> Result<Trajectory, SimError> {
    if model.ts.kind() != TimeScaleKind::Reals {
        return Err(SimError::Config(
            "continuous simulation needs the reals time scale".into(),
        ));
    }
    cfg.check()?;
    let sys = Population::new(model, cfg.horizon);
    let init = cfg.initial_history(sys.dim())?;
    let raw = integrate(&sys, &init, model.t0, cfg.step, cfg.horizon, cfg.interpolation)?;
    Ok(Trajectory {
        samples: to_samples(model.n, raw),
        model_hash: model.hash.clone(),
        config: cfg.clone(),
        t0: model.t0,
        notes: Vec::new(),
    })
}
