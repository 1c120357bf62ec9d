//! Exact recurrence for lattice models.

use std::collections::BTreeSet;

use super::continuous::Population;
use super::{check_initial, species_name, Sample, SimConfig, SimError, Trajectory};
use crate::model::{CoeffExpr, ModelSpec};
use crate::timescale::TimeScaleKind;

/// Lag rounding tolerance, in lattice steps.
const LAG_TOL: f64 = 1e-9;

struct Lags<'a> {
    h: f64,
    rounded: BTreeSet<String>,
    states: &'a [Vec<f64>],
}

/// Simulates `z(t+h) = z(t) exp{h F(t)}` on a lattice, with impulses applied
/// after the map. Delays are rounded to whole lattice lags.
pub fn simulate_discrete(model: &ModelSpec, cfg: &SimConfig) -> Result<Trajectory, SimError> {
    if model.ts.kind() != TimeScaleKind::Lattice {
        return Err(SimError::Config(
            "discrete simulation needs a lattice time scale".into(),
        ));
    }
    cfg.check()?;
    let h = model.ts.step();
    let (n, m) = (model.n, model.m);
    let t0 = model.t0;
    let q = cfg.horizon / h;
    if (q - q.round()).abs() > 1e-9 * q.max(1.0) {
        return Err(SimError::Config(format!(
            "horizon {} is not a whole number of lattice steps {h}",
            cfg.horizon
        )));
    }
    let steps = q.round() as usize;
    let t_at = |i: i64| t0 + i as f64 * h;

    let init = cfg.initial_history(n + m)?;
    let span = Population::new(model, cfg.horizon).max_delay;
    check_initial(&init, t0, span)?;

    let mut jumps: Vec<(usize, usize)> = Vec::new();
    for (k, tk) in model.impulses.times.between(t0, t0 + steps as f64 * h) {
        let q = (tk - t0) / h;
        if (q - q.round()).abs() > 1e-9 * q.abs().max(1.0) {
            return Err(SimError::Misaligned { t: tk, step: h });
        }
        jumps.push((q.round() as usize, k));
    }
    jumps.reverse();

    // post-jump state at every lattice point
    let mut states: Vec<Vec<f64>> = Vec::with_capacity(steps + 1);
    states.push(init.at(t0));
    let mut samples = vec![Sample {
        t: t0,
        z: states[0][..n].to_vec(),
        w: states[0][n..].to_vec(),
        impulse: false,
    }];
    let mut rounded = BTreeSet::new();
    let jumper = Population::new(model, 0.0);

    for i in 0..steps {
        let t = t_at(i as i64);
        let mut lags = Lags {
            h,
            rounded: std::mem::take(&mut rounded),
            states: &states,
        };
        let cur = &states[i];
        let mut next = vec![0.0; n + m];
        for p in 0..n {
            let mut f = model.b[p].eval(t);
            for l in 0..n {
                f -= model.a[p][l].eval(t) * lags.value(&init, l, i, t, &model.tau[p][l], "tau", p, l)?;
            }
            for k in 0..m {
                f -= model.c[p][k].eval(t) * lags.value(&init, n + k, i, t, &model.delta[p][k], "delta", p, k)?;
            }
            next[p] = cur[p] * (h * f).exp();
        }
        for j in 0..m {
            let mut g = -model.r[j].eval(t);
            for l in 0..n {
                g += model.d[j][l].eval(t) * lags.value(&init, l, i, t, &model.xi[j][l], "xi", j, l)?;
            }
            for k in 0..m {
                g -= model.e[j][k].eval(t) * lags.value(&init, n + k, i, t, &model.eta[j][k], "eta", j, k)?;
            }
            next[n + j] = cur[n + j] * (h * g).exp();
        }
        rounded = lags.rounded;
        let t1 = t_at(i as i64 + 1);
        check(model.n, t1, &next)?;

        let jump = match jumps.last() {
            Some(&(idx, k)) if idx == i + 1 => {
                jumps.pop();
                Some(k)
            }
            _ => None,
        };
        let impulse = jump.is_some();
        samples.push(Sample {
            t: t1,
            z: next[..n].to_vec(),
            w: next[n..].to_vec(),
            impulse,
        });
        if let Some(k) = jump {
            jumper.apply_jump(k, &mut next);
            check(model.n, t1, &next)?;
            samples.push(Sample {
                t: t1,
                z: next[..n].to_vec(),
                w: next[n..].to_vec(),
                impulse,
            });
        }
        states.push(next);
    }

    let mut notes = Vec::new();
    if !rounded.is_empty() {
        let names: Vec<String> = rounded.into_iter().collect();
        notes.push(format!("delays rounded to whole lattice lags: {}", names.join(", ")));
    }
    Ok(Trajectory {
        samples,
        model_hash: model.hash.clone(),
        config: cfg.clone(),
        t0,
        notes,
    })
}

impl Lags<'_> {
    #[allow(clippy::too_many_arguments)]
    fn value(
        &mut self,
        init: &super::InitialHistory,
        comp: usize,
        i: usize,
        t: f64,
        delay: &CoeffExpr,
        family: &str,
        row: usize,
        col: usize,
    ) -> Result<f64, SimError> {
        let q = delay.eval(t) / self.h;
        let lag = q.round();
        if (q - lag).abs() > LAG_TOL {
            self.rounded.insert(format!("{family}_{}{}", row + 1, col + 1));
        }
        let idx = i as i64 - lag as i64;
        if idx >= 0 {
            Ok(self.states[idx as usize][comp])
        } else {
            let t_past = t - lag * self.h;
            Ok(init.value(comp, t_past))
        }
    }
}

fn check(n: usize, t: f64, y: &[f64]) -> Result<(), SimError> {
    match y.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
        None => Ok(()),
        Some(k) => Err(SimError::BlowDown {
            t,
            species: species_name(n, k),
            value: y[k],
        }),
    }
}
