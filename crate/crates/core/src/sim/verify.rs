//! Empirical permanence and stability checks on trajectories.

use serde::{Deserialize, Serialize};

use super::{simulate, SimConfig, SimError, Trajectory};
use crate::model::ModelSpec;

/// Tail range of the log-states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalBounds {
    /// `(min, max)` of `ln z_i`.
    pub x: Vec<(f64, f64)>,
    /// `(min, max)` of `ln w_j`.
    pub y: Vec<(f64, f64)>,
    pub tail_start: f64,
    pub samples: usize,
}

/// Min and max of `ln z_i`, `ln w_j` over samples with
/// `t >= t0 + transient_fraction * (t_end - t0)`.
pub fn empirical_bounds(traj: &Trajectory, transient_fraction: f64) -> Result<EmpiricalBounds, SimError> {
    let tail_start = traj.t0 + transient_fraction * (traj.end_time() - traj.t0);
    let tail: Vec<_> = traj.samples.iter().filter(|s| s.t >= tail_start).collect();
    if tail.is_empty() {
        return Err(SimError::Config("empty trajectory tail".into()));
    }
    let range = |get: &dyn Fn(&super::Sample) -> f64| {
        tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
            let v = get(s).ln();
            (lo.min(v), hi.max(v))
        })
    };
    Ok(EmpiricalBounds {
        x: (0..traj.n()).map(|i| range(&|s| s.z[i])).collect(),
        y: (0..traj.m()).map(|j| range(&|s| s.w[j])).collect(),
        tail_start,
        samples: tail.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub times: Vec<f64>,
    /// `g(t) = sum |ln z^A - ln z^B| + sum |ln w^A - ln w^B|`.
    pub gaps: Vec<f64>,
    pub initial: f64,
    pub last: f64,
    /// `g(end) / g(t0)`; `0` when both runs coincide.
    pub ratio: f64,
    /// Negated slope of a least-squares fit of `ln g` against `t`.
    pub decay_rate: Option<f64>,
}

/// Runs the model from two initial histories and measures how fast the
/// log-state distance closes.
pub fn stability_gap(
    model: &ModelSpec,
    cfg: &SimConfig,
    init_a: &[String],
    init_b: &[String],
) -> Result<GapReport, SimError> {
    let cfg_a = SimConfig {
        initial: Some(init_a.to_vec()),
        ..cfg.clone()
    };
    let cfg_b = SimConfig {
        initial: Some(init_b.to_vec()),
        ..cfg.clone()
    };
    let (a, b) = rayon::join(|| simulate(model, &cfg_a), || simulate(model, &cfg_b));
    let (a, b) = (a?, b?);
    if a.samples.len() != b.samples.len() {
        return Err(SimError::Config("trajectories are not on a common grid".into()));
    }
    let mut times = Vec::with_capacity(a.samples.len());
    let mut gaps = Vec::with_capacity(a.samples.len());
    for (sa, sb) in a.samples.iter().zip(&b.samples) {
        let g: f64 =
            sa.z.iter()
                .zip(&sb.z)
                .chain(sa.w.iter().zip(&sb.w))
                .map(|(p, q)| (p.ln() - q.ln()).abs())
                .sum();
        times.push(sa.t);
        gaps.push(g);
    }
    let initial = gaps[0];
    let last = *gaps.last().unwrap_or(&initial);
    let ratio = if initial > 0.0 { last / initial } else { 0.0 };
    let tail_start = a.t0 + cfg.transient_fraction * (a.end_time() - a.t0);
    Ok(GapReport {
        decay_rate: decay_rate(&times, &gaps, tail_start),
        times,
        gaps,
        initial,
        last,
        ratio,
    })
}

/// Fits `ln g` on the tail, falling back to the whole run when the gap has
/// already collapsed to rounding noise there.
fn decay_rate(times: &[f64], gaps: &[f64], tail_start: f64) -> Option<f64> {
    let floor = gaps.first().copied().unwrap_or(0.0) * 1e-12;
    let usable = |from: f64| -> Vec<(f64, f64)> {
        times
            .iter()
            .zip(gaps)
            .filter(|(t, g)| **t >= from && **g > floor && **g > 0.0)
            .map(|(t, g)| (*t, g.ln()))
            .collect()
    };
    let mut pts = usable(tail_start);
    if pts.len() < 10 {
        pts = usable(f64::NEG_INFINITY);
    }
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
    (sxx > 0.0).then(|| -sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Sample;

    fn traj(values: &[(f64, f64)]) -> Trajectory {
        Trajectory {
            samples: values
                .iter()
                .map(|&(t, z)| Sample {
                    t,
                    z: vec![z],
                    w: vec![],
                    impulse: false,
                })
                .collect(),
            model_hash: String::new(),
            config: SimConfig::default(),
            t0: 0.0,
            notes: Vec::new(),
        }
    }

    #[test]
    fn constant_trajectory() {
        let tr = traj(&[(0.0, 3.0), (1.0, 3.0), (2.0, 3.0)]);
        let b = empirical_bounds(&tr, 0.5).unwrap();
        assert_eq!(b.x, vec![(3f64.ln(), 3f64.ln())]);
        assert_eq!(b.samples, 2);
    }

    #[test]
    fn tail_only() {
        let tr = traj(&[(0.0, 10.0), (1.0, 1.0), (2.0, 2.0)]);
        let b = empirical_bounds(&tr, 0.5).unwrap();
        assert_eq!(b.x, vec![(0.0, 2f64.ln())]);
    }

    #[test]
    fn exponential_fit() {
        let times: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
        let gaps: Vec<f64> = times.iter().map(|t| 2.0 * (-0.7 * t).exp()).collect();
        let r = decay_rate(&times, &gaps, 5.0).unwrap();
        assert!((r - 0.7).abs() < 1e-10);
        assert_eq!(decay_rate(&times, &vec![0.0; 100], 5.0), None);
    }
}
