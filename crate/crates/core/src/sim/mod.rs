//! Trajectory simulation of the population-form systems, empirical
//! permanence and stability checks, and scalar comparison oracles.

pub mod continuous;
pub mod discrete;
pub mod history;
pub mod oracle;
pub mod verify;

use std::io::Write;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{parse_expr, ModelSpec};
use crate::timescale::TimeScaleKind;

pub use continuous::{integrate, simulate_continuous, DelaySystem, Lookup};
pub use discrete::simulate_discrete;
pub use history::{HistoryBuffer, InitialHistory, Interpolation};
pub use oracle::{
    comparison_oracle, gronwall_oracle, BoundMode, GronwallReport, OracleConfig, OracleReport, ScalarSchedule,
};
pub use verify::{empirical_bounds, stability_gap, EmpiricalBounds, GapReport};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("impulse at t = {t} is not a multiple of the step {step} from t0")]
    Misaligned { t: f64, step: f64 },
    #[error("{species} left the positive orthant at t = {t} (value {value})")]
    BlowDown { t: f64, species: String, value: f64 },
    #[error("history lookup at t = {t} precedes the oldest retained sample {oldest}")]
    HistoryExhausted { t: f64, oldest: f64 },
    #[error(transparent)]
    Analysis(#[from] crate::analysis::AnalysisError),
    #[error("closed form evaluation failed: {0}")]
    TimeScale(#[from] crate::timescale::TimeScaleError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Integration step on the reals; lattices use their own step.
    pub step: f64,
    /// Run length measured from `t0`.
    pub horizon: f64,
    /// One expression in `t` per species (prey first); constants are allowed.
    #[serde(default)]
    pub initial: Option<Vec<String>>,
    #[serde(default = "default_transient")]
    pub transient_fraction: f64,
    /// Seeds random constant initial histories when `initial` is absent.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub interpolation: Interpolation,
}

fn default_transient() -> f64 {
    0.5
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            step: 0.01,
            horizon: 200.0,
            initial: None,
            transient_fraction: 0.5,
            seed: None,
            interpolation: Interpolation::Hermite,
        }
    }
}

impl SimConfig {
    pub fn with_constant_initial(mut self, values: &[f64]) -> Self {
        self.initial = Some(values.iter().map(|v| format!("{v:e}")).collect());
        self
    }

    /// Initial history for `dim` species.
    pub fn initial_history(&self, dim: usize) -> Result<InitialHistory, SimError> {
        match (&self.initial, self.seed) {
            (Some(items), _) => {
                if items.len() != dim {
                    return Err(SimError::Config(format!(
                        "expected {dim} initial entries, got {}",
                        items.len()
                    )));
                }
                let exprs = items
                    .iter()
                    .map(|s| parse_expr(s).map_err(|e| SimError::Config(format!("initial `{s}`: {e}"))))
                    .collect::<Result<Vec<_>, _>>()?;
                if exprs.iter().all(|e| e.is_constant()) {
                    Ok(InitialHistory::Constant(exprs.iter().map(|e| e.eval(0.0)).collect()))
                } else {
                    Ok(InitialHistory::Exprs(exprs))
                }
            }
            (None, Some(seed)) => {
                let mut rng = StdRng::seed_from_u64(seed);
                Ok(InitialHistory::Constant(
                    (0..dim).map(|_| rng.random_range(0.5..2.0)).collect(),
                ))
            }
            (None, None) => Ok(InitialHistory::Constant(vec![1.0; dim])),
        }
    }

    fn check(&self) -> Result<(), SimError> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(SimError::Config(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if !(self.transient_fraction > 0.0 && self.transient_fraction < 1.0) {
            return Err(SimError::Config(format!(
                "transient_fraction must lie in (0, 1), got {}",
                self.transient_fraction
            )));
        }
        Ok(())
    }
}

/// Checks `phi(t0) > 0` and `phi >= 0` on `[t0 - span, t0]`.
fn check_initial(init: &InitialHistory, t0: f64, span: f64) -> Result<(), SimError> {
    let names = |k: usize| format!("initial history component {}", k + 1);
    for k in 0..init.dim() {
        let v = init.value(k, t0);
        if !(v > 0.0 && v.is_finite()) {
            return Err(SimError::Config(format!("{} is {v} at t0", names(k))));
        }
        for s in 1..=64 {
            let t = t0 - span * s as f64 / 64.0;
            let v = init.value(k, t);
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SimError::Config(format!("{} is {v} at t = {t}", names(k))));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub z: Vec<f64>,
    pub w: Vec<f64>,
    /// Set on both rows of a pre/post impulse pair.
    pub impulse: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub model_hash: String,
    pub config: SimConfig,
    pub t0: f64,
    /// Diagnostics such as delay rounding on lattices.
    pub notes: Vec<String>,
}

impl Trajectory {
    pub fn n(&self) -> usize {
        self.samples.first().map_or(0, |s| s.z.len())
    }

    pub fn m(&self) -> usize {
        self.samples.first().map_or(0, |s| s.w.len())
    }

    pub fn end_time(&self) -> f64 {
        self.samples.last().map_or(self.t0, |s| s.t)
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory is never empty")
    }

    /// Number of impulses, counting each pre/post pair once.
    pub fn impulse_count(&self) -> usize {
        self.samples.iter().filter(|s| s.impulse).count() / 2
    }

    /// Writes `t,z1..zn,w1..wm,impulse`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), SimError> {
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.n()).map(|i| format!("z{i}")));
        header.extend((1..=self.m()).map(|j| format!("w{j}")));
        header.push("impulse".into());
        writeln!(out, "{}", header.join(","))?;
        for s in &self.samples {
            let mut row = vec![s.t.to_string()];
            row.extend(s.z.iter().chain(&s.w).map(|v| v.to_string()));
            row.push(if s.impulse { "1" } else { "0" }.into());
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Runs the simulator that matches the model's time scale.
pub fn simulate(model: &ModelSpec, cfg: &SimConfig) -> Result<Trajectory, SimError> {
    match model.ts.kind() {
        TimeScaleKind::Reals => simulate_continuous(model, cfg),
        TimeScaleKind::Lattice => simulate_discrete(model, cfg),
    }
}

fn species_name(n: usize, k: usize) -> String {
    if k < n {
        format!("z{}", k + 1)
    } else {
        format!("w{}", k - n + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_history_resolution() {
        let cfg = SimConfig::default();
        assert_eq!(
            cfg.initial_history(2).unwrap(),
            InitialHistory::Constant(vec![1.0, 1.0])
        );
        let cfg = SimConfig {
            seed: Some(7),
            ..SimConfig::default()
        };
        let a = cfg.initial_history(3).unwrap();
        assert_eq!(a, cfg.initial_history(3).unwrap());
        let cfg = SimConfig::default().with_constant_initial(&[0.1, 2.5]);
        assert_eq!(
            cfg.initial_history(2).unwrap(),
            InitialHistory::Constant(vec![0.1, 2.5])
        );
        assert!(cfg.initial_history(3).is_err());
        let cfg = SimConfig {
            initial: Some(vec!["1 + 0.5*sin(t)".into()]),
            ..SimConfig::default()
        };
        assert!(matches!(cfg.initial_history(1).unwrap(), InitialHistory::Exprs(_)));
    }

    #[test]
    fn initial_positivity() {
        let init = InitialHistory::Constant(vec![1.0, 0.0]);
        assert!(check_initial(&init, 0.0, 1.0).is_err());
        let cfg = SimConfig {
            initial: Some(vec!["t".into()]),
            ..SimConfig::default()
        };
        let init = cfg.initial_history(1).unwrap();
        assert!(check_initial(&init, 1.0, 0.5).is_ok());
        assert!(check_initial(&init, 1.0, 2.0).is_err());
    }

    #[test]
    fn csv_layout() {
        let traj = Trajectory {
            samples: vec![
                Sample {
                    t: 0.0,
                    z: vec![1.0],
                    w: vec![2.0],
                    impulse: false,
                },
                Sample {
                    t: 1.0,
                    z: vec![1.5],
                    w: vec![2.5],
                    impulse: true,
                },
                Sample {
                    t: 1.0,
                    z: vec![0.75],
                    w: vec![1.25],
                    impulse: true,
                },
            ],
            model_hash: String::new(),
            config: SimConfig::default(),
            t0: 0.0,
            notes: Vec::new(),
        };
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "t,z1,w1,impulse\n0,1,2,0\n1,1.5,2.5,1\n1,0.75,1.25,1\n");
        assert_eq!(traj.impulse_count(), 1);
    }
}
