//! Checks of the standing hypotheses H1 to H7 with numeric margins.

use serde::{Deserialize, Serialize};

use super::certificate::{h6_slacks, stability_certificate};
use super::permanence::{bound_layers, BoundLayers};
use crate::model::{ModelSpec, StatsBundle};
use crate::timescale::{is_positively_regressive, TimeScaleSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Assumed,
    Overridden,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    pub name: String,
    /// Slack of the inequality, rounded to 6 significant digits.
    #[serde(with = "crate::serde_float")]
    pub value: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisResult {
    pub status: Status,
    pub margins: Vec<Margin>,
    pub witnesses: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    #[serde(rename = "H1")]
    pub h1: HypothesisResult,
    #[serde(rename = "H2")]
    pub h2: HypothesisResult,
    #[serde(rename = "H3")]
    pub h3: HypothesisResult,
    #[serde(rename = "H4")]
    pub h4: HypothesisResult,
    #[serde(rename = "H5")]
    pub h5: HypothesisResult,
    #[serde(rename = "H6")]
    pub h6: HypothesisResult,
    #[serde(rename = "H7")]
    pub h7: HypothesisResult,
}

impl HypothesisReport {
    pub fn all(&self) -> [(&'static str, &HypothesisResult); 7] {
        [
            ("H1", &self.h1),
            ("H2", &self.h2),
            ("H3", &self.h3),
            ("H4", &self.h4),
            ("H5", &self.h5),
            ("H6", &self.h6),
            ("H7", &self.h7),
        ]
    }

    pub fn failed(&self) -> Vec<&'static str> {
        self.all()
            .into_iter()
            .filter(|(_, r)| r.status == Status::Fail)
            .map(|(k, _)| k)
            .collect()
    }
}

/// Rounds to 6 significant digits.
pub fn round6(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{v:.5e}").parse().unwrap_or(v)
}

/// Compact rendering of a 6-digit value for witnesses.
fn display6(v: f64) -> String {
    let r = round6(v);
    if r != 0.0 && r.is_finite() && !(1e-4..1e6).contains(&r.abs()) {
        format!("{r:e}")
    } else {
        format!("{r}")
    }
}

#[derive(Default)]
struct Builder {
    margins: Vec<Margin>,
    witnesses: Vec<String>,
}

impl Builder {
    /// Records `value > 0` (strict) or `value >= 0`.
    fn check(&mut self, name: impl Into<String>, value: f64, strict: bool) {
        let name = name.into();
        let ok = if strict { value > 0.0 } else { value >= 0.0 };
        if !ok {
            let rel = if strict { "> 0" } else { ">= 0" };
            self.witnesses
                .push(format!("{name} = {} violates {rel}", display6(value)));
        }
        self.margins.push(Margin {
            name,
            value: round6(value),
            ok,
        });
    }

    fn witness(&mut self, w: impl Into<String>) {
        self.witnesses.push(w.into());
    }

    fn finish(self, overridden: bool) -> HypothesisResult {
        let failed = !self.witnesses.is_empty() || self.margins.iter().any(|m| !m.ok);
        let status = if failed {
            Status::Fail
        } else if overridden {
            Status::Overridden
        } else {
            Status::Pass
        };
        HypothesisResult {
            status,
            margins: self.margins,
            witnesses: self.witnesses,
        }
    }
}

fn any_overridden(bundle: &StatsBundle, pred: impl Fn(&str) -> bool) -> bool {
    bundle.overridden.iter().any(|f| pred(f))
}

/// Positive regressivity of a constant rate against the supremum graininess.
fn regressive_const(mu: f64, p: f64) -> bool {
    let probe = TimeScaleSpec::lattice(mu).unwrap_or_else(|_| TimeScaleSpec::reals());
    p.is_finite() && is_positively_regressive(&probe, &move |_t: f64| p, 0.0, probe.step(), 1)
}

/// Evaluates every hypothesis on the effective statistics of `bundle`.
pub fn check_hypotheses(model: &ModelSpec, bundle: &StatsBundle) -> HypothesisReport {
    let s = &bundle.effective;
    let (n, m) = (s.n(), s.m());
    let mu = s.mu_bar;

    // H1: nonnegativity of coefficients and delays
    let mut h1 = Builder::default();
    let families: [(&str, Vec<f64>); 6] = [
        ("b", s.b.iter().map(|b| b.inf).collect()),
        ("r", s.r.iter().map(|b| b.inf).collect()),
        ("a", s.a.iter().flatten().map(|b| b.inf).collect()),
        ("c", s.c.iter().flatten().map(|b| b.inf).collect()),
        ("d", s.d.iter().flatten().map(|b| b.inf).collect()),
        ("e", s.e.iter().flatten().map(|b| b.inf).collect()),
    ];
    for (name, infs) in families {
        if !infs.is_empty() {
            h1.check(
                format!("min {name}^L"),
                infs.iter().cloned().fold(f64::INFINITY, f64::min),
                false,
            );
        }
    }
    for (name, d) in [("tau", s.tau), ("delta", s.delta), ("xi", s.xi), ("eta", s.eta)] {
        h1.check(format!("{name}_minus"), d.minus, false);
    }
    let h1 = h1.finish(any_overridden(bundle, |f| f.ends_with("_inf") || f.ends_with("_minus")));

    // H2: impulse products
    let mut h2 = Builder::default();
    let r_overridden = bundle.is_overridden("r");
    if r_overridden {
        h2.check("r", s.impulse_r, true);
        h2.check("1 - r", 1.0 - s.impulse_r, false);
    } else {
        h2.check("lambda_min + 1", s.lambda_min + 1.0, true);
        h2.check("-lambda_max", -s.lambda_max, false);
        h2.check("r", s.impulse_r, true);
        h2.check("1 - r_upper", 1.0 - s.impulse_upper, false);
    }
    let h2 = h2.finish(r_overridden || bundle.is_overridden("r_upper"));

    // H3: separated impulse times
    let mut h3 = Builder::default();
    h3.check("theta", model.impulses.times.min_gap(), true);
    let h3 = h3.finish(false);

    // H4: regressivity and the four bound inequalities
    let layers: BoundLayers = bound_layers(s);
    let mut h4 = Builder::default();
    for i in 0..n {
        let p = -s.b[i].sup;
        h4.check(format!("1 - mu*b_{}^U", i + 1), 1.0 + mu * p, true);
        if !regressive_const(mu, p) {
            h4.witness(format!("-b_{}^U is not positively regressive", i + 1));
        }
    }
    for j in 0..m {
        h4.check(format!("1 - mu*S_{}", j + 1), 1.0 - mu * layers.s[j], true);
    }
    for i in 0..n {
        h4.check(
            format!("1 - mu*a_{0}{0}^U e^x_{0}^up", i + 1),
            1.0 - mu * layers.x_rate[i],
            true,
        );
    }
    for j in 0..m {
        h4.check(
            format!("1 - mu*e_{0}{0}^U e^y_{0}^up", j + 1),
            1.0 - mu * layers.y_rate[j],
            true,
        );
    }
    for i in 0..n {
        h4.check(
            format!("x_up argument - a_{0}{0}^L", i + 1),
            layers.x_up_arg[i] - s.a[i][i].inf,
            true,
        );
    }
    for j in 0..m {
        h4.check(
            format!("y_up argument - e_{0}{0}^L", j + 1),
            layers.y_up_arg[j] - s.e[j][j].inf,
            true,
        );
    }
    for i in 0..n {
        h4.check(
            format!("x_lo argument - a_{0}{0}^U", i + 1),
            layers.x_lo_arg[i] - s.a[i][i].sup,
            true,
        );
    }
    for j in 0..m {
        h4.check(
            format!("y_lo argument - e_{0}{0}^U", j + 1),
            layers.y_lo_arg[j] - s.e[j][j].sup,
            true,
        );
    }
    let h4 = h4.finish(!bundle.overridden.is_empty());

    let h5 = HypothesisResult {
        status: Status::Assumed,
        margins: Vec::new(),
        witnesses: vec!["constrains the solution class, not the data".into()],
    };

    let mut h6 = Builder::default();
    for (name, slack) in h6_slacks(s) {
        h6.check(name, slack, true);
    }
    let h6 = h6.finish(any_overridden(bundle, |f| f.ends_with("_delta")));

    let mut h7 = Builder::default();
    match super::permanence::permanence_bounds(s) {
        Err(e) => h7.witness(format!("bounds unavailable: {e}")),
        Ok(bounds) => match stability_certificate(s, &bounds) {
            Err(e) => h7.witness(format!("certificate unavailable: {e}")),
            Ok(cert) => {
                h7.check("gamma", cert.gamma, true);
                h7.check("1 - mu*gamma", 1.0 - mu * cert.gamma, true);
            }
        },
    }
    let h7 = h7.finish(!bundle.overridden.is_empty());

    HypothesisReport {
        h1,
        h2,
        h3,
        h4,
        h5,
        h6,
        h7,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding() {
        assert_eq!(round6(0.123456789), 0.123457);
        assert_eq!(round6(-1234567.0), -1234570.0);
        assert_eq!(round6(0.0), 0.0);
        assert_eq!(display6(-3.42302e42), "-3.42302e42");
        assert_eq!(display6(0.25), "0.25");
    }
}
