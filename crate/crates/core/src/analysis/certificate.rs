//! Uniform asymptotic stability certificate (the gamma constants).

use serde::{Deserialize, Serialize};

use super::permanence::PermanenceBounds;
use super::AnalysisError;
use crate::model::CoeffStats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityCertificate {
    pub gamma_x: Vec<f64>,
    pub gamma_y: Vec<f64>,
    pub gamma: f64,
    /// `1 - mu * gamma > 0`.
    pub neg_gamma_regressive: bool,
    /// `1 - tau^D`, `1 - delta^D`, `1 - xi^D`, `1 - eta^D` all positive.
    pub h6_ok: bool,
    pub verdict: bool,
}

/// `1 - X^D` for the four delay families, in the order tau, delta, xi, eta.
pub fn h6_slacks(s: &CoeffStats) -> [(&'static str, f64); 4] {
    [
        ("1 - tau_delta", 1.0 - s.tau.delta_sup),
        ("1 - delta_delta", 1.0 - s.delta.delta_sup),
        ("1 - xi_delta", 1.0 - s.xi.delta_sup),
        ("1 - eta_delta", 1.0 - s.eta.delta_sup),
    ]
}

pub fn stability_certificate(s: &CoeffStats, p: &PermanenceBounds) -> Result<StabilityCertificate, AnalysisError> {
    for (what, slack) in h6_slacks(s) {
        if !(slack > 0.0) {
            return Err(AnalysisError::Hypothesis {
                what: format!("{what} > 0"),
                margin: slack,
            });
        }
    }
    let (n, m) = (s.n(), s.m());
    let mu = s.mu_bar;
    let (tp, tm, td) = (s.tau.plus, s.tau.minus, 1.0 - s.tau.delta_sup);
    let (dp, dm, dd) = (s.delta.plus, s.delta.minus, 1.0 - s.delta.delta_sup);
    let (xp, xm, xd) = (s.xi.plus, s.xi.minus, 1.0 - s.xi.delta_sup);
    let (ep, em, ed) = (s.eta.plus, s.eta.minus, 1.0 - s.eta.delta_sup);

    let exu: Vec<f64> = p.x_up.iter().map(|v| v.exp()).collect();
    let eyu: Vec<f64> = p.y_up.iter().map(|v| v.exp()).collect();

    // column sums of the interaction matrices at the bounds
    let a_col: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|l| s.a[l][i].sup).sum::<f64>() * exu[i])
        .collect();
    let e_col: Vec<f64> = (0..m)
        .map(|j| (0..m).map(|h| s.e[h][j].sup).sum::<f64>() * eyu[j])
        .collect();
    // predator pressure on prey i and prey feeding of predator j
    let c_row: Vec<f64> = (0..n).map(|i| (0..m).map(|j| s.c[i][j].sup * eyu[j]).sum()).collect();
    let d_row: Vec<f64> = (0..m).map(|j| (0..n).map(|l| s.d[j][l].sup * exu[l]).sum()).collect();

    let gamma_x: Vec<f64> = (0..n)
        .map(|i| {
            let a = a_col[i];
            let al = (0..n).map(|l| s.a[l][i].inf).sum::<f64>() * p.x_lo[i].exp();
            let cd: f64 = (0..m).map(|j| s.c[i][j].sup * eyu[j] * d_row[j]).sum();
            let mut g = al
                - 2.0 * mu * a * a
                - (2.0 * mu * a + 1.0) * a * a * (2.0 * tp - tm) / td
                - (2.0 * mu * a + 1.0) * cd * (xp + dp - xm) / xd;
            for j in 0..m {
                let dji = s.d[j][i].sup * exu[i];
                let w = dji * (2.0 * mu * e_col[j] + 1.0);
                g -= w;
                g -= w * e_col[j] * (ep + xp - xm) / xd;
                g -= w * a * (tp + xp - tm) / td;
            }
            g
        })
        .collect();

    let gamma_y: Vec<f64> = (0..m)
        .map(|j| {
            let e = e_col[j];
            let el = (0..m).map(|h| s.e[h][j].inf).sum::<f64>() * p.y_lo[j].exp();
            let dc: f64 = (0..n).map(|i| s.d[j][i].sup * exu[i] * c_row[i]).sum();
            let mut g = el
                - 2.0 * mu * e * e
                - (2.0 * mu * e + 1.0) * e * e * (2.0 * ep - em) / ed
                - (2.0 * mu * e + 1.0) * dc * (dp + ep - em) / dd;
            for i in 0..n {
                let cij = s.c[i][j].sup * eyu[j];
                let w = cij * (2.0 * mu * a_col[i] + 1.0);
                g -= w;
                g -= w * a_col[i] * (tp + dp - dm) / dd;
                g -= w * e * (ep + dp - em) / ed;
            }
            g
        })
        .collect();

    let gamma = gamma_x.iter().chain(&gamma_y).cloned().fold(f64::INFINITY, f64::min);
    let neg_gamma_regressive = 1.0 - mu * gamma > 0.0;
    Ok(StabilityCertificate {
        verdict: gamma > 0.0 && neg_gamma_regressive,
        gamma_x,
        gamma_y,
        gamma,
        neg_gamma_regressive,
        h6_ok: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::permanence::permanence_bounds;
    use crate::model::Bound;

    #[test]
    fn diagonal_delay_free_reduces() {
        let mut s = CoeffStats::zeros(2, 2);
        for i in 0..2 {
            s.b[i] = Bound { sup: 3.0, inf: 2.5 };
            s.a[i][i] = Bound { sup: 1.2, inf: 1.0 };
            s.d[i][i] = Bound { sup: 0.3, inf: 0.2 };
            s.e[i][i] = Bound { sup: 1.1, inf: 1.0 };
            s.r[i] = Bound { sup: 0.05, inf: 0.01 };
        }
        let p = permanence_bounds(&s).unwrap();
        let c = stability_certificate(&s, &p).unwrap();
        for i in 0..2 {
            let expect = s.a[i][i].inf * p.x_lo[i].exp() - s.d[i][i].sup * p.x_up[i].exp();
            assert!((c.gamma_x[i] - expect).abs() < 1e-14);
        }
        assert_eq!(
            c.gamma,
            c.gamma_x
                .iter()
                .chain(&c.gamma_y)
                .cloned()
                .fold(f64::INFINITY, f64::min)
        );
        assert!(c.verdict);
    }

    #[test]
    fn h6_violation_is_an_error() {
        let mut s = CoeffStats::zeros(1, 1);
        s.b[0] = Bound { sup: 1.0, inf: 1.0 };
        s.a[0][0] = Bound { sup: 1.0, inf: 1.0 };
        s.d[0][0] = Bound { sup: 1.0, inf: 1.0 };
        s.e[0][0] = Bound { sup: 1.0, inf: 1.0 };
        let p = permanence_bounds(&s).unwrap();
        s.xi.delta_sup = 1.0;
        assert!(matches!(
            stability_certificate(&s, &p),
            Err(AnalysisError::Hypothesis { .. })
        ));
    }

    #[test]
    fn regressivity_of_minus_gamma() {
        let mut s = CoeffStats::zeros(1, 0);
        s.b[0] = Bound { sup: 0.5, inf: 0.5 };
        s.a[0][0] = Bound { sup: 0.2, inf: 0.2 };
        s.mu_bar = 1.0;
        let p = permanence_bounds(&s).unwrap();
        let c = stability_certificate(&s, &p).unwrap();
        // gamma = a e^{x} - 2 mu a^2 e^{2x} = 0.5 - 0.5 = 0
        assert!(c.gamma.abs() < 1e-12);
        assert!(!c.verdict);
    }
}
