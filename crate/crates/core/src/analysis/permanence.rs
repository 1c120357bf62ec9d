//! Permanence bounds in log-population units.

use serde::{Deserialize, Serialize};

use super::comparison::log_rate;
use super::AnalysisError;
use crate::model::CoeffStats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermanenceBounds {
    pub x_up: Vec<f64>,
    pub y_up: Vec<f64>,
    pub x_lo: Vec<f64>,
    pub y_lo: Vec<f64>,
}

impl PermanenceBounds {
    /// Entries where a lower bound exceeds its upper bound.
    pub fn ordering_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, (lo, up)) in self.x_lo.iter().zip(&self.x_up).enumerate() {
            if lo > up {
                out.push(format!("x_lo[{i}] = {lo:.6} exceeds x_up[{i}] = {up:.6}"));
            }
        }
        for (j, (lo, up)) in self.y_lo.iter().zip(&self.y_up).enumerate() {
            if lo > up {
                out.push(format!("y_lo[{j}] = {lo:.6} exceeds y_up[{j}] = {up:.6}"));
            }
        }
        out
    }

    pub fn ordering_ok(&self) -> bool {
        self.ordering_violations().is_empty()
    }
}

/// Every intermediate quantity of the bound formulas; undefined values are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundLayers {
    /// `1 - b_i^U mu`.
    pub b_slack: Vec<f64>,
    /// `b_i^U exp{b_i^U tau+ / (1 - b_i^U mu)}`.
    pub x_up_arg: Vec<f64>,
    pub x_up: Vec<f64>,
    /// `S_j = sum_l d_jl^U e^{x_l^v}`.
    pub s: Vec<f64>,
    /// `S_j exp{eta+ / (1/S_j - mu)}`.
    pub y_up_arg: Vec<f64>,
    pub y_up: Vec<f64>,
    /// `b_i^L - sum_{l!=i} a_il^U e^{x_l^v} - sum_h c_ih^U e^{y_h^v}`.
    pub x_bracket: Vec<f64>,
    /// `a_ii^U e^{x_i^v}`.
    pub x_rate: Vec<f64>,
    /// `r^2 * bracket * exp{L(rate) tau+}`.
    pub x_lo_arg: Vec<f64>,
    pub x_lo: Vec<f64>,
    pub y_bracket: Vec<f64>,
    /// `e_jj^U e^{y_j^v}`.
    pub y_rate: Vec<f64>,
    pub y_lo_arg: Vec<f64>,
    pub y_lo: Vec<f64>,
}

fn ln_or_nan(v: f64) -> f64 {
    if v > 0.0 {
        v.ln()
    } else {
        f64::NAN
    }
}

/// `exp{ln(1 - rate mu)/mu * delay}`, NaN when `1 - rate mu <= 0`.
fn delay_factor(rate: f64, mu: f64, delay: f64) -> f64 {
    if 1.0 - rate * mu > 0.0 {
        (log_rate(-rate, mu) * delay).exp()
    } else {
        f64::NAN
    }
}

/// Evaluates the bound formulas layer by layer without failing.
pub fn bound_layers(s: &CoeffStats) -> BoundLayers {
    let (n, m) = (s.n(), s.m());
    let mu = s.mu_bar;
    let r2 = s.impulse_r * s.impulse_r;

    let b_slack: Vec<f64> = (0..n).map(|i| 1.0 - s.b[i].sup * mu).collect();
    let x_up_arg: Vec<f64> = (0..n)
        .map(|i| {
            let bu = s.b[i].sup;
            if b_slack[i] > 0.0 {
                bu * (bu * s.tau.plus / b_slack[i]).exp()
            } else {
                f64::NAN
            }
        })
        .collect();
    let x_up: Vec<f64> = (0..n).map(|i| ln_or_nan(x_up_arg[i] / s.a[i][i].inf)).collect();

    let sums: Vec<f64> = (0..m)
        .map(|j| (0..n).map(|l| s.d[j][l].sup * x_up[l].exp()).sum())
        .collect();
    let y_up_arg: Vec<f64> = sums
        .iter()
        .map(|&sj| {
            let den = 1.0 / sj - mu;
            if den > 0.0 {
                sj * (s.eta.plus / den).exp()
            } else {
                f64::NAN
            }
        })
        .collect();
    let y_up: Vec<f64> = (0..m).map(|j| ln_or_nan(y_up_arg[j] / s.e[j][j].inf)).collect();

    let x_bracket: Vec<f64> = (0..n)
        .map(|i| {
            s.b[i].inf
                - (0..n)
                    .filter(|&l| l != i)
                    .map(|l| s.a[i][l].sup * x_up[l].exp())
                    .sum::<f64>()
                - (0..m).map(|h| s.c[i][h].sup * y_up[h].exp()).sum::<f64>()
        })
        .collect();
    let x_rate: Vec<f64> = (0..n).map(|i| s.a[i][i].sup * x_up[i].exp()).collect();
    let x_lo_arg: Vec<f64> = (0..n)
        .map(|i| r2 * x_bracket[i] * delay_factor(x_rate[i], mu, s.tau.plus))
        .collect();
    let x_lo: Vec<f64> = (0..n).map(|i| ln_or_nan(x_lo_arg[i] / s.a[i][i].sup)).collect();

    let y_bracket: Vec<f64> = (0..m)
        .map(|j| {
            (0..n).map(|l| s.d[j][l].inf * x_lo[l].exp()).sum::<f64>()
                - s.r[j].sup
                - (0..m)
                    .filter(|&h| h != j)
                    .map(|h| s.e[j][h].sup * y_up[h].exp())
                    .sum::<f64>()
        })
        .collect();
    let y_rate: Vec<f64> = (0..m).map(|j| s.e[j][j].sup * y_up[j].exp()).collect();
    let y_lo_arg: Vec<f64> = (0..m)
        .map(|j| r2 * y_bracket[j] * delay_factor(y_rate[j], mu, s.eta.plus))
        .collect();
    let y_lo: Vec<f64> = (0..m).map(|j| ln_or_nan(y_lo_arg[j] / s.e[j][j].sup)).collect();

    BoundLayers {
        b_slack,
        x_up_arg,
        x_up,
        s: sums,
        y_up_arg,
        y_up,
        x_bracket,
        x_rate,
        x_lo_arg,
        x_lo,
        y_bracket,
        y_rate,
        y_lo_arg,
        y_lo,
    }
}

fn first_bad(name: &'static str, v: &[f64], args: &[f64]) -> Result<(), AnalysisError> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(species) => Err(AnalysisError::NonpositiveLog {
            bound: name,
            species,
            value: args[species],
        }),
        None => Ok(()),
    }
}

/// Upper bounds first, then lower bounds; each layer feeds the next.
pub fn permanence_bounds(stats: &CoeffStats) -> Result<PermanenceBounds, AnalysisError> {
    let l = bound_layers(stats);
    if let Some(i) = l.b_slack.iter().position(|&v| !(v > 0.0)) {
        return Err(AnalysisError::Hypothesis {
            what: format!("1 - b_{i}^U mu > 0"),
            margin: l.b_slack[i],
        });
    }
    first_bad("x_up", &l.x_up, &l.x_up_arg)?;
    for (j, &sj) in l.s.iter().enumerate() {
        let den = 1.0 / sj - stats.mu_bar;
        if !(den > 0.0) {
            return Err(AnalysisError::Hypothesis {
                what: format!("1/S_{j} - mu > 0"),
                margin: den,
            });
        }
    }
    first_bad("y_up", &l.y_up, &l.y_up_arg)?;
    first_bad("x_lo", &l.x_lo, &l.x_lo_arg)?;
    first_bad("y_lo", &l.y_lo, &l.y_lo_arg)?;
    Ok(PermanenceBounds {
        x_up: l.x_up,
        y_up: l.y_up,
        x_lo: l.x_lo,
        y_lo: l.y_lo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Bound, DelayStats};
    use proptest::prelude::*;

    fn bnd(v: f64) -> Bound {
        Bound { sup: v, inf: v }
    }

    fn toy(b: f64, a: f64, d: f64, e: f64, r: f64, c: f64) -> CoeffStats {
        let mut s = CoeffStats::zeros(1, 1);
        s.b = vec![bnd(b)];
        s.a = vec![vec![bnd(a)]];
        s.d = vec![vec![bnd(d)]];
        s.e = vec![vec![bnd(e)]];
        s.r = vec![bnd(r)];
        s.c = vec![vec![bnd(c)]];
        s
    }

    #[test]
    fn delay_free_single_species() {
        let s = toy(2.0, 1.0, 0.5, 0.25, 0.1, 0.0);
        let p = permanence_bounds(&s).unwrap();
        assert!((p.x_up[0] - 2f64.ln()).abs() < 1e-15);
        assert!((p.y_up[0] - (0.5 * 2.0 / 0.25f64).ln()).abs() < 1e-15);
        assert!((p.x_lo[0] - 2f64.ln()).abs() < 1e-15);
        assert!((p.y_lo[0] - ((0.5 * 2.0 - 0.1) / 0.25f64).ln()).abs() < 1e-15);
    }

    #[test]
    fn reports_failing_bracket() {
        // predation so strong that the prey lower bracket goes negative
        let s = toy(2.0, 1.0, 0.5, 0.25, 0.1, 5.0);
        match permanence_bounds(&s) {
            Err(AnalysisError::NonpositiveLog { bound, species, value }) => {
                assert_eq!((bound, species), ("x_lo", 0));
                assert!(value < 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn lattice_regressivity_surface() {
        let mut s = toy(2.0, 1.0, 0.5, 0.25, 0.1, 0.0);
        s.mu_bar = 1.0;
        assert!(matches!(permanence_bounds(&s), Err(AnalysisError::Hypothesis { .. })));
    }

    fn delay_free_reference(s: &CoeffStats) -> PermanenceBounds {
        let (n, m) = (s.n(), s.m());
        let r2 = s.impulse_r.powi(2);
        let xu: Vec<f64> = (0..n).map(|i| (s.b[i].sup / s.a[i][i].inf).ln()).collect();
        let yu: Vec<f64> = (0..m)
            .map(|j| ((0..n).map(|l| s.d[j][l].sup * xu[l].exp()).sum::<f64>() / s.e[j][j].inf).ln())
            .collect();
        let xl: Vec<f64> = (0..n)
            .map(|i| {
                let mut br = s.b[i].inf;
                for l in 0..n {
                    if l != i {
                        br -= s.a[i][l].sup * xu[l].exp();
                    }
                }
                for h in 0..m {
                    br -= s.c[i][h].sup * yu[h].exp();
                }
                (r2 * br / s.a[i][i].sup).ln()
            })
            .collect();
        let yl: Vec<f64> = (0..m)
            .map(|j| {
                let mut br = -s.r[j].sup;
                for l in 0..n {
                    br += s.d[j][l].inf * xl[l].exp();
                }
                for h in 0..m {
                    if h != j {
                        br -= s.e[j][h].sup * yu[h].exp();
                    }
                }
                (r2 * br / s.e[j][j].sup).ln()
            })
            .collect();
        PermanenceBounds {
            x_up: xu,
            y_up: yu,
            x_lo: xl,
            y_lo: yl,
        }
    }

    proptest! {
        #[test]
        fn no_delay_no_graininess_reduces_to_closed_form(
            b in prop::collection::vec((5.0f64..10.0, 0.0f64..1.0), 2),
            a_diag in prop::collection::vec((1.5f64..2.5, 0.0f64..0.2), 2),
            a_off in prop::collection::vec(0.0f64..0.1, 2),
            d in prop::collection::vec((0.1f64..0.4, 0.0f64..0.05), 4),
            e_diag in prop::collection::vec((0.5f64..0.7, 0.0f64..0.05), 2),
            small in prop::collection::vec(0.0f64..0.01, 8),
        ) {
            let mut s = CoeffStats::zeros(2, 2);
            for i in 0..2 {
                s.b[i] = Bound { sup: b[i].0 + b[i].1, inf: b[i].0 };
                s.a[i][i] = Bound { sup: a_diag[i].0 + a_diag[i].1, inf: a_diag[i].0 };
                s.a[i][1 - i] = Bound { sup: a_off[i], inf: 0.0 };
                s.e[i][i] = Bound { sup: e_diag[i].0 + e_diag[i].1, inf: e_diag[i].0 };
                s.e[i][1 - i] = Bound { sup: small[i], inf: 0.0 };
                s.r[i] = Bound { sup: 0.05 + small[2 + i], inf: 0.05 };
                for l in 0..2 {
                    s.d[i][l] = Bound { sup: d[2 * i + l].0 + d[2 * i + l].1, inf: d[2 * i + l].0 };
                    s.c[i][l] = Bound { sup: small[4 + 2 * i + l], inf: 0.0 };
                }
            }
            s.tau = DelayStats { plus: 0.0, minus: 0.0, delta_sup: 0.0 };
            let p = permanence_bounds(&s).unwrap();
            let q = delay_free_reference(&s);
            for (u, v) in p.x_up.iter().chain(&p.y_up).chain(&p.x_lo).chain(&p.y_lo)
                .zip(q.x_up.iter().chain(&q.y_up).chain(&q.x_lo).chain(&q.y_lo)) {
                prop_assert!((u - v).abs() <= 1e-12 * v.abs().max(1.0), "{} vs {}", u, v);
            }
        }
    }
}
