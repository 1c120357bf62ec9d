//! Closed-form limsup/liminf bounds for scalar delayed logistic comparison
//! inequalities with impulses.
//!
//! The `sigma` variants bound the form `x' <= x^sigma (b - a x(t - tau)) + d`,
//! the `plain` variants the form with `x` in place of `x^sigma`.

use serde::{Deserialize, Serialize};

use super::AnalysisError;

/// Graininess below which the singular `ln(1 + c mu)/mu` factors use their limit.
pub const MU_LIMIT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonParams {
    pub a: f64,
    pub b: f64,
    pub d: f64,
    pub tau_bar: f64,
    pub mu_bar: f64,
    /// Lower bound of the impulse products.
    pub alpha: f64,
    /// Upper bound of the impulse products.
    pub beta: f64,
    /// A-priori limsup bound used by the lower estimates.
    pub n_bound: f64,
}

impl ComparisonParams {
    pub fn new(a: f64, b: f64) -> Self {
        Self {
            a,
            b,
            d: 0.0,
            tau_bar: 0.0,
            mu_bar: 0.0,
            alpha: 1.0,
            beta: 1.0,
            n_bound: 0.0,
        }
    }
}

/// `ln(1 + c mu) / mu`, or `c` as `mu -> 0`.
pub fn log_rate(c: f64, mu: f64) -> f64 {
    if mu < MU_LIMIT {
        c
    } else {
        (c * mu).ln_1p() / mu
    }
}

/// Positive root of `x (a x - b) - d = 0`.
pub fn xbar(a: f64, b: f64, d: f64) -> Result<f64, AnalysisError> {
    if !(a > 0.0) {
        return Err(AnalysisError::Domain(format!("a must be positive, got {a}")));
    }
    if !(d >= 0.0) {
        return Err(AnalysisError::Domain(format!("d must be nonnegative, got {d}")));
    }
    if b <= 0.0 && d == 0.0 {
        return Err(AnalysisError::Domain("no positive root when b <= 0 and d = 0".into()));
    }
    let disc = (b * b + 4.0 * a * d).sqrt();
    // avoid cancellation for negative b
    Ok(if b >= 0.0 {
        (b + disc) / (2.0 * a)
    } else {
        2.0 * d / (disc - b)
    })
}

fn check_common(p: &ComparisonParams) -> Result<(), AnalysisError> {
    if !(p.a > 0.0) {
        return Err(AnalysisError::Domain(format!("a must be positive, got {}", p.a)));
    }
    if !(p.b > 0.0) {
        return Err(AnalysisError::Domain(format!("b must be positive, got {}", p.b)));
    }
    if !(p.alpha > 0.0 && p.alpha <= p.beta) {
        return Err(AnalysisError::Domain(format!(
            "need 0 < alpha <= beta, got alpha = {}, beta = {}",
            p.alpha, p.beta
        )));
    }
    if !(p.tau_bar >= 0.0 && p.mu_bar >= 0.0 && p.d >= 0.0) {
        return Err(AnalysisError::Domain(
            "tau_bar, mu_bar and d must be nonnegative".into(),
        ));
    }
    Ok(())
}

fn upper_with(p: &ComparisonParams, growth: f64) -> Result<f64, AnalysisError> {
    if p.d == 0.0 {
        return Ok(p.b * p.beta / p.a * growth);
    }
    let x = xbar(p.a, p.b, p.d)?;
    let q = p.d * p.beta / p.b;
    Ok(-q + (q + x * p.beta) * growth)
}

/// Limsup bound `M` for the sigma form.
pub fn upper_sigma(p: &ComparisonParams) -> Result<f64, AnalysisError> {
    check_common(p)?;
    let slack = 1.0 - p.b * p.mu_bar;
    if !(slack > 0.0) {
        return Err(AnalysisError::Hypothesis {
            what: "1 - b*mu_bar > 0".into(),
            margin: slack,
        });
    }
    upper_with(p, (p.b * p.tau_bar / slack).exp())
}

/// Liminf bound `m` for the sigma form.
pub fn lower_sigma(p: &ComparisonParams) -> Result<f64, AnalysisError> {
    check_common(p)?;
    let an = p.a * p.n_bound;
    let slack = 1.0 - an * p.mu_bar;
    if !(slack > 0.0) {
        return Err(AnalysisError::Hypothesis {
            what: "1 - a*N*mu_bar > 0".into(),
            margin: slack,
        });
    }
    Ok(p.b * p.alpha * p.alpha / p.a * (log_rate(-an, p.mu_bar) * p.tau_bar).exp())
}

/// Limsup bound for the plain form.
pub fn upper_plain(p: &ComparisonParams) -> Result<f64, AnalysisError> {
    check_common(p)?;
    upper_with(p, (p.b * p.tau_bar).exp())
}

/// Liminf bound `m~` for the plain form.
pub fn lower_plain(p: &ComparisonParams) -> Result<f64, AnalysisError> {
    check_common(p)?;
    let an = p.a * p.n_bound;
    Ok(p.b * p.alpha * p.alpha / p.a * (-log_rate(an, p.mu_bar) * p.tau_bar).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn xbar_examples() {
        assert_eq!(xbar(1.0, 1.0, 0.0).unwrap(), 1.0);
        assert!(close(xbar(2.0, 3.0, 2.0).unwrap(), 2.0, 1e-15));
        assert!(close(xbar(1.0, 0.0, 4.0).unwrap(), 2.0, 1e-15));
        assert!(xbar(0.0, 1.0, 1.0).is_err());
        assert!(xbar(1.0, -1.0, 0.0).is_err());
        assert!(xbar(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn upper_examples() {
        let mut p = ComparisonParams::new(2.0, 4.0);
        assert_eq!(upper_sigma(&p).unwrap(), 2.0);
        p = ComparisonParams {
            tau_bar: 0.004,
            ..ComparisonParams::new(1.9, 9.0)
        };
        let m = upper_sigma(&p).unwrap();
        assert!(close(m, 9.0 / 1.9 * 0.036f64.exp(), 1e-14));
        assert!((m.ln() - 1.5914).abs() < 1e-4);
        p = ComparisonParams {
            d: 1.0,
            ..ComparisonParams::new(1.0, 1.0)
        };
        assert!(close(upper_sigma(&p).unwrap(), (1.0 + 5f64.sqrt()) / 2.0, 1e-15));
        p = ComparisonParams {
            mu_bar: 1.0,
            ..ComparisonParams::new(1.0, 1.0)
        };
        assert!(matches!(upper_sigma(&p), Err(AnalysisError::Hypothesis { .. })));
    }

    #[test]
    fn lower_examples() {
        let p = ComparisonParams::new(3.0, 1.5);
        assert_eq!(lower_sigma(&p).unwrap(), 0.5);
        // predator-free bracket of the lattice example: b = b^L - a^U e^{x^v} - c-terms
        let p = ComparisonParams {
            d: 0.0,
            tau_bar: 0.002,
            mu_bar: 1.0,
            alpha: 2.0,
            beta: 2.0,
            n_bound: 0.041f64.exp(),
            ..ComparisonParams::new(0.096, 0.094_85)
        };
        let m = lower_sigma(&p).unwrap();
        assert!((m - 3.950).abs() < 2e-3, "{m}");
        assert!((m.ln() - 1.374).abs() < 1e-3);
        let p0 = ComparisonParams {
            tau_bar: 0.5,
            n_bound: 2.0,
            ..ComparisonParams::new(1.0, 1.0)
        };
        let p1 = ComparisonParams { mu_bar: 1e-9, ..p0 };
        assert!(close(lower_sigma(&p0).unwrap(), lower_sigma(&p1).unwrap(), 1e-6));
        let bad = ComparisonParams { mu_bar: 1.0, ..p0 };
        assert!(lower_sigma(&bad).is_err());
    }

    #[test]
    fn plain_variants() {
        let p = ComparisonParams::new(1.0, 1.0);
        assert_eq!(upper_plain(&p).unwrap(), 1.0);
        let p = ComparisonParams {
            n_bound: 1.0,
            mu_bar: 1.0,
            tau_bar: 1.0,
            ..ComparisonParams::new(1.0, 1.0)
        };
        assert!(close(upper_plain(&p).unwrap(), std::f64::consts::E, 1e-15));
        assert!(close(lower_plain(&p).unwrap(), 0.5, 1e-15));
        let q = ComparisonParams { mu_bar: 0.0, ..p };
        assert!(close(lower_plain(&q).unwrap(), lower_sigma(&q).unwrap(), 1e-15));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn xbar_residual(a in 1e-3f64..=10.0, b in 0.0f64..=10.0, d in 0.0f64..=10.0) {
            prop_assume!(b > 0.0 || d > 0.0);
            let x = xbar(a, b, d).unwrap();
            prop_assert!(x > 0.0);
            prop_assert!((x * (a * x - b) - d).abs() <= 1e-10 * d.abs().max(1.0));
        }

        #[test]
        fn upper_sigma_monotone(a in 0.1f64..5.0, b in 0.1f64..5.0, d in 0.0f64..3.0, tau in 0.0f64..1.0,
                                mu in 0.0f64..0.1, beta in 1.0f64..2.0, bump in 0.0f64..0.5, which in 0usize..4) {
            let p = ComparisonParams { a, b, d, tau_bar: tau, mu_bar: mu, alpha: 1.0, beta, n_bound: 0.0 };
            prop_assume!(1.0 - b * mu > 0.05);
            let mut q = p;
            match which {
                0 => q.d += bump,
                1 => q.beta += bump,
                2 => q.tau_bar += bump,
                _ => q.mu_bar += bump * (1.0 - b * mu) / b * 0.5,
            }
            let (m0, m1) = (upper_sigma(&p).unwrap(), upper_sigma(&q).unwrap());
            prop_assert!(m1 >= m0 * (1.0 - 1e-12), "{} -> {}", m0, m1);
        }

        #[test]
        fn lower_sigma_monotone(a in 0.1f64..5.0, b in 0.1f64..5.0, tau in 0.0f64..1.0, n in 0.0f64..2.0,
                                mu in 0.0f64..0.05, alpha in 0.1f64..1.0, bump in 0.0f64..0.5, which in 0usize..2) {
            let p = ComparisonParams { a, b, d: 0.0, tau_bar: tau, mu_bar: mu, alpha, beta: 1.0, n_bound: n };
            let mut q = p;
            if which == 0 { q.n_bound += bump } else { q.tau_bar += bump }
            prop_assume!(1.0 - a * q.n_bound * mu > 0.0);
            let (m0, m1) = (lower_sigma(&p).unwrap(), lower_sigma(&q).unwrap());
            prop_assert!(m1 <= m0 * (1.0 + 1e-12));
            prop_assert!(m0 <= b * alpha * alpha / a * (1.0 + 1e-12));
        }
    }
}
