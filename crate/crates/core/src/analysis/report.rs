//! Certificate report: hypotheses, bounds, gamma and consistency flags.

use serde::{Deserialize, Serialize};

use super::certificate::{stability_certificate, StabilityCertificate};
use super::hypotheses::{check_hypotheses, HypothesisReport};
use super::permanence::{permanence_bounds, PermanenceBounds};
use crate::model::{ModelSpec, StatsBundle};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Consistency {
    pub ordering_ok: bool,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub hypotheses: HypothesisReport,
    pub bounds: Option<PermanenceBounds>,
    pub gamma: Option<StabilityCertificate>,
    pub consistency: Consistency,
}

impl CertificateReport {
    /// Certificate verdict together with H1 to H6.
    pub fn verdict(&self) -> bool {
        self.gamma.as_ref().is_some_and(|g| g.verdict) && self.hypotheses.failed().is_empty()
    }
}

/// Bounds, hypotheses and certificate for one model.
pub fn analyze(model: &ModelSpec, bundle: &StatsBundle) -> CertificateReport {
    let s = &bundle.effective;
    let mut notes = Vec::new();
    let bounds = match permanence_bounds(s) {
        Ok(b) => Some(b),
        Err(e) => {
            notes.push(format!("permanence bounds unavailable: {e}"));
            None
        }
    };
    let gamma = bounds.as_ref().and_then(|b| match stability_certificate(s, b) {
        Ok(c) => Some(c),
        Err(e) => {
            notes.push(format!("stability certificate unavailable: {e}"));
            None
        }
    });
    let ordering_ok = match &bounds {
        Some(b) => {
            let v = b.ordering_violations();
            let ok = v.is_empty();
            notes.extend(v.into_iter().map(|w| format!("bound ordering: {w}")));
            ok
        }
        None => false,
    };
    CertificateReport {
        hypotheses: check_hypotheses(model, bundle),
        bounds,
        gamma,
        consistency: Consistency { ordering_ok, notes },
    }
}
