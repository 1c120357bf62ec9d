//! Comparison bounds, permanence bounds, hypothesis checks and the stability
//! certificate.

pub mod certificate;
pub mod comparison;
pub mod hypotheses;
pub mod permanence;
pub mod report;

use thiserror::Error;

pub use certificate::{stability_certificate, StabilityCertificate};
pub use comparison::{lower_plain, lower_sigma, upper_plain, upper_sigma, xbar, ComparisonParams};
pub use hypotheses::{check_hypotheses, HypothesisReport, HypothesisResult, Margin, Status};
pub use permanence::{bound_layers, permanence_bounds, BoundLayers, PermanenceBounds};
pub use report::{analyze, CertificateReport, Consistency};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("hypothesis violated: {what} (margin {margin})")]
    Hypothesis { what: String, margin: f64 },
    #[error("{bound}[{species}]: logarithm argument {value} is not positive")]
    NonpositiveLog {
        bound: &'static str,
        species: usize,
        value: f64,
    },
}
