//! Published reference values for the two bundled systems.

use std::path::PathBuf;

use tslv_core::analysis::{analyze, CertificateReport, Status};
use tslv_core::model::{compute_stats, load_model_file, StatsBundle, StatsConfig};

fn run(name: &str, use_override: bool) -> (StatsBundle, CertificateReport) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("models").join(name);
    let model = load_model_file(path).unwrap();
    let cfg = StatsConfig {
        use_override,
        ..StatsConfig::default()
    };
    let bundle = compute_stats(&model, &cfg).unwrap();
    let report = analyze(&model, &bundle);
    (bundle, report)
}

fn assert_near(label: &str, got: &[f64], want: &[f64], tol: f64) {
    assert_eq!(got.len(), want.len(), "{label}");
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() <= tol, "{label}: got {got:?}, want {want:?} +- {tol}");
    }
}

#[test]
fn real_line_example_bounds_and_gamma() {
    let (_, r) = run("example1.model.json", true);
    let b = r.bounds.as_ref().unwrap();
    assert_near("x_up", &b.x_up, &[1.591, 1.645], 0.01);
    assert_near("y_up", &b.y_up, &[1.653, 1.324], 0.01);
    assert_near("x_lo", &b.x_lo, &[0.979, 0.896], 0.01);
    assert_near("y_lo", &b.y_lo, &[0.296, 0.198], 0.01);
    let g = r.gamma.as_ref().unwrap();
    assert_near("gamma_x", &g.gamma_x, &[2.408, 0.466], 0.05);
    assert_near("gamma_y", &g.gamma_y, &[0.502, 0.418], 0.05);
    assert_near("gamma", &[g.gamma], &[0.418], 0.05);
    assert!(r.consistency.ordering_ok);
    assert!(r.verdict());
}

#[test]
fn real_line_example_statuses() {
    let (bundle, r) = run("example1.model.json", true);
    assert!(bundle.is_overridden("r"));
    assert_eq!(r.hypotheses.h2.status, Status::Overridden);
    assert_eq!(r.hypotheses.h3.status, Status::Pass);
    assert_eq!(r.hypotheses.h5.status, Status::Assumed);
    assert!(r.hypotheses.failed().is_empty());
}

#[test]
fn real_line_example_honest_mode_flags_growing_impulses() {
    let (bundle, r) = run("example1.model.json", false);
    assert!(bundle.overridden.is_empty());
    assert_eq!(r.hypotheses.h2.status, Status::Fail);
    assert!(bundle.effective.lambda_max > 0.0);
    assert!(r.bounds.is_some());
    assert!(!r.verdict());
}

#[test]
fn lattice_example_bounds_and_ordering_flag() {
    let (_, r) = run("example2.model.json", true);
    let b = r.bounds.as_ref().unwrap();
    assert_near("x_up", &b.x_up, &[0.041, 0.034], 0.01);
    assert_near("y_up", &b.y_up, &[0.012, 0.038], 0.01);
    assert_near("x_lo", &b.x_lo, &[1.374, 1.360], 0.01);
    assert_near("y_lo", &b.y_lo, &[2.724, 2.747], 0.01);
    assert!(!r.consistency.ordering_ok);
    assert_eq!(r.consistency.notes.len(), 4);
    // r = 2 is outside (0, 1]
    assert_eq!(r.hypotheses.h2.status, Status::Fail);
    let g = r.gamma.as_ref().unwrap();
    assert_near("gamma_x[0]", &g.gamma_x[..1], &[0.239], 0.05);
}

#[test]
fn compliant_variant_passes_everything() {
    let (bundle, r) = run("example1_h2.model.json", false);
    assert!((bundle.effective.impulse_r - 0.990033).abs() < 1e-6);
    assert!(r.hypotheses.failed().is_empty(), "{:?}", r.hypotheses.failed());
    assert_eq!(r.hypotheses.h2.status, Status::Pass);
    assert!(r.consistency.ordering_ok);
    assert!(r.verdict());
    let b = r.bounds.as_ref().unwrap();
    for (lo, up) in b.x_lo.iter().zip(&b.x_up).chain(b.y_lo.iter().zip(&b.y_up)) {
        assert!(lo < up);
    }
}

#[test]
fn report_json_round_trips() {
    for (name, o) in [("example1.model.json", false), ("example2.model.json", true)] {
        let (bundle, r) = run(name, o);
        let text = serde_json::to_string(&r).unwrap();
        let back: CertificateReport = serde_json::from_str(&text).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
        let text = serde_json::to_string(&bundle).unwrap();
        let back: StatsBundle = serde_json::from_str(&text).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }
}
