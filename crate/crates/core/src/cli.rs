//! Command-line front end.

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    analyze, CertificateReport, Consistency, HypothesisReport, PermanenceBounds, StabilityCertificate,
};
use crate::model::{compute_stats, load_model, load_model_file, ModelError, ModelSpec, StatsBundle, StatsConfig};
use crate::sim::{empirical_bounds, simulate, stability_gap, EmpiricalBounds, SimConfig, SimError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_FAILED: i32 = 2;

const EXAMPLE_1: &str = include_str!("../models/example1.model.json");
const EXAMPLE_2: &str = include_str!("../models/example2.model.json");

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Parser)]
#[command(
    name = "tslv",
    version,
    about = "Permanence bounds, stability certificates and simulation for impulsive delayed predator-prey systems",
    after_help = "Exit codes: 0 success, 2 hypothesis or verification failure, 1 error."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute statistics, bounds, hypotheses and the stability certificate.
    Check(CheckArgs),
    /// Simulate a model and write its trajectory.
    Simulate(SimulateArgs),
    /// Check, then compare simulated tails and trajectory gaps with the certificate.
    Verify(VerifyArgs),
    /// Recompute a bundled example and compare with its published values.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
pub struct AnalysisOpts {
    /// Model file (JSON).
    pub model: PathBuf,
    /// Emit JSON instead of text.
    #[arg(long)]
    pub json: bool,
    /// Pin the statistics listed in the model's `stats_override` block.
    #[arg(long)]
    pub use_override: bool,
    /// Length of the window sampled for coefficient extremes.
    #[arg(long, default_value_t = 2000.0)]
    pub sample_window: f64,
}

#[derive(Debug, Args)]
pub struct SimOpts {
    /// Simulated time after t0.
    #[arg(long, default_value_t = 200.0)]
    pub horizon: f64,
    /// Integration step on the reals (lattices use their own step).
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
    /// Seed for random constant initial histories when --init is absent.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated initial history per species, prey first; constants or expressions in t.
    #[arg(long, value_delimiter = ',')]
    pub init: Option<Vec<String>>,
}

impl SimOpts {
    fn config(&self) -> SimConfig {
        SimConfig {
            step: self.step,
            horizon: self.horizon,
            initial: self.init.clone(),
            seed: self.seed,
            ..SimConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub analysis: AnalysisOpts,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Model file (JSON).
    pub model: PathBuf,
    #[command(flatten)]
    pub sim: SimOpts,
    /// Trajectory CSV destination.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Emit JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub analysis: AnalysisOpts,
    #[command(flatten)]
    pub sim: SimOpts,
    /// Slack added to each permanence interval.
    #[arg(long, default_value_t = 0.05)]
    pub eps: f64,
    /// Initial log-state offset of the second trajectory.
    #[arg(long, default_value_t = 0.5)]
    pub gap: f64,
    /// Largest accepted ratio g(end)/g(t0).
    #[arg(long, default_value_t = 0.01)]
    pub gap_ratio: f64,
    /// Trajectory CSV destination for the first run.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// Bundled example: 1 (real line) or 2 (integers).
    #[arg(value_parser = clap::value_parser!(u8).range(1..=2))]
    pub example: u8,
    /// Emit JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesCheck {
    pub species: String,
    pub tail_lo: f64,
    pub tail_hi: f64,
    pub bound_lo: Option<f64>,
    pub bound_hi: Option<f64>,
    /// `None` when the certified interval is missing or inverted.
    pub ok: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapSummary {
    pub initial: f64,
    pub last: f64,
    pub ratio: f64,
    pub decay_rate: Option<f64>,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalReport {
    pub eps: f64,
    pub tail: EmpiricalBounds,
    pub species: Vec<SpeciesCheck>,
    pub gap: GapSummary,
    pub verified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: Vec<String>,
    pub model_hash: String,
    pub stats: StatsBundle,
    pub hypotheses: HypothesisReport,
    pub bounds: Option<PermanenceBounds>,
    pub gamma: Option<StabilityCertificate>,
    pub consistency: Consistency,
    pub verdict: bool,
    pub empirical: Option<EmpiricalReport>,
    pub warnings: Vec<String>,
}

/// Outcome of one command: text for stdout and the exit code.
pub struct Outcome {
    pub stdout: String,
    pub code: i32,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let echo: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return Outcome {
                stdout: String::new(),
                code,
            };
        }
    };
    let result = match cli.command {
        Command::Check(a) => cmd_check(&a, echo),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Verify(a) => cmd_verify(&a, echo),
        Command::Reproduce(a) => cmd_reproduce(&a),
    };
    match result {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            Outcome {
                stdout: String::new(),
                code: EXIT_ERROR,
            }
        }
    }
}

fn stats_config(opts: &AnalysisOpts) -> StatsConfig {
    StatsConfig {
        window: opts.sample_window,
        use_override: opts.use_override,
        ..StatsConfig::default()
    }
}

/// Stats, bounds, hypotheses and certificate, with warnings filled in.
pub fn certify(model: &ModelSpec, cfg: &StatsConfig, command: Vec<String>) -> Result<RunReport, CliError> {
    let stats = compute_stats(model, cfg)?;
    let CertificateReport {
        hypotheses,
        bounds,
        gamma,
        consistency,
    } = analyze(model, &stats);
    let mut warnings = Vec::new();
    if cfg.use_override && model.stats_override.is_none() {
        warnings.push("--use-override given but the model has no stats_override block".into());
    }
    warnings.extend(
        stats
            .overridden
            .iter()
            .map(|f| format!("statistic `{f}` pinned by stats_override")),
    );
    warnings.extend(consistency.notes.iter().cloned());
    for (name, h) in hypotheses.all() {
        if h.status == crate::analysis::Status::Fail {
            warnings.push(format!("{name} failed: {}", h.witnesses.join("; ")));
        }
    }
    let verdict = gamma.as_ref().is_some_and(|g| g.verdict) && hypotheses.failed().is_empty();
    Ok(RunReport {
        command,
        model_hash: model.hash.clone(),
        stats,
        hypotheses,
        bounds,
        gamma,
        consistency,
        verdict,
        empirical: None,
        warnings,
    })
}

fn cmd_check(a: &CheckArgs, echo: Vec<String>) -> Result<Outcome, CliError> {
    let model = load_model_file(&a.analysis.model)?;
    let report = certify(&model, &stats_config(&a.analysis), echo)?;
    let code = if report.verdict { EXIT_OK } else { EXIT_FAILED };
    Ok(Outcome {
        stdout: render_report(&report, a.analysis.json)?,
        code,
    })
}

#[derive(Debug, Serialize)]
struct SimulateSummary<'a> {
    model_hash: &'a str,
    rows: usize,
    impulses: usize,
    end_time: f64,
    tail: EmpiricalBounds,
    notes: &'a [String],
    out: Option<&'a PathBuf>,
}

fn write_csv(traj: &crate::sim::Trajectory, path: &PathBuf) -> Result<(), CliError> {
    let out = |source| CliError::Output {
        path: path.clone(),
        source,
    };
    let file = File::create(path).map_err(out)?;
    match traj.write_csv(BufWriter::new(file)) {
        Err(SimError::Io(e)) => Err(out(e)),
        other => Ok(other?),
    }
}

fn cmd_simulate(a: &SimulateArgs) -> Result<Outcome, CliError> {
    let model = load_model_file(&a.model)?;
    let cfg = a.sim.config();
    let traj = simulate(&model, &cfg)?;
    if let Some(path) = &a.out {
        write_csv(&traj, path)?;
    }
    let summary = SimulateSummary {
        model_hash: &model.hash,
        rows: traj.samples.len(),
        impulses: traj.impulse_count(),
        end_time: traj.end_time(),
        tail: empirical_bounds(&traj, cfg.transient_fraction)?,
        notes: &traj.notes,
        out: a.out.as_ref(),
    };
    let stdout = if a.json {
        serde_json::to_string_pretty(&summary)? + "\n"
    } else {
        let mut s = String::new();
        let _ = writeln!(s, "model     {}", summary.model_hash);
        let _ = writeln!(s, "rows      {}", summary.rows);
        let _ = writeln!(s, "impulses  {}", summary.impulses);
        let _ = writeln!(s, "end time  {}", num(summary.end_time));
        let _ = writeln!(
            s,
            "tail from t = {} ({} samples)",
            num(summary.tail.tail_start),
            summary.tail.samples
        );
        for (name, (lo, hi)) in species_names(&summary.tail) {
            let _ = writeln!(s, "  ln {name:<3} [{}, {}]", num(lo), num(hi));
        }
        for n in summary.notes {
            let _ = writeln!(s, "note: {n}");
        }
        if let Some(p) = summary.out {
            let _ = writeln!(s, "trajectory written to {}", p.display());
        }
        s
    };
    Ok(Outcome { stdout, code: EXIT_OK })
}

fn species_names(b: &EmpiricalBounds) -> Vec<(String, (f64, f64))> {
    let xs = b.x.iter().enumerate().map(|(i, r)| (format!("z{}", i + 1), *r));
    let ys = b.y.iter().enumerate().map(|(j, r)| (format!("w{}", j + 1), *r));
    xs.chain(ys).collect()
}

/// Initial histories of the two gap runs: `phi` and `phi * e^gap`.
fn gap_pair(model: &ModelSpec, cfg: &SimConfig, gap: f64) -> Result<(Vec<String>, Vec<String>), CliError> {
    let dim = model.n + model.m;
    let base: Vec<String> = match &cfg.initial {
        Some(v) => v.clone(),
        None => match cfg.initial_history(dim)? {
            crate::sim::InitialHistory::Constant(v) => v.iter().map(|x| format!("{x:e}")).collect(),
            crate::sim::InitialHistory::Exprs(_) => unreachable!("random histories are constant"),
        },
    };
    let scale = gap.exp();
    let shifted = base.iter().map(|s| format!("({s})*{scale:e}")).collect();
    Ok((base, shifted))
}

fn cmd_verify(a: &VerifyArgs, echo: Vec<String>) -> Result<Outcome, CliError> {
    let model = load_model_file(&a.analysis.model)?;
    let mut report = certify(&model, &stats_config(&a.analysis), echo)?;
    let cfg = a.sim.config();
    let (init_a, init_b) = gap_pair(&model, &cfg, a.gap)?;
    let cfg = SimConfig {
        initial: Some(init_a.clone()),
        ..cfg
    };
    let traj = simulate(&model, &cfg)?;
    if let Some(path) = &a.out {
        write_csv(&traj, path)?;
    }
    report.warnings.extend(traj.notes.iter().cloned());
    let tail = empirical_bounds(&traj, cfg.transient_fraction)?;
    let gap = stability_gap(&model, &cfg, &init_a, &init_b)?;

    let certified = |i: usize, prey: bool| -> (Option<f64>, Option<f64>) {
        match &report.bounds {
            None => (None, None),
            Some(b) if prey => (Some(b.x_lo[i]), Some(b.x_up[i])),
            Some(b) => (Some(b.y_lo[i]), Some(b.y_up[i])),
        }
    };
    let mut species = Vec::new();
    for (k, (name, (lo, hi))) in species_names(&tail).into_iter().enumerate() {
        let prey = k < model.n;
        let idx = if prey { k } else { k - model.n };
        let (blo, bhi) = certified(idx, prey);
        let ok = match (blo, bhi) {
            (Some(l), Some(u)) if l <= u => Some(lo >= l - a.eps && hi <= u + a.eps),
            (Some(_), Some(_)) => {
                report.warnings.push(format!(
                    "{name}: certified interval is inverted, empirical check skipped"
                ));
                None
            }
            _ => {
                report
                    .warnings
                    .push(format!("{name}: no certified interval, empirical check skipped"));
                None
            }
        };
        species.push(SpeciesCheck {
            species: name,
            tail_lo: lo,
            tail_hi: hi,
            bound_lo: blo,
            bound_hi: bhi,
            ok,
        });
    }
    let gap = GapSummary {
        initial: gap.initial,
        last: gap.last,
        ratio: gap.ratio,
        decay_rate: gap.decay_rate,
        ok: gap.ratio < a.gap_ratio,
    };
    let checked = species.iter().filter(|s| s.ok.is_some()).count();
    let verified = checked > 0 && species.iter().all(|s| s.ok != Some(false)) && gap.ok;
    if checked == 0 {
        report
            .warnings
            .push("no species could be checked against certified bounds".into());
    }
    report.empirical = Some(EmpiricalReport {
        eps: a.eps,
        tail,
        species,
        gap,
        verified,
    });
    Ok(Outcome {
        stdout: render_report(&report, a.analysis.json)?,
        code: if verified { EXIT_OK } else { EXIT_FAILED },
    })
}

/// A number exactly as it appears in JSON output.
fn num(v: f64) -> String {
    if v.is_finite() {
        serde_json::Value::from(v).to_string()
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(", ")
}

pub fn render_report(r: &RunReport, json: bool) -> Result<String, CliError> {
    if json {
        return Ok(serde_json::to_string_pretty(r)? + "\n");
    }
    let mut s = String::new();
    let _ = writeln!(s, "model    {}", r.model_hash);
    let _ = writeln!(s, "verdict  {}", r.verdict);
    let _ = writeln!(s, "hypotheses");
    for (name, h) in r.hypotheses.all() {
        let status = serde_json::to_value(h.status)?;
        let _ = writeln!(s, "  {name}  {}", status.as_str().unwrap_or_default());
        for m in h.margins.iter().filter(|m| !m.ok) {
            let _ = writeln!(s, "      {} = {}", m.name, num(m.value));
        }
    }
    if let Some(b) = &r.bounds {
        let _ = writeln!(s, "bounds");
        let _ = writeln!(s, "  x_up  {}", fmt_list(&b.x_up));
        let _ = writeln!(s, "  y_up  {}", fmt_list(&b.y_up));
        let _ = writeln!(s, "  x_lo  {}", fmt_list(&b.x_lo));
        let _ = writeln!(s, "  y_lo  {}", fmt_list(&b.y_lo));
    }
    if let Some(g) = &r.gamma {
        let _ = writeln!(s, "certificate");
        let _ = writeln!(s, "  gamma_x  {}", fmt_list(&g.gamma_x));
        let _ = writeln!(s, "  gamma_y  {}", fmt_list(&g.gamma_y));
        let _ = writeln!(s, "  gamma    {}", num(g.gamma));
    }
    if let Some(e) = &r.empirical {
        let _ = writeln!(s, "empirical (eps {})", e.eps);
        for c in &e.species {
            let status = match c.ok {
                Some(true) => "ok",
                Some(false) => "OUTSIDE",
                None => "skipped",
            };
            let bound = match (c.bound_lo, c.bound_hi) {
                (Some(l), Some(u)) => format!("[{}, {}]", num(l), num(u)),
                _ => "-".into(),
            };
            let _ = writeln!(
                s,
                "  ln {:<3} [{}, {}] vs {bound}  {status}",
                c.species,
                num(c.tail_lo),
                num(c.tail_hi)
            );
        }
        let _ = writeln!(
            s,
            "  gap  {} -> {}  ratio {}  decay rate {}",
            num(e.gap.initial),
            num(e.gap.last),
            num(e.gap.ratio),
            e.gap.decay_rate.map_or("-".into(), num)
        );
        let _ = writeln!(s, "  verified {}", e.verified);
    }
    if !r.warnings.is_empty() {
        let _ = writeln!(s, "warnings");
        for w in &r.warnings {
            let _ = writeln!(s, "  - {w}");
        }
    }
    Ok(s)
}

/// Published values of one bundled example.
pub struct Reference {
    pub model: &'static str,
    pub x_up: [f64; 2],
    pub y_up: [f64; 2],
    pub x_lo: [f64; 2],
    pub y_lo: [f64; 2],
    /// `gamma_1, gamma_2, gamma~_1, gamma~_2, gamma`.
    pub gamma: [f64; 5],
}

pub const BOUND_TOL: f64 = 0.01;
pub const GAMMA_TOL: f64 = 0.05;

pub fn reference(example: u8) -> Option<Reference> {
    match example {
        1 => Some(Reference {
            model: EXAMPLE_1,
            x_up: [1.591, 1.645],
            y_up: [1.653, 1.324],
            x_lo: [0.979, 0.896],
            y_lo: [0.296, 0.198],
            gamma: [2.408, 0.466, 0.502, 0.418, 0.418],
        }),
        2 => Some(Reference {
            model: EXAMPLE_2,
            x_up: [0.041, 0.034],
            y_up: [0.012, 0.038],
            x_lo: [1.374, 1.360],
            y_lo: [2.724, 2.747],
            gamma: [0.239, 0.244, 1.248, 1.093, 0.239],
        }),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproRow {
    pub quantity: String,
    pub published: f64,
    pub computed: f64,
    pub delta: f64,
    pub tolerance: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproTable {
    pub example: u8,
    pub rows: Vec<ReproRow>,
    pub warnings: Vec<String>,
    pub all_ok: bool,
}

/// Recomputes a bundled example with its pinned statistics.
pub fn reproduce(example: u8) -> Result<ReproTable, CliError> {
    let Some(reference) = reference(example) else {
        return Err(CliError::Model(ModelError::Impulse(format!(
            "no bundled example {example}"
        ))));
    };
    let model = load_model(reference.model)?;
    let cfg = StatsConfig {
        use_override: true,
        ..StatsConfig::default()
    };
    let report = certify(&model, &cfg, vec!["reproduce".into(), example.to_string()])?;
    let mut rows = Vec::new();
    let mut push = |name: String, published: f64, computed: Option<f64>, tol: f64| {
        let computed = computed.unwrap_or(f64::NAN);
        let delta = (computed - published).abs();
        rows.push(ReproRow {
            quantity: name,
            published,
            computed,
            delta,
            tolerance: tol,
            ok: delta <= tol,
        });
    };
    let b = report.bounds.as_ref();
    for i in 0..2 {
        push(
            format!("x{}_up", i + 1),
            reference.x_up[i],
            b.map(|b| b.x_up[i]),
            BOUND_TOL,
        );
    }
    for i in 0..2 {
        push(
            format!("y{}_up", i + 1),
            reference.y_up[i],
            b.map(|b| b.y_up[i]),
            BOUND_TOL,
        );
    }
    for i in 0..2 {
        push(
            format!("x{}_lo", i + 1),
            reference.x_lo[i],
            b.map(|b| b.x_lo[i]),
            BOUND_TOL,
        );
    }
    for i in 0..2 {
        push(
            format!("y{}_lo", i + 1),
            reference.y_lo[i],
            b.map(|b| b.y_lo[i]),
            BOUND_TOL,
        );
    }
    let g = report.gamma.as_ref();
    let names = ["gamma_1", "gamma_2", "gamma~_1", "gamma~_2", "gamma"];
    for (k, name) in names.iter().enumerate() {
        let v = g.map(|g| match k {
            0 | 1 => g.gamma_x[k],
            2 | 3 => g.gamma_y[k - 2],
            _ => g.gamma,
        });
        push(name.to_string(), reference.gamma[k], v, GAMMA_TOL);
    }
    let all_ok = rows.iter().all(|r| r.ok);
    Ok(ReproTable {
        example,
        rows,
        warnings: report.warnings,
        all_ok,
    })
}

fn cmd_reproduce(a: &ReproduceArgs) -> Result<Outcome, CliError> {
    let table = reproduce(a.example)?;
    let code = if table.all_ok { EXIT_OK } else { EXIT_FAILED };
    let stdout = if a.json {
        serde_json::to_string_pretty(&table)? + "\n"
    } else {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<10} {:>10} {:>12} {:>10} {:>6}",
            "quantity", "published", "computed", "|delta|", ""
        );
        for r in &table.rows {
            let _ = writeln!(
                s,
                "{:<10} {:>10} {:>12.6} {:>10.6} {:>6}",
                r.quantity,
                r.published,
                r.computed,
                r.delta,
                if r.ok { "ok" } else { "MISS" }
            );
        }
        for w in &table.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    };
    Ok(Outcome { stdout, code })
}
