use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use superamp::dynamics::{
    critical_iterations, early_window, fit_power_law, grover_iterations, integrate_continuous,
    predictions, trajectory_csv, InitialMean, OdeSample, Prediction,
};
use superamp::gatelist;
use superamp::trace::first_peak;
use superamp::verify::{run_suite, SuiteConfig, VerificationReport};
use superamp::{
    build_standard_aa, build_superlinear, flatten, run_grover, run_standard_aa,
    run_superlinear_iterative, Dim, Expansions, QueryLedger, StateVector, Trace,
};

use crate::config::{Algo, Base, ExperimentConfig, Format};
use crate::error::CliError;

/// Magnitude a local maximum of `|T|` must exceed to count as the peak.
pub const PEAK_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub n: usize,
    pub source: usize,
    pub target: usize,
    /// What one trace step counts: diffusions, grover iterations or rounds.
    pub step_unit: String,
    pub last_step: u64,
    pub peak_amplitude: Option<f64>,
    pub peak_step: Option<u64>,
    pub predicted_step: f64,
    pub ratio_to_prediction: Option<f64>,
    pub final_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub config: ExperimentConfig,
    pub summary: RunSummary,
    pub trace: Trace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeSummary {
    pub n: usize,
    pub dt: f64,
    pub t_max: f64,
    pub samples: usize,
    pub max_abs_err: f64,
    pub max_conservation_err: f64,
    pub predictions: BTreeMap<String, Prediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeRecord {
    pub config: ExperimentConfig,
    pub summary: OdeSummary,
    pub trajectory: Vec<OdeSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyRecord {
    pub config: ExperimentConfig,
    pub report: VerificationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpandRecord {
    pub tokens: Vec<String>,
    pub ledger: QueryLedger,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub peak_step: Option<u64>,
    pub predicted_step: Option<f64>,
    pub ratio: Option<f64>,
    pub peak_over_sqrt_n: Option<f64>,
    pub fit_exponent: Option<f64>,
    pub grover_peak_step: Option<u64>,
    pub grover_over_superlinear: Option<f64>,
    pub error: Option<String>,
}

pub const SWEEP_CSV_HEADER: &str = "n,peak_step,predicted_step,ratio,peak_over_sqrt_n,fit_exponent,grover_peak_step,grover_over_superlinear,error";

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Writes to `path`, or to stdout when there is none.
fn emit(path: Option<&Path>, body: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, body).map_err(|e| io_err(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(body.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Io(format!("stdout: {e}")))
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("records serialize");
    s.push('\n');
    s
}

/// `trace.csv` -> `trace.summary.json`.
pub fn summary_path(out: &Path) -> PathBuf {
    out.with_extension("summary.json")
}

pub fn execute(cfg: &ExperimentConfig) -> Result<(), CliError> {
    match cfg.algo {
        Algo::Superlinear | Algo::Grover | Algo::StandardAa => cmd_run(cfg),
        Algo::Ode => cmd_ode(cfg),
        Algo::Verify => cmd_verify(cfg),
        Algo::Expand => cmd_expand(cfg),
    }
}

fn default_steps(predicted: f64) -> u64 {
    ((1.5 * predicted).ceil() as u64).max(4)
}

/// Magnitude of `<t|U|s>` for an engine-resolvable base.
fn base_transition(dim: Dim, base: Base, s: usize, t: usize) -> Result<f64, CliError> {
    let mut v = StateVector::basis_state(dim, s)?;
    v.apply_expr(&base.expr())?;
    Ok(v.amplitude(t).norm())
}

/// Simulates the configured algorithm and summarizes it.
pub fn simulate(cfg: &ExperimentConfig) -> Result<(RunSummary, Trace), CliError> {
    let dim = cfg.dim()?;
    let (s, t) = cfg.pair(dim)?;
    let n = dim.size();
    let (unit, predicted, (state, trace)) = match cfg.algo {
        Algo::Superlinear => {
            let predicted = critical_iterations(n);
            let diffusions = match (cfg.iterations, cfg.depth) {
                (Some(i), _) => i,
                (None, Some(k)) => 1u64
                    .checked_shl(k)
                    .filter(|_| k < 63)
                    .ok_or_else(|| CliError::Config(format!("depth {k} too large")))?,
                (None, None) => default_steps(predicted),
            };
            if diffusions == 0 {
                return Err(CliError::Config("superlinear needs at least one diffusion".into()));
            }
            let run = run_superlinear_iterative(dim, s, t, diffusions - 1, cfg.stride)?;
            ("diffusions", predicted, run)
        }
        Algo::Grover => {
            let predicted = grover_iterations(n);
            let iters = cfg.iterations.unwrap_or_else(|| default_steps(predicted));
            ("iterations", predicted, run_grover(dim, s, t, iters, cfg.stride)?)
        }
        Algo::StandardAa => {
            let base = cfg.base_or(Base::W);
            let uts = base_transition(dim, base, s, t)?;
            if uts == 0.0 {
                return Err(CliError::Config("base has no source-to-target overlap".into()));
            }
            let predicted = std::f64::consts::PI / (4.0 * uts.min(1.0).asin()) - 0.5;
            let rounds = cfg
                .p
                .map(u64::from)
                .or(cfg.iterations)
                .unwrap_or_else(|| default_steps(predicted + 0.5));
            let run = run_standard_aa(dim, &base.expr(), s, t, rounds, cfg.stride)?;
            ("rounds", predicted, run)
        }
        other => unreachable!("{other:?} is not a simulation"),
    };
    let peak = first_peak(&trace.target_magnitudes(), PEAK_THRESHOLD);
    let summary = RunSummary {
        n,
        source: s,
        target: t,
        step_unit: unit.into(),
        last_step: trace.records().last().map_or(0, |r| r.step),
        peak_amplitude: peak.map(|p| p.1),
        peak_step: peak.map(|p| p.0),
        predicted_step: predicted,
        ratio_to_prediction: peak.map(|p| p.0 as f64 / predicted),
        final_norm: state.norm_sqr().sqrt(),
    };
    Ok((summary, trace))
}

pub fn cmd_run(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let (summary, trace) = simulate(cfg)?;
    let out = cfg.out.as_deref();
    match cfg.format {
        Format::Json => {
            let rec = ResultRecord {
                config: cfg.clone(),
                summary,
                trace,
            };
            emit(out, &to_json(&rec))
        }
        Format::Csv => {
            emit(out, &trace.to_csv())?;
            let line = serde_json::to_string(&summary).expect("summary serializes");
            match out {
                Some(p) => emit(Some(&summary_path(p)), &(line + "\n")),
                None => {
                    eprintln!("{line}");
                    Ok(())
                }
            }
        }
    }
}

pub fn ode_run(cfg: &ExperimentConfig) -> Result<(OdeSummary, Vec<OdeSample>), CliError> {
    let n = cfg.dim()?.size();
    let dt = cfg.dt.unwrap_or(0.01);
    let t_max = cfg.t_max.unwrap_or_else(|| critical_iterations(n));
    let samples = integrate_continuous(n, t_max, dt, InitialMean::Zero)?;
    let mut max_abs_err = 0.0f64;
    let mut max_cons = 0.0f64;
    for s in &samples {
        let cf = superamp::dynamics::closed_form_target(s.t, n);
        max_abs_err = max_abs_err.max((s.target - cf).abs());
        max_cons = max_cons.max((s.source + s.target - 1.0).abs());
    }
    let summary = OdeSummary {
        n,
        dt,
        t_max,
        samples: samples.len(),
        max_abs_err,
        max_conservation_err: max_cons,
        predictions: predictions(n),
    };
    let stride = cfg.stride.max(1) as usize;
    let last = samples.len() - 1;
    let kept = samples
        .into_iter()
        .enumerate()
        .filter(|(i, _)| i % stride == 0 || *i == last)
        .map(|(_, s)| s)
        .collect();
    Ok((summary, kept))
}

pub fn cmd_ode(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let (summary, trajectory) = ode_run(cfg)?;
    let out = cfg.out.as_deref();
    match cfg.format {
        Format::Json => emit(
            out,
            &to_json(&OdeRecord {
                config: cfg.clone(),
                summary,
                trajectory,
            }),
        ),
        Format::Csv => {
            emit(out, &trajectory_csv(&trajectory, summary.n))?;
            let line = serde_json::to_string(&summary).expect("summary serializes");
            match out {
                Some(p) => emit(Some(&summary_path(p)), &(line + "\n")),
                None => {
                    eprintln!("{line}");
                    Ok(())
                }
            }
        }
    }
}

pub const VERIFY_CSV_HEADER: &str = "check,kind,residual,value,tolerance,pass";

fn verify_csv(report: &VerificationReport) -> String {
    let mut out = String::from(VERIFY_CSV_HEADER);
    out.push('\n');
    for c in &report.checks {
        let kind = serde_json::to_value(c.kind).expect("kind serializes");
        let kind = kind.as_str().unwrap_or_default();
        let tol = c.tolerance.map(|t| t.to_string()).unwrap_or_default();
        let pass = c.pass.map(|p| p.to_string()).unwrap_or_default();
        for (k, v) in &c.residuals {
            let _ = writeln!(out, "{},{kind},{k},{v},{tol},{pass}", c.name);
        }
    }
    out
}

pub fn cmd_verify(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let mut suite = SuiteConfig {
        seed: cfg.seed,
        ..SuiteConfig::default()
    };
    if let Some(sizes) = &cfg.sizes {
        if let Some(bad) = sizes.iter().find(|&&n| !(2..=256).contains(&n)) {
            return Err(CliError::Config(format!("size {bad} outside 2..=256")));
        }
        suite.sizes = sizes.clone();
    }
    let report = run_suite(&suite)?;
    let body = match cfg.format {
        Format::Json => to_json(&VerifyRecord {
            config: cfg.clone(),
            report: report.clone(),
        }),
        Format::Csv => verify_csv(&report),
    };
    emit(cfg.out.as_deref(), &body)?;
    if report.all_pass() {
        Ok(())
    } else {
        let names: Vec<_> = report.failures().map(|c| c.name.as_str()).collect();
        Err(CliError::Verification(names.join(", ")))
    }
}

/// Flattens the configured recursion: `--depth k` builds the superlinear
/// recursion, `--p` the standard one. Without `N`, an explicit target is
/// required.
pub fn expand(cfg: &ExperimentConfig) -> Result<ExpandRecord, CliError> {
    let (s, t) = if cfg.n.is_some() || cfg.n_qubits.is_some() {
        cfg.pair(cfg.dim()?)?
    } else {
        let s = cfg.source.unwrap_or(0);
        let t = cfg
            .target
            .ok_or_else(|| CliError::Config("expand needs --target or a dimension".into()))?;
        if s == t {
            return Err(CliError::Config(format!("source and target must differ (both {s})")));
        }
        (s, t)
    };
    let base = cfg.base_or(Base::D).expr();
    let expr = match (cfg.depth, cfg.p) {
        (Some(_), Some(_)) => return Err(CliError::Config("give --depth or --p, not both".into())),
        (Some(k), None) => {
            if k > 24 {
                return Err(CliError::Config(format!("depth {k} would emit over 2^25 tokens")));
            }
            build_superlinear(&base, k, s, t)
        }
        (None, Some(p)) => build_standard_aa(&base, p, s, t),
        (None, None) => return Err(CliError::Config("expand needs --depth or --p".into())),
    };
    let seq = flatten(&expr, &Expansions::strict())?;
    Ok(ExpandRecord {
        tokens: gatelist::tokens(&seq),
        ledger: seq.ledger(),
    })
}

pub fn cmd_expand(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let rec = expand(cfg)?;
    let body = match cfg.format {
        Format::Json => to_json(&rec),
        Format::Csv => {
            let l = rec.ledger;
            let mut out = format!(
                "# it_count {} is_count {} w_count {} i0_count {} d_count {} ubase_count {}\n",
                l.it_count, l.is_count, l.w_count, l.i0_count, l.d_count, l.ubase_count
            );
            for tok in &rec.tokens {
                out.push_str(tok);
                out.push('\n');
            }
            out
        }
    };
    emit(cfg.out.as_deref(), &body)
}

fn sweep_row(template: &ExperimentConfig, n: usize) -> Result<SweepRow, CliError> {
    let mut cfg = template.clone();
    cfg.n = Some(n);
    cfg.n_qubits = None;
    cfg.iterations = None;
    cfg.depth = None;
    cfg.stride = 1;
    let dim = cfg.dim()?;
    let (s, t) = cfg.pair(dim)?;

    cfg.algo = Algo::Superlinear;
    let (sl, trace) = simulate(&cfg)?;
    let peak = sl
        .peak_step
        .ok_or_else(|| CliError::Verification("no superlinear peak".into()))?;
    let (lo, hi) = early_window(n);
    let pts: Vec<(f64, f64)> = trace
        .records()
        .iter()
        .filter(|r| (lo..=hi).contains(&r.step))
        .map(|r| (r.step as f64, r.target.norm()))
        .collect();

    cfg.algo = Algo::Grover;
    let (gr, _) = simulate(&cfg)?;
    let g_peak = gr
        .peak_step
        .ok_or_else(|| CliError::Verification("no grover peak".into()))?;
    debug_assert_eq!((sl.source, sl.target), (s, t));

    Ok(SweepRow {
        n,
        peak_step: Some(peak),
        predicted_step: Some(sl.predicted_step),
        ratio: sl.ratio_to_prediction,
        peak_over_sqrt_n: Some(peak as f64 / (n as f64).sqrt()),
        fit_exponent: fit_power_law(&pts),
        grover_peak_step: Some(g_peak),
        grover_over_superlinear: Some(g_peak as f64 / peak as f64),
        error: None,
    })
}

/// One row per `N`, computed in parallel and ordered by `N`.
pub fn sweep(template: &ExperimentConfig) -> Result<Vec<SweepRow>, CliError> {
    let mut ns = template
        .n_list
        .clone()
        .ok_or_else(|| CliError::Config("sweep needs --n-list".into()))?;
    if ns.is_empty() {
        return Err(CliError::Config("sweep needs a non-empty --n-list".into()));
    }
    ns.sort_unstable();
    ns.dedup();
    Ok(ns
        .par_iter()
        .map(|&n| {
            sweep_row(template, n).unwrap_or_else(|e| SweepRow {
                n,
                peak_step: None,
                predicted_step: None,
                ratio: None,
                peak_over_sqrt_n: None,
                fit_exponent: None,
                grover_peak_step: None,
                grover_over_superlinear: None,
                error: Some(e.to_string()),
            })
        })
        .collect())
}

fn cell<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let err = r.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.n,
            cell(&r.peak_step),
            cell(&r.predicted_step),
            cell(&r.ratio),
            cell(&r.peak_over_sqrt_n),
            cell(&r.fit_exponent),
            cell(&r.grover_peak_step),
            cell(&r.grover_over_superlinear),
            err
        );
    }
    out
}

pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let rows = sweep(cfg)?;
    let body = match cfg.format {
        Format::Json => to_json(&rows),
        Format::Csv => sweep_csv(&rows),
    };
    emit(cfg.out.as_deref(), &body)?;
    let failed: Vec<String> = rows
        .iter()
        .filter(|r| r.error.is_some())
        .map(|r| r.n.to_string())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Config(format!("sweep rows failed for N = {}", failed.join(", "))))
    }
}
