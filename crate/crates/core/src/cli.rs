//! Batch front-end: parse arguments, run one analysis, write reports.
//!
//! Every run writes `report.json` (schema `rpos/1`), one
//! `convergence_<target>.csv` per measured inequality and
//! `run-metadata.json`. Only the metadata file carries timings, so two runs
//! with the same inputs produce byte-identical reports and CSVs.
//!
//! Exit codes: 0 pass, 1 analysis failure (a result, still written to
//! disk), 2 usage or IO error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::condition_g::{self, GOptions};
use crate::error::{Error, Result};
use crate::models::{
    self, analyze_family, build_diffusion_family, build_pds_kernel, check_diffusion_hypotheses,
    check_pds_hypotheses, girsanov_check, mc_log_mass_slope, mc_pds, verify_condition_g,
    DiffusionModel, Model, ModelConfig, PdsModel, Start,
};
use crate::reciprocal::{self, CertifyOptions, ReciprocalInput};
use crate::semigroup::{Measure, OperatorLayout, SubsetMask, TransferOperator, WeightedFunction};
use crate::spectral::{self, ConvergenceReport, SkeletonOptions};

pub const SCHEMA: &str = "rpos/1";
pub const EXIT_PASS: i32 = 0;
pub const EXIT_ANALYSIS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_N_MAX: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Perron triple and the convergence inequalities of an operator.
    Spectral,
    /// Condition (G) for an operator with given ψ₁, ψ₂ and K.
    CheckG,
    /// Lyapunov and minorization certificate for the h-transformed chain.
    Reciprocal,
    /// Discretize a model config and run its full pipeline.
    ModelRun,
    /// Continuous-time analysis from the skeleton of a diffusion config.
    Skeleton,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectral => "spectral",
            Command::CheckG => "check-g",
            Command::Reciprocal => "reciprocal",
            Command::ModelRun => "model-run",
            Command::Skeleton => "skeleton",
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "rpos",
    version,
    about = "Quasi-stationary analysis of positive semigroups"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Operator JSON or key=value model config.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true, value_name = "DIR", default_value = "rpos-out")]
    pub out: PathBuf,
    /// Power-iteration tolerance, in (0, 1e-2].
    #[arg(long, global = true, value_name = "F")]
    pub tol: Option<f64>,
    /// Horizon of the measured sequences, in 1..=100000.
    #[arg(long = "n-max", global = true, value_name = "N")]
    pub n_max: Option<usize>,
    /// Monte Carlo seed (overrides mc.seed).
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Suppress the stdout summary.
    #[arg(long, global = true)]
    pub quiet: bool,
}

/// Validated run parameters.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub config: PathBuf,
    pub out: PathBuf,
    pub tol: f64,
    pub n_max: usize,
    pub seed: Option<u64>,
    pub quiet: bool,
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<Self> {
        let config = cli
            .config
            .ok_or_else(|| Error::Config("--config PATH is required".into()))?;
        let tol = cli.tol.unwrap_or(DEFAULT_TOL);
        if !(tol > 0.0 && tol <= 1e-2) {
            return Err(Error::Config(format!(
                "--tol must lie in (0, 1e-2], got {tol}"
            )));
        }
        let n_max = cli.n_max.unwrap_or(DEFAULT_N_MAX);
        if !(1..=100_000).contains(&n_max) {
            return Err(Error::Config(format!(
                "--n-max must lie in 1..=100000, got {n_max}"
            )));
        }
        Ok(Self {
            command: cli.command,
            config,
            out: cli.out,
            tol,
            n_max,
            seed: cli.seed,
            quiet: cli.quiet,
        })
    }
}

/// Operator file: the serialized operator plus optional analysis inputs.
#[derive(Debug, Deserialize)]
pub struct OperatorInput {
    #[serde(flatten)]
    pub layout: OperatorLayout,
    pub psi1: Option<Vec<f64>>,
    pub psi2: Option<Vec<f64>>,
    /// Indices of the set `K` (all states by default).
    #[serde(rename = "K")]
    pub k: Option<Vec<usize>>,
    pub n1: Option<usize>,
}

struct LoadedOperator {
    p: TransferOperator,
    psi1: WeightedFunction,
    psi2: Option<WeightedFunction>,
    k: SubsetMask,
    n1: usize,
}

fn field_fn(
    p: &TransferOperator,
    name: &str,
    v: Option<Vec<f64>>,
) -> Result<Option<WeightedFunction>> {
    v.map(|v| {
        WeightedFunction::new(p.space().clone(), v)
            .map_err(|e| Error::Config(format!("{name}: {e}")))
    })
    .transpose()
}

fn load_operator(path: &Path) -> Result<LoadedOperator> {
    let text = fs::read_to_string(path).map_err(|e| Error::io_at(path, e))?;
    let input: OperatorInput = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("malformed operator JSON: {e}")))?;
    let p = TransferOperator::try_from(input.layout)?;
    let psi1 = field_fn(&p, "psi1", input.psi1)?
        .unwrap_or_else(|| WeightedFunction::constant(p.space().clone(), 1.0));
    let psi2 = field_fn(&p, "psi2", input.psi2)?;
    let k = match input.k {
        None => SubsetMask::full(p.space().clone()),
        Some(idx) => SubsetMask::from_indices(p.space().clone(), &idx)
            .map_err(|e| Error::Config(format!("K: {e}")))?,
    };
    let n1 = input.n1.unwrap_or(1);
    if n1 == 0 {
        return Err(Error::Config("n1: must be at least 1".into()));
    }
    Ok(LoadedOperator {
        p,
        psi1,
        psi2,
        k,
        n1,
    })
}

fn is_json(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// What a command hands back for writing.
struct Outcome {
    pass: bool,
    report: Value,
    csvs: Vec<ConvergenceReport>,
    extra_files: Vec<(String, String)>,
    summary: String,
}

fn triple_json(t: &spectral::SpectralTriple) -> Value {
    json!({
        "theta0": t.theta0,
        "eta": t.eta,
        "nu_p": t.nu_p.masses().to_vec(),
        "right_residual": t.right_residual,
        "left_residual": t.left_residual,
        "iterations": t.iterations,
    })
}

fn fit_json(r: &ConvergenceReport) -> Value {
    json!({
        "target": r.target.name(),
        "csv": r.file_name(),
        "fitted_rate": r.fitted_rate,
        "fitted_constant": r.fitted_constant,
        "ls_constant": r.ls_constant,
        "bound_scale": r.bound_scale,
        "burn_in": r.burn_in,
        "step": r.step,
        "decay_rate": r.decay_rate,
        "monotone_tail": r.monotone_tail,
        "noise_floor": r.noise_floor,
        "pass": r.pass,
    })
}

/// Default test function: `ψ₁` on the first half of the states.
fn half_psi1(psi1: &WeightedFunction) -> Result<WeightedFunction> {
    let half = psi1.len().div_ceil(2);
    WeightedFunction::new(
        psi1.space().clone(),
        (0..psi1.len())
            .map(|i| if i < half { psi1.get(i) } else { 0.0 })
            .collect::<Vec<_>>(),
    )
}

fn run_spectral(cfg: &RunConfig) -> Result<Outcome> {
    let op = load_operator(&cfg.config)?;
    let triple = spectral::power_iterate(&op.p, &op.psi1, cfg.tol, 100_000)?;
    let psi2 = op.psi2.clone().unwrap_or_else(|| triple.eta.clone());
    let mu = Measure::uniform(op.p.space().clone());
    let f = half_psi1(&op.psi1)?;
    let eq1 = spectral::measure_eq1(&op.p, &triple, &op.psi1, &psi2, &mu, &f, cfg.n_max)?;
    let eq2 = spectral::measure_eq2(&op.p, &triple, &op.psi1, &mu, &f, cfg.n_max)?;
    let eq3 = spectral::measure_eq3(&op.p, &triple, &op.psi1, cfg.n_max)?;
    let pass = eq1.pass && eq2.pass && eq3.pass;
    let summary = format!(
        "theta0 = {:.15e}\nresiduals: right {:.3e}, left {:.3e}\n\
         eq1 rate {:.6}  eq2 rate {:.6}  eq3 rate {:.6}\npass = {pass}\n",
        triple.theta0,
        triple.right_residual,
        triple.left_residual,
        eq1.fitted_rate,
        eq2.fitted_rate,
        eq3.fitted_rate
    );
    Ok(Outcome {
        pass,
        report: json!({
            "triple": triple_json(&triple),
            "convergence": [fit_json(&eq1), fit_json(&eq2), fit_json(&eq3)],
        }),
        csvs: vec![eq1, eq2, eq3],
        extra_files: Vec::new(),
        summary,
    })
}

fn run_check_g(cfg: &RunConfig) -> Result<Outcome> {
    let op = load_operator(&cfg.config)?;
    let psi2 = op.psi2.clone().unwrap_or_else(|| op.psi1.clone());
    let opts = GOptions {
        n1: op.n1,
        g3_horizon: cfg.n_max,
        g4_horizon: cfg.n_max,
    };
    let report = condition_g::verify(&op.p, &op.k, &op.psi1, &psi2, opts)?;
    Ok(Outcome {
        pass: report.overall,
        summary: report.render_table(),
        report: json!({ "g_report": report, "K": op.k }),
        csvs: Vec::new(),
        extra_files: Vec::new(),
    })
}

fn run_reciprocal(cfg: &RunConfig) -> Result<Outcome> {
    let op = load_operator(&cfg.config)?;
    let triple = spectral::power_iterate(&op.p, &op.psi1, cfg.tol, 100_000)?;
    let input = ReciprocalInput::from_triple(&op.p, &op.psi1, &triple, cfg.n_max)?;
    let eq3 = spectral::measure_eq3(&op.p, &triple, &op.psi1, cfg.n_max)?;
    let opts = CertifyOptions {
        g3_horizon: cfg.n_max,
        g4_horizon: cfg.n_max,
        ..CertifyOptions::default()
    };
    let (pass, cert, failure) = match reciprocal::certify(&input, opts) {
        Ok(c) => (c.pass && c.lyapunov_holds(), Some(c), None),
        Err(e) if e.is_analysis_failure() => (false, None, Some(e.to_string())),
        Err(e) => return Err(e),
    };
    let summary = match &cert {
        Some(c) => format!(
            "certificate: m = {}, lambda = {}, rho = {}, d = {:.6e}, C_R = {:.6e}\n\
             lyapunov holds = {}\n{}pass = {pass}\n",
            c.m,
            c.lambda,
            c.rho,
            c.d,
            c.c_r,
            c.lyapunov_holds(),
            c.g_report.render_table()
        ),
        None => format!("no certificate: {}\n", failure.as_deref().unwrap_or("")),
    };
    Ok(Outcome {
        pass,
        report: json!({
            "triple": triple_json(&triple),
            "certificate": cert,
            "lyapunov_holds": cert.as_ref().map(|c| c.lyapunov_holds()),
            "failure": failure,
            "convergence": [fit_json(&eq3)],
        }),
        csvs: vec![eq3],
        extra_files: Vec::new(),
        summary,
    })
}

/// Grid iterate `P_n ψ₁(x₀)/ψ₁(x₀)` against Monte Carlo, `n = 1..=n`.
fn pds_mc_cross_check(
    kernel: &models::PdsKernel,
    n: usize,
    n_traj: usize,
    seed: u64,
) -> Result<Value> {
    let space = kernel.op.space();
    let x0_idx = (0..space.len())
        .min_by(|&a, &b| {
            models::catalog::norm(space.point(a)).total_cmp(&models::catalog::norm(space.point(b)))
        })
        .expect("non-empty grid");
    let x0 = space.point(x0_idx).to_vec();
    let model = &kernel.model;
    let psi_x0 = kernel.psi1.get(x0_idx);
    let mut rows = Vec::new();
    let mut g = kernel.psi1.clone();
    for step in 1..=n {
        g = kernel.op.apply(&g)?;
        let grid_value = g.get(x0_idx) / psi_x0;
        let f = |y: &[f64]| model.psi1_at(y) / psi_x0;
        let est = mc_pds(model, &x0, step, &f, n_traj, seed.wrapping_add(step as u64))?;
        let z = if est.std_error > 0.0 {
            (est.value - grid_value) / est.std_error
        } else {
            0.0
        };
        rows.push(json!({
            "n": step,
            "grid": grid_value,
            "mc": est.value,
            "std_error": est.std_error,
            "z": z,
        }));
    }
    Ok(json!({ "x0": x0, "n_traj": n_traj, "seed": seed, "rows": rows }))
}

fn run_pds(model: &PdsModel, mc: &models::McSettings, cfg: &RunConfig) -> Result<Outcome> {
    let seed = cfg.seed.unwrap_or(mc.seed);
    let hyp = check_pds_hypotheses(model)?;
    let kernel = match build_pds_kernel(model) {
        Ok(k) => k,
        Err(e @ Error::GridTooNarrow { .. }) => {
            return Ok(Outcome {
                pass: false,
                summary: format!(
                    "{e}\nhypothesis warnings: {}\npass = false\n",
                    hyp.warnings.join("; ")
                ),
                report: json!({
                    "model": Model::Pds(model.clone()),
                    "hypotheses": hyp,
                    "failure": e.to_string(),
                }),
                csvs: Vec::new(),
                extra_files: Vec::new(),
            })
        }
        Err(e) => return Err(e),
    };
    let ver = verify_condition_g(&kernel, GOptions::default())?;
    let triple = spectral::power_iterate(&kernel.op, &kernel.psi1, cfg.tol, 100_000)?;
    let mu = Measure::point_mass(
        kernel.op.space().clone(),
        (0..kernel.op.len())
            .min_by(|&a, &b| {
                models::catalog::norm(kernel.op.space().point(a))
                    .total_cmp(&models::catalog::norm(kernel.op.space().point(b)))
            })
            .expect("non-empty grid"),
    )?;
    let f = half_psi1(&kernel.psi1)?;
    let eq1 = spectral::measure_eq1(
        &kernel.op,
        &triple,
        &kernel.psi1,
        &ver.psi2,
        &mu,
        &f,
        cfg.n_max,
    )?;
    let eq2 = spectral::measure_eq2(&kernel.op, &triple, &kernel.psi1, &mu, &f, cfg.n_max)?;
    let mc_check = pds_mc_cross_check(&kernel, 10.min(cfg.n_max), mc.n_traj, seed)?;
    let pass = ver.report.overall && eq1.pass && eq2.pass;
    let summary = format!(
        "kernel: {} states, leak {:.3e}\n{}theta0 = {:.15e}\neq1 rate {:.6}  eq2 rate {:.6}\npass = {pass}\n",
        kernel.op.len(),
        kernel.leak_max,
        ver.report.render_table(),
        triple.theta0,
        eq1.fitted_rate,
        eq2.fitted_rate
    );
    Ok(Outcome {
        pass,
        report: json!({
            "model": Model::Pds(model.clone()),
            "kernel": kernel.summary(),
            "kernel_file": "kernel.json",
            "hypotheses": hyp,
            "verification": {
                "theta2": ver.theta2,
                "psi1_level": ver.psi1_level,
                "K": ver.k,
                "n0": ver.n0,
                "g_report": ver.report,
            },
            "triple": triple_json(&triple),
            "convergence": [fit_json(&eq1), fit_json(&eq2)],
            "mc_cross_check": mc_check,
        }),
        csvs: vec![eq1, eq2],
        extra_files: vec![("kernel.json".into(), kernel.op.to_json()?)],
        summary,
    })
}

fn skeleton_report(model: &DiffusionModel) -> Result<(spectral::SkeletonAnalysis, Value)> {
    let fam = build_diffusion_family(model)?;
    let an = analyze_family(&fam, &SkeletonOptions::default())?;
    let report = json!({
        "t0": an.t0,
        "delta": an.delta,
        "lambda0": an.lambda0,
        "theta0": an.triple.theta0,
        "triple": triple_json(&an.triple),
        "c_bar": an.c_bar,
        "c_underline": an.c_underline,
        "consistency_residual": an.consistency_residual,
        "convergence": [fit_json(&an.eq1cont), fit_json(&an.eq2cont)],
        "pass": an.pass,
    });
    Ok((an, report))
}

fn run_diffusion(
    model: &DiffusionModel,
    mc: &models::McSettings,
    cfg: &RunConfig,
) -> Result<Outcome> {
    let seed = cfg.seed.unwrap_or(mc.seed);
    let hyp = check_diffusion_hypotheses(model)?;
    let (an, skel) = skeleton_report(model)?;
    let girsanov = girsanov_check(model)?;
    let start = Start::from_measure(&an.triple.nu_p, model.h())?;
    let horizon = model.t0 * model.horizon as f64;
    let times: Vec<f64> = (1..=4)
        .map(|k| k as f64 * horizon.min(4.0 * model.t0) / 4.0)
        .collect();
    let slope = match mc_log_mass_slope(model, &start, &times, mc.n_traj, seed, mc.euler, 20) {
        Err(e) if !e.is_analysis_failure() => return Err(e),
        other => other,
    };
    let (mc_json, mc_ok) = match &slope {
        Ok(s) => (
            json!({ "slope": s, "contains_lambda0": s.contains(an.lambda0) }),
            true,
        ),
        Err(e) => (json!({ "failure": e.to_string() }), false),
    };
    let pass = an.pass && mc_ok;
    let summary = format!(
        "lambda0 = {:.12}\nc_bar = {:.6e}  c_underline = {:.6e}\ngirsanov discrepancy = {:.3e}\n{}pass = {pass}\n",
        an.lambda0,
        an.c_bar,
        an.c_underline,
        girsanov.discrepancy,
        match &slope {
            Ok(s) => format!("MC slope = {:.6} in [{:.6}, {:.6}]\n", s.slope, s.ci_low, s.ci_high),
            Err(e) => format!("MC slope unavailable: {e}\n"),
        }
    );
    Ok(Outcome {
        pass,
        report: json!({
            "model": Model::Diffusion(model.clone()),
            "hypotheses": hyp,
            "skeleton": skel,
            "girsanov": girsanov,
            "mc": mc_json,
            "mc_settings": { "n_traj": mc.n_traj, "seed": seed, "euler": mc.euler },
        }),
        csvs: vec![an.eq1cont, an.eq2cont],
        extra_files: Vec::new(),
        summary,
    })
}

fn load_model(cfg: &RunConfig) -> Result<ModelConfig> {
    if is_json(&cfg.config) {
        return Err(Error::Config(format!(
            "{} is an operator file; {} expects a key=value model config",
            cfg.config.display(),
            cfg.command.name()
        )));
    }
    ModelConfig::load(&cfg.config)
}

fn run_model(cfg: &RunConfig) -> Result<Outcome> {
    let mc = load_model(cfg)?;
    match &mc.model {
        Model::Pds(m) => run_pds(m, &mc.mc, cfg),
        Model::Diffusion(m) => run_diffusion(m, &mc.mc, cfg),
    }
}

fn run_skeleton(cfg: &RunConfig) -> Result<Outcome> {
    let mc = load_model(cfg)?;
    let Model::Diffusion(model) = &mc.model else {
        return Err(Error::Config(
            "skeleton expects model.kind = diffusion".into(),
        ));
    };
    let (an, report) = skeleton_report(model)?;
    Ok(Outcome {
        pass: an.pass,
        summary: format!(
            "lambda0 = {:.12}\nc_bar = {:.6e}  c_underline = {:.6e}\npass = {}\n",
            an.lambda0, an.c_bar, an.c_underline, an.pass
        ),
        report: json!({ "model": Model::Diffusion(model.clone()), "skeleton": report }),
        csvs: vec![an.eq1cont, an.eq2cont],
        extra_files: Vec::new(),
    })
}

fn dispatch(cfg: &RunConfig) -> Result<Outcome> {
    match cfg.command {
        Command::Spectral | Command::CheckG | Command::Reciprocal if !is_json(&cfg.config) => {
            Err(Error::Config(format!(
                "{} expects an operator JSON file, got {}",
                cfg.command.name(),
                cfg.config.display()
            )))
        }
        Command::Spectral => run_spectral(cfg),
        Command::CheckG => run_check_g(cfg),
        Command::Reciprocal => run_reciprocal(cfg),
        Command::ModelRun => run_model(cfg),
        Command::Skeleton => run_skeleton(cfg),
    }
}

fn write_pretty(path: &Path, v: &Value) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

fn unix_seconds(t: SystemTime) -> f64 {
    t.duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

/// Runs one validated configuration and returns the exit code.
pub fn run(cfg: &RunConfig) -> i32 {
    let started = SystemTime::now();
    let clock = Instant::now();
    if let Err(e) = fs::create_dir_all(&cfg.out) {
        eprintln!("error: cannot create {}: {e}", cfg.out.display());
        return EXIT_USAGE;
    }
    let result = dispatch(cfg);
    let (status, code, body, csvs, extra, summary) = match result {
        Ok(o) => (
            if o.pass { "pass" } else { "fail" },
            if o.pass { EXIT_PASS } else { EXIT_ANALYSIS },
            o.report,
            o.csvs,
            o.extra_files,
            o.summary,
        ),
        Err(e) if e.is_analysis_failure() => (
            "fail",
            EXIT_ANALYSIS,
            json!({ "error": e.to_string() }),
            Vec::new(),
            Vec::new(),
            format!("analysis failed: {e}\n"),
        ),
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let mut report = json!({
        "schema": SCHEMA,
        "command": cfg.command.name(),
        "status": status,
        "n_max": cfg.n_max,
        "tol": cfg.tol,
    });
    if let (Value::Object(dst), Value::Object(src)) = (&mut report, body) {
        dst.extend(src);
    }
    let written = (|| -> Result<Vec<String>> {
        let mut files = vec!["report.json".to_string()];
        write_pretty(&cfg.out.join("report.json"), &report)?;
        for c in &csvs {
            c.write_csv(cfg.out.join(c.file_name()))?;
            files.push(c.file_name());
        }
        for (name, text) in &extra {
            fs::write(cfg.out.join(name), text)?;
            files.push(name.clone());
        }
        let meta = json!({
            "schema": SCHEMA,
            "tool": "rpos",
            "version": env!("CARGO_PKG_VERSION"),
            "command": cfg.command.name(),
            "config": cfg.config.display().to_string(),
            "seed": cfg.seed,
            "tol": cfg.tol,
            "n_max": cfg.n_max,
            "started_unix": unix_seconds(started),
            "elapsed_seconds": clock.elapsed().as_secs_f64(),
            "status": status,
            "exit_code": code,
            "files": files,
        });
        write_pretty(&cfg.out.join("run-metadata.json"), &meta)?;
        Ok(files)
    })();
    if let Err(e) = written {
        eprintln!("error: writing outputs to {}: {e}", cfg.out.display());
        return EXIT_USAGE;
    }
    if !cfg.quiet {
        print!("{summary}");
        println!("outputs in {}", cfg.out.display());
    }
    code
}

/// Parses arguments and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_PASS
            };
            let _ = e.print();
            return code;
        }
    };
    match RunConfig::from_cli(cli) {
        Ok(cfg) => run(&cfg),
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

/// Operator file text with optional analysis inputs, ready for `--config`.
pub fn operator_file(
    p: &TransferOperator,
    psi1: Option<&WeightedFunction>,
    psi2: Option<&WeightedFunction>,
    k: Option<&SubsetMask>,
    n1: Option<usize>,
) -> Result<String> {
    #[derive(Serialize)]
    struct Out<'a> {
        #[serde(flatten)]
        layout: OperatorLayout,
        #[serde(skip_serializing_if = "Option::is_none")]
        psi1: Option<&'a WeightedFunction>,
        #[serde(skip_serializing_if = "Option::is_none")]
        psi2: Option<&'a WeightedFunction>,
        #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
        k: Option<&'a SubsetMask>,
        #[serde(skip_serializing_if = "Option::is_none")]
        n1: Option<usize>,
    }
    Ok(serde_json::to_string_pretty(&Out {
        layout: OperatorLayout::from(p),
        psi1,
        psi2,
        k,
        n1,
    })?)
}
