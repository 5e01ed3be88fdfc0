//! Command-line entry point: Dirac-sea construction, measure evaluation,
//! constrained minimization, the verification suite, and subsequence
//! extraction over measure files.
//!
//! Exit codes: 2 invalid arguments, 3 I/O failure, 4 validation failure,
//! 5 suite failure, 6 non-convergence.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Deserialize;

use homvar::action::{
    evaluation_report, ConstraintMode, ConstraintSet, QuadratureBox,
};
use homvar::error::Error;
use homvar::harness;
use homvar::measure::{extract_convergent_subsequence, AtomicMeasure, NegativeDefiniteMeasure};
use homvar::optimize::{history_csv, minimize, RunConfig, Start};

const EXIT_ARGS: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_VALIDATION: u8 = 4;
const EXIT_SUITE: u8 = 5;
const EXIT_NO_CONVERGENCE: u8 = 6;

#[derive(Parser)]
#[command(
    name = "homvar",
    version,
    about = "Causal variational principle in the homogeneous setting on compact momentum boxes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the discretized Dirac-sea measure on the lower mass shell.
    DiracSea {
        /// Particle mass (inverse length).
        #[arg(long)]
        mass: f64,
        /// Spatial momentum radius of the shell discretization.
        #[arg(long)]
        kmax: f64,
        /// Grid points per spatial axis.
        #[arg(long)]
        nk: usize,
        /// Include the 1/(2π)⁴ Fourier normalization in the weights.
        #[arg(long)]
        two_pi_normalization: bool,
        /// Output measure file (JSON).
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the truncated action, functional T and constraint quantities.
    Evaluate {
        /// Measure file (JSON).
        #[arg(long)]
        measure: PathBuf,
        /// Box half-widths R0,R1,R2,R3.
        #[arg(long = "box")]
        box_spec: String,
        /// Grid points per axis N0,N1,N2,N3.
        #[arg(long)]
        grid: String,
        /// Output report file (JSON).
        #[arg(long)]
        out: PathBuf,
        /// Constraint mode (trace-f | trace-swf | trace-boundedness).
        #[arg(long)]
        mode: Option<String>,
        /// Trace constraint value c.
        #[arg(long)]
        constraint_c: Option<f64>,
        /// Bound f for the trace-f and trace-swf modes.
        #[arg(long)]
        constraint_f: Option<f64>,
        /// Bound C for the trace-boundedness mode.
        #[arg(long)]
        constraint_bound: Option<f64>,
    },
    /// Run the constrained minimization described by a TOML config file.
    Minimize {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the verification suite (all checks or a single lemma id).
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 500)]
        samples: usize,
        /// Write the JSON-lines report here in addition to stdout.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write a CSV summary table here.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Extract a weakly convergent subsequence from a directory of measures.
    Convergence {
        #[arg(long)]
        sequence_dir: PathBuf,
        #[arg(long)]
        tol: f64,
        /// Output file for the limit measure.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("HOMVAR_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

/// Library errors that reach the CLI surface: invalid inputs are validation
/// failures, I/O keeps its own code.
fn lib_error(e: Error) -> Failure {
    match e {
        Error::Io(io) => fail(EXIT_IO, format!("I/O: {io}")),
        other => fail(EXIT_VALIDATION, other.to_string()),
    }
}

fn run(cli: Cli) -> Result<ExitCode, Failure> {
    match cli.command {
        Command::DiracSea {
            mass,
            kmax,
            nk,
            two_pi_normalization,
            out,
        } => dirac_sea(mass, kmax, nk, two_pi_normalization, &out),
        Command::Evaluate {
            measure,
            box_spec,
            grid,
            out,
            mode,
            constraint_c,
            constraint_f,
            constraint_bound,
        } => evaluate(
            &measure,
            &box_spec,
            &grid,
            &out,
            mode.as_deref(),
            constraint_c,
            constraint_f,
            constraint_bound,
        ),
        Command::Minimize { config } => run_minimize(&config),
        Command::Verify {
            suite,
            seed,
            samples,
            report,
            summary,
        } => verify(&suite, seed, samples, report.as_deref(), summary.as_deref()),
        Command::Convergence {
            sequence_dir,
            tol,
            out,
        } => convergence(&sequence_dir, tol, out.as_deref()),
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let tmp = path.with_extension("tmp-write");
    std::fs::write(&tmp, bytes).map_err(|e| fail(EXIT_IO, format!("writing {tmp:?}: {e}")))?;
    std::fs::rename(&tmp, path).map_err(|e| fail(EXIT_IO, format!("renaming to {path:?}: {e}")))
}

fn read_measure(path: &Path) -> Result<NegativeDefiniteMeasure, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| fail(EXIT_IO, format!("reading {path:?}: {e}")))?;
    serde_json::from_str::<NegativeDefiniteMeasure>(&text)
        .map_err(|e| fail(EXIT_VALIDATION, format!("measure {path:?}: {e}")))
}

fn dirac_sea(
    mass: f64,
    kmax: f64,
    nk: usize,
    two_pi: bool,
    out: &Path,
) -> Result<ExitCode, Failure> {
    let grid = homvar::dirac::ShellGrid::new(mass, kmax, nk, two_pi)
        .map_err(|e| fail(EXIT_ARGS, e.to_string()))?;
    let sea = homvar::dirac::build_dirac_sea(&grid).map_err(lib_error)?;
    let total = sea.total();
    let trace = total.trace().re;
    let strace = sea
        .space()
        .signature_matrix()
        .matmul(&total)
        .neg()
        .trace()
        .re;
    let sweight = total.spectral_weight().map_err(lib_error)?;
    let mut bytes = sea.canonical_json().into_bytes();
    bytes.push(b'\n');
    write_atomic(out, &bytes)?;
    println!("atoms {}", sea.natoms());
    println!("trace {trace}");
    println!("straceS {strace}");
    println!("sweight {sweight}");
    println!("wrote {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn parse_quadruple<T: std::str::FromStr>(spec: &str, what: &str) -> Result<[T; 4], Failure>
where
    T: Copy,
{
    let parts: Vec<T> = spec
        .split(',')
        .map(|s| s.trim().parse::<T>())
        .collect::<Result<_, _>>()
        .map_err(|_| fail(EXIT_ARGS, format!("{what} must be four comma-separated values")))?;
    parts
        .try_into()
        .map_err(|_| fail(EXIT_ARGS, format!("{what} must have exactly four components")))
}

fn parse_constraints(
    mode: Option<&str>,
    c: Option<f64>,
    f: Option<f64>,
    bound: Option<f64>,
) -> Result<Option<ConstraintSet>, Failure> {
    let mode = match mode {
        None => {
            if c.is_some() || f.is_some() || bound.is_some() {
                return Err(fail(EXIT_ARGS, "constraint values need --mode"));
            }
            return Ok(None);
        }
        Some(m) => m,
    };
    let mode = parse_mode(mode)?;
    let c = c.ok_or_else(|| fail(EXIT_ARGS, "--mode needs --constraint-c"))?;
    ConstraintSet::new(mode, c, f, bound)
        .map(Some)
        .map_err(|e| fail(EXIT_ARGS, e.to_string()))
}

fn parse_mode(mode: &str) -> Result<ConstraintMode, Failure> {
    match mode {
        "trace-f" => Ok(ConstraintMode::TraceF),
        "trace-swf" => Ok(ConstraintMode::TraceSwf),
        "trace-boundedness" => Ok(ConstraintMode::TraceBoundedness),
        other => Err(fail(
            EXIT_ARGS,
            format!("unknown mode {other}; use trace-f | trace-swf | trace-boundedness"),
        )),
    }
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    measure_path: &Path,
    box_spec: &str,
    grid_spec: &str,
    out: &Path,
    mode: Option<&str>,
    c: Option<f64>,
    f: Option<f64>,
    bound: Option<f64>,
) -> Result<ExitCode, Failure> {
    let half_widths = parse_quadruple::<f64>(box_spec, "--box")?;
    let points = parse_quadruple::<usize>(grid_spec, "--grid")?;
    let qbox = QuadratureBox::new(half_widths, points).map_err(|e| fail(EXIT_ARGS, e.to_string()))?;
    let constraints = parse_constraints(mode, c, f, bound)?;
    let nu = read_measure(measure_path)?;
    let report = evaluation_report(&nu, &qbox, constraints.as_ref()).map_err(lib_error)?;
    let mut bytes = serde_json::to_vec_pretty(&report)
        .map_err(|e| fail(EXIT_VALIDATION, e.to_string()))?;
    bytes.push(b'\n');
    write_atomic(out, &bytes)?;
    println!("S {}", report.outputs.s);
    println!("S_per_volume {}", report.outputs.s_per_volume);
    println!("T {}", report.outputs.t);
    println!("trace {}", report.outputs.trace);
    println!("straceS {}", report.outputs.strace_s);
    println!("sweight {}", report.outputs.sweight);
    if let Some(res) = &report.outputs.residuals {
        println!("residual_trace {}", res.trace);
        println!("residual_inequality {}", res.inequality);
    }
    println!("wrote {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn default_initial_step() -> f64 {
    0.1
}
fn default_step_shrink() -> f64 {
    0.5
}
fn default_step_grow() -> f64 {
    1.5
}
fn default_fd_step() -> f64 {
    1e-5
}
fn default_rho_initial() -> f64 {
    10.0
}
fn default_rho_growth() -> f64 {
    10.0
}
fn default_penalty_epochs() -> usize {
    5
}
fn default_tol_action() -> f64 {
    1e-10
}
fn default_tol_gradient() -> f64 {
    1e-7
}
fn default_tol_residual() -> f64 {
    1e-8
}
fn default_max_iterations() -> usize {
    200
}

#[derive(Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct MinimizeConfigFile {
    initial_measure: PathBuf,
    out_measure: PathBuf,
    out_history: PathBuf,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_max_iterations")]
    max_iterations: usize,
    #[serde(default = "default_initial_step")]
    initial_step: f64,
    #[serde(default = "default_step_shrink")]
    step_shrink: f64,
    #[serde(default = "default_step_grow")]
    step_grow: f64,
    #[serde(default = "default_fd_step")]
    fd_step: f64,
    #[serde(default = "default_rho_initial")]
    rho_initial: f64,
    #[serde(default = "default_rho_growth")]
    rho_growth: f64,
    #[serde(default = "default_penalty_epochs")]
    penalty_epochs: usize,
    #[serde(default = "default_tol_action")]
    tol_action_decrease: f64,
    #[serde(default = "default_tol_gradient")]
    tol_gradient: f64,
    #[serde(default = "default_tol_residual")]
    tol_residual: f64,
    constraints: ConstraintsRepr,
    quadrature: QuadratureRepr,
}

#[derive(Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct ConstraintsRepr {
    mode: String,
    c: f64,
    f: Option<f64>,
    #[serde(rename = "C")]
    c_bound: Option<f64>,
}

#[derive(Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct QuadratureRepr {
    half_widths: [f64; 4],
    points_per_axis: [usize; 4],
}

fn run_minimize(config_path: &Path) -> Result<ExitCode, Failure> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| fail(EXIT_IO, format!("reading {config_path:?}: {e}")))?;
    let file: MinimizeConfigFile = toml::from_str(&text)
        .map_err(|e| fail(EXIT_VALIDATION, format!("config {config_path:?}: {e}")))?;

    let mode = parse_mode(&file.constraints.mode)?;
    let constraints = ConstraintSet::new(mode, file.constraints.c, file.constraints.f, file.constraints.c_bound)
        .map_err(|e| fail(EXIT_VALIDATION, e.to_string()))?;
    let quadrature = QuadratureBox::new(file.quadrature.half_widths, file.quadrature.points_per_axis)
        .map_err(|e| fail(EXIT_VALIDATION, e.to_string()))?;

    let initial = if file.initial_measure.is_absolute() {
        file.initial_measure.clone()
    } else {
        config_path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(&file.initial_measure)
    };
    let nu = read_measure(&initial)?;

    let cfg = RunConfig {
        constraints,
        quadrature,
        max_iterations: file.max_iterations,
        initial_step: file.initial_step,
        step_shrink: file.step_shrink,
        step_grow: file.step_grow,
        fd_step: file.fd_step,
        rho_initial: file.rho_initial,
        rho_growth: file.rho_growth,
        penalty_epochs: file.penalty_epochs,
        tol_action_decrease: file.tol_action_decrease,
        tol_gradient: file.tol_gradient,
        tol_residual: file.tol_residual,
        seed: file.seed,
    };
    let outcome = minimize(Start::Measure(nu), &cfg).map_err(lib_error)?;

    let mut bytes = outcome.measure.canonical_json().into_bytes();
    bytes.push(b'\n');
    write_atomic(&file.out_measure, &bytes)?;
    write_atomic(&file.out_history, history_csv(&outcome.history).as_bytes())?;

    let last = outcome.history.last().expect("history has the initial row");
    println!("iterations {}", last.iteration);
    println!("S {}", last.s);
    println!("T {}", last.t);
    println!("trace {}", last.trace);
    println!("residual_trace {}", outcome.report.residuals.trace);
    println!("residual_inequality {}", outcome.report.residuals.inequality);
    println!("converged {}", outcome.converged);
    println!("wrote {}", file.out_measure.display());
    println!("wrote {}", file.out_history.display());
    if outcome.converged {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(EXIT_NO_CONVERGENCE))
    }
}

fn verify(
    suite: &str,
    seed: u64,
    samples: usize,
    report_path: Option<&Path>,
    summary_path: Option<&Path>,
) -> Result<ExitCode, Failure> {
    let reports = if suite == "all" {
        harness::run_all(seed, samples).map_err(lib_error)?
    } else {
        if !harness::CHECK_IDS.contains(&suite) {
            return Err(fail(
                EXIT_ARGS,
                format!(
                    "unknown suite {suite}; available: all, {}",
                    harness::CHECK_IDS.join(", ")
                ),
            ));
        }
        vec![harness::run_check(suite, seed, samples).map_err(lib_error)?]
    };

    let mut lines = String::new();
    for r in &reports {
        let line = r.canonical_json();
        println!("{line}");
        lines.push_str(&line);
        lines.push('\n');
    }
    if let Some(path) = report_path {
        write_atomic(path, lines.as_bytes())?;
    }
    if let Some(path) = summary_path {
        let mut csv = String::from(harness::CSV_HEADER);
        csv.push('\n');
        for r in &reports {
            csv.push_str(&r.csv_row());
            csv.push('\n');
        }
        write_atomic(path, csv.as_bytes())?;
    }
    let failures: Vec<&str> = reports
        .iter()
        .filter(|r| !r.pass)
        .map(|r| r.lemma.as_str())
        .collect();
    if failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("failed checks: {}", failures.join(", "));
        Ok(ExitCode::from(EXIT_SUITE))
    }
}

fn convergence(dir: &Path, tol: f64, out: Option<&Path>) -> Result<ExitCode, Failure> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| fail(EXIT_IO, format!("reading {dir:?}: {e}")))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|e| e == "json").unwrap_or(false))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(fail(EXIT_VALIDATION, format!("no .json measures in {dir:?}")));
    }
    let measures: Vec<AtomicMeasure> = paths
        .iter()
        .map(|p| read_measure(p).map(|nu| nu.into_atomic()))
        .collect::<Result<_, Failure>>()?;
    let (indices, limit) =
        extract_convergent_subsequence(&measures, tol).map_err(lib_error)?;
    println!(
        "subsequence {}",
        indices
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(",")
    );
    println!("limit_total_variation {}", limit.total_variation());
    if let Some(path) = out {
        let mut bytes = limit.canonical_json().into_bytes();
        bytes.push(b'\n');
        write_atomic(path, &bytes)?;
        println!("wrote {}", path.display());
    }
    if indices.len() < 2 && measures.len() >= 2 {
        eprintln!("no convergent subsequence of length >= 2 within tol {tol}");
        return Ok(ExitCode::from(EXIT_NO_CONVERGENCE));
    }
    Ok(ExitCode::SUCCESS)
}
