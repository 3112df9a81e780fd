//! Command drivers. Every command builds a JSON report (schema "1"), writes it
//! once, and maps the outcome to an exit code: 0 pass, 1 verification
//! failure, 2 usage error, 3 runtime abort.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::conformal::verify_algebra;
use crate::dynamics::{
    bound_start, conserved_report, integrate_partial, time_reversal_error, Kepler, Method,
    StepControl,
};
use crate::poisson::PhasePoint;
use crate::quat::{QVector, Quaternion};
use crate::realization::{
    build_observables, quadratic_residuals, sample_leaf, verify_family, LeafSpec,
    QuadraticResiduals,
};
use crate::rng::stream;
use crate::sternberg::pullback_check;
use crate::Error;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_ABORT: i32 = 3;

pub const SCHEMA: &str = "1";
pub const THREADS_ENV: &str = "HAMILTON_SP1_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "hamilton-sp1",
    version,
    about = "Poisson realization of so*(4n) for the Sp(1)-Kepler problems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Jacobi identity, closure and dimension of the conformal algebra.
    VerifyAlgebra(RunConfig),
    /// The six bracket families of the realization as exact identities.
    VerifyRealization(RunConfig),
    /// Quadratic relations and the energy formula on sampled leaf points.
    VerifyQuadratic(RunConfig),
    /// Pullbacks of the Kepler-cone data to the upstairs phase space.
    VerifyPullback(RunConfig),
    /// Integrates the Kepler flow and monitors the conserved quantities.
    Simulate(RunConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Rk4,
    Midpoint,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Rk4 => Method::Rk4,
            MethodArg::Midpoint => Method::Midpoint,
        }
    }
}

/// Initial condition for `simulate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Start {
    /// Seeded leaf point rescaled to negative energy.
    Bound,
    /// `Z = (1, 0, …)`, `W = −Z/10`: falls straight into the origin (μ = 0 only).
    Radial,
}

#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Level (order of the quaternionic matrices).
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// Magnetic charge.
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Number of random samples.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// Pass threshold; each command has its own default.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, default_value_t = 1e-4)]
    pub dt: f64,
    #[arg(long = "t-end", default_value_t = 10.0)]
    pub t_end: f64,
    #[arg(long, value_enum, default_value_t = MethodArg::Rk4)]
    pub method: MethodArg,
    /// Keep every k-th step of the trajectory.
    #[arg(long, default_value_t = 100)]
    pub stride: usize,
    #[arg(long, value_enum, default_value_t = Start::Bound)]
    pub start: Start,
    /// Report destination; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Trajectory CSV destination for `simulate`.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Algebra,
    Realization,
    Quadratic,
    Pullback,
    Simulate,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Algebra => "verify-algebra",
            Kind::Realization => "verify-realization",
            Kind::Quadratic => "verify-quadratic",
            Kind::Pullback => "verify-pullback",
            Kind::Simulate => "simulate",
        }
    }

    fn default_tol(self) -> f64 {
        match self {
            Kind::Algebra => 1e-10,
            Kind::Realization => 1e-12,
            Kind::Quadratic | Kind::Pullback => 1e-9,
            Kind::Simulate => 1e-8,
        }
    }

    fn min_order(self) -> usize {
        match self {
            Kind::Algebra | Kind::Realization => 1,
            _ => 2,
        }
    }
}

/// Error surfaced by a command, before any output is written.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Abort(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Abort(e.to_string())
    }
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Abort(_) => EXIT_ABORT,
        }
    }
}

/// Finished command: the main output text, optional side files and the exit code.
#[derive(Debug)]
pub struct Outcome {
    pub code: i32,
    pub body: String,
    pub files: Vec<(PathBuf, String)>,
    pub diagnostic: Option<String>,
}

#[derive(Serialize)]
struct Check {
    name: String,
    checked: usize,
    max_residual: f64,
    pass: bool,
}

fn check(name: &str, checked: usize, max_residual: f64, tol: f64) -> Check {
    Check {
        name: name.to_string(),
        checked,
        max_residual,
        pass: max_residual < tol,
    }
}

fn validate(kind: Kind, cfg: &RunConfig) -> Result<f64, CliError> {
    let usage = |m: String| Err(CliError::Usage(m));
    if cfg.n < kind.min_order() {
        return usage(format!(
            "{} needs --n >= {}, got {}",
            kind.name(),
            kind.min_order(),
            cfg.n
        ));
    }
    if !cfg.mu.is_finite() || cfg.mu < 0.0 {
        return usage(format!("--mu must be a finite real >= 0, got {}", cfg.mu));
    }
    let tol = cfg.tol.unwrap_or(kind.default_tol());
    if !tol.is_finite() || tol <= 0.0 {
        return usage(format!("--tol must be a positive real, got {tol}"));
    }
    if kind == Kind::Simulate {
        if !cfg.dt.is_finite() || cfg.dt <= 0.0 {
            return usage(format!("--dt must be positive, got {}", cfg.dt));
        }
        if !cfg.t_end.is_finite() || cfg.t_end < 0.0 {
            return usage(format!("--t-end must be >= 0, got {}", cfg.t_end));
        }
        if cfg.stride == 0 {
            return usage("--stride must be >= 1".into());
        }
        if cfg.start == Start::Radial && cfg.mu != 0.0 {
            return usage("--start radial lies on the leaf mu = 0".into());
        }
    } else if cfg.trajectory.is_some() {
        return usage("--trajectory only applies to simulate".into());
    }
    Ok(tol)
}

fn header(kind: Kind, cfg: &RunConfig, tol: f64) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("schema".into(), json!(SCHEMA));
    m.insert("command".into(), json!(kind.name()));
    m.insert("n".into(), json!(cfg.n));
    m.insert("seed".into(), json!(cfg.seed));
    m.insert("tol".into(), json!(tol));
    m
}

fn render_checks(cfg: &RunConfig, report: Value, checks: &[Check]) -> String {
    match cfg.format {
        Format::Json => pretty(&report),
        Format::Csv => {
            let mut s = String::from("name,checked,max_residual,pass\n");
            for c in checks {
                s.push_str(&format!(
                    "\"{}\",{},{:e},{}\n",
                    c.name, c.checked, c.max_residual, c.pass
                ));
            }
            s
        }
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report is valid JSON");
    s.push('\n');
    s
}

fn finish(
    cfg: &RunConfig,
    mut report: serde_json::Map<String, Value>,
    checks: Vec<Check>,
) -> Outcome {
    let pass = checks.iter().all(|c| c.pass);
    report.insert(
        "checks".into(),
        serde_json::to_value(&checks).expect("serializable"),
    );
    report.insert("pass".into(), json!(pass));
    Outcome {
        code: if pass { EXIT_PASS } else { EXIT_FAIL },
        body: render_checks(cfg, Value::Object(report), &checks),
        files: Vec::new(),
        diagnostic: None,
    }
}

pub fn cmd_verify_algebra(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let tol = validate(Kind::Algebra, cfg)?;
    let mut rng = stream(cfg.seed, Kind::Algebra.name());
    let r = verify_algebra(cfg.n, cfg.samples, tol, &mut rng)?;
    let mut report = header(Kind::Algebra, cfg, tol);
    report.insert("dim".into(), json!(r.dim));
    report.insert("expected_dim".into(), json!(r.expected_dim));
    report.insert("structure_rank".into(), json!(r.structure_rank));
    let mut checks: Vec<Check> = r
        .checks
        .iter()
        .map(|c| Check {
            name: c.name.clone(),
            checked: c.checked,
            max_residual: c.max_residual,
            pass: c.pass,
        })
        .collect();
    checks.push(Check {
        name: "dimension".into(),
        checked: 1,
        max_residual: r.dim.abs_diff(r.expected_dim) as f64,
        pass: r.dim == r.expected_dim,
    });
    Ok(finish(cfg, report, checks))
}

pub fn cmd_verify_realization(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let tol = validate(Kind::Realization, cfg)?;
    let fam = build_observables(cfg.n)?;
    let r = verify_family(&fam, tol);
    let report = header(Kind::Realization, cfg, tol);
    let checks = r
        .families
        .iter()
        .map(|f| Check {
            name: f.name.clone(),
            checked: f.checked,
            max_residual: f.max_residual,
            pass: f.pass,
        })
        .collect();
    Ok(finish(cfg, report, checks))
}

/// Names of the gated identities, in report order.
pub const QUADRATIC_IDENTITIES: [&str; 8] = [
    "primary",
    "secondary (i)",
    "secondary (ii)",
    "secondary (iii)",
    "secondary (iv)",
    "secondary (v)",
    "secondary (vi)",
    "energy formula",
];

pub fn cmd_verify_quadratic(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let tol = validate(Kind::Quadratic, cfg)?;
    let spec = LeafSpec::new(cfg.n, cfg.mu)?;
    let fam = build_observables(cfg.n)?;
    let mut rng = stream(cfg.seed, Kind::Quadratic.name());
    let mut worst = QuadraticResiduals::zero();
    for _ in 0..cfg.samples {
        let p = sample_leaf(spec, &mut rng);
        worst = worst.max_with(&quadratic_residuals(&fam, &p)?);
    }
    let values = [
        worst.primary,
        worst.secondary[0],
        worst.secondary[1],
        worst.secondary[2],
        worst.secondary[3],
        worst.secondary[4],
        worst.secondary[5],
        worst.energy,
    ];
    let checks = QUADRATIC_IDENTITIES
        .iter()
        .zip(values)
        .map(|(name, v)| check(name, cfg.samples, v, tol))
        .collect();
    let mut report = header(Kind::Quadratic, cfg, tol);
    report.insert("mu".into(), json!(cfg.mu));
    // corrected forms of (vi) and of the energy formula; reported, not gated
    let derived = vec![
        check(
            "angular square sum (derived)",
            cfg.samples,
            worst.angular_square,
            tol,
        ),
        check(
            "energy formula (derived)",
            cfg.samples,
            worst.energy_derived,
            tol,
        ),
    ];
    report.insert(
        "derived".into(),
        serde_json::to_value(&derived).expect("serializable"),
    );
    Ok(finish(cfg, report, checks))
}

pub fn cmd_verify_pullback(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let tol = validate(Kind::Pullback, cfg)?;
    let spec = LeafSpec::new(cfg.n, cfg.mu)?;
    let fam = build_observables(cfg.n)?;
    let mut rng = stream(cfg.seed, Kind::Pullback.name());
    let (mut position, mut kinetic) = (0.0f64, 0.0f64);
    for _ in 0..cfg.samples {
        let p = sample_leaf(spec, &mut rng);
        let r = pullback_check(p.z(), p.w(), fam.basis())?;
        position = position.max(r.position);
        kinetic = kinetic.max(r.kinetic);
    }
    let mut report = header(Kind::Pullback, cfg, tol);
    report.insert("mu".into(), json!(cfg.mu));
    let checks = vec![
        check("position pullback", cfg.samples, position, tol),
        check("kinetic pullback", cfg.samples, kinetic, tol),
    ];
    Ok(finish(cfg, report, checks))
}

fn radial_start(n: usize) -> PhasePoint {
    let z = QVector::unit(n, 0, Quaternion::ONE);
    PhasePoint::new(z.clone(), z.scale(-0.1)).expect("Z = e_0")
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let tol = validate(Kind::Simulate, cfg)?;
    let spec = LeafSpec::new(cfg.n, cfg.mu)?;
    let fam = build_observables(cfg.n)?;
    let p0 = match cfg.start {
        Start::Bound => bound_start(spec, &mut stream(cfg.seed, Kind::Simulate.name())),
        Start::Radial => radial_start(cfg.n),
    };
    let ctl = StepControl::new(cfg.method.into(), cfg.dt, cfg.t_end)?.with_stride(cfg.stride);
    let h = Kepler::default();
    let (mut tr, err) = integrate_partial(&h, &p0, ctl);
    tr.meta.seed = Some(cfg.seed);
    let conserved = conserved_report(&tr, fam.basis())?;

    let mut report = header(Kind::Simulate, cfg, tol);
    report.insert("mu".into(), json!(cfg.mu));
    report.insert(
        "trajectory".into(),
        serde_json::to_value(&tr.meta).expect("serializable"),
    );
    report.insert(
        "initial_condition".into(),
        serde_json::to_value(&p0).expect("serializable"),
    );
    report.insert(
        "last_time".into(),
        json!(tr.samples.last().map(|s| s.0).unwrap_or(0.0)),
    );

    let csv = tr.to_csv();
    let mut files = Vec::new();
    if let Some(path) = &cfg.trajectory {
        files.push((path.clone(), csv.clone()));
    }

    let (code, diagnostic) = match err {
        Some(e) => {
            let msg = e.to_string();
            report.insert("status".into(), json!("aborted"));
            report.insert("diagnostic".into(), json!(msg));
            report.insert(
                "conserved".into(),
                serde_json::to_value(&conserved).expect("serializable"),
            );
            report.insert("pass".into(), json!(false));
            (EXIT_ABORT, Some(msg))
        }
        None => {
            let reversal = time_reversal_error(&h, &p0, ctl)?;
            let drift = conserved.max_drift();
            let pass = drift < tol && reversal < tol;
            report.insert("status".into(), json!("completed"));
            report.insert("time_reversal_error".into(), json!(reversal));
            report.insert("max_drift".into(), json!(drift));
            report.insert(
                "energy_relation_pass".into(),
                json!(conserved.energy_relation_residual_max < tol),
            );
            report.insert(
                "energy_relation_derived_pass".into(),
                json!(conserved.energy_relation_derived_residual_max < tol),
            );
            report.insert(
                "conserved".into(),
                serde_json::to_value(&conserved).expect("serializable"),
            );
            report.insert("pass".into(), json!(pass));
            (if pass { EXIT_PASS } else { EXIT_FAIL }, None)
        }
    };
    let body = match cfg.format {
        Format::Json => pretty(&Value::Object(report)),
        Format::Csv => csv,
    };
    Ok(Outcome {
        code,
        body,
        files,
        diagnostic,
    })
}

/// Writes `contents` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        match v.trim().parse::<usize>() {
            Ok(k) if k > 0 => b = b.num_threads(k),
            _ => {
                return Err(CliError::Usage(format!(
                    "{THREADS_ENV} must be a positive integer, got {v:?}"
                )))
            }
        }
    }
    b.build().map_err(|e| CliError::Abort(e.to_string()))
}

/// Runs one command and writes its outputs. Returns the exit code.
pub fn run(cli: Cli) -> i32 {
    let started = Instant::now();
    let (kind, cfg) = match &cli.command {
        Command::VerifyAlgebra(c) => (Kind::Algebra, c),
        Command::VerifyRealization(c) => (Kind::Realization, c),
        Command::VerifyQuadratic(c) => (Kind::Quadratic, c),
        Command::VerifyPullback(c) => (Kind::Pullback, c),
        Command::Simulate(c) => (Kind::Simulate, c),
    };
    let result = thread_pool().and_then(|pool| {
        pool.install(|| match kind {
            Kind::Algebra => cmd_verify_algebra(cfg),
            Kind::Realization => cmd_verify_realization(cfg),
            Kind::Quadratic => cmd_verify_quadratic(cfg),
            Kind::Pullback => cmd_verify_pullback(cfg),
            Kind::Simulate => cmd_simulate(cfg),
        })
    });
    let out = match result {
        Ok(o) => o,
        Err(e) => {
            let msg = match &e {
                CliError::Usage(m) => format!("error: {m}"),
                CliError::Abort(m) => format!("aborted: {m}"),
            };
            eprintln!("{msg}");
            return e.code();
        }
    };
    for (path, contents) in &out.files {
        if let Err(e) = write_atomic(path, contents) {
            eprintln!("aborted: cannot write {}: {e}", path.display());
            return EXIT_ABORT;
        }
    }
    match &cfg.output {
        Some(path) => {
            if let Err(e) = write_atomic(path, &out.body) {
                eprintln!("aborted: cannot write {}: {e}", path.display());
                return EXIT_ABORT;
            }
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            if stdout
                .write_all(out.body.as_bytes())
                .and_then(|_| stdout.flush())
                .is_err()
            {
                return EXIT_ABORT;
            }
        }
    }
    if let Some(d) = &out.diagnostic {
        eprintln!("aborted: {d}");
    }
    eprintln!(
        "{}: runtime {:.3} s",
        kind.name(),
        started.elapsed().as_secs_f64()
    );
    out.code
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_PASS
            };
            let _ = e.print();
            code
        }
    }
}
