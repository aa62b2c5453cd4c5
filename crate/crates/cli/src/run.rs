//! Command dispatch and report serialization.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use csh_core::constraint::{self, admissible, residuals, ConstraintError};
use csh_core::diagnostics::{asymptotic_sweep, check_necessary, NecessaryCheck, Sweep};
use csh_core::lie_cartan::{cartan_matrix, certify_matrix, CartanData, Certificate, Check};
use csh_core::torus::{write_binary, write_csv, FieldError};
use csh_core::{
    AlgebraSpec, ConstraintInput, Problem, Seed, Solution, SolveError, SolveReport, Spectral, Termination,
};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::config::{ConfigError, FieldFormat, RunConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Catalog,
    CheckCartan,
    Constraints,
    Solve,
    Sweep,
}

/// Process exit statuses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitKind {
    Other = 1,
    Parse = 2,
    NecessaryCondition = 3,
    Inadmissible = 4,
    NonConvergence = 5,
    Validation = 6,
}

impl ExitKind {
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn tag(self) -> &'static str {
        match self {
            ExitKind::Other => "other",
            ExitKind::Parse => "parse",
            ExitKind::NecessaryCondition => "necessary_condition",
            ExitKind::Inadmissible => "inadmissible",
            ExitKind::NonConvergence => "non_convergence",
            ExitKind::Validation => "validation",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub message: String,
}

impl CliError {
    pub fn new(kind: ExitKind, message: impl Into<String>) -> Self {
        CliError {
            kind,
            message: message.into(),
        }
    }
}

/// `error kind=<tag> code=<n> message="<escaped>"` on one line.
impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error kind={} code={} message={:?}", self.kind.tag(), self.kind.code(), self.message)
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::new(ExitKind::Parse, e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new(ExitKind::Other, e.to_string())
    }
}

fn constraint_kind(e: &ConstraintError) -> ExitKind {
    match e {
        ConstraintError::Inadmissible { .. } | ConstraintError::Infeasible { .. } | ConstraintError::QTildeIndefinite => {
            ExitKind::Inadmissible
        }
        ConstraintError::NonConvergence(_) | ConstraintError::NoSignChange(_) => ExitKind::NonConvergence,
        ConstraintError::NotSu4 | ConstraintError::NotScalar(_) | ConstraintError::Malformed(_) => ExitKind::Parse,
    }
}

impl From<ConstraintError> for CliError {
    fn from(e: ConstraintError) -> Self {
        CliError::new(constraint_kind(&e), e.to_string())
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        let kind = match &e {
            SolveError::NecessaryCondition { .. } => ExitKind::NecessaryCondition,
            SolveError::InadmissibleSeed { .. } => ExitKind::Inadmissible,
            SolveError::Constraint(c) => constraint_kind(c),
            SolveError::Field(FieldError::Range { .. }) | SolveError::Seed(_) => ExitKind::NonConvergence,
            SolveError::Field(FieldError::Io(_)) => ExitKind::Other,
            SolveError::Field(_) | SolveError::Config(_) => ExitKind::Parse,
            SolveError::Cartan(_) => ExitKind::Validation,
        };
        CliError::new(kind, e.to_string())
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    /// Overrides `output.dir`.
    pub out_dir: Option<PathBuf>,
    pub verbose: bool,
}

impl RunOptions {
    fn dir(&self, cfg: &RunConfig) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir))
    }
}

/// A report: the resolved configuration followed by the results.
#[derive(Serialize)]
struct Document<'a, R: Serialize, T: Serialize> {
    config: &'a RunConfig,
    resolved: R,
    report: T,
}

fn document<R: Serialize, T: Serialize>(cfg: &RunConfig, resolved: R, report: T) -> Result<String, CliError> {
    toml::to_string(&Document {
        config: cfg,
        resolved,
        report,
    })
    .map_err(|e| CliError::new(ExitKind::Other, format!("serializing report: {e}")))
}

fn cartan(cfg: &RunConfig) -> Result<CartanData, CliError> {
    let spec = cfg.algebra_spec()?;
    CartanData::validated(&cartan_matrix(&spec).map_err(|e| CliError::new(ExitKind::Validation, e.to_string()))?)
        .map_err(|e| CliError::new(ExitKind::Validation, e.to_string()))
}

/// Run one command; reports go to `stdout` or into the output directory.
pub fn run(command: Command, cfg: &RunConfig, opts: &RunOptions, stdout: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Catalog => catalog(cfg, stdout),
        Command::CheckCartan => check_cartan(cfg, stdout),
        Command::Constraints => constraints(cfg, stdout),
        Command::Solve => solve(cfg, opts, stdout),
        Command::Sweep => sweep(cfg, opts, stdout),
    }
}

fn certificate(spec: &AlgebraSpec) -> Certificate {
    match cartan_matrix(spec) {
        Ok(k) => certify_matrix(&k).with_label(spec.label()),
        Err(e) => Certificate {
            label: spec.label(),
            matrix: match spec {
                AlgebraSpec::Explicit(m) => m.clone(),
                AlgebraSpec::Simple { .. } => Vec::new(),
            },
            checks: vec![Check {
                name: "cartan_matrix".into(),
                passed: false,
                witness: e.to_string(),
            }],
        },
    }
}

#[derive(Serialize)]
struct Nothing {}

#[derive(Serialize)]
struct CertificateList {
    passed: bool,
    certificates: Vec<Certificate>,
}

fn emit_certificates(cfg: &RunConfig, certs: Vec<Certificate>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let failed: Vec<String> = certs.iter().filter(|c| !c.passed()).map(|c| c.label.clone()).collect();
    let body = CertificateList {
        passed: failed.is_empty(),
        certificates: certs,
    };
    write!(stdout, "{}", document(cfg, Nothing {}, body)?)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::new(ExitKind::Validation, format!("certificate failed for {}", failed.join(", "))))
    }
}

fn catalog(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let certs = cfg
        .catalog
        .types
        .iter()
        .map(|label| label.parse::<AlgebraSpec>().map(|s| certificate(&s)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::new(ExitKind::Parse, e.to_string()))?;
    emit_certificates(cfg, certs, stdout)
}

fn check_cartan(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let spec = cfg.algebra_spec()?;
    emit_certificates(cfg, vec![certificate(&spec)], stdout)
}

#[derive(Serialize)]
struct ConstraintResolved {
    area: f64,
    lambda: f64,
    lambda0: f64,
    b: Vec<f64>,
}

#[derive(Serialize)]
struct ConstraintReport {
    necessary: NecessaryCheck,
    admissible: bool,
    margins: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    solution: Option<ConstraintSolved>,
}

#[derive(Serialize)]
struct ConstraintSolved {
    method: constraint::Method,
    iterations: usize,
    t: Vec<f64>,
    c: Vec<f64>,
    residuals: Vec<f64>,
    max_residual: f64,
    box_margin: f64,
    within_box: bool,
}

fn constraints(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let data = cartan(cfg)?;
    let spec = cfg
        .constraints
        .as_ref()
        .ok_or_else(|| ConfigError::Key {
            key: "constraints".into(),
            reason: "missing".into(),
        })?;
    let n = data.rank();
    let area = spec.area.unwrap_or(cfg.domain.l1 * cfg.domain.l2);
    let lambda0 = data.lambda_threshold(&spec.n, area);
    let lambda = cfg.single_lambda(lambda0)?;
    let b: Vec<f64> = data.vortex_vector_b(&spec.n).iter().map(|x| x.value()).collect();
    let numeric = data.numeric();
    let input = ConstraintInput::new(
        &numeric,
        DVector::from_column_slice(&spec.a),
        DMatrix::from_fn(n, n, |i, j| spec.a_matrix[i][j]),
        DVector::from_column_slice(&b),
        lambda,
        area,
    )?;
    let margins = admissible(&input);
    let outcome = constraint::solve(&input, cfg.constraint_method);
    let report = ConstraintReport {
        necessary: check_necessary(lambda, &data, &spec.n, area),
        admissible: constraint::is_admissible(&margins),
        margins,
        error: outcome.as_ref().err().map(ToString::to_string),
        solution: outcome.as_ref().ok().map(|s| {
            let r = residuals(&input, &s.t);
            ConstraintSolved {
                method: s.method,
                iterations: s.iterations,
                t: s.t.iter().copied().collect(),
                c: s.c.iter().copied().collect(),
                residuals: r.iter().copied().collect(),
                max_residual: s.residual,
                box_margin: s.box_margin,
                within_box: s.within_box(),
            }
        }),
    };
    let resolved = ConstraintResolved {
        area,
        lambda,
        lambda0,
        b,
    };
    write!(stdout, "{}", document(cfg, resolved, report)?)?;
    outcome.map(|_| ()).map_err(CliError::from)
}

fn problem(cfg: &RunConfig, lambda: Option<f64>) -> Result<(Problem, f64), CliError> {
    let data = cartan(cfg)?;
    let grid = cfg.torus()?;
    let vc = cfg.vortex_configuration(data.rank())?;
    let lambda0 = data.lambda_threshold(&vc.counts(), grid.area());
    let lambda = match lambda {
        Some(l) => l,
        None => cfg.single_lambda(lambda0)?,
    };
    let p = Problem::new(data, Spectral::new(grid), &vc, cfg.sigma(), lambda)?.with_method(cfg.constraint_method);
    Ok((p, lambda0))
}

fn gate(lambda: f64, lambda0: f64) -> Result<(), CliError> {
    if lambda > lambda0 {
        Ok(())
    } else {
        Err(SolveError::NecessaryCondition { lambda, lambda0 }.into())
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::new(ExitKind::Other, format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::new(ExitKind::Other, format!("{}: {e}", dir.display())))
}

#[derive(Serialize)]
struct SolveResolved {
    lambda: f64,
    lambda0: f64,
    area: f64,
    counts: Vec<u32>,
    seed_used: Seed,
}

fn dump_fields(dir: &Path, format: FieldFormat, solution: &Solution) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    for (i, v) in solution.v().iter().enumerate() {
        let path = match format {
            FieldFormat::None => return Ok(written),
            FieldFormat::Csv => dir.join(format!("v_{}.csv", i + 1)),
            FieldFormat::Binary => dir.join(format!("v_{}.bin", i + 1)),
        };
        let out = BufWriter::new(File::create(&path)?);
        match format {
            FieldFormat::Csv => write_csv(v, out),
            _ => write_binary(v, out),
        }
        .map_err(|e| CliError::new(ExitKind::Other, format!("{}: {e}", path.display())))?;
        written.push(path);
    }
    Ok(written)
}

fn termination_error(t: &Termination) -> Option<CliError> {
    match t {
        Termination::Converged => None,
        Termination::LambdaTooSmall { margins } => Some(CliError::new(
            ExitKind::Inadmissible,
            format!("descent trapped at the admissibility boundary (margins {margins:?})"),
        )),
        other => Some(CliError::new(ExitKind::NonConvergence, format!("descent ended with {other:?}"))),
    }
}

fn solve(cfg: &RunConfig, opts: &RunOptions, stdout: &mut dyn Write) -> Result<(), CliError> {
    let (p, lambda0) = problem(cfg, None)?;
    gate(p.lambda(), lambda0)?;
    let solution = csh_core::minimize(&p, &cfg.solver())?;
    if opts.verbose {
        let stride = (solution.history.len() / 20).max(1);
        for (k, rec) in solution.history.iter().enumerate().step_by(stride) {
            eprintln!("iter {k:>6}  J = {:.12e}  |grad| = {:.3e}  step = {:.3e}", rec.j, rec.grad_norm, rec.step);
        }
    }
    let report = SolveReport::build(&p, &solution, &cfg.tolerances);
    let resolved = SolveResolved {
        lambda: p.lambda(),
        lambda0,
        area: p.area(),
        counts: p.counts().to_vec(),
        seed_used: solution.seed,
    };
    let dir = opts.dir(cfg);
    create_dir(&dir)?;
    let path = dir.join("solve_report.toml");
    write_file(&path, &document(cfg, resolved, &report)?)?;
    let fields = dump_fields(&dir, cfg.output.fields, &solution)?;
    writeln!(
        stdout,
        "solve converged={} iterations={} J={:e} checks_passed={} report={}",
        report.converged,
        report.iterations,
        report.functional_j,
        report.all_passed(),
        path.display()
    )?;
    for f in fields {
        writeln!(stdout, "field {}", f.display())?;
    }
    termination_error(&solution.termination).map_or(Ok(()), Err)
}

#[derive(Serialize)]
struct SweepResolved {
    lambda0: f64,
    lambdas: Vec<f64>,
}

fn sweep_csv(rank: usize, sweep: &Sweep) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["lambda".to_string(), "J".to_string()];
    header.extend((1..=rank).map(|i| format!("d_{i}")));
    header.extend((1..=rank).map(|i| format!("quantized_rel_err_{i}")));
    header.extend(["iterations".to_string(), "converged".to_string()]);
    w.write_record(&header).map_err(|e| CliError::new(ExitKind::Other, e.to_string()))?;
    for pt in &sweep.points {
        let mut row = vec![pt.lambda.to_string(), pt.functional_j.map(|j| j.to_string()).unwrap_or_default()];
        for list in [&pt.asymptotic_distance, &pt.quantized_error] {
            row.extend((0..rank).map(|i| list.get(i).map(ToString::to_string).unwrap_or_default()));
        }
        row.push(pt.iterations.to_string());
        row.push(pt.converged.to_string());
        w.write_record(&row).map_err(|e| CliError::new(ExitKind::Other, e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::new(ExitKind::Other, e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn sweep(cfg: &RunConfig, opts: &RunOptions, stdout: &mut dyn Write) -> Result<(), CliError> {
    let (probe, lambda0) = problem(cfg, Some(1.0))?;
    let mut lambdas = cfg.sweep_lambdas(lambda0)?;
    lambdas.sort_by(f64::total_cmp);
    gate(lambdas[0], lambda0)?;
    let p = probe.with_lambda(lambdas[0])?;
    let result = asymptotic_sweep(&p, &lambdas, &cfg.solver(), &cfg.tolerances);
    if opts.verbose {
        for pt in &result.points {
            eprintln!(
                "lambda = {:.6e}  converged = {}  iterations = {}  d = {:?}",
                pt.lambda, pt.converged, pt.iterations, pt.asymptotic_distance
            );
        }
    }
    let dir = opts.dir(cfg);
    create_dir(&dir)?;
    let csv_path = dir.join("sweep.csv");
    write_file(&csv_path, &sweep_csv(p.rank(), &result)?)?;
    let report_path = dir.join("sweep_report.toml");
    let resolved = SweepResolved {
        lambda0,
        lambdas: lambdas.clone(),
    };
    write_file(&report_path, &document(cfg, resolved, &result)?)?;
    let failed = result.points.iter().filter(|pt| !pt.converged).count();
    writeln!(
        stdout,
        "sweep points={} converged={} decreasing={:?} below_threshold={:?} csv={} report={}",
        result.points.len(),
        result.points.len() - failed,
        result.decreasing,
        result.below_threshold,
        csv_path.display(),
        report_path.display()
    )?;
    if failed > 0 {
        return Err(CliError::new(ExitKind::NonConvergence, format!("{failed} sweep points did not converge")));
    }
    Ok(())
}
