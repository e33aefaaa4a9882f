//! Command-line front end: load -> transform -> Lanczos -> count -> report.
//!
//! Exit codes are part of the contract so validation pipelines can script
//! against them: 0 success (and count MATCH when an interval is given),
//! 2 usage, 3 shift or endpoint on the spectrum, 4 count mismatch,
//! 5 iteration limit, 1 any other error.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use rand::RngExt;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::counting::{self, Verdict};
use crate::error::{Error, Result};
use crate::lanczos::{self, LanczosOptions, Target};
use crate::matio::{
    self, read_basis, read_matrix_market, write_basis, write_matrix_market, BasisColumns,
    CountRecord, EigenpairRecord, ProblemBundle, SolveReport, TAU_RANK,
};
use crate::problems::{self, DemoInner};
use crate::transform::{
    build_operator, default_scaling, DensePencil, MatvecMethod, OperatorConfig,
    RegularizedInnerProduct,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SINGULAR_SHIFT: i32 = 3;
pub const EXIT_COUNT_MISMATCH: i32 = 4;
pub const EXIT_ITERATION_LIMIT: i32 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "buckling",
    about = "Shift-invert Lanczos eigensolver for singular symmetric buckling pencils",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute eigenpairs near a shift and validate them against the
    /// inertia count when an interval is given.
    Solve(SolveArgs),
    /// Count pencil eigenvalues in an interval by matrix inertias.
    Count(CountArgs),
    /// Reduce a pencil to its canonical block form.
    Canonical(CanonicalArgs),
    /// Generate synthetic pencils with known spectra.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Reproduce the Lanczos-vector norm-growth comparison.
    Demo(DemoArgs),
}

#[derive(Debug, Args)]
struct BundleArgs {
    /// Stiffness matrix K (Matrix Market, coordinate symmetric real).
    #[arg(long)]
    k: PathBuf,
    /// Geometric stiffness matrix K_G.
    #[arg(long)]
    kg: PathBuf,
    /// Basis of the nullspace of K outside the common nullspace
    /// (Matrix Market dense array).
    #[arg(long)]
    zn: Option<PathBuf>,
    /// Basis of the common nullspace of K and K_G.
    #[arg(long)]
    zc: Option<PathBuf>,
}

/// Solver configuration; defaults follow the practical settings (tolerance
/// 1e-6, pivot threshold 0.1).
#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    bundle: BundleArgs,
    /// Nonzero shift around which eigenvalues are sought.
    #[arg(long, allow_negative_numbers = true)]
    shift: f64,
    /// Validation interval "a,b"; the count of eigenvalues inside it is
    /// compared against the converged pairs.
    #[arg(long, value_parser = parse_interval)]
    interval: Option<(f64, f64)>,
    /// Number of eigenpairs requested (ignored when an interval is given).
    #[arg(long, default_value_t = 6)]
    nev: usize,
    #[arg(long, default_value_t = lanczos::DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = lanczos::DEFAULT_MAXIT)]
    maxit: usize,
    /// Matrix-vector product realization: augmented | reduced.
    #[arg(long, default_value = "reduced")]
    method: MatvecMethod,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write the per-iteration trace CSV here.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CountArgs {
    #[command(flatten)]
    bundle: BundleArgs,
    /// Interval "a,b"; one endpoint may be 0.
    #[arg(long, value_parser = parse_interval)]
    interval: (f64, f64),
    #[arg(long, default_value = "reduced")]
    method: MatvecMethod,
}

#[derive(Debug, Args)]
struct CanonicalArgs {
    /// A-side matrix of the pencil A - lambda B.
    #[arg(long)]
    k: PathBuf,
    /// B-side matrix (must be positive semi-definite unless --reverse).
    #[arg(long)]
    kg: PathBuf,
    /// Reduce the reversed pencil (A = K_G, B = K); the natural direction
    /// for buckling pencils where K is the semi-definite side.
    #[arg(long)]
    reverse: bool,
    /// Relative rank cutoff inside the reduction.
    #[arg(long, default_value_t = crate::canonical::TAU_RANK)]
    tol: f64,
}

#[derive(Debug, Subcommand)]
enum GenCommand {
    /// Regular pencil with eigenvalues (-1)^k * k.
    Example1 {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for K.mtx, KG.mtx, ZN.mtx, ZC.mtx, truth.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Singular pencil with planted finite eigenvalues 1/lambda1[i].
    Singular {
        #[arg(long)]
        n1: usize,
        #[arg(long)]
        n2: usize,
        #[arg(long)]
        n3: usize,
        /// Comma-separated diagonal of Lambda1# (length n1).
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        lambda1: Vec<f64>,
        /// Comma-separated diagonal of Lambda2# (length n2, nonzero);
        /// omit when n2 = 0.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        lambda2: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct DemoArgs {
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    m: usize,
    #[arg(long, default_value_t = -0.6, allow_negative_numbers = true)]
    shift: f64,
    #[arg(long, default_value_t = 40)]
    steps: usize,
    /// Inner product: k (semi-inner failure mode) | m (regularized).
    #[arg(long)]
    inner: String,
    /// Apply one implicit restart (zero-shift purge) at this step.
    #[arg(long)]
    restart: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the per-iteration trace CSV here.
    #[arg(long)]
    trace: Option<PathBuf>,
}

fn parse_interval(s: &str) -> std::result::Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected \"a,b\", got {s:?}"));
    }
    let a: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|_| format!("bad interval endpoint {:?}", parts[0]))?;
    let b: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|_| format!("bad interval endpoint {:?}", parts[1]))?;
    Ok((a, b))
}

/// Parses the arguments and runs the requested command, returning the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Count(args) => cmd_count(args),
        Command::Canonical(args) => cmd_canonical(args),
        Command::Gen(args) => cmd_gen(args),
        Command::Demo(args) => cmd_demo(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::SingularShift { .. } | Error::AlphaOnSpectrum { .. } => EXIT_SINGULAR_SHIFT,
        Error::ShiftIsZero | Error::InvalidParameter(_) => EXIT_USAGE,
        _ => EXIT_ERROR,
    }
}

fn load_bundle(args: &BundleArgs) -> Result<ProblemBundle> {
    let k = read_matrix_market(&args.k)?;
    let kg = read_matrix_market(&args.kg)?;
    let n = k.dim();
    let zn = match &args.zn {
        Some(path) => read_basis(path, n, TAU_RANK)?,
        None => BasisColumns::empty(n),
    };
    let zc = match &args.zc {
        Some(path) => read_basis(path, n, TAU_RANK)?,
        None => BasisColumns::empty(n),
    };
    let bundle = ProblemBundle::new(k, kg, zn, zc)?;
    let report = matio::validate_bundle(&bundle, matio::TAU_NULL);
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }
    if !report.pass {
        let worst = report
            .checks
            .iter()
            .map(|c| c.k_ratio)
            .fold(0.0f64, f64::max);
        eprintln!(
            "warning: nullspace bases fail the K residual check (worst ratio {worst:.3e}); \
             results may be unreliable"
        );
    }
    Ok(bundle)
}

fn emit_json<T: Serialize>(value: &T, path: Option<&PathBuf>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn cmd_solve(args: SolveArgs) -> Result<i32> {
    if args.shift == 0.0 {
        return Err(Error::ShiftIsZero);
    }
    if args.nev == 0 {
        return Err(Error::InvalidParameter("nev must be at least 1".into()));
    }
    if let Some((a, b)) = args.interval {
        if a >= b {
            return Err(Error::InvalidParameter(format!(
                "degenerate interval ({a}, {b})"
            )));
        }
    }
    let bundle = load_bundle(&args.bundle)?;
    let pencil = DensePencil::from_bundle(&bundle)?;
    let cfg = OperatorConfig::default();
    let op = build_operator(&pencil, args.shift, args.method, &cfg)?;
    let (hn, hc) = default_scaling(&pencil)?;
    let m = RegularizedInnerProduct::new(&pencil, hn, hc)?;

    // counting first fixes the number of pairs the iteration must deliver
    let count_report = match args.interval {
        Some((a, b)) => Some(count_any_interval(&pencil, a, b, args.method, &cfg)?),
        None => None,
    };
    let target = match (&count_report, args.interval) {
        (Some(report), Some((a, b))) => Target::Interval {
            a,
            b,
            expected: report.count,
        },
        _ => Target::NearestPairs(args.nev),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let x0 = DVector::from_fn(pencil.dim(), |_, _| rng.random::<f64>() * 2.0 - 1.0);
    let result = lanczos::run(
        &pencil,
        &op,
        &m,
        &x0,
        target,
        &LanczosOptions {
            tol: args.tol,
            maxit: args.maxit,
            check_invariants: false,
        },
    )?;

    let verdict = count_report
        .as_ref()
        .map(|report| counting::validate(report, &result.pairs, None));
    let report = SolveReport {
        schema: 1,
        sigma: args.shift,
        tol: args.tol,
        method: args.method.to_string(),
        seed: args.seed,
        iterations: result.iterations,
        breakdown: result.breakdown,
        orth_residual: result.orth_residual,
        eigenpairs: result
            .pairs
            .iter()
            .map(|p| EigenpairRecord {
                lambda: p.lambda,
                mu: p.mu,
                eta: p.eta,
                cos_angle: p.cos_angle,
                errbound: p.errbound,
                converged: p.converged,
            })
            .collect(),
        count: count_report.as_ref().map(count_record),
        verdict: verdict.map(|v| v.to_string()),
    };
    emit_json(&report, args.report.as_ref())?;
    if let Some(path) = &args.trace {
        matio::write_trace(&result.trace, path)?;
    }

    Ok(match verdict {
        Some(Verdict::Match) => EXIT_OK,
        Some(_) if result.hit_maxit => EXIT_ITERATION_LIMIT,
        Some(_) => EXIT_COUNT_MISMATCH,
        None if result.hit_maxit => EXIT_ITERATION_LIMIT,
        None => EXIT_OK,
    })
}

/// Routes to the half-interval formulas when one endpoint is zero.
fn count_any_interval(
    pencil: &DensePencil,
    a: f64,
    b: f64,
    method: MatvecMethod,
    cfg: &OperatorConfig,
) -> Result<counting::CountReport> {
    if a == 0.0 && b > 0.0 {
        counting::count_half_interval(pencil, b, method, cfg)
    } else if b == 0.0 && a < 0.0 {
        counting::count_half_interval(pencil, a, method, cfg)
    } else {
        counting::count_interval(pencil, a, b, method, cfg)
    }
}

fn count_record(report: &counting::CountReport) -> CountRecord {
    CountRecord {
        a: report.a,
        b: report.b,
        count: report.count,
        method: report.method.to_string(),
        inertias_used: report.inertias_used.clone(),
        small_block_nplus: report.small_inertia.nplus,
        small_block_nminus: report.small_inertia.nminus,
        common_null_dim: report.common_null_dim,
    }
}

fn cmd_count(args: CountArgs) -> Result<i32> {
    let (a, b) = args.interval;
    if a >= b {
        return Err(Error::InvalidParameter(format!(
            "degenerate interval ({a}, {b})"
        )));
    }
    let bundle = load_bundle(&args.bundle)?;
    let pencil = DensePencil::from_bundle(&bundle)?;
    let report = count_any_interval(&pencil, a, b, args.method, &OperatorConfig::default())?;
    emit_json(&count_record(&report), None)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct CanonicalRecord {
    schema: u32,
    reversed: bool,
    n0: usize,
    n1: usize,
    n2: usize,
    n3: usize,
    lambda1: Vec<f64>,
    lambda2: Vec<f64>,
    residual_a: f64,
    residual_b: f64,
    simultaneously_diagonalizable: bool,
}

fn cmd_canonical(args: CanonicalArgs) -> Result<i32> {
    let k = read_matrix_market(&args.k)?.to_dense();
    let kg = read_matrix_market(&args.kg)?.to_dense();
    let (a, b) = if args.reverse { (&kg, &k) } else { (&k, &kg) };
    let cf = crate::canonical::reduce(a, b, args.tol)?;
    let (residual_a, residual_b) = cf.block_residuals(a, b);
    let record = CanonicalRecord {
        schema: 1,
        reversed: args.reverse,
        n0: cf.n0,
        n1: cf.n1,
        n2: cf.n2,
        n3: cf.n3,
        lambda1: cf.lambda1.iter().cloned().collect(),
        lambda2: cf.lambda2.iter().cloned().collect(),
        residual_a,
        residual_b,
        simultaneously_diagonalizable: crate::canonical::is_simultaneously_diagonalizable(&cf),
    };
    emit_json(&record, None)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct TruthRecord {
    schema: u32,
    kind: String,
    seed: u64,
    eigenvalues: Vec<f64>,
    infinite_count: usize,
    zero_count: usize,
    common_null_dim: usize,
}

fn cmd_gen(command: GenCommand) -> Result<i32> {
    let (gp, kind) = match &command {
        GenCommand::Example1 { n, m, seed, .. } => {
            (problems::gen_example1(*n, *m, *seed)?, "example1")
        }
        GenCommand::Singular {
            n1,
            n2,
            n3,
            lambda1,
            lambda2,
            seed,
            ..
        } => (
            problems::gen_singular(*n1, *n2, *n3, lambda1, lambda2, *seed)?,
            "singular",
        ),
    };
    let out = match &command {
        GenCommand::Example1 { out, .. } => out,
        GenCommand::Singular { out, .. } => out,
    };
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_matrix_market(&gp.bundle.k, out.join("K.mtx"))?;
    write_matrix_market(&gp.bundle.kg, out.join("KG.mtx"))?;
    write_basis(&gp.bundle.zn, out.join("ZN.mtx"))?;
    write_basis(&gp.bundle.zc, out.join("ZC.mtx"))?;
    let truth = TruthRecord {
        schema: 1,
        kind: kind.into(),
        seed: gp.seed,
        eigenvalues: gp.truth.iter().map(|(l, _)| *l).collect(),
        infinite_count: gp.infinite_count,
        zero_count: gp.zero_count,
        common_null_dim: gp.common_null_dim,
    };
    emit_json(&truth, Some(&out.join("truth.json")))?;
    println!("wrote bundle to {}", out.display());
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct DemoRecord {
    schema: u32,
    inner: String,
    steps: usize,
    max_vnorm: f64,
    events: Vec<String>,
    converged: Vec<EigenpairRecord>,
}

fn cmd_demo(args: DemoArgs) -> Result<i32> {
    let inner: DemoInner = args.inner.parse()?;
    let demo = problems::demo_norm_growth(
        args.n,
        args.m,
        args.shift,
        args.steps,
        inner,
        args.restart,
        args.seed,
    )?;
    if let Some(path) = &args.trace {
        matio::write_trace(&demo.rows, path)?;
    }
    let record = DemoRecord {
        schema: 1,
        inner: args.inner.clone(),
        steps: demo.rows.len(),
        max_vnorm: demo.max_vnorm,
        events: demo.events.clone(),
        converged: demo
            .final_pairs
            .iter()
            .filter(|p| p.converged)
            .map(|p| EigenpairRecord {
                lambda: p.lambda,
                mu: p.mu,
                eta: p.eta,
                cos_angle: p.cos_angle,
                errbound: p.errbound,
                converged: p.converged,
            })
            .collect(),
    };
    emit_json(&record, None)?;
    Ok(EXIT_OK)
}
