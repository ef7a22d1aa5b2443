//! Argument parsing and dispatch for the `fraclap` binary.

use std::io::Write;

use clap::error::ErrorKind;
use clap::Parser;
use fraclap::{
    assemble_direct_matrix, audit_solvability, emit_table, run_convergence_study, Error,
    FastOperator, GradedMesh, KappaSpec, Scheme, SolverKind, StudyConfig, StudyScheme,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_SOE: i32 = 4;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "FRACLAP_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "fraclap",
    version,
    about = "Convergence and performance studies for the 1-D fractional Laplacian with f = 1"
)]
struct Args {
    /// Fractional orders in (0, 2), comma separated.
    #[arg(
        long = "alpha",
        value_delimiter = ',',
        required = true,
        allow_hyphen_values = true
    )]
    alphas: Vec<f64>,

    /// Grading parameters: numbers >= 1 or uniform, k2/(1+s), k(2-a)/2s, k(2-a)/s.
    #[arg(long = "kappa", value_delimiter = ',', default_value = "uniform")]
    kappas: Vec<String>,

    /// Cell counts, comma separated; each must be even.
    #[arg(long = "N", value_delimiter = ',', default_value = "64,128,256,512")]
    n_list: Vec<usize>,

    /// original, modified or direct.
    #[arg(long, default_value = "original")]
    scheme: String,

    /// ge, bicgstab, f-bicgstab or pf-bicgstab.
    #[arg(long, default_value = "pf-bicgstab")]
    solver: String,

    /// SOE tolerance.
    #[arg(long, default_value_t = 1e-8)]
    eps: f64,

    /// Relative residual tolerance of BiCGSTAB.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,

    /// Iteration cap of BiCGSTAB (default 10 N).
    #[arg(long)]
    max_iter: Option<usize>,

    /// Preconditioner bandwidth parameter: the band holds 2l-1 diagonals.
    #[arg(long, default_value_t = 2)]
    band_l: usize,

    /// csv or markdown.
    #[arg(long, default_value = "csv")]
    output: String,

    /// Left end of the interval.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    left: f64,

    /// Right end of the interval.
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    right: f64,

    /// Runs per configuration; the median wall time is reported.
    #[arg(long, default_value_t = 1)]
    repeats: usize,

    /// Report zero wall times so that output is byte-for-byte reproducible.
    #[arg(long)]
    deterministic: bool,

    /// Print solvability audits of the assembled matrices instead of solving.
    #[arg(long)]
    audit: bool,
}

/// What a parsed command line asks for.
#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub config: StudyConfig,
    pub audit: bool,
    pub deterministic: bool,
}

/// Reasons the command line could not be turned into an [`Invocation`].
#[derive(Debug)]
pub enum ParseOutcome {
    /// `--help` or `--version`; the text is the message to print.
    Info(String),
    Invalid(String),
}

/// Parses `argv` (including the program name) into a validated configuration.
pub fn parse_config<I, T>(argv: I) -> Result<Invocation, ParseOutcome>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = Args::try_parse_from(argv).map_err(|e| match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ParseOutcome::Info(e.to_string()),
        _ => ParseOutcome::Invalid(e.to_string()),
    })?;
    let invalid = |e: Error| ParseOutcome::Invalid(format!("error: {e}"));
    let kappas = args
        .kappas
        .iter()
        .map(|k| k.parse::<KappaSpec>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(invalid)?;
    let config = StudyConfig {
        alphas: args.alphas,
        kappas,
        n_list: args.n_list,
        scheme: args.scheme.parse().map_err(invalid)?,
        solver: args.solver.parse().map_err(invalid)?,
        eps_soe: args.eps,
        tol: args.tol,
        max_iter: args.max_iter,
        band_l: args.band_l,
        output: args.output.parse().map_err(invalid)?,
        repeats: args.repeats,
        a: args.left,
        b: args.right,
    };
    if args.audit {
        validate_audit(&config).map_err(invalid)?;
    } else {
        config.validate().map_err(invalid)?;
    }
    Ok(Invocation {
        config,
        audit: args.audit,
        deterministic: args.deterministic,
    })
}

/// Audits only need the grid; the solver choice is irrelevant.
fn validate_audit(cfg: &StudyConfig) -> fraclap::Result<()> {
    let probe = StudyConfig {
        solver: match cfg.scheme {
            StudyScheme::Direct => SolverKind::Ge,
            _ => SolverKind::FBicgstab,
        },
        band_l: 1,
        ..cfg.clone()
    };
    probe.validate()
}

/// Maps a library error to the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::SoeBudgetExhausted { .. }
        | Error::InvalidWindow { .. }
        | Error::WindowDoesNotCover { .. }
        | Error::InvalidSoeTerms
        | Error::SoeExponentMismatch { .. }
        | Error::BetaOutOfRange(_) => EXIT_SOE,
        Error::NotDiagonallyDominant { .. }
        | Error::ZeroPivot(_)
        | Error::Singular
        | Error::AuditCapExceeded { .. }
        | Error::DimensionMismatch { .. }
        | Error::NonPositiveError(..) => EXIT_SOLVER,
        _ => EXIT_VALIDATION,
    }
}

fn audit_reports(cfg: &StudyConfig, out: &mut dyn Write) -> fraclap::Result<()> {
    for &alpha in &cfg.alphas {
        for spec in &cfg.kappas {
            let kappa = spec.resolve(alpha)?;
            for &n in &cfg.n_list {
                let mesh = GradedMesh::new(cfg.a, cfg.b, n, kappa)?;
                let report = match cfg.scheme {
                    StudyScheme::Direct => {
                        let m = assemble_direct_matrix(&mesh, alpha)?;
                        audit_solvability(&m, &mesh, alpha, cfg.eps_soe)?
                    }
                    StudyScheme::Original | StudyScheme::Modified => {
                        let scheme = match cfg.scheme {
                            StudyScheme::Original => Scheme::Original,
                            _ => Scheme::Modified,
                        };
                        FastOperator::new(&mesh, alpha, scheme, cfg.eps_soe)?.audit()?
                    }
                };
                let _ = writeln!(
                    out,
                    "alpha: {alpha}\nkappa: {kappa}\nN: {n}\nscheme: {}\n{report}\n",
                    cfg.scheme
                );
            }
        }
    }
    Ok(())
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| format!("error: {THREADS_ENV} must be a positive integer, got `{value}`"))?;
    // A pool that already exists (e.g. in tests) is left as it is.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();
    Ok(())
}

/// Runs the command line and writes results to `out`, diagnostics to `err`.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let inv = match parse_config(argv) {
        Ok(inv) => inv,
        Err(ParseOutcome::Info(text)) => {
            let _ = write!(out, "{text}");
            return EXIT_OK;
        }
        Err(ParseOutcome::Invalid(text)) => {
            let _ = writeln!(err, "{}", text.trim_end());
            return EXIT_VALIDATION;
        }
    };
    if let Err(text) = configure_threads() {
        let _ = writeln!(err, "{text}");
        return EXIT_VALIDATION;
    }
    if inv.audit {
        return match audit_reports(&inv.config, out) {
            Ok(()) => EXIT_OK,
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                exit_code(&e)
            }
        };
    }
    let mut rows = match run_convergence_study(&inv.config) {
        Ok(rows) => rows,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return exit_code(&e);
        }
    };
    if inv.deterministic {
        rows.iter_mut().for_each(|r| r.wall_time = 0.0);
    }
    for r in rows.iter().filter(|r| !r.converged) {
        let _ = writeln!(
            err,
            "warning: {} did not converge for alpha={} kappa={} N={}",
            r.solver, r.alpha, r.kappa, r.n
        );
    }
    match emit_table(&rows, inv.config.output) {
        Ok(text) => {
            let _ = write!(out, "{text}");
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Entry point used by the binary: stdout for tables, stderr for diagnostics.
pub fn run_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(argv, &mut stdout.lock(), &mut stderr.lock())
}
