//! Closed-form reference solution, error metrics, and the convergence/performance
//! study driver with its CSV and markdown renderers.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::FnOperator;
use crate::mesh::GradedMesh;
use crate::operator::{
    assemble_direct_matrix, normalization_constant, FastOperator, Regime, Scheme,
};
use crate::solver::{
    bicgstab, build_banded_preconditioner, dense_gaussian_elimination, SolveOptions,
};
use crate::special::gamma;

/// Header of the CSV table; the column set is fixed.
pub const CSV_HEADER: &str = "alpha,kappa,N,scheme,solver,error_inf,order,iterations,wall_time_s";

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 2.0 {
        Ok(())
    } else {
        Err(Error::AlphaOutOfRange(alpha))
    }
}

fn solution_factor(alpha: f64) -> f64 {
    2f64.powf(-alpha) * std::f64::consts::PI.sqrt()
        / (gamma(0.5 * (1.0 + alpha)) * gamma(1.0 + 0.5 * alpha))
}

/// Solution of `(-Delta)^{alpha/2} u = 1` on `(a, b)` with `u = 0` outside.
pub fn exact_solution(alpha: f64, x: f64, a: f64, b: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(a < b) {
        return Err(Error::EmptyInterval { a, b });
    }
    if x <= a || x >= b {
        return Ok(0.0);
    }
    Ok(solution_factor(alpha) * ((x - a) * (b - x)).powf(0.5 * alpha))
}

/// Exact solution at the interior nodes, using the mesh's boundary distances.
pub fn exact_nodal_values(mesh: &GradedMesh, alpha: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    let c = solution_factor(alpha);
    Ok((1..mesh.n())
        .map(|i| c * (mesh.dist_from_left(i) * mesh.dist_from_right(i)).powf(0.5 * alpha))
        .collect())
}

/// `max_i |u(x_i) - U_i|` over the interior nodes.
pub fn max_norm_error(u: &[f64], mesh: &GradedMesh, alpha: f64) -> Result<f64> {
    let exact = exact_nodal_values(mesh, alpha)?;
    if u.len() != exact.len() {
        return Err(Error::DimensionMismatch {
            expected: exact.len(),
            got: u.len(),
        });
    }
    Ok(u.iter()
        .zip(&exact)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// `log2(e_coarse / e_fine)`.
pub fn convergence_order(e_coarse: f64, e_fine: f64) -> Result<f64> {
    if !(e_coarse > 0.0 && e_fine > 0.0) {
        return Err(Error::NonPositiveError(e_coarse, e_fine));
    }
    Ok((e_coarse / e_fine).log2())
}

/// Discretisation used by a study row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StudyScheme {
    Original,
    Modified,
    /// Original scheme with exactly integrated, densely stored far field.
    Direct,
}

impl StudyScheme {
    fn fast(self) -> Option<Scheme> {
        match self {
            Self::Original => Some(Scheme::Original),
            Self::Modified => Some(Scheme::Modified),
            Self::Direct => None,
        }
    }
}

impl fmt::Display for StudyScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Original => "original",
            Self::Modified => "modified",
            Self::Direct => "direct",
        })
    }
}

impl FromStr for StudyScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original" => Ok(Self::Original),
            "modified" => Ok(Self::Modified),
            "direct" => Ok(Self::Direct),
            _ => Err(Error::Parse(format!("unknown scheme `{s}`"))),
        }
    }
}

/// Linear solver used by a study row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SolverKind {
    /// Dense Gaussian elimination with partial pivoting.
    Ge,
    /// BiCGSTAB on the dense direct matrix.
    Bicgstab,
    /// BiCGSTAB on the matrix-free fast operator.
    FBicgstab,
    /// Banded-preconditioned BiCGSTAB.
    PfBicgstab,
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ge => "ge",
            Self::Bicgstab => "bicgstab",
            Self::FBicgstab => "f-bicgstab",
            Self::PfBicgstab => "pf-bicgstab",
        })
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ge" => Ok(Self::Ge),
            "bicgstab" => Ok(Self::Bicgstab),
            "f-bicgstab" => Ok(Self::FBicgstab),
            "pf-bicgstab" => Ok(Self::PfBicgstab),
            _ => Err(Error::Parse(format!("unknown solver `{s}`"))),
        }
    }
}

/// Grading parameter, either numeric or a rule resolved per `alpha` with `sigma = alpha/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KappaSpec {
    Value(f64),
    /// `kappa = 1`.
    Uniform,
    /// `kappa = 2 / (1 + sigma)`.
    TwoOverOnePlusSigma,
    /// `kappa = (2 - alpha) / (2 sigma)`.
    HalfOptimal,
    /// `kappa = (2 - alpha) / sigma`.
    Optimal,
}

impl KappaSpec {
    pub fn resolve(self, alpha: f64) -> Result<f64> {
        check_alpha(alpha)?;
        let sigma = 0.5 * alpha;
        let kappa = match self {
            Self::Value(k) => k,
            Self::Uniform => 1.0,
            Self::TwoOverOnePlusSigma => 2.0 / (1.0 + sigma),
            Self::HalfOptimal => (2.0 - alpha) / (2.0 * sigma),
            Self::Optimal => (2.0 - alpha) / sigma,
        };
        if kappa.is_nan() || kappa < 1.0 {
            return Err(Error::KappaBelowOne(kappa));
        }
        Ok(kappa)
    }
}

impl fmt::Display for KappaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Value(k) => write!(f, "{k}"),
            Self::Uniform => f.write_str("uniform"),
            Self::TwoOverOnePlusSigma => f.write_str("k2/(1+s)"),
            Self::HalfOptimal => f.write_str("k(2-a)/2s"),
            Self::Optimal => f.write_str("k(2-a)/s"),
        }
    }
}

impl FromStr for KappaSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "uniform" => Ok(Self::Uniform),
            "k2/(1+s)" => Ok(Self::TwoOverOnePlusSigma),
            "k(2-a)/2s" => Ok(Self::HalfOptimal),
            "k(2-a)/s" => Ok(Self::Optimal),
            t => t
                .parse::<f64>()
                .map(Self::Value)
                .map_err(|_| Error::Parse(format!("invalid kappa `{t}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputFormat {
    Csv,
    Markdown,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "markdown" | "md" => Ok(Self::Markdown),
            _ => Err(Error::Parse(format!("unknown output format `{s}`"))),
        }
    }
}

/// Parameter grid of a study. The right-hand side is `f = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub alphas: Vec<f64>,
    pub kappas: Vec<KappaSpec>,
    pub n_list: Vec<usize>,
    pub scheme: StudyScheme,
    pub solver: SolverKind,
    pub eps_soe: f64,
    pub tol: f64,
    /// `None` selects `10 N`.
    pub max_iter: Option<usize>,
    pub band_l: usize,
    pub output: OutputFormat,
    /// Runs per row; the reported time is the median.
    pub repeats: usize,
    pub a: f64,
    pub b: f64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            alphas: vec![0.8],
            kappas: vec![KappaSpec::Uniform],
            n_list: vec![64, 128, 256, 512],
            scheme: StudyScheme::Original,
            solver: SolverKind::PfBicgstab,
            eps_soe: 1e-8,
            tol: 1e-8,
            max_iter: None,
            band_l: 2,
            output: OutputFormat::Csv,
            repeats: 1,
            a: 0.0,
            b: 2.0,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(Error::InvalidConfig(m));
        if self.alphas.is_empty() || self.kappas.is_empty() || self.n_list.is_empty() {
            return invalid("alpha, kappa and N lists must be nonempty".into());
        }
        if !(self.a < self.b) {
            return Err(Error::EmptyInterval {
                a: self.a,
                b: self.b,
            });
        }
        for &n in &self.n_list {
            if n % 2 == 1 {
                return Err(Error::OddCellCount(n));
            }
            if n < 4 {
                return Err(Error::TooFewCells(n));
            }
            if self.band_l == 0 || 2 * self.band_l - 1 > n - 1 {
                return Err(Error::InvalidBandwidth {
                    l: self.band_l,
                    n: n - 1,
                });
            }
        }
        if !(self.eps_soe > 0.0 && self.eps_soe < 1.0) {
            return Err(Error::InvalidTolerance(self.eps_soe));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::InvalidTolerance(self.tol));
        }
        if self.repeats == 0 {
            return invalid("repeats must be at least 1".into());
        }
        for &alpha in &self.alphas {
            check_alpha(alpha)?;
            if self.scheme == StudyScheme::Direct && alpha >= 1.0 {
                return Err(Error::DirectRegime(alpha));
            }
            for k in &self.kappas {
                k.resolve(alpha)?;
            }
        }
        let ok = match self.scheme {
            StudyScheme::Direct => matches!(self.solver, SolverKind::Ge | SolverKind::Bicgstab),
            _ => self.solver != SolverKind::Bicgstab,
        };
        if !ok {
            return invalid(format!(
                "solver {} is not available for the {} scheme",
                self.solver, self.scheme
            ));
        }
        Ok(())
    }
}

/// One solve of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub alpha: f64,
    pub kappa: f64,
    pub n: usize,
    pub scheme: StudyScheme,
    pub solver: SolverKind,
    pub error_inf: f64,
    /// `log2` ratio against the row with `N/2` and otherwise identical parameters.
    pub order: Option<f64>,
    /// `None` for direct elimination.
    pub iterations: Option<usize>,
    /// Seconds spent assembling and solving.
    pub wall_time: f64,
    pub converged: bool,
}

struct Outcome {
    solution: Vec<f64>,
    iterations: Option<usize>,
    converged: bool,
}

fn solve_once(cfg: &StudyConfig, mesh: &GradedMesh, alpha: f64) -> Result<Outcome> {
    let m = mesh.n() - 1;
    // The system is solved without the C_alpha factor, so the load is 1 / C_alpha.
    let f = vec![1.0 / normalization_constant(alpha)?; m];
    let x0 = vec![0.0; m];
    let opts = SolveOptions {
        tol: cfg.tol,
        max_iter: cfg.max_iter,
    };
    let iterative = |report: crate::solver::SolveReport| Outcome {
        solution: report.solution,
        iterations: Some(report.iterations),
        converged: report.converged,
    };
    let direct = |solution| Outcome {
        solution,
        iterations: None,
        converged: true,
    };

    match cfg.scheme.fast() {
        None => {
            let a = assemble_direct_matrix(mesh, alpha)?;
            match cfg.solver {
                SolverKind::Ge => Ok(direct(dense_gaussian_elimination(&a, &f)?)),
                _ => Ok(iterative(bicgstab(&a, &f, &x0, opts, None)?)),
            }
        }
        Some(scheme) => {
            let op = FastOperator::new(mesh, alpha, scheme, cfg.eps_soe)?;
            match cfg.solver {
                SolverKind::Ge => {
                    let a = op.materialize_unscaled()?;
                    Ok(direct(dense_gaussian_elimination(&a, &f)?))
                }
                _ => {
                    let precond = match cfg.solver {
                        SolverKind::PfBicgstab => Some(build_banded_preconditioner(
                            mesh, alpha, scheme, cfg.band_l,
                        )?),
                        _ => None,
                    };
                    let unscaled = FnOperator::new(m, |x: &[f64], y: &mut [f64]| {
                        y.copy_from_slice(&op.apply_unscaled(x))
                    });
                    Ok(iterative(bicgstab(
                        &unscaled,
                        &f,
                        &x0,
                        opts,
                        precond.as_ref(),
                    )?))
                }
            }
        }
    }
}

fn median(mut times: Vec<Duration>) -> Duration {
    times.sort();
    let k = times.len();
    if k % 2 == 1 {
        times[k / 2]
    } else {
        (times[k / 2 - 1] + times[k / 2]) / 2
    }
}

/// Runs every `(alpha, kappa, N)` combination of the grid in that nesting order.
///
/// Rows whose iterative solve did not converge are kept and flagged; structural
/// failures (singular or non-dominant matrices, SOE construction) abort the study.
pub fn run_convergence_study(cfg: &StudyConfig) -> Result<Vec<StudyRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &alpha in &cfg.alphas {
        Regime::of(alpha)?;
        for spec in &cfg.kappas {
            let kappa = spec.resolve(alpha)?;
            for &n in &cfg.n_list {
                let mesh = GradedMesh::new(cfg.a, cfg.b, n, kappa)?;
                let mut times = Vec::with_capacity(cfg.repeats);
                let mut outcome = None;
                for _ in 0..cfg.repeats {
                    let start = Instant::now();
                    let o = solve_once(cfg, &mesh, alpha)?;
                    times.push(start.elapsed());
                    outcome = Some(o);
                }
                let outcome = outcome.expect("at least one repeat");
                rows.push(StudyRow {
                    alpha,
                    kappa,
                    n,
                    scheme: cfg.scheme,
                    solver: cfg.solver,
                    error_inf: max_norm_error(&outcome.solution, &mesh, alpha)?,
                    order: None,
                    iterations: outcome.iterations,
                    wall_time: median(times).as_secs_f64(),
                    converged: outcome.converged,
                });
            }
        }
    }
    fill_orders(&mut rows);
    Ok(rows)
}

type GroupKey = (u64, u64, StudyScheme, SolverKind);

fn group_key(r: &StudyRow) -> GroupKey {
    (r.alpha.to_bits(), r.kappa.to_bits(), r.scheme, r.solver)
}

/// Sets `order` on every row that has a partner with half as many cells.
pub fn fill_orders(rows: &mut [StudyRow]) {
    let errors: BTreeMap<(GroupKey, usize), f64> = rows
        .iter()
        .map(|r| ((group_key(r), r.n), r.error_inf))
        .collect();
    for r in rows.iter_mut() {
        r.order = (r.n % 2 == 0)
            .then(|| errors.get(&(group_key(r), r.n / 2)))
            .flatten()
            .and_then(|&coarse| convergence_order(coarse, r.error_inf).ok());
    }
}

fn csv_line(r: &StudyRow) -> String {
    let order = r.order.map(|o| format!("{o:e}")).unwrap_or_default();
    let iterations = match r.iterations {
        Some(k) if r.converged => k.to_string(),
        Some(k) => format!("{k}*"),
        None => String::new(),
    };
    format!(
        "{},{},{},{},{},{:e},{},{},{:e}",
        r.alpha, r.kappa, r.n, r.scheme, r.solver, r.error_inf, order, iterations, r.wall_time
    )
}

/// At most six decimals, without trailing zeros.
fn short(x: f64) -> String {
    let s = format!("{x:.6}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn markdown(rows: &[StudyRow]) -> String {
    // Groups keep first-appearance order; within a group, N and kappa are sorted.
    let mut groups: Vec<((u64, StudyScheme, SolverKind), Vec<&StudyRow>)> = Vec::new();
    for r in rows {
        let key = (r.alpha.to_bits(), r.scheme, r.solver);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, g)) => g.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    let mut out = String::new();
    for (i, (_, group)) in groups.iter().enumerate() {
        let first = group[0];
        let mut kappas: Vec<f64> = group.iter().map(|r| r.kappa).collect();
        kappas.sort_by(f64::total_cmp);
        kappas.dedup();
        let mut ns: Vec<usize> = group.iter().map(|r| r.n).collect();
        ns.sort_unstable();
        ns.dedup();
        let show_iter = group.iter().any(|r| r.iterations.is_some());

        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(
            out,
            "alpha = {}, scheme = {}, solver = {}\n",
            short(first.alpha),
            first.scheme,
            first.solver
        );
        let mut header = String::from("| N |");
        let mut rule = String::from("|---|");
        for k in &kappas {
            let _ = write!(header, " error (kappa={}) | order |", short(*k));
            rule.push_str("---|---|");
            if show_iter {
                header.push_str(" iter |");
                rule.push_str("---|");
            }
        }
        let _ = writeln!(out, "{header}\n{rule}");
        for &n in &ns {
            let _ = write!(out, "| {n} |");
            for &k in &kappas {
                match group.iter().find(|r| r.n == n && r.kappa == k) {
                    Some(r) => {
                        let order = r.order.map(|o| format!("{o:.4}")).unwrap_or("-".into());
                        let _ = write!(out, " {:.4e} | {order} |", r.error_inf);
                        if show_iter {
                            let it = match r.iterations {
                                Some(k) if r.converged => k.to_string(),
                                Some(k) => format!("{k}*"),
                                None => "-".into(),
                            };
                            let _ = write!(out, " {it} |");
                        }
                    }
                    None => {
                        out.push_str(" - | - |");
                        if show_iter {
                            out.push_str(" - |");
                        }
                    }
                }
            }
            out.push('\n');
        }
    }
    out
}

/// Renders rows as CSV (header plus one line per row) or as markdown tables
/// grouped by `(alpha, scheme, solver)` with one error/order column pair per `kappa`.
///
/// In CSV an iteration count ending in `*` marks a solve that did not converge.
pub fn emit_table(rows: &[StudyRow], format: OutputFormat) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::EmptyRows);
    }
    Ok(match format {
        OutputFormat::Csv => {
            let mut out = String::from(CSV_HEADER);
            out.push('\n');
            for r in rows {
                out.push_str(&csv_line(r));
                out.push('\n');
            }
            out
        }
        OutputFormat::Markdown => markdown(rows),
    })
}

/// Parses CSV produced by [`emit_table`] back into rows.
pub fn parse_csv(text: &str) -> Result<Vec<StudyRow>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        other => {
            return Err(Error::Parse(format!(
                "expected header `{CSV_HEADER}`, found `{}`",
                other.unwrap_or("")
            )))
        }
    }
    let num = |s: &str, what: &str| {
        s.parse::<f64>()
            .map_err(|_| Error::Parse(format!("invalid {what} `{s}`")))
    };
    lines
        .map(|line| {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 9 {
                return Err(Error::Parse(format!("expected 9 cells in `{line}`")));
            }
            let n = cells[2]
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("invalid N `{}`", cells[2])))?;
            let order = match cells[6] {
                "" => None,
                s => Some(num(s, "order")?),
            };
            let (iterations, converged) = match cells[7] {
                "" => (None, true),
                s => {
                    let (digits, converged) = match s.strip_suffix('*') {
                        Some(d) => (d, false),
                        None => (s, true),
                    };
                    let k = digits
                        .parse::<usize>()
                        .map_err(|_| Error::Parse(format!("invalid iterations `{s}`")))?;
                    (Some(k), converged)
                }
            };
            Ok(StudyRow {
                alpha: num(cells[0], "alpha")?,
                kappa: num(cells[1], "kappa")?,
                n,
                scheme: cells[3].parse()?,
                solver: cells[4].parse()?,
                error_inf: num(cells[5], "error")?,
                order,
                iterations,
                wall_time: num(cells[8], "wall time")?,
                converged,
            })
        })
        .collect()
}
