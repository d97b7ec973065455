//! Convergence studies over a sequence of meshes and their tabular output.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::analysis::{
    divergence_check, divergence_l1, error_norms, is_doubling, rate_table, ConvergenceRow, DivergenceCheck,
    ErrorNorms, ExactSolution,
};
use crate::error::{HdgError, Result};
use crate::hdgforms::{manufactured_source, DofLayout, Example, FieldState, FormContext, Stabilization};
use crate::mesh::Mesh;
use crate::solver::{norm_v, picard_solve, InitialGuess, PicardOptions, PicardReport, SolveMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Markdown,
}

impl std::str::FromStr for OutputFormat {
    type Err = HdgError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "markdown" | "md" => Ok(OutputFormat::Markdown),
            other => Err(HdgError::Config(format!("unknown format '{other}' (expected csv or markdown)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub example: Example,
    pub k: usize,
    pub m: usize,
    /// Squares per side of each uniform mesh.
    pub levels: Vec<usize>,
    pub nu: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub mode: SolveMode,
    pub stabilization: Stabilization,
    pub format: OutputFormat,
    pub out: Option<PathBuf>,
    /// Triangle `.node` file; the `.ele` file next to it is read as well.
    /// Replaces `levels` with a single run.
    pub mesh_file: Option<PathBuf>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            example: Example::Polynomial,
            k: 1,
            m: 1,
            levels: vec![4, 8, 16, 32, 64],
            nu: 1.0,
            tol: 1e-10,
            max_iter: 50,
            mode: SolveMode::Condensed,
            stabilization: Stabilization::CellDiameter,
            format: OutputFormat::Csv,
            out: None,
            mesh_file: None,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.k) {
            return Err(HdgError::Config(format!("k must be 1, 2 or 3, got {}", self.k)));
        }
        if self.m != self.k && self.m + 1 != self.k {
            return Err(HdgError::Config(format!("m must be k or k - 1, got m = {} for k = {}", self.m, self.k)));
        }
        if self.mesh_file.is_none() {
            if self.levels.is_empty() || self.levels.contains(&0) {
                return Err(HdgError::Config("levels must be a nonempty list of positive integers".into()));
            }
            if self.levels.windows(2).any(|w| w[1] <= w[0]) {
                return Err(HdgError::Config("levels must be strictly increasing".into()));
            }
        }
        if !(self.nu > 0.0) || !self.nu.is_finite() {
            return Err(HdgError::Config("Reynolds number must be positive and finite".into()));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(HdgError::Config("tol must be positive and max-iter at least 1".into()));
        }
        Ok(())
    }

    pub fn picard_options(&self) -> PicardOptions {
        PicardOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            mode: self.mode,
            initial: InitialGuess::Stokes,
        }
    }
}

/// Everything computed on one mesh.
#[derive(Debug, Clone)]
pub struct LevelResult {
    pub row: ConvergenceRow,
    pub errors: ErrorNorms,
    pub report: PicardReport,
    pub divergence: DivergenceCheck,
    pub norm_v: f64,
    pub state: FieldState,
}

/// Solves one example on `mesh` and measures the errors.
pub fn run_level(config: &StudyConfig, mesh: &Mesh) -> Result<LevelResult> {
    let layout = DofLayout::new(mesh, config.k, config.m)?;
    let ctx = FormContext::new(&layout, config.nu)?.with_stabilization(config.stabilization);
    let (example, nu) = (config.example, config.nu);
    let f = move |p| manufactured_source(example, nu, p);
    let (state, report) = picard_solve(&ctx, mesh, &layout, Some(&f), &config.picard_options())?;
    let exact = ExactSolution::new(example, nu);
    let errors = error_norms(&ctx, mesh, &layout, &state, &exact);
    let div = divergence_l1(&ctx, mesh, &layout, &state);
    let row = ConvergenceRow::new(mesh.h(), &errors, div, report.iterations, report.converged);
    Ok(LevelResult {
        row,
        errors,
        divergence: divergence_check(&ctx, mesh, &layout, &state),
        norm_v: norm_v(&ctx, mesh, &layout, &state),
        report,
        state,
    })
}

#[derive(Debug, Clone)]
pub struct StudyOutcome {
    pub rows: Vec<ConvergenceRow>,
    pub warnings: Vec<String>,
    pub all_converged: bool,
    pub table: String,
}

impl StudyOutcome {
    /// 0 when every Picard run converged, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.all_converged {
            0
        } else {
            2
        }
    }
}

fn read_mesh_file(node: &PathBuf) -> Result<Mesh> {
    let ele = node.with_extension("ele");
    let node_text = std::fs::read_to_string(node)?;
    let ele_text = std::fs::read_to_string(&ele)?;
    Mesh::from_triangle(&node_text, &ele_text)
}

/// Runs every level in order, attaches rates when the levels double, and
/// writes the table to `config.out` when set.
pub fn run_study(config: &StudyConfig) -> Result<StudyOutcome> {
    config.validate()?;
    let meshes: Vec<Mesh> = match &config.mesh_file {
        Some(node) => vec![read_mesh_file(node)?],
        None => config.levels.iter().map(|&n| Mesh::uniform(n)).collect(),
    };
    let mut rows = Vec::with_capacity(meshes.len());
    for mesh in &meshes {
        rows.push(run_level(config, mesh)?.row);
    }
    let mut warnings = Vec::new();
    if is_doubling(&rows) {
        rows = rate_table(rows)?;
    } else {
        warnings.push("refinement levels do not double; rate columns left empty".to_string());
    }
    for r in rows.iter().filter(|r| !r.converged) {
        warnings.push(format!("Picard iteration did not converge at n = {}", fmt_n(r.n)));
    }
    let all_converged = rows.iter().all(|r| r.converged);
    let table = match config.format {
        OutputFormat::Csv => to_csv(&rows),
        OutputFormat::Markdown => to_markdown(&rows),
    };
    if let Some(path) = &config.out {
        std::fs::write(path, &table)?;
    }
    Ok(StudyOutcome {
        rows,
        warnings,
        all_converged,
        table,
    })
}

/// Scientific notation with five significant digits, e.g. `1.6593E-01`.
pub fn fmt_sci(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let s = format!("{v:.4E}");
    let (mant, exp) = s.split_once('E').expect("E format");
    let e: i32 = exp.parse().expect("integer exponent");
    let sign = if e < 0 { '-' } else { '+' };
    format!("{mant}E{sign}{:02}", e.abs())
}

fn fmt_n(n: f64) -> String {
    if (n - n.round()).abs() < 1e-9 {
        format!("{}", n.round() as i64)
    } else {
        fmt_sci(n)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_sci).unwrap_or_default()
}

pub const CSV_HEADER: &str = "n,h,err_u_rel,rate_u,err_L_rel,rate_L,err_p_rel,rate_p,div_l1,iters";

fn row_fields(r: &ConvergenceRow) -> [String; 10] {
    [
        fmt_n(r.n),
        fmt_sci(r.h),
        fmt_sci(r.err_u_rel),
        fmt_opt(r.rate_u),
        fmt_sci(r.err_l_rel),
        fmt_opt(r.rate_l),
        fmt_sci(r.err_p_rel),
        fmt_opt(r.rate_p),
        fmt_sci(r.div_l1),
        if r.converged {
            r.iters.to_string()
        } else {
            format!("{}*", r.iters)
        },
    ]
}

pub fn to_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&row_fields(r).join(","));
        out.push('\n');
    }
    out
}

pub fn to_markdown(rows: &[ConvergenceRow]) -> String {
    let cols: Vec<&str> = CSV_HEADER.split(',').collect();
    let mut out = String::new();
    let _ = writeln!(out, "| {} |", cols.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(cols.len()));
    for r in rows {
        let _ = writeln!(out, "| {} |", row_fields(r).join(" | "));
    }
    out
}
