//! Exact solutions, error norms, divergence measures and convergence rates.

use rayon::prelude::*;

use crate::error::{HdgError, Result};
use crate::femcore::{make_quadrature, AffineMap, Domain};
use crate::hdgforms::{CellGeometry, DofLayout, Example, FieldState, FormContext};
use crate::mesh::{Mesh, Point};

/// Analytical velocity, velocity gradient and zero-mean pressure of an example.
#[derive(Debug, Clone, Copy)]
pub struct ExactSolution {
    pub example: Example,
    pub nu: f64,
    /// Subtracted from the printed pressure to give it zero mean.
    pub pressure_shift: f64,
}

impl ExactSolution {
    pub fn new(example: Example, nu: f64) -> ExactSolution {
        let pressure_shift = match example {
            Example::Polynomial => 0.0,
            Example::HydrostaticPressure => 1e6 * 7.0 / 6.0,
        };
        ExactSolution {
            example,
            nu,
            pressure_shift,
        }
    }

    pub fn velocity(&self, p: Point) -> [f64; 2] {
        let [x, y] = p;
        match self.example {
            Example::Polynomial => [
                -x * x * (x - 1.0).powi(2) * y * (y - 1.0) * (2.0 * y - 1.0),
                x * (x - 1.0) * (2.0 * x - 1.0) * y * y * (y - 1.0).powi(2),
            ],
            Example::HydrostaticPressure => [0.0, 0.0],
        }
    }

    /// `grad u` with entry `[i][j] = d u_i / d x_j`.
    pub fn gradient(&self, p: Point) -> [[f64; 2]; 2] {
        let [x, y] = p;
        match self.example {
            Example::Polynomial => {
                let a = x * x * (x - 1.0).powi(2);
                let da = 2.0 * x * (x - 1.0) * (2.0 * x - 1.0);
                let b = y * (y - 1.0) * (2.0 * y - 1.0);
                let db = 6.0 * y * y - 6.0 * y + 1.0;
                let c = x * (x - 1.0) * (2.0 * x - 1.0);
                let dc = 6.0 * x * x - 6.0 * x + 1.0;
                let d = y * y * (y - 1.0).powi(2);
                let dd = 2.0 * y * (y - 1.0) * (2.0 * y - 1.0);
                [[-da * b, -a * db], [dc * d, c * dd]]
            }
            Example::HydrostaticPressure => [[0.0; 2]; 2],
        }
    }

    /// `L = nu grad u`.
    pub fn tensor(&self, p: Point) -> [[f64; 2]; 2] {
        let g = self.gradient(p);
        g.map(|r| r.map(|v| self.nu * v))
    }

    /// Pressure shifted to zero mean.
    pub fn pressure(&self, p: Point) -> f64 {
        let [x, y] = p;
        let raw = match self.example {
            Example::Polynomial => 10.0 * ((x - 0.5).powi(3) * y * y + (1.0 - x).powi(3) * (y - 0.5).powi(3)),
            Example::HydrostaticPressure => 1e6 * (y.powi(3) - y * y / 2.0 + y + 7.0 / 12.0),
        };
        raw - self.pressure_shift
    }

    /// `(||u||, ||L||, ||p||)` over the unit square.
    pub fn reference_norms(&self) -> Result<[f64; 3]> {
        let mesh = Mesh::uniform(4);
        let rule = make_quadrature(Domain::Triangle, 30)?;
        let mut acc = [0.0; 3];
        for c in 0..mesh.num_cells() {
            let map = AffineMap::for_cell(&mesh, c);
            for (xi, w) in rule.iter() {
                let x = map.map(xi);
                let w = w * map.det;
                let u = self.velocity(x);
                let l = self.tensor(x);
                acc[0] += w * (u[0] * u[0] + u[1] * u[1]);
                acc[1] += w * l.iter().flatten().map(|v| v * v).sum::<f64>();
                acc[2] += w * self.pressure(x).powi(2);
            }
        }
        Ok(acc.map(f64::sqrt))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    pub abs_u: f64,
    pub abs_l: f64,
    pub abs_p: f64,
    pub rel_u: f64,
    pub rel_l: f64,
    pub rel_p: f64,
}

fn rel(err: f64, norm: f64) -> f64 {
    if norm > 0.0 {
        err / norm
    } else {
        err
    }
}

/// Velocity value of `state` on cell `c` at reference point index `q` of `values`.
fn eval_vector(coef: &[f64], phi: &[f64], dim: usize) -> [f64; 2] {
    let mut v = [0.0; 2];
    for a in 0..dim {
        v[0] += coef[a] * phi[a];
        v[1] += coef[dim + a] * phi[a];
    }
    v
}

/// Mean of `p_h` over the domain.
pub fn pressure_mean(ctx: &FormContext, mesh: &Mesh, layout: &DofLayout, state: &FieldState) -> f64 {
    let tab = &ctx.high_tab;
    let mut total = 0.0;
    let mut area = 0.0;
    for c in 0..mesh.num_cells() {
        let det = AffineMap::for_cell(mesh, c).det;
        let p = state.pressure_of(layout, c);
        for (q, phi) in tab.values.iter().enumerate() {
            let v: f64 = p.iter().zip(phi).map(|(a, b)| a * b).sum();
            total += tab.weights[q] * det * v;
            area += tab.weights[q] * det;
        }
    }
    total / area
}

/// `L^2` errors of `(u_h, L_h, p_h)`, absolute and relative to the exact
/// fields, with the high-order rule. Both pressures are compared at zero mean.
pub fn error_norms(
    ctx: &FormContext,
    mesh: &Mesh,
    layout: &DofLayout,
    state: &FieldState,
    exact: &ExactSolution,
) -> ErrorNorms {
    let tab = &ctx.high_tab;
    let (dk, dm) = (layout.dim_k(), layout.dim_m());
    let p_mean = pressure_mean(ctx, mesh, layout, state);
    let parts: Vec<[f64; 6]> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let g = CellGeometry::new(mesh, c);
            let u = state.velocity_of(layout, c);
            let l = state.tensor_of(layout, c);
            let p = state.pressure_of(layout, c);
            let mut acc = [0.0; 6];
            for (q, phi) in tab.values.iter().enumerate() {
                let x = g.map.map(tab.points[q]);
                let w = tab.weights[q] * g.map.det;
                let uh = eval_vector(u, phi, dk);
                let ue = exact.velocity(x);
                let le = exact.tensor(x);
                let pe = exact.pressure(x);
                let ph = p.iter().zip(phi).map(|(a, b)| a * b).sum::<f64>() - p_mean;
                acc[0] += w * ((uh[0] - ue[0]).powi(2) + (uh[1] - ue[1]).powi(2));
                acc[3] += w * (ue[0] * ue[0] + ue[1] * ue[1]);
                for i in 0..2 {
                    for j in 0..2 {
                        let r = 2 * i + j;
                        let lh: f64 = (0..dm).map(|a| l[r * dm + a] * phi[a]).sum();
                        acc[1] += w * (lh - le[i][j]).powi(2);
                        acc[4] += w * le[i][j] * le[i][j];
                    }
                }
                acc[2] += w * (ph - pe).powi(2);
                acc[5] += w * pe * pe;
            }
            acc
        })
        .collect();
    let mut acc = [0.0; 6];
    for p in &parts {
        for (a, b) in acc.iter_mut().zip(p) {
            *a += b;
        }
    }
    let s = acc.map(f64::sqrt);
    ErrorNorms {
        abs_u: s[0],
        abs_l: s[1],
        abs_p: s[2],
        rel_u: rel(s[0], s[3]),
        rel_l: rel(s[1], s[4]),
        rel_p: rel(s[2], s[5]),
    }
}

/// `sum_T int_T |div u_h| dx` with the high-order rule.
pub fn divergence_l1(ctx: &FormContext, mesh: &Mesh, layout: &DofLayout, state: &FieldState) -> f64 {
    let parts: Vec<f64> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let g = CellGeometry::new(mesh, c);
            let grads = ctx.physical_grads(&ctx.high_tab, &g);
            let u = state.velocity_of(layout, c);
            let dk = layout.dim_k();
            grads
                .iter()
                .enumerate()
                .map(|(q, gq)| {
                    let div: f64 = (0..dk).map(|a| u[a] * gq[a][0] + u[dk + a] * gq[a][1]).sum();
                    ctx.high_tab.weights[q] * g.map.det * div.abs()
                })
                .sum()
        })
        .collect();
    parts.iter().sum()
}

/// Pointwise divergence and normal-trace continuity of `u_h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceCheck {
    /// Largest `|div u_h|` over all quadrature points.
    pub max_div: f64,
    /// Largest edge `L^2` norm of the normal jump (interior edges) or of
    /// `u_h . n` (boundary edges).
    pub max_normal_jump: f64,
}

pub fn divergence_check(ctx: &FormContext, mesh: &Mesh, layout: &DofLayout, state: &FieldState) -> DivergenceCheck {
    let dk = layout.dim_k();
    let max_div = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let g = CellGeometry::new(mesh, c);
            let grads = ctx.physical_grads(&ctx.high_tab, &g);
            let u = state.velocity_of(layout, c);
            grads
                .iter()
                .map(|gq| (0..dk).map(|a| u[a] * gq[a][0] + u[dk + a] * gq[a][1]).sum::<f64>().abs())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);

    // u_h . n_E from each side, sampled at canonical edge parameters
    let tab = &ctx.high_edge_tab;
    let nq = tab.params.len();
    let mut side_vals: Vec<Vec<f64>> = vec![vec![0.0; nq]; mesh.num_edges()];
    for c in 0..mesh.num_cells() {
        let g = CellGeometry::new(mesh, c);
        let u = state.velocity_of(layout, c);
        for l in 0..3 {
            let e = g.edges[l];
            let n = mesh.edge_normals[e];
            for (q, phi) in tab.cell_values[l].iter().enumerate() {
                // local parameter s maps to canonical t = s (sign > 0) or 1 - s
                let qi = if g.signs[l] > 0.0 { q } else { nq - 1 - q };
                let v = eval_vector(u, phi, dk);
                let un = v[0] * n[0] + v[1] * n[1];
                // accumulate with opposite signs so interior edges hold the jump
                let side = if mesh.edge_cells[e].0 == c { 1.0 } else { -1.0 };
                side_vals[e][qi] += side * un;
            }
        }
    }
    let max_normal_jump = side_vals
        .iter()
        .enumerate()
        .map(|(e, vals)| {
            // Gauss points are symmetric, so index reversal matches t -> 1 - t
            let s: f64 = vals.iter().zip(&tab.weights).map(|(v, w)| w * v * v).sum();
            (s * mesh.edge_lengths[e]).sqrt()
        })
        .fold(0.0, f64::max);
    DivergenceCheck {
        max_div,
        max_normal_jump,
    }
}

/// One refinement level of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    /// `sqrt(2) / h`; the number of squares per side on uniform meshes.
    pub n: f64,
    pub h: f64,
    pub err_u_rel: f64,
    pub rate_u: Option<f64>,
    pub err_l_rel: f64,
    pub rate_l: Option<f64>,
    pub err_p_rel: f64,
    pub rate_p: Option<f64>,
    pub div_l1: f64,
    pub iters: usize,
    pub converged: bool,
}

impl ConvergenceRow {
    pub fn new(h: f64, errors: &ErrorNorms, div_l1: f64, iters: usize, converged: bool) -> ConvergenceRow {
        ConvergenceRow {
            n: std::f64::consts::SQRT_2 / h,
            h,
            err_u_rel: errors.rel_u,
            rate_u: None,
            err_l_rel: errors.rel_l,
            rate_l: None,
            err_p_rel: errors.rel_p,
            rate_p: None,
            div_l1,
            iters,
            converged,
        }
    }
}

/// Whether each successive `n` doubles the previous one.
pub fn is_doubling(rows: &[ConvergenceRow]) -> bool {
    rows.windows(2).all(|w| ((w[1].n / w[0].n) - 2.0).abs() < 1e-9)
}

/// Attaches `log2(err_prev / err_curr)` to every row after the first.
pub fn rate_table(mut rows: Vec<ConvergenceRow>) -> Result<Vec<ConvergenceRow>> {
    if let Some(w) = rows.windows(2).find(|w| ((w[1].n / w[0].n) - 2.0).abs() >= 1e-9) {
        return Err(HdgError::NonDoubling {
            prev: w[0].n,
            next: w[1].n,
        });
    }
    let rate = |a: f64, b: f64| (a / b).log2();
    for i in 1..rows.len() {
        let (prev, cur) = (rows[i - 1].clone(), &mut rows[i]);
        cur.rate_u = Some(rate(prev.err_u_rel, cur.err_u_rel));
        cur.rate_l = Some(rate(prev.err_l_rel, cur.err_l_rel));
        cur.rate_p = Some(rate(prev.err_p_rel, cur.err_p_rel));
    }
    for r in rows.iter_mut().take(1) {
        r.rate_u = None;
        r.rate_l = None;
        r.rate_p = None;
    }
    Ok(rows)
}
