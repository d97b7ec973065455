//! Global assembly, sparse solves, discrete norms and the Picard loop.

mod system;

pub use system::{assemble_global, residual_at, solve_linear, GlobalSystem, LinearSolveInfo, LinearSolver, SolveMode};

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{HdgError, Result};
use crate::hdgforms::{CellGeometry, DofLayout, FieldState, FormContext, SourceFn};
use crate::mesh::Mesh;

/// Reads `THREADS` and sizes the global rayon pool accordingly. Returns the
/// number of worker threads in use.
pub fn configure_threads() -> Result<usize> {
    if let Ok(v) = std::env::var("THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| HdgError::Config(format!("THREADS must be a positive integer, got '{v}'")))?;
        // a pool built earlier in the process wins
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(rayon::current_num_threads())
}

/// `||V||_V^2 = ||K_h V||^2 + sum_T ||tau^{1/2} (v - v^)||^2_dT` on the velocity pair of `state`.
pub fn norm_v(ctx: &FormContext, mesh: &Mesh, layout: &DofLayout, state: &FieldState) -> f64 {
    let parts: Vec<f64> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let g = CellGeometry::new(mesh, c);
            let pair = DVector::from_vec(state.local_velocity_pair(mesh, layout, c));
            let kh = ctx.apply_kh_cell(&g, pair.as_slice());
            let mass = ctx.tensor_mass(&g);
            let jump = ctx.jump_matrix(&g);
            kh.dot(&(&mass * &kh)) + pair.dot(&(&jump * &pair))
        })
        .collect();
    parts.iter().sum::<f64>().max(0.0).sqrt()
}

/// `||Q||_Q^2 = ||q||^2 + sum_T ||tau^{-1/2} (q - q^)||^2_dT` for the pressure pair.
///
/// The stored trace approximates `-p` on each edge, so the jump is formed as `q + q^`.
pub fn norm_q(ctx: &FormContext, mesh: &Mesh, layout: &DofLayout, state: &FieldState) -> f64 {
    let dp = layout.n_p;
    let parts: Vec<f64> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let g = CellGeometry::new(mesh, c);
            let q = state.pressure_of(layout, c);
            let mut sum = 0.0;
            for (i, phi) in ctx.cell_tab.values.iter().enumerate() {
                let v: f64 = (0..dp).map(|a| q[a] * phi[a]).sum();
                sum += ctx.cell_tab.weights[i] * g.map.det * v * v;
            }
            let tab = &ctx.edge_tab;
            for l in 0..3 {
                let qh = state.pres_trace_of(layout, g.edges[l]);
                let psi_t = tab.edge_values_for(g.signs[l]);
                for (i, phi) in tab.cell_values[l].iter().enumerate() {
                    let qv: f64 = (0..dp).map(|a| q[a] * phi[a]).sum();
                    let qhv: f64 = qh.iter().zip(&psi_t[i]).map(|(a, b)| a * b).sum();
                    sum += tab.weights[i] * g.lengths[l] / ctx.tau(&g, l) * (qv + qhv).powi(2);
                }
            }
            sum
        })
        .collect();
    parts.iter().sum::<f64>().sqrt()
}

/// `(f, u_h)` for the velocity of `state`.
pub fn load_pairing(ctx: &FormContext, mesh: &Mesh, layout: &DofLayout, state: &FieldState, f: &SourceFn) -> f64 {
    let parts: Vec<f64> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let g = CellGeometry::new(mesh, c);
            let load = ctx.load(&g, f);
            load.iter().zip(state.velocity_of(layout, c)).map(|(a, b)| a * b).sum()
        })
        .collect();
    parts.iter().sum()
}

/// `state` flattened in the monolithic ordering.
pub fn monolithic_vector(layout: &DofLayout, state: &FieldState) -> Vec<f64> {
    let mut x = Vec::with_capacity(layout.monolithic_dim());
    for c in 0..layout.n_cells {
        x.extend_from_slice(state.tensor_of(layout, c));
        x.extend_from_slice(state.velocity_of(layout, c));
        x.extend_from_slice(state.pressure_of(layout, c));
    }
    x.extend(state.traces(layout));
    x
}

/// Difference of two states, field by field.
pub fn state_difference(a: &FieldState, b: &FieldState) -> FieldState {
    let sub = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p - q).collect::<Vec<f64>>();
    FieldState {
        tensor: sub(&a.tensor, &b.tensor),
        velocity: sub(&a.velocity, &b.velocity),
        pressure: sub(&a.pressure, &b.pressure),
        vel_trace: sub(&a.vel_trace, &b.vel_trace),
        pres_trace: sub(&a.pres_trace, &b.pres_trace),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialGuess {
    /// Solve with the convective term omitted.
    Stokes,
    /// Start from the zero state.
    Zero,
}

#[derive(Debug, Clone, Copy)]
pub struct PicardOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub mode: SolveMode,
    pub initial: InitialGuess,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions {
            tol: 1e-10,
            max_iter: 50,
            mode: SolveMode::Condensed,
            initial: InitialGuess::Stokes,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PicardReport {
    pub iterations: usize,
    /// `||U^{n+1} - U^n||_V` for every step.
    pub increments: Vec<f64>,
    /// `||A(U) x - b|| / ||b||` of the full nonlinear system at the returned state.
    pub final_residual: f64,
    pub converged: bool,
    /// Worst relative residual over all linear solves.
    pub max_linear_residual: f64,
}

/// Relative residual of the nonlinear system at `state`.
pub fn nonlinear_residual(
    ctx: &FormContext,
    mesh: &Mesh,
    layout: &DofLayout,
    state: &FieldState,
    f: Option<&SourceFn>,
) -> Result<f64> {
    // move along the pressure kernel so the pinned dof is zero, as the system expects
    let mut pinned = state.clone();
    pinned.shift_pressure(layout, state.pres_trace_of(layout, 0)[0]);
    Ok(residual_at(ctx, mesh, layout, Some(state), f, &monolithic_vector(layout, &pinned)))
}

/// Oseen fixed point: `U^{n+1}` solves the system with `b_h(U^n; ., .)`,
/// stopping once `||U^{n+1} - U^n||_V <= tol`. A run that exhausts
/// `max_iter` returns its last iterate with `converged = false`.
pub fn picard_solve(
    ctx: &FormContext,
    mesh: &Mesh,
    layout: &DofLayout,
    f: Option<&SourceFn>,
    opts: &PicardOptions,
) -> Result<(FieldState, PicardReport)> {
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(HdgError::Config("Picard needs tol > 0 and max_iter >= 1".into()));
    }
    let mut lin = LinearSolver::new();
    let mut max_linear_residual: f64 = 0.0;
    let mut current = match opts.initial {
        InitialGuess::Zero => FieldState::zeros(layout),
        InitialGuess::Stokes => {
            let sys = assemble_global(ctx, mesh, layout, None, f, opts.mode)?;
            let (s, info) = lin.solve(&sys, mesh, layout)?;
            max_linear_residual = max_linear_residual.max(info.relative_residual);
            s
        }
    };
    let mut increments = Vec::new();
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let sys = assemble_global(ctx, mesh, layout, Some(&current), f, opts.mode)?;
        let (next, info) = lin.solve(&sys, mesh, layout)?;
        max_linear_residual = max_linear_residual.max(info.relative_residual);
        let inc = norm_v(ctx, mesh, layout, &state_difference(&next, &current));
        increments.push(inc);
        current = next;
        if inc <= opts.tol {
            converged = true;
            break;
        }
    }
    let final_residual = nonlinear_residual(ctx, mesh, layout, &current, f)?;
    Ok((
        current,
        PicardReport {
            iterations: increments.len(),
            increments,
            final_residual,
            converged,
            max_linear_residual,
        },
    ))
}

#[cfg(test)]
mod tests;
