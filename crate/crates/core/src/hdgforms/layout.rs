use std::ops::Range;

use crate::error::{HdgError, Result};
use crate::femcore::{dim_p, PHI0};
use crate::mesh::Mesh;

/// Degree-of-freedom layout of the spaces `K_h x V_h x Q_h` (cell interiors)
/// and `V^_h x Q^_h` (edges).
///
/// Within a cell the tensor block is ordered by component `2 i + j`, then
/// basis function; the velocity block by component, then basis function.
/// Edge blocks hold the velocity trace (interior edges only) followed by the
/// pressure trace. The global trace vector concatenates edge blocks in edge
/// order.
///
/// The element system carries a zero-mean multiplier; globally it is
/// replaced by pinning [`DofLayout::pinned_dof`] and shifting the pressure
/// pair afterwards (see [`FieldState::shift_pressure`]).
#[derive(Debug, Clone)]
pub struct DofLayout {
    pub k: usize,
    pub m: usize,
    pub n_cells: usize,
    pub n_edges: usize,
    /// Per-cell sizes.
    pub n_l: usize,
    pub n_u: usize,
    pub n_p: usize,
    /// Per-edge sizes (velocity trace counted for interior edges only).
    pub n_uhat: usize,
    pub n_phat: usize,
    trace_offsets: Vec<usize>,
    has_uhat: Vec<bool>,
    n_trace: usize,
}

impl DofLayout {
    pub fn new(mesh: &Mesh, k: usize, m: usize) -> Result<DofLayout> {
        if k < 1 {
            return Err(HdgError::UnsupportedDegree {
                degree: k,
                reason: "velocity degree must be at least 1",
            });
        }
        if m + 1 != k && m != k {
            return Err(HdgError::UnsupportedDegree {
                degree: m,
                reason: "tensor degree must be k or k - 1",
            });
        }
        let n_uhat = 2 * (k + 1);
        let n_phat = k + 1;
        let mut trace_offsets = Vec::with_capacity(mesh.num_edges() + 1);
        let mut has_uhat = Vec::with_capacity(mesh.num_edges());
        let mut off = 0;
        for &b in &mesh.boundary {
            trace_offsets.push(off);
            has_uhat.push(!b);
            off += if b { n_phat } else { n_uhat + n_phat };
        }
        trace_offsets.push(off);
        Ok(DofLayout {
            k,
            m,
            n_cells: mesh.num_cells(),
            n_edges: mesh.num_edges(),
            n_l: 4 * dim_p(m),
            n_u: 2 * dim_p(k),
            n_p: dim_p(k - 1),
            n_uhat,
            n_phat,
            trace_offsets,
            has_uhat,
            n_trace: off,
        })
    }

    pub fn dim_m(&self) -> usize {
        dim_p(self.m)
    }

    pub fn dim_k(&self) -> usize {
        dim_p(self.k)
    }

    pub fn n_interior(&self) -> usize {
        self.n_l + self.n_u + self.n_p
    }

    pub fn n_trace(&self) -> usize {
        self.n_trace
    }

    pub fn interior_range(&self, c: usize) -> Range<usize> {
        c * self.n_interior()..(c + 1) * self.n_interior()
    }

    /// Velocity trace dofs of edge `e` within the trace vector; `None` on the boundary.
    pub fn uhat_range(&self, e: usize) -> Option<Range<usize>> {
        self.has_uhat[e].then(|| self.trace_offsets[e]..self.trace_offsets[e] + self.n_uhat)
    }

    pub fn phat_range(&self, e: usize) -> Range<usize> {
        let start = self.trace_offsets[e] + if self.has_uhat[e] { self.n_uhat } else { 0 };
        start..start + self.n_phat
    }

    /// Constant mode of the pressure trace on edge 0, fixed to zero in the
    /// global system to remove the `(c, -c)` pressure kernel.
    pub fn pinned_dof(&self) -> usize {
        self.phat_range(0).start
    }

    /// Unknowns of the statically condensed system: the traces.
    pub fn condensed_dim(&self) -> usize {
        self.n_trace
    }

    /// All interior unknowns, then traces.
    pub fn monolithic_dim(&self) -> usize {
        self.n_cells * self.n_interior() + self.n_trace
    }

    /// Trace-vector indices of the local trace block of a cell, ordered as
    /// `[uhat(edge 0..3), phat(edge 0..3), multiplier]` as in the element
    /// system; boundary velocity trace slots and the multiplier are `None`.
    pub fn cell_trace_dofs(&self, mesh: &Mesh, c: usize) -> Vec<Option<usize>> {
        let mut out = Vec::with_capacity(3 * (self.n_uhat + self.n_phat) + 1);
        for &e in &mesh.cell_edges[c] {
            match self.uhat_range(e) {
                Some(r) => out.extend(r.map(Some)),
                None => out.extend(std::iter::repeat(None).take(self.n_uhat)),
            }
        }
        for &e in &mesh.cell_edges[c] {
            out.extend(self.phat_range(e).map(Some));
        }
        out.push(None);
        out
    }
}

/// Coefficients of `(L_h, u_h, p_h, u^_h, p^_h)`.
///
/// The velocity trace is stored for every edge and stays zero on boundary edges.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub tensor: Vec<f64>,
    pub velocity: Vec<f64>,
    pub pressure: Vec<f64>,
    pub vel_trace: Vec<f64>,
    pub pres_trace: Vec<f64>,
}

impl FieldState {
    pub fn zeros(layout: &DofLayout) -> FieldState {
        FieldState {
            tensor: vec![0.0; layout.n_cells * layout.n_l],
            velocity: vec![0.0; layout.n_cells * layout.n_u],
            pressure: vec![0.0; layout.n_cells * layout.n_p],
            vel_trace: vec![0.0; layout.n_edges * layout.n_uhat],
            pres_trace: vec![0.0; layout.n_edges * layout.n_phat],
        }
    }

    pub fn tensor_of(&self, layout: &DofLayout, c: usize) -> &[f64] {
        &self.tensor[c * layout.n_l..(c + 1) * layout.n_l]
    }

    pub fn velocity_of(&self, layout: &DofLayout, c: usize) -> &[f64] {
        &self.velocity[c * layout.n_u..(c + 1) * layout.n_u]
    }

    pub fn pressure_of(&self, layout: &DofLayout, c: usize) -> &[f64] {
        &self.pressure[c * layout.n_p..(c + 1) * layout.n_p]
    }

    pub fn vel_trace_of(&self, layout: &DofLayout, e: usize) -> &[f64] {
        &self.vel_trace[e * layout.n_uhat..(e + 1) * layout.n_uhat]
    }

    pub fn pres_trace_of(&self, layout: &DofLayout, e: usize) -> &[f64] {
        &self.pres_trace[e * layout.n_phat..(e + 1) * layout.n_phat]
    }

    /// Local velocity-pair vector `(u_T, u^_E0, u^_E1, u^_E2)` of a cell.
    pub fn local_velocity_pair(&self, mesh: &Mesh, layout: &DofLayout, c: usize) -> Vec<f64> {
        let mut x = self.velocity_of(layout, c).to_vec();
        for &e in &mesh.cell_edges[c] {
            x.extend_from_slice(self.vel_trace_of(layout, e));
        }
        x
    }

    /// Writes the trace-vector solution (condensed ordering) into the trace fields.
    pub fn set_traces(&mut self, layout: &DofLayout, traces: &[f64]) {
        for e in 0..layout.n_edges {
            let dst = &mut self.vel_trace[e * layout.n_uhat..(e + 1) * layout.n_uhat];
            match layout.uhat_range(e) {
                Some(r) => dst.copy_from_slice(&traces[r]),
                None => dst.fill(0.0),
            }
            self.pres_trace[e * layout.n_phat..(e + 1) * layout.n_phat]
                .copy_from_slice(&traces[layout.phat_range(e)]);
        }
    }

    /// Trace vector in condensed ordering (inverse of [`FieldState::set_traces`]).
    pub fn traces(&self, layout: &DofLayout) -> Vec<f64> {
        let mut out = vec![0.0; layout.condensed_dim()];
        for e in 0..layout.n_edges {
            if let Some(r) = layout.uhat_range(e) {
                out[r].copy_from_slice(self.vel_trace_of(layout, e));
            }
            out[layout.phat_range(e)].copy_from_slice(self.pres_trace_of(layout, e));
        }
        out
    }

    /// Velocity pair `(u_h, u^_h)` only, other fields zeroed.
    pub fn velocity_part(&self) -> FieldState {
        FieldState {
            tensor: vec![0.0; self.tensor.len()],
            velocity: self.velocity.clone(),
            pressure: vec![0.0; self.pressure.len()],
            vel_trace: self.vel_trace.clone(),
            pres_trace: vec![0.0; self.pres_trace.len()],
        }
    }

    /// Mean of `p_h` over the mesh.
    pub fn pressure_mean(&self, mesh: &Mesh, layout: &DofLayout) -> f64 {
        // only the constant basis function has nonzero integral
        let total: f64 = (0..layout.n_cells)
            .map(|c| mesh.cell_areas[c] * PHI0 * self.pressure_of(layout, c)[0])
            .sum();
        total / mesh.cell_areas.iter().sum::<f64>()
    }

    /// Adds `(c, -c)` to the pressure pair, which lies in the kernel of `d_h`.
    pub fn shift_pressure(&mut self, layout: &DofLayout, c: f64) {
        for cell in 0..layout.n_cells {
            self.pressure[cell * layout.n_p] += c / PHI0;
        }
        for e in 0..layout.n_edges {
            self.pres_trace[e * layout.n_phat] -= c;
        }
    }

    pub fn is_consistent(&self, layout: &DofLayout) -> bool {
        self.tensor.len() == layout.n_cells * layout.n_l
            && self.velocity.len() == layout.n_cells * layout.n_u
            && self.pressure.len() == layout.n_cells * layout.n_p
            && self.vel_trace.len() == layout.n_edges * layout.n_uhat
            && self.pres_trace.len() == layout.n_edges * layout.n_phat
            && (0..layout.n_edges)
                .filter(|&e| layout.uhat_range(e).is_none())
                .all(|e| self.vel_trace_of(layout, e).iter().all(|&x| x == 0.0))
    }
}
