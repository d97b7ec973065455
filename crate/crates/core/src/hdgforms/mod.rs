//! Degree-of-freedom layout and element-level forms of the HDG scheme.

mod layout;
mod local;
mod source;

pub use layout::{DofLayout, FieldState};
pub use local::{CellGeometry, FormContext, LocalBlocks, QuadratureDegrees, SourceFn, Stabilization};
pub use source::{manufactured_source, Example};

use nalgebra::DVector;
use rayon::prelude::*;

use crate::mesh::{Mesh, Point};

/// Tensor coefficients of `K_h V` on every cell, for the velocity pair of `state`.
pub fn apply_kh(ctx: &FormContext, mesh: &Mesh, layout: &DofLayout, state: &FieldState) -> Vec<f64> {
    let blocks: Vec<DVector<f64>> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let g = CellGeometry::new(mesh, c);
            ctx.apply_kh_cell(&g, &state.local_velocity_pair(mesh, layout, c))
        })
        .collect();
    blocks.iter().flat_map(|b| b.iter().copied()).collect()
}

/// Cell-wise `L^2` projection of a vector field onto `[P_k]^2` and edge-wise
/// projection onto `[P_k(E)]^2` for interior edges; boundary traces stay zero.
/// Pressure and tensor fields are projected when provided.
pub fn interpolate_state(
    ctx: &FormContext,
    mesh: &Mesh,
    layout: &DofLayout,
    u: &(dyn Fn(Point) -> [f64; 2] + Sync),
    tensor: Option<&(dyn Fn(Point) -> [[f64; 2]; 2] + Sync)>,
    p: Option<&(dyn Fn(Point) -> f64 + Sync)>,
) -> FieldState {
    let mut s = FieldState::zeros(layout);
    let tab = &ctx.high_tab;
    let (dk, dm, dp) = (layout.dim_k(), layout.dim_m(), layout.n_p);
    for c in 0..mesh.num_cells() {
        let g = CellGeometry::new(mesh, c);
        // orthonormal reference basis: the physical mass matrix is det * I
        let mut cu = vec![0.0; layout.n_u];
        let mut cl = vec![0.0; layout.n_l];
        let mut cp = vec![0.0; dp];
        for (q, phi) in tab.values.iter().enumerate() {
            let w = tab.weights[q];
            let x = g.map.map(tab.points[q]);
            let uv = u(x);
            for comp in 0..2 {
                for a in 0..dk {
                    cu[comp * dk + a] += w * uv[comp] * phi[a];
                }
            }
            if let Some(t) = tensor {
                let tv = t(x);
                for i in 0..2 {
                    for j in 0..2 {
                        for a in 0..dm {
                            cl[(2 * i + j) * dm + a] += w * tv[i][j] * phi[a];
                        }
                    }
                }
            }
            if let Some(p) = p {
                let pv = p(x);
                for a in 0..dp {
                    cp[a] += w * pv * phi[a];
                }
            }
        }
        s.velocity[c * layout.n_u..(c + 1) * layout.n_u].copy_from_slice(&cu);
        s.tensor[c * layout.n_l..(c + 1) * layout.n_l].copy_from_slice(&cl);
        s.pressure[c * dp..(c + 1) * dp].copy_from_slice(&cp);
    }
    let et = &ctx.high_edge_tab;
    let ke = layout.k + 1;
    for e in 0..mesh.num_edges() {
        let mut cu = vec![0.0; 2 * ke];
        let mut cp = vec![0.0; ke];
        for (q, psi) in et.edge_values[0].iter().enumerate() {
            let x = mesh.edge_point(e, et.params[q]);
            let w = et.weights[q];
            let uv = u(x);
            let pv = p.map(|p| p(x)).unwrap_or(0.0);
            for b in 0..ke {
                cu[b] += w * uv[0] * psi[b];
                cu[ke + b] += w * uv[1] * psi[b];
                cp[b] += w * pv * psi[b];
            }
        }
        if !mesh.boundary[e] {
            s.vel_trace[e * layout.n_uhat..(e + 1) * layout.n_uhat].copy_from_slice(&cu);
        }
        // pressure trace carries -p, the sign implied by d_h
        for (dst, v) in s.pres_trace[e * ke..(e + 1) * ke].iter_mut().zip(&cp) {
            *dst = -v;
        }
    }
    s
}
