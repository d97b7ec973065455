use nalgebra::{DMatrix, DVector};

use super::layout::{DofLayout, FieldState};
use crate::error::Result;
use crate::femcore::{
    dim_p, make_cell_basis, make_edge_basis, make_quadrature, AffineMap, CellBasis, CellTable,
    Domain, EdgeBasis, EdgeTable,
};
use crate::mesh::{Mesh, Point};

/// Vector-valued source term `f(x, y)`.
pub type SourceFn<'a> = dyn Fn(Point) -> [f64; 2] + Sync + 'a;

/// Quadrature degrees used by the scheme for velocity degree `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureDegrees {
    pub cell: usize,
    pub edge: usize,
    /// Right-hand sides and error norms.
    pub high: usize,
}

impl QuadratureDegrees {
    pub fn for_degree(k: usize) -> QuadratureDegrees {
        QuadratureDegrees {
            cell: 3 * k + 2,
            edge: 3 * k + 1,
            high: (2 * k + 12).max(14),
        }
    }
}

/// Length scale in the stabilization parameter `tau = 1 / h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stabilization {
    /// `h` is the diameter of the cell on whose boundary `tau` acts.
    #[default]
    CellDiameter,
    /// `h` is the length of the edge.
    EdgeLength,
}

impl std::str::FromStr for Stabilization {
    type Err = crate::error::HdgError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cell" => Ok(Stabilization::CellDiameter),
            "edge" => Ok(Stabilization::EdgeLength),
            other => Err(crate::error::HdgError::Config(format!(
                "unknown stabilization '{other}' (expected cell or edge)"
            ))),
        }
    }
}

/// Geometry of one cell as seen by the local forms.
#[derive(Debug, Clone, Copy)]
pub struct CellGeometry {
    pub map: AffineMap,
    pub edges: [usize; 3],
    pub signs: [f64; 3],
    pub normals: [Point; 3],
    pub lengths: [f64; 3],
    pub boundary: [bool; 3],
    pub diameter: f64,
}

impl CellGeometry {
    pub fn new(mesh: &Mesh, c: usize) -> CellGeometry {
        let edges = mesh.cell_edges[c];
        CellGeometry {
            map: AffineMap::for_cell(mesh, c),
            edges,
            signs: mesh.cell_edge_signs[c],
            normals: std::array::from_fn(|i| mesh.outward_normal(c, i)),
            lengths: edges.map(|e| mesh.edge_lengths[e]),
            boundary: edges.map(|e| mesh.boundary[e]),
            diameter: mesh.cell_diameters[c],
        }
    }
}

/// Element matrices of one cell. Rows index test functions, columns trial
/// functions; velocity-pair blocks are ordered `(u_T, u^_E0, u^_E1, u^_E2)`.
#[derive(Debug, Clone)]
pub struct LocalBlocks {
    /// `a_h(L, G) = nu^{-1} (L, G)_T`, `n_l x n_l`.
    pub a: DMatrix<f64>,
    /// Volume part of `c_h(U, G)`: `(u, div G)_T`, `n_l x n_u`.
    pub c_u: DMatrix<f64>,
    /// Trace part of `c_h(U, G)`: `-<u^, G n>_dT`, `n_l x 3 n_uhat`.
    pub c_uhat: DMatrix<f64>,
    /// `(div v, p)_T`, `n_u x n_p`.
    pub d_p: DMatrix<f64>,
    /// `<v.n, p^>_dT`, `n_u x 3 n_phat`.
    pub d_phat: DMatrix<f64>,
    /// `s_h` on the velocity pair.
    pub s: DMatrix<f64>,
    /// `b_h(W; ., .)` on the velocity pair.
    pub b: DMatrix<f64>,
    /// `(q, 1)_T` for the pressure basis.
    pub mean_p: DVector<f64>,
    /// `(f, v)_T`.
    pub load: DVector<f64>,
}

/// Tabulated bases and quadrature shared by every cell.
#[derive(Debug, Clone)]
pub struct FormContext {
    pub k: usize,
    pub m: usize,
    pub nu: f64,
    pub stabilization: Stabilization,
    pub degrees: QuadratureDegrees,
    pub cell_basis: CellBasis,
    pub edge_basis: EdgeBasis,
    pub cell_tab: CellTable,
    pub edge_tab: EdgeTable,
    pub high_tab: CellTable,
    pub high_edge_tab: EdgeTable,
}

impl FormContext {
    pub fn new(layout: &DofLayout, nu: f64) -> Result<FormContext> {
        let k = layout.k;
        let degrees = QuadratureDegrees::for_degree(k);
        let cell_basis = make_cell_basis(k);
        let edge_basis = make_edge_basis(k);
        let cell_rule = make_quadrature(Domain::Triangle, degrees.cell)?;
        let edge_rule = make_quadrature(Domain::Segment, degrees.edge)?;
        let high_rule = make_quadrature(Domain::Triangle, degrees.high)?;
        let high_edge_rule = make_quadrature(Domain::Segment, degrees.high)?;
        Ok(FormContext {
            k,
            m: layout.m,
            nu,
            stabilization: Stabilization::default(),
            degrees,
            cell_tab: CellTable::new(&cell_basis, &cell_rule),
            edge_tab: EdgeTable::new(&cell_basis, &edge_basis, &edge_rule),
            high_tab: CellTable::new(&cell_basis, &high_rule),
            high_edge_tab: EdgeTable::new(&cell_basis, &edge_basis, &high_edge_rule),
            cell_basis,
            edge_basis,
        })
    }

    pub fn with_stabilization(mut self, stabilization: Stabilization) -> FormContext {
        self.stabilization = stabilization;
        self
    }

    /// `tau` on local edge `l` of the cell.
    pub fn tau(&self, g: &CellGeometry, l: usize) -> f64 {
        match self.stabilization {
            Stabilization::CellDiameter => 1.0 / g.diameter,
            Stabilization::EdgeLength => 1.0 / g.lengths[l],
        }
    }

    fn dk(&self) -> usize {
        dim_p(self.k)
    }

    fn dm(&self) -> usize {
        dim_p(self.m)
    }

    fn dp(&self) -> usize {
        dim_p(self.k - 1)
    }

    fn ke(&self) -> usize {
        self.k + 1
    }

    /// Physical gradients of the cell basis at the points of `tab`.
    pub fn physical_grads(&self, tab: &CellTable, g: &CellGeometry) -> Vec<Vec<[f64; 2]>> {
        tab.ref_grads
            .iter()
            .map(|row| row.iter().map(|&r| g.map.push_grad(r)).collect())
            .collect()
    }

    /// Scalar mass matrix of `P_m`, `(phi_a, phi_b)_T`.
    pub fn scalar_mass(&self, g: &CellGeometry, dim: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(dim, dim);
        for (q, phi) in self.cell_tab.values.iter().enumerate() {
            let w = self.cell_tab.weights[q] * g.map.det;
            for a in 0..dim {
                for b in 0..dim {
                    m[(a, b)] += w * phi[a] * phi[b];
                }
            }
        }
        m
    }

    /// Mass matrix of the tensor space `[P_m]^{2x2}`.
    pub fn tensor_mass(&self, g: &CellGeometry) -> DMatrix<f64> {
        let dm = self.dm();
        let ms = self.scalar_mass(g, dm);
        let mut out = DMatrix::zeros(4 * dm, 4 * dm);
        for r in 0..4 {
            out.view_mut((r * dm, r * dm), (dm, dm)).copy_from(&ms);
        }
        out
    }

    /// Both parts of `c_h(., G)`: `(u, div G)_T` and `-<u^, G n>_dT`.
    pub fn coupling_c(&self, g: &CellGeometry) -> (DMatrix<f64>, DMatrix<f64>) {
        let (dm, dk, ke) = (self.dm(), self.dk(), self.ke());
        let n_uhat = 2 * ke;
        let mut cu = DMatrix::zeros(4 * dm, 2 * dk);
        let grads = self.physical_grads(&self.cell_tab, g);
        for (q, phi) in self.cell_tab.values.iter().enumerate() {
            let w = self.cell_tab.weights[q] * g.map.det;
            for i in 0..2 {
                for j in 0..2 {
                    for a in 0..dm {
                        let div = grads[q][a][j];
                        let row = (2 * i + j) * dm + a;
                        for b in 0..dk {
                            cu[(row, i * dk + b)] += w * phi[b] * div;
                        }
                    }
                }
            }
        }
        let mut cuh = DMatrix::zeros(4 * dm, 3 * n_uhat);
        for l in 0..3 {
            let n = g.normals[l];
            let psi_t = self.edge_tab.edge_values_for(g.signs[l]);
            for (q, phi) in self.edge_tab.cell_values[l].iter().enumerate() {
                let w = self.edge_tab.weights[q] * g.lengths[l];
                let psi = &psi_t[q];
                for i in 0..2 {
                    for j in 0..2 {
                        for a in 0..dm {
                            let row = (2 * i + j) * dm + a;
                            for b in 0..ke {
                                cuh[(row, l * n_uhat + i * ke + b)] -= w * phi[a] * psi[b] * n[j];
                            }
                        }
                    }
                }
            }
        }
        (cu, cuh)
    }

    /// Both parts of `d_h(V, .)`: `(div v, p)_T` and `<v.n, p^>_dT`.
    pub fn coupling_d(&self, g: &CellGeometry) -> (DMatrix<f64>, DMatrix<f64>) {
        let (dk, dp, ke) = (self.dk(), self.dp(), self.ke());
        let mut dpm = DMatrix::zeros(2 * dk, dp);
        let grads = self.physical_grads(&self.cell_tab, g);
        for (q, phi) in self.cell_tab.values.iter().enumerate() {
            let w = self.cell_tab.weights[q] * g.map.det;
            for c in 0..2 {
                for a in 0..dk {
                    for b in 0..dp {
                        dpm[(c * dk + a, b)] += w * grads[q][a][c] * phi[b];
                    }
                }
            }
        }
        let mut dph = DMatrix::zeros(2 * dk, 3 * ke);
        for l in 0..3 {
            let n = g.normals[l];
            let psi_t = self.edge_tab.edge_values_for(g.signs[l]);
            for (q, phi) in self.edge_tab.cell_values[l].iter().enumerate() {
                let w = self.edge_tab.weights[q] * g.lengths[l];
                for c in 0..2 {
                    for a in 0..dk {
                        for b in 0..ke {
                            dph[(c * dk + a, l * ke + b)] += w * phi[a] * n[c] * psi_t[q][b];
                        }
                    }
                }
            }
        }
        (dpm, dph)
    }

    /// `<tau (u - u^), v - v^>_dT` on the velocity pair (without the factor nu).
    pub fn jump_matrix(&self, g: &CellGeometry) -> DMatrix<f64> {
        let (dk, ke) = (self.dk(), self.ke());
        let n_u = 2 * dk;
        let n_uhat = 2 * ke;
        let n = n_u + 3 * n_uhat;
        let mut s = DMatrix::zeros(n, n);
        for l in 0..3 {
            let tau = self.tau(g, l);
            let psi_t = self.edge_tab.edge_values_for(g.signs[l]);
            for (q, phi) in self.edge_tab.cell_values[l].iter().enumerate() {
                let w = tau * self.edge_tab.weights[q] * g.lengths[l];
                let psi = &psi_t[q];
                for c in 0..2 {
                    // (u - u^) restricted to component c as a combination of local dofs
                    let mut ids = Vec::with_capacity(dk + ke);
                    for a in 0..dk {
                        ids.push((c * dk + a, phi[a]));
                    }
                    for b in 0..ke {
                        ids.push((n_u + l * n_uhat + c * ke + b, -psi[b]));
                    }
                    for &(r, vr) in &ids {
                        for &(col, vc) in &ids {
                            s[(r, col)] += w * vr * vc;
                        }
                    }
                }
            }
        }
        s
    }

    /// `b_h(W; U, V)` on the velocity pair for the frozen convecting pair
    /// `W = (w_cell, w_traces)`; `w_traces[l]` is `None` on boundary edges.
    pub fn convection(
        &self,
        g: &CellGeometry,
        w_cell: &[f64],
        w_traces: [Option<&[f64]>; 3],
    ) -> DMatrix<f64> {
        let (dk, ke) = (self.dk(), self.ke());
        let n_u = 2 * dk;
        let n_uhat = 2 * ke;
        let n = n_u + 3 * n_uhat;
        let mut b = DMatrix::zeros(n, n);
        if w_cell.iter().all(|&x| x == 0.0) && w_traces.iter().flatten().all(|t| t.iter().all(|&x| x == 0.0)) {
            return b;
        }
        // N[a][b] = (phi_a, w . grad phi_b)_T
        let mut nmat = DMatrix::<f64>::zeros(dk, dk);
        let grads = self.physical_grads(&self.cell_tab, g);
        for (q, phi) in self.cell_tab.values.iter().enumerate() {
            let wq = self.cell_tab.weights[q] * g.map.det;
            let mut wv = [0.0; 2];
            for c in 0..2 {
                wv[c] = (0..dk).map(|a| w_cell[c * dk + a] * phi[a]).sum();
            }
            for bb in 0..dk {
                let adv = wv[0] * grads[q][bb][0] + wv[1] * grads[q][bb][1];
                for a in 0..dk {
                    nmat[(a, bb)] += wq * phi[a] * adv;
                }
            }
        }
        for c in 0..2 {
            for a in 0..dk {
                for bb in 0..dk {
                    b[(c * dk + a, c * dk + bb)] = 0.5 * (nmat[(a, bb)] - nmat[(bb, a)]);
                }
            }
        }
        for l in 0..3 {
            let Some(wt) = w_traces[l] else { continue };
            let n = g.normals[l];
            let psi_t = self.edge_tab.edge_values_for(g.signs[l]);
            // E[a][b] = <(w^ . n) psi_a, phi_b>_E
            let mut emat = DMatrix::<f64>::zeros(ke, dk);
            for (q, phi) in self.edge_tab.cell_values[l].iter().enumerate() {
                let w = self.edge_tab.weights[q] * g.lengths[l];
                let psi = &psi_t[q];
                let what = [
                    (0..ke).map(|a| wt[a] * psi[a]).sum::<f64>(),
                    (0..ke).map(|a| wt[ke + a] * psi[a]).sum::<f64>(),
                ];
                let wn = what[0] * n[0] + what[1] * n[1];
                for a in 0..ke {
                    for bb in 0..dk {
                        emat[(a, bb)] += w * wn * psi[a] * phi[bb];
                    }
                }
            }
            for c in 0..2 {
                for a in 0..ke {
                    let hat = n_u + l * n_uhat + c * ke + a;
                    for bb in 0..dk {
                        let cell = c * dk + bb;
                        b[(hat, cell)] -= 0.5 * emat[(a, bb)];
                        b[(cell, hat)] += 0.5 * emat[(a, bb)];
                    }
                }
            }
        }
        b
    }

    /// `(q, 1)_T` for every pressure basis function.
    pub fn pressure_mean(&self, g: &CellGeometry) -> DVector<f64> {
        let dp = self.dp();
        let mut v = DVector::zeros(dp);
        for (q, phi) in self.cell_tab.values.iter().enumerate() {
            let w = self.cell_tab.weights[q] * g.map.det;
            for a in 0..dp {
                v[a] += w * phi[a];
            }
        }
        v
    }

    /// `(f, v)_T` with the high-order rule.
    pub fn load(&self, g: &CellGeometry, f: &SourceFn) -> DVector<f64> {
        let dk = self.dk();
        let mut v = DVector::zeros(2 * dk);
        for (q, phi) in self.high_tab.values.iter().enumerate() {
            let w = self.high_tab.weights[q] * g.map.det;
            let fx = f(g.map.map(self.high_tab.points[q]));
            for c in 0..2 {
                for a in 0..dk {
                    v[c * dk + a] += w * fx[c] * phi[a];
                }
            }
        }
        v
    }

    /// All element matrices of cell `c`. `frozen` supplies the convecting
    /// velocity of `b_h` (omitted when `None`), `f` the load (zero when `None`).
    pub fn assemble_local(
        &self,
        mesh: &Mesh,
        layout: &DofLayout,
        c: usize,
        frozen: Option<&FieldState>,
        f: Option<&SourceFn>,
    ) -> LocalBlocks {
        let g = CellGeometry::new(mesh, c);
        let (c_u, c_uhat) = self.coupling_c(&g);
        let (d_p, d_phat) = self.coupling_d(&g);
        let s = self.jump_matrix(&g) * self.nu;
        let b = match frozen {
            Some(w) => {
                let traces = std::array::from_fn(|l| {
                    (!g.boundary[l]).then(|| w.vel_trace_of(layout, g.edges[l]))
                });
                self.convection(&g, w.velocity_of(layout, c), traces)
            }
            None => DMatrix::zeros(s.nrows(), s.ncols()),
        };
        let load = match f {
            Some(f) => self.load(&g, f),
            None => DVector::zeros(layout.n_u),
        };
        LocalBlocks {
            a: self.tensor_mass(&g) / self.nu,
            c_u,
            c_uhat,
            d_p,
            d_phat,
            s,
            b,
            mean_p: self.pressure_mean(&g),
            load,
        }
    }

    /// `K_h V` on cell `c`: solves `(K_h V, G)_T = -c_h(V, G)` for all `G`.
    pub fn apply_kh_cell(&self, g: &CellGeometry, v_pair: &[f64]) -> DVector<f64> {
        let (cu, cuh) = self.coupling_c(g);
        let n_u = cu.ncols();
        let x = DVector::from_column_slice(&v_pair[..n_u]);
        let xh = DVector::from_column_slice(&v_pair[n_u..]);
        let rhs = -(cu * x + cuh * xh);
        let mass = self.tensor_mass(g);
        mass.cholesky().expect("tensor mass is SPD").solve(&rhs)
    }
}

impl LocalBlocks {
    pub fn n_interior(&self) -> usize {
        self.a.nrows() + self.c_u.ncols() + self.d_p.ncols()
    }

    pub fn n_trace(&self) -> usize {
        self.c_uhat.ncols() + self.d_phat.ncols() + 1
    }

    /// Full element system in the ordering `[L, u, p | u^, p^, lambda]` for
    /// both rows (tests) and columns (unknowns):
    ///
    /// ```text
    /// a(L,G) + c(U,G)                           = 0
    /// s(U,V) + b(W;U,V) - c(V,L) - d(V,P)        = (f,v)
    /// d(U,Q) + lambda (q,1)                      = 0
    /// (p,1)                                      = 0
    /// ```
    pub fn element_system(&self) -> (DMatrix<f64>, DVector<f64>) {
        let n_l = self.a.nrows();
        let n_u = self.c_u.ncols();
        let n_p = self.d_p.ncols();
        let n_uh = self.c_uhat.ncols();
        let n_ph = self.d_phat.ncols();
        let (o_l, o_u, o_p) = (0, n_l, n_l + n_u);
        let (o_uh, o_ph) = (o_p + n_p, o_p + n_p + n_uh);
        let o_lam = o_ph + n_ph;
        let n = o_lam + 1;
        let mut k = DMatrix::zeros(n, n);

        k.view_mut((o_l, o_l), (n_l, n_l)).copy_from(&self.a);
        k.view_mut((o_l, o_u), (n_l, n_u)).copy_from(&self.c_u);
        k.view_mut((o_l, o_uh), (n_l, n_uh)).copy_from(&self.c_uhat);

        k.view_mut((o_u, o_l), (n_u, n_l)).copy_from(&(-self.c_u.transpose()));
        k.view_mut((o_uh, o_l), (n_uh, n_l)).copy_from(&(-self.c_uhat.transpose()));
        let sb = &self.s + &self.b;
        // velocity pair (u, u^) occupies [o_u, o_u + n_u) and [o_uh, o_uh + n_uh)
        let pair = |i: usize| if i < n_u { o_u + i } else { o_uh + i - n_u };
        for i in 0..n_u + n_uh {
            for j in 0..n_u + n_uh {
                k[(pair(i), pair(j))] += sb[(i, j)];
            }
        }
        k.view_mut((o_u, o_p), (n_u, n_p)).copy_from(&(-&self.d_p));
        k.view_mut((o_u, o_ph), (n_u, n_ph)).copy_from(&(-&self.d_phat));

        k.view_mut((o_p, o_u), (n_p, n_u)).copy_from(&self.d_p.transpose());
        k.view_mut((o_ph, o_u), (n_ph, n_u)).copy_from(&self.d_phat.transpose());
        k.view_mut((o_p, o_lam), (n_p, 1)).copy_from(&self.mean_p);
        k.view_mut((o_lam, o_p), (1, n_p)).copy_from(&self.mean_p.transpose());

        let mut rhs = DVector::zeros(n);
        rhs.rows_mut(o_u, n_u).copy_from(&self.load);
        (k, rhs)
    }
}
