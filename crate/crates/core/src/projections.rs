//! Local projections: cell and edge L² projections and the moment-based
//! Raviart-Thomas and BDM interpolations.
//!
//! Vector fields are stored per cell as coefficients of a reference basis
//! `N_i(xi)`; the physical field is `v(x) = J sum_i c_i N_i(xi(x))`, which
//! keeps `[P_r]^2` and `RT_r` invariant under the affine map.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{HdgError, Result};
use crate::femcore::{
    dim_p, make_quadrature, ref_edge_point, AffineMap, CellBasis, Domain, EdgeBasis, QuadRule,
    MAX_QUADRATURE_DEGREE,
};
use crate::mesh::{Mesh, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetSpace {
    /// `P_r(T)` on every cell.
    CellPoly,
    /// `P_r(E)` on every edge.
    EdgePoly,
    /// `RT_r(T) = [P_r(T)]^2 + x P_r(T)`.
    RaviartThomas,
    /// `BDM_r(T) = [P_r(T)]^2`.
    Bdm,
}

/// Coefficient blocks, one per cell (one per edge for [`TargetSpace::EdgePoly`]).
#[derive(Debug, Clone)]
pub struct ProjectedField {
    pub space: TargetSpace,
    pub degree: usize,
    pub blocks: Vec<Vec<f64>>,
}

/// Dimension of the local target space.
pub fn local_dim(space: TargetSpace, r: usize) -> usize {
    match space {
        TargetSpace::CellPoly => dim_p(r),
        TargetSpace::EdgePoly => r + 1,
        TargetSpace::RaviartThomas => (r + 1) * (r + 3),
        TargetSpace::Bdm => 2 * dim_p(r),
    }
}

fn quad_degree(r: usize) -> usize {
    (2 * r + 10).min(MAX_QUADRATURE_DEGREE)
}

fn rule(domain: Domain, r: usize) -> QuadRule {
    make_quadrature(domain, quad_degree(r)).expect("degree within the supported range")
}

/// Reference vector basis of `[P_r]^2` followed, for RT, by `xi * xi1^(r-j) xi2^j`.
struct VectorBasis {
    space: TargetSpace,
    r: usize,
    scalar: CellBasis,
}

impl VectorBasis {
    fn new(space: TargetSpace, r: usize) -> VectorBasis {
        VectorBasis {
            space,
            r,
            scalar: CellBasis::orthonormal(r),
        }
    }

    fn dim(&self) -> usize {
        local_dim(self.space, self.r)
    }

    fn homogeneous(&self, xi: Point) -> Vec<f64> {
        (0..=self.r)
            .map(|j| xi[0].powi((self.r - j) as i32) * xi[1].powi(j as i32))
            .collect()
    }

    fn eval(&self, xi: Point) -> Vec<[f64; 2]> {
        let phi = self.scalar.eval(xi);
        let mut out: Vec<[f64; 2]> = phi.iter().map(|&p| [p, 0.0]).chain(phi.iter().map(|&p| [0.0, p])).collect();
        if self.space == TargetSpace::RaviartThomas {
            out.extend(self.homogeneous(xi).into_iter().map(|m| [xi[0] * m, xi[1] * m]));
        }
        out
    }

    /// Divergence, which is the same in reference and physical coordinates.
    fn div(&self, xi: Point) -> Vec<f64> {
        let g = self.scalar.grad(xi);
        let mut out: Vec<f64> = g.iter().map(|d| d[0]).chain(g.iter().map(|d| d[1])).collect();
        if self.space == TargetSpace::RaviartThomas {
            let s = (self.r + 2) as f64;
            out.extend(self.homogeneous(xi).into_iter().map(|m| s * m));
        }
        out
    }
}

fn apply_jac(map: &AffineMap, v: [f64; 2]) -> [f64; 2] {
    [
        map.jac[0][0] * v[0] + map.jac[0][1] * v[1],
        map.jac[1][0] * v[0] + map.jac[1][1] * v[1],
    ]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Cell L² projection onto `P_r`.
pub fn project_l2_cell<F>(mesh: &Mesh, v: F, r: usize) -> ProjectedField
where
    F: Fn(Point) -> f64 + Sync,
{
    let basis = CellBasis::orthonormal(r);
    let q = rule(Domain::Triangle, r);
    let tab: Vec<Vec<f64>> = q.points.iter().map(|&p| basis.eval(p)).collect();
    let blocks = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let map = AffineMap::for_cell(mesh, c);
            let mut out = vec![0.0; basis.dim()];
            for ((&xi, w), phi) in q.points.iter().zip(&q.weights).zip(&tab) {
                let f = v(map.map(xi)) * w;
                for (o, p) in out.iter_mut().zip(phi) {
                    *o += f * p;
                }
            }
            out
        })
        .collect();
    ProjectedField {
        space: TargetSpace::CellPoly,
        degree: r,
        blocks,
    }
}

/// Edge L² projection onto `P_r`, parametrized by `t` along [`Mesh::edge_point`].
pub fn project_l2_edge<F>(mesh: &Mesh, v: F, r: usize) -> ProjectedField
where
    F: Fn(Point) -> f64 + Sync,
{
    let basis = EdgeBasis::new(r);
    let q = rule(Domain::Segment, r);
    let blocks = (0..mesh.num_edges())
        .into_par_iter()
        .map(|e| {
            let mut out = vec![0.0; basis.dim()];
            for (p, w) in q.iter() {
                let f = v(mesh.edge_point(e, p[0])) * w;
                for (o, psi) in out.iter_mut().zip(basis.eval(p[0])) {
                    *o += f * psi;
                }
            }
            out
        })
        .collect();
    ProjectedField {
        space: TargetSpace::EdgePoly,
        degree: r,
        blocks,
    }
}

/// Test functionals of one cell: edge-normal moments against `P_r(E)` and
/// interior moments against `tests(xi)` (physical vectors).
fn moment_rows<V, T>(mesh: &Mesh, c: usize, r: usize, v: V, tests: T, n_tests: usize) -> Vec<f64>
where
    V: Fn(Point, Point) -> [f64; 2],
    T: Fn(&AffineMap, Point) -> Vec<[f64; 2]>,
{
    let map = AffineMap::for_cell(mesh, c);
    let eb = EdgeBasis::new(r);
    let qe = rule(Domain::Segment, r);
    let mut out = Vec::with_capacity(3 * (r + 1) + n_tests);
    for l in 0..3 {
        let n = mesh.outward_normal(c, l);
        let len = mesh.edge_lengths[mesh.cell_edges[c][l]];
        let mut m = vec![0.0; r + 1];
        for (p, w) in qe.iter() {
            let xi = ref_edge_point(l, p[0]);
            let vn = dot(v(xi, map.map(xi)), n) * w * len;
            for (mi, psi) in m.iter_mut().zip(eb.eval(p[0])) {
                *mi += vn * psi;
            }
        }
        out.extend(m);
    }
    if n_tests > 0 {
        let qc = rule(Domain::Triangle, r);
        let mut m = vec![0.0; n_tests];
        for (xi, w) in qc.iter() {
            let val = v(xi, map.map(xi));
            for (mi, t) in m.iter_mut().zip(tests(&map, xi)) {
                *mi += dot(val, t) * w * map.det;
            }
        }
        out.extend(m);
    }
    out
}

/// Interior test functions for RT_r: `[P_{r-1}]^2`.
fn rt_tests(r: usize) -> (usize, impl Fn(&AffineMap, Point) -> Vec<[f64; 2]> + Sync) {
    let basis = (r > 0).then(|| CellBasis::orthonormal(r - 1));
    let n = if r > 0 { 2 * dim_p(r - 1) } else { 0 };
    let f = move |_: &AffineMap, xi: Point| match &basis {
        Some(b) => {
            let phi = b.eval(xi);
            phi.iter().map(|&p| [p, 0.0]).chain(phi.iter().map(|&p| [0.0, p])).collect()
        }
        None => Vec::new(),
    };
    (n, f)
}

/// Interior test functions for BDM_r: `grad p` for nonconstant `p` in
/// `P_{r-1}`, then `curl(b_T p)` for `p` in `P_{r-2}`.
fn bdm_tests(r: usize) -> (usize, impl Fn(&AffineMap, Point) -> Vec<[f64; 2]> + Sync) {
    let grad_basis = CellBasis::orthonormal(r - 1);
    let bubble_basis = (r >= 2).then(|| CellBasis::orthonormal(r - 2));
    let n = dim_p(r - 1) - 1 + if r >= 2 { dim_p(r - 2) } else { 0 };
    let f = move |map: &AffineMap, xi: Point| {
        let mut out: Vec<[f64; 2]> = grad_basis.grad(xi).into_iter().skip(1).map(|g| map.push_grad(g)).collect();
        if let Some(b) = &bubble_basis {
            let (x, y) = (xi[0], xi[1]);
            let bub = x * y * (1.0 - x - y);
            let gb = [y * (1.0 - 2.0 * x - y), x * (1.0 - x - 2.0 * y)];
            for (p, gp) in b.eval(xi).into_iter().zip(b.grad(xi)) {
                let g = map.push_grad([p * gb[0] + bub * gp[0], p * gb[1] + bub * gp[1]]);
                out.push([g[1], -g[0]]);
            }
        }
        out
    };
    (n, f)
}

fn project_vector<F, T>(mesh: &Mesh, v: &F, space: TargetSpace, r: usize, n_tests: usize, tests: T) -> Result<ProjectedField>
where
    F: Fn(Point) -> [f64; 2] + Sync,
    T: Fn(&AffineMap, Point) -> Vec<[f64; 2]> + Sync,
{
    let basis = VectorBasis::new(space, r);
    let dim = basis.dim();
    debug_assert_eq!(3 * (r + 1) + n_tests, dim);
    let blocks: Result<Vec<Vec<f64>>> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let map = AffineMap::for_cell(mesh, c);
            let mut a = DMatrix::<f64>::zeros(dim, dim);
            for i in 0..dim {
                let col = moment_rows(mesh, c, r, |xi, _| apply_jac(&map, basis.eval(xi)[i]), &tests, n_tests);
                a.set_column(i, &DVector::from_vec(col));
            }
            let b = DVector::from_vec(moment_rows(mesh, c, r, |_, x| v(x), &tests, n_tests));
            let context = match space {
                TargetSpace::RaviartThomas => "Raviart-Thomas moment matrix",
                _ => "BDM moment matrix",
            };
            let singular = HdgError::SingularLocal { cell: c, context };
            let sol = a.lu().solve(&b).ok_or(singular)?;
            if !sol.iter().all(|s| s.is_finite()) {
                return Err(HdgError::SingularLocal { cell: c, context });
            }
            Ok(sol.as_slice().to_vec())
        })
        .collect();
    Ok(ProjectedField {
        space,
        degree: r,
        blocks: blocks?,
    })
}

/// Raviart-Thomas interpolation onto `RT_r`; for `r = 0` only the edge
/// moments are used.
pub fn project_rt<F>(mesh: &Mesh, v: F, r: usize) -> Result<ProjectedField>
where
    F: Fn(Point) -> [f64; 2] + Sync,
{
    let (n, tests) = rt_tests(r);
    project_vector(mesh, &v, TargetSpace::RaviartThomas, r, n, tests)
}

/// BDM interpolation onto `[P_r]^2`, `r >= 1`.
pub fn project_bdm<F>(mesh: &Mesh, v: F, r: usize) -> Result<ProjectedField>
where
    F: Fn(Point) -> [f64; 2] + Sync,
{
    if r == 0 {
        return Err(HdgError::UnsupportedDegree {
            degree: 0,
            reason: "BDM interpolation needs r >= 1",
        });
    }
    let (n, tests) = bdm_tests(r);
    project_vector(mesh, &v, TargetSpace::Bdm, r, n, tests)
}

impl ProjectedField {
    fn expect_vector(&self) {
        assert!(
            matches!(self.space, TargetSpace::RaviartThomas | TargetSpace::Bdm),
            "vector evaluation of a scalar field"
        );
    }

    /// Value on cell `c` at physical point `x`.
    pub fn eval_scalar(&self, mesh: &Mesh, c: usize, x: Point) -> f64 {
        assert_eq!(self.space, TargetSpace::CellPoly, "cell evaluation of a non-cell field");
        let xi = AffineMap::for_cell(mesh, c).inverse(x);
        CellBasis::orthonormal(self.degree).eval(xi).iter().zip(&self.blocks[c]).map(|(p, a)| p * a).sum()
    }

    /// Value on edge `e` at parameter `t`.
    pub fn eval_edge(&self, e: usize, t: f64) -> f64 {
        assert_eq!(self.space, TargetSpace::EdgePoly, "edge evaluation of a non-edge field");
        EdgeBasis::new(self.degree).eval(t).iter().zip(&self.blocks[e]).map(|(p, a)| p * a).sum()
    }

    pub fn eval_vector(&self, mesh: &Mesh, c: usize, x: Point) -> [f64; 2] {
        self.expect_vector();
        let map = AffineMap::for_cell(mesh, c);
        let n = VectorBasis::new(self.space, self.degree).eval(map.inverse(x));
        let s = n.iter().zip(&self.blocks[c]).fold([0.0, 0.0], |acc, (ni, a)| [acc[0] + a * ni[0], acc[1] + a * ni[1]]);
        apply_jac(&map, s)
    }

    pub fn divergence(&self, mesh: &Mesh, c: usize, x: Point) -> f64 {
        self.expect_vector();
        let xi = AffineMap::for_cell(mesh, c).inverse(x);
        VectorBasis::new(self.space, self.degree).div(xi).iter().zip(&self.blocks[c]).map(|(d, a)| d * a).sum()
    }

    /// `||v - v_h||_0` over the mesh (over all edges for edge fields) with a
    /// quadrature of degree `degree`.
    pub fn l2_error_scalar<F>(&self, mesh: &Mesh, v: F, degree: usize) -> Result<f64>
    where
        F: Fn(Point) -> f64 + Sync,
    {
        match self.space {
            TargetSpace::CellPoly => {
                let q = make_quadrature(Domain::Triangle, degree)?;
                let basis = CellBasis::orthonormal(self.degree);
                let parts: Vec<f64> = (0..mesh.num_cells())
                    .into_par_iter()
                    .map(|c| {
                        let map = AffineMap::for_cell(mesh, c);
                        q.iter()
                            .map(|(xi, w)| {
                                let vh: f64 = basis.eval(xi).iter().zip(&self.blocks[c]).map(|(p, a)| p * a).sum();
                                w * map.det * (v(map.map(xi)) - vh).powi(2)
                            })
                            .sum()
                    })
                    .collect();
                Ok(parts.iter().sum::<f64>().sqrt())
            }
            TargetSpace::EdgePoly => {
                let q = make_quadrature(Domain::Segment, degree)?;
                let s: f64 = (0..mesh.num_edges())
                    .map(|e| self.edge_error_sq(mesh, e, &v, &q))
                    .sum();
                Ok(s.sqrt())
            }
            _ => panic!("scalar error of a vector field"),
        }
    }

    /// `||v - v_h||_{0,E}` on one edge.
    pub fn edge_error<F>(&self, mesh: &Mesh, e: usize, v: F, degree: usize) -> Result<f64>
    where
        F: Fn(Point) -> f64,
    {
        let q = make_quadrature(Domain::Segment, degree)?;
        Ok(self.edge_error_sq(mesh, e, &v, &q).sqrt())
    }

    fn edge_error_sq<F: Fn(Point) -> f64>(&self, mesh: &Mesh, e: usize, v: &F, q: &QuadRule) -> f64 {
        q.iter()
            .map(|(p, w)| w * mesh.edge_lengths[e] * (v(mesh.edge_point(e, p[0])) - self.eval_edge(e, p[0])).powi(2))
            .sum()
    }

    /// `||v - v_h||_0` for a vector field.
    pub fn l2_error_vector<F>(&self, mesh: &Mesh, v: F, degree: usize) -> Result<f64>
    where
        F: Fn(Point) -> [f64; 2] + Sync,
    {
        self.expect_vector();
        let q = make_quadrature(Domain::Triangle, degree)?;
        let basis = VectorBasis::new(self.space, self.degree);
        let parts: Vec<f64> = (0..mesh.num_cells())
            .into_par_iter()
            .map(|c| {
                let map = AffineMap::for_cell(mesh, c);
                q.iter()
                    .map(|(xi, w)| {
                        let n = basis.eval(xi);
                        let s = n
                            .iter()
                            .zip(&self.blocks[c])
                            .fold([0.0, 0.0], |acc, (ni, a)| [acc[0] + a * ni[0], acc[1] + a * ni[1]]);
                        let vh = apply_jac(&map, s);
                        let ve = v(map.map(xi));
                        w * map.det * ((ve[0] - vh[0]).powi(2) + (ve[1] - vh[1]).powi(2))
                    })
                    .sum()
            })
            .collect();
        Ok(parts.iter().sum::<f64>().sqrt())
    }
}
