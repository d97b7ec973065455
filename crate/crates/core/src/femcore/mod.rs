//! Reference-element machinery: polynomial bases, quadrature and affine maps.

mod basis;
mod quadrature;

pub use basis::{dim_p, make_cell_basis, make_edge_basis, BasisKind, CellBasis, EdgeBasis, PHI0};
pub use quadrature::{gauss_legendre, make_quadrature, Domain, QuadRule, MAX_QUADRATURE_DEGREE};

use crate::mesh::{Mesh, Point};

/// Reference triangle vertices; local edge `i` runs from vertex `i` to `i + 1`.
pub const REF_VERTICES: [Point; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

/// Affine map `x = x0 + J xi` from the reference triangle onto a cell.
#[derive(Debug, Clone, Copy)]
pub struct AffineMap {
    pub jac: [[f64; 2]; 2],
    pub origin: Point,
    pub det: f64,
    /// `J^{-T}`, pushes reference gradients forward.
    pub inv_t: [[f64; 2]; 2],
}

impl AffineMap {
    pub fn new(v: [Point; 3]) -> AffineMap {
        let jac = [
            [v[1][0] - v[0][0], v[2][0] - v[0][0]],
            [v[1][1] - v[0][1], v[2][1] - v[0][1]],
        ];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv_t = [
            [jac[1][1] / det, -jac[1][0] / det],
            [-jac[0][1] / det, jac[0][0] / det],
        ];
        AffineMap {
            jac,
            origin: v[0],
            det,
            inv_t,
        }
    }

    pub fn for_cell(mesh: &Mesh, c: usize) -> AffineMap {
        AffineMap::new(mesh.cell_vertices(c))
    }

    pub fn map(&self, xi: Point) -> Point {
        [
            self.origin[0] + self.jac[0][0] * xi[0] + self.jac[0][1] * xi[1],
            self.origin[1] + self.jac[1][0] * xi[0] + self.jac[1][1] * xi[1],
        ]
    }

    pub fn inverse(&self, x: Point) -> Point {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        // J^{-1} = (J^{-T})^T
        [
            self.inv_t[0][0] * d[0] + self.inv_t[1][0] * d[1],
            self.inv_t[0][1] * d[0] + self.inv_t[1][1] * d[1],
        ]
    }

    pub fn push_grad(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.inv_t[0][0] * g[0] + self.inv_t[0][1] * g[1],
            self.inv_t[1][0] * g[0] + self.inv_t[1][1] * g[1],
        ]
    }
}

/// Reference point on local edge `i` at local parameter `s`.
pub fn ref_edge_point(i: usize, s: f64) -> Point {
    let (a, b) = (REF_VERTICES[i], REF_VERTICES[(i + 1) % 3]);
    [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
}

/// Cell basis tabulated at the points of a triangle rule.
#[derive(Debug, Clone)]
pub struct CellTable {
    pub weights: Vec<f64>,
    pub points: Vec<Point>,
    pub values: Vec<Vec<f64>>,
    pub ref_grads: Vec<Vec<[f64; 2]>>,
}

impl CellTable {
    pub fn new(basis: &CellBasis, rule: &QuadRule) -> CellTable {
        CellTable {
            weights: rule.weights.clone(),
            points: rule.points.clone(),
            values: rule.points.iter().map(|&p| basis.eval(p)).collect(),
            ref_grads: rule.points.iter().map(|&p| basis.grad(p)).collect(),
        }
    }
}

/// Cell basis restricted to each local edge, and edge basis in both
/// orientations, at the points of a segment rule.
#[derive(Debug, Clone)]
pub struct EdgeTable {
    pub weights: Vec<f64>,
    pub params: Vec<f64>,
    /// `[local edge][q][i]`
    pub cell_values: [Vec<Vec<f64>>; 3],
    /// Edge basis at `t = s` (index 0) and `t = 1 - s` (index 1).
    pub edge_values: [Vec<Vec<f64>>; 2],
}

impl EdgeTable {
    pub fn new(cell: &CellBasis, edge: &EdgeBasis, rule: &QuadRule) -> EdgeTable {
        let params: Vec<f64> = rule.points.iter().map(|p| p[0]).collect();
        let cell_values = std::array::from_fn(|i| {
            params.iter().map(|&s| cell.eval(ref_edge_point(i, s))).collect()
        });
        let edge_values = [
            params.iter().map(|&s| edge.eval(s)).collect(),
            params.iter().map(|&s| edge.eval(1.0 - s)).collect(),
        ];
        EdgeTable {
            weights: rule.weights.clone(),
            params,
            cell_values,
            edge_values,
        }
    }

    /// Edge basis values at the points of a local edge with outward sign `sign`.
    pub fn edge_values_for(&self, sign: f64) -> &[Vec<f64>] {
        if sign > 0.0 {
            &self.edge_values[0]
        } else {
            &self.edge_values[1]
        }
    }
}
