use nalgebra::DMatrix;

use super::quadrature::{make_quadrature, Domain};

pub fn dim_p(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

/// Graded monomial exponents: (0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ...
fn exponents(k: usize) -> Vec<(i32, i32)> {
    let mut out = Vec::with_capacity(dim_p(k));
    for d in 0..=k as i32 {
        for b in 0..=d {
            out.push((d - b, b));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    /// Orthonormal on the reference triangle, hierarchical: the first
    /// `dim_p(r)` functions span `P_r` for every `r <= k`.
    Orthonormal,
    /// Lagrange basis on the equispaced lattice.
    Nodal,
}

/// Scalar `P_k` basis on the reference triangle, stored as coefficients over
/// monomials centred at the reference centroid.
#[derive(Debug, Clone)]
pub struct CellBasis {
    pub degree: usize,
    pub kind: BasisKind,
    exps: Vec<(i32, i32)>,
    /// Row `i` holds the monomial coefficients of basis function `i`.
    coeffs: DMatrix<f64>,
}

const CENTER: f64 = 1.0 / 3.0;

/// Value of the constant orthonormal basis function on the reference triangle.
pub const PHI0: f64 = std::f64::consts::SQRT_2;

impl CellBasis {
    pub fn orthonormal(k: usize) -> CellBasis {
        let exps = exponents(k);
        let n = exps.len();
        let quad = make_quadrature(Domain::Triangle, 2 * k).expect("degree within table");
        let mono = |p: [f64; 2]| -> Vec<f64> {
            exps.iter()
                .map(|&(a, b)| (p[0] - CENTER).powi(a) * (p[1] - CENTER).powi(b))
                .collect()
        };
        let samples: Vec<(Vec<f64>, f64)> = quad.iter().map(|(p, w)| (mono(p), w)).collect();
        let inner = |u: &[f64], v: &[f64]| -> f64 {
            samples
                .iter()
                .map(|(m, w)| {
                    let a: f64 = u.iter().zip(m).map(|(c, x)| c * x).sum();
                    let b: f64 = v.iter().zip(m).map(|(c, x)| c * x).sum();
                    w * a * b
                })
                .sum()
        };
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
        for i in 0..n {
            let mut v = vec![0.0; n];
            v[i] = 1.0;
            // modified Gram-Schmidt, two passes
            for _ in 0..2 {
                for r in &rows {
                    let c = inner(&v, r);
                    v.iter_mut().zip(r).for_each(|(x, y)| *x -= c * y);
                }
            }
            let nrm = inner(&v, &v).sqrt();
            v.iter_mut().for_each(|x| *x /= nrm);
            rows.push(v);
        }
        let coeffs = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        CellBasis {
            degree: k,
            kind: BasisKind::Orthonormal,
            exps,
            coeffs,
        }
    }

    pub fn nodal(k: usize) -> CellBasis {
        let exps = exponents(k);
        let n = exps.len();
        let nodes = Self::lattice(k);
        let vander = DMatrix::from_fn(n, n, |j, l| {
            let (a, b) = exps[l];
            (nodes[j][0] - CENTER).powi(a) * (nodes[j][1] - CENTER).powi(b)
        });
        let coeffs = vander
            .transpose()
            .try_inverse()
            .expect("lattice Vandermonde is unisolvent");
        CellBasis {
            degree: k,
            kind: BasisKind::Nodal,
            exps,
            coeffs,
        }
    }

    /// Equispaced lattice points of the nodal basis (the centroid for k = 0).
    pub fn lattice(k: usize) -> Vec<[f64; 2]> {
        if k == 0 {
            return vec![[CENTER, CENTER]];
        }
        // vertices first, so that k = 1 is the usual hat basis ordering
        if k == 1 {
            return vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        }
        let mut pts = Vec::with_capacity(dim_p(k));
        for j in 0..=k {
            for i in 0..=(k - j) {
                pts.push([i as f64 / k as f64, j as f64 / k as f64]);
            }
        }
        pts
    }

    pub fn dim(&self) -> usize {
        self.exps.len()
    }

    fn monomials(&self, p: [f64; 2]) -> Vec<f64> {
        let (x, y) = (p[0] - CENTER, p[1] - CENTER);
        self.exps.iter().map(|&(a, b)| x.powi(a) * y.powi(b)).collect()
    }

    fn monomial_grads(&self, p: [f64; 2]) -> Vec<[f64; 2]> {
        let (x, y) = (p[0] - CENTER, p[1] - CENTER);
        self.exps
            .iter()
            .map(|&(a, b)| {
                let dx = if a > 0 { a as f64 * x.powi(a - 1) * y.powi(b) } else { 0.0 };
                let dy = if b > 0 { b as f64 * x.powi(a) * y.powi(b - 1) } else { 0.0 };
                [dx, dy]
            })
            .collect()
    }

    /// Values of all basis functions at a reference point.
    pub fn eval(&self, p: [f64; 2]) -> Vec<f64> {
        let m = self.monomials(p);
        (0..self.dim())
            .map(|i| self.coeffs.row(i).iter().zip(&m).map(|(c, x)| c * x).sum())
            .collect()
    }

    /// Reference gradients of all basis functions at a reference point.
    pub fn grad(&self, p: [f64; 2]) -> Vec<[f64; 2]> {
        let g = self.monomial_grads(p);
        (0..self.dim())
            .map(|i| {
                let row = self.coeffs.row(i);
                let mut out = [0.0; 2];
                for (c, gm) in row.iter().zip(&g) {
                    out[0] += c * gm[0];
                    out[1] += c * gm[1];
                }
                out
            })
            .collect()
    }
}

/// Orthonormal Legendre basis of `P_k` on [0, 1].
#[derive(Debug, Clone)]
pub struct EdgeBasis {
    pub degree: usize,
}

impl EdgeBasis {
    pub fn new(k: usize) -> EdgeBasis {
        EdgeBasis { degree: k }
    }

    pub fn dim(&self) -> usize {
        self.degree + 1
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let z = 2.0 * t - 1.0;
        let mut out = Vec::with_capacity(self.dim());
        let (mut p0, mut p1) = (1.0, z);
        for i in 0..=self.degree {
            let p = match i {
                0 => 1.0,
                1 => z,
                _ => {
                    let f = i as f64;
                    let p2 = ((2.0 * f - 1.0) * z * p1 - (f - 1.0) * p0) / f;
                    p0 = p1;
                    p1 = p2;
                    p2
                }
            };
            out.push((2.0 * i as f64 + 1.0).sqrt() * p);
        }
        out
    }
}

pub fn make_cell_basis(k: usize) -> CellBasis {
    CellBasis::orthonormal(k)
}

pub fn make_edge_basis(k: usize) -> EdgeBasis {
    EdgeBasis::new(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions() {
        assert_eq!(make_cell_basis(2).dim(), 6);
        assert_eq!(make_cell_basis(3).dim(), 10);
        assert_eq!(make_edge_basis(3).dim(), 4);
    }

    #[test]
    fn nodal_p1_is_identity_at_vertices() {
        let b = CellBasis::nodal(1);
        for (i, p) in [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]].into_iter().enumerate() {
            let v = b.eval(p);
            for (j, x) in v.iter().enumerate() {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((x - e).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn nodal_partition_of_unity() {
        for k in 0..=4 {
            let b = CellBasis::nodal(k);
            for p in [[0.1, 0.2], [0.7, 0.05], [0.33, 0.6], [0.0, 1.0]] {
                let s: f64 = b.eval(p).iter().sum();
                assert!((s - 1.0).abs() < 1e-13, "k={k}");
            }
        }
    }

    #[test]
    fn constant_function_value() {
        for k in 0..4 {
            for p in [[0.2, 0.3], [0.9, 0.05]] {
                assert!((make_cell_basis(k).eval(p)[0] - PHI0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn orthonormal_mass_is_identity() {
        for k in 0..=7 {
            let b = make_cell_basis(k);
            let q = make_quadrature(Domain::Triangle, 2 * k).unwrap();
            let n = b.dim();
            let mut m = DMatrix::<f64>::zeros(n, n);
            for (p, w) in q.iter() {
                let v = b.eval(p);
                for i in 0..n {
                    for j in 0..n {
                        m[(i, j)] += w * v[i] * v[j];
                    }
                }
            }
            assert!((m - DMatrix::identity(n, n)).abs().max() < 1e-11, "k={k}");
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let eps = 1e-5;
        for b in [make_cell_basis(3), CellBasis::nodal(2)] {
            let p = [0.21, 0.37];
            let g = b.grad(p);
            let fx: Vec<f64> = b.eval([p[0] + eps, p[1]]).iter().zip(b.eval([p[0] - eps, p[1]])).map(|(a, c)| (a - c) / (2.0 * eps)).collect();
            let fy: Vec<f64> = b.eval([p[0], p[1] + eps]).iter().zip(b.eval([p[0], p[1] - eps])).map(|(a, c)| (a - c) / (2.0 * eps)).collect();
            for i in 0..b.dim() {
                assert!((g[i][0] - fx[i]).abs() < 1e-7);
                assert!((g[i][1] - fy[i]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn projection_reproduces_cubic() {
        // least-squares oracle: dense normal equations on scattered samples
        let b = make_cell_basis(3);
        let f = |p: [f64; 2]| p[0] * p[0] * p[1];
        let samples: Vec<[f64; 2]> = (0..40)
            .map(|i| {
                let s = (i as f64 * 0.6180339887).fract();
                let t = (i as f64 * 0.41421356).fract();
                [s * (1.0 - t), t * (1.0 - 0.5 * s)]
            })
            .filter(|p| p[0] + p[1] <= 1.0)
            .collect();
        let a = DMatrix::from_fn(samples.len(), b.dim(), |i, j| b.eval(samples[i])[j]);
        let rhs = nalgebra::DVector::from_iterator(samples.len(), samples.iter().map(|&p| f(p)));
        let c = (a.transpose() * &a).lu().solve(&(a.transpose() * rhs)).unwrap();
        for p in [[0.2, 0.3], [0.9, 0.05], [0.0, 0.0], [0.4, 0.6]] {
            let v: f64 = b.eval(p).iter().zip(c.iter()).map(|(x, y)| x * y).sum();
            assert!((v - f(p)).abs() < 1e-12);
        }
    }

    #[test]
    fn hierarchical_orthonormal_spans_lower_degrees() {
        // the first dim_p(1) functions of the k = 3 basis reproduce x exactly
        let b = make_cell_basis(3);
        let q = make_quadrature(Domain::Triangle, 4).unwrap();
        let n1 = dim_p(1);
        let mut c = vec![0.0; n1];
        for (p, w) in q.iter() {
            let v = b.eval(p);
            for i in 0..n1 {
                c[i] += w * v[i] * p[0];
            }
        }
        let p = [0.3, 0.45];
        let v = b.eval(p);
        let approx: f64 = (0..n1).map(|i| c[i] * v[i]).sum();
        assert!((approx - 0.3).abs() < 1e-13);
    }

    #[test]
    fn edge_basis_orthonormal() {
        let e = make_edge_basis(4);
        let q = make_quadrature(Domain::Segment, 8).unwrap();
        let mut g = DMatrix::<f64>::zeros(5, 5);
        for (p, w) in q.iter() {
            let v = e.eval(p[0]);
            for i in 0..5 {
                for j in 0..5 {
                    g[(i, j)] += w * v[i] * v[j];
                }
            }
        }
        assert!((g.clone() - DMatrix::identity(5, 5)).abs().max() < 1e-13);
        assert!(g.lu().determinant() > 0.5);
    }
}
