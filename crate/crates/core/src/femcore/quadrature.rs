use crate::error::{HdgError, Result};

/// Highest polynomial degree for which a rule can be requested.
pub const MAX_QUADRATURE_DEGREE: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// Reference triangle with vertices (0,0), (1,0), (0,1).
    Triangle,
    /// Reference segment [0, 1].
    Segment,
}

/// Points are stored as `[x, y]` on the triangle and `[t, 0]` on the segment.
#[derive(Debug, Clone)]
pub struct QuadRule {
    pub domain: Domain,
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub exact_degree: usize,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ([f64; 2], f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Gauss-Legendre nodes and weights on [0, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = 0.5 * (1.0 - z);
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[i] = 0.5 * wi;
        w[n - 1 - i] = 0.5 * wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Returns a rule exact for polynomials of degree at least `required_degree`.
///
/// Triangle rules are collapsed Gauss-Legendre products (Duffy transform),
/// segment rules are plain Gauss-Legendre.
pub fn make_quadrature(domain: Domain, required_degree: usize) -> Result<QuadRule> {
    if required_degree > MAX_QUADRATURE_DEGREE {
        return Err(HdgError::QuadratureDegree {
            requested: required_degree,
            max: MAX_QUADRATURE_DEGREE,
        });
    }
    match domain {
        Domain::Segment => {
            let n = (required_degree + 2) / 2;
            let (x, w) = gauss_legendre(n.max(1));
            Ok(QuadRule {
                domain,
                points: x.into_iter().map(|t| [t, 0.0]).collect(),
                weights: w,
                exact_degree: 2 * n.max(1) - 1,
            })
        }
        Domain::Triangle => {
            // the Jacobian (1 - u) raises the degree in u by one
            let n = (required_degree + 3) / 2;
            let (x, w) = gauss_legendre(n);
            let mut points = Vec::with_capacity(n * n);
            let mut weights = Vec::with_capacity(n * n);
            for (&u, &wu) in x.iter().zip(&w) {
                for (&v, &wv) in x.iter().zip(&w) {
                    points.push([u, v * (1.0 - u)]);
                    weights.push(wu * wv * (1.0 - u));
                }
            }
            Ok(QuadRule {
                domain,
                points,
                weights,
                exact_degree: 2 * n - 2,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact integral of x^a y^b over the reference triangle: a! b! / (a + b + 2)!
    fn triangle_monomial(a: u32, b: u32) -> f64 {
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        fact(a) * fact(b) / fact(a + b + 2)
    }

    #[test]
    fn triangle_area_and_x2y() {
        let q = make_quadrature(Domain::Triangle, 3).unwrap();
        let area: f64 = q.weights.iter().sum();
        assert!((area - 0.5).abs() < 1e-15);
        let v: f64 = q.iter().map(|(p, w)| w * p[0] * p[0] * p[1]).sum();
        assert!((v - 1.0 / 60.0).abs() < 1e-15);
    }

    #[test]
    fn segment_t5() {
        let q = make_quadrature(Domain::Segment, 5).unwrap();
        let v: f64 = q.iter().map(|(p, w)| w * p[0].powi(5)).sum();
        assert!((v - 1.0 / 6.0).abs() < 1e-15);
        assert!((q.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn triangle_monomial_sweep() {
        for deg in [0, 1, 2, 5, 8, 11, 14, 18, 26] {
            let q = make_quadrature(Domain::Triangle, deg).unwrap();
            assert!(q.exact_degree >= deg);
            for a in 0..=q.exact_degree as u32 {
                for b in 0..=(q.exact_degree as u32 - a) {
                    let v: f64 = q.iter().map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32)).sum();
                    let exact = triangle_monomial(a, b);
                    assert!(((v - exact) / exact).abs() < 1e-13, "deg {deg}: x^{a} y^{b}");
                }
            }
        }
    }

    #[test]
    fn segment_monomial_sweep() {
        for deg in 0..30 {
            let q = make_quadrature(Domain::Segment, deg).unwrap();
            assert!(q.exact_degree >= deg);
            for a in 0..=q.exact_degree as i32 {
                let v: f64 = q.iter().map(|(p, w)| w * p[0].powi(a)).sum();
                let exact = 1.0 / (a as f64 + 1.0);
                assert!(((v - exact) / exact).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn too_high_degree_reports_maximum() {
        let err = make_quadrature(Domain::Triangle, MAX_QUADRATURE_DEGREE + 1).unwrap_err();
        assert!(err.to_string().contains(&MAX_QUADRATURE_DEGREE.to_string()));
    }
}
