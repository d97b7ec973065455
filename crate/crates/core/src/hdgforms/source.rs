//! Closed-form forcing terms of the two benchmark flows.
//!
//! The Example 1 expressions were produced by symbolic differentiation of the
//! exact velocity and pressure and are kept in factored form.

use crate::error::{HdgError, Result};
use crate::mesh::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Example {
    /// Smooth polynomial flow with a cubic pressure.
    Polynomial = 1,
    /// Zero velocity driven by a large polynomial pressure gradient.
    HydrostaticPressure = 2,
}

impl Example {
    pub fn from_id(id: u32) -> Result<Example> {
        match id {
            1 => Ok(Example::Polynomial),
            2 => Ok(Example::HydrostaticPressure),
            other => Err(HdgError::UnknownExample(other)),
        }
    }

    pub fn id(self) -> u32 {
        self as u32
    }
}

/// `f = -nu lap u + div(u (x) u) + grad p` for the given example.
pub fn manufactured_source(example: Example, nu: f64, p: Point) -> [f64; 2] {
    let [x, y] = p;
    match example {
        Example::Polynomial => {
            let lap_u1 = -2.0
                * (2.0 * y - 1.0)
                * (3.0 * x.powi(4) - 6.0 * x.powi(3) + 6.0 * x * x * y * y - 6.0 * x * x * y
                    + 3.0 * x * x
                    - 6.0 * x * y * y
                    + 6.0 * x * y
                    + y * y
                    - y);
            let lap_u2 = 2.0
                * (2.0 * x - 1.0)
                * (6.0 * x * x * y * y - 6.0 * x * x * y + x * x - 6.0 * x * y * y + 6.0 * x * y - x
                    + 3.0 * y.powi(4)
                    - 6.0 * y.powi(3)
                    + 3.0 * y * y);
            let conv1 = x.powi(3)
                * y * y
                * (x - 1.0).powi(3)
                * (2.0 * x - 1.0)
                * (y - 1.0).powi(2)
                * (2.0 * y * y - 2.0 * y + 1.0);
            let conv2 = x * x
                * y.powi(3)
                * (x - 1.0).powi(2)
                * (y - 1.0).powi(3)
                * (2.0 * y - 1.0)
                * (2.0 * x * x - 2.0 * x + 1.0);
            let dp_dx = -15.0
                * (8.0 * x * x * y.powi(3) - 20.0 * x * x * y * y + 6.0 * x * x * y - x * x
                    - 16.0 * x * y.powi(3)
                    + 32.0 * x * y * y
                    - 12.0 * x * y
                    + 2.0 * x
                    + 8.0 * y.powi(3)
                    - 14.0 * y * y
                    + 6.0 * y
                    - 1.0)
                / 4.0;
            let dp_dy = -5.0
                * (12.0 * x.powi(3) * y * y - 20.0 * x.powi(3) * y + 3.0 * x.powi(3)
                    - 36.0 * x * x * y * y
                    + 48.0 * x * x * y
                    - 9.0 * x * x
                    + 36.0 * x * y * y
                    - 42.0 * x * y
                    + 9.0 * x
                    - 12.0 * y * y
                    + 13.0 * y
                    - 3.0)
                / 2.0;
            [-nu * lap_u1 + conv1 + dp_dx, -nu * lap_u2 + conv2 + dp_dy]
        }
        Example::HydrostaticPressure => [0.0, 1e6 * (3.0 * y * y - y + 1.0)],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Values from exact rational evaluation of the symbolic source at nu = 1.
    const REFERENCE: [(f64, f64, f64, f64); 20] = [
        (0.339563, 0.993908, -0.5115690592440998, 1.8874701309990356),
        (0.158176, 0.414002, 0.6128541868832567, 0.12606646671379612),
        (0.682554, 0.050631, -0.002202356711390503, 0.3074820394841732),
        (0.075954, 0.861168, 2.715142885518219, 1.8133999727824235),
        (0.561913, 0.098702, 0.013264683821069271, 0.4292266190827758),
        (0.383452, 0.611097, 0.2553446020668223, 0.19328346417268963),
        (0.060816, 0.953893, 2.755993478681753, 3.4403505074610363),
        (0.532084, 0.225127, -0.16121853421826027, 0.2192465621294994),
        (0.039317, 0.090122, 2.055204222135509, 4.294182256328306),
        (0.45471, 0.438485, -0.060978309447435444, 0.07203484108957435),
        (0.073248, 0.252353, 0.8363472061348464, 1.2698132548773855),
        (0.095119, 0.577814, 1.6005628965343806, -0.2786703754917316),
        (0.44514, 0.061981, 0.4067947397229246, 0.9499682588646181),
        (0.867017, 0.592921, 1.4073643111045924, 0.2543943238541375),
        (0.129815, 0.993473, 1.3992331211499904, 3.6452096559570366),
        (0.234083, 0.661259, 0.9270204044913795, 0.32746920816233077),
        (0.657911, 0.611316, 0.3793456487021041, -0.10455331182584707),
        (0.993744, 0.064867, 0.13230928262720634, 0.14216602114808904),
        (0.605136, 0.613984, 0.24295530242958707, -0.07510270370500648),
        (0.415949, 0.051998, 0.5630331985605257, 1.1439093743447435),
    ];

    #[test]
    fn polynomial_source_regression() {
        for &(x, y, f1, f2) in &REFERENCE {
            let f = manufactured_source(Example::Polynomial, 1.0, [x, y]);
            assert!((f[0] - f1).abs() < 1e-12 * (1.0 + f1.abs()), "({x}, {y})");
            assert!((f[1] - f2).abs() < 1e-12 * (1.0 + f2.abs()), "({x}, {y})");
        }
        let mid = manufactured_source(Example::Polynomial, 1.0, [0.5, 0.5]);
        assert!(mid[0].abs() < 1e-14 && mid[1].abs() < 1e-14);
    }

    #[test]
    fn hydrostatic_source_is_closed_form() {
        for (x, y) in [(0.1, 0.2), (0.9, 0.7), (0.5, 1.0)] {
            let f = manufactured_source(Example::HydrostaticPressure, 1.0, [x, y]);
            assert_eq!(f, [0.0, 1e6 * (3.0 * y * y - y + 1.0)]);
        }
    }

    #[test]
    fn unknown_example() {
        assert!(matches!(Example::from_id(3), Err(HdgError::UnknownExample(3))));
    }
}
