//! Analytic external field specifications with exact derivatives.
//!
//! Every field is a finite sum of bounded smooth primitives, each carrying
//! closed-form gradient and Hessian. Unbounded model fields (a uniform
//! driving slope, a quadratic well) are realized behind a smooth plateau
//! window that is exactly the polynomial inside the plateau radius and
//! exactly zero beyond the support radius.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smooth step built from `f(x) = exp(-1/x)`: value, first and second
/// derivative at `s`; identically 0 for `s <= 0` and 1 for `s >= 1`.
fn smooth_step(s: f64) -> (f64, f64, f64) {
    if s <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if s >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let f = |x: f64| (-1.0 / x).exp();
    let a = f(s);
    let b = f(1.0 - s);
    let da = a / (s * s);
    let db = -b / ((1.0 - s) * (1.0 - s));
    let dda = a * (1.0 - 2.0 * s) / s.powi(4);
    let ddb = b * (2.0 * s - 1.0) / (1.0 - s).powi(4);
    let denom = a + b;
    let w = a / denom;
    let dw = (da * b - a * db) / (denom * denom);
    let ddw = ((dda * b - a * ddb) * denom - 2.0 * (da * b - a * db) * (da + db))
        / denom.powi(3);
    (w, dw, ddw)
}

/// Radial plateau window: 1 for `ρ <= plateau`, 0 for `ρ >= support`,
/// C-infinity in between. Returns (χ, χ', χ'') in the radial variable.
fn plateau_window(rho: f64, plateau: f64, support: f64) -> (f64, f64, f64) {
    let width = support - plateau;
    let s = (rho - plateau) / width;
    let (w, dw, ddw) = smooth_step(s);
    (1.0 - w, -dw / width, -ddw / (width * width))
}

/// One bounded smooth primitive of a scalar field.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarPrimitive {
    Constant {
        value: f64,
    },
    /// `amplitude * cos(wavevector . r + phase)`
    Trig {
        amplitude: f64,
        wavevector: [f64; 2],
        phase: f64,
    },
    /// `(constant + linear . (r-center) + 1/2 (r-center) . quad (r-center))`
    /// times the radial plateau window about `center`. The polynomial is
    /// exact inside `plateau` and the product vanishes beyond `support`.
    WindowedPoly {
        #[serde(default)]
        constant: f64,
        #[serde(default)]
        linear: [f64; 2],
        /// Symmetric quadratic form, row-major `[[q11,q12],[q12,q22]]`.
        #[serde(default)]
        quad: [[f64; 2]; 2],
        center: [f64; 2],
        plateau: f64,
        support: f64,
    },
}

impl ScalarPrimitive {
    pub fn validate(&self) -> Result<()> {
        match self {
            ScalarPrimitive::WindowedPoly { plateau, support, quad, .. } => {
                if !(*plateau > 0.0 && support > plateau) {
                    return Err(Error::Config(
                        "windowed polynomial needs 0 < plateau < support".into(),
                    ));
                }
                if (quad[0][1] - quad[1][0]).abs() > 1e-14 {
                    return Err(Error::Config("quadratic form must be symmetric".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Global bound on the primitive's magnitude.
    pub fn bound(&self) -> f64 {
        match self {
            ScalarPrimitive::Constant { value } => value.abs(),
            ScalarPrimitive::Trig { amplitude, .. } => amplitude.abs(),
            ScalarPrimitive::WindowedPoly { constant, linear, quad, support, .. } => {
                let l = Vector2::new(linear[0], linear[1]).norm();
                let qn = quad.iter().flatten().map(|q| q.abs()).sum::<f64>();
                constant.abs() + l * support + 0.5 * qn * support * support
            }
        }
    }

    /// Value, gradient and Hessian at `r`.
    pub fn eval(&self, r: Vector2<f64>) -> (f64, Vector2<f64>, Matrix2<f64>) {
        match self {
            ScalarPrimitive::Constant { value } => (*value, Vector2::zeros(), Matrix2::zeros()),
            ScalarPrimitive::Trig { amplitude, wavevector, phase } => {
                let q = Vector2::new(wavevector[0], wavevector[1]);
                let arg = q.dot(&r) + phase;
                let v = amplitude * arg.cos();
                let g = -amplitude * arg.sin() * q;
                let h = -v * q * q.transpose();
                (v, g, h)
            }
            ScalarPrimitive::WindowedPoly { constant, linear, quad, center, plateau, support } => {
                let c = Vector2::new(center[0], center[1]);
                let l = Vector2::new(linear[0], linear[1]);
                let qm = Matrix2::new(quad[0][0], quad[0][1], quad[1][0], quad[1][1]);
                let d = r - c;
                let p = constant + l.dot(&d) + 0.5 * d.dot(&(qm * d));
                let gp = l + qm * d;

                let rho = d.norm();
                if rho >= *support {
                    return (0.0, Vector2::zeros(), Matrix2::zeros());
                }
                if rho <= *plateau {
                    return (p, gp, qm);
                }
                let (chi, dchi, ddchi) = plateau_window(rho, *plateau, *support);
                let u = d / rho;
                let gchi = dchi * u;
                let hchi = ddchi * u * u.transpose()
                    + (dchi / rho) * (Matrix2::identity() - u * u.transpose());
                let v = p * chi;
                let g = chi * gp + p * gchi;
                let h = chi * qm + gp * gchi.transpose() + gchi * gp.transpose() + p * hchi;
                (v, g, h)
            }
        }
    }
}

/// A scalar field as a finite sum of primitives.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ScalarField {
    pub terms: Vec<ScalarPrimitive>,
}

impl ScalarField {
    pub fn zero() -> Self {
        ScalarField { terms: Vec::new() }
    }

    pub fn constant(value: f64) -> Self {
        ScalarField { terms: vec![ScalarPrimitive::Constant { value }] }
    }

    pub fn validate(&self) -> Result<()> {
        self.terms.iter().try_for_each(|t| t.validate())
    }

    pub fn bound(&self) -> f64 {
        self.terms.iter().map(|t| t.bound()).sum()
    }

    pub fn eval(&self, r: Vector2<f64>) -> (f64, Vector2<f64>, Matrix2<f64>) {
        let mut v = 0.0;
        let mut g = Vector2::zeros();
        let mut h = Matrix2::zeros();
        for t in &self.terms {
            let (tv, tg, th) = t.eval(r);
            v += tv;
            g += tg;
            h += th;
        }
        (v, g, h)
    }

    pub fn value(&self, r: Vector2<f64>) -> f64 {
        self.eval(r).0
    }

    pub fn gradient(&self, r: Vector2<f64>) -> Vector2<f64> {
        self.eval(r).1
    }
}

/// External electromagnetic potentials: a scalar potential and the
/// components of a vector potential, with `B_12 = d1 A_2 - d2 A_1` and its
/// gradient derived from the exact primitive derivatives.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExternalFields {
    pub phi: ScalarField,
    #[serde(default)]
    pub a: [ScalarField; 2],
}

impl ExternalFields {
    pub fn zero() -> Self {
        ExternalFields { phi: ScalarField::zero(), a: [ScalarField::zero(), ScalarField::zero()] }
    }

    pub fn with_phi(phi: ScalarField) -> Self {
        ExternalFields { phi, a: [ScalarField::zero(), ScalarField::zero()] }
    }

    /// Driving slope `phi = -force . (r - center)` inside the plateau.
    pub fn windowed_slope(force: Vector2<f64>, center: Vector2<f64>, plateau: f64, support: f64) -> Self {
        Self::with_phi(ScalarField {
            terms: vec![ScalarPrimitive::WindowedPoly {
                constant: 0.0,
                linear: [-force.x, -force.y],
                quad: [[0.0; 2]; 2],
                center: [center.x, center.y],
                plateau,
                support,
            }],
        })
    }

    /// Uniform magnetic field `b` inside the plateau: `A = (0, b x_1)` windowed.
    /// The field is exactly `b` where the window is flat.
    pub fn windowed_uniform_b(b: f64, center: Vector2<f64>, plateau: f64, support: f64) -> Self {
        ExternalFields {
            phi: ScalarField::zero(),
            a: [
                ScalarField::zero(),
                ScalarField {
                    terms: vec![ScalarPrimitive::WindowedPoly {
                        constant: b * center.x,
                        linear: [b, 0.0],
                        quad: [[0.0; 2]; 2],
                        center: [center.x, center.y],
                        plateau,
                        support,
                    }],
                },
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.phi.validate()?;
        self.a[0].validate()?;
        self.a[1].validate()
    }

    pub fn is_a_zero(&self) -> bool {
        self.a[0].terms.is_empty() && self.a[1].terms.is_empty()
    }

    pub fn phi(&self, r: Vector2<f64>) -> f64 {
        self.phi.value(r)
    }

    pub fn grad_phi(&self, r: Vector2<f64>) -> Vector2<f64> {
        self.phi.gradient(r)
    }

    pub fn a(&self, r: Vector2<f64>) -> Vector2<f64> {
        Vector2::new(self.a[0].value(r), self.a[1].value(r))
    }

    /// `B_12(r) = d1 A_2 - d2 A_1`.
    pub fn b12(&self, r: Vector2<f64>) -> f64 {
        let g1 = self.a[0].gradient(r);
        let g2 = self.a[1].gradient(r);
        g2.x - g1.y
    }

    /// Gradient of `B_12`.
    pub fn grad_b12(&self, r: Vector2<f64>) -> Vector2<f64> {
        let (_, _, h1) = self.a[0].eval(r);
        let (_, _, h2) = self.a[1].eval(r);
        Vector2::new(h2[(0, 0)] - h1[(0, 1)], h2[(1, 0)] - h1[(1, 1)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_gradient(f: &ScalarField, r: Vector2<f64>) -> Vector2<f64> {
        let h = 1e-6;
        Vector2::new(
            (f.value(r + Vector2::new(h, 0.0)) - f.value(r - Vector2::new(h, 0.0))) / (2.0 * h),
            (f.value(r + Vector2::new(0.0, h)) - f.value(r - Vector2::new(0.0, h))) / (2.0 * h),
        )
    }

    fn fd_hessian(f: &ScalarField, r: Vector2<f64>) -> Matrix2<f64> {
        let h = 1e-5;
        let mut m = Matrix2::zeros();
        for i in 0..2 {
            let e = if i == 0 { Vector2::new(h, 0.0) } else { Vector2::new(0.0, h) };
            let gp = f.gradient(r + e);
            let gm = f.gradient(r - e);
            let col = (gp - gm) / (2.0 * h);
            m[(0, i)] = col.x;
            m[(1, i)] = col.y;
        }
        m
    }

    #[test]
    fn smooth_step_endpoints_and_monotone() {
        let (w0, d0, dd0) = smooth_step(-0.1);
        assert_eq!((w0, d0, dd0), (0.0, 0.0, 0.0));
        let (w1, d1, dd1) = smooth_step(1.1);
        assert_eq!((w1, d1, dd1), (1.0, 0.0, 0.0));
        let mut prev = 0.0;
        for i in 1..100 {
            let (w, dw, _) = smooth_step(i as f64 / 100.0);
            assert!(w >= prev);
            assert!(dw >= 0.0);
            prev = w;
        }
    }

    #[test]
    fn smooth_step_derivatives_match_finite_differences() {
        for &s in &[0.2, 0.5, 0.83] {
            let h = 1e-6;
            let (_, dw, ddw) = smooth_step(s);
            let fd1 = (smooth_step(s + h).0 - smooth_step(s - h).0) / (2.0 * h);
            let fd2 = (smooth_step(s + h).1 - smooth_step(s - h).1) / (2.0 * h);
            assert!((dw - fd1).abs() < 1e-7, "dw at {s}");
            assert!((ddw - fd2).abs() < 1e-6, "ddw at {s}");
        }
    }

    #[test]
    fn windowed_poly_exact_inside_plateau_zero_outside() {
        let f = ScalarField {
            terms: vec![ScalarPrimitive::WindowedPoly {
                constant: 0.3,
                linear: [-0.2, 0.1],
                quad: [[0.5, 0.1], [0.1, -0.3]],
                center: [1.0, -2.0],
                plateau: 2.0,
                support: 3.0,
            }],
        };
        f.validate().unwrap();
        let r_in = Vector2::new(1.5, -1.2);
        let d = r_in - Vector2::new(1.0, -2.0);
        let exact = 0.3 + (-0.2 * d.x + 0.1 * d.y)
            + 0.5 * (0.5 * d.x * d.x + 2.0 * 0.1 * d.x * d.y - 0.3 * d.y * d.y);
        assert!((f.value(r_in) - exact).abs() < 1e-15);
        let r_out = Vector2::new(5.0, 1.0);
        assert_eq!(f.value(r_out), 0.0);
        assert_eq!(f.gradient(r_out), Vector2::zeros());
    }

    #[test]
    fn gradients_and_hessians_match_finite_differences() {
        let f = ScalarField {
            terms: vec![
                ScalarPrimitive::Trig { amplitude: 0.4, wavevector: [0.3, -0.7], phase: 0.2 },
                ScalarPrimitive::WindowedPoly {
                    constant: 0.1,
                    linear: [0.25, -0.15],
                    quad: [[0.2, 0.0], [0.0, 0.4]],
                    center: [0.0, 0.0],
                    plateau: 1.0,
                    support: 4.0,
                },
            ],
        };
        // Points inside the plateau, on the skirt, and outside.
        for &r in &[
            Vector2::new(0.4, 0.3),
            Vector2::new(1.9, 1.4),
            Vector2::new(3.1, 1.9),
            Vector2::new(5.0, 5.0),
        ] {
            let (_, g, h) = f.eval(r);
            let gfd = fd_gradient(&f, r);
            let hfd = fd_hessian(&f, r);
            assert!((g - gfd).norm() < 2e-6, "gradient at {r:?}: {g:?} vs {gfd:?}");
            assert!((h - hfd).norm() < 2e-4, "hessian at {r:?}");
        }
    }

    #[test]
    fn bounds_hold_on_samples() {
        let f = ScalarField {
            terms: vec![
                ScalarPrimitive::Trig { amplitude: 0.4, wavevector: [1.3, 0.7], phase: 0.0 },
                ScalarPrimitive::WindowedPoly {
                    constant: 1.0,
                    linear: [0.5, 0.0],
                    quad: [[0.0; 2]; 2],
                    center: [0.0, 0.0],
                    plateau: 1.0,
                    support: 2.0,
                },
            ],
        };
        let bound = f.bound();
        assert!(bound.is_finite());
        for i in 0..200 {
            let r = Vector2::new((i as f64 * 0.13).sin() * 6.0, (i as f64 * 0.31).cos() * 6.0);
            assert!(f.value(r).abs() <= bound + 1e-12);
        }
    }

    #[test]
    fn windowed_uniform_b_is_exact_on_plateau() {
        let fields =
            ExternalFields::windowed_uniform_b(0.7, Vector2::new(0.0, 0.0), 3.0, 6.0);
        for &r in &[Vector2::new(0.0, 0.0), Vector2::new(1.0, -2.0), Vector2::new(2.0, 1.0)] {
            assert!((fields.b12(r) - 0.7).abs() < 1e-14);
            assert!(fields.grad_b12(r).norm() < 1e-12);
        }
        assert_eq!(fields.b12(Vector2::new(10.0, 0.0)), 0.0);
    }

    #[test]
    fn windowed_slope_gradient_is_minus_force_on_plateau() {
        let force = Vector2::new(0.2, -0.1);
        let fields = ExternalFields::windowed_slope(force, Vector2::zeros(), 5.0, 8.0);
        let g = fields.grad_phi(Vector2::new(1.0, 2.0));
        assert!((g + force).norm() < 1e-14);
    }
}
