//! Lattice-periodic potentials as finite Fourier sums,
//! `V(y) = Σ_G V̂_G e^{iG·y}` with `G` on the dual lattice.

use std::collections::BTreeMap;

use nalgebra::Vector2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::Lattice;

const REALITY_TOL: f64 = 1e-12;

/// A real, lattice-periodic potential with finitely many Fourier
/// coefficients, keyed by the integer coordinates of `G` in the dual basis.
#[derive(Debug, Clone)]
pub struct FourierPotential {
    lattice: Lattice,
    coefficients: BTreeMap<[i64; 2], Complex64>,
}

impl FourierPotential {
    /// Build from `(m, V̂)` pairs and enforce the reality condition
    /// `V̂_{-G} = conj(V̂_G)`.
    pub fn new(lattice: Lattice, terms: &[([i64; 2], Complex64)]) -> Result<Self> {
        let mut coefficients = BTreeMap::new();
        for &(m, c) in terms {
            if lattice.dim() == 1 && m[1] != 0 {
                return Err(Error::InvalidPotential(format!(
                    "coefficient index {m:?} has a second component on a 1d lattice"
                )));
            }
            if coefficients.insert(m, c).is_some() {
                return Err(Error::InvalidPotential(format!(
                    "duplicate coefficient index {m:?}"
                )));
            }
        }
        let scale = coefficients
            .values()
            .map(|c| c.norm())
            .fold(0.0_f64, f64::max)
            .max(1.0);
        for (&m, &c) in &coefficients {
            let neg = [-m[0], -m[1]];
            let partner = coefficients.get(&neg).copied().unwrap_or_else(|| {
                Complex64::new(0.0, 0.0)
            });
            if (partner - c.conj()).norm() > REALITY_TOL * scale {
                return Err(Error::InvalidPotential(format!(
                    "reality violated at index {m:?}: V(-G) != conj(V(G))"
                )));
            }
        }
        Ok(FourierPotential { lattice, coefficients })
    }

    pub fn zero(lattice: Lattice) -> Self {
        FourierPotential { lattice, coefficients: BTreeMap::new() }
    }

    /// `V(y) = 2v cos(γ*_1 · y)`, coefficients `v` at `±γ*_1`.
    pub fn cosine_1d(lattice: Lattice, v: f64) -> Result<Self> {
        let c = Complex64::new(v, 0.0);
        Self::new(lattice, &[([1, 0], c), ([-1, 0], c)])
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn coefficient(&self, m: [i64; 2]) -> Complex64 {
        self.coefficients.get(&m).copied().unwrap_or(Complex64::new(0.0, 0.0))
    }

    /// Iterate stored coefficients in deterministic (lexicographic) order.
    pub fn terms(&self) -> impl Iterator<Item = ([i64; 2], Complex64)> + '_ {
        self.coefficients.iter().map(|(&m, &c)| (m, c))
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Largest |m_j| over stored coefficients, per dimension.
    pub fn max_index(&self) -> [i64; 2] {
        let mut mx = [0_i64; 2];
        for &m in self.coefficients.keys() {
            mx[0] = mx[0].max(m[0].abs());
            mx[1] = mx[1].max(m[1].abs());
        }
        mx
    }

    /// Evaluate `V` at the microscopic point `y`. The imaginary part cancels
    /// by the reality condition and is discarded.
    pub fn eval(&self, y: Vector2<f64>) -> f64 {
        let mut sum = Complex64::new(0.0, 0.0);
        for (&m, &c) in &self.coefficients {
            let g = self.lattice.dual_point(m);
            sum += c * Complex64::new(0.0, g.dot(&y)).exp();
        }
        sum.re
    }

    /// True when the potential is symmetric under inversion about the
    /// origin, i.e. all coefficients are real.
    pub fn inversion_symmetric(&self) -> bool {
        let scale = self
            .coefficients
            .values()
            .map(|c| c.norm())
            .fold(0.0_f64, f64::max)
            .max(1.0);
        self.coefficients.values().all(|c| c.im.abs() <= REALITY_TOL * scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> Lattice {
        Lattice::line(2.0 * std::f64::consts::PI).unwrap()
    }

    #[test]
    fn cosine_has_two_coefficients() {
        let v = FourierPotential::cosine_1d(line(), 0.25).unwrap();
        assert_eq!(v.terms().count(), 2);
        assert!((v.coefficient([1, 0]).re - 0.25).abs() < 1e-15);
        // V(y) = 2 v cos(y) for a = 2π (dual basis vector of length 1).
        let y = Vector2::new(0.7, 0.0);
        assert!((v.eval(y) - 0.5 * y.x.cos()).abs() < 1e-14);
    }

    #[test]
    fn reality_violation_rejected() {
        let r = FourierPotential::new(
            line(),
            &[
                ([1, 0], Complex64::new(0.1, 0.2)),
                ([-1, 0], Complex64::new(0.1, 0.2)),
            ],
        );
        assert!(matches!(r, Err(Error::InvalidPotential(_))));
    }

    #[test]
    fn missing_partner_rejected() {
        let r = FourierPotential::new(line(), &[([1, 0], Complex64::new(0.1, 0.0))]);
        assert!(matches!(r, Err(Error::InvalidPotential(_))));
    }

    #[test]
    fn eval_is_real_and_periodic() {
        let lat = Lattice::square(1.0).unwrap();
        let v = FourierPotential::new(
            lat.clone(),
            &[
                ([1, 0], Complex64::new(0.3, 0.1)),
                ([-1, 0], Complex64::new(0.3, -0.1)),
                ([1, 1], Complex64::new(0.0, -0.2)),
                ([-1, -1], Complex64::new(0.0, 0.2)),
            ],
        )
        .unwrap();
        let y = Vector2::new(0.23, -0.48);
        let shifted = y + lat.point([2, -1]);
        assert!((v.eval(y) - v.eval(shifted)).abs() < 1e-12);
    }
}
