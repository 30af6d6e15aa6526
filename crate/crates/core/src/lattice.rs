//! Direct and dual lattices in one and two dimensions.
//!
//! A lattice is generated by basis vectors `γ_j`; the dual basis `γ*_j`
//! satisfies `γ_i · γ*_j = 2π δ_ij`. Quasi-momenta live on the torus
//! spanned by the dual basis (the first Brillouin zone).

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};

pub const DUALITY_TOL: f64 = 1e-12;

/// Solve for the dual basis of `basis` (length 1 or 2), so that
/// `γ_i · γ*_j = 2π δ_ij`.
pub fn dual_lattice(basis: &[Vector2<f64>]) -> Result<Vec<Vector2<f64>>> {
    match basis.len() {
        1 => {
            let g = basis[0];
            if g.norm() < 1e-300 || g.y.abs() > 0.0 {
                return Err(Error::Config(
                    "1d lattice vectors must be (a, 0) with a != 0".into(),
                ));
            }
            Ok(vec![Vector2::new(2.0 * std::f64::consts::PI / g.x, 0.0)])
        }
        2 => {
            // Rows of B are the basis vectors; dual columns solve B d_j = 2π e_j.
            let b = Matrix2::new(basis[0].x, basis[0].y, basis[1].x, basis[1].y);
            let det = b.determinant();
            if det.abs() < 1e-14 * basis[0].norm().max(basis[1].norm()).powi(2).max(1e-300) {
                return Err(Error::DegenerateLattice { det });
            }
            let inv = b.try_inverse().ok_or(Error::DegenerateLattice { det })?;
            let two_pi = 2.0 * std::f64::consts::PI;
            Ok(vec![
                two_pi * Vector2::new(inv[(0, 0)], inv[(1, 0)]),
                two_pi * Vector2::new(inv[(0, 1)], inv[(1, 1)]),
            ])
        }
        n => Err(Error::UnsupportedDimension { expected: 2, got: n }),
    }
}

/// A regular lattice in dimension 1 or 2 together with its dual.
///
/// One-dimensional lattices are embedded on the x axis; the y component of
/// every stored vector is zero in that case.
#[derive(Debug, Clone)]
pub struct Lattice {
    dim: usize,
    basis: [Vector2<f64>; 2],
    dual: [Vector2<f64>; 2],
    cell_volume: f64,
    bz_volume: f64,
}

impl Lattice {
    pub fn new(basis: &[Vector2<f64>]) -> Result<Self> {
        let dim = basis.len();
        let dual = dual_lattice(basis)?;
        let cell_volume = match dim {
            1 => basis[0].x.abs(),
            _ => (basis[0].x * basis[1].y - basis[0].y * basis[1].x).abs(),
        };
        let two_pi = 2.0 * std::f64::consts::PI;
        let bz_volume = two_pi.powi(dim as i32) / cell_volume;

        let mut b = [Vector2::zeros(); 2];
        let mut d = [Vector2::zeros(); 2];
        for j in 0..dim {
            b[j] = basis[j];
            d[j] = dual[j];
        }
        let lat = Lattice { dim, basis: b, dual: d, cell_volume, bz_volume };
        lat.check_duality()?;
        Ok(lat)
    }

    /// 1d lattice with spacing `a`.
    pub fn line(a: f64) -> Result<Self> {
        Self::new(&[Vector2::new(a, 0.0)])
    }

    /// 2d square lattice with spacing `a`.
    pub fn square(a: f64) -> Result<Self> {
        Self::new(&[Vector2::new(a, 0.0), Vector2::new(0.0, a)])
    }

    /// 2d hexagonal lattice with spacing `a`.
    pub fn hexagonal(a: f64) -> Result<Self> {
        Self::new(&[
            Vector2::new(a, 0.0),
            Vector2::new(0.5 * a, 0.5 * 3.0_f64.sqrt() * a),
        ])
    }

    fn check_duality(&self) -> Result<()> {
        let two_pi = 2.0 * std::f64::consts::PI;
        let scale = two_pi;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let want = if i == j { two_pi } else { 0.0 };
                let got = self.basis[i].dot(&self.dual[j]);
                if (got - want).abs() > DUALITY_TOL * scale {
                    return Err(Error::Config(format!(
                        "duality violated: gamma_{i} . dual_{j} = {got:.15} (want {want})"
                    )));
                }
            }
        }
        let expected_bz = two_pi.powi(self.dim as i32) / self.cell_volume;
        if (self.bz_volume - expected_bz).abs() > DUALITY_TOL * expected_bz.abs() {
            return Err(Error::Config("Brillouin-zone volume inconsistent".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn basis(&self, j: usize) -> Vector2<f64> {
        self.basis[j]
    }

    pub fn dual(&self, j: usize) -> Vector2<f64> {
        self.dual[j]
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_volume
    }

    pub fn bz_volume(&self) -> f64 {
        self.bz_volume
    }

    /// Direct lattice point `Σ m_j γ_j`.
    pub fn point(&self, m: [i64; 2]) -> Vector2<f64> {
        let mut v = m[0] as f64 * self.basis[0];
        if self.dim == 2 {
            v += m[1] as f64 * self.basis[1];
        }
        v
    }

    /// Dual lattice point `Σ m_j γ*_j`.
    pub fn dual_point(&self, m: [i64; 2]) -> Vector2<f64> {
        let mut v = m[0] as f64 * self.dual[0];
        if self.dim == 2 {
            v += m[1] as f64 * self.dual[1];
        }
        v
    }

    /// Coordinates of `k` in the dual basis, `k = Σ f_j γ*_j`.
    pub fn dual_fractional(&self, k: Vector2<f64>) -> Vector2<f64> {
        // γ_i · γ*_j = 2π δ_ij makes the direct basis the row inverse.
        let f0 = self.basis[0].dot(&k) / (2.0 * std::f64::consts::PI);
        let f1 = if self.dim == 2 {
            self.basis[1].dot(&k) / (2.0 * std::f64::consts::PI)
        } else {
            0.0
        };
        Vector2::new(f0, f1)
    }

    /// Coordinates of `r` in the direct basis, `r = Σ f_j γ_j`.
    pub fn fractional(&self, r: Vector2<f64>) -> Vector2<f64> {
        let f0 = self.dual[0].dot(&r) / (2.0 * std::f64::consts::PI);
        let f1 = if self.dim == 2 {
            self.dual[1].dot(&r) / (2.0 * std::f64::consts::PI)
        } else {
            0.0
        };
        Vector2::new(f0, f1)
    }

    /// Fold `k` into the fundamental cell `[0,1)^d` of the dual basis.
    pub fn fold_bz(&self, k: Vector2<f64>) -> Vector2<f64> {
        let f = self.dual_fractional(k);
        let g0 = f.x - f.x.floor();
        let g1 = if self.dim == 2 { f.y - f.y.floor() } else { 0.0 };
        let mut v = g0 * self.dual[0];
        if self.dim == 2 {
            v += g1 * self.dual[1];
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn dual_of_line() {
        let dual = dual_lattice(&[Vector2::new(2.0 * PI, 0.0)]).unwrap();
        assert!((dual[0].x - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dual_of_unit_square() {
        let dual =
            dual_lattice(&[Vector2::new(1.0, 0.0), Vector2::new(0.0, 1.0)]).unwrap();
        assert!((dual[0] - Vector2::new(2.0 * PI, 0.0)).norm() < 1e-14);
        assert!((dual[1] - Vector2::new(0.0, 2.0 * PI)).norm() < 1e-14);
    }

    #[test]
    fn dual_of_hexagonal_solves_linear_system() {
        let basis = [
            Vector2::new(1.0, 0.0),
            Vector2::new(0.5, 0.5 * 3.0_f64.sqrt()),
        ];
        let dual = dual_lattice(&basis).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 2.0 * PI } else { 0.0 };
                assert!(
                    (basis[i].dot(&dual[j]) - want).abs() < 1e-12,
                    "duality failed at ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn singular_basis_rejected() {
        let r = dual_lattice(&[Vector2::new(1.0, 1.0), Vector2::new(2.0, 2.0)]);
        assert!(matches!(r, Err(Error::DegenerateLattice { .. })));
    }

    #[test]
    fn bz_volume_matches_cell() {
        let lat = Lattice::hexagonal(1.3).unwrap();
        let expect = (2.0 * PI).powi(2) / lat.cell_volume();
        assert!((lat.bz_volume() - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn fold_is_periodic() {
        let lat = Lattice::hexagonal(1.0).unwrap();
        let k = Vector2::new(0.37, -1.21);
        let shifted = k + lat.dual_point([3, -2]);
        assert!((lat.fold_bz(k) - lat.fold_bz(shifted)).norm() < 1e-9);
    }
}
