//! Scaled wavefunctions sampled on a periodic simulation box.
//!
//! The box spans an integer number of lattice cells per dimension, each of
//! macroscopic size `ε γ_j`, with `points_per_cell` samples per cell and
//! dimension. Grid positions are macroscopic; the microscopic argument of
//! the periodic potential is `x/ε`.

use nalgebra::Vector2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fftutil::freq_index;
use crate::lattice::Lattice;

/// Hard floor on samples per lattice cell; the wavefunction oscillates on
/// the cell scale, so fewer points alias badly.
pub const MIN_POINTS_PER_CELL: usize = 16;

#[derive(Debug, Clone)]
pub struct SimBox {
    lattice: Lattice,
    epsilon: f64,
    cells: [usize; 2],
    points_per_cell: usize,
}

impl SimBox {
    pub fn new(lattice: Lattice, epsilon: f64, cells: [usize; 2], points_per_cell: usize) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if points_per_cell < MIN_POINTS_PER_CELL || points_per_cell % 2 != 0 {
            return Err(Error::Config(format!(
                "points_per_cell must be even and at least {MIN_POINTS_PER_CELL}"
            )));
        }
        let dim = lattice.dim();
        let cells = [cells[0].max(1), if dim == 2 { cells[1].max(1) } else { 1 }];
        if cells[0] < 2 || (dim == 2 && cells[1] < 2) {
            return Err(Error::Config("box needs at least 2 cells per dimension".into()));
        }
        Ok(SimBox { lattice, epsilon, cells, points_per_cell })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn cells(&self) -> [usize; 2] {
        self.cells
    }

    pub fn points_per_cell(&self) -> usize {
        self.points_per_cell
    }

    /// Grid points per dimension.
    pub fn n_points(&self) -> [usize; 2] {
        [
            self.cells[0] * self.points_per_cell,
            if self.dim() == 2 { self.cells[1] * self.points_per_cell } else { 1 },
        ]
    }

    pub fn total_points(&self) -> usize {
        let n = self.n_points();
        n[0] * n[1]
    }

    pub fn volume(&self) -> f64 {
        let d = self.dim() as i32;
        self.cells[0] as f64
            * (if self.dim() == 2 { self.cells[1] as f64 } else { 1.0 })
            * self.epsilon.powi(d)
            * self.lattice.cell_volume()
    }

    pub fn volume_element(&self) -> f64 {
        self.volume() / self.total_points() as f64
    }

    /// Macroscopic position of grid node `(i, j)`.
    pub fn position(&self, i: usize, j: usize) -> Vector2<f64> {
        let ppc = self.points_per_cell as f64;
        let mut x = (i as f64 / ppc) * self.epsilon * self.lattice.basis(0);
        if self.dim() == 2 {
            x += (j as f64 / ppc) * self.epsilon * self.lattice.basis(1);
        }
        x
    }

    /// Microscopic position `x/ε` of grid node `(i, j)`.
    pub fn micro_position(&self, i: usize, j: usize) -> Vector2<f64> {
        self.position(i, j) / self.epsilon
    }

    /// FFT frequency of mode `(l0, l1)` (raw array indices): plane waves on
    /// the box are `e^{i ξ·x}` with `ξ = Σ_j s_j γ*_j / (ε cells_j)` and
    /// `s_j` the signed index.
    pub fn frequency(&self, l0: usize, l1: usize) -> Vector2<f64> {
        let n = self.n_points();
        let s0 = freq_index(l0, n[0]) as f64;
        let mut xi = s0 / (self.epsilon * self.cells[0] as f64) * self.lattice.dual(0);
        if self.dim() == 2 {
            let s1 = freq_index(l1, n[1]) as f64;
            xi += s1 / (self.epsilon * self.cells[1] as f64) * self.lattice.dual(1);
        }
        xi
    }

    /// Bloch quasi-momentum grid point `m` (one index per dimension),
    /// `k_m = Σ (m_j / cells_j) γ*_j`.
    pub fn bloch_k(&self, m: [usize; 2]) -> Vector2<f64> {
        let mut k = (m[0] as f64 / self.cells[0] as f64) * self.lattice.dual(0);
        if self.dim() == 2 {
            k += (m[1] as f64 / self.cells[1] as f64) * self.lattice.dual(1);
        }
        k
    }

    pub fn same_grid(&self, other: &SimBox) -> bool {
        self.cells == other.cells
            && self.points_per_cell == other.points_per_cell
            && (self.epsilon - other.epsilon).abs() < 1e-15
            && self.lattice.dim() == other.lattice.dim()
    }
}

/// Complex amplitudes on the box grid (row-major).
#[derive(Debug, Clone)]
pub struct WaveField {
    bx: SimBox,
    samples: Vec<Complex64>,
}

impl WaveField {
    pub fn new(bx: SimBox, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != bx.total_points() {
            return Err(Error::Config(format!(
                "sample count {} does not match box grid {}",
                samples.len(),
                bx.total_points()
            )));
        }
        Ok(WaveField { bx, samples })
    }

    pub fn simbox(&self) -> &SimBox {
        &self.bx
    }

    pub fn epsilon(&self) -> f64 {
        self.bx.epsilon()
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    /// `‖ψ‖²` by grid quadrature (exact for trigonometric polynomials on
    /// the periodic box).
    pub fn norm_squared(&self) -> f64 {
        let dv = self.bx.volume_element();
        self.samples.iter().map(|c| c.norm_sqr()).sum::<f64>() * dv
    }

    pub fn normalize(&mut self) {
        let n = self.norm_squared().sqrt();
        if n > 0.0 {
            let s = 1.0 / n;
            for c in &mut self.samples {
                *c *= s;
            }
        }
    }

    /// `<self, other>` by grid quadrature.
    pub fn inner(&self, other: &WaveField) -> Complex64 {
        assert!(self.bx.same_grid(other.simbox()));
        let dv = self.bx.volume_element();
        self.samples
            .iter()
            .zip(other.samples.iter())
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            * dv
    }

    /// L2 distance `‖self - other‖`.
    pub fn distance(&self, other: &WaveField) -> f64 {
        assert!(self.bx.same_grid(other.simbox()));
        let dv = self.bx.volume_element();
        (self
            .samples
            .iter()
            .zip(other.samples.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            * dv)
            .sqrt()
    }

    /// Snapshot format: `#`-prefixed header lines with the grid spec, then
    /// one `re,im` row per sample in row-major order.
    pub fn write_snapshot<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        let lat = self.bx.lattice();
        writeln!(w, "# wavefield snapshot")?;
        writeln!(w, "# dim = {}", lat.dim())?;
        writeln!(w, "# epsilon = {:.17e}", self.bx.epsilon())?;
        writeln!(w, "# cells = {} {}", self.bx.cells()[0], self.bx.cells()[1])?;
        writeln!(w, "# points_per_cell = {}", self.bx.points_per_cell())?;
        write!(w, "# basis =")?;
        for j in 0..lat.dim() {
            write!(w, " {:.17e} {:.17e}", lat.basis(j).x, lat.basis(j).y)?;
        }
        writeln!(w)?;
        writeln!(w, "re,im")?;
        for c in &self.samples {
            writeln!(w, "{:.17e},{:.17e}", c.re, c.im)?;
        }
        Ok(())
    }

    pub fn read_snapshot<R: std::io::BufRead>(reader: R) -> Result<Self> {
        let mut dim = 0usize;
        let mut epsilon = 0.0f64;
        let mut cells = [0usize; 2];
        let mut ppc = 0usize;
        let mut basis: Vec<Vector2<f64>> = Vec::new();
        let mut samples: Vec<Complex64> = Vec::new();
        for line in reader.lines() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t == "re,im" {
                continue;
            }
            if let Some(rest) = t.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(v) = rest.strip_prefix("dim =") {
                    dim = v.trim().parse().map_err(|_| Error::Config("bad dim".into()))?;
                } else if let Some(v) = rest.strip_prefix("epsilon =") {
                    epsilon = v.trim().parse().map_err(|_| Error::Config("bad epsilon".into()))?;
                } else if let Some(v) = rest.strip_prefix("cells =") {
                    let parts: Vec<usize> = v
                        .split_whitespace()
                        .map(|s| s.parse().map_err(|_| Error::Config("bad cells".into())))
                        .collect::<Result<_>>()?;
                    cells = [parts[0], *parts.get(1).unwrap_or(&1)];
                } else if let Some(v) = rest.strip_prefix("points_per_cell =") {
                    ppc = v.trim().parse().map_err(|_| Error::Config("bad ppc".into()))?;
                } else if let Some(v) = rest.strip_prefix("basis =") {
                    let nums: Vec<f64> = v
                        .split_whitespace()
                        .map(|s| s.parse().map_err(|_| Error::Config("bad basis".into())))
                        .collect::<Result<_>>()?;
                    basis = nums.chunks(2).map(|c| Vector2::new(c[0], c[1])).collect();
                }
                continue;
            }
            let mut it = t.split(',');
            let re: f64 = it
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Config("bad sample row".into()))?;
            let im: f64 = it
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Config("bad sample row".into()))?;
            samples.push(Complex64::new(re, im));
        }
        if dim == 0 || basis.len() != dim {
            return Err(Error::Config("snapshot header incomplete".into()));
        }
        let lattice = Lattice::new(&basis)?;
        let bx = SimBox::new(lattice, epsilon, cells, ppc)?;
        WaveField::new(bx, samples)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_box() -> SimBox {
        let lat = Lattice::line(2.0 * std::f64::consts::PI).unwrap();
        SimBox::new(lat, 0.25, [8, 1], 16).unwrap()
    }

    #[test]
    fn box_geometry() {
        let bx = line_box();
        assert_eq!(bx.n_points(), [128, 1]);
        // Volume: 8 cells x (0.25 * 2π).
        assert!((bx.volume() - 8.0 * 0.25 * 2.0 * std::f64::consts::PI).abs() < 1e-12);
        // Positions step by ε a / ppc.
        let step = bx.position(1, 0).x - bx.position(0, 0).x;
        assert!((step - 0.25 * 2.0 * std::f64::consts::PI / 16.0).abs() < 1e-15);
    }

    #[test]
    fn frequencies_are_box_commensurate() {
        let bx = line_box();
        // Mode l: e^{i ξ_l x} must be periodic over the box.
        let xi = bx.frequency(5, 0);
        let box_len = 8.0 * 0.25 * 2.0 * std::f64::consts::PI;
        let phase = xi.x * box_len / (2.0 * std::f64::consts::PI);
        assert!((phase - phase.round()).abs() < 1e-12);
    }

    #[test]
    fn ppc_floor_enforced() {
        let lat = Lattice::line(1.0).unwrap();
        assert!(SimBox::new(lat.clone(), 0.1, [4, 1], 8).is_err());
        assert!(SimBox::new(lat, 0.1, [4, 1], 17).is_err());
    }

    #[test]
    fn norm_and_snapshot_roundtrip() {
        let bx = line_box();
        let n = bx.total_points();
        let mut psi = WaveField::new(
            bx,
            (0..n)
                .map(|i| Complex64::new((i as f64 * 0.1).sin(), (i as f64 * 0.07).cos()))
                .collect(),
        )
        .unwrap();
        psi.normalize();
        assert!((psi.norm_squared() - 1.0).abs() < 1e-12);

        let mut buf = Vec::new();
        psi.write_snapshot(&mut buf).unwrap();
        let back = WaveField::read_snapshot(std::io::BufReader::new(&buf[..])).unwrap();
        assert!((psi.norm_squared() - back.norm_squared()).abs() < 1e-12);
        assert!(psi.distance(&back) < 1e-12);
    }
}
