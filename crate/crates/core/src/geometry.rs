//! Gauge-invariant geometry of an isolated Bloch band.
//!
//! Two independent routes are implemented and cross-checked:
//!
//! * plaquette link phases on a discretized Brillouin-zone torus, whose
//!   total flux is quantized by construction (used for Chern numbers), and
//! * a sum over states with analytic velocity matrix elements
//!   `<u_n| dH/dk_i |u_m>` (used for pointwise curvature and the magnetic
//!   moment entering the corrected Hamiltonian).
//!
//! No global smooth gauge is ever constructed: every quantity below is a
//! closed loop of overlaps or a phase-free product of matrix elements.

use nalgebra::{DVector, Vector2};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bloch::{solve_fiber, BlochFiber, GAP_THRESHOLD};
use crate::error::{Error, Result};
use crate::fftutil::{fft2_forward, freq_index};
use crate::interp::{interp1_with_deriv, interp2_with_deriv};
use crate::lattice::Lattice;
use crate::planewave::PlaneWaveBasis;
use crate::potential::FourierPotential;

/// Overlap magnitude below which a Berry link is considered unusable.
pub const LINK_TOL: f64 = 1e-10;
/// Pre-rounding distance to an integer above which a Chern sum is rejected.
pub const CHERN_RESIDUAL_LIMIT: f64 = 1e-3;
/// Denominator guard for the sum over states.
pub const DEGENERACY_TOL: f64 = 1e-8;

/// Bloch fibers on a uniform `n0 x n1` grid over the Brillouin zone,
/// `k_ij = (i/n0) γ*_1 + (j/n1) γ*_2`, row-major.
#[derive(Debug, Clone)]
pub struct FiberGrid {
    lattice: Lattice,
    n: [usize; 2],
    fibers: Vec<BlochFiber>,
}

impl FiberGrid {
    pub fn solve(
        potential: &FourierPotential,
        basis: &PlaneWaveBasis,
        n: [usize; 2],
        n_bands: usize,
    ) -> Result<Self> {
        let lattice = potential.lattice().clone();
        let dim = lattice.dim();
        let n = [n[0], if dim == 2 { n[1] } else { 1 }];
        let points: Vec<Vector2<f64>> = (0..n[0] * n[1])
            .map(|idx| {
                let (i, j) = (idx / n[1], idx % n[1]);
                let mut k = (i as f64 / n[0] as f64) * lattice.dual(0);
                if dim == 2 {
                    k += (j as f64 / n[1] as f64) * lattice.dual(1);
                }
                k
            })
            .collect();
        let fibers: Result<Vec<BlochFiber>> = points
            .par_iter()
            .map(|&k| solve_fiber(k, potential, basis, n_bands))
            .collect();
        Ok(FiberGrid { lattice, n, fibers: fibers? })
    }

    pub fn from_parts(lattice: Lattice, n: [usize; 2], fibers: Vec<BlochFiber>) -> Self {
        assert_eq!(fibers.len(), n[0] * n[1]);
        FiberGrid { lattice, n, fibers }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn shape(&self) -> [usize; 2] {
        self.n
    }

    pub fn fiber(&self, i: usize, j: usize) -> &BlochFiber {
        &self.fibers[(i % self.n[0]) * self.n[1] + (j % self.n[1])]
    }

    pub fn fibers(&self) -> &[BlochFiber] {
        &self.fibers
    }

    /// Multiply every eigenvector by an independent random unit phase.
    /// Gauge-invariant quantities must not change under this map.
    pub fn randomize_gauge<R: Rng>(&self, rng: &mut R) -> Self {
        let fibers = self
            .fibers
            .iter()
            .map(|f| {
                let mut m = f.states().clone();
                for c in 0..m.ncols() {
                    let phase = Complex64::from_polar(
                        1.0,
                        rng.random_range(0.0..std::f64::consts::TAU),
                    );
                    for z in m.column_mut(c).iter_mut() {
                        *z *= phase;
                    }
                }
                BlochFiber::from_parts(f.k, f.energies().to_vec(), m)
            })
            .collect();
        FiberGrid { lattice: self.lattice.clone(), n: self.n, fibers }
    }
}

/// How the last grid column/row connects back to the first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WrapRule {
    /// The fiber matrix is exactly periodic over the grid cell; wrap links
    /// reuse the eigenvectors at index 0 unchanged (discrete models).
    Plain,
    /// Continuum plane-wave fibers: the state at `k + γ*_d` is the state at
    /// `k` with coefficients shifted one step in the `G`-index lattice,
    /// `c'_m = c_{m + e_d}`.
    DualShift,
}

/// Normalized Berry link variables on the Brillouin-zone torus.
#[derive(Debug, Clone)]
pub struct LinkGrid {
    n: [usize; 2],
    bz_volume: f64,
    /// `link[d]` holds the link from site (i,j) to its neighbour in
    /// direction d, row-major over (i,j).
    link: [Vec<Complex64>; 2],
}

fn shifted_state(
    fiber: &BlochFiber,
    basis: &PlaneWaveBasis,
    band: usize,
    dir: usize,
) -> DVector<Complex64> {
    let src = fiber.state(band);
    let mut out = DVector::from_element(basis.len(), Complex64::new(0.0, 0.0));
    let e = if dir == 0 { [1_i64, 0] } else { [0_i64, 1] };
    for i in 0..basis.len() {
        let m = basis.index(i);
        if let Some(j) = basis.position_of([m[0] + e[0], m[1] + e[1]]) {
            out[i] = src[j];
        }
    }
    out
}

impl LinkGrid {
    /// Build links for `band` from fibers on the BZ grid.
    ///
    /// `basis` is required for [`WrapRule::DualShift`] and must be the basis
    /// the fibers were solved in.
    pub fn build(
        grid: &FiberGrid,
        band: usize,
        wrap: WrapRule,
        basis: Option<&PlaneWaveBasis>,
    ) -> Result<Self> {
        let [n0, n1] = grid.shape();
        if grid.lattice().dim() != 2 {
            return Err(Error::UnsupportedDimension { expected: 2, got: grid.lattice().dim() });
        }
        if wrap == WrapRule::DualShift && basis.is_none() {
            return Err(Error::Config("dual-shift wrap needs the plane-wave basis".into()));
        }
        let mut link = [
            vec![Complex64::new(0.0, 0.0); n0 * n1],
            vec![Complex64::new(0.0, 0.0); n0 * n1],
        ];
        for i in 0..n0 {
            for j in 0..n1 {
                for d in 0..2 {
                    let (ni, nj) = if d == 0 { (i + 1, j) } else { (i, j + 1) };
                    let wraps = (d == 0 && ni == n0) || (d == 1 && nj == n1);
                    let here = grid.fiber(i, j);
                    let there = grid.fiber(ni % n0, nj % n1);
                    let ov = if wraps && wrap == WrapRule::DualShift {
                        let shifted = shifted_state(there, basis.unwrap(), band, d);
                        here.state(band).dotc(&shifted)
                    } else {
                        there_overlap(here, there, band)
                    };
                    let mag = ov.norm();
                    if mag < LINK_TOL {
                        return Err(Error::GridTooCoarse(format!(
                            "vanishing band-{band} overlap on edge ({i},{j}) direction {d}"
                        )));
                    }
                    link[d][i * n1 + j] = ov / mag;
                }
            }
        }
        Ok(LinkGrid { n: [n0, n1], bz_volume: grid.lattice().bz_volume(), link })
    }

    pub fn shape(&self) -> [usize; 2] {
        self.n
    }

    pub fn bz_volume(&self) -> f64 {
        self.bz_volume
    }

    fn link_at(&self, d: usize, i: usize, j: usize) -> Complex64 {
        self.link[d][(i % self.n[0]) * self.n[1] + (j % self.n[1])]
    }

    /// Phase of the oriented plaquette loop based at (i,j):
    /// (i,j) -> (i+1,j) -> (i+1,j+1) -> (i,j+1) -> (i,j).
    pub fn plaquette_phase(&self, i: usize, j: usize) -> f64 {
        let p = self.link_at(0, i, j) * self.link_at(1, i + 1, j)
            / (self.link_at(0, i, j + 1) * self.link_at(1, i, j));
        p.arg()
    }

    /// Berry curvature per plaquette (value at the plaquette centre),
    /// row-major over plaquette indices.
    pub fn plaquette_curvature(&self) -> Vec<f64> {
        let [n0, n1] = self.n;
        let area = self.bz_volume / (n0 * n1) as f64;
        let mut out = vec![0.0; n0 * n1];
        for i in 0..n0 {
            for j in 0..n1 {
                out[i * n1 + j] = -self.plaquette_phase(i, j) / area;
            }
        }
        out
    }
}

/// Outcome of the quantized curvature sum.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ChernResult {
    pub chern: i64,
    /// Pre-rounding distance of the plaquette sum / 2π from `chern`.
    pub residual: f64,
}

/// Chern number from the plaquette phases; the sum over the closed torus is
/// an integer multiple of 2π up to rounding, independent of the grid.
pub fn chern_number(links: &LinkGrid) -> Result<ChernResult> {
    let [n0, n1] = links.shape();
    let mut total = 0.0;
    for i in 0..n0 {
        for j in 0..n1 {
            total += links.plaquette_phase(i, j);
        }
    }
    let value = -total / (2.0 * std::f64::consts::PI);
    let chern = value.round();
    let residual = (value - chern).abs();
    if residual > CHERN_RESIDUAL_LIMIT {
        return Err(Error::NonQuantized { residual });
    }
    Ok(ChernResult { chern: chern as i64, residual })
}

/// Hall current of a filled band in a weak driving field:
/// `j = -E^perp * (2π C)` with `E^perp` the counterclockwise π/2 rotation.
pub fn hall_current(chern: i64, efield: Vector2<f64>) -> Vector2<f64> {
    let eperp = Vector2::new(-efield.y, efield.x);
    -2.0 * std::f64::consts::PI * chern as f64 * eperp
}

/// Sum-over-states curvature and magnetic moment (the 12-components of the
/// antisymmetric 2-forms) for `band` at the fiber's quasi-momentum.
///
/// The moment uses the identity that `(H_per - E_n)` annihilates the
/// band-diagonal part of `d_k ψ_n`, turning the defining derivative formula
/// into a phase-free double sum; the finite-difference oracle for this
/// rewriting lives in the test suite.
pub fn sos_curvature_moment(
    fiber: &BlochFiber,
    basis: &PlaneWaveBasis,
    band: usize,
    n_sum: usize,
) -> Result<(f64, f64)> {
    assert!(band >= 1 && n_sum >= band);
    assert!(
        n_sum <= fiber.n_bands(),
        "sum over states needs {n_sum} bands, fiber has {}",
        fiber.n_bands()
    );
    let en = fiber.energy(band);
    let un = fiber.state(band);
    let nq = basis.len();
    let mut omega = 0.0;
    let mut moment = 0.0;
    for m in 1..=n_sum {
        if m == band {
            continue;
        }
        let em = fiber.energy(m);
        let de = en - em;
        if de.abs() < DEGENERACY_TOL {
            return Err(Error::NearDegeneracy { band, separation: de.abs() });
        }
        let um = fiber.state(m);
        let mut v1 = Complex64::new(0.0, 0.0); // <u_n| dH/dk_x |u_m>
        let mut v2m = Complex64::new(0.0, 0.0); // <u_m| dH/dk_y |u_n>
        for g in 0..nq {
            let kg = fiber.k + basis.vector(g);
            v1 += un[g].conj() * um[g] * kg.x;
            v2m += um[g].conj() * un[g] * kg.y;
        }
        let prod = (v1 * v2m).im;
        omega += -2.0 * prod / (de * de);
        moment += 0.5 * prod / de;
    }
    Ok((omega, moment))
}

/// Options controlling [`GeometryGrid::build`].
#[derive(Debug, Clone, Copy)]
pub struct GeometryOptions {
    /// Bands kept in the sum over states; 0 selects the default
    /// `4 * band index` (and never fewer than `band + 3`).
    pub sos_bands: usize,
    pub gap_threshold: f64,
    pub store_links: bool,
}

impl Default for GeometryOptions {
    fn default() -> Self {
        GeometryOptions { sos_bands: 0, gap_threshold: GAP_THRESHOLD, store_links: true }
    }
}

impl GeometryOptions {
    pub fn effective_sos_bands(&self, band: usize) -> usize {
        if self.sos_bands == 0 {
            (4 * band).max(band + 3)
        } else {
            self.sos_bands
        }
    }
}

/// Band data sampled on a uniform Brillouin-zone grid: energy, its spectral
/// gradient, curvature and magnetic moment (12-components), the spectral
/// moment gradient needed by the corrected flow, and optionally the Berry
/// link phases.
#[derive(Debug, Clone)]
pub struct GeometryGrid {
    lattice: Lattice,
    band: usize,
    n: [usize; 2],
    energy: Vec<f64>,
    grad_energy: [Vec<f64>; 2],
    curvature: Vec<f64>,
    moment: Vec<f64>,
    grad_moment: [Vec<f64>; 2],
    links: Option<LinkGrid>,
    min_gap: f64,
}

impl GeometryGrid {
    pub fn build(
        potential: &FourierPotential,
        basis: &PlaneWaveBasis,
        band: usize,
        n: [usize; 2],
        opts: GeometryOptions,
    ) -> Result<Self> {
        let dim = potential.lattice().dim();
        let n = [n[0], if dim == 2 { n[1] } else { 1 }];
        if n[0] < 4 || (dim == 2 && n[1] < 4) {
            return Err(Error::Config("geometry grid needs at least 4 points per dimension".into()));
        }
        let n_sum = opts.effective_sos_bands(band);
        let n_bands = n_sum.max(band + 1);
        if n_bands > basis.len() {
            return Err(Error::Config(format!(
                "basis too small: {} plane waves for {n_bands} bands",
                basis.len()
            )));
        }
        let grid = FiberGrid::solve(potential, basis, n, n_bands)?;
        Self::from_fibers(&grid, basis, band, opts)
    }

    /// Assemble the geometry from already-solved fibers.
    pub fn from_fibers(
        grid: &FiberGrid,
        basis: &PlaneWaveBasis,
        band: usize,
        opts: GeometryOptions,
    ) -> Result<Self> {
        let lattice = grid.lattice().clone();
        let dim = lattice.dim();
        let n = grid.shape();
        let n_sum = opts
            .effective_sos_bands(band)
            .min(grid.fibers()[0].n_bands());
        let min_gap = crate::bloch::min_gap(band, grid.fibers(), opts.gap_threshold)?;

        let energy: Vec<f64> = grid.fibers().iter().map(|f| f.energy(band)).collect();
        let grad_energy = spectral_gradient(&lattice, n, &energy);

        let (curvature, moment, links) = if dim == 2 {
            let per_point: Result<Vec<(f64, f64)>> = grid
                .fibers()
                .par_iter()
                .map(|f| sos_curvature_moment(f, basis, band, n_sum))
                .collect();
            let per_point = per_point?;
            let curvature: Vec<f64> = per_point.iter().map(|p| p.0).collect();
            let moment: Vec<f64> = per_point.iter().map(|p| p.1).collect();
            let links = if opts.store_links {
                Some(LinkGrid::build(grid, band, WrapRule::DualShift, Some(basis))?)
            } else {
                None
            };
            (curvature, moment, links)
        } else {
            (vec![0.0; n[0]], vec![0.0; n[0]], None)
        };
        let grad_moment = if dim == 2 {
            spectral_gradient(&lattice, n, &moment)
        } else {
            [vec![0.0; n[0]], vec![0.0; n[0]]]
        };

        Ok(GeometryGrid {
            lattice,
            band,
            n,
            energy,
            grad_energy,
            curvature,
            moment,
            grad_moment,
            links,
            min_gap,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn band(&self) -> usize {
        self.band
    }

    pub fn shape(&self) -> [usize; 2] {
        self.n
    }

    pub fn min_gap(&self) -> f64 {
        self.min_gap
    }

    pub fn links(&self) -> Option<&LinkGrid> {
        self.links.as_ref()
    }

    pub fn k_point(&self, i: usize, j: usize) -> Vector2<f64> {
        let mut k = (i as f64 / self.n[0] as f64) * self.lattice.dual(0);
        if self.lattice.dim() == 2 {
            k += (j as f64 / self.n[1] as f64) * self.lattice.dual(1);
        }
        k
    }

    pub fn energy_samples(&self) -> &[f64] {
        &self.energy
    }

    pub fn curvature_samples(&self) -> &[f64] {
        &self.curvature
    }

    pub fn moment_samples(&self) -> &[f64] {
        &self.moment
    }

    pub fn grad_energy_sample(&self, i: usize, j: usize) -> Vector2<f64> {
        let idx = i * self.n[1] + j;
        Vector2::new(self.grad_energy[0][idx], self.grad_energy[1][idx])
    }

    fn frac(&self, kappa: Vector2<f64>) -> [f64; 2] {
        let f = self.lattice.dual_fractional(kappa);
        [f.x - f.x.floor(), f.y - f.y.floor()]
    }

    fn interp_scalar(&self, values: &[f64], kappa: Vector2<f64>) -> f64 {
        let f = self.frac(kappa);
        debug_assert!((0.0..1.0).contains(&f[0]) && (0.0..1.0).contains(&f[1]));
        if self.lattice.dim() == 1 {
            interp1_with_deriv(values, f[0]).0
        } else {
            interp2_with_deriv(values, self.n, f).0
        }
    }

    /// Gradient of the interpolant itself (fractional chain rule); used only
    /// by the consistency check against the spectrally computed gradient.
    fn interp_scalar_grad(&self, values: &[f64], kappa: Vector2<f64>) -> (f64, Vector2<f64>) {
        let f = self.frac(kappa);
        let two_pi = 2.0 * std::f64::consts::PI;
        if self.lattice.dim() == 1 {
            let (v, d) = interp1_with_deriv(values, f[0]);
            (v, d / two_pi * self.lattice.basis(0))
        } else {
            let (v, d) = interp2_with_deriv(values, self.n, f);
            let g = (d[0] * self.lattice.basis(0) + d[1] * self.lattice.basis(1)) / two_pi;
            (v, g)
        }
    }

    pub fn energy_at(&self, kappa: Vector2<f64>) -> f64 {
        self.interp_scalar(&self.energy, kappa)
    }

    pub fn grad_energy_at(&self, kappa: Vector2<f64>) -> Vector2<f64> {
        Vector2::new(
            self.interp_scalar(&self.grad_energy[0], kappa),
            self.interp_scalar(&self.grad_energy[1], kappa),
        )
    }

    pub fn curvature_at(&self, kappa: Vector2<f64>) -> f64 {
        if self.lattice.dim() == 1 {
            return 0.0;
        }
        self.interp_scalar(&self.curvature, kappa)
    }

    pub fn moment_at(&self, kappa: Vector2<f64>) -> f64 {
        if self.lattice.dim() == 1 {
            return 0.0;
        }
        self.interp_scalar(&self.moment, kappa)
    }

    pub fn grad_moment_at(&self, kappa: Vector2<f64>) -> Vector2<f64> {
        if self.lattice.dim() == 1 {
            return Vector2::zeros();
        }
        Vector2::new(
            self.interp_scalar(&self.grad_moment[0], kappa),
            self.interp_scalar(&self.grad_moment[1], kappa),
        )
    }

    /// Maximum disagreement between the spectral gradient field and the
    /// derivative of the energy interpolant, sampled off-grid. Large values
    /// mean the grid under-resolves the band.
    pub fn gradient_consistency(&self, samples: usize) -> f64 {
        let mut worst = 0.0_f64;
        for s in 0..samples {
            let t = (s as f64 + 0.37) / samples as f64;
            let mut kappa = t * self.lattice.dual(0);
            if self.lattice.dim() == 2 {
                kappa += ((s as f64 * 0.61803) % 1.0) * self.lattice.dual(1);
            }
            let spectral = self.grad_energy_at(kappa);
            let (_, direct) = self.interp_scalar_grad(&self.energy, kappa);
            worst = worst.max((spectral - direct).norm());
        }
        worst
    }

    pub fn chern(&self) -> Result<ChernResult> {
        let links = self.links.as_ref().ok_or(Error::UnsupportedDimension {
            expected: 2,
            got: self.lattice.dim(),
        })?;
        chern_number(links)
    }

    pub fn hall_current(&self, efield: Vector2<f64>) -> Result<Vector2<f64>> {
        if self.lattice.dim() != 2 {
            return Err(Error::UnsupportedDimension { expected: 2, got: self.lattice.dim() });
        }
        Ok(hall_current(self.chern()?.chern, efield))
    }

    /// CSV rows `(k, E, grad E, Omega_12, M_12)` over the grid.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        if self.lattice.dim() == 1 {
            writeln!(w, "k1,energy,grad_e1")?;
            for i in 0..self.n[0] {
                let k = self.k_point(i, 0);
                writeln!(w, "{},{},{}", k.x, self.energy[i], self.grad_energy[0][i])?;
            }
        } else {
            writeln!(w, "k1,k2,energy,grad_e1,grad_e2,omega_12,moment_12")?;
            for i in 0..self.n[0] {
                for j in 0..self.n[1] {
                    let k = self.k_point(i, j);
                    let idx = i * self.n[1] + j;
                    writeln!(
                        w,
                        "{},{},{},{},{},{},{}",
                        k.x,
                        k.y,
                        self.energy[idx],
                        self.grad_energy[0][idx],
                        self.grad_energy[1][idx],
                        self.curvature[idx],
                        self.moment[idx]
                    )?;
                }
            }
        }
        Ok(())
    }
}

fn there_overlap(here: &BlochFiber, there: &BlochFiber, band: usize) -> Complex64 {
    here.state(band).dotc(&there.state(band))
}

/// Spectral gradient of a periodic field sampled on the BZ grid. The Fourier
/// dual of the quasi-momentum torus is the direct lattice, so mode `(m0,m1)`
/// differentiates as multiplication by `i (m0 γ_1 + m1 γ_2)`. Nyquist rows
/// are dropped to keep the derivative real.
pub fn spectral_gradient(lattice: &Lattice, n: [usize; 2], values: &[f64]) -> [Vec<f64>; 2] {
    let (n0, n1) = (n[0], n[1]);
    assert_eq!(values.len(), n0 * n1);
    let mut hat: Vec<Complex64> =
        values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2_forward(&mut hat, n0, n1);

    // The 1/N of the analysis step is supplied by fft2_inverse below.
    let mut gx = vec![Complex64::new(0.0, 0.0); n0 * n1];
    let mut gy = vec![Complex64::new(0.0, 0.0); n0 * n1];
    for a in 0..n0 {
        let m0 = freq_index(a, n0);
        let nyq0 = n0 % 2 == 0 && a == n0 / 2;
        for b in 0..n1 {
            let m1 = freq_index(b, n1);
            let nyq1 = n1 > 1 && n1 % 2 == 0 && b == n1 / 2;
            let idx = a * n1 + b;
            if nyq0 || nyq1 {
                continue;
            }
            let gamma = m0 as f64 * lattice.basis(0)
                + if lattice.dim() == 2 { m1 as f64 * lattice.basis(1) } else { Vector2::zeros() };
            gx[idx] = Complex64::new(0.0, gamma.x) * hat[idx];
            gy[idx] = Complex64::new(0.0, gamma.y) * hat[idx];
        }
    }
    crate::fftutil::fft2_inverse(&mut gx, n0, n1);
    crate::fftutil::fft2_inverse(&mut gy, n0, n1);
    [gx.iter().map(|c| c.re).collect(), gy.iter().map(|c| c.re).collect()]
}
