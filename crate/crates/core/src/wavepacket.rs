//! Band wave packets and the fiberwise band projection.
//!
//! The box supports Bloch waves at the discrete quasi-momenta
//! `k_m = Σ (m_j/cells_j) γ*_j`; every box FFT mode splits uniquely as
//! `k_m + G` with `G` on the dual lattice. Packets are assembled directly
//! in that spectral decomposition, and the band projector used by the
//! leakage measure diagonalizes the same collocation fibers, so states
//! built from band-n fibers are exactly in the band-n subspace.

use nalgebra::{DVector, Vector2};
use num_complex::Complex64;

use crate::bloch::{solve_fiber, BlochFiber};
use crate::error::{Error, Result};
use crate::fftutil::{fft2_forward, fft2_inverse};
use crate::planewave::PlaneWaveBasis;
use crate::potential::FourierPotential;
use crate::wavefield::{SimBox, WaveField};

/// Envelope weight relative to the peak allowed at the zone boundary.
pub const EDGE_RATIO_LIMIT: f64 = 1e-8;

/// Bloch fibers solved on the box quasi-momentum grid using the box's own
/// FFT mode set (so the fiber eigenbasis is complete for box functions).
#[derive(Debug, Clone)]
pub struct BoxFibers {
    bx: SimBox,
    basis: PlaneWaveBasis,
    fibers: Vec<BlochFiber>,
}

impl BoxFibers {
    pub fn solve(bx: &SimBox, potential: &FourierPotential, n_bands: usize) -> Result<Self> {
        let lattice = bx.lattice().clone();
        let dim = lattice.dim();
        let ppc = bx.points_per_cell();
        let basis = PlaneWaveBasis::fft_grid(
            lattice,
            [ppc, if dim == 2 { ppc } else { 1 }],
        )?;
        let n_bands = n_bands.min(basis.len());
        let cells = bx.cells();
        let mut fibers = Vec::with_capacity(cells[0] * cells[1]);
        use rayon::prelude::*;
        let idxs: Vec<usize> = (0..cells[0] * cells[1]).collect();
        let solved: Result<Vec<BlochFiber>> = idxs
            .par_iter()
            .map(|&idx| {
                let m = [idx / cells[1], idx % cells[1]];
                solve_fiber(bx.bloch_k(m), potential, &basis, n_bands)
            })
            .collect();
        fibers.extend(solved?);
        Ok(BoxFibers { bx: bx.clone(), basis, fibers })
    }

    pub fn simbox(&self) -> &SimBox {
        &self.bx
    }

    pub fn basis(&self) -> &PlaneWaveBasis {
        &self.basis
    }

    pub fn n_bands(&self) -> usize {
        self.fibers[0].n_bands()
    }

    pub fn fiber(&self, m: [usize; 2]) -> &BlochFiber {
        let cells = self.bx.cells();
        &self.fibers[(m[0] % cells[0]) * cells[1] + (m[1] % cells[1])]
    }

    /// Map a fiber basis position to the raw box FFT index, given the fiber
    /// quasi-momentum index `m`.
    fn fft_index(&self, m: [usize; 2], basis_pos: usize) -> usize {
        let g = self.basis.index(basis_pos);
        let cells = self.bx.cells();
        let n = self.bx.n_points();
        let l0 = (m[0] as i64 + g[0] * cells[0] as i64).rem_euclid(n[0] as i64) as usize;
        let l1 = if self.bx.dim() == 2 {
            (m[1] as i64 + g[1] * cells[1] as i64).rem_euclid(n[1] as i64) as usize
        } else {
            0
        };
        l0 * n[1] + l1
    }

    /// The exact discrete Bloch wave of `band` at quasi-momentum index `m`,
    /// normalized on the box.
    pub fn bloch_wave(&self, band: usize, m: [usize; 2]) -> Result<WaveField> {
        let n = self.bx.n_points();
        let mut spectrum = vec![Complex64::new(0.0, 0.0); n[0] * n[1]];
        let fiber = self.fiber(m);
        let state = fiber.state(band);
        for pos in 0..self.basis.len() {
            spectrum[self.fft_index(m, pos)] = state[pos];
        }
        fft2_inverse(&mut spectrum, n[0], n[1]);
        let mut psi = WaveField::new(self.bx.clone(), spectrum)?;
        psi.normalize();
        Ok(psi)
    }
}

/// Which periodic part multiplies the carrier waves of a packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketCarrier {
    /// `u_n(k, x/ε)` varies with `k`: the packet lies exactly in the
    /// zeroth-order band subspace.
    BandExact,
    /// `u_n(k0, x/ε)` frozen at the packet centre: the textbook
    /// construction, in-band only up to `O(σ²)`.
    FrozenAtCenter,
}

/// Gaussian band wave packet
/// `ψ(x) = N Σ_m g(k_m - k0) e^{i k_m·x/ε} u_n(k_m, x/ε)`
/// assembled in the box spectral decomposition.
pub fn build_band_wavepacket(
    fibers: &BoxFibers,
    band: usize,
    k0: Vector2<f64>,
    sigma: f64,
    carrier: PacketCarrier,
) -> Result<WaveField> {
    let bx = fibers.simbox();
    let lattice = bx.lattice();
    if !(sigma > 0.0) {
        return Err(Error::Config("packet momentum width must be positive".into()));
    }
    // Envelope at the closest Brillouin-zone boundary relative to the peak.
    let mut min_edge = f64::INFINITY;
    for j in 0..lattice.dim() {
        min_edge = min_edge.min(std::f64::consts::PI / lattice.basis(j).norm());
    }
    let edge_ratio = (-(min_edge * min_edge) / (4.0 * sigma * sigma)).exp();
    if edge_ratio > EDGE_RATIO_LIMIT {
        return Err(Error::WidthError { edge_ratio, limit: EDGE_RATIO_LIMIT });
    }

    let cells = bx.cells();
    let dim = bx.dim();
    let envelope = |m: [usize; 2]| -> f64 {
        // Minimum-image distance of k_m from k0 on the dual torus.
        let f = lattice.dual_fractional(bx.bloch_k(m) - k0);
        let w0 = f.x - f.x.round();
        let w1 = if dim == 2 { f.y - f.y.round() } else { 0.0 };
        let dk = w0 * lattice.dual(0) + if dim == 2 { w1 * lattice.dual(1) } else { Vector2::zeros() };
        (-dk.norm_squared() / (4.0 * sigma * sigma)).exp()
    };

    // Parallel-transport gauge along the k-grid away from the centre index,
    // so neighbouring fibers combine with aligned phases.
    let center = nearest_index(bx, k0);
    let mut aligned: Vec<Option<DVector<Complex64>>> = vec![None; cells[0] * cells[1]];
    let order = transport_order(cells, center, dim);
    for &(m, prev) in &order {
        let state = match carrier {
            PacketCarrier::BandExact => fibers.fiber(m).state(band).into_owned(),
            PacketCarrier::FrozenAtCenter => fibers.fiber(center).state(band).into_owned(),
        };
        let state = match prev {
            None => state,
            Some(p) => {
                let prev_state = aligned[p[0] * cells[1] + p[1]].as_ref().unwrap();
                let ov = prev_state.dotc(&state);
                if ov.norm() < 1e-12 {
                    state
                } else {
                    state * (ov.conj() / ov.norm())
                }
            }
        };
        aligned[m[0] * cells[1] + m[1]] = Some(state);
    }

    let n = bx.n_points();
    let mut spectrum = vec![Complex64::new(0.0, 0.0); n[0] * n[1]];
    for i0 in 0..cells[0] {
        for i1 in 0..cells[1] {
            let m = [i0, i1];
            let w = envelope(m);
            if w < 1e-14 {
                continue;
            }
            let state = aligned[i0 * cells[1] + i1].as_ref().unwrap();
            for pos in 0..fibers.basis().len() {
                spectrum[fibers.fft_index(m, pos)] += w * state[pos];
            }
        }
    }
    fft2_inverse(&mut spectrum, n[0], n[1]);
    let mut psi = WaveField::new(bx.clone(), spectrum)?;
    psi.normalize();
    Ok(psi)
}

fn nearest_index(bx: &SimBox, k0: Vector2<f64>) -> [usize; 2] {
    let f = bx.lattice().dual_fractional(k0);
    let cells = bx.cells();
    let wrap = |x: f64, n: usize| -> usize {
        let m = (x * n as f64).round() as i64;
        m.rem_euclid(n as i64) as usize
    };
    [wrap(f.x, cells[0]), if bx.dim() == 2 { wrap(f.y, cells[1]) } else { 0 }]
}

type Step = ([usize; 2], Option<[usize; 2]>);

/// Visit the centre row outward, then each column outward from that row.
fn transport_order(cells: [usize; 2], center: [usize; 2], dim: usize) -> Vec<Step> {
    let mut order: Vec<Step> = Vec::with_capacity(cells[0] * cells[1]);
    let row_steps = walk(cells[0], center[0]);
    for &(i, iprev) in &row_steps {
        order.push(([i, center[1]], iprev.map(|p| [p, center[1]])));
    }
    if dim == 2 {
        for &(i, _) in &row_steps {
            for &(j, jprev) in walk(cells[1], center[1]).iter().skip(1) {
                order.push(([i, j], Some([i, jprev.unwrap()])));
            }
        }
    }
    order
}

/// 1d outward walk from `c` over `0..n` (periodic), each entry with its
/// already-visited neighbour.
fn walk(n: usize, c: usize) -> Vec<(usize, Option<usize>)> {
    let mut out: Vec<(usize, Option<usize>)> = vec![(c, None)];
    let mut up = c;
    let mut down = c;
    for step in 1..n {
        if step % 2 == 1 {
            let next = (up + 1) % n;
            out.push((next, Some(up)));
            up = next;
        } else {
            let next = (down + n - 1) % n;
            out.push((next, Some(down)));
            down = next;
        }
    }
    out
}

/// Bloch-Floquet coefficients of the box samples: for each quasi-momentum
/// index `m` the coefficient vector over the fiber basis, unitarily
/// normalized so that Σ |coef|² = Σ |ψ|² (plain sample sums).
pub fn bloch_floquet_coefficients(psi: &WaveField, fibers: &BoxFibers) -> Result<Vec<DVector<Complex64>>> {
    if !psi.simbox().same_grid(fibers.simbox()) {
        return Err(Error::IncommensurateBox(
            "wavefield and fiber set live on different boxes".into(),
        ));
    }
    let bx = psi.simbox();
    let n = bx.n_points();
    let mut hat: Vec<Complex64> = psi.samples().to_vec();
    fft2_forward(&mut hat, n[0], n[1]);
    let scale = 1.0 / (bx.total_points() as f64).sqrt();
    let cells = bx.cells();
    let nb = fibers.basis().len();
    let mut out = Vec::with_capacity(cells[0] * cells[1]);
    for i0 in 0..cells[0] {
        for i1 in 0..cells[1] {
            let mut v = DVector::from_element(nb, Complex64::new(0.0, 0.0));
            for pos in 0..nb {
                v[pos] = hat[fibers.fft_index([i0, i1], pos)] * scale;
            }
            out.push(v);
        }
    }
    Ok(out)
}

/// `1 - ‖P_n ψ‖²/‖ψ‖²` with `P_n` the fiberwise projection onto band `n`.
pub fn band_leakage(psi: &WaveField, band: usize, fibers: &BoxFibers) -> Result<f64> {
    assert!(band <= fibers.n_bands(), "band {band} not solved in the fiber set");
    let coeffs = bloch_floquet_coefficients(psi, fibers)?;
    let cells = fibers.simbox().cells();
    let mut total = 0.0;
    let mut in_band = 0.0;
    for i0 in 0..cells[0] {
        for i1 in 0..cells[1] {
            let v = &coeffs[i0 * cells[1] + i1];
            total += v.norm_squared();
            let u = fibers.fiber([i0, i1]).state(band);
            in_band += u.dotc(v).norm_sqr();
        }
    }
    if total <= 0.0 {
        return Err(Error::Config("cannot measure leakage of the zero field".into()));
    }
    Ok((1.0 - in_band / total).max(0.0))
}

/// Σ over all bands and fibers of |coefficient|² relative to ‖ψ‖²; equals 1
/// exactly when the fiber set spans every box mode.
pub fn parseval_ratio(psi: &WaveField, fibers: &BoxFibers) -> Result<f64> {
    let coeffs = bloch_floquet_coefficients(psi, fibers)?;
    let cells = fibers.simbox().cells();
    let mut total = 0.0;
    let mut sum = 0.0;
    for i0 in 0..cells[0] {
        for i1 in 0..cells[1] {
            let v = &coeffs[i0 * cells[1] + i1];
            total += v.norm_squared();
            let f = fibers.fiber([i0, i1]);
            for band in 1..=f.n_bands() {
                sum += f.state(band).dotc(v).norm_sqr();
            }
        }
    }
    Ok(sum / total)
}
