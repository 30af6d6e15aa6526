//! Fiberwise Bloch eigenvalue problem in the plane-wave basis.
//!
//! For fixed quasi-momentum `k` the fiber Hamiltonian has matrix elements
//! `H(k)_{GG'} = ½|k+G|² δ_{GG'} + V̂_{G-G'}`. Bands are indexed starting
//! from 1 (lowest).

use nalgebra::{DMatrix, DVector, Vector2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::planewave::{BasisKind, PlaneWaveBasis};
use crate::potential::FourierPotential;

/// Relative residual accepted from the eigensolver.
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Orthonormality tolerance for returned eigenvectors.
pub const ORTHO_TOL: f64 = 1e-10;
/// Default threshold below which a band gap counts as closed.
pub const GAP_THRESHOLD: f64 = 1e-6;

/// Eigenpairs of one Bloch fiber: ascending energies and the matching
/// coefficient vectors over the basis `G`-set (one column per band).
#[derive(Debug, Clone)]
pub struct BlochFiber {
    pub k: Vector2<f64>,
    energies: Vec<f64>,
    vectors: DMatrix<Complex64>,
}

impl BlochFiber {
    pub fn n_bands(&self) -> usize {
        self.energies.len()
    }

    /// Band energy, `band` counted from 1.
    pub fn energy(&self, band: usize) -> f64 {
        assert!(band >= 1 && band <= self.energies.len(), "band index out of range");
        self.energies[band - 1]
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Coefficient vector of `band` (1-based) over the basis `G`-set.
    pub fn state(&self, band: usize) -> nalgebra::DVectorView<'_, Complex64> {
        assert!(band >= 1 && band <= self.energies.len(), "band index out of range");
        self.vectors.column(band - 1)
    }

    pub fn states(&self) -> &DMatrix<Complex64> {
        &self.vectors
    }

    /// Construct directly from eigenpairs (used by the discrete magnetic
    /// model, which diagonalizes its own fiber matrix).
    pub fn from_parts(k: Vector2<f64>, energies: Vec<f64>, vectors: DMatrix<Complex64>) -> Self {
        BlochFiber { k, energies, vectors }
    }
}

/// Assemble the fiber Hamiltonian at quasi-momentum `k`.
///
/// Coefficients `V̂_{G-G'}` outside the stored support are zero. For an
/// FFT-grid basis the index difference is reduced into the mode range
/// (mod the grid), which matches the collocation operator of that grid.
pub fn bloch_hamiltonian(
    k: Vector2<f64>,
    potential: &FourierPotential,
    basis: &PlaneWaveBasis,
) -> DMatrix<Complex64> {
    let n = basis.len();
    let mut h = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    let grid_span = fft_span(basis);
    for i in 0..n {
        let gi = basis.vector(i);
        let kin = 0.5 * (k + gi).norm_squared();
        h[(i, i)] += Complex64::new(kin, 0.0);
        let mi = basis.index(i);
        for j in 0..n {
            let mj = basis.index(j);
            let mut dm = [mi[0] - mj[0], mi[1] - mj[1]];
            if let Some(span) = grid_span {
                dm = reduce_mod(dm, span);
            }
            let c = potential.coefficient(dm);
            if c.norm_sqr() > 0.0 {
                h[(i, j)] += c;
            }
        }
    }
    h
}

fn fft_span(basis: &PlaneWaveBasis) -> Option<[i64; 2]> {
    match basis.kind() {
        BasisKind::FftGrid => {
            let mut span = [0_i64; 2];
            for m in basis.indices() {
                span[0] = span[0].max(m[0].abs() + 1);
                span[1] = span[1].max(m[1].abs() + 1);
            }
            // Span per dimension is the mode count n_j; reconstruct from the
            // index extremes (lo = -n/2 .. hi = n/2 - 1 for even n).
            let lo0 = basis.indices().iter().map(|m| m[0]).min().unwrap();
            let hi0 = basis.indices().iter().map(|m| m[0]).max().unwrap();
            let lo1 = basis.indices().iter().map(|m| m[1]).min().unwrap();
            let hi1 = basis.indices().iter().map(|m| m[1]).max().unwrap();
            Some([hi0 - lo0 + 1, hi1 - lo1 + 1])
        }
        BasisKind::Shell => None,
    }
}

fn reduce_mod(mut m: [i64; 2], span: [i64; 2]) -> [i64; 2] {
    for j in 0..2 {
        if span[j] > 1 {
            let n = span[j];
            let half = n / 2;
            m[j] = ((m[j] + half).rem_euclid(n)) - half;
        }
    }
    m
}

/// Diagonalize the fiber at `k` and keep the lowest `n_max` bands.
///
/// Output is deterministic: energies ascend, exact ties are broken by
/// lexicographic comparison of the phase-fixed eigenvectors, and each
/// eigenvector is rotated so its largest-magnitude component is real
/// and positive.
pub fn solve_fiber(
    k: Vector2<f64>,
    potential: &FourierPotential,
    basis: &PlaneWaveBasis,
    n_max: usize,
) -> Result<BlochFiber> {
    assert!(n_max >= 1 && n_max <= basis.len(), "n_max must be in 1..=basis.len()");
    let h = bloch_hamiltonian(k, potential, basis);
    diagonalize_fiber(k, h, n_max, basis.cutoff())
}

/// Shared eigensolver path: sort, tie-break, phase-fix, validate.
pub fn diagonalize_fiber(
    k: Vector2<f64>,
    h: DMatrix<Complex64>,
    n_max: usize,
    cutoff: f64,
) -> Result<BlochFiber> {
    let n = h.nrows();
    let eig = h
        .clone()
        .try_symmetric_eigen(1e-14, 10_000)
        .ok_or(Error::EigenFailure { k0: k.x, k1: k.y, cutoff })?;

    let scale = eig.eigenvalues.iter().fold(1.0_f64, |a, &e| a.max(e.abs()));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (ea, eb) = (eig.eigenvalues[a], eig.eigenvalues[b]);
        if (ea - eb).abs() > 1e-12 * scale {
            return ea.partial_cmp(&eb).unwrap();
        }
        // Stable tie-break: compare phase-fixed eigenvectors lexicographically.
        let va = phase_fixed(&eig.eigenvectors.column(a).into_owned());
        let vb = phase_fixed(&eig.eigenvectors.column(b).into_owned());
        for i in 0..n {
            let c = va[i]
                .re
                .partial_cmp(&vb[i].re)
                .unwrap()
                .then(va[i].im.partial_cmp(&vb[i].im).unwrap());
            if c != std::cmp::Ordering::Equal {
                return c;
            }
        }
        std::cmp::Ordering::Equal
    });

    let mut energies = Vec::with_capacity(n_max);
    let mut vectors = DMatrix::from_element(n, n_max, Complex64::new(0.0, 0.0));
    for (col, &src) in order.iter().take(n_max).enumerate() {
        let e = eig.eigenvalues[src];
        let v = phase_fixed(&eig.eigenvectors.column(src).into_owned());

        let norm = v.norm();
        if (norm - 1.0).abs() > ORTHO_TOL {
            return Err(Error::EigenFailure { k0: k.x, k1: k.y, cutoff });
        }
        let residual = (&h * &v - &v * Complex64::new(e, 0.0)).norm();
        if residual > RESIDUAL_TOL * e.abs().max(1.0) {
            return Err(Error::EigenFailure { k0: k.x, k1: k.y, cutoff });
        }
        energies.push(e);
        vectors.set_column(col, &v);
    }
    Ok(BlochFiber { k, energies, vectors })
}

/// Rotate so the largest-magnitude component is real positive.
fn phase_fixed(v: &DVector<Complex64>) -> DVector<Complex64> {
    let mut best = 0usize;
    let mut best_mag = -1.0;
    for (i, c) in v.iter().enumerate() {
        let m = c.norm_sqr();
        if m > best_mag * (1.0 + 1e-12) {
            best_mag = m;
            best = i;
        }
    }
    let c = v[best];
    if c.norm() == 0.0 {
        return v.clone();
    }
    v * (c.conj() / c.norm())
}

/// Minimum distance of band `n` (1-based) to its neighbours over the given
/// fibers. Fibers must hold at least `n+1` bands. Errors with a gap-closure
/// diagnostic when the result falls below `threshold`.
pub fn min_gap(band: usize, fibers: &[BlochFiber], threshold: f64) -> Result<f64> {
    assert!(band >= 1);
    assert!(!fibers.is_empty());
    let mut gap = f64::INFINITY;
    for f in fibers {
        assert!(
            f.n_bands() >= band + 1,
            "min_gap needs at least band+1 = {} solved bands",
            band + 1
        );
        let upper = f.energy(band + 1) - f.energy(band);
        gap = gap.min(upper);
        if band > 1 {
            gap = gap.min(f.energy(band) - f.energy(band - 1));
        }
    }
    if gap < threshold {
        return Err(Error::GapClosure { band, gap, threshold });
    }
    Ok(gap)
}
