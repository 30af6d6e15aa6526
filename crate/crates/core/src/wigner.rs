//! Wigner transform of box wavefunctions, its fold onto the Brillouin
//! zone, and the equivalent lattice-shift series.
//!
//! The half-shifts `ψ(q ± εξ/2)` are realized by index arithmetic on the
//! periodic grid: the admissible `ξ` form the grid `Σ_a j_a (2γ_a/ppc)`,
//! and the transform over `ξ` is a DFT. The resulting momentum grid has
//! spacing `γ*_a / (2 cells_a)` and spans `ppc/2` whole zone copies per
//! dimension, so folding is exact index arithmetic. With that layout the
//! marginal and pairing identities hold to rounding, not just to
//! discretization error.

use nalgebra::Vector2;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fftutil::{fft2_inverse, freq_index};
use crate::wavefield::{SimBox, WaveField};

/// Imaginary residue allowed in the transform relative to the peak.
pub const IMAG_RESIDUE_TOL: f64 = 1e-10;

/// Phase-space samples `w(q, p)` with `q` on the box grid and `p` on the
/// conjugate momentum grid (both row-major).
#[derive(Debug, Clone)]
pub struct WignerGrid {
    bx: SimBox,
    values: Vec<f64>,
}

impl WignerGrid {
    pub fn simbox(&self) -> &SimBox {
        &self.bx
    }

    /// Number of momentum points per dimension (equals the grid size).
    pub fn p_shape(&self) -> [usize; 2] {
        self.bx.n_points()
    }

    pub fn value(&self, q: [usize; 2], p: [usize; 2]) -> f64 {
        let n = self.bx.n_points();
        let nq = n[0] * n[1];
        let qi = q[0] * n[1] + q[1];
        let pi = p[0] * n[1] + p[1];
        self.values[qi * nq + pi]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Momentum value of the raw p-index: `Σ_a s_a γ*_a / (2 cells_a)`.
    pub fn p_value(&self, p: [usize; 2]) -> Vector2<f64> {
        let n = self.bx.n_points();
        let cells = self.bx.cells();
        let lat = self.bx.lattice();
        let s0 = freq_index(p[0], n[0]) as f64;
        let mut v = s0 / (2.0 * cells[0] as f64) * lat.dual(0);
        if self.bx.dim() == 2 {
            let s1 = freq_index(p[1], n[1]) as f64;
            v += s1 / (2.0 * cells[1] as f64) * lat.dual(1);
        }
        v
    }

    /// Phase-space momentum volume element.
    pub fn dp_volume(&self) -> f64 {
        let cells = self.bx.cells();
        let d = self.bx.dim() as i32;
        self.bx.lattice().bz_volume()
            / (2.0f64.powi(d) * cells[0] as f64 * (if self.bx.dim() == 2 { cells[1] as f64 } else { 1.0 }))
    }

    pub fn dq_volume(&self) -> f64 {
        self.bx.volume_element()
    }

    /// Position density, momentum density and total mass by grid sums.
    pub fn marginals(&self) -> Marginals {
        let n = self.bx.n_points();
        let nq = n[0] * n[1];
        let dp = self.dp_volume();
        let dq = self.dq_volume();
        let mut position = vec![0.0; nq];
        let mut momentum = vec![0.0; nq];
        for qi in 0..nq {
            let row = &self.values[qi * nq..(qi + 1) * nq];
            let mut s = 0.0;
            for (pi, &v) in row.iter().enumerate() {
                s += v;
                momentum[pi] += v;
            }
            position[qi] = s * dp;
        }
        for m in &mut momentum {
            *m *= dq;
        }
        let total_mass = position.iter().sum::<f64>() * dq;
        Marginals { position, momentum, total_mass }
    }

    /// Grid L² norm of the phase-space function.
    pub fn l2_norm(&self) -> f64 {
        let w = self.dp_volume() * self.dq_volume();
        (self.values.iter().map(|v| v * v).sum::<f64>() * w).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct Marginals {
    pub position: Vec<f64>,
    pub momentum: Vec<f64>,
    pub total_mass: f64,
}

/// Wigner transform `w(q,p) = (2π)^{-d} ∫ dξ e^{iξ·p} ψ*(q+εξ/2) ψ(q-εξ/2)`
/// discretized over the box shift grid.
pub fn wigner_transform(psi: &WaveField) -> Result<WignerGrid> {
    let bx = psi.simbox().clone();
    let n = bx.n_points();
    let nq = n[0] * n[1];
    if nq * nq > 200_000_000 {
        return Err(Error::Config(
            "full Wigner grid would exceed memory; use the reduced form".into(),
        ));
    }
    let d = bx.dim() as i32;
    // ξ-grid volume element: |det(2 γ_a / ppc)| = (2/ppc)^d * cell volume.
    let dxi = (2.0 / bx.points_per_cell() as f64).powi(d) * bx.lattice().cell_volume();
    let prefactor = dxi / (2.0 * std::f64::consts::PI).powi(d);

    let samples = psi.samples();
    let rows: Vec<(Vec<f64>, f64, f64)> = (0..nq)
        .into_par_iter()
        .map(|qi| {
            let q = [qi / n[1], qi % n[1]];
            let mut corr = vec![Complex64::new(0.0, 0.0); nq];
            for j0 in 0..n[0] {
                // Signed shift index wraps periodically.
                for j1 in 0..n[1] {
                    let plus = [(q[0] + j0) % n[0], (q[1] + j1) % n[1]];
                    let minus = [(q[0] + n[0] - j0) % n[0], (q[1] + n[1] - j1) % n[1]];
                    corr[j0 * n[1] + j1] =
                        samples[plus[0] * n[1] + plus[1]].conj() * samples[minus[0] * n[1] + minus[1]];
                }
            }
            // Positive-exponent kernel: inverse FFT without the 1/N.
            fft2_inverse(&mut corr, n[0], n[1]);
            let scale = prefactor * nq as f64;
            let mut out = vec![0.0; nq];
            let mut max_im = 0.0f64;
            let mut max_re = 0.0f64;
            for (o, c) in out.iter_mut().zip(corr.iter()) {
                *o = c.re * scale;
                max_im = max_im.max(c.im.abs() * scale);
                max_re = max_re.max(c.re.abs() * scale);
            }
            (out, max_im, max_re)
        })
        .collect();

    // Conjugate symmetry of the correlation makes the transform real; any
    // sizable residue means the grid aliased.
    let max_im = rows.iter().map(|r| r.1).fold(0.0f64, f64::max);
    let max_re = rows.iter().map(|r| r.2).fold(0.0f64, f64::max);
    if max_im > IMAG_RESIDUE_TOL * max_re.max(1e-300) {
        return Err(Error::Aliasing(format!(
            "imaginary residue {max_im:.3e} relative to peak {max_re:.3e}"
        )));
    }

    let mut values = Vec::with_capacity(nq * nq);
    for (row, _, _) in rows {
        values.extend_from_slice(&row);
    }
    Ok(WignerGrid { bx, values })
}

/// The Wigner function folded onto `box × first Brillouin zone`: `q` on the
/// box grid, `k` on a `2 cells_a` grid per dimension.
#[derive(Debug, Clone)]
pub struct ReducedWigner {
    bx: SimBox,
    k_shape: [usize; 2],
    values: Vec<f64>,
}

impl ReducedWigner {
    pub fn simbox(&self) -> &SimBox {
        &self.bx
    }

    pub fn k_shape(&self) -> [usize; 2] {
        self.k_shape
    }

    pub fn n_k(&self) -> usize {
        self.k_shape[0] * self.k_shape[1]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn value(&self, q: [usize; 2], k: [usize; 2]) -> f64 {
        let nq1 = self.bx.n_points()[1];
        let qi = q[0] * nq1 + q[1];
        self.values[qi * self.n_k() + k[0] * self.k_shape[1] + k[1]]
    }

    /// Quasi-momentum of k-index `t` on the zone torus, in `[0, γ*)`.
    pub fn k_value(&self, t: [usize; 2]) -> Vector2<f64> {
        let lat = self.bx.lattice();
        let mut v = (t[0] as f64 / self.k_shape[0] as f64) * lat.dual(0);
        if self.bx.dim() == 2 {
            v += (t[1] as f64 / self.k_shape[1] as f64) * lat.dual(1);
        }
        v
    }

    pub fn dk_volume(&self) -> f64 {
        self.bx.lattice().bz_volume() / self.n_k() as f64
    }

    pub fn dq_volume(&self) -> f64 {
        self.bx.volume_element()
    }

    /// `Σ a(q,k) w(q,k) dq dk` against a sampled integrand.
    pub fn pair_with<F: Fn(Vector2<f64>, Vector2<f64>) -> f64 + Sync>(&self, a: F) -> f64 {
        let n = self.bx.n_points();
        let nk = self.n_k();
        let weight = self.dq_volume() * self.dk_volume();
        let per_q: Vec<f64> = (0..n[0] * n[1])
            .into_par_iter()
            .map(|qi| {
                let q = self.bx.position(qi / n[1], qi % n[1]);
                let mut s = 0.0;
                for t0 in 0..self.k_shape[0] {
                    for t1 in 0..self.k_shape[1] {
                        let k = self.k_value([t0, t1]);
                        s += a(q, k) * self.values[qi * nk + t0 * self.k_shape[1] + t1];
                    }
                }
                s
            })
            .collect();
        per_q.iter().sum::<f64>() * weight
    }

    /// Total mass `Σ w dq dk`.
    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dq_volume() * self.dk_volume()
    }

    /// Grid L¹ distance to another reduced Wigner function.
    pub fn l1_distance(&self, other: &ReducedWigner) -> f64 {
        assert!(self.bx.same_grid(other.simbox()));
        self.values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * self.dq_volume()
            * self.dk_volume()
    }

    /// CSV export: rows `(q, k, w)`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.bx.n_points();
        writeln!(w, "q1,q2,k1,k2,w")?;
        for qi in 0..n[0] * n[1] {
            let q = self.bx.position(qi / n[1], qi % n[1]);
            for t0 in 0..self.k_shape[0] {
                for t1 in 0..self.k_shape[1] {
                    let k = self.k_value([t0, t1]);
                    writeln!(
                        w,
                        "{},{},{},{},{}",
                        q.x,
                        q.y,
                        k.x,
                        k.y,
                        self.values[qi * self.n_k() + t0 * self.k_shape[1] + t1]
                    )?;
                }
            }
        }
        Ok(())
    }
}

/// Fold the momentum axis over dual-lattice translations. The p-grid always
/// holds `ppc/2` whole zone copies per dimension, so this is exact index
/// arithmetic.
pub fn fold_wigner(w: &WignerGrid) -> ReducedWigner {
    let bx = w.simbox().clone();
    let n = bx.n_points();
    let nq = n[0] * n[1];
    let cells = bx.cells();
    let k_shape = [2 * cells[0], if bx.dim() == 2 { 2 * cells[1] } else { 1 }];
    let nk = k_shape[0] * k_shape[1];
    debug_assert_eq!(n[0] % k_shape[0], 0);
    let mut values = vec![0.0; nq * nk];
    for qi in 0..nq {
        let row = &w.values()[qi * nq..(qi + 1) * nq];
        let out = &mut values[qi * nk..(qi + 1) * nk];
        for p0 in 0..n[0] {
            let t0 = p0 % k_shape[0];
            for p1 in 0..n[1] {
                let t1 = p1 % k_shape[1];
                out[t0 * k_shape[1] + t1] += row[p0 * n[1] + p1];
            }
        }
    }
    ReducedWigner { bx, k_shape, values }
}

/// Lattice-shift form of the reduced Wigner function,
/// `w_s(r,k) = |M*|^{-1} Σ_γ e^{iγ·k} ψ(r+εγ/2) ψ*(r-εγ/2)`,
/// evaluated on the same `box × zone` grid as [`fold_wigner`]. On that grid
/// the infinite lattice sum collapses exactly to one period of shifts.
pub fn wigner_series(psi: &WaveField) -> Result<ReducedWigner> {
    let bx = psi.simbox().clone();
    let cells = bx.cells();
    if cells[0] % 2 != 0 || (bx.dim() == 2 && cells[1] % 2 != 0) {
        return Err(Error::GridAlignment(
            "lattice-shift series needs an even number of cells per dimension".into(),
        ));
    }
    let n = bx.n_points();
    let nq = n[0] * n[1];
    let k_shape = [2 * cells[0], if bx.dim() == 2 { 2 * cells[1] } else { 1 }];
    let nk = k_shape[0] * k_shape[1];
    let half = bx.points_per_cell() / 2;
    let inv_bz = 1.0 / bx.lattice().bz_volume();
    let samples = psi.samples();

    let rows: Vec<(Vec<f64>, f64)> = (0..nq)
        .into_par_iter()
        .map(|qi| {
            let q = [qi / n[1], qi % n[1]];
            let mut corr = vec![Complex64::new(0.0, 0.0); nk];
            for m0 in 0..k_shape[0] {
                for m1 in 0..k_shape[1] {
                    let sh0 = (m0 * half) % n[0];
                    let sh1 = (m1 * half) % n[1];
                    let plus = [(q[0] + sh0) % n[0], (q[1] + sh1) % n[1]];
                    let minus = [(q[0] + n[0] - sh0) % n[0], (q[1] + n[1] - sh1) % n[1]];
                    // Conjugation order matches the transform kernel
                    // ψ*(q+εξ/2) ψ(q-εξ/2); with the opposite order the
                    // series lands at -k.
                    corr[m0 * k_shape[1] + m1] = samples[plus[0] * n[1] + plus[1]].conj()
                        * samples[minus[0] * n[1] + minus[1]];
                }
            }
            fft2_inverse(&mut corr, k_shape[0], k_shape[1]);
            let scale = inv_bz * nk as f64;
            let mut out = vec![0.0; nk];
            let mut residue = 0.0f64;
            for (o, c) in out.iter_mut().zip(corr.iter()) {
                *o = c.re * scale;
                residue = residue.max(c.im.abs() * scale);
            }
            (out, residue)
        })
        .collect();

    let max_val = rows
        .iter()
        .flat_map(|(r, _)| r.iter().map(|v| v.abs()))
        .fold(0.0f64, f64::max);
    let max_res = rows.iter().map(|(_, r)| *r).fold(0.0f64, f64::max);
    if max_res > IMAG_RESIDUE_TOL * max_val.max(1e-300) {
        return Err(Error::Aliasing(format!(
            "series imaginary residue {max_res:.3e} vs peak {max_val:.3e}"
        )));
    }
    let mut values = Vec::with_capacity(nq * nk);
    for (row, _) in rows {
        values.extend_from_slice(&row);
    }
    Ok(ReducedWigner { bx, k_shape, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Lattice;
    use crate::wavefield::SimBox;

    fn gaussian_field(epsilon: f64, cells: usize, k0: f64) -> WaveField {
        let lat = Lattice::line(2.0 * std::f64::consts::PI).unwrap();
        let bx = SimBox::new(lat, epsilon, [cells, 1], 16).unwrap();
        let n = bx.n_points()[0];
        let center = 0.5 * bx.volume();
        let width = 1.0;
        let mut samples = Vec::with_capacity(n);
        for i in 0..n {
            let x = bx.position(i, 0).x;
            let g = (-((x - center) * (x - center)) / (2.0 * width * width)).exp();
            samples.push(Complex64::from_polar(g, k0 * x / epsilon));
        }
        let mut psi = WaveField::new(bx, samples).unwrap();
        psi.normalize();
        psi
    }

    #[test]
    fn marginals_and_total_mass_are_exact() {
        let psi = gaussian_field(0.25, 8, 0.2);
        let w = wigner_transform(&psi).unwrap();
        let m = w.marginals();
        assert!((m.total_mass - 1.0).abs() < 1e-10, "mass {}", m.total_mass);
        // Position marginal equals |ψ(q)|².
        let n = psi.simbox().n_points()[0];
        for i in 0..n {
            let want = psi.samples()[i].norm_sqr();
            assert!((m.position[i] - want).abs() < 1e-10);
        }
    }

    #[test]
    fn momentum_marginal_peaks_at_carrier() {
        let k0 = 0.25;
        let psi = gaussian_field(0.25, 8, k0);
        let w = wigner_transform(&psi).unwrap();
        let m = w.marginals();
        let imax = (0..m.momentum.len())
            .max_by(|&a, &b| m.momentum[a].partial_cmp(&m.momentum[b]).unwrap())
            .unwrap();
        let p_peak = w.p_value([imax, 0]);
        assert!(
            (p_peak.x - k0).abs() < 0.05,
            "momentum marginal peaks at {} want {k0}",
            p_peak.x
        );
    }

    #[test]
    fn plane_wave_modulation_shifts_momentum() {
        let psi0 = gaussian_field(0.25, 8, 0.0);
        let psi1 = gaussian_field(0.25, 8, 0.25);
        let w0 = wigner_transform(&psi0).unwrap();
        let w1 = wigner_transform(&psi1).unwrap();
        // Shift by 0.25 = 4 p-grid steps at cells=8 (Δp = 1/16).
        let n = psi0.simbox().n_points();
        let shift = 4;
        let mut worst = 0.0f64;
        for q in 0..n[0] {
            for p in 0..n[0] {
                let a = w0.value([q, 0], [p, 0]);
                let b = w1.value([q, 0], [(p + shift) % n[0], 0]);
                worst = worst.max((a - b).abs());
            }
        }
        assert!(worst < 1e-9, "modulation shift mismatch {worst}");
    }

    #[test]
    fn fold_equals_series_pointwise() {
        let psi = gaussian_field(0.25, 8, 0.2);
        let w = wigner_transform(&psi).unwrap();
        let folded = fold_wigner(&w);
        let series = wigner_series(&psi).unwrap();
        assert_eq!(folded.k_shape(), series.k_shape());
        let mut worst = 0.0f64;
        for (a, b) in folded.values().iter().zip(series.values().iter()) {
            worst = worst.max((a - b).abs());
        }
        assert!(worst < 1e-10, "fold vs series {worst}");
    }

    #[test]
    fn odd_cell_count_rejected_by_series() {
        let psi = gaussian_field(0.25, 7, 0.0);
        assert!(matches!(wigner_series(&psi), Err(Error::GridAlignment(_))));
    }

    #[test]
    fn gaussian_closed_form() {
        // ψ = (πε)^{-1/4} e^{-x²/2ε} has w(q,p) = (πε)^{-1} e^{-(q²+p²)/ε}.
        let eps = 0.25;
        let lat = Lattice::line(2.0 * std::f64::consts::PI).unwrap();
        let bx = SimBox::new(lat, eps, [8, 1], 16).unwrap();
        let n = bx.n_points()[0];
        let center = 0.5 * bx.volume();
        let mut samples = Vec::with_capacity(n);
        for i in 0..n {
            let x = bx.position(i, 0).x - center;
            samples.push(Complex64::new(
                (std::f64::consts::PI * eps).powf(-0.25) * (-x * x / (2.0 * eps)).exp(),
                0.0,
            ));
        }
        let psi = WaveField::new(bx, samples).unwrap();
        let w = wigner_transform(&psi).unwrap();
        // The packet's periodic image adds a cross term centred half a box
        // away; compare against the closed form only on the near half.
        let mut worst = 0.0f64;
        for qi in 0..n {
            let q = psi.simbox().position(qi, 0).x - center;
            if q.abs() > 0.25 * psi.simbox().volume() {
                continue;
            }
            for pi in 0..n {
                let p = w.p_value([pi, 0]).x;
                let want = (-(q * q + p * p) / eps).exp() / (std::f64::consts::PI * eps);
                worst = worst.max((w.value([qi, 0], [pi, 0]) - want).abs());
            }
        }
        assert!(worst < 1e-8, "gaussian wigner deviates by {worst}");
    }

    #[test]
    fn l2_identity() {
        let eps = 0.25;
        let psi = gaussian_field(eps, 8, 0.2);
        let w = wigner_transform(&psi).unwrap();
        // Continuum identity `‖w‖ = ε^{-d/2} (2π)^{-d/2} ‖ψ‖²`, evaluated
        // away from the periodic image.
        let n = psi.simbox().n_points()[0];
        let dv = w.dp_volume() * w.dq_volume();
        let mut sum = 0.0;
        for qi in 0..n {
            let q = psi.simbox().position(qi, 0).x - 0.5 * psi.simbox().volume();
            if q.abs() > 0.25 * psi.simbox().volume() {
                continue;
            }
            for pi in 0..n {
                sum += w.value([qi, 0], [pi, 0]).powi(2) * dv;
            }
        }
        let got = sum.sqrt();
        let want =
            eps.powf(-0.5) * (2.0 * std::f64::consts::PI).powf(-0.5) * psi.norm_squared();
        assert!(
            ((got - want) / want).abs() < 1e-4,
            "L2 identity: got {got}, want {want}"
        );
        // On the periodic box the image cross term carries equal mass, so
        // the full-grid norm satisfies the exact doubled identity.
        let full = w.l2_norm();
        let want_full = 2.0f64.powf(0.5) * want;
        assert!(
            ((full - want_full) / want_full).abs() < 1e-10,
            "periodized L2: got {full}, want {want_full}"
        );
    }
}
