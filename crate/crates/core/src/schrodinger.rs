//! Split-step spectral integration of the scaled Schrödinger equation
//! `iε ∂_t ψ = (½(-iε∇ - A)² + V(x/ε) + φ(x)) ψ` on the periodic box.
//!
//! The standard mode takes `A = 0`: one Strang step is a half potential
//! step (diagonal on the grid), a full kinetic step (diagonal in Fourier
//! space with phase `e^{-i ε|ξ|² dt/2}`), and another half potential step.
//! An optional uniform-field mode takes `A = (0, B x₁)`, splitting the
//! kinetic factor axiswise: `½(εξ₂ - B x₁)²` is diagonal after a Fourier
//! transform along the second axis only. General vector potentials make
//! neither factor diagonal and are out of scope.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fftutil::freq_index;
use crate::fields::ExternalFields;
use crate::potential::FourierPotential;
use crate::wavefield::WaveField;
use rustfft::FftPlanner;

/// Stability factor: `dt ≤ C_STAB · ε`.
pub const C_STAB: f64 = 0.1;
/// Norm drift allowed over a run.
pub const NORM_DRIFT_TOL: f64 = 1e-8;
/// Probability mass allowed inside the boundary margin.
pub const BOUNDARY_MASS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleMode {
    /// `A = 0`.
    Standard,
    /// `A = (0, B x₁)` with uniform `B`; qualitative cross-checks only.
    LandauB { b: f64 },
}

#[derive(Debug, Clone)]
pub struct OracleSpec {
    pub potential: FourierPotential,
    pub fields: ExternalFields,
    pub mode: OracleMode,
    pub epsilon: f64,
    pub dt_micro: f64,
    /// Macroscopic width of the watch region at the far side of the box;
    /// zero disables the boundary monitor.
    pub boundary_margin: f64,
    /// Steps between norm/boundary checks.
    pub check_every: usize,
}

impl OracleSpec {
    pub fn new(
        potential: FourierPotential,
        fields: ExternalFields,
        epsilon: f64,
        dt_micro: f64,
    ) -> Result<Self> {
        if !(epsilon > 0.0 && dt_micro > 0.0) {
            return Err(Error::Config("epsilon and dt must be positive".into()));
        }
        if dt_micro > C_STAB * epsilon * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "dt = {dt_micro} exceeds the stability budget {C_STAB} * epsilon"
            )));
        }
        if !fields.is_a_zero() {
            return Err(Error::Config(
                "standard oracle mode requires A = 0; use OracleMode::LandauB".into(),
            ));
        }
        Ok(OracleSpec {
            potential,
            fields,
            mode: OracleMode::Standard,
            epsilon,
            dt_micro,
            boundary_margin: 0.0,
            check_every: 64,
        })
    }

    pub fn with_landau_b(mut self, b: f64) -> Self {
        self.mode = OracleMode::LandauB { b };
        self
    }

    pub fn with_boundary_margin(mut self, margin: f64) -> Self {
        self.boundary_margin = margin;
        self
    }
}

struct Stepper {
    n: [usize; 2],
    half_potential: Vec<Complex64>,
    /// Standard mode: full kinetic phase per mode.
    kinetic: Vec<Complex64>,
    /// Landau mode: half phase for T1 (axis-0 Fourier), and the full T2
    /// phase per (x1 row, axis-1 mode).
    landau: Option<(Vec<Complex64>, Vec<Complex64>)>,
}

fn build_stepper(psi: &WaveField, spec: &OracleSpec, dt: f64) -> Stepper {
    let bx = psi.simbox();
    let n = bx.n_points();
    let eps = spec.epsilon;

    let mut half_potential = Vec::with_capacity(bx.total_points());
    for i0 in 0..n[0] {
        for i1 in 0..n[1] {
            let w = spec.potential.eval(bx.micro_position(i0, i1))
                + spec.fields.phi(bx.position(i0, i1));
            half_potential.push(Complex64::new(0.0, -w * dt / (2.0 * eps)).exp());
        }
    }

    match spec.mode {
        OracleMode::Standard => {
            let mut kinetic = Vec::with_capacity(bx.total_points());
            for l0 in 0..n[0] {
                for l1 in 0..n[1] {
                    let xi = bx.frequency(l0, l1);
                    kinetic
                        .push(Complex64::new(0.0, -eps * xi.norm_squared() * dt / 2.0).exp());
                }
            }
            Stepper { n, half_potential, kinetic, landau: None }
        }
        OracleMode::LandauB { b } => {
            let mut t1_half = Vec::with_capacity(n[0]);
            for l0 in 0..n[0] {
                let xi0 = bx.frequency(l0, 0).x;
                t1_half.push(Complex64::new(0.0, -eps * xi0 * xi0 * dt / 4.0).exp());
            }
            let mut t2 = Vec::with_capacity(bx.total_points());
            for i0 in 0..n[0] {
                let x1 = bx.position(i0, 0).x;
                for l1 in 0..n[1] {
                    let xi1 = bx.frequency(0, l1).y;
                    let v = eps * xi1 - b * x1;
                    t2.push(Complex64::new(0.0, -v * v * dt / (2.0 * eps)).exp());
                }
            }
            Stepper { n, half_potential, kinetic: Vec::new(), landau: Some((t1_half, t2)) }
        }
    }
}

impl Stepper {
    fn strang_step(&self, data: &mut [Complex64], planner: &mut FftPlanner<f64>) {
        for (d, p) in data.iter_mut().zip(self.half_potential.iter()) {
            *d *= p;
        }
        match &self.landau {
            None => {
                crate::fftutil::fft2_forward(data, self.n[0], self.n[1]);
                for (d, k) in data.iter_mut().zip(self.kinetic.iter()) {
                    *d *= k;
                }
                crate::fftutil::fft2_inverse(data, self.n[0], self.n[1]);
            }
            Some((t1_half, t2)) => {
                self.axis0_phase(data, t1_half, planner);
                // T2: transform along axis 1 only, apply the row-dependent
                // phase, transform back.
                let row = planner.plan_fft_forward(self.n[1]);
                let row_inv = planner.plan_fft_inverse(self.n[1]);
                for i0 in 0..self.n[0] {
                    let slice = &mut data[i0 * self.n[1]..(i0 + 1) * self.n[1]];
                    row.process(slice);
                    for (l1, d) in slice.iter_mut().enumerate() {
                        *d *= t2[i0 * self.n[1] + l1];
                    }
                    row_inv.process(slice);
                    let s = 1.0 / self.n[1] as f64;
                    for d in slice.iter_mut() {
                        *d *= s;
                    }
                }
                self.axis0_phase(data, t1_half, planner);
            }
        }
        for (d, p) in data.iter_mut().zip(self.half_potential.iter()) {
            *d *= p;
        }
    }

    fn axis0_phase(&self, data: &mut [Complex64], phase: &[Complex64], planner: &mut FftPlanner<f64>) {
        let col = planner.plan_fft_forward(self.n[0]);
        let col_inv = planner.plan_fft_inverse(self.n[0]);
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.n[0]];
        for j in 0..self.n[1] {
            for i in 0..self.n[0] {
                scratch[i] = data[i * self.n[1] + j];
            }
            col.process(&mut scratch);
            for (i, s) in scratch.iter_mut().enumerate() {
                *s *= phase[i];
            }
            col_inv.process(&mut scratch);
            let s = 1.0 / self.n[0] as f64;
            for (i, v) in scratch.iter().enumerate() {
                data[i * self.n[1] + j] = v * s;
            }
        }
    }
}

/// Probability mass inside the watch region on the far side of the box
/// from the packet's initial centre.
fn boundary_mass(psi: &WaveField, center_idx: [usize; 2], margin: f64) -> f64 {
    let bx = psi.simbox();
    let n = bx.n_points();
    let dv = bx.volume_element();
    let mut mass = 0.0;
    for i0 in 0..n[0] {
        for i1 in 0..n[1] {
            // Torus distance from the antipode of the centre, per axis.
            let mut near_edge = false;
            let d0 = axis_distance(i0, center_idx[0], n[0]);
            let len0 = bx.epsilon() * bx.lattice().basis(0).norm() / bx.points_per_cell() as f64;
            if (n[0] as f64 / 2.0 - d0) * len0 < margin {
                near_edge = true;
            }
            if bx.dim() == 2 {
                let d1 = axis_distance(i1, center_idx[1], n[1]);
                let len1 =
                    bx.epsilon() * bx.lattice().basis(1).norm() / bx.points_per_cell() as f64;
                if (n[1] as f64 / 2.0 - d1) * len1 < margin {
                    near_edge = true;
                }
            }
            if near_edge {
                mass += psi.samples()[i0 * n[1] + i1].norm_sqr() * dv;
            }
        }
    }
    mass
}

fn axis_distance(i: usize, c: usize, n: usize) -> f64 {
    let d = (i as i64 - c as i64).rem_euclid(n as i64) as f64;
    d.min(n as f64 - d)
}

fn center_index(psi: &WaveField) -> [usize; 2] {
    let n = psi.simbox().n_points();
    let mut best = 0usize;
    let mut best_v = -1.0;
    for (i, c) in psi.samples().iter().enumerate() {
        let v = c.norm_sqr();
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    [best / n[1], best % n[1]]
}

/// Propagate `psi0` to macroscopic time `t_final` (steps of uniform size
/// `≈ dt_micro`, chosen so the horizon is hit exactly).
pub fn evolve(psi0: &WaveField, t_final: f64, spec: &OracleSpec) -> Result<WaveField> {
    if t_final == 0.0 {
        return Ok(psi0.clone());
    }
    if t_final < 0.0 {
        return Err(Error::Config("oracle propagation runs forward in time".into()));
    }
    let n_steps = (t_final / spec.dt_micro).ceil().max(1.0) as usize;
    let dt = t_final / n_steps as f64;
    let stepper = build_stepper(psi0, spec, dt);
    let mut planner = FftPlanner::new();

    let norm0 = psi0.norm_squared();
    let center = center_index(psi0);
    let mut psi = psi0.clone();
    for step in 0..n_steps {
        stepper.strang_step(psi.samples_mut(), &mut planner);
        let last = step + 1 == n_steps;
        if last || (step + 1) % spec.check_every == 0 {
            let drift = (psi.norm_squared() - norm0).abs() / norm0.max(1e-300);
            if drift > NORM_DRIFT_TOL {
                return Err(Error::Instability { drift });
            }
            if spec.boundary_margin > 0.0 {
                let mass = boundary_mass(&psi, center, spec.boundary_margin);
                if mass > BOUNDARY_MASS_TOL * norm0 {
                    return Err(Error::BoundaryContact { mass });
                }
            }
        }
    }
    Ok(psi)
}

/// `<ψ, H ψ>` with the kinetic part evaluated spectrally and the
/// potentials by grid quadrature.
pub fn energy_expectation(psi: &WaveField, spec: &OracleSpec) -> f64 {
    let bx = psi.simbox();
    let n = bx.n_points();
    let eps = spec.epsilon;
    let mut hat: Vec<Complex64> = psi.samples().to_vec();
    crate::fftutil::fft2_forward(&mut hat, n[0], n[1]);
    let norm = 1.0 / bx.total_points() as f64;

    // With an unscaled forward transform, <ψ, T ψ> = (ΔV/N) Σ_l T_l |hat_l|².
    let spectral_weight = bx.volume_element() * norm;
    let mut kinetic = 0.0;
    match spec.mode {
        OracleMode::Standard => {
            for l0 in 0..n[0] {
                for l1 in 0..n[1] {
                    let xi = bx.frequency(l0, l1);
                    kinetic += 0.5
                        * (eps * eps * xi.norm_squared())
                        * hat[l0 * n[1] + l1].norm_sqr();
                }
            }
            kinetic *= spectral_weight;
        }
        OracleMode::LandauB { b } => {
            // T1 spectrally over axis 0.
            for l0 in 0..n[0] {
                for l1 in 0..n[1] {
                    let xi0 = bx.frequency(l0, 0).x;
                    kinetic += 0.5 * (eps * eps * xi0 * xi0) * hat[l0 * n[1] + l1].norm_sqr();
                }
            }
            kinetic *= spectral_weight;
            // T2: transform along axis 1 only.
            let mut planner = FftPlanner::new();
            let row = planner.plan_fft_forward(n[1]);
            let mut data: Vec<Complex64> = psi.samples().to_vec();
            let mut t2 = 0.0;
            for i0 in 0..n[0] {
                let x1 = bx.position(i0, 0).x;
                let slice = &mut data[i0 * n[1]..(i0 + 1) * n[1]];
                row.process(slice);
                for (l1, d) in slice.iter().enumerate() {
                    let xi1 = bx.frequency(0, l1).y;
                    let v = eps * xi1 - b * x1;
                    t2 += 0.5 * v * v * d.norm_sqr();
                }
            }
            kinetic += t2 * bx.volume_element() / n[1] as f64;
        }
    }

    let mut pot = 0.0;
    for i0 in 0..n[0] {
        for i1 in 0..n[1] {
            let w = spec.potential.eval(bx.micro_position(i0, i1))
                + spec.fields.phi(bx.position(i0, i1));
            pot += w * psi.samples()[i0 * n[1] + i1].norm_sqr();
        }
    }
    pot *= bx.volume_element();
    kinetic + pot
}
