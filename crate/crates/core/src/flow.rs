//! The semiclassical flow in kinetic coordinates and its canonical wrapper.
//!
//! The equations of motion are Hamilton's equations `Theta(z) zdot = dH(z)`
//! for the band energy corrected by the moment coupling,
//!
//! ```text
//! H(r,κ) = E(κ) + φ(r) - ε M(κ)·B(r),
//! Theta  = [ B(r)  -I  ]
//!          [  I    εΩ(κ) ],
//! ```
//!
//! with `B`, `Ω` the antisymmetric coefficient matrices of the magnetic
//! field and the band curvature. At order 0 the corrections are switched
//! off and the system reduces to `rdot = ∇E(κ)`, `κdot = -∇φ(r) + B rdot`.

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::ExternalFields;
use crate::geometry::GeometryGrid;

/// Determinant floor: below this the epsilon-corrected form is considered
/// degenerate and the model outside its validity regime.
pub const THETA_DET_FLOOR: f64 = 1e-10;
/// Residual allowed for the linear solve `Theta zdot = dH`.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-12;

/// Phase-space point in kinetic coordinates `(r, κ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePointKinetic {
    pub r: Vector2<f64>,
    pub kappa: Vector2<f64>,
}

impl PhasePointKinetic {
    pub fn new(r: Vector2<f64>, kappa: Vector2<f64>) -> Self {
        PhasePointKinetic { r, kappa }
    }
}

/// Phase-space point in canonical coordinates `(r, k)`, `k = κ + A(r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanonicalPoint {
    pub r: Vector2<f64>,
    pub k: Vector2<f64>,
}

impl CanonicalPoint {
    pub fn new(r: Vector2<f64>, k: Vector2<f64>) -> Self {
        CanonicalPoint { r, k }
    }

    pub fn to_kinetic(self, fields: &ExternalFields) -> PhasePointKinetic {
        PhasePointKinetic { r: self.r, kappa: self.k - fields.a(self.r) }
    }

    pub fn from_kinetic(z: PhasePointKinetic, fields: &ExternalFields) -> Self {
        CanonicalPoint { r: z.r, k: z.kappa + fields.a(z.r) }
    }
}

/// Source of the band data entering the flow.
#[derive(Debug, Clone)]
pub enum BandModel {
    /// Interpolated band geometry on a Brillouin-zone grid; κ is folded
    /// into the zone before every lookup.
    Grid(std::sync::Arc<GeometryGrid>),
    /// Analytic quadratic fit `E(κ) = e0 + v0·κ + ½ κ·(mass κ)` with zero
    /// curvature and moment; not lattice-periodic, valid for trajectories
    /// that stay within one zone neighbourhood.
    Quadratic { e0: f64, v0: Vector2<f64>, mass: Matrix2<f64> },
}

impl BandModel {
    pub fn free() -> Self {
        BandModel::Quadratic { e0: 0.0, v0: Vector2::zeros(), mass: Matrix2::identity() }
    }

    pub fn dim(&self) -> usize {
        match self {
            BandModel::Grid(g) => g.lattice().dim(),
            BandModel::Quadratic { .. } => 2,
        }
    }

    pub fn energy(&self, kappa: Vector2<f64>) -> f64 {
        match self {
            BandModel::Grid(g) => g.energy_at(kappa),
            BandModel::Quadratic { e0, v0, mass } => {
                e0 + v0.dot(&kappa) + 0.5 * kappa.dot(&(mass * kappa))
            }
        }
    }

    pub fn grad_energy(&self, kappa: Vector2<f64>) -> Vector2<f64> {
        match self {
            BandModel::Grid(g) => g.grad_energy_at(kappa),
            BandModel::Quadratic { v0, mass, .. } => v0 + mass * kappa,
        }
    }

    pub fn curvature(&self, kappa: Vector2<f64>) -> f64 {
        match self {
            BandModel::Grid(g) => g.curvature_at(kappa),
            BandModel::Quadratic { .. } => 0.0,
        }
    }

    pub fn moment(&self, kappa: Vector2<f64>) -> f64 {
        match self {
            BandModel::Grid(g) => g.moment_at(kappa),
            BandModel::Quadratic { .. } => 0.0,
        }
    }

    pub fn grad_moment(&self, kappa: Vector2<f64>) -> Vector2<f64> {
        match self {
            BandModel::Grid(g) => g.grad_moment_at(kappa),
            BandModel::Quadratic { .. } => Vector2::zeros(),
        }
    }
}

/// Which flow is integrated: the leading-order one or the one with the
/// first-order corrections (curvature in the symplectic form, moment
/// coupling in the energy).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowOrder {
    Zero,
    One,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    Rk4,
    ImplicitMidpoint,
}

#[derive(Debug, Clone)]
pub struct FlowSpec {
    pub epsilon: f64,
    pub order: FlowOrder,
    pub dt: f64,
    pub band: BandModel,
    pub fields: ExternalFields,
    pub integrator: Integrator,
}

impl FlowSpec {
    pub fn new(epsilon: f64, order: FlowOrder, dt: f64, band: BandModel, fields: ExternalFields) -> Self {
        FlowSpec { epsilon, order, dt, band, fields, integrator: Integrator::Rk4 }
    }

    /// Epsilon entering the correction terms (zero for the order-0 flow).
    pub fn correction_epsilon(&self) -> f64 {
        match self.order {
            FlowOrder::Zero => 0.0,
            FlowOrder::One => self.epsilon,
        }
    }

    pub fn dim(&self) -> usize {
        self.band.dim()
    }
}

/// Corrected semiclassical energy `E(κ) + φ(r) - ε M(κ)·B(r)`, with the
/// 2-form contraction `M·B = Σ_ij M_ij B_ij = 2 M_12 B_12`.
pub fn hsc_energy(z: PhasePointKinetic, spec: &FlowSpec) -> f64 {
    let eps = spec.correction_epsilon();
    let mut h = spec.band.energy(z.kappa) + spec.fields.phi(z.r);
    if eps != 0.0 && spec.dim() == 2 {
        h -= eps * 2.0 * spec.band.moment(z.kappa) * spec.fields.b12(z.r);
    }
    h
}

/// Differential of the corrected energy, `(∇_r H, ∇_κ H)`.
fn dhsc(z: PhasePointKinetic, spec: &FlowSpec) -> (Vector2<f64>, Vector2<f64>) {
    let eps = spec.correction_epsilon();
    let mut dr = spec.fields.grad_phi(z.r);
    let mut dk = spec.band.grad_energy(z.kappa);
    if eps != 0.0 && spec.dim() == 2 {
        let m = spec.band.moment(z.kappa);
        let b = spec.fields.b12(z.r);
        dr -= eps * 2.0 * m * spec.fields.grad_b12(z.r);
        dk -= eps * 2.0 * b * spec.band.grad_moment(z.kappa);
    }
    (dr, dk)
}

/// The symplectic coefficient matrix at `z` (2d x 2d, antisymmetric).
pub fn symplectic_matrix(z: PhasePointKinetic, spec: &FlowSpec) -> nalgebra::DMatrix<f64> {
    match spec.dim() {
        1 => nalgebra::DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]),
        _ => {
            let b = spec.fields.b12(z.r);
            let w = spec.correction_epsilon() * spec.band.curvature(z.kappa);
            nalgebra::DMatrix::from_row_slice(
                4,
                4,
                &[
                    0.0, b, -1.0, 0.0, //
                    -b, 0.0, 0.0, -1.0, //
                    1.0, 0.0, 0.0, w, //
                    0.0, 1.0, -w, 0.0,
                ],
            )
        }
    }
}

/// Solve `Theta zdot = dH` at `z`. Fails when the corrected form becomes
/// degenerate (epsilon too large for the band's curvature).
pub fn flow_vector_field(z: PhasePointKinetic, spec: &FlowSpec) -> Result<(Vector2<f64>, Vector2<f64>)> {
    let (dr, dk) = dhsc(z, spec);
    if spec.dim() == 1 {
        // Theta = [[0,-1],[1,0]]: rdot = dH/dκ, κdot = -dH/dr.
        return Ok((Vector2::new(dk.x, 0.0), Vector2::new(-dr.x, 0.0)));
    }
    let b = spec.fields.b12(z.r);
    let w = spec.correction_epsilon() * spec.band.curvature(z.kappa);
    let theta = Matrix4::new(
        0.0, b, -1.0, 0.0, //
        -b, 0.0, 0.0, -1.0, //
        1.0, 0.0, 0.0, w, //
        0.0, 1.0, -w, 0.0,
    );
    let det = theta.determinant();
    if det.abs() < THETA_DET_FLOOR {
        return Err(Error::SymplecticDegeneracy { det });
    }
    let rhs = Vector4::new(dr.x, dr.y, dk.x, dk.y);
    let sol = theta
        .lu()
        .solve(&rhs)
        .ok_or(Error::SymplecticDegeneracy { det })?;
    let residual = (theta * sol - rhs).norm();
    let scale = rhs.norm().max(1.0);
    if residual > SOLVE_RESIDUAL_TOL * scale {
        return Err(Error::SymplecticDegeneracy { det });
    }
    Ok((Vector2::new(sol.x, sol.y), Vector2::new(sol.z, sol.w)))
}

/// Directly coded leading-order equations of motion
/// (`rdot = ∇E`, `κdot = -∇φ + B rdot`), used as an independent reference
/// for the matrix-solve route.
pub fn leading_order_field(z: PhasePointKinetic, spec: &FlowSpec) -> (Vector2<f64>, Vector2<f64>) {
    let rdot = spec.band.grad_energy(z.kappa);
    let mut kdot = -spec.fields.grad_phi(z.r);
    if spec.dim() == 2 {
        let b = spec.fields.b12(z.r);
        kdot += Vector2::new(b * rdot.y, -b * rdot.x);
    }
    (rdot, kdot)
}

/// Time-stamped flow history in kinetic coordinates.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<PhasePointKinetic>,
    pub energies: Vec<f64>,
}

impl Trajectory {
    pub fn last(&self) -> PhasePointKinetic {
        *self.points.last().expect("trajectory is never empty")
    }

    /// Relative drift of the conserved energy over the whole trajectory.
    pub fn energy_drift(&self) -> f64 {
        let h0 = self.energies[0];
        let scale = h0.abs().max(1.0);
        self.energies
            .iter()
            .map(|h| (h - h0).abs() / scale)
            .fold(0.0, f64::max)
    }

    /// CSV rows `(t, r, κ, k, H)`; `k = κ + A(r)` is reconstructed from the
    /// fields so both coordinate systems appear in the output.
    pub fn write_csv<W: std::io::Write>(&self, fields: &ExternalFields, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,r1,r2,kappa1,kappa2,k1,k2,h_sc")?;
        for (i, &t) in self.times.iter().enumerate() {
            let z = self.points[i];
            let k = z.kappa + fields.a(z.r);
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                t, z.r.x, z.r.y, z.kappa.x, z.kappa.y, k.x, k.y, self.energies[i]
            )?;
        }
        Ok(())
    }
}

/// A trajectory that stopped early, carrying the partial result.
#[derive(Debug)]
pub struct TruncatedFlow {
    pub partial: Trajectory,
    pub error: Error,
}

impl From<TruncatedFlow> for Error {
    fn from(t: TruncatedFlow) -> Error {
        Error::TruncatedTrajectory {
            t: *t.partial.times.last().unwrap_or(&0.0),
            reason: t.error.to_string(),
        }
    }
}

fn rk4_step(
    z: PhasePointKinetic,
    dt: f64,
    spec: &FlowSpec,
) -> Result<PhasePointKinetic> {
    let f = |p: PhasePointKinetic| flow_vector_field(p, spec);
    let k1 = f(z)?;
    let k2 = f(advance(z, k1, 0.5 * dt))?;
    let k3 = f(advance(z, k2, 0.5 * dt))?;
    let k4 = f(advance(z, k3, dt))?;
    Ok(PhasePointKinetic {
        r: z.r + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        kappa: z.kappa + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    })
}

fn midpoint_step(z: PhasePointKinetic, dt: f64, spec: &FlowSpec) -> Result<PhasePointKinetic> {
    let f0 = flow_vector_field(z, spec)?;
    let mut znew = advance(z, f0, dt);
    let scale = (z.r.norm() + z.kappa.norm()).max(1.0);
    for _ in 0..64 {
        let mid = PhasePointKinetic {
            r: 0.5 * (z.r + znew.r),
            kappa: 0.5 * (z.kappa + znew.kappa),
        };
        let fm = flow_vector_field(mid, spec)?;
        let next = advance(z, fm, dt);
        let delta = (next.r - znew.r).norm() + (next.kappa - znew.kappa).norm();
        znew = next;
        if delta < 1e-14 * scale {
            return Ok(znew);
        }
    }
    Err(Error::TruncatedTrajectory {
        t: f64::NAN,
        reason: "implicit midpoint iteration did not converge".into(),
    })
}

fn advance(z: PhasePointKinetic, f: (Vector2<f64>, Vector2<f64>), dt: f64) -> PhasePointKinetic {
    PhasePointKinetic { r: z.r + dt * f.0, kappa: z.kappa + dt * f.1 }
}

/// Integrate the flow from `z0` to `t_final` (negative values reverse time).
pub fn integrate_flow(
    z0: PhasePointKinetic,
    t_final: f64,
    spec: &FlowSpec,
) -> std::result::Result<Trajectory, TruncatedFlow> {
    assert!(spec.dt > 0.0, "time step must be positive");
    let dir = if t_final < 0.0 { -1.0 } else { 1.0 };
    let total = t_final.abs();
    let n_steps = (total / spec.dt).ceil() as usize;

    let mut traj = Trajectory {
        times: Vec::with_capacity(n_steps + 1),
        points: Vec::with_capacity(n_steps + 1),
        energies: Vec::with_capacity(n_steps + 1),
    };
    let mut z = z0;
    let mut t = 0.0;
    traj.times.push(0.0);
    traj.points.push(z);
    traj.energies.push(hsc_energy(z, spec));

    for step in 0..n_steps {
        let remaining = total - t;
        let dt = dir * spec.dt.min(remaining);
        let next = match spec.integrator {
            Integrator::Rk4 => rk4_step(z, dt, spec),
            Integrator::ImplicitMidpoint => midpoint_step(z, dt, spec),
        };
        match next {
            Ok(zn) => {
                z = zn;
                t = spec.dt * (step + 1) as f64;
                traj.times.push(dir * t.min(total));
                traj.points.push(z);
                traj.energies.push(hsc_energy(z, spec));
            }
            Err(e) => return Err(TruncatedFlow { partial: traj, error: e }),
        }
    }
    Ok(traj)
}

/// Evolve a single kinetic point (endpoint only).
pub fn flow_point(
    z0: PhasePointKinetic,
    t_final: f64,
    spec: &FlowSpec,
) -> Result<PhasePointKinetic> {
    if t_final == 0.0 {
        return Ok(z0);
    }
    let traj = integrate_flow(z0, t_final, spec).map_err(Error::from)?;
    Ok(traj.last())
}

/// The canonical-coordinate flow: convert `k -> κ = k - A(r)`, integrate in
/// kinetic coordinates, convert back with `A` at the evolved position.
pub fn canonical_flow(p: CanonicalPoint, t_final: f64, spec: &FlowSpec) -> Result<CanonicalPoint> {
    let z0 = p.to_kinetic(&spec.fields);
    let z = flow_point(z0, t_final, spec)?;
    Ok(CanonicalPoint::from_kinetic(z, &spec.fields))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::ScalarField;

    fn free_spec(dt: f64) -> FlowSpec {
        FlowSpec::new(0.0, FlowOrder::Zero, dt, BandModel::free(), ExternalFields::zero())
    }

    #[test]
    fn free_motion_is_straight() {
        let spec = free_spec(1e-3);
        let z0 = PhasePointKinetic::new(Vector2::new(0.2, -0.4), Vector2::new(0.3, 0.7));
        let traj = integrate_flow(z0, 2.0, &spec).unwrap();
        let z = traj.last();
        let want = z0.r + 2.0 * z0.kappa;
        assert!((z.r - want).norm() < 1e-12);
        assert!((z.kappa - z0.kappa).norm() < 1e-14);
    }

    #[test]
    fn theta_is_antisymmetric_and_reduces_to_standard_form() {
        let mut spec = free_spec(1e-2);
        spec.epsilon = 0.3;
        spec.order = FlowOrder::One;
        let z = PhasePointKinetic::new(Vector2::new(0.1, 0.2), Vector2::new(0.3, -0.1));
        let th = symplectic_matrix(z, &spec);
        assert!((th.clone() + th.transpose()).norm() == 0.0);
        // B = 0 and Ω = 0 for the free fit: the standard block form.
        let std_form = nalgebra::DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 0.0, -1.0, 0.0, //
                0.0, 0.0, 0.0, -1.0, //
                1.0, 0.0, 0.0, 0.0, //
                0.0, 1.0, 0.0, 0.0,
            ],
        );
        assert_eq!(th, std_form);
    }

    #[test]
    fn magnetic_block_appears_at_epsilon_zero() {
        let fields = ExternalFields::windowed_uniform_b(0.8, Vector2::zeros(), 4.0, 8.0);
        let spec = FlowSpec::new(0.0, FlowOrder::Zero, 1e-2, BandModel::free(), fields);
        let z = PhasePointKinetic::new(Vector2::new(0.5, 0.5), Vector2::new(0.0, 0.0));
        let th = symplectic_matrix(z, &spec);
        assert!((th[(0, 1)] - 0.8).abs() < 1e-14);
        assert!((th[(1, 0)] + 0.8).abs() < 1e-14);
        assert_eq!(th[(2, 3)], 0.0);
    }

    #[test]
    fn vector_field_solves_hamilton_equations() {
        let fields = ExternalFields::windowed_uniform_b(0.6, Vector2::zeros(), 4.0, 8.0);
        let spec = FlowSpec::new(0.0, FlowOrder::Zero, 1e-2, BandModel::free(), fields);
        let z = PhasePointKinetic::new(Vector2::new(0.3, -0.2), Vector2::new(0.5, 0.1));
        let (rdot, kdot) = flow_vector_field(z, &spec).unwrap();
        let (dr, dk) = super::dhsc(z, &spec);
        // Energy orthogonality dH . zdot = 0.
        let orth = dr.dot(&rdot) + dk.dot(&kdot);
        assert!(orth.abs() < 1e-12, "dH . zdot = {orth}");
        // Against the directly coded leading-order field.
        let (rd, kd) = leading_order_field(z, &spec);
        assert!((rdot - rd).norm() < 1e-12);
        assert!((kdot - kd).norm() < 1e-12);
    }

    #[test]
    fn cyclotron_orbit_conserves_energy_and_radius() {
        let fields = ExternalFields::windowed_uniform_b(1.0, Vector2::zeros(), 6.0, 10.0);
        let spec = FlowSpec::new(0.0, FlowOrder::Zero, 1e-3, BandModel::free(), fields);
        let z0 = PhasePointKinetic::new(Vector2::zeros(), Vector2::new(0.7, 0.0));
        let traj = integrate_flow(z0, 10.0, &spec).unwrap();
        assert!(traj.energy_drift() < 1e-8);
        for p in &traj.points {
            assert!((p.kappa.norm() - 0.7).abs() < 1e-7);
        }
    }

    #[test]
    fn reversibility() {
        let fields = ExternalFields {
            phi: ScalarField {
                terms: vec![crate::fields::ScalarPrimitive::Trig {
                    amplitude: 0.3,
                    wavevector: [0.9, 0.4],
                    phase: 0.3,
                }],
            },
            a: [ScalarField::zero(), ScalarField::zero()],
        };
        let spec = FlowSpec::new(0.0, FlowOrder::Zero, 1e-3, BandModel::free(), fields);
        let z0 = PhasePointKinetic::new(Vector2::new(0.1, 0.2), Vector2::new(0.4, -0.3));
        let fwd = flow_point(z0, 5.0, &spec).unwrap();
        let back = flow_point(fwd, -5.0, &spec).unwrap();
        assert!((back.r - z0.r).norm() < 1e-8);
        assert!((back.kappa - z0.kappa).norm() < 1e-8);
    }

    #[test]
    fn canonical_round_trip_at_zero_time() {
        let fields = ExternalFields::windowed_uniform_b(0.5, Vector2::zeros(), 4.0, 8.0);
        let p = CanonicalPoint::new(Vector2::new(0.7, -0.3), Vector2::new(0.2, 0.9));
        let z = p.to_kinetic(&fields);
        let p2 = CanonicalPoint::from_kinetic(z, &fields);
        assert!((p.k - p2.k).norm() < 1e-14);
        assert!((p.r - p2.r).norm() < 1e-14);
    }

    #[test]
    fn canonical_flow_equals_kinetic_when_a_vanishes() {
        let spec = free_spec(1e-3);
        let p = CanonicalPoint::new(Vector2::new(0.0, 0.0), Vector2::new(0.3, 0.4));
        let out = canonical_flow(p, 1.5, &spec).unwrap();
        let kin = flow_point(PhasePointKinetic::new(p.r, p.k), 1.5, &spec).unwrap();
        assert!((out.r - kin.r).norm() < 1e-14);
        assert!((out.k - kin.kappa).norm() < 1e-14);
    }

    #[test]
    fn implicit_midpoint_matches_rk4_short_time() {
        let fields = ExternalFields::windowed_uniform_b(1.0, Vector2::zeros(), 6.0, 10.0);
        let mut spec = FlowSpec::new(0.0, FlowOrder::Zero, 1e-4, BandModel::free(), fields);
        let z0 = PhasePointKinetic::new(Vector2::zeros(), Vector2::new(0.7, 0.0));
        let a = flow_point(z0, 0.5, &spec).unwrap();
        spec.integrator = Integrator::ImplicitMidpoint;
        let b = flow_point(z0, 0.5, &spec).unwrap();
        assert!((a.r - b.r).norm() < 1e-6);
        assert!((a.kappa - b.kappa).norm() < 1e-6);
    }
}
