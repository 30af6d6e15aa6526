//! Lattice-periodic phase-space observables and their quantization.
//!
//! An observable is a finite Fourier sum in momentum,
//! `a(q,p) = Σ_γ c_γ f_γ(q) e^{iγ·p}`, which is periodic in `p` over the
//! dual lattice by construction. Its Weyl quantization is then exactly a
//! finite sum of midpoint-weighted shifts,
//! `(â ψ)(x) = Σ_γ c_γ f_γ(x + εγ/2) ψ(x + εγ)`,
//! which on the box grid is index arithmetic. Expectation values are
//! cross-checked against the reduced-Wigner pairing, which must agree to
//! rounding by the discrete duality identity.

use nalgebra::Vector2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::lattice::Lattice;
use crate::wavefield::WaveField;
use crate::wigner::{wigner_series, ReducedWigner};

/// Disagreement between the shift route and the Wigner route above which
/// the pairing is rejected as aliased.
pub const PAIRING_GUARD: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct ObservableTerm {
    /// Integer coordinates of `γ` in the direct basis.
    pub gamma_index: [i64; 2],
    pub coeff: Complex64,
    /// Real position profile `f_γ(q)`; `None` means the constant 1.
    pub profile: Option<ScalarField>,
}

/// `a(q,p) = Σ_γ c_γ f_γ(q) e^{iγ·p}` with the reality pairing
/// `(γ, c, f) ↔ (-γ, c*, f)` enforced at construction.
#[derive(Debug, Clone)]
pub struct PeriodicObservable {
    lattice: Lattice,
    terms: Vec<ObservableTerm>,
}

fn profile_key(p: &Option<ScalarField>) -> String {
    match p {
        None => "1".to_string(),
        Some(f) => serde_json::to_string(&f.terms).unwrap_or_default(),
    }
}

impl PeriodicObservable {
    pub fn new(lattice: Lattice, terms: Vec<ObservableTerm>) -> Result<Self> {
        for t in &terms {
            if lattice.dim() == 1 && t.gamma_index[1] != 0 {
                return Err(Error::Config(
                    "observable harmonic index has a second component on a 1d lattice".into(),
                ));
            }
            if let Some(f) = &t.profile {
                f.validate()?;
            }
            let partner = terms.iter().find(|s| {
                s.gamma_index == [-t.gamma_index[0], -t.gamma_index[1]]
                    && (s.coeff - t.coeff.conj()).norm() < 1e-12 * t.coeff.norm().max(1.0)
                    && profile_key(&s.profile) == profile_key(&t.profile)
            });
            if partner.is_none() {
                return Err(Error::Config(format!(
                    "observable is not real: no conjugate partner for harmonic {:?}",
                    t.gamma_index
                )));
            }
        }
        Ok(PeriodicObservable { lattice, terms })
    }

    /// `f(q)` as a multiplication operator (`γ = 0`); `f` must be real.
    pub fn position_function(lattice: Lattice, f: ScalarField) -> Result<Self> {
        Self::new(
            lattice,
            vec![ObservableTerm {
                gamma_index: [0, 0],
                coeff: Complex64::new(1.0, 0.0),
                profile: Some(f),
            }],
        )
    }

    /// `f(q) cos(γ·p)` for the direct-lattice harmonic `γ`.
    pub fn cos_harmonic(lattice: Lattice, m: [i64; 2], profile: Option<ScalarField>) -> Result<Self> {
        let half = Complex64::new(0.5, 0.0);
        Self::new(
            lattice,
            vec![
                ObservableTerm { gamma_index: m, coeff: half, profile: profile.clone() },
                ObservableTerm { gamma_index: [-m[0], -m[1]], coeff: half, profile },
            ],
        )
    }

    pub fn constant_one(lattice: Lattice) -> Self {
        PeriodicObservable {
            lattice,
            terms: vec![ObservableTerm {
                gamma_index: [0, 0],
                coeff: Complex64::new(1.0, 0.0),
                profile: None,
            }],
        }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn terms(&self) -> &[ObservableTerm] {
        &self.terms
    }

    /// Pointwise value; the imaginary parts cancel by the reality pairing.
    pub fn value(&self, q: Vector2<f64>, p: Vector2<f64>) -> f64 {
        let mut sum = Complex64::new(0.0, 0.0);
        for t in &self.terms {
            let gamma = self.lattice.point(t.gamma_index);
            let f = t.profile.as_ref().map_or(1.0, |f| f.value(q));
            sum += t.coeff * f * Complex64::new(0.0, gamma.dot(&p)).exp();
        }
        sum.re
    }

    /// Apply the Weyl quantization to box samples by midpoint-weighted
    /// shifts. Shift distances `εγ` are whole multiples of the cell and
    /// land exactly on grid nodes; positions wrap with the periodic box.
    pub fn apply(&self, psi: &WaveField) -> Result<WaveField> {
        let bx = psi.simbox();
        let n = bx.n_points();
        let ppc = bx.points_per_cell() as i64;
        let mut out = vec![Complex64::new(0.0, 0.0); bx.total_points()];
        for t in &self.terms {
            let sh = [t.gamma_index[0] * ppc, t.gamma_index[1] * ppc];
            let half = [sh[0] / 2, sh[1] / 2];
            for i0 in 0..n[0] {
                for i1 in 0..n[1] {
                    let full0 = (i0 as i64 + sh[0]).rem_euclid(n[0] as i64) as usize;
                    let full1 = (i1 as i64 + sh[1]).rem_euclid(n[1] as i64) as usize;
                    let mid0 = (i0 as i64 + half[0]).rem_euclid(n[0] as i64) as usize;
                    let mid1 = (i1 as i64 + half[1]).rem_euclid(n[1] as i64) as usize;
                    let f = t
                        .profile
                        .as_ref()
                        .map_or(1.0, |f| f.value(bx.position(mid0, mid1)));
                    out[i0 * n[1] + i1] +=
                        t.coeff * f * psi.samples()[full0 * n[1] + full1];
                }
            }
        }
        WaveField::new(bx.clone(), out)
    }

    /// `<ψ, â ψ>` by the shift route (returned), cross-checked against the
    /// reduced-Wigner pairing `Σ a w_red dq dk`.
    pub fn pair(&self, psi: &WaveField) -> Result<f64> {
        let red = wigner_series(psi)?;
        self.pair_with_reduced(psi, &red)
    }

    /// Same as [`PeriodicObservable::pair`] with a precomputed reduced
    /// Wigner function of `psi`.
    pub fn pair_with_reduced(&self, psi: &WaveField, red: &ReducedWigner) -> Result<f64> {
        let applied = self.apply(psi)?;
        let direct = psi.inner(&applied);
        let scale = direct.norm().max(1.0);
        if direct.im.abs() > 1e-10 * scale {
            return Err(Error::Aliasing(format!(
                "expectation has imaginary residue {:.3e}",
                direct.im
            )));
        }
        let via_wigner = red.pair_with(|q, k| self.value(q, k));
        let diff = (direct.re - via_wigner).abs();
        if diff > PAIRING_GUARD * scale {
            return Err(Error::Aliasing(format!(
                "pairing cross-check failed: shift route {:.12e} vs Wigner route {:.12e}",
                direct.re, via_wigner
            )));
        }
        Ok(direct.re)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::ScalarPrimitive;
    use crate::wavefield::SimBox;

    fn packet(eps: f64, cells: usize, k0: f64) -> WaveField {
        let lat = Lattice::line(2.0 * std::f64::consts::PI).unwrap();
        let bx = SimBox::new(lat, eps, [cells, 1], 16).unwrap();
        let n = bx.n_points()[0];
        let center = 0.5 * bx.volume();
        let mut s = Vec::with_capacity(n);
        for i in 0..n {
            let x = bx.position(i, 0).x;
            let g = (-(x - center) * (x - center) / 2.0).exp();
            s.push(Complex64::from_polar(g, k0 * x / eps));
        }
        let mut psi = WaveField::new(bx, s).unwrap();
        psi.normalize();
        psi
    }

    fn line() -> Lattice {
        Lattice::line(2.0 * std::f64::consts::PI).unwrap()
    }

    #[test]
    fn reality_pairing_enforced() {
        let r = PeriodicObservable::new(
            line(),
            vec![ObservableTerm {
                gamma_index: [1, 0],
                coeff: Complex64::new(0.5, 0.0),
                profile: None,
            }],
        );
        assert!(r.is_err(), "missing conjugate partner must be rejected");
    }

    #[test]
    fn identity_observable_gives_norm() {
        let psi = packet(0.25, 8, 0.2);
        let a = PeriodicObservable::constant_one(line());
        let got = a.pair(&psi).unwrap();
        assert!((got - psi.norm_squared()).abs() < 1e-10);
    }

    #[test]
    fn position_function_is_weighted_density() {
        let psi = packet(0.25, 8, 0.2);
        let f = ScalarField {
            terms: vec![ScalarPrimitive::Trig {
                amplitude: 0.7,
                wavevector: [0.5, 0.0],
                phase: 0.3,
            }],
        };
        let a = PeriodicObservable::position_function(line(), f.clone()).unwrap();
        let got = a.pair(&psi).unwrap();
        let bx = psi.simbox();
        let n = bx.n_points()[0];
        let mut want = 0.0;
        for i in 0..n {
            want += f.value(bx.position(i, 0)) * psi.samples()[i].norm_sqr();
        }
        want *= bx.volume_element();
        assert!((got - want).abs() < 1e-10, "got {got} want {want}");
    }

    #[test]
    fn cos_harmonic_matches_dense_operator_oracle() {
        // Tiny 64-point grid: build the dense midpoint-shift matrix from
        // the quantization rule and compare expectations.
        let psi = packet(0.25, 4, 0.3);
        let bx = psi.simbox();
        let n = bx.n_points()[0];
        assert_eq!(n, 64);
        let a = PeriodicObservable::cos_harmonic(line(), [1, 0], None).unwrap();

        let ppc = bx.points_per_cell() as i64;
        let mut dense = vec![Complex64::new(0.0, 0.0); n * n];
        for t in a.terms() {
            let sh = t.gamma_index[0] * ppc;
            for x in 0..n as i64 {
                let y = (x + sh).rem_euclid(n as i64) as usize;
                dense[(x as usize) * n + y] += t.coeff;
            }
        }
        let mut applied = vec![Complex64::new(0.0, 0.0); n];
        for x in 0..n {
            for y in 0..n {
                applied[x] += dense[x * n + y] * psi.samples()[y];
            }
        }
        let dv = bx.volume_element();
        let want: Complex64 = psi
            .samples()
            .iter()
            .zip(applied.iter())
            .map(|(p, a)| p.conj() * a)
            .sum::<Complex64>()
            * dv;
        let got = a.pair(&psi).unwrap();
        assert!((got - want.re).abs() < 1e-12, "got {got} want {}", want.re);
    }

    #[test]
    fn pairing_routes_agree_to_rounding() {
        let psi = packet(0.125, 16, 0.25);
        let f = ScalarField {
            terms: vec![ScalarPrimitive::Trig {
                amplitude: 1.0,
                wavevector: [0.3, 0.0],
                phase: 0.0,
            }],
        };
        let a = PeriodicObservable::cos_harmonic(line(), [1, 0], Some(f)).unwrap();
        let red = wigner_series(&psi).unwrap();
        let applied = a.apply(&psi).unwrap();
        let direct = psi.inner(&applied).re;
        let via = red.pair_with(|q, k| a.value(q, k));
        assert!(
            (direct - via).abs() < 1e-6 * direct.abs().max(1.0),
            "routes differ: {direct} vs {via}"
        );
    }

    #[test]
    fn gaarding_lower_bound_for_nonnegative_observable() {
        // a = (1+cos(0.5 q))(1+cos(γ p))/4 is nonnegative; the pairing may
        // dip below zero only at order ε.
        let lat = line();
        let qprofile = ScalarField {
            terms: vec![
                ScalarPrimitive::Constant { value: 0.25 },
                ScalarPrimitive::Trig { amplitude: 0.25, wavevector: [0.5, 0.0], phase: 0.0 },
            ],
        };
        let mut pairings = Vec::new();
        for &(eps, cells) in &[(0.125, 16), (0.0625, 32)] {
            let psi = packet(eps, cells, 0.2);
            let terms = vec![
                ObservableTerm {
                    gamma_index: [0, 0],
                    coeff: Complex64::new(1.0, 0.0),
                    profile: Some(qprofile.clone()),
                },
                ObservableTerm {
                    gamma_index: [1, 0],
                    coeff: Complex64::new(0.5, 0.0),
                    profile: Some(qprofile.clone()),
                },
                ObservableTerm {
                    gamma_index: [-1, 0],
                    coeff: Complex64::new(0.5, 0.0),
                    profile: Some(qprofile.clone()),
                },
            ];
            let a = PeriodicObservable::new(lat.clone(), terms).unwrap();
            pairings.push(a.pair(&psi).unwrap());
        }
        for &p in &pairings {
            assert!(p >= -0.5, "sharp-Gaarding bound violated: {p}");
        }
    }
}
