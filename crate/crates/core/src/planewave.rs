//! Plane-wave discretization of the periodicity cell.
//!
//! Fiber Hamiltonians act on coefficient vectors indexed by dual-lattice
//! vectors `G`. Two layouts are used: an isotropic shell cutoff `|G| <= G_max`
//! for band-structure and geometry work, and the rectangular mode set of an
//! FFT grid for box-commensurate transforms.

use std::collections::HashMap;

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::lattice::Lattice;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    /// All `G` with `|G| <= cutoff`; closed under negation and contains 0.
    Shell,
    /// Signed FFT mode range per dimension; the Nyquist row has no negative
    /// partner, so this layout is only used by grid-commensurate transforms.
    FftGrid,
}

#[derive(Debug, Clone)]
pub struct PlaneWaveBasis {
    lattice: Lattice,
    kind: BasisKind,
    indices: Vec<[i64; 2]>,
    vectors: Vec<Vector2<f64>>,
    lookup: HashMap<[i64; 2], usize>,
    cutoff: f64,
}

impl PlaneWaveBasis {
    /// Shell cutoff basis: every dual-lattice vector with `|G| <= cutoff`,
    /// ordered by `(|G|^2, m_0, m_1)`.
    pub fn shell(lattice: Lattice, cutoff: f64) -> Result<Self> {
        if !(cutoff > 0.0) {
            return Err(Error::Config("plane-wave cutoff must be positive".into()));
        }
        // |m_j| = |γ_j · G| / 2π <= |γ_j| cutoff / 2π bounds the index search box.
        let two_pi = 2.0 * std::f64::consts::PI;
        let m_max = |j: usize| (lattice.basis(j).norm() * cutoff / two_pi).ceil() as i64 + 1;
        let (m0, m1) = (m_max(0), if lattice.dim() == 2 { m_max(1) } else { 0 });

        let mut entries: Vec<([i64; 2], Vector2<f64>, f64)> = Vec::new();
        for i0 in -m0..=m0 {
            for i1 in -m1..=m1 {
                let m = [i0, i1];
                let g = lattice.dual_point(m);
                let n2 = g.norm_squared();
                if n2 <= cutoff * cutoff * (1.0 + 1e-12) {
                    entries.push((m, g, n2));
                }
            }
        }
        entries.sort_by(|a, b| {
            a.2.partial_cmp(&b.2)
                .unwrap()
                .then(a.0[0].cmp(&b.0[0]))
                .then(a.0[1].cmp(&b.0[1]))
        });

        let mut basis = PlaneWaveBasis {
            lattice,
            kind: BasisKind::Shell,
            indices: Vec::with_capacity(entries.len()),
            vectors: Vec::with_capacity(entries.len()),
            lookup: HashMap::new(),
            cutoff,
        };
        for (i, (m, g, _)) in entries.into_iter().enumerate() {
            basis.indices.push(m);
            basis.vectors.push(g);
            basis.lookup.insert(m, i);
        }
        basis.check_shell_invariants()?;
        Ok(basis)
    }

    /// Shell basis sized for `n_bands` bands plus `extra_shells` shells of
    /// margin beyond the shell that completes the band count.
    pub fn for_bands(lattice: Lattice, n_bands: usize, extra_shells: usize) -> Result<Self> {
        assert!(n_bands >= 1);
        let min_dual = (0..lattice.dim())
            .map(|j| lattice.dual(j).norm())
            .fold(f64::INFINITY, f64::min);
        // Grow the enumeration radius until the shell structure stabilizes.
        let mut radius = min_dual * (n_bands + extra_shells + 1) as f64;
        loop {
            let trial = Self::shell(lattice.clone(), radius)?;
            let mut shells: Vec<f64> = Vec::new();
            for g in &trial.vectors {
                let r = g.norm();
                match shells.last() {
                    Some(&last) if (r - last).abs() <= 1e-9 * min_dual => {}
                    _ => shells.push(r),
                }
            }
            // Radius of the shell that brings the point count to n_bands.
            let mut count = 0usize;
            let mut complete_at = None;
            let mut idx = 0usize;
            for (si, &sr) in shells.iter().enumerate() {
                while idx < trial.vectors.len()
                    && (trial.vectors[idx].norm() - sr).abs() <= 1e-9 * min_dual
                {
                    count += 1;
                    idx += 1;
                }
                if count >= n_bands {
                    complete_at = Some(si);
                    break;
                }
            }
            if let Some(si) = complete_at {
                if si + extra_shells < shells.len() {
                    let target = shells[si + extra_shells] + 1e-9 * min_dual;
                    return Self::shell(lattice, target);
                }
            }
            radius *= 1.6;
        }
    }

    /// FFT-grid basis with `per_dim[j]` signed modes `m_j` in
    /// `[-n/2, n/2)`; row-major over `(m_0, m_1)` in ascending order.
    pub fn fft_grid(lattice: Lattice, per_dim: [usize; 2]) -> Result<Self> {
        let dim = lattice.dim();
        let n0 = per_dim[0];
        let n1 = if dim == 2 { per_dim[1] } else { 1 };
        if n0 == 0 || n1 == 0 {
            return Err(Error::Config("fft basis needs at least one mode per dimension".into()));
        }
        let lo0 = -((n0 / 2) as i64);
        let lo1 = -((n1 / 2) as i64);
        let mut basis = PlaneWaveBasis {
            lattice,
            kind: BasisKind::FftGrid,
            indices: Vec::with_capacity(n0 * n1),
            vectors: Vec::with_capacity(n0 * n1),
            lookup: HashMap::new(),
            cutoff: f64::INFINITY,
        };
        for a in 0..n0 as i64 {
            for b in 0..n1 as i64 {
                let m = [lo0 + a, lo1 + b];
                let g = basis.lattice.dual_point(m);
                let i = basis.indices.len();
                basis.indices.push(m);
                basis.vectors.push(g);
                basis.lookup.insert(m, i);
            }
        }
        basis.cutoff = basis.vectors.iter().map(|g| g.norm()).fold(0.0, f64::max);
        Ok(basis)
    }

    fn check_shell_invariants(&self) -> Result<()> {
        if !self.lookup.contains_key(&[0, 0]) {
            return Err(Error::Config("plane-wave basis does not contain G = 0".into()));
        }
        for m in &self.indices {
            if !self.lookup.contains_key(&[-m[0], -m[1]]) {
                return Err(Error::Config(format!(
                    "plane-wave basis not closed under negation at {m:?}"
                )));
            }
        }
        Ok(())
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn index(&self, i: usize) -> [i64; 2] {
        self.indices[i]
    }

    pub fn indices(&self) -> &[[i64; 2]] {
        &self.indices
    }

    pub fn vector(&self, i: usize) -> Vector2<f64> {
        self.vectors[i]
    }

    pub fn position_of(&self, m: [i64; 2]) -> Option<usize> {
        self.lookup.get(&m).copied()
    }
}
