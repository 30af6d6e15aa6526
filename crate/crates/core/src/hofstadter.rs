//! Discrete magnetic tight-binding model on the square lattice at rational
//! flux p/q per plaquette.
//!
//! The Bloch matrix is written in the gauge that concentrates the k₁
//! hopping phase on the boundary bond, making the q×q matrix exactly
//! periodic over the magnetic Brillouin zone k₁ ∈ [0, 2π/q), k₂ ∈ [0, 2π).
//! Plain-wrap Berry links on that torus then quantize exactly.

use nalgebra::{DMatrix, Vector2};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::bloch::{diagonalize_fiber, BlochFiber};
use crate::error::{Error, Result};
use crate::geometry::{chern_number, ChernResult, FiberGrid, LinkGrid, WrapRule};
use crate::lattice::Lattice;

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

pub fn validate_flux(p: i64, q: i64) -> Result<()> {
    if q < 1 || q > 64 || gcd(p, q) != 1 {
        return Err(Error::InvalidFlux { p, q });
    }
    Ok(())
}

/// Bloch matrix of the discrete model at flux p/q and quasi-momentum
/// `k = (k1, k2)` in the magnetic Brillouin zone.
pub fn hofstadter_matrix(p: i64, q: i64, k: Vector2<f64>) -> DMatrix<Complex64> {
    let n = q as usize;
    let phi = p as f64 / q as f64;
    let mut h = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for m in 0..n {
        let arg = k.y + 2.0 * std::f64::consts::PI * phi * m as f64;
        h[(m, m)] += Complex64::new(-2.0 * arg.cos(), 0.0);
    }
    if n == 1 {
        h[(0, 0)] += Complex64::new(-2.0 * k.x.cos(), 0.0);
    } else {
        for m in 0..n - 1 {
            h[(m, m + 1)] += Complex64::new(-1.0, 0.0);
            h[(m + 1, m)] += Complex64::new(-1.0, 0.0);
        }
        let boundary = -Complex64::new(0.0, q as f64 * k.x).exp();
        h[(n - 1, 0)] += boundary;
        h[(0, n - 1)] += boundary.conj();
    }
    h
}

/// Eigenpairs of the q×q magnetic Bloch matrix.
pub fn hofstadter_fibers(p: i64, q: i64, k: Vector2<f64>) -> Result<BlochFiber> {
    validate_flux(p, q)?;
    let h = hofstadter_matrix(p, q, k);
    diagonalize_fiber(k, h, q as usize, f64::INFINITY)
}

/// Fibers on an `n0 x n1` grid over the magnetic Brillouin zone.
pub fn hofstadter_grid(p: i64, q: i64, n: [usize; 2]) -> Result<FiberGrid> {
    validate_flux(p, q)?;
    // Fundamental cell (2π/q) x (2π): realized as the dual cell of the
    // lattice with basis (q, 0), (0, 1).
    let lattice = Lattice::new(&[
        Vector2::new(q as f64, 0.0),
        Vector2::new(0.0, 1.0),
    ])?;
    let fibers: Result<Vec<BlochFiber>> = (0..n[0] * n[1])
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / n[1], idx % n[1]);
            let k = (i as f64 / n[0] as f64) * lattice.dual(0)
                + (j as f64 / n[1] as f64) * lattice.dual(1);
            hofstadter_fibers(p, q, k)
        })
        .collect();
    Ok(FiberGrid::from_parts(lattice, n, fibers?))
}

/// Chern number of one magnetic band (1-based) at flux p/q.
pub fn hofstadter_chern(p: i64, q: i64, band: usize, n: [usize; 2]) -> Result<ChernResult> {
    let grid = hofstadter_grid(p, q, n)?;
    let links = LinkGrid::build(&grid, band, WrapRule::Plain, None)?;
    chern_number(&links)
}

/// Chern numbers of all q bands.
pub fn hofstadter_chern_table(p: i64, q: i64, n: [usize; 2]) -> Result<Vec<ChernResult>> {
    let grid = hofstadter_grid(p, q, n)?;
    (1..=q as usize)
        .map(|band| {
            let links = LinkGrid::build(&grid, band, WrapRule::Plain, None)?;
            chern_number(&links)
        })
        .collect()
}

/// Gap-labelling oracle: `t_r` solves `p t_r = r (mod q)` with `|t_r| <= q/2`;
/// the Chern number of band r is `t_r - t_{r-1}`.
pub fn tknn_chern_numbers(p: i64, q: i64) -> Result<Vec<i64>> {
    validate_flux(p, q)?;
    let t = |r: i64| -> i64 {
        if r == 0 || r == q {
            return 0;
        }
        for cand in 0..=q / 2 {
            for s in [cand, -cand] {
                if (p * s).rem_euclid(q) == r.rem_euclid(q) {
                    return s;
                }
            }
        }
        unreachable!("gcd(p,q)=1 guarantees a solution");
    };
    Ok((1..=q).map(|r| t(r) - t(r - 1)).collect())
}
