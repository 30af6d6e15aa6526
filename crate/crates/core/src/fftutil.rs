//! Thin wrappers around rustfft for the 1d/2d transforms used throughout.
//!
//! Forward transforms are unscaled; inverse transforms carry the 1/N factor,
//! so `inverse(forward(x)) == x`.

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Signed frequency index for mode `i` of an `n`-point DFT.
pub fn freq_index(i: usize, n: usize) -> i64 {
    let i = i as i64;
    let n = n as i64;
    if i <= (n - 1) / 2 {
        i
    } else {
        i - n
    }
}

pub fn fft_forward(data: &mut [Complex64]) {
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(data.len()).process(data);
}

pub fn fft_inverse(data: &mut [Complex64]) {
    let n = data.len();
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(n).process(data);
    let s = 1.0 / n as f64;
    for c in data.iter_mut() {
        *c *= s;
    }
}

/// 2d transform of a row-major `n0 x n1` array, along both axes.
pub fn fft2_forward(data: &mut [Complex64], n0: usize, n1: usize) {
    fft2(data, n0, n1, false)
}

pub fn fft2_inverse(data: &mut [Complex64], n0: usize, n1: usize) {
    fft2(data, n0, n1, true);
    let s = 1.0 / (n0 * n1) as f64;
    for c in data.iter_mut() {
        *c *= s;
    }
}

fn fft2(data: &mut [Complex64], n0: usize, n1: usize, inverse: bool) {
    assert_eq!(data.len(), n0 * n1);
    let mut planner = FftPlanner::new();
    let row = if inverse {
        planner.plan_fft_inverse(n1)
    } else {
        planner.plan_fft_forward(n1)
    };
    for r in data.chunks_exact_mut(n1) {
        row.process(r);
    }
    if n0 > 1 {
        let col = if inverse {
            planner.plan_fft_inverse(n0)
        } else {
            planner.plan_fft_forward(n0)
        };
        let mut scratch = vec![Complex64::new(0.0, 0.0); n0];
        for j in 0..n1 {
            for i in 0..n0 {
                scratch[i] = data[i * n1 + j];
            }
            col.process(&mut scratch);
            for i in 0..n0 {
                data[i * n1 + j] = scratch[i];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_1d() {
        let mut data: Vec<Complex64> =
            (0..32).map(|i| Complex64::new((i as f64).sin(), (i as f64).cos())).collect();
        let orig = data.clone();
        fft_forward(&mut data);
        fft_inverse(&mut data);
        for (a, b) in data.iter().zip(orig.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn roundtrip_2d() {
        let (n0, n1) = (8, 12);
        let mut data: Vec<Complex64> = (0..n0 * n1)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let orig = data.clone();
        fft2_forward(&mut data, n0, n1);
        fft2_inverse(&mut data, n0, n1);
        for (a, b) in data.iter().zip(orig.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn forward_picks_out_single_mode() {
        let n = 16;
        let m = 3usize;
        let mut data: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new(0.0, 2.0 * std::f64::consts::PI * (m * i) as f64 / n as f64).exp())
            .collect();
        fft_forward(&mut data);
        for (i, c) in data.iter().enumerate() {
            let want = if i == m { n as f64 } else { 0.0 };
            assert!((c.norm() - want).abs() < 1e-10);
        }
    }

    #[test]
    fn freq_index_signed_layout() {
        assert_eq!(freq_index(0, 8), 0);
        assert_eq!(freq_index(3, 8), 3);
        assert_eq!(freq_index(4, 8), -4);
        assert_eq!(freq_index(7, 8), -1);
        assert_eq!(freq_index(2, 5), 2);
        assert_eq!(freq_index(3, 5), -2);
    }
}
