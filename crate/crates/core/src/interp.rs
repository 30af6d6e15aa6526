//! Periodic cubic (Catmull-Rom) interpolation on uniform grids.
//!
//! Values are indexed by fractional coordinates in `[0,1)` per dimension
//! with periodic wrap-around; the interpolant is C¹ across cells, which the
//! flow integrator relies on for clean fourth-order convergence.

/// Catmull-Rom weights and their t-derivatives for local coordinate `t`.
fn weights(t: f64) -> ([f64; 4], [f64; 4]) {
    let t2 = t * t;
    let t3 = t2 * t;
    let w = [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ];
    let dw = [
        0.5 * (-3.0 * t2 + 4.0 * t - 1.0),
        0.5 * (9.0 * t2 - 10.0 * t),
        0.5 * (-9.0 * t2 + 8.0 * t + 1.0),
        0.5 * (3.0 * t2 - 2.0 * t),
    ];
    (w, dw)
}

fn cell(f: f64, n: usize) -> (usize, f64) {
    let x = (f - f.floor()) * n as f64;
    let mut i = x.floor() as usize;
    if i >= n {
        i = 0;
    }
    (i, x - i as f64)
}

/// Interpolate a periodic 1d sample array at fractional coordinate `f`.
pub fn interp1(values: &[f64], f: f64) -> f64 {
    interp1_with_deriv(values, f).0
}

/// Value and derivative with respect to the fractional coordinate.
pub fn interp1_with_deriv(values: &[f64], f: f64) -> (f64, f64) {
    let n = values.len();
    debug_assert!(n >= 4, "periodic cubic interpolation needs at least 4 samples");
    let (i, t) = cell(f, n);
    let (w, dw) = weights(t);
    let mut v = 0.0;
    let mut dv = 0.0;
    for (j, (&wj, &dwj)) in w.iter().zip(dw.iter()).enumerate() {
        let idx = (i + n + j - 1) % n;
        v += wj * values[idx];
        dv += dwj * values[idx];
    }
    (v, dv * n as f64)
}

/// Interpolate a periodic row-major 2d array (`n[0] x n[1]`) at fractional
/// coordinates `f`.
pub fn interp2(values: &[f64], n: [usize; 2], f: [f64; 2]) -> f64 {
    interp2_with_deriv(values, n, f).0
}

/// Value and gradient with respect to the two fractional coordinates.
pub fn interp2_with_deriv(values: &[f64], n: [usize; 2], f: [f64; 2]) -> (f64, [f64; 2]) {
    let (n0, n1) = (n[0], n[1]);
    debug_assert_eq!(values.len(), n0 * n1);
    debug_assert!(n0 >= 4 && n1 >= 4);
    let (i0, t0) = cell(f[0], n0);
    let (i1, t1) = cell(f[1], n1);
    let (w0, dw0) = weights(t0);
    let (w1, dw1) = weights(t1);
    let mut v = 0.0;
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for a in 0..4 {
        let ia = (i0 + n0 + a - 1) % n0;
        let mut row = 0.0;
        let mut drow = 0.0;
        for b in 0..4 {
            let ib = (i1 + n1 + b - 1) % n1;
            let s = values[ia * n1 + ib];
            row += w1[b] * s;
            drow += dw1[b] * s;
        }
        v += w0[a] * row;
        d0 += dw0[a] * row;
        d1 += w0[a] * drow;
    }
    (v, [d0 * n0 as f64, d1 * n1 as f64])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn reproduces_samples() {
        let n = 16;
        let vals: Vec<f64> = (0..n).map(|i| (2.0 * PI * i as f64 / n as f64).sin()).collect();
        for i in 0..n {
            let f = i as f64 / n as f64;
            assert!((interp1(&vals, f) - vals[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn cubic_accuracy_and_third_order_convergence() {
        let g = |x: f64| (2.0 * PI * x).sin() + 0.3 * (4.0 * PI * x).cos();
        let worst_for = |n: usize| {
            let vals: Vec<f64> = (0..n).map(|i| g(i as f64 / n as f64)).collect();
            let mut worst = 0.0_f64;
            for s in 0..997 {
                let f = s as f64 / 997.0;
                worst = worst.max((interp1(&vals, f) - g(f)).abs());
            }
            worst
        };
        let e64 = worst_for(64);
        let e128 = worst_for(128);
        assert!(e64 < 1e-3, "interp error {e64}");
        assert!(e64 / e128 > 5.0, "expected ~8x error drop, got {}", e64 / e128);
    }

    #[test]
    fn derivative_is_continuous_across_cells() {
        let n = 32;
        let vals: Vec<f64> = (0..n).map(|i| (2.0 * PI * i as f64 / n as f64).sin()).collect();
        for i in 0..n {
            let f = i as f64 / n as f64;
            let left = interp1_with_deriv(&vals, (f - 1e-12).rem_euclid(1.0)).1;
            let right = interp1_with_deriv(&vals, f + 1e-12).1;
            assert!((left - right).abs() < 1e-6, "C1 break at node {i}");
        }
    }

    #[test]
    fn tensor_interp_matches_separable_function() {
        let n = [24, 20];
        let g = |x: f64, y: f64| (2.0 * PI * x).cos() * (2.0 * PI * y).sin();
        let mut vals = vec![0.0; n[0] * n[1]];
        for i in 0..n[0] {
            for j in 0..n[1] {
                vals[i * n[1] + j] = g(i as f64 / n[0] as f64, j as f64 / n[1] as f64);
            }
        }
        let (v, grad) = interp2_with_deriv(&vals, n, [0.37, 0.61]);
        assert!((v - g(0.37, 0.61)).abs() < 5e-3);
        let h = 1e-6;
        let fd0 = (g(0.37 + h, 0.61) - g(0.37 - h, 0.61)) / (2.0 * h);
        let fd1 = (g(0.37, 0.61 + h) - g(0.37, 0.61 - h)) / (2.0 * h);
        assert!((grad[0] - fd0).abs() < 0.2);
        assert!((grad[1] - fd1).abs() < 0.2);
    }
}
