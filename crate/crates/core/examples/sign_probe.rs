use num_complex::Complex64;
use semibloch::fields::*;
use semibloch::lattice::Lattice;
use semibloch::potential::FourierPotential;
use semibloch::schrodinger::*;
use semibloch::wavefield::{SimBox, WaveField};

fn gaussian(bx: &SimBox, x0: f64, w: f64) -> WaveField {
    let n = bx.n_points()[0];
    let mut s = Vec::with_capacity(n);
    for i in 0..n {
        let x = bx.position(i, 0).x;
        s.push(Complex64::new((-(x - x0) * (x - x0) / (2.0 * w * w)).exp(), 0.0));
    }
    let mut psi = WaveField::new(bx.clone(), s).unwrap();
    psi.normalize();
    psi
}

fn run(ppc_mult: usize, plateau: f64, wq: f64) -> f64 {
    let eps = 0.125;
    let lat = Lattice::line(2.0 * std::f64::consts::PI).unwrap();
    let bx = SimBox::new(lat.clone(), eps, [24, 1], 16 * ppc_mult).unwrap();
    let l = bx.volume();
    let x0 = 0.5 * l;
    let omega2 = 0.5;
    let fields = ExternalFields::with_phi(ScalarField {
        terms: vec![ScalarPrimitive::WindowedPoly {
            constant: 0.0, linear: [0.0, 0.0],
            quad: [[omega2, 0.0], [0.0, 0.0]],
            center: [x0, 0.0], plateau, support: 0.45 * l,
        }],
    });
    let psi0 = gaussian(&bx, x0 + 1.0, wq);
    let spec = OracleSpec::new(FourierPotential::zero(lat), fields, eps, 0.002 * eps).unwrap();
    let t = 1.0;
    let psi = evolve(&psi0, t, &spec).unwrap();
    let sq = omega2f(t);
    let want = x0 + sq;
    let n = bx.n_points()[0];
    let dv = bx.volume_element();
    let mut c = 0.0;
    for i in 0..n { c += bx.position(i, 0).x * psi.samples()[i].norm_sqr() * dv; }
    c - want
}

fn omega2f(t: f64) -> f64 {
    // closed form x(t) = cos(sqrt(0.5) t) for x(0)=1, p(0)=0
    (0.5f64.sqrt() * t).cos()
}

fn main() {
    println!("base:              {:+.3e}", run(1, 6.0, 0.8));
    println!("ppc x2:            {:+.3e}", run(2, 6.0, 0.8));
    println!("plateau 8:         {:+.3e}", run(1, 8.0, 0.8));
    println!("narrower packet:   {:+.3e}", run(1, 6.0, 0.6));
}
