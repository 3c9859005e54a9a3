//! The periodicity condition as a Mobius transformation: z = exp(2 i S0)
//! advances over one period by z -> (P z + Q)/(M z + N). The example builds
//! the coefficients, checks the trace identity and the unit-circle
//! preservation, and compares the map against the constructed action.
//!
//! ```sh
//! cargo run --example mobius_bloch
//! ```

use hjband::bloch::{apply_mobius, mobius_coefficients, BlochAction, SuperpositionParams};
use hjband::spectrum::find_bands;
use hjband::LatticeSpec;
use num_complex::Complex64;

fn main() {
    let lat = LatticeSpec::new(10.0, 1.0, 1.0).unwrap();
    let bands = find_bands(&lat, 0.1, 40.0, 4000).unwrap();
    let energy = bands[1].e_lo + 0.4 * (bands[1].e_hi - bands[1].e_lo);
    let sp = SuperpositionParams::from_gamma_delta(0.6, 0.3).unwrap();
    let action = BlochAction::solve(energy, &lat, &sp).unwrap();
    let ke = action.ke();

    let map = mobius_coefficients(&sp, ke);
    println!("energy = {energy:.6}, Ke = {ke:.6}");
    println!("P = {:.6}", map.p);
    println!("Q = {:.6}", map.q);
    println!("M = {:.6}", map.m);
    println!("N = {:.6}", map.n);

    let expect =
        4.0 * sp.gamma() * (Complex64::new(1.0, 0.0) + Complex64::new(0.0, 2.0 * ke).exp());
    println!(
        "trace check: P + N = {:.6}, 4 gamma (1 + e^(2iKe)) = {:.6}, |difference| = {:.3e}",
        map.trace(),
        expect,
        (map.trace() - expect).norm()
    );

    println!("\nunit circle preservation:");
    for i in 0..5 {
        let z = Complex64::from_polar(1.0, -2.5 + i as f64);
        let w = apply_mobius(&map, z).unwrap();
        println!("  |z| = 1 -> |w| - 1 = {:+.3e}", w.norm() - 1.0);
    }

    println!("\nmap versus the constructed action over one period:");
    for i in 0..8 {
        let x = -0.8 + 2.2 * i as f64 / 7.0;
        let a = action.sample(x).unwrap();
        let b = action.sample(x + lat.period()).unwrap();
        let z = Complex64::new(0.0, 2.0 * a.s0).exp();
        let w = Complex64::new(0.0, 2.0 * b.s0).exp();
        let mapped = apply_mobius(&map, z).unwrap();
        println!(
            "  x = {x:+.3}: |exp(2iS0(x+e)) - map(exp(2iS0(x)))| = {:.3e}",
            (w - mapped).norm()
        );
    }
}
