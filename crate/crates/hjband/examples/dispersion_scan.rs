//! Evaluates the dispersion relation cos(Ke) = f(E) on an energy grid for
//! the free lattice and for a rectangular-barrier lattice, marking the
//! allowed and forbidden stretches.
//!
//! ```sh
//! cargo run --example dispersion_scan
//! ```

use hjband::spectrum::bloch_wavenumber;
use hjband::LatticeSpec;

fn scan(label: &str, lat: &LatticeSpec) {
    println!(
        "{label}: v0 = {}, c = {}, d = {}",
        lat.v0(),
        lat.c(),
        lat.d()
    );
    println!(
        "{:>8}  {:>10}  {:>8}  {:>9}",
        "E", "cos(Ke)", "allowed", "K"
    );
    for i in 0..30 {
        let e = 0.5 + 1.25 * i as f64;
        let p = bloch_wavenumber(e, lat).unwrap();
        let k = p
            .k_bloch
            .map(|k| format!("{k:9.5}"))
            .unwrap_or_else(|| "      -".into());
        println!(
            "{:8.3}  {:10.5}  {:>8}  {k}",
            p.energy,
            p.cos_ke,
            if p.allowed { "yes" } else { "no" }
        );
    }
    println!();
}

fn main() {
    let free = LatticeSpec::new(0.0, 1.0, 1.0).unwrap();
    scan("free lattice", &free);

    let kp = LatticeSpec::new(10.0, 1.0, 1.0).unwrap();
    scan("rectangular barriers", &kp);
}
