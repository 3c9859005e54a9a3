//! Constructs the Bloch-consistent reduced action S0(x) at an allowed
//! energy: solves the periodicity constraints for the leading region's
//! integration constants, matches the action across the interfaces, and
//! prints the profile together with the measured periodicity defect.
//!
//! ```sh
//! cargo run --example reduced_action
//! ```

use hjband::bloch::{bloch_defect, BlochAction, SuperpositionParams};
use hjband::model::{classify_point, Region};
use hjband::spectrum::find_bands;
use hjband::LatticeSpec;

fn main() {
    let lat = LatticeSpec::new(10.0, 1.0, 1.0).unwrap();
    let bands = find_bands(&lat, 0.1, 40.0, 4000).unwrap();
    let energy = 0.5 * (bands[0].e_lo + bands[0].e_hi);
    let sp = SuperpositionParams::from_gamma_delta(0.7, 0.2).unwrap();

    let action = BlochAction::solve(energy, &lat, &sp).unwrap();
    println!("energy        = {energy:.6} (middle of the first band)");
    println!("gamma, delta  = {}, {}", sp.gamma(), sp.delta());
    println!("cos(Ke)       = {:.12}", action.cos_ke());
    println!("K             = {:.12}", action.k_bloch());
    println!("mu1, nu1      = {:.12}, {:.12}", action.mu1(), action.nu1());
    println!("winding n     = {}", action.winding());

    println!(
        "\n{:>7}  {:>12}  {:>10}  {:>10}  region",
        "x", "S0", "S0'", "R"
    );
    for i in 0..25 {
        let x = -1.0 + 3.0 * i as f64 / 24.0;
        let s = action.sample(x).unwrap();
        let region = match classify_point(x, &lat).0 {
            Region::Well => "well",
            Region::Barrier => "barrier",
        };
        println!(
            "{x:7.3}  {:12.6}  {:10.6}  {:10.6}  {region}",
            s.s0, s.ds0, s.r
        );
    }

    // The unwrapped arctan(gamma tan(S0 + delta)) advances by Ke + n pi
    // over every period; the defect is the distance to that lattice.
    println!("\nperiodicity defect over one period:");
    for i in 0..6 {
        let x = -0.8 + 1.8 * i as f64 / 5.0;
        let a = action.sample(x).unwrap();
        let b = action.sample(x + lat.period()).unwrap();
        let (defect, n) = bloch_defect(a.s0, b.s0, &sp, action.ke()).unwrap();
        println!("  x = {x:+.3}: defect = {defect:.3e} (n = {n})");
    }
}
