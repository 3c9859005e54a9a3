//! The Bohm limit |alpha| = 1, |beta| = 0 (gamma = 1, delta = 0): the
//! periodicity condition collapses to the affine shift
//! S0(x + e) = S0(x) + Ke + n pi, and F = (S0 - K x)/pi steps by the
//! integer n from one cell to the next.
//!
//! ```sh
//! cargo run --example bohm_limit
//! ```

use hjband::bloch::{bloch_defect, bohm_defect, BlochAction, SuperpositionParams};
use hjband::spectrum::find_bands;
use hjband::LatticeSpec;

fn main() {
    let lat = LatticeSpec::new(10.0, 1.0, 1.0).unwrap();
    let bands = find_bands(&lat, 0.1, 40.0, 4000).unwrap();
    let bohm = SuperpositionParams::from_gamma_delta(1.0, 0.0).unwrap();

    for band in bands.iter().take(3) {
        let energy = 0.5 * (band.e_lo + band.e_hi);
        let action = BlochAction::solve(energy, &lat, &bohm).unwrap();
        let ke = action.ke();
        println!(
            "band {}: E = {energy:.5}, Ke = {ke:.6}, solved (mu1, nu1) = ({:.5}, {:.5})",
            band.index,
            action.mu1(),
            action.nu1()
        );
        for i in 0..4 {
            let x = -0.6 + 1.6 * i as f64 / 3.0;
            let a = action.sample(x).unwrap();
            let b = action.sample(x + lat.period()).unwrap();
            let (defect, n, shift) = bohm_defect(a.s0, b.s0, ke);
            println!(
                "  x = {x:+.3}: S0 advance = Ke + {n} pi (defect {defect:.2e}), F shift = {shift:.12}"
            );
        }
        // The general tangent-form defect agrees with the affine one here.
        let a = action.sample(0.25).unwrap();
        let b = action.sample(0.25 + lat.period()).unwrap();
        let (general, n) = bloch_defect(a.s0, b.s0, &bohm, ke).unwrap();
        println!("  tangent-form defect at x = 0.25: {general:.2e} (n = {n})\n");
    }
}
