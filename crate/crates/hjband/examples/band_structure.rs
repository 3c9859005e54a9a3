//! Locates the allowed energy bands of a Kronig-Penney lattice and prints
//! them together with the gaps, cross-checking each interior edge against
//! the |cos(Ke)| = 1 condition.
//!
//! ```sh
//! cargo run --example band_structure
//! ```

use hjband::spectrum::{dispersion_rhs, find_bands};
use hjband::LatticeSpec;

fn main() {
    let lat = LatticeSpec::new(10.0, 1.0, 1.0).unwrap();
    let bands = find_bands(&lat, 0.1, 40.0, 4000).unwrap();

    println!("bands of v0 = 10, c = d = 1 on (0.1, 40):");
    println!(
        "{:>5}  {:>10}  {:>10}  {:>9}  notes",
        "band", "E_lower", "E_upper", "width"
    );
    for band in &bands {
        let mut notes = Vec::new();
        if band.clipped_lo {
            notes.push("clipped below");
        }
        if band.clipped_hi {
            notes.push("clipped above");
        }
        println!(
            "{:>5}  {:10.6}  {:10.6}  {:9.6}  {}",
            band.index,
            band.e_lo,
            band.e_hi,
            band.e_hi - band.e_lo,
            notes.join(", ")
        );
    }

    println!("\ngaps:");
    for pair in bands.windows(2) {
        println!(
            "  ({:10.6}, {:10.6})  width {:.6}",
            pair[0].e_hi,
            pair[1].e_lo,
            pair[1].e_lo - pair[0].e_hi
        );
    }

    println!("\ninterior edge check, |f(E)| - 1:");
    for band in &bands {
        for (edge, clipped) in [(band.e_lo, band.clipped_lo), (band.e_hi, band.clipped_hi)] {
            if !clipped {
                let f = dispersion_rhs(edge, &lat).unwrap();
                println!("  E = {edge:10.6}: {:+.3e}", f.abs() - 1.0);
            }
        }
    }
}
