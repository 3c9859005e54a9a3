//! Rebuilds the wave function from the reduced action,
//! phi = R (alpha e^{i S0} + beta e^{-i S0}), and checks it three ways:
//! it satisfies the Schrodinger equation to finite-difference accuracy, it
//! carries the Bloch factor e^{i Ke}, and its shape matches the Bloch
//! eigenvector of the independent transfer matrix.
//!
//! ```sh
//! cargo run --example wavefunction_check
//! ```

use hjband::bloch::{BlochAction, SuperpositionParams};
use hjband::model::schrodinger_residual;
use hjband::spectrum::{find_bands, transfer_matrix_oracle};
use hjband::LatticeSpec;
use num_complex::Complex64;

fn main() {
    let lat = LatticeSpec::new(10.0, 1.0, 1.0).unwrap();
    let bands = find_bands(&lat, 0.1, 40.0, 4000).unwrap();
    let energy = bands[0].e_lo + 0.45 * (bands[0].e_hi - bands[0].e_lo);
    let sp = SuperpositionParams::from_gamma_delta(0.5, 0.1).unwrap();
    let action = BlochAction::solve(energy, &lat, &sp).unwrap();

    // finite-difference residual of the reconstruction inside the well
    let h = 2e-4;
    let grid: Vec<f64> = (0..11).map(|i| 0.3 + i as f64 * h).collect();
    let phi: Vec<Complex64> = grid
        .iter()
        .map(|&x| action.wavefunction(x).unwrap())
        .collect();
    let scale = phi.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let re: Vec<f64> = phi.iter().map(|z| z.re / scale).collect();
    let im: Vec<f64> = phi.iter().map(|z| z.im / scale).collect();
    println!("energy = {energy:.6}, K e = {:.6}", action.ke());
    println!(
        "Schrodinger residual: re {:.3e}, im {:.3e}",
        schrodinger_residual(&grid, &re, energy, &lat).unwrap(),
        schrodinger_residual(&grid, &im, energy, &lat).unwrap()
    );

    // Bloch factor over one period
    let factor = Complex64::new(0.0, action.ke()).exp();
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let x = -0.9 + 2.4 * i as f64 / 19.0;
        let a = action.wavefunction(x).unwrap();
        let b = action.wavefunction(x + lat.period()).unwrap();
        worst = worst.max((b - factor * a).norm() / a.norm());
    }
    println!("worst |phi(x+e) - e^(iKe) phi(x)| / |phi(x)| = {worst:.3e}");

    // shape against the transfer-matrix Bloch eigenvector: the ratio
    // phi'(0)/phi(0) of a Bloch state is fixed by the monodromy matrix
    let t = transfer_matrix_oracle(energy, &lat).unwrap();
    let lambda = Complex64::new(t.half_trace(), (1.0 - t.half_trace().powi(2)).sqrt());
    let oracle_ratio = (lambda - t.m[0][0]) / t.m[0][1];
    // phi' = R' (a e^{iS} + b e^{-iS}) + i S' R (a e^{iS} - b e^{-iS}),
    // with R' = -R S''/(2 S')
    let s = action.sample(0.0).unwrap();
    let phase = Complex64::new(0.0, s.s0).exp();
    let plus = sp.alpha() * phase;
    let minus = sp.beta() * phase.conj();
    let r_prime = -s.r * s.d2s0 / (2.0 * s.ds0);
    let derivative = r_prime * (plus + minus) + Complex64::i() * s.ds0 * s.r * (plus - minus);
    let ratio = derivative / action.wavefunction(0.0).unwrap();
    println!(
        "log-derivative at x = 0: constructed {ratio:.10}, transfer-matrix eigenvector {oracle_ratio:.10}"
    );
    println!("difference = {:.3e}", (ratio - oracle_ratio).norm());
}
