//! Closed-form dispersion evaluation, Bloch wavenumber extraction, band
//! finding, and the independent transfer-matrix oracle.

use thiserror::Error;

use crate::model::{wavenumbers, LatticeSpec, Regime};

#[derive(Debug, Error)]
pub enum SpectrumError {
    #[error("energy must be positive and finite, got {energy}")]
    Domain { energy: f64 },
    #[error("invalid scan range: {0}")]
    Range(String),
}

/// One evaluated point of the dispersion relation `cos(Ke) = f(E)`.
///
/// `k_bloch` is the principal reduced-zone value `K` in `[0, pi/e]`; the
/// sign ambiguity (`K` and `-K` share the same `cos Ke`) is resolved to the
/// nonnegative branch.
#[derive(Debug, Clone, Copy)]
pub struct BlochPoint {
    pub energy: f64,
    pub cos_ke: f64,
    pub allowed: bool,
    pub k_bloch: Option<f64>,
}

/// One allowed energy interval. `clipped_*` marks edges that coincide with
/// the scan boundary rather than a genuine `|f| = 1` crossing.
#[derive(Debug, Clone, Copy)]
pub struct Band {
    pub index: usize,
    pub e_lo: f64,
    pub e_hi: f64,
    pub clipped_lo: bool,
    pub clipped_hi: bool,
}

/// Right-hand side `f(E)` of the dispersion relation `cos(Ke) = f(E)`.
///
/// Above the barrier:
/// `cos(k1 d) cos(k2 c) - (k1^2 + k2^2) / (2 k1 k2) sin(k1 d) sin(k2 c)`;
/// below it the barrier functions continue to their hyperbolic forms; at
/// threshold both branches share the limit
/// `cos(k2 c) - (k2 d / 2) sin(k2 c)`.
pub fn dispersion_rhs(energy: f64, lat: &LatticeSpec) -> Result<f64, SpectrumError> {
    let wn = wavenumbers(energy, lat).map_err(|_| SpectrumError::Domain { energy })?;
    let (c, d) = (lat.c(), lat.d());
    let k2 = wn.k2;
    let (s2, c2) = (k2 * c).sin_cos();
    let f = match wn.regime {
        Regime::AboveBarrier => {
            let k1 = wn.k1.expect("above-barrier k1");
            let (s1, c1) = (k1 * d).sin_cos();
            c1 * c2 - (k1 * k1 + k2 * k2) / (2.0 * k1 * k2) * s1 * s2
        }
        Regime::BelowBarrier => {
            let k3 = wn.k3.expect("below-barrier k3");
            let sh = (k3 * d).sinh();
            let ch = (k3 * d).cosh();
            ch * c2 - (k2 * k2 - k3 * k3) / (2.0 * k2 * k3) * sh * s2
        }
        Regime::AtThreshold => c2 - 0.5 * k2 * d * s2,
    };
    Ok(f)
}

/// Evaluates the dispersion at one energy and reduces the Bloch wavenumber
/// to `[0, pi/e]` when the energy is allowed.
pub fn bloch_wavenumber(energy: f64, lat: &LatticeSpec) -> Result<BlochPoint, SpectrumError> {
    let cos_ke = dispersion_rhs(energy, lat)?;
    let allowed = cos_ke.abs() <= 1.0 + 1e-14;
    let k_bloch = allowed.then(|| cos_ke.clamp(-1.0, 1.0).acos() / lat.period());
    Ok(BlochPoint {
        energy,
        cos_ke,
        allowed,
        k_bloch,
    })
}

/// Scans `[e_min, e_max]` on `n_samples` uniform points and returns the
/// allowed bands, with every interior edge refined by bisection on
/// `|f(E)| - 1`. Bands narrower than the scan step can be missed; the
/// sample count is the caller's knob.
pub fn find_bands(
    lat: &LatticeSpec,
    e_min: f64,
    e_max: f64,
    n_samples: usize,
) -> Result<Vec<Band>, SpectrumError> {
    if !e_min.is_finite() || !e_max.is_finite() || e_min <= 0.0 || e_min >= e_max {
        return Err(SpectrumError::Range(format!(
            "need 0 < e_min < e_max, got ({e_min}, {e_max})"
        )));
    }
    if n_samples < 2 {
        return Err(SpectrumError::Range(format!(
            "need at least 2 samples, got {n_samples}"
        )));
    }
    let gap = |e: f64| -> f64 { dispersion_rhs(e, lat).map(|f| f.abs() - 1.0).unwrap_or(2.0) };
    let tol = 1e-12 * e_max.max(1.0);

    let step = (e_max - e_min) / (n_samples - 1) as f64;
    let energies: Vec<f64> = (0..n_samples).map(|i| e_min + i as f64 * step).collect();
    let values: Vec<f64> = energies.iter().map(|&e| gap(e)).collect();

    let mut bands = Vec::new();
    let mut open: Option<(f64, bool)> = if values[0] <= 0.0 {
        Some((e_min, true))
    } else {
        None
    };
    for i in 1..n_samples {
        let was_allowed = values[i - 1] <= 0.0;
        let is_allowed = values[i] <= 0.0;
        if was_allowed == is_allowed {
            continue;
        }
        let edge = bisect_edge(&gap, energies[i - 1], energies[i], tol);
        if is_allowed {
            open = Some((edge, false));
        } else if let Some((lo, clipped_lo)) = open.take() {
            bands.push(Band {
                index: bands.len(),
                e_lo: lo,
                e_hi: edge,
                clipped_lo,
                clipped_hi: false,
            });
        }
    }
    if let Some((lo, clipped_lo)) = open {
        bands.push(Band {
            index: bands.len(),
            e_lo: lo,
            e_hi: e_max,
            clipped_lo,
            clipped_hi: true,
        });
    }
    Ok(bands)
}

/// Bisection for the `|f| = 1` crossing bracketed by `[lo, hi]`.
fn bisect_edge(gap: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut glo = gap(lo);
    if glo == 0.0 {
        return lo;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo < tol {
            return mid;
        }
        let gmid = gap(mid);
        if gmid == 0.0 {
            return mid;
        }
        if gmid.signum() == glo.signum() {
            lo = mid;
            glo = gmid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The monodromy matrix of `(phi, phi')` over one period, built from the
/// exact propagators of the two constant-potential regions.
#[derive(Debug, Clone, Copy)]
pub struct TransferMatrix {
    pub m: [[f64; 2]; 2],
}

impl TransferMatrix {
    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    /// `tr(M) / 2 = cos(Ke)`.
    pub fn half_trace(&self) -> f64 {
        0.5 * (self.m[0][0] + self.m[1][1])
    }
}

fn matmul(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut out = [[0.0; 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// Exact propagator of `(phi, phi')` across a constant-potential stretch.
fn oscillatory_propagator(k: f64, width: f64) -> [[f64; 2]; 2] {
    let (s, c) = (k * width).sin_cos();
    [[c, s / k], [-k * s, c]]
}

fn evanescent_propagator(k: f64, width: f64) -> [[f64; 2]; 2] {
    let s = (k * width).sinh();
    let c = (k * width).cosh();
    [[c, s / k], [k * s, c]]
}

/// Monodromy matrix over one period, well first then barrier. Independent
/// of the reduced-action machinery; its half-trace is the oracle for the
/// dispersion relation, with `det = 1` as the built-in consistency check.
pub fn transfer_matrix_oracle(
    energy: f64,
    lat: &LatticeSpec,
) -> Result<TransferMatrix, SpectrumError> {
    let wn = wavenumbers(energy, lat).map_err(|_| SpectrumError::Domain { energy })?;
    let well = oscillatory_propagator(wn.k2, lat.c());
    let barrier = match wn.regime {
        Regime::AboveBarrier => oscillatory_propagator(wn.k1.expect("k1"), lat.d()),
        Regime::BelowBarrier => evanescent_propagator(wn.k3.expect("k3"), lat.d()),
        Regime::AtThreshold => [[1.0, lat.d()], [0.0, 1.0]],
    };
    Ok(TransferMatrix {
        m: matmul(barrier, well),
    })
}
