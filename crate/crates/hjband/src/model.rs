//! Lattice geometry, energy regimes, wavenumbers, and the real
//! basis-solution pairs of the Schrodinger equation in each region.

use std::f64::consts::PI;

use thiserror::Error;

/// Relative half-width of the window in which an energy counts as sitting
/// exactly on top of the barrier. Inside the window the trigonometric and
/// hyperbolic barrier bases are numerically degenerate and the affine pair
/// `(x, 1)` is exact.
pub const THRESHOLD_WINDOW_REL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("lattice parameter `{name}` must be {requirement}, got {value}")]
    InvalidLattice {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("energy must be positive and finite, got {energy}")]
    Domain { energy: f64 },
    #[error("grid error: {0}")]
    Grid(String),
    #[error("basis wavenumber must be positive and finite, got {0}")]
    InvalidWavenumber(f64),
    #[error("recombination matrix is singular (|det| = {0:e})")]
    SingularRecombination(f64),
}

/// The periodic rectangular-barrier potential: wells of width `c` at zero
/// potential alternate with barriers of width `d` at height `v0`, so
/// `V(x + e) = V(x)` with period `e = c + d`.
///
/// Cell `n` covers `[n e, (n+1) e)`; its well is `[n e, n e + c)` and its
/// barrier `[n e + c, (n+1) e)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSpec {
    v0: f64,
    c: f64,
    d: f64,
}

impl LatticeSpec {
    /// `v0 >= 0` (zero gives the free lattice), `c > 0`, `d > 0`.
    pub fn new(v0: f64, c: f64, d: f64) -> Result<Self, ModelError> {
        if !v0.is_finite() || v0 < 0.0 {
            return Err(ModelError::InvalidLattice {
                name: "v0",
                requirement: "nonnegative and finite",
                value: v0,
            });
        }
        if !c.is_finite() || c <= 0.0 {
            return Err(ModelError::InvalidLattice {
                name: "c",
                requirement: "positive and finite",
                value: c,
            });
        }
        if !d.is_finite() || d <= 0.0 {
            return Err(ModelError::InvalidLattice {
                name: "d",
                requirement: "positive and finite",
                value: d,
            });
        }
        Ok(Self { v0, c, d })
    }

    pub fn v0(&self) -> f64 {
        self.v0
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    /// Lattice period `e = c + d`.
    pub fn period(&self) -> f64 {
        self.c + self.d
    }

    /// `V(x)`: zero in wells, `v0` in barriers.
    pub fn potential(&self, x: f64) -> f64 {
        match classify_point(x, self).0 {
            Region::Well => 0.0,
            Region::Barrier => self.v0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Well,
    Barrier,
}

/// Splits `x` as `x = cell * e + local` with `local` in `[0, e)` and reports
/// which region the point falls in. Boundary points (`local` equal to `0` or
/// `c`) belong to the region starting there.
pub fn classify_point(x: f64, lat: &LatticeSpec) -> (Region, i64, f64) {
    let e = lat.period();
    let mut cell = (x / e).floor();
    let mut local = x - cell * e;
    // Guard the floating-point corners of the division.
    if local < 0.0 {
        cell -= 1.0;
        local += e;
    }
    if local >= e {
        cell += 1.0;
        local = 0.0;
    }
    let region = if local < lat.c {
        Region::Well
    } else {
        Region::Barrier
    };
    (region, cell as i64, local)
}

/// Position of an energy relative to the barrier height.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `E > v0`: the barrier solutions propagate.
    AboveBarrier,
    /// `0 < E < v0`: the barrier solutions are evanescent.
    BelowBarrier,
    /// `|E - v0|` within the threshold window: the barrier solutions are
    /// the affine pair `(x, 1)`.
    AtThreshold,
}

/// Regime-tagged wavenumbers for one energy, with `hbar = 1`, `2m = 1`:
/// `k2 = sqrt(E)` in the well, and in the barrier either `k1 = sqrt(E - v0)`
/// (above) or `k3 = sqrt(v0 - E)` (below). `k1` and `k3` are mutually
/// exclusive and both absent at threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wavenumbers {
    pub regime: Regime,
    pub k1: Option<f64>,
    pub k2: f64,
    pub k3: Option<f64>,
}

impl Wavenumbers {
    /// Recovers the energy from the well wavenumber.
    pub fn energy(&self) -> f64 {
        self.k2 * self.k2
    }
}

/// Computes the regime and wavenumbers for `energy > 0`.
pub fn wavenumbers(energy: f64, lat: &LatticeSpec) -> Result<Wavenumbers, ModelError> {
    if !energy.is_finite() || energy <= 0.0 {
        return Err(ModelError::Domain { energy });
    }
    let v0 = lat.v0();
    let window = THRESHOLD_WINDOW_REL * v0.max(1.0);
    let k2 = energy.sqrt();
    let wn = if (energy - v0).abs() <= window {
        Wavenumbers {
            regime: Regime::AtThreshold,
            k1: None,
            k2,
            k3: None,
        }
    } else if energy > v0 {
        Wavenumbers {
            regime: Regime::AboveBarrier,
            k1: Some((energy - v0).sqrt()),
            k2,
            k3: None,
        }
    } else {
        Wavenumbers {
            regime: Regime::BelowBarrier,
            k1: None,
            k2,
            k3: Some((v0 - energy).sqrt()),
        }
    };
    Ok(wn)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BasisKind {
    /// `(sin kx, cos kx)` — propagating regions.
    Trig { k: f64 },
    /// `(sinh kx, cosh kx)` — evanescent barriers.
    Hyp { k: f64 },
    /// `(x, 1)` — barriers exactly at threshold.
    Affine,
}

/// Values of the two basis functions and their first two derivatives at one
/// point.
#[derive(Debug, Clone, Copy)]
pub struct BasisValues {
    pub f1: f64,
    pub f2: f64,
    pub df1: f64,
    pub df2: f64,
    pub d2f1: f64,
    pub d2f2: f64,
}

/// A pair of real independent solutions of the Schrodinger equation in one
/// region, possibly recombined by an invertible 2x2 matrix and possibly
/// anchored away from the coordinate origin (the pure functions are
/// evaluated at `x - origin`, which keeps hyperbolic arguments bounded when
/// regions sit far from zero). The Wronskian `f1 f2' - f1' f2` is constant
/// and nonzero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisPair {
    kind: BasisKind,
    origin: f64,
    // Row i holds the coefficients of the i-th recombined function in the
    // pure pair: g_i = m[i][0] * f1 + m[i][1] * f2.
    recomb: [[f64; 2]; 2],
}

/// Reduced-frame values used by the action evaluation: the pure-pair values
/// with any branch flip factored out, plus the index of the branch of the
/// second recombined function's zeros that `x` falls in.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ReducedFrame {
    pub b1: f64,
    pub b2: f64,
    pub db1: f64,
    pub db2: f64,
    pub pole_index: i64,
}

const IDENTITY: [[f64; 2]; 2] = [[1.0, 0.0], [0.0, 1.0]];

impl BasisPair {
    pub fn pure(kind: BasisKind) -> Result<Self, ModelError> {
        match kind {
            BasisKind::Trig { k } | BasisKind::Hyp { k } => {
                if !k.is_finite() || k <= 0.0 {
                    return Err(ModelError::InvalidWavenumber(k));
                }
            }
            BasisKind::Affine => {}
        }
        Ok(Self {
            kind,
            origin: 0.0,
            recomb: IDENTITY,
        })
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    /// The same pair translated so its pure functions are evaluated at
    /// `x - origin`.
    pub fn anchored_at(&self, origin: f64) -> Self {
        Self { origin, ..*self }
    }

    /// Replaces the pair `(g1, g2)` by `(a g1 + b g2, c g1 + d g2)`.
    pub fn recombine(&self, m: [[f64; 2]; 2]) -> Result<Self, ModelError> {
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let scale = m[0][0].abs() + m[0][1].abs() + m[1][0].abs() + m[1][1].abs();
        if !det.is_finite() || det.abs() <= 1e-12 * scale.max(1.0) {
            return Err(ModelError::SingularRecombination(det.abs()));
        }
        let a = &m;
        let b = &self.recomb;
        let mut out = [[0.0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Ok(Self {
            kind: self.kind,
            origin: self.origin,
            recomb: out,
        })
    }

    pub(crate) fn rows(&self) -> ([f64; 2], [f64; 2]) {
        (self.recomb[0], self.recomb[1])
    }

    fn base_wronskian(&self) -> f64 {
        match self.kind {
            BasisKind::Trig { k } | BasisKind::Hyp { k } => -k,
            BasisKind::Affine => -1.0,
        }
    }

    /// `g1 g2' - g1' g2`, position independent.
    pub fn wronskian(&self) -> f64 {
        let det = self.recomb[0][0] * self.recomb[1][1] - self.recomb[0][1] * self.recomb[1][0];
        det * self.base_wronskian()
    }

    fn base_values(&self, x: f64) -> BasisValues {
        let x = x - self.origin;
        match self.kind {
            BasisKind::Trig { k } => {
                let (s, c) = (k * x).sin_cos();
                BasisValues {
                    f1: s,
                    f2: c,
                    df1: k * c,
                    df2: -k * s,
                    d2f1: -k * k * s,
                    d2f2: -k * k * c,
                }
            }
            BasisKind::Hyp { k } => {
                let s = (k * x).sinh();
                let c = (k * x).cosh();
                BasisValues {
                    f1: s,
                    f2: c,
                    df1: k * c,
                    df2: k * s,
                    d2f1: k * k * s,
                    d2f2: k * k * c,
                }
            }
            BasisKind::Affine => BasisValues {
                f1: x,
                f2: 1.0,
                df1: 1.0,
                df2: 0.0,
                d2f1: 0.0,
                d2f2: 0.0,
            },
        }
    }

    /// Values of the (possibly recombined) pair at `x`.
    pub fn eval(&self, x: f64) -> BasisValues {
        let b = self.base_values(x);
        let m = &self.recomb;
        BasisValues {
            f1: m[0][0] * b.f1 + m[0][1] * b.f2,
            f2: m[1][0] * b.f1 + m[1][1] * b.f2,
            df1: m[0][0] * b.df1 + m[0][1] * b.df2,
            df2: m[1][0] * b.df1 + m[1][1] * b.df2,
            d2f1: m[0][0] * b.d2f1 + m[0][1] * b.d2f2,
            d2f2: m[1][0] * b.d2f1 + m[1][1] * b.d2f2,
        }
    }

    /// Pure-pair values at `x` with the sign flip of the current branch
    /// removed, so that the denominator `c b1 + d b2` of the action's
    /// tangent argument stays nonnegative across trigonometric poles.
    pub(crate) fn reduced_frame(&self, x: f64) -> ReducedFrame {
        let (_, dr) = self.rows();
        let x = x - self.origin;
        match self.kind {
            BasisKind::Trig { k } => {
                // Zeros of c sin(kx) + d cos(kx) = R cos(kx - psi).
                let psi = dr[0].atan2(dr[1]);
                let m = ((k * x - psi) / PI).round();
                let chi = k * x - m * PI;
                let (s, c) = chi.sin_cos();
                ReducedFrame {
                    b1: s,
                    b2: c,
                    db1: k * c,
                    db2: -k * s,
                    pole_index: m as i64,
                }
            }
            BasisKind::Hyp { k } => {
                let s = (k * x).sinh();
                let c = (k * x).cosh();
                // c sinh(kx) + d cosh(kx) has at most one zero.
                let sum = dr[0] + dr[1];
                let dif = dr[0] - dr[1];
                let pole_index = if sum != 0.0 && dif != 0.0 && sum.signum() == dif.signum() {
                    let x_star = (dif / sum).ln() / (2.0 * k);
                    i64::from(x >= x_star)
                } else {
                    0
                };
                ReducedFrame {
                    b1: s,
                    b2: c,
                    db1: k * c,
                    db2: k * s,
                    pole_index,
                }
            }
            BasisKind::Affine => {
                let pole_index = if dr[0] != 0.0 {
                    i64::from(x >= -dr[1] / dr[0])
                } else {
                    0
                };
                ReducedFrame {
                    b1: x,
                    b2: 1.0,
                    db1: 1.0,
                    db2: 0.0,
                    pole_index,
                }
            }
        }
    }
}

/// The pure solution pair for one region: wells always use the
/// trigonometric pair at `k2`; barriers use the pair selected by the regime.
pub fn basis_for_region(region: Region, wn: &Wavenumbers) -> BasisPair {
    let kind = match region {
        Region::Well => BasisKind::Trig { k: wn.k2 },
        Region::Barrier => match wn.regime {
            Regime::AboveBarrier => BasisKind::Trig {
                k: wn.k1.expect("above-barrier wavenumbers carry k1"),
            },
            Regime::BelowBarrier => BasisKind::Hyp {
                k: wn.k3.expect("below-barrier wavenumbers carry k3"),
            },
            Regime::AtThreshold => BasisKind::Affine,
        },
    };
    BasisPair::pure(kind).expect("wavenumbers are validated positive")
}

/// `a < b`, false for any NaN.
pub(crate) fn strictly_increasing(a: f64, b: f64) -> bool {
    matches!(a.partial_cmp(&b), Some(std::cmp::Ordering::Less))
}

/// Checks that the grid is valid for central differencing inside a single
/// region: at least `min_points` samples, strictly increasing, uniform
/// spacing, and every point classified into the same (region, cell).
pub(crate) fn check_uniform_grid(
    grid: &[f64],
    lat: &LatticeSpec,
    min_points: usize,
) -> Result<f64, ModelError> {
    if grid.len() < min_points {
        return Err(ModelError::Grid(format!(
            "need at least {min_points} points, got {}",
            grid.len()
        )));
    }
    let h = grid[1] - grid[0];
    if !strictly_increasing(grid[0], grid[1]) {
        return Err(ModelError::Grid("grid must be strictly increasing".into()));
    }
    for pair in grid.windows(2) {
        let step = pair[1] - pair[0];
        if !strictly_increasing(pair[0], pair[1]) {
            return Err(ModelError::Grid("grid must be strictly increasing".into()));
        }
        if (step - h).abs() > 1e-9 * h.max(1.0) {
            return Err(ModelError::Grid(format!(
                "grid spacing is not uniform: {step} vs {h}"
            )));
        }
    }
    let (region0, cell0, _) = classify_point(grid[0], lat);
    for &x in &grid[1..] {
        let (region, cell, _) = classify_point(x, lat);
        if region != region0 || cell != cell0 {
            return Err(ModelError::Grid(format!(
                "grid crosses a region boundary near x = {x}"
            )));
        }
    }
    Ok(h)
}

/// Maximum over interior grid points of `|-phi'' + (V - E) phi|`, with the
/// second derivative taken by the three-point central difference
/// (second-order accurate in the grid step).
pub fn schrodinger_residual(
    grid: &[f64],
    phi: &[f64],
    energy: f64,
    lat: &LatticeSpec,
) -> Result<f64, ModelError> {
    if grid.len() != phi.len() {
        return Err(ModelError::Grid(format!(
            "grid has {} points but phi has {}",
            grid.len(),
            phi.len()
        )));
    }
    let h = check_uniform_grid(grid, lat, 3)?;
    let mut worst: f64 = 0.0;
    for i in 1..grid.len() - 1 {
        let second = (phi[i + 1] - 2.0 * phi[i] + phi[i - 1]) / (h * h);
        let v = lat.potential(grid[i]);
        worst = worst.max((-second + (v - energy) * phi[i]).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn lat_11(v0: f64) -> LatticeSpec {
        LatticeSpec::new(v0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn lattice_validation() {
        assert!(LatticeSpec::new(10.0, 1.0, 1.0).is_ok());
        assert!(LatticeSpec::new(0.0, 1.0, 1.0).is_ok());
        assert!(LatticeSpec::new(-1.0, 1.0, 1.0).is_err());
        assert!(LatticeSpec::new(1.0, 0.0, 1.0).is_err());
        assert!(LatticeSpec::new(1.0, 1.0, -0.5).is_err());
        assert!(LatticeSpec::new(f64::NAN, 1.0, 1.0).is_err());
        let lat = lat_11(10.0);
        assert_eq!(lat.period(), 2.0);
    }

    #[test]
    fn classify_examples() {
        let lat = lat_11(10.0);
        assert_eq!(classify_point(0.5, &lat), (Region::Well, 0, 0.5));
        let (region, cell, local) = classify_point(-0.3, &lat);
        assert_eq!((region, cell), (Region::Barrier, -1));
        assert!((local - 1.7).abs() < 1e-12);
        assert_eq!(classify_point(2.0, &lat), (Region::Well, 1, 0.0));
        // boundary points belong to the region on their right
        assert_eq!(classify_point(1.0, &lat).0, Region::Barrier);
        assert_eq!(classify_point(0.0, &lat).0, Region::Well);
    }

    #[test]
    fn potential_is_periodic() {
        let lat = LatticeSpec::new(7.5, 0.8, 1.3).unwrap();
        let e = lat.period();
        let mut rng = StdRng::seed_from_u64(401);
        for _ in 0..1000 {
            let x = rng.gen_range(-20.0..20.0);
            assert_eq!(lat.potential(x + e), lat.potential(x));
        }
    }

    #[test]
    fn wavenumber_examples() {
        let lat = lat_11(10.0);
        let wn = wavenumbers(13.0, &lat).unwrap();
        assert_eq!(wn.regime, Regime::AboveBarrier);
        assert!((wn.k1.unwrap() - 3.0_f64.sqrt()).abs() < 1e-15);
        assert!((wn.k2 - 13.0_f64.sqrt()).abs() < 1e-15);
        assert!(wn.k3.is_none());

        let wn = wavenumbers(5.0, &lat).unwrap();
        assert_eq!(wn.regime, Regime::BelowBarrier);
        assert!((wn.k2 - 5.0_f64.sqrt()).abs() < 1e-15);
        assert!((wn.k3.unwrap() - 5.0_f64.sqrt()).abs() < 1e-15);

        let wn = wavenumbers(10.0, &lat).unwrap();
        assert_eq!(wn.regime, Regime::AtThreshold);
        assert!((wn.k2 - 10.0_f64.sqrt()).abs() < 1e-15);
        assert!(wn.k1.is_none() && wn.k3.is_none());

        assert!(wavenumbers(0.0, &lat).is_err());
        assert!(wavenumbers(-3.0, &lat).is_err());
    }

    #[test]
    fn regime_trichotomy_and_energy_roundtrip() {
        let lat = lat_11(10.0);
        let mut rng = StdRng::seed_from_u64(402);
        for _ in 0..500 {
            let e = rng.gen_range(1e-3..40.0);
            let wn = wavenumbers(e, &lat).unwrap();
            let tags = [
                wn.regime == Regime::AboveBarrier,
                wn.regime == Regime::BelowBarrier,
                wn.regime == Regime::AtThreshold,
            ];
            assert_eq!(tags.iter().filter(|&&t| t).count(), 1);
            assert!((wn.energy() - e).abs() <= 1e-12 * e);
            match wn.regime {
                Regime::AboveBarrier => {
                    let k1 = wn.k1.unwrap();
                    assert!((k1 * k1 + lat.v0() - e).abs() <= 1e-12 * e.max(1.0));
                }
                Regime::BelowBarrier => {
                    let k3 = wn.k3.unwrap();
                    assert!((lat.v0() - k3 * k3 - e).abs() <= 1e-12 * e.max(1.0));
                }
                Regime::AtThreshold => {}
            }
        }
    }

    #[test]
    fn basis_examples() {
        let wn = Wavenumbers {
            regime: Regime::AboveBarrier,
            k1: Some(1.0),
            k2: 2.0,
            k3: None,
        };
        let well = basis_for_region(Region::Well, &wn);
        assert_eq!(well.kind(), BasisKind::Trig { k: 2.0 });
        assert!((well.wronskian() + 2.0).abs() < 1e-15);

        let wn = Wavenumbers {
            regime: Regime::BelowBarrier,
            k1: None,
            k2: 2.0,
            k3: Some(1.0),
        };
        let barrier = basis_for_region(Region::Barrier, &wn);
        assert_eq!(barrier.kind(), BasisKind::Hyp { k: 1.0 });
        assert!((barrier.wronskian() + 1.0).abs() < 1e-15);

        let wn = Wavenumbers {
            regime: Regime::AtThreshold,
            k1: None,
            k2: 2.0,
            k3: None,
        };
        let barrier = basis_for_region(Region::Barrier, &wn);
        assert_eq!(barrier.kind(), BasisKind::Affine);
        assert!((barrier.wronskian() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn wronskian_is_constant_when_sampled() {
        let mut rng = StdRng::seed_from_u64(403);
        let bases = [
            BasisPair::pure(BasisKind::Trig { k: 1.7 }).unwrap(),
            BasisPair::pure(BasisKind::Hyp { k: 0.9 }).unwrap(),
            BasisPair::pure(BasisKind::Affine).unwrap(),
            BasisPair::pure(BasisKind::Trig { k: 2.3 })
                .unwrap()
                .recombine([[1.2, -0.4], [0.3, 0.9]])
                .unwrap(),
        ];
        for basis in bases {
            let w0 = basis.wronskian();
            assert!(w0 != 0.0);
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for _ in 0..10 {
                let x = rng.gen_range(-3.0..3.0);
                let v = basis.eval(x);
                let w = v.f1 * v.df2 - v.df1 * v.f2;
                lo = lo.min(w);
                hi = hi.max(w);
            }
            assert!((hi - lo).abs() <= 1e-12 * w0.abs());
        }
    }

    #[test]
    fn basis_members_solve_schrodinger() {
        // Each basis member satisfies phi'' = (V - E) phi in its region to
        // finite-difference accuracy. The FD error scales with h^2 |phi|,
        // so the odd member is sampled near its zero and the even member on
        // a finer grid.
        let lat = lat_11(10.0);
        let wn = wavenumbers(5.0, &lat).unwrap();
        let barrier = basis_for_region(Region::Barrier, &wn);
        let grid: Vec<f64> = (0..3).map(|i| -0.0025 + i as f64 * 1e-3).collect();
        let phi1: Vec<f64> = grid.iter().map(|&x| barrier.eval(x).f1).collect();
        assert!(schrodinger_residual(&grid, &phi1, 5.0, &lat).unwrap() < 1e-8);
        let grid: Vec<f64> = (0..11).map(|i| -0.5 + i as f64 * 1e-4).collect();
        let phi2: Vec<f64> = grid.iter().map(|&x| barrier.eval(x).f2).collect();
        assert!(schrodinger_residual(&grid, &phi2, 5.0, &lat).unwrap() < 1e-7);
    }

    #[test]
    fn schrodinger_residual_examples() {
        // Exact well solution at small energy: residual is O(h^2).
        let lat = lat_11(10.0);
        let e: f64 = 0.25;
        let k = e.sqrt();
        let h = 1e-3;
        let grid: Vec<f64> = (0..21).map(|i| 0.1 + i as f64 * h).collect();
        let phi: Vec<f64> = grid.iter().map(|&x| (k * x).sin()).collect();
        let r = schrodinger_residual(&grid, &phi, e, &lat).unwrap();
        assert!(r < 1e-8, "residual {r}");

        // phi = x^2 with E = 0, V = 0: the residual is exactly -phi'' = -2.
        let phi: Vec<f64> = grid.iter().map(|&x| x * x).collect();
        let r = schrodinger_residual(&grid, &phi, 0.0, &lat).unwrap();
        assert!((r - 2.0).abs() < 1e-7, "residual {r}");

        // Evanescent barrier solution, pinned at E = 5, V0 = 10.
        let k3 = 5.0_f64.sqrt();
        let grid: Vec<f64> = (0..3).map(|i| -0.0025 + i as f64 * h).collect();
        let phi: Vec<f64> = grid.iter().map(|&x| (k3 * x).sinh()).collect();
        let r = schrodinger_residual(&grid, &phi, 5.0, &lat).unwrap();
        assert!(r < 1e-8, "residual {r}");
    }

    #[test]
    fn schrodinger_residual_grid_errors() {
        let lat = lat_11(10.0);
        let phi = [0.0, 1.0, 2.0];
        // too few points
        assert!(schrodinger_residual(&[0.1, 0.2], &phi[..2], 1.0, &lat).is_err());
        // crosses the region boundary at x = c = 1
        let grid = [0.9, 1.0, 1.1];
        assert!(schrodinger_residual(&grid, &phi, 1.0, &lat).is_err());
        // non-uniform spacing
        let grid = [0.1, 0.2, 0.4];
        assert!(schrodinger_residual(&grid, &phi, 1.0, &lat).is_err());
        // not increasing
        let grid = [0.3, 0.2, 0.1];
        assert!(schrodinger_residual(&grid, &phi, 1.0, &lat).is_err());
    }

    #[test]
    fn values_are_send_and_sync() {
        fn check<T: Send + Sync>() {}
        check::<LatticeSpec>();
        check::<Wavenumbers>();
        check::<BasisPair>();
        check::<crate::action::ActionConstants>();
        check::<crate::action::ActionSample>();
        check::<crate::bloch::SuperpositionParams>();
        check::<crate::bloch::MobiusMap>();
        check::<crate::bloch::BlochAction>();
        check::<crate::spectrum::TransferMatrix>();
        check::<crate::spectrum::Band>();
    }

    #[test]
    fn recombination_rejects_singular_matrices() {
        let basis = BasisPair::pure(BasisKind::Trig { k: 1.0 }).unwrap();
        assert!(basis.recombine([[1.0, 2.0], [0.5, 1.0]]).is_err());
        assert!(basis.recombine([[1.0, 2.0], [3.0, 4.0]]).is_ok());
    }
}
