//! Band theory of the one-dimensional Kronig-Penney lattice, computed through
//! the reduced action of the quantum stationary Hamilton-Jacobi equation.
//!
//! The lattice is a periodic sequence of rectangular barriers of height `v0`:
//! wells of width `c` alternate with barriers of width `d`, so the period is
//! `e = c + d`. For each energy the crate constructs the reduced action
//! `S0(x)` region by region from pairs of real Schrodinger solutions, matches
//! it across interfaces up to its second derivative, and imposes Bloch
//! periodicity directly on `S0` rather than on the wave function. The
//! resulting dispersion relation `cos(Ke) = f(E)` is also evaluated in closed
//! form and cross-checked against an independent transfer-matrix oracle.
//!
//! Units: `hbar = 1` and `2m = 1` throughout, so the well wavenumber is
//! `sqrt(E)` and the barrier wavenumber is `sqrt(E - v0)` or `sqrt(v0 - E)`.
//!
//! Modules:
//!
//! - [`model`] — lattice geometry, energy regimes, wavenumbers, and the real
//!   basis-solution pairs per region.
//! - [`action`] — evaluation of the reduced action, its derivatives, the
//!   amplitude, and the wave-function reconstruction.
//! - [`matching`] — propagation of the action's integration constants across
//!   region interfaces (continuity of `S0`, `S0'`, `S0''`).
//! - [`bloch`] — the Bloch-periodicity machinery for the reduced action: the
//!   superposition parameters, the Mobius form, the constraint solver, and
//!   the end-to-end [`bloch::BlochAction`] pipeline.
//! - [`spectrum`] — closed-form dispersion, band finding, and the
//!   transfer-matrix oracle.
//! - [`cli`] — configuration and table/report generation for the `hjband`
//!   binary.
//!
//! ```
//! use hjband::model::LatticeSpec;
//! use hjband::spectrum::{dispersion_rhs, find_bands};
//!
//! let lat = LatticeSpec::new(10.0, 1.0, 1.0).unwrap();
//! let f = dispersion_rhs(13.0, &lat).unwrap();
//! assert!(f.abs() <= 1.0); // E = 13 lies in an allowed band
//! let bands = find_bands(&lat, 0.1, 40.0, 4000).unwrap();
//! assert!(bands.len() >= 3);
//! ```

pub mod action;
pub mod bloch;
pub mod cli;
pub mod matching;
pub mod model;
pub mod spectrum;

pub use bloch::{BlochAction, SuperpositionParams};
pub use model::LatticeSpec;
