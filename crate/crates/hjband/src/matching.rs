//! Propagation of the reduced action's integration constants across a
//! region interface by continuity of `S0`, `S0'`, and `S0''`.
//!
//! Given the value, slope `sigma`, and curvature `tau` of the action on the
//! known side, the constants of the target basis follow in closed form. With
//! `u = mu g1/g2 + nu` evaluated at the interface,
//!
//! ```text
//! u  = -(tau + 2 sigma g2'/g2) / (2 sigma^2)
//! mu = -sigma (1 + u^2) g2^2 / W
//! nu = u - mu g1 / g2
//! ```
//!
//! and `l` absorbs whatever offset keeps the value itself continuous. The
//! expressions below are the same solution rearranged so no division by
//! `g2` remains; they stay stable when the interface sits on a pole of the
//! target arctangent (`g2 = 0`).

use thiserror::Error;

use crate::action::{eval_action, ActionConstants, ActionError};
use crate::model::{BasisKind, BasisPair};

#[derive(Debug, Error)]
pub enum MatchingError {
    #[error("target basis cannot reproduce the derivative signature at x = {x}")]
    Degenerate { x: f64 },
    #[error(transparent)]
    Constants(#[from] ActionError),
}

/// Constants on both sides of one interface, with the interface position.
/// The action and its first two derivatives agree there by construction.
#[derive(Debug, Clone, Copy)]
pub struct InterfaceSolution {
    pub left: ActionConstants,
    pub right: ActionConstants,
    pub interface_x: f64,
}

impl InterfaceSolution {
    /// Absolute mismatches of `(S0, S0', S0'')` at the interface.
    pub fn residuals(&self, basis_left: &BasisPair, basis_right: &BasisPair) -> [f64; 3] {
        let a = eval_action(self.interface_x, basis_left, &self.left);
        let b = eval_action(self.interface_x, basis_right, &self.right);
        [
            (a.s0 - b.s0).abs(),
            (a.ds0 - b.ds0).abs(),
            (a.d2s0 - b.d2s0).abs(),
        ]
    }
}

/// Finds the target-side constants that continue `(S0, S0', S0'')` across
/// the interface at `x`.
///
/// When the interface is the origin and both pairs are pure, each basis has
/// `g1(0) = 0`, `g2(0) = 1`, `g2'(0) = 0` and slope `g1'(0)` equal to its
/// wavenumber (or one for the affine pair), so the solution collapses to
/// `nu` and `l` unchanged with `mu` rescaled by the slope ratio. That exact
/// path is taken first; every other case goes through the generic solve.
pub fn propagate_constants(
    from: &ActionConstants,
    basis_from: &BasisPair,
    basis_to: &BasisPair,
    x: f64,
) -> Result<ActionConstants, MatchingError> {
    if basis_from == basis_to {
        return Ok(*from);
    }
    if x == basis_from.origin() && x == basis_to.origin() {
        if let (Some(slope_from), Some(slope_to)) =
            (pure_origin_slope(basis_from), pure_origin_slope(basis_to))
        {
            let mu = from.mu() * slope_from / slope_to;
            return Ok(ActionConstants::new(mu, from.nu(), from.l())?);
        }
    }
    generic_propagate(from, basis_from, basis_to, x)
}

/// Slope of the first pure basis function at the origin, if the pair is
/// unrecombined: `k` for the oscillatory and evanescent pairs, `1` for the
/// affine pair.
fn pure_origin_slope(basis: &BasisPair) -> Option<f64> {
    let (top, bot) = basis.rows();
    if top != [1.0, 0.0] || bot != [0.0, 1.0] {
        return None;
    }
    Some(match basis.kind() {
        BasisKind::Trig { k } | BasisKind::Hyp { k } => k,
        BasisKind::Affine => 1.0,
    })
}

fn generic_propagate(
    from: &ActionConstants,
    basis_from: &BasisPair,
    basis_to: &BasisPair,
    x: f64,
) -> Result<ActionConstants, MatchingError> {
    let known = eval_action(x, basis_from, from);
    let sigma = known.ds0;
    let tau = known.d2s0;
    if !sigma.is_finite() || sigma == 0.0 || !tau.is_finite() {
        return Err(MatchingError::Degenerate { x });
    }
    let g = basis_to.eval(x);
    let w = basis_to.wronskian();

    let delta = -tau / (2.0 * sigma * sigma);
    let q = delta * g.f2 - g.df2 / sigma;
    let mu = -sigma * (g.f2 * g.f2 + q * q) / w;
    let nu = g.df1 * g.df2 / (sigma * w)
        + sigma * g.f1 * g.f2 / w
        + delta
        + tau * g.f1 * g.df2 / (sigma * sigma * w)
        + tau * tau * g.f1 * g.f2 / (4.0 * sigma.powi(3) * w);
    if !mu.is_finite() || !nu.is_finite() {
        return Err(MatchingError::Degenerate { x });
    }

    // Value continuity fixes l, absorbing any pi offset from the branch
    // bookkeeping of the target basis.
    let probe = eval_action(x, basis_to, &ActionConstants::new(mu, nu, 0.0)?);
    let l = known.s0 - probe.s0;
    Ok(ActionConstants::new(mu, nu, l)?)
}

/// Convenience wrapper returning both sides together.
pub fn solve_interface(
    left: &ActionConstants,
    basis_left: &BasisPair,
    basis_right: &BasisPair,
    interface_x: f64,
) -> Result<InterfaceSolution, MatchingError> {
    let right = propagate_constants(left, basis_left, basis_right, interface_x)?;
    Ok(InterfaceSolution {
        left: *left,
        right,
        interface_x,
    })
}
