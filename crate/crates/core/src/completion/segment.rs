use std::sync::Arc;

use super::curve::{SpaceTimePath, StPiece};
use crate::bv::{ControlPath, Piece};
use crate::error::{Error, Result};
use crate::linalg::dist;

/// Lengths produced by completing `u|[a,b]` with a terminal excursion to `ū₁`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentLengths {
    pub a: f64,
    pub b: f64,
    /// `Var_[a,b](u)`
    pub variation: f64,
    /// `|u(b) - ū₁|`
    pub excursion: f64,
    /// arc length at which the curve sits at `(b, ū₁)`
    pub s_marker: f64,
    /// arc length at which the curve is back at `(b, u(b))`
    pub s_tilde: f64,
}

impl SegmentLengths {
    pub fn lower_bound(&self) -> f64 {
        (self.b - self.a) + self.variation + self.excursion
    }

    /// `(b-a) + 2C(V + |u(b) - ū₁|)` with `C = 1`.
    pub fn upper_bound(&self) -> f64 {
        (self.b - self.a) + 2.0 * (self.variation + self.excursion)
    }

    pub fn bounds_hold(&self, tol: f64) -> bool {
        self.lower_bound() <= self.s_marker + tol
            && self.s_marker <= self.s_tilde
            && self.s_tilde <= self.upper_bound() + tol
    }
}

#[derive(Debug, Clone)]
pub struct SegmentCompletion {
    pub curve: SpaceTimePath,
    pub lengths: SegmentLengths,
    /// `(τ, s)` with `(φ₀, φ)(s) = (τ, u(τ))` at the jumps inside `[a, b)`
    pub anchors: Vec<(f64, f64)>,
}

/// Graph of `u|[a,b]` walked in arc length with straight bridges
/// `u(τ⁻) → u(τ) → u(τ⁺)` at jumps, followed by the out-and-back excursion
/// `u(b) → ū₁ → u(b)`.
pub fn complete_segment(u: &Arc<ControlPath>, a: f64, b: f64, ubar1: &[f64]) -> Result<SegmentCompletion> {
    let mut curve = SpaceTimePath::new(u.dim(), Some(Arc::clone(u)));
    let (lengths, anchors) = append_segment(&mut curve, u, a, b, ubar1)?;
    Ok(SegmentCompletion {
        curve,
        lengths,
        anchors,
    })
}

/// Appends the completion of `u|[a,b]` to `curve`; reported lengths and anchors are local.
pub(crate) fn append_segment(
    curve: &mut SpaceTimePath,
    u: &ControlPath,
    a: f64,
    b: f64,
    ubar1: &[f64],
) -> Result<(SegmentLengths, Vec<(f64, f64)>)> {
    if !(0.0 <= a && a < b && b <= u.horizon()) {
        return Err(Error::Domain(format!("segment [{a}, {b}] not inside [0, {}]", u.horizon())));
    }
    if !u.set().contains(ubar1) {
        return Err(Error::Domain("ū₁ outside the control set".into()));
    }
    let variation = u.total_variation(a, b)?;
    if !variation.is_finite() {
        return Err(Error::Precondition(format!("Var_[{a},{b}](u) is not finite")));
    }
    let base = curve.length();
    let mut anchors = Vec::new();
    for piece in u.pieces(a, b) {
        match piece {
            Piece::Smooth { segment, t0, t1 } => {
                curve.push(StPiece::Graph { segment, t0, t1 })?;
            }
            Piece::Jump {
                index,
                left_half,
                right_half,
            } => {
                let j = &u.jumps()[index];
                if left_half {
                    curve.push(StPiece::Straight {
                        t0: j.time,
                        t1: j.time,
                        u0: j.left.clone(),
                        u1: j.value.clone(),
                    })?;
                }
                if j.time < b {
                    anchors.push((j.time, curve.length() - base));
                }
                if right_half {
                    curve.push(StPiece::Straight {
                        t0: j.time,
                        t1: j.time,
                        u0: j.value.clone(),
                        u1: j.right.clone(),
                    })?;
                }
            }
        }
    }
    let ub = u.value(b);
    let excursion = dist(&ub, ubar1);
    curve.push(StPiece::Straight {
        t0: b,
        t1: b,
        u0: ub.clone(),
        u1: ubar1.to_vec(),
    })?;
    let s_marker = curve.length() - base;
    curve.push(StPiece::Straight {
        t0: b,
        t1: b,
        u0: ubar1.to_vec(),
        u1: ub,
    })?;
    let s_tilde = curve.length() - base;
    Ok((
        SegmentLengths {
            a,
            b,
            variation,
            excursion,
            s_marker,
            s_tilde,
        },
        anchors,
    ))
}
