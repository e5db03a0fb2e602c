use std::f64::consts::PI;

use crate::bv::{ControlPath, ControlPathSpec, ControlSet, Jump, OrdinaryControl, Segment};
use crate::completion::{Horizon, SpaceTimeControl, SpaceTimePath, StPiece};
use crate::error::{Error, Result};
use crate::linalg::norm;

fn check_horizon(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Config(format!("horizon T = {t} must be positive")));
    }
    Ok(())
}

/// `u(t) = (cos θ, sin θ)`, `θ = 1/(T-t) - 1/T`, with `u(T) = (1, 0)`.
pub fn spiral_control(horizon: f64) -> Result<ControlPath> {
    check_horizon(horizon)?;
    ControlPath::new(ControlPathSpec {
        horizon,
        set: ControlSet::unit_disc(),
        initial: vec![1.0, 0.0],
        breakpoints: vec![0.0, horizon],
        segments: vec![Segment::Spiral {
            horizon,
            offset: 1.0 / horizon,
        }],
        jumps: Vec::new(),
        terminal: Some(vec![1.0, 0.0]),
    })
}

/// `t_k = 2kπT²/(1 + 2kπT)`, where the spiral passes through `(1, 0)` for the k-th time.
pub fn spiral_clip_time(horizon: f64, k: usize) -> f64 {
    let a = 2.0 * k as f64 * PI * horizon;
    a * horizon / (1.0 + a)
}

/// The spiral on `[0, t_k]`, frozen at `u(t_k)` afterwards.
pub fn clipped_spiral(horizon: f64, k: usize) -> Result<ControlPath> {
    check_horizon(horizon)?;
    if k == 0 {
        return Err(Error::Config("clip index must be >= 1".into()));
    }
    let tk = spiral_clip_time(horizon, k);
    let spiral = Segment::Spiral {
        horizon,
        offset: 1.0 / horizon,
    };
    let at_tk = spiral.value(0.0, tk, tk);
    ControlPath::new(ControlPathSpec {
        horizon,
        set: ControlSet::unit_disc(),
        initial: vec![1.0, 0.0],
        breakpoints: vec![0.0, tk, horizon],
        segments: vec![spiral, Segment::constant(at_tk)],
        jumps: Vec::new(),
        terminal: None,
    })
}

/// `u_k = (1, 0)` on `[0, T - 1/k]`, then `(cos θ, sin θ)` with `θ = 1/(T-t) - k`;
/// `u_k(T) = (1, 0)`. Needs `kT > 1`.
pub fn example_ii_control(horizon: f64, k: usize) -> Result<ControlPath> {
    check_horizon(horizon)?;
    let kf = k as f64;
    if !(kf * horizon > 1.0) {
        return Err(Error::Config(format!("example (ii) control needs kT > 1 (k = {k}, T = {horizon})")));
    }
    let t0 = horizon - 1.0 / kf;
    let e1 = vec![1.0, 0.0];
    ControlPath::new(ControlPathSpec {
        horizon,
        set: ControlSet::unit_disc(),
        initial: e1.clone(),
        breakpoints: vec![0.0, t0, horizon],
        segments: vec![Segment::constant(e1.clone()), Segment::Spiral { horizon, offset: kf }],
        jumps: Vec::new(),
        terminal: Some(e1),
    })
}

/// `(1, 0)` up to `T/2`, a jump through `(1/2, 1/2)` to `(0, 1)`, then `(0, 1)`.
pub fn one_jump_control(horizon: f64) -> Result<ControlPath> {
    check_horizon(horizon)?;
    let tau = 0.5 * horizon;
    let (a, b) = (vec![1.0, 0.0], vec![0.0, 1.0]);
    ControlPath::new(ControlPathSpec {
        horizon,
        set: ControlSet::unit_disc(),
        initial: a.clone(),
        breakpoints: vec![0.0, tau, horizon],
        segments: vec![Segment::constant(a.clone()), Segment::constant(b.clone())],
        jumps: vec![Jump {
            time: tau,
            left: a,
            value: vec![0.5, 0.5],
            right: b,
        }],
        terminal: None,
    })
}

/// `(φ₀, φ)(s) = (s, 1, 0)` on `[0, T)`, then `(T, cos(s-T), sin(s-T))` up to `T + Λ`.
pub fn ex1f1_curve(horizon: f64, lambda: f64) -> Result<SpaceTimePath> {
    check_horizon(horizon)?;
    if !(lambda >= 0.0) {
        return Err(Error::Config("loop length must be nonnegative".into()));
    }
    let e1 = vec![1.0, 0.0];
    let mut p = SpaceTimePath::new(2, None);
    p.push(StPiece::Straight {
        t0: 0.0,
        t1: horizon,
        u0: e1.clone(),
        u1: e1,
    })?;
    p.push(StPiece::Arc {
        t: horizon,
        center: [0.0, 0.0],
        radius: 1.0,
        theta0: 0.0,
        sweep: lambda,
    })?;
    Ok(p)
}

/// [`ex1f1_curve`] sampled with step at most `ds`, truncated at `T + Λ`.
pub fn ex1f1_stc(horizon: f64, lambda: f64, ds: f64) -> Result<SpaceTimeControl> {
    let p = ex1f1_curve(horizon, lambda)?;
    p.sample(
        ds,
        &OrdinaryControl::none(horizon),
        Horizon::Truncated {
            s_max: horizon + lambda,
            divergent: true,
        },
    )
}

/// Closed-form `ξ₃(s) = e^{-(s-T)}` on `[T, ∞)` and 1 before.
pub fn ex1f1_xi3(horizon: f64, s: f64) -> f64 {
    if s <= horizon {
        1.0
    } else {
        (horizon - s).exp()
    }
}

/// `x₃(t) = exp(-∫₀ᵗ (u₁u̇₂ - u₂u̇₁))` for a control on the unit circle,
/// evaluated through the exact winding angle.
#[derive(Debug, Clone)]
pub struct X3Oracle {
    path: ControlPath,
    /// winding accumulated up to each breakpoint
    prefix: Vec<f64>,
}

const CIRCLE_TOL: f64 = 1e-9;

fn on_circle(p: &[f64]) -> bool {
    (norm(p) - 1.0).abs() <= CIRCLE_TOL
}

fn poly(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ck| acc * t + ck)
}

fn winding(seg: &Segment, a: f64, t: f64) -> f64 {
    match seg {
        Segment::Affine { .. } => 0.0,
        Segment::Spiral { horizon, .. } => (t - a) / ((horizon - t) * (horizon - a)),
        Segment::CircleAngle { coeffs, .. } => poly(coeffs, t) - poly(coeffs, a),
    }
}

/// Builds the oracle; errors if `u` jumps or leaves the unit circle.
pub fn closed_form_x3(u: &ControlPath) -> Result<X3Oracle> {
    if u.dim() != 2 {
        return Err(Error::Domain("x₃ oracle needs a planar control".into()));
    }
    if !u.discontinuity_set().is_empty() {
        return Err(Error::Domain("x₃ oracle needs a control without jumps".into()));
    }
    let mut prefix = vec![0.0];
    for (j, seg) in u.segments().iter().enumerate() {
        let (a, b) = u.segment_interval(j);
        let ok = match seg {
            Segment::Affine { start, end } => start == end && on_circle(start),
            Segment::Spiral { .. } => true,
            Segment::CircleAngle { center, radius, .. } => {
                center.iter().all(|&c| c == 0.0) && (radius - 1.0).abs() <= CIRCLE_TOL
            }
        };
        if !ok {
            return Err(Error::Domain(format!("x₃ oracle invalid: segment {j} leaves the unit circle")));
        }
        let w = if u.is_divergent() && j + 1 == u.segment_count() {
            f64::INFINITY
        } else {
            winding(seg, a, b)
        };
        prefix.push(prefix[j] + w);
    }
    Ok(X3Oracle { path: u.clone(), prefix })
}

impl X3Oracle {
    /// Winding `∫₀ᵗ (u₁u̇₂ - u₂u̇₁)`.
    pub fn winding(&self, t: f64) -> f64 {
        let u = &self.path;
        if t >= u.horizon() {
            return *self.prefix.last().unwrap();
        }
        let j = u.segment_index(t.max(0.0));
        let (a, _) = u.segment_interval(j);
        self.prefix[j] + winding(&u.segments()[j], a, t)
    }

    pub fn eval(&self, t: f64) -> f64 {
        (-self.winding(t)).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dist;

    #[test]
    fn spiral_fixture() {
        let u = spiral_control(1.0).unwrap();
        assert_eq!(u.value(0.0), vec![1.0, 0.0]);
        assert!(u.is_divergent());
        let t = 0.7;
        let v = u.total_variation(0.0, t).unwrap();
        assert!((v - t / (1.0 - t)).abs() < 1e-12);
        for k in [1, 2, 5] {
            let tk = spiral_clip_time(1.0, k);
            assert!(dist(&u.value(tk), &[1.0, 0.0]) < 1e-9);
        }
    }

    #[test]
    fn oracle_values() {
        let t_end = 2.0;
        let o = closed_form_x3(&spiral_control(t_end).unwrap()).unwrap();
        assert_eq!(o.eval(0.0), 1.0);
        assert!((o.eval(1.0) - (-1.0 / t_end).exp()).abs() < 1e-15);
        assert_eq!(o.eval(t_end), 0.0);
        let c = closed_form_x3(&ControlPath::constant(ControlSet::unit_disc(), 1.0, vec![0.0, 1.0]).unwrap()).unwrap();
        assert_eq!(c.eval(0.6), 1.0);
    }

    #[test]
    fn oracle_rejects_paths_off_the_circle() {
        let u = ControlPath::polyline(ControlSet::unit_disc(), vec![0.0, 1.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]])
            .unwrap();
        assert!(matches!(closed_form_x3(&u), Err(Error::Domain(_))));
    }

    #[test]
    fn example_ii_is_continuous_and_divergent() {
        let u = example_ii_control(1.0, 5).unwrap();
        assert!(u.is_divergent());
        assert!(dist(&u.right_limit(0.8), &[1.0, 0.0]) < 1e-15);
        assert!(example_ii_control(1.0, 1).is_err());
    }

    #[test]
    fn clipped_spiral_freezes_at_one_zero() {
        let u = clipped_spiral(1.0, 3).unwrap();
        assert!(dist(&u.value(1.0), &[1.0, 0.0]) < 1e-9);
        assert!(!u.is_divergent());
    }
}
