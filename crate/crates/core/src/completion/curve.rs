use std::sync::Arc;

use super::spacetime::{Horizon, SpaceTimeControl};
use crate::bv::{ControlPath, OrdinaryControl};
use crate::error::{Error, Result};
use crate::linalg::{dist, lerp};

/// Exact unit-speed piece of a space-time curve.
#[derive(Debug, Clone, PartialEq)]
pub enum StPiece {
    /// Straight space-time segment; `t0 == t1` gives a bridge at fixed time.
    Straight { t0: f64, t1: f64, u0: Vec<f64>, u1: Vec<f64> },
    /// Graph of segment `segment` of the owning control path over `[t0, t1]`.
    Graph { segment: usize, t0: f64, t1: f64 },
    /// Circle at fixed time `t`, angle `theta0 + sweep·λ`.
    Arc {
        t: f64,
        center: [f64; 2],
        radius: f64,
        theta0: f64,
        sweep: f64,
    },
}

/// Concatenation of exact pieces, parametrized by arc length `s`.
#[derive(Debug, Clone)]
pub struct SpaceTimePath {
    m: usize,
    control: Option<Arc<ControlPath>>,
    pieces: Vec<StPiece>,
    starts: Vec<f64>,
    lengths: Vec<f64>,
}

impl SpaceTimePath {
    pub fn new(m: usize, control: Option<Arc<ControlPath>>) -> Self {
        SpaceTimePath {
            m,
            control,
            pieces: Vec::new(),
            starts: Vec::new(),
            lengths: Vec::new(),
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn pieces(&self) -> &[StPiece] {
        &self.pieces
    }

    pub fn length(&self) -> f64 {
        match (self.starts.last(), self.lengths.last()) {
            (Some(s), Some(l)) => s + l,
            _ => 0.0,
        }
    }

    fn control(&self) -> &ControlPath {
        self.control.as_deref().expect("graph piece without a control path")
    }

    pub fn piece_length(&self, p: &StPiece) -> f64 {
        match p {
            StPiece::Straight { t0, t1, u0, u1 } => (t1 - t0) + dist(u0, u1),
            StPiece::Graph { segment, t0, t1 } => {
                let prof = self.control().segment_profile(*segment, *t0, *t1);
                prof.arc_to(*t1)
            }
            StPiece::Arc { radius, sweep, .. } => (radius * sweep).abs(),
        }
    }

    /// Appends a piece and returns its length. Zero-length pieces are dropped.
    pub fn push(&mut self, p: StPiece) -> Result<f64> {
        match &p {
            StPiece::Straight { t0, t1, u0, u1 } => {
                if u0.len() != self.m || u1.len() != self.m || t1 < t0 {
                    return Err(Error::Invariant("straight piece has wrong shape or decreasing time".into()));
                }
            }
            StPiece::Graph { segment, t0, t1 } => {
                let c = self
                    .control
                    .as_deref()
                    .ok_or_else(|| Error::Invariant("graph piece needs a control path".into()))?;
                let (a, b) = c.segment_interval(*segment);
                if !(a <= *t0 && t0 <= t1 && *t1 <= b) {
                    return Err(Error::Invariant("graph piece outside its segment".into()));
                }
            }
            StPiece::Arc { .. } => {
                if self.m != 2 {
                    return Err(Error::Invariant("arc pieces need a planar control".into()));
                }
            }
        }
        let len = self.piece_length(&p);
        if !len.is_finite() {
            return Err(Error::Precondition("piece of infinite length".into()));
        }
        if len > 0.0 {
            self.starts.push(self.length());
            self.lengths.push(len);
            self.pieces.push(p);
        }
        Ok(len)
    }

    /// Point of piece `k` at local arc length `ell`.
    fn piece_point(&self, k: usize, ell: f64) -> (f64, Vec<f64>) {
        let len = self.lengths[k];
        match &self.pieces[k] {
            StPiece::Straight { t0, t1, u0, u1 } => {
                let lam = (ell / len).clamp(0.0, 1.0);
                let t = if t0 == t1 { *t0 } else { lerp(&[*t0], &[*t1], lam)[0] };
                (t, lerp(u0, u1, lam))
            }
            StPiece::Graph { segment, t0, t1 } => {
                let c = self.control();
                let prof = c.segment_profile(*segment, *t0, *t1);
                let t = if ell >= len { *t1 } else { prof.invert_arc(ell) };
                (t, c.segment_value(*segment, t))
            }
            StPiece::Arc {
                t,
                center,
                radius,
                theta0,
                sweep,
            } => {
                let lam = (ell / len).clamp(0.0, 1.0);
                let th = theta0 + sweep * lam;
                (*t, vec![center[0] + radius * th.cos(), center[1] + radius * th.sin()])
            }
        }
    }

    /// `(φ₀, φ)(s)`, clamped to `[0, length]`.
    pub fn eval(&self, s: f64) -> (f64, Vec<f64>) {
        if self.pieces.is_empty() {
            return (0.0, vec![0.0; self.m]);
        }
        let k = self.starts.partition_point(|&x| x <= s).saturating_sub(1);
        self.piece_point(k, s - self.starts[k])
    }

    /// Samples with cells of length at most `ds`; piece ends are always nodes.
    /// `ψ = v ∘ φ₀`.
    pub fn sample(&self, ds: f64, v: &OrdinaryControl, horizon: Horizon) -> Result<SpaceTimeControl> {
        if !(ds > 0.0) {
            return Err(Error::Config("sampling step must be positive".into()));
        }
        if self.pieces.is_empty() {
            return Err(Error::Invariant("empty space-time curve".into()));
        }
        let mut s = Vec::new();
        let mut phi0 = Vec::new();
        let mut phi = Vec::new();
        let mut psi = Vec::new();
        let mut push = |sv: f64, t: f64, u: &[f64]| {
            s.push(sv);
            phi0.push(t);
            phi.extend_from_slice(u);
            psi.extend_from_slice(v.value(t));
        };
        let (t0, u0) = self.piece_point(0, 0.0);
        push(0.0, t0, &u0);
        for k in 0..self.pieces.len() {
            let len = self.lengths[k];
            let start = self.starts[k];
            let cells = (len / ds).ceil().max(1.0) as usize;
            match &self.pieces[k] {
                StPiece::Graph { segment, t0, t1 } => {
                    let c = self.control();
                    let prof = c.segment_profile(*segment, *t0, *t1);
                    for i in 1..=cells {
                        let (sv, t) = if i == cells {
                            (start + len, *t1)
                        } else {
                            let ell = len * (i as f64 / cells as f64);
                            (start + ell, prof.invert_arc(ell))
                        };
                        push(sv, t, &c.segment_value(*segment, t));
                    }
                }
                _ => {
                    for i in 1..=cells {
                        let ell = if i == cells { len } else { len * (i as f64 / cells as f64) };
                        let (t, u) = self.piece_point(k, ell);
                        push(start + ell, t, &u);
                    }
                }
            }
        }
        SpaceTimeControl::new(s, phi0, phi, psi, self.m, v.dim(), horizon)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::completion::spacetime::verify_feasibility;
    use std::f64::consts::PI;

    #[test]
    fn drift_then_circle_is_unit_speed() {
        let mut p = SpaceTimePath::new(2, None);
        p.push(StPiece::Straight {
            t0: 0.0,
            t1: 1.0,
            u0: vec![1.0, 0.0],
            u1: vec![1.0, 0.0],
        })
        .unwrap();
        p.push(StPiece::Arc {
            t: 1.0,
            center: [0.0, 0.0],
            radius: 1.0,
            theta0: 0.0,
            sweep: 2.0 * PI,
        })
        .unwrap();
        assert!((p.length() - (1.0 + 2.0 * PI)).abs() < 1e-14);
        let stc = p.sample(1e-3, &OrdinaryControl::none(1.0), Horizon::Finite(p.length())).unwrap();
        let rep = verify_feasibility(&stc, 1e-6);
        assert!(rep.passed, "{rep:?}");
        let (t, u) = p.eval(1.0 + PI);
        assert_eq!(t, 1.0);
        assert!((u[0] + 1.0).abs() < 1e-12 && u[1].abs() < 1e-12);
    }

    #[test]
    fn graph_piece_nodes_land_on_exact_arc_length() {
        let u = ControlPath::polyline(
            crate::bv::ControlSet::unit_disc(),
            vec![0.0, 1.0],
            vec![vec![0.0, 0.0], vec![0.6, 0.8]],
        )
        .unwrap();
        let mut p = SpaceTimePath::new(2, Some(Arc::new(u)));
        let len = p.push(StPiece::Graph { segment: 0, t0: 0.0, t1: 1.0 }).unwrap();
        assert_eq!(len, 2.0);
        let (t, _) = p.eval(1.0);
        assert!((t - 0.5).abs() < 1e-14);
    }

    #[test]
    fn zero_length_pieces_are_dropped() {
        let mut p = SpaceTimePath::new(1, None);
        let l = p
            .push(StPiece::Straight {
                t0: 0.5,
                t1: 0.5,
                u0: vec![0.0],
                u1: vec![0.0],
            })
            .unwrap();
        assert_eq!(l, 0.0);
        assert!(p.pieces().is_empty());
    }
}
