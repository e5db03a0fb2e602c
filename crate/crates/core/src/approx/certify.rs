use std::fmt::Write as _;

use super::sequence::ApproxSequence;
use crate::bv::path::fmt;
use crate::error::{Error, Result};
use crate::linalg::bisect_increasing;

/// One diagnostic pair `(s̃ⱼ, kⱼ)` with its allowed residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CbvlTerm {
    pub s_tilde: f64,
    pub k_j: usize,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CbvlRow {
    pub term: CbvlTerm,
    /// `max_{k > kⱼ} |(x_k,u_k)(τʲ_k) - (x_k,u_k)(T)|`; `None` when no member applies
    pub residual: Option<f64>,
    /// members with `k > kⱼ` used for the row
    pub applicable: usize,
    /// members with `k > kⱼ` whose arc-length range ends below `s̃ⱼ`
    pub inapplicable: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CbvlReport {
    pub rows: Vec<CbvlRow>,
    pub tolerance: f64,
    pub within_bounds: bool,
    pub nonincreasing: bool,
}

impl CbvlReport {
    pub fn pass(&self) -> bool {
        self.within_bounds && self.nonincreasing && self.rows.iter().any(|r| r.residual.is_some())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (j, r) in self.rows.iter().enumerate() {
            let res = r.residual.map(fmt).unwrap_or_else(|| "n/a".into());
            let _ = writeln!(
                out,
                "j={} s_tilde={} k_j={} residual={} bound={} applicable={} inapplicable={}",
                j + 1,
                fmt(r.term.s_tilde),
                r.term.k_j,
                res,
                fmt(r.term.bound),
                r.applicable,
                r.inapplicable
            );
        }
        let _ = writeln!(out, "within_bounds={} nonincreasing={}", self.within_bounds, self.nonincreasing);
        let _ = writeln!(out, "cbvl: {}", if self.pass() { "PASS" } else { "FAIL" });
        out
    }
}

/// Solves `τ + Var_[0,τ](u) = s̃` by bisection; `None` when `s̃` exceeds `T + Var_[0,T](u)`.
pub fn arc_length_time(u: &crate::bv::ControlPath, s_tilde: f64) -> Result<Option<f64>> {
    let horizon = u.horizon();
    let total = horizon + u.total_variation(0.0, horizon)?;
    if s_tilde > total {
        return Ok(None);
    }
    if s_tilde <= 0.0 {
        return Ok(Some(0.0));
    }
    let f = |t: f64| t + u.cumulative_variation(t).unwrap_or(f64::INFINITY);
    Ok(Some(bisect_increasing(f, 0.0, horizon, s_tilde)))
}

/// Checks the terminal condition of a local-variation limit solution on a
/// built sequence: residuals must stay below their bounds and not increase in `j`.
pub fn check_cbvl(seq: &ApproxSequence, terms: &[CbvlTerm], tol: f64) -> Result<CbvlReport> {
    if terms.windows(2).any(|w| !(w[1].s_tilde > w[0].s_tilde && w[1].k_j > w[0].k_j)) {
        return Err(Error::Config("(s̃ⱼ) and (kⱼ) must increase strictly".into()));
    }
    let horizon = seq.horizon;
    let mut rows = Vec::with_capacity(terms.len());
    for term in terms {
        let mut residual: Option<f64> = None;
        let (mut applicable, mut inapplicable) = (0, 0);
        for m in seq.members.iter().filter(|m| m.k > term.k_j) {
            let Some(tau) = arc_length_time(&m.control, term.s_tilde)? else {
                inapplicable += 1;
                continue;
            };
            applicable += 1;
            let mut xs = seq.states_at(m, &[tau, horizon])?;
            let mut b = xs.pop().unwrap();
            let mut a = xs.pop().unwrap();
            a.extend(m.control.value(tau));
            b.extend(m.control.value(horizon));
            let r = crate::linalg::dist(&a, &b);
            residual = Some(residual.map_or(r, |x: f64| x.max(r)));
        }
        rows.push(CbvlRow {
            term: *term,
            residual,
            applicable,
            inapplicable,
        });
    }
    let within_bounds = rows
        .iter()
        .all(|r| r.residual.is_none_or(|x| x <= r.term.bound + tol));
    let covered: Vec<f64> = rows.iter().filter_map(|r| r.residual).collect();
    let nonincreasing = covered.windows(2).all(|w| w[1] <= w[0] + tol);
    Ok(CbvlReport {
        rows,
        tolerance: tol,
        within_bounds,
        nonincreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bv::{ControlPath, ControlSet, OrdinaryControl};
    use crate::scenarios::{clipped_spiral, example_dynamics, spiral_clip_time};
    use crate::ApproxSequence;

    fn spiral_terms(horizon: f64, js: &[usize]) -> Vec<CbvlTerm> {
        let u = crate::scenarios::spiral_control(horizon).unwrap();
        js.iter()
            .map(|&j| {
                let t = spiral_clip_time(horizon, j);
                CbvlTerm {
                    s_tilde: t + u.total_variation(0.0, t).unwrap(),
                    k_j: j,
                    bound: (-t / (horizon * (horizon - t))).exp(),
                }
            })
            .collect()
    }

    fn sequence(controls: Vec<(usize, ControlPath)>) -> ApproxSequence {
        let v = OrdinaryControl::none(1.0);
        ApproxSequence::from_controls(&example_dynamics(), &[1.0, 0.0, 1.0], &v, controls, 8192).unwrap()
    }

    #[test]
    fn clipped_spirals_pass() {
        let seq = sequence([1, 2, 3, 4].iter().map(|&k| (k, clipped_spiral(1.0, k).unwrap())).collect());
        let rep = check_cbvl(&seq, &spiral_terms(1.0, &[1, 2, 3]), 1e-6).unwrap();
        assert!(rep.pass(), "{}", rep.render());
        assert_eq!(rep.rows[2].applicable, 1);
    }

    #[test]
    fn wrong_terminal_point_fails() {
        let set = ControlSet::unit_disc();
        let controls = [2, 3, 4]
            .iter()
            .map(|&k| {
                let t = spiral_clip_time(1.0, k);
                let mut spec = clipped_spiral(1.0, k).unwrap().spec().clone();
                // replace the constant tail by a straight run to -u(T)
                let last = spec.segments.len() - 1;
                spec.segments[last] = crate::Segment::Affine {
                    start: vec![1.0, 0.0],
                    end: vec![-1.0, 0.0],
                };
                assert_eq!(spec.breakpoints[last], t);
                spec.set = set.clone();
                (k, ControlPath::new(spec).unwrap())
            })
            .collect();
        let seq = sequence(controls);
        let rep = check_cbvl(&seq, &spiral_terms(1.0, &[1, 2]), 1e-6).unwrap();
        assert!(!rep.pass());
        assert!(rep.rows.iter().all(|r| r.residual.unwrap() > 1.0));
    }

    #[test]
    fn unreachable_arc_length_is_inapplicable() {
        let seq = sequence(vec![(2, clipped_spiral(1.0, 1).unwrap())]);
        let term = CbvlTerm {
            s_tilde: 1e6,
            k_j: 1,
            bound: 1.0,
        };
        let rep = check_cbvl(&seq, &[term], 1e-9).unwrap();
        assert_eq!(rep.rows[0].inapplicable, 1);
        assert!(rep.rows[0].residual.is_none());
        assert!(!rep.pass());
    }
}
