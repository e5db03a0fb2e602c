use super::dynamics::Dynamics;
use super::rk4::{arc_length_grid, caratheodory, integrate_spacetime, with_nodes};
use super::trajectory::{Param, Trajectory};
use crate::bv::{Clock, ControlPath, OrdinaryControl};
use crate::completion::{CompletionResult, SpaceTimeControl};
use crate::error::{Error, Result};
use crate::linalg::dist;

/// How `x(T)` is read off `ξ`.
#[derive(Debug, Clone, PartialEq)]
pub enum TerminalRule {
    /// `x(T) = ξ(S)`.
    Finite(f64),
    /// Limit of `ξ(sⱼ)` along an increasing sequence; the last covered term is used.
    Sequence(Vec<f64>),
}

impl TerminalRule {
    pub fn for_completion(c: &CompletionResult) -> Self {
        match c.horizon {
            crate::completion::Horizon::Finite(s) => TerminalRule::Finite(s),
            _ => TerminalRule::Sequence(c.diagnostic_s()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GcSolution {
    /// `x = ξ ∘ σ` on the requested grid; the node `T` (if requested) holds the terminal value
    pub trajectory: Trajectory,
    pub terminal: Vec<f64>,
    /// `|ξ(s_last) - ξ(s_prev)|` along the sequence (0 for a finite horizon)
    pub terminal_residual: f64,
}

fn terminal_value(xi: &Trajectory, rule: &TerminalRule) -> Result<(Vec<f64>, f64)> {
    match rule {
        TerminalRule::Finite(s) => {
            if *s > xi.end() * (1.0 + 1e-12) {
                return Err(Error::Domain(format!("S = {s} lies beyond the ξ grid (ends at {})", xi.end())));
            }
            Ok((xi.eval(*s), 0.0))
        }
        TerminalRule::Sequence(seq) => {
            let covered: Vec<f64> = seq.iter().copied().filter(|&s| s <= xi.end()).collect();
            match covered.as_slice() {
                [] => Err(Error::Domain("no term of the diagnostic sequence lies on the ξ grid".into())),
                [s] => Ok((xi.eval(*s), f64::INFINITY)),
                [.., a, b] => {
                    let (xa, xb) = (xi.eval(*a), xi.eval(*b));
                    let r = dist(&xa, &xb);
                    Ok((xb, r))
                }
            }
        }
    }
}

/// `x(t) = ξ(σ(t))` on `grid`; at `t = T` the terminal rule applies.
pub fn gc_solution(xi: &Trajectory, clock: &Clock, grid: &[f64], terminal: &TerminalRule) -> Result<GcSolution> {
    if xi.param() != Param::PseudoTime {
        return Err(Error::Config("gc_solution needs ξ parametrized by pseudo-time".into()));
    }
    let horizon = clock.horizon();
    let (term, residual) = terminal_value(xi, terminal)?;
    let slack = 1e-12 * xi.end().max(1.0);
    let mut states = Vec::with_capacity(grid.len() * xi.dim());
    for &t in grid {
        if t == horizon {
            states.extend_from_slice(&term);
            continue;
        }
        let s = clock.eval(t)?;
        if s > xi.end() + slack {
            return Err(Error::Domain(format!("σ({t}) = {s} exits the ξ grid (ends at {})", xi.end())));
        }
        states.extend(xi.eval(s));
    }
    Ok(GcSolution {
        trajectory: Trajectory::new(Param::Time, grid.to_vec(), states, xi.dim())?,
        terminal: term,
        terminal_residual: residual,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    pub horizon: f64,
    pub test_points: usize,
    pub deviation: f64,
}

/// Maximum test-point count of [`consistency_check`].
pub const CONSISTENCY_POINTS: usize = 2000;

/// Sup-distance on `[0, t*]` between the graph-completion solution and the
/// Carathéodory solution, at time nodes of the completion grid.
pub fn consistency_check(
    dyn_: &Dynamics,
    x0: &[f64],
    u: &ControlPath,
    v: &OrdinaryControl,
    completion: &CompletionResult,
    t_star: f64,
    cells: usize,
) -> Result<ConsistencyReport> {
    if !(t_star > 0.0 && t_star < u.horizon()) {
        return Err(Error::Domain(format!("t* = {t_star} must lie in (0, T)")));
    }
    let mut times: Vec<f64> = completion
        .stc
        .time_column()
        .iter()
        .copied()
        .filter(|&t| t <= t_star.min(completion.clock.t_end()))
        .collect();
    times.dedup();
    let stride = times.len().div_ceil(CONSISTENCY_POINTS).max(1);
    let mut test: Vec<f64> = times.iter().copied().step_by(stride).collect();
    if test.last() != times.last() {
        test.extend(times.last().copied());
    }

    let xi = integrate_spacetime(dyn_, x0, &completion.stc)?;
    let gc = gc_solution(&xi, &completion.clock, &test, &TerminalRule::for_completion(completion))?;
    let grid = with_nodes(&arc_length_grid(u, 0.0, t_star, cells)?, &test);
    let x = caratheodory(dyn_, x0, u, v, &grid)?;
    let deviation = gc.trajectory.sup_distance(&x, 0.0, t_star);
    Ok(ConsistencyReport {
        horizon: t_star,
        test_points: test.len(),
        deviation,
    })
}

/// `sup_s |ξ_h(s) - ξ(s)|` over the span shared by all controls, one entry per perturbed control.
pub fn uniform_convergence_probe(
    dyn_: &Dynamics,
    x0: &[f64],
    stc: &SpaceTimeControl,
    perturbed: &[SpaceTimeControl],
) -> Result<Vec<f64>> {
    let xi = integrate_spacetime(dyn_, x0, stc)?;
    let span = perturbed.iter().map(|p| p.s_end()).fold(stc.s_end(), f64::min);
    perturbed
        .iter()
        .map(|p| {
            let xh = integrate_spacetime(dyn_, x0, p)?;
            Ok(xh.sup_distance(&xi, 0.0, span).max(xi.sup_distance(&xh, 0.0, span)))
        })
        .collect()
}

/// `(|x̄₀| + (m+1) M S) e^{(m+1) M S}`, the a-priori bound for unit-speed inputs on `[0, S]`.
pub fn equibound(dyn_: &Dynamics, x0: &[f64], span: f64) -> f64 {
    let k = (dyn_.m as f64 + 1.0) * dyn_.sublinear * span;
    (crate::linalg::norm(x0) + k) * k.exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bv::{ClockJump, ClockTerminal, ControlSet};
    use crate::completion::{build_completion, completion_from_curve, CompletionOptions, Partition, SpaceTimePath, StPiece};
    use crate::scenarios::{ex1f1_stc, example_dynamics, one_jump_control};

    #[test]
    fn identity_clock_restricts_xi() {
        let xi = Trajectory::new(Param::PseudoTime, vec![0.0, 1.0], vec![0.0, 2.0], 1).unwrap();
        let clock = Clock::identity(1.0);
        let g = gc_solution(&xi, &clock, &[0.0, 0.25, 1.0], &TerminalRule::Finite(1.0)).unwrap();
        assert_eq!(g.trajectory.state(1), &[0.5]);
        assert_eq!(g.terminal, vec![2.0]);
    }

    #[test]
    fn ex1f1_terminal_value_along_loops() {
        let t_end = 1.0;
        let lam = 8.0 * std::f64::consts::PI;
        let stc = ex1f1_stc(t_end, lam, 1e-3).unwrap();
        let xi = integrate_spacetime(&example_dynamics(), &[1.0, 0.0, 1.0], &stc).unwrap();
        let clock = Clock::new(t_end, &[(0.0, 0.0), (0.5, 0.5)], Vec::new(), ClockTerminal::Divergent).unwrap();
        let seq: Vec<f64> = (0..=4).map(|j| t_end + 2.0 * std::f64::consts::PI * j as f64).collect();
        let g = gc_solution(&xi, &clock, &[0.0, 0.25, 0.5, 1.0], &TerminalRule::Sequence(seq)).unwrap();
        assert!(dist(g.trajectory.state(2), &[1.0, 0.0, 1.0]) < 1e-12);
        let xt = g.trajectory.last();
        assert!(dist(xt, &[1.0, 0.0, 0.0]) < 1e-9, "{xt:?}");
        assert!(g.terminal_residual < 2e-7, "{}", g.terminal_residual);
    }

    #[test]
    fn clock_exiting_the_grid_is_a_domain_error() {
        let xi = Trajectory::new(Param::PseudoTime, vec![0.0, 1.0], vec![0.0, 1.0], 1).unwrap();
        let clock = Clock::linear(1.0, 2.0);
        let r = gc_solution(&xi, &clock, &[0.0, 0.9], &TerminalRule::Finite(1.0));
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn one_jump_terminal_is_xi_at_s() {
        let u = one_jump_control(1.0).unwrap();
        let v = OrdinaryControl::none(1.0);
        let c = build_completion(&u, &v, &Partition::Explicit { points: vec![0.0, 1.0] }, &CompletionOptions::default())
            .unwrap();
        let d = example_dynamics();
        let xi = integrate_spacetime(&d, &[1.0, 0.0, 1.0], &c.stc).unwrap();
        let g = gc_solution(&xi, &c.clock, &[0.0, 0.5, 1.0], &TerminalRule::for_completion(&c)).unwrap();
        assert_eq!(g.terminal, xi.last().to_vec());
        // finer sampling agrees
        let fine = build_completion(
            &u,
            &v,
            &Partition::Explicit { points: vec![0.0, 1.0] },
            &CompletionOptions { ds: 1e-4, ..Default::default() },
        )
        .unwrap();
        let xf = integrate_spacetime(&d, &[1.0, 0.0, 1.0], &fine.stc).unwrap();
        assert!(dist(&g.terminal, xf.last()) < 1e-6);
    }

    #[test]
    fn consistency_for_smooth_control() {
        let u = ControlPath::polyline(
            ControlSet::unit_disc(),
            vec![0.0, 0.4, 1.0],
            vec![vec![1.0, 0.0], vec![0.0, 0.6], vec![-0.5, -0.5]],
        )
        .unwrap();
        let v = OrdinaryControl::none(1.0);
        let c = build_completion(&u, &v, &Partition::Explicit { points: vec![0.0, 1.0] }, &CompletionOptions::default())
            .unwrap();
        let r = consistency_check(&example_dynamics(), &[1.0, 0.0, 1.0], &u, &v, &c, 0.9, 4096).unwrap();
        assert!(r.deviation < 1e-8, "{r:?}");
    }

    #[test]
    fn effective_loop_breaks_consistency() {
        // u ≡ (1,0); the completion inserts a full circle at t = 0.5
        let u = ControlPath::constant(ControlSet::unit_disc(), 1.0, vec![1.0, 0.0]).unwrap();
        let v = OrdinaryControl::none(1.0);
        let mut p = SpaceTimePath::new(2, None);
        let e = vec![1.0, 0.0];
        p.push(StPiece::Straight { t0: 0.0, t1: 0.5, u0: e.clone(), u1: e.clone() }).unwrap();
        p.push(StPiece::Arc { t: 0.5, center: [0.0, 0.0], radius: 1.0, theta0: 0.0, sweep: 2.0 * std::f64::consts::PI })
            .unwrap();
        p.push(StPiece::Straight { t0: 0.5, t1: 1.0, u0: e.clone(), u1: e }).unwrap();
        let c = completion_from_curve(p, &v, 1.0, 1e-3, vec![1.0, 0.0]).unwrap();
        let r = consistency_check(&example_dynamics(), &[1.0, 0.0, 1.0], &u, &v, &c, 0.9, 256).unwrap();
        let expect = 1.0 - (-2.0 * std::f64::consts::PI).exp();
        assert!((r.deviation - expect).abs() < 1e-5, "{r:?}");
    }

    #[test]
    fn probe_of_identical_controls_is_zero() {
        let stc = ex1f1_stc(1.0, 3.0, 1e-2).unwrap();
        let d = example_dynamics();
        let r = uniform_convergence_probe(&d, &[1.0, 0.0, 1.0], &stc, &[stc.clone(), stc.clone()]).unwrap();
        assert_eq!(r, vec![0.0, 0.0]);
    }

    #[test]
    fn clock_with_jump_reads_anchor() {
        let xi = Trajectory::new(Param::PseudoTime, vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 1.0, 5.0, 6.0], 1).unwrap();
        let clock = Clock::new(
            1.0,
            &[(0.0, 0.0), (1.0, 3.0)],
            vec![ClockJump { tau: 0.5, s1: 1.0, s2: 2.0, value: 2.0 }],
            ClockTerminal::Finite(3.0),
        )
        .unwrap();
        let g = gc_solution(&xi, &clock, &[0.5], &TerminalRule::Finite(3.0)).unwrap();
        assert_eq!(g.trajectory.state(0), &[5.0]);
    }
}
