use std::f64::consts::PI;

use super::es3::augment_cost;
use crate::bv::{ControlPath, ControlSet, OrdinaryControl};
use crate::completion::SpaceTimeControl;
use crate::error::{Error, Result};
use crate::linalg::dist;
use crate::ode::{arc_length_grid, caratheodory, with_nodes, Dynamics, Param, Trajectory};

/// Payoff `J(u) = ∫ |1-u₁| + |u₂| + |x₃||u̇| dt` with target `(U × {0}) × U`.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffSpec {
    pub horizon: f64,
    pub set: ControlSet,
}

impl PayoffSpec {
    pub fn new(horizon: f64) -> Self {
        PayoffSpec {
            horizon,
            set: ControlSet::unit_disc(),
        }
    }

    /// `|1 - u₁| + |u₂|`
    pub fn running(u: &[f64]) -> f64 {
        (1.0 - u[0]).abs() + u[1].abs()
    }

    /// Distance of `(x, u)` to the target set.
    pub fn target_distance(&self, x: &[f64], u: &[f64]) -> f64 {
        let d12 = self.set.distance(&x[..2]);
        let du = self.set.distance(u);
        (d12 * d12 + x[2] * x[2] + du * du).sqrt()
    }
}

/// Trapezoid quadrature of `J` over the grid of `x` (must be in `t`), with
/// exact per-cell variation of `u`. A divergent control whose grid reaches
/// `T` gives `+∞`.
pub fn payoff(x: &Trajectory, u: &ControlPath) -> Result<f64> {
    payoff_until(x, u, x.end())
}

fn payoff_until(x: &Trajectory, u: &ControlPath, hi: f64) -> Result<f64> {
    if x.param() != Param::Time || x.dim() < 3 || u.dim() != 2 {
        return Err(Error::Config("payoff needs x(t) with n >= 3 and a planar control".into()));
    }
    let g = x.grid();
    if g[0] < 0.0 || x.end() > u.horizon() {
        return Err(Error::Domain("trajectory grid outside [0, T]".into()));
    }
    if u.discontinuity_set().iter().any(|j| j.time >= g[0] && j.time <= hi) {
        return Err(Error::Precondition("payoff needs a control without jumps on the grid".into()));
    }
    if hi == u.horizon() && u.is_divergent() {
        return Ok(f64::INFINITY);
    }
    let mut total = 0.0;
    let mut prev_l = PayoffSpec::running(&u.value(g[0]));
    for i in 0..g.len() - 1 {
        if g[i + 1] > hi {
            break;
        }
        let (a, b) = (g[i], g[i + 1]);
        let l = PayoffSpec::running(&u.value(b));
        let dv = u.total_variation(a, b)?;
        let (xa, xb) = (x.state(i)[2].abs(), x.state(i + 1)[2].abs());
        total += 0.5 * (prev_l + l) * (b - a) + 0.5 * (xa + xb) * dv;
        prev_l = l;
    }
    Ok(total)
}

/// Result of evaluating `J(u)` together with the cost state `x₄(T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffRun {
    /// quadrature value of `J`
    pub payoff: f64,
    /// `x₄(T)` of the augmented system
    pub cost_state: f64,
    /// `(x, u)` at the last integrated node
    pub terminal_state: Vec<f64>,
    pub terminal_control: Vec<f64>,
    /// truncation `δ` of the improper integral (0 for controls of bounded variation)
    pub delta: f64,
    /// partial values on `[0, T-δ]` and `[0, T-δ/2]`
    pub partials: [f64; 2],
    pub divergent: bool,
}

/// Integrates the cost-augmented system on an arc-length grid of step `ds` and
/// evaluates `J` on the same grid. For controls with unbounded variation the
/// improper integral is truncated at `T-δ` and `T-δ/2` and Richardson-extrapolated;
/// `bound` flags divergence of the partial values.
pub fn payoff_run(dyn_: &Dynamics, x0: &[f64], u: &ControlPath, ds: f64, delta: f64, bound: f64) -> Result<PayoffRun> {
    if !(ds > 0.0) {
        return Err(Error::Config("arc-length step must be positive".into()));
    }
    let aug = augment_cost(dyn_)?;
    let mut xa0 = x0.to_vec();
    xa0.push(0.0);
    let v = OrdinaryControl::none(u.horizon());
    let horizon = u.horizon();
    let cells_for = |t: f64| -> Result<usize> {
        let s = t + u.total_variation(0.0, t)?;
        Ok(((s / ds).ceil() as usize).max(1))
    };
    if !u.is_divergent() {
        let grid = arc_length_grid(u, 0.0, horizon, cells_for(horizon)?)?;
        let x = caratheodory(&aug, &xa0, u, &v, &grid)?;
        let j = payoff(&x, u)?;
        let last = x.last();
        return Ok(PayoffRun {
            payoff: j,
            cost_state: last[3],
            terminal_state: last[..3].to_vec(),
            terminal_control: u.value(horizon),
            delta: 0.0,
            partials: [j, j],
            divergent: false,
        });
    }
    if !(delta > 0.0 && delta < horizon) {
        return Err(Error::Config("truncation δ must lie in (0, T)".into()));
    }
    let (t1, t2) = (horizon - delta, horizon - 0.5 * delta);
    let grid = with_nodes(&arc_length_grid(u, 0.0, t2, cells_for(t2)?)?, &[t1]);
    let i1 = grid.iter().position(|&t| t == t1).expect("node inserted");
    let x = caratheodory(&aug, &xa0, u, &v, &grid)?;
    let p1 = payoff_until(&x, u, t1)?;
    let p2 = payoff_until(&x, u, t2)?;
    let (c1, c2) = (x.state(i1)[3], x.last()[3]);
    Ok(PayoffRun {
        payoff: 2.0 * p2 - p1,
        cost_state: 2.0 * c2 - c1,
        terminal_state: x.last()[..3].to_vec(),
        terminal_control: u.value(t2),
        delta,
        partials: [p1, p2],
        divergent: p2 > bound,
    })
}

/// `𝒥 = ∫₀^{S_cut} (|1-φ₁| + |φ₂|) φ₀' + |ξ₃||φ'| ds` by the trapezoid rule on the
/// control grid; a cut inside a cell uses linear interpolation.
pub fn extended_payoff(stc: &SpaceTimeControl, xi: &Trajectory, s_cut: f64) -> Result<f64> {
    if xi.param() != Param::PseudoTime || xi.dim() < 3 || stc.m() != 2 {
        return Err(Error::Config("extended payoff needs ξ(s) with n >= 3 and m = 2".into()));
    }
    if s_cut > xi.end() * (1.0 + 1e-12) || s_cut > stc.s_end() * (1.0 + 1e-12) {
        return Err(Error::Domain(format!("S_cut = {s_cut} beyond the integrated span")));
    }
    let s = stc.grid();
    let t = stc.time_column();
    let mut total = 0.0;
    for i in 0..s.len() - 1 {
        if s[i] >= s_cut {
            break;
        }
        let (sa, mut sb) = (s[i], s[i + 1]);
        let (mut tb, mut pb) = (t[i + 1], stc.phi_at(i + 1).to_vec());
        if sb > s_cut {
            let (tt, pp) = stc.eval(s_cut);
            sb = s_cut;
            tb = tt;
            pb = pp;
        }
        let pa = stc.phi_at(i);
        let la = PayoffSpec::running(pa);
        let lb = PayoffSpec::running(&pb);
        let xa = xi.eval(sa)[2].abs();
        let xb = xi.eval(sb)[2].abs();
        total += 0.5 * (la + lb) * (tb - t[i]) + 0.5 * (xa + xb) * dist(pa, &pb);
    }
    Ok(total)
}

/// Closed form of `J` for the example (ii) controls:
/// `1 + ∫₀^∞ (1 - cos θ + |sin θ|) / (θ + k)² dθ`.
pub fn example_ii_payoff(k: usize) -> f64 {
    const PERIODS: usize = 20_000;
    const NODES: usize = 32;
    let kf = k as f64;
    let f = |th: f64| (1.0 - th.cos() + th.sin().abs()) / ((th + kf) * (th + kf));
    let mut acc = 0.0;
    // Simpson on each half-period, where |sin| is smooth
    for j in 0..2 * PERIODS {
        let (a, b) = (j as f64 * PI, (j + 1) as f64 * PI);
        let h = (b - a) / NODES as f64;
        let mut sum = f(a) + f(b);
        for i in 1..NODES {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            sum += w * f(a + h * i as f64);
        }
        acc += sum * h / 3.0;
    }
    // tail with the period mean 1 + 2/π
    let theta = 2.0 * PERIODS as f64 * PI;
    1.0 + acc + (1.0 + 2.0 / PI) / (theta + kf)
}

/// `1 - e^{-Var}`, the lower bound for `J` along controls started at `(1, 0)`.
pub fn payoff_lower_bound(variation: f64) -> f64 {
    1.0 - (-variation).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::integrate_spacetime;
    use crate::scenarios::{ex1f1_stc, example_dynamics, example_ii_control};

    #[test]
    fn constant_control_costs_nothing() {
        let u = ControlPath::constant(ControlSet::unit_disc(), 1.0, vec![1.0, 0.0]).unwrap();
        let r = payoff_run(&example_dynamics(), &[1.0, 0.0, 1.0], &u, 1e-2, 1e-3, 1e6).unwrap();
        assert_eq!(r.payoff, 0.0);
        assert_eq!(r.cost_state, 0.0);
    }

    #[test]
    fn example_ii_matches_closed_form() {
        let d = example_dynamics();
        for k in [5, 10] {
            let u = example_ii_control(1.0, k).unwrap();
            let r = payoff_run(&d, &[1.0, 0.0, 1.0], &u, 2e-3, 1.0 / 400.0, 1e6).unwrap();
            let exact = example_ii_payoff(k);
            assert!((r.payoff - exact).abs() < 1e-4, "k={k}: {} vs {exact}", r.payoff);
            assert!((r.payoff - r.cost_state).abs() < 1e-6, "{r:?}");
            assert!(exact >= 1.0 && exact <= 1.0 + 3.0 / k as f64);
        }
    }

    #[test]
    fn extended_payoff_of_ex1f1() {
        let t_end = 1.0;
        let stc = ex1f1_stc(t_end, 6.0, 5e-4).unwrap();
        let d = example_dynamics();
        let xi = integrate_spacetime(&d, &[1.0, 0.0, 1.0], &stc).unwrap();
        let j = extended_payoff(&stc, &xi, t_end + 6.0).unwrap();
        assert!((j - (1.0 - (-6.0f64).exp())).abs() < 1e-6, "{j}");
        // cost state agrees with the quadrature
        let aug = augment_cost(&d).unwrap();
        let x4 = integrate_spacetime(&aug, &[1.0, 0.0, 1.0, 0.0], &stc).unwrap();
        assert!((x4.last()[3] - j).abs() < 1e-7);
        // drift-only part costs nothing
        assert_eq!(extended_payoff(&stc, &xi, t_end).unwrap(), 0.0);
    }

    #[test]
    fn target_distance_of_reference_points() {
        let p = PayoffSpec::new(1.0);
        assert_eq!(p.target_distance(&[1.0, 0.0, 0.0], &[1.0, 0.0]), 0.0);
        assert_eq!(p.target_distance(&[1.0, 0.0, 0.5], &[1.0, 0.0]), 0.5);
    }
}
