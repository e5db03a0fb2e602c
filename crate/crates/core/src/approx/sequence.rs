use super::smoothing::{mollify_clock, SmoothedClock, SmoothingOptions};
use crate::bv::{ControlPath, ControlSet, OrdinaryControl};
use crate::completion::{CompletionResult, Horizon, SpaceTimeControl};
use crate::error::{Error, Result};
use crate::linalg::dist;
use crate::ode::{arc_length_grid, caratheodory, equibound, integrate_spacetime, with_nodes, Dynamics, Trajectory, DEFAULT_CELLS};

#[derive(Debug, Clone, PartialEq)]
pub struct ApproxOptions {
    pub smoothing: SmoothingOptions,
    /// largest mollification scale tried per index
    pub h_cap: f64,
    /// polyline vertices kept for `φ ∘ σ_h` (uniform thinning beyond this)
    pub max_vertices: usize,
    /// arc-length cells for the Carathéodory runs
    pub cells: usize,
}

impl Default for ApproxOptions {
    fn default() -> Self {
        ApproxOptions {
            smoothing: SmoothingOptions::default(),
            h_cap: 1024.0,
            max_vertices: 20_000,
            cells: DEFAULT_CELLS,
        }
    }
}

/// How a member's scale was chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleChoice {
    pub h: f64,
    /// `sup |φ_{0h} - φ₀|` on the nodes up to `s_k`
    pub eps: f64,
    /// `sup |ξ_h - ξ|` on `[0, s_k]`
    pub eps1: f64,
    /// both at most `1/k`
    pub certified: bool,
}

#[derive(Debug, Clone)]
pub struct ApproxMember {
    pub k: usize,
    pub control: ControlPath,
    pub trajectory: Trajectory,
    /// `Var_[0,T](u_k)`
    pub variation: f64,
    /// pseudo-time `s_k` and `τ = φ_{0h}(s_k)` of the splice, when built from a completion
    pub splice: Option<(f64, f64)>,
    pub scale: Option<ScaleChoice>,
    /// `sup_t |x_k(t)|`
    pub sup_state: f64,
    /// a-priori bound on `sup_t |x_k(t)|`
    pub state_bound: f64,
    /// terminal estimate `(m+1)(1+R′)M[(T-τ) + C|φ(s_k) - u(T)|]`
    pub terminal_bound: Option<f64>,
}

/// Absolutely continuous controls `u_k` with their Carathéodory solutions.
#[derive(Debug, Clone)]
pub struct ApproxSequence {
    pub horizon: f64,
    pub x0: Vec<f64>,
    pub members: Vec<ApproxMember>,
    /// `(t, V(t))` with `V(t) = Var_[0,σ(t)+M](φ) + C diam(U)`, when built from a completion
    pub envelope: Vec<(f64, f64)>,
    dynamics: Dynamics,
    ordinary: OrdinaryControl,
}

impl ApproxSequence {
    /// Integrates explicitly given controls.
    pub fn from_controls(
        dyn_: &Dynamics,
        x0: &[f64],
        v: &OrdinaryControl,
        controls: Vec<(usize, ControlPath)>,
        cells: usize,
    ) -> Result<Self> {
        let horizon = controls
            .first()
            .map(|c| c.1.horizon())
            .ok_or_else(|| Error::Config("empty control list".into()))?;
        let mut members = Vec::with_capacity(controls.len());
        for (k, u) in controls {
            if u.horizon() != horizon {
                return Err(Error::Config("sequence controls have different horizons".into()));
            }
            if u.has_jumps() || u.is_divergent() {
                return Err(Error::Precondition(format!("member {k} is not absolutely continuous")));
            }
            let grid = arc_length_grid(&u, 0.0, horizon, cells)?;
            let trajectory = caratheodory(dyn_, x0, &u, v, &grid)?;
            let variation = u.total_variation(0.0, horizon)?;
            let sup_state = trajectory.sup_norm();
            members.push(ApproxMember {
                k,
                state_bound: equibound(dyn_, x0, horizon + variation),
                control: u,
                trajectory,
                variation,
                splice: None,
                scale: None,
                sup_state,
                terminal_bound: None,
            });
        }
        Ok(ApproxSequence {
            horizon,
            x0: x0.to_vec(),
            members,
            envelope: Vec::new(),
            dynamics: dyn_.clone(),
            ordinary: v.clone(),
        })
    }

    /// `x_k` at the given times, integrated with the times inserted as grid nodes.
    pub fn states_at(&self, m: &ApproxMember, times: &[f64]) -> Result<Vec<Vec<f64>>> {
        let grid = m.trajectory.grid();
        if times.iter().all(|t| grid.binary_search_by(|g| g.total_cmp(t)).is_ok()) {
            return Ok(times.iter().map(|&t| m.trajectory.eval(t)).collect());
        }
        let fine = caratheodory(&self.dynamics, &self.x0, &m.control, &self.ordinary, &with_nodes(grid, times))?;
        Ok(times.iter().map(|&t| fine.eval(t)).collect())
    }

    pub fn member(&self, k: usize) -> Option<&ApproxMember> {
        self.members.iter().find(|m| m.k == k)
    }

    /// Every member stays within its a-priori state bound.
    pub fn equibounded(&self) -> bool {
        self.members.iter().all(|m| m.sup_state <= m.state_bound)
    }

    /// `Var_[0,t](u_k) <= V(t)` at every envelope node, for every member.
    pub fn envelope_holds(&self) -> Result<bool> {
        for m in &self.members {
            for &(t, bound) in &self.envelope {
                if m.control.total_variation(0.0, t)? > bound * (1.0 + 1e-12) + 1e-12 {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// Prefix sums of `|Δφ|` along the sampled completion.
fn phi_variation_prefix(stc: &SpaceTimeControl) -> Vec<f64> {
    let mut acc = vec![0.0; stc.len()];
    for i in 1..stc.len() {
        acc[i] = acc[i - 1] + dist(stc.phi_at(i), stc.phi_at(i - 1));
    }
    acc
}

fn phi_variation_to(stc: &SpaceTimeControl, prefix: &[f64], s: f64) -> f64 {
    let grid = stc.grid();
    if s >= *grid.last().unwrap() {
        return *prefix.last().unwrap();
    }
    let i = stc.cell(s);
    let lam = ((s - grid[i]) / (grid[i + 1] - grid[i])).clamp(0.0, 1.0);
    prefix[i] + lam * (prefix[i + 1] - prefix[i])
}

struct Smoothed {
    clock: SmoothedClock,
    choice: ScaleChoice,
}

fn choose_scale(
    completion: &CompletionResult,
    dyn_: &Dynamics,
    x0: &[f64],
    xi: &Trajectory,
    s_k: f64,
    k: usize,
    h_start: f64,
    opts: &ApproxOptions,
) -> Result<Smoothed> {
    let stc = &completion.stc;
    let target = 1.0 / k as f64;
    if let Some(clock) = SmoothedClock::exact(&completion.clock) {
        return Ok(Smoothed {
            clock,
            choice: ScaleChoice {
                h: f64::INFINITY,
                eps: 0.0,
                eps1: 0.0,
                certified: true,
            },
        });
    }
    let mut h = h_start.max(1.0);
    loop {
        let clock = mollify_clock(&completion.clock, h, &opts.smoothing)?;
        let phi0h: Vec<f64> = stc.grid().iter().map(|&s| clock.inverse(s)).collect();
        let mut eps = 0.0f64;
        for (i, &s) in stc.grid().iter().enumerate() {
            if s > s_k {
                break;
            }
            eps = eps.max((phi0h[i] - stc.time_column()[i]).abs());
        }
        let xih = integrate_spacetime(dyn_, x0, &stc.with_time_column(phi0h)?)?;
        let eps1 = xih.sup_distance(xi, 0.0, s_k);
        let certified = eps <= target && eps1 <= target;
        if certified || 2.0 * h > opts.h_cap {
            return Ok(Smoothed {
                clock,
                choice: ScaleChoice {
                    h,
                    eps,
                    eps1,
                    certified,
                },
            });
        }
        h *= 2.0;
    }
}

/// Polyline through `(φ_{0h}(sᵢ), φ(sᵢ))` for `sᵢ < s_k`, then `(τ, φ(s_k))`
/// and a straight bridge to `(T, u(T))`.
fn spliced_control(
    stc: &SpaceTimeControl,
    clock: &SmoothedClock,
    set: &ControlSet,
    s_k: f64,
    terminal: &[f64],
    max_vertices: usize,
) -> Result<(ControlPath, f64)> {
    let horizon = clock.horizon();
    let tau = clock.inverse(s_k);
    let below = stc.grid().partition_point(|&s| s < s_k);
    let stride = below.div_ceil(max_vertices.max(2)).max(1);
    let mut times = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    let push = |t: f64, p: Vec<f64>, times: &mut Vec<f64>, values: &mut Vec<Vec<f64>>| {
        if times.last().is_none_or(|&l| t > l) {
            times.push(t);
            values.push(p);
        }
    };
    for i in (0..below).step_by(stride) {
        push(clock.inverse(stc.grid()[i]), stc.phi_at(i).to_vec(), &mut times, &mut values);
    }
    let phi_k = stc.eval(s_k).1;
    if tau < horizon {
        push(tau, phi_k, &mut times, &mut values);
        push(horizon, terminal.to_vec(), &mut times, &mut values);
    } else {
        push(horizon, phi_k, &mut times, &mut values);
    }
    if *times.last().unwrap() != horizon {
        // the last vertex fell within rounding of T
        *times.last_mut().unwrap() = horizon;
    }
    Ok((ControlPath::polyline(set.clone(), times, values)?, tau))
}

/// Builds `u_k = φ ∘ σ_{h_k}` on `[0, τ]` spliced to `u(T)` on `(τ, T]`, for each
/// requested index. For a finite completion `s_k = S̄`; otherwise `s_k` is the
/// `k`-th term of the diagnostic sequence.
pub fn build_approx_sequence(
    completion: &CompletionResult,
    set: &ControlSet,
    dyn_: &Dynamics,
    x0: &[f64],
    v: &OrdinaryControl,
    indices: &[usize],
    opts: &ApproxOptions,
) -> Result<ApproxSequence> {
    if indices.is_empty() || indices.contains(&0) {
        return Err(Error::Config("sequence indices must be positive".into()));
    }
    let horizon = completion.clock.horizon();
    let stc = &completion.stc;
    let xi = integrate_spacetime(dyn_, x0, stc)?;
    let diag = completion.diagnostic_s();
    let c_w = set.whitney_constant();
    let diam = set.diameter();
    let big_m = dyn_.sublinear;
    let mp1 = dyn_.m as f64 + 1.0;

    let mut members = Vec::with_capacity(indices.len());
    let mut clocks = Vec::with_capacity(indices.len());
    let mut h_prev = 1.0f64;
    for &k in indices {
        let s_k = match completion.horizon {
            Horizon::Finite(sbar) => sbar,
            Horizon::Truncated { .. } => *diag.get(k - 1).ok_or_else(|| {
                Error::Config(format!(
                    "diagnostic term {k} is not covered by the completion (raise S_max)"
                ))
            })?,
        };
        let sm = choose_scale(completion, dyn_, x0, &xi, s_k, k, h_prev, opts)?;
        if sm.choice.h.is_finite() {
            h_prev = sm.choice.h;
        }
        let (u, tau) = spliced_control(stc, &sm.clock, set, s_k, &completion.terminal_control, opts.max_vertices)?;
        let grid = with_nodes(&arc_length_grid(&u, 0.0, horizon, opts.cells)?, &[tau]);
        let trajectory = caratheodory(dyn_, x0, &u, v, &grid)?;
        let variation = u.total_variation(0.0, horizon)?;
        let state_bound = equibound(dyn_, x0, horizon + variation);
        let gap = dist(&stc.eval(s_k).1, &completion.terminal_control);
        let terminal_bound = mp1 * (1.0 + state_bound) * big_m * ((horizon - tau) + c_w * gap);
        members.push(ApproxMember {
            k,
            sup_state: trajectory.sup_norm(),
            control: u,
            trajectory,
            variation,
            splice: Some((s_k, tau)),
            scale: Some(sm.choice),
            state_bound,
            terminal_bound: Some(terminal_bound),
        });
        clocks.push(sm.clock);
    }

    // envelope V(t) on a uniform grid inside the clock table
    let prefix = phi_variation_prefix(stc);
    let t_top = completion.clock.t_end().min(horizon * (1.0 - 1e-9));
    let mut shift = 1.0f64;
    for c in &clocks {
        for (&t, &s) in completion.clock.times().iter().zip(completion.clock.values()) {
            if t < horizon {
                shift = shift.max(c.eval(t) - s);
            }
        }
    }
    let envelope = (0..=200)
        .map(|i| {
            let t = t_top * i as f64 / 200.0;
            let s = completion.clock.limits(t).1;
            (t, phi_variation_to(stc, &prefix, s + shift) + c_w * diam)
        })
        .collect();

    Ok(ApproxSequence {
        horizon,
        x0: x0.to_vec(),
        members,
        envelope,
        dynamics: dyn_.clone(),
        ordinary: v.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WellposednessRow {
    pub k: usize,
    /// `sup_t |x_k(t) - x(t)|` over the reference grid, `t = T` included
    pub sup_error: f64,
    pub terminal_error: f64,
    pub variation: f64,
}

/// Errors of each member against a reference solution sampled on a time grid
/// (the reference's last node holds `x(T)`).
pub fn wellposedness_report(x: &Trajectory, seq: &ApproxSequence) -> Result<Vec<WellposednessRow>> {
    seq.members
        .iter()
        .map(|m| {
            let xk = seq.states_at(m, x.grid())?;
            let mut sup = 0.0f64;
            let mut terminal = 0.0;
            for (i, &t) in x.grid().iter().enumerate() {
                let e = dist(&xk[i], x.state(i));
                sup = sup.max(e);
                if t == seq.horizon {
                    terminal = e;
                }
            }
            Ok(WellposednessRow {
                k: m.k,
                sup_error: sup,
                terminal_error: terminal,
                variation: m.variation,
            })
        })
        .collect()
}

/// Errors are nonincreasing in `k` up to `slack`.
pub fn monotone_errors(rows: &[WellposednessRow], slack: f64) -> bool {
    rows.windows(2).all(|w| w[1].sup_error <= w[0].sup_error + slack)
}


/// Comma-separated table `k, sup_error, terminal_error, variation`.
pub fn write_convergence_csv<W: std::io::Write>(rows: &[WellposednessRow], out: W) -> Result<()> {
    use crate::bv::path::fmt;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "sup_error", "terminal_error", "variation"])?;
    for r in rows {
        w.write_record([r.k.to_string(), fmt(r.sup_error), fmt(r.terminal_error), fmt(r.variation)])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::completion::{build_completion, CompletionOptions, Partition};
    use crate::ode::{gc_solution, TerminalRule};
    use crate::scenarios::{clipped_spiral, example_dynamics, one_jump_control};

    #[test]
    fn ac_control_gives_degenerate_sequence() {
        let set = ControlSet::unit_disc();
        let u = ControlPath::polyline(set.clone(), vec![0.0, 0.5, 1.0], vec![vec![1.0, 0.0], vec![0.6, 0.8], vec![0.0, 1.0]])
            .unwrap();
        let v = OrdinaryControl::none(1.0);
        let c = build_completion(
            &u,
            &v,
            &Partition::Explicit { points: vec![0.0, 1.0] },
            &CompletionOptions::default(),
        )
        .unwrap();
        let dyn_ = example_dynamics();
        let x0 = [1.0, 0.0, 1.0];
        let seq = build_approx_sequence(&c, &set, &dyn_, &x0, &v, &[1, 2], &ApproxOptions::default()).unwrap();
        let x = caratheodory(&dyn_, &x0, &u, &v, &arc_length_grid(&u, 0.0, 1.0, 4096).unwrap()).unwrap();
        for m in &seq.members {
            assert!(m.scale.unwrap().certified);
            assert!(m.trajectory.sup_distance(&x, 0.0, 1.0) < 1e-6);
        }
        assert!(seq.equibounded());
        assert!(seq.envelope_holds().unwrap());
    }

    #[test]
    fn one_jump_sequence_converges() {
        let set = ControlSet::unit_disc();
        let u = one_jump_control(1.0).unwrap();
        let v = OrdinaryControl::none(1.0);
        let c = build_completion(&u, &v, &Partition::default(), &CompletionOptions::default()).unwrap();
        let dyn_ = example_dynamics();
        let x0 = [1.0, 0.0, 1.0];
        let opts = ApproxOptions {
            cells: 4096,
            ..Default::default()
        };
        let seq = build_approx_sequence(&c, &set, &dyn_, &x0, &v, &[1, 2, 4], &opts).unwrap();
        let xi = integrate_spacetime(&dyn_, &x0, &c.stc).unwrap();
        let grid: Vec<f64> = [0.1, 0.3, 0.7, 0.9, 1.0].to_vec();
        let gc = gc_solution(&xi, &c.clock, &grid, &TerminalRule::for_completion(&c)).unwrap();
        let rows = wellposedness_report(&gc.trajectory, &seq).unwrap();
        assert!(monotone_errors(&rows, 1e-9), "{rows:?}");
        for m in &seq.members {
            assert!(m.scale.unwrap().certified);
            let row = rows.iter().find(|r| r.k == m.k).unwrap();
            assert!(row.terminal_error <= m.terminal_bound.unwrap());
        }
        assert!(seq.equibounded());
        assert!(seq.envelope_holds().unwrap());
    }

    #[test]
    fn explicit_controls_are_integrated() {
        let v = OrdinaryControl::none(1.0);
        let controls = (1..=2).map(|k| (k, clipped_spiral(1.0, k).unwrap())).collect();
        let seq = ApproxSequence::from_controls(&example_dynamics(), &[1.0, 0.0, 1.0], &v, controls, 4096).unwrap();
        assert_eq!(seq.members.len(), 2);
        assert!(seq.equibounded());
        assert!(seq.member(2).unwrap().variation > seq.member(1).unwrap().variation);
    }

    #[test]
    fn convergence_csv_has_header() {
        let rows = vec![WellposednessRow {
            k: 4,
            sup_error: 0.5,
            terminal_error: 0.25,
            variation: 2.0,
        }];
        let mut buf = Vec::new();
        write_convergence_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "k,sup_error,terminal_error,variation\n4,0.5,0.25,2\n");
    }
}
