use super::dynamics::Dynamics;
use super::trajectory::{Param, Trajectory};
use crate::bv::{ControlPath, OrdinaryControl};
use crate::completion::SpaceTimeControl;
use crate::error::{Error, Result};

/// Default number of cells before refinement (`span / 2^14`).
pub const DEFAULT_CELLS: usize = 1 << 14;
/// Refinement stops once successive runs differ by less than this.
pub const REFINE_TOL: f64 = 1e-7;
/// Refinement cap (`2^20` cells).
pub const MAX_CELLS: usize = 1 << 20;

fn axpy(out: &mut [f64], x: &[f64], a: f64, k: &[f64]) {
    for ((o, &xi), &ki) in out.iter_mut().zip(x).zip(k) {
        *o = xi + a * ki;
    }
}

/// Classical RK4 on the space-time system over the control's own grid, with
/// `φ₀'`, `φ'` the per-cell difference quotients and `ψ` held at the left node.
/// Cells where neither `φ₀` nor `φ` moves are copied unchanged.
pub fn integrate_spacetime(dyn_: &Dynamics, x0: &[f64], stc: &SpaceTimeControl) -> Result<Trajectory> {
    if stc.m() != dyn_.m || stc.q() != dyn_.q {
        return Err(Error::Config(format!(
            "space-time control has (m, q) = ({}, {}), dynamics expect ({}, {})",
            stc.m(),
            stc.q(),
            dyn_.m,
            dyn_.q
        )));
    }
    let n = dyn_.n;
    if x0.len() != n {
        return Err(Error::Config("initial state has the wrong dimension".into()));
    }
    let m = dyn_.m;
    let s = stc.grid();
    let t = stc.time_column();
    let mut states = Vec::with_capacity(s.len() * n);
    states.extend_from_slice(x0);
    let mut x = x0.to_vec();
    let mut ws = dyn_.workspace();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut dphi = vec![0.0; m];
    let mut u = vec![0.0; m];
    for i in 0..s.len() - 1 {
        let h = s[i + 1] - s[i];
        let (p0, p1) = (stc.phi_at(i), stc.phi_at(i + 1));
        let d0 = t[i + 1] - t[i];
        let still = d0 == 0.0 && p0 == p1;
        if !still {
            let w0 = d0 / h;
            for c in 0..m {
                dphi[c] = (p1[c] - p0[c]) / h;
            }
            let v = stc.psi_at(i);
            let at = |lam: f64, u: &mut [f64]| {
                for c in 0..m {
                    u[c] = p0[c] + (p1[c] - p0[c]) * lam;
                }
            };
            at(0.0, &mut u);
            dyn_.rhs(&x, &u, v, w0, &dphi, &mut k1, &mut ws);
            at(0.5, &mut u);
            axpy(&mut tmp, &x, 0.5 * h, &k1);
            dyn_.rhs(&tmp, &u, v, w0, &dphi, &mut k2, &mut ws);
            axpy(&mut tmp, &x, 0.5 * h, &k2);
            dyn_.rhs(&tmp, &u, v, w0, &dphi, &mut k3, &mut ws);
            u.copy_from_slice(p1);
            axpy(&mut tmp, &x, h, &k3);
            dyn_.rhs(&tmp, &u, v, w0, &dphi, &mut k4, &mut ws);
            for c in 0..n {
                x[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
            }
            dyn_.check_box(&x, s[i + 1])?;
        }
        states.extend_from_slice(&x);
    }
    Trajectory::new(Param::PseudoTime, s.to_vec(), states, n)
}

/// Classical RK4 for the Carathéodory solution of `ẋ = g₀ + Σ gᵢ u̇ᵢ` on `grid`,
/// with `u̇` taken from the exact segment derivatives.
pub fn caratheodory(dyn_: &Dynamics, x0: &[f64], u: &ControlPath, v: &OrdinaryControl, grid: &[f64]) -> Result<Trajectory> {
    let n = dyn_.n;
    if u.dim() != dyn_.m || v.dim() != dyn_.q {
        return Err(Error::Config("control dimensions do not match the dynamics".into()));
    }
    if x0.len() != n {
        return Err(Error::Config("initial state has the wrong dimension".into()));
    }
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config("integration grid must increase strictly".into()));
    }
    let (lo, hi) = (grid[0], *grid.last().unwrap());
    if lo < 0.0 || hi > u.horizon() {
        return Err(Error::Domain("integration grid outside [0, T]".into()));
    }
    if let Some(j) = u.discontinuity_set().iter().find(|j| j.time >= lo && j.time <= hi) {
        return Err(Error::Precondition(format!("control jumps at t = {} inside the grid span", j.time)));
    }
    if hi == u.horizon() && u.is_divergent() {
        return Err(Error::Precondition("control has unbounded variation on the grid span".into()));
    }
    let mut states = Vec::with_capacity(grid.len() * n);
    states.extend_from_slice(x0);
    let mut x = x0.to_vec();
    let mut ws = dyn_.workspace();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for i in 0..grid.len() - 1 {
        let (ta, tb) = (grid[i], grid[i + 1]);
        let h = tb - ta;
        let tm = ta + 0.5 * h;
        let j = u.segment_index(tm);
        let va = v.value(ta);
        let (ua, da) = (u.segment_value(j, ta), u.segment_derivative(j, ta));
        let (um, dm) = (u.segment_value(j, tm), u.segment_derivative(j, tm));
        let (ub, db) = (u.segment_value(j, tb), u.segment_derivative(j, tb));
        dyn_.rhs(&x, &ua, va, 1.0, &da, &mut k1, &mut ws);
        axpy(&mut tmp, &x, 0.5 * h, &k1);
        dyn_.rhs(&tmp, &um, va, 1.0, &dm, &mut k2, &mut ws);
        axpy(&mut tmp, &x, 0.5 * h, &k2);
        dyn_.rhs(&tmp, &um, va, 1.0, &dm, &mut k3, &mut ws);
        axpy(&mut tmp, &x, h, &k3);
        dyn_.rhs(&tmp, &ub, va, 1.0, &db, &mut k4, &mut ws);
        for c in 0..n {
            x[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
        dyn_.check_box(&x, tb)?;
        states.extend_from_slice(&x);
    }
    Trajectory::new(Param::Time, grid.to_vec(), states, n)
}

/// Grid on `[t0, t1]` uniform in graph arc length `t + Var_[0,t](u)`, with all
/// breakpoints of `u` inside the span added as nodes.
pub fn arc_length_grid(u: &ControlPath, t0: f64, t1: f64, cells: usize) -> Result<Vec<f64>> {
    if !(0.0 <= t0 && t0 < t1 && t1 <= u.horizon()) || cells == 0 {
        return Err(Error::Domain(format!("bad arc-length grid span [{t0}, {t1}]")));
    }
    let bp = u.breakpoints();
    let first = u.segment_index(t0);
    // arc length of each segment portion inside [t0, t1]
    let mut portions = Vec::new();
    let mut total = 0.0;
    for j in first..u.segment_count() {
        let (a, b) = u.segment_interval(j);
        if a >= t1 {
            break;
        }
        let (pa, pb) = (a.max(t0), b.min(t1));
        if pb <= pa {
            continue;
        }
        let len = u.segment_profile(j, pa, pb).arc_to(pb);
        if !len.is_finite() {
            return Err(Error::Precondition("unbounded variation inside the grid span".into()));
        }
        portions.push((j, pa, pb, total));
        total += len;
    }
    let h = total / cells as f64;
    let mut grid = Vec::with_capacity(cells + bp.len() + 1);
    let mut k = 1usize;
    for &(j, pa, pb, start) in &portions {
        if grid.last().is_none_or(|&l| pa > l) {
            grid.push(pa);
        }
        let prof = u.segment_profile(j, pa, pb);
        let end = start + prof.arc_to(pb);
        while k < cells && (k as f64) * h < end {
            let target = k as f64 * h;
            if target > start {
                let t = prof.invert_arc(target - start);
                if t > *grid.last().unwrap() && t < pb {
                    grid.push(t);
                }
            }
            k += 1;
        }
    }
    if t1 > *grid.last().unwrap() {
        grid.push(t1);
    }
    Ok(grid)
}

/// Merges extra nodes into a strictly increasing grid (nodes outside the span are ignored).
pub fn with_nodes(grid: &[f64], extra: &[f64]) -> Vec<f64> {
    let (lo, hi) = (grid[0], *grid.last().unwrap());
    let mut all: Vec<f64> = grid.iter().copied().chain(extra.iter().copied().filter(|&x| x >= lo && x <= hi)).collect();
    all.sort_by(|a, b| a.total_cmp(b));
    all.dedup();
    all
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementReport {
    pub cells: usize,
    /// sup-difference between the last two refinement levels
    pub difference: f64,
    pub converged: bool,
}

/// Runs `run(cells)` with doubling cell counts until two successive results
/// differ by less than `tol` at the coarser nodes, or `cap` is reached.
pub fn refine<F>(mut run: F, cells0: usize, tol: f64, cap: usize) -> Result<(Trajectory, RefinementReport)>
where
    F: FnMut(usize) -> Result<Trajectory>,
{
    let mut cells = cells0.max(1);
    let mut prev = run(cells)?;
    let mut difference = f64::INFINITY;
    while cells * 2 <= cap {
        cells *= 2;
        let cur = run(cells)?;
        difference = prev.sup_distance(&cur, f64::NEG_INFINITY, f64::INFINITY);
        prev = cur;
        if difference < tol {
            return Ok((
                prev,
                RefinementReport {
                    cells,
                    difference,
                    converged: true,
                },
            ));
        }
    }
    Ok((
        prev,
        RefinementReport {
            cells,
            difference,
            converged: false,
        },
    ))
}

/// Carathéodory solution on `[t0, t1]` on arc-length grids, refined by halving.
pub fn caratheodory_refined(
    dyn_: &Dynamics,
    x0: &[f64],
    u: &ControlPath,
    v: &OrdinaryControl,
    t1: f64,
    extra_nodes: &[f64],
) -> Result<(Trajectory, RefinementReport)> {
    refine(
        |cells| {
            let grid = with_nodes(&arc_length_grid(u, 0.0, t1, cells)?, extra_nodes);
            caratheodory(dyn_, x0, u, v, &grid)
        },
        DEFAULT_CELLS,
        REFINE_TOL,
        MAX_CELLS,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bv::ControlSet;
    use crate::completion::{Horizon, SpaceTimePath, StPiece};
    use crate::scenarios::{example_dynamics, spiral_control};

    #[test]
    fn constant_control_keeps_state() {
        let d = example_dynamics();
        let u = ControlPath::constant(ControlSet::unit_disc(), 1.0, vec![1.0, 0.0]).unwrap();
        let grid = arc_length_grid(&u, 0.0, 1.0, 64).unwrap();
        let x = caratheodory(&d, &[1.0, 0.0, 1.0], &u, &OrdinaryControl::none(1.0), &grid).unwrap();
        assert_eq!(x.last(), &[1.0, 0.0, 1.0]);
    }

    #[test]
    fn plateau_cells_are_bitwise_constant() {
        let d = example_dynamics();
        let mut p = SpaceTimePath::new(2, None);
        p.push(StPiece::Straight { t0: 0.0, t1: 0.5, u0: vec![1.0, 0.0], u1: vec![1.0, 0.0] }).unwrap();
        p.push(StPiece::Straight { t0: 0.5, t1: 1.0, u0: vec![1.0, 0.0], u1: vec![1.0, 0.0] }).unwrap();
        let stc = p.sample(0.01, &OrdinaryControl::none(1.0), Horizon::Finite(1.0)).unwrap();
        let xi = integrate_spacetime(&d, &[0.3, 0.1, 2.0], &stc).unwrap();
        for i in 0..xi.len() {
            assert_eq!(xi.state(i), &[0.3, 0.1, 2.0]);
        }
    }

    #[test]
    fn arc_length_grid_contains_breakpoints() {
        let u = ControlPath::polyline(
            ControlSet::unit_disc(),
            vec![0.0, 0.3, 1.0],
            vec![vec![0.0, 0.0], vec![0.5, 0.0], vec![0.5, 0.5]],
        )
        .unwrap();
        let g = arc_length_grid(&u, 0.0, 1.0, 100).unwrap();
        assert!(g.contains(&0.3));
        assert_eq!(g[0], 0.0);
        assert_eq!(*g.last().unwrap(), 1.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn jumps_inside_span_are_rejected() {
        let d = example_dynamics();
        let u = crate::scenarios::one_jump_control(1.0).unwrap();
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let r = caratheodory(&d, &[1.0, 0.0, 1.0], &u, &OrdinaryControl::none(1.0), &grid);
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn spiral_matches_closed_form() {
        let t_end = 1.0;
        let d = example_dynamics();
        let u = spiral_control(t_end).unwrap();
        let grid = arc_length_grid(&u, 0.0, 0.9, 1 << 14).unwrap();
        let x = caratheodory(&d, &[1.0, 0.0, 1.0], &u, &OrdinaryControl::none(t_end), &grid).unwrap();
        let mut err = 0.0f64;
        for (i, &t) in x.grid().iter().enumerate() {
            err = err.max((x.state(i)[2] - (-t / (t_end * (t_end - t))).exp()).abs());
        }
        assert!(err < 1e-6, "{err}");
    }
}
