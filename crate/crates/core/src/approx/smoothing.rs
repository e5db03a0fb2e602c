use super::mollifier::Mollifier;
use crate::bv::{Clock, ClockTerminal};
use crate::error::{Error, Result};
use crate::linalg::locate;

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingOptions {
    /// replace `σ_h` near each clock jump by two linear pieces through `(τ, σ(τ))`
    pub hit_jump_values: bool,
    /// table nodes per kernel radius
    pub nodes_per_radius: usize,
    /// table nodes per window, upper bound
    pub max_nodes: usize,
    /// quadrature half-nodes, lower and upper bound
    pub quad_min: usize,
    pub quad_max: usize,
}

impl Default for SmoothingOptions {
    fn default() -> Self {
        SmoothingOptions {
            hit_jump_values: true,
            nodes_per_radius: 32,
            max_nodes: 1 << 16,
            quad_min: 64,
            quad_max: 8192,
        }
    }
}

/// Which extension of `σ` was convolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmoothingCase {
    /// finite `S̄`: odd reflection at 0, point reflection at `(T, S̄)`, square-root tail
    Reflected,
    /// divergent clock: window-wise point reflection on a partition, anchored at its points
    Piecewise,
    /// the clock itself, already continuous with finite `S̄`
    Exact,
}

/// Strictly increasing absolutely continuous approximation `σ_h` of a clock,
/// stored as a table of the excess `σ_h(t) - t` with linear interpolation.
#[derive(Debug, Clone)]
pub struct SmoothedClock {
    horizon: f64,
    h: f64,
    case: SmoothingCase,
    t: Vec<f64>,
    sigma: Vec<f64>,
    w: Vec<f64>,
    /// `(t̄_h, s_h)` where the tail `s_h √((T-t̄_h)/(T-t))` starts
    tail: Option<(f64, f64)>,
    partition: Vec<f64>,
    /// largest `w(t₁) - w(t₂)`, `t₁ < t₂`, before repair
    pub pre_violation: f64,
    /// largest change made by the isotonic repair
    pub repair: f64,
    /// largest gap between the raw convolution and the imposed anchor values
    pub anchor_deviation: f64,
    /// clock jumps whose value was hit exactly
    pub jumps_hit: usize,
}

fn symmetric_sum(ext: &dyn Fn(f64) -> f64, t: f64, nodes: &[(f64, f64)]) -> f64 {
    nodes.iter().map(|&(c, w)| w * (ext(t - c) + ext(t + c))).sum()
}

/// Largest number of clock samples in any window of width `2r` inside `[a, b]`.
fn window_load(times: &[f64], a: f64, b: f64, r: f64) -> usize {
    let lo = times.partition_point(|&x| x < a - r);
    let hi = times.partition_point(|&x| x <= b + r);
    let ts = &times[lo..hi];
    let mut best = 0;
    let mut j = 0;
    for i in 0..ts.len() {
        while j < ts.len() && ts[j] <= ts[i] + 2.0 * r {
            j += 1;
        }
        best = best.max(j - i);
    }
    best
}

/// Pool-adjacent-violators projection onto nondecreasing sequences.
fn isotonic(y: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(y.len());
    for &v in y {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (b, nb) = blocks[blocks.len() - 1];
            let (a, na) = blocks[blocks.len() - 2];
            if a <= b {
                break;
            }
            blocks.pop();
            let n = na + nb;
            *blocks.last_mut().unwrap() = ((a * na as f64 + b * nb as f64) / n as f64, n);
        }
    }
    blocks.into_iter().flat_map(|(v, n)| std::iter::repeat_n(v, n)).collect()
}

fn max_drawdown(w: &[f64]) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut worst = 0.0f64;
    for &x in w {
        peak = peak.max(x);
        worst = worst.max(peak - x);
    }
    worst
}

struct Window {
    a: f64,
    b: f64,
    radius: f64,
    nodes: Vec<f64>,
    values: Vec<f64>,
    /// exact values at `a` and `b`, when anchored
    anchor_a: Option<f64>,
    anchor_b: Option<f64>,
}

fn window_nodes(clock: &Clock, a: f64, b: f64, r: f64, opts: &SmoothingOptions) -> Vec<f64> {
    let n = ((opts.nodes_per_radius as f64 * (b - a) / r).ceil() as usize).clamp(256, opts.max_nodes.max(256));
    let mut nodes: Vec<f64> = (0..=n).map(|i| if i == n { b } else { a + (b - a) * (i as f64 / n as f64) }).collect();
    let special: Vec<f64> = clock
        .jumps()
        .iter()
        .filter(|j| j.tau - r > a && j.tau + r < b)
        .flat_map(|j| [j.tau - r, j.tau, j.tau + r])
        .collect();
    let gap = 1e-9 * (b - a) / n as f64;
    nodes.retain(|&x| x == a || x == b || special.iter().all(|&p| (x - p).abs() > gap));
    nodes.extend(special);
    nodes.sort_by(|x, y| x.total_cmp(y));
    nodes.dedup();
    nodes
}

/// Replaces `σ_h` on `[τ-r, τ+r]` by linear pieces through `(τ, c)`, `c` the
/// clock value clamped so both pieces keep slope at least 1.
fn hit_jumps(clock: &Clock, win: &mut Window) -> usize {
    let mut hit = 0;
    let mut last_end = f64::NEG_INFINITY;
    let r = win.radius;
    for j in clock.jumps() {
        let (lo_t, hi_t) = (j.tau - r, j.tau + r);
        if !(lo_t > win.a && hi_t < win.b) || lo_t < last_end {
            continue;
        }
        let find = |x: f64| win.nodes.binary_search_by(|p| p.total_cmp(&x)).ok();
        let (Some(ia), Some(ic), Some(ib)) = (find(lo_t), find(j.tau), find(hi_t)) else {
            continue;
        };
        let (sa, sb) = (win.values[ia], win.values[ib]);
        let lo = sa + (j.tau - lo_t);
        let hi = sb - (hi_t - j.tau);
        if lo > hi {
            continue;
        }
        let c = j.value.clamp(lo, hi);
        for i in ia + 1..ib {
            let t = win.nodes[i];
            win.values[i] = if i == ic {
                c
            } else if t < j.tau {
                sa + (c - sa) * ((t - lo_t) / (j.tau - lo_t))
            } else {
                c + (sb - c) * ((t - j.tau) / (hi_t - j.tau))
            };
        }
        last_end = hi_t;
        hit += 1;
    }
    hit
}

impl SmoothedClock {
    /// Wraps a continuous finite clock unchanged; `None` if it jumps or diverges.
    pub fn exact(clock: &Clock) -> Option<Self> {
        if !clock.jumps().is_empty() || clock.is_divergent() {
            return None;
        }
        let t = clock.times().to_vec();
        let sigma = clock.values().to_vec();
        let w = t.iter().zip(&sigma).map(|(t, s)| s - t).collect();
        Some(SmoothedClock {
            horizon: clock.horizon(),
            h: f64::INFINITY,
            case: SmoothingCase::Exact,
            t,
            sigma,
            w,
            tail: None,
            partition: vec![0.0, clock.horizon()],
            pre_violation: 0.0,
            repair: 0.0,
            anchor_deviation: 0.0,
            jumps_hit: 0,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn case(&self) -> SmoothingCase {
        self.case
    }

    pub fn nodes(&self) -> &[f64] {
        &self.t
    }

    pub fn partition(&self) -> &[f64] {
        &self.partition
    }

    /// `(t̄_h, s_h)` for the reflected case.
    pub fn tail(&self) -> Option<(f64, f64)> {
        self.tail
    }

    /// Last time where `σ_h` is defined by the table (the tail covers `[t̄_h, T)`).
    pub fn table_end(&self) -> f64 {
        *self.t.last().unwrap()
    }

    fn tail_value(&self, t: f64) -> f64 {
        let (tb, sh) = self.tail.unwrap();
        if t >= self.horizon {
            f64::INFINITY
        } else {
            sh * ((self.horizon - tb) / (self.horizon - t)).sqrt()
        }
    }

    fn excess_table(&self, t: f64) -> f64 {
        let i = locate(&self.t, t);
        let (t0, t1) = (self.t[i], self.t[i + 1]);
        let (w0, w1) = (self.w[i], self.w[i + 1]);
        let lam = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        (w0 + (w1 - w0) * lam).clamp(w0.min(w1), w0.max(w1))
    }

    /// `σ_h(t) - t`. Beyond the table, the tail (reflected case) or a slope-1
    /// continuation (piecewise case) is used.
    pub fn excess(&self, t: f64) -> f64 {
        let end = self.table_end();
        let w_end = *self.w.last().unwrap();
        if t <= end {
            return self.excess_table(t.max(0.0));
        }
        match self.tail {
            Some(_) => (self.tail_value(t) - t).max(w_end),
            None => w_end,
        }
    }

    /// `σ_h(t)`; exact at table nodes.
    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t <= self.table_end() {
            let i = locate(&self.t, t);
            if t == self.t[i] {
                return self.sigma[i];
            }
            if t == self.t[i + 1] {
                return self.sigma[i + 1];
            }
            return t + self.excess_table(t);
        }
        match self.tail {
            Some(_) => self.tail_value(t),
            None => t + *self.w.last().unwrap(),
        }
    }

    /// `φ_{0h} = σ_h⁻¹`.
    pub fn inverse(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let n = self.sigma.len();
        let s_last = self.sigma[n - 1];
        if s <= s_last {
            let i = locate(&self.sigma, s);
            let (s0, s1) = (self.sigma[i], self.sigma[i + 1]);
            let lam = ((s - s0) / (s1 - s0)).clamp(0.0, 1.0);
            return self.t[i] + (self.t[i + 1] - self.t[i]) * lam;
        }
        match self.tail {
            Some((tb, sh)) => {
                let r = sh / s;
                self.horizon - r * r * (self.horizon - tb)
            }
            None => (self.t[n - 1] + (s - s_last)).min(self.horizon),
        }
    }

    /// `max(0, (t₂ - t₁) - (σ_h(t₂) - σ_h(t₁)))` measured on the excess.
    pub fn slope_violation(&self, t1: f64, t2: f64) -> f64 {
        let (a, b) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        (self.excess(a) - self.excess(b)).max(0.0)
    }
}

/// Convolves the (extended) clock with `ρ_h`, selecting the construction by
/// the clock's terminal behavior.
pub fn mollify_clock(clock: &Clock, h: f64, opts: &SmoothingOptions) -> Result<SmoothedClock> {
    match clock.terminal() {
        ClockTerminal::Finite(sbar) => reflected(clock, sbar, h, opts),
        ClockTerminal::Divergent => piecewise(clock, h, opts),
    }
}

fn quadrature(clock: &Clock, mol: &Mollifier, a: f64, b: f64, opts: &SmoothingOptions) -> Vec<(f64, f64)> {
    let load = window_load(clock.times(), a, b, mol.radius());
    let q = (16 * (load + 1)).clamp(opts.quad_min, opts.quad_max);
    mol.half_nodes(q)
}

fn reflected(clock: &Clock, sbar: f64, h: f64, opts: &SmoothingOptions) -> Result<SmoothedClock> {
    let big_t = clock.horizon();
    let mol = Mollifier::new(big_t, h)?;
    let r = mol.radius();
    let ext = |t: f64| -> f64 {
        if t < 0.0 {
            -clock.interp(-t)
        } else if t > big_t {
            2.0 * sbar - clock.interp(2.0 * big_t - t)
        } else {
            clock.interp(t)
        }
    };
    let half = quadrature(clock, &mol, 0.0, big_t, opts);

    let mut tb = big_t - r;
    let mut sh = 0.0;
    for _ in 0..64 {
        if clock.jump_at(tb).is_some() {
            tb -= 1e-3 * r;
        }
        sh = symmetric_sum(&ext, tb, &half);
        if sh >= 2.0 * (big_t - tb) * (1.0 + 1e-12) {
            break;
        }
        tb = big_t - 0.5 * (big_t - tb);
    }
    if sh < 2.0 * (big_t - tb) {
        return Err(Error::Diagnostic("no tail start with s_h >= 2(T - t̄_h) found".into()));
    }

    let nodes = window_nodes(clock, 0.0, tb, r, opts);
    let mut values: Vec<f64> = nodes.iter().map(|&t| symmetric_sum(&ext, t, &half)).collect();
    let anchor_deviation = values[0].abs();
    values[0] = 0.0;
    let mut win = Window {
        a: 0.0,
        b: tb,
        radius: r,
        nodes,
        values,
        anchor_a: Some(0.0),
        anchor_b: None,
    };
    let jumps_hit = if opts.hit_jump_values { hit_jumps(clock, &mut win) } else { 0 };
    let mut out = finish(big_t, h, SmoothingCase::Reflected, vec![win], vec![0.0])?;
    let s_end = *out.sigma.last().unwrap();
    out.tail = Some((tb, s_end));
    out.anchor_deviation = anchor_deviation;
    out.jumps_hit = jumps_hit;
    Ok(out)
}

/// Partition `T(1 - 3^{-i})` restricted to the clock table, moved off jump times.
fn piecewise_partition(clock: &Clock) -> Vec<f64> {
    let big_t = clock.horizon();
    let mut pts = vec![0.0];
    for i in 1..64 {
        let mut p = big_t * (1.0 - 3f64.powi(-i));
        let prev = *pts.last().unwrap();
        if clock.jump_at(p).is_some() {
            p += 1e-6 * (p - prev);
        }
        if p > clock.t_end() || p <= prev {
            break;
        }
        pts.push(p);
    }
    pts
}

fn piecewise(clock: &Clock, h: f64, opts: &SmoothingOptions) -> Result<SmoothedClock> {
    let partition = piecewise_partition(clock);
    if partition.len() < 2 {
        return Err(Error::Config(
            "clock table too short for the piecewise construction (raise S_max)".into(),
        ));
    }
    let mut windows = Vec::new();
    let mut anchor_deviation = 0.0f64;
    let mut jumps_hit = 0;
    for w in partition.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mol = Mollifier::new(b - a, h)?;
        let r = mol.radius();
        let (sa, sb) = (clock.interp(a), clock.interp(b));
        let ext = |t: f64| -> f64 {
            if t < a {
                2.0 * sa - clock.interp(2.0 * a - t)
            } else if t > b {
                2.0 * sb - clock.interp(2.0 * b - t)
            } else {
                clock.interp(t)
            }
        };
        let half = quadrature(clock, &mol, a, b, opts);
        let nodes = window_nodes(clock, a, b, r, opts);
        let mut values: Vec<f64> = nodes.iter().map(|&t| symmetric_sum(&ext, t, &half)).collect();
        let last = values.len() - 1;
        anchor_deviation = anchor_deviation.max((values[0] - sa).abs()).max((values[last] - sb).abs());
        values[0] = sa;
        values[last] = sb;
        let mut win = Window {
            a,
            b,
            radius: r,
            nodes,
            values,
            anchor_a: Some(sa),
            anchor_b: Some(sb),
        };
        if opts.hit_jump_values {
            jumps_hit += hit_jumps(clock, &mut win);
        }
        windows.push(win);
    }
    let mut out = finish(clock.horizon(), h, SmoothingCase::Piecewise, windows, partition)?;
    out.anchor_deviation = anchor_deviation;
    out.jumps_hit = jumps_hit;
    Ok(out)
}

/// Concatenates windows, measures and repairs monotonicity of the excess.
fn finish(
    horizon: f64,
    h: f64,
    case: SmoothingCase,
    windows: Vec<Window>,
    partition: Vec<f64>,
) -> Result<SmoothedClock> {
    let mut t = Vec::new();
    let mut sigma = Vec::new();
    let mut w = Vec::new();
    let mut raw_all = Vec::new();
    let mut repair = 0.0f64;
    for (k, win) in windows.iter().enumerate() {
        let raw: Vec<f64> = win.nodes.iter().zip(&win.values).map(|(t, s)| s - t).collect();
        raw_all.extend_from_slice(if k == 0 { &raw[..] } else { &raw[1..] });
        let lo = win.anchor_a.map(|s| s - win.a).unwrap_or(f64::NEG_INFINITY);
        let hi = win.anchor_b.map(|s| s - win.b).unwrap_or(f64::INFINITY);
        let mut fixed = isotonic(&raw);
        for x in fixed.iter_mut() {
            *x = x.clamp(lo, hi.max(lo));
        }
        let n = fixed.len();
        if win.anchor_a.is_some() {
            fixed[0] = lo;
        }
        if win.anchor_b.is_some() {
            fixed[n - 1] = hi;
        }
        for (a, b) in raw.iter().zip(&fixed) {
            repair = repair.max((a - b).abs());
        }
        let skip = if k == 0 { 0 } else { 1 };
        for i in skip..n {
            let tt = win.nodes[i];
            t.push(tt);
            w.push(fixed[i]);
            let exact = match (i, win.anchor_a, win.anchor_b) {
                (0, Some(s), _) => Some(s),
                (i, _, Some(s)) if i == n - 1 => Some(s),
                _ => None,
            };
            sigma.push(exact.unwrap_or(tt + fixed[i]));
        }
    }
    if let Some(i) = sigma.windows(2).position(|p| !(p[1] > p[0])) {
        return Err(Error::Invariant(format!(
            "smoothed clock table is not strictly increasing at t = {} (σ_h = {}, next t = {}, σ_h = {})",
            t[i],
            sigma[i],
            t[i + 1],
            sigma[i + 1]
        )));
    }
    Ok(SmoothedClock {
        horizon,
        h,
        case,
        t,
        sigma,
        w,
        tail: None,
        partition,
        pre_violation: max_drawdown(&raw_all),
        repair,
        anchor_deviation: 0.0,
        jumps_hit: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bv::ClockJump;
    use crate::completion::{build_completion, CompletionOptions, Partition};
    use crate::scenarios::spiral_control;
    use crate::OrdinaryControl;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn jump_clock(value: f64) -> Clock {
        Clock::new(
            1.0,
            &[(0.0, 0.0), (1.0, 3.0)],
            vec![ClockJump { tau: 0.5, s1: 1.0, s2: 2.0, value }],
            ClockTerminal::Finite(3.0),
        )
        .unwrap()
    }

    fn plain() -> SmoothingOptions {
        SmoothingOptions {
            hit_jump_values: false,
            ..Default::default()
        }
    }

    #[test]
    fn identity_clock_is_fixed() {
        let c = Clock::identity(1.0);
        let s = mollify_clock(&c, 4.0, &plain()).unwrap();
        for t in [0.0, 0.1, 0.3, 0.6] {
            assert!((s.eval(t) - t).abs() < 1e-13, "{t}: {}", s.eval(t));
        }
        assert_eq!(s.eval(0.0), 0.0);
    }

    #[test]
    fn jump_smoothed_to_midpoint() {
        for h in [4.0, 8.0, 16.0, 32.0] {
            let s = mollify_clock(&jump_clock(1.0), h, &plain()).unwrap();
            assert!((s.eval(0.5) - 1.5).abs() < 1e-3, "h = {h}: {}", s.eval(0.5));
        }
    }

    #[test]
    fn jump_value_post_pass_hits_clock_value() {
        let opts = SmoothingOptions::default();
        let s = mollify_clock(&jump_clock(1.2), 8.0, &opts).unwrap();
        assert_eq!(s.jumps_hit, 1);
        assert_eq!(s.eval(0.5), 1.2);
        assert_eq!(s.repair, 0.0);
    }

    #[test]
    fn slope_bound_and_tail() {
        let s = mollify_clock(&jump_clock(1.0), 4.0, &plain()).unwrap();
        let (tb, sh) = s.tail().unwrap();
        assert!(sh >= 2.0 * (1.0 - tb));
        assert!(s.eval(0.999_999) > s.eval(0.99));
        assert_eq!(s.eval(1.0), f64::INFINITY);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let (a, b): (f64, f64) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
            assert_eq!(s.slope_violation(a, b), 0.0);
        }
        assert!(s.pre_violation <= 1e-10);
        // inverse round trip, including the tail
        for t in [0.1, 0.5, 0.9, 0.99] {
            assert!((s.inverse(s.eval(t)) - t).abs() < 1e-9);
        }
    }

    #[test]
    fn spiral_clock_anchors_are_exact() {
        let u = spiral_control(1.0).unwrap();
        let c = build_completion(&u, &OrdinaryControl::none(1.0), &Partition::default(), &CompletionOptions::default())
            .unwrap();
        let s = mollify_clock(&c.clock, 4.0, &SmoothingOptions::default()).unwrap();
        assert_eq!(s.case(), SmoothingCase::Piecewise);
        assert!(s.partition().len() >= 3);
        for &p in s.partition() {
            assert_eq!(s.eval(p), c.clock.eval(p).unwrap());
        }
        assert!(s.pre_violation <= 1e-10, "{}", s.pre_violation);
    }

    #[test]
    fn isotonic_projection() {
        assert_eq!(isotonic(&[1.0, 3.0, 2.0, 4.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(max_drawdown(&[0.0, 2.0, 1.0, 3.0, 0.5]), 2.5);
    }
}
