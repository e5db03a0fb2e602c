use serde::{Deserialize, Serialize};

use super::control_set::ControlSet;
use crate::error::{Error, Result};
use crate::linalg::{dist, lerp};

/// Matching tolerance between declared jump limits and segment endpoints.
pub const CONTINUITY_TOL: f64 = 1e-9;

/// One piece of a control path on `[b_j, b_{j+1}]`.
///
/// Analytic kinds are planar and evaluated in absolute time; they carry a
/// closed-form speed so that their variation is exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Segment {
    /// Straight motion from `start` to `end` across the segment interval.
    Affine { start: Vec<f64>, end: Vec<f64> },
    /// `(cos θ, sin θ)` with `θ(t) = 1/(horizon - t) - offset`; speed `1/(horizon - t)^2`.
    /// Divergent (unbounded variation) when the segment ends at `horizon`.
    Spiral { horizon: f64, offset: f64 },
    /// `center + radius (cos θ, sin θ)` with polynomial angle `θ(t) = Σ coeffs[k] t^k`.
    CircleAngle {
        center: Vec<f64>,
        radius: f64,
        coeffs: Vec<f64>,
    },
}

impl Segment {
    pub fn constant(value: Vec<f64>) -> Self {
        Segment::Affine {
            start: value.clone(),
            end: value,
        }
    }

    pub fn is_analytic(&self) -> bool {
        !matches!(self, Segment::Affine { .. })
    }

    pub fn dim(&self) -> usize {
        match self {
            Segment::Affine { start, .. } => start.len(),
            _ => 2,
        }
    }

    /// Value at `t` for a segment living on `[a, b]`.
    pub fn value(&self, a: f64, b: f64, t: f64) -> Vec<f64> {
        match self {
            Segment::Affine { start, end } => {
                if t <= a {
                    start.clone()
                } else if t >= b {
                    end.clone()
                } else {
                    lerp(start, end, (t - a) / (b - a))
                }
            }
            Segment::Spiral { horizon, offset } => {
                let th = 1.0 / (horizon - t) - offset;
                vec![th.cos(), th.sin()]
            }
            Segment::CircleAngle { center, radius, coeffs } => {
                let th = poly(coeffs, t);
                vec![center[0] + radius * th.cos(), center[1] + radius * th.sin()]
            }
        }
    }

    pub fn derivative(&self, a: f64, b: f64, t: f64) -> Vec<f64> {
        match self {
            Segment::Affine { start, end } => start.iter().zip(end).map(|(s, e)| (e - s) / (b - a)).collect(),
            Segment::Spiral { horizon, offset } => {
                let d = horizon - t;
                let th = 1.0 / d - offset;
                let w = 1.0 / (d * d);
                vec![-w * th.sin(), w * th.cos()]
            }
            Segment::CircleAngle { radius, coeffs, .. } => {
                let th = poly(coeffs, t);
                let w = radius * poly_derivative(coeffs, t);
                vec![-w * th.sin(), w * th.cos()]
            }
        }
    }

    pub fn speed(&self, a: f64, b: f64, t: f64) -> f64 {
        match self {
            Segment::Affine { start, end } => dist(start, end) / (b - a),
            Segment::Spiral { horizon, .. } => {
                let d = horizon - t;
                1.0 / (d * d)
            }
            Segment::CircleAngle { radius, coeffs, .. } => (radius * poly_derivative(coeffs, t)).abs(),
        }
    }

    /// Exact variation over `[t0, t1] ⊆ [a, b]`.
    pub fn variation(&self, a: f64, b: f64, t0: f64, t1: f64) -> f64 {
        if t1 <= t0 {
            return 0.0;
        }
        match self {
            Segment::Affine { start, end } => {
                let len = dist(start, end);
                if t0 <= a && t1 >= b {
                    len
                } else {
                    len * ((t1 - t0) / (b - a))
                }
            }
            Segment::Spiral { horizon, .. } => {
                if t1 >= *horizon {
                    f64::INFINITY
                } else {
                    // 1/(H - t1) - 1/(H - t0) without cancellation
                    (t1 - t0) / ((horizon - t1) * (horizon - t0))
                }
            }
            Segment::CircleAngle { radius, coeffs, .. } => radius.abs() * angle_variation(coeffs, t0, t1),
        }
    }

    fn validate(&self, a: f64, b: f64) -> Result<()> {
        match self {
            Segment::Affine { start, end } => {
                if start.len() != end.len() || start.is_empty() {
                    return Err(Error::Invariant("affine segment endpoints differ in dimension".into()));
                }
                if start.iter().chain(end).any(|x| !x.is_finite()) {
                    return Err(Error::Invariant("affine segment has non-finite endpoint".into()));
                }
            }
            Segment::Spiral { horizon, offset } => {
                if !(horizon.is_finite() && offset.is_finite()) || *horizon < b {
                    return Err(Error::Invariant(format!(
                        "spiral horizon {horizon} precedes its segment end {b}"
                    )));
                }
                if *horizon <= a {
                    return Err(Error::Invariant("spiral segment starts at or after its horizon".into()));
                }
            }
            Segment::CircleAngle { center, radius, coeffs } => {
                if center.len() != 2 || coeffs.is_empty() || !radius.is_finite() || *radius < 0.0 {
                    return Err(Error::Invariant("circle-angle segment needs a planar center, radius >= 0 and coefficients".into()));
                }
            }
        }
        Ok(())
    }
}

fn poly(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ck| acc * t + ck)
}

fn poly_derivative(c: &[f64], t: f64) -> f64 {
    c.iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (k, &ck)| acc * t + k as f64 * ck)
}

/// `∫ |θ'|` over `[t0, t1]`: sum of |Δθ| across the monotone pieces of θ.
fn angle_variation(c: &[f64], t0: f64, t1: f64) -> f64 {
    let cuts = angle_cuts(c, t0, t1);
    cuts.windows(2).map(|w| (poly(c, w[1]) - poly(c, w[0])).abs()).sum()
}

/// `t0`, the sign changes of θ' inside `(t0, t1)` (scan + bisection), then `t1`.
fn angle_cuts(c: &[f64], t0: f64, t1: f64) -> Vec<f64> {
    const SCAN: usize = 256;
    let mut cuts = vec![t0];
    let h = (t1 - t0) / SCAN as f64;
    let mut prev = poly_derivative(c, t0);
    for i in 1..=SCAN {
        let x = if i == SCAN { t1 } else { t0 + h * i as f64 };
        let cur = poly_derivative(c, x);
        if prev * cur < 0.0 {
            let (mut lo, mut hi) = (x - h, x);
            let s_lo = prev.signum();
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if poly_derivative(c, mid).signum() == s_lo {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            cuts.push(0.5 * (lo + hi));
        }
        if cur != 0.0 {
            prev = cur;
        }
    }
    cuts.push(t1);
    cuts
}

/// Variation of one segment measured from `t0`, cheap to evaluate repeatedly.
#[derive(Debug, Clone)]
pub struct SegmentProfile<'a> {
    seg: &'a Segment,
    a: f64,
    b: f64,
    t0: f64,
    t1: f64,
    cuts: Vec<f64>,
    cum: Vec<f64>,
}

impl<'a> SegmentProfile<'a> {
    pub fn new(seg: &'a Segment, a: f64, b: f64, t0: f64, t1: f64) -> Self {
        let (cuts, cum) = match seg {
            Segment::CircleAngle { radius, coeffs, .. } => {
                let cuts = angle_cuts(coeffs, t0, t1);
                let mut cum = vec![0.0];
                for w in cuts.windows(2) {
                    let last = *cum.last().unwrap();
                    cum.push(last + radius.abs() * (poly(coeffs, w[1]) - poly(coeffs, w[0])).abs());
                }
                (cuts, cum)
            }
            _ => (Vec::new(), Vec::new()),
        };
        SegmentProfile {
            seg,
            a,
            b,
            t0,
            t1,
            cuts,
            cum,
        }
    }

    /// `Var_[t0, t]` of the segment.
    pub fn var_to(&self, t: f64) -> f64 {
        match self.seg {
            Segment::CircleAngle { radius, coeffs, .. } => {
                if t <= self.t0 {
                    return 0.0;
                }
                let k = self.cuts.partition_point(|&c| c <= t).saturating_sub(1).min(self.cuts.len() - 2);
                self.cum[k] + radius.abs() * (poly(coeffs, t) - poly(coeffs, self.cuts[k])).abs()
            }
            _ => self.seg.variation(self.a, self.b, self.t0, t),
        }
    }

    /// Graph arc length `(t - t0) + Var_[t0, t]`.
    pub fn arc_to(&self, t: f64) -> f64 {
        (t - self.t0) + self.var_to(t)
    }

    /// Time at which the graph arc length from `t0` reaches `target`.
    pub fn invert_arc(&self, target: f64) -> f64 {
        if target <= 0.0 {
            return self.t0;
        }
        if target >= self.arc_to(self.t1) {
            return self.t1;
        }
        crate::linalg::bisect_increasing(|t| self.arc_to(t), self.t0, self.t1, target)
    }
}

/// A declared discontinuity: `u(τ⁻)`, `u(τ)`, `u(τ⁺)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub time: f64,
    pub left: Vec<f64>,
    pub value: Vec<f64>,
    pub right: Vec<f64>,
}

impl Jump {
    pub fn left_size(&self) -> f64 {
        dist(&self.value, &self.left)
    }

    pub fn right_size(&self) -> f64 {
        dist(&self.right, &self.value)
    }
}

/// Continuous portion or jump encountered when walking a path over an interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Piece {
    Smooth { segment: usize, t0: f64, t1: f64 },
    /// Jump record `index`; `left_half`/`right_half` say which halves fall in the interval.
    Jump { index: usize, left_half: bool, right_half: bool },
}

/// Serialized form of a [`ControlPath`] (the scenario file format).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlPathSpec {
    pub horizon: f64,
    pub set: ControlSet,
    pub initial: Vec<f64>,
    pub breakpoints: Vec<f64>,
    pub segments: Vec<Segment>,
    #[serde(default)]
    pub jumps: Vec<Jump>,
    /// Value assigned at `T` when the path has unbounded variation near `T`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal: Option<Vec<f64>>,
}

/// Control `u : [0, T] → U` given piecewise, with jump records and exact
/// per-segment variation.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPath {
    spec: ControlPathSpec,
    /// jump record at breakpoint `j`, if any
    jump_at: Vec<Option<usize>>,
    seg_var: Vec<f64>,
    /// prefix sums of `seg_var`
    seg_prefix: Vec<f64>,
    /// prefix sums of full jump sizes at breakpoints
    jump_prefix: Vec<f64>,
}

impl ControlPath {
    pub fn new(spec: ControlPathSpec) -> Result<Self> {
        let s = &spec;
        s.set.validate()?;
        let m = s.set.dim();
        if !(s.horizon > 0.0 && s.horizon.is_finite()) {
            return Err(Error::Invariant("horizon must be positive and finite".into()));
        }
        let bp = &s.breakpoints;
        if bp.len() < 2 || bp[0] != 0.0 || *bp.last().unwrap() != s.horizon {
            return Err(Error::Invariant("breakpoints must run from 0 to the horizon".into()));
        }
        if bp.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Invariant("breakpoints must be strictly increasing".into()));
        }
        if s.segments.len() != bp.len() - 1 {
            return Err(Error::Invariant(format!(
                "{} segments for {} breakpoints",
                s.segments.len(),
                bp.len()
            )));
        }
        if s.initial.len() != m {
            return Err(Error::Invariant("initial value has wrong dimension".into()));
        }
        for (j, seg) in s.segments.iter().enumerate() {
            seg.validate(bp[j], bp[j + 1])?;
            if seg.dim() != m {
                return Err(Error::Invariant(format!("segment {j} has dimension {} != {m}", seg.dim())));
            }
            if let Segment::Spiral { horizon, .. } = seg {
                if *horizon == bp[j + 1] && j + 1 != s.segments.len() {
                    return Err(Error::Invariant("only the last segment may diverge".into()));
                }
                if *horizon == bp[j + 1] && *horizon != s.horizon {
                    return Err(Error::Invariant("divergent spiral must end at the path horizon".into()));
                }
            }
        }

        let mut jump_at = vec![None; bp.len()];
        let mut last_time = f64::NEG_INFINITY;
        for (idx, jmp) in s.jumps.iter().enumerate() {
            if !(jmp.time > last_time) {
                return Err(Error::Invariant("jumps must be strictly ordered by time".into()));
            }
            last_time = jmp.time;
            let Some(j) = bp.iter().position(|&b| b == jmp.time) else {
                return Err(Error::Invariant(format!("jump at {} is not at a breakpoint", jmp.time)));
            };
            if [&jmp.left, &jmp.value, &jmp.right].iter().any(|v| v.len() != m) {
                return Err(Error::Invariant("jump values have wrong dimension".into()));
            }
            jump_at[j] = Some(idx);
        }

        let divergent = matches!(
            s.segments.last(),
            Some(Segment::Spiral { horizon, .. }) if *horizon == s.horizon
        );
        if divergent && s.terminal.is_none() {
            return Err(Error::Invariant("divergent path needs a terminal value u(T)".into()));
        }
        if let Some(term) = &s.terminal {
            if term.len() != m {
                return Err(Error::Invariant("terminal value has wrong dimension".into()));
            }
        }

        let n = s.segments.len();
        let seg_var: Vec<f64> = (0..n)
            .map(|j| s.segments[j].variation(bp[j], bp[j + 1], bp[j], bp[j + 1]))
            .collect();
        let mut seg_prefix = vec![0.0; n + 1];
        for j in 0..n {
            seg_prefix[j + 1] = seg_prefix[j] + seg_var[j];
        }

        let path = ControlPath {
            spec,
            jump_at,
            seg_var,
            seg_prefix,
            jump_prefix: Vec::new(),
        };
        path.check_limits()?;
        let mut path = path;
        let nb = path.spec.breakpoints.len();
        let mut jp = vec![0.0; nb + 1];
        for j in 0..nb {
            let full = path.jump_at[j]
                .map(|i| path.spec.jumps[i].left_size() + path.spec.jumps[i].right_size())
                .unwrap_or(0.0);
            jp[j + 1] = jp[j] + full;
        }
        path.jump_prefix = jp;
        path.check_membership()?;
        Ok(path)
    }

    /// Polyline through `(times[i], values[i])` with affine segments.
    pub fn polyline(set: ControlSet, times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != values.len() || times.len() < 2 {
            return Err(Error::Invariant("polyline needs matching times/values (>= 2)".into()));
        }
        let segments = values
            .windows(2)
            .map(|w| Segment::Affine {
                start: w[0].clone(),
                end: w[1].clone(),
            })
            .collect();
        Self::new(ControlPathSpec {
            horizon: *times.last().unwrap(),
            set,
            initial: values[0].clone(),
            breakpoints: times,
            segments,
            jumps: Vec::new(),
            terminal: None,
        })
    }

    pub fn constant(set: ControlSet, horizon: f64, value: Vec<f64>) -> Result<Self> {
        Self::polyline(set, vec![0.0, horizon], vec![value.clone(), value])
    }

    fn check_limits(&self) -> Result<()> {
        let s = &self.spec;
        let bp = &s.breakpoints;
        let n = s.segments.len();
        for j in 0..bp.len() {
            let from_left = (j > 0).then(|| self.segment_value(j - 1, bp[j]));
            let from_right = (j < n).then(|| self.segment_value(j, bp[j]));
            match self.jump_at[j] {
                Some(i) => {
                    let jmp = &s.jumps[i];
                    if let Some(l) = &from_left {
                        if dist(l, &jmp.left) > CONTINUITY_TOL {
                            return Err(Error::Invariant(format!(
                                "jump at {} left value does not match the segment limit",
                                jmp.time
                            )));
                        }
                    } else if dist(&jmp.left, &jmp.value) > 0.0 {
                        return Err(Error::Invariant("a jump at t = 0 has no left limit; set left = value".into()));
                    }
                    if let Some(r) = &from_right {
                        if dist(r, &jmp.right) > CONTINUITY_TOL {
                            return Err(Error::Invariant(format!(
                                "jump at {} right value does not match the segment limit",
                                jmp.time
                            )));
                        }
                    } else if dist(&jmp.right, &jmp.value) > 0.0 {
                        return Err(Error::Invariant("a jump at t = T has no right limit; set right = value".into()));
                    }
                }
                None => {
                    if let (Some(l), Some(r)) = (&from_left, &from_right) {
                        if dist(l, r) > CONTINUITY_TOL {
                            return Err(Error::Invariant(format!(
                                "discontinuity at t = {} without a jump record",
                                bp[j]
                            )));
                        }
                    }
                }
            }
        }
        if dist(&self.value(0.0), &s.initial) > CONTINUITY_TOL {
            return Err(Error::Invariant("u(0) differs from the declared initial value".into()));
        }
        Ok(())
    }

    fn check_membership(&self) -> Result<()> {
        let s = &self.spec;
        let bp = &s.breakpoints;
        let bad = |v: &[f64]| !s.set.contains(v);
        for jmp in &s.jumps {
            if bad(&jmp.left) || bad(&jmp.value) || bad(&jmp.right) {
                return Err(Error::Invariant(format!("jump at {} leaves the control set", jmp.time)));
            }
        }
        if let Some(t) = &s.terminal {
            if bad(t) {
                return Err(Error::Invariant("terminal value outside the control set".into()));
            }
        }
        for (j, seg) in s.segments.iter().enumerate() {
            let (a, b) = (bp[j], bp[j + 1]);
            match seg {
                // convex set: endpoints suffice
                Segment::Affine { start, end } => {
                    if bad(start) || bad(end) {
                        return Err(Error::Invariant(format!("segment {j} leaves the control set")));
                    }
                }
                _ => {
                    let samples = 64;
                    let end = if self.is_divergent() && j + 1 == s.segments.len() {
                        // sample short of the accumulation point
                        a + (b - a) * (1.0 - 1e-6)
                    } else {
                        b
                    };
                    for i in 0..=samples {
                        let t = a + (end - a) * i as f64 / samples as f64;
                        if bad(&seg.value(a, b, t)) {
                            return Err(Error::Invariant(format!("segment {j} leaves the control set at t = {t}")));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> &ControlPathSpec {
        &self.spec
    }

    pub fn horizon(&self) -> f64 {
        self.spec.horizon
    }

    pub fn dim(&self) -> usize {
        self.spec.set.dim()
    }

    pub fn set(&self) -> &ControlSet {
        &self.spec.set
    }

    pub fn initial(&self) -> &[f64] {
        &self.spec.initial
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.spec.breakpoints
    }

    pub fn segments(&self) -> &[Segment] {
        &self.spec.segments
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.spec.jumps
    }

    pub fn segment_count(&self) -> usize {
        self.spec.segments.len()
    }

    /// Variation is unbounded on `[0, T)`.
    pub fn is_divergent(&self) -> bool {
        self.seg_var.last().is_some_and(|v| v.is_infinite())
    }

    pub fn has_jumps(&self) -> bool {
        self.spec
            .jumps
            .iter()
            .any(|j| j.left_size() > 0.0 || j.right_size() > 0.0)
    }

    /// Index of the segment whose closed interval contains `t`; interior
    /// breakpoints resolve to the segment on their right.
    pub fn segment_index(&self, t: f64) -> usize {
        let bp = &self.spec.breakpoints;
        crate::linalg::locate(bp, t)
    }

    pub fn segment_interval(&self, j: usize) -> (f64, f64) {
        (self.spec.breakpoints[j], self.spec.breakpoints[j + 1])
    }

    pub fn segment_value(&self, j: usize, t: f64) -> Vec<f64> {
        let (a, b) = self.segment_interval(j);
        self.spec.segments[j].value(a, b, t)
    }

    pub fn segment_derivative(&self, j: usize, t: f64) -> Vec<f64> {
        let (a, b) = self.segment_interval(j);
        self.spec.segments[j].derivative(a, b, t)
    }

    /// Variation profile of segment `j` restricted to `[t0, t1]`.
    pub fn segment_profile(&self, j: usize, t0: f64, t1: f64) -> SegmentProfile<'_> {
        let (a, b) = self.segment_interval(j);
        SegmentProfile::new(&self.spec.segments[j], a, b, t0, t1)
    }

    pub fn segment_speed(&self, j: usize, t: f64) -> f64 {
        let (a, b) = self.segment_interval(j);
        self.spec.segments[j].speed(a, b, t)
    }

    fn breakpoint_index(&self, t: f64) -> Option<usize> {
        let bp = &self.spec.breakpoints;
        let i = bp.partition_point(|&b| b < t);
        (i < bp.len() && bp[i] == t).then_some(i)
    }

    /// `u(t)`. Jump records fix the value at their time; on a divergent path
    /// `u(T)` is the declared terminal value.
    pub fn value(&self, t: f64) -> Vec<f64> {
        if let Some(j) = self.breakpoint_index(t) {
            if let Some(i) = self.jump_at[j] {
                return self.spec.jumps[i].value.clone();
            }
            if t == self.spec.horizon {
                if let Some(term) = &self.spec.terminal {
                    return term.clone();
                }
            }
        }
        let j = self.segment_index(t);
        self.segment_value(j, t)
    }

    pub fn left_limit(&self, t: f64) -> Vec<f64> {
        if let Some(j) = self.breakpoint_index(t) {
            if j == 0 {
                return self.value(t);
            }
            if j == self.segment_count() && self.is_divergent() {
                // no left limit at an accumulation point; report the terminal value
                return self.value(t);
            }
            return self.segment_value(j - 1, t);
        }
        self.value(t)
    }

    pub fn right_limit(&self, t: f64) -> Vec<f64> {
        if let Some(j) = self.breakpoint_index(t) {
            if j == self.segment_count() {
                return self.value(t);
            }
            return self.segment_value(j, t);
        }
        self.value(t)
    }

    /// Ordered jump records `(τ, u(τ⁻), u(τ), u(τ⁺))`.
    pub fn discontinuity_set(&self) -> Vec<Jump> {
        self.spec
            .jumps
            .iter()
            .filter(|j| j.left_size() > 0.0 || j.right_size() > 0.0)
            .cloned()
            .collect()
    }

    /// `Var_[a,b](u)`: exact segment variations plus jump magnitudes.
    /// Returns `f64::INFINITY` when `b = T` on a divergent path.
    pub fn total_variation(&self, a: f64, b: f64) -> Result<f64> {
        let t_end = self.spec.horizon;
        if !(a >= 0.0 && b <= t_end && a <= b) {
            return Err(Error::Domain(format!("interval [{a}, {b}] not within [0, {t_end}]")));
        }
        if a == b {
            return Ok(0.0);
        }
        if b == t_end && self.is_divergent() {
            return Ok(f64::INFINITY);
        }
        let bp = &self.spec.breakpoints;
        let jumps = &self.spec.jumps;
        let mut total = 0.0;
        // right half of a jump sitting at a
        if let Some(p) = self.breakpoint_index(a) {
            if let Some(i) = self.jump_at[p] {
                total += jumps[i].right_size();
            }
        }
        let sa = crate::linalg::locate(bp, a);
        // segment whose closed interval holds b from the left
        let sb = bp.partition_point(|&x| x < b).saturating_sub(1).min(self.segment_count() - 1);
        if sa == sb {
            total += self.spec.segments[sa].variation(bp[sa], bp[sa + 1], a, b);
        } else {
            total += self.spec.segments[sa].variation(bp[sa], bp[sa + 1], a, bp[sa + 1]);
            total += self.seg_prefix[sb] - self.seg_prefix[sa + 1];
            total += self.spec.segments[sb].variation(bp[sb], bp[sb + 1], bp[sb], b);
            // full jumps at breakpoints sa+1 ..= sb (all strictly inside (a, b))
            total += self.jump_prefix[sb + 1] - self.jump_prefix[sa + 1];
        }
        // left half of a jump sitting at b
        if let Some(q) = self.breakpoint_index(b) {
            if let Some(i) = self.jump_at[q] {
                total += jumps[i].left_size();
            }
        }
        Ok(total)
    }

    /// `Var_[0,t](u)`.
    pub fn cumulative_variation(&self, t: f64) -> Result<f64> {
        self.total_variation(0.0, t)
    }

    /// Walks `[a, b]` in order, yielding smooth portions and jump halves.
    pub fn pieces(&self, a: f64, b: f64) -> Vec<Piece> {
        let bp = &self.spec.breakpoints;
        let mut out = Vec::new();
        if a > b {
            return out;
        }
        let sa = crate::linalg::locate(bp, a);
        for j in sa..self.segment_count() {
            let (lo, hi) = (bp[j], bp[j + 1]);
            if lo > b {
                break;
            }
            // jump at the left breakpoint of this segment
            if lo >= a {
                if let Some(i) = self.jump_at[j] {
                    let left_half = lo > a;
                    let right_half = lo < b;
                    if left_half || right_half {
                        out.push(Piece::Jump {
                            index: i,
                            left_half,
                            right_half,
                        });
                    }
                }
            }
            let t0 = lo.max(a);
            let t1 = hi.min(b);
            if t1 > t0 {
                out.push(Piece::Smooth { segment: j, t0, t1 });
            }
        }
        // jump at b == last breakpoint reached
        if let Some(q) = self.breakpoint_index(b) {
            if q == self.segment_count() && b > a {
                if let Some(i) = self.jump_at[q] {
                    out.push(Piece::Jump {
                        index: i,
                        left_half: true,
                        right_half: false,
                    });
                }
            }
        }
        out
    }

    /// CSV rows `t, u_1..u_m, Var_[0,t](u)`.
    pub fn write_csv<W: std::io::Write>(&self, grid: &[f64], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim()).map(|i| format!("u{i}")));
        header.push("cum_variation".into());
        w.write_record(&header)?;
        for &t in grid {
            let mut row = vec![fmt(t)];
            row.extend(self.value(t).into_iter().map(fmt));
            row.push(fmt(self.cumulative_variation(t)?));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(&self.spec).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ControlPathSpec = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::new(spec)
    }
}

/// Shortest round-trip decimal representation; keeps CSV output deterministic.
pub fn fmt(x: f64) -> String {
    format!("{x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disc() -> ControlSet {
        ControlSet::unit_disc()
    }

    fn square() -> ControlSet {
        ControlSet::Box {
            lower: vec![-1.0, -1.0],
            upper: vec![1.0, 1.0],
        }
    }

    fn spiral(t_end: f64) -> ControlPath {
        ControlPath::new(ControlPathSpec {
            horizon: t_end,
            set: disc(),
            initial: vec![1.0, 0.0],
            breakpoints: vec![0.0, t_end],
            segments: vec![Segment::Spiral {
                horizon: t_end,
                offset: 1.0 / t_end,
            }],
            jumps: vec![],
            terminal: Some(vec![1.0, 0.0]),
        })
        .unwrap()
    }

    fn one_jump() -> ControlPath {
        ControlPath::new(ControlPathSpec {
            horizon: 1.0,
            set: disc(),
            initial: vec![1.0, 0.0],
            breakpoints: vec![0.0, 0.5, 1.0],
            segments: vec![Segment::constant(vec![1.0, 0.0]), Segment::constant(vec![0.0, 1.0])],
            jumps: vec![Jump {
                time: 0.5,
                left: vec![1.0, 0.0],
                value: vec![0.0, 1.0],
                right: vec![0.0, 1.0],
            }],
            terminal: None,
        })
        .unwrap()
    }

    #[test]
    fn constant_path_has_zero_variation() {
        let p = ControlPath::constant(disc(), 1.0, vec![0.3, 0.4]).unwrap();
        assert_eq!(p.total_variation(0.0, 1.0).unwrap(), 0.0);
        assert!(p.discontinuity_set().is_empty());
    }

    #[test]
    fn spiral_variation_closed_form() {
        let t_end = 1.0;
        let p = spiral(t_end);
        assert!(p.is_divergent());
        for &t in &[0.1, 0.5, 0.9, 0.99] {
            let v = p.total_variation(0.0, t).unwrap();
            let expect = t / (t_end * (t_end - t));
            assert!((v - expect).abs() <= 1e-12 * expect.max(1.0), "{v} vs {expect}");
        }
        assert_eq!(p.total_variation(0.0, t_end).unwrap(), f64::INFINITY);
        assert_eq!(p.value(t_end), vec![1.0, 0.0]);
        assert_eq!(p.value(0.0), vec![1.0, 0.0]);
    }

    #[test]
    fn piecewise_affine_corner() {
        // (0,0) -> (1,0) -> (1,1) on [0, 1]
        let p = ControlPath::polyline(
            square(),
            vec![0.0, 0.5, 1.0],
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]],
        )
        .unwrap();
        assert_eq!(p.total_variation(0.0, 1.0).unwrap(), 2.0);
        // brute-force supremum over a fine partition
        let n = 100_000;
        let mut sup = 0.0;
        let mut prev = p.value(0.0);
        for i in 1..=n {
            let cur = p.value(i as f64 / n as f64);
            sup += dist(&prev, &cur);
            prev = cur;
        }
        assert!((sup - 2.0).abs() < 1e-6);
    }

    #[test]
    fn jump_halves_split_at_endpoints() {
        let p = one_jump();
        let full = p.total_variation(0.0, 1.0).unwrap();
        assert!((full - 2f64.sqrt()).abs() < 1e-15);
        // jump sits at 0.5 with u(0.5) = right value: left half carries it all
        assert!((p.total_variation(0.0, 0.5).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(p.total_variation(0.5, 1.0).unwrap(), 0.0);
        let recs = p.discontinuity_set();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].time, 0.5);
        assert_eq!(recs[0].left, vec![1.0, 0.0]);
        assert_eq!(recs[0].right, vec![0.0, 1.0]);
        assert_eq!(p.left_limit(0.5), vec![1.0, 0.0]);
        assert_eq!(p.right_limit(0.5), vec![0.0, 1.0]);
    }

    #[test]
    fn two_jumps_are_ordered() {
        let p = ControlPath::new(ControlPathSpec {
            horizon: 1.0,
            set: disc(),
            initial: vec![1.0, 0.0],
            breakpoints: vec![0.0, 0.25, 0.75, 1.0],
            segments: vec![
                Segment::constant(vec![1.0, 0.0]),
                Segment::constant(vec![0.0, 1.0]),
                Segment::constant(vec![-1.0, 0.0]),
            ],
            jumps: vec![
                Jump { time: 0.25, left: vec![1.0, 0.0], value: vec![0.0, 0.0], right: vec![0.0, 1.0] },
                Jump { time: 0.75, left: vec![0.0, 1.0], value: vec![-1.0, 0.0], right: vec![-1.0, 0.0] },
            ],
            terminal: None,
        })
        .unwrap();
        let recs = p.discontinuity_set();
        assert_eq!(recs.iter().map(|j| j.time).collect::<Vec<_>>(), vec![0.25, 0.75]);
        assert_eq!(recs[0].value, vec![0.0, 0.0]);
        assert!((p.total_variation(0.0, 1.0).unwrap() - (2.0 + 2f64.sqrt())).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_paths() {
        // interval outside horizon
        let p = one_jump();
        assert!(matches!(p.total_variation(0.0, 1.5), Err(Error::Domain(_))));
        assert!(matches!(p.total_variation(0.6, 0.4), Err(Error::Domain(_))));
        // undeclared discontinuity
        let bad = ControlPath::new(ControlPathSpec {
            horizon: 1.0,
            set: disc(),
            initial: vec![1.0, 0.0],
            breakpoints: vec![0.0, 0.5, 1.0],
            segments: vec![Segment::constant(vec![1.0, 0.0]), Segment::constant(vec![0.0, 1.0])],
            jumps: vec![],
            terminal: None,
        });
        assert!(matches!(bad, Err(Error::Invariant(_))));
        // jump away from a breakpoint
        let off = ControlPath::new(ControlPathSpec {
            horizon: 1.0,
            set: disc(),
            initial: vec![1.0, 0.0],
            breakpoints: vec![0.0, 1.0],
            segments: vec![Segment::constant(vec![1.0, 0.0])],
            jumps: vec![Jump { time: 0.3, left: vec![1.0, 0.0], value: vec![1.0, 0.0], right: vec![1.0, 0.0] }],
            terminal: None,
        });
        assert!(off.is_err());
        // leaves the set
        let out = ControlPath::polyline(disc(), vec![0.0, 1.0], vec![vec![0.0, 0.0], vec![2.0, 0.0]]);
        assert!(out.is_err());
        // divergent without terminal value
        let div = ControlPath::new(ControlPathSpec {
            horizon: 1.0,
            set: disc(),
            initial: vec![1.0, 0.0],
            breakpoints: vec![0.0, 1.0],
            segments: vec![Segment::Spiral { horizon: 1.0, offset: 1.0 }],
            jumps: vec![],
            terminal: None,
        });
        assert!(div.is_err());
    }

    #[test]
    fn circle_angle_variation_handles_turning_points() {
        // θ(t) = 4 t (1 - t): rises to 1 at t = 1/2 then returns to 0
        let p = ControlPath::new(ControlPathSpec {
            horizon: 1.0,
            set: disc(),
            initial: vec![1.0, 0.0],
            breakpoints: vec![0.0, 1.0],
            segments: vec![Segment::CircleAngle {
                center: vec![0.0, 0.0],
                radius: 1.0,
                coeffs: vec![0.0, 4.0, -4.0],
            }],
            jumps: vec![],
            terminal: None,
        })
        .unwrap();
        assert!((p.total_variation(0.0, 1.0).unwrap() - 2.0).abs() < 1e-13);
        assert!((p.total_variation(0.0, 0.5).unwrap() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn toml_round_trip() {
        let p = one_jump();
        let text = p.to_toml().unwrap();
        let q = ControlPath::from_toml(&text).unwrap();
        assert_eq!(p, q);
        let s = spiral(2.0);
        assert_eq!(ControlPath::from_toml(&s.to_toml().unwrap()).unwrap(), s);
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let p = one_jump();
        let mut buf = Vec::new();
        p.write_csv(&[0.0, 0.5, 1.0], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "t,u1,u2,cum_variation");
        assert_eq!(lines.len(), 4);
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn pieces_cover_jumps_and_segments() {
        let p = one_jump();
        let pcs = p.pieces(0.0, 1.0);
        assert_eq!(
            pcs,
            vec![
                Piece::Smooth { segment: 0, t0: 0.0, t1: 0.5 },
                Piece::Jump { index: 0, left_half: true, right_half: true },
                Piece::Smooth { segment: 1, t0: 0.5, t1: 1.0 },
            ]
        );
        let left = p.pieces(0.0, 0.5);
        assert_eq!(left.last(), Some(&Piece::Jump { index: 0, left_half: true, right_half: false }));
    }
}
