use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::curve::SpaceTimePath;
use super::segment::{append_segment, SegmentLengths};
use super::spacetime::{Horizon, SpaceTimeControl};
use crate::bv::{Clock, ClockJump, ClockTerminal, ControlPath, OrdinaryControl};
use crate::error::{Error, Result};

/// Partition `0 = t̄₀ < t̄₁ < …` of `[0, T]` used to split the control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Partition {
    /// `t̄ᵢ = T(1 - ratioⁱ)`.
    Geometric { ratio: f64 },
    /// Explicit points; must start at 0 and end at `T`.
    Explicit { points: Vec<f64> },
}

impl Default for Partition {
    fn default() -> Self {
        Partition::Geometric { ratio: 0.5 }
    }
}

impl Partition {
    fn validate(&self, horizon: f64) -> Result<()> {
        match self {
            Partition::Geometric { ratio } => {
                if !(*ratio > 0.0 && *ratio < 1.0) {
                    return Err(Error::Config("geometric partition ratio must lie in (0, 1)".into()));
                }
            }
            Partition::Explicit { points } => {
                if points.len() < 2 || points[0] != 0.0 || points.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::Config("partition must start at 0 and increase strictly".into()));
                }
                if *points.last().unwrap() != horizon {
                    return Err(Error::Config("partition does not accumulate at T".into()));
                }
            }
        }
        Ok(())
    }

    fn point(&self, i: usize, horizon: f64) -> Option<f64> {
        match self {
            Partition::Geometric { ratio } => Some(horizon * (1.0 - ratio.powi(i as i32))),
            Partition::Explicit { points } => points.get(i).copied(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionOptions {
    /// truncation level; `None` means `T + 50`
    pub s_max: Option<f64>,
    /// sampling step in pseudo-time
    pub ds: f64,
    /// finite-variation controls under a geometric partition are closed at `T`
    /// after this many segments
    pub max_segments: usize,
}

impl Default for CompletionOptions {
    fn default() -> Self {
        CompletionOptions {
            s_max: None,
            ds: 1e-3,
            max_segments: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentRecord {
    pub index: usize,
    /// global pseudo-time at which the segment starts
    pub s_start: f64,
    pub lengths: SegmentLengths,
}

impl SegmentRecord {
    /// Global `sᵢ`, where `(φ₀, φ) = (t̄ᵢ, ū₁)`.
    pub fn s_marker(&self) -> f64 {
        self.s_start + self.lengths.s_marker
    }

    /// Global `s̃ᵢ`, the end of the segment.
    pub fn s_end(&self) -> f64 {
        self.s_start + self.lengths.s_tilde
    }
}

#[derive(Debug, Clone)]
pub struct CompletionResult {
    pub curve: SpaceTimePath,
    pub stc: SpaceTimeControl,
    pub clock: Clock,
    pub ledger: Vec<SegmentRecord>,
    /// `(t̄ⱼ, sⱼ)` with `(φ₀, φ)(sⱼ) = (t̄ⱼ, u(T))`
    pub diagnostic: Vec<(f64, f64)>,
    /// `u(T)`, the point the diagnostic sequence converges to
    pub terminal_control: Vec<f64>,
    pub horizon: Horizon,
}

impl CompletionResult {
    pub fn s_end(&self) -> f64 {
        self.stc.s_end()
    }

    /// Pseudo-times of the diagnostic sequence.
    pub fn diagnostic_s(&self) -> Vec<f64> {
        self.diagnostic.iter().map(|d| d.1).collect()
    }

    /// Plateaus carry finite φ-variation (no divergent tail under truncation).
    pub fn has_bv_loops(&self) -> bool {
        !matches!(self.horizon, Horizon::Truncated { divergent: true, .. })
    }

    /// Structured-text segment ledger.
    pub fn ledger_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "horizon: {}", horizon_text(self.horizon));
        let _ = writeln!(out, "segments: {}", self.ledger.len());
        for r in &self.ledger {
            let l = &r.lengths;
            let _ = writeln!(
                out,
                "[segment {}]\ninterval: [{}, {}]\nvariation: {}\nexcursion: {}\nS: {}\nS_tilde: {}\nlower_bound: {}\nupper_bound: {}\ns_marker: {}\ns_end: {}\nbounds: {}",
                r.index,
                l.a,
                l.b,
                l.variation,
                l.excursion,
                l.s_marker,
                l.s_tilde,
                l.lower_bound(),
                l.upper_bound(),
                r.s_marker(),
                r.s_end(),
                if l.bounds_hold(1e-9) { "ok" } else { "violated" }
            );
        }
        out
    }
}

pub fn horizon_text(h: Horizon) -> String {
    match h {
        Horizon::Finite(s) => format!("finite {s}"),
        Horizon::Truncated { s_max, divergent } => format!("truncated {s_max} divergent={divergent}"),
    }
}

/// Concatenates segment completions along the partition with `ū₁ = u(T)`.
pub fn build_completion(
    u: &ControlPath,
    v: &OrdinaryControl,
    partition: &Partition,
    opts: &CompletionOptions,
) -> Result<CompletionResult> {
    let horizon_t = u.horizon();
    if v.horizon != horizon_t {
        return Err(Error::Config("ordinary control horizon differs from the control's".into()));
    }
    partition.validate(horizon_t)?;
    let s_max = opts.s_max.unwrap_or(horizon_t + 50.0);
    if !(s_max > 0.0) || !(opts.ds > 0.0) {
        return Err(Error::Config("S_max and ds must be positive".into()));
    }
    let u = Arc::new(u.clone());
    let ubar1 = u.value(horizon_t);
    let divergent = u.is_divergent();
    let geometric = matches!(partition, Partition::Geometric { .. });

    let mut curve = SpaceTimePath::new(u.dim(), Some(Arc::clone(&u)));
    let mut ledger = Vec::new();
    let mut anchors = Vec::new();
    let mut diagnostic = Vec::new();
    let mut reached_end = false;
    let mut i = 1;
    loop {
        let a = partition.point(i - 1, horizon_t).unwrap();
        let mut b = match partition.point(i, horizon_t) {
            Some(b) => b,
            None => break,
        };
        if geometric && !divergent && i >= opts.max_segments {
            b = horizon_t;
        }
        if !(b > a) {
            break;
        }
        let mut trial = curve.clone();
        let (lengths, local) = append_segment(&mut trial, &u, a, b, &ubar1)?;
        let s_start = curve.length();
        if s_start + lengths.s_tilde > s_max {
            if ledger.is_empty() {
                return Err(Error::Config(format!(
                    "S_max = {s_max} is smaller than the first segment ({})",
                    lengths.s_tilde
                )));
            }
            break;
        }
        curve = trial;
        anchors.extend(local.into_iter().map(|(t, s)| (t, s_start + s)));
        anchors.push((b, s_start + lengths.s_tilde));
        let rec = SegmentRecord {
            index: i,
            s_start,
            lengths,
        };
        diagnostic.push((b, rec.s_marker()));
        ledger.push(rec);
        if b == horizon_t {
            reached_end = true;
            break;
        }
        i += 1;
    }

    let total = curve.length();
    let horizon = if reached_end {
        Horizon::Finite(total)
    } else {
        Horizon::Truncated { s_max, divergent }
    };
    let stc = curve.sample(opts.ds, v, horizon)?;
    let terminal = if reached_end {
        ClockTerminal::Finite(total)
    } else {
        ClockTerminal::Divergent
    };
    let clock = clock_from_samples(&stc, horizon_t, &anchors, terminal)?;
    Ok(CompletionResult {
        curve,
        stc,
        clock,
        ledger,
        diagnostic,
        terminal_control: ubar1,
        horizon,
    })
}

/// Wraps an explicitly built space-time curve reaching `(T, ·)` as a
/// finite-horizon completion (no segment ledger). Used for completions with
/// inserted loops.
pub fn completion_from_curve(
    curve: SpaceTimePath,
    v: &OrdinaryControl,
    horizon_t: f64,
    ds: f64,
    terminal_control: Vec<f64>,
) -> Result<CompletionResult> {
    let total = curve.length();
    let (t_end, _) = curve.eval(total);
    if t_end != horizon_t {
        return Err(Error::Config(format!("curve ends at time {t_end}, expected {horizon_t}")));
    }
    let horizon = Horizon::Finite(total);
    let stc = curve.sample(ds, v, horizon)?;
    let clock = clock_from_samples(&stc, horizon_t, &[], ClockTerminal::Finite(total))?;
    Ok(CompletionResult {
        curve,
        stc,
        clock,
        ledger: Vec::new(),
        diagnostic: Vec::new(),
        terminal_control,
        horizon,
    })
}

/// Reads the clock off a sampled completion: runs of nodes with equal `φ₀`
/// become jumps whose value is the anchor recorded for that time (or the
/// run start when none is recorded).
pub fn clock_from_samples(
    stc: &SpaceTimeControl,
    horizon: f64,
    anchors: &[(f64, f64)],
    terminal: ClockTerminal,
) -> Result<Clock> {
    let s = stc.grid();
    let t = stc.time_column();
    let mut points = Vec::new();
    let mut jumps = Vec::new();
    let mut i = 0;
    while i < s.len() {
        let mut j = i;
        while j + 1 < s.len() && t[j + 1] == t[i] {
            j += 1;
        }
        if j == i {
            points.push((t[i], s[i]));
        } else {
            let value = anchors
                .iter()
                .find(|a| a.0 == t[i])
                .map(|a| a.1.clamp(s[i], s[j]))
                .unwrap_or(s[i]);
            jumps.push(ClockJump {
                tau: t[i],
                s1: s[i],
                s2: s[j],
                value,
            });
        }
        i = j + 1;
    }
    Clock::new(horizon, &points, jumps, terminal)
}
