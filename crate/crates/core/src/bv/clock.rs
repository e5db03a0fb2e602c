use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::locate;

/// Relative slack allowed in the slope check `Δσ >= Δt`.
pub const SLOPE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockTerminal {
    /// `σ(t) → S̄` as `t → T`.
    Finite(f64),
    /// `σ(t) → +∞`; the table stops short of `T`.
    Divergent,
}

/// Jump of the clock at `tau`: it skips `[s1, s2]` and takes `value` at `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockJump {
    pub tau: f64,
    pub s1: f64,
    pub s2: f64,
    pub value: f64,
}

/// Increasing map `σ: t ↦ s`, stored as a sample table in which a jump
/// appears as two rows with the same `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Clock {
    horizon: f64,
    t: Vec<f64>,
    s: Vec<f64>,
    jumps: Vec<ClockJump>,
    terminal: ClockTerminal,
}

impl Clock {
    /// `points` are continuity samples (strictly increasing `t`, none at a jump time).
    pub fn new(horizon: f64, points: &[(f64, f64)], jumps: Vec<ClockJump>, terminal: ClockTerminal) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Invariant("clock horizon must be positive".into()));
        }
        let mut t = Vec::with_capacity(points.len() + 2 * jumps.len());
        let mut s = Vec::with_capacity(t.capacity());
        let mut ji = 0;
        let push_jumps_before = |limit: f64, t: &mut Vec<f64>, s: &mut Vec<f64>, ji: &mut usize| {
            while *ji < jumps.len() && jumps[*ji].tau < limit {
                t.push(jumps[*ji].tau);
                s.push(jumps[*ji].s1);
                t.push(jumps[*ji].tau);
                s.push(jumps[*ji].s2);
                *ji += 1;
            }
        };
        for &(tp, sp) in points {
            push_jumps_before(tp, &mut t, &mut s, &mut ji);
            if ji < jumps.len() && jumps[ji].tau == tp {
                return Err(Error::Invariant(format!("continuity sample at jump time {tp}")));
            }
            t.push(tp);
            s.push(sp);
        }
        push_jumps_before(f64::INFINITY, &mut t, &mut s, &mut ji);

        for w in jumps.windows(2) {
            if !(w[0].tau < w[1].tau && w[0].s2 <= w[1].s1) {
                return Err(Error::Invariant("clock jumps must be ordered and disjoint".into()));
            }
        }
        for j in &jumps {
            if !(j.s1 < j.s2 && j.s1 <= j.value && j.value <= j.s2) {
                return Err(Error::Invariant(format!(
                    "clock jump at {} needs s1 < s2 and s1 <= value <= s2",
                    j.tau
                )));
            }
        }
        let clock = Clock {
            horizon,
            t,
            s,
            jumps,
            terminal,
        };
        clock.validate()?;
        Ok(clock)
    }

    fn validate(&self) -> Result<()> {
        let (t, s) = (&self.t, &self.s);
        if t.len() < 2 {
            return Err(Error::Invariant("clock needs at least two samples".into()));
        }
        if t[0] != 0.0 {
            return Err(Error::Invariant("clock table must start at t = 0".into()));
        }
        for i in 1..t.len() {
            let (dt, ds) = (t[i] - t[i - 1], s[i] - s[i - 1]);
            if dt < 0.0 || !(ds > 0.0) {
                return Err(Error::Invariant(format!(
                    "clock table not increasing at row {i} (t = {}, s = {})",
                    t[i], s[i]
                )));
            }
            if ds < dt - SLOPE_TOL * s[i].abs().max(1.0) {
                return Err(Error::Invariant(format!(
                    "clock slope below 1 on [{}, {}]",
                    t[i - 1], t[i]
                )));
            }
        }
        let last = *t.last().unwrap();
        match self.terminal {
            ClockTerminal::Finite(sbar) => {
                if last != self.horizon || sbar != *s.last().unwrap() {
                    return Err(Error::Invariant("finite clock must end at (T, S̄)".into()));
                }
            }
            ClockTerminal::Divergent => {
                if last > self.horizon {
                    return Err(Error::Invariant("clock table exceeds the horizon".into()));
                }
            }
        }
        Ok(())
    }

    pub fn identity(horizon: f64) -> Self {
        Self::linear(horizon, 1.0)
    }

    /// `σ(t) = slope · t`, slope >= 1.
    pub fn linear(horizon: f64, slope: f64) -> Self {
        Clock {
            horizon,
            t: vec![0.0, horizon],
            s: vec![0.0, slope * horizon],
            jumps: Vec::new(),
            terminal: ClockTerminal::Finite(slope * horizon),
        }
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn terminal(&self) -> ClockTerminal {
        self.terminal
    }

    pub fn jumps(&self) -> &[ClockJump] {
        &self.jumps
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.s
    }

    /// Last time covered by the table.
    pub fn t_end(&self) -> f64 {
        *self.t.last().unwrap()
    }

    /// Largest recorded clock value.
    pub fn s_end(&self) -> f64 {
        *self.s.last().unwrap()
    }

    pub fn is_divergent(&self) -> bool {
        self.terminal == ClockTerminal::Divergent
    }

    pub fn jump_at(&self, t: f64) -> Option<&ClockJump> {
        let i = self.jumps.partition_point(|j| j.tau < t);
        self.jumps.get(i).filter(|j| j.tau == t)
    }

    /// `σ(t)`; jump times return the recorded value.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t <= self.t_end()) {
            return Err(Error::Domain(format!(
                "t = {t} outside clock table [0, {}]",
                self.t_end()
            )));
        }
        if let Some(j) = self.jump_at(t) {
            return Ok(j.value);
        }
        Ok(self.interp(t))
    }

    /// Table interpolation (right-continuous at jumps).
    pub(crate) fn interp(&self, t: f64) -> f64 {
        let i = locate(&self.t, t);
        let (t0, t1) = (self.t[i], self.t[i + 1]);
        if t1 == t0 {
            return self.s[i + 1];
        }
        let lam = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        if lam == 1.0 {
            self.s[i + 1]
        } else {
            self.s[i] + (self.s[i + 1] - self.s[i]) * lam
        }
    }

    /// One-sided limits `(σ(t⁻), σ(t⁺))`.
    pub fn limits(&self, t: f64) -> (f64, f64) {
        match self.jump_at(t) {
            Some(j) => (j.s1, j.s2),
            None => {
                let v = self.interp(t);
                (v, v)
            }
        }
    }

    pub fn pseudo_inverse(&self) -> TimeChange {
        clock_pseudo_inverse(self)
    }
}

/// Time change `φ₀: [0, S] → [0, T]`, the generalized inverse of a clock.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeChange {
    s: Vec<f64>,
    t: Vec<f64>,
    horizon: f64,
    finite_end: Option<f64>,
}

/// Swaps the clock table; each jump becomes a flat plateau.
pub fn clock_pseudo_inverse(clock: &Clock) -> TimeChange {
    let finite_end = match clock.terminal {
        ClockTerminal::Finite(sbar) => Some(sbar),
        ClockTerminal::Divergent => None,
    };
    TimeChange {
        s: clock.s.clone(),
        t: clock.t.clone(),
        horizon: clock.horizon,
        finite_end,
    }
}

impl TimeChange {
    pub fn eval(&self, s: f64) -> f64 {
        if s <= self.s[0] {
            return self.t[0];
        }
        if let Some(sbar) = self.finite_end {
            if s >= sbar {
                return self.horizon;
            }
        }
        let n = self.s.len();
        if s >= self.s[n - 1] {
            return self.t[n - 1];
        }
        let i = locate(&self.s, s);
        let (s0, s1) = (self.s[i], self.s[i + 1]);
        let (t0, t1) = (self.t[i], self.t[i + 1]);
        if t0 == t1 {
            return t0;
        }
        let lam = (s - s0) / (s1 - s0);
        t0 + (t1 - t0) * lam
    }

    /// Last pseudo-time covered by the table.
    pub fn s_end(&self) -> f64 {
        *self.s.last().unwrap()
    }

    pub fn is_plateau(&self, s: f64) -> bool {
        if s < self.s[0] || s > self.s_end() {
            return false;
        }
        let i = locate(&self.s, s);
        self.t[i] == self.t[i + 1] || (s == self.s[i] && i > 0 && self.t[i - 1] == self.t[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_jump() -> Clock {
        // σ(t) = 2t for t < 0.5, 2t + 1 for t > 0.5, σ(0.5) = 1.5; T = 1
        Clock::new(
            1.0,
            &[(0.0, 0.0), (1.0, 3.0)],
            vec![ClockJump {
                tau: 0.5,
                s1: 1.0,
                s2: 2.0,
                value: 1.5,
            }],
            ClockTerminal::Finite(3.0),
        )
        .unwrap()
    }

    #[test]
    fn identity_inverse() {
        let c = Clock::identity(1.0);
        let p = c.pseudo_inverse();
        for i in 0..=100 {
            let s = i as f64 / 100.0;
            assert_eq!(p.eval(s), s);
        }
        assert_eq!(p.eval(5.0), 1.0);
    }

    #[test]
    fn linear_inverse_halves() {
        let c = Clock::linear(1.0, 2.0);
        let p = c.pseudo_inverse();
        for i in 0..=200 {
            let s = i as f64 / 100.0;
            assert!((p.eval(s) - s / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn jump_becomes_plateau() {
        let c = one_jump();
        let p = c.pseudo_inverse();
        for i in 0..=100 {
            let s = 1.0 + i as f64 / 100.0;
            assert_eq!(p.eval(s), 0.5);
            assert!(p.is_plateau(s));
        }
        // φ₀ ∘ σ = id on a 10^3 grid
        for i in 0..=1000 {
            let t = i as f64 / 1000.0;
            let back = p.eval(c.eval(t).unwrap());
            assert!((back - t).abs() < 1e-14, "t = {t}, back = {back}");
        }
        assert_eq!(c.eval(0.5).unwrap(), 1.5);
        assert_eq!(c.limits(0.5), (1.0, 2.0));
    }

    #[test]
    fn inverse_is_one_lipschitz() {
        let c = one_jump();
        let p = c.pseudo_inverse();
        let grid: Vec<f64> = (0..=300).map(|i| i as f64 / 100.0).collect();
        for &a in &grid {
            for &b in &grid {
                assert!((p.eval(b) - p.eval(a)).abs() <= (b - a).abs() + 1e-15);
            }
        }
    }

    #[test]
    fn rejects_non_monotone_tables() {
        let bad = Clock::new(1.0, &[(0.0, 0.0), (0.5, 0.2), (1.0, 1.0)], vec![], ClockTerminal::Finite(1.0));
        assert!(matches!(bad, Err(Error::Invariant(_))));
        let dec = Clock::new(1.0, &[(0.0, 0.0), (0.5, 1.0), (1.0, 0.9)], vec![], ClockTerminal::Finite(0.9));
        assert!(dec.is_err());
        let overlap = Clock::new(
            1.0,
            &[(0.0, 0.0), (1.0, 10.0)],
            vec![
                ClockJump { tau: 0.3, s1: 1.0, s2: 3.0, value: 2.0 },
                ClockJump { tau: 0.6, s1: 2.5, s2: 4.0, value: 3.0 },
            ],
            ClockTerminal::Finite(10.0),
        );
        assert!(overlap.is_err());
    }

    #[test]
    fn divergent_table_stops_short() {
        let c = Clock::new(1.0, &[(0.0, 0.0), (0.5, 2.0), (0.75, 10.0)], vec![], ClockTerminal::Divergent).unwrap();
        assert!(c.is_divergent());
        assert!(c.eval(0.9).is_err());
        let p = c.pseudo_inverse();
        assert_eq!(p.eval(10.0), 0.75);
    }
}
