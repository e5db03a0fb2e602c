use serde::{Deserialize, Serialize};

use crate::bv::OrdinaryControl;
use crate::error::{Error, Result};
use crate::linalg::dist;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    Finite(f64),
    /// Cut at `s_max`; `divergent` records that the full curve has infinite length.
    Truncated { s_max: f64, divergent: bool },
}

/// Sampled space-time control `(φ₀, φ, ψ)` on a pseudo-time grid.
///
/// Values are stored flat: `phi` has stride `m`, `psi` stride `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeControl {
    s: Vec<f64>,
    phi0: Vec<f64>,
    phi: Vec<f64>,
    psi: Vec<f64>,
    m: usize,
    q: usize,
    horizon: Horizon,
}

impl SpaceTimeControl {
    pub fn new(
        s: Vec<f64>,
        phi0: Vec<f64>,
        phi: Vec<f64>,
        psi: Vec<f64>,
        m: usize,
        q: usize,
        horizon: Horizon,
    ) -> Result<Self> {
        let n = s.len();
        if n < 2 {
            return Err(Error::Invariant("space-time grid needs at least two nodes".into()));
        }
        if phi0.len() != n || phi.len() != n * m || psi.len() != n * q {
            return Err(Error::Config("space-time sample arrays do not match the grid".into()));
        }
        if s[0] != 0.0 || s.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Invariant("pseudo-time grid must start at 0 and increase strictly".into()));
        }
        if phi0[0] != 0.0 {
            return Err(Error::Invariant("φ₀(0) must be 0".into()));
        }
        if phi0.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Invariant("φ₀ must be nondecreasing".into()));
        }
        Ok(SpaceTimeControl {
            s,
            phi0,
            phi,
            psi,
            m,
            q,
            horizon,
        })
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn grid(&self) -> &[f64] {
        &self.s
    }

    pub fn time_column(&self) -> &[f64] {
        &self.phi0
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    pub fn s_end(&self) -> f64 {
        *self.s.last().unwrap()
    }

    pub fn phi_at(&self, i: usize) -> &[f64] {
        &self.phi[i * self.m..(i + 1) * self.m]
    }

    pub fn psi_at(&self, i: usize) -> &[f64] {
        &self.psi[i * self.q..(i + 1) * self.q]
    }

    /// Cell `[s_i, s_{i+1}]` has `Δφ₀ = 0`.
    pub fn is_plateau(&self, i: usize) -> bool {
        self.phi0[i + 1] == self.phi0[i]
    }

    /// Same curve with the time column replaced (used for `φ_{0h}` runs).
    pub fn with_time_column(&self, phi0: Vec<f64>) -> Result<Self> {
        Self::new(
            self.s.clone(),
            phi0,
            self.phi.clone(),
            self.psi.clone(),
            self.m,
            self.q,
            self.horizon,
        )
    }

    /// Index of the cell holding `s` (clamped).
    pub fn cell(&self, s: f64) -> usize {
        crate::linalg::locate(&self.s, s)
    }

    /// Linear interpolation of `(φ₀, φ)` at `s`.
    pub fn eval(&self, s: f64) -> (f64, Vec<f64>) {
        let i = self.cell(s);
        let lam = ((s - self.s[i]) / (self.s[i + 1] - self.s[i])).clamp(0.0, 1.0);
        let p0 = crate::linalg::lerp(&[self.phi0[i]], &[self.phi0[i + 1]], lam)[0];
        (p0, crate::linalg::lerp(self.phi_at(i), self.phi_at(i + 1), lam))
    }

    /// Rows `s, phi0, phi_1..phi_m, psi_1..psi_q, plateau` (plateau flag of the cell starting at the node).
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        use crate::bv::path::fmt;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["s".to_string(), "phi0".to_string()];
        header.extend((1..=self.m).map(|i| format!("phi{i}")));
        header.extend((1..=self.q).map(|i| format!("psi{i}")));
        header.push("plateau".into());
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut row = vec![fmt(self.s[i]), fmt(self.phi0[i])];
            row.extend(self.phi_at(i).iter().map(|&x| fmt(x)));
            row.extend(self.psi_at(i).iter().map(|&x| fmt(x)));
            let flag = i + 1 < self.len() && self.is_plateau(i);
            row.push(if flag { "1".into() } else { "0".into() });
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub cells: usize,
    /// max over cells of `|Δφ₀ + |Δφ| - Δs| / Δs`
    pub unit_speed_residual: f64,
    /// max over nodes of `|s - φ₀(s) - Var_[0,s](φ)| / max(s, 1)`
    pub ids_residual: f64,
    pub starts_at_origin: bool,
    pub monotone: bool,
    pub lipschitz: bool,
    pub tolerance: f64,
    pub passed: bool,
}

impl FeasibilityReport {
    pub fn render(&self) -> String {
        format!(
            "cells: {}\nunit_speed_residual: {:e}\nids_residual: {:e}\nstarts_at_origin: {}\nmonotone: {}\nlipschitz: {}\ntolerance: {:e}\nstatus: {}\n",
            self.cells,
            self.unit_speed_residual,
            self.ids_residual,
            self.starts_at_origin,
            self.monotone,
            self.lipschitz,
            self.tolerance,
            if self.passed { "PASS" } else { "FAIL" }
        )
    }
}

pub fn verify_feasibility(stc: &SpaceTimeControl, tol: f64) -> FeasibilityReport {
    let n = stc.len();
    let mut speed = 0.0f64;
    let mut ids = 0.0f64;
    let mut var = 0.0;
    let mut monotone = true;
    let mut lipschitz = true;
    for i in 0..n - 1 {
        let ds = stc.s[i + 1] - stc.s[i];
        let d0 = stc.phi0[i + 1] - stc.phi0[i];
        let dphi = dist(stc.phi_at(i + 1), stc.phi_at(i));
        // rounding in s itself is not a speed defect on very short cells
        let ulps = 8.0 * f64::EPSILON * stc.s[i + 1].max(1.0);
        speed = speed.max(((d0 + dphi - ds).abs() - ulps).max(0.0) / ds);
        monotone &= d0 >= 0.0;
        lipschitz &= d0 <= ds * (1.0 + tol);
        var += dphi;
        let s = stc.s[i + 1];
        ids = ids.max((s - stc.phi0[i + 1] - var).abs() / s.max(1.0));
    }
    let starts_at_origin = stc.s[0] == 0.0 && stc.phi0[0] == 0.0;
    FeasibilityReport {
        cells: n - 1,
        unit_speed_residual: speed,
        ids_residual: ids,
        starts_at_origin,
        monotone,
        lipschitz,
        tolerance: tol,
        passed: speed <= tol && ids <= tol && starts_at_origin && monotone && lipschitz,
    }
}

/// A space-time curve given by samples in an arbitrary parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCurve {
    pub phi0: Vec<f64>,
    /// stride `m`
    pub phi: Vec<f64>,
    pub m: usize,
}

impl RawCurve {
    pub fn len(&self) -> usize {
        self.phi0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi0.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.phi[i * self.m..(i + 1) * self.m]
    }
}

/// Reparametrizes a sampled curve by its graph arc length `Δφ₀ + |Δφ|`.
/// Zero-length cells are merged; visited points and their order are kept.
pub fn arc_length_reparam(curve: &RawCurve, v: &OrdinaryControl) -> Result<SpaceTimeControl> {
    let n = curve.len();
    if n < 2 || curve.phi.len() != n * curve.m {
        return Err(Error::Config("raw curve needs >= 2 samples of matching dimension".into()));
    }
    if curve.phi0.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Invariant("raw curve time column decreases".into()));
    }
    if curve.phi0[0] != 0.0 {
        return Err(Error::Invariant("raw curve must start at time 0".into()));
    }
    let m = curve.m;
    let q = v.dim();
    let mut s = vec![0.0];
    let mut phi0 = vec![curve.phi0[0]];
    let mut phi = curve.point(0).to_vec();
    let mut psi = v.value(curve.phi0[0]).to_vec();
    let mut acc = 0.0;
    for i in 1..n {
        let len = (curve.phi0[i] - curve.phi0[i - 1]) + dist(curve.point(i), curve.point(i - 1));
        if len == 0.0 {
            continue;
        }
        acc += len;
        s.push(acc);
        phi0.push(curve.phi0[i]);
        phi.extend_from_slice(curve.point(i));
        psi.extend_from_slice(v.value(curve.phi0[i]));
    }
    SpaceTimeControl::new(s, phi0, phi, psi, m, q, Horizon::Finite(acc))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(speed: f64) -> SpaceTimeControl {
        // φ₀ = speed·s on [0, 1], φ fixed
        let s: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let phi0 = s.iter().map(|x| speed * x).collect();
        let phi = vec![1.0, 0.0].repeat(11);
        SpaceTimeControl::new(s, phi0, phi, vec![], 2, 0, Horizon::Finite(1.0)).unwrap()
    }

    #[test]
    fn unit_speed_drift_passes() {
        let r = verify_feasibility(&line(1.0), 1e-8);
        assert!(r.passed);
        assert_eq!(r.unit_speed_residual, 0.0);
    }

    #[test]
    fn half_speed_fails_with_residual_half() {
        let r = verify_feasibility(&line(0.5), 1e-8);
        assert!(!r.passed);
        assert!((r.unit_speed_residual - 0.5).abs() < 1e-12);
    }

    #[test]
    fn reparam_of_unit_speed_curve_is_identity() {
        let stc = line(1.0);
        let raw = RawCurve {
            phi0: stc.time_column().to_vec(),
            phi: (0..stc.len()).flat_map(|i| stc.phi_at(i).to_vec()).collect(),
            m: 2,
        };
        let out = arc_length_reparam(&raw, &OrdinaryControl::none(1.0)).unwrap();
        for (a, b) in out.grid().iter().zip(stc.grid()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(verify_feasibility(&out, 1e-8).passed);
    }

    #[test]
    fn reparam_of_double_speed_curve_halves_parameter() {
        // γ(λ) = (0, cos 2λ, sin 2λ) sampled on λ ∈ [0, 1]: a plateau arc at double speed
        let n = 1000;
        let lam: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        let raw = RawCurve {
            phi0: vec![0.0; n + 1],
            phi: lam.iter().flat_map(|l| vec![(2.0 * l).cos(), (2.0 * l).sin()]).collect(),
            m: 2,
        };
        let out = arc_length_reparam(&raw, &OrdinaryControl::none(1.0)).unwrap();
        // chord length ≈ arc length: S ≈ 2
        assert!((out.s_end() - 2.0).abs() < 1e-6);
        for i in (0..=n).step_by(100) {
            let (_, p) = out.eval(out.grid()[i]);
            assert_eq!(p, raw.point(i));
            assert!((out.grid()[i] - 2.0 * lam[i]).abs() < 1e-6);
        }
        assert!(verify_feasibility(&out, 1e-8).passed);
    }

    #[test]
    fn reparam_rejects_decreasing_time() {
        let raw = RawCurve {
            phi0: vec![0.0, 0.5, 0.4],
            phi: vec![0.0; 3],
            m: 1,
        };
        assert!(matches!(
            arc_length_reparam(&raw, &OrdinaryControl::none(1.0)),
            Err(Error::Invariant(_))
        ));
    }
}
