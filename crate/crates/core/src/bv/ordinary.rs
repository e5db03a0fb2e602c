use serde::{Deserialize, Serialize};

use super::control_set::ControlSet;
use crate::error::{Error, Result};

/// Piecewise-constant, right-continuous ordinary control `v: [0, T] → V`.
/// `q = 0` is allowed (no ordinary control).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrdinaryControl {
    pub horizon: f64,
    /// switching times, strictly inside `(0, T)`
    #[serde(default)]
    pub switches: Vec<f64>,
    /// `switches.len() + 1` values
    pub values: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set: Option<ControlSet>,
}

impl OrdinaryControl {
    pub fn new(horizon: f64, switches: Vec<f64>, values: Vec<Vec<f64>>, set: Option<ControlSet>) -> Result<Self> {
        let v = OrdinaryControl {
            horizon,
            switches,
            values,
            set,
        };
        v.validate()?;
        Ok(v)
    }

    pub fn none(horizon: f64) -> Self {
        OrdinaryControl {
            horizon,
            switches: Vec::new(),
            values: vec![Vec::new()],
            set: None,
        }
    }

    pub fn constant(horizon: f64, value: Vec<f64>) -> Self {
        OrdinaryControl {
            horizon,
            switches: Vec::new(),
            values: vec![value],
            set: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.len() != self.switches.len() + 1 {
            return Err(Error::Invariant("ordinary control needs one more value than switches".into()));
        }
        let q = self.values[0].len();
        if self.values.iter().any(|v| v.len() != q) {
            return Err(Error::Invariant("ordinary control values differ in dimension".into()));
        }
        let mut prev = 0.0;
        for &s in &self.switches {
            if !(s > prev && s < self.horizon) {
                return Err(Error::Invariant("switches must increase strictly inside (0, T)".into()));
            }
            prev = s;
        }
        if let Some(set) = &self.set {
            if set.dim() != q || self.values.iter().any(|v| !set.contains(v)) {
                return Err(Error::Invariant("ordinary control leaves its set".into()));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn value(&self, t: f64) -> &[f64] {
        let i = self.switches.partition_point(|&s| s <= t);
        &self.values[i]
    }
}
