use std::path::{Path, PathBuf};

use bvloc_core::completion::{CompletionOptions, Partition};
use bvloc_core::ode::DEFAULT_CELLS;
use bvloc_core::{Error, Result};
use serde::{Deserialize, Serialize};

pub const SCENARIOS: [&str; 4] = ["spiral", "one_jump", "example_ii", "ex1f1"];

/// Generated by `--emit-template`; parses to [`RunConfig::default`].
pub const TEMPLATE: &str = r#"# bvloc run configuration. Every key is optional; the values below are the defaults.

# spiral | one_jump | example_ii | ex1f1
scenario = "spiral"
# final time T
horizon = 1.0
# pseudo-time truncation for divergent completions; must exceed T
s_max = 51.0
# artifact directory (overridden by --out)
out_dir = "out"
# sequence indices k for `approximate`; each needs its diagnostic term below s_max
indices = [1, 2, 3, 4]
# spiral only: clipped-spiral indices checked by the terminal certificate
certificate_indices = [4, 8, 16, 32]
# parameters k of the example_ii controls (kT > 1)
example_ii_k = [5, 10, 20]
# mollification scales h whose smoothed clocks `approximate` tabulates
mollifier_scales = [4.0, 8.0, 16.0, 32.0]

[grid]
# arc-length cells of the first Carathéodory run
cells = 16384
# pseudo-time sampling step of completions
ds = 0.001
# uniform output nodes on [0, T), T appended
samples = 200

[tolerances]
# |Δφ₀ + |Δφ| - Δs| / Δs per cell
unit_speed = 1e-6
# relative residual of s = φ₀(s) + Var(φ)
ids = 1e-6
# stop refining once successive RK runs differ by less than this
rk = 1e-7
# slack of the terminal certificate
certification = 1e-6

[partition]
# geometric: t_i = T(1 - ratio^i); explicit: points = [0.0, ..., T]
kind = "geometric"
ratio = 0.5
"#;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: String,
    pub horizon: f64,
    pub s_max: f64,
    pub out_dir: PathBuf,
    pub indices: Vec<usize>,
    pub certificate_indices: Vec<usize>,
    pub example_ii_k: Vec<usize>,
    pub mollifier_scales: Vec<f64>,
    pub grid: Grid,
    pub tolerances: Tolerances,
    pub partition: Partition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub cells: usize,
    pub ds: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub unit_speed: f64,
    pub ids: f64,
    pub rk: f64,
    pub certification: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: "spiral".into(),
            horizon: 1.0,
            s_max: 51.0,
            out_dir: "out".into(),
            indices: vec![1, 2, 3, 4],
            certificate_indices: vec![4, 8, 16, 32],
            example_ii_k: vec![5, 10, 20],
            mollifier_scales: vec![4.0, 8.0, 16.0, 32.0],
            grid: Grid::default(),
            tolerances: Tolerances::default(),
            partition: Partition::default(),
        }
    }
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            cells: DEFAULT_CELLS,
            ds: 1e-3,
            samples: 200,
        }
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            unit_speed: 1e-6,
            ids: 1e-6,
            rk: 1e-7,
            certification: 1e-6,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !SCENARIOS.contains(&self.scenario.as_str()) {
            return Err(Error::Config(format!(
                "unknown scenario '{}' (expected one of {})",
                self.scenario,
                SCENARIOS.join(", ")
            )));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config("horizon must be positive and finite".into()));
        }
        if !(self.s_max > self.horizon) || !self.s_max.is_finite() {
            return Err(Error::Config(format!("s_max = {} must exceed T = {}", self.s_max, self.horizon)));
        }
        let t = &self.tolerances;
        for (name, v) in [("unit_speed", t.unit_speed), ("ids", t.ids), ("rk", t.rk), ("certification", t.certification)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("tolerance {name} must be positive")));
            }
        }
        if self.grid.cells == 0 || self.grid.samples == 0 || !(self.grid.ds > 0.0) {
            return Err(Error::Config("grid sizes must be positive".into()));
        }
        for (name, list) in [("indices", &self.indices), ("certificate_indices", &self.certificate_indices)] {
            if list.is_empty() || list.contains(&0) || list.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Config(format!("{name} must be positive and strictly increasing")));
            }
        }
        if self.example_ii_k.iter().any(|&k| !(k as f64 * self.horizon > 1.0)) {
            return Err(Error::Config("example_ii_k entries need kT > 1".into()));
        }
        if self.mollifier_scales.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return Err(Error::Config("mollifier scales must be positive".into()));
        }
        Ok(())
    }

    pub fn completion_options(&self) -> CompletionOptions {
        CompletionOptions {
            s_max: Some(self.s_max),
            ds: self.grid.ds,
            ..Default::default()
        }
    }

    /// `samples` uniform nodes on `[0, T)` up to `t_end`, followed by `T`.
    pub fn output_grid(&self, t_end: f64) -> Vec<f64> {
        let n = self.grid.samples;
        let mut g: Vec<f64> = (0..n)
            .map(|j| self.horizon * j as f64 / n as f64)
            .filter(|&t| t <= t_end)
            .collect();
        g.push(self.horizon);
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_is_the_default() {
        assert_eq!(RunConfig::parse(TEMPLATE).unwrap(), RunConfig::default());
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn rejects_short_truncation() {
        let e = RunConfig::parse("horizon = 2.0\ns_max = 1.5\n").unwrap_err();
        assert_eq!(e.kind(), "config");
    }

    #[test]
    fn rejects_bad_tolerances_and_scenarios() {
        assert!(RunConfig::parse("[tolerances]\nrk = 0.0\n").is_err());
        assert!(RunConfig::parse("scenario = \"helix\"\n").is_err());
        assert_eq!(RunConfig::parse("bogus = 1\n").unwrap_err().kind(), "parse");
    }

    #[test]
    fn explicit_partition_parses() {
        let c = RunConfig::parse("[partition]\nkind = \"explicit\"\npoints = [0.0, 0.5, 1.0]\n").unwrap();
        assert_eq!(c.partition, Partition::Explicit { points: vec![0.0, 0.5, 1.0] });
    }
}
