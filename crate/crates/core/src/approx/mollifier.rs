use crate::error::{Error, Result};

/// Nodes used to normalize the bump once.
const NORMALIZATION_NODES: usize = 20_000;

fn bump(r: f64) -> f64 {
    if r.abs() < 1.0 {
        (-1.0 / (1.0 - r * r)).exp()
    } else {
        0.0
    }
}

/// `∫_{-1}^{1} exp(-1/(1-r²)) dr` by the midpoint rule.
fn bump_mass() -> f64 {
    let h = 2.0 / NORMALIZATION_NODES as f64;
    (0..NORMALIZATION_NODES).map(|k| bump(-1.0 + h * (k as f64 + 0.5))).sum::<f64>() * h
}

/// Even smooth kernel `ρ` supported on `[-W, W]` with unit integral, used at
/// scale `h` as `ρ_h(t) = 2h ρ(2ht)` (support `[-W/(2h), W/(2h)]`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mollifier {
    support: f64,
    h: f64,
    mass: f64,
}

impl Mollifier {
    pub fn new(support: f64, h: f64) -> Result<Self> {
        if !(support > 0.0 && support.is_finite()) {
            return Err(Error::Config("mollifier support must be positive".into()));
        }
        if !(h >= 1.0 && h.is_finite()) {
            return Err(Error::Config(format!(
                "scale h = {h} too small: the kernel support must fit in its window (h >= 1)"
            )));
        }
        Ok(Mollifier {
            support,
            h,
            mass: bump_mass() * support,
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn support(&self) -> f64 {
        self.support
    }

    /// Half-width `W/(2h)` of the scaled kernel.
    pub fn radius(&self) -> f64 {
        self.support / (2.0 * self.h)
    }

    /// `ρ(t)`
    pub fn profile(&self, t: f64) -> f64 {
        bump(t / self.support) / self.mass
    }

    /// `ρ_h(t) = 2h ρ(2ht)`
    pub fn density(&self, t: f64) -> f64 {
        2.0 * self.h * self.profile(2.0 * self.h * t)
    }

    /// Midpoint quadrature of `∫ρ_h` with `2q` nodes (before normalization).
    pub fn mass(&self, q: usize) -> f64 {
        let d = self.radius() / q as f64;
        2.0 * (0..q).map(|k| self.density(d * (k as f64 + 0.5))).sum::<f64>() * d
    }

    /// Half-nodes `c_k = (k + 1/2) r/q` and weights for the symmetric rule
    /// `∫ ρ_h(c) f(t - c) dc ≈ Σ w_k (f(t - c_k) + f(t + c_k))`, with `2Σw_k = 1`.
    pub fn half_nodes(&self, q: usize) -> Vec<(f64, f64)> {
        let d = self.radius() / q as f64;
        let raw: Vec<(f64, f64)> = (0..q)
            .map(|k| {
                let c = d * (k as f64 + 0.5);
                (c, self.density(c))
            })
            .collect();
        let total: f64 = 2.0 * raw.iter().map(|p| p.1).sum::<f64>();
        raw.into_iter().map(|(c, w)| (c, w / total)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_mass_and_support() {
        for h in [1.0, 4.0, 32.0] {
            let m = Mollifier::new(1.0, h).unwrap();
            assert!((m.mass(4096) - 1.0).abs() < 1e-8, "h = {h}");
            assert_eq!(m.density(m.radius() * 1.0001), 0.0);
            assert!(m.density(0.0) > 0.0);
        }
    }

    #[test]
    fn even_profile() {
        let m = Mollifier::new(2.0, 3.0).unwrap();
        for t in [0.01, 0.1, 0.3] {
            assert_eq!(m.density(t), m.density(-t));
        }
    }

    #[test]
    fn normalized_weights() {
        let m = Mollifier::new(1.0, 8.0).unwrap();
        let w: f64 = m.half_nodes(100).iter().map(|p| p.1).sum();
        assert!((2.0 * w - 1.0).abs() < 1e-15);
    }

    #[test]
    fn small_scale_is_rejected() {
        assert!(matches!(Mollifier::new(1.0, 0.5), Err(Error::Config(_))));
    }
}
