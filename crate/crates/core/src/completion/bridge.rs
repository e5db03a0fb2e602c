use crate::bv::{ControlPath, ControlSet};
use crate::error::{Error, Result};

/// Straight bridge `λ ↦ (1-λ)u₁ + λu₂` on `[0, 1]`; its variation is `|u₁ - u₂|`
/// since supported control sets are convex (C = 1).
pub fn whitney_bridge(u1: &[f64], u2: &[f64], set: &ControlSet) -> Result<ControlPath> {
    if u1.len() != set.dim() || u2.len() != set.dim() {
        return Err(Error::Domain("bridge endpoints have the wrong dimension".into()));
    }
    if !set.contains(u1) || !set.contains(u2) {
        return Err(Error::Domain("bridge endpoint outside the control set".into()));
    }
    ControlPath::polyline(set.clone(), vec![0.0, 1.0], vec![u1.to_vec(), u2.to_vec()])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bridge_variations() {
        let d = ControlSet::unit_disc();
        let same = whitney_bridge(&[1.0, 0.0], &[1.0, 0.0], &d).unwrap();
        assert_eq!(same.total_variation(0.0, 1.0).unwrap(), 0.0);
        let q = whitney_bridge(&[1.0, 0.0], &[0.0, 1.0], &d).unwrap();
        assert!((q.total_variation(0.0, 1.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let diam = whitney_bridge(&[1.0, 0.0], &[-1.0, 0.0], &d).unwrap();
        assert_eq!(diam.total_variation(0.0, 1.0).unwrap(), d.diameter());
        assert_eq!(diam.value(0.5), vec![0.0, 0.0]);
    }

    #[test]
    fn bridge_rejects_outside_points() {
        let d = ControlSet::unit_disc();
        assert!(matches!(
            whitney_bridge(&[2.0, 0.0], &[0.0, 0.0], &d),
            Err(Error::Domain(_))
        ));
    }
}
