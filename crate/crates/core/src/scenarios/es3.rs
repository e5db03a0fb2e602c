use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::ode::{Dynamics, VectorFields};

/// Cutoff radius inside which the example fields are unmodified.
pub const CUTOFF_INNER: f64 = 3.0;
/// Fields vanish outside this radius.
pub const CUTOFF_OUTER: f64 = 4.0;

/// `η(x)`: 1 for `|x| <= 3`, 0 for `|x| >= 4`, linear in `|x|` between.
pub fn cutoff(x: &[f64]) -> f64 {
    let r = norm(x);
    if r <= CUTOFF_INNER {
        1.0
    } else if r >= CUTOFF_OUTER {
        0.0
    } else {
        CUTOFF_OUTER - r
    }
}

/// `g₁ = η (1, 0, x₃x₂)`, `g₂ = η (0, 1, -x₃x₁)`, no drift.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExampleFields;

impl VectorFields for ExampleFields {
    fn control_field(&self, i: usize, x: &[f64], _u: &[f64], out: &mut [f64]) {
        let eta = cutoff(x);
        match i {
            0 => {
                out[0] = eta;
                out[1] = 0.0;
                out[2] = eta * x[2] * x[1];
            }
            _ => {
                out[0] = 0.0;
                out[1] = eta;
                out[2] = -eta * x[2] * x[0];
            }
        }
    }
}

/// The example system in ℝ³ with controls in the unit disc.
pub fn example_dynamics() -> Dynamics {
    Dynamics::new(3, 2, 0, 12.0, 24.0, 100.0, Arc::new(ExampleFields)).expect("valid constants")
}

/// Appends the running cost `ẋ₄ = |1-u₁| + |u₂| + |x₃||u̇|`.
struct CostFields {
    inner: Dynamics,
}

impl VectorFields for CostFields {
    fn drift(&self, x: &[f64], u: &[f64], v: &[f64], out: &mut [f64]) {
        let n = self.inner.n;
        self.inner.fields().drift(&x[..n], u, v, &mut out[..n]);
        out[n] = (1.0 - u[0]).abs() + u[1].abs();
    }

    fn control_field(&self, i: usize, x: &[f64], u: &[f64], out: &mut [f64]) {
        let n = self.inner.n;
        self.inner.fields().control_field(i, &x[..n], u, &mut out[..n]);
        out[n] = 0.0;
    }

    fn rate_field(&self, x: &[f64], u: &[f64], out: &mut [f64]) -> bool {
        let n = self.inner.n;
        if !self.inner.fields().rate_field(&x[..n], u, &mut out[..n]) {
            out[..n].fill(0.0);
        }
        out[n] = x[2].abs();
        true
    }
}

/// Example dynamics with the cost variable `x₄` appended.
pub fn augment_cost(dyn_: &Dynamics) -> Result<Dynamics> {
    if dyn_.n != 3 || dyn_.m != 2 {
        return Err(Error::Config("cost augmentation expects n = 3, m = 2".into()));
    }
    Dynamics::new(
        4,
        2,
        dyn_.q,
        dyn_.sublinear + 3.0,
        dyn_.lipschitz + 2.0,
        dyn_.box_radius,
        Arc::new(CostFields { inner: dyn_.clone() }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(i: usize, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; 3];
        ExampleFields.control_field(i, x, &[0.0, 0.0], &mut out);
        out
    }

    #[test]
    fn fields_at_reference_point() {
        assert_eq!(field(0, &[1.0, 0.0, 1.0]), vec![1.0, 0.0, 0.0]);
        assert_eq!(field(1, &[1.0, 0.0, 1.0]), vec![0.0, 1.0, -1.0]);
    }

    #[test]
    fn fields_vanish_outside_cutoff() {
        assert_eq!(field(0, &[4.0, 0.0, 0.0]), vec![0.0; 3]);
        assert_eq!(field(1, &[0.0, 3.0, 4.0]), vec![0.0; 3]);
        assert_eq!(cutoff(&[3.5, 0.0, 0.0]), 0.5);
    }

    #[test]
    fn sublinearity_holds_on_box() {
        let d = example_dynamics();
        assert!(d.check_sublinearity(2000, 1.0, 11).holds);
    }

    #[test]
    fn augmented_rhs_adds_cost() {
        let a = augment_cost(&example_dynamics()).unwrap();
        let mut ws = a.workspace();
        let mut out = [0.0; 4];
        a.rhs(&[1.0, 0.0, -2.0, 0.0], &[0.0, 1.0], &[], 1.0, &[3.0, 4.0], &mut out, &mut ws);
        // drift 1 + 1, impulsive |x₃| |u̇| = 2·5
        assert_eq!(out[3], 12.0);
    }
}
