//! The worked example in ℝ³: dynamics, controls, closed-form oracles and payoffs.

pub mod controls;
pub mod es3;
pub mod payoff;
pub mod random;

pub use controls::{
    clipped_spiral, closed_form_x3, example_ii_control, ex1f1_curve, ex1f1_stc, ex1f1_xi3, one_jump_control,
    spiral_clip_time, spiral_control, X3Oracle,
};
pub use es3::{augment_cost, cutoff, example_dynamics, ExampleFields};
pub use payoff::{example_ii_payoff, extended_payoff, payoff, payoff_lower_bound, payoff_run, PayoffRun, PayoffSpec};
pub use random::{disc_point, random_bv_control, random_circle_control, random_polyline};
