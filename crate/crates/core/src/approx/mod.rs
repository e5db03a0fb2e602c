//! Limit approximations: mollified clocks, the absolutely continuous controls
//! they induce, and the checks run on the resulting sequences.

pub mod certify;
pub mod mollifier;
pub mod sequence;
pub mod smoothing;

pub use certify::{arc_length_time, check_cbvl, CbvlReport, CbvlRow, CbvlTerm};
pub use mollifier::Mollifier;
pub use sequence::{
    build_approx_sequence, monotone_errors, wellposedness_report, write_convergence_csv, ApproxMember, ApproxOptions,
    ApproxSequence, ScaleChoice, WellposednessRow,
};
pub use smoothing::{mollify_clock, SmoothedClock, SmoothingCase, SmoothingOptions};
