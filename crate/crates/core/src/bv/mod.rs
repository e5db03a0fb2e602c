//! Control paths of (locally) bounded variation, clocks and their inverses.

pub mod clock;
pub mod control_set;
pub mod ordinary;
pub mod path;

pub use clock::{clock_pseudo_inverse, Clock, ClockJump, ClockTerminal, TimeChange};
pub use control_set::ControlSet;
pub use ordinary::OrdinaryControl;
pub use path::{ControlPath, ControlPathSpec, Jump, Piece, Segment, SegmentProfile};
