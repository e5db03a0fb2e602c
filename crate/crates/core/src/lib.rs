//! Simulation and verification of impulsive control systems driven by
//! controls of locally bounded variation: graph completions, space-time
//! integration, limit approximations and the example fixtures.

pub mod approx;
pub mod bv;
pub mod completion;
pub mod error;
pub mod linalg;
pub mod ode;
pub mod scenarios;
pub mod verify;

pub use approx::{ApproxSequence, SmoothedClock};
pub use bv::{Clock, ClockJump, ClockTerminal, ControlPath, ControlSet, OrdinaryControl, Segment, TimeChange};
pub use completion::{CompletionResult, Horizon, SpaceTimeControl};
pub use error::{Error, Result};
pub use ode::{Dynamics, Param, Trajectory, VectorFields};
