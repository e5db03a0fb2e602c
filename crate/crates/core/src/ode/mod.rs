//! Integration of the space-time and Carathéodory systems, and the
//! graph-completion solution `x = ξ ∘ σ`.

pub mod dynamics;
pub mod rk4;
pub mod solution;
pub mod trajectory;

pub use dynamics::{Dynamics, SublinearityReport, VectorFields, Workspace};
pub use rk4::{
    arc_length_grid, caratheodory, caratheodory_refined, integrate_spacetime, refine, with_nodes, RefinementReport,
    DEFAULT_CELLS, MAX_CELLS, REFINE_TOL,
};
pub use solution::{
    consistency_check, equibound, gc_solution, uniform_convergence_probe, ConsistencyReport, GcSolution, TerminalRule,
};
pub use trajectory::{Param, Trajectory};
