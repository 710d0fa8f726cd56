//! Constructive solution of the inverse problem by the main equation.

pub mod kernel;
pub mod main_eq;
pub mod model;
pub mod reconstruct;
pub mod tail;

pub use kernel::{kernel_d, kernel_d_wronskian, kernel_dx, KernelCache};
pub use main_eq::{solve_at, MainSolution, Node, NodeSet, MAX_CONDITION};
pub use model::{build_model, build_model_general, build_model_graph, ModelProblem};
pub use reconstruct::{
    l2_distance, l2_distance_scalar, reconstruct, reconstruct_unchecked, Diagnostics, GraphOutput,
    Reconstruction, ReconstructionOptions, DEFAULT_MESH_POINTS, DIAGONALITY_TOL,
};
pub use tail::TailCorrection;
