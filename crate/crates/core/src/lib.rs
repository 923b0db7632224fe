//! Discretize-then-optimize optimal control of the 1D Keller–Segel
//! chemotaxis system.
//!
//! The forward problem is an upwind finite-volume scheme, semi-implicit in
//! time, that is positivity preserving and conserves the cell mass. Its
//! exact discrete adjoint yields the gradient of the reduced cost with
//! respect to a bilinear distributed control `f` and a Robin or bilinear
//! boundary control `g`; Adam descent drives the optimization.

pub mod adam;
pub mod adjoint;
pub mod cost;
pub mod discretization;
pub mod error;
pub mod experiment;
pub mod problem;
pub mod sensitivity;
pub mod state;
pub mod verify;

pub use adam::{adam_step, optimize, optimize_with, AdamConfig, AdamState, OptimizationOutcome, OptimizationTrace, StopNorm, Termination, TraceRecord};
pub use adjoint::{solve_backward, step_phi, step_psi, AdjointTrajectory};
pub use cost::{
    assemble_gradient, cost_and_gradient, evaluate_cost, fd_directional_derivative, gradient_max_norm, gradient_norm,
    perturbation_scan, reduced_cost, tracking_misfit, ControlGradient,
};
pub use discretization::{
    build_grids, cell_averages, inner_product, interval_to_mask, BoundaryMask, BoundarySignal, CellField, RegionMask,
    SpaceTimeField, SpatialGrid, TimeGrid,
};
pub use error::{Error, Result, ValidationError};
pub use problem::{validate, BoundaryControlKind, ControlPair, CostWeights, PhysicalParams, ProblemSetup};
pub use sensitivity::{directional_derivative_via_sensitivity, solve_sensitivity, SensitivityTrajectory};
pub use state::{boundary_flux, solve_forward, solve_tridiagonal, step_u, step_v, StateTrajectory, TridiagonalMatrix, TridiagonalSystem};
