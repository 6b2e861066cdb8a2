//! Expanding curvature flows `ẋ = F^{-p}ν` (`p > 1`) of star-shaped surfaces in
//! Euclidean and hyperbolic 3-space.
//!
//! The crate integrates axisymmetric radial graphs over S², monitors pinching,
//! convexity and convergence to round spheres, provides closed-form and ODE
//! sphere solutions as oracles, and reproduces a local quartic patch whose
//! smallest principal curvature turns negative instantly under the flow.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod counterexample;
pub mod curvature;
pub mod diagnostics;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod io;
pub mod reference;

pub use error::{Error, Result};
pub use flow::{FlowConfig, FlowResult, InitialProfile, Solver, StopReason};
pub use geometry::{Ambient, AxisymGrid, CurvatureField, GraphState};
