//! Generalized Forchheimer flow in heterogeneous porous media: constitutive
//! law, weighted norms and inequalities, an implicit pressure solver, and
//! evaluators for a-priori L-infinity bounds on the solver output.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod constitutive;
pub mod error;
pub mod expr;
pub mod grid;
pub mod harness;
pub mod inequalities;
pub mod solver;
pub mod weighted_norms;

pub use bounds::{BoundReport, BoundsContext, ExponentPack};
pub use constitutive::{build_weights, check_sdc, Exponents, ForchheimerLaw, PointLaw, WeightSet};
pub use error::{Error, Result};
pub use grid::{BoundaryValues, Field, Grid2D, SpaceTimeField};
pub use harness::{ScenarioConfig, Target};
pub use solver::{
    run, BoundaryData, ManufacturedSolution, PicardOptions, RunOutput, Scenario, Source,
};
