//! Scenario files, run directories, verification corpora and sweeps: the
//! plumbing behind the `forch` command line.

pub mod config;
pub mod manifest;
pub mod raster;
pub mod rundir;
pub mod sweep;
pub mod verify;

pub use config::{BoundParameters, FieldSpec, ScenarioConfig};
pub use manifest::RunManifest;
pub use rundir::{bounds_for_run, evaluate_bounds, load_run, simulate, BoundsFile, LoadedRun};
pub use sweep::{run_sweep, Axis, SweepReport};
pub use verify::{run_verification, Target, VerifyReport};
