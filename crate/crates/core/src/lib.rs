//! Discontinuous Galerkin plane wave networks for time-harmonic Helmholtz
//! and Maxwell problems.
//!
//! A solution is built greedily: each outer iteration trains the directions
//! of an element-wise plane wave network to maximize the residual functional
//! of the current approximation, normalizes the result, adds it to the
//! basis, and re-solves the Galerkin system on the enlarged span.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod basis;
pub mod config;
pub mod dglsq;
pub mod error;
pub mod forms;
pub mod galerkin;
pub mod geom;
pub mod helmholtz;
pub mod linalg;
pub mod maxwell;
pub mod mesh;
pub mod planewave;
pub mod problems;
pub mod quadrature;
pub mod report;
pub mod trainer;

pub use config::{parse_spec, preset, run_preset, RunSpec, PRESET_NAMES};
pub use error::{Error, Result};
pub use forms::{FieldValue, Physics, Trace, TraceSpace};
pub use galerkin::{run, RunConfig, RunFailure, RunReport, RunStatus, WidthSchedule};
pub use geom::{CVec3, Vec3, C64};
pub use helmholtz::HelmholtzParams;
pub use maxwell::MaxwellParams;
pub use mesh::{BoxDomain, Mesh};
pub use planewave::DirectionSet;
pub use problems::BenchmarkProblem;
pub use trainer::{TrainConfig, Width};
