//! Beacon LED coordinate estimation from two four-photodiode
//! angle-of-arrival receivers.
//!
//! The pipeline simulates noisy photocurrents through a Lambertian channel,
//! recovers each head's incidence vector by least squares, triangulates the
//! LED from the two rays, and predicts the resulting position error in
//! closed form by first-order propagation. A Monte Carlo harness checks the
//! prediction against simulation over grids of LED positions.

// `!(x > lim)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aoa;
pub mod channel;
pub mod config;
pub mod error;
pub mod error_analysis;
pub mod harness;
pub mod linalg;
pub mod localizer;
pub mod report;
pub mod scene;
#[cfg(any(test, feature = "test-support"))]
pub mod testing;

pub use aoa::{incidence_noise_covariance, optimal_normals, AoaEstimator, HeadGeometry, IncidenceEstimate};
pub use channel::{ChannelMode, NoiseModel, OpticalParams};
pub use config::{load_config, parse_config, preset, write_config, ExperimentConfig, SceneConfig};
pub use error::{Error, Result};
pub use error_analysis::{theoretical_breakdown, theoretical_error_at, ErrorBreakdown, ErrorReport, JacobianPair};
pub use harness::{
    empirical_eps, run_trial, sweep, EmpiricalError, ExperimentSpec, Grid, GridSweepResult, PointRecord,
};
pub use linalg::{Mat3, Mat4x3, Vec3};
pub use localizer::{triangulate, LocalizerConfig, TriangulationInputs, TriangulationResult};
pub use report::{read_csv, render_svg, sweep_csv, write_csv, SweepRow};
pub use scene::Scene;
