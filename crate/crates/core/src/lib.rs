//! Multi-target tracking on discrete probability grids.
//!
//! The integrated tracker runs one histogram filter per identity on dense
//! embedding maps. Nearest-neighbor Kalman baselines, a synthetic scene
//! generator and a CLEAR-MOT / ID-measure evaluator come with it.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod assoc;
pub mod bboxreg;
pub mod error;
pub mod grid;
pub mod histfilter;
pub mod kalman;
pub mod math;
pub mod measurement;
pub mod metrics;
pub mod pipeline;
pub mod simworld;

pub use assoc::{
    associate, combined_distance, hungarian, AssociationConfig, CostMatrix, Detection,
    DistanceMode, TrackManagementConfig, TrackerWorld,
};
pub use bboxreg::{BBoxRegressor, OutputBox};
pub use error::{Error, Result};
pub use grid::{Cell, GaussianKernel, GridGeometry, ProbabilityGrid};
pub use histfilter::{HistFilterConfig, IntegratedTracker, OutputMode, TrackState, TrackStatus};
pub use kalman::{KFState, KalmanConfig};
pub use measurement::{gate_entropy, gate_missing, DistanceGrid, EmbeddingMap, EmbeddingVector};
pub use metrics::{evaluate, EvalConfig, EvalLedger, MatchCriterion, Metrics};
pub use pipeline::{Calibration, PipelineConfig, RunOutput, TrackerVariant};
pub use simworld::{generate_scenario, FrameObservation, Scenario, ScenarioConfig};
