//! Per-identity histogram Bayes filter driven by embedding maps.
//!
//! Position lives on a probability grid; velocity is a 2-D Gaussian. Each
//! frame runs predict (convolution with the velocity kernel), update
//! (product with the softmin of the track's distance map), a velocity
//! measurement from consecutive MAP peaks, and output.

use alloc::vec::Vec;
use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::bboxreg::{BBoxRegressor, OutputBox};
use crate::error::{Error, Result};
use crate::grid::{Cell, GaussianKernel, ProbabilityGrid};
use crate::math;
use crate::measurement::{gate_entropy, gate_missing, EmbeddingMap, EmbeddingVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputMode {
    Peak,
    Expectation,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HistFilterConfig {
    /// Std-dev of the initial position belief, in cells.
    pub sigma_init: f64,
    /// Isotropic variance of the initial velocity belief, (px/frame)².
    pub initial_velocity_var: f64,
    /// Position process noise added to the motion kernel, cells².
    pub position_noise: f64,
    /// Velocity process noise per frame, (px/frame)².
    pub velocity_noise: f64,
    /// Noise of the peak-difference velocity measurement, (px/frame)².
    pub velocity_measurement_noise: f64,
    /// Softmin temperature on embedding distances.
    pub temperature: f64,
    /// A map whose smallest distance exceeds this is treated as missing.
    pub n_app: f64,
    /// Reject likelihoods above this fraction of the maximal entropy. `None` disables the gate.
    pub entropy_fraction: Option<f64>,
    /// Consecutive rejected measurements tolerated before the track dies.
    pub max_missed: usize,
    pub output: OutputMode,
    /// Also report boxes on frames whose measurement was rejected.
    pub emit_coasting: bool,
}

impl Default for HistFilterConfig {
    fn default() -> Self {
        Self {
            sigma_init: 2.0,
            initial_velocity_var: 4.0,
            position_noise: 0.25,
            velocity_noise: 0.25,
            velocity_measurement_noise: 4.0,
            temperature: 0.1,
            n_app: 1.2,
            entropy_fraction: None,
            max_missed: 90,
            output: OutputMode::Peak,
            emit_coasting: false,
        }
    }
}

impl HistFilterConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("sigma_init", self.sigma_init >= 0.0),
            ("initial_velocity_var", self.initial_velocity_var > 0.0),
            ("position_noise", self.position_noise >= 0.0),
            ("velocity_noise", self.velocity_noise >= 0.0),
            (
                "velocity_measurement_noise",
                self.velocity_measurement_noise > 0.0,
            ),
            ("temperature", self.temperature > 0.0),
            ("n_app", self.n_app > 0.0),
        ];
        for (name, ok) in positive {
            if !ok {
                return Err(Error::ConfigInvalid(alloc::format!("{name} out of range")));
            }
        }
        if let Some(f) = self.entropy_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::ConfigInvalid(
                    "entropy_fraction must be in (0, 1]".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Gaussian belief over a 2-D quantity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianBelief2D {
    pub mean: [f64; 2],
    pub covariance: [[f64; 2]; 2],
}

impl GaussianBelief2D {
    pub fn isotropic(mean: [f64; 2], variance: f64) -> Self {
        Self {
            mean,
            covariance: math::diag_2x2(variance),
        }
    }

    /// Standard Kalman update with an identity observation of the quantity.
    pub fn update(&self, measurement: [f64; 2], noise: &[[f64; 2]; 2]) -> Self {
        let p = to_matrix(&self.covariance);
        let r = to_matrix(noise);
        let Some(s_inv) = (p + r).try_inverse() else {
            return *self;
        };
        let k = p * s_inv;
        let innovation = Vector2::new(measurement[0] - self.mean[0], measurement[1] - self.mean[1]);
        let mean = Vector2::new(self.mean[0], self.mean[1]) + k * innovation;
        let i_k = Matrix2::identity() - k;
        // Joseph form keeps the covariance symmetric positive-definite.
        let cov = i_k * p * i_k.transpose() + k * r * k.transpose();
        let cov = (cov + cov.transpose()) * 0.5;
        Self {
            mean: [mean.x, mean.y],
            covariance: from_matrix(&cov),
        }
    }
}

fn to_matrix(m: &[[f64; 2]; 2]) -> Matrix2<f64> {
    Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1])
}

fn from_matrix(m: &Matrix2<f64>) -> [[f64; 2]; 2] {
    [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrackStatus {
    Active,
    Dead,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackState {
    pub id: u64,
    pub position_belief: ProbabilityGrid,
    /// Velocity in px/frame.
    pub velocity_belief: GaussianBelief2D,
    pub reference_embedding: EmbeddingVector,
    pub status: TrackStatus,
    pub frames_since_accepted_measurement: usize,
    /// MAP cell of the last posterior used for a velocity measurement.
    pub prev_peak: Option<Cell>,
    /// Frames elapsed since `prev_peak` was recorded.
    pub frames_since_peak: usize,
    /// Whether the most recent update incorporated a measurement.
    pub measured: bool,
}

impl TrackState {
    /// Starts a track with an isotropic Gaussian position belief around `start_center` (px).
    pub fn init(
        id: u64,
        start_center: [f64; 2],
        reference_embedding: EmbeddingVector,
        cfg: &HistFilterConfig,
        geometry: crate::grid::GridGeometry,
    ) -> Result<Self> {
        let start_cell = geometry.cell_at(start_center).ok_or(Error::OutOfBounds {
            x: start_center[0],
            y: start_center[1],
        })?;
        let cs = geometry.cell_size;
        let (cx, cy) = (start_center[0] / cs, start_center[1] / cs);
        let belief = if cfg.sigma_init > 0.0 {
            let inv = 1.0 / (2.0 * cfg.sigma_init * cfg.sigma_init);
            let logp = |c: Cell| {
                let dx = c.col as f64 - cx;
                let dy = c.row as f64 - cy;
                -(dx * dx + dy * dy) * inv
            };
            let shift = logp(start_cell);
            ProbabilityGrid::from_fn(geometry, |c| math::exp(logp(c) - shift))?.normalized()?
        } else {
            ProbabilityGrid::delta(geometry, start_cell)
        };
        Ok(Self {
            id,
            position_belief: belief,
            velocity_belief: GaussianBelief2D::isotropic([0.0, 0.0], cfg.initial_velocity_var),
            reference_embedding,
            status: TrackStatus::Active,
            frames_since_accepted_measurement: 0,
            prev_peak: Some(start_cell),
            frames_since_peak: 0,
            measured: true,
        })
    }

    pub fn is_active(&self) -> bool {
        self.status == TrackStatus::Active
    }

    /// Motion kernel in cell units for the current velocity belief.
    pub fn motion_kernel(&self, cfg: &HistFilterConfig) -> Result<GaussianKernel> {
        let cs = self.position_belief.cell_size();
        let v = &self.velocity_belief;
        let cov = math::add_2x2(
            &math::scale_2x2(&v.covariance, 1.0 / (cs * cs)),
            &math::diag_2x2(cfg.position_noise),
        );
        GaussianKernel::new([v.mean[0] / cs, v.mean[1] / cs], cov)
    }

    /// Predict step. A belief whose mass leaves the grid kills the track.
    pub fn predict(&self, cfg: &HistFilterConfig) -> Result<Self> {
        let mut next = self.clone();
        if !self.is_active() {
            return Ok(next);
        }
        let kernel = self.motion_kernel(cfg)?;
        match self.position_belief.convolve(&kernel) {
            Ok(belief) => next.position_belief = belief,
            Err(Error::ZeroMass) => {
                next.status = TrackStatus::Dead;
                return Ok(next);
            }
            Err(e) => return Err(e),
        }
        next.velocity_belief.covariance = math::add_2x2(
            &self.velocity_belief.covariance,
            &math::diag_2x2(cfg.velocity_noise),
        );
        next.frames_since_peak += 1;
        next.measured = false;
        Ok(next)
    }

    /// Update step against this frame's embedding map.
    pub fn update(&self, map: &EmbeddingMap, cfg: &HistFilterConfig) -> Result<Self> {
        if !self.is_active() {
            return Ok(self.clone());
        }
        let distances = map.distance_map(&self.reference_embedding)?;
        if !gate_missing(&distances, cfg.n_app) {
            return Ok(self.skip_measurement(cfg));
        }
        let likelihood = distances.softmin(cfg.temperature)?;
        if let Some(fraction) = cfg.entropy_fraction {
            if !gate_entropy(&likelihood, fraction) {
                return Ok(self.skip_measurement(cfg));
            }
        }
        Ok(self.update_with_likelihood(&likelihood))
    }

    /// Incorporates an arbitrary measurement likelihood.
    pub fn update_with_likelihood(&self, likelihood: &ProbabilityGrid) -> Self {
        let mut next = self.clone();
        if !self.is_active() {
            return next;
        }
        match self.position_belief.multiply_update(likelihood) {
            Ok(belief) => {
                next.position_belief = belief;
                next.frames_since_accepted_measurement = 0;
                next.measured = true;
            }
            Err(_) => next.status = TrackStatus::Dead,
        }
        next
    }

    /// Missing measurement: the prediction becomes the posterior.
    fn skip_measurement(&self, cfg: &HistFilterConfig) -> Self {
        let mut next = self.clone();
        next.measured = false;
        next.frames_since_accepted_measurement += 1;
        if next.frames_since_accepted_measurement > cfg.max_missed {
            next.status = TrackStatus::Dead;
        }
        next
    }

    /// Velocity measurement from the displacement of the MAP peak since the
    /// last measured frame. Only runs on frames with an accepted update.
    pub fn measure_velocity(&self, cfg: &HistFilterConfig) -> Self {
        let mut next = self.clone();
        if !self.is_active() || !self.measured {
            return next;
        }
        let (peak, _) = self.position_belief.map_peak();
        if let Some(prev) = self.prev_peak {
            let geometry = self.position_belief.geometry();
            let now = geometry.cell_center(peak);
            let then = geometry.cell_center(prev);
            let gap = self.frames_since_peak.max(1) as f64;
            let v = [(now[0] - then[0]) / gap, (now[1] - then[1]) / gap];
            let noise = math::diag_2x2(cfg.velocity_measurement_noise);
            next.velocity_belief = self.velocity_belief.update(v, &noise);
        }
        next.prev_peak = Some(peak);
        next.frames_since_peak = 0;
        next
    }

    /// Point estimate of the position in pixels.
    pub fn position(&self, mode: OutputMode) -> [f64; 2] {
        match mode {
            OutputMode::Peak => {
                let (cell, _) = self.position_belief.map_peak();
                self.position_belief.geometry().cell_center(cell)
            }
            OutputMode::Expectation => self.position_belief.expectation(),
        }
    }

    pub fn emit(&self, frame: usize, reg: &BBoxRegressor, mode: OutputMode) -> Result<OutputBox> {
        reg.output_box(self.id, frame, self.position(mode))
    }

    /// One full frame: predict, update, velocity measurement.
    pub fn step(&self, map: &EmbeddingMap, cfg: &HistFilterConfig) -> Result<Self> {
        let predicted = self.predict(cfg)?;
        let updated = predicted.update(map, cfg)?;
        Ok(updated.measure_velocity(cfg))
    }
}

/// Runs one histogram filter per identity over a sequence of embedding maps.
#[derive(Clone, Debug)]
pub struct IntegratedTracker {
    cfg: HistFilterConfig,
    regressor: BBoxRegressor,
    tracks: Vec<TrackState>,
    next_id: u64,
}

impl IntegratedTracker {
    pub fn new(cfg: HistFilterConfig, regressor: BBoxRegressor) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            regressor,
            tracks: Vec::new(),
            next_id: 1,
        })
    }

    pub fn config(&self) -> &HistFilterConfig {
        &self.cfg
    }

    /// Active tracks, in creation order.
    pub fn tracks(&self) -> &[TrackState] {
        &self.tracks
    }

    /// Advances every track with `map`, then starts a track at each birth
    /// position using the embedding found there as its reference. Returns
    /// the boxes reported for `frame`.
    pub fn step(
        &mut self,
        frame: usize,
        map: &EmbeddingMap,
        births: &[[f64; 2]],
    ) -> Result<Vec<OutputBox>> {
        let mut out = Vec::new();
        let mut survivors = Vec::with_capacity(self.tracks.len() + births.len());
        for track in &self.tracks {
            let next = track.step(map, &self.cfg)?;
            if !next.is_active() {
                continue;
            }
            if next.measured || self.cfg.emit_coasting {
                out.push(next.emit(frame, &self.regressor, self.cfg.output)?);
            }
            survivors.push(next);
        }
        for &center in births {
            let Some(reference) = map.embedding_at(center) else {
                continue;
            };
            let id = self.next_id;
            self.next_id += 1;
            let track = TrackState::init(id, center, reference, &self.cfg, *map.geometry())?;
            out.push(track.emit(frame, &self.regressor, self.cfg.output)?);
            survivors.push(track);
        }
        self.tracks = survivors;
        Ok(out)
    }
}
