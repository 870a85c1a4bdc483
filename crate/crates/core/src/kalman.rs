//! Constant-velocity Kalman filter on image center points.
//!
//! State is `(x, y, vx, vy)` in px and px/frame; measurements are `(x, y)`.

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KFState {
    pub mean: Vector4<f64>,
    pub covariance: Matrix4<f64>,
}

/// Noise settings of the baseline trackers. The defaults are hand-tuned for
/// the synthetic scenes, not reproduced from any dataset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KalmanConfig {
    /// Diagonal of the process noise, `(x, y, vx, vy)`.
    pub process_noise: [f64; 4],
    /// Isotropic measurement noise, px².
    pub measurement_noise: f64,
    /// Diagonal of the covariance given to new tracks.
    pub initial_covariance: [f64; 4],
}

impl Default for KalmanConfig {
    fn default() -> Self {
        Self {
            process_noise: [1.0, 1.0, 0.25, 0.25],
            measurement_noise: 4.0,
            initial_covariance: [4.0, 4.0, 4.0, 4.0],
        }
    }
}

impl KalmanConfig {
    pub fn q(&self) -> Matrix4<f64> {
        Matrix4::from_diagonal(&Vector4::from(self.process_noise))
    }

    pub fn r(&self) -> Matrix2<f64> {
        Matrix2::identity() * self.measurement_noise
    }
}

/// Constant-velocity transition: `x += vx`, `y += vy`.
pub fn transition() -> Matrix4<f64> {
    Matrix4::new(
        1.0, 0.0, 1.0, 0.0, //
        0.0, 1.0, 0.0, 1.0, //
        0.0, 0.0, 1.0, 0.0, //
        0.0, 0.0, 0.0, 1.0,
    )
}

/// Extracts the position from the state.
pub fn observation() -> Matrix2x4<f64> {
    Matrix2x4::new(
        1.0, 0.0, 0.0, 0.0, //
        0.0, 1.0, 0.0, 0.0,
    )
}

impl KFState {
    pub fn new(mean: Vector4<f64>, covariance: Matrix4<f64>) -> Self {
        Self { mean, covariance }
    }

    /// A stationary state at `position` with the configured initial covariance.
    pub fn at(position: [f64; 2], cfg: &KalmanConfig) -> Self {
        Self {
            mean: Vector4::new(position[0], position[1], 0.0, 0.0),
            covariance: Matrix4::from_diagonal(&Vector4::from(cfg.initial_covariance)),
        }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.mean[0], self.mean[1]]
    }

    pub fn predict(&self, q: &Matrix4<f64>) -> Self {
        let f = transition();
        let cov = f * self.covariance * f.transpose() + q;
        Self {
            mean: f * self.mean,
            covariance: symmetrize(cov),
        }
    }

    /// Kalman update with a position measurement; Joseph-form covariance.
    pub fn update(&self, z: [f64; 2], r: &Matrix2<f64>) -> Self {
        let h = observation();
        let p = self.covariance;
        let s = h * p * h.transpose() + r;
        let Some(s_inv) = s.try_inverse() else {
            return *self;
        };
        let k = p * h.transpose() * s_inv;
        let innovation = Vector2::new(z[0], z[1]) - h * self.mean;
        let i_kh = Matrix4::identity() - k * h;
        let cov = i_kh * p * i_kh.transpose() + k * r * k.transpose();
        Self {
            mean: self.mean + k * innovation,
            covariance: symmetrize(cov),
        }
    }
}

fn symmetrize(m: Matrix4<f64>) -> Matrix4<f64> {
    (m + m.transpose()) * 0.5
}
