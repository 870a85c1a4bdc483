//! Camera-specific bounding-box regression from a center point.
//!
//! Every person at a given image row gets the same box: the height is an
//! affine function of the center's y coordinate and the width a fixed
//! fraction of the height.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width-to-height ratio of an average pedestrian box.
pub const DEFAULT_ASPECT: f64 = 0.4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BBoxRegressor {
    /// Box height gained per pixel of center-y.
    pub slope: f64,
    pub intercept: f64,
    pub aspect: f64,
    pub scale: f64,
}

impl Default for BBoxRegressor {
    fn default() -> Self {
        Self {
            slope: 0.0,
            intercept: 100.0,
            aspect: DEFAULT_ASPECT,
            scale: 1.0,
        }
    }
}

/// A tracker output: one box of one track in one frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputBox {
    pub track_id: u64,
    pub frame: usize,
    /// Box center `[x, y]` in pixels.
    pub center: [f64; 2],
    pub width: f64,
    pub height: f64,
}

impl BBoxRegressor {
    /// Ordinary least squares of `height` on `center_y`.
    pub fn fit(samples: &[(f64, f64)]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Degenerate);
        }
        let n = samples.len() as f64;
        let mean_y = samples.iter().map(|s| s.0).sum::<f64>() / n;
        let mean_h = samples.iter().map(|s| s.1).sum::<f64>() / n;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for &(y, h) in samples {
            sxy += (y - mean_y) * (h - mean_h);
            sxx += (y - mean_y) * (y - mean_y);
        }
        if !(sxx > 0.0) {
            return Err(Error::Degenerate);
        }
        let slope = sxy / sxx;
        Ok(Self {
            slope,
            intercept: mean_h - slope * mean_y,
            ..Self::default()
        })
    }

    pub fn with_scale(self, scale: f64) -> Self {
        Self { scale, ..self }
    }

    /// `(width, height)` of the box centered at `center`.
    pub fn regress(&self, center: [f64; 2]) -> Result<(f64, f64)> {
        let height = self.scale * (self.slope * center[1] + self.intercept);
        if !(height > 0.0) {
            return Err(Error::NonPositiveHeight {
                y: center[1],
                height,
            });
        }
        Ok((self.aspect * height, height))
    }

    pub fn output_box(&self, track_id: u64, frame: usize, center: [f64; 2]) -> Result<OutputBox> {
        let (width, height) = self.regress(center)?;
        Ok(OutputBox {
            track_id,
            frame,
            center,
            width,
            height,
        })
    }
}
