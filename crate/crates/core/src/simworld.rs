//! Synthetic scenes standing in for a camera and a dense ReID network.
//!
//! A scenario fixes identities (unit-norm embeddings, trajectories, box
//! heights). Frames are rendered on demand: each frame draws from its own
//! ChaCha stream, so `render_frame(t)` is a pure function of the scenario.

use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::assoc::Detection;
use crate::bboxreg::{OutputBox, DEFAULT_ASPECT};
use crate::error::{Error, Result};
use crate::grid::{Cell, GridGeometry};
use crate::math;
use crate::measurement::{EmbeddingMap, EmbeddingVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundMode {
    /// Every background cell gets a fresh random unit vector each frame.
    RandomFar,
    /// As `RandomFar`, plus one fixed cell resembling one identity.
    Confuser,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BorderMode {
    /// Identities vanish once they walk out of the image.
    Exit,
    /// Identities bounce off the border and leave at a random frame.
    Reflect,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionConfig {
    pub miss_rate: f64,
    /// Expected false alarms per grid cell per frame.
    pub fp_rate: f64,
    pub score_mean: f64,
    pub score_noise: f64,
    /// False alarms score `fp_score_mean + fp_score_noise * N(0, 1)`.
    pub fp_score_mean: f64,
    pub fp_score_noise: f64,
    /// Std-dev of the detected center around the true center, px.
    pub position_noise: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            miss_rate: 0.2,
            fp_rate: 0.0002,
            score_mean: 0.8,
            score_noise: 0.2,
            fp_score_mean: -0.5,
            fp_score_noise: 0.4,
            position_noise: 2.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub width: usize,
    pub height: usize,
    pub cell_size: f64,
    pub embedding_dim: usize,
    pub num_identities: usize,
    pub frames: usize,
    /// Speed range, px/frame.
    pub velocity_range: [f64; 2],
    pub motion_noise_sigma: f64,
    pub embedding_noise_sigma: f64,
    pub background_mode: BackgroundMode,
    pub confuser_similarity: f64,
    pub border_mode: BorderMode,
    pub detection: DetectionConfig,
    /// Box height = factor * (height_slope * y + height_intercept).
    pub height_slope: f64,
    pub height_intercept: f64,
    /// Std-dev of the per-identity height factor around 1.
    pub height_jitter: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            width: 40,
            height: 32,
            cell_size: 8.0,
            embedding_dim: 128,
            num_identities: 5,
            frames: 300,
            velocity_range: [0.5, 2.0],
            motion_noise_sigma: 0.3,
            embedding_noise_sigma: 0.0,
            background_mode: BackgroundMode::RandomFar,
            confuser_similarity: 0.95,
            border_mode: BorderMode::Exit,
            detection: DetectionConfig::default(),
            height_slope: 0.25,
            height_intercept: 60.0,
            height_jitter: 0.05,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    /// Far random backgrounds, noise-free identity embeddings.
    pub fn easy(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    /// A fixed confuser resembling one identity, noisy embeddings, more misses.
    pub fn hard(seed: u64) -> Self {
        let mut cfg = Self::easy(seed);
        cfg.background_mode = BackgroundMode::Confuser;
        cfg.embedding_noise_sigma = 0.1;
        cfg.detection.miss_rate = 0.3;
        cfg
    }

    pub fn geometry(&self) -> Result<GridGeometry> {
        GridGeometry::new(self.width, self.height, self.cell_size)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry()?;
        let d = &self.detection;
        let checks = [
            (self.frames >= 1, "frames must be at least 1"),
            (self.embedding_dim >= 2, "embedding_dim must be at least 2"),
            (
                (0.0..=1.0).contains(&d.miss_rate) && (0.0..=1.0).contains(&d.fp_rate),
                "detection rates must be in [0, 1]",
            ),
            (
                self.velocity_range[0] >= 0.0 && self.velocity_range[0] <= self.velocity_range[1],
                "velocity_range must be ordered and non-negative",
            ),
            (
                self.motion_noise_sigma >= 0.0
                    && self.embedding_noise_sigma >= 0.0
                    && d.score_noise >= 0.0
                    && d.fp_score_noise >= 0.0
                    && d.position_noise >= 0.0
                    && self.height_jitter >= 0.0,
                "noise levels must be non-negative",
            ),
            (
                (0.0..1.0).contains(&self.confuser_similarity),
                "confuser_similarity must be in [0, 1)",
            ),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::ConfigInvalid(msg.into()));
            }
        }
        Ok(())
    }

    pub fn world_height(&self, y: f64) -> f64 {
        self.height_slope * y + self.height_intercept
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub frame: usize,
    pub center: [f64; 2],
    pub present: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Identity {
    pub id: u64,
    pub embedding: EmbeddingVector,
    pub height_factor: f64,
    /// One point per scenario frame.
    pub trajectory: Vec<TrajectoryPoint>,
}

impl Identity {
    pub fn first_present(&self) -> Option<&TrajectoryPoint> {
        self.trajectory.iter().find(|p| p.present)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Confuser {
    pub cell: Cell,
    pub target: u64,
    pub embedding: EmbeddingVector,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GtBox {
    pub id: u64,
    pub center: [f64; 2],
    pub height: f64,
}

impl GtBox {
    pub fn to_box(&self, frame: usize) -> OutputBox {
        OutputBox {
            track_id: self.id,
            frame,
            center: self.center,
            width: DEFAULT_ASPECT * self.height,
            height: self.height,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameObservation {
    pub frame: usize,
    pub embedding_map: EmbeddingMap,
    pub detections: Vec<Detection>,
    pub gt_boxes: Vec<GtBox>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub identities: Vec<Identity>,
    pub confuser: Option<Confuser>,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> EmbeddingVector {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| normal(rng)).collect();
        if let Some(e) = EmbeddingVector::unit(v) {
            return e;
        }
    }
}

fn frame_rng(seed: u64, frame: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(frame as u64 + 1);
    rng
}

/// Builds identities, trajectories and the optional confuser.
pub fn generate_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let geometry = cfg.geometry()?;
    let [ex, ey] = geometry.extent();
    let entry_max = cfg.frames / 2;

    let mut identities = Vec::with_capacity(cfg.num_identities);
    for k in 0..cfg.num_identities {
        let embedding = random_unit(&mut rng, cfg.embedding_dim);
        let height_factor = (1.0 + cfg.height_jitter * normal(&mut rng)).clamp(0.7, 1.3);
        let entry = rng.random_range(0..=entry_max);
        let exit = match cfg.border_mode {
            BorderMode::Exit => cfg.frames,
            BorderMode::Reflect => {
                let life = rng.random_range(cfg.frames / 4..=cfg.frames);
                (entry + life.max(1)).min(cfg.frames)
            }
        };
        let mut pos = [
            rng.random_range(0.1 * ex..=0.9 * ex),
            rng.random_range(0.1 * ey..=0.9 * ey),
        ];
        let speed = rng.random_range(cfg.velocity_range[0]..=cfg.velocity_range[1]);
        let heading = rng.random_range(0.0..core::f64::consts::TAU);
        let mut vel = [speed * math::cos(heading), speed * math::sin(heading)];

        let mut trajectory = Vec::with_capacity(cfg.frames);
        let mut gone = false;
        for frame in 0..cfg.frames {
            if frame > entry && !gone {
                for axis in 0..2 {
                    let jitter = if cfg.motion_noise_sigma > 0.0 {
                        cfg.motion_noise_sigma * normal(&mut rng)
                    } else {
                        0.0
                    };
                    pos[axis] += vel[axis] + jitter;
                }
                if cfg.border_mode == BorderMode::Reflect {
                    for (axis, limit) in [ex, ey].into_iter().enumerate() {
                        if pos[axis] < 0.0 {
                            pos[axis] = -pos[axis];
                            vel[axis] = -vel[axis];
                        } else if pos[axis] > limit {
                            pos[axis] = 2.0 * limit - pos[axis];
                            vel[axis] = -vel[axis];
                        }
                        pos[axis] = pos[axis].clamp(0.0, limit);
                    }
                }
            }
            if frame >= entry && !gone && (frame >= exit || !geometry.contains(pos)) {
                gone = true;
            }
            trajectory.push(TrajectoryPoint {
                frame,
                center: pos,
                present: frame >= entry && !gone,
            });
        }
        identities.push(Identity {
            id: k as u64 + 1,
            embedding,
            height_factor,
            trajectory,
        });
    }

    let confuser = match cfg.background_mode {
        BackgroundMode::RandomFar => None,
        BackgroundMode::Confuser if identities.is_empty() => None,
        BackgroundMode::Confuser => {
            let target = &identities[rng.random_range(0..identities.len())];
            let cell = Cell::new(
                rng.random_range(0..cfg.height),
                rng.random_range(0..cfg.width),
            );
            let e = target.embedding.as_slice();
            let mut g: Vec<f64> = (0..cfg.embedding_dim).map(|_| normal(&mut rng)).collect();
            let along: f64 = g.iter().zip(e).map(|(a, b)| a * b).sum();
            g.iter_mut().zip(e).for_each(|(a, b)| *a -= along * b);
            let ortho = EmbeddingVector::unit(g).ok_or_else(|| {
                Error::ConfigInvalid("could not build a confuser direction".into())
            })?;
            let s = cfg.confuser_similarity;
            let c = math::sqrt(1.0 - s * s);
            let values = e
                .iter()
                .zip(ortho.as_slice())
                .map(|(a, b)| s * a + c * b)
                .collect();
            Some(Confuser {
                cell,
                target: target.id,
                embedding: EmbeddingVector::new(values),
            })
        }
    };

    Ok(Scenario {
        config: *cfg,
        identities,
        confuser,
    })
}

impl Scenario {
    pub fn geometry(&self) -> GridGeometry {
        GridGeometry {
            width: self.config.width,
            height: self.config.height,
            cell_size: self.config.cell_size,
        }
    }

    pub fn frames(&self) -> usize {
        self.config.frames
    }

    pub fn gt_boxes(&self, frame: usize) -> Vec<GtBox> {
        self.identities
            .iter()
            .filter_map(|ident| {
                let p = ident.trajectory.get(frame)?;
                p.present.then(|| GtBox {
                    id: ident.id,
                    center: p.center,
                    height: ident.height_factor * self.config.world_height(p.center[1]),
                })
            })
            .collect()
    }

    /// Every ground-truth box of the sequence as evaluation boxes.
    pub fn all_gt_boxes(&self) -> Vec<OutputBox> {
        (0..self.frames())
            .flat_map(|f| self.gt_boxes(f).into_iter().map(move |g| g.to_box(f)))
            .collect()
    }

    /// `(frame, id, center)` of every identity's first appearance.
    pub fn births(&self) -> Vec<(usize, u64, [f64; 2])> {
        let mut out: Vec<_> = self
            .identities
            .iter()
            .filter_map(|i| i.first_present().map(|p| (p.frame, i.id, p.center)))
            .collect();
        out.sort_by_key(|b| (b.0, b.1));
        out
    }

    /// Renders frame `t`: embedding map, detections and ground truth.
    pub fn render_frame(&self, t: usize) -> Result<FrameObservation> {
        let cfg = &self.config;
        if t >= cfg.frames {
            return Err(Error::FrameOutOfRange {
                frame: t,
                frames: cfg.frames,
            });
        }
        let geometry = self.geometry();
        let dim = cfg.embedding_dim;
        let mut rng = frame_rng(cfg.seed, t);

        let mut values = vec![0.0; geometry.len() * dim];
        for cell in values.chunks_exact_mut(dim) {
            let e = random_unit(&mut rng, dim);
            cell.copy_from_slice(e.as_slice());
        }
        let mut map = EmbeddingMap::new(geometry, dim, values)?;
        if let Some(c) = &self.confuser {
            map.set_cell(c.cell, c.embedding.as_slice())?;
        }

        let mut observed = Vec::new();
        for ident in &self.identities {
            let p = &ident.trajectory[t];
            if !p.present {
                continue;
            }
            let obs = if cfg.embedding_noise_sigma > 0.0 {
                let noisy: Vec<f64> = ident
                    .embedding
                    .as_slice()
                    .iter()
                    .map(|v| v + cfg.embedding_noise_sigma * normal(&mut rng))
                    .collect();
                EmbeddingVector::unit(noisy).unwrap_or_else(|| ident.embedding.clone())
            } else {
                ident.embedding.clone()
            };
            if let Some(cell) = geometry.cell_at(p.center) {
                map.set_cell(cell, obs.as_slice())?;
            }
            observed.push((p.center, obs));
        }

        let d = &cfg.detection;
        let mut detections = Vec::new();
        for (center, obs) in observed {
            let missed = rng.random::<f64>() < d.miss_rate;
            let jx = normal(&mut rng);
            let jy = normal(&mut rng);
            let js = normal(&mut rng);
            if missed {
                continue;
            }
            detections.push(Detection {
                frame: t,
                center: [
                    center[0] + d.position_noise * jx,
                    center[1] + d.position_noise * jy,
                ],
                score: d.score_mean + d.score_noise * js,
                embedding: Some(obs),
            });
        }
        let lambda = d.fp_rate * geometry.len() as f64;
        if lambda > 0.0 {
            let poisson = Poisson::new(lambda)
                .map_err(|_| Error::ConfigInvalid("invalid false-alarm rate".into()))?;
            let count: f64 = poisson.sample(&mut rng);
            let [ex, ey] = geometry.extent();
            for _ in 0..count as usize {
                let center = [rng.random_range(0.0..=ex), rng.random_range(0.0..=ey)];
                let score = d.fp_score_mean + d.fp_score_noise * normal(&mut rng);
                detections.push(Detection {
                    frame: t,
                    center,
                    score,
                    embedding: map.embedding_at(center),
                });
            }
        }

        Ok(FrameObservation {
            frame: t,
            embedding_map: map,
            detections,
            gt_boxes: self.gt_boxes(t),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ScenarioConfig {
        ScenarioConfig {
            width: 20,
            height: 16,
            embedding_dim: 16,
            frames: 40,
            num_identities: 3,
            seed: 11,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn same_seed_same_scenario() {
        let a = generate_scenario(&small()).unwrap();
        let b = generate_scenario(&small()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.render_frame(7).unwrap(), b.render_frame(7).unwrap());
        let c = generate_scenario(&ScenarioConfig {
            seed: 12,
            ..small()
        })
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn noiseless_motion_is_linear() {
        let cfg = ScenarioConfig {
            motion_noise_sigma: 0.0,
            ..small()
        };
        let s = generate_scenario(&cfg).unwrap();
        for ident in &s.identities {
            let pts: Vec<_> = ident.trajectory.iter().filter(|p| p.present).collect();
            if pts.len() < 3 {
                continue;
            }
            let v = [
                pts[1].center[0] - pts[0].center[0],
                pts[1].center[1] - pts[0].center[1],
            ];
            for (k, p) in pts.iter().enumerate() {
                for (axis, &va) in v.iter().enumerate() {
                    let expect = pts[0].center[axis] + k as f64 * va;
                    assert!((p.center[axis] - expect).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn noiseless_embedding_is_exact_at_identity_cell() {
        let s = generate_scenario(&small()).unwrap();
        for t in [0, 15, 30] {
            let f = s.render_frame(t).unwrap();
            for g in &f.gt_boxes {
                let ident = &s.identities[(g.id - 1) as usize];
                let d = f.embedding_map.distance_map(&ident.embedding).unwrap();
                let cell = s.geometry().cell_at(g.center).unwrap();
                let collided = f
                    .gt_boxes
                    .iter()
                    .any(|o| o.id > g.id && s.geometry().cell_at(o.center) == Some(cell));
                if !collided {
                    assert_eq!(d.get(cell), 0.0);
                }
            }
        }
    }

    #[test]
    fn full_miss_rate_drops_true_detections() {
        let cfg = ScenarioConfig {
            detection: DetectionConfig {
                miss_rate: 1.0,
                fp_rate: 0.0,
                ..DetectionConfig::default()
            },
            ..small()
        };
        let s = generate_scenario(&cfg).unwrap();
        for t in 0..cfg.frames {
            assert!(s.render_frame(t).unwrap().detections.is_empty());
        }
    }

    #[test]
    fn frame_out_of_range() {
        let s = generate_scenario(&small()).unwrap();
        assert_eq!(
            s.render_frame(40),
            Err(Error::FrameOutOfRange {
                frame: 40,
                frames: 40
            })
        );
    }

    #[test]
    fn invalid_configs() {
        for cfg in [
            ScenarioConfig {
                frames: 0,
                ..small()
            },
            ScenarioConfig {
                embedding_dim: 1,
                ..small()
            },
            ScenarioConfig {
                confuser_similarity: 1.0,
                ..small()
            },
            ScenarioConfig {
                detection: DetectionConfig {
                    miss_rate: 1.5,
                    ..DetectionConfig::default()
                },
                ..small()
            },
        ] {
            assert!(matches!(
                generate_scenario(&cfg),
                Err(Error::ConfigInvalid(_))
            ));
        }
    }

    #[test]
    fn confuser_has_requested_similarity() {
        let cfg = ScenarioConfig {
            background_mode: BackgroundMode::Confuser,
            confuser_similarity: 0.95,
            ..small()
        };
        let s = generate_scenario(&cfg).unwrap();
        let c = s.confuser.as_ref().unwrap();
        let target = &s.identities[(c.target - 1) as usize];
        assert!((c.embedding.dot(&target.embedding) - 0.95).abs() < 1e-12);
        assert!((c.embedding.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn present_centers_stay_on_grid() {
        let s = generate_scenario(&ScenarioConfig {
            border_mode: BorderMode::Reflect,
            ..small()
        })
        .unwrap();
        let g = s.geometry();
        for ident in &s.identities {
            for p in ident.trajectory.iter().filter(|p| p.present) {
                assert!(g.contains(p.center));
            }
        }
    }
}
