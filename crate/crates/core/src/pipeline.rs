//! End-to-end runs: calibration, every tracker variant, evaluation.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::assoc::{
    AssociationConfig, Birth, Detection, DistanceMode, TrackManagementConfig, TrackerWorld,
};
use crate::bboxreg::{BBoxRegressor, OutputBox};
use crate::error::{Error, Result};
use crate::grid::GridGeometry;
use crate::histfilter::{HistFilterConfig, IntegratedTracker, TrackState};
use crate::kalman::KalmanConfig;
use crate::math;
use crate::measurement::EmbeddingMap;
use crate::metrics::{evaluate, EvalConfig, Metrics};
use crate::simworld::{generate_scenario, FrameObservation, GtBox, Scenario, ScenarioConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackerVariant {
    /// Detector-initialized nearest-neighbor Kalman tracker.
    Nnkf,
    /// As `Nnkf`, started from ground-truth first boxes.
    NnkfGt,
    /// Ground-truth init with combined position and appearance distance.
    NnkfReid,
    /// Ground-truth init with appearance distance only.
    NnkfOnlyReid,
    /// Histogram filter on embedding maps.
    Integrated,
    /// As `Integrated` with entropy gating.
    IntegratedEntropy,
}

impl TrackerVariant {
    pub const ALL: [TrackerVariant; 6] = [
        TrackerVariant::Nnkf,
        TrackerVariant::NnkfGt,
        TrackerVariant::NnkfReid,
        TrackerVariant::NnkfOnlyReid,
        TrackerVariant::Integrated,
        TrackerVariant::IntegratedEntropy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TrackerVariant::Nnkf => "nnkf",
            TrackerVariant::NnkfGt => "nnkf_gt",
            TrackerVariant::NnkfReid => "nnkf_reid",
            TrackerVariant::NnkfOnlyReid => "nnkf_only_reid",
            TrackerVariant::Integrated => "integrated",
            TrackerVariant::IntegratedEntropy => "integrated_entropy",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == name)
    }

    pub fn is_integrated(self) -> bool {
        matches!(
            self,
            TrackerVariant::Integrated | TrackerVariant::IntegratedEntropy
        )
    }
}

impl core::fmt::Display for TrackerVariant {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// Settings estimated from a held-out calibration scenario.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Appearance scale for association (median same-identity distance).
    pub n_app: f64,
    /// Missing-measurement threshold of the integrated tracker.
    pub missing_gate: f64,
    /// Entropy-gate fraction of the integrated tracker.
    pub entropy_fraction: f64,
    pub regressor: BBoxRegressor,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    /// Frames of the calibration scenario (capped by the scenario length).
    pub frames: usize,
    /// Mixed into the scenario seed to get the calibration seed.
    pub seed_salt: u64,
    /// Quantile of same-identity distances used for the missing gate.
    pub same_quantile: f64,
    /// Quantile of background minimum distances used for the missing gate.
    pub background_quantile: f64,
    /// Quantile of true-measurement entropy fractions used for the entropy gate.
    pub entropy_quantile: f64,
    /// Quantile of absent-identity entropy fractions used for the entropy gate.
    pub absent_entropy_quantile: f64,
    pub min_n_app: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            frames: 100,
            seed_salt: 0x9e37_79b9_7f4a_7c15,
            same_quantile: 0.95,
            background_quantile: 0.05,
            entropy_quantile: 0.95,
            absent_entropy_quantile: 0.05,
            min_n_app: 0.05,
        }
    }
}

/// Everything a run needs besides the scenario. `None` fields are calibrated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub histfilter: HistFilterConfig,
    pub kalman: KalmanConfig,
    pub association: AssociationConfig,
    pub detector_init: TrackManagementConfig,
    pub ground_truth_init: TrackManagementConfig,
    pub eval: EvalConfig,
    pub calibration: CalibrationConfig,
    pub n_app: Option<f64>,
    pub missing_gate: Option<f64>,
    pub entropy_fraction: Option<f64>,
    pub regressor: Option<BBoxRegressor>,
    /// Output box scale applied on top of the regressor.
    pub scale: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            histfilter: HistFilterConfig::default(),
            kalman: KalmanConfig::default(),
            association: AssociationConfig::default(),
            detector_init: TrackManagementConfig::detector_init(),
            ground_truth_init: TrackManagementConfig::ground_truth_init(),
            eval: EvalConfig::default(),
            calibration: CalibrationConfig::default(),
            n_app: None,
            missing_gate: None,
            entropy_fraction: None,
            regressor: None,
            scale: 1.0,
        }
    }
}

/// Sequential access to observed frames.
pub trait FrameSource {
    fn frame_count(&self) -> usize;
    fn geometry(&self) -> GridGeometry;
    fn frame(&self, t: usize) -> Result<FrameObservation>;
}

impl FrameSource for Scenario {
    fn frame_count(&self) -> usize {
        self.frames()
    }

    fn geometry(&self) -> GridGeometry {
        Scenario::geometry(self)
    }

    fn frame(&self, t: usize) -> Result<FrameObservation> {
        self.render_frame(t)
    }
}

/// Per-frame callback with the integrated tracker's live tracks.
pub trait BeliefObserver {
    fn observe(&mut self, frame: usize, tracks: &[TrackState]) -> Result<()>;
}

impl BeliefObserver for () {
    fn observe(&mut self, _: usize, _: &[TrackState]) -> Result<()> {
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub variant: TrackerVariant,
    pub calibration: Calibration,
    pub hypotheses: Vec<OutputBox>,
    pub ground_truth: Vec<OutputBox>,
    pub metrics: Metrics,
}

fn calibration_scenario(cfg: &ScenarioConfig, cc: &CalibrationConfig) -> Result<Scenario> {
    let calib = ScenarioConfig {
        seed: cfg.seed ^ cc.seed_salt,
        frames: cc.frames.clamp(1, cfg.frames.max(1)),
        ..*cfg
    };
    generate_scenario(&calib)
}

/// Midpoint between `low` and `high` when they are ordered, else `fallback`.
fn separating_threshold(low: f64, high: f64, fallback: f64) -> f64 {
    if low < high {
        0.5 * (low + high)
    } else {
        fallback
    }
}

/// Reference embeddings of people who never appear in `scenario`.
fn absent_references(scenario: &Scenario) -> Vec<crate::measurement::EmbeddingVector> {
    let cfg = &scenario.config;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(u64::MAX);
    (0..cfg.num_identities.max(1))
        .filter_map(|_| {
            let v = (0..cfg.embedding_dim)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            crate::measurement::EmbeddingVector::unit(v)
        })
        .collect()
}

/// Estimates appearance scales, gates and the box regressor on a scenario
/// generated with the same settings but an independent seed.
pub fn calibrate(cfg: &ScenarioConfig, pc: &PipelineConfig) -> Result<Calibration> {
    let cc = &pc.calibration;
    let scenario = calibration_scenario(cfg, cc)?;
    let geometry = scenario.geometry();
    let temperature = pc.histfilter.temperature;
    let mut references: Vec<Option<crate::measurement::EmbeddingVector>> =
        alloc::vec![None; scenario.identities.len() + 1];
    let mut same = Vec::new();
    let mut background = Vec::new();
    let mut entropy = Vec::new();
    let mut absent_entropy = Vec::new();
    let mut samples = Vec::new();
    let absent = absent_references(&scenario);
    for t in 0..scenario.frames() {
        let obs = scenario.render_frame(t)?;
        for reference in &absent {
            let lik = obs
                .embedding_map
                .distance_map(reference)?
                .softmin(temperature)?;
            absent_entropy.push(lik.entropy() / lik.max_entropy());
        }
        let mut present = BTreeSet::new();
        for g in &obs.gt_boxes {
            samples.push((g.center[1], g.height));
            present.insert(g.id);
            let slot = g.id as usize;
            let Some(cell) = geometry.cell_at(g.center) else {
                continue;
            };
            let Some(reference) = &references[slot] else {
                references[slot] = obs.embedding_map.embedding_at(g.center);
                continue;
            };
            let dmap = obs.embedding_map.distance_map(reference)?;
            same.push(dmap.get(cell));
            let bg_min = dmap
                .values()
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != geometry.index(cell))
                .map(|(_, &d)| d)
                .fold(f64::INFINITY, f64::min);
            background.push(bg_min);
            let lik = dmap.softmin(temperature)?;
            entropy.push(lik.entropy() / lik.max_entropy());
        }
    }
    let n_app = math::median(&same).unwrap_or(0.0).max(cc.min_n_app);
    let same_q = math::quantile(&same, cc.same_quantile).unwrap_or(0.0);
    let bg_q = math::quantile(&background, cc.background_quantile).unwrap_or(same_q);
    let missing_gate = separating_threshold(same_q, bg_q, same_q).max(1e-6);
    let true_q = math::quantile(&entropy, cc.entropy_quantile).unwrap_or(1.0);
    let absent_q = math::quantile(&absent_entropy, cc.absent_entropy_quantile).unwrap_or(1.0);
    let entropy_fraction = separating_threshold(true_q, absent_q, absent_q).clamp(1e-6, 1.0);
    let regressor = BBoxRegressor::fit(&samples)?;
    Ok(Calibration {
        n_app,
        missing_gate,
        entropy_fraction,
        regressor,
    })
}

impl PipelineConfig {
    /// Calibrated values with explicit overrides applied.
    pub fn resolve(&self, scenario: &ScenarioConfig) -> Result<Calibration> {
        let mut c = calibrate(scenario, self)?;
        if let Some(v) = self.n_app {
            c.n_app = v;
        }
        if let Some(v) = self.missing_gate {
            c.missing_gate = v;
        }
        if let Some(v) = self.entropy_fraction {
            c.entropy_fraction = v;
        }
        if let Some(r) = self.regressor {
            c.regressor = r;
        }
        c.regressor = c.regressor.with_scale(self.scale);
        Ok(c)
    }
}

fn gt_boxes_of(frame: usize, gt: &[GtBox]) -> impl Iterator<Item = OutputBox> + '_ {
    gt.iter().map(move |g| g.to_box(frame))
}

fn births_in(gt: &[GtBox], seen: &mut BTreeSet<u64>) -> Vec<[f64; 2]> {
    gt.iter()
        .filter(|g| seen.insert(g.id))
        .map(|g| g.center)
        .collect()
}

/// Runs `variant` over every frame of `source` with a precomputed calibration.
pub fn run_with(
    source: &dyn FrameSource,
    variant: TrackerVariant,
    pc: &PipelineConfig,
    calibration: &Calibration,
    observer: &mut dyn BeliefObserver,
) -> Result<RunOutput> {
    let mut hypotheses = Vec::new();
    let mut ground_truth = Vec::new();
    let mut seen = BTreeSet::new();
    let reg = calibration.regressor;

    if variant.is_integrated() {
        let cfg = HistFilterConfig {
            n_app: calibration.missing_gate,
            entropy_fraction: (variant == TrackerVariant::IntegratedEntropy)
                .then_some(calibration.entropy_fraction),
            ..pc.histfilter
        };
        let mut tracker = IntegratedTracker::new(cfg, reg)?;
        for t in 0..source.frame_count() {
            let obs = source.frame(t)?;
            let births = births_in(&obs.gt_boxes, &mut seen);
            hypotheses.extend(tracker.step(t, &obs.embedding_map, &births)?);
            ground_truth.extend(gt_boxes_of(t, &obs.gt_boxes));
            observer.observe(t, tracker.tracks())?;
        }
    } else {
        let (tm, mode) = match variant {
            TrackerVariant::Nnkf => (pc.detector_init, DistanceMode::Pos),
            TrackerVariant::NnkfGt => (pc.ground_truth_init, DistanceMode::Pos),
            TrackerVariant::NnkfReid => (pc.ground_truth_init, DistanceMode::Combined),
            _ => (pc.ground_truth_init, DistanceMode::App),
        };
        tm.validate()?;
        let ac = AssociationConfig {
            mode,
            n_app: calibration.n_app,
            ..pc.association
        };
        ac.validate()?;
        let mut world = TrackerWorld::new(pc.kalman, Some(source.geometry()));
        for t in 0..source.frame_count() {
            let obs = source.frame(t)?;
            let births: Vec<Birth> = births_in(&obs.gt_boxes, &mut seen)
                .into_iter()
                .map(|center| Birth {
                    center,
                    embedding: obs.embedding_map.embedding_at(center),
                })
                .collect();
            world.step(&obs.detections, &births, &tm, &ac);
            for track in world.tracks() {
                hypotheses.push(reg.output_box(track.id, t, track.state.position())?);
            }
            ground_truth.extend(gt_boxes_of(t, &obs.gt_boxes));
        }
    }

    if ground_truth.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    let metrics = evaluate(&ground_truth, &hypotheses, &pc.eval)?;
    Ok(RunOutput {
        variant,
        calibration: *calibration,
        hypotheses,
        ground_truth,
        metrics,
    })
}

/// Calibrates, then runs `variant` on `scenario`.
pub fn run(scenario: &Scenario, variant: TrackerVariant, pc: &PipelineConfig) -> Result<RunOutput> {
    let calibration = pc.resolve(&scenario.config)?;
    run_with(scenario, variant, pc, &calibration, &mut ())
}

/// Runs several variants sharing one calibration.
pub fn run_all(
    scenario: &Scenario,
    variants: &[TrackerVariant],
    pc: &PipelineConfig,
) -> Result<Vec<RunOutput>> {
    let calibration = pc.resolve(&scenario.config)?;
    variants
        .iter()
        .map(|&v| run_with(scenario, v, pc, &calibration, &mut ()))
        .collect()
}

/// Convenience for callers that only hold an embedding map and births.
pub fn integrated_step(
    tracker: &mut IntegratedTracker,
    frame: usize,
    map: &EmbeddingMap,
    births: &[[f64; 2]],
) -> Result<Vec<OutputBox>> {
    tracker.step(frame, map, births)
}

/// Detections with no embedding, for position-only runs fed from files.
pub fn strip_embeddings(detections: &[Detection]) -> Vec<Detection> {
    detections
        .iter()
        .map(|d| Detection {
            embedding: None,
            ..d.clone()
        })
        .collect()
}
