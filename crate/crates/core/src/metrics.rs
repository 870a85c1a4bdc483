//! CLEAR-MOT and identity measures.
//!
//! Frames must be fed in order: identity switches depend on the last known
//! correspondence of every ground-truth object.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::assoc::{hungarian, CostMatrix};
use crate::bboxreg::OutputBox;
use crate::error::{Error, Result};
use crate::math;

/// Intersection over union of two center-parameterized boxes.
pub fn iou(a: &OutputBox, b: &OutputBox) -> f64 {
    let ix = overlap_1d(a.center[0], a.width, b.center[0], b.width);
    let iy = overlap_1d(a.center[1], a.height, b.center[1], b.height);
    let inter = ix * iy;
    let union = a.width * a.height + b.width * b.height - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

fn overlap_1d(ca: f64, wa: f64, cb: f64, wb: f64) -> f64 {
    let lo = (ca - 0.5 * wa).max(cb - 0.5 * wb);
    let hi = (ca + 0.5 * wa).min(cb + 0.5 * wb);
    (hi - lo).max(0.0)
}

/// How a ground-truth box and a hypothesis are compared.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MatchCriterion {
    /// Match when IoU reaches the threshold; similarity is the IoU.
    Iou { threshold: f64 },
    /// Match centers within `max_px`; similarity is `1 - d / max_px`.
    Distance { max_px: f64 },
}

impl MatchCriterion {
    /// Similarity in `[0, 1]`, or `None` when the pair may not match.
    pub fn similarity(&self, gt: &OutputBox, hyp: &OutputBox) -> Option<f64> {
        match *self {
            MatchCriterion::Iou { threshold } => {
                let s = iou(gt, hyp);
                (s >= threshold).then_some(s)
            }
            MatchCriterion::Distance { max_px } => {
                let dx = gt.center[0] - hyp.center[0];
                let dy = gt.center[1] - hyp.center[1];
                let d = math::sqrt(dx * dx + dy * dy);
                (d <= max_px).then_some(1.0 - d / max_px)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub criterion: MatchCriterion,
    /// Keep last frame's pairs when they still match before re-solving.
    pub continuity: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            criterion: MatchCriterion::Iou { threshold: 0.5 },
            continuity: true,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameCounts {
    pub gt: usize,
    pub hyp: usize,
    pub matches: usize,
    pub fp: usize,
    pub fn_: usize,
    pub ids: usize,
}

/// One matched pair of a frame: `(gt id, hyp id, similarity)`.
pub type Correspondence = (u64, u64, f64);

/// Matches one frame against the last known ground-truth correspondences.
pub fn match_frame(
    gt: &[OutputBox],
    hyp: &[OutputBox],
    last: &BTreeMap<u64, u64>,
    cfg: &EvalConfig,
) -> (Vec<Correspondence>, FrameCounts) {
    let mut gt_taken = alloc::vec![false; gt.len()];
    let mut hyp_taken = alloc::vec![false; hyp.len()];
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();

    if cfg.continuity {
        let mut order: Vec<usize> = (0..gt.len()).collect();
        order.sort_by_key(|&g| gt[g].track_id);
        for g in order {
            let Some(&h_id) = last.get(&gt[g].track_id) else {
                continue;
            };
            let Some(h) = (0..hyp.len()).find(|&h| !hyp_taken[h] && hyp[h].track_id == h_id) else {
                continue;
            };
            if let Some(s) = cfg.criterion.similarity(&gt[g], &hyp[h]) {
                gt_taken[g] = true;
                hyp_taken[h] = true;
                pairs.push((g, h, s));
            }
        }
    }

    let free_gt: Vec<usize> = (0..gt.len()).filter(|&g| !gt_taken[g]).collect();
    let free_hyp: Vec<usize> = (0..hyp.len()).filter(|&h| !hyp_taken[h]).collect();
    let sims: Vec<Option<f64>> = free_gt
        .iter()
        .flat_map(|&g| free_hyp.iter().map(move |&h| (g, h)))
        .map(|(g, h)| cfg.criterion.similarity(&gt[g], &hyp[h]))
        .collect();
    let cost = CostMatrix::new(
        free_gt.len(),
        free_hyp.len(),
        sims.iter().map(|s| s.map_or(2.0, |s| 1.0 - s)).collect(),
    );
    for (r, c) in hungarian(&cost) {
        if let Some(s) = sims[r * free_hyp.len() + c] {
            pairs.push((free_gt[r], free_hyp[c], s));
        }
    }

    let mut counts = FrameCounts {
        gt: gt.len(),
        hyp: hyp.len(),
        matches: pairs.len(),
        fp: hyp.len() - pairs.len(),
        fn_: gt.len() - pairs.len(),
        ids: 0,
    };
    let mut out = Vec::with_capacity(pairs.len());
    for (g, h, s) in pairs {
        let (g_id, h_id) = (gt[g].track_id, hyp[h].track_id);
        if last.get(&g_id).is_some_and(|&prev| prev != h_id) {
            counts.ids += 1;
        }
        out.push((g_id, h_id, s));
    }
    out.sort_by_key(|p| p.0);
    (out, counts)
}

/// The full metric set of an evaluated sequence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    #[serde(rename = "MOTA")]
    pub mota: f64,
    #[serde(rename = "MOTP")]
    pub motp: f64,
    #[serde(rename = "FP")]
    pub fp: usize,
    #[serde(rename = "FN")]
    pub fn_: usize,
    #[serde(rename = "IDS")]
    pub ids: usize,
    #[serde(rename = "MT")]
    pub mt: usize,
    #[serde(rename = "ML")]
    pub ml: usize,
    #[serde(rename = "IDF1")]
    pub idf1: f64,
    #[serde(rename = "IDP")]
    pub idp: f64,
    #[serde(rename = "IDR")]
    pub idr: f64,
    /// Number of ground-truth trajectories.
    pub total: usize,
    /// Number of ground-truth boxes.
    pub gt: usize,
    pub matches: usize,
    pub frames: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct Coverage {
    present: usize,
    matched: usize,
}

/// Accumulated evaluation state of one sequence.
#[derive(Clone, Debug, Default)]
pub struct EvalLedger {
    cfg: EvalConfig,
    frames: usize,
    totals: FrameCounts,
    similarity_sum: f64,
    last: BTreeMap<u64, u64>,
    coverage: BTreeMap<u64, Coverage>,
    identity: IdTally,
}

impl EvalLedger {
    pub fn new(cfg: EvalConfig) -> Self {
        Self {
            cfg,
            ..Self::default()
        }
    }

    pub fn add_frame(&mut self, gt: &[OutputBox], hyp: &[OutputBox]) -> FrameCounts {
        let (pairs, counts) = match_frame(gt, hyp, &self.last, &self.cfg);
        self.frames += 1;
        self.totals.gt += counts.gt;
        self.totals.hyp += counts.hyp;
        self.totals.matches += counts.matches;
        self.totals.fp += counts.fp;
        self.totals.fn_ += counts.fn_;
        self.totals.ids += counts.ids;
        for g in gt {
            self.coverage.entry(g.track_id).or_default().present += 1;
        }
        for &(g, h, s) in &pairs {
            self.similarity_sum += s;
            self.last.insert(g, h);
            if let Some(c) = self.coverage.get_mut(&g) {
                c.matched += 1;
            }
        }
        self.identity.add_frame(gt, hyp, &self.cfg.criterion);
        counts
    }

    pub fn totals(&self) -> FrameCounts {
        self.totals
    }

    pub fn mota_motp(&self) -> Result<(f64, f64)> {
        if self.totals.gt == 0 {
            return Err(Error::EmptyGroundTruth);
        }
        let t = &self.totals;
        let mota = 1.0 - (t.fp + t.fn_ + t.ids) as f64 / t.gt as f64;
        let motp = if t.matches > 0 {
            self.similarity_sum / t.matches as f64
        } else {
            0.0
        };
        Ok((mota, motp))
    }

    /// Mostly tracked (>80 % covered) and mostly lost (<20 %) trajectories.
    pub fn mt_ml(&self) -> (usize, usize) {
        let mut mt = 0;
        let mut ml = 0;
        for c in self.coverage.values() {
            let frac = c.matched as f64 / c.present as f64;
            if frac > 0.8 {
                mt += 1;
            } else if frac < 0.2 {
                ml += 1;
            }
        }
        (mt, ml)
    }

    pub fn id_measures(&self) -> Result<IdMeasures> {
        self.identity.measures()
    }

    pub fn finish(&self) -> Result<Metrics> {
        let (mota, motp) = self.mota_motp()?;
        let (mt, ml) = self.mt_ml();
        let id = self.id_measures()?;
        Ok(Metrics {
            mota,
            motp,
            fp: self.totals.fp,
            fn_: self.totals.fn_,
            ids: self.totals.ids,
            mt,
            ml,
            idf1: id.idf1,
            idp: id.idp,
            idr: id.idr,
            total: self.coverage.len(),
            gt: self.totals.gt,
            matches: self.totals.matches,
            frames: self.frames,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdMeasures {
    pub idf1: f64,
    pub idp: f64,
    pub idr: f64,
    pub idtp: usize,
    pub idfp: usize,
    pub idfn: usize,
}

/// Frame-level co-occurrence counts between ground-truth and hypothesis ids.
#[derive(Clone, Debug, Default)]
struct IdTally {
    gt_len: BTreeMap<u64, usize>,
    hyp_len: BTreeMap<u64, usize>,
    pair: BTreeMap<(u64, u64), usize>,
}

impl IdTally {
    fn add_frame(&mut self, gt: &[OutputBox], hyp: &[OutputBox], criterion: &MatchCriterion) {
        for g in gt {
            *self.gt_len.entry(g.track_id).or_default() += 1;
        }
        for h in hyp {
            *self.hyp_len.entry(h.track_id).or_default() += 1;
        }
        for g in gt {
            for h in hyp {
                if criterion.similarity(g, h).is_some() {
                    *self.pair.entry((g.track_id, h.track_id)).or_default() += 1;
                }
            }
        }
    }

    fn measures(&self) -> Result<IdMeasures> {
        let total_gt: usize = self.gt_len.values().sum();
        if total_gt == 0 {
            return Err(Error::EmptyGroundTruth);
        }
        let total_hyp: usize = self.hyp_len.values().sum();
        let gt_ids: Vec<u64> = self.gt_len.keys().copied().collect();
        let hyp_ids: Vec<u64> = self.hyp_len.keys().copied().collect();
        let count = |g: usize, h: usize| {
            self.pair
                .get(&(gt_ids[g], hyp_ids[h]))
                .copied()
                .unwrap_or(0)
        };
        // Maximizing co-occurrence is the same as minimizing IDFP + IDFN.
        let cost = CostMatrix::from_fn(gt_ids.len(), hyp_ids.len(), |g, h| -(count(g, h) as f64));
        let idtp: usize = hungarian(&cost).iter().map(|&(g, h)| count(g, h)).sum();
        let idfp = total_hyp - idtp;
        let idfn = total_gt - idtp;
        let ratio = |num: usize, den: usize| {
            if den > 0 {
                num as f64 / den as f64
            } else {
                0.0
            }
        };
        Ok(IdMeasures {
            idp: ratio(idtp, idtp + idfp),
            idr: ratio(idtp, idtp + idfn),
            idf1: ratio(2 * idtp, 2 * idtp + idfp + idfn),
            idtp,
            idfp,
            idfn,
        })
    }
}

/// Global identity measures of complete sequences given as flat box lists.
pub fn id_measures(
    gt: &[OutputBox],
    hyp: &[OutputBox],
    criterion: &MatchCriterion,
) -> Result<IdMeasures> {
    let mut tally = IdTally::default();
    for (_, g, h) in group_by_frame(gt, hyp) {
        tally.add_frame(&g, &h, criterion);
    }
    tally.measures()
}

/// Splits two box lists into per-frame slices, over the union of their frames.
pub fn group_by_frame(
    gt: &[OutputBox],
    hyp: &[OutputBox],
) -> Vec<(usize, Vec<OutputBox>, Vec<OutputBox>)> {
    let mut frames: BTreeMap<usize, (Vec<OutputBox>, Vec<OutputBox>)> = BTreeMap::new();
    for b in gt {
        frames.entry(b.frame).or_default().0.push(*b);
    }
    for b in hyp {
        frames.entry(b.frame).or_default().1.push(*b);
    }
    frames.into_iter().map(|(f, (g, h))| (f, g, h)).collect()
}

/// Evaluates complete sequences.
pub fn evaluate(gt: &[OutputBox], hyp: &[OutputBox], cfg: &EvalConfig) -> Result<Metrics> {
    let mut ledger = EvalLedger::new(*cfg);
    for (_, g, h) in group_by_frame(gt, hyp) {
        ledger.add_frame(&g, &h);
    }
    ledger.finish()
}
