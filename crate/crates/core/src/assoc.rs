//! Detection-driven baselines: optimal assignment, combined position and
//! appearance distance, and nearest-neighbor Kalman track management.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridGeometry;
use crate::kalman::{KFState, KalmanConfig};
use crate::measurement::EmbeddingVector;

/// A scored center-point detection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub frame: usize,
    pub center: [f64; 2],
    pub score: f64,
    pub embedding: Option<EmbeddingVector>,
}

/// Dense row-major cost matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "cost matrix shape mismatch");
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn total(&self, assignment: &[(usize, usize)]) -> f64 {
        assignment.iter().map(|&(r, c)| self.get(r, c)).sum()
    }
}

/// Minimum-cost maximum matching of a rectangular cost matrix.
///
/// Returns `min(rows, cols)` pairs sorted by row. Among all optimal
/// assignments the lexicographically smallest one is returned, so equal
/// inputs always give equal outputs. Costs must be finite.
pub fn hungarian(cost: &CostMatrix) -> Vec<(usize, usize)> {
    let (rows, cols) = (cost.rows, cost.cols);
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    debug_assert!(cost.data.iter().all(|c| c.is_finite()));
    let n = rows.max(cols);
    // Square padding with a constant does not change which real pairs are optimal.
    let a = |i: usize, j: usize| {
        if i < rows && j < cols {
            cost.get(i, j)
        } else {
            0.0
        }
    };

    // Shortest augmenting path with potentials; index 0 is a virtual column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = a(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        row_to_col[owner[j] - 1] = j - 1;
    }

    // Every optimal assignment uses only edges with zero reduced cost.
    let scale = cost.data.iter().fold(1.0f64, |m, c| m.max(c.abs()));
    let eps = 1e-9 * scale;
    let mut tight = vec![false; n * n];
    for i in 0..n {
        for j in 0..n {
            tight[i * n + j] = (a(i, j) - u[i + 1] - v[j + 1]).abs() <= eps;
        }
    }
    for i in 0..n {
        tight[i * n + row_to_col[i]] = true;
    }
    lexicographic_refine(&tight, n, &mut row_to_col);

    row_to_col
        .iter()
        .enumerate()
        .filter(|&(r, &c)| r < rows && c < cols)
        .map(|(r, &c)| (r, c))
        .collect()
}

/// Rewrites a perfect matching on the `tight` graph into the
/// lexicographically smallest perfect matching of the same graph.
fn lexicographic_refine(tight: &[bool], n: usize, row_to_col: &mut [usize]) {
    let mut col_to_row = vec![0usize; n];
    for (r, &c) in row_to_col.iter().enumerate() {
        col_to_row[c] = r;
    }
    let mut col_fixed = vec![false; n];
    let mut prev_row = vec![usize::MAX; n];
    let mut queue = Vec::with_capacity(n);
    for i in 0..n {
        let target = row_to_col[i];
        for j in 0..target {
            if col_fixed[j] || !tight[i * n + j] {
                continue;
            }
            // Give column j to row i; its owner must reach `target` along an
            // alternating path that avoids fixed columns and column j.
            let start = col_to_row[j];
            prev_row.iter_mut().for_each(|p| *p = usize::MAX);
            queue.clear();
            queue.push(start);
            let mut head = 0;
            let mut found = false;
            'bfs: while head < queue.len() {
                let r = queue[head];
                head += 1;
                for c in 0..n {
                    if col_fixed[c] || c == j || prev_row[c] != usize::MAX || !tight[r * n + c] {
                        continue;
                    }
                    prev_row[c] = r;
                    if c == target {
                        found = true;
                        break 'bfs;
                    }
                    queue.push(col_to_row[c]);
                }
            }
            if !found {
                continue;
            }
            let mut c = target;
            loop {
                let r = prev_row[c];
                let old = row_to_col[r];
                row_to_col[r] = c;
                col_to_row[c] = r;
                if r == start {
                    break;
                }
                c = old;
            }
            row_to_col[i] = j;
            col_to_row[j] = i;
            break;
        }
        col_fixed[row_to_col[i]] = true;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMode {
    /// Position only.
    Pos,
    /// Appearance only.
    App,
    /// Product of the normalized position and appearance distances.
    Combined,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssociationConfig {
    pub mode: DistanceMode,
    /// Position distance scale, px.
    pub n_pos: f64,
    /// Appearance distance scale.
    pub n_app: f64,
    /// Matches costing more than this are rejected.
    pub gate: f64,
}

impl Default for AssociationConfig {
    fn default() -> Self {
        Self {
            mode: DistanceMode::Pos,
            n_pos: 40.0,
            n_app: 1.0,
            gate: 2.0,
        }
    }
}

impl AssociationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.n_pos > 0.0 && self.n_app > 0.0 && self.gate > 0.0) {
            return Err(Error::ConfigInvalid(
                "n_pos, n_app and gate must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Cost assigned to pairs that can never match.
    pub fn sentinel(&self) -> f64 {
        10.0 * self.gate
    }
}

/// Distance between a track and a detection on the common normalized scale.
pub fn combined_distance(d_pos: f64, d_app: f64, cfg: &AssociationConfig) -> f64 {
    match cfg.mode {
        DistanceMode::Pos => d_pos / cfg.n_pos,
        DistanceMode::App => d_app / cfg.n_app,
        DistanceMode::Combined => (d_pos / cfg.n_pos) * (d_app / cfg.n_app),
    }
}

/// What association needs to know about a track.
#[derive(Clone, Copy, Debug)]
pub struct TrackView<'a> {
    pub position: [f64; 2],
    pub embedding: Option<&'a EmbeddingVector>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Association {
    /// `(track index, detection index, cost)`.
    pub matches: Vec<(usize, usize, f64)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

fn pair_cost(track: &TrackView<'_>, det: &Detection, cfg: &AssociationConfig) -> f64 {
    let dx = track.position[0] - det.center[0];
    let dy = track.position[1] - det.center[1];
    let d_pos = crate::math::sqrt(dx * dx + dy * dy);
    let d_app = match cfg.mode {
        DistanceMode::Pos => 0.0,
        _ => match (track.embedding, det.embedding.as_ref()) {
            (Some(a), Some(b)) => match a.distance(b) {
                Ok(d) => d,
                Err(_) => return cfg.sentinel(),
            },
            _ => return cfg.sentinel(),
        },
    };
    let c = combined_distance(d_pos, d_app, cfg);
    if c.is_finite() {
        c.min(cfg.sentinel())
    } else {
        cfg.sentinel()
    }
}

/// Optimal one-to-one assignment of detections to tracks, gated by `cfg.gate`.
pub fn associate(
    tracks: &[TrackView<'_>],
    detections: &[&Detection],
    cfg: &AssociationConfig,
) -> Association {
    let cost = CostMatrix::from_fn(tracks.len(), detections.len(), |t, d| {
        pair_cost(&tracks[t], detections[d], cfg)
    });
    let mut track_used = vec![false; tracks.len()];
    let mut det_used = vec![false; detections.len()];
    let mut matches = Vec::new();
    for (t, d) in hungarian(&cost) {
        let c = cost.get(t, d);
        if c <= cfg.gate {
            track_used[t] = true;
            det_used[d] = true;
            matches.push((t, d, c));
        }
    }
    Association {
        matches,
        unmatched_tracks: (0..tracks.len()).filter(|&t| !track_used[t]).collect(),
        unmatched_detections: (0..detections.len()).filter(|&d| !det_used[d]).collect(),
    }
}

/// Track creation and deletion rules of the nearest-neighbor tracker.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackManagementConfig {
    /// Minimum score for a detection to start a track.
    pub sigma_init: f64,
    /// Consecutive chained detections needed before a track is confirmed.
    pub d_init: usize,
    /// Minimum score for a detection to update a track.
    pub sigma_cont: f64,
    /// Frames a track may go unmatched before deletion.
    pub d_miss: usize,
    /// Start tracks only from supplied ground-truth first boxes.
    pub gt_init: bool,
}

impl Default for TrackManagementConfig {
    fn default() -> Self {
        Self::detector_init()
    }
}

impl TrackManagementConfig {
    /// Settings for tracks started from detections.
    pub fn detector_init() -> Self {
        Self {
            sigma_init: 0.3,
            d_init: 3,
            sigma_cont: 0.0,
            d_miss: 5,
            gt_init: false,
        }
    }

    /// Settings for tracks started from ground truth and kept as long as possible.
    pub fn ground_truth_init() -> Self {
        Self {
            sigma_init: 0.3,
            d_init: 1,
            sigma_cont: -0.3,
            d_miss: 90,
            gt_init: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma_cont > self.sigma_init {
            return Err(Error::ConfigInvalid(
                "sigma_cont must not exceed sigma_init".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KfTrack {
    pub id: u64,
    pub state: KFState,
    pub misses: usize,
    pub embedding: Option<EmbeddingVector>,
}

#[derive(Clone, Debug, PartialEq)]
struct Chain {
    center: [f64; 2],
    length: usize,
    embedding: Option<EmbeddingVector>,
}

/// A track to start at a ground-truth first box.
#[derive(Clone, Debug, PartialEq)]
pub struct Birth {
    pub center: [f64; 2],
    pub embedding: Option<EmbeddingVector>,
}

/// Nearest-neighbor Kalman tracker state for one camera.
#[derive(Clone, Debug)]
pub struct TrackerWorld {
    pub kalman: KalmanConfig,
    /// Tracks whose predicted center leaves this area are deleted.
    pub bounds: Option<GridGeometry>,
    tracks: Vec<KfTrack>,
    chains: Vec<Chain>,
    next_id: u64,
}

impl TrackerWorld {
    pub fn new(kalman: KalmanConfig, bounds: Option<GridGeometry>) -> Self {
        Self {
            kalman,
            bounds,
            tracks: Vec::new(),
            chains: Vec::new(),
            next_id: 1,
        }
    }

    pub fn tracks(&self) -> &[KfTrack] {
        &self.tracks
    }

    pub fn tentative_count(&self) -> usize {
        self.chains.len()
    }

    fn spawn(&mut self, center: [f64; 2], embedding: Option<EmbeddingVector>) {
        let id = self.next_id;
        self.next_id += 1;
        self.tracks.push(KfTrack {
            id,
            state: KFState::at(center, &self.kalman),
            misses: 0,
            embedding,
        });
    }

    /// Advances the world by one frame. `births` is only used with `gt_init`.
    pub fn step(
        &mut self,
        detections: &[Detection],
        births: &[Birth],
        tm: &TrackManagementConfig,
        ac: &AssociationConfig,
    ) {
        let q = self.kalman.q();
        let r = self.kalman.r();
        for t in &mut self.tracks {
            t.state = t.state.predict(&q);
        }
        if let Some(bounds) = self.bounds {
            self.tracks.retain(|t| bounds.contains(t.state.position()));
        }
        if tm.gt_init {
            for b in births {
                self.spawn(b.center, b.embedding.clone());
            }
        }

        let candidates: Vec<&Detection> = detections
            .iter()
            .filter(|d| d.score >= tm.sigma_cont)
            .collect();
        let views: Vec<TrackView<'_>> = self
            .tracks
            .iter()
            .map(|t| TrackView {
                position: t.state.position(),
                embedding: t.embedding.as_ref(),
            })
            .collect();
        let assoc = associate(&views, &candidates, ac);
        for &(ti, di, _) in &assoc.matches {
            let t = &mut self.tracks[ti];
            t.state = t.state.update(candidates[di].center, &r);
            t.misses = 0;
        }
        for &ti in &assoc.unmatched_tracks {
            self.tracks[ti].misses += 1;
        }
        self.tracks.retain(|t| t.misses <= tm.d_miss);

        if tm.gt_init {
            return;
        }
        let fresh: Vec<&Detection> = assoc
            .unmatched_detections
            .iter()
            .map(|&d| candidates[d])
            .filter(|d| d.score >= tm.sigma_init)
            .collect();
        self.extend_chains(&fresh, tm, ac);
    }

    fn extend_chains(
        &mut self,
        fresh: &[&Detection],
        tm: &TrackManagementConfig,
        ac: &AssociationConfig,
    ) {
        let chain_cfg = AssociationConfig {
            mode: DistanceMode::Pos,
            ..*ac
        };
        let views: Vec<TrackView<'_>> = self
            .chains
            .iter()
            .map(|c| TrackView {
                position: c.center,
                embedding: None,
            })
            .collect();
        let assoc = associate(&views, fresh, &chain_cfg);
        let mut next = Vec::new();
        for &(ci, di, _) in &assoc.matches {
            let mut chain = self.chains[ci].clone();
            chain.center = fresh[di].center;
            chain.length += 1;
            next.push(chain);
        }
        for &di in &assoc.unmatched_detections {
            next.push(Chain {
                center: fresh[di].center,
                length: 1,
                embedding: fresh[di].embedding.clone(),
            });
        }
        let mut pending = Vec::new();
        for chain in next {
            if chain.length >= tm.d_init.max(1) {
                self.spawn(chain.center, chain.embedding);
            } else {
                pending.push(chain);
            }
        }
        self.chains = pending;
    }
}
