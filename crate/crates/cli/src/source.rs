//! Scenario directories written by `generate` and read back by `track`.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::{Context, Result};
use reidtrack::pipeline::FrameSource;
use reidtrack::simworld::GtBox;
use reidtrack::{Detection, FrameObservation, GridGeometry, Scenario};

use crate::io::{
    read_boxes_csv, read_detections_jsonl, write_boxes_csv, write_detections_jsonl,
    write_sidecar_frame, SidecarHeader, SidecarReader,
};

pub const SCENARIO_FILE: &str = "scenario.json";
pub const GT_FILE: &str = "gt.csv";
pub const DETECTIONS_FILE: &str = "detections.jsonl";
pub const EMBEDDINGS_FILE: &str = "embeddings.f32";

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("opening {}", path.display()))
}

/// Writes `scenario.json` and `gt.csv`; with `materialize` also every
/// frame's embedding map and detections.
pub fn write_scenario_dir(dir: &Path, scenario: &Scenario, materialize: bool) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    serde_json::to_writer_pretty(create(&dir.join(SCENARIO_FILE))?, scenario)?;
    write_boxes_csv(create(&dir.join(GT_FILE))?, &scenario.all_gt_boxes())?;
    if !materialize {
        return Ok(());
    }
    let g = scenario.geometry();
    let mut emb = create(&dir.join(EMBEDDINGS_FILE))?;
    SidecarHeader {
        frames: scenario.frames() as u32,
        height: g.height as u32,
        width: g.width as u32,
        dim: scenario.config.embedding_dim as u32,
    }
    .write(&mut emb)?;
    let mut det = create(&dir.join(DETECTIONS_FILE))?;
    for t in 0..scenario.frames() {
        let obs = scenario.render_frame(t)?;
        write_sidecar_frame(&mut emb, &obs.embedding_map)?;
        write_detections_jsonl(&mut det, &obs.detections)?;
    }
    Ok(())
}

pub fn read_scenario(path: &Path) -> Result<Scenario> {
    let file = if path.is_dir() {
        path.join(SCENARIO_FILE)
    } else {
        path.to_path_buf()
    };
    serde_json::from_reader(BufReader::new(open(&file)?))
        .with_context(|| format!("parsing {}", file.display()))
}

/// Frames read from a materialized scenario directory. Embedding maps are
/// read from disk on demand.
#[derive(Debug)]
pub struct FileSource {
    pub scenario: Scenario,
    geometry: GridGeometry,
    gt: Vec<Vec<GtBox>>,
    detections: Vec<Vec<Detection>>,
    embeddings: Mutex<SidecarReader<BufReader<File>>>,
    pub dir: PathBuf,
}

impl FileSource {
    pub fn is_materialized(dir: &Path) -> bool {
        dir.is_dir() && dir.join(EMBEDDINGS_FILE).is_file()
    }

    pub fn open(dir: &Path) -> Result<Self> {
        let scenario = read_scenario(dir)?;
        let geometry = scenario.geometry();
        let frames = scenario.frames();

        let mut gt = vec![Vec::new(); frames];
        for b in read_boxes_csv(open(&dir.join(GT_FILE))?)? {
            let slot = gt
                .get_mut(b.frame)
                .context("gt.csv frame beyond scenario length")?;
            slot.push(GtBox {
                id: b.track_id,
                center: b.center,
                height: b.height,
            });
        }
        let mut detections = vec![Vec::new(); frames];
        let reader = BufReader::new(open(&dir.join(DETECTIONS_FILE))?);
        for d in read_detections_jsonl(reader)? {
            detections
                .get_mut(d.frame)
                .context("detection frame beyond scenario length")?
                .push(d);
        }
        let embeddings = SidecarReader::new(BufReader::new(open(&dir.join(EMBEDDINGS_FILE))?))?;
        anyhow::ensure!(
            embeddings.header.frames as usize == frames,
            "embedding sidecar has {} frames, scenario has {frames}",
            embeddings.header.frames
        );
        Ok(Self {
            scenario,
            geometry,
            gt,
            detections,
            embeddings: Mutex::new(embeddings),
            dir: dir.to_path_buf(),
        })
    }
}

impl FrameSource for FileSource {
    fn frame_count(&self) -> usize {
        self.gt.len()
    }

    fn geometry(&self) -> GridGeometry {
        self.geometry
    }

    fn frame(&self, t: usize) -> reidtrack::Result<FrameObservation> {
        if t >= self.gt.len() {
            return Err(reidtrack::Error::FrameOutOfRange {
                frame: t,
                frames: self.gt.len(),
            });
        }
        let map = self
            .embeddings
            .lock()
            .expect("sidecar lock poisoned")
            .frame(t, self.geometry)
            .map_err(|e| reidtrack::Error::Source(format!("{e:#}")))?;
        Ok(FrameObservation {
            frame: t,
            embedding_map: map,
            detections: self.detections[t].clone(),
            gt_boxes: self.gt[t].clone(),
        })
    }
}
