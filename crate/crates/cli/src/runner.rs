//! Subcommand bodies shared by the binary and the acceptance suite.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use reidtrack::pipeline::{run_with, BeliefObserver, FrameSource};
use reidtrack::{generate_scenario, Calibration, Metrics, RunOutput, Scenario, TrackState};
use serde_json::Value;

use crate::config::RunConfig;
use crate::io::{write_boxes_csv, write_metrics_json, write_pgm, PgmFormat};
use crate::source::{read_scenario, FileSource};

pub const HYPOTHESES_FILE: &str = "hypotheses.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const CALIBRATION_FILE: &str = "calibration.json";
pub const FRAMES_DIR: &str = "frames";

/// The scenario named by `scenario_path`, or one generated from `scenario`.
pub fn load_scenario(cfg: &RunConfig) -> Result<Scenario> {
    match &cfg.scenario_path {
        Some(p) => read_scenario(p),
        None => Ok(generate_scenario(&cfg.scenario)?),
    }
}

/// Writes one PGM per live track and frame.
pub struct BeliefDumper {
    pub dir: PathBuf,
    pub format: PgmFormat,
    pub written: usize,
}

impl BeliefDumper {
    pub fn new(dir: PathBuf) -> Result<Self> {
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir,
            format: PgmFormat::Binary,
            written: 0,
        })
    }

    pub fn file_name(frame: usize, id: u64) -> String {
        format!("belief_f{frame:05}_id{id:03}.pgm")
    }
}

impl BeliefObserver for BeliefDumper {
    fn observe(&mut self, frame: usize, tracks: &[TrackState]) -> reidtrack::Result<()> {
        for t in tracks {
            let path = self.dir.join(Self::file_name(frame, t.id));
            let write = || -> Result<()> {
                let mut w = BufWriter::new(File::create(&path)?);
                write_pgm(&mut w, &t.position_belief, self.format)?;
                w.flush()?;
                Ok(())
            };
            write().map_err(|e| reidtrack::Error::Source(format!("{}: {e:#}", path.display())))?;
            self.written += 1;
        }
        Ok(())
    }
}

/// Runs `cfg.tracker` on a frame source. Calibration comes from the
/// scenario's generator settings.
pub fn track_source(
    cfg: &RunConfig,
    scenario: &Scenario,
    source: &dyn FrameSource,
    dump: Option<&mut BeliefDumper>,
) -> Result<RunOutput> {
    let calibration = cfg.pipeline.resolve(&scenario.config)?;
    let mut none = ();
    let observer: &mut dyn BeliefObserver = match dump {
        Some(d) => d,
        None => &mut none,
    };
    Ok(run_with(
        source,
        cfg.tracker,
        &cfg.pipeline,
        &calibration,
        observer,
    )?)
}

/// Loads or generates the scenario, preferring materialized frames on disk.
pub fn track(cfg: &RunConfig) -> Result<RunOutput> {
    let mut dumper = if cfg.dump_frames {
        Some(BeliefDumper::new(cfg.out.join(FRAMES_DIR))?)
    } else {
        None
    };
    match &cfg.scenario_path {
        Some(p) if FileSource::is_materialized(p) => {
            let src = FileSource::open(p)?;
            track_source(cfg, &src.scenario, &src, dumper.as_mut())
        }
        _ => {
            let scenario = load_scenario(cfg)?;
            track_source(cfg, &scenario, &scenario, dumper.as_mut())
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

pub fn write_calibration<W: Write>(mut w: W, c: &Calibration) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, c)?;
    writeln!(w)?;
    Ok(())
}

/// `hypotheses.csv`, `metrics.json` and `calibration.json` under `dir`.
pub fn write_run(dir: &Path, out: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut h = create(&dir.join(HYPOTHESES_FILE))?;
    write_boxes_csv(&mut h, &out.hypotheses)?;
    h.flush()?;
    let mut m = create(&dir.join(METRICS_FILE))?;
    write_metrics_json(&mut m, &out.metrics)?;
    m.flush()?;
    let mut c = create(&dir.join(CALIBRATION_FILE))?;
    write_calibration(&mut c, &out.calibration)?;
    c.flush()?;
    Ok(())
}

/// Applies `f` to every item on up to `available_parallelism` threads and
/// returns results in input order.
pub fn parallel_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let threads = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(items.len().max(1));
    if threads <= 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| s.spawn(|| c.iter().map(&f).collect::<Vec<R>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker thread panicked"))
            .collect()
    })
}

/// Metrics of `cfg.tracker` on `seeds` consecutive generated scenarios.
pub fn run_seeds(cfg: &RunConfig, seeds: &[u64]) -> Result<Vec<Metrics>> {
    parallel_map(seeds, |&seed| {
        let mut c = cfg.clone();
        c.scenario.seed = seed;
        c.scenario_path = None;
        let scenario = generate_scenario(&c.scenario)?;
        Ok(track_source(&c, &scenario, &scenario, None)?.metrics)
    })
    .into_iter()
    .collect()
}

/// Seeds `cfg.scenario.seed .. + cfg.seeds`.
pub fn seed_range(cfg: &RunConfig) -> Vec<u64> {
    (0..cfg.seeds.max(1) as u64)
        .map(|i| cfg.scenario.seed + i)
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub value: Value,
    pub mota: f64,
    pub motp: f64,
    pub runs: Vec<Metrics>,
}

/// Seed-averaged MOTA and MOTP for each value of `key`.
pub fn sweep(cfg: &RunConfig, key: &str, values: &[Value]) -> Result<Vec<SweepRow>> {
    let seeds = seed_range(cfg);
    let jobs: Vec<(usize, u64)> = (0..values.len())
        .flat_map(|v| seeds.iter().map(move |&s| (v, s)))
        .collect();
    let configs: Vec<RunConfig> = values
        .iter()
        .map(|v| cfg.with(key, v.clone()))
        .collect::<Result<_>>()?;
    let results = parallel_map(&jobs, |&(v, seed)| run_seeds(&configs[v], &[seed]));
    let mut rows: Vec<SweepRow> = values
        .iter()
        .map(|v| SweepRow {
            value: v.clone(),
            mota: 0.0,
            motp: 0.0,
            runs: Vec::new(),
        })
        .collect();
    for ((v, _), r) in jobs.iter().zip(results) {
        rows[*v].runs.extend(r?);
    }
    for row in &mut rows {
        let n = row.runs.len() as f64;
        row.mota = row.runs.iter().map(|m| m.mota).sum::<f64>() / n;
        row.motp = row.runs.iter().map(|m| m.motp).sum::<f64>() / n;
    }
    Ok(rows)
}

/// Header is the last segment of `key`, then `MOTA,MOTP`.
pub fn write_sweep_csv<W: Write>(w: W, key: &str, rows: &[SweepRow]) -> Result<()> {
    let column = key.rsplit('.').next().unwrap_or(key);
    let mut out = csv::Writer::from_writer(w);
    out.write_record([column, "MOTA", "MOTP"])?;
    for r in rows {
        let v = match &r.value {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        out.write_record([v, r.mota.to_string(), r.motp.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Softmin likelihood of each present identity at `frame`, as PGMs in `dir`.
pub fn render_likelihoods(
    scenario: &Scenario,
    frame: usize,
    temperature: f64,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let obs = scenario.render_frame(frame)?;
    let mut written = Vec::new();
    for ident in &scenario.identities {
        if !ident.trajectory[frame].present {
            continue;
        }
        let lik = obs
            .embedding_map
            .distance_map(&ident.embedding)?
            .softmin(temperature)?;
        let path = dir.join(format!("likelihood_f{frame:05}_id{:03}.pgm", ident.id));
        let mut w = create(&path)?;
        write_pgm(&mut w, &lik, PgmFormat::Binary)?;
        w.flush()?;
        written.push(path);
    }
    Ok(written)
}
