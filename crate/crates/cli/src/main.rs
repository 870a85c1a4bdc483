use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use reidtrack::metrics::evaluate;
use reidtrack::TrackerVariant;
use reidtrack_cli::config::{parse_assignment, parse_sweep, RunConfig};
use reidtrack_cli::io::{read_boxes_csv, write_metrics_json};
use reidtrack_cli::runner::{self, load_scenario};
use reidtrack_cli::source::write_scenario_dir;

#[derive(Parser)]
#[command(
    name = "reidtrack",
    version,
    about = "Histogram-filter tracking on re-identification embedding maps"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Extra `key=value` overrides, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_parser = parse_tracker)]
    tracker: Option<TrackerVariant>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario directory.
    Generate {
        /// Also write every frame's embedding map and detections.
        #[arg(long)]
        materialize: bool,
    },
    /// Run one tracker and write hypotheses, metrics and calibration.
    Track {
        /// `scenario.json` or a directory written by `generate`.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Write per-frame belief images for the integrated trackers.
        #[arg(long)]
        dump_frames: bool,
    },
    /// Evaluate a hypothesis CSV against a ground-truth CSV.
    Eval {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        hyp: PathBuf,
    },
    /// Seed-averaged MOTA/MOTP over the values of one parameter.
    Sweep {
        #[arg(long, value_name = "KEY=V1,V2,...")]
        sweep: String,
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Write per-identity likelihood images for selected frames.
    Render {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        frames: Vec<usize>,
    },
    /// Print the resolved config as JSON.
    Config,
}

fn parse_tracker(s: &str) -> Result<TrackerVariant, String> {
    TrackerVariant::from_name(s).ok_or_else(|| {
        let names: Vec<_> = TrackerVariant::ALL.iter().map(|v| v.name()).collect();
        format!(
            "unknown tracker {s:?}; expected one of {}",
            names.join(", ")
        )
    })
}

fn resolve(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let sets = common
        .set
        .iter()
        .map(|s| parse_assignment(s))
        .collect::<Result<Vec<_>>>()?;
    cfg = cfg.apply(&sets)?;
    if let Some(seed) = common.seed {
        cfg.scenario.seed = seed;
    }
    if let Some(t) = common.tracker {
        cfg.tracker = t;
    }
    if let Some(o) = &common.out {
        cfg.out = o.clone();
    }
    Ok(cfg)
}

fn create(path: &std::path::Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn execute(command: Command, mut cfg: RunConfig) -> Result<()> {
    match command {
        Command::Generate { materialize } => {
            let scenario = load_scenario(&cfg)?;
            write_scenario_dir(&cfg.out, &scenario, materialize)?;
            eprintln!(
                "wrote scenario with {} frames to {}",
                scenario.frames(),
                cfg.out.display()
            );
        }
        Command::Track {
            scenario,
            dump_frames,
        } => {
            if scenario.is_some() {
                cfg.scenario_path = scenario;
            }
            cfg.dump_frames |= dump_frames;
            let out = runner::track(&cfg)?;
            runner::write_run(&cfg.out, &out)?;
            let m = &out.metrics;
            println!(
                "{}: MOTA {:.4} MOTP {:.4} IDF1 {:.4} FP {} FN {} IDS {}",
                out.variant, m.mota, m.motp, m.idf1, m.fp, m.fn_, m.ids
            );
        }
        Command::Eval { gt, hyp } => {
            let g = read_boxes_csv(
                File::open(&gt).with_context(|| format!("opening {}", gt.display()))?,
            )?;
            let h = read_boxes_csv(
                File::open(&hyp).with_context(|| format!("opening {}", hyp.display()))?,
            )?;
            let m = evaluate(&g, &h, &cfg.pipeline.eval)?;
            let path = if cfg.out.extension().is_some() {
                cfg.out.clone()
            } else {
                cfg.out.join(runner::METRICS_FILE)
            };
            let mut w = create(&path)?;
            write_metrics_json(&mut w, &m)?;
            w.flush()?;
            println!(
                "MOTA {:.4} MOTP {:.4} IDF1 {:.4} IDS {}",
                m.mota, m.motp, m.idf1, m.ids
            );
        }
        Command::Sweep { sweep, seeds } => {
            if let Some(n) = seeds {
                cfg.seeds = n;
            }
            let (key, values) = parse_sweep(&sweep)?;
            let rows = runner::sweep(&cfg, &key, &values)?;
            let path = if cfg.out.extension().is_some() {
                cfg.out.clone()
            } else {
                cfg.out.join("sweep.csv")
            };
            let mut w = create(&path)?;
            runner::write_sweep_csv(&mut w, &key, &rows)?;
            w.flush()?;
            runner::write_sweep_csv(std::io::stdout().lock(), &key, &rows)?;
        }
        Command::Render { scenario, frames } => {
            if scenario.is_some() {
                cfg.scenario_path = scenario;
            }
            let s = load_scenario(&cfg)?;
            let mut n = 0;
            for f in frames {
                n += runner::render_likelihoods(
                    &s,
                    f,
                    cfg.pipeline.histfilter.temperature,
                    &cfg.out,
                )?
                .len();
            }
            eprintln!("wrote {n} images to {}", cfg.out.display());
        }
        Command::Config => {
            println!("{}", serde_json::to_string_pretty(&cfg)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match resolve(&cli.common).and_then(|cfg| execute(cli.command, cfg)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
