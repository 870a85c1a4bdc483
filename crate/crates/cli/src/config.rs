//! Plain-text `key = value` experiment configs with dotted keys.
//!
//! ```text
//! # hard regime, entropy-gated tracker
//! preset = hard
//! tracker = integrated_entropy
//! scenario.seed = 7
//! pipeline.histfilter.temperature = 0.1
//! scale = 1.1
//! ```
//!
//! Values are parsed as JSON when possible and taken as strings otherwise.
//! A key that is not found at the top level is looked up under `pipeline.`
//! and then `scenario.`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use reidtrack::{PipelineConfig, ScenarioConfig, TrackerVariant};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    #[default]
    Easy,
    Hard,
}

impl Preset {
    pub fn scenario(self, seed: u64) -> ScenarioConfig {
        match self {
            Preset::Easy => ScenarioConfig::easy(seed),
            Preset::Hard => ScenarioConfig::hard(seed),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub tracker: TrackerVariant,
    pub scenario: ScenarioConfig,
    /// A `scenario.json` or a directory written by `generate`.
    pub scenario_path: Option<PathBuf>,
    pub pipeline: PipelineConfig,
    /// Number of consecutive seeds, starting at `scenario.seed`, for sweeps.
    pub seeds: usize,
    pub out: PathBuf,
    pub dump_frames: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tracker: TrackerVariant::Integrated,
            scenario: ScenarioConfig::default(),
            scenario_path: None,
            pipeline: PipelineConfig::default(),
            seeds: 1,
            out: PathBuf::from("out"),
            dump_frames: false,
        }
    }
}

/// A parsed `key = value` pair.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    pub key: String,
    pub value: Value,
}

pub fn parse_value(raw: &str) -> Value {
    let raw = raw.trim();
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

pub fn parse_assignment(line: &str) -> Result<Assignment> {
    let Some((k, v)) = line.split_once('=') else {
        bail!("expected key=value, found {line:?}");
    };
    let key = k.trim();
    if key.is_empty() {
        bail!("empty key in {line:?}");
    }
    Ok(Assignment {
        key: key.to_string(),
        value: parse_value(v),
    })
}

pub fn parse_text(text: &str) -> Result<Vec<Assignment>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split_once('#').map_or(line, |(a, _)| a).trim();
        if line.is_empty() {
            continue;
        }
        out.push(parse_assignment(line).with_context(|| format!("config line {}", i + 1))?);
    }
    Ok(out)
}

fn lookup<'a>(root: &'a mut Value, path: &str) -> Option<&'a mut Value> {
    let mut cur = root;
    for part in path.split('.') {
        cur = cur.as_object_mut()?.get_mut(part)?;
    }
    Some(cur)
}

/// Full dotted path for `key`, trying the `pipeline.` and `scenario.` scopes.
pub fn resolve_key(root: &Value, key: &str) -> Result<String> {
    let mut probe = root.clone();
    for candidate in [
        key.to_string(),
        format!("pipeline.{key}"),
        format!("scenario.{key}"),
    ] {
        if lookup(&mut probe, &candidate).is_some() {
            return Ok(candidate);
        }
    }
    bail!("unknown config key {key:?}")
}

fn set(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let path = resolve_key(root, key)?;
    *lookup(root, &path).expect("resolved key exists") = value;
    Ok(())
}

impl RunConfig {
    /// Applies assignments in order. `preset` resets the scenario first and
    /// keeps its seed.
    pub fn apply(&self, assignments: &[Assignment]) -> Result<Self> {
        let mut base = self.clone();
        for a in assignments.iter().filter(|a| a.key == "preset") {
            let preset: Preset = serde_json::from_value(a.value.clone()).context("preset")?;
            base.scenario = preset.scenario(base.scenario.seed);
        }
        let mut root = serde_json::to_value(&base)?;
        for a in assignments.iter().filter(|a| a.key != "preset") {
            set(&mut root, &a.key, a.value.clone())?;
        }
        let cfg: RunConfig =
            serde_json::from_value(root).context("config value has the wrong type")?;
        cfg.scenario.validate()?;
        Ok(cfg)
    }

    pub fn with(&self, key: &str, value: Value) -> Result<Self> {
        self.apply(&[Assignment {
            key: key.to_string(),
            value,
        }])
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        RunConfig::default().apply(&parse_text(&text)?)
    }
}

/// `key=v1,v2,...` from `--sweep`.
pub fn parse_sweep(spec: &str) -> Result<(String, Vec<Value>)> {
    let Some((k, vs)) = spec.split_once('=') else {
        bail!("sweep must look like key=v1,v2,...");
    };
    let values: Vec<Value> = vs
        .split(',')
        .filter(|v| !v.trim().is_empty())
        .map(parse_value)
        .collect();
    if values.is_empty() {
        bail!("sweep {k:?} has no values");
    }
    Ok((k.trim().to_string(), values))
}
