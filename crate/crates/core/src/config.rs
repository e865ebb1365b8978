//! Flat `key = value` run configuration shared by every CLI subcommand.
//!
//! Lines are `key = value`; blank lines and lines starting with `#` are skipped.
//! Unknown and repeated keys are errors. Command-line flags are applied on top
//! through the same setter, so both sources share one validation path.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Result, SscfError};
use crate::harness::StrategyConfig;
use crate::synth::{ScenarioName, DEFAULT_DATA_SEED};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioName,
    pub data_seed: u64,
    pub data: Option<PathBuf>,
    pub anchors: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    /// Independent training runs per experiment, seeded `seed, seed+1, ...`.
    pub runs: usize,
    pub threads: Option<usize>,
    pub k_values: Vec<usize>,
    pub ranks: Vec<usize>,
    pub strategy: StrategyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: ScenarioName::PaperLike,
            data_seed: DEFAULT_DATA_SEED,
            data: None,
            anchors: None,
            out: None,
            seed: 0,
            runs: 5,
            threads: None,
            k_values: vec![1, 2, 3, 4],
            ranks: vec![1],
            strategy: StrategyConfig::default(),
        }
    }
}

pub const KEYS: &[&str] = &[
    "scenario",
    "data_seed",
    "data",
    "anchors",
    "out",
    "seed",
    "runs",
    "threads",
    "k_values",
    "ranks",
    "strategy",
    "k",
    "encoder",
    "pooling",
    "optimizer",
    "lr",
    "batch_size",
    "train_epochs",
    "warmup_epochs",
    "kmeans_restarts",
    "frame_len",
    "hop",
    "window",
    "eps",
    "one_sided",
    "match_space",
    "target_space",
    "rank",
    "max_gain",
    "unit_mask",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| SscfError::Validation(format!("{key}: cannot parse '{value}': {e}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    value
        .split(',')
        .map(|v| parse(key, v.trim()))
        .collect::<Result<Vec<usize>>>()
        .and_then(|v| {
            if v.is_empty() {
                Err(SscfError::Validation(format!("{key}: empty list")))
            } else {
                Ok(v)
            }
        })
}

fn join(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let s = &mut self.strategy;
        match key {
            "scenario" => self.scenario = value.parse().map_err(|e: SscfError| SscfError::Validation(format!("scenario: {e}")))?,
            "data_seed" => self.data_seed = parse(key, value)?,
            "data" => self.data = Some(PathBuf::from(value)),
            "anchors" => self.anchors = Some(PathBuf::from(value)),
            "out" => self.out = Some(PathBuf::from(value)),
            "seed" => self.seed = parse(key, value)?,
            "runs" => self.runs = parse(key, value)?,
            "threads" => self.threads = Some(parse(key, value)?),
            "k_values" => self.k_values = parse_list(key, value)?,
            "ranks" => self.ranks = parse_list(key, value)?,
            "strategy" => s.strategy = parse(key, value)?,
            "k" => s.k = parse(key, value)?,
            "encoder" => s.encoder = parse(key, value)?,
            "pooling" => s.pooling = parse(key, value)?,
            "optimizer" => s.optimizer = parse(key, value)?,
            "lr" => s.lr = parse(key, value)?,
            "batch_size" => s.batch_size = parse(key, value)?,
            "train_epochs" => s.train_epochs = parse(key, value)?,
            "warmup_epochs" => s.warmup_epochs = parse(key, value)?,
            "kmeans_restarts" => s.kmeans_restarts = parse(key, value)?,
            "frame_len" => s.spectral.frame_len = parse(key, value)?,
            "hop" => s.spectral.hop = parse(key, value)?,
            "window" => s.spectral.window = parse(key, value)?,
            "eps" => {
                let eps: f64 = parse(key, value)?;
                s.spectral.eps = eps;
                s.calibration.eps = eps;
            }
            "one_sided" => s.spectral.one_sided = parse(key, value)?,
            "match_space" => s.calibration.match_space = parse(key, value)?,
            "target_space" => s.calibration.target_space = parse(key, value)?,
            "rank" => s.calibration.rank = parse(key, value)?,
            "max_gain" => {
                s.calibration.max_gain = if value == "none" { None } else { Some(parse(key, value)?) }
            }
            "unit_mask" => s.calibration.unit_mask = parse(key, value)?,
            other => return Err(SscfError::Validation(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    pub fn parse_text(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| SscfError::Validation(format!("line {}: expected key = value", i + 1)))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(SscfError::Validation(format!("line {}: key '{key}' repeated", i + 1)));
            }
            cfg.set(key, value)
                .map_err(|e| SscfError::Validation(format!("line {}: {e}", i + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| SscfError::io(path, e))?;
        RunConfig::parse_text(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.strategy.validate()?;
        if self.runs == 0 {
            return Err(SscfError::Validation("runs must be >= 1".into()));
        }
        if self.threads == Some(0) {
            return Err(SscfError::Validation("threads must be >= 1".into()));
        }
        if self.k_values.contains(&0) {
            return Err(SscfError::Validation("k_values must be >= 1".into()));
        }
        if self.ranks.contains(&0) {
            return Err(SscfError::Validation("ranks must be >= 1".into()));
        }
        Ok(())
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.runs as u64).map(|r| self.seed.wrapping_add(r)).collect()
    }

    /// Canonical text form; parsing it back yields an equal config.
    pub fn to_text(&self) -> String {
        let s = &self.strategy;
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("scenario", self.scenario.to_string());
        put("data_seed", self.data_seed.to_string());
        if let Some(p) = &self.data {
            put("data", p.display().to_string());
        }
        if let Some(p) = &self.anchors {
            put("anchors", p.display().to_string());
        }
        if let Some(p) = &self.out {
            put("out", p.display().to_string());
        }
        put("seed", self.seed.to_string());
        put("runs", self.runs.to_string());
        if let Some(t) = self.threads {
            put("threads", t.to_string());
        }
        put("k_values", join(&self.k_values));
        put("ranks", join(&self.ranks));
        put("strategy", s.strategy.to_string());
        put("k", s.k.to_string());
        put("encoder", s.encoder.to_string());
        put("pooling", s.pooling.to_string());
        put("optimizer", s.optimizer.to_string());
        put("lr", format!("{:?}", s.lr));
        put("batch_size", s.batch_size.to_string());
        put("train_epochs", s.train_epochs.to_string());
        put("warmup_epochs", s.warmup_epochs.to_string());
        put("kmeans_restarts", s.kmeans_restarts.to_string());
        put("frame_len", s.spectral.frame_len.to_string());
        put("hop", s.spectral.hop.to_string());
        put("window", s.spectral.window.to_string());
        put("eps", format!("{:?}", s.spectral.eps));
        put("one_sided", s.spectral.one_sided.to_string());
        put("match_space", s.calibration.match_space.to_string());
        put("target_space", s.calibration.target_space.to_string());
        put("rank", s.calibration.rank.to_string());
        put(
            "max_gain",
            s.calibration.max_gain.map_or("none".to_string(), |g| format!("{g:?}")),
        );
        put("unit_mask", s.calibration.unit_mask.to_string());
        out
    }
}
