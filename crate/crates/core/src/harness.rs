//! Two-stage training, leave-one-domain-out evaluation, metrics and sweeps.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anchors::{build_anchor_set, AnchorSet};
use crate::calibrate::{calibrate, CalibrationConfig};
use crate::container::write_atomic;
use crate::error::{Result, SscfError};
use crate::matrix::Matrix;
use crate::model::{
    encode, ClassifierParams, CalibrationStage, Conv1d, EncoderParams, Model, Optimizer, OptimizerKind, Pooling,
};
use crate::spectral::{welch_psd, FeatureMap, PowerSpectrum, SpectralConfig};
use crate::stratify::{kmeans_fit_best, StrataModel, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::synth::{Dataset, Sample};

/// SplitMix64 mix of `(seed, stream, index)`; every random consumer gets its own stream.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    for _ in 0..2 {
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

const STREAM_INIT: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;
const STREAM_KMEANS: u64 = 3;
const STREAM_WARMUP: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    BaselineNoCalibration,
    GlobalAnchor,
    DatasetAnchor,
    Structural,
}

impl FromStr for Strategy {
    type Err = SscfError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" | "baseline_no_calibration" => Ok(Strategy::BaselineNoCalibration),
            "global" | "global_anchor" => Ok(Strategy::GlobalAnchor),
            "dataset" | "dataset_anchor" => Ok(Strategy::DatasetAnchor),
            "structural" => Ok(Strategy::Structural),
            other => Err(SscfError::Validation(format!("unknown strategy '{other}'"))),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::BaselineNoCalibration => "baseline_no_calibration",
            Strategy::GlobalAnchor => "global_anchor",
            Strategy::DatasetAnchor => "dataset_anchor",
            Strategy::Structural => "structural",
        })
    }
}

/// Architecture of the encoder; parameters are drawn from the run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EncoderSpec {
    Identity,
    Conv { channels: usize, width: usize },
}

impl EncoderSpec {
    pub fn build(self, c_in: usize, seed: u64) -> EncoderParams {
        match self {
            EncoderSpec::Identity => EncoderParams::Identity { channels: c_in },
            EncoderSpec::Conv { channels, width } => EncoderParams::Conv1d(Conv1d::new(channels, c_in, width, 1, seed)),
        }
    }
}

impl FromStr for EncoderSpec {
    type Err = SscfError;

    /// `identity` or `conv:<channels>:<width>`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "identity" {
            return Ok(EncoderSpec::Identity);
        }
        let parts: Vec<&str> = s.split(':').collect();
        if let ["conv", c, w] = parts.as_slice() {
            if let (Ok(channels), Ok(width)) = (c.parse(), w.parse()) {
                if channels > 0 && width > 0 {
                    return Ok(EncoderSpec::Conv { channels, width });
                }
            }
        }
        Err(SscfError::Validation(format!(
            "encoder must be 'identity' or 'conv:<channels>:<width>', got '{s}'"
        )))
    }
}

impl fmt::Display for EncoderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EncoderSpec::Identity => f.write_str("identity"),
            EncoderSpec::Conv { channels, width } => write!(f, "conv:{channels}:{width}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub strategy: Strategy,
    /// Number of strata (structural only).
    pub k: usize,
    pub calibration: CalibrationConfig,
    pub spectral: SpectralConfig,
    pub encoder: EncoderSpec,
    pub pooling: Pooling,
    pub optimizer: OptimizerKind,
    /// ERM epochs of the auxiliary encoder before anchors are extracted.
    pub warmup_epochs: usize,
    pub train_epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub kmeans_restarts: usize,
    pub seed: u64,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig {
            strategy: Strategy::Structural,
            k: 2,
            calibration: CalibrationConfig::default(),
            spectral: SpectralConfig::default(),
            encoder: EncoderSpec::Identity,
            pooling: Pooling::SpectralPower,
            optimizer: OptimizerKind::Adam,
            warmup_epochs: 5,
            train_epochs: 30,
            lr: 0.01,
            batch_size: 32,
            kmeans_restarts: 10,
            seed: 0,
        }
    }
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(SscfError::Validation("k must be >= 1".into()));
        }
        if self.train_epochs == 0 {
            return Err(SscfError::Validation("train_epochs must be >= 1".into()));
        }
        if self.batch_size == 0 || self.kmeans_restarts == 0 {
            return Err(SscfError::Validation("batch_size and kmeans_restarts must be >= 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(SscfError::Validation(format!("lr must be > 0, got {}", self.lr)));
        }
        self.spectral.validate()?;
        self.calibration.validate()
    }

    pub fn uses_calibration(&self) -> bool {
        self.strategy != Strategy::BaselineNoCalibration
    }
}

/// Which part of a LODO fold is reading data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Training,
    Evaluation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Access {
    /// Domain held out in the fold that is reading.
    pub held_out: usize,
    pub phase: Phase,
}

/// Per-domain sample provider. LODO reads every domain through it, tagging each
/// read with the fold and phase, so implementations can audit access.
pub trait DomainSource: Sync {
    fn domain_ids(&self) -> Vec<usize>;
    fn classes(&self) -> usize;
    fn load(&self, domain: usize, access: Access) -> Result<Vec<Sample>>;
}

impl DomainSource for Dataset {
    fn domain_ids(&self) -> Vec<usize> {
        Dataset::domain_ids(self)
    }

    fn classes(&self) -> usize {
        self.classes
    }

    fn load(&self, domain: usize, _access: Access) -> Result<Vec<Sample>> {
        Ok(self.domain(domain).into_iter().cloned().collect())
    }
}

/// `confusion[true][predicted]` counts.
pub type Confusion = Vec<Vec<u64>>;

fn check_confusion(confusion: &Confusion) -> Result<u64> {
    let n = confusion.len();
    if n == 0 {
        return Err(SscfError::EmptyMatrix);
    }
    if confusion.iter().any(|r| r.len() != n) {
        return Err(SscfError::ShapeMismatch("confusion matrix must be square".into()));
    }
    let total: u64 = confusion.iter().flatten().sum();
    if total == 0 {
        return Err(SscfError::EmptyMatrix);
    }
    Ok(total)
}

/// Unweighted mean of per-class F1; a class with no true and no predicted samples scores 0.
pub fn macro_f1(confusion: &Confusion) -> Result<f64> {
    check_confusion(confusion)?;
    let n = confusion.len();
    let mut sum = 0.0;
    for c in 0..n {
        let tp = confusion[c][c] as f64;
        let fp = (0..n).map(|r| confusion[r][c]).sum::<u64>() as f64 - tp;
        let fn_ = confusion[c].iter().sum::<u64>() as f64 - tp;
        let denom = 2.0 * tp + fp + fn_;
        if denom > 0.0 {
            sum += 2.0 * tp / denom;
        }
    }
    Ok(sum / n as f64)
}

pub fn accuracy(confusion: &Confusion) -> Result<f64> {
    let total = check_confusion(confusion)?;
    let correct: u64 = (0..confusion.len()).map(|c| confusion[c][c]).sum();
    Ok(correct as f64 / total as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainResult {
    pub domain: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub confusion: Confusion,
    /// How many target samples matched each stratum (empty without calibration).
    pub strata_histogram: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub strategy: Strategy,
    pub k: usize,
    pub rank: usize,
    pub seed: u64,
    pub domains: Vec<DomainResult>,
    pub avg_accuracy: f64,
    pub avg_macro_f1: f64,
    pub runtime_secs: f64,
}

impl ExperimentResult {
    fn new(cfg: &StrategyConfig, k: usize, rank: usize, domains: Vec<DomainResult>, runtime_secs: f64) -> Self {
        let n = domains.len() as f64;
        ExperimentResult {
            strategy: cfg.strategy,
            k,
            rank,
            seed: cfg.seed,
            avg_accuracy: domains.iter().map(|d| d.accuracy).sum::<f64>() / n,
            avg_macro_f1: domains.iter().map(|d| d.macro_f1).sum::<f64>() / n,
            domains,
            runtime_secs,
        }
    }
}

/// One row per target domain plus an `AVG` row; metrics are averaged over the
/// given runs, which must share strategy, K, rank and domain order.
pub fn lodo_csv(results: &[ExperimentResult]) -> Result<String> {
    let first = results
        .first()
        .ok_or_else(|| SscfError::InvalidInput("no results to write".into()))?;
    let same_domains = |r: &ExperimentResult| {
        r.domains.iter().map(|d| d.domain).eq(first.domains.iter().map(|d| d.domain))
    };
    if results.iter().any(|r| !same_domains(r) || r.strategy != first.strategy || r.k != first.k || r.rank != first.rank) {
        return Err(SscfError::InvalidInput("results are not runs of one experiment".into()));
    }
    let n = results.len() as f64;
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| SscfError::InvalidInput(e.to_string());
    w.write_record(["domain", "strategy", "k", "rank", "runs", "accuracy", "macro_f1"]).map_err(err)?;
    let common = [first.strategy.to_string(), first.k.to_string(), first.rank.to_string(), results.len().to_string()];
    let mut row = |label: String, acc: f64, mf1: f64| {
        let mut r = vec![label];
        r.extend(common.iter().cloned());
        r.extend([format!("{acc:.6}"), format!("{mf1:.6}")]);
        w.write_record(&r).map_err(err)
    };
    for (i, d) in first.domains.iter().enumerate() {
        let acc = results.iter().map(|r| r.domains[i].accuracy).sum::<f64>() / n;
        let mf1 = results.iter().map(|r| r.domains[i].macro_f1).sum::<f64>() / n;
        row(d.domain.to_string(), acc, mf1)?;
    }
    let acc = results.iter().map(|r| r.avg_accuracy).sum::<f64>() / n;
    let mf1 = results.iter().map(|r| r.avg_macro_f1).sum::<f64>() / n;
    row("AVG".into(), acc, mf1)?;
    csv_string(w)
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| SscfError::InvalidInput(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| SscfError::InvalidInput(e.to_string()))
}

/// Features the anchors are computed over: raw series, or the output of an
/// auxiliary encoder trained by plain ERM for `warmup_epochs` and then frozen.
fn stage1_features(source: &[&Sample], classes: usize, cfg: &StrategyConfig) -> Result<Vec<FeatureMap>> {
    let c_in = source[0].x.rows();
    let mut encoder = cfg.encoder.build(c_in, derive_seed(cfg.seed, STREAM_WARMUP, 0));
    // A parameterless encoder cannot change during warm-up, so the ERM pass is skipped.
    if encoder.n_params() > 0 && cfg.warmup_epochs > 0 {
        let warm = StrategyConfig {
            strategy: Strategy::BaselineNoCalibration,
            train_epochs: cfg.warmup_epochs,
            seed: derive_seed(cfg.seed, STREAM_WARMUP, 1),
            ..cfg.clone()
        };
        encoder = train(source, classes, None, &warm)?.encoder;
    }
    source.iter().map(|s| encode(&encoder, &s.x)).collect()
}

/// Stage I: fit strata on the frozen auxiliary features and build one anchor per stratum.
pub fn run_stage1(source: &[&Sample], classes: usize, cfg: &StrategyConfig) -> Result<AnchorSet> {
    cfg.validate()?;
    if source.is_empty() {
        return Err(SscfError::InvalidInput("stage I needs at least one source sample".into()));
    }
    let spectra = stage1_features(source, classes, cfg)?
        .iter()
        .map(|h| welch_psd(h, &cfg.spectral))
        .collect::<Result<Vec<PowerSpectrum>>>()?;
    let strata = match cfg.strategy {
        Strategy::Structural => kmeans_fit_best(
            &spectra,
            cfg.k,
            derive_seed(cfg.seed, STREAM_KMEANS, 0),
            cfg.kmeans_restarts,
            DEFAULT_MAX_ITER,
            DEFAULT_TOL,
        )?,
        Strategy::GlobalAnchor | Strategy::BaselineNoCalibration => {
            StrataModel::from_assignments(&spectra, 1, vec![0; spectra.len()])?
        }
        Strategy::DatasetAnchor => {
            let mut ids: Vec<usize> = source.iter().map(|s| s.domain).collect();
            ids.sort_unstable();
            ids.dedup();
            let assignments = source
                .iter()
                .map(|s| ids.binary_search(&s.domain).expect("id present"))
                .collect();
            StrataModel::from_assignments(&spectra, ids.len(), assignments)?
        }
    };
    build_anchor_set(&spectra, &strata, &cfg.spectral, cfg.calibration.eps)
}

fn stage<'a>(anchors: Option<&'a AnchorSet>, spectral: &'a SpectralConfig, calibration: &'a CalibrationConfig) -> Option<CalibrationStage<'a>> {
    anchors.map(|anchors| CalibrationStage {
        anchors,
        spectral,
        calibration,
    })
}

/// Mini-batch training from a fresh initialization. With a parameterless encoder
/// the calibrated inputs cannot change, so they are computed once up front.
fn train(source: &[&Sample], classes: usize, anchors: Option<&AnchorSet>, cfg: &StrategyConfig) -> Result<Model> {
    let c_in = source[0].x.rows();
    let t = source[0].x.cols();
    let encoder = cfg.encoder.build(c_in, derive_seed(cfg.seed, STREAM_INIT, 0));
    let len = encoder
        .out_len(t)
        .ok_or_else(|| SscfError::Validation(format!("encoder does not fit series length {t}")))?;
    let head = ClassifierParams::new(cfg.pooling, encoder.out_channels(), len, classes, derive_seed(cfg.seed, STREAM_INIT, 1))?;
    let mut model = Model::new(encoder, head);
    let train_cal = CalibrationConfig {
        rank: 1,
        ..cfg.calibration.clone()
    };
    let precomputed: Option<Vec<Matrix>> = if model.encoder.n_params() == 0 {
        Some(match anchors {
            Some(a) => source
                .iter()
                .map(|s| Ok(calibrate(&FeatureMap::new(s.x.clone())?, a, &cfg.spectral, &train_cal)?.data.into_matrix()))
                .collect::<Result<_>>()?,
            None => source.iter().map(|s| s.x.clone()).collect(),
        })
    } else {
        None
    };
    let stage = match precomputed {
        Some(_) => None,
        None => stage(anchors, &cfg.spectral, &train_cal),
    };
    let inputs: Vec<&Matrix> = match &precomputed {
        Some(v) => v.iter().collect(),
        None => source.iter().map(|s| &s.x).collect(),
    };
    let mut opt = Optimizer::new(cfg.optimizer, cfg.lr, model.n_params());
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_SHUFFLE, 0));
    let mut order: Vec<usize> = (0..source.len()).collect();
    for _ in 0..cfg.train_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&Matrix, usize)> = chunk.iter().map(|&i| (inputs[i], source[i].label)).collect();
            model.forward_loss(&batch, stage)?;
            opt.apply(&mut model)?;
        }
    }
    Ok(model)
}

/// Stage II: trains the final model with anchors held fixed. Without anchors
/// (the baseline) the calibration step is absent.
pub fn run_stage2(source: &[&Sample], classes: usize, anchors: Option<&AnchorSet>, cfg: &StrategyConfig) -> Result<Model> {
    cfg.validate()?;
    if source.is_empty() {
        return Err(SscfError::InvalidInput("stage II needs at least one source sample".into()));
    }
    train(source, classes, anchors, cfg)
}

/// Per-step training losses of the stage II loop (used for diagnostics).
pub fn stage2_loss_curve(source: &[&Sample], classes: usize, anchors: Option<&AnchorSet>, cfg: &StrategyConfig, steps: usize) -> Result<Vec<f64>> {
    cfg.validate()?;
    let c_in = source[0].x.rows();
    let encoder = cfg.encoder.build(c_in, derive_seed(cfg.seed, STREAM_INIT, 0));
    let len = encoder.out_len(source[0].x.cols()).ok_or_else(|| SscfError::Validation("encoder too wide".into()))?;
    let head = ClassifierParams::new(cfg.pooling, encoder.out_channels(), len, classes, derive_seed(cfg.seed, STREAM_INIT, 1))?;
    let mut model = Model::new(encoder, head);
    let mut opt = Optimizer::new(cfg.optimizer, cfg.lr, model.n_params());
    let st = stage(anchors, &cfg.spectral, &cfg.calibration);
    let batch: Vec<(&Matrix, usize)> = source.iter().map(|s| (&s.x, s.label)).collect();
    let mut losses = Vec::with_capacity(steps);
    for _ in 0..steps {
        losses.push(model.forward_loss(&batch, st)?);
        opt.apply(&mut model)?;
    }
    Ok(losses)
}

/// Scores `model` on one domain with calibration at the given rank.
pub fn evaluate(
    model: &Model,
    target: &[Sample],
    classes: usize,
    anchors: Option<&AnchorSet>,
    cfg: &StrategyConfig,
    rank: usize,
) -> Result<DomainResult> {
    let domain = target
        .first()
        .map(|s| s.domain)
        .ok_or_else(|| SscfError::InvalidInput("empty evaluation domain".into()))?;
    let cal = CalibrationConfig {
        rank,
        ..cfg.calibration.clone()
    };
    let st = stage(anchors, &cfg.spectral, &cal);
    let mut confusion = vec![vec![0u64; classes]; classes];
    let mut hist = vec![0usize; anchors.map_or(0, |a| a.k())];
    for s in target {
        if s.label >= classes {
            return Err(SscfError::LabelOutOfRange {
                label: s.label,
                classes,
            });
        }
        let (logits, k) = model.predict_logits(&s.x, st)?;
        confusion[s.label][crate::model::argmax(&logits)] += 1;
        if let Some(k) = k {
            hist[k] += 1;
        }
    }
    Ok(DomainResult {
        domain,
        accuracy: accuracy(&confusion)?,
        macro_f1: macro_f1(&confusion)?,
        confusion,
        strata_histogram: hist,
    })
}

/// One LODO fold: trains on every domain but `held_out`, then scores it at each rank.
fn run_fold(source: &dyn DomainSource, ids: &[usize], held_out: usize, cfg: &StrategyConfig, ranks: &[usize]) -> Result<Vec<DomainResult>> {
    let training = Access {
        held_out,
        phase: Phase::Training,
    };
    let mut train_samples = Vec::new();
    for &d in ids.iter().filter(|&&d| d != held_out) {
        train_samples.extend(source.load(d, training)?);
    }
    let refs: Vec<&Sample> = train_samples.iter().collect();
    let classes = source.classes();
    let anchors = if cfg.uses_calibration() {
        Some(run_stage1(&refs, classes, cfg)?)
    } else {
        None
    };
    if let Some(a) = &anchors {
        if let Some(&r) = ranks.iter().find(|&&r| r == 0 || r > a.k()) {
            return Err(SscfError::RankOutOfRange { rank: r, k: a.k() });
        }
    }
    let model = run_stage2(&refs, classes, anchors.as_ref(), cfg)?;
    drop(train_samples);
    let target = source.load(
        held_out,
        Access {
            held_out,
            phase: Phase::Evaluation,
        },
    )?;
    ranks
        .iter()
        .map(|&r| evaluate(&model, &target, classes, anchors.as_ref(), cfg, r))
        .collect()
}

/// Leave-one-domain-out with evaluation at several matching ranks (training always
/// uses the nearest anchor). Returns one result per rank; folds run in parallel and
/// are merged in domain order.
pub fn run_lodo_ranks(source: &dyn DomainSource, cfg: &StrategyConfig, ranks: &[usize]) -> Result<Vec<ExperimentResult>> {
    cfg.validate()?;
    let ids = source.domain_ids();
    if ids.len() < 2 {
        return Err(SscfError::InvalidInput(format!("LODO needs at least 2 domains, got {}", ids.len())));
    }
    if ranks.is_empty() || ranks.contains(&0) {
        return Err(SscfError::Validation("ranks must be a nonempty list of values >= 1".into()));
    }
    let start = Instant::now();
    let folds = ids
        .par_iter()
        .map(|&d| run_fold(source, &ids, d, cfg, ranks))
        .collect::<Result<Vec<_>>>()?;
    let elapsed = start.elapsed().as_secs_f64();
    let k = match cfg.strategy {
        Strategy::Structural => cfg.k,
        Strategy::GlobalAnchor => 1,
        Strategy::DatasetAnchor => ids.len() - 1,
        Strategy::BaselineNoCalibration => 0,
    };
    Ok(ranks
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let per_domain = folds.iter().map(|f| f[i].clone()).collect();
            ExperimentResult::new(cfg, k, r, per_domain, elapsed)
        })
        .collect())
}

pub fn run_lodo(source: &dyn DomainSource, cfg: &StrategyConfig) -> Result<ExperimentResult> {
    let rank = cfg.calibration.rank;
    Ok(run_lodo_ranks(source, cfg, &[rank])?.remove(0))
}

/// One row of a sweep: mean over seeds of the LODO averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: usize,
    pub avg_accuracy: f64,
    pub avg_macro_f1: f64,
    /// Per-seed LODO average MF1, in seed order.
    pub per_seed_macro_f1: Vec<f64>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sweep_row(value: usize, results: &[ExperimentResult]) -> SweepRow {
    let acc: Vec<f64> = results.iter().map(|r| r.avg_accuracy).collect();
    let mf1: Vec<f64> = results.iter().map(|r| r.avg_macro_f1).collect();
    SweepRow {
        value,
        avg_accuracy: mean(&acc),
        avg_macro_f1: mean(&mf1),
        per_seed_macro_f1: mf1,
    }
}

/// LODO over several seeds; results in seed order.
pub fn run_lodo_seeds(source: &dyn DomainSource, cfg: &StrategyConfig, seeds: &[u64]) -> Result<Vec<ExperimentResult>> {
    seeds
        .iter()
        .map(|&seed| run_lodo(source, &StrategyConfig { seed, ..cfg.clone() }))
        .collect()
}

/// Structural LODO for each K, averaged over `seeds`.
pub fn sweep_k(source: &dyn DomainSource, cfg: &StrategyConfig, k_values: &[usize], seeds: &[u64]) -> Result<Vec<SweepRow>> {
    if k_values.is_empty() || seeds.is_empty() {
        return Err(SscfError::Validation("sweep needs at least one K and one seed".into()));
    }
    k_values
        .iter()
        .map(|&k| {
            let c = StrategyConfig {
                strategy: Strategy::Structural,
                k,
                ..cfg.clone()
            };
            Ok(sweep_row(k, &run_lodo_seeds(source, &c, seeds)?))
        })
        .collect()
}

/// Structural LODO trained once per seed and evaluated at each matching rank.
pub fn sweep_rank(source: &dyn DomainSource, cfg: &StrategyConfig, r_values: &[usize], seeds: &[u64]) -> Result<Vec<SweepRow>> {
    if r_values.is_empty() || seeds.is_empty() {
        return Err(SscfError::Validation("sweep needs at least one rank and one seed".into()));
    }
    if let Some(&r) = r_values.iter().find(|&&r| r == 0 || r > cfg.k) {
        return Err(SscfError::RankOutOfRange { rank: r, k: cfg.k });
    }
    let c = StrategyConfig {
        strategy: Strategy::Structural,
        ..cfg.clone()
    };
    let mut by_rank: BTreeMap<usize, Vec<ExperimentResult>> = BTreeMap::new();
    for &seed in seeds {
        let results = run_lodo_ranks(source, &StrategyConfig { seed, ..c.clone() }, r_values)?;
        for (r, res) in r_values.iter().zip(results) {
            by_rank.entry(*r).or_default().push(res);
        }
    }
    Ok(r_values.iter().map(|r| sweep_row(*r, &by_rank[r])).collect())
}

pub fn sweep_csv(name: &str, rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| SscfError::InvalidInput(e.to_string());
    w.write_record([name, "avg_accuracy", "avg_macro_f1"]).map_err(err)?;
    for r in rows {
        w.write_record([r.value.to_string(), format!("{:.6}", r.avg_accuracy), format!("{:.6}", r.avg_macro_f1)])
            .map_err(err)?;
    }
    csv_string(w)
}

/// Writes `text` atomically.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())
}
