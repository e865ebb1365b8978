use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use sscf::anchors::{load_anchors, save_anchors};
use sscf::calibrate::calibrate;
use sscf::config::RunConfig;
use sscf::container::{sha256_hex, write_atomic};
use sscf::harness::{
    lodo_csv, run_lodo_seeds, run_stage1, sweep_csv, sweep_k, sweep_rank, ExperimentResult, Strategy, SweepRow,
};
use sscf::spectral::FeatureMap;
use sscf::synth::{make_scenario, Dataset, Sample};
use sscf::{Result, SscfError};

#[derive(Parser, Debug)]
#[command(name = "sscf", version, about = "Structure-stratified spectral calibration")]
struct Cli {
    /// Flat key = value config file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Upper bound on worker threads.
    #[arg(long, global = true)]
    threads: Option<String>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset file.
    Synth {
        #[arg(long)]
        scenario: Option<String>,
    },
    /// Fit strata and write an anchor file.
    Anchors {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        k: Option<String>,
        #[arg(long)]
        strategy: Option<String>,
        #[command(flatten)]
        spectral: SpectralFlags,
    },
    /// Calibrate every series of a dataset against an anchor file.
    Calibrate {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        anchors: Option<PathBuf>,
        #[arg(long)]
        rank: Option<String>,
        /// Replace every mask by ones (debugging).
        #[arg(long)]
        unit_mask: bool,
        #[command(flatten)]
        spectral: SpectralFlags,
    },
    /// Leave-one-domain-out evaluation.
    Lodo {
        #[command(flatten)]
        exp: ExperimentFlags,
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long)]
        k: Option<String>,
    },
    /// Structural LODO for each K in a list.
    SweepK {
        #[command(flatten)]
        exp: ExperimentFlags,
        /// Comma-separated list, e.g. 1,2,3,4.
        #[arg(long)]
        k: Option<String>,
    },
    /// Structural LODO evaluated at each matching rank.
    SweepRank {
        #[command(flatten)]
        exp: ExperimentFlags,
        #[arg(long)]
        k: Option<String>,
        /// Comma-separated list, e.g. 1,2,3.
        #[arg(long)]
        ranks: Option<String>,
    },
}

#[derive(Args, Debug)]
struct SpectralFlags {
    #[arg(long)]
    frame_len: Option<String>,
    #[arg(long)]
    hop: Option<String>,
    #[arg(long)]
    window: Option<String>,
}

#[derive(Args, Debug)]
struct ExperimentFlags {
    #[arg(long)]
    scenario: Option<String>,
    /// Dataset file to use instead of a generated scenario.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    runs: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
}

/// Applies `--flag value` as config `key`, naming the flag on failure.
fn apply(cfg: &mut RunConfig, flag: &str, key: &str, value: Option<&str>) -> Result<()> {
    match value {
        Some(v) => cfg
            .set(key, v)
            .map_err(|e| SscfError::Validation(format!("--{flag}: {e}"))),
        None => Ok(()),
    }
}

fn path_str(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

fn build_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    apply(&mut cfg, "seed", "seed", cli.seed.as_deref())?;
    apply(&mut cfg, "threads", "threads", cli.threads.as_deref())?;
    apply(&mut cfg, "out", "out", path_str(&cli.out).as_deref())?;
    let spectral = |cfg: &mut RunConfig, s: &SpectralFlags| -> Result<()> {
        apply(cfg, "frame-len", "frame_len", s.frame_len.as_deref())?;
        apply(cfg, "hop", "hop", s.hop.as_deref())?;
        apply(cfg, "window", "window", s.window.as_deref())
    };
    let experiment = |cfg: &mut RunConfig, e: &ExperimentFlags| -> Result<()> {
        apply(cfg, "scenario", "scenario", e.scenario.as_deref())?;
        apply(cfg, "data", "data", path_str(&e.data).as_deref())?;
        apply(cfg, "runs", "runs", e.runs.as_deref())?;
        apply(cfg, "epochs", "train_epochs", e.epochs.as_deref())
    };
    match &cli.cmd {
        Command::Synth { scenario } => {
            apply(&mut cfg, "scenario", "scenario", scenario.as_deref())?;
            // The data seed follows --seed for this command only.
            apply(&mut cfg, "seed", "data_seed", cli.seed.as_deref())?;
        }
        Command::Anchors { data, k, strategy, spectral: s } => {
            apply(&mut cfg, "data", "data", path_str(data).as_deref())?;
            apply(&mut cfg, "k", "k", k.as_deref())?;
            apply(&mut cfg, "strategy", "strategy", strategy.as_deref())?;
            spectral(&mut cfg, s)?;
        }
        Command::Calibrate { data, anchors, rank, unit_mask, spectral: s } => {
            apply(&mut cfg, "data", "data", path_str(data).as_deref())?;
            apply(&mut cfg, "anchors", "anchors", path_str(anchors).as_deref())?;
            apply(&mut cfg, "rank", "rank", rank.as_deref())?;
            if *unit_mask {
                cfg.set("unit_mask", "true")?;
            }
            spectral(&mut cfg, s)?;
        }
        Command::Lodo { exp, strategy, k } => {
            experiment(&mut cfg, exp)?;
            apply(&mut cfg, "strategy", "strategy", strategy.as_deref())?;
            apply(&mut cfg, "k", "k", k.as_deref())?;
        }
        Command::SweepK { exp, k } => {
            experiment(&mut cfg, exp)?;
            apply(&mut cfg, "k", "k_values", k.as_deref())?;
        }
        Command::SweepRank { exp, k, ranks } => {
            experiment(&mut cfg, exp)?;
            apply(&mut cfg, "k", "k", k.as_deref())?;
            apply(&mut cfg, "ranks", "ranks", ranks.as_deref())?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| SscfError::Validation(format!("--{flag} is required")))
}

/// Dataset from `data` if set, otherwise generated from the scenario.
fn input_dataset(cfg: &RunConfig) -> Result<Dataset> {
    match &cfg.data {
        Some(p) => Dataset::load(p),
        None => make_scenario(cfg.scenario).with_data_seed(cfg.data_seed).generate(),
    }
}

fn write_manifest(out: &Path, command: &str, cfg: &RunConfig, ds: &Dataset, extra: serde_json::Value) -> Result<()> {
    let csv = std::fs::read(out).map_err(|e| SscfError::io(out, e))?;
    let manifest = json!({
        "command": command,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "config": cfg.to_text(),
        "seeds": cfg.seeds(),
        "input_sha256": sha256_hex(&ds.to_container().to_bytes()),
        "output": out.display().to_string(),
        "output_sha256": sha256_hex(&csv),
        "results": extra,
    });
    let path = sibling(out, ".manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_atomic(&path, text.as_bytes())?;
    println!("wrote {} and {}", out.display(), path.display());
    Ok(())
}

/// `out` with `suffix` appended to its file name.
fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    out.with_file_name(name)
}

fn cmd_synth(cfg: &RunConfig) -> Result<()> {
    let out = required(&cfg.out, "out")?;
    let ds = make_scenario(cfg.scenario).with_data_seed(cfg.data_seed).generate()?;
    ds.save(out)?;
    println!("scenario {} -> {}", cfg.scenario, out.display());
    for &(d, s) in &ds.domain_structure {
        println!("  domain {d}: structure {s}, {} samples", ds.domain(d).len());
    }
    Ok(())
}

fn cmd_anchors(cfg: &RunConfig) -> Result<()> {
    let data = required(&cfg.data, "data")?;
    let out = required(&cfg.out, "out")?;
    let ds = Dataset::load(data)?;
    let refs: Vec<&Sample> = ds.samples.iter().collect();
    let strategy = if cfg.strategy.strategy == Strategy::BaselineNoCalibration {
        return Err(SscfError::Validation("--strategy: the baseline builds no anchors".into()));
    } else {
        &cfg.strategy
    };
    let set = run_stage1(&refs, ds.classes, strategy)?;
    save_anchors(&set, out)?;
    println!("K = {}", set.k());
    println!("stratum sizes = {:?}", set.strata.cluster_sizes());
    println!("inertia = {:.6e}", set.strata.inertia);
    Ok(())
}

fn cmd_calibrate(cfg: &RunConfig) -> Result<()> {
    let data = required(&cfg.data, "data")?;
    let anchors = required(&cfg.anchors, "anchors")?;
    let out = required(&cfg.out, "out")?;
    let mut ds = Dataset::load(data)?;
    let set = load_anchors(anchors)?;
    let mut rows = Vec::with_capacity(ds.samples.len());
    for (i, s) in ds.samples.iter_mut().enumerate() {
        let c = calibrate(
            &FeatureMap::new(s.x.clone())?,
            &set,
            &cfg.strategy.spectral,
            &cfg.strategy.calibration,
        )?;
        rows.push(json!({
            "index": i,
            "domain": s.domain,
            "matched_stratum": c.matched_stratum,
            "match_distance": c.match_distance,
        }));
        s.x = c.data.into_matrix();
    }
    ds.save(out)?;
    let sidecar = sibling(out, ".calibration.json");
    let text = serde_json::to_string_pretty(&json!({ "samples": rows })).expect("sidecar serializes");
    write_atomic(&sidecar, text.as_bytes())?;
    println!("calibrated {} series -> {} (+ {})", ds.samples.len(), out.display(), sidecar.display());
    Ok(())
}

fn summary(results: &[ExperimentResult]) -> serde_json::Value {
    json!(results
        .iter()
        .map(|r| json!({"seed": r.seed, "avg_accuracy": r.avg_accuracy, "avg_macro_f1": r.avg_macro_f1}))
        .collect::<Vec<_>>())
}

fn sweep_summary(rows: &[SweepRow]) -> serde_json::Value {
    json!(rows
        .iter()
        .map(|r| json!({"value": r.value, "avg_accuracy": r.avg_accuracy, "avg_macro_f1": r.avg_macro_f1, "per_seed_macro_f1": r.per_seed_macro_f1}))
        .collect::<Vec<_>>())
}

fn cmd_lodo(cfg: &RunConfig) -> Result<()> {
    let out = required(&cfg.out, "out")?;
    let ds = input_dataset(cfg)?;
    let results = run_lodo_seeds(&ds, &cfg.strategy, &cfg.seeds())?;
    write_atomic(out, lodo_csv(&results)?.as_bytes())?;
    for r in &results {
        println!("seed {}: avg acc {:.4}, avg MF1 {:.4}", r.seed, r.avg_accuracy, r.avg_macro_f1);
    }
    write_manifest(out, "lodo", cfg, &ds, summary(&results))
}

fn cmd_sweep(cfg: &RunConfig, by_rank: bool) -> Result<()> {
    let out = required(&cfg.out, "out")?;
    let ds = input_dataset(cfg)?;
    let (name, rows) = if by_rank {
        ("rank", sweep_rank(&ds, &cfg.strategy, &cfg.ranks, &cfg.seeds())?)
    } else {
        ("k", sweep_k(&ds, &cfg.strategy, &cfg.k_values, &cfg.seeds())?)
    };
    write_atomic(out, sweep_csv(name, &rows)?.as_bytes())?;
    for r in &rows {
        println!("{name} = {}: avg acc {:.4}, avg MF1 {:.4}", r.value, r.avg_accuracy, r.avg_macro_f1);
    }
    let command = if by_rank { "sweep-rank" } else { "sweep-k" };
    write_manifest(out, command, cfg, &ds, sweep_summary(&rows))
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = build_config(cli)?;
    if let Some(n) = cfg.threads {
        // Fails only if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.cmd {
        Command::Synth { .. } => cmd_synth(&cfg),
        Command::Anchors { .. } => cmd_anchors(&cfg),
        Command::Calibrate { .. } => cmd_calibrate(&cfg),
        Command::Lodo { .. } => cmd_lodo(&cfg),
        Command::SweepK { .. } => cmd_sweep(&cfg, false),
        Command::SweepRank { .. } => cmd_sweep(&cfg, true),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
