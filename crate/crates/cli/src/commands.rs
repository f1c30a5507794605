use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use ctxfuse::ablation::{run_ablations, AblationRow};
use ctxfuse::engine::split_indices;
use ctxfuse::fusion::{decide, tune_threshold};
use ctxfuse::metrics::jaccard_indicator;
use ctxfuse::simulator::generate_dataset;
use ctxfuse::wire::{experts_in, read_jsonl, write_jsonl, Codec};
use ctxfuse::{
    replay, Engine, FusionError, GameConfig, MetricsSummary, RoundRecord, SimConfig, SplitSpec,
    SyntheticExpertProfile,
};

use crate::manifest::{sha256_hex, write_manifest, write_output, DatasetRef, RunManifest, SplitRecord};
use crate::simfile::SimFile;

pub const DEFAULT_TRAIN_FRAC: f64 = 0.7;

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    FusionError::InvalidConfig(msg.into()).into()
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

// ---------------------------------------------------------------------------
// simulate

pub fn simulate(config: Option<&Path>, out_dir: &Path, seed: Option<u64>) -> Result<()> {
    let file = match config {
        Some(p) => SimFile::parse(&read_text(p)?)?,
        None => SimFile::default(),
    };
    let (mut sim, profiles) = file.resolve()?;
    if let Some(s) = seed {
        sim.seed = s;
    }
    let mut manifest = RunManifest::new("simulate", config);
    run_simulate(sim, profiles, out_dir, &mut manifest)
}

pub fn run_simulate(
    sim: SimConfig,
    profiles: Vec<SyntheticExpertProfile>,
    out_dir: &Path,
    manifest: &mut RunManifest,
) -> Result<()> {
    let ds = generate_dataset(&sim, &profiles)?;
    let codec = Codec::new(&ds.labels, &ds.experts);
    let wires: Vec<_> = ds.rounds.iter().map(|r| codec.encode(r)).collect();
    let mut bytes = Vec::new();
    write_jsonl(&mut bytes, &wires)?;
    create_dir(out_dir)?;
    write_output(out_dir, "dataset.jsonl", &bytes, manifest)?;
    manifest.seed = Some(sim.seed);
    manifest.sim_config = Some(sim.clone());
    manifest.profiles = Some(profiles);
    write_manifest(out_dir, manifest)?;
    let labelled = ds.rounds.iter().filter(|r| r.is_labelled()).count();
    println!(
        "wrote {} rounds ({labelled} labelled, {} experts, {} labels) to {}",
        ds.rounds.len(),
        ds.experts.len(),
        ds.labels.len(),
        out_dir.join("dataset.jsonl").display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// shared replay inputs

/// Flags that switch ablations on regardless of the config file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub no_update_eval: bool,
    pub freeze_reputation: bool,
    pub naive_credit: bool,
    pub no_guardrail: bool,
    pub context_agnostic: bool,
}

impl Overrides {
    fn apply(self, cfg: &mut GameConfig) {
        cfg.no_update_eval |= self.no_update_eval;
        cfg.freeze_reputation |= self.freeze_reputation;
        cfg.naive_credit |= self.naive_credit;
        cfg.no_guardrail |= self.no_guardrail;
        cfg.context_agnostic |= self.context_agnostic;
    }
}

pub struct SplitArgs {
    pub train_frac: Option<f64>,
    pub split_file: Option<PathBuf>,
}

/// Everything a replay-style command consumes.
pub struct Inputs {
    pub config: GameConfig,
    pub rounds: Vec<RoundRecord>,
    pub split: SplitSpec,
    pub manifest: RunManifest,
}

fn parse_split_file(text: &str) -> Result<Vec<u64>> {
    let mut ids = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let id = line
            .parse::<u64>()
            .map_err(|e| FusionError::Parse { line: n + 1, message: format!("round id {line:?}: {e}") })?;
        ids.push(id);
    }
    Ok(ids)
}

fn load_dataset(path: &Path, config: &mut GameConfig) -> Result<(Vec<RoundRecord>, DatasetRef)> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let wires = read_jsonl(bytes.as_slice()).with_context(|| format!("parsing {}", path.display()))?;
    if wires.is_empty() {
        return Err(FusionError::EmptyDataset.into());
    }
    if config.experts.is_empty() {
        config.experts = experts_in(&wires);
    }
    config.validate()?;
    let rounds = Codec::new(&config.labels, &config.experts)
        .decode_all(&wires)
        .with_context(|| format!("decoding {}", path.display()))?;
    let dataset = DatasetRef {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    };
    Ok((rounds, dataset))
}

fn resolve_split(args: &SplitArgs, rounds: &[RoundRecord]) -> Result<(SplitSpec, SplitRecord)> {
    match &args.split_file {
        Some(path) => {
            let ids = parse_split_file(&read_text(path)?)?;
            let record = SplitRecord {
                train_frac: None,
                split_file: Some(path.display().to_string()),
                train_ids: Some(ids.clone()),
            };
            Ok((train_ids_split(ids, rounds)?, record))
        }
        None => {
            let frac = args.train_frac.unwrap_or(DEFAULT_TRAIN_FRAC);
            if !(0.0..=1.0).contains(&frac) {
                return Err(invalid("--train-frac must lie in [0, 1]"));
            }
            let record = SplitRecord { train_frac: Some(frac), split_file: None, train_ids: None };
            Ok((SplitSpec::Fraction(frac), record))
        }
    }
}

fn train_ids_split(ids: Vec<u64>, rounds: &[RoundRecord]) -> Result<SplitSpec> {
    let known: HashSet<u64> = rounds.iter().map(|r| r.round_id).collect();
    if let Some(missing) = ids.iter().find(|id| !known.contains(id)) {
        return Err(invalid(format!("split file names round {missing}, which is not in the dataset")));
    }
    Ok(SplitSpec::TrainIds(ids.into_iter().collect()))
}

pub fn load_inputs(
    command: &str,
    config_path: Option<&Path>,
    dataset: &Path,
    split: &SplitArgs,
    overrides: Overrides,
) -> Result<Inputs> {
    let mut config = match config_path {
        Some(p) => GameConfig::from_toml_str(&read_text(p)?)?,
        None => GameConfig::default(),
    };
    overrides.apply(&mut config);
    let (rounds, dataset_ref) = load_dataset(dataset, &mut config)?;
    let (split, record) = resolve_split(split, &rounds)?;
    let mut manifest = RunManifest::new(command, config_path);
    manifest.game_config = Some(config.clone());
    manifest.dataset = Some(dataset_ref);
    manifest.split = Some(record);
    Ok(Inputs { config, rounds, split, manifest })
}

/// Rebuilds the inputs recorded in a manifest, checking the dataset hash.
pub fn inputs_from_manifest(manifest: &RunManifest) -> Result<Inputs> {
    let mut config = manifest
        .game_config
        .clone()
        .ok_or_else(|| invalid("manifest has no game config"))?;
    config.validate()?;
    let recorded = manifest.dataset.as_ref().ok_or_else(|| invalid("manifest has no dataset"))?;
    let (rounds, dataset) = load_dataset(Path::new(&recorded.path), &mut config)?;
    if dataset.sha256 != recorded.sha256 {
        return Err(invalid(format!(
            "dataset {} has changed since the run (sha256 {} != {})",
            recorded.path, dataset.sha256, recorded.sha256
        )));
    }
    let record = manifest.split.clone().ok_or_else(|| invalid("manifest has no split"))?;
    let split = match (&record.train_ids, record.train_frac) {
        (Some(ids), _) => train_ids_split(ids.clone(), &rounds)?,
        (None, Some(frac)) => SplitSpec::Fraction(frac),
        (None, None) => return Err(invalid("manifest split is empty")),
    };
    let mut fresh = manifest.clone();
    fresh.outputs.clear();
    Ok(Inputs { config, rounds, split, manifest: fresh })
}

// ---------------------------------------------------------------------------
// replay

#[derive(Serialize)]
struct ReputationFile<'a> {
    experts: &'a [String],
    reputation: &'a [f64],
    discounted_utility: &'a [f64],
}

fn describe(name: &str, m: &MetricsSummary) -> String {
    format!(
        "{name:<12} hamming {:.4}  micro-F1 {:.4}  macro-F1 {:.4}  jaccard {:.4}",
        m.mean_hamming, m.micro_f1, m.macro_f1, m.mean_jaccard
    )
}

pub fn run_replay(inputs: Inputs, out_dir: &Path) -> Result<()> {
    let Inputs { config, rounds, split, mut manifest } = inputs;
    let report = replay(&rounds, &config, &split)?;
    create_dir(out_dir)?;
    let mut metrics = report.metrics_json();
    metrics.push('\n');
    write_output(out_dir, "metrics.json", metrics.as_bytes(), &mut manifest)?;
    let csv = report.trajectory_csv(&config.labels, &config.experts);
    write_output(out_dir, "trajectory.csv", csv.as_bytes(), &mut manifest)?;
    let mut rep = serde_json::to_string_pretty(&ReputationFile {
        experts: &config.experts,
        reputation: &report.final_reputation,
        discounted_utility: &report.discounted_utility,
    })?;
    rep.push('\n');
    write_output(out_dir, "reputation.json", rep.as_bytes(), &mut manifest)?;
    write_manifest(out_dir, &manifest)?;

    println!(
        "{} rounds ({} train, {} eval, {} labelled eval), threshold {:.2}",
        rounds.len(),
        report.n_train,
        report.n_eval,
        report.n_eval_labelled,
        report.threshold
    );
    match &report.fused {
        Some(f) => {
            println!("{}", describe("fused", f));
            for e in &report.experts {
                println!("{}", describe(&e.expert, &e.metrics));
            }
            if let Some(mv) = &report.majority_vote {
                println!("{}", describe("majority", mv));
            }
        }
        None => println!("no labelled evaluation rounds: metrics unavailable"),
    }
    let w: Vec<String> = config
        .experts
        .iter()
        .zip(&report.final_reputation)
        .map(|(e, w)| format!("{e}={w:.4}"))
        .collect();
    println!("final reputation {}", w.join(" "));
    Ok(())
}

// ---------------------------------------------------------------------------
// ablate

fn ablation_csv(rows: &[AblationRow]) -> Result<String> {
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(["variant", "threshold", "hamming", "micro_f1", "macro_f1", "jaccard"])?;
    for row in rows {
        let r = &row.report;
        let cells = match &r.fused {
            Some(m) => [m.mean_hamming, m.micro_f1, m.macro_f1, m.mean_jaccard].map(|v| v.to_string()),
            None => std::array::from_fn(|_| String::new()),
        };
        let mut record = vec![row.variant.name().to_string(), r.threshold.to_string()];
        record.extend(cells);
        out.write_record(&record)?;
    }
    Ok(String::from_utf8(out.into_inner()?)?)
}

pub fn run_ablate(inputs: Inputs, out_dir: &Path) -> Result<()> {
    let Inputs { config, rounds, split, mut manifest } = inputs;
    let rows = run_ablations(&rounds, &config, &split)?;
    create_dir(out_dir)?;
    write_output(out_dir, "ablation.csv", ablation_csv(&rows)?.as_bytes(), &mut manifest)?;
    let mut json = serde_json::to_string_pretty(&rows)?;
    json.push('\n');
    write_output(out_dir, "ablation.json", json.as_bytes(), &mut manifest)?;
    write_manifest(out_dir, &manifest)?;

    let mut table = format!(
        "{:<18} {:>9} {:>9} {:>9} {:>9}\n",
        "variant", "hamming", "micro-F1", "macro-F1", "jaccard"
    );
    for row in &rows {
        match &row.report.fused {
            Some(m) => writeln!(
                table,
                "{:<18} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
                row.variant.name(),
                m.mean_hamming,
                m.micro_f1,
                m.macro_f1,
                m.mean_jaccard
            )?,
            None => writeln!(table, "{:<18} {:>9}", row.variant.name(), "n/a")?,
        }
    }
    print!("{table}");
    Ok(())
}

// ---------------------------------------------------------------------------
// tune-threshold

#[derive(Serialize)]
struct ThresholdFile {
    threshold: f64,
    n_train: usize,
    n_train_labelled: usize,
    train_jaccard: f64,
}

/// Plays the training rounds in stream order and tunes τ on their posteriors,
/// exactly as a replay with `decision_threshold = "tune"` does.
pub fn run_tune_threshold(inputs: Inputs, out_dir: Option<&Path>) -> Result<()> {
    let Inputs { config, rounds, split, mut manifest } = inputs;
    let (train, _) = split_indices(&rounds, &split)?;
    let mut engine = Engine::new(config)?;
    let (mut q, mut y) = (Vec::new(), Vec::new());
    for &idx in &train {
        let outcome = engine.run_round(&rounds[idx])?;
        if let Some(truth) = &rounds[idx].truth {
            q.push(outcome.posteriors.0);
            y.push(truth.clone());
        }
    }
    let threshold = tune_threshold(&q, &y)?;
    let train_jaccard =
        q.iter().zip(&y).map(|(q, y)| jaccard_indicator(y, &decide(q, threshold))).sum::<f64>() / q.len() as f64;
    let file = ThresholdFile { threshold, n_train: train.len(), n_train_labelled: q.len(), train_jaccard };
    if let Some(dir) = out_dir {
        create_dir(dir)?;
        let mut json = serde_json::to_string_pretty(&file)?;
        json.push('\n');
        write_output(dir, "threshold.json", json.as_bytes(), &mut manifest)?;
        write_manifest(dir, &manifest)?;
    }
    println!(
        "threshold {threshold:.2} (training Jaccard {train_jaccard:.4} over {} labelled rounds)",
        file.n_train_labelled
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// rerun

pub fn rerun(manifest_path: &Path, out_dir: &Path) -> Result<()> {
    let recorded = RunManifest::load(manifest_path)?;
    match recorded.command.as_str() {
        "simulate" => {
            let sim = recorded.sim_config.clone().ok_or_else(|| invalid("manifest has no sim config"))?;
            let profiles = recorded.profiles.clone().ok_or_else(|| invalid("manifest has no profiles"))?;
            let mut fresh = recorded.clone();
            fresh.outputs.clear();
            run_simulate(sim, profiles, out_dir, &mut fresh)?;
        }
        "replay" => run_replay(inputs_from_manifest(&recorded)?, out_dir)?,
        "ablate" => run_ablate(inputs_from_manifest(&recorded)?, out_dir)?,
        "tune-threshold" => run_tune_threshold(inputs_from_manifest(&recorded)?, Some(out_dir))?,
        other => return Err(invalid(format!("manifest names unknown command {other:?}"))),
    }
    let fresh = RunManifest::load(&out_dir.join(crate::manifest::MANIFEST_FILE))?;
    let mismatched: Vec<&String> = recorded
        .outputs
        .iter()
        .filter(|(name, hash)| fresh.outputs.get(*name) != Some(hash))
        .map(|(name, _)| name)
        .collect();
    if !mismatched.is_empty() {
        anyhow::bail!("outputs differ from the recorded run: {mismatched:?}");
    }
    println!("all {} outputs match the recorded run", recorded.outputs.len());
    Ok(())
}
