//! Resolved run configurations and the implementation of each subcommand.
//! Every output embeds the hash of the semantic config that produced it, so
//! reruns with the same config are byte-identical and any file names its
//! run.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use mga_core::analysis::{link_analysis, link_analysis_csv, link_analysis_with};
use mga_core::attack::{
    perturbation_from_tsv, perturbation_to_tsv, run_attack, AttackConfig, Perturbation,
};
use mga_core::community::{
    deception_run, deception_success_step, label_propagation,
};
use mga_core::evaluation::{
    ablate_knowledge_cell, above_average_degree_targets, dataset_fingerprint, evaluate,
    select_targets, AblationCell, MissingMode, TargetStrategy,
};
use mga_core::gcn::{
    accuracy, forward, normalized_adjacency, split_labeled_nodes, train, GcnModel, TrainConfig,
};
use mga_core::graph::{edge_list_string, labels_string, LabelAssignment};
use mga_core::{seeds, Error, Result};

use crate::config::{config_hash, with_hash_header, require_file, DatasetSpec};

const ABLATION_P_MISS: [f64; 3] = [0.2, 0.5, 0.8];

fn write_text(dir: &Path, name: &str, body: String) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), body)?;
    Ok(())
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut body = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("serialization failed: {e}")))?;
    body.push('\n');
    fs::write(dir.join(name), body)?;
    Ok(())
}

fn file_digest(path: &str) -> Result<String> {
    let bytes = fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenRun {
    pub gen_n: usize,
    pub gen_k: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
struct GenMeta<'a> {
    config: &'a GenRun,
    config_hash: &'a str,
    dataset_fingerprint: String,
    nodes: usize,
    communities: usize,
    edges: usize,
}

pub fn cmd_gen(run: GenRun, out: &Path) -> Result<()> {
    let hash = config_hash(&run);
    let (g, labels) = mga_core::graph::generate_planted_partition(
        run.gen_n,
        run.gen_k,
        run.p_in,
        run.p_out,
        seeds::derive(run.seed, seeds::GENERATOR),
    )?;
    write_text(out, "edges.tsv", with_hash_header(&hash, &edge_list_string(&g)))?;
    write_text(out, "labels.tsv", with_hash_header(&hash, &labels_string(&labels)))?;
    let meta = GenMeta {
        config: &run,
        config_hash: &hash,
        dataset_fingerprint: dataset_fingerprint(&g, &labels),
        nodes: g.node_count(),
        communities: labels.num_classes(),
        edges: g.edge_count(),
    };
    write_json(out, "meta.json", &meta)?;
    println!("wrote {} nodes / {} edges to {}", g.node_count(), g.edge_count(), out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainRun {
    pub dataset: DatasetSpec,
    pub train: TrainConfig,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
struct TrainMetrics<'a> {
    config: &'a TrainRun,
    config_hash: &'a str,
    dataset_fingerprint: String,
    checkpoint: String,
    train_accuracy: f64,
    val_accuracy: f64,
    test_accuracy: f64,
    final_loss: f64,
    loss_history: &'a [f64],
}

pub fn cmd_train(run: TrainRun, out: &Path) -> Result<()> {
    let hash = config_hash(&run);
    let (g, labels, x) = run.dataset.load(run.seed, true)?;
    let labels = labels.expect("labels required");
    let (model, history) = train(&g, &x, &labels, &run.train)?;

    let split = split_labeled_nodes(
        &labels,
        run.train.train_fraction,
        run.train.val_fraction,
        seeds::derive(run.train.seed, seeds::SPLIT),
    );
    let probs = forward(&model, &normalized_adjacency(&g), &x)?;
    fs::create_dir_all(out)?;
    model.save(out.join("model.bin"))?;
    let metrics = TrainMetrics {
        config: &run,
        config_hash: &hash,
        dataset_fingerprint: dataset_fingerprint(&g, &labels),
        checkpoint: "model.bin".into(),
        train_accuracy: accuracy(&probs, &labels, &split.train),
        val_accuracy: accuracy(&probs, &labels, &split.val),
        test_accuracy: accuracy(&probs, &labels, &split.test),
        final_loss: history.last().copied().unwrap_or(f64::NAN),
        loss_history: &history,
    };
    write_json(out, "train_metrics.json", &metrics)?;
    println!(
        "trained: accuracy train {:.3} / val {:.3} / test {:.3}",
        metrics.train_accuracy, metrics.val_accuracy, metrics.test_accuracy
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// attack
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackRun {
    pub dataset: DatasetSpec,
    /// SHA-256 of the checkpoint contents, so the config identifies the
    /// exact weights independent of the file's location.
    pub model_digest: String,
    pub attack: AttackConfig,
    pub strategy: TargetStrategy,
    pub count: usize,
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AttackReportFile {
    pub config: AttackRun,
    pub config_hash: String,
    pub dataset_fingerprint: String,
    pub budget: usize,
    pub asr: Vec<f64>,
    pub aml: f64,
    pub targets: Vec<Perturbation>,
}

pub fn cmd_attack(mut run: AttackRun, model_path: &str, out: &Path) -> Result<()> {
    require_file(model_path)?;
    run.model_digest = file_digest(model_path)?;
    let hash = config_hash(&run);
    let model = GcnModel::load(model_path)?;
    let (g, labels, x) = run.dataset.load(run.seed, true)?;
    let labels = labels.expect("labels required");

    let target_set = select_targets(
        &g,
        &labels,
        &model,
        &x,
        run.strategy,
        run.count,
        seeds::derive(run.seed, seeds::TARGETS),
    )?;
    let perturbations: Vec<Perturbation> = target_set
        .nodes
        .par_iter()
        .map(|&t| run_attack(&model, &g, &x, &labels, t, &run.attack))
        .collect::<Result<_>>()?;

    let mut report = evaluate(perturbations, run.attack.budget)?;
    report.config = serde_json::to_value(&run)
        .map_err(|e| Error::Config(format!("serialization failed: {e}")))?;
    report.dataset_fingerprint = dataset_fingerprint(&g, &labels);

    let file = AttackReportFile {
        config: run,
        config_hash: hash.clone(),
        dataset_fingerprint: report.dataset_fingerprint.clone(),
        budget: report.budget,
        asr: report.asr.clone(),
        aml: report.aml,
        targets: report.per_target,
    };
    write_json(out, "report.json", &file)?;

    let mut curve = String::from("budget,asr\n");
    for (idx, asr) in file.asr.iter().enumerate() {
        let _ = writeln!(curve, "{},{:?}", idx + 1, asr);
    }
    write_text(out, "asr_curve.csv", with_hash_header(&hash, &curve))?;

    let pert_dir = out.join("perturbations");
    fs::create_dir_all(&pert_dir)?;
    for p in &file.targets {
        let body = with_hash_header(&hash, &perturbation_to_tsv(p));
        fs::write(pert_dir.join(format!("target_{}.tsv", p.target)), body)?;
    }
    println!(
        "attacked {} targets: asr@{} = {:.3}, aml = {:.3}",
        file.targets.len(),
        file.budget,
        file.asr.last().copied().unwrap_or(0.0),
        file.aml
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalyzeRun {
    /// Hash of the attack run whose perturbations are analyzed.
    pub input_config_hash: String,
    pub gamma_max: usize,
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub train_seed: u64,
}

pub fn cmd_analyze(
    report_dir: &Path,
    gamma_max: Option<usize>,
    train_fraction: f64,
    val_fraction: f64,
    train_seed: Option<u64>,
    out: &Path,
) -> Result<()> {
    let report_path = report_dir.join("report.json");
    require_file(&report_path.to_string_lossy())?;
    let report: AttackReportFile = serde_json::from_str(&fs::read_to_string(&report_path)?)
        .map_err(|e| Error::Config(format!("unreadable report.json: {e}")))?;
    let (g, labels, _) = report.config.dataset.load(report.config.seed, true)?;
    let labels = labels.expect("labels required");

    // The perturbation files, not the JSON echo, are the analysis input.
    let pert_dir = report_dir.join("perturbations");
    if !pert_dir.is_dir() {
        return Err(Error::Config(format!(
            "no perturbations directory under {}",
            report_dir.display()
        )));
    }
    let mut by_target: BTreeMap<usize, PathBuf> = BTreeMap::new();
    for entry in fs::read_dir(&pert_dir)? {
        let path = entry?.path();
        let name = path.file_name().unwrap_or_default().to_string_lossy().to_string();
        if let Some(id) = name
            .strip_prefix("target_")
            .and_then(|s| s.strip_suffix(".tsv"))
        {
            let target: usize = id
                .parse()
                .map_err(|_| Error::Config(format!("bad perturbation file name {name}")))?;
            by_target.insert(target, path);
        }
    }
    if by_target.is_empty() {
        return Err(Error::Config(format!(
            "no perturbation files in {}",
            pert_dir.display()
        )));
    }
    let mut perturbations = Vec::new();
    for (&target, path) in &by_target {
        let class = labels
            .class_of(target)
            .ok_or_else(|| Error::Config(format!("target node {target} is unlabeled")))?;
        let text = fs::read_to_string(path)?;
        let p = perturbation_from_tsv(&text, target, class).map_err(|e| match e {
            Error::Parse { line, message, .. } => Error::Parse {
                path: path.display().to_string(),
                line,
                message,
            },
            other => other,
        })?;
        perturbations.push(p);
    }

    let run = AnalyzeRun {
        input_config_hash: report.config_hash.clone(),
        gamma_max: gamma_max.unwrap_or(report.budget),
        train_fraction,
        val_fraction,
        train_seed: train_seed.unwrap_or(report.config.seed),
    };
    let hash = config_hash(&run);

    let rows = link_analysis(&g, &perturbations, &labels, run.gamma_max)?;
    write_text(out, "link_analysis.csv", with_hash_header(&hash, &link_analysis_csv(&rows)))?;

    // Second variant: peers restricted to the training split, with each
    // target's class still taken from the ground truth.
    let split = split_labeled_nodes(
        &labels,
        run.train_fraction,
        run.val_fraction,
        seeds::derive(run.train_seed, seeds::SPLIT),
    );
    let train_labels = LabelAssignment::new(
        split
            .train
            .iter()
            .filter_map(|&n| labels.class_of(n).map(|c| (n, c))),
        labels.num_classes(),
    )?;
    let train_rows =
        link_analysis_with(&g, &perturbations, &train_labels, &labels, run.gamma_max)?;
    write_text(
        out,
        "link_analysis_train.csv",
        with_hash_header(&hash, &link_analysis_csv(&train_rows)),
    )?;
    println!("analyzed {} perturbations over {} gamma rows", perturbations.len(), rows.len());
    Ok(())
}

// ---------------------------------------------------------------------------
// ablate-knowledge
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblateRun {
    pub dataset: DatasetSpec,
    pub model_digest: String,
    pub attack: AttackConfig,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
struct AblationFile<'a> {
    config: &'a AblateRun,
    config_hash: &'a str,
    dataset_fingerprint: String,
    targets: Vec<usize>,
    cells: &'a [AblationCell],
}

pub fn cmd_ablate(mut run: AblateRun, model_path: &str, out: &Path) -> Result<()> {
    require_file(model_path)?;
    run.model_digest = file_digest(model_path)?;
    let hash = config_hash(&run);
    let model = GcnModel::load(model_path)?;
    let (g, labels, x) = run.dataset.load(run.seed, true)?;
    let labels = labels.expect("labels required");

    let targets = above_average_degree_targets(
        &g,
        &labels,
        &model,
        &x,
        seeds::derive(run.seed, seeds::TARGETS),
    )?;
    let mut cells = Vec::new();
    for mode in [MissingMode::Keep1Hop, MissingMode::Random] {
        for p_miss in ABLATION_P_MISS {
            cells.push(ablate_knowledge_cell(
                &model,
                &g,
                &x,
                &labels,
                &targets,
                &run.attack,
                mode,
                p_miss,
                seeds::derive(run.seed, seeds::MISSING_LINKS),
            )?);
        }
    }

    let mut csv = String::from("mode,p_miss,asr,aml\n");
    for cell in &cells {
        let _ = writeln!(csv, "{},{:?},{:?},{:?}", cell.mode, cell.p_miss, cell.asr, cell.aml);
    }
    write_text(out, "ablation.csv", with_hash_header(&hash, &csv))?;
    let file = AblationFile {
        config: &run,
        config_hash: &hash,
        dataset_fingerprint: dataset_fingerprint(&g, &labels),
        targets,
        cells: &cells,
    };
    write_json(out, "ablation.json", &file)?;
    println!("ablation grid complete: {} cells", cells.len());
    Ok(())
}

// ---------------------------------------------------------------------------
// deceive
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeceiveRun {
    pub dataset: DatasetSpec,
    pub train: TrainConfig,
    pub attack: AttackConfig,
    pub strategy: TargetStrategy,
    pub count: usize,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
struct DeceptionRow {
    target: usize,
    original_community: usize,
    final_community: usize,
    changed_at_full_budget: bool,
    success_step: Option<usize>,
    perturbation: Perturbation,
}

#[derive(Debug, Serialize)]
struct DeceptionFile<'a> {
    config: &'a DeceiveRun,
    config_hash: &'a str,
    detector: &'a str,
    num_communities: usize,
    asr: f64,
    aml: f64,
    rows: Vec<DeceptionRow>,
}

pub fn cmd_deceive(run: DeceiveRun, out: &Path) -> Result<()> {
    let hash = config_hash(&run);
    let (g, _, x) = run.dataset.load(run.seed, false)?;
    let detector_seed = seeds::derive(run.seed, seeds::DETECTOR);
    let detected = label_propagation(&g, detector_seed)?;
    let labels = detected.to_labels();

    // One surrogate for target selection; deception_run retrains the
    // identical model per target from the same seeds.
    let split = mga_core::gcn::stratified_split(
        &labels,
        run.train.train_fraction,
        run.train.val_fraction,
        seeds::derive(run.train.seed, seeds::SPLIT),
    );
    let (model, _) = mga_core::gcn::train_with_split(&g, &x, &labels, &split, &run.train)?;
    let target_set = select_targets(
        &g,
        &labels,
        &model,
        &x,
        run.strategy,
        run.count,
        seeds::derive(run.seed, seeds::TARGETS),
    )?;

    let outcomes: Vec<(usize, mga_core::community::DeceptionOutcome, Option<usize>)> =
        target_set
            .nodes
            .par_iter()
            .map(|&t| {
                let outcome =
                    deception_run(&g, &detected, t, &run.attack, &run.train, detector_seed)?;
                let step = deception_success_step(
                    &g,
                    &detected,
                    t,
                    &outcome.perturbation.steps,
                    detector_seed,
                )?;
                Ok((t, outcome, step))
            })
            .collect::<Result<_>>()?;

    // The per-budget curve treats "detector flips within the first k
    // rewirings" as the success event.
    let pseudo: Vec<Perturbation> = outcomes
        .iter()
        .map(|(t, outcome, step)| Perturbation {
            target: *t,
            steps: outcome.perturbation.steps.clone(),
            success_step: *step,
        })
        .collect();
    let report = evaluate(pseudo, run.attack.budget)?;

    let rows: Vec<DeceptionRow> = outcomes
        .into_iter()
        .map(|(target, outcome, step)| DeceptionRow {
            target,
            original_community: outcome.original_community,
            final_community: outcome.final_community,
            changed_at_full_budget: outcome.success,
            success_step: step,
            perturbation: outcome.perturbation,
        })
        .collect();

    let file = DeceptionFile {
        config: &run,
        config_hash: &hash,
        detector: "lpa",
        num_communities: detected.num_communities(),
        asr: report.asr_at(run.attack.budget),
        aml: report.aml,
        rows,
    };
    write_json(out, "deception.json", &file)?;
    let mut csv = String::from("detector,method,mode,asr,aml\n");
    let _ = writeln!(
        csv,
        "lpa,{},{},{:?},{:?}",
        run.attack.method, run.attack.mode, file.asr, file.aml
    );
    write_text(out, "deception.csv", with_hash_header(&hash, &csv))?;
    write_text(out, "partition.tsv", with_hash_header(&hash, &detected.to_tsv()))?;
    println!(
        "deception over {} targets: asr = {:.3}, aml = {:.3} ({} communities)",
        file.rows.len(),
        file.asr,
        file.aml,
        detected.num_communities()
    );
    Ok(())
}

