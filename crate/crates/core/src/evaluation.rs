//! Target selection, success-rate and rewiring-count metrics, retrained
//! surrogate transfer, and the limited-knowledge ablation machinery.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attack::{
    apply_modification, run_attack, AttackConfig, AttackStep, EdgeAction, Perturbation,
};
use crate::error::{Error, Result};
use crate::gcn::{forward, normalize_dense, train, GcnModel, TrainConfig};
use crate::graph::{node_betweenness, FeatureMatrix, Graph, LabelAssignment};

/// How target nodes are picked from the correctly classified pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetStrategy {
    /// A seeded per-class sample.
    Uniform,
    /// Highest degree first.
    Hub,
    /// Highest node betweenness first.
    Bridge,
}

impl TargetStrategy {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(TargetStrategy::Uniform),
            "hub" => Ok(TargetStrategy::Hub),
            "bridge" => Ok(TargetStrategy::Bridge),
            other => Err(Error::Config(format!("unknown target strategy '{other}'"))),
        }
    }
}

impl std::fmt::Display for TargetStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TargetStrategy::Uniform => "uniform",
            TargetStrategy::Hub => "hub",
            TargetStrategy::Bridge => "bridge",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSet {
    pub strategy: TargetStrategy,
    pub nodes: Vec<usize>,
    pub seed: u64,
}

/// Pick attack targets among labeled nodes the model classifies correctly
/// on the clean graph. `count` is per class for the uniform strategy and a
/// total for hub/bridge.
pub fn select_targets(
    g: &Graph,
    labels: &LabelAssignment,
    model: &GcnModel,
    x: &FeatureMatrix,
    strategy: TargetStrategy,
    count: usize,
    seed: u64,
) -> Result<TargetSet> {
    let probs = forward(model, &normalize_dense(&g.to_f64()), x)?;
    let correct: Vec<usize> = labels
        .labeled()
        .filter(|&(node, class)| probs.predicted_label(node) == class)
        .map(|(node, _)| node)
        .collect();

    let nodes = match strategy {
        TargetStrategy::Uniform => {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut picked = Vec::new();
            for class in 0..labels.num_classes() {
                let mut pool: Vec<usize> = correct
                    .iter()
                    .copied()
                    .filter(|&v| labels.class_of(v) == Some(class))
                    .collect();
                if pool.len() < count {
                    return Err(Error::InsufficientTargets(format!(
                        "class {class} has {} correctly classified nodes, need {count}",
                        pool.len()
                    )));
                }
                pool.shuffle(&mut rng);
                picked.extend(pool.into_iter().take(count));
            }
            picked
        }
        TargetStrategy::Hub => {
            let mut pool = correct;
            pool.sort_by_key(|&v| (std::cmp::Reverse(g.degree(v)), v));
            if pool.len() < count {
                return Err(Error::InsufficientTargets(format!(
                    "{} correctly classified nodes, need {count}",
                    pool.len()
                )));
            }
            pool.truncate(count);
            pool
        }
        TargetStrategy::Bridge => {
            let centrality = node_betweenness(g);
            let mut pool = correct;
            pool.sort_by(|&a, &b| {
                centrality[b]
                    .partial_cmp(&centrality[a])
                    .expect("betweenness is finite")
                    .then(a.cmp(&b))
            });
            if pool.len() < count {
                return Err(Error::InsufficientTargets(format!(
                    "{} correctly classified nodes, need {count}",
                    pool.len()
                )));
            }
            pool.truncate(count);
            pool
        }
    };

    Ok(TargetSet {
        strategy,
        nodes,
        seed,
    })
}

/// Aggregated attack outcome: per-budget success curve and the mean number
/// of rewired links, with failures counted as the full budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub config: serde_json::Value,
    pub dataset_fingerprint: String,
    pub budget: usize,
    pub per_target: Vec<Perturbation>,
    /// `asr[r - 1]` is the success rate within budget `r`.
    pub asr: Vec<f64>,
    pub aml: f64,
}

impl AttackReport {
    pub fn asr_at(&self, budget: usize) -> f64 {
        self.asr[budget - 1]
    }
}

/// Fold per-target perturbations into the report metrics.
pub fn evaluate(perturbations: Vec<Perturbation>, budget: usize) -> Result<AttackReport> {
    if perturbations.is_empty() {
        return Err(Error::Config("cannot evaluate an empty perturbation list".into()));
    }
    if budget == 0 {
        return Err(Error::Config("budget must be at least 1".into()));
    }
    let total = perturbations.len() as f64;
    let mut asr = Vec::with_capacity(budget);
    for rho in 1..=budget {
        let hits = perturbations
            .iter()
            .filter(|p| p.success_step.is_some_and(|s| s <= rho))
            .count();
        asr.push(hits as f64 / total);
    }
    let aml = perturbations
        .iter()
        .map(|p| p.success_step.map_or(budget, |s| s.min(budget)) as f64)
        .sum::<f64>()
        / total;
    Ok(AttackReport {
        config: serde_json::Value::Null,
        dataset_fingerprint: String::new(),
        budget,
        per_target: perturbations,
        asr,
        aml,
    })
}

/// Rebuild the adversarial graph by applying every recorded step. Fails on
/// an infeasible step (a corrupted trace).
pub fn replay_perturbation(original: &Graph, steps: &[AttackStep]) -> Result<Graph> {
    let mut g = original.clone();
    for step in steps {
        g = apply_modification(&g, step.i, step.j, step.action)?;
    }
    Ok(g)
}

/// Replay one perturbation against an arbitrary model and report the first
/// step after which the model misclassifies the target.
pub fn replay_success_step(
    model: &GcnModel,
    original: &Graph,
    x: &FeatureMatrix,
    labels: &LabelAssignment,
    p: &Perturbation,
) -> Result<Option<usize>> {
    let class = labels
        .class_of(p.target)
        .ok_or_else(|| Error::Config(format!("target node {} is unlabeled", p.target)))?;
    let mut g = original.clone();
    for (idx, step) in p.steps.iter().enumerate() {
        g = apply_modification(&g, step.i, step.j, step.action)?;
        let probs = forward(model, &normalize_dense(&g.to_f64()), x)?;
        if probs.predicted_label(p.target) != class {
            return Ok(Some(idx + 1));
        }
    }
    Ok(None)
}

/// Success rate of existing perturbations against freshly retrained models,
/// one per seed. Measures whether the rewirings transfer beyond the
/// surrogate whose gradients produced them.
pub fn transfer_evaluate(
    perturbations: &[Perturbation],
    g: &Graph,
    x: &FeatureMatrix,
    labels: &LabelAssignment,
    base: &TrainConfig,
    retrain_seeds: &[u64],
) -> Result<Vec<f64>> {
    if perturbations.is_empty() {
        return Err(Error::Config("cannot transfer-evaluate an empty perturbation list".into()));
    }
    retrain_seeds
        .iter()
        .map(|&seed| {
            let cfg = TrainConfig { seed, ..base.clone() };
            let (fresh, _) = train(g, x, labels, &cfg)?;
            let mut hits = 0usize;
            for p in perturbations {
                if replay_success_step(&fresh, g, x, labels, p)?.is_some() {
                    hits += 1;
                }
            }
            Ok(hits as f64 / perturbations.len() as f64)
        })
        .collect()
}

/// Which links the attacker fails to observe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingMode {
    /// Links incident to the target are always visible; the rest drop
    /// independently with probability `p_miss`.
    Keep1Hop,
    /// Every link drops independently with probability `p_miss`.
    Random,
}

impl MissingMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "keep_1hop" => Ok(MissingMode::Keep1Hop),
            "random" => Ok(MissingMode::Random),
            other => Err(Error::Config(format!("unknown missing-link mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for MissingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MissingMode::Keep1Hop => "keep_1hop",
            MissingMode::Random => "random",
        })
    }
}

/// The attacker's partial view of the graph. One uniform draw per edge in
/// ascending order, so for a fixed seed the keep-1-hop view is a superset
/// of the random view.
pub fn limited_knowledge_graph(
    g: &Graph,
    mode: MissingMode,
    p_miss: f64,
    target: usize,
    seed: u64,
) -> Result<Graph> {
    use rand::{Rng, SeedableRng};
    if !(0.0..=1.0).contains(&p_miss) {
        return Err(Error::Config(format!("p_miss {p_miss} outside [0, 1]")));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut kept = Vec::new();
    for (u, v) in g.edges() {
        let drop = rng.random::<f64>() < p_miss;
        let protected = mode == MissingMode::Keep1Hop && (u == target || v == target);
        if protected || !drop {
            kept.push((u, v));
        }
    }
    Graph::from_edges(g.node_count(), kept)
}

/// Attack one target through a partial view, then replay the chosen steps
/// on the full graph. Steps that are infeasible on the full graph are
/// skipped and do not consume budget. Returns the perturbation as it
/// played out on the full graph.
#[allow(clippy::too_many_arguments)]
pub fn limited_knowledge_attack(
    model: &GcnModel,
    full: &Graph,
    x: &FeatureMatrix,
    labels: &LabelAssignment,
    target: usize,
    cfg: &AttackConfig,
    mode: MissingMode,
    p_miss: f64,
    seed: u64,
) -> Result<Perturbation> {
    let partial = limited_knowledge_graph(full, mode, p_miss, target, seed)?;
    let attempted = match run_attack(model, &partial, x, labels, target, cfg) {
        Ok(p) => p,
        // The partial view may already fool the surrogate; the attacker
        // cannot even start, which scores as a failed attack.
        Err(Error::TargetMisclassified { .. }) => Perturbation {
            target,
            steps: Vec::new(),
            success_step: None,
        },
        Err(e) => return Err(e),
    };

    let class = labels
        .class_of(target)
        .ok_or_else(|| Error::Config(format!("target node {target} is unlabeled")))?;
    let mut working = full.clone();
    let mut steps = Vec::new();
    let mut success_step = None;
    for step in &attempted.steps {
        let feasible = match step.action {
            EdgeAction::Add => !working.has_edge(step.i, step.j),
            EdgeAction::Delete => working.has_edge(step.i, step.j),
        };
        if !feasible {
            continue;
        }
        working = apply_modification(&working, step.i, step.j, step.action)?;
        let probs = forward(model, &normalize_dense(&working.to_f64()), x)?;
        let predicted = probs.predicted_label(target);
        let loss = -probs.prob(target, class).ln();
        if predicted != class && success_step.is_none() {
            success_step = Some(steps.len() + 1);
        }
        steps.push(AttackStep {
            i: step.i,
            j: step.j,
            action: step.action,
            loss,
            predicted,
        });
    }
    Ok(Perturbation {
        target,
        steps,
        success_step,
    })
}

/// One cell of the limited-knowledge grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub mode: MissingMode,
    pub p_miss: f64,
    pub asr: f64,
    pub aml: f64,
}

/// Run the limited-knowledge attack for every target and aggregate.
#[allow(clippy::too_many_arguments)]
pub fn ablate_knowledge_cell(
    model: &GcnModel,
    full: &Graph,
    x: &FeatureMatrix,
    labels: &LabelAssignment,
    targets: &[usize],
    cfg: &AttackConfig,
    mode: MissingMode,
    p_miss: f64,
    seed: u64,
) -> Result<AblationCell> {
    let perturbations: Vec<Perturbation> = targets
        .par_iter()
        .map(|&t| limited_knowledge_attack(model, full, x, labels, t, cfg, mode, p_miss, seed))
        .collect::<Result<_>>()?;
    let report = evaluate(perturbations, cfg.budget)?;
    Ok(AblationCell {
        mode,
        p_miss,
        asr: report.asr_at(cfg.budget),
        aml: report.aml,
    })
}

/// Targets for the limited-knowledge study: a seeded 10% sample of the
/// correctly classified nodes whose degree exceeds the graph average.
pub fn above_average_degree_targets(
    g: &Graph,
    labels: &LabelAssignment,
    model: &GcnModel,
    x: &FeatureMatrix,
    seed: u64,
) -> Result<Vec<usize>> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let degrees = g.degrees();
    let mean = degrees.iter().sum::<usize>() as f64 / g.node_count() as f64;
    let probs = forward(model, &normalize_dense(&g.to_f64()), x)?;
    let mut pool: Vec<usize> = labels
        .labeled()
        .filter(|&(node, class)| {
            degrees[node] as f64 > mean && probs.predicted_label(node) == class
        })
        .map(|(node, _)| node)
        .collect();
    if pool.is_empty() {
        return Err(Error::InsufficientTargets(
            "no correctly classified nodes above the average degree".into(),
        ));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    pool.shuffle(&mut rng);
    let count = ((g.node_count() as f64 * 0.1).floor() as usize)
        .clamp(1, pool.len());
    let mut picked = pool[..count].to_vec();
    picked.sort_unstable();
    Ok(picked)
}

/// Stable hex digest of the dataset: node count, edge set, labels.
pub fn dataset_fingerprint(g: &Graph, labels: &LabelAssignment) -> String {
    let mut hasher = Sha256::new();
    hasher.update(g.node_count().to_le_bytes());
    for (u, v) in g.edges() {
        hasher.update(u.to_le_bytes());
        hasher.update(v.to_le_bytes());
    }
    hasher.update(labels.num_classes().to_le_bytes());
    for (node, class) in labels.labeled() {
        hasher.update(node.to_le_bytes());
        hasher.update(class.to_le_bytes());
    }
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
