//! The momentum gradient attack loop and its plain-gradient baseline:
//! per-iteration link gradients, momentum accumulation, constrained argmax
//! candidate selection, and single-link rewiring under a fixed budget.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::adjgrad::{adjacency_gradient, symmetrize, LinkGradient};
use crate::error::{Error, Result};
use crate::gcn::{forward, normalize_dense, GcnModel};
use crate::graph::{FeatureMatrix, Graph, LabelAssignment};

/// Which node pairs an attack may rewire relative to the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackMode {
    Unlimited,
    Direct,
    Indirect,
}

impl AttackMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "unlimited" => Ok(AttackMode::Unlimited),
            "direct" => Ok(AttackMode::Direct),
            "indirect" => Ok(AttackMode::Indirect),
            other => Err(Error::Config(format!("unknown attack mode '{other}'"))),
        }
    }

    fn allows(self, i: usize, j: usize, target: usize) -> bool {
        match self {
            AttackMode::Unlimited => true,
            AttackMode::Direct => i == target || j == target,
            AttackMode::Indirect => i != target && j != target,
        }
    }
}

impl std::fmt::Display for AttackMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            AttackMode::Unlimited => "unlimited",
            AttackMode::Direct => "direct",
            AttackMode::Indirect => "indirect",
        };
        f.write_str(s)
    }
}

/// Momentum attack or the plain fast-gradient baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackMethod {
    Mga,
    Fga,
}

impl AttackMethod {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mga" => Ok(AttackMethod::Mga),
            "fga" => Ok(AttackMethod::Fga),
            other => Err(Error::Config(format!("unknown attack method '{other}'"))),
        }
    }
}

impl std::fmt::Display for AttackMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AttackMethod::Mga => "mga",
            AttackMethod::Fga => "fga",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeAction {
    Add,
    Delete,
}

impl std::fmt::Display for EdgeAction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EdgeAction::Add => "add",
            EdgeAction::Delete => "delete",
        })
    }
}

/// Attack parameters. `budget` is the maximum number of rewired links and
/// the iteration cap; `mu` is the momentum decay factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub budget: usize,
    pub mu: f64,
    pub mode: AttackMode,
    pub method: AttackMethod,
    pub seed: u64,
    /// Stop iterating once the target flips. Off by default so the full
    /// trace backs per-budget success curves; the success step is the same
    /// either way.
    pub early_exit: bool,
    /// Skip deletions that would drop the target to degree zero, keeping
    /// success attributable to rewiring rather than disconnection.
    pub forbid_target_isolation: bool,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            budget: 20,
            mu: 0.5,
            mode: AttackMode::Unlimited,
            method: AttackMethod::Mga,
            seed: 0,
            early_exit: false,
            forbid_target_isolation: true,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(Error::Config(format!("mu {} outside [0, 1]", self.mu)));
        }
        if self.budget == 0 {
            return Err(Error::Config("budget must be at least 1".into()));
        }
        Ok(())
    }
}

/// Exponentially decayed accumulation of L1-normalized link gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkMomentum {
    m: Array2<f64>,
    k: usize,
}

impl LinkMomentum {
    pub fn matrix(&self) -> &Array2<f64> {
        &self.m
    }

    pub fn iteration(&self) -> usize {
        self.k
    }
}

/// Momentum recurrence: the first iteration adopts the gradient as-is;
/// afterwards the decayed previous momentum accumulates the gradient scaled
/// by its whole-matrix L1 norm (zero gradients contribute nothing).
pub fn momentum_update(
    prev: Option<&LinkMomentum>,
    gradient: &LinkGradient,
    mu: f64,
    k: usize,
) -> Result<LinkMomentum> {
    match (prev, k) {
        (None, 1) => Ok(LinkMomentum {
            m: gradient.matrix().clone(),
            k: 1,
        }),
        (Some(prev), k) if k >= 2 => {
            if prev.k + 1 != k {
                return Err(Error::Config(format!(
                    "momentum iteration jumped from {} to {k}",
                    prev.k
                )));
            }
            let l1: f64 = gradient.matrix().iter().map(|v| v.abs()).sum();
            let mut m = prev.m.mapv(|v| mu * v);
            if l1 > 0.0 {
                m.zip_mut_with(gradient.matrix(), |acc, &g| *acc += g / l1);
            }
            Ok(LinkMomentum { m, k })
        }
        _ => Err(Error::Config(format!(
            "momentum update needs a previous state exactly when k > 1 (k = {k})"
        ))),
    }
}

/// Sign convention for rewiring: strictly positive momentum adds the link,
/// anything else (including zero) deletes it.
pub fn sign_of(momentum: f64) -> i8 {
    if momentum > 0.0 {
        1
    } else {
        -1
    }
}

/// Scan unordered pairs in decreasing absolute score and return the first
/// pair that is unused, passes the mode filter, and whose sign-implied
/// action is feasible on the current adjacency. Returns `None` once every
/// pair with nonzero score is exhausted.
pub fn select_candidate(
    selection: &Array2<f64>,
    g: &Graph,
    mode: AttackMode,
    target: usize,
    used: &BTreeSet<(usize, usize)>,
    forbid_target_isolation: bool,
) -> Option<(usize, usize, EdgeAction)> {
    let n = g.node_count();
    let mut best: Option<(f64, usize, usize, EdgeAction)> = None;
    for i in 0..n {
        for j in (i + 1)..n {
            let score = selection[[i, j]];
            let magnitude = score.abs();
            if magnitude == 0.0 {
                continue;
            }
            // Lexicographic tie-break falls out of scan order: only a
            // strictly larger magnitude replaces the current best.
            if let Some((m, ..)) = best {
                if magnitude <= m {
                    continue;
                }
            }
            if used.contains(&(i, j)) || !mode.allows(i, j, target) {
                continue;
            }
            let action = if sign_of(score) > 0 {
                EdgeAction::Add
            } else {
                EdgeAction::Delete
            };
            let feasible = match action {
                EdgeAction::Add => !g.has_edge(i, j),
                EdgeAction::Delete => g.has_edge(i, j),
            };
            if !feasible {
                continue;
            }
            if forbid_target_isolation
                && action == EdgeAction::Delete
                && (i == target || j == target)
                && g.degree(target) == 1
            {
                continue;
            }
            best = Some((magnitude, i, j, action));
        }
    }
    best.map(|(_, i, j, action)| (i, j, action))
}

/// Apply a single rewiring to a copy of the graph. The action must be
/// feasible: adds require the link to be absent, deletes present.
pub fn apply_modification(g: &Graph, i: usize, j: usize, action: EdgeAction) -> Result<Graph> {
    if i == j {
        return Err(Error::InfeasibleModification(format!(
            "self-loop on node {i}"
        )));
    }
    let present = g.has_edge(i, j);
    match (action, present) {
        (EdgeAction::Add, true) => Err(Error::InfeasibleModification(format!(
            "({i},{j}) already linked"
        ))),
        (EdgeAction::Delete, false) => Err(Error::InfeasibleModification(format!(
            "({i},{j}) not linked"
        ))),
        _ => {
            let mut out = g.clone();
            out.set_edge(i, j, action == EdgeAction::Add);
            Ok(out)
        }
    }
}

/// One applied rewiring plus the target's loss and predicted label on the
/// adjacency that results from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackStep {
    pub i: usize,
    pub j: usize,
    pub action: EdgeAction,
    pub loss: f64,
    pub predicted: usize,
}

/// Ordered rewiring sequence for one target, replayable against the
/// original graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub target: usize,
    pub steps: Vec<AttackStep>,
    /// 1-based index of the first step after which the target was
    /// misclassified, if any.
    pub success_step: Option<usize>,
}

/// Run the iterative attack against a frozen model: recompute the link
/// gradient on the current adversarial adjacency, fold it into the momentum
/// (or use it directly for the gradient baseline), rewire the selected
/// pair, and record the trace. Deterministic in its inputs.
pub fn run_attack(
    model: &GcnModel,
    g: &Graph,
    x: &FeatureMatrix,
    labels: &LabelAssignment,
    target: usize,
    cfg: &AttackConfig,
) -> Result<Perturbation> {
    cfg.validate()?;
    let class = labels
        .class_of(target)
        .ok_or_else(|| Error::Config(format!("target node {target} is unlabeled")))?;

    let clean_probs = forward(model, &normalize_dense(&g.to_f64()), x)?;
    if clean_probs.predicted_label(target) != class {
        return Err(Error::TargetMisclassified { target });
    }

    let mut working = g.clone();
    let mut used: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut momentum: Option<LinkMomentum> = None;
    let mut steps = Vec::new();
    let mut success_step = None;

    for k in 1..=cfg.budget {
        let raw = adjacency_gradient(model, &working.to_f64(), x, labels, target)?;
        let gradient = symmetrize(&raw);
        let selection = match cfg.method {
            AttackMethod::Mga => {
                momentum = Some(momentum_update(momentum.as_ref(), &gradient, cfg.mu, k)?);
                momentum.as_ref().expect("momentum just set").matrix().clone()
            }
            AttackMethod::Fga => gradient.matrix().clone(),
        };

        let Some((i, j, action)) = select_candidate(
            &selection,
            &working,
            cfg.mode,
            target,
            &used,
            cfg.forbid_target_isolation,
        ) else {
            break;
        };
        working = apply_modification(&working, i, j, action)?;
        used.insert((i, j));

        let probs = forward(model, &normalize_dense(&working.to_f64()), x)?;
        let predicted = probs.predicted_label(target);
        let loss = -probs.prob(target, class).ln();
        if predicted != class && success_step.is_none() {
            success_step = Some(k);
        }
        steps.push(AttackStep {
            i,
            j,
            action,
            loss,
            predicted,
        });
        if cfg.early_exit && success_step.is_some() {
            break;
        }
    }

    Ok(Perturbation {
        target,
        steps,
        success_step,
    })
}

/// One step per line: `k i j action loss predicted_label`, tab-separated.
pub fn perturbation_to_tsv(p: &Perturbation) -> String {
    let mut out = String::new();
    for (idx, step) in p.steps.iter().enumerate() {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{:?}\t{}",
            idx + 1,
            step.i,
            step.j,
            step.action,
            step.loss,
            step.predicted
        );
    }
    out
}

/// Parse the tab-separated trace back into a perturbation. `true_class`
/// rebuilds the success step from the recorded predicted labels.
pub fn perturbation_from_tsv(text: &str, target: usize, true_class: usize) -> Result<Perturbation> {
    let mut steps = Vec::new();
    let mut success_step = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let parse_err = |message: String| Error::Parse {
            path: "<perturbation>".into(),
            line: idx + 1,
            message,
        };
        if fields.len() != 6 {
            return Err(parse_err(format!("expected 6 fields, found {}", fields.len())));
        }
        let k: usize = fields[0]
            .parse()
            .map_err(|_| parse_err(format!("invalid step index '{}'", fields[0])))?;
        if k != steps.len() + 1 {
            return Err(parse_err(format!(
                "step index {k} out of order (expected {})",
                steps.len() + 1
            )));
        }
        let i: usize = fields[1]
            .parse()
            .map_err(|_| parse_err(format!("invalid node '{}'", fields[1])))?;
        let j: usize = fields[2]
            .parse()
            .map_err(|_| parse_err(format!("invalid node '{}'", fields[2])))?;
        let action = match fields[3] {
            "add" => EdgeAction::Add,
            "delete" => EdgeAction::Delete,
            other => return Err(parse_err(format!("invalid action '{other}'"))),
        };
        let loss: f64 = fields[4]
            .parse()
            .map_err(|_| parse_err(format!("invalid loss '{}'", fields[4])))?;
        let predicted: usize = fields[5]
            .parse()
            .map_err(|_| parse_err(format!("invalid label '{}'", fields[5])))?;
        if predicted != true_class && success_step.is_none() {
            success_step = Some(k);
        }
        steps.push(AttackStep {
            i,
            j,
            action,
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

/// Replay the perturbation on the original graph and assert every contract
/// the attack promises: feasible non-repeating steps, preserved structural
/// invariants, mode compliance, and an exact modification count.
pub fn verify_perturbation(
    original: &Graph,
    p: &Perturbation,
    mode: AttackMode,
) -> Result<()> {
    let mut working = original.clone();
    let mut seen: BTreeSet<(usize, usize)> = BTreeSet::new();
    for step in &p.steps {
        let key = (step.i.min(step.j), step.i.max(step.j));
        if step.i == step.j {
            return Err(Error::Config(format!("self-loop step on node {}", step.i)));
        }
        if !seen.insert(key) {
            return Err(Error::Config(format!("pair {key:?} modified twice")));
        }
        if !mode.allows(step.i, step.j, p.target) {
            return Err(Error::Config(format!(
                "pair {key:?} violates {mode} mode for target {}",
                p.target
            )));
        }
        working = apply_modification(&working, step.i, step.j, step.action)?;
        working.validate()?;
    }
    // The adversarial adjacency differs from the original in exactly one
    // unordered pair per step.
    let mut diff = 0usize;
    for u in 0..original.node_count() {
        for v in (u + 1)..original.node_count() {
            if original.has_edge(u, v) != working.has_edge(u, v) {
                diff += 1;
            }
        }
    }
    if diff != p.steps.len() {
        return Err(Error::Config(format!(
            "{} modified pairs but {} recorded steps",
            diff,
            p.steps.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcn::{train, TrainConfig};
    use crate::graph::generate_planted_partition;
    use ndarray::Array2;

    fn zero_diag(values: Vec<((usize, usize), f64)>, n: usize) -> Array2<f64> {
        let mut m = Array2::zeros((n, n));
        for ((i, j), v) in values {
            m[[i, j]] = v;
            m[[j, i]] = v;
        }
        m
    }

    fn lgn_from(matrix: Array2<f64>) -> LinkGradient {
        symmetrize(&matrix)
    }

    #[test]
    fn momentum_first_iteration_is_identity() {
        let g = lgn_from(zero_diag(vec![((0, 1), 0.5), ((1, 2), -0.25)], 3));
        let m = momentum_update(None, &g, 0.9, 1).unwrap();
        assert_eq!(m.matrix(), g.matrix());
        assert_eq!(m.iteration(), 1);
    }

    #[test]
    fn momentum_second_iteration_hand_computed() {
        let first = lgn_from(zero_diag(vec![((0, 1), 0.5)], 3));
        let m1 = momentum_update(None, &first, 0.5, 1).unwrap();
        let second = lgn_from(zero_diag(vec![((0, 1), 0.3), ((0, 2), -0.1)], 3));
        let m2 = momentum_update(Some(&m1), &second, 0.5, 2).unwrap();
        // L1 norm over the whole matrix counts both triangles: 0.8.
        assert!((m2.matrix()[[0, 1]] - 0.625).abs() < 1e-12);
        assert!((m2.matrix()[[0, 2]] - (-0.125)).abs() < 1e-12);
    }

    #[test]
    fn momentum_zero_gradient_contributes_nothing() {
        let first = lgn_from(zero_diag(vec![((0, 1), 0.4)], 3));
        let m1 = momentum_update(None, &first, 0.5, 1).unwrap();
        let zero = lgn_from(Array2::zeros((3, 3)));
        let m2 = momentum_update(Some(&m1), &zero, 0.5, 2).unwrap();
        assert!((m2.matrix()[[0, 1]] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn momentum_stays_symmetric_with_zero_diagonal() {
        let g1 = lgn_from(zero_diag(vec![((0, 1), 0.4), ((1, 3), -0.7)], 4));
        let g2 = lgn_from(zero_diag(vec![((0, 2), 0.9), ((2, 3), 0.1)], 4));
        let g3 = lgn_from(zero_diag(vec![((0, 3), -0.2)], 4));
        let mut m = momentum_update(None, &g1, 0.5, 1).unwrap();
        for (k, g) in [(2, &g2), (3, &g3)] {
            m = momentum_update(Some(&m), g, 0.5, k).unwrap();
            for i in 0..4 {
                assert_eq!(m.matrix()[[i, i]], 0.0);
                for j in 0..4 {
                    assert_eq!(m.matrix()[[i, j]], m.matrix()[[j, i]]);
                }
            }
        }
    }

    #[test]
    fn momentum_rejects_inconsistent_state() {
        let g = lgn_from(zero_diag(vec![((0, 1), 1.0)], 2));
        assert!(momentum_update(None, &g, 0.5, 2).is_err());
        let m1 = momentum_update(None, &g, 0.5, 1).unwrap();
        assert!(momentum_update(Some(&m1), &g, 0.5, 1).is_err());
        assert!(momentum_update(Some(&m1), &g, 0.5, 3).is_err());
    }

    #[test]
    fn sign_convention() {
        assert_eq!(sign_of(0.7), 1);
        assert_eq!(sign_of(-0.2), -1);
        assert_eq!(sign_of(0.0), -1);
    }

    #[test]
    fn selection_skips_infeasible_maximum() {
        // Largest score sits on an existing edge with positive sign, so the
        // implied add is infeasible and the next pair wins.
        let g = Graph::from_edges(4, [(0, 1)]).unwrap();
        let scores = zero_diag(vec![((0, 1), 0.9), ((2, 3), 0.5)], 4);
        let got = select_candidate(
            &scores,
            &g,
            AttackMode::Unlimited,
            0,
            &BTreeSet::new(),
            true,
        );
        assert_eq!(got, Some((2, 3, EdgeAction::Add)));
    }

    #[test]
    fn selection_respects_direct_mode_filter() {
        let g = Graph::empty(4);
        let scores = zero_diag(vec![((1, 2), 0.8), ((2, 3), 0.7)], 4);
        let got = select_candidate(&scores, &g, AttackMode::Direct, 0, &BTreeSet::new(), true);
        assert_eq!(got, None);
    }

    #[test]
    fn selection_single_negative_entry_deletes() {
        let g = Graph::from_edges(3, [(1, 2)]).unwrap();
        let scores = zero_diag(vec![((1, 2), -0.4)], 3);
        let got = select_candidate(
            &scores,
            &g,
            AttackMode::Unlimited,
            0,
            &BTreeSet::new(),
            true,
        );
        assert_eq!(got, Some((1, 2, EdgeAction::Delete)));
    }

    #[test]
    fn selection_honors_used_set_and_isolation_guard() {
        let g = Graph::from_edges(3, [(0, 1)]).unwrap();
        let scores = zero_diag(vec![((0, 1), -0.9), ((1, 2), 0.1)], 3);
        let mut used = BTreeSet::new();
        used.insert((0usize, 1usize));
        let got = select_candidate(&scores, &g, AttackMode::Unlimited, 0, &used, true);
        assert_eq!(got, Some((1, 2, EdgeAction::Add)));

        // Target 0 has degree 1: deleting (0,1) would isolate it.
        let got = select_candidate(
            &scores,
            &g,
            AttackMode::Unlimited,
            0,
            &BTreeSet::new(),
            true,
        );
        assert_eq!(got, Some((1, 2, EdgeAction::Add)));
        let got = select_candidate(
            &scores,
            &g,
            AttackMode::Unlimited,
            0,
            &BTreeSet::new(),
            false,
        );
        assert_eq!(got, Some((0, 1, EdgeAction::Delete)));
    }

    #[test]
    fn apply_modification_contracts() {
        let path = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let tri = apply_modification(&path, 0, 2, EdgeAction::Add).unwrap();
        assert!(tri.has_edge(0, 2));
        assert_eq!(tri.edge_count(), 3);

        let single = Graph::from_edges(2, [(0, 1)]).unwrap();
        let empty = apply_modification(&single, 0, 1, EdgeAction::Delete).unwrap();
        assert_eq!(empty.edge_count(), 0);

        let there = apply_modification(&path, 0, 2, EdgeAction::Add).unwrap();
        let back = apply_modification(&there, 0, 2, EdgeAction::Delete).unwrap();
        assert_eq!(back, path);

        assert!(apply_modification(&path, 0, 1, EdgeAction::Add).is_err());
        assert!(apply_modification(&path, 0, 2, EdgeAction::Delete).is_err());
    }

    fn pick_correct_target(
        model: &GcnModel,
        g: &Graph,
        x: &FeatureMatrix,
        labels: &LabelAssignment,
    ) -> usize {
        let probs = forward(model, &normalize_dense(&g.to_f64()), x).unwrap();
        (0..g.node_count())
            .find(|&v| labels.class_of(v) == Some(probs.predicted_label(v)))
            .expect("some node is correctly classified")
    }

    #[test]
    fn attack_rejects_misclassified_target() {
        let (g, labels) = generate_planted_partition(12, 2, 0.9, 0.05, 3).unwrap();
        let x = FeatureMatrix::identity(12);
        let cfg = TrainConfig {
            train_fraction: 0.3,
            val_fraction: 0.2,
            epochs: 80,
            seed: 3,
            ..TrainConfig::default()
        };
        let (model, _) = train(&g, &x, &labels, &cfg).unwrap();
        let probs = forward(&model, &normalize_dense(&g.to_f64()), &x).unwrap();
        if let Some(bad) =
            (0..12).find(|&v| labels.class_of(v) != Some(probs.predicted_label(v)))
        {
            let err = run_attack(&model, &g, &x, &labels, bad, &AttackConfig::default());
            assert!(matches!(err, Err(Error::TargetMisclassified { .. })));
        }
    }

    #[test]
    fn mga_with_zero_mu_matches_fga_stepwise() {
        for seed in [11u64, 12, 13] {
            let (g, labels) = generate_planted_partition(24, 2, 0.6, 0.05, seed).unwrap();
            let x = FeatureMatrix::identity(24);
            let tcfg = TrainConfig {
                train_fraction: 0.3,
                val_fraction: 0.2,
                epochs: 100,
                seed,
                ..TrainConfig::default()
            };
            let (model, _) = train(&g, &x, &labels, &tcfg).unwrap();
            let target = pick_correct_target(&model, &g, &x, &labels);
            let base = AttackConfig {
                budget: 6,
                ..AttackConfig::default()
            };
            let mga = run_attack(
                &model,
                &g,
                &x,
                &labels,
                target,
                &AttackConfig {
                    mu: 0.0,
                    method: AttackMethod::Mga,
                    ..base.clone()
                },
            )
            .unwrap();
            let fga = run_attack(
                &model,
                &g,
                &x,
                &labels,
                target,
                &AttackConfig {
                    method: AttackMethod::Fga,
                    ..base
                },
            )
            .unwrap();
            assert_eq!(mga, fga, "seed {seed}");
        }
    }

    #[test]
    fn budget_one_matches_fga_first_choice_for_any_mu() {
        let (g, labels) = generate_planted_partition(20, 2, 0.6, 0.05, 9).unwrap();
        let x = FeatureMatrix::identity(20);
        let tcfg = TrainConfig {
            train_fraction: 0.3,
            val_fraction: 0.2,
            epochs: 100,
            seed: 9,
            ..TrainConfig::default()
        };
        let (model, _) = train(&g, &x, &labels, &tcfg).unwrap();
        let target = pick_correct_target(&model, &g, &x, &labels);
        let fga = run_attack(
            &model,
            &g,
            &x,
            &labels,
            target,
            &AttackConfig {
                budget: 1,
                method: AttackMethod::Fga,
                ..AttackConfig::default()
            },
        )
        .unwrap();
        for mu in [0.0, 0.3, 1.0] {
            let mga = run_attack(
                &model,
                &g,
                &x,
                &labels,
                target,
                &AttackConfig {
                    budget: 1,
                    mu,
                    method: AttackMethod::Mga,
                    ..AttackConfig::default()
                },
            )
            .unwrap();
            assert_eq!(mga.steps.len(), 1);
            assert_eq!(mga.steps, fga.steps, "mu {mu}");
        }
    }

    #[test]
    fn attack_trace_satisfies_all_invariants() {
        for mode in [AttackMode::Unlimited, AttackMode::Direct, AttackMode::Indirect] {
            let (g, labels) = generate_planted_partition(24, 2, 0.6, 0.05, 21).unwrap();
            let x = FeatureMatrix::identity(24);
            let tcfg = TrainConfig {
                train_fraction: 0.3,
                val_fraction: 0.2,
                epochs: 100,
                seed: 21,
                ..TrainConfig::default()
            };
            let (model, _) = train(&g, &x, &labels, &tcfg).unwrap();
            let target = pick_correct_target(&model, &g, &x, &labels);
            let p = run_attack(
                &model,
                &g,
                &x,
                &labels,
                target,
                &AttackConfig {
                    budget: 8,
                    mode,
                    ..AttackConfig::default()
                },
            )
            .unwrap();
            verify_perturbation(&g, &p, mode).unwrap();
            match mode {
                AttackMode::Direct => {
                    assert!(p.steps.iter().all(|s| s.i == target || s.j == target));
                }
                AttackMode::Indirect => {
                    assert!(p.steps.iter().all(|s| s.i != target && s.j != target));
                }
                AttackMode::Unlimited => {}
            }
        }
    }

    #[test]
    fn early_exit_preserves_success_step() {
        let (g, labels) = generate_planted_partition(24, 2, 0.6, 0.05, 33).unwrap();
        let x = FeatureMatrix::identity(24);
        let tcfg = TrainConfig {
            train_fraction: 0.3,
            val_fraction: 0.2,
            epochs: 100,
            seed: 33,
            ..TrainConfig::default()
        };
        let (model, _) = train(&g, &x, &labels, &tcfg).unwrap();
        let target = pick_correct_target(&model, &g, &x, &labels);
        let full = run_attack(
            &model,
            &g,
            &x,
            &labels,
            target,
            &AttackConfig {
                budget: 12,
                ..AttackConfig::default()
            },
        )
        .unwrap();
        let early = run_attack(
            &model,
            &g,
            &x,
            &labels,
            target,
            &AttackConfig {
                budget: 12,
                early_exit: true,
                ..AttackConfig::default()
            },
        )
        .unwrap();
        assert_eq!(full.success_step, early.success_step);
        if let Some(step) = early.success_step {
            assert_eq!(early.steps.len(), step);
        }
    }

    #[test]
    fn tsv_round_trip_reconstructs_the_perturbation() {
        let (g, labels) = generate_planted_partition(20, 2, 0.6, 0.05, 5).unwrap();
        let x = FeatureMatrix::identity(20);
        let tcfg = TrainConfig {
            train_fraction: 0.3,
            val_fraction: 0.2,
            epochs: 100,
            seed: 5,
            ..TrainConfig::default()
        };
        let (model, _) = train(&g, &x, &labels, &tcfg).unwrap();
        let target = pick_correct_target(&model, &g, &x, &labels);
        let p = run_attack(
            &model,
            &g,
            &x,
            &labels,
            target,
            &AttackConfig {
                budget: 5,
                ..AttackConfig::default()
            },
        )
        .unwrap();
        let text = perturbation_to_tsv(&p);
        let class = labels.class_of(target).unwrap();
        let parsed = perturbation_from_tsv(&text, target, class).unwrap();
        assert_eq!(p, parsed);
    }

    #[test]
    fn tsv_parser_reports_corrupt_lines() {
        let err = perturbation_from_tsv("1\t0\t1\tadd\tnot-a-number\t0\n", 0, 0);
        assert!(matches!(err, Err(Error::Parse { line: 1, .. })));
        let err = perturbation_from_tsv("2\t0\t1\tadd\t0.5\t0\n", 0, 0);
        assert!(matches!(err, Err(Error::Parse { .. })));
    }
}
