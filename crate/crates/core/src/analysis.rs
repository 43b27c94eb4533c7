//! Selected-link analysis: for the gamma-th modification across all
//! targets, the mean endpoint degree, the link's betweenness, and the
//! target's mean hop distance to same- and different-class labeled nodes.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::attack::{EdgeAction, Perturbation};
use crate::error::{Error, Result};
use crate::evaluation::replay_perturbation;
use crate::graph::{bfs_distances, edge_betweenness, Graph, LabelAssignment};

/// Metrics for one gamma. `n_t` is the number of targets whose attack
/// reached that step; shorter traces are excluded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkAnalysisRow {
    pub gamma: usize,
    pub degree: f64,
    pub betweenness: f64,
    pub same_class_distance: f64,
    pub diff_class_distance: f64,
    pub n_t: usize,
}

fn eligible(perturbations: &[Perturbation], gamma: usize) -> Result<Vec<&Perturbation>> {
    if gamma == 0 {
        return Err(Error::Config("gamma is 1-based".into()));
    }
    let chosen: Vec<&Perturbation> = perturbations
        .iter()
        .filter(|p| p.steps.len() >= gamma)
        .collect();
    if chosen.is_empty() {
        return Err(Error::Config(format!(
            "no perturbation has {gamma} or more steps"
        )));
    }
    Ok(chosen)
}

/// Mean over targets of the endpoint degree sum of the gamma-th modified
/// pair, with degrees taken just before that modification.
pub fn degree_metric(
    original: &Graph,
    perturbations: &[Perturbation],
    gamma: usize,
) -> Result<f64> {
    let chosen = eligible(perturbations, gamma)?;
    let mut total = 0.0;
    for p in &chosen {
        let before = replay_perturbation(original, &p.steps[..gamma - 1])?;
        let step = &p.steps[gamma - 1];
        total += (before.degree(step.i) + before.degree(step.j)) as f64;
    }
    Ok(total / chosen.len() as f64)
}

/// Mean over targets of the gamma-th link's edge betweenness. Deleted links
/// are scored on the graph just before the deletion; added links just after
/// the addition, so the scored link always exists.
pub fn betweenness_metric(
    original: &Graph,
    perturbations: &[Perturbation],
    gamma: usize,
) -> Result<f64> {
    let chosen = eligible(perturbations, gamma)?;
    let mut total = 0.0;
    for p in &chosen {
        let step = &p.steps[gamma - 1];
        let state = match step.action {
            EdgeAction::Delete => replay_perturbation(original, &p.steps[..gamma - 1])?,
            EdgeAction::Add => replay_perturbation(original, &p.steps[..gamma])?,
        };
        let key = (step.i.min(step.j), step.i.max(step.j));
        let scores = edge_betweenness(&state);
        total += scores
            .get(&key)
            .copied()
            .ok_or_else(|| Error::Config(format!("scored link {key:?} does not exist")))?;
    }
    Ok(total / chosen.len() as f64)
}

/// Mean hop distance from each target to the labeled nodes of its own class
/// and of the other classes, after the first gamma modifications have been
/// applied. Unreachable nodes count as `n` hops; targets with no labeled
/// peers in a category are excluded from that category's average.
pub fn class_distance_metrics(
    original: &Graph,
    perturbations: &[Perturbation],
    labels: &LabelAssignment,
    gamma: usize,
) -> Result<(f64, f64)> {
    class_distance_metrics_with(original, perturbations, labels, labels, gamma)
}

/// Like [`class_distance_metrics`], but the averaging runs over
/// `peer_labels` (e.g. the training split only) while each target's own
/// class still comes from `target_labels` (the ground truth).
pub fn class_distance_metrics_with(
    original: &Graph,
    perturbations: &[Perturbation],
    peer_labels: &LabelAssignment,
    target_labels: &LabelAssignment,
    gamma: usize,
) -> Result<(f64, f64)> {
    let chosen = eligible(perturbations, gamma)?;
    let cap = original.node_count() as f64;
    let mut same_total = 0.0;
    let mut same_count = 0usize;
    let mut diff_total = 0.0;
    let mut diff_count = 0usize;
    for p in &chosen {
        let class = target_labels
            .class_of(p.target)
            .ok_or_else(|| Error::Config(format!("target node {} is unlabeled", p.target)))?;
        let state = replay_perturbation(original, &p.steps[..gamma])?;
        let dist = bfs_distances(&state, p.target);
        let mut same = (0.0, 0usize);
        let mut diff = (0.0, 0usize);
        for (node, node_class) in peer_labels.labeled() {
            if node == p.target {
                continue;
            }
            let d = dist[node].map_or(cap, |d| d as f64);
            if node_class == class {
                same.0 += d;
                same.1 += 1;
            } else {
                diff.0 += d;
                diff.1 += 1;
            }
        }
        if same.1 > 0 {
            same_total += same.0 / same.1 as f64;
            same_count += 1;
        }
        if diff.1 > 0 {
            diff_total += diff.0 / diff.1 as f64;
            diff_count += 1;
        }
    }
    if same_count == 0 || diff_count == 0 {
        return Err(Error::Config(
            "no target has labeled nodes in both class categories".into(),
        ));
    }
    Ok((same_total / same_count as f64, diff_total / diff_count as f64))
}

/// Full per-gamma table for `gamma = 1..=max_gamma`, stopping early once no
/// trace is long enough.
pub fn link_analysis(
    original: &Graph,
    perturbations: &[Perturbation],
    labels: &LabelAssignment,
    max_gamma: usize,
) -> Result<Vec<LinkAnalysisRow>> {
    link_analysis_with(original, perturbations, labels, labels, max_gamma)
}

/// Per-gamma table with a restricted peer-label view (see
/// [`class_distance_metrics_with`]).
pub fn link_analysis_with(
    original: &Graph,
    perturbations: &[Perturbation],
    peer_labels: &LabelAssignment,
    target_labels: &LabelAssignment,
    max_gamma: usize,
) -> Result<Vec<LinkAnalysisRow>> {
    let longest = perturbations.iter().map(|p| p.steps.len()).max().unwrap_or(0);
    let mut rows = Vec::new();
    for gamma in 1..=max_gamma.min(longest) {
        let n_t = perturbations.iter().filter(|p| p.steps.len() >= gamma).count();
        let degree = degree_metric(original, perturbations, gamma)?;
        let betweenness = betweenness_metric(original, perturbations, gamma)?;
        let (same, diff) = class_distance_metrics_with(
            original,
            perturbations,
            peer_labels,
            target_labels,
            gamma,
        )?;
        rows.push(LinkAnalysisRow {
            gamma,
            degree,
            betweenness,
            same_class_distance: same,
            diff_class_distance: diff,
            n_t,
        });
    }
    Ok(rows)
}

/// CSV body: `gamma,D,B,A_s,A_d,n_t`.
pub fn link_analysis_csv(rows: &[LinkAnalysisRow]) -> String {
    let mut out = String::from("gamma,D,B,A_s,A_d,n_t\n");
    for row in rows {
        let _ = writeln!(
            out,
            "{},{:?},{:?},{:?},{:?},{}",
            row.gamma,
            row.degree,
            row.betweenness,
            row.same_class_distance,
            row.diff_class_distance,
            row.n_t
        );
    }
    out
}
