//! Community detection by asynchronous label propagation and the
//! community-deception evaluation built on top of the attack loop.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attack::{run_attack, AttackConfig, AttackStep, Perturbation};
use crate::error::{Error, Result};
use crate::evaluation::replay_perturbation;
use crate::gcn::{stratified_split, train_with_split, TrainConfig};
use crate::graph::{FeatureMatrix, Graph, LabelAssignment};
use crate::seeds;

/// A full partition of the nodes into contiguous community ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommunityPartition {
    assignment: Vec<usize>,
    num_communities: usize,
}

impl CommunityPartition {
    pub fn from_assignment(raw: &[usize]) -> Self {
        // Compact ids in order of first appearance.
        let mut remap: BTreeMap<usize, usize> = BTreeMap::new();
        let mut assignment = Vec::with_capacity(raw.len());
        for &label in raw {
            let next = remap.len();
            let id = *remap.entry(label).or_insert(next);
            assignment.push(id);
        }
        CommunityPartition {
            assignment,
            num_communities: remap.len(),
        }
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn num_communities(&self) -> usize {
        self.num_communities
    }

    pub fn community_of(&self, node: usize) -> usize {
        self.assignment[node]
    }

    pub fn community_size(&self, community: usize) -> usize {
        self.assignment.iter().filter(|&&c| c == community).count()
    }

    /// Detected communities as classifier classes.
    pub fn to_labels(&self) -> LabelAssignment {
        LabelAssignment::new(
            self.assignment.iter().enumerate().map(|(n, &c)| (n, c)),
            self.num_communities,
        )
        .expect("compact ids are always in range")
    }

    /// `node<TAB>community` per line.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (node, &community) in self.assignment.iter().enumerate() {
            let _ = writeln!(out, "{node}\t{community}");
        }
        out
    }
}

/// Asynchronous label propagation: every node starts with its own label and
/// repeatedly adopts the most frequent label among its neighbors, in a
/// seeded random sweep order with seeded uniform tie-breaking, until no node
/// wants to switch. Isolated nodes keep their own label.
pub fn label_propagation(g: &Graph, seed: u64) -> Result<CommunityPartition> {
    let n = g.node_count();
    let mut labels: Vec<usize> = (0..n).collect();
    if n == 0 {
        return Ok(CommunityPartition::from_assignment(&labels));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    let max_sweeps = 100 * n;
    for _ in 0..max_sweeps {
        order.shuffle(&mut rng);
        let mut changed = false;
        for &node in &order {
            let neighbors = g.neighbors(node);
            if neighbors.is_empty() {
                continue;
            }
            let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
            for v in neighbors {
                *counts.entry(labels[v]).or_insert(0) += 1;
            }
            let best = *counts.values().max().expect("nonempty neighbor counts");
            let candidates: Vec<usize> = counts
                .into_iter()
                .filter(|&(_, c)| c == best)
                .map(|(label, _)| label)
                .collect();
            if candidates.contains(&labels[node]) {
                continue;
            }
            let pick = candidates[rng.random_range(0..candidates.len())];
            labels[node] = pick;
            changed = true;
        }
        if !changed {
            return Ok(CommunityPartition::from_assignment(&labels));
        }
    }
    Err(Error::NonConvergence { sweeps: max_sweeps })
}

/// Check the label-propagation fixpoint: every node's label is among the
/// most frequent labels of its neighborhood.
pub fn is_lpa_fixpoint(g: &Graph, partition: &CommunityPartition) -> bool {
    for node in 0..g.node_count() {
        let neighbors = g.neighbors(node);
        if neighbors.is_empty() {
            continue;
        }
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for v in neighbors {
            *counts.entry(partition.community_of(v)).or_insert(0) += 1;
        }
        let best = *counts.values().max().expect("nonempty");
        let mine = counts
            .get(&partition.community_of(node))
            .copied()
            .unwrap_or(0);
        if mine < best {
            return false;
        }
    }
    true
}

/// Match new communities to old ones by greedy maximal node overlap. The
/// result maps each new community id to the old id it covers, or `None`
/// when the new community went unmatched.
pub fn match_communities(
    old: &CommunityPartition,
    new: &CommunityPartition,
) -> Vec<Option<usize>> {
    assert_eq!(old.assignment.len(), new.assignment.len());
    let mut overlap: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for node in 0..old.assignment.len() {
        *overlap
            .entry((old.community_of(node), new.community_of(node)))
            .or_insert(0) += 1;
    }
    let mut pairs: Vec<((usize, usize), usize)> = overlap.into_iter().collect();
    pairs.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut old_used = vec![false; old.num_communities()];
    let mut mapping = vec![None; new.num_communities()];
    for ((old_id, new_id), _) in pairs {
        if !old_used[old_id] && mapping[new_id].is_none() {
            old_used[old_id] = true;
            mapping[new_id] = Some(old_id);
        }
    }
    mapping
}

/// Result of one community-deception attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeceptionOutcome {
    pub perturbation: Perturbation,
    /// Whether the detector, re-run on the adversarial graph, places the
    /// target in a community that no longer matches its original one.
    pub success: bool,
    pub original_community: usize,
    pub final_community: usize,
}

/// Attack one target's community membership: train a surrogate on the
/// detected communities (stratified split so tiny communities keep a
/// training node), rewire with the configured attack, re-run the detector
/// with the same `detector_seed` the caller used for `detected`, and report
/// whether the target's overlap-matched community changed.
pub fn deception_run(
    g: &Graph,
    detected: &CommunityPartition,
    target: usize,
    attack_cfg: &AttackConfig,
    train_cfg: &TrainConfig,
    detector_seed: u64,
) -> Result<DeceptionOutcome> {
    let original_community = detected.community_of(target);
    if detected.community_size(original_community) < 2 {
        return Err(Error::Config(format!(
            "target {target} sits in a singleton community"
        )));
    }
    let perturbation = if attack_cfg.budget == 0 {
        Perturbation {
            target,
            steps: Vec::new(),
            success_step: None,
        }
    } else {
        let labels = detected.to_labels();
        let x = FeatureMatrix::identity(g.node_count());
        let split = stratified_split(
            &labels,
            train_cfg.train_fraction,
            train_cfg.val_fraction,
            seeds::derive(train_cfg.seed, seeds::SPLIT),
        );
        let (model, _) = train_with_split(g, &x, &labels, &split, train_cfg)?;
        run_attack(&model, g, &x, &labels, target, attack_cfg)?
    };

    let adversarial = replay_perturbation(g, &perturbation.steps)?;
    let after = label_propagation(&adversarial, detector_seed)?;
    let mapping = match_communities(detected, &after);
    let final_community = after.community_of(target);
    let success = mapping[final_community] != Some(original_community);
    Ok(DeceptionOutcome {
        perturbation,
        success,
        original_community,
        final_community,
    })
}

/// Smallest prefix of the steps whose replay already flips the target's
/// matched community, re-running the detector per prefix. Backs the
/// per-budget deception curves.
pub fn deception_success_step(
    g: &Graph,
    detected: &CommunityPartition,
    target: usize,
    steps: &[AttackStep],
    detector_seed: u64,
) -> Result<Option<usize>> {
    let original_community = detected.community_of(target);
    for gamma in 1..=steps.len() {
        let state = replay_perturbation(g, &steps[..gamma])?;
        let after = label_propagation(&state, detector_seed)?;
        let mapping = match_communities(detected, &after);
        if mapping[after.community_of(target)] != Some(original_community) {
            return Ok(Some(gamma));
        }
    }
    Ok(None)
}

/// Parse a `node<TAB>community` partition dump.
pub fn partition_from_tsv(text: &str, n: usize) -> Result<CommunityPartition> {
    let mut raw = vec![usize::MAX; n];
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let parse_err = |message: String| Error::Parse {
            path: "<partition>".into(),
            line: idx + 1,
            message,
        };
        let (a, b) = match (it.next(), it.next(), it.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => return Err(parse_err("expected 'node community'".into())),
        };
        let node: usize = a
            .parse()
            .map_err(|_| parse_err(format!("invalid node '{a}'")))?;
        let community: usize = b
            .parse()
            .map_err(|_| parse_err(format!("invalid community '{b}'")))?;
        if node >= n {
            return Err(Error::NodeOutOfRange { id: node, n });
        }
        raw[node] = community;
    }
    if raw.contains(&usize::MAX) {
        return Err(Error::Config("partition does not cover every node".into()));
    }
    Ok(CommunityPartition::from_assignment(&raw))
}
