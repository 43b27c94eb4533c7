//! Two-layer graph convolutional classifier: symmetric degree
//! normalization, forward pass, full-batch training with best-validation
//! checkpointing, and the per-target loss the attack differentiates.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, Graph, LabelAssignment};
use crate::seeds;

const CHECKPOINT_MAGIC: &[u8; 8] = b"GCNCKPT\x01";

/// Trained two-layer GCN: input-to-hidden weights `w0` and hidden-to-output
/// weights `w1`. Immutable once training finishes.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel {
    w0: Array2<f64>,
    w1: Array2<f64>,
}

impl GcnModel {
    pub fn new(w0: Array2<f64>, w1: Array2<f64>) -> Result<Self> {
        if w0.ncols() != w1.nrows() {
            return Err(Error::Dimension(format!(
                "hidden width mismatch: w0 is {}x{}, w1 is {}x{}",
                w0.nrows(),
                w0.ncols(),
                w1.nrows(),
                w1.ncols()
            )));
        }
        Ok(GcnModel { w0, w1 })
    }

    pub fn input_dim(&self) -> usize {
        self.w0.nrows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w0.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.w1.ncols()
    }

    pub fn w0(&self) -> &Array2<f64> {
        &self.w0
    }

    pub fn w1(&self) -> &Array2<f64> {
        &self.w1
    }

    /// Write the checkpoint: magic, dimensions, then row-major little-endian
    /// `w0` and `w1`. Round-trips bit-exactly.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        file.write_all(CHECKPOINT_MAGIC)?;
        for dim in [self.input_dim(), self.hidden_dim(), self.num_classes()] {
            file.write_all(&(dim as u64).to_le_bytes())?;
        }
        for w in [&self.w0, &self.w1] {
            for &value in w.iter() {
                file.write_all(&value.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut file = std::fs::File::open(path)?;
        let mut magic = [0u8; 8];
        file.read_exact(&mut magic)
            .map_err(|_| Error::Checkpoint("file too short for header".into()))?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic bytes".into()));
        }
        let mut dims = [0usize; 3];
        for dim in &mut dims {
            let mut buf = [0u8; 8];
            file.read_exact(&mut buf)
                .map_err(|_| Error::Checkpoint("truncated dimensions".into()))?;
            *dim = u64::from_le_bytes(buf) as usize;
        }
        let [d, h, f] = dims;
        let mut read_matrix = |rows: usize, cols: usize| -> Result<Array2<f64>> {
            let mut data = Vec::with_capacity(rows * cols);
            let mut buf = [0u8; 8];
            for _ in 0..rows * cols {
                file.read_exact(&mut buf)
                    .map_err(|_| Error::Checkpoint("truncated weights".into()))?;
                data.push(f64::from_le_bytes(buf));
            }
            Array2::from_shape_vec((rows, cols), data)
                .map_err(|e| Error::Checkpoint(e.to_string()))
        };
        let w0 = read_matrix(d, h)?;
        let w1 = read_matrix(h, f)?;
        GcnModel::new(w0, w1)
    }
}

/// Training hyperparameters. Defaults are the standard two-layer GCN
/// settings (16 hidden units, weight decay 5e-4, 200 epochs, 10%/10%
/// train/validation split) with a learning rate sized for plain full-batch
/// descent: 0.5. The 0.01 seen in common GCN recipes assumes an adaptive
/// optimizer and stalls under plain descent.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub hidden: usize,
    pub seed: u64,
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.5,
            epochs: 200,
            hidden: 16,
            seed: 0,
            train_fraction: 0.1,
            val_fraction: 0.1,
            weight_decay: 5e-4,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.train_fraction <= 0.0
            || self.val_fraction <= 0.0
            || self.train_fraction + self.val_fraction >= 1.0
        {
            return Err(Error::Config(format!(
                "split fractions must be positive and sum below 1 (got {} and {})",
                self.train_fraction, self.val_fraction
            )));
        }
        if self.hidden == 0 || self.epochs == 0 {
            return Err(Error::Config("hidden width and epochs must be positive".into()));
        }
        Ok(())
    }
}

/// Row-stochastic softmax outputs of the classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassProbabilities {
    p: Array2<f64>,
}

impl ClassProbabilities {
    pub fn matrix(&self) -> &Array2<f64> {
        &self.p
    }

    pub fn prob(&self, node: usize, class: usize) -> f64 {
        self.p[[node, class]]
    }

    /// Argmax over the node's row; ties go to the lowest class index.
    pub fn predicted_label(&self, node: usize) -> usize {
        let row = self.p.row(node);
        let mut best = 0;
        for (c, &value) in row.iter().enumerate() {
            if value > row[best] {
                best = c;
            }
        }
        best
    }

    pub fn num_classes(&self) -> usize {
        self.p.ncols()
    }
}

/// Disjoint train/validation/test node sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffle the labeled nodes with the given seed and cut
/// `floor(train_fraction)` / `floor(val_fraction)`; the remainder tests.
pub fn split_labeled_nodes(
    labels: &LabelAssignment,
    train_fraction: f64,
    val_fraction: f64,
    seed: u64,
) -> Split {
    let mut nodes: Vec<usize> = labels.labeled().map(|(n, _)| n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    nodes.shuffle(&mut rng);
    let total = nodes.len();
    let n_train = (train_fraction * total as f64).floor() as usize;
    let n_val = (val_fraction * total as f64).floor() as usize;
    let train = nodes[..n_train].to_vec();
    let val = nodes[n_train..n_train + n_val].to_vec();
    let test = nodes[n_train + n_val..].to_vec();
    Split { train, val, test }
}

/// Per-class split that guarantees at least one training node per class
/// (used when classes come from detected communities, which can be tiny).
pub fn stratified_split(
    labels: &LabelAssignment,
    train_fraction: f64,
    val_fraction: f64,
    seed: u64,
) -> Split {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = Split {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for class in 0..labels.num_classes() {
        let mut members: Vec<usize> = labels
            .labeled()
            .filter(|&(_, c)| c == class)
            .map(|(n, _)| n)
            .collect();
        if members.is_empty() {
            continue;
        }
        members.shuffle(&mut rng);
        let size = members.len();
        let n_train = ((train_fraction * size as f64).floor() as usize).max(1).min(size);
        let n_val = ((val_fraction * size as f64).floor() as usize)
            .max(1)
            .min(size - n_train);
        split.train.extend(&members[..n_train]);
        split.val.extend(&members[n_train..n_train + n_val]);
        split.test.extend(&members[n_train + n_val..]);
    }
    split
}

/// Symmetric degree normalization of an arbitrary square matrix: add the
/// identity, then scale by the inverse square roots of the row sums. The
/// continuous form is what the adjacency gradient differentiates through.
pub fn normalize_dense(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "adjacency must be square");
    let mut scale = Array1::zeros(n);
    for i in 0..n {
        let degree: f64 = 1.0 + a.row(i).sum();
        scale[i] = degree.powf(-0.5);
    }
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let tilde = a[[i, j]] + if i == j { 1.0 } else { 0.0 };
            out[[i, j]] = tilde * scale[i] * scale[j];
        }
    }
    out
}

/// Normalized adjacency of a graph (self-loops added, symmetric scaling).
pub fn normalized_adjacency(g: &Graph) -> Array2<f64> {
    normalize_dense(&g.to_f64())
}

fn relu(m: &Array2<f64>) -> Array2<f64> {
    m.mapv(|v| if v > 0.0 { v } else { 0.0 })
}

fn row_softmax(z: &Array2<f64>) -> Array2<f64> {
    let mut p = z.clone();
    for mut row in p.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    p
}

fn check_forward_dims(m: &GcnModel, a_bar: &Array2<f64>, x: &FeatureMatrix) -> Result<()> {
    if a_bar.nrows() != a_bar.ncols() {
        return Err(Error::Dimension("normalized adjacency must be square".into()));
    }
    if x.num_nodes() != a_bar.nrows() {
        return Err(Error::Dimension(format!(
            "feature rows {} != node count {}",
            x.num_nodes(),
            a_bar.nrows()
        )));
    }
    if x.dim() != m.input_dim() {
        return Err(Error::Dimension(format!(
            "feature width {} != model input width {}",
            x.dim(),
            m.input_dim()
        )));
    }
    Ok(())
}

/// Full forward pass: `softmax(A_bar * relu(A_bar * X * W0) * W1)`.
pub fn forward(m: &GcnModel, a_bar: &Array2<f64>, x: &FeatureMatrix) -> Result<ClassProbabilities> {
    check_forward_dims(m, a_bar, x)?;
    let hidden = relu(&a_bar.dot(x.matrix()).dot(&m.w0));
    let logits = a_bar.dot(&hidden).dot(&m.w1);
    Ok(ClassProbabilities {
        p: row_softmax(&logits),
    })
}

/// Cross-entropy of the target node's true class under the model, with the
/// raw (possibly continuous) adjacency normalized inside.
pub fn target_loss(
    m: &GcnModel,
    a: &Array2<f64>,
    x: &FeatureMatrix,
    labels: &LabelAssignment,
    target: usize,
) -> Result<f64> {
    let class = labels
        .class_of(target)
        .ok_or_else(|| Error::Config(format!("target node {target} is unlabeled")))?;
    let probs = forward(m, &normalize_dense(a), x)?;
    Ok(-probs.prob(target, class).ln())
}

/// Predicted class of one node on the raw adjacency.
pub fn predict_label(
    m: &GcnModel,
    a: &Array2<f64>,
    x: &FeatureMatrix,
    node: usize,
) -> Result<usize> {
    let probs = forward(m, &normalize_dense(a), x)?;
    Ok(probs.predicted_label(node))
}

/// Fraction of `nodes` whose prediction matches the ground truth.
pub fn accuracy(probs: &ClassProbabilities, labels: &LabelAssignment, nodes: &[usize]) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    let correct = nodes
        .iter()
        .filter(|&&v| labels.class_of(v) == Some(probs.predicted_label(v)))
        .count();
    correct as f64 / nodes.len() as f64
}

/// Mean cross-entropy over `nodes` plus the analytic weight gradients.
/// Shared by the trainer and the gradient-check tests.
pub(crate) fn loss_and_weight_gradients(
    m: &GcnModel,
    a_bar: &Array2<f64>,
    x: &FeatureMatrix,
    labels: &LabelAssignment,
    nodes: &[usize],
) -> Result<(f64, Array2<f64>, Array2<f64>)> {
    check_forward_dims(m, a_bar, x)?;
    let n = a_bar.nrows();
    let f = m.num_classes();
    let pre = a_bar.dot(x.matrix()).dot(&m.w0);
    let hidden = relu(&pre);
    let logits = a_bar.dot(&hidden).dot(&m.w1);
    let p = row_softmax(&logits);

    let count = nodes.len() as f64;
    let mut loss = 0.0;
    let mut delta = Array2::<f64>::zeros((n, f));
    for &v in nodes {
        let class = labels
            .class_of(v)
            .ok_or_else(|| Error::Config(format!("node {v} is unlabeled")))?;
        loss -= p[[v, class]].ln();
        for c in 0..f {
            delta[[v, c]] = (p[[v, c]] - if c == class { 1.0 } else { 0.0 }) / count;
        }
    }
    loss /= count;

    let a_delta = a_bar.dot(&delta);
    let grad_w1 = hidden.t().dot(&a_delta);
    let mut d_pre = a_delta.dot(&m.w1.t());
    d_pre.zip_mut_with(&pre, |g, &m| {
        if m <= 0.0 {
            *g = 0.0;
        }
    });
    let grad_w0 = x.matrix().t().dot(&a_bar.dot(&d_pre));
    Ok((loss, grad_w0, grad_w1))
}

fn glorot_init(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let mut w = Array2::zeros((rows, cols));
    for i in 0..rows {
        for j in 0..cols {
            w[[i, j]] = rng.random_range(-limit..limit);
        }
    }
    w
}

/// Train on an explicit split. Full-batch gradient descent on the mean
/// cross-entropy of the training nodes plus L2 weight decay; returns the
/// weights from the epoch with the best validation accuracy (the final
/// weights when the validation set is empty) and the per-epoch loss history.
pub fn train_with_split(
    g: &Graph,
    x: &FeatureMatrix,
    labels: &LabelAssignment,
    split: &Split,
    cfg: &TrainConfig,
) -> Result<(GcnModel, Vec<f64>)> {
    cfg.validate()?;
    if split.train.is_empty() {
        return Err(Error::EmptyTrainingSplit);
    }
    let a_bar = normalized_adjacency(g);
    let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(cfg.seed, seeds::WEIGHT_INIT));
    let d = x.dim();
    let f = labels.num_classes();
    let mut model = GcnModel::new(
        glorot_init(d, cfg.hidden, &mut rng),
        glorot_init(cfg.hidden, f, &mut rng),
    )?;

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, GcnModel)> = None;
    for epoch in 1..=cfg.epochs {
        let (data_loss, mut grad_w0, mut grad_w1) =
            loss_and_weight_gradients(&model, &a_bar, x, labels, &split.train)?;
        let reg = 0.5
            * cfg.weight_decay
            * (model.w0.iter().map(|w| w * w).sum::<f64>()
                + model.w1.iter().map(|w| w * w).sum::<f64>());
        let loss = data_loss + reg;
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        history.push(loss);

        grad_w0.zip_mut_with(&model.w0, |g, &w| *g += cfg.weight_decay * w);
        grad_w1.zip_mut_with(&model.w1, |g, &w| *g += cfg.weight_decay * w);
        model.w0.zip_mut_with(&grad_w0, |w, &g| *w -= cfg.learning_rate * g);
        model.w1.zip_mut_with(&grad_w1, |w, &g| *w -= cfg.learning_rate * g);

        if !split.val.is_empty() {
            let probs = forward(&model, &a_bar, x)?;
            let val_acc = accuracy(&probs, labels, &split.val);
            // Ties go to the later epoch, so a flat validation curve still
            // returns the longest-trained weights.
            let improved = best.as_ref().is_none_or(|(acc, _)| val_acc >= *acc);
            if improved {
                best = Some((val_acc, model.clone()));
            }
        }
    }
    let model = best.map_or(model, |(_, m)| m);
    Ok((model, history))
}

/// Train with the seeded 10/10/80-style split drawn from the labeled nodes.
pub fn train(
    g: &Graph,
    x: &FeatureMatrix,
    labels: &LabelAssignment,
    cfg: &TrainConfig,
) -> Result<(GcnModel, Vec<f64>)> {
    cfg.validate()?;
    let split = split_labeled_nodes(
        labels,
        cfg.train_fraction,
        cfg.val_fraction,
        seeds::derive(cfg.seed, seeds::SPLIT),
    );
    train_with_split(g, x, labels, &split, cfg)
}
