//! Analytic gradient of the per-target loss with respect to every entry of
//! the adjacency matrix, differentiated through the degree normalization,
//! plus the finite-difference oracle used to verify it.
//!
//! The derivative treats the adjacency as a continuous unsymmetrized matrix:
//! perturbing `A[i][j]` moves one entry and one row sum, and symmetry is
//! restored afterwards by averaging with the transpose.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::gcn::{target_loss, GcnModel};
use crate::graph::{FeatureMatrix, LabelAssignment};

/// Symmetric per-link gradient matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkGradient {
    g: Array2<f64>,
}

impl LinkGradient {
    pub fn matrix(&self) -> &Array2<f64> {
        &self.g
    }

    pub fn len(&self) -> usize {
        self.g.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.g.nrows() == 0
    }
}

/// Average a raw gradient matrix with its transpose and zero the diagonal.
pub fn symmetrize(raw: &Array2<f64>) -> LinkGradient {
    let n = raw.nrows();
    assert_eq!(n, raw.ncols(), "gradient matrix must be square");
    let mut g = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (raw[[i, j]] + raw[[j, i]]);
            g[[i, j]] = avg;
            g[[j, i]] = avg;
        }
    }
    LinkGradient { g }
}

/// Gradient of the summed cross-entropy of the given `(node, class)` seeds
/// with respect to the raw adjacency. The single-target attack uses one
/// seed; multiple seeds exercise the same path for linearity checks.
pub(crate) fn adjacency_gradient_seeds(
    m: &GcnModel,
    a: &Array2<f64>,
    x: &FeatureMatrix,
    seeds: &[(usize, usize)],
) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension("adjacency must be square".into()));
    }
    if x.num_nodes() != n || x.dim() != m.input_dim() {
        return Err(Error::Dimension(format!(
            "features {}x{} incompatible with adjacency {n}x{n} and model input {}",
            x.num_nodes(),
            x.dim(),
            m.input_dim()
        )));
    }
    let f = m.num_classes();

    // Degrees of A + I and the normalized adjacency.
    let mut degree = Array1::zeros(n);
    let mut scale = Array1::zeros(n);
    for i in 0..n {
        let d: f64 = 1.0 + a.row(i).sum();
        degree[i] = d;
        scale[i] = d.powf(-0.5);
    }
    let mut a_bar = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let tilde = a[[i, j]] + if i == j { 1.0 } else { 0.0 };
            a_bar[[i, j]] = tilde * scale[i] * scale[j];
        }
    }

    // Forward pass with cached intermediates.
    let xw0 = x.matrix().dot(m.w0());
    let pre = a_bar.dot(&xw0);
    let hidden = pre.mapv(|v| if v > 0.0 { v } else { 0.0 });
    let hw1 = hidden.dot(m.w1());
    let logits = a_bar.dot(&hw1);

    // Softmax rows only matter where a seed sits, but computing all rows is
    // cheap and keeps the code straight.
    let mut probs = logits.clone();
    for mut row in probs.rows_mut() {
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

    // d(loss)/d(logits): softmax minus one-hot on the seeded rows.
    let mut delta = Array2::<f64>::zeros((n, f));
    for &(node, class) in seeds {
        if node >= n {
            return Err(Error::NodeOutOfRange { id: node, n });
        }
        if class >= f {
            return Err(Error::Dimension(format!(
                "class {class} out of range for {f} classes"
            )));
        }
        for c in 0..f {
            delta[[node, c]] += probs[[node, c]] - if c == class { 1.0 } else { 0.0 };
        }
    }

    // Gradient with respect to the normalized adjacency. It appears twice
    // in the forward pass, so two terms contribute.
    let mut grad_a_bar = delta.dot(&hw1.t());
    let mut d_hidden = a_bar.dot(&delta).dot(&m.w1().t());
    d_hidden.zip_mut_with(&pre, |g, &p| {
        if p <= 0.0 {
            *g = 0.0;
        }
    });
    grad_a_bar += &d_hidden.dot(&xw0.t());

    // Chain through the normalization. Perturbing A[i][j] scales the direct
    // entry by s_i * s_j and shifts row sum i, which rescales row i and
    // column i of the normalized matrix.
    let weighted = &grad_a_bar * &a_bar;
    let row_sums = weighted.sum_axis(ndarray::Axis(1));
    let col_sums = weighted.sum_axis(ndarray::Axis(0));
    let mut raw = Array2::zeros((n, n));
    for i in 0..n {
        let correction = (row_sums[i] + col_sums[i]) / (2.0 * degree[i]);
        for j in 0..n {
            raw[[i, j]] = grad_a_bar[[i, j]] * scale[i] * scale[j] - correction;
        }
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite adjacency gradient entry".into()));
    }
    Ok(raw)
}

/// Raw (unsymmetrized) gradient of the target node's loss with respect to
/// every adjacency entry.
pub fn adjacency_gradient(
    m: &GcnModel,
    a: &Array2<f64>,
    x: &FeatureMatrix,
    labels: &LabelAssignment,
    target: usize,
) -> Result<Array2<f64>> {
    let class = labels
        .class_of(target)
        .ok_or_else(|| Error::Config(format!("target node {target} is unlabeled")))?;
    adjacency_gradient_seeds(m, a, x, &[(target, class)])
}

/// Central finite difference of the target loss in a single adjacency entry
/// (the mirror entry stays fixed), evaluated through the full normalization.
/// Verification oracle only; it shares no code with the analytic path.
#[allow(clippy::too_many_arguments)]
pub fn finite_difference_oracle(
    m: &GcnModel,
    a: &Array2<f64>,
    x: &FeatureMatrix,
    labels: &LabelAssignment,
    target: usize,
    i: usize,
    j: usize,
    step: f64,
) -> Result<f64> {
    if i == j {
        return Err(Error::Config("oracle is undefined on the diagonal".into()));
    }
    if step <= 0.0 {
        return Err(Error::Config("step must be positive".into()));
    }
    let mut plus = a.clone();
    plus[[i, j]] += step;
    let mut minus = a.clone();
    minus[[i, j]] -= step;
    let l_plus = target_loss(m, &plus, x, labels, target)?;
    let l_minus = target_loss(m, &minus, x, labels, target)?;
    Ok((l_plus - l_minus) / (2.0 * step))
}
