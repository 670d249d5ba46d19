//! Primitive differentiable operations as explicit forward/backward pairs.
//!
//! Each op is a free function over [`DenseMatrix`]; the backward function
//! takes whatever the forward pass needs to retain (inputs, masks) plus the
//! upstream gradient, and returns gradients for each differentiable input.
//! The tape in [`super::tape`] composes these; they are also usable directly
//! for eval-only code paths where no gradient is wanted.

use rand::Rng;

use super::matrix::{matmul, matmul_nt, matmul_tn, DenseMatrix};

/// Whether stochastic ops (dropout) are live or pass-through.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

// ---------------------------------------------------------------------------
// Affine
// ---------------------------------------------------------------------------

/// `y = x * w + b`, with `b` (1 x cols) broadcast over rows. `b` optional.
pub fn affine_forward(x: &DenseMatrix, w: &DenseMatrix, b: Option<&DenseMatrix>) -> DenseMatrix {
    let mut y = matmul(x, w);
    if let Some(bias) = b {
        assert_eq!(bias.rows(), 1, "bias must be a row vector");
        assert_eq!(bias.cols(), y.cols(), "bias width mismatch");
        let brow = bias.row(0).to_vec();
        for i in 0..y.rows() {
            for (v, add) in y.row_mut(i).iter_mut().zip(&brow) {
                *v += add;
            }
        }
    }
    y
}

/// Gradients of the affine op: `(dx, dw, db)`.
pub fn affine_backward(
    x: &DenseMatrix,
    w: &DenseMatrix,
    dy: &DenseMatrix,
) -> (DenseMatrix, DenseMatrix, DenseMatrix) {
    let dx = matmul_nt(dy, w);
    let dw = matmul_tn(x, dy);
    let db = dy.column_sums();
    (dx, dw, db)
}

// ---------------------------------------------------------------------------
// Bias broadcast on its own (used by the literal two-step head variant)
// ---------------------------------------------------------------------------

/// `y = x + b` with `b` (1 x cols) broadcast over rows.
pub fn add_bias_forward(x: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let mut y = x.clone();
    assert_eq!(b.rows(), 1, "bias must be a row vector");
    assert_eq!(b.cols(), x.cols(), "bias width mismatch");
    for i in 0..y.rows() {
        for (v, add) in y.row_mut(i).iter_mut().zip(b.row(0)) {
            *v += add;
        }
    }
    y
}

/// Gradients of the bias broadcast: `(dx, db)`.
pub fn add_bias_backward(dy: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    (dy.clone(), dy.column_sums())
}

// ---------------------------------------------------------------------------
// ReLU
// ---------------------------------------------------------------------------

/// Elementwise `max(0, x)`.
pub fn relu_forward(x: &DenseMatrix) -> DenseMatrix {
    let mut y = x.clone();
    for v in y.as_mut_slice() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    y
}

/// Gradient passes where the forward *input* was strictly positive.
pub fn relu_backward(x: &DenseMatrix, dy: &DenseMatrix) -> DenseMatrix {
    assert_eq!(x.rows(), dy.rows());
    assert_eq!(x.cols(), dy.cols());
    let mut dx = dy.clone();
    for (d, &xv) in dx.as_mut_slice().iter_mut().zip(x.as_slice()) {
        if xv <= 0.0 {
            *d = 0.0;
        }
    }
    dx
}

// ---------------------------------------------------------------------------
// Dropout (inverted scaling)
// ---------------------------------------------------------------------------

/// Inverted dropout. In train mode each entry is zeroed with probability `p`
/// and survivors are scaled by `1 / (1 - p)`; in eval mode the input passes
/// through untouched. Returns `(y, mask)`; the mask already folds in the
/// survivor scaling so backward is a plain elementwise product.
pub fn dropout_forward<R: Rng>(
    x: &DenseMatrix,
    p: f64,
    mode: Mode,
    rng: &mut R,
) -> (DenseMatrix, DenseMatrix) {
    assert!((0.0..1.0).contains(&p), "dropout probability must be in [0, 1)");
    if mode == Mode::Eval || p == 0.0 {
        let mut mask = DenseMatrix::zeros(x.rows(), x.cols());
        mask.as_mut_slice().fill(1.0);
        return (x.clone(), mask);
    }
    let keep_scale = 1.0 / (1.0 - p);
    let mut mask = DenseMatrix::zeros(x.rows(), x.cols());
    for v in mask.as_mut_slice() {
        *v = if rng.gen::<f64>() < p { 0.0 } else { keep_scale };
    }
    let mut y = x.clone();
    for (v, &m) in y.as_mut_slice().iter_mut().zip(mask.as_slice()) {
        *v *= m;
    }
    (y, mask)
}

/// Gradient flows only through kept entries, with the same scaling.
pub fn dropout_backward(mask: &DenseMatrix, dy: &DenseMatrix) -> DenseMatrix {
    let mut dx = dy.clone();
    for (d, &m) in dx.as_mut_slice().iter_mut().zip(mask.as_slice()) {
        *d *= m;
    }
    dx
}

// ---------------------------------------------------------------------------
// Pooling / reshaping
// ---------------------------------------------------------------------------

/// Mean over all rows: `N x d -> 1 x d`.
pub fn mean_pool_rows(x: &DenseMatrix) -> DenseMatrix {
    segment_mean_forward(x, x.rows())
}

/// Scatter the pooled gradient back over the `rows` input rows.
pub fn mean_pool_rows_backward(dy: &DenseMatrix, rows: usize) -> DenseMatrix {
    segment_mean_backward(dy, rows)
}

/// Mean over fixed-length row segments: `(S*len) x d -> S x d`.
///
/// Row block `[s*len, (s+1)*len)` of the input averages into output row `s`.
pub fn segment_mean_forward(x: &DenseMatrix, len: usize) -> DenseMatrix {
    assert!(len > 0, "segment length must be positive");
    assert_eq!(x.rows() % len, 0, "rows not divisible by segment length");
    let segs = x.rows() / len;
    let inv = 1.0 / len as f64;
    let mut out = DenseMatrix::zeros(segs, x.cols());
    for s in 0..segs {
        for i in 0..len {
            let src = x.row(s * len + i);
            let dst = out.row_mut(s);
            for (d, v) in dst.iter_mut().zip(src) {
                *d += v;
            }
        }
        for d in out.row_mut(s) {
            *d *= inv;
        }
    }
    out
}

/// Gradient of [`segment_mean_forward`]: each input row in segment `s`
/// receives `dy[s] / len`.
pub fn segment_mean_backward(dy: &DenseMatrix, len: usize) -> DenseMatrix {
    let inv = 1.0 / len as f64;
    let mut dx = DenseMatrix::zeros(dy.rows() * len, dy.cols());
    for s in 0..dy.rows() {
        let src: Vec<f64> = dy.row(s).iter().map(|v| v * inv).collect();
        for i in 0..len {
            dx.row_mut(s * len + i).copy_from_slice(&src);
        }
    }
    dx
}

/// Concatenate matrices side by side (equal row counts).
pub fn concat_cols(parts: &[&DenseMatrix]) -> DenseMatrix {
    let rows = parts.first().map_or(0, |m| m.rows());
    let cols: usize = parts.iter().map(|m| m.cols()).sum();
    let mut out = DenseMatrix::zeros(rows, cols);
    for i in 0..rows {
        let dst = out.row_mut(i);
        let mut off = 0;
        for part in parts {
            assert_eq!(part.rows(), rows, "row mismatch in concat_cols");
            let w = part.cols();
            dst[off..off + w].copy_from_slice(part.row(i));
            off += w;
        }
    }
    out
}

/// Split the upstream gradient of a column concat back into parts.
pub fn concat_cols_backward(dy: &DenseMatrix, widths: &[usize]) -> Vec<DenseMatrix> {
    assert_eq!(widths.iter().sum::<usize>(), dy.cols(), "width sum mismatch");
    let mut parts: Vec<DenseMatrix> = widths
        .iter()
        .map(|&w| DenseMatrix::zeros(dy.rows(), w))
        .collect();
    for i in 0..dy.rows() {
        let src = dy.row(i);
        let mut off = 0;
        for (part, &w) in parts.iter_mut().zip(widths) {
            part.row_mut(i).copy_from_slice(&src[off..off + w]);
            off += w;
        }
    }
    parts
}

/// Concatenate matrices top to bottom (equal column counts).
pub fn concat_rows(parts: &[&DenseMatrix]) -> DenseMatrix {
    DenseMatrix::vstack(parts)
}

// ---------------------------------------------------------------------------
// Sigmoid binary cross-entropy
// ---------------------------------------------------------------------------

/// Numerically stable `log(1 + e^z)`.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Logistic sigmoid, stable on both tails.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean sigmoid binary cross-entropy over a column of logits.
///
/// `logits` is `n x 1`, `targets` has length `n` with entries in {0, 1}.
/// Returns `(loss, dlogits)`; `dlogits[i] = (sigmoid(z_i) - y_i) / n`.
/// The loss is computed via the softplus identity
/// `bce(z, y) = softplus(z) - y * z`, which never exponentiates a large
/// positive number.
pub fn sigmoid_bce(logits: &DenseMatrix, targets: &[f64]) -> (f64, DenseMatrix) {
    assert_eq!(logits.cols(), 1, "logits must be a column vector");
    assert_eq!(logits.rows(), targets.len(), "target count mismatch");
    let n = targets.len();
    assert!(n > 0, "empty batch in sigmoid_bce");
    let inv = 1.0 / n as f64;
    let mut loss = 0.0;
    let mut dlogits = DenseMatrix::zeros(n, 1);
    for i in 0..n {
        let z = logits.get(i, 0);
        let y = targets[i];
        loss += softplus(z) - y * z;
        dlogits.set(i, 0, (sigmoid(z) - y) * inv);
    }
    (loss * inv, dlogits)
}
