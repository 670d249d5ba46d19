//! A small reverse-mode tape over the fixed op set the model needs.
//!
//! Forward values are computed eagerly as nodes are pushed; [`Tape::backward`]
//! walks the nodes in reverse, routing gradients to upstream nodes and
//! accumulating parameter gradients straight into the [`ParameterStore`].
//! The op set is closed on purpose: every operation the model performs is one
//! of these variants, so the gradient checker exercises the whole surface.

use rand::Rng;

use super::matrix::{matmul_nt, matmul_tn, DenseMatrix};
use super::ops::{self, Mode};
use super::params::{ParamId, ParameterStore};

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

enum Op {
    /// Leaf with no gradient flow.
    Constant,
    /// Gather rows from parameter tables; backward scatter-adds.
    LookupRows { sources: Vec<(ParamId, usize)> },
    /// Cosine time features with trainable frequencies.
    TimeEncode {
        omega: ParamId,
        scaled_deltas: Vec<f64>,
    },
    /// `x * W (+ b)`.
    Affine {
        x: NodeId,
        w: ParamId,
        b: Option<ParamId>,
    },
    /// `x + b` with row broadcast.
    AddBias { x: NodeId, b: ParamId },
    Relu { x: NodeId },
    /// Mask folded with inverted scaling at forward time.
    Dropout { x: NodeId, mask: DenseMatrix },
    Add { a: NodeId, b: NodeId },
    ConcatCols { parts: Vec<NodeId>, widths: Vec<usize> },
    SegmentMean { x: NodeId, len: usize },
    /// Scalar loss; the logit gradient is precomputed at forward time.
    SigmoidBce { logits: NodeId, dlogits: DenseMatrix },
}

struct Node {
    value: DenseMatrix,
    op: Op,
}

/// Reverse-mode tape. One tape per forward pass.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    fn push(&mut self, value: DenseMatrix, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    /// Forward value of a node.
    pub fn value(&self, id: NodeId) -> &DenseMatrix {
        &self.nodes[id.0].value
    }

    /// Constant input; no gradient flows into it.
    pub fn constant(&mut self, value: DenseMatrix) -> NodeId {
        self.push(value, Op::Constant)
    }

    /// Gather one row per `(table, row)` source into a stacked matrix.
    /// All sources must come from tables of equal width.
    pub fn lookup_rows(
        &mut self,
        store: &ParameterStore,
        sources: Vec<(ParamId, usize)>,
    ) -> NodeId {
        assert!(!sources.is_empty(), "lookup_rows needs at least one source");
        let cols = store.value(sources[0].0).cols();
        let mut value = DenseMatrix::zeros(sources.len(), cols);
        for (i, &(pid, row)) in sources.iter().enumerate() {
            let table = store.value(pid);
            assert_eq!(table.cols(), cols, "lookup tables must share width");
            value.row_mut(i).copy_from_slice(table.row(row));
        }
        self.push(value, Op::LookupRows { sources })
    }

    /// `out[i][k] = sqrt(1/d) * cos(omega[k] * scaled_deltas[i])` where `d`
    /// is the width of `omega`. The deltas are expected to already carry the
    /// fixed time-scale factor.
    pub fn time_encode(
        &mut self,
        store: &ParameterStore,
        omega: ParamId,
        scaled_deltas: Vec<f64>,
    ) -> NodeId {
        let om = store.value(omega);
        assert_eq!(om.rows(), 1, "omega must be a row vector");
        let d = om.cols();
        let inv_sqrt = (1.0 / d as f64).sqrt();
        let mut value = DenseMatrix::zeros(scaled_deltas.len(), d);
        for (i, &dt) in scaled_deltas.iter().enumerate() {
            let row = value.row_mut(i);
            for (k, out) in row.iter_mut().enumerate() {
                *out = inv_sqrt * (om.get(0, k) * dt).cos();
            }
        }
        self.push(
            value,
            Op::TimeEncode {
                omega,
                scaled_deltas,
            },
        )
    }

    /// `x * W (+ b)` with `W`, `b` taken from the store.
    pub fn affine(
        &mut self,
        store: &ParameterStore,
        x: NodeId,
        w: ParamId,
        b: Option<ParamId>,
    ) -> NodeId {
        let value = ops::affine_forward(
            &self.nodes[x.0].value,
            store.value(w),
            b.map(|bid| store.value(bid)),
        );
        self.push(value, Op::Affine { x, w, b })
    }

    /// `x + b` with row broadcast; used by the literal two-step head.
    pub fn add_bias(&mut self, store: &ParameterStore, x: NodeId, b: ParamId) -> NodeId {
        let value = ops::add_bias_forward(&self.nodes[x.0].value, store.value(b));
        self.push(value, Op::AddBias { x, b })
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let value = ops::relu_forward(&self.nodes[x.0].value);
        self.push(value, Op::Relu { x })
    }

    /// Inverted dropout. In eval mode this adds no node and returns `x`
    /// unchanged, so eval output is bitwise identical to the input.
    pub fn dropout<R: Rng>(&mut self, x: NodeId, p: f64, mode: Mode, rng: &mut R) -> NodeId {
        if mode == Mode::Eval || p == 0.0 {
            return x;
        }
        let (value, mask) = ops::dropout_forward(&self.nodes[x.0].value, p, mode, rng);
        self.push(value, Op::Dropout { x, mask })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let mut value = self.nodes[a.0].value.clone();
        value.add_assign(&self.nodes[b.0].value);
        self.push(value, Op::Add { a, b })
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        let mats: Vec<&DenseMatrix> = parts.iter().map(|p| &self.nodes[p.0].value).collect();
        let widths: Vec<usize> = mats.iter().map(|m| m.cols()).collect();
        let value = ops::concat_cols(&mats);
        self.push(
            value,
            Op::ConcatCols {
                parts: parts.to_vec(),
                widths,
            },
        )
    }

    /// Mean over consecutive row segments of fixed length.
    pub fn segment_mean(&mut self, x: NodeId, len: usize) -> NodeId {
        let value = ops::segment_mean_forward(&self.nodes[x.0].value, len);
        self.push(value, Op::SegmentMean { x, len })
    }

    /// Mean sigmoid binary cross-entropy; produces a 1 x 1 node.
    pub fn sigmoid_bce(&mut self, logits: NodeId, targets: &[f64]) -> NodeId {
        let (loss, dlogits) = ops::sigmoid_bce(&self.nodes[logits.0].value, targets);
        let value = DenseMatrix::from_vec(1, 1, vec![loss]);
        self.push(value, Op::SigmoidBce { logits, dlogits })
    }

    /// Run reverse accumulation from `root`, adding parameter gradients into
    /// the store. Node gradients seed with ones (the root is a 1 x 1 loss in
    /// practice). Gradients already in the store are kept and added to.
    pub fn backward(&self, root: NodeId, store: &mut ParameterStore) {
        let mut grads: Vec<Option<DenseMatrix>> = (0..self.nodes.len()).map(|_| None).collect();
        let mut seed = DenseMatrix::zeros(
            self.nodes[root.0].value.rows(),
            self.nodes[root.0].value.cols(),
        );
        seed.as_mut_slice().fill(1.0);
        grads[root.0] = Some(seed);

        for idx in (0..=root.0).rev() {
            let Some(dy) = grads[idx].take() else {
                continue;
            };
            match &self.nodes[idx].op {
                Op::Constant => {}
                Op::LookupRows { sources } => {
                    for (i, &(pid, row)) in sources.iter().enumerate() {
                        let src = dy.row(i).to_vec();
                        let dst = store.grad_mut(pid).row_mut(row);
                        for (d, v) in dst.iter_mut().zip(&src) {
                            *d += v;
                        }
                    }
                }
                Op::TimeEncode {
                    omega,
                    scaled_deltas,
                } => {
                    let om = store.value(*omega);
                    let d = om.cols();
                    let inv_sqrt = (1.0 / d as f64).sqrt();
                    let mut domega = vec![0.0; d];
                    for (i, &dt) in scaled_deltas.iter().enumerate() {
                        let dy_row = dy.row(i);
                        for (k, acc) in domega.iter_mut().enumerate() {
                            *acc += -inv_sqrt * (om.get(0, k) * dt).sin() * dt * dy_row[k];
                        }
                    }
                    let dst = store.grad_mut(*omega).row_mut(0);
                    for (d, v) in dst.iter_mut().zip(&domega) {
                        *d += v;
                    }
                }
                Op::Affine { x, w, b } => {
                    let dx = matmul_nt(&dy, store.value(*w));
                    let dw = matmul_tn(&self.nodes[x.0].value, &dy);
                    store.grad_mut(*w).add_assign(&dw);
                    if let Some(bid) = b {
                        let db = dy.column_sums();
                        store.grad_mut(*bid).add_assign(&db);
                    }
                    accumulate(&mut grads, x.0, dx);
                }
                Op::AddBias { x, b } => {
                    let (dx, db) = ops::add_bias_backward(&dy);
                    store.grad_mut(*b).add_assign(&db);
                    accumulate(&mut grads, x.0, dx);
                }
                Op::Relu { x } => {
                    let dx = ops::relu_backward(&self.nodes[x.0].value, &dy);
                    accumulate(&mut grads, x.0, dx);
                }
                Op::Dropout { x, mask } => {
                    let dx = ops::dropout_backward(mask, &dy);
                    accumulate(&mut grads, x.0, dx);
                }
                Op::Add { a, b } => {
                    accumulate(&mut grads, a.0, dy.clone());
                    accumulate(&mut grads, b.0, dy);
                }
                Op::ConcatCols { parts, widths } => {
                    let split = ops::concat_cols_backward(&dy, widths);
                    for (part, dpart) in parts.iter().zip(split) {
                        accumulate(&mut grads, part.0, dpart);
                    }
                }
                Op::SegmentMean { x, len } => {
                    let dx = ops::segment_mean_backward(&dy, *len);
                    accumulate(&mut grads, x.0, dx);
                }
                Op::SigmoidBce { logits, dlogits } => {
                    // dy is 1x1; scale the cached logit gradient by it.
                    let mut dl = dlogits.clone();
                    dl.scale(dy.get(0, 0));
                    accumulate(&mut grads, logits.0, dl);
                }
            }
        }
    }
}

fn accumulate(grads: &mut [Option<DenseMatrix>], idx: usize, delta: DenseMatrix) {
    match &mut grads[idx] {
        Some(g) => g.add_assign(&delta),
        slot @ None => *slot = Some(delta),
    }
}
