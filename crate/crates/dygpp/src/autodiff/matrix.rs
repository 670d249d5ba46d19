//! Dense row-major `f64` matrices and the handful of BLAS-like kernels the
//! training stack needs.
//!
//! Everything is deliberately plain: a `Vec<f64>` with explicit shape, plus
//! multiply/transpose-multiply variants written so that each output row is
//! accumulated sequentially. That keeps results bitwise reproducible whether
//! the row loop runs on one rayon worker or eight.

use rayon::prelude::*;

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Products smaller than this many multiply-adds run single-threaded;
/// splitting tiny matmuls across workers costs more than it saves.
const PAR_FLOP_THRESHOLD: usize = 1 << 16;

impl DenseMatrix {
    /// All-zero matrix of the given shape.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Build from a flat row-major buffer. Panics if the length is wrong.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            rows * cols,
            "buffer length {} does not match shape {}x{}",
            data.len(),
            rows,
            cols
        );
        DenseMatrix { rows, cols, data }
    }

    /// Build from nested rows. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged row in matrix literal");
            data.extend_from_slice(row);
        }
        DenseMatrix { rows: r, cols: c, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    /// Borrow row `i` as a slice.
    pub fn row(&self, i: usize) -> &[f64] {
        let start = i * self.cols;
        &self.data[start..start + self.cols]
    }

    /// Mutably borrow row `i`.
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let start = i * self.cols;
        &mut self.data[start..start + self.cols]
    }

    /// Flat row-major view of the backing buffer.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Consume into the flat buffer.
    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Elementwise in-place add. Panics on shape mismatch.
    pub fn add_assign(&mut self, other: &DenseMatrix) {
        assert_eq!(self.rows, other.rows, "row mismatch in add_assign");
        assert_eq!(self.cols, other.cols, "col mismatch in add_assign");
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += b;
        }
    }

    /// Multiply every entry by `s`.
    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    /// Set every entry to zero, keeping the allocation.
    pub fn fill_zero(&mut self) {
        self.data.fill(0.0);
    }

    /// True if every entry is finite.
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Sum of each column, returned as a 1 x cols matrix.
    pub fn column_sums(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(1, self.cols);
        for i in 0..self.rows {
            let row = self.row(i);
            let acc = out.row_mut(0);
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v;
            }
        }
        out
    }

    /// Stack matrices vertically. All inputs must share a column count.
    pub fn vstack(parts: &[&DenseMatrix]) -> DenseMatrix {
        let cols = parts.first().map_or(0, |m| m.cols);
        let rows = parts.iter().map(|m| m.rows).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for part in parts {
            assert_eq!(part.cols, cols, "col mismatch in vstack");
            data.extend_from_slice(&part.data);
        }
        DenseMatrix { rows, cols, data }
    }
}

/// Chooses between a sequential and a row-parallel loop body.
///
/// The closure fills one output row from its index; each row is written by
/// exactly one worker, and the per-row arithmetic order never changes, so the
/// result is identical for any thread count.
fn for_each_row<F>(out: &mut DenseMatrix, flops: usize, body: F)
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    let cols = out.cols;
    if flops < PAR_FLOP_THRESHOLD || out.rows < 2 {
        for (i, row) in out.data.chunks_mut(cols).enumerate() {
            body(i, row);
        }
    } else {
        out.data
            .par_chunks_mut(cols)
            .enumerate()
            .for_each(|(i, row)| body(i, row));
    }
}

/// `a * b` for `a: r x k`, `b: k x c`.
pub fn matmul(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    assert_eq!(a.cols, b.rows, "inner dimension mismatch in matmul");
    let (r, k, c) = (a.rows, a.cols, b.cols);
    let mut out = DenseMatrix::zeros(r, c);
    for_each_row(&mut out, r * k * c, |i, out_row| {
        let a_row = a.row(i);
        for (kk, &av) in a_row.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let b_row = b.row(kk);
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += av * bv;
            }
        }
    });
    out
}

/// `a * b^T` for `a: r x k`, `b: c x k`.
pub fn matmul_nt(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    assert_eq!(a.cols, b.cols, "inner dimension mismatch in matmul_nt");
    let (r, k, c) = (a.rows, a.cols, b.rows);
    let mut out = DenseMatrix::zeros(r, c);
    for_each_row(&mut out, r * k * c, |i, out_row| {
        let a_row = a.row(i);
        for (j, o) in out_row.iter_mut().enumerate() {
            let b_row = b.row(j);
            let mut acc = 0.0;
            for (av, bv) in a_row.iter().zip(b_row) {
                acc += av * bv;
            }
            *o = acc;
        }
    });
    out
}

/// `a^T * b` for `a: k x r`, `b: k x c`.
pub fn matmul_tn(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    assert_eq!(a.rows, b.rows, "inner dimension mismatch in matmul_tn");
    let (r, k, c) = (a.cols, a.rows, b.cols);
    let mut out = DenseMatrix::zeros(r, c);
    for_each_row(&mut out, r * k * c, |i, out_row| {
        for kk in 0..k {
            let av = a.get(kk, i);
            if av == 0.0 {
                continue;
            }
            let b_row = b.row(kk);
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += av * bv;
            }
        }
    });
    out
}
