//! Reference implementations of the per-slot encoders.
//!
//! These are plain-matrix versions of what the differentiable forward pass
//! computes on the tape. The model is tested against them; they are also the
//! single source of truth for encoder initialization (the frequency ladder).

use crate::autodiff::matrix::DenseMatrix;

/// Initial frequency ladder for the time encoder:
/// `omega_k = 10^(top_exp - (k-1) * 10 / d)` for `k = 1..=d`, spanning ten
/// decades downward from `10^top_exp`.
///
/// `top_exp = 0` resolves scaled deltas of order 1 and below; raise it when
/// the scaled deltas of interest are much smaller than 1 (for example,
/// second-denominated data under a strong `time_scale`), so that the ladder
/// still contains frequencies whose phase varies across those deltas.
pub fn omega_init(d: usize, top_exp: f64) -> Vec<f64> {
    (0..d)
        .map(|k| 10f64.powf(top_exp - (k as f64) * 10.0 / d as f64))
        .collect()
}

/// Cosine time features: row `i`, column `k` is
/// `sqrt(1/d) * cos(omega_k * scale * delta_i)`.
///
/// `scale` is a fixed rescaling of raw second deltas; the frequencies are
/// the trainable part.
pub fn encode_time(deltas: &[i64], omega: &[f64], scale: f64) -> DenseMatrix {
    let d = omega.len();
    let inv_sqrt = (1.0 / d as f64).sqrt();
    let mut out = DenseMatrix::zeros(deltas.len(), d);
    for (i, &dt) in deltas.iter().enumerate() {
        let scaled = scale * dt as f64;
        let row = out.row_mut(i);
        for (k, v) in row.iter_mut().enumerate() {
            *v = inv_sqrt * (omega[k] * scaled).cos();
        }
    }
    out
}

/// Edge features: each signed scalar (board -1, alight +1, self/padding 0)
/// replicated across `dim` columns.
pub fn encode_edges(signs: &[f64], dim: usize) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(signs.len(), dim);
    for (i, &s) in signs.iter().enumerate() {
        out.row_mut(i).fill(s);
    }
    out
}

/// Co-occurrence features: a shared affine lift `f(x) = x * w + b` applied to
/// the own-sequence count and the cross-sequence count, then summed:
/// `row_i = f(own_i) + f(cross_i)`.
pub fn encode_co(pairs: &[[f64; 2]], w: &[f64], b: &[f64]) -> DenseMatrix {
    assert_eq!(w.len(), b.len(), "co encoder weight/bias width mismatch");
    let d = w.len();
    let mut out = DenseMatrix::zeros(pairs.len(), d);
    for (i, &[own, cross]) in pairs.iter().enumerate() {
        let row = out.row_mut(i);
        for k in 0..d {
            row[k] = (own * w[k] + b[k]) + (cross * w[k] + b[k]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn omega_ladder_endpoints_and_monotonicity() {
        let om = omega_init(100, 0.0);
        assert_eq!(om.len(), 100);
        approx(om[0], 1.0, 0.0);
        // k = 100 -> exponent -(99) * 10 / 100 = -9.9.
        approx(om[99], 10f64.powf(-9.9), 1e-22);
        for w in om.windows(2) {
            assert!(w[1] < w[0], "ladder must strictly decrease");
        }
    }

    #[test]
    fn omega_ladder_small_width() {
        let om = omega_init(4, 0.0);
        approx(om[0], 1.0, 0.0);
        approx(om[1], 10f64.powf(-2.5), 1e-18);
        approx(om[2], 1e-5, 1e-18);
        approx(om[3], 10f64.powf(-7.5), 1e-20);
    }

    #[test]
    fn time_encoding_known_values() {
        // Zero delta gives a constant sqrt(1/d) row regardless of omega.
        let om = vec![1.0, 0.25];
        let enc = encode_time(&[0, 2_000_000], &om, 1e-6);
        let inv = (0.5f64).sqrt();
        approx(enc.get(0, 0), inv, 1e-15);
        approx(enc.get(0, 1), inv, 1e-15);
        // Scaled delta = 2.0.
        approx(enc.get(1, 0), inv * (2.0f64).cos(), 1e-15);
        approx(enc.get(1, 1), inv * (0.5f64).cos(), 1e-15);
    }

    #[test]
    fn time_encoding_values_bounded_by_inv_sqrt_d() {
        let om = omega_init(16, 0.0);
        let enc = encode_time(&[0, 1, 10, 1_000, 123_456_789], &om, 1e-6);
        let bound = (1.0 / 16f64).sqrt() + 1e-15;
        for v in enc.as_slice() {
            assert!(v.abs() <= bound);
        }
    }

    #[test]
    fn edge_encoding_replicates_sign() {
        let enc = encode_edges(&[-1.0, 0.0, 1.0], 4);
        assert_eq!(enc.row(0), &[-1.0; 4]);
        assert_eq!(enc.row(1), &[0.0; 4]);
        assert_eq!(enc.row(2), &[1.0; 4]);
    }

    #[test]
    fn co_encoding_sums_shared_affine() {
        let w = [2.0, -1.0];
        let b = [0.5, 0.0];
        let enc = encode_co(&[[3.0, 1.0], [0.0, 0.0]], &w, &b);
        // Row 0: (3*2 + 0.5) + (1*2 + 0.5) = 9.0; (-3 + 0) + (-1 + 0) = -4.
        assert_eq!(enc.row(0), &[9.0, -4.0]);
        // Padding-style [0,0] still picks up both bias terms.
        assert_eq!(enc.row(1), &[1.0, 0.0]);
    }
}
