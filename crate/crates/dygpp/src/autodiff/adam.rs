//! Adam optimizer with bias correction.

use super::params::ParameterStore;
use crate::error::{DygppError, Result};

/// Adam hyperparameters plus the shared step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Number of completed steps; drives bias correction.
    pub step: u64,
}

impl AdamState {
    /// Standard coefficients with the given learning rate.
    pub fn new(learning_rate: f64) -> Self {
        AdamState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
        }
    }
}

impl Default for AdamState {
    fn default() -> Self {
        AdamState::new(1e-4)
    }
}

/// Apply one Adam update from the accumulated gradients, then zero them.
///
/// Frozen rows are skipped entirely: their values and moment buffers do not
/// move. A non-finite gradient anywhere aborts with an error naming the
/// parameter, leaving values untouched.
pub fn adam_step(store: &mut ParameterStore, state: &mut AdamState) -> Result<()> {
    // Validate before mutating anything so a poisoned batch cannot corrupt
    // half the parameters.
    for (_, entry) in store.iter() {
        if !entry.grad.all_finite() {
            return Err(DygppError::NonFinite {
                context: format!("gradient of `{}`", entry.name),
            });
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);

    for id in store.ids() {
        let entry = store.entry_mut(id);
        let rows = entry.value.rows();
        let cols = entry.value.cols();
        let mut frozen = entry.frozen_rows.iter().copied().peekable();
        for r in 0..rows {
            if frozen.peek() == Some(&r) {
                frozen.next();
                continue;
            }
            for c in 0..cols {
                let g = entry.grad.get(r, c);
                let m = state.beta1 * entry.adam_m.get(r, c) + (1.0 - state.beta1) * g;
                let v = state.beta2 * entry.adam_v.get(r, c) + (1.0 - state.beta2) * g * g;
                entry.adam_m.set(r, c, m);
                entry.adam_v.set(r, c, v);
                let m_hat = m / bc1;
                let v_hat = v / bc2;
                let delta = state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
                entry.value.set(r, c, entry.value.get(r, c) - delta);
            }
        }
        entry.grad.fill_zero();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::matrix::DenseMatrix;

    fn approx(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    /// Scalar reference implementation of the Adam recurrence.
    struct ScalarAdam {
        m: f64,
        v: f64,
        t: i32,
    }

    impl ScalarAdam {
        fn new() -> Self {
            ScalarAdam { m: 0.0, v: 0.0, t: 0 }
        }
        fn step(&mut self, x: f64, g: f64, lr: f64) -> f64 {
            self.t += 1;
            self.m = 0.9 * self.m + 0.1 * g;
            self.v = 0.999 * self.v + 0.001 * g * g;
            let m_hat = self.m / (1.0 - 0.9f64.powi(self.t));
            let v_hat = self.v / (1.0 - 0.999f64.powi(self.t));
            x - lr * m_hat / (v_hat.sqrt() + 1e-8)
        }
    }

    #[test]
    fn matches_scalar_recurrence_over_several_steps() {
        let mut store = ParameterStore::new();
        let id = store.insert("w", DenseMatrix::from_vec(1, 1, vec![1.0]));
        let mut state = AdamState::new(0.1);
        let mut reference = ScalarAdam::new();
        let mut x = 1.0;
        // Gradient pattern with sign changes and magnitude swings.
        for (i, g) in [0.5, -0.3, 0.8, 0.0, -1.2, 2.0].iter().enumerate() {
            store.grad_mut(id).set(0, 0, *g);
            adam_step(&mut store, &mut state).unwrap();
            x = reference.step(x, *g, 0.1);
            approx(store.value(id).get(0, 0), x, 1e-14);
            assert_eq!(state.step, (i + 1) as u64);
        }
    }

    #[test]
    fn first_step_moves_by_learning_rate_scale() {
        // With bias correction, step 1 is lr * g / (|g| + eps) ~ lr * sign(g).
        let mut store = ParameterStore::new();
        let id = store.insert("w", DenseMatrix::from_vec(1, 1, vec![0.0]));
        let mut state = AdamState::new(0.01);
        store.grad_mut(id).set(0, 0, 3.7);
        adam_step(&mut store, &mut state).unwrap();
        approx(store.value(id).get(0, 0), -0.01, 1e-6);
    }

    #[test]
    fn gradients_zeroed_after_step() {
        let mut store = ParameterStore::new();
        let id = store.insert("w", DenseMatrix::from_vec(2, 2, vec![1.0; 4]));
        let mut state = AdamState::new(0.1);
        store.grad_mut(id).as_mut_slice().fill(1.0);
        adam_step(&mut store, &mut state).unwrap();
        assert_eq!(store.grad(id).as_slice(), &[0.0; 4]);
    }

    #[test]
    fn frozen_rows_do_not_move() {
        let mut store = ParameterStore::new();
        let id = store.insert(
            "table",
            DenseMatrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0]]),
        );
        store.freeze_rows(id, &[0]);
        let mut state = AdamState::new(0.5);
        store.grad_mut(id).as_mut_slice().fill(1.0);
        adam_step(&mut store, &mut state).unwrap();
        assert_eq!(store.value(id).row(0), &[0.0, 0.0]);
        assert_eq!(store.entry(id).adam_m.row(0), &[0.0, 0.0]);
        assert!(store.value(id).get(1, 0) < 1.0);
        assert!(store.entry(id).adam_m.get(1, 0) > 0.0);
    }

    #[test]
    fn nan_gradient_aborts_naming_parameter_and_leaves_values() {
        let mut store = ParameterStore::new();
        let ok = store.insert("fine", DenseMatrix::from_vec(1, 1, vec![1.0]));
        let bad = store.insert("broken", DenseMatrix::from_vec(1, 1, vec![2.0]));
        store.grad_mut(ok).set(0, 0, 1.0);
        store.grad_mut(bad).set(0, 0, f64::NAN);
        let mut state = AdamState::new(0.1);
        let err = adam_step(&mut store, &mut state).unwrap_err();
        assert!(err.to_string().contains("broken"), "got: {err}");
        assert_eq!(err.exit_code(), 3);
        // Nothing moved, not even the healthy parameter.
        assert_eq!(store.value(ok).get(0, 0), 1.0);
        assert_eq!(store.value(bad).get(0, 0), 2.0);
        assert_eq!(state.step, 0);
    }
}
