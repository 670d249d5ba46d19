//! Central-difference gradient verification.
//!
//! Given a deterministic scalar loss function over the parameter store and a
//! store whose `grad` buffers already hold the analytic gradients, perturb
//! parameter entries one at a time and compare `(f(x+h) - f(x-h)) / 2h`
//! against the recorded analytic value.

use super::params::ParameterStore;
use crate::error::{DygppError, Result};

/// Relative errors are measured against `max(|fd|, |analytic|, REL_FLOOR)`
/// so that near-zero gradient pairs do not explode the ratio while genuine
/// sign or scale corruption still registers as O(1).
const REL_FLOOR: f64 = 1e-5;

/// Per-parameter comparison summary.
#[derive(Debug, Clone)]
pub struct BlockReport {
    pub name: String,
    /// Number of coordinates perturbed (all, or an evenly strided sample).
    pub coords_checked: usize,
    pub max_abs_err: f64,
    pub max_rel_err: f64,
}

/// Compare analytic gradients against central differences.
///
/// `loss_fn` must be a pure function of the parameter values: it is invoked
/// repeatedly with perturbed values and must not consume RNG state or mutate
/// anything. The store's gradient buffers are read, not written; values are
/// restored exactly after each probe. Blocks larger than
/// `max_coords_per_block` are sampled with an even stride (coordinate 0
/// always included).
pub fn finite_difference_check<F>(
    store: &mut ParameterStore,
    loss_fn: F,
    h: f64,
    max_coords_per_block: usize,
) -> Vec<BlockReport>
where
    F: Fn(&ParameterStore) -> f64,
{
    assert!(h > 0.0, "step size must be positive");
    assert!(max_coords_per_block > 0, "need at least one coordinate per block");
    let mut reports = Vec::new();

    for id in store.ids() {
        let name = store.name(id).to_string();
        let rows = store.value(id).rows();
        let cols = store.value(id).cols();
        let total = rows * cols;
        let stride = total.div_ceil(max_coords_per_block).max(1);

        let mut max_abs = 0.0f64;
        let mut max_rel = 0.0f64;
        let mut checked = 0usize;

        let mut flat = 0usize;
        while flat < total {
            let (r, c) = (flat / cols, flat % cols);
            let original = store.value(id).get(r, c);
            let analytic = store.grad(id).get(r, c);

            store.value_mut(id).set(r, c, original + h);
            let f_plus = loss_fn(store);
            store.value_mut(id).set(r, c, original - h);
            let f_minus = loss_fn(store);
            store.value_mut(id).set(r, c, original);

            let fd = (f_plus - f_minus) / (2.0 * h);
            let abs_err = (fd - analytic).abs();
            let rel_err = abs_err / fd.abs().max(analytic.abs()).max(REL_FLOOR);
            max_abs = max_abs.max(abs_err);
            max_rel = max_rel.max(rel_err);
            checked += 1;
            flat += stride;
        }

        reports.push(BlockReport {
            name,
            coords_checked: checked,
            max_abs_err: max_abs,
            max_rel_err: max_rel,
        });
    }
    reports
}

/// Fail with the worst offending block if any exceeds `tolerance`.
pub fn enforce_tolerance(reports: &[BlockReport], tolerance: f64) -> Result<()> {
    let worst = reports
        .iter()
        .max_by(|a, b| a.max_rel_err.total_cmp(&b.max_rel_err));
    if let Some(w) = worst {
        if w.max_rel_err > tolerance {
            return Err(DygppError::GradCheck {
                block: w.name.clone(),
                max_rel_err: w.max_rel_err,
                tolerance,
            });
        }
    }
    Ok(())
}
