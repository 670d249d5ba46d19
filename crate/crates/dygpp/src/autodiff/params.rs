//! Named parameter storage shared by the tape, the optimizer and the
//! checkpoint reader/writer.
//!
//! Parameters live in insertion order (which fixes the checkpoint layout and
//! every iteration order in the crate) and are addressed by a copyable
//! [`ParamId`]. Each entry carries its value, a same-shaped gradient
//! accumulator, Adam moment buffers, and an optional set of frozen rows that
//! the optimizer must never touch (used for the padding row of the feature
//! tables).

use std::collections::HashMap;

use super::matrix::DenseMatrix;
use crate::error::{DygppError, Result};

/// Handle to one parameter in a [`ParameterStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// One named tensor plus its training state.
#[derive(Debug, Clone)]
pub struct ParamEntry {
    pub name: String,
    pub value: DenseMatrix,
    pub grad: DenseMatrix,
    pub adam_m: DenseMatrix,
    pub adam_v: DenseMatrix,
    /// Rows excluded from optimizer updates (value, m and v stay put).
    pub frozen_rows: Vec<usize>,
}

/// Ordered collection of named parameters.
#[derive(Debug, Clone, Default)]
pub struct ParameterStore {
    entries: Vec<ParamEntry>,
    by_name: HashMap<String, usize>,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a parameter. Names must be unique.
    pub fn insert(&mut self, name: &str, value: DenseMatrix) -> ParamId {
        assert!(
            !self.by_name.contains_key(name),
            "duplicate parameter name `{name}`"
        );
        let (r, c) = (value.rows(), value.cols());
        let id = self.entries.len();
        self.entries.push(ParamEntry {
            name: name.to_string(),
            value,
            grad: DenseMatrix::zeros(r, c),
            adam_m: DenseMatrix::zeros(r, c),
            adam_v: DenseMatrix::zeros(r, c),
            frozen_rows: Vec::new(),
        });
        self.by_name.insert(name.to_string(), id);
        ParamId(id)
    }

    /// Mark rows of a parameter as off-limits for the optimizer.
    pub fn freeze_rows(&mut self, id: ParamId, rows: &[usize]) {
        let entry = &mut self.entries[id.0];
        for &r in rows {
            assert!(r < entry.value.rows(), "frozen row out of range");
            if !entry.frozen_rows.contains(&r) {
                entry.frozen_rows.push(r);
            }
        }
        entry.frozen_rows.sort_unstable();
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Look up a parameter by name.
    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied().map(ParamId)
    }

    /// Like [`Self::id`] but failing with a shape-style error message.
    pub fn require(&self, name: &str) -> Result<ParamId> {
        self.id(name)
            .ok_or_else(|| DygppError::CheckpointFormat(format!("missing parameter `{name}`")))
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &DenseMatrix {
        &self.entries[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut DenseMatrix {
        &mut self.entries[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &DenseMatrix {
        &self.entries[id.0].grad
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut DenseMatrix {
        &mut self.entries[id.0].grad
    }

    pub fn entry(&self, id: ParamId) -> &ParamEntry {
        &self.entries[id.0]
    }

    pub fn entry_mut(&mut self, id: ParamId) -> &mut ParamEntry {
        &mut self.entries[id.0]
    }

    /// Entries in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &ParamEntry)> {
        self.entries.iter().enumerate().map(|(i, e)| (ParamId(i), e))
    }

    /// Ids in insertion order.
    pub fn ids(&self) -> Vec<ParamId> {
        (0..self.entries.len()).map(ParamId).collect()
    }

    /// Reset every gradient accumulator to zero.
    pub fn zero_grads(&mut self) {
        for e in &mut self.entries {
            e.grad.fill_zero();
        }
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.entries
            .iter()
            .map(|e| e.value.rows() * e.value.cols())
            .sum()
    }
}
