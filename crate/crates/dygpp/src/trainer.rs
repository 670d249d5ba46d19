//! Training loop: time-interval batches, one Adam step per batch, and early
//! stopping on validation average precision.
//!
//! Each epoch walks the train slice in chronological time batches, draws one
//! corrupted negative per observed event, and takes an Adam step on the
//! batch's binary cross-entropy. After the epoch the model is scored on the
//! validation slice with a *fixed* negative-sampling seed, so validation
//! numbers are comparable across epochs. Training halts `patience` epochs
//! after the last strict improvement in validation AP; the best parameters
//! (not the last) are what the run returns, and they are also written to the
//! checkpoint path if one is configured.

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::adam::{adam_step, AdamState};
use crate::autodiff::checkpoint::save_checkpoint;
use crate::autodiff::ops::Mode;
use crate::autodiff::params::ParameterStore;
use crate::batch_sampler::{paired_candidates, partition_time_batches};
use crate::error::{DygppError, Result};
use crate::event_store::DatasetSplit;
use crate::metrics::{evaluate_model, EvalScope};
use crate::model::DygppModel;

/// Negative-sampling seed used for validation scoring unless overridden;
/// fixed so per-epoch validation APs are comparable.
pub const DEFAULT_EVAL_SEED: u64 = 0x00C0FFEE;

/// Run-level knobs (model shape lives in `ModelConfig`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRunConfig {
    pub max_epochs: u32,
    /// Epochs to continue after the last validation improvement.
    pub patience: u32,
    pub learning_rate: f64,
    /// Maximum timestamp span of one training batch, in seconds.
    pub time_gap: i64,
    /// Seed for training-side randomness (negatives, dropout).
    pub seed: u64,
    /// Seed for validation negative sampling; fixed across epochs.
    pub eval_seed: u64,
    /// Where to save the best parameters; `None` keeps them in memory only.
    pub checkpoint_path: Option<PathBuf>,
}

impl Default for TrainRunConfig {
    fn default() -> Self {
        TrainRunConfig {
            max_epochs: 50,
            patience: 20,
            learning_rate: 1e-4,
            time_gap: 1000,
            seed: 0,
            eval_seed: DEFAULT_EVAL_SEED,
            checkpoint_path: None,
        }
    }
}

impl TrainRunConfig {
    fn validate(&self) -> Result<()> {
        if self.max_epochs < 1 {
            return Err(DygppError::Usage("train.max_epochs must be >= 1".into()));
        }
        if self.patience < 1 {
            return Err(DygppError::Usage("train.patience must be >= 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(DygppError::Usage("train.learning_rate must be > 0".into()));
        }
        if self.time_gap <= 0 {
            return Err(DygppError::Usage("batch.time_gap_seconds must be > 0".into()));
        }
        Ok(())
    }
}

/// One epoch's numbers; serializes to one JSONL line of the history file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u32,
    pub train_loss: f64,
    pub val_ap: f64,
    pub val_auc: f64,
    pub patience_left: u32,
}

impl EpochRecord {
    /// The human-readable progress line the CLI prints per epoch.
    pub fn progress_line(&self) -> String {
        format!(
            "epoch={} train_loss={:.6} val_ap={:.6} val_auc={:.6} patience_left={}",
            self.epoch, self.train_loss, self.val_ap, self.val_auc, self.patience_left
        )
    }
}

/// Result of a training run: the best parameters and the full history.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation AP.
    pub best_store: ParameterStore,
    pub best_epoch: u32,
    pub best_val_ap: f64,
    pub history: Vec<EpochRecord>,
}

impl TrainOutcome {
    /// History as JSON-lines text, one epoch per line.
    pub fn history_jsonl(&self) -> String {
        let mut out = String::new();
        for rec in &self.history {
            out.push_str(&serde_json::to_string(rec).expect("record serializes"));
            out.push('\n');
        }
        out
    }
}

/// Train with the standard validation scorer (validation-slice AP/AUC under
/// the fixed eval seed).
pub fn train(
    model: &DygppModel,
    store: &mut ParameterStore,
    split: &DatasetSplit,
    cfg: &TrainRunConfig,
    mut progress: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    let eval_seed = cfg.eval_seed;
    train_with_validator(
        model,
        store,
        split,
        cfg,
        |_, store| {
            let report =
                evaluate_model(model, store, split, "val", EvalScope::Transductive, eval_seed)?;
            Ok((report.ap, report.auc))
        },
        &mut progress,
    )
}

/// Train with an injected validation scorer. The scorer receives the epoch
/// number and the current parameters and returns `(val_ap, val_auc)`; tests
/// use this to drive the early-stopping logic with a scripted AP sequence.
pub fn train_with_validator<V>(
    model: &DygppModel,
    store: &mut ParameterStore,
    split: &DatasetSplit,
    cfg: &TrainRunConfig,
    mut validate: V,
    progress: &mut impl FnMut(&EpochRecord),
) -> Result<TrainOutcome>
where
    V: FnMut(u32, &ParameterStore) -> Result<(f64, f64)>,
{
    cfg.validate()?;
    if split.train.is_empty() {
        return Err(DygppError::Data("no training events".into()));
    }
    let log = &split.log;
    let batches = partition_time_batches(log.events(), split.train.clone(), cfg.time_gap);
    debug_assert!(batches
        .windows(2)
        .all(|w| log.events()[w[0].start].time <= log.events()[w[1].start].time));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(cfg.learning_rate);
    let mut history = Vec::new();
    let mut best_store = store.clone();
    let mut best_val_ap = f64::NEG_INFINITY;
    let mut best_epoch = 0u32;
    let mut patience_left = cfg.patience;

    for epoch in 1..=cfg.max_epochs {
        let mut loss_sum = 0.0;
        let mut example_count = 0usize;
        for (batch_index, batch) in batches.iter().enumerate() {
            let pairs = paired_candidates(log.events(), batch.clone(), log.num_stations(), &mut rng);
            let loss = model
                .loss_and_grad(store, log, &pairs, Mode::Train, &mut rng)
                .map_err(|e| annotate_batch(e, epoch, batch_index))?;
            adam_step(store, &mut adam).map_err(|e| annotate_batch(e, epoch, batch_index))?;
            loss_sum += loss * pairs.len() as f64;
            example_count += pairs.len();
        }
        let train_loss = loss_sum / example_count as f64;

        let (val_ap, val_auc) = validate(epoch, store)?;
        if val_ap > best_val_ap {
            best_val_ap = val_ap;
            best_epoch = epoch;
            best_store = store.clone();
            patience_left = cfg.patience;
            if let Some(path) = &cfg.checkpoint_path {
                save_checkpoint(path, store, &adam)?;
            }
        } else {
            patience_left -= 1;
        }
        let record = EpochRecord {
            epoch,
            train_loss,
            val_ap,
            val_auc,
            patience_left,
        };
        progress(&record);
        history.push(record);
        if patience_left == 0 {
            break;
        }
    }

    Ok(TrainOutcome {
        best_store,
        best_epoch,
        best_val_ap,
        history,
    })
}

/// Prefix a training-step failure with where in the schedule it happened.
fn annotate_batch(err: DygppError, epoch: u32, batch_index: usize) -> DygppError {
    match err {
        DygppError::NonFinite { context } => DygppError::NonFinite {
            context: format!("epoch {epoch} batch {batch_index}: {context}"),
        },
        other => other,
    }
}
