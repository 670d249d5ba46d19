//! Ranking metrics (average precision, ROC-AUC) and the evaluation driver.
//!
//! Two AP flavors are provided. `average_precision` is the standard ranking
//! definition: precision at each positive's rank, averaged over positives.
//! `average_precision_index_averaged` is an alternate historical form that
//! averages the running precision over *every* prediction index; it is kept
//! because some published numbers use it. Both are reported side by side.
//!
//! Ties: sorting is stable on the input order, so callers that interleave
//! `[positive, negative, ...]` get the positive ranked first within a tied
//! group. AUC handles ties with half credit via midranks.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::batch_sampler::{corrupt_station, CandidatePair};
use crate::error::{DygppError, Result};
use crate::event_store::DatasetSplit;
use crate::model::DygppModel;
use crate::autodiff::params::ParameterStore;

/// One scored example with a binary relevance target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredExample {
    pub score: f64,
    /// 1 for positive (observed), 0 for negative (corrupted).
    pub target: u8,
}

fn validate(examples: &[ScoredExample]) -> Result<(usize, usize)> {
    if examples.is_empty() {
        return Err(DygppError::Data("no examples to score".into()));
    }
    if examples.iter().any(|e| !e.score.is_finite()) {
        return Err(DygppError::NonFinite {
            context: "metric scores".into(),
        });
    }
    let pos = examples.iter().filter(|e| e.target == 1).count();
    let neg = examples.len() - pos;
    Ok((pos, neg))
}

/// Indices sorted by descending score; stable, so tied scores keep the
/// caller's order.
fn ranked_indices(examples: &[ScoredExample]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..examples.len()).collect();
    idx.sort_by(|&a, &b| examples[b].score.total_cmp(&examples[a].score));
    idx
}

/// Standard ranking average precision: mean over positives of the precision
/// at that positive's rank.
pub fn average_precision(examples: &[ScoredExample]) -> Result<f64> {
    let (pos, _) = validate(examples)?;
    if pos == 0 {
        return Err(DygppError::Data("average precision needs a positive".into()));
    }
    let mut tp = 0usize;
    let mut sum = 0.0;
    for (rank0, &i) in ranked_indices(examples).iter().enumerate() {
        if examples[i].target == 1 {
            tp += 1;
            sum += tp as f64 / (rank0 + 1) as f64;
        }
    }
    Ok(sum / pos as f64)
}

/// Alternate form: the running precision `tp_k / k` averaged over every
/// prediction index `k = 1..=n`, positives and negatives alike.
pub fn average_precision_index_averaged(examples: &[ScoredExample]) -> Result<f64> {
    validate(examples)?;
    let mut tp = 0usize;
    let mut sum = 0.0;
    let n = examples.len();
    for (rank0, &i) in ranked_indices(examples).iter().enumerate() {
        if examples[i].target == 1 {
            tp += 1;
        }
        sum += tp as f64 / (rank0 + 1) as f64;
    }
    Ok(sum / n as f64)
}

/// ROC-AUC via the Mann-Whitney statistic with midrank tie handling: a tied
/// positive/negative pair contributes half credit.
pub fn auc(examples: &[ScoredExample]) -> Result<f64> {
    let (pos, neg) = validate(examples)?;
    if pos == 0 || neg == 0 {
        return Err(DygppError::Data(
            "auc needs both a positive and a negative".into(),
        ));
    }
    // Ascending by score; walk tie groups assigning the average rank.
    let mut idx: Vec<usize> = (0..examples.len()).collect();
    idx.sort_by(|&a, &b| examples[a].score.total_cmp(&examples[b].score));
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0usize;
    while i < idx.len() {
        let mut j = i;
        while j < idx.len() && examples[idx[j]].score == examples[idx[i]].score {
            j += 1;
        }
        // Ranks are 1-based: the group spans ranks i+1 ..= j.
        let midrank = (i + 1 + j) as f64 / 2.0;
        for &k in &idx[i..j] {
            if examples[k].target == 1 {
                rank_sum_pos += midrank;
            }
        }
        i = j;
    }
    let p = pos as f64;
    let u = rank_sum_pos - p * (p + 1.0) / 2.0;
    Ok(u / (p * neg as f64))
}

// ---------------------------------------------------------------------------
// Evaluation driver
// ---------------------------------------------------------------------------

/// Which positives to evaluate: everything in the range, or only events at
/// stations that were hidden from training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalScope {
    Transductive,
    Inductive,
}

impl EvalScope {
    pub fn as_str(&self) -> &'static str {
        match self {
            EvalScope::Transductive => "transductive",
            EvalScope::Inductive => "inductive",
        }
    }
}

/// Metric summary for one split; serializes to the CLI's JSON shape.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub split: String,
    pub mode: String,
    pub ap: f64,
    pub ap_index_avg: f64,
    pub auc: f64,
    /// Total scored examples (positives plus sampled negatives).
    pub n: usize,
}

/// Build the interleaved `[positive, negative, ...]` candidate list for a
/// split range. The seed fully determines the corrupted stations, so a fixed
/// seed yields the identical example set across epochs and across scoring
/// methods (model and baselines share it).
pub fn build_eval_pairs(
    split: &DatasetSplit,
    range: Range<usize>,
    scope: EvalScope,
    seed: u64,
) -> Result<Vec<CandidatePair>> {
    let log = &split.log;
    if log.num_stations() < 2 {
        return Err(DygppError::Data(
            "need at least two stations to sample negatives".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for e in &log.events()[range] {
        if scope == EvalScope::Inductive
            && split.inductive_stations.binary_search(&e.station).is_err()
        {
            continue;
        }
        out.push(CandidatePair {
            passenger: e.passenger,
            station: e.station,
            time: e.time,
            target: 1.0,
        });
        out.push(CandidatePair {
            passenger: e.passenger,
            station: corrupt_station(&mut rng, log.num_stations(), e.station),
            time: e.time,
            target: 0.0,
        });
    }
    if out.is_empty() {
        return Err(DygppError::Data(format!(
            "empty evaluation set ({} mode)",
            scope.as_str()
        )));
    }
    Ok(out)
}

/// Turn candidate scores into a metric report.
pub fn report_from_scores(
    split_name: &str,
    scope: EvalScope,
    pairs: &[CandidatePair],
    scores: &[f64],
) -> Result<EvalReport> {
    assert_eq!(pairs.len(), scores.len(), "score count mismatch");
    let examples: Vec<ScoredExample> = pairs
        .iter()
        .zip(scores)
        .map(|(p, &s)| ScoredExample {
            score: s,
            target: if p.target > 0.5 { 1 } else { 0 },
        })
        .collect();
    Ok(EvalReport {
        split: split_name.to_string(),
        mode: scope.as_str().to_string(),
        ap: average_precision(&examples)?,
        ap_index_avg: average_precision_index_averaged(&examples)?,
        auc: auc(&examples)?,
        n: examples.len(),
    })
}

/// Score a split range with the model and summarize.
pub fn evaluate_model(
    model: &DygppModel,
    store: &ParameterStore,
    split: &DatasetSplit,
    split_name: &str,
    scope: EvalScope,
    seed: u64,
) -> Result<EvalReport> {
    let range = split
        .range(split_name)
        .ok_or_else(|| DygppError::Usage(format!("unknown split `{split_name}`")))?;
    let pairs = build_eval_pairs(split, range, scope, seed)?;
    let scores = model.score_pairs(store, &split.log, &pairs);
    report_from_scores(split_name, scope, &pairs, &scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ex(score: f64, target: u8) -> ScoredExample {
        ScoredExample { score, target }
    }

    // -- independent oracles -------------------------------------------------

    /// O(n^2) AP oracle: computes each positive's rank and true-positive
    /// count by pairwise comparison under stable descending order.
    fn ap_oracle(examples: &[ScoredExample]) -> f64 {
        let n = examples.len();
        let mut sum = 0.0;
        let mut pos = 0usize;
        for i in 0..n {
            if examples[i].target != 1 {
                continue;
            }
            pos += 1;
            let mut rank = 1usize;
            let mut tp = 0usize;
            for j in 0..n {
                let ahead = examples[j].score > examples[i].score
                    || (examples[j].score == examples[i].score && j <= i);
                if ahead {
                    if j != i {
                        rank += 1;
                    }
                    if examples[j].target == 1 {
                        tp += 1;
                    }
                }
            }
            sum += tp as f64 / rank as f64;
        }
        sum / pos as f64
    }

    /// All-pairs AUC oracle with half credit for ties.
    fn auc_oracle(examples: &[ScoredExample]) -> f64 {
        let mut wins = 0.0;
        let mut total = 0.0;
        for p in examples.iter().filter(|e| e.target == 1) {
            for q in examples.iter().filter(|e| e.target == 0) {
                total += 1.0;
                if p.score > q.score {
                    wins += 1.0;
                } else if p.score == q.score {
                    wins += 0.5;
                }
            }
        }
        wins / total
    }

    #[test]
    fn ap_known_hand_value() {
        let examples = vec![ex(0.9, 1), ex(0.8, 0), ex(0.7, 1), ex(0.6, 1)];
        // Positives at ranks 1, 3, 4 -> (1/1 + 2/3 + 3/4) / 3 = 29/36.
        let got = average_precision(&examples).unwrap();
        assert!((got - 29.0 / 36.0).abs() < 1e-15);
        assert!((ap_oracle(&examples) - got).abs() < 1e-15);
    }

    #[test]
    fn index_averaged_ap_known_hand_value() {
        let examples = vec![ex(0.9, 1), ex(0.8, 0), ex(0.7, 1), ex(0.6, 1)];
        // Running precisions 1/1, 1/2, 2/3, 3/4 -> mean = 35/48.
        let got = average_precision_index_averaged(&examples).unwrap();
        assert!((got - 35.0 / 48.0).abs() < 1e-15);
    }

    #[test]
    fn auc_known_hand_value() {
        let examples = vec![ex(0.9, 1), ex(0.8, 0), ex(0.7, 1), ex(0.6, 1)];
        let got = auc(&examples).unwrap();
        assert!((got - 1.0 / 3.0).abs() < 1e-15);
        assert!((auc_oracle(&examples) - got).abs() < 1e-15);
    }

    #[test]
    fn ap_three_example_hand_value() {
        // Positives land at ranks 2 and 3 -> (1/2 + 2/3) / 2 = 7/12.
        let examples = vec![ex(0.9, 0), ex(0.8, 1), ex(0.4, 1)];
        let got = average_precision(&examples).unwrap();
        assert!((got - 7.0 / 12.0).abs() < 1e-12);
        assert!((got - 0.58333).abs() < 1e-5);
    }

    #[test]
    fn auc_one_of_two_pairs_wins() {
        // Positive 0.9 beats negative 0.8; positive 0.4 loses -> 1/2.
        let examples = vec![ex(0.9, 1), ex(0.4, 1), ex(0.8, 0)];
        assert_eq!(auc(&examples).unwrap(), 0.5);
    }

    #[test]
    fn perfect_and_inverted_rankings() {
        let perfect = vec![ex(0.9, 1), ex(0.8, 1), ex(0.1, 0), ex(0.0, 0)];
        assert_eq!(average_precision(&perfect).unwrap(), 1.0);
        assert_eq!(auc(&perfect).unwrap(), 1.0);
        let inverted = vec![ex(0.9, 0), ex(0.8, 0), ex(0.1, 1), ex(0.0, 1)];
        assert_eq!(auc(&inverted).unwrap(), 0.0);
    }

    #[test]
    fn ties_give_half_credit_in_auc_and_stable_order_in_ap() {
        // All scores identical; input order is pos, neg, pos, neg.
        let tied = vec![ex(0.5, 1), ex(0.5, 0), ex(0.5, 1), ex(0.5, 0)];
        assert_eq!(auc(&tied).unwrap(), 0.5);
        // Stable sort keeps input order: positives at ranks 1 and 3.
        let ap = average_precision(&tied).unwrap();
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert!((ap_oracle(&tied) - ap).abs() < 1e-15);
    }

    #[test]
    fn degenerate_inputs_are_data_errors() {
        assert!(average_precision(&[]).is_err());
        assert!(average_precision(&[ex(0.5, 0)]).is_err());
        assert!(auc(&[ex(0.5, 1)]).is_err());
        let nan = vec![ex(f64::NAN, 1), ex(0.2, 0)];
        assert_eq!(average_precision(&nan).unwrap_err().exit_code(), 3);
    }

    proptest! {
        #[test]
        fn ap_matches_oracle(
            scores in proptest::collection::vec(0u8..8, 2..40),
            targets in proptest::collection::vec(0u8..2, 2..40),
        ) {
            // Coarse score grid to force plenty of ties.
            let n = scores.len().min(targets.len());
            let examples: Vec<ScoredExample> = (0..n)
                .map(|i| ex(scores[i] as f64 / 4.0, targets[i]))
                .collect();
            prop_assume!(examples.iter().any(|e| e.target == 1));
            let got = average_precision(&examples).unwrap();
            let want = ap_oracle(&examples);
            prop_assert!((got - want).abs() < 1e-12);
        }

        #[test]
        fn auc_matches_oracle(
            scores in proptest::collection::vec(0u8..8, 2..40),
            targets in proptest::collection::vec(0u8..2, 2..40),
        ) {
            let n = scores.len().min(targets.len());
            let examples: Vec<ScoredExample> = (0..n)
                .map(|i| ex(scores[i] as f64 / 4.0, targets[i]))
                .collect();
            prop_assume!(examples.iter().any(|e| e.target == 1));
            prop_assume!(examples.iter().any(|e| e.target == 0));
            let got = auc(&examples).unwrap();
            let want = auc_oracle(&examples);
            prop_assert!((got - want).abs() < 1e-12);
        }

        #[test]
        fn auc_symmetric_under_class_flip_with_negated_scores(
            raw in proptest::collection::vec((0u8..10, 0u8..2), 3..30),
        ) {
            let examples: Vec<ScoredExample> =
                raw.iter().map(|&(s, t)| ex(s as f64 / 3.0, t)).collect();
            prop_assume!(examples.iter().any(|e| e.target == 1));
            prop_assume!(examples.iter().any(|e| e.target == 0));
            let flipped: Vec<ScoredExample> =
                examples.iter().map(|e| ex(-e.score, 1 - e.target)).collect();
            let a = auc(&examples).unwrap();
            let b = auc(&flipped).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn both_metrics_invariant_under_monotone_transforms(
            raw in proptest::collection::vec((0u8..12, 0u8..2), 3..30),
        ) {
            let examples: Vec<ScoredExample> =
                raw.iter().map(|&(s, t)| ex(s as f64 / 3.0 - 1.0, t)).collect();
            prop_assume!(examples.iter().any(|e| e.target == 1));
            prop_assume!(examples.iter().any(|e| e.target == 0));
            let transforms: [fn(f64) -> f64; 3] = [
                |x| 2.0 * x + 1.0,
                |x| x.tanh(),
                |x| x.exp(),
            ];
            let ap0 = average_precision(&examples).unwrap();
            let auc0 = auc(&examples).unwrap();
            for f in transforms {
                let mapped: Vec<ScoredExample> =
                    examples.iter().map(|e| ex(f(e.score), e.target)).collect();
                prop_assert!((average_precision(&mapped).unwrap() - ap0).abs() < 1e-12);
                prop_assert!((auc(&mapped).unwrap() - auc0).abs() < 1e-12);
            }
        }
    }

    // -- evaluation pair construction ----------------------------------------

    #[test]
    fn eval_pairs_fixed_seed_fixed_negatives() {
        use crate::event_store::{chronological_split, EventLog, Label, RawEvent, SplitConfig};
        let rows: Vec<RawEvent> = (0..40)
            .map(|i| RawEvent {
                passenger: i % 5,
                station: i % 7,
                label: if i % 2 == 0 { Label::Board } else { Label::Alight },
                time: i as i64 * 100,
            })
            .collect();
        let log = EventLog::from_raw(&rows).unwrap();
        let split = chronological_split(&log, &SplitConfig::default()).unwrap();
        let a = build_eval_pairs(&split, split.val.clone(), EvalScope::Transductive, 5).unwrap();
        let b = build_eval_pairs(&split, split.val.clone(), EvalScope::Transductive, 5).unwrap();
        assert_eq!(a, b);
        let c = build_eval_pairs(&split, split.val.clone(), EvalScope::Transductive, 6).unwrap();
        assert_ne!(a, c);
        // Interleaving and negative validity.
        for pair in a.chunks(2) {
            assert_eq!(pair[0].target, 1.0);
            assert_eq!(pair[1].target, 0.0);
            assert_ne!(pair[0].station, pair[1].station);
        }
    }

    #[test]
    fn inductive_scope_keeps_only_hidden_stations() {
        use crate::event_store::{chronological_split, EventLog, Label, RawEvent, SplitConfig};
        let rows: Vec<RawEvent> = (0..60)
            .map(|i| RawEvent {
                passenger: i % 6,
                station: i % 5,
                label: Label::Board,
                time: i as i64,
            })
            .collect();
        let log = EventLog::from_raw(&rows).unwrap();
        let cfg = SplitConfig {
            inductive_fraction: 0.4,
            seed: 3,
            ..SplitConfig::default()
        };
        let split = chronological_split(&log, &cfg).unwrap();
        assert!(!split.inductive_stations.is_empty());
        let pairs =
            build_eval_pairs(&split, split.test.clone(), EvalScope::Inductive, 1).unwrap();
        for p in pairs.iter().filter(|p| p.target == 1.0) {
            assert!(split.inductive_stations.binary_search(&p.station).is_ok());
        }
        let all =
            build_eval_pairs(&split, split.test.clone(), EvalScope::Transductive, 1).unwrap();
        assert!(all.len() >= pairs.len());
    }
}
