//! End-to-end acceptance gate.
//!
//! One test per shipping criterion; each prints a single PASS line on
//! success (visible with `--nocapture`) and fails loudly otherwise. Criteria
//! that involve learned models train real ones on the synthetic desk world,
//! so this suite takes several minutes on one core.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dygpp::autodiff::checkpoint::load_checkpoint;
use dygpp::baselines::{evaluate_baseline, BaselineMethod};
use dygpp::batch_sampler::{co_occurrence_pairs, partition_time_batches, CoKey, NeighborSequence};
use dygpp::config::Config;
use dygpp::event_store::{
    chronological_split, DatasetSplit, EventLog, Label, NodeKind, RawEvent, SplitConfig,
};
use dygpp::metrics::{
    auc, average_precision, build_eval_pairs, evaluate_model, EvalScope, ScoredExample,
};
use dygpp::model::{run_toy_gradcheck, DygppModel};
use dygpp::synth::{generate_log, GeneratorConfig};
use dygpp::trainer::{train, train_with_validator, TrainRunConfig, DEFAULT_EVAL_SEED};

/// Path of the checked-in desk-scale run configuration.
fn desk_config() -> Config {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/desk.cfg");
    let cfg = Config::resolve(Some(path.as_ref()), &[]).expect("desk config parses");
    // The published defaults this run is required to keep.
    assert_eq!(cfg.model.num_neighbors, 20);
    assert_eq!(cfg.model.max_sequence, 32);
    assert_eq!(cfg.model.dim_channel, 50);
    assert_eq!(cfg.model.time_scale, 1e-6);
    assert_eq!(cfg.model.ffn_layers, 1);
    assert_eq!(cfg.train.learning_rate, 1e-4);
    assert_eq!(cfg.train.max_epochs, 50);
    assert_eq!(cfg.time_gap_seconds, 1000);
    cfg
}

fn desk_split() -> DatasetSplit {
    let log = generate_log(&GeneratorConfig::desk()).expect("desk world generates");
    chronological_split(&log, &SplitConfig::default()).expect("desk world splits")
}

/// Train on `split` with `cfg`, returning (test AP, test AUC, train seconds).
fn train_and_score(split: &DatasetSplit, cfg: &Config) -> (f64, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.seed);
    let (model, mut store) = DygppModel::init(
        &cfg.model,
        split.log.num_passengers(),
        split.log.num_stations(),
        &mut rng,
    )
    .expect("model initializes");
    let started = Instant::now();
    let outcome = train(&model, &mut store, split, &cfg.train, |_| {}).expect("training runs");
    let secs = started.elapsed().as_secs_f64();
    let report = evaluate_model(
        &model,
        &outcome.best_store,
        split,
        "test",
        EvalScope::Transductive,
        cfg.train.eval_seed,
    )
    .expect("test evaluation runs");
    (report.ap, report.auc, secs)
}

// ---------------------------------------------------------------------------
// 1. Gradient correctness on a toy model
// ---------------------------------------------------------------------------

#[test]
fn a1_toy_gradients_match_finite_differences() {
    let started = Instant::now();
    let reports = run_toy_gradcheck(1e-6, usize::MAX, 7).expect("gradcheck runs");
    let secs = started.elapsed().as_secs_f64();

    assert!(!reports.is_empty(), "no parameter blocks checked");
    for block in &reports {
        assert!(block.coords_checked > 0, "{}: no coordinates", block.name);
        assert!(
            block.max_rel_err < 1e-4,
            "{}: max relative error {:.3e} over tolerance",
            block.name,
            block.max_rel_err
        );
    }
    assert!(secs < 10.0, "gradient check took {secs:.1}s (budget 10s)");
    println!(
        "PASS 1/9 gradient check: {} blocks, worst rel err {:.2e}, {:.2}s",
        reports.len(),
        reports
            .iter()
            .map(|b| b.max_rel_err)
            .fold(0.0f64, f64::max),
        secs
    );
}

// ---------------------------------------------------------------------------
// 2. Co-occurrence worked example, exact
// ---------------------------------------------------------------------------

#[test]
fn a2_cooccurrence_worked_example_is_exact() {
    // The passenger sequence is reproducible from a real log: u1 interacted
    // with s1, s2, s1, s3 and queries at t=13 with 5 slots.
    let rows: Vec<RawEvent> = [(1u64, 1u64, 1i64), (1, 2, 5), (1, 1, 9), (1, 3, 12)]
        .iter()
        .map(|&(p, s, t)| RawEvent {
            passenger: p,
            station: s,
            label: Label::Board,
            time: t,
        })
        .collect();
    let log = EventLog::from_raw(&rows).expect("toy log builds");
    let seq_u1 = NeighborSequence::sample(&log, NodeKind::Passenger, 1, 13, 5);
    let ids: Vec<u32> = seq_u1.slots.iter().map(|s| s.id).collect();
    assert_eq!(ids, vec![1, 1, 2, 1, 3], "u1 sequence ids");
    let deltas: Vec<i64> = seq_u1.slots.iter().map(|s| s.delta).collect();
    assert_eq!(deltas, vec![0, 12, 8, 4, 1], "u1 sequence time offsets");

    // The counterpart sequence [s2, u2, u1, u1] is given directly.
    let q_u1: Vec<CoKey> = seq_u1.co_keys();
    let q_s2: Vec<CoKey> = vec![
        Some((NodeKind::Station, 2)),
        Some((NodeKind::Passenger, 2)),
        Some((NodeKind::Passenger, 1)),
        Some((NodeKind::Passenger, 1)),
    ];

    let co_u1 = co_occurrence_pairs(&q_u1, &q_s2);
    let co_s2 = co_occurrence_pairs(&q_s2, &q_u1);
    assert_eq!(
        co_u1,
        vec![[1.0, 2.0], [2.0, 0.0], [1.0, 1.0], [2.0, 0.0], [1.0, 0.0]],
        "passenger-side co-occurrence"
    );
    assert_eq!(
        co_s2,
        vec![[1.0, 1.0], [1.0, 0.0], [2.0, 1.0], [2.0, 1.0]],
        "station-side co-occurrence"
    );
    println!("PASS 2/9 co-occurrence worked example: both sides exact");
}

// ---------------------------------------------------------------------------
// 3. Ranking metrics vs exhaustive oracles
// ---------------------------------------------------------------------------

/// Definitional AP: stable-sort by descending score, then average, over the
/// positives, the precision at each positive's rank (recomputed by scanning
/// the prefix every time).
fn ap_oracle(examples: &[ScoredExample]) -> f64 {
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.sort_by(|&a, &b| {
        examples[b]
            .score
            .partial_cmp(&examples[a].score)
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut sum = 0.0;
    let mut positives = 0u32;
    for (rank0, &i) in order.iter().enumerate() {
        if examples[i].target == 1 {
            let hits = order[..=rank0]
                .iter()
                .filter(|&&j| examples[j].target == 1)
                .count();
            sum += hits as f64 / (rank0 + 1) as f64;
            positives += 1;
        }
    }
    sum / positives as f64
}

/// Definitional AUC: over every positive/negative pair, count wins as 1 and
/// ties as 1/2.
fn auc_oracle(examples: &[ScoredExample]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0u64;
    for p in examples.iter().filter(|e| e.target == 1) {
        for n in examples.iter().filter(|e| e.target == 0) {
            pairs += 1;
            if p.score > n.score {
                wins += 1.0;
            } else if p.score == n.score {
                wins += 0.5;
            }
        }
    }
    wins / pairs as f64
}

/// Random instance with n ≤ 12, at least one positive and one negative, and
/// deliberate score ties (scores on a coarse grid half the time).
fn random_instance(rng: &mut ChaCha8Rng) -> Vec<ScoredExample> {
    loop {
        let n = rng.gen_range(2..=12);
        let coarse = rng.gen_bool(0.5);
        let ex: Vec<ScoredExample> = (0..n)
            .map(|_| ScoredExample {
                score: if coarse {
                    rng.gen_range(0..=4) as f64 / 4.0
                } else {
                    rng.gen::<f64>()
                },
                target: rng.gen_bool(0.5) as u8,
            })
            .collect();
        let pos = ex.iter().filter(|e| e.target == 1).count();
        if pos > 0 && pos < n {
            return ex;
        }
    }
}

/// Random strictly increasing piecewise-linear map on [0, 1].
fn random_monotone_map(rng: &mut ChaCha8Rng) -> impl Fn(f64) -> f64 {
    let k = rng.gen_range(2..=5);
    // Interior knots split [0,1]; images rise by positive jumps.
    let mut xs = vec![0.0];
    let mut ys = vec![rng.gen_range(-3.0..3.0)];
    for i in 1..=k {
        xs.push(i as f64 / k as f64);
        ys.push(ys[i - 1] + rng.gen_range(0.01..2.0));
    }
    move |v: f64| {
        let seg = ((v * k as f64).floor() as usize).min(k - 1);
        let t = (v - xs[seg]) / (xs[seg + 1] - xs[seg]);
        ys[seg] + t * (ys[seg + 1] - ys[seg])
    }
}

#[test]
fn a3_metrics_match_exhaustive_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for _ in 0..1000 {
        let ex = random_instance(&mut rng);
        let ap = average_precision(&ex).expect("ap computes");
        let au = auc(&ex).expect("auc computes");
        assert!((ap - ap_oracle(&ex)).abs() < 1e-12, "AP mismatch on {ex:?}");
        assert!((au - auc_oracle(&ex)).abs() < 1e-12, "AUC mismatch on {ex:?}");
    }

    // Strictly monotone score transforms change neither metric: only the
    // ranking (ties included) matters.
    for _ in 0..1000 {
        let ex = random_instance(&mut rng);
        let map = random_monotone_map(&mut rng);
        let mapped: Vec<ScoredExample> = ex
            .iter()
            .map(|e| ScoredExample {
                score: map(e.score),
                target: e.target,
            })
            .collect();
        let (ap0, ap1) = (
            average_precision(&ex).unwrap(),
            average_precision(&mapped).unwrap(),
        );
        let (au0, au1) = (auc(&ex).unwrap(), auc(&mapped).unwrap());
        assert!((ap0 - ap1).abs() < 1e-12, "AP not invariant on {ex:?}");
        assert!((au0 - au1).abs() < 1e-12, "AUC not invariant on {ex:?}");
    }
    println!("PASS 3/9 metrics: 1000 oracle instances + 1000 monotone maps");
}

// ---------------------------------------------------------------------------
// 4. Time-interval batching vs sequential-scan oracle
// ---------------------------------------------------------------------------

#[test]
fn a4_time_batching_matches_sequential_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for _ in 0..1000 {
        let n = rng.gen_range(1..=64);
        let mut times: Vec<i64> = (0..n).map(|_| rng.gen_range(0..5_000)).collect();
        times.sort_unstable();
        let rows: Vec<RawEvent> = times
            .iter()
            .map(|&t| RawEvent {
                passenger: 1,
                station: 1,
                label: Label::Board,
                time: t,
            })
            .collect();
        let log = EventLog::from_raw(&rows).expect("stream builds");
        let gap = if rng.gen_bool(0.1) {
            0
        } else {
            rng.gen_range(0..1_500)
        };
        let got = partition_time_batches(log.events(), 0..log.len(), gap);

        // Sequential scan: extend the open batch while the span stays within
        // the gap, otherwise start a new one.
        let mut oracle: Vec<std::ops::Range<usize>> = Vec::new();
        for i in 0..times.len() {
            match oracle.last_mut() {
                Some(open) if times[i] - times[open.start] <= gap => open.end = i + 1,
                _ => oracle.push(i..i + 1),
            }
        }
        assert_eq!(got, oracle, "batching mismatch (gap {gap}, times {times:?})");

        // Partition property: consecutive, covering, nonempty, within span.
        let mut cursor = 0;
        for b in &got {
            assert_eq!(b.start, cursor);
            assert!(b.end > b.start);
            assert!(times[b.end - 1] - times[b.start] <= gap);
            cursor = b.end;
        }
        assert_eq!(cursor, times.len());
    }
    println!("PASS 4/9 batching: 1000 random streams match the scan oracle");
}

// ---------------------------------------------------------------------------
// 5. Neighbor sampling vs full-scan oracle
// ---------------------------------------------------------------------------

#[test]
fn a5_neighbor_sampling_matches_full_scan_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    for _ in 0..1000 {
        let n = rng.gen_range(1..=50);
        let rows: Vec<RawEvent> = (0..n)
            .map(|_| RawEvent {
                passenger: rng.gen_range(1..=6),
                station: rng.gen_range(1..=5),
                label: if rng.gen_bool(0.5) {
                    Label::Board
                } else {
                    Label::Alight
                },
                time: rng.gen_range(0..400),
            })
            .collect();
        let log = EventLog::from_raw(&rows).expect("log builds");

        let kind = if rng.gen_bool(0.5) {
            NodeKind::Passenger
        } else {
            NodeKind::Station
        };
        let max_id = match kind {
            NodeKind::Passenger => log.num_passengers(),
            NodeKind::Station => log.num_stations(),
        };
        let owner = rng.gen_range(1..=max_id);
        let t = rng.gen_range(0..500);
        let seq_len = rng.gen_range(1..=8);
        let seq = NeighborSequence::sample(&log, kind, owner, t, seq_len);

        // Full scan in stream order: every event of the owner strictly
        // before t, keeping the last seq_len - 1.
        let mine: Vec<usize> = log
            .events()
            .iter()
            .enumerate()
            .filter(|(_, e)| e.node(kind) == owner && e.time < t)
            .map(|(i, _)| i)
            .collect();
        let keep = &mine[mine.len().saturating_sub(seq_len - 1)..];

        assert_eq!(seq.slots.len(), seq_len);
        assert_eq!(seq.slots[0].id, owner, "slot 0 is the node itself");
        assert_eq!(seq.slots[0].kind, kind);
        assert_eq!(seq.slots[0].delta, 0);
        for (slot, &ei) in seq.slots[1..].iter().zip(keep) {
            let e = &log.events()[ei];
            assert_eq!(slot.id, e.node(kind.other()), "neighbor id");
            assert_eq!(slot.label, Some(e.label));
            assert_eq!(slot.delta, t - e.time);
            assert!(e.time < t, "sampled an event at or after the query time");
        }
        for slot in &seq.slots[1 + keep.len()..] {
            assert!(slot.is_padding(), "missing zero padding");
        }
    }
    println!("PASS 5/9 sampling: 1000 random logs match the full-scan oracle");
}

// ---------------------------------------------------------------------------
// 6. Pipeline calibration on the synthetic worlds
// ---------------------------------------------------------------------------

#[test]
fn a6_pipeline_calibration_on_desk_worlds() {
    // A noiseless world is perfectly predictable from per-passenger
    // transition counts.
    let clean = GeneratorConfig {
        noise_rate: 0.0,
        ..GeneratorConfig::desk()
    };
    let clean_split = chronological_split(
        &generate_log(&clean).expect("clean world generates"),
        &SplitConfig::default(),
    )
    .expect("clean world splits");
    let ptop = evaluate_baseline(
        BaselineMethod::PersonalTop,
        &clean_split,
        "test",
        EvalScope::Transductive,
        DEFAULT_EVAL_SEED,
    )
    .expect("personal baseline evaluates");
    assert!(
        (ptop.ap - 1.0).abs() <= 1e-9,
        "personal baseline AP {} on the noiseless world",
        ptop.ap
    );

    // The noisy desk world: the learned model must clearly beat the global
    // transition baseline within the time budget.
    let cfg = desk_config();
    let split = desk_split();
    let top = evaluate_baseline(
        BaselineMethod::Top,
        &split,
        "test",
        EvalScope::Transductive,
        cfg.train.eval_seed,
    )
    .expect("global baseline evaluates");
    let (ap, auc, secs) = train_and_score(&split, &cfg);

    assert!(secs < 600.0, "training took {secs:.0}s (budget 600s)");
    assert!(auc >= 0.85, "test AUC {auc:.4} below 0.85");
    assert!(
        ap - top.ap >= 0.05,
        "test AP {ap:.4} does not exceed the global baseline {:.4} by 0.05",
        top.ap
    );
    println!(
        "PASS 6/9 calibration: noiseless personal AP {:.9}; desk AP {ap:.4} vs baseline {:.4}, AUC {auc:.4}, {secs:.0}s",
        ptop.ap, top.ap
    );
}

// ---------------------------------------------------------------------------
// 7. Ablating the co-occurrence channel hurts
// ---------------------------------------------------------------------------

#[test]
fn a7_ablating_cooccurrence_degrades_ap() {
    let split = desk_split();
    let base = desk_config();
    let mut diffs = Vec::new();
    for seed in [1u64, 2, 3] {
        let mut full = base.clone();
        full.train.seed = seed;
        full.train.max_epochs = 6;
        full.train.patience = 6;
        let mut ablated = full.clone();
        ablated.model.ablate.co = true;

        let (ap_full, _, _) = train_and_score(&split, &full);
        let (ap_ablated, _, _) = train_and_score(&split, &ablated);
        diffs.push(ap_full - ap_ablated);
    }
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    assert!(
        mean >= 0.02,
        "mean AP drop {mean:.4} below 0.02 (per-seed {diffs:?})"
    );
    println!("PASS 7/9 ablation: removing co-occurrence costs {mean:.4} AP (3 seeds)");
}

// ---------------------------------------------------------------------------
// 8. Determinism and checkpoint persistence
// ---------------------------------------------------------------------------

#[test]
fn a8_reruns_are_identical_and_checkpoints_round_trip() {
    // Small world and a short run keep this cheap; determinism does not
    // depend on scale.
    let world = GeneratorConfig {
        passengers: 100,
        stations: 10,
        days: 30,
        commuter_fraction: 0.8,
        noise_rate: 0.15,
        seed: 11,
    };
    let split = chronological_split(
        &generate_log(&world).expect("world generates"),
        &SplitConfig::default(),
    )
    .expect("world splits");

    let dir = tempfile::tempdir().expect("tempdir");
    let mut cfg = desk_config();
    cfg.train.max_epochs = 3;
    cfg.train.patience = 3;

    let run = |ckpt: std::path::PathBuf| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.seed);
        let (model, mut store) = DygppModel::init(
            &cfg.model,
            split.log.num_passengers(),
            split.log.num_stations(),
            &mut rng,
        )
        .expect("model initializes");
        let mut train_cfg = cfg.train.clone();
        train_cfg.checkpoint_path = Some(ckpt);
        let outcome =
            train(&model, &mut store, &split, &train_cfg, |_| {}).expect("training runs");
        let report = evaluate_model(
            &model,
            &outcome.best_store,
            &split,
            "test",
            EvalScope::Transductive,
            cfg.train.eval_seed,
        )
        .expect("evaluation runs");
        (
            outcome,
            serde_json::to_string(&report).expect("report serializes"),
        )
    };

    let ck1 = dir.path().join("run1.ckpt");
    let ck2 = dir.path().join("run2.ckpt");
    let (outcome1, json1) = run(ck1.clone());
    let (_outcome2, json2) = run(ck2.clone());
    assert_eq!(json1, json2, "identical runs produced different metric JSON");
    assert_eq!(
        std::fs::read(&ck1).expect("checkpoint 1 readable"),
        std::fs::read(&ck2).expect("checkpoint 2 readable"),
        "identical runs produced different checkpoints"
    );

    // Reload and compare scores bitwise on 1000 events.
    let (reloaded, _adam) = load_checkpoint(&ck1).expect("checkpoint loads");
    let mut store_for_attach = reloaded;
    let model = DygppModel::attach(
        &cfg.model,
        split.log.num_passengers(),
        split.log.num_stations(),
        &mut store_for_attach,
    )
    .expect("checkpoint attaches");

    let mut pairs = build_eval_pairs(
        &split,
        split.test.clone(),
        EvalScope::Transductive,
        cfg.train.eval_seed,
    )
    .expect("eval pairs build");
    pairs.truncate(1000);
    assert_eq!(pairs.len(), 1000, "world too small for 1000 scored events");
    let before = model.score_pairs(&outcome1.best_store, &split.log, &pairs);
    let after = model.score_pairs(&store_for_attach, &split.log, &pairs);
    for (i, (a, b)) in before.iter().zip(&after).enumerate() {
        assert_eq!(
            a.to_bits(),
            b.to_bits(),
            "score {i} differs after checkpoint round-trip"
        );
    }
    println!("PASS 8/9 determinism: identical JSON + bitwise-stable reload on 1000 events");
}

// ---------------------------------------------------------------------------
// 9. Early stopping halts exactly `patience` epochs after the last best
// ---------------------------------------------------------------------------

#[test]
fn a9_early_stopping_halts_after_patience() {
    let world = GeneratorConfig {
        passengers: 10,
        stations: 5,
        days: 7,
        commuter_fraction: 0.8,
        noise_rate: 0.1,
        seed: 3,
    };
    let split = chronological_split(
        &generate_log(&world).expect("world generates"),
        &SplitConfig::default(),
    )
    .expect("world splits");

    let cfg = desk_config();
    let run_cfg = TrainRunConfig {
        max_epochs: 60,
        ..TrainRunConfig::default()
    };
    assert_eq!(run_cfg.patience, 20, "default patience");

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (model, mut store) = DygppModel::init(
        &cfg.model,
        split.log.num_passengers(),
        split.log.num_stations(),
        &mut rng,
    )
    .expect("model initializes");

    // Scripted validation: improvements at epochs 1 and 3, then a plateau
    // below the best. Training must run exactly 20 epochs past epoch 3.
    let script = |epoch: u32| -> f64 {
        match epoch {
            1 => 0.30,
            2 => 0.25,
            3 => 0.50,
            _ => 0.49,
        }
    };
    let mut seen = Vec::new();
    let outcome = train_with_validator(
        &model,
        &mut store,
        &split,
        &run_cfg,
        |epoch, _| Ok((script(epoch), 0.5)),
        &mut |rec| seen.push(rec.epoch),
    )
    .expect("training runs");

    assert_eq!(outcome.best_epoch, 3);
    assert_eq!(outcome.best_val_ap, 0.50);
    assert_eq!(
        outcome.history.len(),
        23,
        "expected halt exactly 20 epochs after the last improvement"
    );
    assert_eq!(seen.len(), 23);
    println!("PASS 9/9 early stopping: halted at epoch 23 = best(3) + patience(20)");
}
