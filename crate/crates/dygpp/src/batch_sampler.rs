//! Neighbor-sequence construction, co-occurrence counting, time-interval
//! batching and negative sampling.
//!
//! For a node at query time `t`, the model consumes a fixed-length sequence:
//! slot 0 is the node itself (zero time offset, neutral edge), followed by
//! its most recent interactions strictly before `t` in ascending time order,
//! zero-padded at the tail. Padding slots use the reserved id 0 so they hit
//! the frozen all-zero feature row.

use std::collections::HashMap;
use std::ops::Range;

use rand::Rng;

use crate::event_store::{Event, EventLog, Label, NodeKind};

/// One slot of a neighbor sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeqSlot {
    /// Internal node id; 0 marks a padding slot.
    pub id: u32,
    /// Side the id lives on: the owner's side at slot 0, the counterpart
    /// side everywhere else (including padding).
    pub kind: NodeKind,
    /// Interaction direction; `None` for the self slot and padding.
    pub label: Option<Label>,
    /// `query_time - event_time`; 0 for the self slot and padding.
    pub delta: i64,
}

impl SeqSlot {
    /// Signed scalar fed to the edge encoder: board -1, alight +1,
    /// self/padding 0.
    pub fn edge_sign(&self) -> f64 {
        match self.label {
            Some(Label::Board) => -1.0,
            Some(Label::Alight) => 1.0,
            None => 0.0,
        }
    }

    pub fn is_padding(&self) -> bool {
        self.id == 0
    }
}

/// Fixed-length recent-history sequence for one node at one query time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborSequence {
    pub owner: u32,
    pub owner_kind: NodeKind,
    pub query_time: i64,
    pub slots: Vec<SeqSlot>,
}

/// Identity used for co-occurrence counting: `None` for padding, otherwise
/// the (side, id) pair, so a passenger and a station with the same numeric id
/// never collide.
pub type CoKey = Option<(NodeKind, u32)>;

impl NeighborSequence {
    /// Build the sequence for `owner` at `query_time` with `seq_len` total
    /// slots (self + up to `seq_len - 1` most recent neighbors).
    pub fn sample(
        log: &EventLog,
        owner_kind: NodeKind,
        owner: u32,
        query_time: i64,
        seq_len: usize,
    ) -> NeighborSequence {
        assert!(seq_len >= 1, "sequence needs at least the self slot");
        let mut slots = Vec::with_capacity(seq_len);
        slots.push(SeqSlot {
            id: owner,
            kind: owner_kind,
            label: None,
            delta: 0,
        });
        let counter_kind = owner_kind.other();
        for &idx in log.recent_events(owner_kind, owner, query_time, seq_len - 1) {
            let e: &Event = &log.events()[idx as usize];
            slots.push(SeqSlot {
                id: e.node(counter_kind),
                kind: counter_kind,
                label: Some(e.label),
                delta: query_time - e.time,
            });
        }
        while slots.len() < seq_len {
            slots.push(SeqSlot {
                id: 0,
                kind: counter_kind,
                label: None,
                delta: 0,
            });
        }
        NeighborSequence {
            owner,
            owner_kind,
            query_time,
            slots,
        }
    }

    /// Number of non-padding slots.
    pub fn occupied(&self) -> usize {
        self.slots.iter().filter(|s| !s.is_padding()).count()
    }

    /// Counting keys for the co-occurrence encoder.
    pub fn co_keys(&self) -> Vec<CoKey> {
        self.slots
            .iter()
            .map(|s| {
                if s.is_padding() {
                    None
                } else {
                    Some((s.kind, s.id))
                }
            })
            .collect()
    }
}

/// Per-slot `[count in own sequence, count in the other sequence]` pairs.
///
/// Every non-padding slot counts how often its node appears in each of the
/// two sequences (the self slot participates like any other); padding slots
/// yield `[0, 0]`.
pub fn co_occurrence_pairs(own: &[CoKey], other: &[CoKey]) -> Vec<[f64; 2]> {
    let tally = |keys: &[CoKey]| -> HashMap<(NodeKind, u32), u32> {
        let mut counts = HashMap::new();
        for key in keys.iter().flatten() {
            *counts.entry(*key).or_insert(0) += 1;
        }
        counts
    };
    let own_counts = tally(own);
    let other_counts = tally(other);
    own.iter()
        .map(|key| match key {
            None => [0.0, 0.0],
            Some(k) => [
                own_counts.get(k).copied().unwrap_or(0) as f64,
                other_counts.get(k).copied().unwrap_or(0) as f64,
            ],
        })
        .collect()
}

/// Both directions at once: `(pairs for a, pairs for b)`.
pub fn co_occurrence(
    a: &NeighborSequence,
    b: &NeighborSequence,
) -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
    let ka = a.co_keys();
    let kb = b.co_keys();
    (co_occurrence_pairs(&ka, &kb), co_occurrence_pairs(&kb, &ka))
}

// ---------------------------------------------------------------------------
// Time-interval batching
// ---------------------------------------------------------------------------

/// Greedy left-to-right partition of `range` into batches whose time span
/// (last timestamp minus first) never exceeds `gap`. A batch closes when the
/// next event would stretch it past the gap, so every batch is maximal.
pub fn partition_time_batches(
    events: &[Event],
    range: Range<usize>,
    gap: i64,
) -> Vec<Range<usize>> {
    assert!(gap >= 0, "time gap must be non-negative");
    let mut batches = Vec::new();
    let mut start = range.start;
    while start < range.end {
        let t0 = events[start].time;
        let mut end = start + 1;
        while end < range.end && events[end].time - t0 <= gap {
            end += 1;
        }
        batches.push(start..end);
        start = end;
    }
    batches
}

// ---------------------------------------------------------------------------
// Negative sampling
// ---------------------------------------------------------------------------

/// Draw a station id uniformly from `1..=num_stations` excluding `exclude`.
/// Uses exactly one RNG draw. Requires at least two stations.
pub fn corrupt_station<R: Rng>(rng: &mut R, num_stations: u32, exclude: u32) -> u32 {
    assert!(num_stations >= 2, "need two stations to corrupt");
    let drawn = rng.gen_range(1..num_stations); // 1..=num_stations-1
    if drawn >= exclude {
        drawn + 1
    } else {
        drawn
    }
}

/// A scored candidate interaction: the positive event itself or a corrupted
/// copy with a substituted station.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidatePair {
    pub passenger: u32,
    pub station: u32,
    pub time: i64,
    /// 1.0 for observed events, 0.0 for corrupted ones.
    pub target: f64,
}

/// Expand events into interleaved `[positive, negative, positive, ...]`
/// candidate pairs, one corrupted station per event. The interleaving is
/// relied on elsewhere: under tied scores, a stable sort keeps each positive
/// ahead of its own negative.
pub fn paired_candidates<R: Rng>(
    events: &[Event],
    range: Range<usize>,
    num_stations: u32,
    rng: &mut R,
) -> Vec<CandidatePair> {
    let mut out = Vec::with_capacity(range.len() * 2);
    for e in &events[range] {
        out.push(CandidatePair {
            passenger: e.passenger,
            station: e.station,
            time: e.time,
            target: 1.0,
        });
        out.push(CandidatePair {
            passenger: e.passenger,
            station: corrupt_station(rng, num_stations, e.station),
            time: e.time,
            target: 0.0,
        });
    }
    out
}
