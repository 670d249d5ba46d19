//! Frequency-count baselines: TOP and Personal TOP.
//!
//! Both reduce a passenger's history to station transition statistics.
//! Consecutive events of one passenger with differing labels form a
//! transition: a board followed by the next alight records "after boarding,
//! this alighting station followed", and an alight followed by the next
//! board records the reverse. Scoring looks up the passenger's most recent
//! event before the query time to decide the travel direction.
//!
//! TOP pools transitions over all passengers and conditions on direction
//! alone: after a board it scores candidates by how often anyone alights
//! there, and after an alight by how often anyone boards there. Personal TOP
//! keeps one table per passenger and additionally conditions on the station
//! of that most recent event, so a rider's return leg is scored against what
//! they personally did the previous times they were at that exact station.
//! Passengers with no fitted transitions of their own fall back to the
//! pooled table and therefore score identically to TOP.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::batch_sampler::CandidatePair;
use crate::error::{DygppError, Result};
use crate::event_store::{DatasetSplit, Event, EventLog, Label, NodeKind};
use crate::metrics::{build_eval_pairs, report_from_scores, EvalReport, EvalScope};

/// Travel status implied by a passenger's most recent event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Last event was a board; the next event should be an alight.
    WhenBoarding,
    /// Last event was an alight; the next event should be a board.
    WhenAlighting,
}

impl From<Label> for Direction {
    fn from(label: Label) -> Self {
        match label {
            Label::Board => Direction::WhenBoarding,
            Label::Alight => Direction::WhenAlighting,
        }
    }
}

/// Counts of follow-up stations for one conditioning context.
#[derive(Debug, Clone, Default)]
struct CountTable {
    counts: HashMap<u32, u64>,
    total: u64,
}

impl CountTable {
    fn record(&mut self, station: u32) {
        *self.counts.entry(station).or_insert(0) += 1;
        self.total += 1;
    }

    fn score(&self, station: u32) -> f64 {
        match self.counts.get(&station) {
            Some(&c) => c as f64 / self.total as f64,
            None => 0.0,
        }
    }

    fn argmax(&self) -> Option<u32> {
        self.counts
            .iter()
            .max_by_key(|&(&s, &c)| (c, std::cmp::Reverse(s)))
            .map(|(&s, _)| s)
    }
}

/// Pooled transition statistics keyed by direction alone.
#[derive(Debug, Clone, Default)]
pub struct DirectionCounter {
    tables: HashMap<Direction, CountTable>,
    transitions: u64,
}

impl DirectionCounter {
    fn record(&mut self, direction: Direction, next_station: u32) {
        self.tables.entry(direction).or_default().record(next_station);
        self.transitions += 1;
    }

    /// Number of transitions this counter was fitted on.
    pub fn transitions(&self) -> u64 {
        self.transitions
    }

    /// Relative frequency of `candidate` as the follow-up station in the
    /// given direction; 0 for unseen directions or candidates.
    pub fn score(&self, direction: Direction, candidate: u32) -> f64 {
        self.tables.get(&direction).map_or(0.0, |t| t.score(candidate))
    }

    /// Highest-count follow-up station for a direction, ties broken by
    /// lowest station id. `None` for directions never observed.
    pub fn argmax(&self, direction: Direction) -> Option<u32> {
        self.tables.get(&direction)?.argmax()
    }
}

/// Per-passenger transition statistics keyed by the full context: the
/// station of the most recent event together with the direction.
#[derive(Debug, Clone, Default)]
pub struct TransitionCounter {
    tables: HashMap<(u32, Direction), CountTable>,
    transitions: u64,
}

impl TransitionCounter {
    fn record(&mut self, prev: &Event, next_station: u32) {
        self.tables
            .entry((prev.station, Direction::from(prev.label)))
            .or_default()
            .record(next_station);
        self.transitions += 1;
    }

    /// Number of transitions this counter was fitted on.
    pub fn transitions(&self) -> u64 {
        self.transitions
    }

    /// Relative frequency of `candidate` following the `(station, direction)`
    /// context; 0 for unseen contexts or candidates.
    pub fn score(&self, station: u32, direction: Direction, candidate: u32) -> f64 {
        self.tables
            .get(&(station, direction))
            .map_or(0.0, |t| t.score(candidate))
    }

    /// Highest-count follow-up station for a context, ties broken by lowest
    /// station id. `None` for unseen contexts.
    pub fn argmax(&self, station: u32, direction: Direction) -> Option<u32> {
        self.tables.get(&(station, direction))?.argmax()
    }
}

/// Which statistic backs the scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaselineMethod {
    /// One pooled per-direction table for all passengers.
    Top,
    /// Per-passenger (station, direction) tables, pooled fallback for
    /// passengers without transitions of their own.
    PersonalTop,
}

impl BaselineMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            BaselineMethod::Top => "top",
            BaselineMethod::PersonalTop => "ptop",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "top" => Ok(BaselineMethod::Top),
            "ptop" => Ok(BaselineMethod::PersonalTop),
            other => Err(DygppError::Usage(format!(
                "unknown baseline method `{other}` (expected `top` or `ptop`)"
            ))),
        }
    }
}

/// A fitted baseline; construction is the fit, so scoring an unfitted model
/// is unrepresentable.
#[derive(Debug, Clone)]
pub struct BaselineModel {
    method: BaselineMethod,
    global: DirectionCounter,
    personal: HashMap<u32, TransitionCounter>,
}

impl BaselineModel {
    /// Fit transition tables from the events in `train` (index range into
    /// `log.events()`). Consecutive same-passenger events with differing
    /// labels each contribute one transition; same-label runs are skipped.
    pub fn fit(method: BaselineMethod, log: &EventLog, train: std::ops::Range<usize>) -> Result<Self> {
        if train.is_empty() {
            return Err(DygppError::Data("no training events to fit baseline".into()));
        }
        let mut global = DirectionCounter::default();
        let mut personal: HashMap<u32, TransitionCounter> = HashMap::new();
        let mut last_seen: HashMap<u32, Event> = HashMap::new();
        for e in &log.events()[train] {
            if let Some(prev) = last_seen.get(&e.passenger) {
                if prev.label != e.label {
                    global.record(Direction::from(prev.label), e.station);
                    if method == BaselineMethod::PersonalTop {
                        personal.entry(e.passenger).or_default().record(prev, e.station);
                    }
                }
            }
            last_seen.insert(e.passenger, *e);
        }
        Ok(BaselineModel {
            method,
            global,
            personal,
        })
    }

    pub fn method(&self) -> BaselineMethod {
        self.method
    }

    pub fn global(&self) -> &DirectionCounter {
        &self.global
    }

    /// Score a candidate station for a passenger at time `t`, conditioning on
    /// the passenger's most recent event strictly before `t` anywhere in the
    /// log. No prior event means no context and a score of 0.
    pub fn score(&self, log: &EventLog, passenger: u32, station: u32, t: i64) -> f64 {
        let Some(prev) = log.last_event_before(NodeKind::Passenger, passenger, t) else {
            return 0.0;
        };
        let direction = Direction::from(prev.label);
        match self.method {
            BaselineMethod::Top => self.global.score(direction, station),
            BaselineMethod::PersonalTop => match self.personal.get(&passenger) {
                Some(counter) => counter.score(prev.station, direction, station),
                None => self.global.score(direction, station),
            },
        }
    }

    /// Score a batch of candidates in order.
    pub fn score_pairs(&self, log: &EventLog, pairs: &[CandidatePair]) -> Vec<f64> {
        pairs
            .iter()
            .map(|p| self.score(log, p.passenger, p.station, p.time))
            .collect()
    }
}

/// Fit on the split's train range and evaluate on a named split range with
/// the shared negative-sampling scheme, so the numbers are directly
/// comparable to the learned model's.
pub fn evaluate_baseline(
    method: BaselineMethod,
    split: &DatasetSplit,
    split_name: &str,
    scope: EvalScope,
    seed: u64,
) -> Result<EvalReport> {
    let model = BaselineModel::fit(method, &split.log, split.train.clone())?;
    let range = split
        .range(split_name)
        .ok_or_else(|| DygppError::Usage(format!("unknown split `{split_name}`")))?;
    let pairs = build_eval_pairs(split, range, scope, seed)?;
    let scores = model.score_pairs(&split.log, &pairs);
    report_from_scores(split_name, scope, &pairs, &scores)
}
