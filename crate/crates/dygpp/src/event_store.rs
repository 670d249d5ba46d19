//! Interaction log: parsing, id remapping, chronological indexing and
//! dataset splitting.
//!
//! Input rows are `(passenger, station, label, timestamp)` quadruples in CSV
//! form. Raw ids are arbitrary non-negative integers; ingestion remaps each
//! side to a dense internal range `1..=n` in first-appearance order, with id
//! 0 reserved on both sides as the padding sentinel. Events are kept sorted
//! by timestamp (stable, so equal-time rows preserve file order), and every
//! node carries an index of its own events for O(log n) "history before t"
//! queries.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::ops::Range;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{DygppError, Result};

/// Interaction direction: a passenger either boards or alights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Board = 0,
    Alight = 1,
}

impl Label {
    pub fn from_u8(v: u8) -> Option<Label> {
        match v {
            0 => Some(Label::Board),
            1 => Some(Label::Alight),
            _ => None,
        }
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Board => write!(f, "board"),
            Label::Alight => write!(f, "alight"),
        }
    }
}

/// Which side of the bipartite graph a node lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Passenger,
    Station,
}

impl NodeKind {
    pub fn other(self) -> NodeKind {
        match self {
            NodeKind::Passenger => NodeKind::Station,
            NodeKind::Station => NodeKind::Passenger,
        }
    }
}

/// One interaction with raw (file-level) ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawEvent {
    pub passenger: u64,
    pub station: u64,
    pub label: Label,
    pub time: i64,
}

/// One interaction with dense internal ids (1-based; 0 is padding).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub passenger: u32,
    pub station: u32,
    pub label: Label,
    pub time: i64,
}

impl Event {
    /// Internal id of the node of the given kind in this event.
    pub fn node(&self, kind: NodeKind) -> u32 {
        match kind {
            NodeKind::Passenger => self.passenger,
            NodeKind::Station => self.station,
        }
    }
}

/// CSV header accepted (and written) by the log reader/writer.
pub const CSV_HEADER: &str = "u,i,label,ts";

/// Chronologically sorted interaction log with per-node history indices.
#[derive(Debug, Clone)]
pub struct EventLog {
    events: Vec<Event>,
    passenger_raw: Vec<u64>,
    station_raw: Vec<u64>,
    passenger_lookup: HashMap<u64, u32>,
    station_lookup: HashMap<u64, u32>,
    passenger_events: Vec<Vec<u32>>,
    station_events: Vec<Vec<u32>>,
}

impl EventLog {
    /// Build a log from raw rows: remap ids, stable-sort by time, index.
    pub fn from_raw(rows: &[RawEvent]) -> Result<EventLog> {
        let mut passenger_lookup = HashMap::new();
        let mut station_lookup = HashMap::new();
        let mut passenger_raw = Vec::new();
        let mut station_raw = Vec::new();
        let mut events = Vec::with_capacity(rows.len());
        for row in rows {
            let p = *passenger_lookup.entry(row.passenger).or_insert_with(|| {
                passenger_raw.push(row.passenger);
                passenger_raw.len() as u32
            });
            let s = *station_lookup.entry(row.station).or_insert_with(|| {
                station_raw.push(row.station);
                station_raw.len() as u32
            });
            events.push(Event {
                passenger: p,
                station: s,
                label: row.label,
                time: row.time,
            });
        }
        events.sort_by_key(|e| e.time); // stable: ties keep input order

        let mut log = EventLog {
            events,
            passenger_raw,
            station_raw,
            passenger_lookup,
            station_lookup,
            passenger_events: Vec::new(),
            station_events: Vec::new(),
        };
        log.rebuild_indices();
        Ok(log)
    }

    /// Replace the event list (same id universe) and re-index. Used by the
    /// split masking step, which drops events without changing the mapping.
    fn with_events(&self, events: Vec<Event>) -> EventLog {
        let mut log = EventLog {
            events,
            passenger_raw: self.passenger_raw.clone(),
            station_raw: self.station_raw.clone(),
            passenger_lookup: self.passenger_lookup.clone(),
            station_lookup: self.station_lookup.clone(),
            passenger_events: Vec::new(),
            station_events: Vec::new(),
        };
        log.rebuild_indices();
        log
    }

    fn rebuild_indices(&mut self) {
        self.passenger_events = vec![Vec::new(); self.passenger_raw.len()];
        self.station_events = vec![Vec::new(); self.station_raw.len()];
        for (i, e) in self.events.iter().enumerate() {
            self.passenger_events[(e.passenger - 1) as usize].push(i as u32);
            self.station_events[(e.station - 1) as usize].push(i as u32);
        }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Number of distinct passengers (internal ids run `1..=num_passengers`).
    pub fn num_passengers(&self) -> u32 {
        self.passenger_raw.len() as u32
    }

    pub fn num_stations(&self) -> u32 {
        self.station_raw.len() as u32
    }

    pub fn raw_passenger(&self, id: u32) -> u64 {
        self.passenger_raw[(id - 1) as usize]
    }

    pub fn raw_station(&self, id: u32) -> u64 {
        self.station_raw[(id - 1) as usize]
    }

    pub fn passenger_id(&self, raw: u64) -> Option<u32> {
        self.passenger_lookup.get(&raw).copied()
    }

    pub fn station_id(&self, raw: u64) -> Option<u32> {
        self.station_lookup.get(&raw).copied()
    }

    fn node_index(&self, kind: NodeKind, id: u32) -> &[u32] {
        let list = match kind {
            NodeKind::Passenger => &self.passenger_events,
            NodeKind::Station => &self.station_events,
        };
        // Id 0 is padding and ids past the dense range were never observed;
        // both have an empty history rather than being an error.
        match id.checked_sub(1) {
            Some(i) if (i as usize) < list.len() => &list[i as usize],
            _ => &[],
        }
    }

    /// Indices of the node's events with time strictly before `t`, ascending.
    pub fn events_before(&self, kind: NodeKind, id: u32, t: i64) -> &[u32] {
        let idx = self.node_index(kind, id);
        let cut = idx.partition_point(|&i| self.events[i as usize].time < t);
        &idx[..cut]
    }

    /// The most recent `limit` events of the node strictly before `t`,
    /// returned oldest-first.
    pub fn recent_events(&self, kind: NodeKind, id: u32, t: i64, limit: usize) -> &[u32] {
        let before = self.events_before(kind, id, t);
        &before[before.len().saturating_sub(limit)..]
    }

    /// The node's latest event strictly before `t`, if any.
    pub fn last_event_before(&self, kind: NodeKind, id: u32, t: i64) -> Option<&Event> {
        self.events_before(kind, id, t)
            .last()
            .map(|&i| &self.events[i as usize])
    }

    // --- CSV ---------------------------------------------------------------

    /// Parse CSV rows `u,i,label,ts`. A single optional header line equal to
    /// `u,i,label,ts` is tolerated; blank lines are skipped.
    pub fn parse_csv<R: BufRead>(reader: R) -> Result<EventLog> {
        let mut rows = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let lineno = lineno + 1;
            let line = line.map_err(|e| DygppError::io("<csv input>", e))?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if lineno == 1 && trimmed == CSV_HEADER {
                continue;
            }
            rows.push(parse_csv_row(trimmed, lineno)?);
        }
        EventLog::from_raw(&rows)
    }

    /// Read a CSV file from disk.
    pub fn load_csv(path: &Path) -> Result<EventLog> {
        let file = std::fs::File::open(path)
            .map_err(|e| DygppError::io(path.display().to_string(), e))?;
        EventLog::parse_csv(BufReader::new(file))
    }

    /// Write the log back out with raw ids, header included.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        let io_err = |e| DygppError::io("<csv output>", e);
        writeln!(w, "{CSV_HEADER}").map_err(io_err)?;
        for e in &self.events {
            writeln!(
                w,
                "{},{},{},{}",
                self.raw_passenger(e.passenger),
                self.raw_station(e.station),
                e.label.as_u8(),
                e.time
            )
            .map_err(io_err)?;
        }
        Ok(())
    }
}

fn parse_csv_row(line: &str, lineno: usize) -> Result<RawEvent> {
    let mut fields = line.split(',');
    let mut next = |what: &str| -> Result<&str> {
        fields
            .next()
            .map(str::trim)
            .ok_or_else(|| DygppError::Data(format!("line {lineno}: missing {what} field")))
    };
    let passenger = next("passenger")?
        .parse::<u64>()
        .map_err(|_| DygppError::Data(format!("line {lineno}: bad passenger id")))?;
    let station = next("station")?
        .parse::<u64>()
        .map_err(|_| DygppError::Data(format!("line {lineno}: bad station id")))?;
    let label_raw = next("label")?
        .parse::<u8>()
        .map_err(|_| DygppError::Data(format!("line {lineno}: bad label")))?;
    let label = Label::from_u8(label_raw)
        .ok_or_else(|| DygppError::Data(format!("line {lineno}: label must be 0 or 1")))?;
    let time = next("timestamp")?
        .parse::<i64>()
        .map_err(|_| DygppError::Data(format!("line {lineno}: bad timestamp")))?;
    if fields.next().is_some() {
        return Err(DygppError::Data(format!(
            "line {lineno}: expected 4 fields"
        )));
    }
    Ok(RawEvent {
        passenger,
        station,
        label,
        time,
    })
}

// ---------------------------------------------------------------------------
// Chronological split with optional inductive station hiding
// ---------------------------------------------------------------------------

/// Split ratios and inductive sampling controls.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitConfig {
    pub train_ratio: f64,
    pub val_ratio: f64,
    /// Fraction of stations seen in val/test whose training events are
    /// removed, so evaluation can probe never-trained-on stations.
    pub inductive_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train_ratio: 0.7,
            val_ratio: 0.15,
            inductive_fraction: 0.0,
            seed: 0,
        }
    }
}

/// A chronological partition of one log, after any inductive masking.
///
/// `log` is the unified post-mask event list; the three ranges index into it.
/// History queries during validation/test naturally see earlier events
/// because all splits share the one chronologically sorted log.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub log: EventLog,
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
    /// Sorted internal station ids whose training events were removed.
    pub inductive_stations: Vec<u32>,
}

impl DatasetSplit {
    pub fn range(&self, name: &str) -> Option<Range<usize>> {
        match name {
            "train" => Some(self.train.clone()),
            "val" => Some(self.val.clone()),
            "test" => Some(self.test.clone()),
            _ => None,
        }
    }
}

/// Partition events chronologically into train/val/test by event count:
/// `floor(n * train_ratio)` train, `floor(n * val_ratio)` val, remainder
/// test. With a nonzero inductive fraction, a seeded sample of the stations
/// appearing in val/test is hidden from training by deleting their training
/// events.
pub fn chronological_split(log: &EventLog, cfg: &SplitConfig) -> Result<DatasetSplit> {
    if !(0.0..=1.0).contains(&cfg.train_ratio)
        || !(0.0..=1.0).contains(&cfg.val_ratio)
        || cfg.train_ratio + cfg.val_ratio > 1.0
    {
        return Err(DygppError::Usage(format!(
            "invalid split ratios train={} val={}",
            cfg.train_ratio, cfg.val_ratio
        )));
    }
    if !(0.0..=1.0).contains(&cfg.inductive_fraction) {
        return Err(DygppError::Usage(format!(
            "inductive fraction {} out of [0, 1]",
            cfg.inductive_fraction
        )));
    }

    let n = log.len();
    let n_train = (n as f64 * cfg.train_ratio).floor() as usize;
    let n_val = (n as f64 * cfg.val_ratio).floor() as usize;

    let inductive_stations = if cfg.inductive_fraction > 0.0 {
        // Stations eligible for hiding: those that appear after the training
        // boundary. Sorted first so the seeded sample is order-independent.
        let mut eligible: Vec<u32> = log.events()[n_train..]
            .iter()
            .map(|e| e.station)
            .collect();
        eligible.sort_unstable();
        eligible.dedup();
        let count = (cfg.inductive_fraction * eligible.len() as f64).floor() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let picks = rand::seq::index::sample(&mut rng, eligible.len(), count);
        let mut chosen: Vec<u32> = picks.iter().map(|i| eligible[i]).collect();
        chosen.sort_unstable();
        chosen
    } else {
        Vec::new()
    };

    let (events, kept_train) = if inductive_stations.is_empty() {
        (log.events().to_vec(), n_train)
    } else {
        let hidden = |s: u32| inductive_stations.binary_search(&s).is_ok();
        let mut events = Vec::with_capacity(n);
        let mut kept_train = 0usize;
        for (i, e) in log.events().iter().enumerate() {
            if i < n_train && hidden(e.station) {
                continue;
            }
            if i < n_train {
                kept_train += 1;
            }
            events.push(*e);
        }
        (events, kept_train)
    };

    let masked = log.with_events(events);
    let total = masked.len();
    let val_end = (kept_train + n_val).min(total);
    Ok(DatasetSplit {
        log: masked,
        train: 0..kept_train,
        val: kept_train..val_end,
        test: val_end..total,
        inductive_stations,
    })
}
