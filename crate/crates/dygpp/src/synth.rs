//! Synthetic commuter event-log generator.
//!
//! Real smart-card logs mix long-range periodic structure (daily commutes)
//! with short-range irregularity (leisure trips, route changes). The
//! generator reproduces both knobs with a single `noise_rate`:
//!
//! - **Commuters** travel home → work each weekday morning and back each
//!   evening, with Gaussian-jittered departure times. Each trip reroutes to
//!   a uniformly random station pair with probability `noise_rate`; on
//!   weekends a leisure round trip between random stations happens with the
//!   same probability.
//! - **Occasional riders** make a round trip between their two favorite
//!   stations every `period` days (period fixed per passenger), subject to
//!   the same rerouting noise.
//!
//! `noise_rate = 0` therefore yields perfectly habitual station patterns
//! (every passenger alternates between exactly two stations), while
//! `noise_rate = 1` drives the station marginals toward uniform. Generation
//! is single-threaded and fully determined by the seed: the same config
//! produces byte-identical CSV output.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{DygppError, Result};
use crate::event_store::{EventLog, Label, RawEvent};

const DAY: i64 = 86_400;
/// Departure-time jitter (seconds): sigma = 15 minutes.
const JITTER_SIGMA: f64 = 900.0;
/// Minimum spacing between a passenger's consecutive events.
const MIN_GAP: i64 = 60;

/// Knobs for one generated world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub passengers: u32,
    pub stations: u32,
    pub days: u32,
    /// Fraction of passengers that are weekday commuters; the rest are
    /// occasional periodic riders.
    pub commuter_fraction: f64,
    /// Probability that any given trip reroutes to a random station pair,
    /// and that a weekend leisure outing happens.
    pub noise_rate: f64,
    pub seed: u64,
}

impl GeneratorConfig {
    /// Small desk-scale world: 200 passengers, 20 stations, 60 days.
    pub fn desk() -> GeneratorConfig {
        GeneratorConfig {
            passengers: 200,
            stations: 20,
            days: 60,
            commuter_fraction: 0.8,
            noise_rate: 0.15,
            seed: 7,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.stations < 2 {
            return Err(DygppError::Usage(
                "generator needs at least 2 stations".into(),
            ));
        }
        if self.passengers < 1 || self.days < 1 {
            return Err(DygppError::Usage(
                "generator needs at least 1 passenger and 1 day".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.commuter_fraction) || !(0.0..=1.0).contains(&self.noise_rate)
        {
            return Err(DygppError::Usage(
                "commuter_fraction and noise_rate must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

enum Role {
    Commuter { home: u64, work: u64 },
    Occasional { here: u64, there: u64, period: u32, offset: u32 },
}

struct Plan {
    id: u64,
    role: Role,
    /// Time of this passenger's latest event, for alternation-safe clamping.
    last_time: i64,
}

fn distinct_pair<R: Rng>(rng: &mut R, stations: u32) -> (u64, u64) {
    let a = rng.gen_range(1..=stations as u64);
    let mut b = rng.gen_range(1..=stations as u64 - 1);
    if b >= a {
        b += 1;
    }
    (a, b)
}

/// Emit one board/alight pair, clamping so each passenger's events stay
/// strictly ordered (and hence strictly alternating after the global sort).
fn push_trip(
    out: &mut Vec<RawEvent>,
    plan: &mut Plan,
    from: u64,
    to: u64,
    depart: i64,
    travel: i64,
) {
    let depart = depart.max(plan.last_time + MIN_GAP);
    let arrive = depart + travel.max(MIN_GAP);
    out.push(RawEvent {
        passenger: plan.id,
        station: from,
        label: Label::Board,
        time: depart,
    });
    out.push(RawEvent {
        passenger: plan.id,
        station: to,
        label: Label::Alight,
        time: arrive,
    });
    plan.last_time = arrive;
}

/// Generate the raw event stream, chronologically sorted.
pub fn generate(cfg: &GeneratorConfig) -> Result<Vec<RawEvent>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let jitter = Normal::new(0.0, JITTER_SIGMA).expect("valid sigma");
    let n_commuters = (cfg.commuter_fraction * cfg.passengers as f64).round() as u32;

    let mut plans: Vec<Plan> = (1..=cfg.passengers as u64)
        .map(|id| {
            let role = if id <= n_commuters as u64 {
                let (home, work) = distinct_pair(&mut rng, cfg.stations);
                Role::Commuter { home, work }
            } else {
                let (here, there) = distinct_pair(&mut rng, cfg.stations);
                let period = rng.gen_range(2..=6u32);
                let offset = rng.gen_range(0..period);
                Role::Occasional { here, there, period, offset }
            };
            Plan { id, role, last_time: i64::MIN / 4 }
        })
        .collect();

    let mut out = Vec::new();
    for day in 0..cfg.days {
        let day_start = day as i64 * DAY;
        let weekday = day % 7 < 5;
        for plan in &mut plans {
            match plan.role {
                Role::Commuter { home, work } => {
                    if weekday {
                        // Morning leg, evening leg; each may reroute.
                        for (hour, habit) in [(7.5, (home, work)), (17.5, (work, home))] {
                            let (from, to) = if rng.gen::<f64>() < cfg.noise_rate {
                                distinct_pair(&mut rng, cfg.stations)
                            } else {
                                habit
                            };
                            let depart =
                                day_start + (hour * 3600.0 + jitter.sample(&mut rng)) as i64;
                            let travel = rng.gen_range(1_200..=2_700);
                            push_trip(&mut out, plan, from, to, depart, travel);
                        }
                    } else if rng.gen::<f64>() < cfg.noise_rate {
                        // Weekend leisure round trip between random stations.
                        let (a, b) = distinct_pair(&mut rng, cfg.stations);
                        let depart =
                            day_start + (14.0 * 3600.0 + jitter.sample(&mut rng)) as i64;
                        let travel = rng.gen_range(1_200..=2_700);
                        push_trip(&mut out, plan, a, b, depart, travel);
                        let stay = rng.gen_range(3_600..=10_800);
                        let back = rng.gen_range(1_200..=2_700);
                        push_trip(&mut out, plan, b, a, plan.last_time + stay, back);
                    }
                }
                Role::Occasional { here, there, period, offset } => {
                    if day % period == offset {
                        let (a, b) = if rng.gen::<f64>() < cfg.noise_rate {
                            distinct_pair(&mut rng, cfg.stations)
                        } else {
                            (here, there)
                        };
                        let depart =
                            day_start + (11.0 * 3600.0 + jitter.sample(&mut rng)) as i64;
                        let travel = rng.gen_range(1_200..=2_700);
                        push_trip(&mut out, plan, a, b, depart, travel);
                        let stay = rng.gen_range(7_200..=21_600);
                        let back = rng.gen_range(1_200..=2_700);
                        push_trip(&mut out, plan, b, a, plan.last_time + stay, back);
                    }
                }
            }
        }
    }
    out.sort_by_key(|e| e.time);
    Ok(out)
}

/// Generate and index the stream in one step.
pub fn generate_log(cfg: &GeneratorConfig) -> Result<EventLog> {
    EventLog::from_raw(&generate(cfg)?)
}
