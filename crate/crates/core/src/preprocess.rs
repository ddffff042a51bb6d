//! Time aggregation, activity tiebreakers and the combined log transformation.

use std::collections::{BTreeSet, HashMap, HashSet};

use chrono::{Datelike, NaiveDate, Offset, TimeZone};
use chrono_tz::Tz;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{check_consistency, EventId, EventLog};
use crate::order;
use crate::time::{resolve_local, Granularity, Timestamp};

/// Maps every timestamp onto the start of its bucket at one granularity.
///
/// Sub-day buckets follow the wall clock of the configured zone; day and coarser
/// buckets use calendar dates there (weeks start on Monday, as in ISO-8601).
/// The mapping is monotone wherever the zone's offset changes by whole bucket
/// lengths, which covers UTC and all hour-aligned DST rules.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeAggregator {
    pub granularity: Granularity,
    pub timezone: Tz,
}

impl TimeAggregator {
    pub fn new(granularity: Granularity) -> Self {
        Self {
            granularity,
            timezone: Tz::UTC,
        }
    }

    pub fn in_zone(granularity: Granularity, timezone: Tz) -> Self {
        Self {
            granularity,
            timezone,
        }
    }

    pub fn aggregate(&self, t: Timestamp) -> Timestamp {
        aggregate_time(t, self)
    }
}

pub fn aggregate_time(t: Timestamp, ta: &TimeAggregator) -> Timestamp {
    let ms = t.millis();
    let unit = match ta.granularity {
        Granularity::Millisecond => return t,
        Granularity::Second => 1_000,
        Granularity::Minute => 60_000,
        Granularity::Hour => 3_600_000,
        _ => return calendar_floor(t, ta),
    };
    let offset = i64::from(
        ta.timezone
            .offset_from_utc_datetime(&t.to_utc().naive_utc())
            .fix()
            .local_minus_utc(),
    ) * 1_000;
    Timestamp::from_millis(ms - (ms + offset).rem_euclid(unit))
}

fn calendar_floor(t: Timestamp, ta: &TimeAggregator) -> Timestamp {
    let date = t.in_zone(&ta.timezone).date_naive();
    let start: NaiveDate = match ta.granularity {
        Granularity::Day => date,
        Granularity::Week => date - chrono::Days::new(u64::from(date.weekday().num_days_from_monday())),
        Granularity::Month => date.with_day(1).unwrap(),
        Granularity::Year => NaiveDate::from_ymd_opt(date.year(), 1, 1).unwrap(),
        _ => unreachable!("sub-day granularities use fixed units"),
    };
    let dt = resolve_local(&ta.timezone, start.and_time(chrono::NaiveTime::MIN))
        .expect("a local midnight resolves within a few hours");
    Timestamp::from_datetime(&dt).min(t)
}

/// A strict partial order over activity names.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Tiebreaker {
    edges: Vec<(String, String)>,
    closure: HashSet<(String, String)>,
}

impl Tiebreaker {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Closes `edges`; rejects them if the closure orders an activity before itself.
    pub fn new<I, A, B>(edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        let edges: BTreeSet<(String, String)> =
            edges.into_iter().map(|(a, b)| (a.into(), b.into())).collect();
        let names: Vec<&String> = edges
            .iter()
            .flat_map(|(a, b)| [a, b])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let index: HashMap<&String, usize> = names.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        let closed = order::transitive_closure(
            edges.iter().map(|(a, b)| (index[a], index[b])),
            names.len(),
        )
        .map_err(|e| match e {
            order::OrderError::CyclicOrder { cycle } => Error::InvalidTiebreaker(format!(
                "cycle {}",
                cycle.iter().map(|&i| names[i].as_str()).collect::<Vec<_>>().join(" -> ")
            )),
            other => Error::Order(other),
        })?;
        let closure = closed
            .pairs()
            .map(|(i, j)| (names[i].clone(), names[j].clone()))
            .collect();
        Ok(Self {
            edges: edges.into_iter().collect(),
            closure,
        })
    }

    /// Lines `activityA -> activityB`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (a, b) = body.split_once("->").ok_or_else(|| Error::Parse {
                location: format!("tiebreaker line {}", n + 1),
                reason: "expected `activityA -> activityB`".into(),
            })?;
            let (a, b) = (a.trim(), b.trim());
            if a.is_empty() || b.is_empty() {
                return Err(Error::Parse {
                    location: format!("tiebreaker line {}", n + 1),
                    reason: "empty activity name".into(),
                });
            }
            edges.push((a.to_string(), b.to_string()));
        }
        Self::new(edges)
    }

    /// Sorted, deduplicated input edges.
    pub fn edges(&self) -> &[(String, String)] {
        &self.edges
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn precedes(&self, a: &str, b: &str) -> bool {
        // avoid allocating on the hot path when there is nothing to look up
        !self.closure.is_empty() && self.closure.contains(&(a.to_string(), b.to_string()))
    }

    /// One edge per line, in the file format [`Tiebreaker::parse`] reads.
    pub fn to_text(&self) -> String {
        self.edges
            .iter()
            .map(|(a, b)| format!("{a} -> {b}\n"))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictSource {
    /// The explicit order already puts the later event first.
    ExplicitOrder,
    /// The pair closes a cycle through other tiebreaker-induced pairs.
    TiebreakerCycle,
}

/// A tiebreaker-induced pair `earlier -> later` that would make the order cyclic.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TiebreakerConflict {
    pub case_id: String,
    pub earlier: EventId,
    pub later: EventId,
    pub earlier_activity: String,
    pub later_activity: String,
    pub source: ConflictSource,
}

/// Same-case pairs with equal timestamps whose activities the tiebreaker orders.
pub(crate) fn tiebreaker_pairs(
    log: &EventLog,
    times: &[Timestamp],
    tb: &Tiebreaker,
) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    if tb.is_empty() {
        return out;
    }
    for k in 0..log.case_count() {
        let mut members = log.case_events_by_index(k).to_vec();
        members.sort_by_key(|&i| times[i]);
        for bucket in members.chunk_by(|&a, &b| times[a] == times[b]) {
            for &a in bucket {
                for &b in bucket {
                    if a != b && tb.precedes(&log.event(a).activity, &log.event(b).activity) {
                        out.push((a, b));
                    }
                }
            }
        }
    }
    out
}

pub(crate) fn conflicts(log: &EventLog, pairs: &[(usize, usize)]) -> Vec<TiebreakerConflict> {
    if pairs.is_empty() {
        return Vec::new();
    }
    let explicit = log.explicit_order().edges();
    let mut graph = DiGraph::<(), ()>::with_capacity(log.len(), explicit.len() + pairs.len());
    for _ in 0..log.len() {
        graph.add_node(());
    }
    for &(a, b) in explicit.iter().chain(pairs) {
        graph.add_edge((a as u32).into(), (b as u32).into(), ());
    }
    let mut component = vec![usize::MAX; log.len()];
    for (c, scc) in tarjan_scc(&graph).into_iter().enumerate() {
        if scc.len() > 1 {
            for node in scc {
                component[node.index()] = c;
            }
        }
    }
    pairs
        .iter()
        .filter(|&&(a, b)| component[a] != usize::MAX && component[a] == component[b])
        .map(|&(a, b)| {
            let (ea, eb) = (log.event(a), log.event(b));
            TiebreakerConflict {
                case_id: ea.case_id.clone(),
                earlier: ea.id.clone(),
                later: eb.id.clone(),
                earlier_activity: ea.activity.clone(),
                later_activity: eb.activity.clone(),
                source: if log.explicit_order().precedes(b, a) {
                    ConflictSource::ExplicitOrder
                } else {
                    ConflictSource::TiebreakerCycle
                },
            }
        })
        .collect()
}

/// Pairs the tiebreaker would add to `log` (at its current timestamps) that
/// contradict the explicit order. Empty means the tiebreaker is safe to apply.
pub fn validate_tiebreaker(tb: &Tiebreaker, log: &EventLog) -> Vec<TiebreakerConflict> {
    let times: Vec<Timestamp> = log.events().iter().map(|e| e.time).collect();
    conflicts(log, &tiebreaker_pairs(log, &times, tb))
}

/// As [`validate_tiebreaker`], after aggregating times with `ta`.
pub fn validate_tiebreaker_at(tb: &Tiebreaker, log: &EventLog, ta: &TimeAggregator) -> Vec<TiebreakerConflict> {
    let times: Vec<Timestamp> = log.events().iter().map(|e| ta.aggregate(e.time)).collect();
    conflicts(log, &tiebreaker_pairs(log, &times, tb))
}

/// Aggregates every timestamp and adds the tiebreaker-induced pairs to the explicit
/// order. The stored order is the union of edges; as everywhere, its meaning is the
/// transitive closure.
pub fn apply(log: &EventLog, ta: &TimeAggregator, tb: &Tiebreaker) -> Result<EventLog> {
    let before = check_consistency(log);
    if !before.consistent {
        return Err(Error::Inconsistent(Box::new(before)));
    }
    let times: Vec<Timestamp> = log.events().iter().map(|e| ta.aggregate(e.time)).collect();
    let pairs = tiebreaker_pairs(log, &times, tb);
    let found = conflicts(log, &pairs);
    if !found.is_empty() {
        return Err(Error::TiebreakerConflict(found));
    }
    let out = log.derive(Some(&times), pairs)?;
    let after = check_consistency(&out);
    if !after.consistent {
        return Err(Error::Inconsistent(Box::new(after)));
    }
    Ok(out)
}
