//! Consistency of the explicit order with timestamps, and the time-/order-constrained
//! regimes.
//!
//! All checks work on the generating edges of the explicit order. A closure pair
//! `(u, v)` breaks a monotone condition on time only if some edge on the path from
//! `u` to `v` breaks it, so the search starts from ancestors of offending edges.

use std::collections::HashSet;

use serde::Serialize;

use super::{EventId, EventLog};
use crate::time::Timestamp;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsistencyScope {
    /// Every pair of events in the log.
    #[default]
    Global,
    /// Only pairs of events sharing a case.
    WithinCase,
}

/// An explicitly ordered pair whose timestamps run the other way.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Earlier according to the explicit order.
    pub before: EventId,
    pub after: EventId,
    pub before_time: Timestamp,
    pub after_time: Timestamp,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConsistencyReport {
    pub consistent: bool,
    pub violations: Vec<Violation>,
    /// Explicit order contained in the time order.
    pub time_constrained: bool,
    /// Time order contained in the explicit order.
    pub order_constrained: bool,
    pub scope: ConsistencyScope,
}

pub fn check_consistency(log: &EventLog) -> ConsistencyReport {
    check_consistency_scoped(log, ConsistencyScope::Global)
}

pub fn check_consistency_scoped(log: &EventLog, scope: ConsistencyScope) -> ConsistencyReport {
    let time = |i: usize| log.events[i].time;
    let in_scope = |u: usize, v: usize| scope == ConsistencyScope::Global || log.same_case(u, v);

    let violating = closure_pairs_where(
        log,
        |a, b| time(a) > time(b),
        |u, v| in_scope(u, v) && time(u) > time(v),
        false,
    );
    let violations: Vec<Violation> = violating
        .iter()
        .map(|&(u, v)| Violation {
            before: log.events[u].id.clone(),
            after: log.events[v].id.clone(),
            before_time: time(u),
            after_time: time(v),
        })
        .collect();
    let consistent = violations.is_empty();

    let time_constrained = consistent
        && closure_pairs_where(
            log,
            |a, b| time(a) >= time(b),
            |u, v| in_scope(u, v) && time(u) >= time(v),
            true,
        )
        .is_empty();

    // an inconsistent pair already rules out order-constraint, since the reverse
    // time pair would need to be explicitly ordered as well
    let order_constrained = consistent && {
        let globally_consistent = scope == ConsistencyScope::Global
            || log
                .order
                .edges()
                .iter()
                .all(|&(a, b)| time(a) <= time(b));
        match scope {
            ConsistencyScope::Global => {
                let all: Vec<usize> = (0..log.len()).collect();
                time_groups_explicitly_ordered(log, &all, globally_consistent)
            }
            ConsistencyScope::WithinCase => (0..log.case_count()).all(|k| {
                time_groups_explicitly_ordered(log, log.case_events_by_index(k), globally_consistent)
            }),
        }
    };

    ConsistencyReport {
        consistent,
        violations,
        time_constrained,
        order_constrained,
        scope,
    }
}

/// Closure pairs satisfying `pair_flag`, assuming every such pair has an edge
/// satisfying `edge_flag` on each connecting path.
fn closure_pairs_where(
    log: &EventLog,
    edge_flag: impl Fn(usize, usize) -> bool,
    pair_flag: impl Fn(usize, usize) -> bool,
    first_only: bool,
) -> Vec<(usize, usize)> {
    let seeds: HashSet<usize> = log
        .order
        .edges()
        .iter()
        .filter(|&&(a, b)| edge_flag(a, b))
        .map(|&(a, _)| a)
        .collect();
    if seeds.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    for u in log.order.pred_graph().closure_of(seeds) {
        let mut reached: Vec<usize> = log
            .order
            .succ_graph()
            .reachable(u, |_| true)
            .into_iter()
            .filter(|&v| pair_flag(u, v))
            .collect();
        if first_only && !reached.is_empty() {
            return vec![(u, reached[0])];
        }
        reached.sort_unstable();
        out.extend(reached.into_iter().map(|v| (u, v)));
    }
    out
}

/// Every event of each time group explicitly precedes every event of the next group.
fn time_groups_explicitly_ordered(log: &EventLog, members: &[usize], prune_by_time: bool) -> bool {
    let time = |i: usize| log.events[i].time;
    let mut sorted = members.to_vec();
    sorted.sort_by_key(|&i| time(i));
    let groups: Vec<&[usize]> = sorted.chunk_by(|&a, &b| time(a) == time(b)).collect();
    groups.windows(2).all(|w| {
        let (here, next) = (w[0], w[1]);
        let bound = time(next[0]);
        here.iter().all(|&a| {
            let reach = log
                .order
                .succ_graph()
                .reachable(a, |v| !prune_by_time || time(v) <= bound);
            next.iter().all(|b| reach.contains(b))
        })
    })
}
