//! Event logs with timestamps and an explicit strict partial order.

mod consistency;

pub use consistency::{
    check_consistency, check_consistency_scoped, ConsistencyReport, ConsistencyScope, Violation,
};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Csr;
use crate::order::{self, Poset};
use crate::relation::{BitSet, Relation};
use crate::time::Timestamp;

/// Largest element count for which a dense log-wide relation is materialized.
pub const DENSE_LIMIT: usize = 20_000;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventId(String);

impl EventId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EventId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttrValue {
    Number(f64),
    Time(Timestamp),
    Text(String),
}

impl AttrValue {
    pub fn as_text(&self) -> Option<&str> {
        match self {
            AttrValue::Text(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for AttrValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttrValue::Text(s) => f.write_str(s),
            AttrValue::Number(x) => write!(f, "{x}"),
            AttrValue::Time(t) => write!(f, "{t}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    pub id: EventId,
    pub case_id: String,
    pub activity: String,
    pub time: Timestamp,
    pub attrs: BTreeMap<String, AttrValue>,
}

impl Event {
    pub fn new(
        id: impl Into<String>,
        case_id: impl Into<String>,
        activity: impl Into<String>,
        time: Timestamp,
    ) -> Self {
        Self {
            id: EventId::new(id),
            case_id: case_id.into(),
            activity: activity.into(),
            time,
            attrs: BTreeMap::new(),
        }
    }

    pub fn with_attr(mut self, key: impl Into<String>, value: AttrValue) -> Self {
        self.attrs.insert(key.into(), value);
        self
    }
}

/// The explicit order as a deduplicated edge list. Its meaning is the transitive
/// closure of the edges, which is guaranteed acyclic.
#[derive(Clone, Debug, Default)]
pub struct ExplicitOrder {
    edges: Vec<(usize, usize)>,
    succ: Csr,
    pred: Csr,
    crosses_cases: bool,
}

impl ExplicitOrder {
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn successors(&self, i: usize) -> &[usize] {
        self.succ.neighbours(i)
    }

    /// Whether some edge links events of different cases.
    pub fn crosses_cases(&self) -> bool {
        self.crosses_cases
    }

    pub(crate) fn succ_graph(&self) -> &Csr {
        &self.succ
    }

    pub(crate) fn pred_graph(&self) -> &Csr {
        &self.pred
    }

    /// `i` precedes `j` in the closure.
    pub fn precedes(&self, i: usize, j: usize) -> bool {
        i != j && self.succ.reachable(i, |_| true).contains(&j)
    }
}

#[derive(Clone, Debug)]
struct Case {
    id: String,
    events: Vec<usize>,
}

/// An immutable event log: events, their explicit order and a provenance note.
#[derive(Clone, Debug)]
pub struct EventLog {
    events: Vec<Event>,
    order: ExplicitOrder,
    provenance: String,
    cases: Vec<Case>,
    case_lookup: HashMap<String, usize>,
    case_of: Vec<usize>,
    id_lookup: HashMap<EventId, usize>,
}

impl PartialEq for EventLog {
    fn eq(&self, other: &Self) -> bool {
        self.events == other.events
            && self.order.edges == other.order.edges
            && self.provenance == other.provenance
    }
}

impl EventLog {
    /// Builds a log. `order` holds index pairs `(earlier, later)`; they need not be
    /// transitively closed but their closure must be irreflexive.
    pub fn new<I>(events: Vec<Event>, order: I, provenance: impl Into<String>) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let n = events.len();
        let mut id_lookup = HashMap::with_capacity(n);
        for (i, e) in events.iter().enumerate() {
            if id_lookup.insert(e.id.clone(), i).is_some() {
                return Err(Error::DuplicateEventId(e.id.clone()));
            }
        }

        let mut cases: Vec<Case> = Vec::new();
        let mut case_lookup: HashMap<String, usize> = HashMap::new();
        let mut case_of = Vec::with_capacity(n);
        for (i, e) in events.iter().enumerate() {
            let c = *case_lookup.entry(e.case_id.clone()).or_insert_with(|| {
                cases.push(Case {
                    id: e.case_id.clone(),
                    events: Vec::new(),
                });
                cases.len() - 1
            });
            cases[c].events.push(i);
            case_of.push(c);
        }

        let mut edges: Vec<(usize, usize)> = order.into_iter().collect();
        for &(a, b) in &edges {
            if a >= n || b >= n {
                return Err(Error::EdgeOutOfRange(a, b));
            }
            if a == b {
                return Err(Error::CyclicOrder {
                    events: vec![events[a].id.clone()],
                });
            }
        }
        edges.sort_unstable();
        edges.dedup();
        let succ = Csr::build(n, &edges, false);
        if let Some(cycle) = succ.find_cycle() {
            return Err(Error::CyclicOrder {
                events: cycle.into_iter().map(|i| events[i].id.clone()).collect(),
            });
        }
        let pred = Csr::build(n, &edges, true);
        let crosses_cases = edges.iter().any(|&(a, b)| case_of[a] != case_of[b]);

        Ok(Self {
            events,
            order: ExplicitOrder {
                edges,
                succ,
                pred,
                crosses_cases,
            },
            provenance: provenance.into(),
            cases,
            case_lookup,
            case_of,
            id_lookup,
        })
    }

    /// Same log with an empty explicit order.
    pub fn unordered(events: Vec<Event>, provenance: impl Into<String>) -> Result<Self> {
        Self::new(events, std::iter::empty(), provenance)
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn event(&self, i: usize) -> &Event {
        &self.events[i]
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn explicit_order(&self) -> &ExplicitOrder {
        &self.order
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn index_of(&self, id: &EventId) -> Option<usize> {
        self.id_lookup.get(id).copied()
    }

    /// Distinct activity names.
    pub fn activities(&self) -> BTreeSet<&str> {
        self.events.iter().map(|e| e.activity.as_str()).collect()
    }

    /// Case ids in order of first appearance.
    pub fn cases(&self) -> impl ExactSizeIterator<Item = &str> + '_ {
        self.cases.iter().map(|c| c.id.as_str())
    }

    pub fn case_count(&self) -> usize {
        self.cases.len()
    }

    /// Indices of the events of case `c`, in log order. Unknown cases yield nothing.
    pub fn events_of_case(&self, c: &str) -> &[usize] {
        self.case_lookup
            .get(c)
            .map(|&k| self.cases[k].events.as_slice())
            .unwrap_or(&[])
    }

    pub(crate) fn case_index(&self, c: &str) -> Option<usize> {
        self.case_lookup.get(c).copied()
    }

    pub(crate) fn case_events_by_index(&self, k: usize) -> &[usize] {
        &self.cases[k].events
    }

    pub(crate) fn case_id_by_index(&self, k: usize) -> &str {
        &self.cases[k].id
    }

    pub fn same_case(&self, i: usize, j: usize) -> bool {
        self.case_of[i] == self.case_of[j]
    }

    /// A copy with replaced timestamps and extra explicit-order pairs.
    pub(crate) fn derive(
        &self,
        times: Option<&[Timestamp]>,
        extra_order: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let mut events = self.events.clone();
        if let Some(times) = times {
            for (e, &t) in events.iter_mut().zip(times) {
                e.time = t;
            }
        }
        let mut edges = self.order.edges.clone();
        edges.extend(extra_order);
        Self::new(events, edges, self.provenance.clone())
    }

    /// The explicit order, closed, restricted to the events of case `k`
    /// (positions are local to the case). Assumes the log is consistent when
    /// edges cross cases.
    pub(crate) fn case_explicit_relation(&self, k: usize) -> Relation {
        let members = &self.cases[k].events;
        let m = members.len();
        let mut rel = Relation::empty(m);
        if self.order.is_empty() {
            return rel;
        }
        let local: HashMap<usize, usize> =
            members.iter().enumerate().map(|(p, &g)| (g, p)).collect();
        if !self.order.crosses_cases {
            for (p, &g) in members.iter().enumerate() {
                for &s in self.order.successors(g) {
                    rel.insert(p, local[&s]);
                }
            }
            return order::close_relation(rel).expect("explicit order is acyclic");
        }
        let latest = members.iter().map(|&g| self.events[g].time).max().unwrap();
        for (p, &g) in members.iter().enumerate() {
            // paths of a consistent log never decrease in time
            let reach = self
                .order
                .succ
                .reachable(g, |v| self.events[v].time <= latest);
            for v in reach {
                if let Some(&q) = local.get(&v) {
                    rel.insert(p, q);
                }
            }
        }
        rel
    }
}

/// `(i, j)` iff `times[i] < times[j]`.
pub(crate) fn time_relation(times: &[Timestamp]) -> Relation {
    let n = times.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by_key(|&i| std::cmp::Reverse(times[i]));
    let mut rel = Relation::empty(n);
    let mut later = BitSet::new(n);
    let mut pos = 0;
    while pos < n {
        let t = times[idx[pos]];
        let end = pos + idx[pos..].iter().take_while(|&&i| times[i] == t).count();
        for &i in &idx[pos..end] {
            *rel.row_mut(i) = later.clone();
        }
        for &i in &idx[pos..end] {
            later.insert(i);
        }
        pos = end;
    }
    rel
}

fn dense_guard(n: usize) -> Result<()> {
    if n > DENSE_LIMIT {
        return Err(Error::ResourceLimit {
            what: format!("dense order over {n} events"),
            limit: DENSE_LIMIT,
        });
    }
    Ok(())
}

/// The order induced by timestamps alone.
pub fn derive_time_order(log: &EventLog) -> Result<Poset> {
    dense_guard(log.len())?;
    let times: Vec<Timestamp> = log.events.iter().map(|e| e.time).collect();
    Ok(Poset::from_closed_unchecked(time_relation(&times)))
}

/// The explicit order, transitively closed, as a dense poset.
pub fn explicit_order_poset(log: &EventLog) -> Result<Poset> {
    dense_guard(log.len())?;
    Ok(order::transitive_closure(
        log.order.edges.iter().copied(),
        log.len(),
    )?)
}

/// Explicit order combined with the time order. Fails on inconsistent logs.
pub fn combined_order(log: &EventLog) -> Result<Poset> {
    let report = check_consistency(log);
    if !report.consistent {
        return Err(Error::Inconsistent(Box::new(report)));
    }
    let time = derive_time_order(log)?;
    let explicit = explicit_order_poset(log)?;
    Ok(order::union_orders(&time, &explicit)?)
}
