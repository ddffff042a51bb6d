//! Per-case posets and their grouping into partial-order variants.

mod canon;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{check_consistency, time_relation, EventId, EventLog};
use crate::order::{self, Poset};
use crate::preprocess::{self, Tiebreaker, TimeAggregator};
use crate::time::Timestamp;

/// The combined order restricted to one case, labelled by activity.
/// Position `i` is the `i`-th event of the case in log order.
#[derive(Clone, Debug, PartialEq)]
pub struct CasePoset {
    pub case_id: String,
    pub poset: Poset,
    pub event_ids: Vec<EventId>,
    /// Global indices into the log's event list.
    pub events: Vec<usize>,
}

impl CasePoset {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn activities(&self) -> &[String] {
        self.poset.labels().expect("case posets are labelled")
    }
}

fn ensure_consistent(log: &EventLog) -> Result<()> {
    let report = check_consistency(log);
    if report.consistent {
        Ok(())
    } else {
        Err(Error::Inconsistent(Box::new(report)))
    }
}

/// The poset of one case. Fails if the case is unknown or the log inconsistent.
pub fn case_poset(log: &EventLog, case_id: &str) -> Result<CasePoset> {
    let k = log
        .case_index(case_id)
        .ok_or_else(|| Error::UnknownCase(case_id.to_string()))?;
    ensure_consistent(log)?;
    Ok(case_poset_by_index(log, k))
}

/// All case posets in case order.
pub fn case_posets(log: &EventLog) -> Result<Vec<CasePoset>> {
    ensure_consistent(log)?;
    Ok((0..log.case_count())
        .into_par_iter()
        .map(|k| case_poset_by_index(log, k))
        .collect())
}

/// Assumes a consistent log.
pub(crate) fn case_poset_by_index(log: &EventLog, k: usize) -> CasePoset {
    case_poset_with(log, k, None, &[]).expect("a consistent log has an acyclic combined order")
}

/// The case poset under replaced timestamps and extra same-case pairs (global
/// indices). Fails if the result is cyclic.
fn case_poset_with(
    log: &EventLog,
    k: usize,
    times: Option<&[Timestamp]>,
    extra: &[(usize, usize)],
) -> std::result::Result<CasePoset, order::OrderError> {
    let members = log.case_events_by_index(k);
    let local: Vec<Timestamp> = match times {
        Some(t) => members.iter().map(|&g| t[g]).collect(),
        None => members.iter().map(|&g| log.event(g).time).collect(),
    };
    let mut rel = time_relation(&local);
    rel.union_with(&log.case_explicit_relation(k));
    // members are in ascending log order
    let pos = |g: usize| members.binary_search(&g).expect("pair within the case");
    for &(a, b) in extra {
        rel.insert(pos(a), pos(b));
    }
    let rel = order::close_relation(rel)?;
    let labels = members.iter().map(|&g| log.event(g).activity.clone()).collect();
    Ok(CasePoset {
        case_id: log.case_id_by_index(k).to_string(),
        poset: Poset::from_closed_unchecked(rel).with_labels(labels),
        event_ids: members.iter().map(|&g| log.event(g).id.clone()).collect(),
        events: members.to_vec(),
    })
}

/// A labelled poset in canonical position order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CanonicalForm {
    /// `order[p]` is the original element placed at position `p`.
    pub order: Vec<usize>,
    bytes: Vec<u8>,
}

impl CanonicalForm {
    /// An encoding equal for two posets iff they are isomorphic as labelled posets.
    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn key(&self) -> String {
        hex(&Sha256::digest(&self.bytes))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Canonical form of a labelled poset; unlabelled posets use empty labels.
pub fn canonical_form(p: &Poset) -> CanonicalForm {
    let blank;
    let labels = match p.labels() {
        Some(l) => l,
        None => {
            blank = vec![String::new(); p.len()];
            &blank
        }
    };
    let c = canon::canonical(p, labels);
    CanonicalForm {
        order: c.order,
        bytes: c.code,
    }
}

/// sha256 (lowercase hex) of the canonical form.
pub fn canonical_key(p: &Poset) -> String {
    canonical_form(p).key()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantNode {
    pub idx: usize,
    pub activity: String,
}

/// Cases whose posets are isomorphic as labelled posets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialOrderVariant {
    pub canonical_key: String,
    pub frequency: usize,
    /// In order of first appearance in the log.
    pub case_ids: Vec<String>,
    /// Activities in canonical position order.
    pub nodes: Vec<VariantNode>,
    /// Covering pairs between canonical positions.
    pub hasse_edges: Vec<(usize, usize)>,
}

impl PartialOrderVariant {
    /// The representative poset on canonical positions.
    pub fn poset(&self) -> Poset {
        let labels = self.nodes.iter().map(|n| n.activity.clone()).collect();
        order::transitive_closure(self.hasse_edges.iter().copied(), self.nodes.len())
            .expect("hasse edges of a poset are acyclic")
            .with_labels(labels)
    }
}

/// Groups the cases of a consistent log, most frequent variant first, ties by key.
pub fn group_variants(log: &EventLog) -> Result<Vec<PartialOrderVariant>> {
    ensure_consistent(log)?;
    let forms = (0..log.case_count())
        .into_par_iter()
        .map(|k| form_of(case_poset_by_index(log, k)))
        .collect();
    Ok(group_forms(forms))
}

/// The variants of `preprocess::apply(log, ta, tb)`, computed without building the
/// coarsened log. Errors are the same as those of `apply`.
pub fn group_variants_at(
    log: &EventLog,
    ta: &TimeAggregator,
    tb: &Tiebreaker,
) -> Result<Vec<PartialOrderVariant>> {
    ensure_consistent(log)?;
    let times: Vec<Timestamp> = log.events().iter().map(|e| ta.aggregate(e.time)).collect();
    let pairs = preprocess::tiebreaker_pairs(log, &times, tb);
    let found = preprocess::conflicts(log, &pairs);
    if !found.is_empty() {
        return Err(Error::TiebreakerConflict(found));
    }
    // paths through other cases would need the global graph
    if !pairs.is_empty() && log.explicit_order().crosses_cases() {
        return group_variants(&preprocess::apply(log, ta, tb)?);
    }
    let mut per_case: Vec<Vec<(usize, usize)>> = vec![Vec::new(); log.case_count()];
    for (a, b) in pairs {
        per_case[log.case_index(&log.event(a).case_id).unwrap()].push((a, b));
    }
    let forms: std::result::Result<Vec<_>, _> = (0..log.case_count())
        .into_par_iter()
        .map(|k| case_poset_with(log, k, Some(&times), &per_case[k]).map(form_of))
        .collect();
    match forms {
        Ok(forms) => Ok(group_forms(forms)),
        // only reachable with an aggregator that is not monotone; let apply report it
        Err(_) => group_variants(&preprocess::apply(log, ta, tb)?),
    }
}

fn form_of(cp: CasePoset) -> (CasePoset, CanonicalForm) {
    let form = canonical_form(&cp.poset);
    (cp, form)
}

fn group_forms(forms: Vec<(CasePoset, CanonicalForm)>) -> Vec<PartialOrderVariant> {
    let mut slot: HashMap<&[u8], usize> = HashMap::new();
    let mut groups: Vec<(usize, Vec<String>)> = Vec::new();
    for (i, (cp, form)) in forms.iter().enumerate() {
        match slot.get(form.bytes()) {
            Some(&g) => groups[g].1.push(cp.case_id.clone()),
            None => {
                slot.insert(form.bytes(), groups.len());
                groups.push((i, vec![cp.case_id.clone()]));
            }
        }
    }

    let mut out: Vec<PartialOrderVariant> = groups
        .into_par_iter()
        .map(|(i, case_ids)| {
            let (cp, form) = &forms[i];
            representative(cp, form, case_ids)
        })
        .collect();
    out.sort_by(|a, b| {
        b.frequency
            .cmp(&a.frequency)
            .then_with(|| a.canonical_key.cmp(&b.canonical_key))
    });
    out
}

fn representative(cp: &CasePoset, form: &CanonicalForm, case_ids: Vec<String>) -> PartialOrderVariant {
    let n = cp.len();
    let mut position = vec![0; n];
    for (p, &v) in form.order.iter().enumerate() {
        position[v] = p;
    }
    let mut hasse_edges: Vec<(usize, usize)> = order::transitive_reduction(&cp.poset)
        .into_iter()
        .map(|(a, b)| (position[a], position[b]))
        .collect();
    hasse_edges.sort_unstable();
    let labels = cp.activities();
    PartialOrderVariant {
        canonical_key: form.key(),
        frequency: case_ids.len(),
        case_ids,
        nodes: form
            .order
            .iter()
            .enumerate()
            .map(|(idx, &v)| VariantNode {
                idx,
                activity: labels[v].clone(),
            })
            .collect(),
        hasse_edges,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;
    use crate::model::Event;
    use crate::preprocess::apply;
    use crate::time::Granularity;
    use proptest::prelude::*;

    fn labelled(n: usize, pairs: &[(usize, usize)], labels: &[&str]) -> Poset {
        order::transitive_closure(pairs.iter().copied(), n)
            .unwrap()
            .with_labels(labels.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn table_cases_are_distinct_variants() {
        let vs = group_variants(&table_log()).unwrap();
        assert_eq!(vs.len(), 2);
        assert!(vs.iter().all(|v| v.frequency == 1));
        // fully timestamped cases are chains
        for v in &vs {
            assert_eq!(v.hasse_edges.len(), v.nodes.len() - 1);
        }
    }

    #[test]
    fn day_granularity_poset_of_9901() {
        let log = apply(&table_log(), &TimeAggregator::new(Granularity::Day), &Tiebreaker::empty()).unwrap();
        let cp = case_poset(&log, "9901").unwrap();
        assert_eq!(cp.len(), 6);
        assert_eq!(cp.poset.pair_count(), 13);
        assert_eq!(order::transitive_reduction(&cp.poset).len(), 7);
        assert!(matches!(case_poset(&log, "nope"), Err(Error::UnknownCase(_))));
    }

    #[test]
    fn isomorphic_posets_share_a_key() {
        let a = labelled(3, &[(0, 1), (0, 2)], &["x", "y", "z"]);
        let b = labelled(3, &[(2, 0), (2, 1)], &["z", "y", "x"]);
        assert_eq!(canonical_key(&a), canonical_key(&b));
        let c = labelled(3, &[(0, 1), (0, 2)], &["y", "x", "z"]);
        assert_ne!(canonical_key(&a), canonical_key(&c));
        // same multiset of labels, different shape
        let d = labelled(3, &[(0, 1), (1, 2)], &["x", "y", "z"]);
        assert_ne!(canonical_key(&a), canonical_key(&d));
        assert_eq!(canonical_key(&a).len(), 64);
    }

    #[test]
    fn symmetric_posets_terminate_quickly() {
        // ten interchangeable elements
        let p = Poset::antichain(10).with_labels(vec!["a".into(); 10]);
        let q = Poset::antichain(10).with_labels(vec!["a".into(); 10]);
        assert_eq!(canonical_key(&p), canonical_key(&q));
        // five disjoint two-chains with equal labels: no twins, symmetric
        let pairs: Vec<(usize, usize)> = (0..5).map(|i| (2 * i, 2 * i + 1)).collect();
        let labels: Vec<&str> = (0..10).map(|i| if i % 2 == 0 { "a" } else { "b" }).collect();
        let p = labelled(10, &pairs, &labels);
        let shuffled: Vec<(usize, usize)> = (0..5).map(|i| (9 - 2 * i, 8 - 2 * i)).collect();
        let labels2: Vec<&str> = (0..10).map(|i| if i % 2 == 1 { "a" } else { "b" }).collect();
        let q = labelled(10, &shuffled, &labels2);
        assert_eq!(canonical_key(&p), canonical_key(&q));
    }

    #[test]
    fn variants_json_shape() {
        let t = ts(1, 0, 0, 0);
        let events = vec![
            Event::new("1", "c1", "a", t),
            Event::new("2", "c1", "b", t),
            Event::new("3", "c2", "b", t),
            Event::new("4", "c2", "a", t),
            Event::new("5", "c3", "a", t),
        ];
        let log = EventLog::unordered(events, "").unwrap();
        let vs = group_variants(&log).unwrap();
        assert_eq!(vs.len(), 2);
        assert_eq!(vs[0].frequency, 2);
        assert_eq!(vs[0].case_ids, ["c1", "c2"]);
        let json = serde_json::to_value(&vs[0]).unwrap();
        assert_eq!(json["nodes"][0]["activity"], "a");
        assert_eq!(json["hasse_edges"], serde_json::json!([]));
        assert_eq!(vs[0].poset().len(), 2);
    }

    #[test]
    fn variants_at_granularity_match_materialised() {
        let tb = Tiebreaker::new([("register request", "check ticket")]).unwrap();
        for g in Granularity::ALL {
            let ta = TimeAggregator::new(g);
            for tb in [Tiebreaker::empty(), tb.clone()] {
                let direct = group_variants_at(&table_log(), &ta, &tb).unwrap();
                let via = group_variants(&apply(&table_log(), &ta, &tb).unwrap()).unwrap();
                assert_eq!(direct, via, "{g}");
            }
        }
        let bad = Tiebreaker::new([("check ticket", "register request")]).unwrap();
        let row = table_log_row_order();
        let day = TimeAggregator::new(Granularity::Day);
        assert!(matches!(group_variants_at(&row, &day, &bad), Err(Error::TiebreakerConflict(_))));
    }

    #[test]
    fn inconsistent_log_is_rejected() {
        let events = vec![Event::new("1", "c", "a", ts(2, 0, 0, 0)), Event::new("2", "c", "b", ts(1, 0, 0, 0))];
        let log = EventLog::new(events, [(0, 1)], "").unwrap();
        assert!(matches!(group_variants(&log), Err(Error::Inconsistent(_))));
    }

    /// Brute-force isomorphism over all permutations.
    fn isomorphic(a: &Poset, b: &Poset) -> bool {
        let n = a.len();
        if n != b.len() {
            return false;
        }
        let (la, lb) = (a.labels().unwrap(), b.labels().unwrap());
        let mut perm: Vec<usize> = (0..n).collect();
        loop {
            let ok = (0..n).all(|i| la[i] == lb[perm[i]])
                && (0..n).all(|i| (0..n).all(|j| a.precedes(i, j) == b.precedes(perm[i], perm[j])));
            if ok {
                return true;
            }
            // next permutation
            let Some(i) = (1..n).rev().find(|&i| perm[i - 1] < perm[i]) else {
                return false;
            };
            let j = (i..n).rev().find(|&j| perm[j] > perm[i - 1]).unwrap();
            perm.swap(i - 1, j);
            perm[i..].reverse();
        }
    }

    fn small_poset() -> impl Strategy<Value = Poset> {
        (1usize..7).prop_flat_map(|n| {
            (
                proptest::collection::vec((0..n, 0..n), 0..10),
                proptest::collection::vec(proptest::sample::select(vec!["a", "b"]), n),
            )
                .prop_map(move |(pairs, labels)| {
                    let dag: Vec<(usize, usize)> = pairs
                        .into_iter()
                        .filter(|(i, j)| i != j)
                        .map(|(i, j)| (i.min(j), i.max(j)))
                        .collect();
                    order::transitive_closure(dag, n)
                        .unwrap()
                        .with_labels(labels.into_iter().map(String::from).collect())
                })
        })
    }

    fn permuted(p: &Poset, perm: &[usize]) -> Poset {
        let n = p.len();
        let labels = p.labels().unwrap();
        let mut new_labels = vec![String::new(); n];
        for i in 0..n {
            new_labels[perm[i]] = labels[i].clone();
        }
        order::transitive_closure(p.pairs().map(|(i, j)| (perm[i], perm[j])), n)
            .unwrap()
            .with_labels(new_labels)
    }

    proptest! {
        #[test]
        fn key_is_invariant_under_relabelling(p in small_poset(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut perm: Vec<usize> = (0..p.len()).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(canonical_key(&p), canonical_key(&permuted(&p, &perm)));
        }

        #[test]
        fn equal_keys_iff_isomorphic(a in small_poset(), b in small_poset()) {
            prop_assert_eq!(canonical_key(&a) == canonical_key(&b), isomorphic(&a, &b));
        }

        #[test]
        fn representative_is_isomorphic(p in small_poset()) {
            let n = p.len();
            let form = canonical_form(&p);
            let cp = CasePoset {
                case_id: "c".into(),
                poset: p.clone(),
                event_ids: (0..n).map(|i| EventId::new(i.to_string())).collect(),
                events: (0..n).collect(),
            };
            let v = representative(&cp, &form, vec!["c".into()]);
            prop_assert!(isomorphic(&v.poset(), &p));
            prop_assert_eq!(canonical_key(&v.poset()), v.canonical_key);
        }
    }
}
