//! Finite strict partial orders: closure, reduction, axiom checks and union.

use crate::relation::{BitSet, Relation};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OrderError {
    /// The closure of the input relates some element to itself. `cycle` lists one
    /// witness cycle in traversal order (the first element is not repeated).
    #[error("order contains a cycle through elements {cycle:?}")]
    CyclicOrder { cycle: Vec<usize> },
    #[error("pair ({0}, {1}) is outside the element range")]
    OutOfRange(usize, usize),
    #[error("cannot combine orders over {0} and {1} elements")]
    SizeMismatch(usize, usize),
    #[error("relation is not a strict partial order")]
    NotStrictPartialOrder,
}

/// A strict partial order over `0..n`, always stored transitively closed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Poset {
    rel: Relation,
    labels: Option<Vec<String>>,
}

impl Poset {
    pub fn antichain(n: usize) -> Self {
        Self::from_closed_unchecked(Relation::empty(n))
    }

    pub fn chain(n: usize) -> Self {
        let mut rel = Relation::empty(n);
        for i in 0..n {
            for j in i + 1..n {
                rel.insert(i, j);
            }
        }
        Self::from_closed_unchecked(rel)
    }

    /// Wraps an already closed relation after checking the three axioms.
    pub fn from_relation(rel: Relation) -> Result<Self, OrderError> {
        if is_strict_partial_order(&rel) {
            Ok(Self::from_closed_unchecked(rel))
        } else {
            Err(OrderError::NotStrictPartialOrder)
        }
    }

    pub(crate) fn from_closed_unchecked(rel: Relation) -> Self {
        debug_assert!(rel.len() > 64 || is_strict_partial_order(&rel));
        Self { rel, labels: None }
    }

    /// Attaches one label per element. Panics if the count is wrong.
    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        assert_eq!(labels.len(), self.len(), "one label per element");
        self.labels = Some(labels);
        self
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn label(&self, i: usize) -> Option<&str> {
        self.labels.as_ref().map(|l| l[i].as_str())
    }

    pub fn len(&self) -> usize {
        self.rel.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rel.is_empty()
    }

    pub fn relation(&self) -> &Relation {
        &self.rel
    }

    #[inline]
    pub fn precedes(&self, i: usize, j: usize) -> bool {
        self.rel.contains(i, j)
    }

    pub fn comparable(&self, i: usize, j: usize) -> bool {
        self.precedes(i, j) || self.precedes(j, i)
    }

    pub fn successors(&self, i: usize) -> &BitSet {
        self.rel.row(i)
    }

    pub fn predecessors(&self, i: usize) -> BitSet {
        self.rel.column(i)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rel.pairs()
    }

    pub fn pair_count(&self) -> usize {
        self.rel.pair_count()
    }
}

impl AsRef<Relation> for Poset {
    fn as_ref(&self) -> &Relation {
        &self.rel
    }
}

/// Smallest transitive superset of `pairs` over `0..n`.
pub fn transitive_closure<I>(pairs: I, n: usize) -> Result<Poset, OrderError>
where
    I: IntoIterator<Item = (usize, usize)>,
{
    let rel = Relation::from_pairs(n, pairs).map_err(|(i, j)| OrderError::OutOfRange(i, j))?;
    close_relation(rel).map(Poset::from_closed_unchecked)
}

/// Closes `rel` in reverse topological order, or reports a cycle.
pub(crate) fn close_relation(rel: Relation) -> Result<Relation, OrderError> {
    let n = rel.len();
    let topo = match topological_order(&rel) {
        Some(t) => t,
        None => {
            return Err(OrderError::CyclicOrder {
                cycle: find_cycle(&rel).expect("Kahn found a cycle"),
            })
        }
    };
    let mut closed = Relation::empty(n);
    for &u in topo.iter().rev() {
        let mut reach = rel.row(u).clone();
        for v in rel.row(u).iter() {
            reach.union_with(closed.row(v));
        }
        *closed.row_mut(u) = reach;
    }
    Ok(closed)
}

fn topological_order(rel: &Relation) -> Option<Vec<usize>> {
    let n = rel.len();
    let mut indeg = vec![0usize; n];
    for (_, j) in rel.pairs() {
        indeg[j] += 1;
    }
    let mut stack: Vec<usize> = (0..n).rev().filter(|&i| indeg[i] == 0).collect();
    let mut out = Vec::with_capacity(n);
    while let Some(u) = stack.pop() {
        out.push(u);
        for v in rel.row(u).iter() {
            indeg[v] -= 1;
            if indeg[v] == 0 {
                stack.push(v);
            }
        }
    }
    (out.len() == n).then_some(out)
}

/// Iterative three-colour DFS; returns the first back-edge cycle found.
fn find_cycle(rel: &Relation) -> Option<Vec<usize>> {
    const WHITE: u8 = 0;
    const GREY: u8 = 1;
    const BLACK: u8 = 2;
    let n = rel.len();
    let mut colour = vec![WHITE; n];
    for root in 0..n {
        if colour[root] != WHITE {
            continue;
        }
        let mut path: Vec<usize> = vec![root];
        let mut iters: Vec<Vec<usize>> = vec![rel.row(root).iter().collect()];
        colour[root] = GREY;
        while let Some(it) = iters.last_mut() {
            match it.pop() {
                Some(v) if colour[v] == GREY => {
                    let start = path.iter().position(|&p| p == v).unwrap();
                    return Some(path[start..].to_vec());
                }
                Some(v) if colour[v] == WHITE => {
                    colour[v] = GREY;
                    path.push(v);
                    iters.push(rel.row(v).iter().collect());
                }
                Some(_) => {}
                None => {
                    colour[path.pop().unwrap()] = BLACK;
                    iters.pop();
                }
            }
        }
    }
    None
}

/// Irreflexive, transitive and asymmetric.
pub fn is_strict_partial_order<R: AsRef<Relation>>(r: &R) -> bool {
    let r = r.as_ref();
    r.is_irreflexive() && r.is_asymmetric() && r.is_transitive()
}

/// A strict partial order whose incomparability relation is transitive.
pub fn is_strict_weak_order<R: AsRef<Relation>>(r: &R) -> bool {
    let rel = r.as_ref();
    if !is_strict_partial_order(rel) {
        return false;
    }
    // reflexive incomparability is an equivalence iff every class agrees on its members
    let inc = rel.incomparability();
    (0..rel.len()).all(|i| inc[i].iter().all(|j| inc[j] == inc[i]))
}

impl AsRef<Relation> for Relation {
    fn as_ref(&self) -> &Relation {
        self
    }
}

/// Transitive closure of the union of two orders over the same elements.
pub fn union_orders(a: &Poset, b: &Poset) -> Result<Poset, OrderError> {
    if a.len() != b.len() {
        return Err(OrderError::SizeMismatch(a.len(), b.len()));
    }
    if let Some((i, j)) = a.pairs().find(|&(i, j)| b.precedes(j, i)) {
        return Err(OrderError::CyclicOrder { cycle: vec![i, j] });
    }
    let mut rel = a.rel.clone();
    rel.union_with(&b.rel);
    close_relation(rel).map(Poset::from_closed_unchecked)
}

/// Covering pairs: `(i, j)` with `i < j` and no `k` strictly between.
pub fn transitive_reduction(p: &Poset) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..p.len() {
        let succ = p.successors(i);
        let mut implied = BitSet::new(p.len());
        for k in succ.iter() {
            implied.union_with(p.successors(k));
        }
        let mut cover = succ.clone();
        cover.difference_with(&implied);
        out.extend(cover.iter().map(|j| (i, j)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reach_oracle(n: usize, edges: &[(usize, usize)]) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for s in 0..n {
            let mut seen = vec![false; n];
            let mut stack: Vec<usize> = edges.iter().filter(|e| e.0 == s).map(|e| e.1).collect();
            while let Some(v) = stack.pop() {
                if !seen[v] {
                    seen[v] = true;
                    stack.extend(edges.iter().filter(|e| e.0 == v).map(|e| e.1));
                }
            }
            out.extend((0..n).filter(|&t| seen[t]).map(|t| (s, t)));
        }
        out
    }

    #[test]
    fn closure_of_two_edge_chain() {
        let p = transitive_closure([(1, 2), (2, 3)], 4).unwrap();
        assert_eq!(p.pairs().collect::<Vec<_>>(), vec![(1, 2), (1, 3), (2, 3)]);
    }

    #[test]
    fn two_cycle_is_rejected_with_witness() {
        match transitive_closure([(1, 2), (2, 1)], 3) {
            Err(OrderError::CyclicOrder { cycle }) => {
                let mut c = cycle.clone();
                c.sort();
                assert_eq!(c, vec![1, 2]);
            }
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    #[test]
    fn self_pair_is_a_cycle() {
        assert_eq!(
            transitive_closure([(0, 0)], 1),
            Err(OrderError::CyclicOrder { cycle: vec![0] })
        );
    }

    #[test]
    fn chain_is_weak_order() {
        let c = Poset::chain(3);
        assert!(is_strict_partial_order(&c));
        assert!(is_strict_weak_order(&c));
    }

    #[test]
    fn n_shaped_poset_is_not_weak() {
        // a=0, b=1, c=2, d=3 with a<c, b<c, b<d
        let p = transitive_closure([(0, 2), (1, 2), (1, 3)], 4).unwrap();
        assert!(is_strict_partial_order(&p));
        assert!(!is_strict_weak_order(&p));
        // witness: a ~ d and d ~ c, but a < c
        assert!(!p.comparable(0, 3) && !p.comparable(3, 2) && p.precedes(0, 2));
    }

    #[test]
    fn non_transitive_relation_fails_spo() {
        let r = Relation::from_pairs(3, [(0, 1), (1, 2)]).unwrap();
        assert!(!is_strict_partial_order(&r));
        let r = Relation::from_pairs(2, [(0, 1), (1, 0)]).unwrap();
        assert!(!is_strict_partial_order(&r));
    }

    #[test]
    fn union_cases() {
        let a = transitive_closure([(0, 1)], 3).unwrap();
        assert_eq!(union_orders(&a, &Poset::antichain(3)).unwrap(), a);
        let b = transitive_closure([(1, 0)], 3).unwrap();
        assert_eq!(
            union_orders(&a, &b),
            Err(OrderError::CyclicOrder { cycle: vec![0, 1] })
        );
        let c = transitive_closure([(1, 2)], 3).unwrap();
        let u = union_orders(&a, &c).unwrap();
        assert!(u.precedes(0, 2));
        assert_eq!(u.pair_count(), 3);
    }

    #[test]
    fn union_detects_long_cycle() {
        let a = transitive_closure([(0, 1), (2, 3)], 4).unwrap();
        let b = transitive_closure([(1, 2), (3, 0)], 4).unwrap();
        assert!(matches!(union_orders(&a, &b), Err(OrderError::CyclicOrder { .. })));
    }

    #[test]
    fn reduction_examples() {
        let chain = transitive_closure([(1, 2), (2, 3), (1, 3)], 4).unwrap();
        assert_eq!(transitive_reduction(&chain), vec![(1, 2), (2, 3)]);
        assert!(transitive_reduction(&Poset::antichain(5)).is_empty());
        // reg=0, ct=1, ch=2, et=3, dec=4, pay=5
        let run = transitive_closure([(0, 1), (0, 2), (0, 3), (1, 4), (2, 4), (3, 4), (4, 5)], 6)
            .unwrap();
        let red = transitive_reduction(&run);
        assert_eq!(red.len(), 7);
        assert_eq!(
            red,
            vec![(0, 1), (0, 2), (0, 3), (1, 4), (2, 4), (3, 4), (4, 5)]
        );
    }

    fn dag_edges(max_n: usize) -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
        (1..=max_n).prop_flat_map(|n| {
            let pairs: Vec<(usize, usize)> =
                (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
            let len = pairs.len();
            (
                Just(n),
                proptest::collection::vec(any::<bool>(), len),
                Just(pairs),
            )
                .prop_map(|(n, keep, pairs)| {
                    (n, pairs.into_iter().zip(keep).filter(|p| p.1).map(|p| p.0).collect())
                })
        })
    }

    fn permuted(n: usize, edges: &[(usize, usize)], seed: u64) -> Vec<(usize, usize)> {
        // relabel so the DAG is not presented in index order
        let mut perm: Vec<usize> = (0..n).collect();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect()
    }

    proptest! {
        #[test]
        fn closure_matches_reachability((n, edges) in dag_edges(8), seed in any::<u64>()) {
            let edges = permuted(n, &edges, seed);
            let p = transitive_closure(edges.iter().copied(), n).unwrap();
            let mut expect = reach_oracle(n, &edges);
            expect.sort();
            prop_assert_eq!(p.pairs().collect::<Vec<_>>(), expect);
            prop_assert!(is_strict_partial_order(&p));
        }

        #[test]
        fn reduction_round_trips((n, edges) in dag_edges(10), seed in any::<u64>()) {
            let edges = permuted(n, &edges, seed);
            let p = transitive_closure(edges, n).unwrap();
            let back = transitive_closure(transitive_reduction(&p), n).unwrap();
            prop_assert_eq!(back, p);
        }

        #[test]
        fn union_is_commutative_and_idempotent(
            (n, e1) in dag_edges(7),
            keep in proptest::collection::vec(any::<bool>(), 21),
        ) {
            let a = transitive_closure(e1.iter().copied(), n).unwrap();
            // second order drawn from the same forward pairs so the union is acyclic
            let pairs: Vec<(usize, usize)> =
                (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
            let e2 = pairs.into_iter().zip(keep).filter(|p| p.1).map(|p| p.0);
            let b = transitive_closure(e2, n).unwrap();
            let ab = union_orders(&a, &b).unwrap();
            prop_assert_eq!(&ab, &union_orders(&b, &a).unwrap());
            prop_assert_eq!(&union_orders(&ab, &ab).unwrap(), &ab);
            prop_assert_eq!(&union_orders(&a, &a).unwrap(), &a);
        }
    }
}
