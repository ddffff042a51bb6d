//! Dense binary relations over `0..n`, stored as one bit row per element.

use std::fmt;

const WORD: usize = 64;

#[inline]
fn words_for(n: usize) -> usize {
    n.div_ceil(WORD)
}

/// A fixed-width bit set used for relation rows and order ideals.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct BitSet {
    words: Vec<u64>,
}

impl BitSet {
    pub fn new(n: usize) -> Self {
        Self {
            words: vec![0; words_for(n)],
        }
    }

    pub fn full(n: usize) -> Self {
        let mut s = Self::new(n);
        for i in 0..n {
            s.insert(i);
        }
        s
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        self.words
            .get(i / WORD)
            .is_some_and(|w| w & (1 << (i % WORD)) != 0)
    }

    #[inline]
    pub fn insert(&mut self, i: usize) {
        self.words[i / WORD] |= 1 << (i % WORD);
    }

    #[inline]
    pub fn remove(&mut self, i: usize) {
        self.words[i / WORD] &= !(1 << (i % WORD));
    }

    pub fn union_with(&mut self, other: &BitSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= *b;
        }
    }

    pub fn difference_with(&mut self, other: &BitSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= !*b;
        }
    }

    pub fn is_subset(&self, other: &BitSet) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| a & !b == 0)
    }

    pub fn intersects(&self, other: &BitSet) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * WORD + bit)
            })
        })
    }
}

impl fmt::Debug for BitSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// A binary relation on `0..n`. Row `i` holds every `j` with `i R j`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Relation {
    n: usize,
    rows: Vec<BitSet>,
}

impl Relation {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            rows: vec![BitSet::new(n); n],
        }
    }

    /// Builds a relation from pairs. Out-of-range pairs are reported as `Err((i, j))`.
    pub fn from_pairs<I>(n: usize, pairs: I) -> Result<Self, (usize, usize)>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut r = Self::empty(n);
        for (i, j) in pairs {
            if i >= n || j >= n {
                return Err((i, j));
            }
            r.rows[i].insert(j);
        }
        Ok(r)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.rows[i].contains(j)
    }

    #[inline]
    pub fn insert(&mut self, i: usize, j: usize) {
        self.rows[i].insert(j);
    }

    pub fn row(&self, i: usize) -> &BitSet {
        &self.rows[i]
    }

    pub(crate) fn row_mut(&mut self, i: usize) -> &mut BitSet {
        &mut self.rows[i]
    }

    /// Column `j`: every `i` with `i R j`.
    pub fn column(&self, j: usize) -> BitSet {
        let mut col = BitSet::new(self.n);
        for (i, row) in self.rows.iter().enumerate() {
            if row.contains(j) {
                col.insert(i);
            }
        }
        col
    }

    pub fn pair_count(&self) -> usize {
        self.rows.iter().map(BitSet::count).sum()
    }

    /// Pairs in row-major order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |j| (i, j)))
    }

    pub fn union_with(&mut self, other: &Relation) {
        assert_eq!(self.n, other.n, "relations over different element sets");
        for (a, b) in self.rows.iter_mut().zip(&other.rows) {
            a.union_with(b);
        }
    }

    pub fn is_subset(&self, other: &Relation) -> bool {
        self.n == other.n && self.rows.iter().zip(&other.rows).all(|(a, b)| a.is_subset(b))
    }

    pub fn is_irreflexive(&self) -> bool {
        (0..self.n).all(|i| !self.contains(i, i))
    }

    pub fn is_asymmetric(&self) -> bool {
        self.pairs().all(|(i, j)| !self.contains(j, i))
    }

    /// `i R j` and `j R k` imply `i R k`.
    pub fn is_transitive(&self) -> bool {
        self.rows.iter().all(|row| {
            let mut reach = row.clone();
            for j in row.iter() {
                reach.union_with(&self.rows[j]);
            }
            reach == *row
        })
    }

    /// Reflexive incomparability: `i ~ j` iff neither `i R j` nor `j R i`.
    pub fn incomparability(&self) -> Vec<BitSet> {
        (0..self.n)
            .map(|i| {
                let mut inc = BitSet::full(self.n);
                inc.difference_with(&self.rows[i]);
                inc.difference_with(&self.column(i));
                inc
            })
            .collect()
    }

    /// Warshall-style closure on bit rows. Does not check for cycles.
    pub fn close(&mut self) {
        for k in 0..self.n {
            let row_k = self.rows[k].clone();
            for i in 0..self.n {
                if self.rows[i].contains(k) {
                    self.rows[i].union_with(&row_k);
                }
            }
        }
    }
}

impl fmt::Debug for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Relation")
            .field("n", &self.n)
            .field("pairs", &self.pairs().collect::<Vec<_>>())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bitset_ops_cross_word_boundary() {
        let mut s = BitSet::new(130);
        s.insert(0);
        s.insert(63);
        s.insert(64);
        s.insert(129);
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![0, 63, 64, 129]);
        assert_eq!(s.count(), 4);
        s.remove(63);
        assert!(!s.contains(63));
        assert!(!s.contains(500));
    }

    #[test]
    fn warshall_closes_chain() {
        let mut r = Relation::from_pairs(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        assert!(!r.is_transitive());
        r.close();
        assert!(r.is_transitive());
        assert_eq!(r.pair_count(), 6);
    }

    #[test]
    fn out_of_range_pair_rejected() {
        assert_eq!(Relation::from_pairs(2, [(0, 2)]).unwrap_err(), (0, 2));
    }
}
