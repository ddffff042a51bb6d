//! Canonical labelling of labelled posets.
//!
//! Colour refinement followed by an individualisation-refinement search over
//! the first non-singleton cell. Branches are pruned with automorphisms: twin
//! transpositions are known up front and further ones are learnt from leaves
//! with equal codes. The smallest leaf code wins, so two posets get the same
//! code exactly when they are isomorphic as labelled posets.

use std::cmp::Ordering;

use crate::order::Poset;

pub(crate) struct Canonical {
    /// `order[p]` is the vertex placed at canonical position `p`.
    pub order: Vec<usize>,
    pub code: Vec<u8>,
}

struct Graph<'a> {
    labels: Vec<&'a str>,
    succ: Vec<Vec<usize>>,
    pred: Vec<Vec<usize>>,
    poset: &'a Poset,
}

type Partition = Vec<Vec<usize>>;

pub(crate) fn canonical(poset: &Poset, labels: &[String]) -> Canonical {
    let n = poset.len();
    let mut succ = vec![Vec::new(); n];
    let mut pred = vec![Vec::new(); n];
    for (i, j) in poset.pairs() {
        succ[i].push(j);
        pred[j].push(i);
    }
    let g = Graph {
        labels: labels.iter().map(String::as_str).collect(),
        succ,
        pred,
        poset,
    };

    let mut by_label: Vec<usize> = (0..n).collect();
    by_label.sort_by(|&a, &b| g.labels[a].cmp(g.labels[b]));
    let initial: Partition = by_label
        .chunk_by(|&a, &b| g.labels[a] == g.labels[b])
        .map(<[usize]>::to_vec)
        .collect();

    let mut search = Search {
        g: &g,
        twins: twin_classes(&g),
        automorphisms: Vec::new(),
        first: None,
        best: None,
    };
    let root = refine(&g, initial);
    search.explore(root, &mut Vec::new());
    let (code, order) = search.best.expect("the search reaches at least one leaf");
    Canonical { order, code }
}

/// Vertices with the same label, predecessors and successors.
fn twin_classes(g: &Graph<'_>) -> Vec<usize> {
    let n = g.labels.len();
    let mut idx: Vec<usize> = (0..n).collect();
    let key = |v: usize| (g.labels[v], &g.pred[v], &g.succ[v]);
    idx.sort_by(|&a, &b| key(a).cmp(&key(b)));
    let mut class = vec![0; n];
    for group in idx.chunk_by(|&a, &b| key(a) == key(b)) {
        for &v in group {
            class[v] = group[0];
        }
    }
    class
}

fn refine(g: &Graph<'_>, mut cells: Partition) -> Partition {
    let n = g.labels.len();
    let mut cell_of = vec![0usize; n];
    loop {
        for (c, cell) in cells.iter().enumerate() {
            for &v in cell {
                cell_of[v] = c;
            }
        }
        let signature = |v: usize| {
            let mut out: Vec<usize> = g.succ[v].iter().map(|&w| cell_of[w]).collect();
            let mut inn: Vec<usize> = g.pred[v].iter().map(|&w| cell_of[w]).collect();
            out.sort_unstable();
            inn.sort_unstable();
            (out, inn)
        };
        let before = cells.len();
        let mut next = Vec::with_capacity(before);
        for cell in cells {
            if cell.len() == 1 {
                next.push(cell);
                continue;
            }
            let mut keyed: Vec<_> = cell.into_iter().map(|v| (signature(v), v)).collect();
            keyed.sort();
            for group in keyed.chunk_by(|a, b| a.0 == b.0) {
                next.push(group.iter().map(|(_, v)| *v).collect());
            }
        }
        cells = next;
        if cells.len() == before {
            return cells;
        }
    }
}

struct Search<'g, 'a> {
    g: &'g Graph<'a>,
    twins: Vec<usize>,
    automorphisms: Vec<Vec<usize>>,
    first: Option<(Vec<u8>, Vec<usize>)>,
    best: Option<(Vec<u8>, Vec<usize>)>,
}

impl Search<'_, '_> {
    fn explore(&mut self, cells: Partition, prefix: &mut Vec<usize>) {
        let Some(target) = cells.iter().position(|c| c.len() > 1) else {
            self.leaf(cells.into_iter().map(|c| c[0]).collect());
            return;
        };
        let mut tried: Vec<usize> = Vec::new();
        for &v in &cells[target] {
            if tried.iter().any(|&w| self.twins[w] == self.twins[v]) {
                continue;
            }
            if !tried.is_empty() && self.same_orbit(v, &tried, prefix) {
                continue;
            }
            tried.push(v);
            let mut child = cells.clone();
            let rest: Vec<usize> = child[target].iter().copied().filter(|&w| w != v).collect();
            child[target] = vec![v];
            child.insert(target + 1, rest);
            prefix.push(v);
            self.explore(refine(self.g, child), prefix);
            prefix.pop();
        }
    }

    /// Whether `v` is mapped onto a tried vertex by the known automorphisms that
    /// fix `prefix` pointwise.
    fn same_orbit(&self, v: usize, tried: &[usize], prefix: &[usize]) -> bool {
        let stabilising: Vec<&Vec<usize>> = self
            .automorphisms
            .iter()
            .filter(|a| prefix.iter().all(|&p| a[p] == p))
            .collect();
        if stabilising.is_empty() {
            return false;
        }
        let mut orbit = vec![v];
        let mut seen = std::collections::HashSet::from([v]);
        while let Some(x) = orbit.pop() {
            if tried.contains(&x) {
                return true;
            }
            for a in &stabilising {
                if seen.insert(a[x]) {
                    orbit.push(a[x]);
                }
            }
        }
        false
    }

    fn leaf(&mut self, order: Vec<usize>) {
        let code = leaf_code(self.g, &order);
        for known in [&self.first, &self.best].into_iter().flatten() {
            if known.0 == code {
                let mut auto = vec![0; order.len()];
                for (p, &v) in order.iter().enumerate() {
                    auto[v] = known.1[p];
                }
                self.automorphisms.push(auto);
                return;
            }
        }
        if self.first.is_none() {
            self.first = Some((code.clone(), order.clone()));
        }
        let better = match &self.best {
            None => true,
            Some((b, _)) => code.cmp(b) == Ordering::Less,
        };
        if better {
            self.best = Some((code, order));
        }
    }
}

/// Labels in position order, then the closed relation as a row-major bit matrix.
fn leaf_code(g: &Graph<'_>, order: &[usize]) -> Vec<u8> {
    let n = order.len();
    let mut code = Vec::with_capacity(8 + n * 8 + n * n.div_ceil(8));
    code.extend_from_slice(&(n as u32).to_be_bytes());
    for &v in order {
        let l = g.labels[v].as_bytes();
        code.extend_from_slice(&(l.len() as u32).to_be_bytes());
        code.extend_from_slice(l);
    }
    let rel = g.poset.relation();
    for &v in order {
        let mut byte = 0u8;
        for (q, &w) in order.iter().enumerate() {
            if rel.contains(v, w) {
                byte |= 0x80 >> (q % 8);
            }
            if q % 8 == 7 {
                code.push(byte);
                byte = 0;
            }
        }
        if !n.is_multiple_of(8) {
            code.push(byte);
        }
    }
    code
}
