//! Sparse adjacency for the global explicit order.

use std::collections::HashSet;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub(crate) struct Csr {
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

impl Csr {
    pub(crate) fn build(n: usize, edges: &[(usize, usize)], reverse: bool) -> Self {
        let mut offsets = vec![0usize; n + 1];
        for &(a, b) in edges {
            let src = if reverse { b } else { a };
            offsets[src + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut targets = vec![0usize; edges.len()];
        for &(a, b) in edges {
            let (src, dst) = if reverse { (b, a) } else { (a, b) };
            targets[fill[src]] = dst;
            fill[src] += 1;
        }
        Self { offsets, targets }
    }

    pub(crate) fn len(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    #[inline]
    pub(crate) fn neighbours(&self, u: usize) -> &[usize] {
        &self.targets[self.offsets[u]..self.offsets[u + 1]]
    }

    /// One cycle, in traversal order, if any exists.
    pub(crate) fn find_cycle(&self) -> Option<Vec<usize>> {
        let n = self.len();
        let mut colour = vec![0u8; n];
        for root in 0..n {
            if colour[root] != 0 {
                continue;
            }
            colour[root] = 1;
            let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
            while let Some(&mut (u, ref mut next)) = stack.last_mut() {
                let nb = self.neighbours(u);
                if *next < nb.len() {
                    let v = nb[*next];
                    *next += 1;
                    match colour[v] {
                        0 => {
                            colour[v] = 1;
                            stack.push((v, 0));
                        }
                        1 => {
                            let start = stack.iter().position(|&(p, _)| p == v).unwrap();
                            return Some(stack[start..].iter().map(|&(p, _)| p).collect());
                        }
                        _ => {}
                    }
                } else {
                    colour[u] = 2;
                    stack.pop();
                }
            }
        }
        None
    }

    /// Nodes reachable from `start` (excluding `start` unless on a cycle),
    /// never expanding nodes rejected by `keep`.
    pub(crate) fn reachable(&self, start: usize, keep: impl Fn(usize) -> bool) -> HashSet<usize> {
        let mut seen = HashSet::new();
        let mut stack: Vec<usize> = self.neighbours(start).to_vec();
        while let Some(v) = stack.pop() {
            if !keep(v) || !seen.insert(v) {
                continue;
            }
            stack.extend_from_slice(self.neighbours(v));
        }
        seen
    }

    /// `starts` plus everything reachable from them, sorted.
    pub(crate) fn closure_of(&self, starts: impl IntoIterator<Item = usize>) -> Vec<usize> {
        let mut seen = vec![false; self.len()];
        let mut stack: Vec<usize> = starts.into_iter().collect();
        while let Some(v) = stack.pop() {
            if !seen[v] {
                seen[v] = true;
                stack.extend_from_slice(self.neighbours(v));
            }
        }
        (0..self.len()).filter(|&i| seen[i]).collect()
    }
}
