//! Linear extensions of case posets: counting, enumeration, uniform sampling,
//! and k-sequentialization of whole logs.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::count::ExtensionCount;
use crate::error::{Error, Result};
use crate::model::{check_consistency, EventId, EventLog};
use crate::order::Poset;
use crate::relation::BitSet;
use crate::time::Timestamp;
use crate::variants::case_poset_by_index;

/// Default bound on the number of downsets a counting or sampling table may hold.
pub const DEFAULT_MAX_DOWNSETS: usize = 5_000_000;

type Downset = Box<[u64]>;

fn key(set: &BitSet, n: usize) -> Downset {
    let mut words = vec![0u64; set_words(n)];
    for i in set.iter() {
        words[i / 64] |= 1 << (i % 64);
    }
    words.into_boxed_slice()
}

fn set_words(n: usize) -> usize {
    n.div_ceil(64).max(1)
}

fn has(d: &[u64], i: usize) -> bool {
    d[i / 64] >> (i % 64) & 1 == 1
}

fn with(d: &[u64], i: usize) -> Downset {
    let mut out: Downset = d.into();
    out[i / 64] |= 1 << (i % 64);
    out
}

#[derive(Clone, Debug)]
struct Shape {
    n: usize,
    /// Predecessor masks, one per element.
    preds: Vec<Downset>,
}

impl Shape {
    fn of(p: &Poset) -> Self {
        Self {
            n: p.len(),
            preds: (0..p.len()).map(|j| key(&p.predecessors(j), p.len())).collect(),
        }
    }

    fn empty(&self) -> Downset {
        vec![0u64; set_words(self.n)].into_boxed_slice()
    }

    /// Elements outside `d` all of whose predecessors are in `d`.
    fn minimal_outside<'a>(&'a self, d: &'a [u64]) -> impl Iterator<Item = usize> + 'a {
        (0..self.n).filter(move |&i| {
            !has(d, i) && self.preds[i].iter().zip(d).all(|(p, w)| p & !w == 0)
        })
    }
}

fn too_many(limit: usize) -> Error {
    Error::ResourceLimit {
        what: "downsets of the case poset".into(),
        limit,
    }
}

fn overflow<C: ExtensionCount>() -> Error {
    Error::ResourceLimit {
        what: format!("linear-extension count in {}", std::any::type_name::<C>()),
        limit: 8 * std::mem::size_of::<C>(),
    }
}

/// Number of linear extensions by dynamic programming over downsets, level by level.
/// Fails when a level grows past `max_downsets` or the count type overflows.
pub fn count_linear_extensions<C: ExtensionCount>(p: &Poset, max_downsets: usize) -> Result<C> {
    let shape = Shape::of(p);
    let mut level: HashMap<Downset, C> = HashMap::from([(shape.empty(), C::one())]);
    for _ in 0..shape.n {
        let mut next: HashMap<Downset, C> = HashMap::with_capacity(level.len());
        for (d, c) in &level {
            for x in shape.minimal_outside(d) {
                let slot = next.entry(with(d, x)).or_insert_with(C::zero);
                *slot = slot.checked_sum(c).ok_or_else(overflow::<C>)?;
            }
        }
        if next.len() > max_downsets {
            return Err(too_many(max_downsets));
        }
        level = next;
    }
    Ok(level.into_values().next().unwrap_or_else(C::one))
}

/// For every downset, the number of ways to complete it to a linear extension.
#[derive(Clone, Debug)]
pub struct ExtensionTable<C> {
    shape: Shape,
    completions: HashMap<Downset, C>,
}

impl<C: ExtensionCount> ExtensionTable<C> {
    pub fn build(p: &Poset, max_downsets: usize) -> Result<Self> {
        let shape = Shape::of(p);
        let mut levels: Vec<Vec<Downset>> = vec![vec![shape.empty()]];
        let mut total = 1usize;
        for _ in 0..shape.n {
            let mut seen: HashMap<Downset, ()> = HashMap::new();
            for d in levels.last().unwrap() {
                for x in shape.minimal_outside(d) {
                    seen.insert(with(d, x), ());
                }
            }
            total += seen.len();
            if total > max_downsets {
                return Err(too_many(max_downsets));
            }
            levels.push(seen.into_keys().collect());
        }
        let mut completions: HashMap<Downset, C> = HashMap::with_capacity(total);
        for level in levels.iter().rev() {
            for d in level {
                let mut c = C::zero();
                let mut any = false;
                for x in shape.minimal_outside(d) {
                    any = true;
                    c = c.checked_sum(&completions[&with(d, x)]).ok_or_else(overflow::<C>)?;
                }
                completions.insert(d.clone(), if any { c } else { C::one() });
            }
        }
        Ok(Self {
            shape,
            completions,
        })
    }

    /// Number of linear extensions of the whole poset.
    pub fn total(&self) -> &C {
        &self.completions[&self.shape.empty()]
    }

    pub fn downsets(&self) -> usize {
        self.completions.len()
    }

    /// One linear extension, each with probability `1 / total()`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let shape = &self.shape;
        let mut d = shape.empty();
        let mut out = Vec::with_capacity(shape.n);
        while out.len() < shape.n {
            let here = &self.completions[&d];
            let mut r = C::uniform_below(here, rng);
            let mut pick = None;
            for x in shape.minimal_outside(&d) {
                let c = &self.completions[&with(&d, x)];
                if r < *c {
                    pick = Some(x);
                    break;
                }
                r = r - c.clone();
            }
            let x = pick.expect("completion counts add up");
            out.push(x);
            d = with(&d, x);
        }
        out
    }
}

/// All linear extensions in lexicographic order of element indices, at most
/// `limit` of them. The flag reports whether the list was cut short.
pub fn enumerate_sequential_runs(p: &Poset, limit: usize) -> (Vec<Vec<usize>>, bool) {
    fn go(
        shape: &Shape,
        d: &mut Downset,
        prefix: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
        limit: usize,
    ) -> bool {
        if prefix.len() == shape.n {
            if out.len() == limit {
                return true;
            }
            out.push(prefix.clone());
            return false;
        }
        let candidates: Vec<usize> = shape.minimal_outside(d).collect();
        for x in candidates {
            d[x / 64] |= 1 << (x % 64);
            prefix.push(x);
            let cut = go(shape, d, prefix, out, limit);
            prefix.pop();
            d[x / 64] &= !(1 << (x % 64));
            if cut {
                return true;
            }
        }
        false
    }
    let shape = Shape::of(p);
    let mut out = Vec::new();
    let truncated = go(&shape, &mut shape.empty(), &mut Vec::new(), &mut out, limit);
    (out, truncated)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub seed: u64,
    /// Posets up to this size are sampled exactly uniformly.
    pub exact_uniform_max_elements: usize,
    pub exact_uniform_max_downsets: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            exact_uniform_max_elements: 20,
            exact_uniform_max_downsets: DEFAULT_MAX_DOWNSETS,
        }
    }
}

impl SamplerConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampledRun {
    /// Poset elements in run order.
    pub order: Vec<usize>,
    /// Set when the poset was too large for the exact table and a random
    /// minimal element was taken at each step instead.
    pub approximate: bool,
}

enum Table {
    Wide(ExtensionTable<u128>),
    Exact(ExtensionTable<BigUint>),
}

/// Draws runs of one poset; the table is built once and reused.
pub struct RunSampler {
    shape: Shape,
    table: Option<Table>,
}

impl RunSampler {
    pub fn new(p: &Poset, cfg: &SamplerConfig) -> Self {
        // 34! still fits in a u128
        let table = if p.len() > cfg.exact_uniform_max_elements {
            None
        } else if p.len() <= 34 {
            ExtensionTable::build(p, cfg.exact_uniform_max_downsets).ok().map(Table::Wide)
        } else {
            ExtensionTable::build(p, cfg.exact_uniform_max_downsets).ok().map(Table::Exact)
        };
        if table.is_none() {
            log::warn!("sampling a {}-element poset approximately", p.len());
        }
        Self {
            shape: Shape::of(p),
            table,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.table.is_some()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SampledRun {
        match &self.table {
            Some(Table::Wide(t)) => SampledRun {
                order: t.sample(rng),
                approximate: false,
            },
            Some(Table::Exact(t)) => SampledRun {
                order: t.sample(rng),
                approximate: false,
            },
            None => {
                let mut d = self.shape.empty();
                let mut order = Vec::with_capacity(self.shape.n);
                while order.len() < self.shape.n {
                    let minimal: Vec<usize> = self.shape.minimal_outside(&d).collect();
                    let x = minimal[rng.random_range(0..minimal.len())];
                    order.push(x);
                    d = with(&d, x);
                }
                SampledRun {
                    order,
                    approximate: true,
                }
            }
        }
    }
}

/// One draw; build a [`RunSampler`] instead when drawing repeatedly.
pub fn sample_sequential_run<R: Rng + ?Sized>(p: &Poset, rng: &mut R, cfg: &SamplerConfig) -> SampledRun {
    RunSampler::new(p, cfg).sample(rng)
}

/// The generator used for one case: ChaCha20 keyed by `sha256(seed || case_id)`.
pub fn case_rng(seed: u64, case_id: &str) -> ChaCha20Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(case_id.as_bytes());
    ChaCha20Rng::from_seed(h.finalize().into())
}

/// One sequential trace drawn for a case.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequentialRun {
    pub case_id: String,
    /// 1-based draw number within the case.
    pub replica: usize,
    pub event_ids: Vec<EventId>,
    pub activities: Vec<String>,
    /// Timestamps of the events in the input log, in run order.
    pub times: Vec<Timestamp>,
    pub approximate: bool,
}

impl SequentialRun {
    pub fn trace_name(&self) -> String {
        format!("{}#{}", self.case_id, self.replica)
    }

    /// Strictly increasing timestamps: each event keeps its own time unless that
    /// would not be later than its predecessor's, in which case it gets 1 ms more.
    pub fn synthetic_times(&self) -> Vec<Timestamp> {
        let mut out: Vec<Timestamp> = Vec::with_capacity(self.times.len());
        for &t in &self.times {
            let next = match out.last() {
                Some(prev) if t.millis() <= prev.millis() => Timestamp::from_millis(prev.millis() + 1),
                _ => t,
            };
            out.push(next);
        }
        out
    }
}

/// A sequential log: `k` traces per case of the source log.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimplifiedLog {
    pub k: usize,
    pub seed: u64,
    pub traces: Vec<SequentialRun>,
}

impl SimplifiedLog {
    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    pub fn event_count(&self) -> usize {
        self.traces.iter().map(|t| t.event_ids.len()).sum()
    }

    pub fn approximate_traces(&self) -> usize {
        self.traces.iter().filter(|t| t.approximate).count()
    }

    /// How often each activity sequence occurs.
    pub fn trace_variants(&self) -> BTreeMap<Vec<String>, usize> {
        let mut out = BTreeMap::new();
        for t in &self.traces {
            *out.entry(t.activities.clone()).or_insert(0) += 1;
        }
        out
    }
}

/// Draws `k` runs per case, independently and with replacement. Output depends
/// only on the log, `k` and the config, not on thread scheduling.
pub fn k_sequentialize(log: &EventLog, k: usize, cfg: &SamplerConfig) -> Result<SimplifiedLog> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    let report = check_consistency(log);
    if !report.consistent {
        return Err(Error::Inconsistent(Box::new(report)));
    }
    let per_case: Vec<Vec<SequentialRun>> = (0..log.case_count())
        .into_par_iter()
        .map(|c| {
            let cp = case_poset_by_index(log, c);
            let sampler = RunSampler::new(&cp.poset, cfg);
            let mut rng = case_rng(cfg.seed, &cp.case_id);
            (1..=k)
                .map(|replica| {
                    let run = sampler.sample(&mut rng);
                    let events: Vec<usize> = run.order.iter().map(|&p| cp.events[p]).collect();
                    SequentialRun {
                        case_id: cp.case_id.clone(),
                        replica,
                        event_ids: events.iter().map(|&g| log.event(g).id.clone()).collect(),
                        activities: events.iter().map(|&g| log.event(g).activity.clone()).collect(),
                        times: events.iter().map(|&g| log.event(g).time).collect(),
                        approximate: run.approximate,
                    }
                })
                .collect()
        })
        .collect();
    Ok(SimplifiedLog {
        k,
        seed: cfg.seed,
        traces: per_case.into_iter().flatten().collect(),
    })
}
