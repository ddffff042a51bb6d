#![allow(dead_code)]

use std::fmt::Write as _;

use ordlog::ingest::{parse_log, ColumnMap, IngestConfig};
use ordlog::order::{transitive_closure, Poset};
use ordlog::{Event, EventLog, Timestamp};
use rand::seq::SliceRandom;
use rand::Rng;

pub const COMPENSATION: &str = include_str!("../data/compensation.csv");

pub const DAY_MS: i64 = 86_400_000;
/// 2021-01-01T00:00:00Z
pub const YEAR_2021: i64 = 1_609_459_200_000;

pub fn compensation_config() -> IngestConfig {
    IngestConfig::csv(ColumnMap::new("case id", "activity", "timestamp").with_event_id("event id"))
}

pub fn compensation() -> EventLog {
    parse_log(COMPENSATION.as_bytes(), &compensation_config()).unwrap()
}

pub fn poset(n: usize, pairs: &[(usize, usize)]) -> Poset {
    transitive_closure(pairs.iter().copied(), n).unwrap()
}

/// `reg < {ct, ch, x} < dec < y` for the four choices of `x` and `y`.
pub fn four_runs() -> Vec<Poset> {
    let mut out = Vec::new();
    for x in ["examine casually", "examine thoroughly"] {
        for y in ["pay compensation", "reject request"] {
            let labels = ["register request", "check ticket", "check history", x, "decide", y]
                .map(String::from)
                .to_vec();
            let p = poset(6, &[(0, 1), (0, 2), (0, 3), (1, 4), (2, 4), (3, 4), (4, 5)]);
            out.push(p.with_labels(labels));
        }
    }
    out
}

/// A random DAG on `n` elements, closed.
pub fn random_poset<R: Rng>(rng: &mut R, n: usize, density: f64) -> Poset {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut pairs = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(density) {
                pairs.push((perm[a], perm[b]));
            }
        }
    }
    poset(n, &pairs)
}

/// A consistent log: timestamps drawn from a few values so ties are common, and
/// explicit pairs taken from a random linear order compatible with time.
pub fn random_consistent_log<R: Rng>(rng: &mut R, max_events: usize, max_cases: usize) -> EventLog {
    let n = rng.random_range(0..=max_events);
    let cases = rng.random_range(1..=max_cases);
    let distinct_times = rng.random_range(1..=n.max(1));
    let events: Vec<Event> = (0..n)
        .map(|i| {
            let t = YEAR_2021 + rng.random_range(0..distinct_times as i64) * DAY_MS;
            Event::new(
                format!("e{i}"),
                format!("c{}", rng.random_range(0..cases)),
                format!("a{}", rng.random_range(0..4)),
                Timestamp::from_millis(t),
            )
        })
        .collect();
    let mut linear: Vec<usize> = (0..n).collect();
    linear.shuffle(rng);
    linear.sort_by_key(|&i| events[i].time);
    let density = rng.random_range(0.0..0.6);
    let mut pairs = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(density) {
                pairs.push((linear[a], linear[b]));
            }
        }
    }
    EventLog::new(events, pairs, "random").unwrap()
}

/// A purchase-to-pay style log: `six` cases with six events and `seven` with seven,
/// day-precision timestamps so some events of a case share a day.
pub fn p2p_log<R: Rng>(rng: &mut R, six: usize, seven: usize) -> EventLog {
    const ACTS: [&str; 7] = [
        "create requisition",
        "create order",
        "approve order",
        "receive goods",
        "receive invoice",
        "pay invoice",
        "clear invoice",
    ];
    let mut events = Vec::new();
    for c in 0..six + seven {
        let len = if c < six { 6 } else { 7 };
        let mut day = YEAR_2021 + rng.random_range(0..300) * DAY_MS;
        for (j, act) in ACTS.iter().take(len).enumerate() {
            if rng.random_bool(0.6) {
                day += DAY_MS * rng.random_range(1..4);
            }
            events.push(Event::new(
                format!("{c}-{j}"),
                format!("case{c}"),
                *act,
                Timestamp::from_millis(day),
            ));
        }
    }
    EventLog::unordered(events, "p2p").unwrap()
}

/// A road-fines sized CSV with second-precision timestamps.
pub fn road_fines_csv(cases: usize, events: usize, seed: u64) -> String {
    use rand::SeedableRng;
    const ACTS: [&str; 11] = [
        "Create Fine",
        "Send Fine",
        "Insert Fine Notification",
        "Add penalty",
        "Payment",
        "Send for Credit Collection",
        "Insert Date Appeal to Prefecture",
        "Send Appeal to Prefecture",
        "Receive Result Appeal from Prefecture",
        "Notify Result Appeal to Offender",
        "Appeal to Judge",
    ];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::with_capacity(events * 64);
    out.push_str("case,activity,timestamp\n");
    let mut remaining = events;
    for c in 0..cases {
        let left = cases - c;
        // spread the remaining events evenly, with some variation
        let base = remaining / left;
        let len = if left == 1 {
            remaining
        } else {
            (base + rng.random_range(0..3)).saturating_sub(1).clamp(1, remaining - (left - 1))
        };
        remaining -= len;
        let mut t = YEAR_2021 / 1000 + rng.random_range(0..3 * 365 * 86_400);
        for j in 0..len {
            let act = if j == 0 { ACTS[0] } else { ACTS[rng.random_range(1..ACTS.len())] };
            match rng.random_range(0..10) {
                0 => {}
                1..=3 => t += rng.random_range(1..120),
                4..=6 => t += rng.random_range(3_600..86_400),
                _ => t += rng.random_range(86_400..60 * 86_400),
            }
            let dt = chrono::DateTime::from_timestamp(t, 0).unwrap();
            writeln!(out, "F{c},{act},{}", dt.format("%Y-%m-%dT%H:%M:%S")).unwrap();
        }
    }
    out
}

/// Permutations of `0..n` that respect `p`, by filtering all `n!` orders.
pub fn brute_force_extensions(p: &Poset) -> Vec<Vec<usize>> {
    fn go(p: &Poset, used: &mut Vec<bool>, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let n = p.len();
        if prefix.len() == n {
            let ok = (0..n).all(|a| (a + 1..n).all(|b| !p.precedes(prefix[b], prefix[a])));
            if ok {
                out.push(prefix.clone());
            }
            return;
        }
        for x in 0..n {
            if !used[x] {
                used[x] = true;
                prefix.push(x);
                go(p, used, prefix, out);
                prefix.pop();
                used[x] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(p, &mut vec![false; p.len()], &mut Vec::new(), &mut out);
    out
}
