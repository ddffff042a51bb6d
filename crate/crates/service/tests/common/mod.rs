#![allow(dead_code)]

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};

pub const COMPENSATION: &str = include_str!("../data/compensation.csv");

/// Three events of one patient, written in the order the nurse remembers them but
/// timestamped the other way round.
pub const NURSE: &str = "\
id,case,activity,time
e1,p,measure temperature,2021-05-19T17:55:00
e2,p,measure pulse,2021-05-19T17:15:00
e3,p,measure blood pressure,2021-05-19T17:00:00
";

/// Two events of one case, an hour apart on the same day.
pub const TWO_STEPS: &str = "\
id,case,activity,time
e1,c,a,2021-05-19T10:00:00
e2,c,b,2021-05-19T11:00:00
";

pub const SINGLE_CASE: &str = "\
case,activity,timestamp
c,a,2021-05-19T10:00:00
c,b,2021-05-19T10:00:30
c,c,2021-05-19T10:20:00
c,d,2021-05-20T09:00:00
c,e,2021-06-01T09:00:00
";

/// A purchase-to-pay shaped log: `six` cases of six events and `seven` of seven,
/// day-precision timestamps so that some events of a case share a day.
pub fn p2p_csv(six: usize, seven: usize) -> String {
    const ACTS: [&str; 7] = [
        "create requisition",
        "create order",
        "approve order",
        "receive goods",
        "receive invoice",
        "pay invoice",
        "clear invoice",
    ];
    let base = chrono::NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
    let mut out = String::from("case,activity,timestamp\n");
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2654);
    let mut next = move |m: u64| rng.random_range(0..m);
    for c in 0..six + seven {
        let len = if c < six { 6 } else { 7 };
        let mut day = base + chrono::Days::new(next(300));
        for act in ACTS.iter().take(len) {
            if next(10) < 6 {
                day = day + chrono::Days::new(1 + next(3));
            }
            writeln!(out, "po{c},{act},{}", day.format("%Y-%m-%d")).unwrap();
        }
    }
    out
}
