//! Timestamp patterns and precision detection.

use std::fmt;

use chrono::format::{Fixed, Item, Numeric, Parsed, StrftimeItems};
use chrono::{DateTime, NaiveTime, Timelike};
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use crate::time::{resolve_local, Granularity, Timestamp};

/// One way of reading a timestamp. `rfc3339` is kept apart because its offset
/// decides the instant; every other pattern is a chrono strftime string read as
/// wall-clock time in the configured zone unless it carries an offset itself.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum TimestampPattern {
    Rfc3339,
    Format(String),
}

impl From<String> for TimestampPattern {
    fn from(s: String) -> Self {
        match s.to_ascii_lowercase().as_str() {
            "rfc3339" | "iso8601" => TimestampPattern::Rfc3339,
            _ => TimestampPattern::Format(s),
        }
    }
}

impl From<&str> for TimestampPattern {
    fn from(s: &str) -> Self {
        s.to_string().into()
    }
}

impl From<TimestampPattern> for String {
    fn from(p: TimestampPattern) -> Self {
        p.to_string()
    }
}

impl fmt::Display for TimestampPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimestampPattern::Rfc3339 => f.write_str("rfc3339"),
            TimestampPattern::Format(s) => f.write_str(s),
        }
    }
}

/// `dd-MM-yyyy:HH.mm.ss`, `dd-MM-yyyy:HH.mm`, `dd-MM-yyyy`, then ISO-8601 shapes.
pub fn default_patterns() -> Vec<TimestampPattern> {
    [
        "%d-%m-%Y:%H.%M.%S",
        "%d-%m-%Y:%H.%M",
        "%d-%m-%Y",
        "rfc3339",
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d",
    ]
    .into_iter()
    .map(TimestampPattern::from)
    .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParsedTime {
    pub time: Timestamp,
    pub precision: Granularity,
    /// A time of day was written and it is exactly 00:00:00.000 local time.
    pub suspect_midnight: bool,
}

/// Tries each pattern in order; `None` if none matches.
pub fn parse_timestamp(raw: &str, patterns: &[TimestampPattern], tz: &Tz) -> Option<ParsedTime> {
    let raw = raw.trim();
    patterns.iter().find_map(|p| parse_with(raw, p, tz))
}

/// Precision implied by the first pattern that reads `raw`.
pub fn detect_precision(raw: &str, patterns: &[TimestampPattern]) -> Option<Granularity> {
    parse_timestamp(raw, patterns, &Tz::UTC).map(|p| p.precision)
}

fn parse_with(raw: &str, pattern: &TimestampPattern, tz: &Tz) -> Option<ParsedTime> {
    match pattern {
        TimestampPattern::Rfc3339 => {
            let dt = DateTime::parse_from_rfc3339(raw).ok()?;
            let fractional = raw.contains('.');
            let precision = if fractional { Granularity::Millisecond } else { Granularity::Second };
            let local = dt.naive_local().time();
            Some(ParsedTime {
                time: Timestamp::from_datetime(&dt),
                precision,
                suspect_midnight: local == NaiveTime::MIN,
            })
        }
        TimestampPattern::Format(fmt) => parse_format(raw, fmt, tz),
    }
}

struct Shape {
    precision: Granularity,
    optional_fraction: bool,
    has_offset: bool,
    epoch: bool,
}

fn shape_of(items: &[Item<'_>]) -> Shape {
    let mut precision = Granularity::Year;
    let mut optional_fraction = false;
    let mut has_offset = false;
    let mut epoch = false;
    let mut finer = |g: Granularity| {
        if g < precision {
            precision = g;
        }
    };
    for item in items {
        match item {
            Item::Numeric(n, _) => match n {
                Numeric::Year | Numeric::YearDiv100 | Numeric::YearMod100 | Numeric::IsoYear
                | Numeric::IsoYearDiv100 | Numeric::IsoYearMod100 => finer(Granularity::Year),
                Numeric::Month => finer(Granularity::Month),
                Numeric::IsoWeek | Numeric::WeekFromSun | Numeric::WeekFromMon => {
                    finer(Granularity::Week)
                }
                Numeric::Day | Numeric::Ordinal | Numeric::WeekdayFromMon
                | Numeric::NumDaysFromSun => finer(Granularity::Day),
                Numeric::Hour | Numeric::Hour12 => finer(Granularity::Hour),
                Numeric::Minute => finer(Granularity::Minute),
                Numeric::Second => finer(Granularity::Second),
                Numeric::Nanosecond => finer(Granularity::Millisecond),
                Numeric::Timestamp => {
                    epoch = true;
                    finer(Granularity::Second)
                }
                _ => {}
            },
            Item::Fixed(f) => match f {
                Fixed::ShortMonthName | Fixed::LongMonthName => finer(Granularity::Month),
                Fixed::Nanosecond => optional_fraction = true,
                Fixed::Nanosecond3 | Fixed::Nanosecond6 | Fixed::Nanosecond9 => {
                    finer(Granularity::Millisecond)
                }
                Fixed::TimezoneOffset
                | Fixed::TimezoneOffsetColon
                | Fixed::TimezoneOffsetDoubleColon
                | Fixed::TimezoneOffsetTripleColon
                | Fixed::TimezoneOffsetColonZ
                | Fixed::TimezoneOffsetZ
                | Fixed::RFC2822
                | Fixed::RFC3339 => {
                    has_offset = true;
                    finer(Granularity::Second)
                }
                _ => {}
            },
            _ => {}
        }
    }
    Shape {
        precision,
        optional_fraction,
        has_offset,
        epoch,
    }
}

fn parse_format(raw: &str, fmt: &str, tz: &Tz) -> Option<ParsedTime> {
    let items: Vec<Item<'_>> = StrftimeItems::new(fmt).collect();
    if items.iter().any(|i| matches!(i, Item::Error)) {
        return None;
    }
    let shape = shape_of(&items);
    let mut parsed = Parsed::new();
    chrono::format::parse(&mut parsed, raw, items.iter().cloned()).ok()?;

    let mut precision = shape.precision;
    if shape.optional_fraction && precision >= Granularity::Second {
        let without: Vec<Item<'_>> = items
            .iter()
            .filter(|i| !matches!(i, Item::Fixed(Fixed::Nanosecond)))
            .cloned()
            .collect();
        let mut probe = Parsed::new();
        if chrono::format::parse(&mut probe, raw, without.iter().cloned()).is_err() {
            precision = Granularity::Millisecond;
        }
    }

    if shape.has_offset || shape.epoch {
        let dt = parsed.to_datetime().ok()?;
        return Some(ParsedTime {
            time: Timestamp::from_datetime(&dt),
            precision,
            suspect_midnight: dt.naive_local().time() == NaiveTime::MIN,
        });
    }

    if parsed.month().is_none() && precision >= Granularity::Year {
        parsed.set_month(1).ok()?;
    }
    if parsed.day().is_none() && parsed.ordinal().is_none() && parsed.isoweek().is_none() {
        parsed.set_day(1).ok()?;
    }
    let date = parsed.to_naive_date().ok()?;
    let time = if precision >= Granularity::Day {
        NaiveTime::MIN
    } else {
        if parsed.minute().is_none() {
            parsed.set_minute(0).ok()?;
        }
        parsed.to_naive_time().ok()?
    };
    let dt = resolve_local(tz, date.and_time(time))?;
    let local = dt.naive_local().time();
    Some(ParsedTime {
        time: Timestamp::from_datetime(&dt),
        precision,
        suspect_midnight: precision < Granularity::Day
            && local.num_seconds_from_midnight() == 0
            && local.nanosecond() == 0,
    })
}
