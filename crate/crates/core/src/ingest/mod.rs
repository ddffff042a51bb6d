//! Reading event logs from CSV and XES.

mod csv;
mod timestamp;
mod xes;

pub use timestamp::{default_patterns, detect_precision, parse_timestamp, ParsedTime, TimestampPattern};

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Read};

use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AttrValue, Event, EventId, EventLog};
use crate::time::Timestamp;

/// Attribute recording the precision the raw timestamp was written in.
pub const ORIG_PRECISION_ATTR: &str = "orig_precision";
/// Attribute set to `"true"` when a written time of day is exactly midnight.
pub const SUSPECT_MIDNIGHT_ATTR: &str = "suspect_midnight";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogFormat {
    Csv,
    Xes,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    #[serde(default)]
    pub event_id: Option<String>,
    pub case: String,
    pub activity: String,
    pub timestamp: String,
}

impl ColumnMap {
    pub fn new(case: &str, activity: &str, timestamp: &str) -> Self {
        Self {
            event_id: None,
            case: case.into(),
            activity: activity.into(),
            timestamp: timestamp.into(),
        }
    }

    pub fn with_event_id(mut self, col: &str) -> Self {
        self.event_id = Some(col.into());
        self
    }

    /// The column names written by the CSV exporter.
    pub fn canonical() -> Self {
        Self::new("case_id", "activity", "timestamp").with_event_id("event_id")
    }

    /// Guesses the columns from a header row. Names are compared ignoring case,
    /// spaces, `_` and `-`; the event id column is optional.
    pub fn detect<S: AsRef<str>>(header: &[S]) -> Option<Self> {
        fn norm(s: &str) -> String {
            s.chars()
                .filter(|c| !matches!(c, ' ' | '_' | '-'))
                .flat_map(char::to_lowercase)
                .collect()
        }
        let names: Vec<String> = header.iter().map(|h| norm(h.as_ref())).collect();
        let find = |candidates: &[&str]| {
            candidates
                .iter()
                .find_map(|c| names.iter().position(|n| n == c))
                .map(|i| header[i].as_ref().to_string())
        };
        let case = find(&["caseid", "case", "case:concept:name"])?;
        let activity = find(&["activity", "concept:name", "activityname", "event"])?;
        let timestamp = find(&["timestamp", "time:timestamp", "time", "completetimestamp", "datetime"])?;
        let mut map = Self::new(&case, &activity, &timestamp);
        map.event_id = find(&["eventid", "id", "identity:id"]);
        Some(map)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplicitOrderSource {
    #[default]
    None,
    /// Consecutive rows of the same case are ordered.
    RowOrderPerCase,
    /// Consecutive rows are ordered regardless of case.
    RowOrderGlobal,
    /// Pairs of event ids, earlier first.
    EdgeList(Vec<(String, String)>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestConfig {
    pub format: LogFormat,
    #[serde(default)]
    pub columns: Option<ColumnMap>,
    #[serde(default = "default_patterns")]
    pub timestamp_patterns: Vec<TimestampPattern>,
    #[serde(default)]
    pub explicit_order: ExplicitOrderSource,
    /// IANA zone for timestamps written without an offset.
    #[serde(default = "utc_name")]
    pub timezone: String,
    #[serde(default = "comma")]
    pub delimiter: char,
    #[serde(default)]
    pub source_name: Option<String>,
}

fn utc_name() -> String {
    "UTC".into()
}

fn comma() -> char {
    ','
}

impl IngestConfig {
    pub fn csv(columns: ColumnMap) -> Self {
        Self {
            format: LogFormat::Csv,
            columns: Some(columns),
            timestamp_patterns: default_patterns(),
            explicit_order: ExplicitOrderSource::None,
            timezone: utc_name(),
            delimiter: ',',
            source_name: None,
        }
    }

    pub fn xes() -> Self {
        Self {
            format: LogFormat::Xes,
            columns: None,
            ..Self::csv(ColumnMap::canonical())
        }
    }

    pub fn with_order(mut self, source: ExplicitOrderSource) -> Self {
        self.explicit_order = source;
        self
    }

    pub fn with_timezone(mut self, tz: &str) -> Self {
        self.timezone = tz.into();
        self
    }

    pub fn with_source_name(mut self, name: &str) -> Self {
        self.source_name = Some(name.into());
        self
    }

    pub fn validate(&self) -> Result<Tz> {
        if self.timestamp_patterns.is_empty() {
            return Err(Error::InvalidConfig("no timestamp patterns".into()));
        }
        match (self.format, &self.columns) {
            (LogFormat::Csv, None) => {
                return Err(Error::InvalidConfig("CSV input needs a column map".into()))
            }
            (LogFormat::Xes, Some(_)) => {
                return Err(Error::InvalidConfig("column map only applies to CSV".into()))
            }
            _ => {}
        }
        if !self.delimiter.is_ascii() {
            return Err(Error::InvalidConfig("delimiter must be ASCII".into()));
        }
        self.timezone
            .parse::<Tz>()
            .map_err(|_| Error::InvalidConfig(format!("unknown time zone {:?}", self.timezone)))
    }

    fn provenance(&self) -> String {
        self.source_name.clone().unwrap_or_else(|| match self.format {
            LogFormat::Csv => "csv".into(),
            LogFormat::Xes => "xes".into(),
        })
    }
}

/// Parses a whole log. Rows or events become [`Event`]s in input order.
pub fn parse_log<R: Read>(source: R, cfg: &IngestConfig) -> Result<EventLog> {
    let tz = cfg.validate()?;
    let ctx = RowContext {
        patterns: &cfg.timestamp_patterns,
        tz,
    };
    let events = match cfg.format {
        LogFormat::Csv => csv::read_events(source, cfg, &ctx)?,
        LogFormat::Xes => xes::read_events(std::io::BufReader::new(source), &ctx)?,
    };
    let order = build_order(&events, &cfg.explicit_order)?;
    EventLog::new(events, order, cfg.provenance())
}

/// Lines `event_id_1,event_id_2`; blank lines and `#` comments are skipped.
pub fn parse_edge_list<R: BufRead>(reader: R) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let body = line.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let (a, b) = body.split_once(',').ok_or_else(|| Error::Parse {
            location: format!("edge list line {}", n + 1),
            reason: "expected `event_id_1,event_id_2`".into(),
        })?;
        out.push((a.trim().to_string(), b.trim().to_string()));
    }
    Ok(out)
}

fn build_order(events: &[Event], source: &ExplicitOrderSource) -> Result<Vec<(usize, usize)>> {
    Ok(match source {
        ExplicitOrderSource::None => Vec::new(),
        ExplicitOrderSource::RowOrderGlobal => (1..events.len()).map(|i| (i - 1, i)).collect(),
        ExplicitOrderSource::RowOrderPerCase => {
            let mut last: HashMap<&str, usize> = HashMap::new();
            let mut edges = Vec::new();
            for (i, e) in events.iter().enumerate() {
                if let Some(prev) = last.insert(e.case_id.as_str(), i) {
                    edges.push((prev, i));
                }
            }
            edges
        }
        ExplicitOrderSource::EdgeList(pairs) => {
            let index: HashMap<&str, usize> = events
                .iter()
                .enumerate()
                .map(|(i, e)| (e.id.as_str(), i))
                .collect();
            let lookup = |id: &str| {
                index
                    .get(id)
                    .copied()
                    .ok_or_else(|| Error::UnknownEvent(id.to_string()))
            };
            pairs
                .iter()
                .map(|(a, b)| Ok((lookup(a)?, lookup(b)?)))
                .collect::<Result<_>>()?
        }
    })
}

pub(crate) struct RowContext<'a> {
    patterns: &'a [TimestampPattern],
    tz: Tz,
}

impl RowContext<'_> {
    /// Parses the mandatory timestamp and records precision attributes unless the
    /// source already carries them.
    pub(crate) fn timestamp(
        &self,
        raw: &str,
        location: impl FnOnce() -> String,
        attrs: &mut BTreeMap<String, AttrValue>,
    ) -> Result<Timestamp> {
        let parsed = parse_timestamp(raw, self.patterns, &self.tz).ok_or_else(|| Error::Timestamp {
            location: location(),
            value: raw.to_string(),
            tried: self.patterns.iter().map(|p| p.to_string()).collect(),
        })?;
        if !attrs.contains_key(ORIG_PRECISION_ATTR) {
            attrs.insert(
                ORIG_PRECISION_ATTR.into(),
                AttrValue::Text(parsed.precision.as_str().into()),
            );
            if parsed.suspect_midnight {
                attrs.insert(SUSPECT_MIDNIGHT_ATTR.into(), AttrValue::Text("true".into()));
            }
        }
        Ok(parsed.time)
    }

    pub(crate) fn attr_timestamp(&self, raw: &str) -> Option<Timestamp> {
        Timestamp::parse_canonical(raw)
            .or_else(|| parse_timestamp(raw, self.patterns, &self.tz).map(|p| p.time))
    }
}

/// Numbers are recognised only when they print back to the same text, so export
/// followed by re-import is lossless.
pub(crate) fn infer_value(raw: &str) -> AttrValue {
    if let Ok(x) = raw.parse::<f64>() {
        if x.is_finite() && format_number(x) == raw {
            return AttrValue::Number(x);
        }
    }
    if let Some(t) = Timestamp::parse_canonical(raw) {
        return AttrValue::Time(t);
    }
    AttrValue::Text(raw.to_string())
}

pub(crate) fn format_number(x: f64) -> String {
    format!("{x}")
}

pub(crate) fn new_event(
    id: String,
    case_id: String,
    activity: String,
    time: Timestamp,
    attrs: BTreeMap<String, AttrValue>,
) -> Event {
    Event {
        id: EventId::new(id),
        case_id,
        activity,
        time,
        attrs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inference_is_exact() {
        assert_eq!(infer_value("50"), AttrValue::Number(50.0));
        assert_eq!(infer_value("2.5"), AttrValue::Number(2.5));
        assert_eq!(infer_value("50.0"), AttrValue::Text("50.0".into()));
        assert_eq!(infer_value("007"), AttrValue::Text("007".into()));
        assert_eq!(infer_value("NaN"), AttrValue::Text("NaN".into()));
        assert_eq!(infer_value("Sarah"), AttrValue::Text("Sarah".into()));
        assert!(matches!(infer_value("2021-05-19T11:02:55.000Z"), AttrValue::Time(_)));
    }

    #[test]
    fn config_validation() {
        let mut cfg = IngestConfig::csv(ColumnMap::canonical());
        assert!(cfg.validate().is_ok());
        cfg.timestamp_patterns.clear();
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        let mut cfg = IngestConfig::csv(ColumnMap::canonical());
        cfg.columns = None;
        assert!(cfg.validate().is_err());
        assert!(IngestConfig::xes().validate().is_ok());
        assert!(IngestConfig::xes().with_timezone("Mars/Olympus").validate().is_err());
    }

    #[test]
    fn config_from_json() {
        let cfg: IngestConfig = serde_json::from_str(
            r#"{"format":"csv","columns":{"case":"c","activity":"a","timestamp":"t"},
                "explicit_order":"row_order_per_case"}"#,
        )
        .unwrap();
        assert_eq!(cfg.explicit_order, ExplicitOrderSource::RowOrderPerCase);
        assert_eq!(cfg.timestamp_patterns, default_patterns());
        let cfg: IngestConfig = serde_json::from_str(
            r#"{"format":"xes","explicit_order":{"edge_list":[["a","b"]]}}"#,
        )
        .unwrap();
        assert_eq!(
            cfg.explicit_order,
            ExplicitOrderSource::EdgeList(vec![("a".into(), "b".into())])
        );
    }

    #[test]
    fn edge_list_lines() {
        let text = "# header\n1,2\n\n 2 , 3 \n";
        assert_eq!(
            parse_edge_list(text.as_bytes()).unwrap(),
            vec![("1".into(), "2".into()), ("2".into(), "3".into())]
        );
        assert!(parse_edge_list("12\n".as_bytes()).is_err());
    }

    #[test]
    fn column_detection() {
        let m = ColumnMap::detect(&["event id", "Case ID", "activity", "timestamp", "cost"]).unwrap();
        assert_eq!(m, ColumnMap::new("Case ID", "activity", "timestamp").with_event_id("event id"));
        assert_eq!(ColumnMap::detect(&["event_id", "case_id", "activity", "timestamp"]), Some(ColumnMap::canonical()));
        let xes_like = ColumnMap::detect(&["case:concept:name", "concept:name", "time:timestamp"]).unwrap();
        assert_eq!(xes_like.event_id, None);
        assert_eq!(xes_like.activity, "concept:name");
        assert!(ColumnMap::detect(&["case", "when"]).is_none());
    }
}
