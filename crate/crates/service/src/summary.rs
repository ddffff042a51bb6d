use ordlog::ingest::ORIG_PRECISION_ATTR;
use ordlog::{ConsistencyReport, EventLog, Granularity};
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PrecisionCount {
    /// A granularity name, or `unknown` for events without a recorded precision.
    pub precision: String,
    pub events: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LogSummary {
    pub source: String,
    pub events: usize,
    pub cases: usize,
    pub activities: usize,
    pub explicit_pairs: usize,
    pub consistent: bool,
    /// Finest precision first.
    pub precision: Vec<PrecisionCount>,
}

impl LogSummary {
    pub fn new(log: &EventLog, report: &ConsistencyReport) -> Self {
        Self {
            source: log.provenance().to_string(),
            events: log.len(),
            cases: log.case_count(),
            activities: log.activities().len(),
            explicit_pairs: log.explicit_order().edges().len(),
            consistent: report.consistent,
            precision: precision_histogram(log),
        }
    }
}

pub fn precision_histogram(log: &EventLog) -> Vec<PrecisionCount> {
    let mut counts = vec![0usize; Granularity::ALL.len() + 1];
    for e in log.events() {
        let g = e
            .attrs
            .get(ORIG_PRECISION_ATTR)
            .and_then(|v| v.as_text())
            .and_then(|s| s.parse::<Granularity>().ok());
        let slot = g.map_or(Granularity::ALL.len(), |g| {
            Granularity::ALL.iter().position(|&x| x == g).unwrap()
        });
        counts[slot] += 1;
    }
    let names = Granularity::ALL.iter().map(|g| g.as_str()).chain(["unknown"]);
    names
        .zip(counts)
        .filter(|&(_, n)| n > 0)
        .map(|(name, events)| PrecisionCount {
            precision: name.to_string(),
            events,
        })
        .collect()
}
