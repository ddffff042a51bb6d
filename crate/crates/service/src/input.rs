//! Turning raw log bytes plus whatever settings the caller gave into an
//! [`IngestConfig`]. Anything left out is guessed: the format from the file name or
//! the first byte, the CSV columns from the header row.

use ordlog::ingest::{ColumnMap, ExplicitOrderSource, IngestConfig, LogFormat, TimestampPattern};
use ordlog::{Error, Result};
use serde::Deserialize;

/// A partial [`IngestConfig`]. Uploads send it as the `config` part; the CLI reads
/// it from `--config` and lets flags override single fields.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverlay {
    pub format: Option<LogFormat>,
    pub columns: Option<ColumnMap>,
    pub timestamp_patterns: Option<Vec<TimestampPattern>>,
    pub explicit_order: Option<ExplicitOrderSource>,
    pub timezone: Option<String>,
    pub delimiter: Option<char>,
    pub source_name: Option<String>,
}

impl ConfigOverlay {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("config: {e}")))
    }

    pub fn resolve(self, bytes: &[u8], file_name: Option<&str>) -> Result<IngestConfig> {
        let format = self.format.unwrap_or_else(|| guess_format(bytes, file_name));
        let delimiter = self.delimiter.unwrap_or(',');
        let mut cfg = match format {
            LogFormat::Xes => IngestConfig::xes(),
            LogFormat::Csv => {
                let columns = match self.columns {
                    Some(c) => c,
                    None => detect_columns(bytes, delimiter)?,
                };
                IngestConfig::csv(columns)
            }
        };
        cfg.delimiter = delimiter;
        if let Some(p) = self.timestamp_patterns {
            cfg.timestamp_patterns = p;
        }
        if let Some(o) = self.explicit_order {
            cfg.explicit_order = o;
        }
        if let Some(tz) = self.timezone {
            cfg.timezone = tz;
        }
        cfg.source_name = self.source_name.or_else(|| file_name.map(str::to_string));
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn guess_format(bytes: &[u8], file_name: Option<&str>) -> LogFormat {
    let ext = file_name
        .and_then(|n| n.rsplit_once('.'))
        .map(|(_, e)| e.to_ascii_lowercase());
    match ext.as_deref() {
        Some("xes") | Some("xml") => LogFormat::Xes,
        Some("csv") | Some("tsv") | Some("txt") => LogFormat::Csv,
        _ => match bytes.iter().find(|b| !b.is_ascii_whitespace()) {
            Some(b'<') => LogFormat::Xes,
            _ => LogFormat::Csv,
        },
    }
}

/// An empty file has no header; it gets the canonical columns so that it parses
/// to the empty log.
pub fn detect_columns(bytes: &[u8], delimiter: char) -> Result<ColumnMap> {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Ok(ColumnMap::canonical());
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter as u8)
        .from_reader(bytes);
    let header = reader.headers().map_err(|e| Error::Parse {
        location: "header".into(),
        reason: e.to_string(),
    })?;
    let names: Vec<&str> = header.iter().map(|h| h.trim_start_matches('\u{feff}')).collect();
    ColumnMap::detect(&names).ok_or_else(|| {
        Error::InvalidConfig(format!(
            "cannot tell the case, activity and timestamp columns apart in {names:?}; name them explicitly"
        ))
    })
}
