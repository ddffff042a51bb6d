//! Uploaded logs and everything computed from them.
//!
//! A session's log never changes after upload. Derived results live in insert-only
//! maps: the first value published for a key wins, so concurrent requests for the
//! same key can race to compute it and still observe one answer. With a data
//! directory, logs, tiebreakers and variant lists are also written to disk and
//! picked up again after a restart.
//!
//! ```text
//! <data dir>/logs/<log id>/source          uploaded bytes
//!                         /config.json     resolved ingest config
//!                         /tiebreakers/<id>.txt
//!                         /variants/<granularity>-<tiebreaker id>.json
//! ```

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use ordlog::ingest::{parse_log, IngestConfig};
use ordlog::preprocess::{validate_tiebreaker_at, TiebreakerConflict};
use ordlog::variants::group_variants_at;
use ordlog::{
    check_consistency, ConsistencyReport, Error, EventLog, Granularity, PartialOrderVariant,
    Result, Tiebreaker, TimeAggregator,
};
use sha2::{Digest, Sha256};

/// Tiebreaker id meaning "no tiebreaker".
pub const NO_TIEBREAKER: &str = "none";

pub type Variants = Arc<Vec<PartialOrderVariant>>;
pub type VariantsOutcome = std::result::Result<Variants, Arc<Error>>;

pub(crate) fn hex_digest(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub struct Session {
    pub id: String,
    pub log: EventLog,
    pub config: IngestConfig,
    pub consistency: ConsistencyReport,
    dir: Option<PathBuf>,
    tiebreakers: RwLock<HashMap<String, Arc<Tiebreaker>>>,
    variants: Mutex<HashMap<(Granularity, String), VariantsOutcome>>,
}

impl Session {
    fn new(id: String, log: EventLog, config: IngestConfig, dir: Option<PathBuf>) -> Self {
        let consistency = check_consistency(&log);
        Self {
            id,
            log,
            config,
            consistency,
            dir,
            tiebreakers: RwLock::default(),
            variants: Mutex::default(),
        }
    }

    pub fn aggregator(&self, g: Granularity) -> TimeAggregator {
        // validated on ingest
        let tz = self.config.validate().expect("stored config is valid");
        TimeAggregator::in_zone(g, tz)
    }

    pub fn tiebreaker_id(tb: &Tiebreaker) -> String {
        if tb.is_empty() {
            NO_TIEBREAKER.to_string()
        } else {
            hex_digest(&[tb.to_text().as_bytes()])[..16].to_string()
        }
    }

    /// `None` for an id that was never registered.
    pub fn tiebreaker(&self, id: &str) -> Option<Arc<Tiebreaker>> {
        if id == NO_TIEBREAKER {
            return Some(Arc::new(Tiebreaker::empty()));
        }
        if let Some(tb) = self.tiebreakers.read().unwrap().get(id) {
            return Some(tb.clone());
        }
        if !id.bytes().all(|b| b.is_ascii_hexdigit()) {
            return None;
        }
        let text = fs::read_to_string(self.dir.as_ref()?.join("tiebreakers").join(format!("{id}.txt"))).ok()?;
        let tb = Arc::new(Tiebreaker::parse(&text).ok()?);
        (Self::tiebreaker_id(&tb) == id).then(|| self.publish_tiebreaker(id, tb))
    }

    fn publish_tiebreaker(&self, id: &str, tb: Arc<Tiebreaker>) -> Arc<Tiebreaker> {
        self.tiebreakers
            .write()
            .unwrap()
            .entry(id.to_string())
            .or_insert(tb)
            .clone()
    }

    /// Checks `tb` against the log at granularity `g` and keeps it if it applies
    /// cleanly. Returns the id either way.
    pub fn register_tiebreaker(
        &self,
        tb: Tiebreaker,
        g: Granularity,
    ) -> io::Result<(String, Vec<TiebreakerConflict>)> {
        let id = Self::tiebreaker_id(&tb);
        let conflicts = validate_tiebreaker_at(&tb, &self.log, &self.aggregator(g));
        if conflicts.is_empty() && id != NO_TIEBREAKER {
            if let Some(dir) = &self.dir {
                write_atomic(&dir.join("tiebreakers").join(format!("{id}.txt")), tb.to_text().as_bytes())?;
            }
            self.publish_tiebreaker(&id, Arc::new(tb));
        }
        Ok((id, conflicts))
    }

    pub fn cached_variants(&self, g: Granularity, tb_id: &str) -> Option<VariantsOutcome> {
        self.variants
            .lock()
            .unwrap()
            .get(&(g, tb_id.to_string()))
            .cloned()
    }

    /// Looks in memory, then on disk, then computes. Blocks for as long as the
    /// computation takes.
    pub fn variants_blocking(&self, g: Granularity, tb_id: &str, tb: &Tiebreaker) -> VariantsOutcome {
        if let Some(v) = self.cached_variants(g, tb_id) {
            return v;
        }
        let path = self
            .dir
            .as_ref()
            .map(|d| d.join("variants").join(format!("{}-{tb_id}.json", g.as_str())));
        let from_disk = path
            .as_ref()
            .and_then(|p| fs::read(p).ok())
            .and_then(|b| serde_json::from_slice::<Vec<PartialOrderVariant>>(&b).ok());
        let outcome = match from_disk {
            Some(v) => Ok(Arc::new(v)),
            None => {
                let computed = group_variants_at(&self.log, &self.aggregator(g), tb);
                if let (Ok(v), Some(p)) = (&computed, &path) {
                    let bytes = serde_json::to_vec(v).expect("variants serialize");
                    if let Err(e) = write_atomic(p, &bytes) {
                        eprintln!("warning: cannot cache variants at {}: {e}", p.display());
                    }
                }
                computed.map(Arc::new).map_err(Arc::new)
            }
        };
        self.variants
            .lock()
            .unwrap()
            .entry((g, tb_id.to_string()))
            .or_insert(outcome)
            .clone()
    }
}

pub struct Store {
    data_dir: Option<PathBuf>,
    sessions: RwLock<HashMap<String, Arc<Session>>>,
}

impl Store {
    pub fn new(data_dir: Option<PathBuf>) -> Self {
        Self {
            data_dir,
            sessions: RwLock::default(),
        }
    }

    pub fn data_dir(&self) -> Option<&Path> {
        self.data_dir.as_deref()
    }

    fn session_dir(&self, id: &str) -> Option<PathBuf> {
        self.data_dir.as_ref().map(|d| d.join("logs").join(id))
    }

    pub fn log_id(bytes: &[u8], cfg: &IngestConfig) -> String {
        let cfg_json = serde_json::to_vec(cfg).expect("config serializes");
        hex_digest(&[bytes, &cfg_json])[..32].to_string()
    }

    /// Parses and keeps a log. Uploading the same bytes with the same config again
    /// returns the existing session.
    pub fn insert(&self, bytes: &[u8], cfg: IngestConfig) -> Result<Arc<Session>> {
        let id = Self::log_id(bytes, &cfg);
        if let Some(s) = self.get(&id) {
            return Ok(s);
        }
        let log = parse_log(bytes, &cfg)?;
        let dir = self.session_dir(&id);
        if let Some(dir) = &dir {
            write_atomic(&dir.join("source"), bytes)?;
            let cfg_json = serde_json::to_vec_pretty(&cfg).expect("config serializes");
            write_atomic(&dir.join("config.json"), &cfg_json)?;
        }
        Ok(self.publish(Session::new(id, log, cfg, dir)))
    }

    fn publish(&self, s: Session) -> Arc<Session> {
        self.sessions
            .write()
            .unwrap()
            .entry(s.id.clone())
            .or_insert_with(|| Arc::new(s))
            .clone()
    }

    /// From memory, or reloaded from the data directory.
    pub fn get(&self, id: &str) -> Option<Arc<Session>> {
        if let Some(s) = self.sessions.read().unwrap().get(id) {
            return Some(s.clone());
        }
        if !id.bytes().all(|b| b.is_ascii_hexdigit()) {
            return None;
        }
        let dir = self.session_dir(id)?;
        let bytes = fs::read(dir.join("source")).ok()?;
        let cfg: IngestConfig = serde_json::from_slice(&fs::read(dir.join("config.json")).ok()?).ok()?;
        if Self::log_id(&bytes, &cfg) != id {
            return None;
        }
        let log = parse_log(bytes.as_slice(), &cfg).ok()?;
        Some(self.publish(Session::new(id.to_string(), log, cfg, Some(dir))))
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let parent = path.parent().expect("cache paths have a parent");
    fs::create_dir_all(parent)?;
    static NEXT: AtomicU64 = AtomicU64::new(0);
    let tmp = parent.join(format!(
        ".{}.{}-{}.tmp",
        path.file_name().unwrap().to_string_lossy(),
        std::process::id(),
        NEXT.fetch_add(1, Ordering::Relaxed)
    ));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}
