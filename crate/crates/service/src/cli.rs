//! `ordlog inspect | variants | sequentialize | serve`.
//!
//! Exit codes: 0 success, 1 bad input (unreadable file, parse error, bad flag),
//! 2 inconsistent log, 3 tiebreaker conflict, 4 resource limit.

use std::fs;
use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ordlog::export::{variants_json, write_sequential_csv, write_sequential_xes};
use ordlog::ingest::{parse_edge_list, parse_log, ColumnMap, ExplicitOrderSource, IngestConfig, LogFormat};
use ordlog::preprocess::{apply, ConflictSource};
use ordlog::sequentialize::k_sequentialize;
use ordlog::variants::group_variants_at;
use ordlog::{
    check_consistency_scoped, ConsistencyReport, ConsistencyScope, Error, EventLog, Granularity,
    SamplerConfig, Tiebreaker, TimeAggregator,
};

use crate::http::{self, ServiceConfig};
use crate::input::ConfigOverlay;
use crate::summary::LogSummary;

pub const EXIT_INPUT: i32 = 1;
pub const EXIT_INCONSISTENT: i32 = 2;
pub const EXIT_CONFLICT: i32 = 3;
pub const EXIT_RESOURCE: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "ordlog", version, about = "Event logs with timestamps and an explicit partial order")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Counts, consistency of the explicit order with time, timestamp precisions.
    Inspect {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_enum, default_value_t = ScopeArg::Global)]
        scope: ScopeArg,
        /// Print JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Partial-order variants at a granularity, most frequent first.
    Variants {
        #[command(flatten)]
        input: InputArgs,
        #[arg(short, long, default_value = "hour")]
        granularity: Granularity,
        /// Activity order for events sharing a bucket, one `a -> b` per line.
        #[arg(long)]
        tiebreaker: Option<PathBuf>,
        /// Also write the full variant list as JSON.
        #[arg(long, value_name = "OUT")]
        json: Option<PathBuf>,
        /// Variants to print; 0 prints all.
        #[arg(long, default_value_t = 20)]
        top: usize,
    },
    /// Draw k sequential runs per case and write a conventional log.
    Sequentialize {
        #[command(flatten)]
        input: InputArgs,
        #[arg(short)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; `.csv` writes CSV, anything else XES.
        #[arg(short, long)]
        output: PathBuf,
        /// Aggregate times before drawing; the original times otherwise.
        #[arg(short, long)]
        granularity: Option<Granularity>,
        #[arg(long)]
        tiebreaker: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        /// Cache directory; defaults to $ORDLOG_DATA_DIR, memory only if unset.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Milliseconds a request waits for a computation before answering 202.
        #[arg(long, default_value_t = 2000)]
        wait_ms: u64,
    },
}

#[derive(Args, Debug)]
pub struct InputArgs {
    /// CSV or XES file.
    pub log: PathBuf,
    /// Defaults to the file extension.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// JSON ingest settings; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub case_column: Option<String>,
    #[arg(long)]
    pub activity_column: Option<String>,
    #[arg(long)]
    pub timestamp_column: Option<String>,
    #[arg(long)]
    pub event_id_column: Option<String>,
    /// Where the explicit order comes from.
    #[arg(long, value_enum)]
    pub order: Option<OrderArg>,
    /// Explicit order as `event_id_1,event_id_2` lines; implies `--order edges`.
    #[arg(long)]
    pub edges: Option<PathBuf>,
    /// IANA zone for timestamps without an offset, also used for calendar buckets.
    #[arg(long)]
    pub timezone: Option<String>,
    #[arg(long)]
    pub delimiter: Option<char>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FormatArg {
    Csv,
    Xes,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OrderArg {
    None,
    RowPerCase,
    RowGlobal,
    Edges,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ScopeArg {
    Global,
    WithinCase,
}

impl InputArgs {
    pub fn config(&self, bytes: &[u8]) -> anyhow::Result<IngestConfig> {
        let mut overlay = match &self.config {
            Some(p) => ConfigOverlay::from_json(&read_text(p)?)?,
            None => ConfigOverlay::default(),
        };
        if let Some(f) = self.format {
            overlay.format = Some(match f {
                FormatArg::Csv => LogFormat::Csv,
                FormatArg::Xes => LogFormat::Xes,
            });
        }
        if let (Some(c), Some(a), Some(t)) = (&self.case_column, &self.activity_column, &self.timestamp_column) {
            let mut map = ColumnMap::new(c, a, t);
            map.event_id = self.event_id_column.clone();
            overlay.columns = Some(map);
        }
        overlay.timezone = self.timezone.clone().or(overlay.timezone);
        overlay.delimiter = self.delimiter.or(overlay.delimiter);
        overlay.explicit_order = match (self.order, &self.edges) {
            (Some(OrderArg::Edges) | None, Some(p)) => {
                let text = read_text(p)?;
                Some(ExplicitOrderSource::EdgeList(parse_edge_list(text.as_bytes())?))
            }
            (Some(OrderArg::Edges), None) => bail!("--order edges needs --edges <file>"),
            (Some(_), Some(_)) => bail!("--edges only goes with --order edges"),
            (Some(OrderArg::None), None) => Some(ExplicitOrderSource::None),
            (Some(OrderArg::RowPerCase), None) => Some(ExplicitOrderSource::RowOrderPerCase),
            (Some(OrderArg::RowGlobal), None) => Some(ExplicitOrderSource::RowOrderGlobal),
            (None, None) => overlay.explicit_order,
        };
        let name = self.log.file_name().map(|n| n.to_string_lossy().into_owned());
        let mut cfg = overlay.resolve(bytes, name.as_deref())?;
        // single column flags adjust whatever was detected
        if let Some(cols) = cfg.columns.as_mut() {
            if let Some(c) = &self.case_column {
                cols.case = c.clone();
            }
            if let Some(a) = &self.activity_column {
                cols.activity = a.clone();
            }
            if let Some(t) = &self.timestamp_column {
                cols.timestamp = t.clone();
            }
            if let Some(e) = &self.event_id_column {
                cols.event_id = Some(e.clone());
            }
        }
        Ok(cfg)
    }

    pub fn load(&self) -> anyhow::Result<(EventLog, IngestConfig)> {
        let bytes = fs::read(&self.log).with_context(|| format!("cannot read {}", self.log.display()))?;
        let cfg = self.config(&bytes)?;
        let log = parse_log(bytes.as_slice(), &cfg).with_context(|| format!("reading {}", self.log.display()))?;
        Ok((log, cfg))
    }
}

fn read_text(p: &Path) -> anyhow::Result<String> {
    fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))
}

fn read_tiebreaker(p: Option<&Path>) -> anyhow::Result<Tiebreaker> {
    Ok(match p {
        Some(p) => Tiebreaker::parse(&read_text(p)?).with_context(|| format!("reading {}", p.display()))?,
        None => Tiebreaker::empty(),
    })
}

fn aggregator(cfg: &IngestConfig, g: Granularity) -> anyhow::Result<TimeAggregator> {
    Ok(TimeAggregator::in_zone(g, cfg.validate()?))
}

/// Parses arguments from the environment, runs, and returns the exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let stdout = io::stdout();
    match run(cli, &mut stdout.lock()) {
        Ok(code) => code,
        Err(e) => {
            report_error(&e);
            exit_code(&e)
        }
    }
}

/// Runs one command, writing its normal output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> anyhow::Result<i32> {
    match cli.command {
        Command::Inspect { input, scope, json } => {
            let (log, _) = input.load()?;
            let scope = match scope {
                ScopeArg::Global => ConsistencyScope::Global,
                ScopeArg::WithinCase => ConsistencyScope::WithinCase,
            };
            let report = check_consistency_scoped(&log, scope);
            let summary = LogSummary::new(&log, &report);
            if json {
                let doc = serde_json::json!({
                    "schema_version": ordlog::export::SCHEMA_VERSION,
                    "summary": summary,
                    "consistency": report,
                });
                writeln!(out, "{}", serde_json::to_string_pretty(&doc)?)?;
            } else {
                print_summary(out, &summary, &report)?;
            }
            Ok(if report.consistent { 0 } else { EXIT_INCONSISTENT })
        }
        Command::Variants {
            input,
            granularity,
            tiebreaker,
            json,
            top,
        } => {
            let (log, cfg) = input.load()?;
            let tb = read_tiebreaker(tiebreaker.as_deref())?;
            let vs = group_variants_at(&log, &aggregator(&cfg, granularity)?, &tb)?;
            if let Some(path) = json {
                let doc = variants_json(&vs);
                fs::write(&path, serde_json::to_vec_pretty(&doc)?)
                    .with_context(|| format!("cannot write {}", path.display()))?;
            }
            writeln!(
                out,
                "{} variant(s) over {} case(s) at {granularity} granularity",
                vs.len(),
                log.case_count()
            )?;
            let shown = if top == 0 { vs.len() } else { top.min(vs.len()) };
            for (rank, v) in vs.iter().take(shown).enumerate() {
                let acts: Vec<&str> = v.nodes.iter().map(|n| n.activity.as_str()).collect();
                writeln!(
                    out,
                    "{:>5}  {:>7}  {}  {} event(s), {} covering pair(s): {}",
                    rank + 1,
                    v.frequency,
                    &v.canonical_key[..12],
                    v.nodes.len(),
                    v.hasse_edges.len(),
                    acts.join(", ")
                )?;
            }
            if shown < vs.len() {
                writeln!(out, "  ... {} more", vs.len() - shown)?;
            }
            Ok(0)
        }
        Command::Sequentialize {
            input,
            k,
            seed,
            output,
            granularity,
            tiebreaker,
        } => {
            let (log, cfg) = input.load()?;
            let tb = read_tiebreaker(tiebreaker.as_deref())?;
            let sampler = SamplerConfig::with_seed(seed);
            let slog = if granularity.is_none() && tb.is_empty() {
                k_sequentialize(&log, k, &sampler)?
            } else {
                let g = granularity.unwrap_or(Granularity::Millisecond);
                k_sequentialize(&apply(&log, &aggregator(&cfg, g)?, &tb)?, k, &sampler)?
            };
            let file = fs::File::create(&output).with_context(|| format!("cannot create {}", output.display()))?;
            let mut w = io::BufWriter::new(file);
            let is_csv = output
                .extension()
                .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
            if is_csv {
                write_sequential_csv(&slog, &mut w)?;
            } else {
                write_sequential_xes(&slog, &mut w)?;
            }
            w.flush()?;
            writeln!(
                out,
                "wrote {} trace(s), {} event(s) to {}",
                slog.len(),
                slog.event_count(),
                output.display()
            )?;
            if slog.approximate_traces() > 0 {
                writeln!(out, "{} trace(s) drawn with the approximate sampler", slog.approximate_traces())?;
            }
            Ok(0)
        }
        Command::Serve {
            port,
            host,
            data_dir,
            wait_ms,
        } => {
            let mut cfg = ServiceConfig::from_env();
            cfg.data_dir = data_dir.or(cfg.data_dir);
            cfg.sync_wait = Duration::from_millis(wait_ms);
            let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            rt.block_on(http::serve(SocketAddr::new(host, port), cfg))?;
            Ok(0)
        }
    }
}

fn print_summary(out: &mut dyn Write, s: &LogSummary, r: &ConsistencyReport) -> io::Result<()> {
    let yes = |b: bool| if b { "yes" } else { "no" };
    writeln!(out, "source:          {}", s.source)?;
    writeln!(out, "events:          {}", s.events)?;
    writeln!(out, "cases:           {}", s.cases)?;
    writeln!(out, "activities:      {}", s.activities)?;
    writeln!(out, "explicit pairs:  {}", s.explicit_pairs)?;
    let scope = match r.scope {
        ConsistencyScope::Global => "global",
        ConsistencyScope::WithinCase => "within case",
    };
    writeln!(out, "consistent:      {} ({scope})", yes(r.consistent))?;
    writeln!(out, "time-constrained:  {}", yes(r.time_constrained))?;
    writeln!(out, "order-constrained: {}", yes(r.order_constrained))?;
    if !s.precision.is_empty() {
        writeln!(out, "timestamp precision:")?;
        for p in &s.precision {
            writeln!(out, "  {:<12} {}", p.precision, p.events)?;
        }
    }
    print_violations(out, r)
}

const SHOWN_VIOLATIONS: usize = 50;

fn print_violations(out: &mut dyn Write, r: &ConsistencyReport) -> io::Result<()> {
    if r.violations.is_empty() {
        return Ok(());
    }
    writeln!(out, "violations ({}):", r.violations.len())?;
    for v in r.violations.iter().take(SHOWN_VIOLATIONS) {
        writeln!(
            out,
            "  {} ({}) is ordered before {} ({})",
            v.before,
            v.before_time.to_canonical(),
            v.after,
            v.after_time.to_canonical()
        )?;
    }
    if r.violations.len() > SHOWN_VIOLATIONS {
        writeln!(out, "  ... {} more", r.violations.len() - SHOWN_VIOLATIONS)?;
    }
    Ok(())
}

fn engine_error(e: &anyhow::Error) -> Option<&Error> {
    e.chain().find_map(|c| c.downcast_ref::<Error>())
}

pub fn exit_code(e: &anyhow::Error) -> i32 {
    match engine_error(e) {
        Some(Error::Inconsistent(_)) => EXIT_INCONSISTENT,
        Some(Error::TiebreakerConflict(_)) => EXIT_CONFLICT,
        Some(Error::ResourceLimit { .. }) => EXIT_RESOURCE,
        _ => EXIT_INPUT,
    }
}

fn report_error(e: &anyhow::Error) {
    let mut err = io::stderr().lock();
    let _ = writeln!(err, "error: {e:#}");
    match engine_error(e) {
        Some(Error::Inconsistent(r)) => {
            let _ = print_violations(&mut err, r);
        }
        Some(Error::TiebreakerConflict(cs)) => {
            for c in cs.iter().take(SHOWN_VIOLATIONS) {
                let why = match c.source {
                    ConflictSource::ExplicitOrder => "contradicts the explicit order",
                    ConflictSource::TiebreakerCycle => "closes a cycle",
                };
                let _ = writeln!(
                    err,
                    "  case {}: {} ({}) before {} ({}) {why}",
                    c.case_id, c.earlier, c.earlier_activity, c.later, c.later_activity
                );
            }
        }
        _ => {}
    }
}
