//! Writing logs, sequentializations and variants back out.

use std::collections::BTreeSet;
use std::io::Write;

use quick_xml::escape::escape;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::format_number;
use crate::model::{AttrValue, EventLog};
use crate::sequentialize::SimplifiedLog;
use crate::variants::PartialOrderVariant;

pub const SCHEMA_VERSION: u32 = 1;

fn csv_error(e: ::csv::Error) -> Error {
    match e.into_kind() {
        ::csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidConfig(format!("{other:?}")),
    }
}

fn attr_text(v: &AttrValue) -> String {
    match v {
        AttrValue::Number(x) => format_number(*x),
        AttrValue::Time(t) => t.to_canonical(),
        AttrValue::Text(s) => s.clone(),
    }
}

/// Columns `event_id,case_id,activity,timestamp` and then every attribute name in
/// sorted order. Reading the output with the canonical column map gives the same log
/// back, up to the explicit order, which [`write_edge_list`] writes separately.
pub fn write_csv<W: Write>(log: &EventLog, out: W) -> Result<()> {
    let names: BTreeSet<&str> = log
        .events()
        .iter()
        .flat_map(|e| e.attrs.keys().map(String::as_str))
        .collect();
    let mut w = ::csv::Writer::from_writer(out);
    let mut header = vec!["event_id", "case_id", "activity", "timestamp"];
    header.extend(names.iter().copied());
    w.write_record(&header).map_err(csv_error)?;
    for e in log.events() {
        let mut row = vec![
            e.id.as_str().to_string(),
            e.case_id.clone(),
            e.activity.clone(),
            e.time.to_canonical(),
        ];
        row.extend(names.iter().map(|n| e.attrs.get(*n).map(attr_text).unwrap_or_default()));
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// One `earlier,later` pair of event ids per line.
pub fn write_edge_list<W: Write>(log: &EventLog, mut out: W) -> Result<()> {
    for &(a, b) in log.explicit_order().edges() {
        writeln!(out, "{},{}", log.event(a).id, log.event(b).id)?;
    }
    Ok(())
}

fn xes_attr<W: Write>(out: &mut W, indent: &str, key: &str, v: &AttrValue) -> Result<()> {
    let key = escape(key);
    match v {
        AttrValue::Number(x) if x.fract() == 0.0 && x.abs() < 9.0e15 => {
            writeln!(out, r#"{indent}<int key="{key}" value="{}"/>"#, *x as i64)?
        }
        AttrValue::Number(x) => writeln!(out, r#"{indent}<float key="{key}" value="{x}"/>"#)?,
        AttrValue::Time(t) => {
            writeln!(out, r#"{indent}<date key="{key}" value="{}"/>"#, t.to_canonical())?
        }
        AttrValue::Text(s) => {
            writeln!(out, r#"{indent}<string key="{key}" value="{}"/>"#, escape(s.as_str()))?
        }
    }
    Ok(())
}

fn xes_string<W: Write>(out: &mut W, indent: &str, key: &str, v: &str) -> Result<()> {
    xes_attr(out, indent, key, &AttrValue::Text(v.to_string()))
}

const XES_HEAD: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<log xes.version="1.0" xes.features="nested-attributes">
  <extension name="Concept" prefix="concept" uri="http://www.xes-standard.org/concept.xesext"/>
  <extension name="Time" prefix="time" uri="http://www.xes-standard.org/time.xesext"/>
  <extension name="Identity" prefix="identity" uri="http://www.xes-standard.org/identity.xesext"/>
"#;

/// One trace per case (cases in order of first appearance, events in log order).
/// Event ids go to `identity:id`. The explicit order is not representable in XES.
pub fn write_xes<W: Write>(log: &EventLog, mut out: W) -> Result<()> {
    out.write_all(XES_HEAD.as_bytes())?;
    for case in log.cases() {
        writeln!(out, "  <trace>")?;
        xes_string(&mut out, "    ", "concept:name", case)?;
        for &i in log.events_of_case(case) {
            let e = log.event(i);
            writeln!(out, "    <event>")?;
            xes_string(&mut out, "      ", "concept:name", &e.activity)?;
            xes_string(&mut out, "      ", "identity:id", e.id.as_str())?;
            xes_attr(&mut out, "      ", "time:timestamp", &AttrValue::Time(e.time))?;
            for (k, v) in &e.attrs {
                xes_attr(&mut out, "      ", k, v)?;
            }
            writeln!(out, "    </event>")?;
        }
        writeln!(out, "  </trace>")?;
    }
    writeln!(out, "</log>")?;
    Ok(())
}

/// Traces named `case#replica`. Timestamps are made strictly increasing within a
/// trace (1 ms steps where events share a time, recorded as `ordlog:tie_offset_ms`)
/// so that tools sorting by time keep the drawn order. Trace attributes record the
/// source case and the draw.
pub fn write_sequential_xes<W: Write>(slog: &SimplifiedLog, mut out: W) -> Result<()> {
    out.write_all(XES_HEAD.as_bytes())?;
    xes_attr(&mut out, "  ", "ordlog:k", &AttrValue::Number(slog.k as f64))?;
    xes_attr(&mut out, "  ", "ordlog:seed", &AttrValue::Text(slog.seed.to_string()))?;
    xes_attr(&mut out, "  ", "ordlog:tie_offset_ms", &AttrValue::Number(1.0))?;
    for t in &slog.traces {
        writeln!(out, "  <trace>")?;
        xes_string(&mut out, "    ", "concept:name", &t.trace_name())?;
        xes_string(&mut out, "    ", "ordlog:case", &t.case_id)?;
        xes_attr(&mut out, "    ", "ordlog:replica", &AttrValue::Number(t.replica as f64))?;
        writeln!(
            out,
            r#"    <boolean key="ordlog:approximate" value="{}"/>"#,
            t.approximate
        )?;
        let times = t.synthetic_times();
        for ((id, act), time) in t.event_ids.iter().zip(&t.activities).zip(times) {
            writeln!(out, "    <event>")?;
            xes_string(&mut out, "      ", "concept:name", act)?;
            xes_string(&mut out, "      ", "ordlog:event", id.as_str())?;
            xes_attr(&mut out, "      ", "time:timestamp", &AttrValue::Time(time))?;
            writeln!(out, "    </event>")?;
        }
        writeln!(out, "  </trace>")?;
    }
    writeln!(out, "</log>")?;
    Ok(())
}

/// Columns `case,activity,position,timestamp`; `position` counts from 1.
pub fn write_sequential_csv<W: Write>(slog: &SimplifiedLog, out: W) -> Result<()> {
    let mut w = ::csv::Writer::from_writer(out);
    w.write_record(["case", "activity", "position", "timestamp"])
        .map_err(csv_error)?;
    for t in &slog.traces {
        let name = t.trace_name();
        for (pos, (act, time)) in t.activities.iter().zip(t.synthetic_times()).enumerate() {
            w.write_record([
                name.as_str(),
                act.as_str(),
                &(pos + 1).to_string(),
                &time.to_canonical(),
            ])
            .map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct VariantsDocument<'a> {
    schema_version: u32,
    variant_count: usize,
    variants: &'a [PartialOrderVariant],
}

/// `{"schema_version":1,"variant_count":..,"variants":[..]}`
pub fn variants_json(variants: &[PartialOrderVariant]) -> serde_json::Value {
    serde_json::to_value(VariantsDocument {
        schema_version: SCHEMA_VERSION,
        variant_count: variants.len(),
        variants,
    })
    .expect("variants serialize")
}
