//! Minimal XES reader: `log`, `trace` and `event` elements with typed attributes.
//! Extension, global and classifier declarations are skipped with a warning.

use std::collections::BTreeMap;
use std::io::BufRead;

use quick_xml::events::{BytesStart, Event as XmlEvent};
use quick_xml::Reader;

use super::{new_event, RowContext};
use crate::error::{Error, Result};
use crate::model::{AttrValue, Event};

pub(crate) const CASE_KEY: &str = "concept:name";
pub(crate) const ACTIVITY_KEY: &str = "concept:name";
pub(crate) const TIME_KEY: &str = "time:timestamp";
pub(crate) const ID_KEY: &str = "identity:id";

#[derive(Default)]
struct PendingEvent {
    id: Option<String>,
    activity: Option<String>,
    raw_time: Option<String>,
    attrs: BTreeMap<String, AttrValue>,
}

struct Attr {
    kind: String,
    key: String,
    value: String,
}

fn attr_of(e: &BytesStart<'_>, location: &dyn Fn() -> String) -> Result<Option<Attr>> {
    let kind = String::from_utf8_lossy(e.local_name().as_ref()).into_owned();
    if !matches!(
        kind.as_str(),
        "string" | "date" | "int" | "float" | "boolean" | "id" | "list" | "container"
    ) {
        return Ok(None);
    }
    let mut key = None;
    let mut value = String::new();
    for a in e.attributes() {
        let a = a.map_err(|err| Error::Parse {
            location: location(),
            reason: err.to_string(),
        })?;
        let v = a
            .unescape_value()
            .map_err(|err| Error::Parse {
                location: location(),
                reason: err.to_string(),
            })?
            .into_owned();
        match a.key.as_ref() {
            b"key" => key = Some(v),
            b"value" => value = v,
            _ => {}
        }
    }
    let key = key.ok_or_else(|| Error::Parse {
        location: location(),
        reason: format!("<{kind}> without a key"),
    })?;
    Ok(Some(Attr { kind, key, value }))
}

pub(super) fn read_events<R: BufRead>(source: R, ctx: &RowContext<'_>) -> Result<Vec<Event>> {
    let mut reader = Reader::from_reader(source);
    reader.config_mut().trim_text(true);
    let mut buf = Vec::new();
    let mut skip = Vec::new();

    let mut events = Vec::new();
    let mut seen_log = false;
    let mut trace_no = 0usize;
    let mut event_no = 0usize;
    let mut case: Option<String> = None;
    let mut trace_events: Vec<PendingEvent> = Vec::new();
    let mut current: Option<PendingEvent> = None;
    let mut in_trace = false;

    loop {
        let pos = reader.buffer_position();
        let location = move || {
            if in_trace {
                format!("trace {trace_no} event {event_no}")
            } else {
                format!("byte {pos}")
            }
        };
        let ev = reader.read_event_into(&mut buf).map_err(|e| Error::Parse {
            location: location(),
            reason: e.to_string(),
        })?;
        let (start, empty) = match &ev {
            XmlEvent::Start(s) => (Some(s.clone().into_owned()), false),
            XmlEvent::Empty(s) => (Some(s.clone().into_owned()), true),
            _ => (None, false),
        };
        if let Some(s) = start {
            let name = s.local_name().as_ref().to_vec();
            match name.as_slice() {
                b"log" => seen_log = true,
                b"trace" if !in_trace => {
                    in_trace = true;
                    trace_no += 1;
                    event_no = 0;
                    case = None;
                    if empty {
                        in_trace = false;
                    }
                }
                b"event" if in_trace && current.is_none() => {
                    event_no += 1;
                    current = Some(PendingEvent::default());
                    if empty {
                        trace_events.push(current.take().unwrap());
                    }
                }
                b"extension" | b"global" | b"classifier" => {
                    log::warn!("ignoring XES <{}> declaration", String::from_utf8_lossy(&name));
                    if !empty {
                        reader
                            .read_to_end_into(s.name(), &mut skip)
                            .map_err(|e| Error::Parse {
                                location: location(),
                                reason: e.to_string(),
                            })?;
                    }
                }
                _ => {
                    if let Some(attr) = attr_of(&s, &location)? {
                        if !empty {
                            // nested values of list/container attributes are not kept
                            reader
                                .read_to_end_into(s.name(), &mut skip)
                                .map_err(|e| Error::Parse {
                                    location: location(),
                                    reason: e.to_string(),
                                })?;
                        }
                        if let Some(ev) = current.as_mut() {
                            event_attr(ev, attr, ctx, &location)?;
                        } else if in_trace && attr.key == CASE_KEY {
                            case = Some(attr.value);
                        }
                    }
                }
            }
        } else {
            match ev {
                XmlEvent::End(e) => match e.local_name().as_ref() {
                    b"event" => {
                        if let Some(ev) = current.take() {
                            trace_events.push(ev);
                        }
                    }
                    b"trace" => {
                        let case_id = case.take().ok_or_else(|| Error::Parse {
                            location: format!("trace {trace_no}"),
                            reason: format!("trace without {CASE_KEY}"),
                        })?;
                        for (pos, ev) in trace_events.drain(..).enumerate() {
                            events.push(finish(ev, &case_id, pos + 1, trace_no, ctx)?);
                        }
                        in_trace = false;
                    }
                    _ => {}
                },
                XmlEvent::Eof if in_trace => {
                    return Err(Error::Parse {
                        location: format!("trace {trace_no}"),
                        reason: "unterminated trace".into(),
                    })
                }
                XmlEvent::Eof => break,
                _ => {}
            }
        }
        buf.clear();
        skip.clear();
    }
    if !seen_log {
        return Err(Error::Parse {
            location: "document".into(),
            reason: "no <log> element".into(),
        });
    }
    Ok(events)
}

fn event_attr(
    ev: &mut PendingEvent,
    attr: Attr,
    ctx: &RowContext<'_>,
    location: &dyn Fn() -> String,
) -> Result<()> {
    match attr.key.as_str() {
        ACTIVITY_KEY => ev.activity = Some(attr.value),
        TIME_KEY => ev.raw_time = Some(attr.value),
        ID_KEY => ev.id = Some(attr.value),
        _ => {
            let value = match attr.kind.as_str() {
                "int" | "float" => {
                    let x = attr.value.trim().parse::<f64>().map_err(|_| Error::Parse {
                        location: location(),
                        reason: format!("{} is not a number: {:?}", attr.key, attr.value),
                    })?;
                    AttrValue::Number(x)
                }
                "date" => match ctx.attr_timestamp(&attr.value) {
                    Some(t) => AttrValue::Time(t),
                    None => {
                        return Err(Error::Timestamp {
                            location: location(),
                            value: attr.value,
                            tried: ctx.patterns.iter().map(|p| p.to_string()).collect(),
                        })
                    }
                },
                "list" | "container" => return Ok(()),
                _ => AttrValue::Text(attr.value),
            };
            ev.attrs.insert(attr.key, value);
        }
    }
    Ok(())
}

fn finish(
    mut ev: PendingEvent,
    case_id: &str,
    position: usize,
    trace_no: usize,
    ctx: &RowContext<'_>,
) -> Result<Event> {
    let location = || format!("trace {trace_no} event {position}");
    let activity = ev.activity.take().ok_or_else(|| Error::Parse {
        location: location(),
        reason: format!("event without {ACTIVITY_KEY}"),
    })?;
    let raw = ev.raw_time.take().ok_or_else(|| Error::Parse {
        location: location(),
        reason: format!("event without {TIME_KEY}"),
    })?;
    let time = ctx.timestamp(&raw, location, &mut ev.attrs)?;
    let id = ev.id.take().unwrap_or_else(|| format!("{case_id}/{position}"));
    Ok(new_event(id, case_id.to_string(), activity, time, ev.attrs))
}
