use std::collections::BTreeMap;
use std::io::Read;

use super::{infer_value, new_event, IngestConfig, RowContext};
use crate::error::{Error, Result};
use crate::model::Event;

pub(super) fn read_events<R: Read>(
    source: R,
    cfg: &IngestConfig,
    ctx: &RowContext<'_>,
) -> Result<Vec<Event>> {
    let columns = cfg.columns.as_ref().expect("validated");
    let mut reader = ::csv::ReaderBuilder::new()
        .delimiter(cfg.delimiter as u8)
        .has_headers(true)
        .from_reader(source);

    let headers = reader.headers().map_err(csv_error)?.clone();
    // no header row means no rows at all
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            location: "line 1".into(),
            reason: format!("no column named {name:?}"),
        })
    };
    let case_col = find(&columns.case)?;
    let act_col = find(&columns.activity)?;
    let time_col = find(&columns.timestamp)?;
    let id_col = columns.event_id.as_deref().map(find).transpose()?;
    let attr_cols: Vec<(usize, &str)> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| ![Some(case_col), Some(act_col), Some(time_col), id_col].contains(&Some(*i)))
        .collect();

    let mut events = Vec::new();
    let mut record = ::csv::StringRecord::new();
    let mut row = 0usize;
    while reader.read_record(&mut record).map_err(csv_error)? {
        row += 1;
        let line = record.position().map(|p| p.line()).unwrap_or(row as u64 + 1);
        let location = || format!("line {line}");
        let field = |i: usize, what: &str| -> Result<&str> {
            match record.get(i) {
                Some(v) if !v.is_empty() => Ok(v),
                _ => Err(Error::Parse {
                    location: location(),
                    reason: format!("missing {what}"),
                }),
            }
        };
        let case_id = field(case_col, "case id")?.to_string();
        let activity = field(act_col, "activity")?.to_string();
        let raw_time = field(time_col, "timestamp")?;
        let id = match id_col {
            Some(c) => field(c, "event id")?.to_string(),
            None => row.to_string(),
        };

        let mut attrs = BTreeMap::new();
        for &(i, name) in &attr_cols {
            match record.get(i) {
                Some(v) if !v.is_empty() => {
                    attrs.insert(name.to_string(), infer_value(v));
                }
                _ => {}
            }
        }
        let time = ctx.timestamp(raw_time, location, &mut attrs)?;
        events.push(new_event(id, case_id, activity, time, attrs));
    }
    Ok(events)
}

fn csv_error(e: ::csv::Error) -> Error {
    let location = e
        .position()
        .map(|p| format!("line {}", p.line()))
        .unwrap_or_else(|| "input".into());
    Error::Parse {
        location,
        reason: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use crate::ingest::{parse_log, ColumnMap, ExplicitOrderSource, IngestConfig};
    use crate::model::AttrValue;
    use crate::time::Granularity;
    use crate::Error;

    pub(crate) const TABLE: &str = "\
event id,case id,activity,timestamp,resource,cost
36533,9901,register request,19-05-2021:11.02.55,Sarah,50
36534,9901,check ticket,19-05-2021:13.02,John,25
36535,9902,register request,19-05-2021:13.02,Sarah,50
36536,9902,check history,20-05-2021:00.00.00,Pete,45
36537,9901,check history,20-05-2021:00.00.00,Pete,45
36538,9901,examine casually,20-05-2021:08.55.34,Mary,55
36539,9902,check ticket,20-05-2021:09.11.21,John,25
36540,9902,examine thoroughly,20-05-2021:10.55,Harry,55
36541,9901,decide,21-05-2021,Angela,55
36542,9902,decide,21-05-2021,Angela,75
36543,9902,reject request,22-05-2021:14.12.45,Sarah,20
36544,9901,pay compensation,22-05-2021:16.52.37,Sarah,150
";

    fn cfg() -> IngestConfig {
        IngestConfig::csv(ColumnMap::new("case id", "activity", "timestamp").with_event_id("event id"))
    }

    #[test]
    fn table_fragment() {
        let log = parse_log(TABLE.as_bytes(), &cfg()).unwrap();
        assert_eq!(log.len(), 12);
        assert_eq!(log.case_count(), 2);
        let e = log.event(0);
        assert_eq!(e.id.as_str(), "36533");
        assert_eq!(e.attrs["resource"], AttrValue::Text("Sarah".into()));
        assert_eq!(e.attrs["cost"], AttrValue::Number(50.0));
        let prec: Vec<&str> = log
            .events()
            .iter()
            .map(|e| e.attrs["orig_precision"].as_text().unwrap())
            .collect();
        assert_eq!(
            prec,
            [
                "second", "minute", "minute", "second", "second", "second", "second", "minute",
                "day", "day", "second", "second"
            ]
        );
        assert_eq!(log.event(8).time.to_canonical(), "2021-05-21T00:00:00.000Z");
        let midnight: Vec<&str> = log
            .events()
            .iter()
            .filter(|e| e.attrs.contains_key("suspect_midnight"))
            .map(|e| e.id.as_str())
            .collect();
        assert_eq!(midnight, ["36536", "36537"]);
        assert_eq!(Granularity::Day.as_str(), "day");
    }

    #[test]
    fn header_only_gives_empty_log() {
        let log = parse_log("event id,case id,activity,timestamp\n".as_bytes(), &cfg()).unwrap();
        assert!(log.is_empty());
        assert!(parse_log("".as_bytes(), &cfg()).unwrap().is_empty());
    }

    #[test]
    fn bad_timestamp_names_the_row() {
        let text = "event id,case id,activity,timestamp\n1,c,a,19-05-2021\n2,c,b,not-a-date\n";
        match parse_log(text.as_bytes(), &cfg()) {
            Err(Error::Timestamp { location, value, tried }) => {
                assert_eq!(location, "line 3");
                assert_eq!(value, "not-a-date");
                assert!(!tried.is_empty());
            }
            other => panic!("expected timestamp error, got {other:?}"),
        }
    }

    #[test]
    fn missing_column_and_ragged_rows() {
        let text = "case id,activity\n1,a\n";
        assert!(matches!(parse_log(text.as_bytes(), &cfg()), Err(Error::Parse { .. })));
        let text = "event id,case id,activity,timestamp\n1,c,a\n";
        assert!(matches!(parse_log(text.as_bytes(), &cfg()), Err(Error::Parse { .. })));
    }

    #[test]
    fn row_orders() {
        let per_case = parse_log(
            TABLE.as_bytes(),
            &cfg().with_order(ExplicitOrderSource::RowOrderPerCase),
        )
        .unwrap();
        assert_eq!(per_case.explicit_order().edges().len(), 10);
        assert!(!per_case.explicit_order().crosses_cases());
        let global = parse_log(
            TABLE.as_bytes(),
            &cfg().with_order(ExplicitOrderSource::RowOrderGlobal),
        )
        .unwrap();
        assert_eq!(global.explicit_order().edges().len(), 11);
        assert!(global.explicit_order().crosses_cases());
    }

    #[test]
    fn edge_list_order_and_cycle() {
        let edges = ExplicitOrderSource::EdgeList(vec![
            ("36533".into(), "36534".into()),
            ("36534".into(), "36537".into()),
        ]);
        let log = parse_log(TABLE.as_bytes(), &cfg().with_order(edges)).unwrap();
        assert!(log.explicit_order().precedes(0, 4));
        let cyc = ExplicitOrderSource::EdgeList(vec![
            ("36533".into(), "36534".into()),
            ("36534".into(), "36533".into()),
        ]);
        assert!(matches!(
            parse_log(TABLE.as_bytes(), &cfg().with_order(cyc)),
            Err(Error::CyclicOrder { .. })
        ));
        let unknown = ExplicitOrderSource::EdgeList(vec![("x".into(), "36533".into())]);
        assert!(matches!(
            parse_log(TABLE.as_bytes(), &cfg().with_order(unknown)),
            Err(Error::UnknownEvent(_))
        ));
    }

    #[test]
    fn quoted_fields_and_delimiter() {
        let text = "event id;case id;activity;timestamp;note\n1;c;\"a; b\";2021-05-19;\"x \"\"y\"\"\"\n";
        let mut c = cfg();
        c.delimiter = ';';
        let log = parse_log(text.as_bytes(), &c).unwrap();
        assert_eq!(log.event(0).activity, "a; b");
        assert_eq!(log.event(0).attrs["note"], AttrValue::Text("x \"y\"".into()));
    }

    #[test]
    fn generated_ids_without_id_column() {
        let text = "case,act,time\nc,a,2021-05-19\nc,b,2021-05-20\n";
        let log = parse_log(
            text.as_bytes(),
            &IngestConfig::csv(ColumnMap::new("case", "act", "time")),
        )
        .unwrap();
        assert_eq!(log.event(1).id.as_str(), "2");
    }
}
