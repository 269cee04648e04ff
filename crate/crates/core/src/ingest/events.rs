//! Event CSV.
//!
//! ```text
//! instrument,tick,date,levels,count          <- one header record (values)
//! seq,timestamp_ns,kind,order_id,side,price_ticks,volume   <- `count` rows
//! ```
//!
//! `kind` is one of `ADD`, `CXL`, `TRD`; `side` is `B` or `A`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use csv::{ReaderBuilder, StringRecord, WriterBuilder};
use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::book::{EventKind, MarketEvent, Side};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventFileHeader {
    pub instrument: String,
    pub tick_size: f64,
    pub date: String,
    pub levels: usize,
    pub count: u64,
}

impl EventFileHeader {
    fn parse(rec: &StringRecord) -> Result<Self, IngestError> {
        if rec.len() != 5 {
            return Err(IngestError::BadHeader(format!("expected 5 fields, got {}", rec.len())));
        }
        let tick_size: f64 = rec[1]
            .parse()
            .map_err(|_| IngestError::BadHeader(format!("tick size {:?}", &rec[1])))?;
        if !(tick_size.is_finite() && tick_size > 0.0) {
            return Err(IngestError::BadHeader("tick size must be positive".into()));
        }
        let levels = rec[3]
            .parse()
            .map_err(|_| IngestError::BadHeader(format!("levels {:?}", &rec[3])))?;
        let count = rec[4]
            .parse()
            .map_err(|_| IngestError::BadHeader(format!("count {:?}", &rec[4])))?;
        Ok(Self {
            instrument: rec[0].to_string(),
            tick_size,
            date: rec[2].to_string(),
            levels,
            count,
        })
    }
}

fn kind_code(kind: EventKind) -> &'static str {
    match kind {
        EventKind::AddLimit => "ADD",
        EventKind::Cancel => "CXL",
        EventKind::Trade => "TRD",
    }
}

fn side_code(side: Side) -> &'static str {
    match side {
        Side::Bid => "B",
        Side::Ask => "A",
    }
}

fn parse_row(rec: &StringRecord, line: u64) -> Result<MarketEvent, IngestError> {
    let bad = |reason: String| IngestError::MalformedRow { line, reason };
    if rec.len() != 7 {
        return Err(bad(format!("expected 7 fields, got {}", rec.len())));
    }
    fn num<T: std::str::FromStr>(s: &str, what: &str, line: u64) -> Result<T, IngestError> {
        s.parse().map_err(|_| IngestError::MalformedRow {
            line,
            reason: format!("{what} {s:?}"),
        })
    }
    let kind = match &rec[2] {
        "ADD" => EventKind::AddLimit,
        "CXL" => EventKind::Cancel,
        "TRD" => EventKind::Trade,
        other => return Err(bad(format!("kind {other:?}"))),
    };
    let side = match &rec[4] {
        "B" => Side::Bid,
        "A" => Side::Ask,
        other => return Err(bad(format!("side {other:?}"))),
    };
    Ok(MarketEvent {
        seq: num(&rec[0], "seq", line)?,
        timestamp_ns: num(&rec[1], "timestamp", line)?,
        kind,
        order_id: num(&rec[3], "order id", line)?,
        side,
        price: num(&rec[5], "price", line)?,
        volume: num(&rec[6], "volume", line)?,
    })
}

/// Streaming reader; yields events in file order and validates sequence
/// monotonicity and the declared count.
pub struct EventReader<R: Read> {
    reader: csv::Reader<R>,
    header: EventFileHeader,
    record: StringRecord,
    rows: u64,
    last_seq: Option<u64>,
    finished: bool,
}

impl<R: Read> EventReader<R> {
    pub fn new(input: R) -> Result<Self, IngestError> {
        let mut reader = ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(input);
        let mut record = StringRecord::new();
        if !reader.read_record(&mut record)? {
            return Err(IngestError::BadHeader("empty file".into()));
        }
        let header = EventFileHeader::parse(&record)?;
        Ok(Self {
            reader,
            header,
            record,
            rows: 0,
            last_seq: None,
            finished: false,
        })
    }

    pub fn header(&self) -> &EventFileHeader {
        &self.header
    }
}

impl<R: Read> Iterator for EventReader<R> {
    type Item = Result<MarketEvent, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.finished {
            return None;
        }
        match self.reader.read_record(&mut self.record) {
            Err(e) => {
                self.finished = true;
                Some(Err(e.into()))
            }
            Ok(false) => {
                self.finished = true;
                (self.rows != self.header.count).then_some(Err(IngestError::CountMismatch {
                    declared: self.header.count,
                    found: self.rows,
                }))
            }
            Ok(true) => {
                let line = self.record.position().map_or(0, |p| p.line());
                self.rows += 1;
                let ev = match parse_row(&self.record, line) {
                    Ok(ev) => ev,
                    Err(e) => {
                        self.finished = true;
                        return Some(Err(e));
                    }
                };
                if let Some(last) = self.last_seq {
                    if ev.seq <= last {
                        self.finished = true;
                        return Some(Err(IngestError::NonMonotoneSeq { line, last, got: ev.seq }));
                    }
                }
                self.last_seq = Some(ev.seq);
                Some(Ok(ev))
            }
        }
    }
}

/// Reads a whole event file.
pub fn read_event_file(path: &Path) -> Result<(EventFileHeader, Vec<MarketEvent>), IngestError> {
    let reader = EventReader::new(BufReader::new(File::open(path)?))?;
    let header = reader.header().clone();
    let events = reader.collect::<Result<Vec<_>, _>>()?;
    Ok((header, events))
}

/// Writes a header and events. `header.count` is taken from `events`.
pub fn write_events<W: Write>(out: W, header: &EventFileHeader, events: &[MarketEvent]) -> Result<(), IngestError> {
    let mut w = WriterBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_writer(out);
    w.write_record([
        header.instrument.clone(),
        header.tick_size.to_string(),
        header.date.clone(),
        header.levels.to_string(),
        events.len().to_string(),
    ])?;
    for ev in events {
        w.write_record([
            ev.seq.to_string().as_str(),
            ev.timestamp_ns.to_string().as_str(),
            kind_code(ev.kind),
            ev.order_id.to_string().as_str(),
            side_code(ev.side),
            ev.price.to_string().as_str(),
            ev.volume.to_string().as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_event_file(path: &Path, header: &EventFileHeader, events: &[MarketEvent]) -> Result<(), IngestError> {
    write_events(BufWriter::new(File::create(path)?), header, events)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Vec<MarketEvent>, IngestError> {
        EventReader::new(text.as_bytes())?.collect()
    }

    #[test]
    fn header_only_is_empty_stream() {
        assert!(parse("SZ000001,0.01,2019-11-01,10,0\n").unwrap().is_empty());
    }

    #[test]
    fn row_maps_to_add_bid() {
        let evs = parse("X,0.01,2019-11-01,10,1\n5,171000000,ADD,42,B,1000,100\n").unwrap();
        assert_eq!(
            evs,
            vec![MarketEvent {
                seq: 5,
                timestamp_ns: 171_000_000,
                kind: EventKind::AddLimit,
                order_id: 42,
                side: Side::Bid,
                price: 1000,
                volume: 100,
            }]
        );
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(parse(""), Err(IngestError::BadHeader(_))));
        assert!(matches!(parse("X,0,d,10,0\n"), Err(IngestError::BadHeader(_))));
        assert!(matches!(parse("X,0.01,d,10\n"), Err(IngestError::BadHeader(_))));
        assert!(matches!(
            parse("X,0.01,d,10,1\n1,1,FOO,1,B,1,1\n"),
            Err(IngestError::MalformedRow { line: 2, .. })
        ));
        assert!(matches!(
            parse("X,0.01,d,10,2\n2,1,ADD,1,B,1,1\n2,1,ADD,2,B,1,1\n"),
            Err(IngestError::NonMonotoneSeq { line: 3, last: 2, got: 2 })
        ));
        assert!(matches!(
            parse("X,0.01,d,10,2\n1,1,ADD,1,B,1,1\n"),
            Err(IngestError::CountMismatch { declared: 2, found: 1 })
        ));
        assert!(matches!(
            parse("X,0.01,d,10,1\n1,1,ADD,1,X,1,1\n"),
            Err(IngestError::MalformedRow { .. })
        ));
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let text = "SYN,0.01,2019-11-01,10,3\n1,10,ADD,1,B,1000,100\n2,20,ADD,2,A,1002,300\n3,35,TRD,9,B,1002,100\n";
        let reader = EventReader::new(text.as_bytes()).unwrap();
        let header = reader.header().clone();
        let events: Vec<_> = reader.collect::<Result<_, _>>().unwrap();
        let mut out = Vec::new();
        write_events(&mut out, &header, &events).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }
}
