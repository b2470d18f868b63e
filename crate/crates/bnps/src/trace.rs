//! Canonical campus trace CSV: `ap_id,t_start,dl_bytes,ul_bytes`, one row per
//! AP and 10-minute window, `t_start` in ISO-8601 UTC.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use bnps_core::trace::{fill_gaps, sort_samples, Gap, TraceSample};
use chrono::{DateTime, SecondsFormat, Utc};

use crate::error::{Error, LineError};

pub const TRACE_HEADER: [&str; 4] = ["ap_id", "t_start", "dl_bytes", "ul_bytes"];

/// Parsed trace: samples sorted by (ap_id, t_start), plus the windows missing between them.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub samples: Vec<TraceSample>,
    pub gaps: Vec<Gap>,
}

#[derive(Debug)]
pub enum ReadError {
    Header(String),
    Rows(Vec<LineError>),
    Io(std::io::Error),
}

pub fn format_timestamp(unix: i64) -> String {
    DateTime::<Utc>::from_timestamp(unix, 0)
        .map(|t| t.to_rfc3339_opts(SecondsFormat::Secs, true))
        .unwrap_or_else(|| unix.to_string())
}

/// RFC 3339 with any offset, normalised to UTC seconds.
pub fn parse_timestamp(s: &str) -> Option<i64> {
    DateTime::parse_from_rfc3339(s).ok().map(|t| t.timestamp())
}

fn count(field: &str, name: &str) -> Result<u64, String> {
    if field.starts_with('-') {
        return Err(format!("{name} is negative: `{field}`"));
    }
    field.parse().map_err(|_| format!("{name} is not a byte count: `{field}`"))
}

pub fn read_trace<R: Read>(input: R) -> Result<Trace, ReadError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(input);
    let header = rdr.headers().map_err(|e| ReadError::Header(e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != TRACE_HEADER {
        return Err(ReadError::Header(format!(
            "expected header `{}`, got `{}`",
            TRACE_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut samples = Vec::new();
    let mut errors = Vec::new();
    let mut keys = BTreeSet::new();
    for record in rdr.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                if let csv::ErrorKind::Io(_) = e.kind() {
                    let csv::ErrorKind::Io(io) = e.into_kind() else { unreachable!() };
                    return Err(ReadError::Io(io));
                }
                errors.push(LineError { line, message: e.to_string() });
                continue;
            }
        };
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != TRACE_HEADER.len() {
            errors.push(LineError { line, message: format!("expected 4 fields, found {}", record.len()) });
            continue;
        }
        let parsed = (|| {
            let ap_id = &record[0];
            if ap_id.is_empty() {
                return Err(String::from("empty ap_id"));
            }
            let t = parse_timestamp(&record[1]).ok_or_else(|| format!("bad ISO-8601 timestamp `{}`", &record[1]))?;
            Ok(TraceSample::new(ap_id, t, count(&record[2], "dl_bytes")?, count(&record[3], "ul_bytes")?))
        })();
        match parsed {
            Ok(s) => {
                if !keys.insert((s.ap_id.clone(), s.t_start)) {
                    errors.push(LineError { line, message: format!("duplicate window {} for {}", &record[1], s.ap_id) });
                } else {
                    samples.push(s);
                }
            }
            Err(message) => errors.push(LineError { line, message }),
        }
    }
    if !errors.is_empty() {
        return Err(ReadError::Rows(errors));
    }
    sort_samples(&mut samples);
    let (_, gaps) = fill_gaps(samples.clone());
    Ok(Trace { samples, gaps })
}

pub fn write_trace<W: Write>(output: W, samples: &[TraceSample]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(output);
    w.write_record(TRACE_HEADER)?;
    for s in samples {
        w.write_record([s.ap_id.clone(), format_timestamp(s.t_start), s.dl_bytes.to_string(), s.ul_bytes.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_trace(path: &Path) -> Result<Trace, Error> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_trace(std::io::BufReader::new(file)).map_err(|e| match e {
        ReadError::Header(message) => Error::Format { path: path.to_path_buf(), message },
        ReadError::Rows(errors) => Error::Lines { path: path.to_path_buf(), errors },
        ReadError::Io(e) => Error::io(path, e),
    })
}

pub fn save_trace(path: &Path, samples: &[TraceSample]) -> Result<(), Error> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_trace(std::io::BufWriter::new(file), samples).map_err(|e| Error::io(path, e.into()))
}
