//! Adapter stub for the public campus Wi-Fi dataset.
//!
//! Its column layout is not fixed here. Fill an [`OuluMapping`] with the
//! dataset's column names and timestamp encoding; rows are then summed into
//! 10-minute windows per AP and can be saved as a canonical trace.
//!
//! | canonical   | mapping field | default column |
//! |-------------|---------------|----------------|
//! | `ap_id`     | `ap_id`       | `ap_name`      |
//! | `t_start`   | `timestamp`   | `timestamp`    |
//! | `dl_bytes`  | `dl_bytes`    | `bytes_down`   |
//! | `ul_bytes`  | `ul_bytes`    | `bytes_up`     |

use std::collections::BTreeMap;
use std::io::Read;

use bnps_core::trace::{TraceSample, CAMPUS_WINDOW_S};
use chrono::NaiveDateTime;

use crate::error::LineError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TimeFormat {
    UnixSeconds,
    UnixMillis,
    /// `strftime` pattern, read as UTC.
    Pattern(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OuluMapping {
    pub ap_id: String,
    pub timestamp: String,
    pub dl_bytes: String,
    pub ul_bytes: String,
    pub time_format: TimeFormat,
    pub delimiter: u8,
}

impl Default for OuluMapping {
    fn default() -> Self {
        Self {
            ap_id: "ap_name".into(),
            timestamp: "timestamp".into(),
            dl_bytes: "bytes_down".into(),
            ul_bytes: "bytes_up".into(),
            time_format: TimeFormat::UnixSeconds,
            delimiter: b',',
        }
    }
}

impl OuluMapping {
    fn parse_time(&self, s: &str) -> Option<i64> {
        match &self.time_format {
            TimeFormat::UnixSeconds => s.parse().ok(),
            TimeFormat::UnixMillis => s.parse::<i64>().ok().map(|ms| ms.div_euclid(1_000)),
            TimeFormat::Pattern(p) => NaiveDateTime::parse_from_str(s, p).ok().map(|t| t.and_utc().timestamp()),
        }
    }
}

/// Reads dataset rows and sums them into (ap, 10-minute window) samples, sorted.
pub fn convert<R: Read>(input: R, mapping: &OuluMapping) -> Result<Vec<TraceSample>, Vec<LineError>> {
    let mut rdr = csv::ReaderBuilder::new().delimiter(mapping.delimiter).trim(csv::Trim::All).from_reader(input);
    let header = rdr.headers().map_err(|e| vec![LineError { line: 1, message: e.to_string() }])?.clone();
    let column = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| LineError { line: 1, message: format!("missing column `{name}`") })
    };
    let cols: Vec<_> = [&mapping.ap_id, &mapping.timestamp, &mapping.dl_bytes, &mapping.ul_bytes]
        .into_iter()
        .map(|n| column(n))
        .collect();
    if cols.iter().any(Result::is_err) {
        return Err(cols.into_iter().filter_map(Result::err).collect());
    }
    let [ap, ts, dl, ul] = [0, 1, 2, 3].map(|i| *cols[i].as_ref().unwrap());
    let window = i64::from(CAMPUS_WINDOW_S);
    let mut sums: BTreeMap<(String, i64), (u64, u64)> = BTreeMap::new();
    let mut errors = Vec::new();
    for record in rdr.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                errors.push(LineError { line: e.position().map_or(0, |p| p.line()), message: e.to_string() });
                continue;
            }
        };
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("");
        let Some(t) = mapping.parse_time(field(ts)) else {
            errors.push(LineError { line, message: format!("bad timestamp `{}`", field(ts)) });
            continue;
        };
        let (Ok(d), Ok(u)) = (field(dl).parse::<u64>(), field(ul).parse::<u64>()) else {
            errors.push(LineError { line, message: String::from("byte counters must be non-negative integers") });
            continue;
        };
        let e = sums.entry((field(ap).to_string(), t.div_euclid(window) * window)).or_default();
        e.0 += d;
        e.1 += u;
    }
    if !errors.is_empty() {
        return Err(errors);
    }
    Ok(sums.into_iter().map(|((ap, t), (d, u))| TraceSample::new(ap, t, d, u)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_binned_into_windows() {
        let csv = "ap_name,timestamp,bytes_down,bytes_up\nx,0,10,1\nx,599,5,1\nx,600,7,0\ny,30,1,1\n";
        let s = convert(csv.as_bytes(), &OuluMapping::default()).unwrap();
        assert_eq!(
            s,
            vec![TraceSample::new("x", 0, 15, 2), TraceSample::new("x", 600, 7, 0), TraceSample::new("y", 0, 1, 1)]
        );
    }

    #[test]
    fn custom_mapping() {
        let m = OuluMapping {
            ap_id: "AP".into(),
            timestamp: "Time".into(),
            dl_bytes: "Rx".into(),
            ul_bytes: "Tx".into(),
            time_format: TimeFormat::Pattern("%Y-%m-%d %H:%M:%S".into()),
            delimiter: b';',
        };
        let s = convert("AP;Time;Rx;Tx\na;2019-01-15 00:05:00;3;4\n".as_bytes(), &m).unwrap();
        assert_eq!(s, vec![TraceSample::new("a", 1_547_510_400, 3, 4)]);
    }

    #[test]
    fn missing_columns_are_named() {
        let e = convert("a,b\n1,2\n".as_bytes(), &OuluMapping::default()).unwrap_err();
        assert_eq!(e.len(), 4);
        assert!(e[0].message.contains("ap_name"));
    }
}
