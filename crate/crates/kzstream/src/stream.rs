//! Text stream format.
//!
//! ```text
//! KZSTREAM v1 d=2 delta=64 z=1 k=2 eps=0.25 n=3
//! + 3 4
//! + 10 1 2
//! - 3 4
//! ```
//!
//! A record is a sign, d coordinates in [1, delta] and an optional positive
//! integer weight. `#` starts a comment.

use std::fmt::Write as _;
use std::path::Path;

use kzstream_core::dynamic::DynamicUpdate;
use kzstream_core::Point;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct StreamHeader {
    pub d: usize,
    pub delta: u64,
    pub z: u32,
    pub k: usize,
    pub eps: f64,
    pub n: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub insert: bool,
    pub point: Point,
    pub weight: u64,
}

impl Record {
    pub fn update(&self) -> DynamicUpdate {
        let w = self.weight as i64;
        DynamicUpdate { point: self.point.clone(), delta: if self.insert { w } else { -w } }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamFile {
    pub header: StreamHeader,
    pub records: Vec<Record>,
}

fn header_field<T: std::str::FromStr>(fields: &[(String, String)], name: &str) -> CliResult<T> {
    let v = fields
        .iter()
        .find(|(k, _)| k == name)
        .ok_or_else(|| CliError::parse(1, format!("header is missing {name}=")))?;
    v.1.parse().map_err(|_| CliError::parse(1, format!("bad header value {name}={}", v.1)))
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
    .trim()
}

impl StreamFile {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, strip_comment(l))).filter(|(_, l)| !l.is_empty());
        let (hline, head) = lines.next().ok_or_else(|| CliError::parse(1, "missing KZSTREAM header"))?;
        let mut toks = head.split_whitespace();
        if toks.next() != Some("KZSTREAM") || toks.next() != Some("v1") {
            return Err(CliError::parse(hline, "expected `KZSTREAM v1`"));
        }
        let fields: Vec<(String, String)> = toks
            .map(|t| {
                t.split_once('=')
                    .map(|(a, b)| (a.to_string(), b.to_string()))
                    .ok_or_else(|| CliError::parse(hline, format!("bad header token {t}")))
            })
            .collect::<CliResult<_>>()?;
        let header = StreamHeader {
            d: header_field(&fields, "d")?,
            delta: header_field(&fields, "delta")?,
            z: header_field(&fields, "z")?,
            k: header_field(&fields, "k")?,
            eps: header_field(&fields, "eps")?,
            n: header_field(&fields, "n")?,
        };
        if header.d == 0 || header.delta < 2 || !header.delta.is_power_of_two() {
            return Err(CliError::parse(hline, "header needs d >= 1 and a power-of-two delta"));
        }
        let mut records = Vec::new();
        for (ln, line) in lines {
            records.push(parse_record(ln, line, &header)?);
        }
        Ok(StreamFile { header, records })
    }

    pub fn read(path: impl AsRef<Path>) -> CliResult<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| CliError::io(path.as_ref(), e))?;
        Self::parse(&text)
    }

    /// Canonical text: header, then one record per line, weight omitted when 1.
    pub fn write(&self) -> String {
        let h = &self.header;
        let mut out = format!("KZSTREAM v1 d={} delta={} z={} k={} eps={} n={}\n", h.d, h.delta, h.z, h.k, h.eps, h.n);
        for r in &self.records {
            out.push(if r.insert { '+' } else { '-' });
            for c in r.point.coords() {
                let _ = write!(out, " {c}");
            }
            if r.weight != 1 {
                let _ = write!(out, " {}", r.weight);
            }
            out.push('\n');
        }
        out
    }

    pub fn has_deletions(&self) -> bool {
        self.records.iter().any(|r| !r.insert)
    }

    /// Header plus records, with n set to the record count.
    pub fn from_records(mut header: StreamHeader, records: Vec<Record>) -> Self {
        header.n = records.len() as u64;
        StreamFile { header, records }
    }
}

fn parse_record(ln: usize, line: &str, h: &StreamHeader) -> CliResult<Record> {
    let mut toks = line.split_whitespace();
    let insert = match toks.next() {
        Some("+") => true,
        Some("-") => false,
        Some(t) => return Err(CliError::parse(ln, format!("record must start with + or -, got {t}"))),
        None => return Err(CliError::parse(ln, "empty record")),
    };
    let vals: Vec<&str> = toks.collect();
    if vals.len() != h.d && vals.len() != h.d + 1 {
        return Err(CliError::parse(ln, format!("expected {} coordinates and an optional weight, got {} fields", h.d, vals.len())));
    }
    let mut coords = Vec::with_capacity(h.d);
    for v in &vals[..h.d] {
        let c: u32 = v.parse().map_err(|_| CliError::parse(ln, format!("bad coordinate {v}")))?;
        if c == 0 || c as u64 > h.delta {
            return Err(CliError::parse(ln, format!("coordinate {c} outside [1, {}]", h.delta)));
        }
        coords.push(c);
    }
    let weight = match vals.get(h.d) {
        Some(w) => match w.parse::<u64>() {
            Ok(w) if w > 0 && w <= i64::MAX as u64 => w,
            _ => return Err(CliError::parse(ln, format!("bad weight {w}"))),
        },
        None => 1,
    };
    Ok(Record { insert, point: Point::new(coords), weight })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "# fixture\nKZSTREAM v1 d=2 delta=16 z=1 k=2 eps=0.25 n=3\n+ 3 4\n+ 10 1 2 # weighted\n\n- 3 4\n";

    #[test]
    fn parses_and_rewrites() {
        let f = StreamFile::parse(SAMPLE).unwrap();
        assert_eq!(f.records.len(), 3);
        assert_eq!(f.records[1].weight, 2);
        assert!(f.has_deletions());
        let canon = f.write();
        assert_eq!(canon, "KZSTREAM v1 d=2 delta=16 z=1 k=2 eps=0.25 n=3\n+ 3 4\n+ 10 1 2\n- 3 4\n");
        assert_eq!(StreamFile::parse(&canon).unwrap().write(), canon);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = "KZSTREAM v1 d=2 delta=16 z=1 k=2 eps=0.25 n=2\n+ 3 4\n+ 3 17\n";
        match StreamFile::parse(bad) {
            Err(CliError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match StreamFile::parse("KZSTREAM v1 d=2 delta=16 z=1 k=2 eps=0.25 n=1\n* 1 1\n") {
            Err(CliError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(StreamFile::parse("").is_err());
        assert!(StreamFile::parse("KZSTREAM v1 d=2 delta=16 z=1 k=2 n=1\n").is_err());
    }

    #[test]
    fn empty_body_is_valid() {
        let f = StreamFile::parse("KZSTREAM v1 d=1 delta=8 z=2 k=1 eps=0.5 n=0\n").unwrap();
        assert!(f.records.is_empty());
    }
}
