//! Per-iteration log records and their CSV encoding.
//!
//! The CSV schema is fixed and versioned: a leading `# dualdecomp-log-v1`
//! comment, one header row, then per iteration `k, g_lambda` followed by
//! six metric columns for each tracked point in the order
//! raw, mra, avg, proj, dualavg.

use std::io::Write;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const CSV_SCHEMA: &str = "dualdecomp-log-v1";

pub const TRACKED_POINTS: [&str; 5] = ["raw", "mra", "avg", "proj", "dualavg"];

/// Metrics of one tracked primal point at one iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct PointMetrics<T> {
    /// Objective value, when every agent evaluation was solvable.
    pub f: Option<T>,
    /// Relative suboptimality `(f − f*)/|f*|` (absolute gap when `|f*|`
    /// vanishes).
    pub subopt: Option<T>,
    pub r_p: T,
    pub r_c: T,
    /// `r_p/‖b‖₂`; absent when `b = 0`.
    pub rel_inf: Option<T>,
    /// All agents report the point inside dom f_i.
    pub dom_feasible: bool,
}

/// One logged iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord<T> {
    pub k: usize,
    pub g_lambda: T,
    pub raw: Option<PointMetrics<T>>,
    pub mra: Option<PointMetrics<T>>,
    pub avg: Option<PointMetrics<T>>,
    pub proj: Option<PointMetrics<T>>,
    pub dualavg: Option<PointMetrics<T>>,
}

impl<T> IterationRecord<T> {
    pub fn point(&self, name: &str) -> Option<&PointMetrics<T>> {
        match name {
            "raw" => self.raw.as_ref(),
            "mra" => self.mra.as_ref(),
            "avg" => self.avg.as_ref(),
            "proj" => self.proj.as_ref(),
            "dualavg" => self.dualavg.as_ref(),
            _ => None,
        }
    }
}

pub fn csv_header() -> Vec<String> {
    let mut cols = vec!["k".to_string(), "g_lambda".to_string()];
    for p in TRACKED_POINTS {
        for suffix in ["f", "subopt", "rp", "rc", "relinf", "domfeas"] {
            cols.push(format!("{p}_{suffix}"));
        }
    }
    cols
}

fn fmt_opt<T: Scalar>(v: Option<T>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

fn point_fields<T: Scalar>(p: Option<&PointMetrics<T>>) -> [String; 6] {
    match p {
        Some(p) => [
            fmt_opt(p.f),
            fmt_opt(p.subopt),
            format!("{}", p.r_p),
            format!("{}", p.r_c),
            fmt_opt(p.rel_inf),
            if p.dom_feasible { "1".into() } else { "0".into() },
        ],
        None => Default::default(),
    }
}

/// Serialize records to CSV bytes (deterministic: shortest round-trip
/// float formatting, fixed column order).
pub fn write_csv_bytes<T: Scalar>(records: &[IterationRecord<T>]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    writeln!(out, "# {CSV_SCHEMA}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header())?;
    for rec in records {
        w.write_record(record_fields(rec))?;
    }
    Ok(w.into_inner().map_err(|e| Error::Invalid(format!("csv flush: {e}")))?)
}

pub fn record_fields<T: Scalar>(rec: &IterationRecord<T>) -> Vec<String> {
    let mut row = vec![rec.k.to_string(), format!("{}", rec.g_lambda)];
    for name in TRACKED_POINTS {
        row.extend(point_fields(rec.point(name)));
    }
    row
}

pub fn write_csv_file<T: Scalar>(
    records: &[IterationRecord<T>],
    path: &std::path::Path,
) -> Result<()> {
    std::fs::write(path, write_csv_bytes(records)?)?;
    Ok(())
}

fn parse_opt<T: Scalar>(field: &str) -> Result<Option<T>> {
    if field.is_empty() {
        return Ok(None);
    }
    let v: f64 =
        field.parse().map_err(|e| Error::Invalid(format!("bad float '{field}': {e}")))?;
    Ok(Some(T::of_f64(v)))
}

fn parse_point<T: Scalar>(fields: &[&str]) -> Result<Option<PointMetrics<T>>> {
    if fields.iter().all(|f| f.is_empty()) {
        return Ok(None);
    }
    Ok(Some(PointMetrics {
        f: parse_opt(fields[0])?,
        subopt: parse_opt(fields[1])?,
        r_p: parse_opt(fields[2])?
            .ok_or_else(|| Error::Invalid("missing r_p".into()))?,
        r_c: parse_opt(fields[3])?
            .ok_or_else(|| Error::Invalid("missing r_c".into()))?,
        rel_inf: parse_opt(fields[4])?,
        dom_feasible: fields[5] == "1",
    }))
}

pub fn read_csv_bytes<T: Scalar>(bytes: &[u8]) -> Result<Vec<IterationRecord<T>>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(bytes);
    {
        let headers = reader.headers()?;
        let expected = csv_header();
        if headers.len() != expected.len() {
            return Err(Error::Invalid(format!(
                "log has {} columns, schema {CSV_SCHEMA} expects {}",
                headers.len(),
                expected.len()
            )));
        }
    }
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row?;
        let fields: Vec<&str> = row.iter().collect();
        let k: usize = fields[0]
            .parse()
            .map_err(|e| Error::Invalid(format!("bad iteration index: {e}")))?;
        let g_lambda = parse_opt::<T>(fields[1])?
            .ok_or_else(|| Error::Invalid("missing g_lambda".into()))?;
        let mut points = Vec::with_capacity(5);
        for i in 0..5 {
            points.push(parse_point(&fields[2 + 6 * i..2 + 6 * (i + 1)])?);
        }
        let mut it = points.into_iter();
        records.push(IterationRecord {
            k,
            g_lambda,
            raw: it.next().unwrap(),
            mra: it.next().unwrap(),
            avg: it.next().unwrap(),
            proj: it.next().unwrap(),
            dualavg: it.next().unwrap(),
        });
    }
    Ok(records)
}

pub fn read_csv_file<T: Scalar>(path: &std::path::Path) -> Result<Vec<IterationRecord<T>>> {
    read_csv_bytes(&std::fs::read(path)?)
}
