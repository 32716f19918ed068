//! CSV result files.
//!
//! Floats are written with 12 significant digits, rows in a fixed order
//! (group, then replication, then time), so equal results give equal bytes.

use std::io::{Read, Write};

use thiserror::Error;

use crate::gsa::IndexEstimate;
use crate::sim::Trajectory;
use crate::study::{FunctionalIndexReport, WelchResult};
use crate::validate::Check;

pub const INDEX_HEADER: [&str; 6] = ["group", "replication", "first_order", "total", "variance", "numerator_total"];
pub const DYNAMICAL_HEADER: [&str; 5] = ["group", "time", "first_order", "total", "variance"];
pub const WELCH_HEADER: [&str; 5] = ["group", "t", "df", "p", "reject"];
pub const VALIDATION_HEADER: [&str; 4] = ["check", "statistic", "reference", "pass"];

#[derive(Debug, Error)]
pub enum OutputError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("unexpected CSV header: {0}")]
    Header(String),
    #[error("line {line}: {message}")]
    Field { line: u64, message: String },
}

/// `x` with 12 significant digits, trailing zeros trimmed. Plain decimal
/// notation for moderate magnitudes, scientific otherwise.
pub fn fmt_float(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..15).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

/// Replicated index estimates, one row per (group, replication).
pub fn write_indices<W: Write>(w: W, groups: &[String], reps: &[Vec<IndexEstimate>]) -> Result<(), OutputError> {
    let mut out = writer(w);
    out.write_record(INDEX_HEADER)?;
    for (j, g) in groups.iter().enumerate() {
        for (r, rep) in reps.iter().enumerate() {
            let e = &rep[j];
            out.write_record([
                g.clone(),
                r.to_string(),
                fmt_float(e.first_order),
                fmt_float(e.total),
                fmt_float(e.variance),
                fmt_float(e.numerator_total),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Replication-mean dynamical indices, one row per (group, time). Empty
/// index fields mark times where the output variance vanishes.
pub fn write_dynamical<W: Write>(w: W, report: &FunctionalIndexReport) -> Result<(), OutputError> {
    let mut out = writer(w);
    out.write_record(DYNAMICAL_HEADER)?;
    let variance = report.variance();
    for (j, g) in report.groups.iter().enumerate() {
        let first = report.first_order_curve(j);
        let total = report.total_curve(j);
        for (t, &time) in report.grid.iter().enumerate() {
            out.write_record([
                g.clone(),
                fmt_float(time),
                fmt_opt(first[t]),
                fmt_opt(total[t]),
                fmt_float(variance[t]),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_welch<W: Write>(w: W, results: &[WelchResult]) -> Result<(), OutputError> {
    let mut out = writer(w);
    out.write_record(WELCH_HEADER)?;
    for r in results {
        out.write_record([
            r.group.clone(),
            fmt_float(r.t),
            fmt_float(r.df),
            fmt_float(r.p),
            r.reject.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_validation<W: Write>(w: W, checks: &[Check]) -> Result<(), OutputError> {
    let mut out = writer(w);
    out.write_record(VALIDATION_HEADER)?;
    for c in checks {
        out.write_record([
            c.name.clone(),
            fmt_float(c.statistic),
            fmt_float(c.reference),
            c.pass.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// The path's jump chain: time 0 with the initial state, then one row per jump.
pub fn write_trajectory<W: Write>(w: W, compartments: &[String], traj: &Trajectory) -> Result<(), OutputError> {
    let mut out = writer(w);
    let mut header = vec!["time".to_string()];
    header.extend(compartments.iter().cloned());
    out.write_record(&header)?;
    let times = std::iter::once(0.0).chain(traj.jump_times.iter().copied());
    for (t, state) in times.zip(&traj.states) {
        let mut row = vec![fmt_float(t)];
        row.extend(state.counts().iter().map(u32::to_string));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

fn reader<R: Read>(r: R, expected: &[&str]) -> Result<csv::Reader<R>, OutputError> {
    let mut rd = csv::ReaderBuilder::new().from_reader(r);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if !expected.is_empty() && header != expected {
        return Err(OutputError::Header(header.join(",")));
    }
    Ok(rd)
}

fn parse_f64(s: &str, line: u64) -> Result<f64, OutputError> {
    s.parse().map_err(|_| OutputError::Field {
        line,
        message: format!("not a number: `{s}`"),
    })
}

fn parse_opt(s: &str, line: u64) -> Result<Option<f64>, OutputError> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse_f64(s, line).map(Some)
    }
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

/// One row of an index CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexRow {
    pub group: String,
    pub replication: usize,
    pub first_order: f64,
    pub total: f64,
    pub variance: f64,
    pub numerator_total: f64,
}

pub fn read_indices<R: Read>(r: R) -> Result<Vec<IndexRow>, OutputError> {
    let mut rd = reader(r, &INDEX_HEADER)?;
    rd.records()
        .map(|rec| {
            let rec = rec?;
            let line = line_of(&rec);
            Ok(IndexRow {
                group: rec[0].to_string(),
                replication: rec[1].parse().map_err(|_| OutputError::Field {
                    line,
                    message: "bad replication index".into(),
                })?,
                first_order: parse_f64(&rec[2], line)?,
                total: parse_f64(&rec[3], line)?,
                variance: parse_f64(&rec[4], line)?,
                numerator_total: parse_f64(&rec[5], line)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicalRow {
    pub group: String,
    pub time: f64,
    pub first_order: Option<f64>,
    pub total: Option<f64>,
    pub variance: f64,
}

pub fn read_dynamical<R: Read>(r: R) -> Result<Vec<DynamicalRow>, OutputError> {
    let mut rd = reader(r, &DYNAMICAL_HEADER)?;
    rd.records()
        .map(|rec| {
            let rec = rec?;
            let line = line_of(&rec);
            Ok(DynamicalRow {
                group: rec[0].to_string(),
                time: parse_f64(&rec[1], line)?,
                first_order: parse_opt(&rec[2], line)?,
                total: parse_opt(&rec[3], line)?,
                variance: parse_f64(&rec[4], line)?,
            })
        })
        .collect()
}

/// A trajectory CSV: compartment names, jump times and counts per row.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTable {
    pub compartments: Vec<String>,
    pub times: Vec<f64>,
    pub counts: Vec<Vec<u32>>,
}

pub fn read_trajectory<R: Read>(r: R) -> Result<TrajectoryTable, OutputError> {
    let mut rd = reader(r, &[])?;
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header.first().map(String::as_str) != Some("time") {
        return Err(OutputError::Header(header.join(",")));
    }
    let mut table = TrajectoryTable {
        compartments: header[1..].to_vec(),
        times: Vec::new(),
        counts: Vec::new(),
    };
    for rec in rd.records() {
        let rec = rec?;
        let line = line_of(&rec);
        table.times.push(parse_f64(&rec[0], line)?);
        let row = rec
            .iter()
            .skip(1)
            .map(|v| {
                v.parse().map_err(|_| OutputError::Field {
                    line,
                    message: format!("not a count: `{v}`"),
                })
            })
            .collect::<Result<Vec<u32>, _>>()?;
        table.counts.push(row);
    }
    Ok(table)
}
