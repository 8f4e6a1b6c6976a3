use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};

use super::{AisRecord, Dataset};
use crate::error::{Error, Result};

const HEADER: [&str; 13] = [
    "mmsi",
    "timestamp",
    "lat",
    "lon",
    "sog",
    "cog",
    "heading",
    "nav_status",
    "cargo_type",
    "draught",
    "length",
    "width",
    "ship_type",
];

/// How the timestamp column of a file is written.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimestampFormat {
    EpochSeconds,
    Iso8601,
}

impl TimestampFormat {
    fn detect(cell: &str) -> Self {
        if cell.trim().parse::<i64>().is_ok() {
            TimestampFormat::EpochSeconds
        } else {
            TimestampFormat::Iso8601
        }
    }

    fn parse(self, cell: &str) -> Option<i64> {
        let cell = cell.trim();
        match self {
            TimestampFormat::EpochSeconds => cell.parse().ok(),
            TimestampFormat::Iso8601 => DateTime::parse_from_rfc3339(cell).map(|t| t.timestamp()).ok().or_else(|| {
                ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"]
                    .iter()
                    .find_map(|f| NaiveDateTime::parse_from_str(cell, f).ok())
                    .map(|t| t.and_utc().timestamp())
            }),
        }
    }
}

pub fn read_csv(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv_from(file)
}

/// Parses AIS CSV. Empty cells are absent fields; the timestamp format is
/// detected from the first row and must hold for the whole file.
pub fn read_csv_from<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Ok(Dataset::default());
    }
    let mut col = [0usize; 13];
    for (i, name) in HEADER.iter().enumerate() {
        col[i] = headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::InvalidInput(format!("missing CSV column {name:?}")))?;
    }

    let mut format = None;
    let mut records = Vec::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row?;
        let cell = |i: usize| row.get(col[i]).filter(|s| !s.is_empty());
        let number = |i: usize| -> Result<Option<f64>> {
            cell(i)
                .map(|s| {
                    s.parse::<f64>().map_err(|_| {
                        Error::InvalidInput(format!("row {}: column {} is not a number: {s:?}", line + 2, HEADER[i]))
                    })
                })
                .transpose()
        };
        let text = |i: usize| cell(i).map(str::to_string);

        let vessel_id = cell(0).ok_or_else(|| Error::InvalidInput(format!("row {}: empty mmsi", line + 2)))?;
        let ts_cell = cell(1).ok_or_else(|| Error::InvalidInput(format!("row {}: empty timestamp", line + 2)))?;
        let fmt = *format.get_or_insert_with(|| TimestampFormat::detect(ts_cell));
        let timestamp = fmt
            .parse(ts_cell)
            .ok_or_else(|| Error::InvalidInput(format!("row {}: bad timestamp {ts_cell:?}", line + 2)))?;

        let record = AisRecord {
            vessel_id: vessel_id.to_string(),
            timestamp,
            lat: number(2)?,
            lon: number(3)?,
            speed: number(4)?,
            course: number(5)?,
            heading: number(6)?,
            nav_status: text(7),
            cargo_type: text(8),
            draught: number(9)?,
            length: number(10)?,
            width: number(11)?,
            ship_type: text(12),
        };
        record.validate()?;
        records.push(record);
    }
    Dataset::from_records(records)
}

pub fn write_csv(path: &Path, records: impl IntoIterator<Item = impl std::borrow::Borrow<AisRecord>>) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(file, records)
}

/// Writes records with epoch-second timestamps. Floats use the shortest
/// representation that round-trips.
pub fn write_csv_to<W: Write>(
    writer: W,
    records: impl IntoIterator<Item = impl std::borrow::Borrow<AisRecord>>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HEADER)?;
    let num = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        let r = r.borrow();
        w.write_record([
            r.vessel_id.clone(),
            r.timestamp.to_string(),
            num(r.lat),
            num(r.lon),
            num(r.speed),
            num(r.course),
            num(r.heading),
            r.nav_status.clone().unwrap_or_default(),
            r.cargo_type.clone().unwrap_or_default(),
            num(r.draught),
            num(r.length),
            num(r.width),
            r.ship_type.clone().unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}
