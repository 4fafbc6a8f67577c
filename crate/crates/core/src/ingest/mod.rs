//! ISMR file ingest: parsing, SVID classification, elevation masking and
//! GPS-to-UTC conversion.

mod constellation;
mod parse;
mod time;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use constellation::{svid_to_constellation, Constellation, SvId};
pub use parse::{
    parse_ismr_line, ColumnMap, ParseError, ParseErrorKind, ParsedLine, RawIsmrRecord, SkipReason,
};
pub use time::{
    gps_to_utc, gps_to_utc_auto, latest_leap_seconds, leap_seconds_at_gps, leap_seconds_at_utc,
    leap_seconds_for, utc_to_gps, GnssTime, TimeError, UtcTimestamp, WeekRollover,
    GPS_EPOCH_UNIX, SECONDS_PER_DAY, SECONDS_PER_WEEK,
};

/// Number of individual error messages kept in a report.
const MAX_REPORTED_ERRORS: usize = 20;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid column map: {0}")]
    ColumnMap(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestOptions {
    pub columns: ColumnMap,
    pub week_rollover: WeekRollover,
}

/// Per-run parse accounting. `lines_read == records_ok + skipped + errors`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub lines_read: usize,
    pub records_ok: usize,
    pub skipped: usize,
    pub skipped_by_reason: BTreeMap<String, usize>,
    pub errors_by_kind: BTreeMap<String, usize>,
    pub first_errors: Vec<String>,
}

impl IngestReport {
    pub fn error_count(&self) -> usize {
        self.errors_by_kind.values().sum()
    }

    fn record_line(&mut self, outcome: &Result<ParsedLine, ParseError>, source: &str) {
        self.lines_read += 1;
        match outcome {
            Ok(ParsedLine::Record(_)) => self.records_ok += 1,
            Ok(ParsedLine::Skip(reason)) => {
                self.skipped += 1;
                *self
                    .skipped_by_reason
                    .entry(reason.as_str().to_owned())
                    .or_default() += 1;
            }
            Err(e) => {
                *self.errors_by_kind.entry(e.kind.as_str().to_owned()).or_default() += 1;
                if self.first_errors.len() < MAX_REPORTED_ERRORS {
                    self.first_errors.push(format!("{source}: {e}"));
                }
            }
        }
    }

    pub fn merge(&mut self, other: &IngestReport) {
        self.lines_read += other.lines_read;
        self.records_ok += other.records_ok;
        self.skipped += other.skipped;
        for (k, v) in &other.skipped_by_reason {
            *self.skipped_by_reason.entry(k.clone()).or_default() += v;
        }
        for (k, v) in &other.errors_by_kind {
            *self.errors_by_kind.entry(k.clone()).or_default() += v;
        }
        for e in &other.first_errors {
            if self.first_errors.len() < MAX_REPORTED_ERRORS {
                self.first_errors.push(e.clone());
            }
        }
    }
}

/// Records from one input, in file order.
#[derive(Debug, Clone, Default)]
pub struct FileIngest {
    pub records: Vec<RawIsmrRecord>,
    pub report: IngestReport,
}

/// Parses every line of `reader`. `source` labels error messages.
pub fn ingest_reader<R: BufRead>(
    reader: R,
    source: &str,
    options: &IngestOptions,
) -> std::io::Result<FileIngest> {
    let mut out = FileIngest::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let outcome = parse_ismr_line(&line, i + 1, &options.columns, options.week_rollover);
        out.report.record_line(&outcome, source);
        if let Ok(ParsedLine::Record(r)) = outcome {
            out.records.push(r);
        }
    }
    Ok(out)
}

/// Opens a plain or gzip-compressed ISMR file (detected by magic bytes).
pub fn open_ismr(path: &Path) -> Result<Box<dyn BufRead + Send>, IngestError> {
    let io_err = |source| IngestError::Io {
        path: path.to_owned(),
        source,
    };
    let mut file = File::open(path).map_err(io_err)?;
    let mut magic = [0u8; 2];
    let n = file.read(&mut magic).map_err(io_err)?;
    let file = File::open(path).map_err(io_err)?;
    if n == 2 && magic == [0x1f, 0x8b] {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(file))))
    } else {
        Ok(Box::new(BufReader::new(file)))
    }
}

pub fn ingest_file(path: &Path, options: &IngestOptions) -> Result<FileIngest, IngestError> {
    let reader = open_ismr(path)?;
    ingest_reader(reader, &path.display().to_string(), options).map_err(|source| {
        IngestError::Io {
            path: path.to_owned(),
            source,
        }
    })
}

/// Parses files in parallel. Output keeps file order and per-file line order.
pub fn ingest_files(
    paths: &[PathBuf],
    options: &IngestOptions,
) -> Result<(Vec<RawIsmrRecord>, IngestReport), IngestError> {
    options.columns.validate().map_err(IngestError::ColumnMap)?;
    let per_file: Vec<FileIngest> = paths
        .par_iter()
        .map(|p| ingest_file(p, options))
        .collect::<Result<_, _>>()?;
    let mut records = Vec::with_capacity(per_file.iter().map(|f| f.records.len()).sum());
    let mut report = IngestReport::default();
    for f in per_file {
        report.merge(&f.report);
        records.extend(f.records);
    }
    Ok((records, report))
}

/// Keeps records with `elevation_deg >= threshold_deg`, preserving order.
pub fn apply_elevation_mask(
    records: impl IntoIterator<Item = RawIsmrRecord>,
    threshold_deg: f64,
) -> impl Iterator<Item = RawIsmrRecord> {
    records
        .into_iter()
        .filter(move |r| r.elevation_deg >= threshold_deg)
}

/// Keeps records from GPS, GLONASS, Galileo and BeiDou.
pub fn filter_constellations(
    records: impl IntoIterator<Item = RawIsmrRecord>,
) -> impl Iterator<Item = RawIsmrRecord> {
    records
        .into_iter()
        .filter(|r| svid_to_constellation(r.svid).is_tracked())
}
