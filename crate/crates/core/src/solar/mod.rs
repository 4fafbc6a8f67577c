//! Daily space-weather indices (Kp, sunspot number, F10.7).
//!
//! Payloads follow the OMNIWeb plain listing: one row per day (or per hour
//! for sub-daily requests) of `YEAR DOY [HR] Kp*10 SSN F10.7`, fields split
//! on whitespace or commas. Lines that do not start with a four-digit year
//! (page headers, parameter legends, HTML) are ignored.

mod remote;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use remote::{IndexQuery, IndexSource, RemoteClient, CACHE_DIR_ENV, OMNIWEB_ENDPOINT};

#[derive(Debug, Error)]
pub enum SolarError {
    #[error("query range is empty: start {start} is after end {end}")]
    EmptyRange { start: NaiveDate, end: NaiveDate },
    #[error("network error: {0}")]
    Network(String),
    #[error("service returned HTTP {0}")]
    Service(u16),
    #[error("malformed payload at line {line}: {detail}")]
    MalformedPayload { line: usize, detail: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Indices for one UTC calendar day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolarIndices {
    pub date: NaiveDate,
    pub kp_daily_avg: f64,
    pub ssn: f64,
    pub f10_7: f64,
}

/// How Kp is encoded in the payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KpScale {
    /// Kp multiplied by ten (OMNI2 convention, e.g. `27` for 2.7).
    #[default]
    Tenths,
    Units,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolarParseStats {
    pub data_rows: usize,
    /// Rows dropped because a field held a fill value.
    pub sentinel_rows: usize,
    /// Days between the first and last date with no usable row.
    pub missing_days: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolarTable {
    entries: BTreeMap<NaiveDate, SolarIndices>,
    pub stats: SolarParseStats,
}

impl SolarTable {
    pub fn from_entries(entries: impl IntoIterator<Item = SolarIndices>) -> Self {
        let mut table = SolarTable::default();
        for e in entries {
            table.entries.insert(e.date, e);
        }
        table.stats.missing_days = table.count_missing_days();
        table
    }

    pub fn get(&self, date: NaiveDate) -> Option<&SolarIndices> {
        self.entries.get(&date)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &SolarIndices> {
        self.entries.values()
    }

    /// Restricts the table to `start..=end`.
    pub fn restrict(&self, start: NaiveDate, end: NaiveDate) -> SolarTable {
        let mut t = SolarTable::from_entries(self.entries.range(start..=end).map(|(_, v)| *v));
        t.stats.data_rows = self.stats.data_rows;
        t.stats.sentinel_rows = self.stats.sentinel_rows;
        t
    }

    fn count_missing_days(&self) -> usize {
        match (self.entries.keys().next(), self.entries.keys().next_back()) {
            (Some(first), Some(last)) => {
                let span = (*last - *first).num_days() as usize + 1;
                span - self.entries.len()
            }
            _ => 0,
        }
    }

    /// Writes the table in the same row layout the parser reads.
    pub fn to_text(&self) -> String {
        let mut out = String::from("YEAR DOY KP SSN F10.7\n");
        for e in self.iter() {
            use chrono::Datelike;
            out.push_str(&format!(
                "{} {:03} {} {} {}\n",
                e.date.year(),
                e.date.ordinal(),
                e.kp_daily_avg,
                e.ssn,
                e.f10_7
            ));
        }
        out
    }
}

const KP_FILL_TENTHS: f64 = 99.0;
const SSN_FILL: f64 = 999.0;
const F107_FILL: f64 = 999.9;

fn is_year_token(tok: &str) -> bool {
    tok.len() == 4 && tok.bytes().all(|b| b.is_ascii_digit())
}

#[derive(Default)]
struct DayAccumulator {
    kp_sum: f64,
    ssn_sum: f64,
    f107_sum: f64,
    rows: usize,
}

/// Parses an index payload into a per-day table. Sub-daily rows for the same
/// date are averaged, so 3-hourly Kp becomes a daily mean.
pub fn parse_omni_payload(payload: &str, kp_scale: KpScale) -> Result<SolarTable, SolarError> {
    let mut days: BTreeMap<NaiveDate, DayAccumulator> = BTreeMap::new();
    let mut stats = SolarParseStats::default();

    for (i, line) in payload.lines().enumerate() {
        let line_no = i + 1;
        let tokens: Vec<&str> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .collect();
        if tokens.first().is_none_or(|t| !is_year_token(t)) {
            continue;
        }
        let malformed = |detail: String| SolarError::MalformedPayload {
            line: line_no,
            detail,
        };
        let values = match tokens.len() {
            5 => &tokens[2..],
            6 => &tokens[3..],
            n => return Err(malformed(format!("expected 5 or 6 fields, found {n}"))),
        };
        let year: i32 = tokens[0].parse().map_err(|_| malformed("bad year".into()))?;
        let doy: u32 = tokens[1]
            .parse()
            .map_err(|_| malformed(format!("bad day of year `{}`", tokens[1])))?;
        let date = NaiveDate::from_yo_opt(year, doy)
            .ok_or_else(|| malformed(format!("day {doy} does not exist in {year}")))?;
        let mut nums = [0.0f64; 3];
        for (slot, tok) in nums.iter_mut().zip(values) {
            *slot = tok
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| malformed(format!("`{tok}` is not a number")))?;
        }
        let [kp_raw, ssn, f10_7] = nums;
        stats.data_rows += 1;

        let kp_fill = match kp_scale {
            KpScale::Tenths => KP_FILL_TENTHS,
            KpScale::Units => 9.9,
        };
        if kp_raw >= kp_fill || ssn >= SSN_FILL || f10_7 >= F107_FILL {
            stats.sentinel_rows += 1;
            continue;
        }
        let kp = match kp_scale {
            KpScale::Tenths => kp_raw / 10.0,
            KpScale::Units => kp_raw,
        };
        if !(0.0..=9.0).contains(&kp) {
            return Err(malformed(format!("Kp {kp} outside [0, 9]")));
        }
        if ssn < 0.0 {
            return Err(malformed(format!("negative sunspot number {ssn}")));
        }
        if f10_7 <= 0.0 {
            return Err(malformed(format!("non-positive F10.7 {f10_7}")));
        }
        let acc = days.entry(date).or_default();
        acc.kp_sum += kp;
        acc.ssn_sum += ssn;
        acc.f107_sum += f10_7;
        acc.rows += 1;
    }

    let mut table = SolarTable::from_entries(days.into_iter().map(|(date, acc)| {
        let n = acc.rows as f64;
        SolarIndices {
            date,
            kp_daily_avg: acc.kp_sum / n,
            ssn: acc.ssn_sum / n,
            f10_7: acc.f107_sum / n,
        }
    }));
    table.stats.data_rows = stats.data_rows;
    table.stats.sentinel_rows = stats.sentinel_rows;
    Ok(table)
}

/// Reads a local index file in the payload format.
pub fn read_local(path: &Path, kp_scale: KpScale) -> Result<SolarTable, SolarError> {
    let text = std::fs::read_to_string(path).map_err(|source| SolarError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_omni_payload(&text, kp_scale)
}
