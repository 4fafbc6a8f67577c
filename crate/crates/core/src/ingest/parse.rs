//! Line-level ISMR parsing.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::constellation::SvId;
use super::time::{GnssTime, WeekRollover, SECONDS_PER_WEEK};

/// 1-based column positions of the fields the pipeline reads. The defaults
/// match the Septentrio ISMR layout (WN, TOW, SVID, RxState, Az, Elv, CN0,
/// S4 total, S4 correction, ...).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMap {
    pub week_number: usize,
    pub time_of_week: usize,
    pub svid: usize,
    pub azimuth: usize,
    pub elevation: usize,
    pub s4_total: usize,
    pub s4_noise: usize,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            week_number: 1,
            time_of_week: 2,
            svid: 3,
            azimuth: 5,
            elevation: 6,
            s4_total: 8,
            s4_noise: 9,
        }
    }
}

impl ColumnMap {
    fn entries(&self) -> [(&'static str, usize); 7] {
        [
            ("week_number", self.week_number),
            ("time_of_week", self.time_of_week),
            ("svid", self.svid),
            ("azimuth", self.azimuth),
            ("elevation", self.elevation),
            ("s4_total", self.s4_total),
            ("s4_noise", self.s4_noise),
        ]
    }

    pub fn validate(&self) -> Result<(), String> {
        let entries = self.entries();
        for (i, (name, col)) in entries.iter().enumerate() {
            if *col == 0 {
                return Err(format!("column `{name}` must be 1-based, got 0"));
            }
            if let Some((other, _)) = entries[..i].iter().find(|(_, c)| c == col) {
                return Err(format!("columns `{other}` and `{name}` both map to {col}"));
            }
        }
        Ok(())
    }

    pub fn max_column(&self) -> usize {
        self.entries().iter().map(|e| e.1).max().unwrap_or(0)
    }
}

/// One validated ISMR observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawIsmrRecord {
    pub time: GnssTime,
    pub svid: SvId,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub s4_total: f64,
    pub s4_noise: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    Blank,
    Comment,
    MissingS4,
}

impl SkipReason {
    pub fn as_str(self) -> &'static str {
        match self {
            SkipReason::Blank => "blank",
            SkipReason::Comment => "comment",
            SkipReason::MissingS4 => "missing_s4",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParsedLine {
    Record(RawIsmrRecord),
    Skip(SkipReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseErrorKind {
    MalformedField,
    MissingColumn,
    RangeViolation,
}

impl ParseErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ParseErrorKind::MalformedField => "malformed_field",
            ParseErrorKind::MissingColumn => "missing_column",
            ParseErrorKind::RangeViolation => "range_violation",
        }
    }
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}, column `{column}`: {kind}: {detail}")]
pub struct ParseError {
    pub line: usize,
    pub column: &'static str,
    pub kind: ParseErrorKind,
    pub detail: String,
}

struct LineCtx<'a> {
    line_no: usize,
    fields: Vec<&'a str>,
}

impl LineCtx<'_> {
    fn err(&self, column: &'static str, kind: ParseErrorKind, detail: String) -> ParseError {
        ParseError {
            line: self.line_no,
            column,
            kind,
            detail,
        }
    }

    /// Raw trimmed field, `None` when present but empty.
    fn field(&self, column: &'static str, index: usize) -> Result<Option<&str>, ParseError> {
        match self.fields.get(index - 1) {
            None => Err(self.err(
                column,
                ParseErrorKind::MissingColumn,
                format!("line has {} fields, need column {index}", self.fields.len()),
            )),
            Some(s) if s.trim().is_empty() => Ok(None),
            Some(s) => Ok(Some(s.trim())),
        }
    }

    fn required(&self, column: &'static str, index: usize) -> Result<&str, ParseError> {
        self.field(column, index)?.ok_or_else(|| {
            self.err(
                column,
                ParseErrorKind::MissingColumn,
                format!("column {index} is empty"),
            )
        })
    }

    fn number(&self, column: &'static str, raw: &str) -> Result<f64, ParseError> {
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.err(
                column,
                ParseErrorKind::MalformedField,
                format!("`{raw}` is not a finite number"),
            )),
        }
    }

    fn integer(&self, column: &'static str, raw: &str, max: f64) -> Result<u64, ParseError> {
        let v = self.number(column, raw)?;
        if v.fract() != 0.0 {
            return Err(self.err(
                column,
                ParseErrorKind::MalformedField,
                format!("`{raw}` is not an integer"),
            ));
        }
        if v < 0.0 || v > max {
            return Err(self.err(
                column,
                ParseErrorKind::RangeViolation,
                format!("{raw} outside [0, {max}]"),
            ));
        }
        Ok(v as u64)
    }
}

/// Parses one comma-separated ISMR line. `line_no` is 1-based and only used
/// for error locations.
pub fn parse_ismr_line(
    line: &str,
    line_no: usize,
    columns: &ColumnMap,
    rollover: WeekRollover,
) -> Result<ParsedLine, ParseError> {
    let trimmed = line.trim();
    if trimmed.is_empty() {
        return Ok(ParsedLine::Skip(SkipReason::Blank));
    }
    if trimmed.starts_with('#') || trimmed.starts_with('%') {
        return Ok(ParsedLine::Skip(SkipReason::Comment));
    }
    let ctx = LineCtx {
        line_no,
        fields: trimmed.split(',').collect(),
    };

    let week_raw = ctx.required("week_number", columns.week_number)?;
    let week = ctx.integer("week_number", week_raw, f64::from(u16::MAX))? as u32;
    let tow_raw = ctx.required("time_of_week", columns.time_of_week)?;
    let tow = ctx.integer("time_of_week", tow_raw, f64::from(u32::MAX))?;
    if tow >= u64::from(SECONDS_PER_WEEK) {
        return Err(ctx.err(
            "time_of_week",
            ParseErrorKind::RangeViolation,
            format!("{tow} is not below {SECONDS_PER_WEEK}"),
        ));
    }
    let time = GnssTime::new(rollover.repair(week), tow as u32)
        .map_err(|e| ctx.err("time_of_week", ParseErrorKind::RangeViolation, e.to_string()))?;

    let svid_raw = ctx.required("svid", columns.svid)?;
    let svid = SvId(ctx.integer("svid", svid_raw, f64::from(u16::MAX))? as u16);

    let az_raw = ctx.required("azimuth", columns.azimuth)?;
    let mut azimuth_deg = ctx.number("azimuth", az_raw)?.rem_euclid(360.0);
    if azimuth_deg >= 360.0 {
        azimuth_deg = 0.0;
    }

    let el_raw = ctx.required("elevation", columns.elevation)?;
    let elevation_deg = ctx.number("elevation", el_raw)?;
    if !(-90.0..=90.0).contains(&elevation_deg) {
        return Err(ctx.err(
            "elevation",
            ParseErrorKind::RangeViolation,
            format!("{elevation_deg} outside [-90, 90]"),
        ));
    }

    let total_raw = ctx.field("s4_total", columns.s4_total)?;
    let noise_raw = ctx.field("s4_noise", columns.s4_noise)?;
    let (Some(total_raw), Some(noise_raw)) = (total_raw, noise_raw) else {
        return Ok(ParsedLine::Skip(SkipReason::MissingS4));
    };
    let s4_total = ctx.number("s4_total", total_raw)?;
    let s4_noise = ctx.number("s4_noise", noise_raw)?;
    for (name, v) in [("s4_total", s4_total), ("s4_noise", s4_noise)] {
        if v < 0.0 {
            return Err(ctx.err(name, ParseErrorKind::RangeViolation, format!("{v} is negative")));
        }
    }

    Ok(ParsedLine::Record(RawIsmrRecord {
        time,
        svid,
        azimuth_deg,
        elevation_deg,
        s4_total,
        s4_noise,
    }))
}
