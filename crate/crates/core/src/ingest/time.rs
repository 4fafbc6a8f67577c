//! GPS week/time-of-week handling and conversion to UTC.

use std::fmt;
use std::sync::OnceLock;

use chrono::{DateTime, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SECONDS_PER_WEEK: u32 = 604_800;
pub const SECONDS_PER_DAY: i64 = 86_400;

/// 1980-01-06T00:00:00Z as seconds since the Unix epoch.
pub const GPS_EPOCH_UNIX: i64 = 315_964_800;

const LEAP_TABLE_SOURCE: &str = include_str!("leap_seconds.txt");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TimeError {
    #[error("time of week {0} s is outside [0, 604800)")]
    TimeOfWeekOutOfRange(u64),
    #[error("invalid time: {0}")]
    InvalidTime(String),
}

/// A GPS timestamp as continuous week number plus seconds into the week.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GnssTime {
    week_number: u32,
    time_of_week: u32,
}

impl GnssTime {
    pub fn new(week_number: u32, time_of_week: u32) -> Result<Self, TimeError> {
        if time_of_week >= SECONDS_PER_WEEK {
            return Err(TimeError::TimeOfWeekOutOfRange(time_of_week.into()));
        }
        Ok(Self {
            week_number,
            time_of_week,
        })
    }

    /// Splits seconds elapsed since the GPS epoch into week and time of week.
    pub fn from_gps_seconds(seconds: i64) -> Result<Self, TimeError> {
        if seconds < 0 {
            return Err(TimeError::InvalidTime(format!(
                "{seconds} s is before the GPS epoch"
            )));
        }
        let week = seconds / i64::from(SECONDS_PER_WEEK);
        let week = u32::try_from(week)
            .map_err(|_| TimeError::InvalidTime(format!("week {week} does not fit")))?;
        Ok(Self {
            week_number: week,
            time_of_week: (seconds % i64::from(SECONDS_PER_WEEK)) as u32,
        })
    }

    pub fn week_number(&self) -> u32 {
        self.week_number
    }

    pub fn time_of_week(&self) -> u32 {
        self.time_of_week
    }

    pub fn gps_seconds(&self) -> i64 {
        i64::from(self.week_number) * i64::from(SECONDS_PER_WEEK) + i64::from(self.time_of_week)
    }
}

/// How to interpret week numbers emitted by the receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum WeekRollover {
    /// Week numbers count continuously from the GPS epoch.
    #[default]
    Continuous,
    /// Week numbers are 10-bit (mod 1024). They are repaired to the unique
    /// week in `[pivot_week, pivot_week + 1024)` with the same residue.
    TenBit { pivot_week: u32 },
}

impl WeekRollover {
    pub fn repair(&self, week: u32) -> u32 {
        match *self {
            WeekRollover::Continuous => week,
            WeekRollover::TenBit { pivot_week } => {
                let residue = week % 1024;
                let base = pivot_week - pivot_week % 1024;
                let candidate = base + residue;
                if candidate < pivot_week {
                    candidate + 1024
                } else {
                    candidate
                }
            }
        }
    }
}

/// Whole seconds since 1970-01-01T00:00:00Z on the UTC scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UtcTimestamp(i64);

impl UtcTimestamp {
    pub fn from_unix_seconds(seconds: i64) -> Self {
        Self(seconds)
    }

    pub fn unix_seconds(&self) -> i64 {
        self.0
    }

    pub fn date(&self) -> NaiveDate {
        DateTime::from_timestamp(self.0, 0)
            .expect("timestamp within chrono range")
            .date_naive()
    }

    pub fn seconds_of_day(&self) -> i64 {
        self.0.rem_euclid(SECONDS_PER_DAY)
    }

    pub fn day_start(&self) -> UtcTimestamp {
        UtcTimestamp(self.0 - self.seconds_of_day())
    }
}

impl fmt::Display for UtcTimestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match DateTime::from_timestamp(self.0, 0) {
            Some(dt) => write!(f, "{}", dt.format("%Y-%m-%dT%H:%M:%SZ")),
            None => write!(f, "@{}", self.0),
        }
    }
}

/// Converts a GPS timestamp to UTC given the GPS-UTC offset:
/// `epoch + week * 604800 + tow - leap_seconds`.
pub fn gps_to_utc(time: GnssTime, leap_seconds: i64) -> Result<UtcTimestamp, TimeError> {
    if leap_seconds < 0 {
        return Err(TimeError::InvalidTime(format!(
            "negative leap second count {leap_seconds}"
        )));
    }
    let elapsed = time.gps_seconds();
    if leap_seconds > elapsed {
        return Err(TimeError::InvalidTime(format!(
            "{leap_seconds} leap seconds exceed {elapsed} s elapsed since the GPS epoch"
        )));
    }
    Ok(UtcTimestamp(GPS_EPOCH_UNIX + elapsed - leap_seconds))
}

/// [`gps_to_utc`] with the offset looked up from the bundled table.
pub fn gps_to_utc_auto(time: GnssTime) -> Result<UtcTimestamp, TimeError> {
    gps_to_utc(time, leap_seconds_at_gps(time.gps_seconds()))
}

/// Inverse of [`gps_to_utc_auto`].
pub fn utc_to_gps(utc: UtcTimestamp) -> Result<GnssTime, TimeError> {
    let leap = leap_seconds_at_utc(utc);
    GnssTime::from_gps_seconds(utc.0 - GPS_EPOCH_UNIX + leap)
}

#[derive(Debug, Clone, Copy)]
struct LeapEntry {
    effective_unix: i64,
    offset: i64,
}

fn leap_table() -> &'static [LeapEntry] {
    static TABLE: OnceLock<Vec<LeapEntry>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut entries = Vec::new();
        for line in LEAP_TABLE_SOURCE.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let date = parts
                .next()
                .and_then(|d| NaiveDate::parse_from_str(d, "%Y-%m-%d").ok())
                .expect("leap table date");
            let offset: i64 = parts
                .next()
                .and_then(|o| o.parse().ok())
                .expect("leap table offset");
            let effective_unix = date.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp();
            entries.push(LeapEntry {
                effective_unix,
                offset,
            });
        }
        assert!(
            entries
                .windows(2)
                .all(|w| w[0].effective_unix < w[1].effective_unix && w[0].offset < w[1].offset),
            "leap table must be strictly increasing"
        );
        entries
    })
}

/// GPS-UTC offset in force on `utc_date`. Dates before the GPS epoch get 0.
pub fn leap_seconds_for(utc_date: NaiveDate) -> i64 {
    let t = utc_date.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp();
    leap_seconds_at_utc(UtcTimestamp(t))
}

/// GPS-UTC offset in force at a UTC instant.
pub fn leap_seconds_at_utc(utc: UtcTimestamp) -> i64 {
    leap_table()
        .iter()
        .take_while(|e| e.effective_unix <= utc.0)
        .last()
        .map_or(0, |e| e.offset)
}

/// GPS-UTC offset in force at a GPS instant given as seconds since the GPS
/// epoch. An entry takes effect at GPS time `effective_utc + new_offset`.
pub fn leap_seconds_at_gps(gps_seconds: i64) -> i64 {
    leap_table()
        .iter()
        .take_while(|e| e.effective_unix - GPS_EPOCH_UNIX + e.offset <= gps_seconds)
        .last()
        .map_or(0, |e| e.offset)
}

/// Most recent offset in the bundled table.
pub fn latest_leap_seconds() -> i64 {
    leap_table().last().map_or(0, |e| e.offset)
}
