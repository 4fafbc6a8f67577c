//! Feature vector assembly for a smoothed, index-joined sample.

use std::f64::consts::TAU;

use chrono::Datelike;

use crate::ingest::{Constellation, SECONDS_PER_DAY};
use crate::solar::SolarIndices;

use super::smooth::SmoothedSample;

/// Column order of every feature vector.
pub const FEATURE_SCHEMA: [&str; 15] = [
    "hour_sin",
    "hour_cos",
    "doy_sin",
    "doy_cos",
    "elevation_deg",
    "azimuth_sin",
    "azimuth_cos",
    "is_gps",
    "is_glonass",
    "is_galileo",
    "is_beidou",
    "svid",
    "kp_daily_avg",
    "ssn",
    "f10_7",
];

pub const N_FEATURES: usize = FEATURE_SCHEMA.len();

pub fn feature_schema() -> Vec<String> {
    FEATURE_SCHEMA.iter().map(|s| (*s).to_owned()).collect()
}

pub fn build_features(sample: &SmoothedSample, indices: &SolarIndices) -> [f64; N_FEATURES] {
    let t = sample.window_start_utc;
    let hour_phase = t.seconds_of_day() as f64 / SECONDS_PER_DAY as f64 * TAU;
    let date = t.date();
    let days_in_year = if date.leap_year() { 366.0 } else { 365.0 };
    let doy_phase = f64::from(date.ordinal0()) / days_in_year * TAU;
    let az = sample.mean_azimuth_deg.to_radians();

    let mut one_hot = [0.0; 4];
    if let Some(i) = sample.constellation.one_hot_index() {
        one_hot[i] = 1.0;
    }
    debug_assert!(sample.constellation != Constellation::Other);

    [
        hour_phase.sin(),
        hour_phase.cos(),
        doy_phase.sin(),
        doy_phase.cos(),
        sample.mean_elevation_deg,
        az.sin(),
        az.cos(),
        one_hot[0],
        one_hot[1],
        one_hot[2],
        one_hot[3],
        f64::from(sample.svid.0),
        indices.kp_daily_avg,
        indices.ssn,
        indices.f10_7,
    ]
}
