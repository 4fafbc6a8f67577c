//! Per-satellite tumbling-window averaging.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{
    gps_to_utc_auto, svid_to_constellation, Constellation, RawIsmrRecord, SvId, TimeError,
    UtcTimestamp,
};

use super::s4::correct_s4;

pub const DEFAULT_WINDOW_SECONDS: i64 = 300;
pub const DEFAULT_MIN_WINDOW_SAMPLES: usize = 180;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectedObservation {
    pub utc: UtcTimestamp,
    pub svid: SvId,
    pub constellation: Constellation,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub s4_corrected: f64,
}

impl CorrectedObservation {
    /// Applies the S4 noise correction and the table-driven UTC conversion.
    pub fn from_record(r: &RawIsmrRecord) -> Result<Self, TimeError> {
        Ok(Self {
            utc: gps_to_utc_auto(r.time)?,
            svid: r.svid,
            constellation: svid_to_constellation(r.svid),
            azimuth_deg: r.azimuth_deg,
            elevation_deg: r.elevation_deg,
            s4_corrected: correct_s4(r.s4_total, r.s4_noise),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothedSample {
    pub window_start_utc: UtcTimestamp,
    pub svid: SvId,
    pub constellation: Constellation,
    pub mean_elevation_deg: f64,
    pub mean_azimuth_deg: f64,
    pub mean_s4: f64,
    pub sample_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmoothError {
    #[error("observations must be sorted by (svid, utc); violated at index {index}")]
    UnsortedInput { index: usize },
    #[error("window length must be positive, got {0} s")]
    BadWindow(i64),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SmoothOutput {
    pub samples: Vec<SmoothedSample>,
    /// Windows discarded for having fewer than the minimum sample count.
    pub dropped_windows: usize,
}

/// Circular mean of angles in degrees, mapped to `[0, 360)`.
pub fn circular_mean_deg(angles: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut c, mut n) = (0.0, 0.0, 0usize);
    for a in angles {
        let r = a.to_radians();
        s += r.sin();
        c += r.cos();
        n += 1;
    }
    if n == 0 {
        return 0.0;
    }
    let mean = (s / n as f64).atan2(c / n as f64).to_degrees();
    let wrapped = mean.rem_euclid(360.0);
    if wrapped >= 360.0 {
        0.0
    } else {
        wrapped
    }
}

/// Start of the window containing `t`; windows are aligned to UTC midnight.
pub fn window_start(t: UtcTimestamp, window_s: i64) -> UtcTimestamp {
    let sod = t.seconds_of_day();
    UtcTimestamp::from_unix_seconds(t.day_start().unix_seconds() + sod - sod % window_s)
}

fn summarize(window: &[CorrectedObservation], start: UtcTimestamp) -> SmoothedSample {
    let n = window.len() as f64;
    SmoothedSample {
        window_start_utc: start,
        svid: window[0].svid,
        constellation: window[0].constellation,
        mean_elevation_deg: window.iter().map(|o| o.elevation_deg).sum::<f64>() / n,
        mean_azimuth_deg: circular_mean_deg(window.iter().map(|o| o.azimuth_deg)),
        mean_s4: window.iter().map(|o| o.s4_corrected).sum::<f64>() / n,
        sample_count: window.len(),
    }
}

fn smooth_one_satellite(
    obs: &[CorrectedObservation],
    window_s: i64,
    min_samples: usize,
) -> (Vec<SmoothedSample>, usize) {
    let mut out = Vec::new();
    let mut dropped = 0;
    let mut begin = 0;
    while begin < obs.len() {
        let start = window_start(obs[begin].utc, window_s);
        let end = begin
            + obs[begin..]
                .iter()
                .take_while(|o| window_start(o.utc, window_s) == start)
                .count();
        let window = &obs[begin..end];
        if window.len() >= min_samples {
            out.push(summarize(window, start));
        } else {
            dropped += 1;
        }
        begin = end;
    }
    (out, dropped)
}

/// Averages observations over tumbling windows per satellite. Input must be
/// sorted by `(svid, utc)`; output follows the same order.
pub fn smooth_windows(
    obs: &[CorrectedObservation],
    window_s: i64,
    min_samples: usize,
) -> Result<SmoothOutput, SmoothError> {
    if window_s <= 0 {
        return Err(SmoothError::BadWindow(window_s));
    }
    if let Some(i) = obs
        .windows(2)
        .position(|w| (w[0].svid, w[0].utc) > (w[1].svid, w[1].utc))
    {
        return Err(SmoothError::UnsortedInput { index: i + 1 });
    }
    let mut groups = Vec::new();
    let mut begin = 0;
    for i in 1..=obs.len() {
        if i == obs.len() || obs[i].svid != obs[begin].svid {
            groups.push(&obs[begin..i]);
            begin = i;
        }
    }
    let per_sat: Vec<_> = groups
        .par_iter()
        .map(|g| smooth_one_satellite(g, window_s, min_samples))
        .collect();
    let mut out = SmoothOutput::default();
    for (samples, dropped) in per_sat {
        out.samples.extend(samples);
        out.dropped_windows += dropped;
    }
    Ok(out)
}

/// Stable sort into the order [`smooth_windows`] expects.
pub fn sort_for_smoothing(obs: &mut [CorrectedObservation]) {
    obs.sort_by_key(|o| (o.svid, o.utc));
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn obs(svid: u16, t: i64, az: f64, el: f64, s4: f64) -> CorrectedObservation {
        CorrectedObservation {
            utc: UtcTimestamp::from_unix_seconds(t),
            svid: SvId(svid),
            constellation: svid_to_constellation(SvId(svid)),
            azimuth_deg: az,
            elevation_deg: el,
            s4_corrected: s4,
        }
    }

    const DAY0: i64 = 1_588_636_800; // 2020-05-05T00:00:00Z

    #[test]
    fn constant_window() {
        let input: Vec<_> = (0..300).map(|i| obs(5, DAY0 + i, 10.0, 30.0, 0.1)).collect();
        let out = smooth_windows(&input, 300, 180).unwrap();
        assert_eq!(out.samples.len(), 1);
        let s = out.samples[0];
        assert!((s.mean_azimuth_deg - 10.0).abs() < 1e-9);
        assert!((s.mean_elevation_deg - 30.0).abs() < 1e-12);
        assert!((s.mean_s4 - 0.1).abs() < 1e-12);
        assert_eq!(s.sample_count, 300);
        assert_eq!(s.window_start_utc.unix_seconds(), DAY0);
    }

    #[test]
    fn circular_mean_wraps() {
        let m = circular_mean_deg([350.0, 10.0]);
        assert!(m.abs() < 1e-9 || (m - 360.0).abs() < 1e-9, "{m}");
        assert!(m < 360.0);
        assert!((circular_mean_deg([170.0, 190.0]) - 180.0).abs() < 1e-9);
    }

    #[test]
    fn sparse_windows_are_dropped() {
        let mut input: Vec<_> = (0..200).map(|i| obs(5, DAY0 + i, 0.0, 30.0, 0.1)).collect();
        input.extend((300..350).map(|i| obs(5, DAY0 + i, 0.0, 30.0, 0.1)));
        let out = smooth_windows(&input, 300, 180).unwrap();
        assert_eq!(out.samples.len(), 1);
        assert_eq!(out.dropped_windows, 1);
    }

    #[test]
    fn unsorted_input_is_rejected() {
        let input = vec![obs(5, DAY0 + 1, 0.0, 30.0, 0.1), obs(5, DAY0, 0.0, 30.0, 0.1)];
        assert_eq!(
            smooth_windows(&input, 300, 1),
            Err(SmoothError::UnsortedInput { index: 1 })
        );
        let input = vec![obs(6, DAY0, 0.0, 30.0, 0.1), obs(5, DAY0 + 5, 0.0, 30.0, 0.1)];
        assert!(smooth_windows(&input, 300, 1).is_err());
    }

    #[test]
    fn windows_align_to_midnight() {
        let t = UtcTimestamp::from_unix_seconds(DAY0 + 3 * 3600 + 7 * 60 + 13);
        assert_eq!(window_start(t, 300).unix_seconds(), DAY0 + 3 * 3600 + 5 * 60);
        // 7-minute windows restart at midnight rather than running across it.
        let late = UtcTimestamp::from_unix_seconds(DAY0 + 86_399);
        assert_eq!(window_start(late, 420).unix_seconds(), DAY0 + 86_100);
        let next = UtcTimestamp::from_unix_seconds(DAY0 + 86_400);
        assert_eq!(window_start(next, 420).unix_seconds(), DAY0 + 86_400);
    }

    /// Reference group-by over (svid, window) built with a BTreeMap.
    fn group_by_oracle(input: &[CorrectedObservation], min: usize) -> Vec<(u16, i64, usize, f64, f64, f64)> {
        let mut groups: BTreeMap<(u16, i64), Vec<CorrectedObservation>> = BTreeMap::new();
        for o in input {
            let t = o.utc.unix_seconds();
            let start = t - t.rem_euclid(300);
            groups.entry((o.svid.0, start)).or_default().push(*o);
        }
        groups
            .into_iter()
            .filter(|(_, v)| v.len() >= min)
            .map(|((sv, start), v)| {
                let n = v.len() as f64;
                let el = v.iter().map(|o| o.elevation_deg).sum::<f64>() / n;
                let s4 = v.iter().map(|o| o.s4_corrected).sum::<f64>() / n;
                let sx: f64 = v.iter().map(|o| o.azimuth_deg.to_radians().sin()).sum();
                let cx: f64 = v.iter().map(|o| o.azimuth_deg.to_radians().cos()).sum();
                let az = sx.atan2(cx).to_degrees().rem_euclid(360.0);
                (sv, start, v.len(), el, az, s4)
            })
            .collect()
    }

    #[test]
    fn interleaved_satellites_match_group_by() {
        let mut input = Vec::new();
        for i in 0..900 {
            for sv in [3u16, 45, 77] {
                if (i + i64::from(sv)) % 4 != 0 {
                    let f = (i as f64) * 0.37 + f64::from(sv);
                    input.push(obs(sv, DAY0 + i, f % 360.0, 20.0 + f % 60.0, (f % 7.0) / 10.0));
                }
            }
        }
        sort_for_smoothing(&mut input);
        let out = smooth_windows(&input, 300, 100).unwrap();
        let want = group_by_oracle(&input, 100);
        assert_eq!(out.samples.len(), want.len());
        for (s, w) in out.samples.iter().zip(&want) {
            assert_eq!((s.svid.0, s.window_start_utc.unix_seconds(), s.sample_count), (w.0, w.1, w.2));
            assert!((s.mean_elevation_deg - w.3).abs() < 1e-9);
            assert!((s.mean_azimuth_deg - w.4).abs() < 1e-9);
            assert!((s.mean_s4 - w.5).abs() < 1e-12);
        }
    }

    #[test]
    fn per_satellite_partition_commutes() {
        let mut input = Vec::new();
        for i in 0..1200 {
            for sv in [1u16, 2, 90] {
                input.push(obs(sv, DAY0 + i * 2, f64::from(sv), 40.0, 0.2));
            }
        }
        sort_for_smoothing(&mut input);
        let whole = smooth_windows(&input, 300, 10).unwrap().samples;
        let mut merged = Vec::new();
        for sv in [1u16, 2, 90] {
            let part: Vec<_> = input.iter().copied().filter(|o| o.svid.0 == sv).collect();
            merged.extend(smooth_windows(&part, 300, 10).unwrap().samples);
        }
        assert_eq!(whole, merged);
    }

    proptest! {
        #[test]
        fn circular_mean_rotates(angles in prop::collection::vec(0.0f64..80.0, 1..40), delta in 0.0f64..360.0) {
            let base = circular_mean_deg(angles.iter().copied());
            let rotated = circular_mean_deg(angles.iter().map(|a| (a + delta) % 360.0));
            let diff = (rotated - (base + delta)).rem_euclid(360.0);
            prop_assert!(diff < 1e-9 || 360.0 - diff < 1e-9, "diff {}", diff);
        }
    }
}
