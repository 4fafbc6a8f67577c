//! Synthetic ISMR logs with planted severity structure.
//!
//! Satellites follow sinusoidal elevation arcs with a linear azimuth sweep.
//! For every satellite and 5-minute window the generator draws a severity
//! class from a regime table indexed by hour-of-day bin, daily Kp level and
//! elevation band, then emits S4 samples whose noise-corrected window mean
//! falls inside that class's S4 range. The manifest records the table, so
//! how learnable the labels are is known by construction.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{Datelike, Duration, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{utc_to_gps, Constellation, UtcTimestamp, SECONDS_PER_DAY};
use crate::rng::{SeededRng, RNG_ALGORITHM};

pub const HOUR_BINS: usize = 4;
pub const KP_LEVELS: usize = 3;
pub const ELEVATION_BANDS: usize = 3;
pub const N_CLASSES: usize = 3;
const N_CELLS: usize = HOUR_BINS * KP_LEVELS * ELEVATION_BANDS;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SOLAR_FILE: &str = "solar_indices.txt";
pub const ISMR_DIR: &str = "ismr";

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth spec: {0}")]
    InvalidSpec(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> SynthError + '_ {
    move |source| SynthError::Io {
        path: path.to_owned(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SatelliteCounts {
    pub gps: u16,
    pub glonass: u16,
    pub galileo: u16,
    pub beidou: u16,
}

impl Default for SatelliteCounts {
    fn default() -> Self {
        Self {
            gps: 4,
            glonass: 4,
            galileo: 4,
            beidou: 4,
        }
    }
}

impl SatelliteCounts {
    /// Receiver SVIDs, numbered from the start of each constellation's range.
    pub fn svids(&self) -> Vec<u16> {
        let mut out = Vec::new();
        for (first, count) in [
            (1, self.gps),
            (38, self.glonass),
            (71, self.galileo),
            (141, self.beidou),
        ] {
            out.extend((0..count).map(|i| first + i));
        }
        out
    }

    fn validate(&self) -> Result<(), String> {
        let limits = [(self.gps, 37), (self.glonass, 31), (self.galileo, 36), (self.beidou, 40)];
        if limits.iter().any(|(n, max)| n > max) {
            return Err("more satellites than the constellation's SVID range holds".into());
        }
        if limits.iter().all(|(n, _)| *n == 0) {
            return Err("no satellites".into());
        }
        Ok(())
    }
}

/// Sinusoidal passes: `el(t) = peak * sin(2 pi t / period + phase)`, with the
/// satellite below the horizon on the negative half. Per-satellite period,
/// phase, peak and sweep rate are drawn from these ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoryModel {
    pub period_hours: [f64; 2],
    pub peak_elevation_deg: [f64; 2],
    pub azimuth_sweep_deg_per_hour: [f64; 2],
}

impl Default for TrajectoryModel {
    fn default() -> Self {
        Self {
            period_hours: [10.0, 14.0],
            peak_elevation_deg: [45.0, 89.0],
            azimuth_sweep_deg_per_hour: [10.0, 40.0],
        }
    }
}

/// Per-class S4 probabilities for each (hour bin, Kp level, elevation band)
/// cell, stored with the elevation band varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeTable {
    pub cells: Vec<[f64; N_CLASSES]>,
}

pub fn cell_index(hour_bin: usize, kp_level: usize, elevation_band: usize) -> usize {
    (hour_bin * KP_LEVELS + kp_level) * ELEVATION_BANDS + elevation_band
}

impl RegimeTable {
    pub fn from_fn(f: impl Fn(usize, usize, usize) -> [f64; N_CLASSES]) -> Self {
        let mut cells = Vec::with_capacity(N_CELLS);
        for h in 0..HOUR_BINS {
            for k in 0..KP_LEVELS {
                for e in 0..ELEVATION_BANDS {
                    cells.push(f(h, k, e));
                }
            }
        }
        Self { cells }
    }

    fn peaked(class: usize, purity: f64) -> [f64; N_CLASSES] {
        let rest = (1.0 - purity) / (N_CLASSES - 1) as f64;
        let mut p = [rest; N_CLASSES];
        p[class] = purity;
        p
    }

    /// Class `(hour_bin + kp_level + elevation_band) mod 3` with probability
    /// `purity`, the other two splitting the remainder. Not separable by any
    /// single feature.
    pub fn interaction(purity: f64) -> Self {
        Self::from_fn(|h, k, e| Self::peaked((h + k + e) % N_CLASSES, purity))
    }

    /// Class `(hour_bin + kp_level) mod 3` with probability `purity`.
    pub fn hour_kp(purity: f64) -> Self {
        Self::from_fn(|h, k, _| Self::peaked((h + k) % N_CLASSES, purity))
    }

    /// Always `class`.
    pub fn constant(class: usize) -> Self {
        Self::from_fn(|_, _, _| Self::peaked(class, 1.0))
    }

    pub fn probabilities(&self, hour_bin: usize, kp_level: usize, elevation_band: usize) -> [f64; N_CLASSES] {
        self.cells[cell_index(hour_bin, kp_level, elevation_band)]
    }

    fn validate(&self) -> Result<(), String> {
        if self.cells.len() != N_CELLS {
            return Err(format!("regime table needs {N_CELLS} cells, has {}", self.cells.len()));
        }
        for (i, p) in self.cells.iter().enumerate() {
            if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(format!("regime cell {i} has a probability outside [0, 1]"));
            }
            if (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(format!("regime cell {i} does not sum to 1"));
            }
        }
        Ok(())
    }

    /// Draws a class by inverting the cumulative distribution.
    pub fn sample(&self, cell: usize, rng: &mut SeededRng) -> usize {
        let u = rng.unit();
        let mut acc = 0.0;
        for (c, &p) in self.cells[cell].iter().enumerate() {
            acc += p;
            if u < acc {
                return c;
            }
        }
        // Rounding left `acc` just below 1; take the last class with mass.
        self.cells[cell].iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }
}

impl Default for RegimeTable {
    fn default() -> Self {
        Self::interaction(0.97)
    }
}

/// Daily space-weather series. Kp is drawn per day: a level uniformly from
/// `kp_level_ranges`, then a value uniformly within the level, in tenths.
/// Sunspot number follows a slow sinusoid with noise and F10.7 tracks it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolarSeriesModel {
    pub kp_level_ranges: [[f64; 2]; KP_LEVELS],
    pub ssn_mean: f64,
    pub ssn_amplitude: f64,
    pub ssn_period_days: f64,
    pub ssn_noise: f64,
    pub f10_7_base: f64,
    pub f10_7_per_ssn: f64,
    pub f10_7_noise: f64,
}

impl Default for SolarSeriesModel {
    fn default() -> Self {
        Self {
            kp_level_ranges: [[0.3, 1.7], [2.3, 3.7], [4.3, 6.0]],
            ssn_mean: 60.0,
            ssn_amplitude: 40.0,
            ssn_period_days: 27.0,
            ssn_noise: 8.0,
            f10_7_base: 65.0,
            f10_7_per_ssn: 0.6,
            f10_7_noise: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    pub start_date: NaiveDate,
    pub days: u32,
    /// Seconds between samples; must divide `window_seconds`.
    pub sample_interval_s: u32,
    /// Windows over which one class is drawn. Aligned to UTC midnight.
    pub window_seconds: u32,
    /// Samples below this elevation are not written.
    pub receiver_cutoff_deg: f64,
    /// Elevation mask the downstream pipeline applies. Elevation bands are
    /// decided on the mean elevation of samples at or above it.
    pub elevation_mask_deg: f64,
    pub satellites: SatelliteCounts,
    pub trajectory: TrajectoryModel,
    /// Upper edges of the first two Kp levels.
    pub kp_level_edges: [f64; 2],
    /// Upper edges of the first two elevation bands, in degrees.
    pub elevation_band_edges: [f64; 2],
    pub regimes: RegimeTable,
    /// Range of window-mean corrected S4 for each class.
    pub class_s4_ranges: [[f64; 2]; N_CLASSES],
    /// Half-width of per-sample S4 scatter around the window level.
    pub s4_jitter: f64,
    /// Range of the receiver noise term written alongside total S4.
    pub s4_noise_range: [f64; 2],
    pub solar: SolarSeriesModel,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seed: 1,
            start_date: NaiveDate::from_ymd_opt(2021, 3, 1).expect("valid date"),
            days: 30,
            sample_interval_s: 10,
            window_seconds: 300,
            receiver_cutoff_deg: 5.0,
            elevation_mask_deg: 20.0,
            satellites: SatelliteCounts::default(),
            trajectory: TrajectoryModel::default(),
            kp_level_edges: [2.0, 4.0],
            elevation_band_edges: [40.0, 60.0],
            regimes: RegimeTable::default(),
            class_s4_ranges: [[0.04, 0.16], [0.225, 0.275], [0.34, 0.6]],
            s4_jitter: 0.015,
            s4_noise_range: [0.01, 0.04],
            solar: SolarSeriesModel::default(),
        }
    }
}

fn check_range(name: &str, r: [f64; 2]) -> Result<(), String> {
    if r[0].is_finite() && r[1].is_finite() && r[0] <= r[1] {
        Ok(())
    } else {
        Err(format!("{name} must be an ordered finite range, got {r:?}"))
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        self.validate_inner().map_err(SynthError::InvalidSpec)
    }

    fn validate_inner(&self) -> Result<(), String> {
        if self.days == 0 {
            return Err("days must be positive".into());
        }
        if self.window_seconds == 0 || !(SECONDS_PER_DAY as u32).is_multiple_of(self.window_seconds) {
            return Err("window_seconds must divide one day".into());
        }
        if self.sample_interval_s == 0 || !self.window_seconds.is_multiple_of(self.sample_interval_s) {
            return Err("sample_interval_s must divide window_seconds".into());
        }
        self.satellites.validate()?;
        self.regimes.validate()?;
        check_range("trajectory.period_hours", self.trajectory.period_hours)?;
        check_range("trajectory.peak_elevation_deg", self.trajectory.peak_elevation_deg)?;
        check_range(
            "trajectory.azimuth_sweep_deg_per_hour",
            self.trajectory.azimuth_sweep_deg_per_hour,
        )?;
        if self.trajectory.period_hours[0] <= 0.0 {
            return Err("trajectory periods must be positive".into());
        }
        if self.trajectory.peak_elevation_deg[0] <= 0.0 || self.trajectory.peak_elevation_deg[1] > 90.0 {
            return Err("peak elevations must lie in (0, 90]".into());
        }
        check_range("kp_level_edges", self.kp_level_edges)?;
        check_range("elevation_band_edges", self.elevation_band_edges)?;
        for (c, r) in self.class_s4_ranges.iter().enumerate() {
            check_range(&format!("class_s4_ranges[{c}]"), *r)?;
            if r[0] - self.s4_jitter < 0.0 {
                return Err(format!("class {} S4 range minus jitter goes negative", c + 1));
            }
        }
        if !(self.s4_jitter >= 0.0) {
            return Err("s4_jitter must be >= 0".into());
        }
        check_range("s4_noise_range", self.s4_noise_range)?;
        if self.s4_noise_range[0] < 0.0 {
            return Err("s4_noise_range must be non-negative".into());
        }
        for (i, r) in self.solar.kp_level_ranges.iter().enumerate() {
            check_range(&format!("solar.kp_level_ranges[{i}]"), *r)?;
            if r[0] < 0.0 || r[1] > 9.0 {
                return Err("Kp ranges must lie in [0, 9]".into());
            }
        }
        Ok(())
    }

    pub fn hour_bin(&self, seconds_of_day: i64) -> usize {
        (seconds_of_day * HOUR_BINS as i64 / SECONDS_PER_DAY) as usize
    }

    pub fn kp_level(&self, kp: f64) -> usize {
        self.kp_level_edges.iter().filter(|&&e| kp >= e).count()
    }

    pub fn elevation_band(&self, elevation_deg: f64) -> usize {
        self.elevation_band_edges
            .iter()
            .filter(|&&e| elevation_deg >= e)
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailySolar {
    pub date: NaiveDate,
    pub kp: f64,
    pub kp_level: usize,
    pub ssn: f64,
    pub f10_7: f64,
}

/// Written next to the data as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub format: String,
    pub version: u32,
    pub rng_algorithm: String,
    pub spec: SynthSpec,
    /// Paths relative to the output directory.
    pub ismr_files: Vec<String>,
    pub solar_file: String,
    pub solar: Vec<DailySolar>,
    pub records_written: u64,
    /// Windows with at least one sample above the elevation mask, counted
    /// by planted class.
    pub window_class_counts: [u64; N_CLASSES],
}

impl SynthManifest {
    pub fn load(path: &Path) -> Result<Self, SynthError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| SynthError::InvalidSpec(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy)]
struct Satellite {
    svid: u16,
    period_s: f64,
    phase: f64,
    peak_deg: f64,
    azimuth0_deg: f64,
    sweep_deg_per_s: f64,
}

impl Satellite {
    /// Seconds are measured from the first day's midnight so passes continue
    /// smoothly across files.
    fn position(&self, t: f64) -> (f64, f64) {
        let el = self.peak_deg * (std::f64::consts::TAU * t / self.period_s + self.phase).sin();
        let az = (self.azimuth0_deg + self.sweep_deg_per_s * t).rem_euclid(360.0);
        (az, el)
    }
}

fn uniform(rng: &mut SeededRng, r: [f64; 2]) -> f64 {
    r[0] + (r[1] - r[0]) * rng.unit()
}

// Stream ids keep each random quantity independent of the others and of
// how many satellites or days are generated.
const STREAM_SATELLITES: u64 = 1 << 40;
const STREAM_SOLAR: u64 = 2 << 40;

fn satellites(spec: &SynthSpec) -> Vec<Satellite> {
    let tr = &spec.trajectory;
    spec.satellites
        .svids()
        .into_iter()
        .map(|svid| {
            let mut rng = SeededRng::derive(spec.seed, STREAM_SATELLITES + svid as u64);
            let period_s = uniform(&mut rng, tr.period_hours) * 3600.0;
            let phase = rng.unit() * std::f64::consts::TAU;
            let peak_deg = uniform(&mut rng, tr.peak_elevation_deg);
            let azimuth0_deg = rng.unit() * 360.0;
            let sign = if rng.below(2) == 0 { 1.0 } else { -1.0 };
            let sweep_deg_per_s = sign * uniform(&mut rng, tr.azimuth_sweep_deg_per_hour) / 3600.0;
            Satellite {
                svid,
                period_s,
                phase,
                peak_deg,
                azimuth0_deg,
                sweep_deg_per_s,
            }
        })
        .collect()
}

fn solar_series(spec: &SynthSpec) -> Vec<DailySolar> {
    let m = &spec.solar;
    let mut rng = SeededRng::derive(spec.seed, STREAM_SOLAR);
    (0..spec.days)
        .map(|d| {
            let date = spec.start_date + Duration::days(d as i64);
            let range = m.kp_level_ranges[rng.below(KP_LEVELS)];
            // Tenths, as the index service reports them.
            let kp = (uniform(&mut rng, range) * 10.0).round() / 10.0;
            let wave = (std::f64::consts::TAU * d as f64 / m.ssn_period_days).sin();
            let ssn = (m.ssn_mean + m.ssn_amplitude * wave + m.ssn_noise * (2.0 * rng.unit() - 1.0))
                .max(0.0)
                .round();
            let f10_7 = ((m.f10_7_base + m.f10_7_per_ssn * ssn + m.f10_7_noise * (2.0 * rng.unit() - 1.0))
                * 10.0)
                .round()
                / 10.0;
            DailySolar {
                date,
                kp,
                kp_level: spec.kp_level(kp),
                ssn,
                f10_7,
            }
        })
        .collect()
}

/// Index-service layout: `YEAR DOY HR KP SSN F10.7`, Kp in tenths.
fn solar_payload(series: &[DailySolar]) -> String {
    let mut out = String::from("YEAR DOY HR  1  2  3\n");
    for d in series {
        out.push_str(&format!(
            "{} {:3} {:2} {:2} {:3} {:5.1}\n",
            d.date.year(),
            d.date.ordinal(),
            0,
            (d.kp * 10.0).round() as i64,
            d.ssn as i64,
            d.f10_7
        ));
    }
    out
}

struct DayOutput {
    lines: Vec<(i64, u16, String)>,
    window_class_counts: [u64; N_CLASSES],
}

fn generate_day(spec: &SynthSpec, sats: &[Satellite], day: u32, solar: &DailySolar) -> DayOutput {
    let t0 = spec.start_date.and_hms_opt(0, 0, 0).expect("midnight").and_utc().timestamp();
    let day_start = t0 + day as i64 * SECONDS_PER_DAY;
    let window = spec.window_seconds as i64;
    let step = spec.sample_interval_s as i64;
    let per_window = (window / step) as usize;

    let mut lines = Vec::new();
    let mut counts = [0u64; N_CLASSES];
    for sat in sats {
        let mut rng = SeededRng::derive(spec.seed, ((day as u64) << 16) | sat.svid as u64);
        for w in 0..SECONDS_PER_DAY / window {
            let w_start = day_start + w * window;
            // Positions as written to the file, so bands match what is read.
            let mut samples: Vec<(i64, String, String, f64)> = Vec::with_capacity(per_window);
            for j in 0..per_window as i64 {
                let t = w_start + j * step;
                let (az, el) = sat.position((t - t0) as f64);
                if el < spec.receiver_cutoff_deg {
                    continue;
                }
                let el_text = format!("{el:.2}");
                let el_value: f64 = el_text.parse().expect("formatted float");
                samples.push((t, format!("{az:.2}"), el_text, el_value));
            }
            if samples.is_empty() {
                continue;
            }
            let masked: Vec<f64> = samples
                .iter()
                .map(|s| s.3)
                .filter(|&el| el >= spec.elevation_mask_deg)
                .collect();
            let band_elevation = if masked.is_empty() {
                samples.iter().map(|s| s.3).sum::<f64>() / samples.len() as f64
            } else {
                masked.iter().sum::<f64>() / masked.len() as f64
            };
            let cell = cell_index(
                spec.hour_bin(w * window),
                solar.kp_level,
                spec.elevation_band(band_elevation),
            );
            let class = spec.regimes.sample(cell, &mut rng);
            if !masked.is_empty() {
                counts[class] += 1;
            }
            let level = uniform(&mut rng, spec.class_s4_ranges[class]);
            for (t, az, el, _) in samples {
                let s4 = (level + spec.s4_jitter * (2.0 * rng.unit() - 1.0)).max(0.0);
                let noise = uniform(&mut rng, spec.s4_noise_range);
                let total = (s4 * s4 + noise * noise).sqrt();
                let gps = utc_to_gps(UtcTimestamp::from_unix_seconds(t)).expect("time after GPS epoch");
                lines.push((
                    t,
                    sat.svid,
                    format!(
                        "{},{},{},,{},{},,{:.3},{:.3}",
                        gps.week_number(),
                        gps.time_of_week(),
                        sat.svid,
                        az,
                        el,
                        total,
                        noise
                    ),
                ));
            }
        }
    }
    // Receivers log all satellites epoch by epoch.
    lines.sort_by_key(|(t, svid, _)| (*t, *svid));
    DayOutput {
        lines,
        window_class_counts: counts,
    }
}

/// File name for one UTC day of synthetic data.
pub fn ismr_file_name(date: NaiveDate) -> String {
    format!("SYN{}{:03}.ismr", date.year(), date.ordinal())
}

/// Writes ISMR files (one per UTC day), the solar index file and the
/// manifest under `out_dir`. The same spec always produces byte-identical
/// files.
pub fn generate(spec: &SynthSpec, out_dir: &Path) -> Result<SynthManifest, SynthError> {
    spec.validate()?;
    let ismr_dir = out_dir.join(ISMR_DIR);
    fs::create_dir_all(&ismr_dir).map_err(io_err(&ismr_dir))?;

    let sats = satellites(spec);
    let solar = solar_series(spec);
    let solar_path = out_dir.join(SOLAR_FILE);
    fs::write(&solar_path, solar_payload(&solar)).map_err(io_err(&solar_path))?;

    let results: Vec<Result<(String, u64, [u64; N_CLASSES]), SynthError>> = (0..spec.days)
        .into_par_iter()
        .map(|day| {
            let out = generate_day(spec, &sats, day, &solar[day as usize]);
            let name = ismr_file_name(solar[day as usize].date);
            let path = ismr_dir.join(&name);
            let file = fs::File::create(&path).map_err(io_err(&path))?;
            let mut w = BufWriter::new(file);
            let header = format!(
                "% synthetic ISMR log, seed {}, columns WN,TOW,SVID,,AZ,EL,,S4,S4_CORRECTION\n",
                spec.seed
            );
            w.write_all(header.as_bytes()).map_err(io_err(&path))?;
            for (_, _, line) in &out.lines {
                w.write_all(line.as_bytes()).map_err(io_err(&path))?;
                w.write_all(b"\n").map_err(io_err(&path))?;
            }
            w.flush().map_err(io_err(&path))?;
            Ok((format!("{ISMR_DIR}/{name}"), out.lines.len() as u64, out.window_class_counts))
        })
        .collect();

    let mut ismr_files = Vec::new();
    let mut records_written = 0;
    let mut window_class_counts = [0u64; N_CLASSES];
    for r in results {
        let (name, n, counts) = r?;
        ismr_files.push(name);
        records_written += n;
        for c in 0..N_CLASSES {
            window_class_counts[c] += counts[c];
        }
    }

    let manifest = SynthManifest {
        format: "scint-synth-manifest".into(),
        version: 1,
        rng_algorithm: RNG_ALGORITHM.into(),
        spec: spec.clone(),
        ismr_files,
        solar_file: SOLAR_FILE.into(),
        solar,
        records_written,
        window_class_counts,
    };
    let manifest_path = out_dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&manifest_path, text).map_err(io_err(&manifest_path))?;
    Ok(manifest)
}

/// Constellation of a generated SVID.
pub fn constellation_of(svid: u16) -> Constellation {
    crate::ingest::svid_to_constellation(crate::ingest::SvId(svid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{ingest_file, IngestOptions};
    use crate::solar::{read_local, KpScale};

    fn small() -> SynthSpec {
        SynthSpec {
            days: 2,
            sample_interval_s: 30,
            satellites: SatelliteCounts {
                gps: 2,
                glonass: 1,
                galileo: 1,
                beidou: 1,
            },
            ..Default::default()
        }
    }

    #[test]
    fn files_ingest_cleanly() {
        let dir = tempfile::tempdir().unwrap();
        let m = generate(&small(), dir.path()).unwrap();
        assert_eq!(m.ismr_files.len(), 2);
        let mut total = 0;
        for f in &m.ismr_files {
            let out = ingest_file(&dir.path().join(f), &IngestOptions::default()).unwrap();
            assert_eq!(out.report.error_count(), 0);
            total += out.records.len() as u64;
        }
        assert_eq!(total, m.records_written);
        let table = read_local(&dir.path().join(&m.solar_file), KpScale::Tenths).unwrap();
        assert_eq!(table.len(), 2);
        for d in &m.solar {
            let got = table.get(d.date).unwrap();
            assert_eq!((got.kp_daily_avg, got.ssn, got.f10_7), (d.kp, d.ssn, d.f10_7));
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let m = generate(&small(), a.path()).unwrap();
        generate(&small(), b.path()).unwrap();
        for f in m.ismr_files.iter().chain([&m.solar_file, &MANIFEST_FILE.to_string()]) {
            assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
        }
        let c = tempfile::tempdir().unwrap();
        generate(&SynthSpec { seed: 2, ..small() }, c.path()).unwrap();
        assert_ne!(
            fs::read(a.path().join(&m.ismr_files[0])).unwrap(),
            fs::read(c.path().join(&m.ismr_files[0])).unwrap()
        );
    }

    #[test]
    fn regime_sampling_matches_table() {
        let table = RegimeTable::from_fn(|_, _, _| [0.5, 0.3, 0.2]);
        let mut rng = SeededRng::new(11);
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[table.sample(0, &mut rng)] += 1;
        }
        for (c, p) in [0.5, 0.3, 0.2].into_iter().enumerate() {
            let se = (p * (1.0 - p) / n as f64).sqrt();
            let freq = counts[c] as f64 / n as f64;
            assert!((freq - p).abs() < 3.0 * se, "class {c}: {freq} vs {p}");
        }
    }

    #[test]
    fn constant_regime_yields_one_class() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthSpec {
            regimes: RegimeTable::constant(0),
            ..small()
        };
        let m = generate(&spec, dir.path()).unwrap();
        assert!(m.window_class_counts[0] > 0);
        assert_eq!(m.window_class_counts[1..], [0, 0]);
    }

    #[test]
    fn validation() {
        let bad = |f: fn(&mut SynthSpec)| {
            let mut s = small();
            f(&mut s);
            assert!(matches!(s.validate(), Err(SynthError::InvalidSpec(_))));
        };
        bad(|s| s.days = 0);
        bad(|s| s.sample_interval_s = 7);
        bad(|s| s.regimes.cells[3] = [0.5, 0.5, 0.5]);
        bad(|s| s.regimes.cells.pop().map(|_| ()).unwrap());
        bad(|s| s.satellites.gps = 40);
        assert!(small().validate().is_ok());
    }

    #[test]
    fn bins_and_bands() {
        let s = SynthSpec::default();
        assert_eq!(s.hour_bin(0), 0);
        assert_eq!(s.hour_bin(6 * 3600 - 1), 0);
        assert_eq!(s.hour_bin(6 * 3600), 1);
        assert_eq!(s.hour_bin(86_399), 3);
        assert_eq!(s.kp_level(1.9), 0);
        assert_eq!(s.kp_level(2.0), 1);
        assert_eq!(s.kp_level(5.0), 2);
        assert_eq!(s.elevation_band(20.0), 0);
        assert_eq!(s.elevation_band(40.0), 1);
        assert_eq!(s.elevation_band(89.0), 2);
    }

    #[test]
    fn svids_land_in_their_constellations() {
        let counts = SatelliteCounts::default();
        let sv = counts.svids();
        assert_eq!(sv.len(), 16);
        let tracked: Vec<_> = sv.iter().map(|&s| constellation_of(s)).collect();
        for c in Constellation::TRACKED {
            assert_eq!(tracked.iter().filter(|&&t| t == c).count(), 4);
        }
    }
}
