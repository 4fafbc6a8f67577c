//! Plot-ready CSV tables derived from an evaluation report.
//!
//! `confusion_heatmap.csv`: `true_class,predicted_class,count`, one row per
//! cell, classes numbered from 1, truth-major order.
//!
//! `class_metrics.csv`: `class,precision,recall`, one row per class. A ratio
//! with a zero denominator is written as `undefined`.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use scint_core::eval::{format_optional, ConfusionMatrix, EvalReport};

pub const HEATMAP_FILE: &str = "confusion_heatmap.csv";
pub const BARS_FILE: &str = "class_metrics.csv";

fn invalid(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

pub fn write_heatmap<W: Write>(report: &EvalReport, writer: W) -> io::Result<()> {
    report.matrix.write_csv(writer).map_err(io::Error::other)
}

pub fn write_bars<W: Write>(report: &EvalReport, mut writer: W) -> io::Result<()> {
    writeln!(writer, "class,precision,recall")?;
    for (c, (p, r)) in report
        .per_class_precision
        .iter()
        .zip(&report.per_class_recall)
        .enumerate()
    {
        writeln!(writer, "{},{},{}", c + 1, format_optional(*p), format_optional(*r))?;
    }
    Ok(())
}

/// Writes both tables into `dir`.
pub fn emit_plot_data(report: &EvalReport, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    write_heatmap(report, fs::File::create(dir.join(HEATMAP_FILE))?)?;
    write_bars(report, fs::File::create(dir.join(BARS_FILE))?)
}

pub fn read_heatmap<R: Read>(reader: R) -> io::Result<ConfusionMatrix> {
    let mut cells = Vec::new();
    let mut rdr = csv::Reader::from_reader(reader);
    for rec in rdr.records() {
        let rec = rec.map_err(io::Error::other)?;
        let num = |i: usize| -> io::Result<u64> {
            rec.get(i)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| invalid(format!("bad heatmap row {rec:?}")))
        };
        cells.push((num(0)? as usize, num(1)? as usize, num(2)?));
    }
    let k = cells.iter().map(|c| c.0.max(c.1)).max().unwrap_or(0);
    let mut counts = vec![vec![0; k]; k];
    for (t, p, n) in cells {
        if t == 0 || p == 0 {
            return Err(invalid("class numbers start at 1"));
        }
        counts[t - 1][p - 1] = n;
    }
    ConfusionMatrix::from_counts(counts).map_err(io::Error::other)
}

fn parse_optional(v: &str) -> io::Result<Option<f64>> {
    if v == "undefined" {
        Ok(None)
    } else {
        v.parse().map(Some).map_err(|_| invalid(format!("bad value `{v}`")))
    }
}

/// Per-class `(precision, recall)` in class order.
pub fn read_bars<R: Read>(reader: R) -> io::Result<Vec<(Option<f64>, Option<f64>)>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(io::Error::other)?;
        if rec.len() != 3 {
            return Err(invalid(format!("bad bars row {rec:?}")));
        }
        out.push((parse_optional(&rec[1])?, parse_optional(&rec[2])?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use scint_core::eval::{confusion, metrics};

    #[test]
    fn round_trip_reproduces_report() {
        let truth = [0, 0, 1, 1, 2, 2, 2, 0];
        let pred = [0, 1, 1, 1, 2, 0, 2, 0];
        let report = metrics(&confusion(&truth, &pred, 3).unwrap()).unwrap();
        let mut heat = Vec::new();
        write_heatmap(&report, &mut heat).unwrap();
        let mut bars = Vec::new();
        write_bars(&report, &mut bars).unwrap();
        assert_eq!(read_heatmap(&heat[..]).unwrap(), report.matrix);
        let back = read_bars(&bars[..]).unwrap();
        for (c, (p, r)) in back.iter().enumerate() {
            assert_eq!(*p, report.per_class_precision[c]);
            assert_eq!(*r, report.per_class_recall[c]);
        }
    }

    #[test]
    fn empty_class_writes_undefined() {
        let report = metrics(&confusion(&[0, 1], &[0, 0], 3).unwrap()).unwrap();
        let mut bars = Vec::new();
        write_bars(&report, &mut bars).unwrap();
        let text = String::from_utf8(bars).unwrap();
        assert_eq!(text.lines().nth(3).unwrap(), "3,undefined,undefined");
        assert!(!text.contains("NaN"));
    }
}
