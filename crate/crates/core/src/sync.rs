//! Capture synchronization checks: timestamp deltas between scene photos and
//! their environment maps, and the sun's apparent motion over that delay.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Apparent solar rotation, 15° per hour.
pub const DEG_PER_SECOND: f64 = 0.00417;
/// Roughly the sun's angular diameter; records above it are flagged.
pub const DEFAULT_THRESHOLD_DEG: f64 = 0.5;
pub const HISTOGRAM_BIN_SECONDS: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureRecord {
    pub scene: String,
    pub lighting: String,
    /// Seconds since the epoch.
    pub scene_timestamp: f64,
    pub envmap_timestamp: f64,
}

impl CaptureRecord {
    pub fn delta(&self) -> f64 {
        (self.scene_timestamp - self.envmap_timestamp).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolarShift {
    pub degrees: f64,
    /// Horizontal shift in equirectangular pixels.
    pub pixels: f64,
}

pub fn solar_displacement(dt: f64, envmap_width: usize) -> Result<SolarShift> {
    if !(dt.is_finite() && dt >= 0.0) {
        return Err(invalid(format!("time delta {dt} must be finite and non-negative")));
    }
    if envmap_width == 0 {
        return Err(invalid("envmap width must be at least 1"));
    }
    let degrees = dt * DEG_PER_SECOND;
    Ok(SolarShift {
        degrees,
        pixels: degrees / (360.0 / envmap_width as f64),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordShift {
    pub scene: String,
    pub lighting: String,
    pub dt: f64,
    pub degrees: f64,
    pub pixels: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyncReport {
    pub count: usize,
    pub median: f64,
    pub mean: f64,
    pub max: f64,
    pub envmap_width: usize,
    pub threshold_deg: f64,
    pub records: Vec<RecordShift>,
    pub histogram: Vec<HistogramBin>,
}

impl SyncReport {
    pub fn flagged(&self) -> impl Iterator<Item = &RecordShift> {
        self.records.iter().filter(|r| r.flagged)
    }
}

/// Even counts take the mean of the two central values.
fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

pub fn sync_stats(records: &[CaptureRecord], envmap_width: usize) -> Result<SyncReport> {
    sync_stats_with_threshold(records, envmap_width, DEFAULT_THRESHOLD_DEG)
}

pub fn sync_stats_with_threshold(
    records: &[CaptureRecord],
    envmap_width: usize,
    threshold_deg: f64,
) -> Result<SyncReport> {
    if records.is_empty() {
        return Err(invalid("no capture records"));
    }
    let mut shifts = Vec::with_capacity(records.len());
    for r in records {
        let dt = r.delta();
        let s = solar_displacement(dt, envmap_width)?;
        shifts.push(RecordShift {
            scene: r.scene.clone(),
            lighting: r.lighting.clone(),
            dt,
            degrees: s.degrees,
            pixels: s.pixels,
            flagged: s.degrees > threshold_deg,
        });
    }
    let mut sorted: Vec<f64> = shifts.iter().map(|s| s.dt).collect();
    sorted.sort_by(f64::total_cmp);
    let max = *sorted.last().expect("non-empty");
    // Summing in sorted order keeps the mean independent of input order.
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    let bins = (max / HISTOGRAM_BIN_SECONDS).floor() as usize + 1;
    let mut histogram: Vec<HistogramBin> = (0..bins)
        .map(|i| HistogramBin {
            lo: i as f64 * HISTOGRAM_BIN_SECONDS,
            hi: (i + 1) as f64 * HISTOGRAM_BIN_SECONDS,
            count: 0,
        })
        .collect();
    for dt in &sorted {
        histogram[(dt / HISTOGRAM_BIN_SECONDS).floor() as usize].count += 1;
    }
    Ok(SyncReport {
        count: records.len(),
        median: median(&sorted),
        mean,
        max,
        envmap_width,
        threshold_deg,
        records: shifts,
        histogram,
    })
}

/// Summary lines followed by one row per record.
pub fn write_sync_csv(path: impl AsRef<Path>, report: &SyncReport) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path.as_ref())?);
    writeln!(out, "statistic,seconds")?;
    writeln!(out, "median,{:.2}", report.median)?;
    writeln!(out, "mean,{:.2}", report.mean)?;
    writeln!(out, "max,{:.2}", report.max)?;
    writeln!(out)?;
    writeln!(out, "scene,lighting,dt_s,theta_deg,pixel_shift,flagged")?;
    for r in &report.records {
        writeln!(
            out,
            "{},{},{},{:.5},{:.5},{}",
            r.scene, r.lighting, r.dt, r.degrees, r.pixels, r.flagged
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_histogram_csv(path: impl AsRef<Path>, report: &SyncReport) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path.as_ref())?);
    writeln!(out, "bin_lo_s,bin_hi_s,count")?;
    for b in &report.histogram {
        writeln!(out, "{},{},{}", b.lo, b.hi, b.count)?;
    }
    out.flush()?;
    Ok(())
}

/// Minimal bar chart of the delta histogram.
pub fn histogram_svg(report: &SyncReport) -> String {
    const BAR: f64 = 40.0;
    const HEIGHT: f64 = 200.0;
    const MARGIN: f64 = 30.0;
    let peak = report.histogram.iter().map(|b| b.count).max().unwrap_or(0).max(1) as f64;
    let width = report.histogram.len() as f64 * BAR + 2.0 * MARGIN;
    let total_h = HEIGHT + 2.0 * MARGIN;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{total_h}\" viewBox=\"0 0 {width} {total_h}\">\n"
    );
    svg.push_str(&format!(
        "<text x=\"{MARGIN}\" y=\"18\" font-size=\"12\">capture time delta (s), {} records</text>\n",
        report.count
    ));
    for (i, b) in report.histogram.iter().enumerate() {
        let h = b.count as f64 / peak * HEIGHT;
        let x = MARGIN + i as f64 * BAR;
        let y = MARGIN + HEIGHT - h;
        svg.push_str(&format!(
            "<rect x=\"{x}\" y=\"{y}\" width=\"{}\" height=\"{h}\" fill=\"#4a78b0\"><title>{}-{} s: {}</title></rect>\n",
            BAR - 4.0,
            b.lo,
            b.hi,
            b.count
        ));
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{}\" font-size=\"10\">{}</text>\n",
            MARGIN + HEIGHT + 14.0,
            b.lo
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn write_histogram_svg(path: impl AsRef<Path>, report: &SyncReport) -> Result<()> {
    std::fs::write(path.as_ref(), histogram_svg(report))?;
    Ok(())
}
