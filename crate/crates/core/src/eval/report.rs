use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;

pub(crate) const LPIPS_REASON: &str = "learned perceptual metric not computed";
pub(crate) const SSIM_MODE: &str = "rgb_mean_gaussian11";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub scene: String,
    pub lighting: String,
    pub alpha: f64,
    pub degenerate: bool,
    pub psnr: f64,
    pub ssim: f64,
    pub valid_pixels: usize,
    pub lpips: Option<f64>,
    pub lpips_reason: String,
    pub ssim_mode: String,
}

impl MetricsReport {
    pub fn with_ids(mut self, scene: impl Into<String>, lighting: impl Into<String>) -> Self {
        self.scene = scene.into();
        self.lighting = lighting.into();
        self
    }
}

/// Means of alpha, PSNR and SSIM; pixel counts are summed.
pub fn aggregate(rows: &[MetricsReport]) -> Option<MetricsReport> {
    let first = rows.first()?;
    let n = rows.len() as f64;
    let mean = |f: fn(&MetricsReport) -> f64| rows.iter().map(f).sum::<f64>() / n;
    Some(MetricsReport {
        scene: "mean".into(),
        lighting: "*".into(),
        alpha: mean(|r| r.alpha),
        degenerate: rows.iter().any(|r| r.degenerate),
        psnr: mean(|r| r.psnr),
        ssim: mean(|r| r.ssim),
        valid_pixels: rows.iter().map(|r| r.valid_pixels).sum(),
        lpips: None,
        lpips_reason: first.lpips_reason.clone(),
        ssim_mode: first.ssim_mode.clone(),
    })
}

fn sorted(rows: &[MetricsReport]) -> Vec<MetricsReport> {
    let mut rows = rows.to_vec();
    rows.sort_by(|a, b| (&a.scene, &a.lighting).cmp(&(&b.scene, &b.lighting)));
    rows
}

/// One row per (scene, lighting) in key order, then the aggregate row.
pub fn write_reports_csv(path: impl AsRef<Path>, rows: &[MetricsReport]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path.as_ref())?);
    writeln!(out, "scene,lighting,alpha,degenerate,psnr,ssim,valid_pixels,lpips")?;
    let rows = sorted(rows);
    for r in rows.iter().chain(aggregate(&rows).as_ref()) {
        writeln!(
            out,
            "{},{},{},{},{:.6},{:.6},{},",
            r.scene, r.lighting, r.alpha, r.degenerate, r.psnr, r.ssim, r.valid_pixels
        )?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ReportFile<'a> {
    rows: &'a [MetricsReport],
    aggregate: Option<MetricsReport>,
}

pub fn write_reports_json(path: impl AsRef<Path>, rows: &[MetricsReport]) -> Result<()> {
    let rows = sorted(rows);
    let file = ReportFile {
        rows: &rows,
        aggregate: aggregate(&rows),
    };
    let text = serde_json::to_string_pretty(&file).map_err(std::io::Error::other)?;
    std::fs::write(path.as_ref(), text + "\n")?;
    Ok(())
}
