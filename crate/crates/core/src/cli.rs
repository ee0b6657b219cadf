//! Command-line surface. Every command prints one JSON summary line on
//! success; failures print `{"error": kind, "message": ...}` to stderr and
//! exit nonzero.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::envmap::{cached_assets, EnvAssets, EnvironmentMap};
use crate::error::{invalid, Error, Result};
use crate::eval::{evaluate_relight, leave_one_out_folds, write_reports_csv, write_reports_json, MetricsReport};
use crate::hdr_merge::{merge_exposures, ExposureFrame, ExposureStack};
use crate::imaging::{read_exr, read_mask_png, write_exr, write_mask_png, LinearImage, Mask};
use crate::inverse::{
    dps_sample, optimize_gbuffer, write_diagnostics_csv, DiffusionSchedule, GaussianPriorDenoiser, GuidanceConfig,
    ReferenceDecoder,
};
use crate::manifest::{Camera, SceneManifest};
use crate::math::Vec3;
use crate::renderer::{read_gbuffer_dir, render_forward, write_gbuffer_dir, GBuffer, ViewSetup};
use crate::sync::{sync_stats_with_threshold, write_histogram_csv, write_histogram_svg, write_sync_csv, DEFAULT_THRESHOLD_DEG};

/// Overrides the environment-asset cache directory.
pub const CACHE_DIR_ENV: &str = "RELIGHT_CACHE_DIR";
const DEFAULT_CACHE_DIR: &str = ".relight-cache";

#[derive(Debug, Parser)]
#[command(name = "relight", version, about = "HDR relighting toolkit")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InvertMode {
    Descent,
    Dps,
}

#[derive(Debug, clap::Args)]
pub struct CameraArgs {
    /// Pinhole focal length in pixels; omit for a shared view direction.
    #[arg(long)]
    pub focal: Option<f64>,
    /// Pinhole principal point `CX CY` in pixels (default: image centre).
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub principal: Option<Vec<f64>>,
}

impl CameraArgs {
    fn view(&self, width: usize, height: usize) -> Result<ViewSetup> {
        match self.focal {
            None => Ok(ViewSetup::default_for(width, height)),
            Some(focal) => {
                let p = match &self.principal {
                    Some(p) => [p[0], p[1]],
                    None => [width as f64 / 2.0, height as f64 / 2.0],
                };
                Camera::Pinhole { focal, principal: p }.view(width, height)
            }
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct EnvArgs {
    /// Equirectangular environment map (EXR, 2:1).
    #[arg(long)]
    pub envmap: PathBuf,
    /// Specular prefilter levels.
    #[arg(long, default_value_t = 5)]
    pub levels: usize,
    /// Asset cache directory (default: $RELIGHT_CACHE_DIR or ./.relight-cache).
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

impl EnvArgs {
    fn load(&self) -> Result<(EnvAssets, PathBuf, bool)> {
        let env = EnvironmentMap::new(read_exr(&self.envmap)?)?;
        cached_assets(&env, self.levels, cache_dir(self.cache_dir.as_deref()))
    }
}

fn cache_dir(flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(CACHE_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR))
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Merge an exposure stack into linear HDR radiance.
    Merge {
        /// Frame as `PATH@SECONDS`; values are normalized pixel codes in [0, 1].
        #[arg(long = "frame", required_unless_present = "manifest")]
        frames: Vec<String>,
        /// Merge every capture with exposures in this manifest instead.
        #[arg(long, conflicts_with = "frames")]
        manifest: Option<PathBuf>,
        /// Output EXR (single stack) or directory (manifest mode).
        #[arg(long)]
        out: PathBuf,
        /// Saturation mask PNG (single stack).
        #[arg(long)]
        saturation_mask: Option<PathBuf>,
    },
    /// Precompute and cache SH irradiance and the specular chain.
    BuildEnv {
        #[command(flatten)]
        env: EnvArgs,
    },
    /// Render a G-buffer under an environment map.
    Render {
        #[arg(long)]
        gbuffer: PathBuf,
        #[command(flatten)]
        env: EnvArgs,
        #[command(flatten)]
        camera: CameraArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recover a G-buffer from an observed image and its lighting.
    Invert {
        #[arg(long)]
        observed: PathBuf,
        #[command(flatten)]
        env: EnvArgs,
        #[command(flatten)]
        camera: CameraArgs,
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "descent")]
        mode: InvertMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for the G-buffer, render and logs.
        #[arg(long)]
        out_dir: PathBuf,
        /// Descent: starting G-buffer (default: seeded random).
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long, default_value_t = 500)]
        iters: usize,
        #[arg(long, default_value_t = 0.5)]
        step: f64,
        /// DPS: base guidance strength.
        #[arg(long, default_value_t = 0.2)]
        zeta: f64,
        /// DPS: latent gradient norm clip.
        #[arg(long, default_value_t = 10.0)]
        clip: f64,
        /// DPS: inference steps.
        #[arg(long, default_value_t = 50)]
        steps: usize,
        /// DPS: standard deviation of the Gaussian latent prior.
        #[arg(long, default_value_t = 1.0)]
        prior_sigma: f64,
    },
    /// Score predictions against ground truth.
    Eval {
        #[arg(long, required_unless_present = "manifest")]
        pred: Option<PathBuf>,
        #[arg(long, required_unless_present = "manifest")]
        gt: Option<PathBuf>,
        #[arg(long)]
        mask: Option<PathBuf>,
        /// Batch mode: ground truth and masks from the manifest captures.
        #[arg(long, conflicts_with_all = ["pred", "gt", "mask"])]
        manifest: Option<PathBuf>,
        /// Batch mode: directory holding `<lighting>.exr` predictions.
        #[arg(long, requires = "manifest")]
        predictions: Option<PathBuf>,
        #[arg(long, default_value = "scene")]
        scene: String,
        #[arg(long, default_value = "lighting")]
        lighting: String,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// List leave-one-lighting-out folds.
    Folds {
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Timestamp statistics and solar drift between photos and envmaps.
    ValidateSync {
        manifest: PathBuf,
        #[arg(long, default_value_t = 256)]
        width: usize,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD_DEG)]
        threshold_deg: f64,
        /// Directory for sync.csv, histogram.csv and histogram.svg.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

/// Parses `argv` and runs the command, reporting errors on stderr.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", json!({"error": "usage", "message": e.to_string().trim_end()}));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", json!({"error": e.kind(), "message": e.to_string()}));
            ExitCode::FAILURE
        }
    }
}

pub fn run(cli: Cli) -> Result<serde_json::Value> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(invalid("--jobs must be at least 1"));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| invalid(e.to_string()))?;
    pool.install(|| dispatch(cli.command))
}

fn dispatch(command: Command) -> Result<serde_json::Value> {
    match command {
        Command::Merge {
            frames,
            manifest,
            out,
            saturation_mask,
        } => match manifest {
            Some(m) => merge_manifest(&m, &out),
            None => merge_frames(&frames, &out, saturation_mask.as_deref()),
        },
        Command::BuildEnv { env } => {
            let (assets, path, hit) = env.load()?;
            Ok(json!({
                "command": "build-env",
                "hash": assets.content_hash,
                "levels": assets.levels(),
                "cache": path,
                "cache_hit": hit,
            }))
        }
        Command::Render {
            gbuffer,
            env,
            camera,
            out,
        } => {
            let g = read_gbuffer_dir(&gbuffer)?;
            let (assets, _, _) = env.load()?;
            let view = camera.view(g.width, g.height)?;
            write_exr(&out, &render_forward(&g, &assets, &view)?)?;
            Ok(json!({"command": "render", "out": out, "width": g.width, "height": g.height}))
        }
        Command::Invert {
            observed,
            env,
            camera,
            mask,
            mode,
            seed,
            out_dir,
            init,
            iters,
            step,
            zeta,
            clip,
            steps,
            prior_sigma,
        } => {
            let obs = read_exr(&observed)?;
            let (w, h) = obs.dims();
            let (assets, _, _) = env.load()?;
            let view = camera.view(w, h)?;
            let mask = mask.map(read_mask_png).transpose()?;
            std::fs::create_dir_all(&out_dir)?;
            let (g, loss, extra) = match mode {
                InvertMode::Descent => {
                    let start = match init {
                        Some(dir) => read_gbuffer_dir(dir)?,
                        None => random_gbuffer(w, h, &view, seed)?,
                    };
                    let r = optimize_gbuffer(&start, &assets, &view, &obs, mask.as_ref(), iters, step)?;
                    write_loss_csv(&out_dir.join("loss.csv"), &r.loss_history)?;
                    (r.gbuffer, r.final_loss, json!({"initial_loss": r.initial_loss, "iters": iters}))
                }
                InvertMode::Dps => {
                    let schedule = DiffusionSchedule::linear(1000, 1e-4, 0.02, steps)?;
                    let prior = GBuffer::uniform(w, h, [0.5; 3], [0.0, 0.0, 1.0], 0.5, 0.0)?;
                    let denoiser = GaussianPriorDenoiser::new(ReferenceDecoder::encode(&prior).data, prior_sigma)?;
                    let cfg = GuidanceConfig { zeta, clip, seed };
                    let out = dps_sample(&denoiser, &ReferenceDecoder, &assets, &view, &obs, mask.as_ref(), &cfg, &schedule)?;
                    write_diagnostics_csv(out_dir.join("diagnostics.csv"), &out.diagnostics)?;
                    let (b0, b1) = schedule.beta_range();
                    (
                        out.gbuffer,
                        out.final_loss,
                        json!({"train_steps": schedule.train_steps(), "inference_steps": steps, "beta": [b0, b1], "zeta": zeta}),
                    )
                }
            };
            write_gbuffer_dir(out_dir.join("gbuffer"), &g)?;
            write_exr(out_dir.join("render.exr"), &render_forward(&g, &assets, &view)?)?;
            Ok(json!({
                "command": "invert",
                "mode": match mode { InvertMode::Descent => "descent", InvertMode::Dps => "dps" },
                "seed": seed,
                "final_loss": loss,
                "out_dir": out_dir,
                "details": extra,
            }))
        }
        Command::Eval {
            pred,
            gt,
            mask,
            manifest,
            predictions,
            scene,
            lighting,
            csv,
            json: json_out,
        } => {
            let rows = match manifest {
                Some(m) => eval_manifest(&m, predictions.as_deref())?,
                None => {
                    let pred = read_exr(pred.expect("required by clap"))?;
                    let gt = read_exr(gt.expect("required by clap"))?;
                    let mask = mask.map(read_mask_png).transpose()?;
                    vec![evaluate_relight(&pred, &gt, mask.as_ref())?.with_ids(scene, lighting)]
                }
            };
            if let Some(p) = &csv {
                write_reports_csv(p, &rows)?;
            }
            if let Some(p) = &json_out {
                write_reports_json(p, &rows)?;
            }
            Ok(json!({"command": "eval", "rows": rows}))
        }
        Command::Folds { manifest, out } => {
            let m = SceneManifest::load(&manifest)?;
            let folds = leave_one_out_folds(&m.lighting_ids())?;
            let value = json!({"command": "folds", "scene": m.scene, "folds": folds});
            if let Some(p) = out {
                std::fs::write(p, serde_json::to_string_pretty(&value).map_err(std::io::Error::other)? + "\n")?;
            }
            Ok(value)
        }
        Command::ValidateSync {
            manifest,
            width,
            threshold_deg,
            out_dir,
        } => {
            let m = SceneManifest::load(&manifest)?;
            let report = sync_stats_with_threshold(&m.capture_records()?, width, threshold_deg)?;
            if let Some(dir) = &out_dir {
                std::fs::create_dir_all(dir)?;
                write_sync_csv(dir.join("sync.csv"), &report)?;
                write_histogram_csv(dir.join("histogram.csv"), &report)?;
                write_histogram_svg(dir.join("histogram.svg"), &report)?;
            }
            Ok(json!({
                "command": "validate-sync",
                "scene": m.scene,
                "count": report.count,
                "median_s": format!("{:.2}", report.median),
                "mean_s": format!("{:.2}", report.mean),
                "max_s": format!("{:.2}", report.max),
                "flagged": report.flagged().count(),
            }))
        }
    }
}

fn parse_frame(spec: &str) -> Result<(PathBuf, f64)> {
    let (path, t) = spec
        .rsplit_once('@')
        .ok_or_else(|| invalid(format!("frame `{spec}` must look like PATH@SECONDS")))?;
    let t: f64 = t
        .parse()
        .map_err(|_| invalid(format!("frame `{spec}`: bad exposure time `{t}`")))?;
    Ok((PathBuf::from(path), t))
}

fn merge_stack(frames: &[(PathBuf, f64)]) -> Result<(LinearImage, Mask)> {
    let frames = frames
        .iter()
        .map(|(p, t)| ExposureFrame::new(read_exr(p)?, *t))
        .collect::<Result<Vec<_>>>()?;
    let r = merge_exposures(&ExposureStack::new(frames)?)?;
    Ok((r.radiance, r.saturated))
}

fn merge_frames(specs: &[String], out: &Path, mask_out: Option<&Path>) -> Result<serde_json::Value> {
    let frames = specs.iter().map(|s| parse_frame(s)).collect::<Result<Vec<_>>>()?;
    let (radiance, saturated) = merge_stack(&frames)?;
    write_exr(out, &radiance)?;
    if let Some(p) = mask_out {
        write_mask_png(p, &saturated)?;
    }
    Ok(json!({"command": "merge", "out": out, "saturated_pixels": saturated.count()}))
}

/// One job per capture; outputs are `<lighting>.exr` and `<lighting>_saturation.png`.
fn merge_manifest(manifest: &Path, out_dir: &Path) -> Result<serde_json::Value> {
    let m = SceneManifest::load(manifest)?;
    std::fs::create_dir_all(out_dir)?;
    let results = m
        .captures
        .par_iter()
        .filter(|c| !c.exposures.is_empty())
        .map(|c| {
            let frames: Vec<(PathBuf, f64)> = c.exposures.iter().map(|e| (e.path.clone(), e.exposure_s)).collect();
            let (radiance, saturated) = merge_stack(&frames)?;
            write_exr(out_dir.join(format!("{}.exr", c.lighting)), &radiance)?;
            write_mask_png(out_dir.join(format!("{}_saturation.png", c.lighting)), &saturated)?;
            Ok(json!({"lighting": c.lighting, "saturated_pixels": saturated.count()}))
        })
        .collect::<Result<Vec<_>>>()?;
    if results.is_empty() {
        return Err(invalid("manifest has no captures with exposures"));
    }
    Ok(json!({"command": "merge", "scene": m.scene, "captures": results}))
}

fn eval_manifest(manifest: &Path, predictions: Option<&Path>) -> Result<Vec<MetricsReport>> {
    let m = SceneManifest::load(manifest)?;
    let pred_dir = predictions.ok_or_else(|| invalid("--predictions is required with --manifest"))?;
    m.captures
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let gt_path = c.image.as_ref().ok_or_else(|| Error::Manifest {
                path: format!("captures[{i}].image"),
                reason: "evaluation needs a ground-truth image".into(),
            })?;
            let gt = read_exr(gt_path)?;
            let pred = read_exr(pred_dir.join(format!("{}.exr", c.lighting)))?;
            let mask = c.mask.as_ref().map(read_mask_png).transpose()?;
            Ok(evaluate_relight(&pred, &gt, mask.as_ref())?.with_ids(&m.scene, &c.lighting))
        })
        .collect()
}

fn write_loss_csv(path: &Path, history: &[f64]) -> Result<()> {
    let mut text = String::from("iter,loss\n");
    for (i, l) in history.iter().enumerate() {
        text.push_str(&format!("{i},{l:e}\n"));
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Seeded random G-buffer with normals inside the visible hemisphere.
fn random_gbuffer(w: usize, h: usize, view: &ViewSetup, seed: u64) -> Result<GBuffer> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = w * h;
    let mut basecolor = Vec::with_capacity(n);
    let mut normal = Vec::with_capacity(n);
    let mut roughness = Vec::with_capacity(n);
    let mut metallic = Vec::with_capacity(n);
    for i in 0..n {
        basecolor.push([rng.random_range(0.05..0.95), rng.random_range(0.05..0.95), rng.random_range(0.05..0.95)]);
        let jitter = Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
        normal.push((view.direction(i) + jitter).normalized().to_array());
        roughness.push(rng.random_range(0.05..0.95));
        metallic.push(rng.random_range(0.0..1.0));
    }
    GBuffer::new(w, h, basecolor, normal, roughness, metallic)
}
