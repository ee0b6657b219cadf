//! C ABI over the `relight` library.
//!
//! Objects cross the boundary as opaque handles owned by the caller and
//! released with the matching `*_free`. Every fallible call returns a
//! [`RelightStatus`]; on failure [`relight_last_error`] describes it. Output
//! pointers are written only on success.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use relight::envmap::{EnvAssets, EnvironmentMap};
use relight::eval::evaluate_relight;
use relight::hdr_merge::{merge_exposures, ExposureFrame, ExposureStack};
use relight::imaging::{read_exr, write_exr};
use relight::renderer::{render_forward, GBuffer, ViewSetup};
use relight::sync::solar_displacement;
use relight::{Error, LinearImage, Mask};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelightStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidImage = 3,
    ShapeMismatch = 4,
    MissingFile = 5,
    MalformedFile = 6,
    EmptySelection = 7,
    NonFinite = 8,
    Manifest = 9,
    Io = 10,
    InvalidUtf8 = 11,
    Panic = 12,
}

impl From<&Error> for RelightStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidArgument(_) => Self::InvalidArgument,
            Error::InvalidImage(_) => Self::InvalidImage,
            Error::ShapeMismatch { .. } => Self::ShapeMismatch,
            Error::MissingFile(_) => Self::MissingFile,
            Error::Malformed { .. } => Self::MalformedFile,
            Error::EmptySelection => Self::EmptySelection,
            Error::NonFinite(_) => Self::NonFinite,
            Error::Manifest { .. } => Self::Manifest,
            Error::Io(_) => Self::Io,
        }
    }
}

/// Linear RGB image.
pub struct RelightImage(LinearImage);

/// Prefiltered environment: source map, SH irradiance and specular chain.
pub struct RelightEnv(EnvAssets);

/// Per-pixel material and geometry buffers.
pub struct RelightGBuffer(GBuffer);

/// Scale-aligned comparison of a prediction with ground truth.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RelightMetrics {
    pub alpha: f64,
    pub psnr: f64,
    pub ssim: f64,
    pub valid_pixels: usize,
    /// Nonzero when the prediction had no energy and `alpha` fell back to 1.
    pub degenerate: u8,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(RelightStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure((&e).into(), e.to_string())
    }
}

fn fail(status: RelightStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RelightStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RelightStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            RelightStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| fail(RelightStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| fail(RelightStatus::NullPointer, format!("{what} is null")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(RelightStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn path<'a>(p: *const c_char) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(RelightStatus::NullPointer, "path is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(RelightStatus::InvalidUtf8, "path is not valid UTF-8"))
}

fn triples(flat: &[f64]) -> Vec<[f64; 3]> {
    flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()
}

fn pixel_count(width: usize, height: usize) -> Result<usize, Failure> {
    width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(3).map(|_| n))
        .ok_or_else(|| fail(RelightStatus::InvalidArgument, "image dimensions overflow"))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn relight_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn relight_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies `width * height * 3` interleaved RGB doubles into a new image.
#[no_mangle]
pub unsafe extern "C" fn relight_image_new(
    width: usize,
    height: usize,
    rgb: *const f64,
    out_image: *mut *mut RelightImage,
) -> RelightStatus {
    guard(|| {
        let n = pixel_count(width, height)?;
        let data = slice(rgb, n * 3, "rgb")?;
        let img = LinearImage::new(width, height, triples(data))?;
        *out(out_image, "out_image")? = boxed(RelightImage(img));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn relight_image_read_exr(path_utf8: *const c_char, out_image: *mut *mut RelightImage) -> RelightStatus {
    guard(|| {
        let img = read_exr(path(path_utf8)?)?;
        *out(out_image, "out_image")? = boxed(RelightImage(img));
        Ok(())
    })
}

/// Writes the image as a 32-bit float RGB EXR.
#[no_mangle]
pub unsafe extern "C" fn relight_image_write_exr(image: *const RelightImage, path_utf8: *const c_char) -> RelightStatus {
    guard(|| {
        write_exr(path(path_utf8)?, &deref(image, "image")?.0)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn relight_image_size(
    image: *const RelightImage,
    out_width: *mut usize,
    out_height: *mut usize,
) -> RelightStatus {
    guard(|| {
        let (w, h) = deref(image, "image")?.0.dims();
        *out(out_width, "out_width")? = w;
        *out(out_height, "out_height")? = h;
        Ok(())
    })
}

/// Copies the pixels out as interleaved RGB; `len` must equal `width * height * 3`.
#[no_mangle]
pub unsafe extern "C" fn relight_image_read_pixels(image: *const RelightImage, rgb_out: *mut f64, len: usize) -> RelightStatus {
    guard(|| {
        let img = &deref(image, "image")?.0;
        let need = img.pixels().len() * 3;
        if len != need {
            return Err(fail(RelightStatus::ShapeMismatch, format!("buffer holds {len} values, image needs {need}")));
        }
        if rgb_out.is_null() {
            return Err(fail(RelightStatus::NullPointer, "rgb_out is null"));
        }
        let dst = std::slice::from_raw_parts_mut(rgb_out, len);
        for (d, s) in dst.chunks_exact_mut(3).zip(img.pixels()) {
            d.copy_from_slice(s);
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn relight_image_free(image: *mut RelightImage) {
    if !image.is_null() {
        drop(Box::from_raw(image));
    }
}

/// Merges `count` exposures of one scene into linear radiance.
///
/// `saturated_out` may be null; otherwise it receives `width * height` bytes,
/// 1 where no exposure was usable and the shortest one was kept.
#[no_mangle]
pub unsafe extern "C" fn relight_merge_exposures(
    frames: *const *const RelightImage,
    exposure_times: *const f64,
    count: usize,
    out_radiance: *mut *mut RelightImage,
    saturated_out: *mut u8,
) -> RelightStatus {
    guard(|| {
        let imgs = slice(frames, count, "frames")?;
        let times = slice(exposure_times, count, "exposure_times")?;
        let mut stack = Vec::with_capacity(count);
        for (i, (img, t)) in imgs.iter().zip(times).enumerate() {
            let img = deref(*img, &format!("frames[{i}]"))?;
            stack.push(ExposureFrame::new(img.0.clone(), *t)?);
        }
        let merged = merge_exposures(&ExposureStack::new(stack)?)?;
        let slot = out(out_radiance, "out_radiance")?;
        if !saturated_out.is_null() {
            let flags = merged.saturated.values();
            let dst = std::slice::from_raw_parts_mut(saturated_out, flags.len());
            for (d, s) in dst.iter_mut().zip(flags) {
                *d = *s as u8;
            }
        }
        *slot = boxed(RelightImage(merged.radiance));
        Ok(())
    })
}

/// Builds lighting assets from an equirectangular (+Y up) map with
/// `levels >= 2` specular mip levels.
#[no_mangle]
pub unsafe extern "C" fn relight_env_build(
    equirect: *const RelightImage,
    levels: usize,
    out_env: *mut *mut RelightEnv,
) -> RelightStatus {
    guard(|| {
        let source = EnvironmentMap::new(deref(equirect, "equirect")?.0.clone())?;
        let assets = EnvAssets::build(&source, levels)?;
        *out(out_env, "out_env")? = boxed(RelightEnv(assets));
        Ok(())
    })
}

/// Irradiance over π for unit normal `(nx, ny, nz)`, written to `rgb_out[3]`.
#[no_mangle]
pub unsafe extern "C" fn relight_env_irradiance(
    env: *const RelightEnv,
    nx: f64,
    ny: f64,
    nz: f64,
    rgb_out: *mut f64,
) -> RelightStatus {
    guard(|| {
        let env = deref(env, "env")?;
        if rgb_out.is_null() {
            return Err(fail(RelightStatus::NullPointer, "rgb_out is null"));
        }
        let n = relight::math::Vec3::new(nx, ny, nz);
        if n.length().is_nan() || n.length() == 0.0 {
            return Err(fail(RelightStatus::InvalidArgument, "normal has zero length"));
        }
        let e = env.0.irradiance(n.normalized()).to_array();
        std::slice::from_raw_parts_mut(rgb_out, 3).copy_from_slice(&e);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn relight_env_free(env: *mut RelightEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Copies per-pixel buffers: `basecolor` and `normal` hold `3 * width * height`
/// values, `roughness` and `metallic` hold `width * height`.
#[no_mangle]
pub unsafe extern "C" fn relight_gbuffer_new(
    width: usize,
    height: usize,
    basecolor: *const f64,
    normal: *const f64,
    roughness: *const f64,
    metallic: *const f64,
    out_gbuffer: *mut *mut RelightGBuffer,
) -> RelightStatus {
    guard(|| {
        let n = pixel_count(width, height)?;
        let g = GBuffer::new(
            width,
            height,
            triples(slice(basecolor, 3 * n, "basecolor")?),
            triples(slice(normal, 3 * n, "normal")?),
            slice(roughness, n, "roughness")?.to_vec(),
            slice(metallic, n, "metallic")?.to_vec(),
        )?;
        *out(out_gbuffer, "out_gbuffer")? = boxed(RelightGBuffer(g));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn relight_gbuffer_free(gbuffer: *mut RelightGBuffer) {
    if !gbuffer.is_null() {
        drop(Box::from_raw(gbuffer));
    }
}

/// Renders linear radiance. With `focal <= 0` every pixel is viewed along
/// +Z; otherwise a pinhole camera with principal point `(cx, cy)` in pixels.
#[no_mangle]
pub unsafe extern "C" fn relight_render(
    gbuffer: *const RelightGBuffer,
    env: *const RelightEnv,
    focal: f64,
    cx: f64,
    cy: f64,
    out_image: *mut *mut RelightImage,
) -> RelightStatus {
    guard(|| {
        let g = &deref(gbuffer, "gbuffer")?.0;
        let env = &deref(env, "env")?.0;
        let (w, h) = g.dims();
        let view = if focal > 0.0 {
            ViewSetup::pinhole(w, h, focal, [cx, cy])?
        } else {
            ViewSetup::default_for(w, h)
        };
        let img = render_forward(g, env, &view)?;
        *out(out_image, "out_image")? = boxed(RelightImage(img));
        Ok(())
    })
}

/// Scale-aligned PSNR and SSIM. `mask` may be null (all pixels valid);
/// otherwise it holds `width * height` bytes, nonzero marking valid pixels.
#[no_mangle]
pub unsafe extern "C" fn relight_evaluate(
    prediction: *const RelightImage,
    ground_truth: *const RelightImage,
    mask: *const u8,
    out_metrics: *mut RelightMetrics,
) -> RelightStatus {
    guard(|| {
        let pred = &deref(prediction, "prediction")?.0;
        let gt = &deref(ground_truth, "ground_truth")?.0;
        let mask = if mask.is_null() {
            None
        } else {
            let (w, h) = gt.dims();
            let bytes = std::slice::from_raw_parts(mask, w * h);
            Some(Mask::new(w, h, bytes.iter().map(|b| *b != 0).collect())?)
        };
        let r = evaluate_relight(pred, gt, mask.as_ref())?;
        *out(out_metrics, "out_metrics")? = RelightMetrics {
            alpha: r.alpha,
            psnr: r.psnr,
            ssim: r.ssim,
            valid_pixels: r.valid_pixels,
            degenerate: r.degenerate as u8,
        };
        Ok(())
    })
}

/// Apparent solar motion during a capture offset of `dt_seconds`, in degrees
/// and in pixels of an equirectangular map `envmap_width` texels wide.
#[no_mangle]
pub unsafe extern "C" fn relight_solar_displacement(
    dt_seconds: f64,
    envmap_width: usize,
    out_degrees: *mut f64,
    out_pixels: *mut f64,
) -> RelightStatus {
    guard(|| {
        let s = solar_displacement(dt_seconds, envmap_width)?;
        *out(out_degrees, "out_degrees")? = s.degrees;
        *out(out_pixels, "out_pixels")? = s.pixels;
        Ok(())
    })
}
