use std::ffi::{CStr, CString};
use std::ptr;

use relight_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(relight_last_error()) }.to_string_lossy().into_owned()
}

fn image(w: usize, h: usize, f: impl Fn(usize) -> f64) -> *mut RelightImage {
    let data: Vec<f64> = (0..w * h * 3).map(f).collect();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { relight_image_new(w, h, data.as_ptr(), &mut out) }, RelightStatus::Ok);
    out
}

fn pixels(img: *const RelightImage) -> Vec<f64> {
    let (mut w, mut h) = (0, 0);
    unsafe {
        assert_eq!(relight_image_size(img, &mut w, &mut h), RelightStatus::Ok);
        let mut buf = vec![0.0; w * h * 3];
        assert_eq!(relight_image_read_pixels(img, buf.as_mut_ptr(), buf.len()), RelightStatus::Ok);
        buf
    }
}

#[test]
fn image_round_trips_through_exr() {
    let img = image(5, 3, |i| i as f64 * 0.25);
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("a.exr").to_str().unwrap()).unwrap();
    let mut back = ptr::null_mut();
    unsafe {
        assert_eq!(relight_image_write_exr(img, path.as_ptr()), RelightStatus::Ok);
        assert_eq!(relight_image_read_exr(path.as_ptr(), &mut back), RelightStatus::Ok);
    }
    // Quarter steps are exact in f32.
    assert_eq!(pixels(back), pixels(img));
    unsafe {
        relight_image_free(img);
        relight_image_free(back);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let mut out = ptr::null_mut();
    let missing = CString::new("/nonexistent/x.exr").unwrap();
    unsafe {
        assert_eq!(relight_image_read_exr(missing.as_ptr(), &mut out), RelightStatus::MissingFile);
        assert!(last_error().contains("x.exr"));
        assert!(out.is_null());
        assert_eq!(relight_image_new(2, 2, ptr::null(), &mut out), RelightStatus::NullPointer);
        assert_eq!(relight_image_read_exr(ptr::null(), &mut out), RelightStatus::NullPointer);
        let bad = [0.0, f64::NAN, 0.0];
        assert_eq!(relight_image_new(1, 1, bad.as_ptr(), &mut out), RelightStatus::InvalidImage);
        let mut buf = [0.0; 5];
        let img = image(1, 2, |_| 1.0);
        assert_eq!(relight_image_read_pixels(img, buf.as_mut_ptr(), 5), RelightStatus::ShapeMismatch);
        relight_image_free(img);
        relight_image_free(ptr::null_mut());
    }
}

#[test]
fn merge_recovers_radiance_and_flags_clipping() {
    let radiance: [f64; 4] = [0.5, 2.0, 4.0, 300.0];
    let times: [f64; 2] = [0.125, 1.0];
    let frames: Vec<*mut RelightImage> = times
        .iter()
        .map(|t| image(2, 2, |i| (radiance[i / 3] * t).min(1.0)))
        .collect();
    let ptrs: Vec<*const RelightImage> = frames.iter().map(|p| *p as *const _).collect();
    let mut out = ptr::null_mut();
    let mut sat = [9u8; 4];
    unsafe {
        assert_eq!(
            relight_merge_exposures(ptrs.as_ptr(), times.as_ptr(), 2, &mut out, sat.as_mut_ptr()),
            RelightStatus::Ok
        );
    }
    let px = pixels(out);
    for i in 0..3 {
        assert!((px[3 * i] / radiance[i] - 1.0).abs() < 1e-12);
    }
    assert_eq!(px[9], 8.0);
    assert_eq!(sat, [0, 0, 0, 1]);
    unsafe {
        relight_image_free(out);
        frames.into_iter().for_each(|f| relight_image_free(f));
    }
}

#[test]
fn render_and_evaluate() {
    let env_img = image(64, 32, |i| [0.4, 0.9, 1.6][i % 3]);
    let mut env = ptr::null_mut();
    let n = 12 * 12;
    let bc = vec![1.0; 3 * n];
    let normal: Vec<f64> = (0..3 * n).map(|i| (i % 3 == 2) as u8 as f64).collect();
    let (rough, metal) = (vec![0.3; n], vec![0.0; n]);
    let mut g = ptr::null_mut();
    let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
    let mut irr = [0.0; 3];
    unsafe {
        assert_eq!(relight_env_build(env_img, 4, &mut env), RelightStatus::Ok);
        assert_eq!(relight_env_irradiance(env, 0.0, 2.0, 0.0, irr.as_mut_ptr()), RelightStatus::Ok);
        assert_eq!(
            relight_gbuffer_new(12, 12, bc.as_ptr(), normal.as_ptr(), rough.as_ptr(), metal.as_ptr(), &mut g),
            RelightStatus::Ok
        );
        assert_eq!(relight_render(g, env, 0.0, 0.0, 0.0, &mut a), RelightStatus::Ok);
        assert_eq!(relight_render(g, env, 14.0, 6.0, 6.0, &mut b), RelightStatus::Ok);
    }
    for (got, want) in irr.iter().zip([0.4, 0.9, 1.6]) {
        assert!((got / want - 1.0).abs() < 1e-3);
    }
    for (i, v) in pixels(a).iter().enumerate() {
        assert!((v / [0.4, 0.9, 1.6][i % 3] - 1.0).abs() < 0.01);
    }
    let mut m = RelightMetrics::default();
    let mut mask = vec![1u8; n];
    mask[0] = 0;
    unsafe {
        assert_eq!(relight_evaluate(a, a, mask.as_ptr(), &mut m), RelightStatus::Ok);
        assert_eq!((m.psnr, m.ssim, m.valid_pixels, m.degenerate), (100.0, 1.0, n - 1, 0));
        assert_eq!(relight_evaluate(b, a, ptr::null(), &mut m), RelightStatus::Ok);
        assert!(m.psnr > 30.0 && m.alpha > 0.0);
        for p in [a, b, env_img] {
            relight_image_free(p);
        }
        relight_gbuffer_free(g);
        relight_env_free(env);
    }
}

#[test]
fn solar_displacement() {
    let (mut deg, mut px) = (0.0, 0.0);
    unsafe {
        assert_eq!(relight_solar_displacement(114.0, 256, &mut deg, &mut px), RelightStatus::Ok);
        assert!((deg - 0.4754).abs() < 1e-3 && (px - 0.338).abs() < 1e-3);
        assert_eq!(relight_solar_displacement(1.0, 0, &mut deg, &mut px), RelightStatus::InvalidArgument);
    }
    let v = unsafe { CStr::from_ptr(relight_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
