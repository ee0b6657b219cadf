use std::path::Path;
use std::process::{Command, Output};

use relight::imaging::{write_exr, LinearImage};
use relight::renderer::{write_gbuffer_dir, GBuffer};

fn relight(args: &[&str], cache: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relight"))
        .args(args)
        .env("RELIGHT_CACHE_DIR", cache)
        .output()
        .unwrap()
}

fn stdout_json(o: &Output) -> serde_json::Value {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn stderr_json(o: &Output) -> serde_json::Value {
    assert!(!o.status.success());
    serde_json::from_str(String::from_utf8_lossy(&o.stderr).lines().last().unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small sky-like envmap, a G-buffer and its render.
fn scene(dir: &Path) {
    let env = LinearImage::from_fn(64, 32, |x, y| {
        let sky = 1.0 - y as f64 / 32.0;
        [0.3 + sky, 0.4 + sky, 0.6 + sky * 1.5 + if x == 10 && y == 8 { 20.0 } else { 0.0 }]
    })
    .unwrap();
    write_exr(dir.join("env.exr"), &env).unwrap();
    let g = GBuffer::uniform(12, 12, [0.6, 0.4, 0.3], [0.0, 0.6, 0.8], 0.4, 0.2).unwrap();
    write_gbuffer_dir(dir.join("truth"), &g).unwrap();
}

#[test]
fn validate_sync_reproduces_table_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/sync_table.json");
    let out = dir.path().join("sync");
    let o = relight(&["validate-sync", s(&fixture), "--out-dir", s(&out)], dir.path());
    let v = stdout_json(&o);
    assert_eq!(v["median_s"], "38.00");
    assert_eq!(v["mean_s"], "40.14");
    assert_eq!(v["max_s"], "114.00");
    assert_eq!(v["count"], 50);
    for f in ["sync.csv", "histogram.csv", "histogram.svg"] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn render_build_env_and_cache() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    scene(d);
    let cache = d.join("cache");
    let first = stdout_json(&relight(&["build-env", "--envmap", s(&d.join("env.exr")), "--levels", "4"], &cache));
    assert_eq!(first["cache_hit"], false);
    let second = stdout_json(&relight(&["build-env", "--envmap", s(&d.join("env.exr")), "--levels", "4"], &cache));
    assert_eq!(second["cache_hit"], true);
    assert_eq!(first["hash"], second["hash"]);

    let (truth, env) = (d.join("truth"), d.join("env.exr"));
    for out in ["a.exr", "b.exr"] {
        let out = d.join(out);
        let args = ["render", "--gbuffer", s(&truth), "--envmap", s(&env), "--levels", "4", "--out", s(&out)];
        stdout_json(&relight(&args, &cache));
    }
    assert_eq!(std::fs::read(d.join("a.exr")).unwrap(), std::fs::read(d.join("b.exr")).unwrap());
}

fn render_truth(d: &Path) {
    let o = relight(
        &[
            "render",
            "--gbuffer",
            s(&d.join("truth")),
            "--envmap",
            s(&d.join("env.exr")),
            "--levels",
            "4",
            "--out",
            s(&d.join("observed.exr")),
        ],
        &d.join("cache"),
    );
    stdout_json(&o);
}

fn invert(d: &Path, mode: &str, out: &str, extra: &[&str]) -> serde_json::Value {
    let (observed, env, out) = (d.join("observed.exr"), d.join("env.exr"), d.join(out));
    let mut args = vec!["invert", "--observed", s(&observed), "--envmap", s(&env), "--levels", "4"];
    args.extend(["--mode", mode, "--out-dir", s(&out)]);
    args.extend_from_slice(extra);
    stdout_json(&relight(&args, &d.join("cache")))
}

fn same_dir_bytes(a: &Path, b: &Path) {
    let mut names: Vec<_> = std::fs::read_dir(a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(!names.is_empty());
    for n in names {
        assert_eq!(std::fs::read(a.join(&n)).unwrap(), std::fs::read(b.join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn invert_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    scene(d);
    render_truth(d);
    let dps = ["--zeta", "0", "--seed", "7", "--steps", "20"];
    invert(d, "dps", "dps1", &dps);
    invert(d, "dps", "dps2", &dps);
    same_dir_bytes(&d.join("dps1/gbuffer"), &d.join("dps2/gbuffer"));

    let guided = invert(d, "dps", "dps3", &["--zeta", "0.2", "--seed", "7", "--steps", "20", "--jobs", "1"]);
    assert!(d.join("dps3/diagnostics.csv").is_file());
    assert!(guided["final_loss"].as_f64().unwrap().is_finite());

    let descent = ["--seed", "3", "--iters", "40"];
    let r = invert(d, "descent", "gd1", &descent);
    invert(d, "descent", "gd2", &descent);
    same_dir_bytes(&d.join("gd1/gbuffer"), &d.join("gd2/gbuffer"));
    assert!(r["final_loss"].as_f64().unwrap() <= r["details"]["initial_loss"].as_f64().unwrap());
}

#[test]
fn eval_identity_and_folds() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let img = LinearImage::from_fn(16, 16, |x, y| [x as f64 * 0.1, y as f64 * 0.2, 0.5]).unwrap();
    write_exr(d.join("gt.exr"), &img).unwrap();
    let csv = d.join("m.csv");
    let json = d.join("m.json");
    let v = stdout_json(&relight(
        &["eval", "--pred", s(&d.join("gt.exr")), "--gt", s(&d.join("gt.exr")), "--csv", s(&csv), "--json", s(&json)],
        d,
    ));
    let row = &v["rows"][0];
    assert_eq!(row["psnr"], 100.0);
    assert_eq!(row["ssim"], 1.0);
    assert_eq!(row["alpha"], 1.0);
    assert!(row["lpips"].is_null());
    let text = std::fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().last().unwrap().starts_with("mean,"));

    // Batch mode over a manifest, predictions named by lighting id.
    std::fs::create_dir_all(d.join("pred")).unwrap();
    for id in ["a", "b", "c"] {
        write_exr(d.join(format!("pred/{id}.exr")), &img.scaled(2.0).unwrap()).unwrap();
    }
    let manifest = d.join("scene.json");
    std::fs::write(
        &manifest,
        r#"{"version":1,"scene":"toy","captures":[{"lighting":"a","image":"gt.exr"},{"lighting":"b","image":"gt.exr"},{"lighting":"c","image":"gt.exr"}]}"#,
    )
    .unwrap();
    let v = stdout_json(&relight(
        &["eval", "--manifest", s(&manifest), "--predictions", s(&d.join("pred")), "--jobs", "2"],
        d,
    ));
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);
    assert_eq!(v["rows"][1]["alpha"], 0.5);

    let folds = stdout_json(&relight(&["folds", s(&manifest)], d));
    let folds = folds["folds"].as_array().unwrap();
    assert_eq!(folds.len(), 3);
    assert_eq!(folds[2]["held_out"], "c");
    assert_eq!(folds[2]["support"], serde_json::json!(["a", "b"]));
}

#[test]
fn merge_frames_from_cli() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let radiance: f64 = 0.8;
    for (i, t) in [0.25, 1.0, 4.0].iter().enumerate() {
        let z = (radiance * t).min(1.0);
        write_exr(d.join(format!("f{i}.exr")), &LinearImage::filled(4, 4, [z; 3]).unwrap()).unwrap();
    }
    let frames: Vec<String> = [0.25, 1.0, 4.0]
        .iter()
        .enumerate()
        .map(|(i, t)| format!("{}@{t}", s(&d.join(format!("f{i}.exr")))))
        .collect();
    let mut args = vec!["merge"];
    for f in &frames {
        args.extend(["--frame", f.as_str()]);
    }
    let out = d.join("hdr.exr");
    let mask = d.join("sat.png");
    args.extend(["--out", s(&out), "--saturation-mask", s(&mask)]);
    let v = stdout_json(&relight(&args, d));
    assert_eq!(v["saturated_pixels"], 0);
    let hdr = relight::imaging::read_exr(&out).unwrap();
    assert!((hdr.get(1, 1)[0] - radiance).abs() < 1e-6);
    assert!(mask.is_file());
}

#[test]
fn failures_are_machine_readable() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let e = stderr_json(&relight(&["frobnicate"], d));
    assert_eq!(e["error"], "usage");

    let e = stderr_json(&relight(&["folds", s(&d.join("missing.json"))], d));
    assert_eq!(e["error"], "missing_file");

    let bad = d.join("bad.json");
    std::fs::write(&bad, r#"{"version":1,"scene":"s","captures":[{"lighting":"a","envmap":"nope.exr"}]}"#).unwrap();
    let e = stderr_json(&relight(&["validate-sync", s(&bad)], d));
    assert_eq!(e["error"], "manifest");
    assert!(e["message"].as_str().unwrap().contains("captures[0].envmap"));

    let e = stderr_json(&relight(&["merge", "--frame", "x.exr", "--out", s(&d.join("o.exr"))], d));
    assert_eq!(e["error"], "invalid_argument");
}
