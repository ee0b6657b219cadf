mod common;

use common::*;
use rand::Rng;
use relight::imaging::*;
use relight::math::Vec3;
use relight::renderer::{read_gbuffer_dir, write_gbuffer_dir};

#[test]
fn exr_round_trip_preserves_hdr_values() {
    let mut rng = rng(1);
    let img = LinearImage::from_fn(37, 23, |_, _| [0; 3].map(|_| 10f64.powf(rng.random_range(-4.0..4.0)))).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.exr");
    write_exr(&path, &img).unwrap();
    let back = read_exr(&path).unwrap();
    assert_eq!(back.dims(), img.dims());
    for (a, b) in back.pixels().iter().flatten().zip(img.pixels().iter().flatten()) {
        assert!((a - b).abs() <= 1e-6 * b, "{a} vs {b}");
    }
    // Values already at storage precision survive bit-exactly.
    let path2 = dir.path().join("b.exr");
    write_exr(&path2, &back).unwrap();
    assert_eq!(read_exr(&path2).unwrap(), back);
    let path3 = dir.path().join("c.exr");
    write_exr(&path3, &read_exr(&path2).unwrap()).unwrap();
    assert_eq!(std::fs::read(&path2).unwrap(), std::fs::read(&path3).unwrap());
}

#[test]
fn mask_round_trip() {
    let mut rng = rng(2);
    let mask = Mask::new(19, 7, (0..19 * 7).map(|_| rng.random_bool(0.5)).collect()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.png");
    write_mask_png(&path, &mask).unwrap();
    assert_eq!(read_mask_png(&path).unwrap(), mask);
}

#[test]
fn gbuffer_directory_round_trip() {
    let mut rng = rng(3);
    let mut g = random_gbuffer(&mut rng, 9, 5, Vec3::new(0.0, 0.0, 1.0));
    g.depth = Some((0..45).map(|i| 1.0 + i as f64).collect());
    let dir = tempfile::tempdir().unwrap();
    write_gbuffer_dir(dir.path(), &g).unwrap();
    let back = read_gbuffer_dir(dir.path()).unwrap();
    for i in 0..g.len() {
        for c in 0..3 {
            assert!((back.basecolor[i][c] - g.basecolor[i][c]).abs() < 1e-6);
            assert!((back.normal[i][c] - g.normal[i][c]).abs() < 1e-6);
        }
        assert!((back.roughness[i] - g.roughness[i]).abs() < 1e-6);
        assert!((back.metallic[i] - g.metallic[i]).abs() < 1e-6);
    }
    assert_eq!(back.depth, g.depth);
    std::fs::remove_file(dir.path().join("normal.exr")).unwrap();
    assert!(read_gbuffer_dir(dir.path()).is_err());
}
