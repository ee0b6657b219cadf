//! EXR (scanline, 32-bit float) and 8-bit single-channel PNG interchange.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use exr::prelude::*;

use super::{LinearImage, Mask};
use crate::error::{Error, Result};

fn encoding() -> Encoding {
    Encoding {
        compression: Compression::ZIP16,
        blocks: Blocks::ScanLines,
        line_order: LineOrder::Increasing,
    }
}

fn check_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => {
            Err(Error::MissingFile(dir.to_path_buf()))
        }
        _ => Ok(()),
    }
}

fn malformed(path: &Path, reason: impl ToString) -> Error {
    Error::Malformed {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    }
}

fn write_channels(path: &Path, width: usize, height: usize, planes: Vec<(&str, Vec<f32>)>) -> Result<()> {
    check_parent(path)?;
    let channels = planes
        .into_iter()
        .map(|(name, values)| AnyChannel::new(name, FlatSamples::F32(values)))
        .collect::<SmallVec<[AnyChannel<FlatSamples>; 4]>>();
    let layer = Layer::new(
        (width, height),
        LayerAttributes::default(),
        encoding(),
        AnyChannels::sort(channels),
    );
    Image::from_layer(layer)
        .write()
        .to_file(path)
        .map_err(|e| malformed(path, e))
}

type Channels = Vec<(String, Vec<f32>)>;

/// Reads every channel of the first layer as `(name, samples)`.
fn read_channels(path: &Path) -> Result<((usize, usize), Channels)> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let image = read()
        .no_deep_data()
        .largest_resolution_level()
        .all_channels()
        .first_valid_layer()
        .all_attributes()
        .from_file(path)
        .map_err(|e| malformed(path, e))?;
    let layer = image.layer_data;
    let size = (layer.size.width(), layer.size.height());
    let channels = layer
        .channel_data
        .list
        .into_iter()
        .map(|c| {
            let values: Vec<f32> = c.sample_data.values_as_f32().collect();
            (c.name.to_string(), values)
        })
        .collect();
    Ok((size, channels))
}

fn widen(path: &Path, v: f32) -> Result<f64> {
    if !v.is_finite() {
        return Err(malformed(path, format!("non-finite sample {v}")));
    }
    Ok(f64::from(v))
}

/// Writes an RGB linear image as a 32-bit float scanline EXR.
pub fn write_exr(path: impl AsRef<Path>, image: &LinearImage) -> Result<()> {
    let path = path.as_ref();
    let plane = |c: usize| image.pixels().iter().map(|p| p[c] as f32).collect::<Vec<_>>();
    write_channels(
        path,
        image.width(),
        image.height(),
        vec![("R", plane(0)), ("G", plane(1)), ("B", plane(2))],
    )
}

/// Reads an RGB EXR. Files whose channel set is not exactly `R, G, B` are
/// rejected, as are non-finite or negative samples.
pub fn read_exr(path: impl AsRef<Path>) -> Result<LinearImage> {
    let path = path.as_ref();
    let ((w, h), channels) = read_channels(path)?;
    if channels.len() != 3 {
        return Err(malformed(
            path,
            format!("expected 3 channels (R, G, B), found {}", channels.len()),
        ));
    }
    let find = |name: &str| {
        channels
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v)
            .ok_or_else(|| malformed(path, format!("missing channel {name}")))
    };
    let (r, g, b) = (find("R")?, find("G")?, find("B")?);
    let data = (0..w * h)
        .map(|i| Ok([widen(path, r[i])?, widen(path, g[i])?, widen(path, b[i])?]))
        .collect::<Result<Vec<_>>>()?;
    LinearImage::new(w, h, data).map_err(|e| malformed(path, e))
}

/// Writes a single-channel (`Y`) float EXR.
pub fn write_exr_scalar(
    path: impl AsRef<Path>,
    width: usize,
    height: usize,
    values: &[f64],
) -> Result<()> {
    if values.len() != width * height {
        return Err(Error::InvalidImage(format!(
            "{} values for a {width}x{height} plane",
            values.len()
        )));
    }
    write_channels(
        path.as_ref(),
        width,
        height,
        vec![("Y", values.iter().map(|v| *v as f32).collect())],
    )
}

/// Reads a single-channel float EXR, returning `(width, height, values)`.
pub fn read_exr_scalar(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<f64>)> {
    let path = path.as_ref();
    let ((w, h), channels) = read_channels(path)?;
    if channels.len() != 1 {
        return Err(malformed(
            path,
            format!("expected 1 channel, found {}", channels.len()),
        ));
    }
    let values = channels[0]
        .1
        .iter()
        .map(|v| widen(path, *v))
        .collect::<Result<Vec<_>>>()?;
    Ok((w, h, values))
}

/// Writes a mask as 8-bit grayscale PNG, `true` → 255, `false` → 0.
pub fn write_mask_png(path: impl AsRef<Path>, mask: &Mask) -> Result<()> {
    let path = path.as_ref();
    check_parent(path)?;
    let file = BufWriter::new(File::create(path)?);
    let mut encoder = png::Encoder::new(file, mask.width() as u32, mask.height() as u32);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Eight);
    let bytes: Vec<u8> = mask.values().iter().map(|v| if *v { 255 } else { 0 }).collect();
    let mut writer = encoder.write_header().map_err(|e| malformed(path, e))?;
    writer.write_image_data(&bytes).map_err(|e| malformed(path, e))?;
    writer.finish().map_err(|e| malformed(path, e))
}

/// Reads an 8-bit single-channel PNG mask; any nonzero byte is `true`.
pub fn read_mask_png(path: impl AsRef<Path>) -> Result<Mask> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let decoder = png::Decoder::new(BufReader::new(File::open(path)?));
    let mut reader = decoder.read_info().map_err(|e| malformed(path, e))?;
    let info = reader.info();
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
        return Err(malformed(
            path,
            format!(
                "expected 8-bit single-channel PNG, found {:?} at {:?}",
                info.color_type, info.bit_depth
            ),
        ));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(w * h)];
    let frame = reader.next_frame(&mut buf).map_err(|e| malformed(path, e))?;
    let stride = frame.line_size;
    let data = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .map(|(x, y)| buf[y * stride + x] != 0)
        .collect();
    Mask::new(w, h, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_half_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("half.exr");
        let img = LinearImage::filled(2, 2, [0.5; 3]).unwrap();
        write_exr(&path, &img).unwrap();
        assert_eq!(read_exr(&path).unwrap(), img);
    }

    #[test]
    fn mask_png_bit_mapping() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.png");
        let mask = Mask::new(3, 2, vec![true, false, true, false, false, true]).unwrap();
        write_mask_png(&path, &mask).unwrap();
        assert_eq!(read_mask_png(&path).unwrap(), mask);
    }

    #[test]
    fn nonzero_bytes_read_as_valid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("edit.png");
        let file = BufWriter::new(File::create(&path).unwrap());
        let mut enc = png::Encoder::new(file, 4, 1);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().unwrap();
        w.write_image_data(&[0, 1, 128, 255]).unwrap();
        w.finish().unwrap();
        let mask = read_mask_png(&path).unwrap();
        assert_eq!(mask.values(), &[false, true, true, true]);
    }

    #[test]
    fn rgb_png_rejected_as_mask() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rgb.png");
        let file = BufWriter::new(File::create(&path).unwrap());
        let mut enc = png::Encoder::new(file, 1, 1);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().unwrap();
        w.write_image_data(&[1, 2, 3]).unwrap();
        w.finish().unwrap();
        assert!(matches!(read_mask_png(&path), Err(Error::Malformed { .. })));
    }

    #[test]
    fn scalar_exr_rejected_as_rgb() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("y.exr");
        write_exr_scalar(&path, 2, 1, &[0.25, 0.75]).unwrap();
        assert!(matches!(read_exr(&path), Err(Error::Malformed { .. })));
        assert_eq!(read_exr_scalar(&path).unwrap(), (2, 1, vec![0.25, 0.75]));
    }

    #[test]
    fn missing_and_garbage_files() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            read_exr(dir.path().join("nope.exr")),
            Err(Error::MissingFile(_))
        ));
        let junk = dir.path().join("junk.exr");
        std::fs::write(&junk, b"definitely not an exr").unwrap();
        assert!(matches!(read_exr(&junk), Err(Error::Malformed { .. })));
        assert!(matches!(
            write_exr(dir.path().join("no/such/dir/x.exr"), &LinearImage::filled(1, 1, [0.0; 3]).unwrap()),
            Err(Error::MissingFile(_))
        ));
    }

    #[test]
    fn non_finite_sample_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inf.exr");
        write_channels(
            &path,
            1,
            1,
            vec![("R", vec![f32::INFINITY]), ("G", vec![0.0]), ("B", vec![0.0])],
        )
        .unwrap();
        assert!(matches!(read_exr(&path), Err(Error::Malformed { .. })));
    }
}
