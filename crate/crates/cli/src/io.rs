//! Frame directories, phantom spec files and CSV formats.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use activecircle::phantom::{render_phantom, PhantomSpec, PhantomTruth};
use activecircle::{Frame, TrackResult};
use image::{DynamicImage, ImageBuffer, Luma};
use serde::Deserialize;

use crate::error::{CliError, Result};

/// Sidecar read from a frame directory.
pub const META_FILE: &str = "meta.toml";

/// Truth file written next to exported phantom frames.
pub const TRUTH_FILE: &str = "truth.csv";

const FRAME_EXTENSIONS: [&str; 3] = ["png", "pgm", "pnm"];

/// Frames plus, for phantom sources, the exact ground truth.
#[derive(Debug, Clone)]
pub struct Video {
    pub frames: Vec<Frame>,
    pub truth: Option<PhantomTruth>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Meta {
    pixel_spacing_cm: Option<f64>,
}

/// Loads a directory of numbered grayscale frames or renders a phantom
/// spec file. `spacing_cm` overrides any sidecar or spec spacing.
pub fn load_video(path: &Path, spacing_cm: Option<f64>) -> Result<Video> {
    let meta = fs::metadata(path).map_err(|e| CliError::io(path, e))?;
    let mut video = if meta.is_dir() {
        load_frame_dir(path)?
    } else {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let spec = PhantomSpec::parse(&text)?;
        let (frames, truth) = render_phantom(&spec)?;
        Video {
            frames,
            truth: Some(truth),
        }
    };
    if let Some(s) = spacing_cm {
        video.frames = video
            .frames
            .into_iter()
            .map(|f| f.with_pixel_spacing(s))
            .collect::<activecircle::Result<_>>()?;
    }
    Ok(video)
}

/// Trailing run of digits in the file stem, `frame_0012` → 12.
fn frame_index(path: &Path) -> Option<u64> {
    let stem = path.file_stem()?.to_str()?;
    let digits: String = stem
        .chars()
        .rev()
        .take_while(|c| c.is_ascii_digit())
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    digits.parse().ok()
}

fn is_frame_file(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| FRAME_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

fn load_frame_dir(dir: &Path) -> Result<Video> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut files: Vec<(u64, PathBuf)> = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if !is_frame_file(&path) {
            continue;
        }
        let index = frame_index(&path).ok_or_else(|| CliError::Image {
            path: path.clone(),
            message: "frame file name has no numeric index".into(),
        })?;
        files.push((index, path));
    }
    if files.is_empty() {
        return Err(CliError::NoFrames(dir.to_path_buf()));
    }
    files.sort();
    if let Some(w) = files.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(CliError::Image {
            path: w[1].1.clone(),
            message: format!("duplicate frame index {}", w[1].0),
        });
    }

    let meta_path = dir.join(META_FILE);
    let meta: Meta = if meta_path.exists() {
        let text = fs::read_to_string(&meta_path).map_err(|e| CliError::io(&meta_path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", meta_path.display(), e.message())))?
    } else {
        Meta::default()
    };

    let mut frames = Vec::with_capacity(files.len());
    let mut size = None;
    for (_, path) in &files {
        let (w, h, data) = read_gray(path)?;
        match size {
            None => size = Some((w, h)),
            Some((want_w, want_h)) if (w, h) != (want_w, want_h) => {
                return Err(CliError::MixedSize {
                    path: path.clone(),
                    got_w: w,
                    got_h: h,
                    want_w,
                    want_h,
                });
            }
            Some(_) => {}
        }
        let spacing =
            meta.pixel_spacing_cm.unwrap_or_else(|| activecircle::model::default_pixel_spacing_cm(h as usize));
        let frame = Frame::new(w as usize, h as usize, data, spacing).map_err(|e| CliError::Image {
            path: path.clone(),
            message: e.to_string(),
        })?;
        frames.push(frame);
    }
    Ok(Video { frames, truth: None })
}

/// Decodes an 8- or 16-bit grayscale image into intensities in `[0, 1]`.
fn read_gray(path: &Path) -> Result<(u32, u32, Vec<f64>)> {
    let image = image::open(path).map_err(|e| CliError::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let (w, h) = (image.width(), image.height());
    let data = match image {
        DynamicImage::ImageLuma8(buf) => buf.into_raw().into_iter().map(|v| v as f64 / 255.0).collect(),
        DynamicImage::ImageLuma16(buf) => buf.into_raw().into_iter().map(|v| v as f64 / 65535.0).collect(),
        other => {
            return Err(CliError::Image {
                path: path.to_path_buf(),
                message: format!("expected an 8- or 16-bit grayscale image, got {:?}", other.color()),
            })
        }
    };
    Ok((w, h, data))
}

/// 16-bit grayscale PNG of a frame.
pub fn frame_to_gray16(frame: &Frame) -> ImageBuffer<Luma<u16>, Vec<u16>> {
    let raw = frame.intensities().iter().map(|v| (v * 65535.0).round() as u16).collect();
    ImageBuffer::from_raw(frame.width() as u32, frame.height() as u32, raw).expect("buffer size matches frame")
}

/// 8-bit grayscale image of a frame, for display.
pub fn frame_to_gray8(frame: &Frame) -> ImageBuffer<Luma<u8>, Vec<u8>> {
    let raw = frame.intensities().iter().map(|v| (v * 255.0).round() as u8).collect();
    ImageBuffer::from_raw(frame.width() as u32, frame.height() as u32, raw).expect("buffer size matches frame")
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Writes `frame_NNNN.png` files, a spacing sidecar and `truth.csv`.
pub fn export_phantom(dir: &Path, frames: &[Frame], truth: &PhantomTruth) -> Result<()> {
    create_dir(dir)?;
    for (i, frame) in frames.iter().enumerate() {
        let path = dir.join(format!("frame_{i:04}.png"));
        frame_to_gray16(frame).save(&path).map_err(|e| CliError::Image {
            path: path.clone(),
            message: e.to_string(),
        })?;
    }
    let meta = dir.join(META_FILE);
    fs::write(&meta, format!("pixel_spacing_cm = {:?}\n", truth.pixel_spacing_cm)).map_err(|e| CliError::io(&meta, e))?;
    let path = dir.join(TRUTH_FILE);
    let mut w = csv_writer(&path)?;
    let record = |w: &mut csv::Writer<fs::File>, fields: &[String]| {
        w.write_record(fields).map_err(|e| csv_error(&path, e))
    };
    record(
        &mut w,
        &["frame_index", "x_c", "y_c", "diameter_px", "diameter_cm", "semi_axis_ap", "semi_axis_lateral"]
            .map(String::from),
    )?;
    for (i, t) in truth.frames.iter().enumerate() {
        record(
            &mut w,
            &[
                i.to_string(),
                t.center_x.to_string(),
                t.center_y.to_string(),
                t.ap_diameter_px.to_string(),
                (t.ap_diameter_px * truth.pixel_spacing_cm).to_string(),
                t.semi_axis_ap.to_string(),
                t.semi_axis_lateral.to_string(),
            ],
        )?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    CliError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

pub const TRACK_HEADER: [&str; 8] = [
    "frame_index",
    "x_c",
    "y_c",
    "R_px",
    "diameter_px",
    "diameter_cm",
    "iterations",
    "converged",
];

/// One CSV row per frame; floats use the shortest round-trip form.
pub fn write_track_csv<W: Write>(out: W, result: &TrackResult) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACK_HEADER)?;
    for (i, r) in result.per_frame.iter().enumerate() {
        w.write_record([
            i.to_string(),
            r.circle.x_c.to_string(),
            r.circle.y_c.to_string(),
            r.circle.radius.to_string(),
            r.diameter_px.to_string(),
            r.diameter_cm.to_string(),
            r.iterations.to_string(),
            r.converged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn track_csv_string(result: &TrackResult) -> String {
    let mut buf = Vec::new();
    write_track_csv(&mut buf, result).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv output is utf-8")
}

pub fn save_track_csv(path: &Path, result: &TrackResult) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    write_track_csv(file, result).map_err(|e| csv_error(path, e))
}

/// Reads the `diameter_cm` column of a track or truth CSV.
pub fn read_diameters_cm(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = r.headers().map_err(|e| csv_error(path, e))?.clone();
    let col = headers.iter().position(|h| h == "diameter_cm").ok_or_else(|| CliError::Csv {
        path: path.to_path_buf(),
        message: "missing diameter_cm column".into(),
    })?;
    let mut out = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let field = record.get(col).unwrap_or("");
        let value: f64 = field.parse().map_err(|_| CliError::Csv {
            path: path.to_path_buf(),
            message: format!("row {}: bad diameter_cm `{field}`", line + 1),
        })?;
        out.push(value);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_index_uses_trailing_digits() {
        assert_eq!(frame_index(Path::new("frame_0012.png")), Some(12));
        assert_eq!(frame_index(Path::new("scan2_7.pgm")), Some(7));
        assert_eq!(frame_index(Path::new("99.png")), Some(99));
        assert_eq!(frame_index(Path::new("cover.png")), None);
    }

    #[test]
    fn gray16_round_trips_within_quantization() {
        let f = Frame::from_fn(16, 16, 0.1, |x, y| (x * 16 + y) as f64 / 255.0).unwrap();
        let img = frame_to_gray16(&f);
        for (v, p) in f.intensities().iter().zip(img.pixels()) {
            assert!((p.0[0] as f64 / 65535.0 - v).abs() <= 0.5 / 65535.0);
        }
    }
}
