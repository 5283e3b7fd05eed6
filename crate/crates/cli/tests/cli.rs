use std::path::Path;

use activecircle::evaluation::compute_metrics;
use activecircle::phantom::{render_phantom, PhantomSpec};
use activecircle_cli::io::{export_phantom, load_video, read_diameters_cm, save_track_csv};
use activecircle_cli::{run_cli_with, CliError};
use image::{GrayImage, Luma};

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["activecircle"];
    full.extend_from_slice(args);
    let code = run_cli_with(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn small_spec(dir: &Path, frames: usize) -> std::path::PathBuf {
    let path = dir.join("phantom.toml");
    let spec = PhantomSpec {
        frame_count: frames,
        ..PhantomSpec::standard()
    };
    std::fs::write(&path, spec.to_toml()).unwrap();
    path
}

#[test]
fn constant_eight_bit_frames_normalize() {
    let dir = tempfile::tempdir().unwrap();
    // indices deliberately out of lexical order
    for i in [2, 10, 1] {
        GrayImage::from_pixel(24, 18, Luma([128u8]))
            .save(dir.path().join(format!("img{i}.png")))
            .unwrap();
    }
    std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
    let video = load_video(dir.path(), None).unwrap();
    assert_eq!(video.frames.len(), 3);
    assert!(video.truth.is_none());
    for f in &video.frames {
        assert_eq!((f.width(), f.height()), (24, 18));
        assert!(f.intensities().iter().all(|&v| v == 128.0 / 255.0));
        assert_eq!(f.pixel_spacing_cm(), 19.0 / 18.0);
    }
    let overridden = load_video(dir.path(), Some(0.05)).unwrap();
    assert_eq!(overridden.frames[0].pixel_spacing_cm(), 0.05);
}

#[test]
fn pgm_frames_and_sidecar_spacing() {
    let dir = tempfile::tempdir().unwrap();
    let img = GrayImage::from_fn(16, 16, |x, _| Luma([(x * 30) as u8]));
    img.save(dir.path().join("0.pgm")).unwrap();
    std::fs::write(dir.path().join("meta.toml"), "pixel_spacing_cm = 0.02\n").unwrap();
    let video = load_video(dir.path(), None).unwrap();
    assert_eq!(video.frames[0].pixel_spacing_cm(), 0.02);
    assert_eq!(video.frames[0].get(3, 5), 90.0 / 255.0);
}

#[test]
fn mixed_sizes_name_the_offending_file() {
    let dir = tempfile::tempdir().unwrap();
    GrayImage::new(20, 20).save(dir.path().join("f_0.png")).unwrap();
    GrayImage::new(20, 20).save(dir.path().join("f_1.png")).unwrap();
    GrayImage::new(22, 20).save(dir.path().join("f_2.png")).unwrap();
    GrayImage::new(24, 20).save(dir.path().join("f_3.png")).unwrap();
    match load_video(dir.path(), None) {
        Err(CliError::MixedSize { path, got_w, .. }) => {
            assert!(path.ends_with("f_2.png"), "{}", path.display());
            assert_eq!(got_w, 22);
        }
        other => panic!("expected a size error, got {other:?}"),
    }
}

#[test]
fn empty_directory_has_no_frames() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_video(dir.path(), None), Err(CliError::NoFrames(_))));
}

#[test]
fn exported_phantom_reloads_within_quantization() {
    let dir = tempfile::tempdir().unwrap();
    let spec = PhantomSpec {
        frame_count: 3,
        ..PhantomSpec::standard()
    };
    let (frames, truth) = render_phantom(&spec).unwrap();
    export_phantom(dir.path(), &frames, &truth).unwrap();
    let video = load_video(dir.path(), None).unwrap();
    assert_eq!(video.frames.len(), 3);
    for (a, b) in frames.iter().zip(&video.frames) {
        assert_eq!(a.pixel_spacing_cm(), b.pixel_spacing_cm());
        let worst = a
            .intensities()
            .iter()
            .zip(b.intensities())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(worst <= 0.5 / 65535.0 + 1e-12, "{worst}");
    }
    let d = read_diameters_cm(&dir.path().join("truth.csv")).unwrap();
    assert_eq!(d, truth.diameters_cm());
}

#[test]
fn track_csv_round_trip_preserves_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let spec = PhantomSpec {
        frame_count: 12,
        ..PhantomSpec::standard()
    };
    let (frames, truth) = render_phantom(&spec).unwrap();
    let result = activecircle::track_video(&frames, [96.0, 96.0], &Default::default()).unwrap();
    let path = dir.path().join("out/track.csv");
    save_track_csv(&path, &result).unwrap();
    let reread = read_diameters_cm(&path).unwrap();
    assert_eq!(reread, result.diameters_cm());
    let a = compute_metrics(&result.diameters_cm(), &truth.diameters_cm(), 0..12).unwrap();
    let b = compute_metrics(&reread, &truth.diameters_cm(), 0..12).unwrap();
    assert_eq!(a, b);
}

#[test]
fn phantom_track_eval_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small_spec(dir.path(), 30);
    let frames = dir.path().join("frames");
    let (code, out, err) = run(&["phantom", "--spec", spec.to_str().unwrap(), "--out", frames.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("30 frames"));

    let csv = dir.path().join("track.csv");
    let overlays = dir.path().join("overlays");
    let (code, _, err) = run(&[
        "track",
        "--input",
        frames.to_str().unwrap(),
        "--seed",
        "96,96",
        "--out-csv",
        csv.to_str().unwrap(),
        "--overlay",
        overlays.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(std::fs::read_dir(&overlays).unwrap().count(), 30);

    let truth = frames.join("truth.csv");
    let (code, out, err) = run(&["eval", "--est", csv.to_str().unwrap(), "--ref", truth.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let rms_cm: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("rms_error: "))
        .unwrap()
        .parse()
        .unwrap();
    let spacing = 19.0 / 192.0;
    assert!(rms_cm / spacing < 1.5, "rms {} px", rms_cm / spacing);

    let (code, out, _) = run(&[
        "eval",
        "--est",
        csv.to_str().unwrap(),
        "--ref",
        truth.to_str().unwrap(),
        "--range",
        "0:10",
    ]);
    assert_eq!(code, 0);
    assert!(out.starts_with("frames: 0..10\n"));
}

#[test]
fn eval_against_itself_is_all_zero() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    std::fs::write(&csv, "frame_index,diameter_cm\n0,5.5\n1,5.75\n2,6.0\n").unwrap();
    let (code, out, _) = run(&["eval", "--est", csv.to_str().unwrap(), "--ref", csv.to_str().unwrap()]);
    assert_eq!(code, 0);
    for key in ["rms_error", "e_ave", "sigma_e", "abs_e_max"] {
        let line = out.lines().find(|l| l.starts_with(key)).unwrap();
        assert_eq!(line, format!("{key}: 0.000000"));
    }
}

#[test]
fn seed_outside_the_image_fails() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small_spec(dir.path(), 2);
    let csv = dir.path().join("t.csv");
    let (code, _, err) = run(&[
        "track",
        "--input",
        spec.to_str().unwrap(),
        "--seed",
        "400,20",
        "--out-csv",
        csv.to_str().unwrap(),
    ]);
    assert_ne!(code, 0);
    assert!(err.contains("seed out of bounds"), "{err}");
    assert_eq!(err.lines().count(), 1);
    assert!(!csv.exists());
}

#[test]
fn failures_get_one_line_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing");
    let csv = dir.path().join("t.csv");
    let (code, _, err) = run(&["track", "--input", missing.to_str().unwrap(), "--seed", "1,1", "--out-csv", csv.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.starts_with("error[io]"), "{err}");
    assert_eq!(err.lines().count(), 1);

    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "alpha = 1e-4\nbogus = 2\n").unwrap();
    let spec = small_spec(dir.path(), 2);
    let (code, _, err) = run(&[
        "track",
        "--input",
        spec.to_str().unwrap(),
        "--seed",
        "96,96",
        "--config",
        cfg.to_str().unwrap(),
        "--out-csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
    assert!(err.starts_with("error[config]"), "{err}");
    assert_eq!(err.lines().count(), 1);

    let (code, _, _) = run(&["track", "--seed", "nope"]);
    assert_eq!(code, 2);
}

#[test]
fn identical_runs_write_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small_spec(dir.path(), 15);
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "alpha = 2e-4\nfilter = \"median\"\n").unwrap();
    let mut outputs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let csv = dir.path().join(name);
        let (code, _, err) = run(&[
            "track",
            "--input",
            spec.to_str().unwrap(),
            "--seed",
            "96,96",
            "--config",
            cfg.to_str().unwrap(),
            "--out-csv",
            csv.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "{err}");
        outputs.push(std::fs::read(&csv).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn profile_prints_a_sign_change_at_the_truth() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small_spec(dir.path(), 1);
    let (code, out, err) = run(&["profile", "--input", spec.to_str().unwrap(), "--axis", "diameter", "--offsets", "0.5:1.5:0.05"]);
    assert_eq!(code, 0, "{err}");
    let values: Vec<(f64, f64)> = out
        .lines()
        .skip(1)
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert_eq!(values.len(), 21);
    assert!(values.first().unwrap().1 > 0.0);
    assert!(values.last().unwrap().1 < 0.0);
    assert!(err.contains("zero crossings"));
}
