//! End-to-end acceptance checks on synthetic phantoms.
//!
//! Prints one `PASS` or `FAIL` line per criterion followed by a tally. The
//! process exits nonzero on a failure only when `ACCEPTANCE_STRICT=1`, so the
//! report stays part of an ordinary `cargo test` run.

use std::fmt::Write as _;
use std::time::Instant;

use activecircle::engine::shifted_points;
use activecircle::evaluation::{alpha_sweep, compute_metrics, functional_profile, zero_crossings, ProfileAxis};
use activecircle::filters::{apply_filter, FilterKind, FilterSpec};
use activecircle::model::AngleTable;
use activecircle::phantom::{render_phantom, PhantomSpec, PhantomTruth};
use activecircle::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Report {
    passed: usize,
    failed: Vec<String>,
}

impl Report {
    fn check(&mut self, name: &str, ok: bool, detail: String) {
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        if ok {
            self.passed += 1;
        } else {
            self.failed.push(name.to_string());
        }
    }
}

/// A click a few pixels off the true center of the first frame.
fn click(truth: &PhantomTruth) -> [f64; 2] {
    [truth.frames[0].center_x + 3.0, truth.frames[0].center_y - 2.0]
}

fn rms_px(result: &TrackResult, truth: &PhantomTruth) -> (f64, f64) {
    let m = compute_metrics(&result.diameters_px(), &truth.diameters_px(), 0..truth.len()).unwrap();
    (m.rms_error, m.abs_e_max)
}

fn theorem_oracle(report: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let start = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let k = rng.random_range(MIN_SAMPLES..=96);
        let circle = Circle::new(
            rng.random_range(0.0..200.0),
            rng.random_range(0.0..200.0),
            rng.random_range(5.0..=50.0),
        )
        .unwrap();
        let table = AngleTable::new(k).unwrap();
        let forces = ForceSet {
            forces: (0..k).map(|_| rng.random_range(-2.0..=2.0)).collect(),
            angles: table.angles().to_vec(),
        };
        let update = update_circle(&circle, &forces, 0.0).circle;
        let fit = fit_circle_direct(&shifted_points(&circle, &forces), &forces.angles).unwrap();
        worst = worst
            .max((update.x_c - fit.x_c).abs())
            .max((update.y_c - fit.y_c).abs())
            .max((update.radius - fit.radius).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    report.check(
        "theorem oracle",
        worst <= 1e-9 && secs < 5.0,
        format!("max parameter difference {worst:.2e} over 1000 cases (<= 1e-9), {secs:.3} s (< 5 s)"),
    );
}

fn equilibrium(report: &mut Report, frame: &Frame, truth: &PhantomTruth, cfg: &EngineConfig) {
    let circle = truth.frames[0].circle();
    let shifts: Vec<f64> = (-40..=40).map(|i| i as f64 * 0.25).collect();
    let mut ok = true;
    let mut detail = String::new();
    for axis in [ProfileAxis::Dx, ProfileAxis::Dy] {
        let profile = functional_profile(frame, &circle, axis, &shifts, cfg).unwrap();
        let crossings = zero_crossings(&profile);
        let nearest = crossings.iter().copied().min_by(|a, b| a.abs().total_cmp(&b.abs()));
        ok &= nearest.is_some_and(|c| c.abs() <= 1.0);
        write!(detail, "{axis:?} crossing {nearest:.3?} px, ").unwrap();
    }
    let d_ap = circle.diameter();
    let scales: Vec<f64> = (0..=200).map(|i| 0.5 + i as f64 * 0.005).collect();
    let profile = functional_profile(frame, &circle, ProfileAxis::Diameter, &scales, cfg).unwrap();
    let crossings = zero_crossings(&profile);
    let diameter_ok = crossings.len() == 1 && (crossings[0] * d_ap - d_ap).abs() <= 1.0;
    let pattern_ok = diameter_ok
        && profile.iter().all(|p| {
            let d = p.abscissa * d_ap;
            if d < crossings[0] * d_ap - 1.0 {
                p.mean_functional > 0.0
            } else if d > crossings[0] * d_ap + 1.0 {
                p.mean_functional < 0.0
            } else {
                true
            }
        });
    ok &= diameter_ok && pattern_ok;
    write!(
        detail,
        "diameter crossings {:.3?} px from D_AP (one within 1 px), sign pattern {}",
        crossings.iter().map(|c| c * d_ap - d_ap).collect::<Vec<_>>(),
        if pattern_ok { "+ below / - above" } else { "broken" }
    )
    .unwrap();
    report.check("equilibrium", ok, detail);
}

fn static_drift(report: &mut Report, cfg: &EngineConfig) {
    let spec = PhantomSpec {
        frame_count: 30,
        ..PhantomSpec::standard().frozen()
    };
    let (frames, truth) = render_phantom(&spec).unwrap();
    let result = track_video(&frames, click(&truth), cfg).unwrap();
    let first = result.per_frame[0].circle;
    let drift = result.per_frame.iter().fold(0.0f64, |m, r| {
        m.max((r.circle.x_c - first.x_c).abs())
            .max((r.circle.y_c - first.y_c).abs())
            .max((r.diameter_px - result.per_frame[0].diameter_px).abs())
    });
    report.check(
        "static drift",
        drift < 0.1,
        format!("max center or diameter change {drift:.2e} px over 30 identical frames (< 0.1)"),
    );
}

fn baselines(report: &mut Report, frames: &[Frame], truth: &PhantomTruth, cfg: &EngineConfig, proposed: f64) {
    let full = EngineConfig {
        region_policy: RegionPolicy::full_complement(),
        ..*cfg
    };
    let run = |functional| {
        let c = EngineConfig { functional, ..full };
        rms_px(&track_video(frames, click(truth), &c).unwrap(), truth).0
    };
    let mean = run(Functional::Mean);
    let variance = run(Functional::Variance);
    let ok = proposed < mean && proposed < variance && mean.max(variance) > 5.0 * proposed;
    report.check(
        "baseline failure",
        ok,
        format!("RMS proposed {proposed:.3}, mean {mean:.3}, variance {variance:.3} px (both worse, one > 5x)"),
    );
}

fn alpha_shape(report: &mut Report, frames: &[Frame], truth: &PhantomTruth, cfg: &EngineConfig) {
    let alphas = [1e-5, 1e-4, 5e-4, 5e-2];
    let sweep = alpha_sweep(frames, click(truth), &alphas, &truth.diameters_cm(), cfg).unwrap();
    let rms: Vec<f64> = sweep.iter().map(|p| p.rms.unwrap_or(f64::INFINITY)).collect();
    let flat = &rms[..3];
    let spread = flat.iter().copied().fold(0.0, f64::max) / flat.iter().copied().fold(f64::INFINITY, f64::min);
    let ok = spread <= 2.0 && rms[3] > rms[1];
    let px = truth.pixel_spacing_cm;
    report.check(
        "alpha sensitivity",
        ok,
        format!(
            "RMS {} px; spread over 1e-5..5e-4 {spread:.3}x (<= 2), 5e-2 above 1e-4",
            alphas
                .iter()
                .zip(&rms)
                .map(|(a, r)| if r.is_finite() { format!("{a:e}: {:.3}", r / px) } else { format!("{a:e}: tracking failed") })
                .collect::<Vec<_>>()
                .join(", ")
        ),
    );
}

fn filter_shape(report: &mut Report, frames: &[Frame], truth: &PhantomTruth, cfg: &EngineConfig, base: f64) {
    let mut ok = true;
    let mut parts = Vec::new();
    for kind in [FilterKind::Median, FilterKind::Bilateral, FilterKind::Wiener] {
        let spec = FilterSpec::of_kind(kind);
        let filtered: Vec<Frame> = frames.iter().map(|f| apply_filter(f, &spec).unwrap()).collect();
        let rms = rms_px(&track_video(&filtered, click(truth), cfg).unwrap(), truth).0;
        let change = rms / base - 1.0;
        ok &= change.abs() < 0.2;
        parts.push(format!("{kind:?} {rms:.3} px ({:+.1}%)", 100.0 * change));
    }
    report.check(
        "filter study",
        ok,
        format!("unfiltered {base:.3} px; {} (each within +-20%)", parts.join(", ")),
    );
}

fn ellipse(report: &mut Report, cfg: &EngineConfig) {
    let mut ok = true;
    let mut parts = Vec::new();
    for aspect in [1.0, 1.25, 1.5] {
        let spec = PhantomSpec {
            aspect_ratio: aspect,
            frame_count: 1,
            ..PhantomSpec::standard().noiseless()
        };
        let (frames, truth) = render_phantom(&spec).unwrap();
        let t = truth.frames[0];
        let r = track_video(&frames, [t.center_x, t.center_y], cfg).unwrap();
        let err = r.per_frame[0].diameter_px / t.ap_diameter_px - 1.0;
        ok &= err.abs() < 0.05;
        parts.push(format!("b/a {aspect}: {:+.2}%", 100.0 * err));
    }
    report.check(
        "ellipse adequacy",
        ok,
        format!("diameter error vs 2a {} (each within 5%)", parts.join(", ")),
    );
}

fn csv_of(result: &TrackResult) -> String {
    let mut out = String::from("frame_index,x_c,y_c,R_px,diameter_px,diameter_cm,iterations,converged\n");
    for (i, r) in result.per_frame.iter().enumerate() {
        writeln!(
            out,
            "{i},{},{},{},{},{},{},{}",
            r.circle.x_c, r.circle.y_c, r.circle.radius, r.diameter_px, r.diameter_cm, r.iterations, r.converged
        )
        .unwrap();
    }
    out
}

fn determinism(report: &mut Report, cfg: &EngineConfig) {
    let spec = PhantomSpec {
        frame_count: 60,
        ..PhantomSpec::standard()
    };
    let run = || {
        let (frames, truth) = render_phantom(&spec).unwrap();
        csv_of(&track_video(&frames, click(&truth), cfg).unwrap())
    };
    let (a, b) = (run(), run());
    report.check(
        "determinism",
        a == b,
        format!("two 60-frame runs produce {} and {} CSV bytes, identical: {}", a.len(), b.len(), a == b),
    );
}

fn main() {
    let mut report = Report {
        passed: 0,
        failed: Vec::new(),
    };
    let cfg = EngineConfig::default();

    theorem_oracle(&mut report);

    let (frames, truth) = render_phantom(&PhantomSpec::standard()).unwrap();
    equilibrium(&mut report, &frames[0], &truth, &cfg);

    let mut frame_ms = Vec::with_capacity(frames.len());
    let start = Instant::now();
    let mut last = Instant::now();
    let result = track_video_with(&frames, click(&truth), &cfg, |_, _| {
        frame_ms.push(last.elapsed().as_secs_f64() * 1e3);
        last = Instant::now();
    })
    .unwrap();
    let clip_secs = start.elapsed().as_secs_f64();
    let (rms, max) = rms_px(&result, &truth);
    report.check(
        "tracking accuracy",
        rms < 1.5 && max < 4.0 && clip_secs < 10.0,
        format!(
            "{} frames, RMS {rms:.3} px (< 1.5), |e|max {max:.3} px (< 4), clip {clip_secs:.2} s (< 10)",
            frames.len()
        ),
    );
    static_drift(&mut report, &cfg);

    frame_ms.sort_by(f64::total_cmp);
    let median_ms = frame_ms[frame_ms.len() / 2];
    let max_area = truth
        .frames
        .iter()
        .map(|t| std::f64::consts::PI * t.semi_axis_ap * t.semi_axis_lateral)
        .fold(0.0, f64::max);
    report.check(
        "per-frame runtime",
        median_ms < 10.0 && max_area <= 5000.0,
        format!("median {median_ms:.3} ms per warm-started frame (< 10), vessel area up to {max_area:.0} px"),
    );

    baselines(&mut report, &frames, &truth, &cfg, rms);
    alpha_shape(&mut report, &frames, &truth, &cfg);
    filter_shape(&mut report, &frames, &truth, &cfg, rms);
    ellipse(&mut report, &cfg);
    determinism(&mut report, &cfg);

    let total = report.passed + report.failed.len();
    println!("acceptance: {} of {total} criteria passed", report.passed);
    if !report.failed.is_empty() {
        println!("failed: {}", report.failed.join(", "));
        if std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
            std::process::exit(1);
        }
    }
}
