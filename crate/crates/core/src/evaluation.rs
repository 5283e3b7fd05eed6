//! Error metrics, α sweeps, functional profiles and intensity histograms.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::ops::Range;

use crate::engine::{functional_proposed, region_stats, track_video};
use crate::error::{invalid, Error, Result};
use crate::model::{sample_circle, Circle, EngineConfig, Frame};

/// Error summary of an estimated diameter series against a reference.
/// Values carry the unit of the input series (cm in reports).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rms_error: f64,
    pub e_ave: f64,
    pub sigma_e: f64,
    pub abs_e_max: f64,
    pub d_max_alg: f64,
    pub d_min_alg: f64,
    pub d_max_ref: f64,
    pub d_min_ref: f64,
    pub frames_used: Range<usize>,
}

/// Metrics over `range` of `e_t = estimate_t − reference_t`. `sigma_e` is the
/// population standard deviation.
pub fn compute_metrics(
    estimates: &[f64],
    reference: &[f64],
    range: Range<usize>,
) -> Result<MetricReport> {
    if estimates.len() != reference.len() {
        return Err(Error::LengthMismatch {
            left: estimates.len(),
            right: reference.len(),
        });
    }
    if range.is_empty() {
        return Err(Error::EmptyRange);
    }
    if range.end > estimates.len() {
        return Err(Error::IndexOutOfRange {
            index: range.end - 1,
            len: estimates.len(),
        });
    }
    let est = &estimates[range.clone()];
    let refs = &reference[range.clone()];
    let n = est.len() as f64;
    let errors: Vec<f64> = est.iter().zip(refs).map(|(e, r)| e - r).collect();
    let e_ave = errors.iter().sum::<f64>() / n;
    let rms = (errors.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
    let sigma = (errors.iter().map(|e| (e - e_ave).powi(2)).sum::<f64>() / n).sqrt();
    let abs_max = errors.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let extrema = |s: &[f64]| {
        s.iter()
            .fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), v| (hi.max(*v), lo.min(*v)))
    };
    let (d_max_alg, d_min_alg) = extrema(est);
    let (d_max_ref, d_min_ref) = extrema(refs);
    Ok(MetricReport {
        rms_error: rms,
        e_ave,
        sigma_e: sigma,
        abs_e_max: abs_max,
        d_max_alg,
        d_min_alg,
        d_max_ref,
        d_min_ref,
        frames_used: range,
    })
}

impl MetricReport {
    /// The flat `key: value` summary printed by the CLI.
    pub fn summary(&self) -> String {
        format!(
            "frames: {}..{}\nrms_error: {:.6}\ne_ave: {:.6}\nsigma_e: {:.6}\nabs_e_max: {:.6}\n\
             d_max_alg: {:.6}\nd_min_alg: {:.6}\nd_max_ref: {:.6}\nd_min_ref: {:.6}\n",
            self.frames_used.start,
            self.frames_used.end,
            self.rms_error,
            self.e_ave,
            self.sigma_e,
            self.abs_e_max,
            self.d_max_alg,
            self.d_min_alg,
            self.d_max_ref,
            self.d_min_ref
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub alpha: f64,
    /// `None` when tracking failed for this α.
    pub rms: Option<f64>,
}

/// Tracks `frames` once per α (otherwise fixed `config`) and reports the RMS
/// diameter error in cm against `reference_cm`.
pub fn alpha_sweep(
    frames: &[Frame],
    seed: [f64; 2],
    alphas: &[f64],
    reference_cm: &[f64],
    config: &EngineConfig,
) -> Result<Vec<SweepPoint>> {
    if alphas.is_empty() {
        return Err(invalid("alpha sweep needs at least one value"));
    }
    if alphas.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
        return Err(invalid("alphas must be positive"));
    }
    if alphas.windows(2).any(|w| w[0] > w[1]) {
        return Err(invalid("alphas must be sorted"));
    }
    if frames.len() != reference_cm.len() {
        return Err(Error::LengthMismatch {
            left: frames.len(),
            right: reference_cm.len(),
        });
    }
    Ok(alphas
        .par_iter()
        .map(|&alpha| {
            let cfg = EngineConfig { alpha, ..*config };
            let rms = track_video(frames, seed, &cfg).ok().and_then(|track| {
                if track.per_frame.iter().any(|r| r.failed()) {
                    return None;
                }
                compute_metrics(&track.diameters_cm(), reference_cm, 0..frames.len())
                    .ok()
                    .map(|m| m.rms_error)
            });
            SweepPoint { alpha, rms }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileAxis {
    /// Horizontal center shift in pixels.
    Dx,
    /// Vertical center shift in pixels.
    Dy,
    /// Diameter relative to the reference, `D / D_AP`.
    Diameter,
}

impl std::str::FromStr for ProfileAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dx" => Ok(Self::Dx),
            "dy" => Ok(Self::Dy),
            "diameter" => Ok(Self::Diameter),
            other => Err(invalid(format!("unknown profile axis `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfilePoint {
    pub abscissa: f64,
    pub mean_functional: f64,
}

/// The averaged proposed functional around `truth_circle`.
///
/// Along `Dx`/`Dy` the value is the matching component of the mean force
/// vector `(1/K) Σ f_k n_k`, i.e. the center step. Along `Diameter` it is the
/// mean force `(1/K) Σ f_k`, the radius step.
pub fn functional_profile(
    frame: &Frame,
    truth_circle: &Circle,
    axis: ProfileAxis,
    offsets: &[f64],
    config: &EngineConfig,
) -> Result<Vec<ProfilePoint>> {
    config.validate()?;
    let alpha = config.effective_alpha();
    offsets
        .iter()
        .map(|&offset| {
            let circle = match axis {
                ProfileAxis::Dx => Circle {
                    x_c: truth_circle.x_c + offset,
                    ..*truth_circle
                },
                ProfileAxis::Dy => Circle {
                    y_c: truth_circle.y_c + offset,
                    ..*truth_circle
                },
                ProfileAxis::Diameter => Circle {
                    radius: truth_circle.radius * offset,
                    ..*truth_circle
                },
            };
            let contour = sample_circle(circle, config.samples)?;
            let stats = region_stats(frame, &circle, &config.region_policy)?;
            let mut acc = 0.0;
            for (p, n) in contour.points.iter().zip(&contour.normals) {
                let f = functional_proposed(stats.u, stats.v, frame.bilinear(p[0], p[1]), alpha);
                acc += match axis {
                    ProfileAxis::Dx => f * n[0],
                    ProfileAxis::Dy => f * n[1],
                    ProfileAxis::Diameter => f,
                };
            }
            Ok(ProfilePoint {
                abscissa: offset,
                mean_functional: acc / contour.len() as f64,
            })
        })
        .collect()
}

/// Linearly interpolated abscissae where the profile changes sign.
pub fn zero_crossings(profile: &[ProfilePoint]) -> Vec<f64> {
    profile
        .windows(2)
        .filter_map(|w| {
            let (a, b) = (w[0], w[1]);
            if a.mean_functional == 0.0 {
                Some(a.abscissa)
            } else if a.mean_functional.signum() != b.mean_functional.signum()
                && b.mean_functional != 0.0
            {
                let t = a.mean_functional / (a.mean_functional - b.mean_functional);
                Some(a.abscissa + t * (b.abscissa - a.abscissa))
            } else {
                None
            }
        })
        .collect()
}

pub const HISTOGRAM_BINS: usize = 64;

/// Normalized intensity histogram over `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub bins: Vec<f64>,
    pub pixel_count: usize,
}

impl Histogram {
    pub fn bin_of(intensity: f64) -> usize {
        ((intensity * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1)
    }

    pub fn bin_center(index: usize) -> f64 {
        (index as f64 + 0.5) / HISTOGRAM_BINS as f64
    }
}

/// PDF of the pixels inside `circle` scaled by `scale` about its center.
pub fn intensity_histogram(frame: &Frame, circle: &Circle, scale: f64) -> Result<Histogram> {
    if !(scale > 0.0) {
        return Err(invalid("histogram scale must be positive"));
    }
    let scaled = Circle::new(circle.x_c, circle.y_c, circle.radius * scale)?;
    let mut counts = vec![0usize; HISTOGRAM_BINS];
    let mut total = 0usize;
    for y in 0..frame.height() {
        for x in 0..frame.width() {
            if scaled.contains_point(x as f64, y as f64) {
                counts[Histogram::bin_of(frame.get(x, y))] += 1;
                total += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::DegenerateRegion("histogram region is empty".into()));
    }
    Ok(Histogram {
        bins: counts.iter().map(|c| *c as f64 / total as f64).collect(),
        pixel_count: total,
    })
}
