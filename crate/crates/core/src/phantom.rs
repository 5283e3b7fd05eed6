//! Synthetic ultrasound-like vessel videos with exact ground truth.
//!
//! Each frame is a dark ellipse (`mean_in`) on a bright field (`mean_out`)
//! with the AP (vertical) semi-axis `a(t) = D(t)/2` and the lateral
//! semi-axis `b(t) = aspect_ratio · a(t)`, where
//! `D(t) = base_diameter + diameter_amplitude · sin(2πt / diameter_period)`
//! and `t` is the frame index. The image is then:
//!
//! 1. softened across the wall inside each gap arc,
//! 2. blurred with a Gaussian of `blur_sigma`,
//! 3. multiplied pixel-wise by independent unit-mean Rayleigh factors,
//! 4. clipped to `[0, 1]`.
//!
//! All randomness comes from `rng_seed`; frame `t` draws from stream `t`
//! (or stream 0 for every frame when `speckle_per_frame` is false).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::filters::gaussian_blur;
use crate::model::{default_pixel_spacing_cm, Circle, Frame};

/// Smallest radius the tracker clamps to; the vessel must stay well above it.
const MIN_TRACKED_RADIUS: f64 = 2.0;

/// Parameters of a synthetic vessel video. Lengths are in pixels, periods in
/// frames, angles in degrees measured from +x toward +y (image down).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSpec {
    pub width: usize,
    pub height: usize,
    pub frame_count: usize,
    pub fps: f64,
    pub center_x: f64,
    pub center_y: f64,
    pub center_motion_x: f64,
    pub center_motion_y: f64,
    pub center_motion_period: f64,
    pub base_diameter: f64,
    pub diameter_amplitude: f64,
    pub diameter_period: f64,
    /// Lateral over AP semi-axis, `b / a`.
    pub aspect_ratio: f64,
    pub mean_in: f64,
    pub mean_out: f64,
    pub blur_sigma: f64,
    /// Angular arcs `[start, end]` where the wall contrast is suppressed.
    pub gaps: Vec<[f64; 2]>,
    /// Half-width of the softened band around the wall, as a fraction of the
    /// normalized elliptic radius.
    pub gap_width: f64,
    pub speckle: bool,
    pub rayleigh_scale: f64,
    pub speckle_per_frame: bool,
    pub rng_seed: u64,
    /// Defaults to 19 cm over the frame height.
    pub pixel_spacing_cm: Option<f64>,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self::standard()
    }
}

impl PhantomSpec {
    /// The reference phantom: 450 frames at 30 fps, `D(t) = 60 + 15 sin(2πt/150)`,
    /// speckle and wall blur on.
    pub fn standard() -> Self {
        Self {
            width: 192,
            height: 192,
            frame_count: 450,
            fps: 30.0,
            center_x: 96.0,
            center_y: 96.0,
            center_motion_x: 2.0,
            center_motion_y: 3.0,
            center_motion_period: 90.0,
            base_diameter: 60.0,
            diameter_amplitude: 15.0,
            diameter_period: 150.0,
            aspect_ratio: 1.0,
            mean_in: 0.02,
            mean_out: 0.3,
            blur_sigma: 2.0,
            gaps: Vec::new(),
            gap_width: 0.25,
            speckle: true,
            rayleigh_scale: 1.0,
            speckle_per_frame: true,
            rng_seed: 7,
            pixel_spacing_cm: None,
        }
    }

    /// Sharp-edged, noise-free version of `self`.
    pub fn noiseless(mut self) -> Self {
        self.blur_sigma = 0.0;
        self.speckle = false;
        self
    }

    /// Motionless version of `self` whose frames are all identical.
    pub fn frozen(mut self) -> Self {
        self.diameter_amplitude = 0.0;
        self.center_motion_x = 0.0;
        self.center_motion_y = 0.0;
        self.speckle_per_frame = false;
        self
    }

    /// Parses the flat `key = value` (TOML) phantom file format; missing
    /// keys take their [`PhantomSpec::standard`] values.
    pub fn parse(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| invalid(format!("phantom spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("phantom spec serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < crate::model::MIN_FRAME_EDGE || self.height < crate::model::MIN_FRAME_EDGE {
            return Err(invalid("phantom frames must be at least 16x16"));
        }
        if self.frame_count < 1 {
            return Err(invalid("frame_count must be at least 1"));
        }
        let unit = 0.0..=1.0;
        if !unit.contains(&self.mean_in) || !unit.contains(&self.mean_out) {
            return Err(invalid("mean intensities must lie in [0, 1]"));
        }
        if self.mean_in >= self.mean_out {
            return Err(invalid("mean_in must be below mean_out"));
        }
        if !(self.base_diameter - self.diameter_amplitude.abs() > 2.0 * MIN_TRACKED_RADIUS) {
            return Err(invalid(
                "base_diameter - |diameter_amplitude| must exceed twice the minimum radius",
            ));
        }
        let positive = [
            ("fps", self.fps),
            ("diameter_period", self.diameter_period),
            ("center_motion_period", self.center_motion_period),
            ("aspect_ratio", self.aspect_ratio),
            ("rayleigh_scale", self.rayleigh_scale),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(invalid(format!("{name} must be positive")));
            }
        }
        if !(self.blur_sigma >= 0.0 && self.blur_sigma.is_finite()) {
            return Err(invalid("blur_sigma must be non-negative"));
        }
        if !(self.gap_width > 0.0 && self.gap_width < 1.0) {
            return Err(invalid("gap_width must lie in (0, 1)"));
        }
        if let Some(s) = self.pixel_spacing_cm {
            if !(s > 0.0 && s.is_finite()) {
                return Err(invalid("pixel_spacing_cm must be positive"));
            }
        }
        Ok(())
    }

    pub fn spacing_cm(&self) -> f64 {
        self.pixel_spacing_cm
            .unwrap_or_else(|| default_pixel_spacing_cm(self.height))
    }

    /// `D(t)` in pixels.
    pub fn diameter_at(&self, t: f64) -> f64 {
        self.base_diameter + self.diameter_amplitude * (2.0 * PI * t / self.diameter_period).sin()
    }

    pub fn center_at(&self, t: f64) -> [f64; 2] {
        let phase = (2.0 * PI * t / self.center_motion_period).sin();
        [
            self.center_x + self.center_motion_x * phase,
            self.center_y + self.center_motion_y * phase,
        ]
    }

    fn truth_at(&self, index: usize) -> TruthFrame {
        let t = index as f64;
        let ap = self.diameter_at(t);
        let [center_x, center_y] = self.center_at(t);
        TruthFrame {
            center_x,
            center_y,
            ap_diameter_px: ap,
            semi_axis_ap: ap / 2.0,
            semi_axis_lateral: self.aspect_ratio * ap / 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthFrame {
    pub center_x: f64,
    pub center_y: f64,
    pub ap_diameter_px: f64,
    pub semi_axis_ap: f64,
    pub semi_axis_lateral: f64,
}

impl TruthFrame {
    /// Circle with the AP diameter at the vessel center.
    pub fn circle(&self) -> Circle {
        Circle {
            x_c: self.center_x,
            y_c: self.center_y,
            radius: self.semi_axis_ap,
        }
    }
}

/// Per-frame ground truth of a rendered phantom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomTruth {
    pub frames: Vec<TruthFrame>,
    pub pixel_spacing_cm: f64,
}

impl PhantomTruth {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn diameters_px(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.ap_diameter_px).collect()
    }

    pub fn diameters_cm(&self) -> Vec<f64> {
        self.frames
            .iter()
            .map(|f| f.ap_diameter_px * self.pixel_spacing_cm)
            .collect()
    }
}

/// AP diameter in pixels at `frame_index`.
pub fn truth_diameter(truth: &PhantomTruth, frame_index: usize) -> Result<f64> {
    truth
        .frames
        .get(frame_index)
        .map(|f| f.ap_diameter_px)
        .ok_or(Error::IndexOutOfRange {
            index: frame_index,
            len: truth.frames.len(),
        })
}

fn in_arc(angle: f64, arc: &[f64; 2]) -> bool {
    let start = arc[0].rem_euclid(360.0);
    let end = arc[1].rem_euclid(360.0);
    if start <= end {
        (start..=end).contains(&angle)
    } else {
        angle >= start || angle <= end
    }
}

fn render_frame(spec: &PhantomSpec, truth: &TruthFrame, index: usize) -> Vec<f64> {
    let (w, h) = (spec.width, spec.height);
    let a = truth.semi_axis_ap;
    let b = truth.semi_axis_lateral;
    let (a2, b2) = (a * a, b * b);
    let contrast = spec.mean_out - spec.mean_in;
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        let dy = y as f64 - truth.center_y;
        for x in 0..w {
            let dx = x as f64 - truth.center_x;
            let inside = dx * dx * a2 + dy * dy * b2 <= a2 * b2;
            let mut value = if inside { spec.mean_in } else { spec.mean_out };
            if !spec.gaps.is_empty() {
                let rho = (dx * dx / b2 + dy * dy / a2).sqrt();
                if (rho - 1.0).abs() <= spec.gap_width {
                    let angle = dy.atan2(dx).to_degrees().rem_euclid(360.0);
                    if spec.gaps.iter().any(|arc| in_arc(angle, arc)) {
                        let t = (rho - (1.0 - spec.gap_width)) / (2.0 * spec.gap_width);
                        value = spec.mean_in + contrast * t;
                    }
                }
            }
            data.push(value);
        }
    }
    let mut data = gaussian_blur(&data, w, h, spec.blur_sigma);
    if spec.speckle {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
        rng.set_stream(if spec.speckle_per_frame { index as u64 } else { 0 });
        let scale = spec.rayleigh_scale;
        let mean = scale * (PI / 2.0).sqrt();
        for v in data.iter_mut() {
            let u: f64 = rng.random();
            let sample = scale * (-2.0 * (1.0 - u).ln()).sqrt();
            *v *= sample / mean;
        }
    }
    data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    data
}

/// Renders every frame of `spec` together with its ground truth.
pub fn render_phantom(spec: &PhantomSpec) -> Result<(Vec<Frame>, PhantomTruth)> {
    spec.validate()?;
    let spacing = spec.spacing_cm();
    let truth: Vec<TruthFrame> = (0..spec.frame_count).map(|i| spec.truth_at(i)).collect();
    let frames = truth
        .par_iter()
        .enumerate()
        .map(|(i, t)| Frame::new(spec.width, spec.height, render_frame(spec, t, i), spacing))
        .collect::<Result<Vec<_>>>()?;
    Ok((
        frames,
        PhantomTruth {
            frames: truth,
            pixel_spacing_cm: spacing,
        },
    ))
}
