//! Domain types shared by the engine, the phantom generator and the
//! evaluation code.
//!
//! Coordinates are in pixels with pixel centers at integer positions:
//! `x` runs along a row (column index), `y` down the image (row index).

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Result};

/// Smallest accepted frame edge, in pixels.
pub const MIN_FRAME_EDGE: usize = 16;

/// Scan depth used to derive a default pixel spacing when none is supplied.
pub const DEFAULT_SCAN_DEPTH_CM: f64 = 19.0;

/// A normalized grayscale image. Intensities are stored row-major in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    data: Vec<f64>,
    pixel_spacing_cm: f64,
}

impl Frame {
    pub fn new(width: usize, height: usize, data: Vec<f64>, pixel_spacing_cm: f64) -> Result<Self> {
        if width < MIN_FRAME_EDGE || height < MIN_FRAME_EDGE {
            return Err(invalid(format!(
                "frame must be at least {MIN_FRAME_EDGE}x{MIN_FRAME_EDGE}, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(invalid(format!(
                "frame data has {} values, expected {}",
                data.len(),
                width * height
            )));
        }
        if !(pixel_spacing_cm > 0.0 && pixel_spacing_cm.is_finite()) {
            return Err(invalid("pixel spacing must be positive"));
        }
        if let Some(i) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(invalid(format!(
                "intensity {} at index {i} is outside [0, 1]",
                data[i]
            )));
        }
        Ok(Self {
            width,
            height,
            data,
            pixel_spacing_cm,
        })
    }

    /// Constant-valued frame with the default spacing for its height.
    pub fn uniform(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(
            width,
            height,
            vec![value; width * height],
            default_pixel_spacing_cm(height),
        )
    }

    /// Builds a frame by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        pixel_spacing_cm: f64,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data, pixel_spacing_cm)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_spacing_cm(&self) -> f64 {
        self.pixel_spacing_cm
    }

    pub fn intensities(&self) -> &[f64] {
        &self.data
    }

    pub fn into_intensities(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Same pixels, different spacing.
    pub fn with_pixel_spacing(mut self, pixel_spacing_cm: f64) -> Result<Self> {
        if !(pixel_spacing_cm > 0.0 && pixel_spacing_cm.is_finite()) {
            return Err(invalid("pixel spacing must be positive"));
        }
        self.pixel_spacing_cm = pixel_spacing_cm;
        Ok(self)
    }

    /// Whether `(x, y)` lies within the pixel-center bounding box.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x <= (self.width - 1) as f64 && y <= (self.height - 1) as f64
    }

    /// Bilinear interpolation of the four pixels around `(x, y)`.
    /// Queries outside the frame are clamped to the border.
    #[inline]
    pub fn bilinear(&self, x: f64, y: f64) -> f64 {
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        // f64::max discards NaN, so NaN queries land on the border
        let x = x.max(0.0).min(max_x);
        let y = y.max(0.0).min(max_y);
        // non-negative after clamping, so truncation is floor
        let x0 = x as usize;
        let y0 = y as usize;
        let dx1 = usize::from(x0 + 1 < self.width);
        let dy1 = if y0 + 1 < self.height { self.width } else { 0 };
        self.blend(x0, y0, x - x0 as f64, y - y0 as f64, dx1, dy1)
    }

    /// [`Frame::bilinear`] without border handling, for callers that know
    /// `0 <= x < width - 1` and `0 <= y < height - 1`. Gives the same value.
    #[inline]
    pub(crate) fn bilinear_interior(&self, x: f64, y: f64) -> f64 {
        debug_assert!(x >= 0.0 && y >= 0.0);
        debug_assert!(x < (self.width - 1) as f64 && y < (self.height - 1) as f64);
        let x0 = x as usize;
        let y0 = y as usize;
        self.blend(x0, y0, x - x0 as f64, y - y0 as f64, 1, self.width)
    }

    #[inline(always)]
    fn blend(&self, x0: usize, y0: usize, fx: f64, fy: f64, dx1: usize, dy1: usize) -> f64 {
        let i = y0 * self.width + x0;
        let d = &self.data[i..i + dy1 + dx1 + 1];
        let top = (1.0 - fx) * d[0] + fx * d[dx1];
        let bottom = (1.0 - fx) * d[dy1] + fx * d[dy1 + dx1];
        (1.0 - fy) * top + fy * bottom
    }
}

/// Free-function form of [`Frame::bilinear`].
pub fn bilinear_intensity(frame: &Frame, x: f64, y: f64) -> f64 {
    frame.bilinear(x, y)
}

/// Spacing that maps the frame height onto the default scan depth.
pub fn default_pixel_spacing_cm(height: usize) -> f64 {
    DEFAULT_SCAN_DEPTH_CM / height as f64
}

/// The three-parameter contour model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub x_c: f64,
    pub y_c: f64,
    pub radius: f64,
}

impl Circle {
    pub fn new(x_c: f64, y_c: f64, radius: f64) -> Result<Self> {
        let circle = Self { x_c, y_c, radius };
        circle.validate()?;
        Ok(circle)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_c.is_finite() && self.y_c.is_finite()) {
            return Err(invalid("circle center must be finite"));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(invalid(format!(
                "circle radius must be positive, got {}",
                self.radius
            )));
        }
        Ok(())
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.radius
    }

    /// Pixel-center membership test shared by every region computation.
    #[inline]
    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        let dx = x - self.x_c;
        let dy = y - self.y_c;
        dx * dx + dy * dy <= self.radius * self.radius
    }
}

/// Uniform polar angles `2kπ/K` with their unit normals.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleTable {
    angles: Vec<f64>,
    normals: Vec<[f64; 2]>,
}

impl AngleTable {
    pub fn new(samples: usize) -> Result<Self> {
        if samples < 2 {
            return Err(invalid("at least two contour samples are required"));
        }
        let angles: Vec<f64> = (0..samples)
            .map(|k| 2.0 * k as f64 * PI / samples as f64)
            .collect();
        let normals = angles.iter().map(|t| unit_normal(*t)).collect();
        Ok(Self { angles, normals })
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn normals(&self) -> &[[f64; 2]] {
        &self.normals
    }
}

fn unit_normal(theta: f64) -> [f64; 2] {
    let (s, c) = theta.sin_cos();
    [c, s]
}

/// A circle sampled at `K` uniformly spaced polar angles.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledContour {
    pub circle: Circle,
    pub angles: Vec<f64>,
    pub normals: Vec<[f64; 2]>,
    pub points: Vec<[f64; 2]>,
}

impl SampledContour {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub(crate) fn from_table(circle: Circle, table: &AngleTable) -> Self {
        let points = table
            .normals()
            .iter()
            .map(|n| contour_point(&circle, n))
            .collect();
        Self {
            circle,
            angles: table.angles().to_vec(),
            normals: table.normals().to_vec(),
            points,
        }
    }
}

#[inline]
pub(crate) fn contour_point(circle: &Circle, normal: &[f64; 2]) -> [f64; 2] {
    [
        circle.x_c + circle.radius * normal[0],
        circle.y_c + circle.radius * normal[1],
    ]
}

/// Samples `circle` at `samples` points, `θ_k = 2kπ/K`.
pub fn sample_circle(circle: Circle, samples: usize) -> Result<SampledContour> {
    if samples < crate::MIN_CONTOUR_SAMPLES {
        return Err(invalid(format!(
            "contour needs at least {} samples, got {samples}",
            crate::MIN_CONTOUR_SAMPLES
        )));
    }
    circle.validate()?;
    Ok(SampledContour::from_table(circle, &AngleTable::new(samples)?))
}

/// Intensity statistics inside and outside a contour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionStats {
    pub u: f64,
    pub v: f64,
    pub var_u: f64,
    pub var_v: f64,
    pub area_u: usize,
    pub area_v: usize,
}

/// Per-sample forces along the contour normals, in pixels of displacement.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceSet {
    pub forces: Vec<f64>,
    pub angles: Vec<f64>,
}

impl ForceSet {
    pub fn len(&self) -> usize {
        self.forces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forces.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.forces.iter().fold(0.0, |m, f| m.max(f.abs()))
    }
}

/// Which pixels count as "outside" the contour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegionMode {
    /// Every frame pixel not inside the circle.
    FullComplement,
    /// The ring `R < r <= annulus_scale * R`, clipped to the frame.
    Annulus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionPolicy {
    pub mode: RegionMode,
    pub annulus_scale: f64,
}

impl RegionPolicy {
    pub const DEFAULT_ANNULUS_SCALE: f64 = 1.5;

    pub fn full_complement() -> Self {
        Self {
            mode: RegionMode::FullComplement,
            annulus_scale: Self::DEFAULT_ANNULUS_SCALE,
        }
    }

    pub fn annulus(scale: f64) -> Result<Self> {
        let policy = Self {
            mode: RegionMode::Annulus,
            annulus_scale: scale,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.annulus_scale > 1.0 && self.annulus_scale.is_finite()) {
            return Err(invalid("annulus scale must be greater than 1"));
        }
        Ok(())
    }
}

impl Default for RegionPolicy {
    fn default() -> Self {
        Self::full_complement()
    }
}

/// Evolution functional driving the per-sample forces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Functional {
    #[default]
    Proposed,
    Mean,
    Variance,
}

impl std::str::FromStr for Functional {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(Self::Proposed),
            "mean" => Ok(Self::Mean),
            "variance" => Ok(Self::Variance),
            other => Err(invalid(format!("unknown functional `{other}`"))),
        }
    }
}

/// Tracker parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub alpha: f64,
    #[serde(alias = "k")]
    pub samples: usize,
    pub init_radius: f64,
    pub max_iterations: usize,
    pub convergence_force: f64,
    pub min_radius: f64,
    /// Intensity range the functionals are evaluated on. Frames are stored
    /// normalized; forces are computed on intensities multiplied by this
    /// factor so `alpha` keeps its 8-bit calibration.
    pub intensity_scale: f64,
    pub region_policy: RegionPolicy,
    pub functional: Functional,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            alpha: 1e-4,
            samples: 32,
            init_radius: 6.0,
            max_iterations: 5000,
            convergence_force: 1e-3,
            min_radius: 2.0,
            intensity_scale: 255.0,
            region_policy: RegionPolicy::default(),
            functional: Functional::Proposed,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(invalid("alpha must be positive"));
        }
        if self.samples < crate::MIN_SAMPLES {
            return Err(invalid(format!(
                "K must be at least {}, got {}",
                crate::MIN_SAMPLES,
                self.samples
            )));
        }
        if !(self.min_radius > 0.0 && self.min_radius.is_finite()) {
            return Err(invalid("min_radius must be positive"));
        }
        if !(self.init_radius >= self.min_radius && self.init_radius.is_finite()) {
            return Err(invalid("init_radius must be at least min_radius"));
        }
        if self.max_iterations < 1 {
            return Err(invalid("max_iterations must be at least 1"));
        }
        if !(self.convergence_force > 0.0 && self.convergence_force.is_finite()) {
            return Err(invalid("convergence_force must be positive"));
        }
        if !(self.intensity_scale > 0.0 && self.intensity_scale.is_finite()) {
            return Err(invalid("intensity_scale must be positive"));
        }
        self.region_policy.validate()
    }

    /// Weight applied to functionals evaluated on normalized intensities.
    pub(crate) fn effective_alpha(&self) -> f64 {
        self.alpha * self.intensity_scale * self.intensity_scale
    }
}
