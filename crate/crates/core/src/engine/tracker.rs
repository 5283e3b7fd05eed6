use serde::Serialize;

use super::functional::functional_proposed;
use super::region::RegionIntegrator;
use super::update::apply_forces;
use crate::error::{invalid, Result};
use crate::model::{contour_point, AngleTable, Circle, EngineConfig, Frame, Functional};

/// Outcome of evolving the circle on one frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameResult {
    pub circle: Circle,
    pub diameter_px: f64,
    pub diameter_cm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub max_final_force: f64,
    /// The radius hit `min_radius` at least once.
    pub radius_clamped: bool,
    /// First iteration whose update left the circle bit-for-bit unchanged.
    /// Every later iteration would repeat it exactly, so the loop stops there
    /// and reports the state it would have reached at `max_iterations`.
    pub fixed_point_at: Option<usize>,
    /// Set when the frame failed; `circle` is then the initialization.
    pub error: Option<String>,
}

impl FrameResult {
    fn new(circle: Circle, spacing_cm: f64) -> Self {
        Self {
            circle,
            diameter_px: circle.diameter(),
            diameter_cm: circle.diameter() * spacing_cm,
            iterations: 0,
            converged: false,
            max_final_force: 0.0,
            radius_clamped: false,
            fixed_point_at: None,
            error: None,
        }
    }

    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackResult {
    pub per_frame: Vec<FrameResult>,
    pub seed: [f64; 2],
    pub config: EngineConfig,
}

impl TrackResult {
    pub fn diameters_px(&self) -> Vec<f64> {
        self.per_frame.iter().map(|r| r.diameter_px).collect()
    }

    pub fn diameters_cm(&self) -> Vec<f64> {
        self.per_frame.iter().map(|r| r.diameter_cm).collect()
    }
}

/// Per-frame state reused across iterations.
struct Evolver<'a> {
    frame: &'a Frame,
    integrator: RegionIntegrator,
    table: AngleTable,
    forces: Vec<f64>,
    config: &'a EngineConfig,
}

impl<'a> Evolver<'a> {
    fn new(frame: &'a Frame, config: &'a EngineConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            frame,
            integrator: RegionIntegrator::new(frame),
            table: AngleTable::new(config.samples)?,
            forces: vec![0.0; config.samples],
            config,
        })
    }

    /// Fills `forces` from the contour intensities and returns the largest
    /// magnitude. Generic so the functional is resolved once per iteration.
    #[inline]
    fn sample_forces(&mut self, circle: &Circle, force: impl Fn(f64) -> f64) -> f64 {
        let interior = self.contour_is_interior(circle);
        let mut max_force = 0.0f64;
        for (f, n) in self.forces.iter_mut().zip(self.table.normals()) {
            let p = contour_point(circle, n);
            let intensity = if interior {
                self.frame.bilinear_interior(p[0], p[1])
            } else {
                self.frame.bilinear(p[0], p[1])
            };
            *f = force(intensity);
            max_force = max_force.max(f.abs());
        }
        max_force
    }

    /// Every contour point stays clear of the last pixel row and column.
    fn contour_is_interior(&self, circle: &Circle) -> bool {
        // slack absorbs rounding in center + radius * normal
        let r = circle.radius + 1e-6;
        let max_x = (self.frame.width() - 1) as f64;
        let max_y = (self.frame.height() - 1) as f64;
        circle.x_c - r >= 0.0 && circle.y_c - r >= 0.0 && circle.x_c + r < max_x && circle.y_c + r < max_y
    }

    fn run(&mut self, init: Circle) -> Result<FrameResult> {
        let cfg = self.config;
        let alpha = cfg.effective_alpha();
        let mut circle = init;
        let mut result = FrameResult::new(init, self.frame.pixel_spacing_cm());
        for iteration in 1..=cfg.max_iterations {
            let stats = self.integrator.stats(&circle, &cfg.region_policy)?;
            let max_force = match cfg.functional {
                Functional::Proposed => {
                    self.sample_forces(&circle, |i| functional_proposed(stats.u, stats.v, i, alpha))
                }
                f => self.sample_forces(&circle, |i| f.force(&stats, i, alpha)),
            };
            result.iterations = iteration;
            result.max_final_force = max_force;
            if max_force < cfg.convergence_force {
                result.converged = true;
                break;
            }
            let step = apply_forces(&circle, &self.forces, self.table.normals(), cfg.min_radius);
            result.radius_clamped |= step.radius_clamped;
            if !max_force.is_finite() {
                return Err(crate::Error::DegenerateRegion("forces diverged".into()));
            }
            if same_bits(&step.circle, &circle) {
                // the iteration is a pure function of the circle, so the
                // remaining ones would all reproduce this state
                result.fixed_point_at = Some(iteration);
                result.iterations = cfg.max_iterations;
                break;
            }
            circle = step.circle;
        }
        circle.validate()?;
        result.circle = circle;
        result.diameter_px = circle.diameter();
        result.diameter_cm = circle.diameter() * self.frame.pixel_spacing_cm();
        Ok(result)
    }
}

fn same_bits(a: &Circle, b: &Circle) -> bool {
    a.x_c.to_bits() == b.x_c.to_bits() && a.y_c.to_bits() == b.y_c.to_bits() && a.radius.to_bits() == b.radius.to_bits()
}

/// Evolves `init` on `frame` until the largest force drops below
/// `convergence_force` or `max_iterations` is reached.
pub fn converge_frame(frame: &Frame, init: Circle, config: &EngineConfig) -> Result<FrameResult> {
    init.validate()?;
    if init.radius < config.min_radius {
        return Err(invalid("initial radius is below min_radius"));
    }
    Evolver::new(frame, config)?.run(init)
}

/// Tracks the circle through `frames`, starting from a circle of
/// `init_radius` at `seed` and warm-starting each frame from the previous
/// converged circle.
pub fn track_video(frames: &[Frame], seed: [f64; 2], config: &EngineConfig) -> Result<TrackResult> {
    track_video_with(frames, seed, config, |_, _| {})
}

/// [`track_video`] with a callback invoked after every frame.
pub fn track_video_with(
    frames: &[Frame],
    seed: [f64; 2],
    config: &EngineConfig,
    mut on_frame: impl FnMut(usize, &FrameResult),
) -> Result<TrackResult> {
    config.validate()?;
    let first = frames.first().ok_or_else(|| invalid("no frames to track"))?;
    if !first.contains(seed[0], seed[1]) {
        return Err(invalid(format!(
            "seed out of bounds: ({}, {}) not in {}x{} frame",
            seed[0],
            seed[1],
            first.width(),
            first.height()
        )));
    }
    let mut current = Circle::new(seed[0], seed[1], config.init_radius)?;
    let mut per_frame = Vec::with_capacity(frames.len());
    for (index, frame) in frames.iter().enumerate() {
        let result = match converge_frame(frame, current, config) {
            Ok(r) => {
                current = r.circle;
                r
            }
            Err(e) => FrameResult {
                error: Some(e.to_string()),
                ..FrameResult::new(current, frame.pixel_spacing_cm())
            },
        };
        on_frame(index, &result);
        per_frame.push(result);
    }
    Ok(TrackResult {
        per_frame,
        seed,
        config: *config,
    })
}
