//! Active-circle estimation and tracking of the anterior-posterior diameter
//! of a vessel in grayscale ultrasound video.
//!
//! A circle sampled at `K` points is evolved by per-point forces
//! `f_k = α(u − v)(2I_k − u − v)`, where `u` and `v` are the mean intensities
//! inside and outside the circle and `I_k` is the image intensity at the
//! sample. Each iteration moves the center by the mean force vector and the
//! radius by the mean force, which is the exact least-squares circle through
//! the displaced samples.
//!
//! Modules:
//! - [`model`]: frames, circles, contours and configuration.
//! - [`engine`]: region statistics, functionals, the circle update and tracking.
//! - [`phantom`]: synthetic speckled vessel videos with exact ground truth.
//! - [`filters`]: median, bilateral and Wiener pre-filters.
//! - [`evaluation`]: error metrics, α sweeps, functional profiles, histograms.

pub mod engine;
pub mod error;
pub mod evaluation;
pub mod filters;
pub mod model;
pub mod phantom;

pub use engine::{
    compute_forces, converge_frame, fit_circle_direct, functional_mean, functional_proposed,
    functional_variance, region_stats, track_video, track_video_with, update_circle, FrameResult,
    RegionIntegrator, TrackResult,
};
pub use error::{Error, Result};
pub use model::{
    bilinear_intensity, sample_circle, Circle, EngineConfig, ForceSet, Frame, Functional,
    RegionMode, RegionPolicy, RegionStats, SampledContour,
};

/// Minimum number of samples accepted by [`sample_circle`].
pub const MIN_CONTOUR_SAMPLES: usize = 3;

/// Minimum `K` accepted by [`EngineConfig`].
pub const MIN_SAMPLES: usize = 8;
