//! Region statistics, evolution functionals, the circle update and tracking.

mod functional;
mod region;
mod tracker;
mod update;

pub use functional::{compute_forces, functional_mean, functional_proposed, functional_variance};
pub use region::{region_stats, RegionIntegrator};
pub use tracker::{converge_frame, track_video, track_video_with, FrameResult, TrackResult};
pub use update::{fit_circle_direct, shifted_points, update_circle, CircleUpdate};
