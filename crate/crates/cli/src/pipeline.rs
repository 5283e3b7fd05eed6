use activecircle::filters::{apply_filter, FilterKind};
use activecircle::{track_video_with, FrameResult, Frame, TrackResult};

use crate::config::RunConfig;
use crate::error::Result;

/// Pre-filters `frames` as configured and tracks from `seed`. The CLI and
/// the HTTP service both go through here so their results match exactly.
pub fn run_tracking(
    frames: &[Frame],
    seed: [f64; 2],
    config: &RunConfig,
    on_frame: impl FnMut(usize, &FrameResult),
) -> Result<TrackResult> {
    let filtered;
    let input = if config.filter.kind == FilterKind::None {
        frames
    } else {
        filtered = frames
            .iter()
            .map(|f| apply_filter(f, &config.filter))
            .collect::<activecircle::Result<Vec<_>>>()?;
        &filtered
    };
    Ok(track_video_with(input, seed, &config.engine, on_frame)?)
}
