//! Evolution functionals and per-sample force computation.
//!
//! All three functionals return a signed magnitude along the outward normal:
//! positive values push a sample point outward.

use crate::error::Result;
use crate::model::{EngineConfig, ForceSet, Frame, Functional, RegionStats, SampledContour};

/// `α(u − v)(2I − u − v)`.
#[inline]
pub fn functional_proposed(u: f64, v: f64, intensity: f64, alpha: f64) -> f64 {
    alpha * (u - v) * (2.0 * intensity - u - v)
}

/// Mean-separation functional, `α(u − v)((I − u)/A_u + (I − v)/A_v)`.
#[inline]
pub fn functional_mean(u: f64, v: f64, intensity: f64, area_u: f64, area_v: f64, alpha: f64) -> f64 {
    alpha * (u - v) * ((intensity - u) / area_u + (intensity - v) / area_v)
}

/// Variance functional, `α((I² − u² − σ_u²)/A_u − (I² − v² − σ_v²)/A_v)`.
#[inline]
#[allow(clippy::too_many_arguments)]
pub fn functional_variance(
    u: f64,
    v: f64,
    var_u: f64,
    var_v: f64,
    intensity: f64,
    area_u: f64,
    area_v: f64,
    alpha: f64,
) -> f64 {
    let i2 = intensity * intensity;
    alpha * ((i2 - u * u - var_u) / area_u - (i2 - v * v - var_v) / area_v)
}

impl Functional {
    /// Force at a sample of (normalized) intensity `intensity`.
    #[inline]
    pub fn force(&self, stats: &RegionStats, intensity: f64, alpha: f64) -> f64 {
        let (a_u, a_v) = (stats.area_u as f64, stats.area_v as f64);
        match self {
            Functional::Proposed => functional_proposed(stats.u, stats.v, intensity, alpha),
            Functional::Mean => functional_mean(stats.u, stats.v, intensity, a_u, a_v, alpha),
            Functional::Variance => functional_variance(
                stats.u,
                stats.v,
                stats.var_u,
                stats.var_v,
                intensity,
                a_u,
                a_v,
                alpha,
            ),
        }
    }
}

/// Every functional is quadratic in intensity, so evaluating on normalized
/// intensities with `α·S²` equals evaluating on `[0, S]` intensities with `α`.
pub fn compute_forces(
    frame: &Frame,
    contour: &SampledContour,
    stats: &RegionStats,
    config: &EngineConfig,
) -> Result<ForceSet> {
    let alpha = config.effective_alpha();
    let forces = contour
        .points
        .iter()
        .map(|p| config.functional.force(stats, frame.bilinear(p[0], p[1]), alpha))
        .collect();
    Ok(ForceSet {
        forces,
        angles: contour.angles.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::region_stats;
    use crate::model::{sample_circle, Circle};

    #[test]
    fn proposed_signs_and_root() {
        assert!((functional_proposed(0.2, 0.8, 0.2, 1e-3) - 3.6e-4).abs() < 1e-15);
        assert!((functional_proposed(0.2, 0.8, 0.8, 1e-3) + 3.6e-4).abs() < 1e-15);
        assert!(functional_proposed(0.3, 0.7, 0.5, 0.1).abs() < 1e-16);
        assert_eq!(functional_proposed(0.25, 0.75, 0.5, 1.0), 0.0);
    }

    #[test]
    fn mean_functional_examples() {
        assert_eq!(functional_mean(0.4, 0.4, 0.9, 10.0, 20.0, 1.0), 0.0);
        assert!(functional_mean(0.2, 0.8, 0.5, 100.0, 100.0, 1.0).abs() < 1e-16);
        let f = functional_mean(0.2, 0.8, 0.5, 100.0, 10000.0, 1.0);
        assert!((f + 1.782e-3).abs() < 1e-15, "{f}");
    }

    #[test]
    fn variance_functional_examples() {
        // I^2 = u^2 + var_u = v^2 + var_v
        let (u, v, i) = (0.3, 0.4, 0.5);
        let f = functional_variance(u, v, i * i - u * u, i * i - v * v, i, 50.0, 70.0, 1.0);
        assert!(f.abs() < 1e-16);
        let f = functional_variance(0.2, 0.8, 0.0, 0.0, 0.2, 100.0, 100.0, 1.0);
        assert!((f - 6e-3).abs() < 1e-15);
        let first = (0.25f64 - 0.04 - 0.01) / 100.0;
        let f = functional_variance(0.2, 0.8, 0.01, 0.02, 0.5, 100.0, 1e15, 1.0);
        assert!((f - first).abs() < 1e-15);
    }

    fn disk_frame() -> Frame {
        Frame::from_fn(64, 64, 0.1, |x, y| {
            let (dx, dy) = (x as f64 - 32.0, y as f64 - 32.0);
            if dx * dx + dy * dy <= 400.0 {
                0.1
            } else {
                0.9
            }
        })
        .unwrap()
    }

    fn forces_for(frame: &Frame, circle: Circle, functional: Functional) -> ForceSet {
        let cfg = EngineConfig {
            functional,
            ..EngineConfig::default()
        };
        let contour = sample_circle(circle, cfg.samples).unwrap();
        let stats = region_stats(frame, &circle, &cfg.region_policy).unwrap();
        compute_forces(frame, &contour, &stats, &cfg).unwrap()
    }

    #[test]
    fn uniform_frame_gives_zero_forces() {
        let f = Frame::uniform(32, 32, 0.42).unwrap();
        for func in [Functional::Proposed, Functional::Mean, Functional::Variance] {
            let fs = forces_for(&f, Circle::new(16.0, 16.0, 6.0).unwrap(), func);
            assert_eq!(fs.len(), 32);
            assert!(fs.forces.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn inside_disk_expands_outside_shrinks() {
        let f = disk_frame();
        let cfg = EngineConfig::default();
        // oracle: evaluate the functional directly at each sample position
        for (r, expect_positive) in [(10.0, true), (25.0, false)] {
            let circle = Circle::new(32.0, 32.0, r).unwrap();
            let stats = region_stats(&f, &circle, &cfg.region_policy).unwrap();
            let fs = forces_for(&f, circle, Functional::Proposed);
            for (k, (force, theta)) in fs.forces.iter().zip(&fs.angles).enumerate() {
                let (x, y) = (32.0 + r * theta.cos(), 32.0 + r * theta.sin());
                let i = if expect_positive { 0.1 } else { 0.9 };
                assert!((f.bilinear(x, y) - i).abs() < 1e-12, "sample {k}");
                let s = 255.0 * 255.0 * cfg.alpha;
                let oracle = s * (stats.u - stats.v) * (2.0 * i - stats.u - stats.v);
                assert!((force - oracle).abs() < 1e-12);
                assert_eq!(*force > 0.0, expect_positive, "sample {k}: {force}");
            }
        }
    }
}
