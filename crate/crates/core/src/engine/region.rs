//! Inside/outside intensity statistics.
//!
//! Membership is decided per pixel center with [`Circle::contains_point`].
//! [`region_stats`] scans the frame directly; [`RegionIntegrator`] answers the
//! same query from per-row prefix sums in `O(R)` and is what the tracker runs
//! every iteration.

use crate::error::{Error, Result};
use crate::model::{Circle, Frame, RegionMode, RegionPolicy, RegionStats};

fn check_center(frame: &Frame, circle: &Circle) -> Result<()> {
    circle.validate()?;
    if !frame.contains(circle.x_c, circle.y_c) {
        return Err(Error::DegenerateRegion(format!(
            "circle center ({:.3}, {:.3}) is outside the {}x{} frame",
            circle.x_c,
            circle.y_c,
            frame.width(),
            frame.height()
        )));
    }
    Ok(())
}

fn outer_circle(circle: &Circle, policy: &RegionPolicy) -> Circle {
    Circle {
        radius: circle.radius * policy.annulus_scale,
        ..*circle
    }
}

/// Distance from a pixel center inside which a span end is re-checked
/// against the exact membership predicate.
const END_MARGIN: f64 = 1e-6;

#[inline]
fn floor_i64(v: f64) -> i64 {
    let t = v as i64;
    t - ((t as f64) > v) as i64
}

#[inline]
fn ceil_i64(v: f64) -> i64 {
    let t = v as i64;
    t + ((t as f64) < v) as i64
}

#[derive(Default, Clone, Copy)]
struct Moments {
    count: usize,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn minus(self, other: Moments) -> Moments {
        Moments {
            count: self.count - other.count,
            sum: self.sum - other.sum,
            sum_sq: self.sum_sq - other.sum_sq,
        }
    }

    fn mean_var(&self) -> (f64, f64) {
        let n = self.count as f64;
        let mean = (self.sum / n).clamp(0.0, 1.0);
        let var = (self.sum_sq / n - mean * mean).max(0.0);
        (mean, var)
    }
}

fn finish(inside: Moments, outside: Moments) -> Result<RegionStats> {
    if inside.count == 0 {
        return Err(Error::DegenerateRegion("no pixels inside the circle".into()));
    }
    if outside.count == 0 {
        return Err(Error::DegenerateRegion("outside region is empty".into()));
    }
    let (u, var_u) = inside.mean_var();
    let (v, var_v) = outside.mean_var();
    Ok(RegionStats {
        u,
        v,
        var_u,
        var_v,
        area_u: inside.count,
        area_v: outside.count,
    })
}

/// Region statistics by a direct scan over every pixel of the frame.
pub fn region_stats(frame: &Frame, circle: &Circle, policy: &RegionPolicy) -> Result<RegionStats> {
    check_center(frame, circle)?;
    policy.validate()?;
    let outer = outer_circle(circle, policy);
    let mut inside = Vec::new();
    let mut outside = Vec::new();
    for y in 0..frame.height() {
        for x in 0..frame.width() {
            let (px, py) = (x as f64, y as f64);
            let value = frame.get(x, y);
            if circle.contains_point(px, py) {
                inside.push(value);
            } else if policy.mode == RegionMode::FullComplement || outer.contains_point(px, py) {
                outside.push(value);
            }
        }
    }
    // Two-pass moments so this path shares no arithmetic with the integrator.
    let two_pass = |values: &[f64]| -> (f64, f64) {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        (mean.clamp(0.0, 1.0), var)
    };
    if inside.is_empty() {
        return Err(Error::DegenerateRegion("no pixels inside the circle".into()));
    }
    if outside.is_empty() {
        return Err(Error::DegenerateRegion("outside region is empty".into()));
    }
    let (u, var_u) = two_pass(&inside);
    let (v, var_v) = two_pass(&outside);
    Ok(RegionStats {
        u,
        v,
        var_u,
        var_v,
        area_u: inside.len(),
        area_v: outside.len(),
    })
}

/// Per-row prefix sums of intensity and squared intensity for one frame.
#[derive(Debug, Clone)]
pub struct RegionIntegrator {
    width: usize,
    height: usize,
    /// `[Σ I, Σ I²]` over the first `x` pixels of each row, stride `width + 1`.
    prefix: Vec<[f64; 2]>,
    total: f64,
    total_sq: f64,
}

impl RegionIntegrator {
    pub fn new(frame: &Frame) -> Self {
        let width = frame.width();
        let height = frame.height();
        let stride = width + 1;
        let mut prefix = vec![[0.0; 2]; stride * height];
        let data = frame.intensities();
        let (mut total, mut total_sq) = (0.0, 0.0);
        for y in 0..height {
            let row = &data[y * width..(y + 1) * width];
            let base = y * stride;
            let (mut s, mut q) = (0.0, 0.0);
            for (x, v) in row.iter().enumerate() {
                s += v;
                q += v * v;
                prefix[base + x + 1] = [s, q];
            }
            total += s;
            total_sq += q;
        }
        Self {
            width,
            height,
            prefix,
            total,
            total_sq,
        }
    }

    /// Inclusive column span of row `y` whose pixel centers lie in `circle`,
    /// clipped to the frame.
    #[inline]
    fn row_span(&self, circle: &Circle, r2: f64, y: usize) -> Option<(usize, usize)> {
        let dy = y as f64 - circle.y_c;
        let dy2 = dy * dy;
        let slack = r2 - dy2;
        if slack < 0.0 {
            return None;
        }
        let half = slack.sqrt();
        let (left, right) = (circle.x_c - half, circle.x_c + half);
        let mut lo = ceil_i64(left);
        let mut hi = floor_i64(right);
        // sqrt rounding can misplace each end by at most one pixel, and only
        // when an end sits within rounding distance of a pixel center
        let (gap_lo, gap_hi) = (lo as f64 - left, right - hi as f64);
        let clear = |g: f64| g > END_MARGIN && g < 1.0 - END_MARGIN;
        if !(half >= 1.0 && clear(gap_lo) && clear(gap_hi)) {
            // same predicate as Circle::contains_point, as 0 or 1
            let inside = |x: i64| {
                let dx = x as f64 - circle.x_c;
                (dx * dx + dy2 <= r2) as i64
            };
            lo -= inside(lo - 1);
            lo += 1 - inside(lo);
            hi += inside(hi + 1);
            hi -= 1 - inside(hi);
        }
        let lo = lo.max(0);
        let hi = hi.min(self.width as i64 - 1);
        (lo <= hi).then_some((lo as usize, hi as usize))
    }

    fn disk(&self, circle: &Circle) -> Moments {
        let stride = self.width + 1;
        let y_lo = (floor_i64(circle.y_c - circle.radius) - 1).max(0);
        let y_hi = (ceil_i64(circle.y_c + circle.radius) + 1).min(self.height as i64 - 1);
        let mut acc = Moments::default();
        if y_hi < y_lo {
            return acc;
        }
        let r2 = circle.radius * circle.radius;
        for y in y_lo as usize..=y_hi as usize {
            if let Some((lo, hi)) = self.row_span(circle, r2, y) {
                let base = y * stride;
                let (a, b) = (self.prefix[base + lo], self.prefix[base + hi + 1]);
                acc.count += hi - lo + 1;
                acc.sum += b[0] - a[0];
                acc.sum_sq += b[1] - a[1];
            }
        }
        acc
    }

    /// Same result as [`region_stats`], up to summation rounding.
    pub fn stats(&self, circle: &Circle, policy: &RegionPolicy) -> Result<RegionStats> {
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        circle.validate()?;
        if !(circle.x_c >= 0.0 && circle.y_c >= 0.0 && circle.x_c <= max_x && circle.y_c <= max_y) {
            return Err(Error::DegenerateRegion(format!(
                "circle center ({:.3}, {:.3}) is outside the {}x{} frame",
                circle.x_c, circle.y_c, self.width, self.height
            )));
        }
        let inside = self.disk(circle);
        let outside = match policy.mode {
            RegionMode::FullComplement => Moments {
                count: self.width * self.height,
                sum: self.total,
                sum_sq: self.total_sq,
            }
            .minus(inside),
            RegionMode::Annulus => self.disk(&outer_circle(circle, policy)).minus(inside),
        };
        finish(inside, outside)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Dark disk of radius 20 about (32, 32) on a bright 64x64 field.
    fn two_level() -> Frame {
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

    #[test]
    fn uniform_frame_has_equal_means() {
        let f = Frame::uniform(32, 32, 0.5).unwrap();
        let c = Circle::new(10.3, 20.7, 5.5).unwrap();
        for policy in [RegionPolicy::full_complement(), RegionPolicy::annulus(1.5).unwrap()] {
            let s = region_stats(&f, &c, &policy).unwrap();
            assert_eq!((s.u, s.v), (0.5, 0.5));
            assert!(s.var_u.abs() < 1e-15 && s.var_v.abs() < 1e-15);
        }
    }

    #[test]
    fn two_level_inner_circle_matches_pixel_count() {
        let f = two_level();
        let c = Circle::new(32.0, 32.0, 10.0).unwrap();
        let s = region_stats(&f, &c, &RegionPolicy::full_complement()).unwrap();
        // independent count over the grid
        let (mut n_in, mut n_mid, mut n_out) = (0usize, 0usize, 0usize);
        for y in 0..64 {
            for x in 0..64 {
                let r2 = ((x as i64 - 32).pow(2) + (y as i64 - 32).pow(2)) as i64;
                if r2 <= 100 {
                    n_in += 1;
                } else if r2 <= 400 {
                    n_mid += 1;
                } else {
                    n_out += 1;
                }
            }
        }
        let expect_v = (0.1 * n_mid as f64 + 0.9 * n_out as f64) / (n_mid + n_out) as f64;
        assert!((s.u - 0.1).abs() < 1e-12);
        assert!((s.v - expect_v).abs() < 1e-12);
        assert_eq!(s.area_u, n_in);
        assert_eq!(s.area_v, n_mid + n_out);
        assert_eq!(n_in, 317);
    }

    #[test]
    fn disk_area_close_to_analytic() {
        let f = two_level();
        let c = Circle::new(32.0, 32.0, 20.0).unwrap();
        let s = region_stats(&f, &c, &RegionPolicy::full_complement()).unwrap();
        let analytic = std::f64::consts::PI * 400.0;
        assert!((s.area_u as f64 - analytic).abs() <= 40.0);
        assert!((s.u - 0.1).abs() < 1e-12);
    }

    #[test]
    fn integrator_matches_scan() {
        let f = Frame::from_fn(48, 40, 0.1, |x, y| ((x * 7 + y * 13) % 17) as f64 / 16.0).unwrap();
        let integ = RegionIntegrator::new(&f);
        let circles = [
            (20.0, 20.0, 5.0),
            (20.37, 19.81, 7.3),
            (1.0, 1.0, 9.0),
            (47.0, 39.0, 30.0),
            (24.5, 20.5, 2.0),
            (11.0, 30.0, 12.0),
        ];
        for (x, y, r) in circles {
            let c = Circle::new(x, y, r).unwrap();
            for policy in [RegionPolicy::full_complement(), RegionPolicy::annulus(1.5).unwrap()] {
                let a = region_stats(&f, &c, &policy).unwrap();
                let b = integ.stats(&c, &policy).unwrap();
                assert_eq!(a.area_u, b.area_u);
                assert_eq!(a.area_v, b.area_v);
                for (p, q) in [(a.u, b.u), (a.v, b.v), (a.var_u, b.var_u), (a.var_v, b.var_v)] {
                    assert!((p - q).abs() < 1e-12, "{p} vs {q}");
                }
            }
        }
    }

    #[test]
    fn degenerate_regions_are_errors() {
        let f = Frame::uniform(16, 16, 0.5).unwrap();
        let big = Circle::new(8.0, 8.0, 40.0).unwrap();
        let err = region_stats(&f, &big, &RegionPolicy::full_complement()).unwrap_err();
        assert!(matches!(err, Error::DegenerateRegion(_)));
        let integ = RegionIntegrator::new(&f);
        assert!(integ.stats(&big, &RegionPolicy::full_complement()).is_err());
        // annulus around a frame-filling circle is empty after clipping
        assert!(integ.stats(&big, &RegionPolicy::annulus(1.5).unwrap()).is_err());
        let outside = Circle::new(-1.0, 8.0, 3.0).unwrap();
        assert!(region_stats(&f, &outside, &RegionPolicy::full_complement()).is_err());
        assert!(integ.stats(&outside, &RegionPolicy::full_complement()).is_err());
    }
}
