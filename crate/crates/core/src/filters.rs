//! Speckle pre-filters: median, bilateral and adaptive Wiener.
//!
//! Every filter reads its neighborhood through symmetric mirror padding
//! (`-1 → 0`, `n → n - 1`) and returns a frame of the same size with values
//! in `[0, 1]`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::Frame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    #[default]
    None,
    Median,
    Bilateral,
    Wiener,
}

impl std::str::FromStr for FilterKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "median" => Ok(Self::Median),
            "bilateral" => Ok(Self::Bilateral),
            "wiener" => Ok(Self::Wiener),
            other => Err(invalid(format!("unknown filter `{other}`"))),
        }
    }
}

/// Noise variance for the Wiener filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NoiseVariance {
    /// Mean of the local window variances over the frame.
    #[default]
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterSpec {
    pub kind: FilterKind,
    pub window: usize,
    pub bilateral_sigma_space: f64,
    pub bilateral_sigma_range: f64,
    pub wiener_noise_var: NoiseVariance,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            kind: FilterKind::None,
            window: 5,
            bilateral_sigma_space: 2.0,
            bilateral_sigma_range: 0.1,
            wiener_noise_var: NoiseVariance::Auto,
        }
    }
}

impl FilterSpec {
    pub fn of_kind(kind: FilterKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window % 2 == 0 {
            return Err(invalid(format!(
                "filter window must be odd and at least 3, got {}",
                self.window
            )));
        }
        if !(self.bilateral_sigma_space > 0.0) || !(self.bilateral_sigma_range > 0.0) {
            return Err(invalid("bilateral sigmas must be positive"));
        }
        if let NoiseVariance::Fixed(v) = self.wiener_noise_var {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid("wiener noise variance must be non-negative"));
            }
        }
        Ok(())
    }
}

pub fn apply_filter(frame: &Frame, spec: &FilterSpec) -> Result<Frame> {
    spec.validate()?;
    let (w, h) = (frame.width(), frame.height());
    let data = frame.intensities();
    let radius = spec.window / 2;
    let out = match spec.kind {
        FilterKind::None => return Ok(frame.clone()),
        FilterKind::Median => median(data, w, h, radius),
        FilterKind::Bilateral => bilateral(
            data,
            w,
            h,
            radius,
            spec.bilateral_sigma_space,
            spec.bilateral_sigma_range,
        ),
        FilterKind::Wiener => wiener(data, w, h, radius, spec.wiener_noise_var),
    };
    Frame::new(
        w,
        h,
        out.into_iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        frame.pixel_spacing_cm(),
    )
}

/// Symmetric reflection of `i` into `[0, n)`.
#[inline]
pub(crate) fn mirror(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m >= n as isize {
        (period - 1 - m) as usize
    } else {
        m as usize
    }
}

fn map_rows(w: usize, h: usize, f: impl Fn(usize, usize) -> f64 + Sync) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, v) in row.iter_mut().enumerate() {
            *v = f(x, y);
        }
    });
    out
}

fn median(data: &[f64], w: usize, h: usize, radius: usize) -> Vec<f64> {
    let r = radius as isize;
    let side = 2 * radius + 1;
    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let mut window = Vec::with_capacity(side * side);
        for (x, v) in row.iter_mut().enumerate() {
            window.clear();
            for dy in -r..=r {
                let yy = mirror(y as isize + dy, h);
                for dx in -r..=r {
                    window.push(data[yy * w + mirror(x as isize + dx, w)]);
                }
            }
            let mid = window.len() / 2;
            let (_, m, _) = window.select_nth_unstable_by(mid, f64::total_cmp);
            *v = *m;
        }
    });
    out
}

fn bilateral(
    data: &[f64],
    w: usize,
    h: usize,
    radius: usize,
    sigma_space: f64,
    sigma_range: f64,
) -> Vec<f64> {
    let r = radius as isize;
    let spatial: Vec<f64> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
        .map(|(dx, dy)| (-((dx * dx + dy * dy) as f64) / (2.0 * sigma_space * sigma_space)).exp())
        .collect();
    let range_coeff = 1.0 / (2.0 * sigma_range * sigma_range);
    map_rows(w, h, |x, y| {
        let center = data[y * w + x];
        let (mut num, mut den) = (0.0, 0.0);
        let mut k = 0;
        for dy in -r..=r {
            let yy = mirror(y as isize + dy, h);
            for dx in -r..=r {
                let q = data[yy * w + mirror(x as isize + dx, w)];
                let d = q - center;
                let weight = spatial[k] * (-d * d * range_coeff).exp();
                num += weight * q;
                den += weight;
                k += 1;
            }
        }
        num / den
    })
}

/// Local mean and variance over a `(2r+1)²` mirrored window.
fn local_moments(data: &[f64], w: usize, h: usize, radius: usize) -> (Vec<f64>, Vec<f64>) {
    let r = radius as isize;
    let n = ((2 * radius + 1) * (2 * radius + 1)) as f64;
    let mut mean = vec![0.0; w * h];
    let mut var = vec![0.0; w * h];
    mean.par_chunks_mut(w)
        .zip(var.par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, (mrow, vrow))| {
            for x in 0..w {
                let (mut s, mut q) = (0.0, 0.0);
                for dy in -r..=r {
                    let yy = mirror(y as isize + dy, h);
                    for dx in -r..=r {
                        let v = data[yy * w + mirror(x as isize + dx, w)];
                        s += v;
                        q += v * v;
                    }
                }
                let m = s / n;
                mrow[x] = m;
                vrow[x] = (q / n - m * m).max(0.0);
            }
        });
    (mean, var)
}

fn wiener(data: &[f64], w: usize, h: usize, radius: usize, noise: NoiseVariance) -> Vec<f64> {
    let (mean, var) = local_moments(data, w, h, radius);
    let noise = match noise {
        NoiseVariance::Auto => var.iter().sum::<f64>() / var.len() as f64,
        NoiseVariance::Fixed(v) => v,
    };
    data.iter()
        .zip(mean.iter().zip(&var))
        .map(|(&i, (&m, &s2))| {
            let denom = s2.max(noise);
            if denom <= 0.0 {
                m
            } else {
                m + (s2 - noise).max(0.0) / denom * (i - m)
            }
        })
        .collect()
}

/// Separable Gaussian blur with mirror padding, taps out to `ceil(3σ)`.
/// `sigma <= 0` returns the input unchanged.
pub fn gaussian_blur(data: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return data.to_vec();
    }
    let r = (3.0 * sigma).ceil() as isize;
    let mut taps: Vec<f64> = (-r..=r)
        .map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= norm);

    let mut rows = vec![0.0; w * h];
    rows.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let src = &data[y * w..(y + 1) * w];
        for (x, v) in row.iter_mut().enumerate() {
            *v = taps
                .iter()
                .zip(-r..=r)
                .map(|(t, d)| t * src[mirror(x as isize + d, w)])
                .sum();
        }
    });
    map_rows(w, h, |x, y| {
        taps.iter()
            .zip(-r..=r)
            .map(|(t, d)| t * rows[mirror(y as isize + d, h) * w + x])
            .sum()
    })
}
