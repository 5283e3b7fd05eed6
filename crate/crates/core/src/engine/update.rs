//! Closed-form circle update and the direct least-squares fit it must agree with.
//!
//! Moving sample `k` to `(x_c, y_c) + (R + f_k)·n_k` and refitting a circle at
//! the same angles in the least-squares sense shifts the center by the mean
//! force vector `(1/K) Σ f_k n_k` and the radius by the mean force
//! `(1/K) Σ f_k`. [`update_circle`] uses those sums; [`fit_circle_direct`]
//! solves the 3x3 normal equations without assuming uniform angles.

use crate::error::{invalid, Result};
use crate::model::{Circle, ForceSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleUpdate {
    pub circle: Circle,
    /// The radius fell below `min_radius` and was clamped.
    pub radius_clamped: bool,
}

#[inline]
pub(crate) fn apply_forces(
    circle: &Circle,
    forces: &[f64],
    normals: &[[f64; 2]],
    min_radius: f64,
) -> CircleUpdate {
    let k = forces.len() as f64;
    let (mut sx, mut sy, mut sf) = (0.0, 0.0, 0.0);
    for (f, n) in forces.iter().zip(normals) {
        sx += f * n[0];
        sy += f * n[1];
        sf += f;
    }
    let radius = circle.radius + sf / k;
    let radius_clamped = radius < min_radius;
    CircleUpdate {
        circle: Circle {
            x_c: circle.x_c + sx / k,
            y_c: circle.y_c + sy / k,
            radius: if radius_clamped { min_radius } else { radius },
        },
        radius_clamped,
    }
}

/// One evolution step: center += mean force vector, radius += mean force,
/// radius clamped below at `min_radius`.
pub fn update_circle(circle: &Circle, forces: &ForceSet, min_radius: f64) -> CircleUpdate {
    let normals: Vec<[f64; 2]> = forces
        .angles
        .iter()
        .map(|t| {
            let (s, c) = t.sin_cos();
            [c, s]
        })
        .collect();
    apply_forces(circle, &forces.forces, &normals, min_radius)
}

/// Sample points displaced by their forces along the normals.
pub fn shifted_points(circle: &Circle, forces: &ForceSet) -> Vec<[f64; 2]> {
    forces
        .forces
        .iter()
        .zip(&forces.angles)
        .map(|(f, t)| {
            let r = circle.radius + f;
            [circle.x_c + r * t.cos(), circle.y_c + r * t.sin()]
        })
        .collect()
}

/// Minimizes `Σ (x̃_k − x_c − R cos θ_k)² + (ỹ_k − y_c − R sin θ_k)²` over
/// `(x_c, y_c, R)` by solving the normal equations directly.
pub fn fit_circle_direct(points: &[[f64; 2]], angles: &[f64]) -> Result<Circle> {
    if points.len() != angles.len() {
        return Err(invalid(format!(
            "{} points but {} angles",
            points.len(),
            angles.len()
        )));
    }
    if points.len() < 3 {
        return Err(invalid("circle fit needs at least 3 points"));
    }
    let (mut sc, mut ss, mut sn) = (0.0, 0.0, 0.0);
    let (mut bx, mut by, mut br) = (0.0, 0.0, 0.0);
    for (p, t) in points.iter().zip(angles) {
        let (s, c) = (t.sin(), t.cos());
        sc += c;
        ss += s;
        sn += c * c + s * s;
        bx += p[0];
        by += p[1];
        br += p[0] * c + p[1] * s;
    }
    let n = points.len() as f64;
    let mut m = [[n, 0.0, sc, bx], [0.0, n, ss, by], [sc, ss, sn, br]];
    let solution = solve3(&mut m).ok_or_else(|| invalid("rank-deficient circle fit"))?;
    Circle::new(solution[0], solution[1], solution[2])
}

/// Gaussian elimination with partial pivoting on an augmented 3x4 system.
fn solve3(m: &mut [[f64; 4]; 3]) -> Option<[f64; 3]> {
    let scale = m
        .iter()
        .flat_map(|row| row[..3].iter())
        .fold(0.0f64, |a, v| a.max(v.abs()));
    for col in 0..3 {
        let pivot = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col].abs() <= 1e-12 * scale {
            return None;
        }
        m.swap(col, pivot);
        for row in col + 1..3 {
            let factor = m[row][col] / m[col][col];
            for j in col..4 {
                m[row][j] -= factor * m[col][j];
            }
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|j| m[row][j] * x[j]).sum();
        x[row] = (m[row][3] - tail) / m[row][row];
    }
    Some(x)
}
