//! Weighted rigid alignment of point sets.

use crate::linalg::{shortest_arc, symmetric_eigen, Vec3};
use nalgebra::{Matrix3, Matrix4, Quaternion, UnitQuaternion};
use serde::{Deserialize, Serialize};

/// Second principal moment below this fraction of the first makes a point
/// set collinear.
pub const COLLINEAR_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Degeneracy {
    None,
    /// All weighted points coincide; only a translation is defined.
    SinglePoint,
    /// Points lie on a line; the roll about it is left at zero.
    Collinear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RigidFit {
    pub rotation: UnitQuaternion<f64>,
    pub p_star: Vec3,
    pub q_star: Vec3,
    pub degeneracy: Degeneracy,
}

impl RigidFit {
    pub fn apply(&self, x: &Vec3) -> Vec3 {
        self.rotation * (x - self.p_star) + self.q_star
    }
}

fn weighted_centroid(points: &[Vec3], weights: &[f64]) -> Vec3 {
    let total: f64 = weights.iter().sum();
    points.iter().zip(weights).fold(Vec3::zeros(), |acc, (p, w)| acc + p * *w) / total
}

fn scatter(points: &[Vec3], center: &Vec3, weights: &[f64]) -> Matrix3<f64> {
    points.iter().zip(weights).fold(Matrix3::zeros(), |acc, (p, w)| {
        let d = p - center;
        acc + d * d.transpose() * *w
    })
}

/// Principal direction and whether the set spans more than a line.
/// Returns `None` for a single point.
fn principal(points: &[Vec3], center: &Vec3, weights: &[f64]) -> Option<(Vec3, bool)> {
    let eigen = symmetric_eigen(&scatter(points, center, weights));
    if eigen.values[0] <= 0.0 {
        return None;
    }
    let spread = eigen.values[1] > COLLINEAR_TOLERANCE * eigen.values[0];
    Some((eigen.vectors.column(0).into_owned(), spread))
}

/// Rotation and centroids minimizing
/// `sum w_i |R (p_i - p*) - (q_i - q*)|^2` over proper rotations.
///
/// Uses the quaternion eigenvector method. A single point yields the
/// identity; collinear sets yield the shortest arc between the principal
/// directions.
///
/// # Panics
///
/// When the slices differ in length, are empty, or the weights do not sum
/// to a positive value.
pub fn weighted_procrustes(p: &[Vec3], q: &[Vec3], weights: &[f64]) -> RigidFit {
    assert!(!p.is_empty() && p.len() == q.len() && p.len() == weights.len());
    assert!(weights.iter().sum::<f64>() > 0.0, "weights must sum to a positive value");
    let p_star = weighted_centroid(p, weights);
    let q_star = weighted_centroid(q, weights);
    let fit = |rotation, degeneracy| RigidFit {
        rotation,
        p_star,
        q_star,
        degeneracy,
    };

    let (Some((dp, p_spread)), Some((dq, q_spread))) = (principal(p, &p_star, weights), principal(q, &q_star, weights)) else {
        return fit(UnitQuaternion::identity(), Degeneracy::SinglePoint);
    };
    if !p_spread || !q_spread {
        let agreement: f64 = p
            .iter()
            .zip(q)
            .zip(weights)
            .map(|((a, b), w)| w * (a - p_star).dot(&dp) * (b - q_star).dot(&dq))
            .sum();
        let dq = if agreement < 0.0 { -dq } else { dq };
        return fit(shortest_arc(&dp, &dq), Degeneracy::Collinear);
    }

    let s = p.iter().zip(q).zip(weights).fold(Matrix3::zeros(), |acc, ((a, b), w)| {
        acc + (a - p_star) * (b - q_star).transpose() * *w
    });
    let (sxx, sxy, sxz) = (s[(0, 0)], s[(0, 1)], s[(0, 2)]);
    let (syx, syy, syz) = (s[(1, 0)], s[(1, 1)], s[(1, 2)]);
    let (szx, szy, szz) = (s[(2, 0)], s[(2, 1)], s[(2, 2)]);
    #[rustfmt::skip]
    let n = Matrix4::new(
        sxx + syy + szz, syz - szy, szx - sxz, sxy - syx,
        syz - szy, sxx - syy - szz, sxy + syx, szx + sxz,
        szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy,
        sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz,
    );
    let v = symmetric_eigen(&n).vectors.column(0).into_owned();
    let rotation = UnitQuaternion::from_quaternion(Quaternion::new(v[0], v[1], v[2], v[3]));
    fit(rotation, Degeneracy::None)
}

/// The objective minimized by [`weighted_procrustes`] for a given rotation.
pub fn alignment_error(rotation: &UnitQuaternion<f64>, p: &[Vec3], q: &[Vec3], weights: &[f64]) -> f64 {
    let p_star = weighted_centroid(p, weights);
    let q_star = weighted_centroid(q, weights);
    p.iter()
        .zip(q)
        .zip(weights)
        .map(|((a, b), w)| w * (rotation * (a - p_star) - (b - q_star)).norm_squared())
        .sum()
}
