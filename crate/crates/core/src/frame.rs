//! Body-aligned coordinate system from the principal components of the
//! vertex cloud.
//!
//! Axis 0 is the direction of largest variance (body height), axis 1 the
//! width and axis 2 the thickness. Axis signs are normalized so that the
//! largest-magnitude coordinate of each axis is positive, then the last axis
//! is flipped if needed to make the triple right-handed.

use crate::linalg::{symmetric_eigen, Vec3};
use crate::mesh::Mesh;
use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance under which the two leading variances are considered
/// equal.
pub const EIGEN_GAP_TOLERANCE: f64 = 1e-9;
/// Smallest variance, relative to the largest, for a cloud to count as
/// non-coplanar.
pub const PLANARITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrameError {
    #[error("need at least 4 non-coplanar vertices, found {0} vertices")]
    TooFewVertices(usize),
    #[error("vertices are coplanar (variances {0:?})")]
    Coplanar([f64; 3]),
    #[error("major direction is ambiguous: leading variances {0} and {1} are equal")]
    AmbiguousMajorAxis(f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrincipalFrame {
    pub center: Vec3,
    /// Orthonormal axes ordered by descending variance.
    pub axes: [Vec3; 3],
    /// Half-ranges of the vertices along each axis.
    pub extents: [f64; 3],
}

impl PrincipalFrame {
    pub fn identity() -> Self {
        PrincipalFrame {
            center: Vec3::zeros(),
            axes: [Vec3::x(), Vec3::y(), Vec3::z()],
            extents: [0.0; 3],
        }
    }

    /// Matrix whose columns are the axes.
    pub fn rotation(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&self.axes)
    }

    /// Original coordinates to frame coordinates.
    pub fn to_local(&self, p: &Vec3) -> Vec3 {
        let d = p - self.center;
        Vec3::new(self.axes[0].dot(&d), self.axes[1].dot(&d), self.axes[2].dot(&d))
    }

    /// Frame coordinates back to original coordinates.
    pub fn to_world(&self, p: &Vec3) -> Vec3 {
        self.center + self.axes[0] * p.x + self.axes[1] * p.y + self.axes[2] * p.z
    }
}

/// Population covariance of the vertex positions about their centroid.
pub fn vertex_covariance(points: &[Vec3]) -> (Vec3, Matrix3<f64>) {
    let n = points.len().max(1) as f64;
    let center = points.iter().fold(Vec3::zeros(), |acc, p| acc + p) / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - center;
        cov += d * d.transpose();
    }
    (center, cov / n)
}

fn normalize_sign(axis: Vec3) -> Vec3 {
    let mut best = 0;
    for k in 1..3 {
        if axis[k].abs() > axis[best].abs() {
            best = k;
        }
    }
    if axis[best] < 0.0 {
        -axis
    } else {
        axis
    }
}

pub fn compute_frame(mesh: &Mesh) -> Result<PrincipalFrame, FrameError> {
    if mesh.vertices.len() < 4 {
        return Err(FrameError::TooFewVertices(mesh.vertices.len()));
    }
    let (center, cov) = vertex_covariance(&mesh.vertices);
    let eig = symmetric_eigen(&cov);
    let values = [eig.values[0], eig.values[1], eig.values[2]];
    if values[0] <= 0.0 || values[2] <= PLANARITY_TOLERANCE * values[0] {
        return Err(FrameError::Coplanar(values));
    }
    if (values[0] - values[1]).abs() <= EIGEN_GAP_TOLERANCE * values[0] {
        return Err(FrameError::AmbiguousMajorAxis(values[0], values[1]));
    }
    let mut axes = [
        normalize_sign(eig.vectors.column(0).into_owned()),
        normalize_sign(eig.vectors.column(1).into_owned()),
        normalize_sign(eig.vectors.column(2).into_owned()),
    ];
    if axes[0].cross(&axes[1]).dot(&axes[2]) < 0.0 {
        axes[2] = -axes[2];
    }
    let mut extents = [0.0; 3];
    for (k, axis) in axes.iter().enumerate() {
        let (lo, hi) = mesh
            .vertices
            .iter()
            .map(|v| axis.dot(&(v - center)))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
        extents[k] = 0.5 * (hi - lo);
    }
    Ok(PrincipalFrame { center, axes, extents })
}

/// Re-expresses the mesh in frame coordinates: `axes^T (v - center)`.
pub fn to_frame(mesh: &Mesh, frame: &PrincipalFrame) -> Mesh {
    mesh.map_vertices(|v| frame.to_local(v))
}

/// Inverse of [`to_frame`].
pub fn from_frame(mesh: &Mesh, frame: &PrincipalFrame) -> Mesh {
    mesh.map_vertices(|v| frame.to_world(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use nalgebra::{Rotation3, Unit};

    fn box_cloud() -> Mesh {
        fixtures::axis_box(Vec3::new(-2.0, -1.0, -0.5), Vec3::new(2.0, 1.0, 0.5))
            .map_vertices(|v| v + Vec3::new(1.0, 2.0, 3.0))
    }

    #[test]
    fn box_axes_are_coordinate_axes() {
        let f = compute_frame(&box_cloud()).unwrap();
        assert!((f.center - Vec3::new(1.0, 2.0, 3.0)).norm() < 1e-12);
        assert!((f.axes[0] - Vec3::x()).norm() < 1e-12);
        assert!((f.axes[1] - Vec3::y()).norm() < 1e-12);
        assert!((f.axes[2] - Vec3::z()).norm() < 1e-12);
        assert_eq!(f.extents, [2.0, 1.0, 0.5]);
    }

    #[test]
    fn rotated_box_axes_follow_rotation() {
        let r = Rotation3::from_axis_angle(&Unit::new_normalize(Vec3::new(0.3, -1.0, 0.7)), 0.9);
        let base = compute_frame(&box_cloud()).unwrap();
        let rotated = box_cloud().map_vertices(|v| r * v);
        let f = compute_frame(&rotated).unwrap();
        for k in 0..3 {
            // Oracle: rotate the baseline axis, then apply the sign rule.
            let expected = normalize_sign(r * base.axes[k]);
            let ok = (f.axes[k] - expected).norm() < 1e-9 || (k == 2 && (f.axes[k] + expected).norm() < 1e-9);
            assert!(ok, "axis {k}: {} vs {}", f.axes[k], expected);
        }
        assert!(f.rotation().determinant() > 0.0);
    }

    #[test]
    fn regular_tetrahedron_is_degenerate() {
        assert!(matches!(
            compute_frame(&fixtures::tetrahedron()),
            Err(FrameError::AmbiguousMajorAxis(..))
        ));
    }

    #[test]
    fn planar_and_tiny_inputs_fail() {
        assert!(matches!(
            compute_frame(&fixtures::planar_grid(3, 2, 1.0)),
            Err(FrameError::Coplanar(_))
        ));
        let tri = Mesh::new(vec![Vec3::zeros(), Vec3::x(), Vec3::y()], vec![]).unwrap();
        assert_eq!(compute_frame(&tri), Err(FrameError::TooFewVertices(3)));
    }

    #[test]
    fn round_trips() {
        let m = fixtures::knee_leg().mesh;
        let f = compute_frame(&m).unwrap();
        let back = from_frame(&to_frame(&m, &f), &f);
        let dev = m
            .vertices
            .iter()
            .zip(&back.vertices)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(dev < 1e-9, "{dev}");

        let id = PrincipalFrame::identity();
        assert_eq!(to_frame(&m, &id), m);
        let shifted = PrincipalFrame {
            center: Vec3::new(1.0, 2.0, 3.0),
            ..PrincipalFrame::identity()
        };
        let moved = from_frame(&m, &shifted);
        for (a, b) in m.vertices.iter().zip(&moved.vertices) {
            assert_eq!(*b, a + Vec3::new(1.0, 2.0, 3.0));
        }
    }

    #[test]
    fn aligned_mesh_is_unchanged() {
        // Centered at the origin with axes along x, y, z.
        let m = fixtures::axis_box(Vec3::new(-2.0, -1.0, -0.5), Vec3::new(2.0, 1.0, 0.5));
        let f = compute_frame(&m).unwrap();
        let local = to_frame(&m, &f);
        for (a, b) in m.vertices.iter().zip(&local.vertices) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn aligned_output_has_diagonal_covariance() {
        let r = Rotation3::from_euler_angles(0.4, -1.1, 2.0);
        let m = fixtures::knee_leg().mesh.map_vertices(|v| r * v + Vec3::new(5.0, -3.0, 1.0));
        let f = compute_frame(&m).unwrap();
        let local = to_frame(&m, &f);
        // Oracle: brute-force covariance of the transformed vertices.
        let (center, cov) = vertex_covariance(&local.vertices);
        assert!(center.norm() < 1e-9);
        let largest = cov[(0, 0)].max(cov[(1, 1)]).max(cov[(2, 2)]);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!(cov[(i, j)].abs() < 1e-6 * largest);
                }
            }
        }
        let again = compute_frame(&local).unwrap();
        assert!((again.rotation() - Matrix3::identity()).norm() < 1e-6);
        assert!(again.center.norm() < 1e-6);
    }
}
