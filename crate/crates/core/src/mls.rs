//! Skeleton-driven rigid moving least squares.
//!
//! Handles pin joints to target positions. Every joint gets its own rigid
//! transform, fitted to all handles weighted by their distance along the
//! skeleton, and vertices follow a blend of their joints' transforms.

use crate::linalg::{rotation_vector, Vec3};
use crate::mesh::Mesh;
use crate::procrustes::{weighted_procrustes, Degeneracy};
use crate::skeleton::Skeleton;
use crate::skinning::{SkinBinding, DEFAULT_ALPHA, WEIGHT_EPSILON};
use nalgebra::UnitQuaternion;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default falloff for the handle weights.
pub const DEFAULT_HANDLE_ALPHA: f64 = DEFAULT_ALPHA;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MlsError {
    #[error("at least one handle is required")]
    NoHandles,
    #[error("handle references joint {joint} but the skeleton has {count} joints")]
    InvalidJoint { joint: usize, count: usize },
    #[error("joint {0} has more than one handle")]
    DuplicateJoint(usize),
    #[error("handle target for joint {0} is not finite")]
    NonFiniteTarget(usize),
    #[error("falloff exponent must be positive and finite, got {0}")]
    InvalidAlpha(f64),
    #[error("binding covers {binding} vertices but the mesh has {mesh}")]
    VertexCount { binding: usize, mesh: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Handle {
    pub joint: usize,
    pub target: Vec3,
}

/// A validated set of handles on distinct joints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlHandles {
    handles: Vec<Handle>,
}

impl ControlHandles {
    pub fn new(handles: Vec<Handle>, joint_count: usize) -> Result<Self, MlsError> {
        if handles.is_empty() {
            return Err(MlsError::NoHandles);
        }
        let mut seen = vec![false; joint_count];
        for h in &handles {
            if h.joint >= joint_count {
                return Err(MlsError::InvalidJoint {
                    joint: h.joint,
                    count: joint_count,
                });
            }
            if seen[h.joint] {
                return Err(MlsError::DuplicateJoint(h.joint));
            }
            if !(h.target.x.is_finite() && h.target.y.is_finite() && h.target.z.is_finite()) {
                return Err(MlsError::NonFiniteTarget(h.joint));
            }
            seen[h.joint] = true;
        }
        Ok(ControlHandles { handles })
    }

    /// One handle per joint, each at its rest position.
    pub fn at_rest(skeleton: &Skeleton) -> Self {
        ControlHandles {
            handles: skeleton
                .joints
                .iter()
                .enumerate()
                .map(|(joint, &target)| Handle { joint, target })
                .collect(),
        }
    }

    pub fn handles(&self) -> &[Handle] {
        &self.handles
    }

    pub fn len(&self) -> usize {
        self.handles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.handles.is_empty()
    }

    /// Same joints, new targets in the same order.
    pub fn with_targets(&self, targets: &[Vec3]) -> Self {
        assert_eq!(targets.len(), self.handles.len());
        ControlHandles {
            handles: self
                .handles
                .iter()
                .zip(targets)
                .map(|(h, &target)| Handle { joint: h.joint, target })
                .collect(),
        }
    }

    /// Applies a map to every target.
    pub fn map_targets(&self, f: impl Fn(&Vec3) -> Vec3) -> Self {
        let targets: Vec<Vec3> = self.handles.iter().map(|h| f(&h.target)).collect();
        self.with_targets(&targets)
    }
}

/// Rigid transform of one joint: `x -> rotation (x - p_star) + q_star`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointTransform {
    pub p_star: Vec3,
    pub q_star: Vec3,
    pub rotation: UnitQuaternion<f64>,
    /// Axis times angle, angle in `[0, pi]`.
    pub rotation_vector: Vec3,
    pub translation: Vec3,
    pub degeneracy: Degeneracy,
}

impl JointTransform {
    pub fn identity_at(p: Vec3) -> Self {
        JointTransform::new(p, p, UnitQuaternion::identity(), Degeneracy::None)
    }

    pub fn new(p_star: Vec3, q_star: Vec3, rotation: UnitQuaternion<f64>, degeneracy: Degeneracy) -> Self {
        JointTransform {
            p_star,
            q_star,
            rotation,
            rotation_vector: rotation_vector(&rotation),
            translation: q_star - rotation * p_star,
            degeneracy,
        }
    }

    pub fn apply(&self, x: &Vec3) -> Vec3 {
        self.rotation * (x - self.p_star) + self.q_star
    }

    /// Rotation angle in radians.
    pub fn angle(&self) -> f64 {
        self.rotation_vector.norm()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeformationCache {
    pub joints: Vec<JointTransform>,
}

impl DeformationCache {
    pub fn identity(skeleton: &Skeleton) -> Self {
        DeformationCache {
            joints: skeleton.joints.iter().map(|&p| JointTransform::identity_at(p)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub handles: ControlHandles,
    pub cache: DeformationCache,
    pub deformed_joints: Vec<Vec3>,
}

/// Handle weights seen from `joint`: `1 / (d^(2 alpha) + eps)` with `d` the
/// skeleton path distance.
pub fn handle_weights(path_from_joint: &[f64], handles: &ControlHandles, alpha: f64) -> Vec<f64> {
    handles
        .handles
        .iter()
        .map(|h| 1.0 / (path_from_joint[h.joint].powf(2.0 * alpha) + WEIGHT_EPSILON))
        .collect()
}

/// Fits one rigid transform per joint to the handles.
pub fn solve_joint_transforms(skeleton: &Skeleton, handles: &ControlHandles, alpha: f64) -> Result<DeformationCache, MlsError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(MlsError::InvalidAlpha(alpha));
    }
    let handles = ControlHandles::new(handles.handles.clone(), skeleton.joint_count())?;
    let rest: Vec<Vec3> = handles.handles.iter().map(|h| skeleton.joints[h.joint]).collect();
    let targets: Vec<Vec3> = handles.handles.iter().map(|h| h.target).collect();
    let paths = skeleton.path_distance_matrix();
    let joints: Vec<JointTransform> = paths
        .iter()
        .map(|path| {
            let weights = handle_weights(path, &handles, alpha);
            let fit = weighted_procrustes(&rest, &targets, &weights);
            JointTransform::new(fit.p_star, fit.q_star, fit.rotation, fit.degeneracy)
        })
        .collect();
    let degenerate = joints.iter().filter(|j| j.degeneracy == Degeneracy::Collinear).count();
    if degenerate > 0 && handles.len() > 1 {
        log::warn!("{degenerate} joints fitted to collinear handles; roll about the line is left at zero");
    }
    Ok(DeformationCache { joints })
}

/// Joint positions after applying each joint's own transform.
pub fn deformed_joints(skeleton: &Skeleton, cache: &DeformationCache) -> Vec<Vec3> {
    skeleton
        .joints
        .iter()
        .zip(&cache.joints)
        .map(|(p, t)| t.apply(p))
        .collect()
}

/// Solves the joint transforms and records the deformed joints.
pub fn solve_pose(skeleton: &Skeleton, handles: &ControlHandles, alpha: f64) -> Result<Pose, MlsError> {
    let cache = solve_joint_transforms(skeleton, handles, alpha)?;
    Ok(Pose {
        deformed_joints: deformed_joints(skeleton, &cache),
        handles: handles.clone(),
        cache,
    })
}

/// Linear blend of the joint transforms at every vertex. The face list is
/// copied unchanged.
pub fn blend_vertices(mesh: &Mesh, binding: &SkinBinding, cache: &DeformationCache) -> Result<Mesh, MlsError> {
    if binding.vertex_count() != mesh.vertex_count() {
        return Err(MlsError::VertexCount {
            binding: binding.vertex_count(),
            mesh: mesh.vertex_count(),
        });
    }
    let vertices = mesh
        .vertices
        .par_iter()
        .zip(&binding.weights)
        .map(|(v, weights)| {
            weights
                .iter()
                .fold(Vec3::zeros(), |acc, &(j, w)| acc + cache.joints[j].apply(v) * w)
        })
        .collect();
    Ok(mesh.with_vertices(vertices))
}
