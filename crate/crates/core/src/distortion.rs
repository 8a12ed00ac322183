//! Curviness-based distortion, large-angle detection and rotation
//! decomposition.

use crate::linalg::Vec3;
use crate::mesh::{vertex_areas, vertex_curviness, Mesh};
use crate::mls::{blend_vertices, deformed_joints, solve_joint_transforms, ControlHandles, DeformationCache, JointTransform, MlsError};
use crate::skeleton::Skeleton;
use crate::skinning::SkinBinding;
use nalgebra::{Unit, UnitQuaternion};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_3, FRAC_PI_6};
use thiserror::Error;

/// Fraction of the rest mesh's mean curviness used as the default
/// distortion tolerance.
pub const DEFAULT_TOLERANCE_FRACTION: f64 = 0.15;
/// Slack on the step-count ratio so that exact multiples do not gain a step.
const STEP_RATIO_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistortionError {
    #[error("meshes differ in topology")]
    TopologyMismatch,
    #[error("binding covers {binding} vertices but the mesh has {mesh}")]
    VertexCount { binding: usize, mesh: usize },
    #[error("invalid detector config: {0}")]
    Config(String),
    #[error("largest joint rotation {angle:.6} rad does not exceed the threshold {threshold:.6} rad")]
    BelowThreshold { angle: f64, threshold: f64 },
    #[error("decomposition needs at least 2 steps, got {0}")]
    TooFewSteps(usize),
    #[error(transparent)]
    Mls(#[from] MlsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Joints rotating by more than this many radians are flagged.
    pub angle_threshold: f64,
    /// Largest rotation, in radians, applied in one decomposed step.
    pub max_step_angle: f64,
    /// Distortion above which a report is marked as exceeding tolerance.
    /// `None` uses a fraction of the rest mesh's mean curviness.
    pub distortion_tolerance: Option<f64>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            angle_threshold: FRAC_PI_3,
            max_step_angle: FRAC_PI_6,
            distortion_tolerance: None,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), DistortionError> {
        if !(self.max_step_angle > 0.0 && self.max_step_angle <= self.angle_threshold) {
            return Err(DistortionError::Config(format!(
                "need 0 < max step angle ({}) <= angle threshold ({})",
                self.max_step_angle, self.angle_threshold
            )));
        }
        if let Some(t) = self.distortion_tolerance {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(DistortionError::Config(format!("tolerance {t} must be finite and non-negative")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub global_distortion: f64,
    /// Rotation angle of every joint in radians.
    pub per_joint_angle: Vec<f64>,
    pub flagged_joints: Vec<usize>,
    /// Distortion over the vertices bound to each bone.
    pub per_region_distortion: Vec<f64>,
    pub steps_used: usize,
    pub tolerance: f64,
    pub exceeds_tolerance: bool,
}

/// Rest-state quantities needed to measure distortion repeatedly.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionBaseline {
    faces: Vec<[usize; 3]>,
    curviness: Vec<f64>,
    areas: Vec<f64>,
    bone_of_vertex: Vec<usize>,
    bone_count: usize,
    mean_curviness: f64,
}

impl DistortionBaseline {
    pub fn new(rest: &Mesh, binding: &SkinBinding, bone_count: usize) -> Result<Self, DistortionError> {
        if binding.vertex_count() != rest.vertex_count() {
            return Err(DistortionError::VertexCount {
                binding: binding.vertex_count(),
                mesh: rest.vertex_count(),
            });
        }
        let curviness = vertex_curviness(rest);
        Ok(DistortionBaseline {
            faces: rest.faces.clone(),
            mean_curviness: curviness.mean(),
            curviness: curviness.values,
            areas: vertex_areas(rest),
            bone_of_vertex: binding.bone_of_vertex.clone(),
            bone_count,
        })
    }

    pub fn mean_curviness(&self) -> f64 {
        self.mean_curviness
    }

    /// Resolves the tolerance of `config` against this rest mesh.
    pub fn tolerance(&self, config: &DetectorConfig) -> f64 {
        config
            .distortion_tolerance
            .unwrap_or(DEFAULT_TOLERANCE_FRACTION * self.mean_curviness)
    }

    /// Area-weighted mean curviness change, globally and per bone.
    pub fn measure(&self, deformed: &Mesh) -> Result<(f64, Vec<f64>), DistortionError> {
        if deformed.faces != self.faces || deformed.vertex_count() != self.curviness.len() {
            return Err(DistortionError::TopologyMismatch);
        }
        let after = vertex_curviness(deformed).values;
        let mut total = (0.0, 0.0);
        let mut bones = vec![(0.0, 0.0); self.bone_count];
        for v in 0..after.len() {
            let change = self.areas[v] * (after[v] - self.curviness[v]).abs();
            total.0 += change;
            total.1 += self.areas[v];
            if let Some(b) = bones.get_mut(self.bone_of_vertex[v]) {
                b.0 += change;
                b.1 += self.areas[v];
            }
        }
        let ratio = |(sum, weight): (f64, f64)| if weight > 0.0 { sum / weight } else { 0.0 };
        Ok((ratio(total), bones.into_iter().map(ratio).collect()))
    }
}

/// Distortion between a rest mesh and a deformation of it.
pub fn measure_distortion(rest: &Mesh, deformed: &Mesh, binding: &SkinBinding, bone_count: usize) -> Result<(f64, Vec<f64>), DistortionError> {
    DistortionBaseline::new(rest, binding, bone_count)?.measure(deformed)
}

/// Rotation angle of every joint, in `[0, pi]`.
pub fn joint_rotation_angles(cache: &DeformationCache) -> Vec<f64> {
    cache.joints.iter().map(JointTransform::angle).collect()
}

/// Joints whose angle is strictly above `threshold`.
pub fn flag_joints(angles: &[f64], threshold: f64) -> Vec<usize> {
    (0..angles.len()).filter(|&j| angles[j] > threshold).collect()
}

/// Number of equal steps needed so no step exceeds `max_step`.
pub fn step_count(angle: f64, max_step: f64) -> usize {
    ((angle / max_step - STEP_RATIO_SLACK).ceil() as usize).max(1)
}

/// Position of `x` after fraction `s` of the screw motion that carries
/// out `transform`: rotation by `s` times the angle about the screw axis
/// and `s` times the slide along it.
pub fn screw_interpolate(transform: &JointTransform, x: &Vec3, s: f64) -> Vec3 {
    let u = transform.rotation_vector;
    let theta = u.norm();
    let t = transform.translation;
    if theta < 1e-12 {
        return x + t * s;
    }
    let axis = u / theta;
    let slide = axis * t.dot(&axis);
    let across = t - slide;
    let center = (across + axis.cross(&across) / (theta / 2.0).tan()) / 2.0;
    let partial = UnitQuaternion::from_axis_angle(&Unit::new_unchecked(axis), s * theta);
    center + partial * (x - center) + slide * s
}

/// Splits a large motion into intermediate handle sets.
///
/// Each handle follows the screw motion of its joint's transform in
/// `cache`, plus a linearly growing share of whatever that transform
/// leaves between the rest joint and the target, so the last set equals
/// `handles`.
pub fn decompose_rotation(
    handles: &ControlHandles,
    rest: &Skeleton,
    cache: &DeformationCache,
    angles: &[f64],
    config: &DetectorConfig,
) -> Result<Vec<ControlHandles>, DistortionError> {
    config.validate()?;
    let largest = flag_joints(angles, config.angle_threshold)
        .into_iter()
        .map(|j| angles[j])
        .fold(f64::NEG_INFINITY, f64::max);
    if largest == f64::NEG_INFINITY {
        return Err(DistortionError::BelowThreshold {
            angle: angles.iter().copied().fold(0.0, f64::max),
            threshold: config.angle_threshold,
        });
    }
    let n = step_count(largest, config.max_step_angle);
    let mut steps = Vec::with_capacity(n);
    for k in 1..n {
        let s = k as f64 / n as f64;
        let targets: Vec<Vec3> = handles
            .handles()
            .iter()
            .map(|h| {
                let transform = &cache.joints[h.joint];
                let p = rest.joints[h.joint];
                let residual = h.target - screw_interpolate(transform, &p, 1.0);
                screw_interpolate(transform, &p, s) + residual * s
            })
            .collect();
        steps.push(handles.with_targets(&targets));
    }
    steps.push(handles.clone());
    Ok(steps)
}

/// Applies handle sets one after another. Each step is solved against the
/// joints as the previous step left them and blends the previous step's
/// mesh. Returns the final mesh and skeleton.
pub fn apply_decomposed(
    mesh: &Mesh,
    skeleton: &Skeleton,
    binding: &SkinBinding,
    steps: &[ControlHandles],
    alpha: f64,
) -> Result<(Mesh, Skeleton), DistortionError> {
    if steps.len() < 2 {
        return Err(DistortionError::TooFewSteps(steps.len()));
    }
    let mut current = mesh.clone();
    let mut joints = skeleton.clone();
    for step in steps {
        let cache = solve_joint_transforms(&joints, step, alpha)?;
        current = blend_vertices(&current, binding, &cache)?;
        joints = joints.with_joints(deformed_joints(&joints, &cache));
    }
    Ok((current, joints))
}
