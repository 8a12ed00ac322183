//! The full deformation stage: solve, check for large rotations, then blend
//! in one pass or in steps.

use crate::distortion::{
    apply_decomposed, decompose_rotation, flag_joints, joint_rotation_angles, DetectorConfig, DistortionBaseline,
    DistortionError, DistortionReport,
};
use crate::mesh::Mesh;
use crate::mls::{blend_vertices, solve_pose, ControlHandles, Pose, DEFAULT_HANDLE_ALPHA};
use crate::skeleton::Skeleton;
use crate::skinning::SkinBinding;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeformOptions {
    pub alpha: f64,
    pub detector: DetectorConfig,
    /// Split flagged rotations into steps. When false every pose is
    /// applied in a single pass.
    pub decompose: bool,
}

impl Default for DeformOptions {
    fn default() -> Self {
        DeformOptions {
            alpha: DEFAULT_HANDLE_ALPHA,
            detector: DetectorConfig::default(),
            decompose: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Deformation {
    pub mesh: Mesh,
    pub pose: Pose,
    pub report: DistortionReport,
}

/// Deforms `mesh` with a baseline computed from it.
pub fn deform(
    mesh: &Mesh,
    skeleton: &Skeleton,
    binding: &SkinBinding,
    handles: &ControlHandles,
    options: &DeformOptions,
) -> Result<Deformation, DistortionError> {
    let baseline = DistortionBaseline::new(mesh, binding, skeleton.bones.len())?;
    deform_with_baseline(mesh, skeleton, binding, handles, options, &baseline)
}

/// Deforms `mesh`, reusing a precomputed rest baseline for the report.
///
/// Angles and flags always come from the single full solve. When a joint is
/// flagged and decomposition is enabled, the motion is applied in
/// `ceil(largest angle / max step)` steps.
pub fn deform_with_baseline(
    mesh: &Mesh,
    skeleton: &Skeleton,
    binding: &SkinBinding,
    handles: &ControlHandles,
    options: &DeformOptions,
    baseline: &DistortionBaseline,
) -> Result<Deformation, DistortionError> {
    options.detector.validate()?;
    let mut pose = solve_pose(skeleton, handles, options.alpha)?;
    let angles = joint_rotation_angles(&pose.cache);
    let flagged = flag_joints(&angles, options.detector.angle_threshold);

    let (deformed, steps_used) = if options.decompose && !flagged.is_empty() {
        let steps = decompose_rotation(handles, skeleton, &pose.cache, &angles, &options.detector)?;
        log::info!("decomposing {} flagged joints into {} steps", flagged.len(), steps.len());
        let (deformed, final_skeleton) = apply_decomposed(mesh, skeleton, binding, &steps, options.alpha)?;
        pose.deformed_joints = final_skeleton.joints;
        (deformed, steps.len())
    } else {
        (blend_vertices(mesh, binding, &pose.cache)?, 1)
    };

    let (global, per_region) = baseline.measure(&deformed)?;
    let tolerance = baseline.tolerance(&options.detector);
    Ok(Deformation {
        mesh: deformed,
        pose,
        report: DistortionReport {
            global_distortion: global,
            per_joint_angle: angles,
            flagged_joints: flagged,
            per_region_distortion: per_region,
            steps_used,
            tolerance,
            exceeds_tolerance: global > tolerance,
        },
    })
}
