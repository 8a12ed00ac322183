//! The setup stage: from a closed mesh to a skeleton with skin weights.

use crate::frame::{compute_frame, to_frame, FrameError, PrincipalFrame};
use crate::mesh::{non_manifold_vertex_count, validate_topology, Mesh};
use crate::skeleton::{build_skeleton, Skeleton, SkeletonError, SkeletonOptions};
use crate::skinning::{bind_vertices, compute_weights, SkinBinding, SkinError, DEFAULT_ALPHA, DEFAULT_INFLUENCE_JOINTS};
use crate::slicer::{classify_parts, slice_mesh, SliceConfig, SliceError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RigError {
    #[error("mesh is not closed: {boundary_edges} boundary edges, {non_manifold_edges} non-manifold edges, {non_manifold_vertices} non-manifold vertices")]
    OpenMesh {
        boundary_edges: usize,
        non_manifold_edges: usize,
        non_manifold_vertices: usize,
    },
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Slice(#[from] SliceError),
    #[error(transparent)]
    Skeleton(#[from] SkeletonError),
    #[error(transparent)]
    Skin(#[from] SkinError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RigConfig {
    pub slice: SliceConfig,
    pub skeleton: SkeletonOptions,
    /// Falloff exponent of the skin weights.
    pub alpha: f64,
    pub influence_joints: usize,
}

impl Default for RigConfig {
    fn default() -> Self {
        RigConfig {
            slice: SliceConfig::default(),
            skeleton: SkeletonOptions::default(),
            alpha: DEFAULT_ALPHA,
            influence_joints: DEFAULT_INFLUENCE_JOINTS,
        }
    }
}

/// A skeleton and skin binding in the mesh's own coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rig {
    pub frame: PrincipalFrame,
    pub skeleton: Skeleton,
    pub binding: SkinBinding,
    /// Center chains found by slicing, torso included.
    pub chain_count: usize,
    /// Slice centers before decimation.
    pub center_count: usize,
}

/// Fails unless every edge has exactly two faces and every vertex a single
/// fan of them.
pub fn require_closed(mesh: &Mesh) -> Result<(), RigError> {
    let topology = validate_topology(mesh);
    let non_manifold_vertices = non_manifold_vertex_count(mesh);
    if !topology.is_closed || non_manifold_vertices > 0 {
        return Err(RigError::OpenMesh {
            boundary_edges: topology.boundary_edge_count,
            non_manifold_edges: topology.non_manifold_edge_count,
            non_manifold_vertices,
        });
    }
    Ok(())
}

/// Validates, aligns, slices, extracts the skeleton and binds the skin.
pub fn build_rig(mesh: &Mesh, config: &RigConfig) -> Result<Rig, RigError> {
    require_closed(mesh)?;
    let frame = compute_frame(mesh)?;
    let local = to_frame(mesh, &frame);
    let slices = slice_mesh(&local, &config.slice)?;
    let chains = classify_parts(&slices);
    log::info!(
        "{} slices, {} chains, {} centers",
        slices.len(),
        chains.chains.len(),
        chains.center_count()
    );
    let local_skeleton = build_skeleton(&chains, &local, &config.skeleton)?;
    let joints = local_skeleton.joints.iter().map(|p| frame.to_world(p)).collect();
    let skeleton = Skeleton::with_parts(
        joints,
        local_skeleton.bones.clone(),
        local_skeleton.root,
        local_skeleton.joint_parts.clone(),
    )?;
    let mut binding = bind_vertices(mesh, &skeleton)?;
    binding.influence_joints = config.influence_joints;
    let binding = compute_weights(&skeleton, &binding, config.alpha)?;
    Ok(Rig {
        frame,
        skeleton,
        binding,
        chain_count: chains.chains.len(),
        center_count: chains.center_count(),
    })
}
