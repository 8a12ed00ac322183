use super::chain::{decimate_chain, smooth_centers, DEFAULT_ANGLE_TOLERANCE_DEG};
use super::{Skeleton, SkeletonError};
use crate::linalg::Vec3;
use crate::mesh::Mesh;
use crate::slicer::{ChainNode, PartChains, PartLabel, RayCaster};
use serde::{Deserialize, Serialize};

/// Limb heads farther than this multiple of the slice spacing from the
/// trunk are rejected.
pub const DISCONNECT_MULTIPLIER: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkeletonOptions {
    /// Decimation tolerance in degrees.
    pub angle_tolerance: f64,
    /// Resample each chain along a Bezier curve before decimating.
    pub smooth: bool,
}

impl Default for SkeletonOptions {
    fn default() -> Self {
        SkeletonOptions {
            angle_tolerance: DEFAULT_ANGLE_TOLERANCE_DEG,
            smooth: false,
        }
    }
}

/// Nodes that survive the parity checks, in chain order.
fn interior_nodes<'a>(nodes: &'a [ChainNode], caster: &RayCaster) -> Vec<&'a ChainNode> {
    nodes
        .iter()
        .filter(|n| n.parity_valid && caster.contains(&n.center))
        .collect()
}

fn joints_of(nodes: &[&ChainNode], options: &SkeletonOptions) -> Vec<Vec3> {
    let centers: Vec<Vec3> = nodes.iter().map(|n| n.center).collect();
    let centers = if options.smooth {
        smooth_centers(&centers)
    } else {
        centers
    };
    decimate_chain(&centers, options.angle_tolerance)
}

/// Surface-to-surface gap between two cross-sections, never negative.
fn gap(a: &ChainNode, b: &ChainNode) -> f64 {
    ((a.center - b.center).norm() - a.radius - b.radius).max(0.0)
}

fn nearest(points: &[Vec3], p: &Vec3) -> (usize, f64) {
    points
        .iter()
        .enumerate()
        .map(|(i, q)| (i, (q - p).norm()))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .expect("non-empty")
}

/// Builds a skeleton from labeled center chains of a frame-aligned mesh.
///
/// The torso chain becomes the trunk. Each limb chain is oriented so its
/// head is the end nearest a trunk joint and attached there. Centers whose
/// section failed the parity check, or that the mesh does not contain, are
/// dropped before decimation, so every joint lies inside the mesh.
pub fn build_skeleton(chains: &PartChains, mesh: &Mesh, options: &SkeletonOptions) -> Result<Skeleton, SkeletonError> {
    let torso = chains.torso().ok_or(SkeletonError::NoChains)?;
    let caster = RayCaster::new(mesh);

    let trunk_nodes = interior_nodes(&torso.nodes, &caster);
    if trunk_nodes.is_empty() {
        return Err(SkeletonError::TooFewJoints(0));
    }
    let trunk = joints_of(&trunk_nodes, options);
    let mut joints = trunk.clone();
    let mut parts = vec![PartLabel::Torso; trunk.len()];
    let mut bones: Vec<[usize; 2]> = (1..trunk.len()).map(|i| [i - 1, i]).collect();
    let limit = DISCONNECT_MULTIPLIER * chains.spacing;

    for (index, chain) in chains.chains.iter().enumerate() {
        if chain.label == PartLabel::Torso {
            continue;
        }
        let mut nodes = interior_nodes(&chain.nodes, &caster);
        if nodes.is_empty() {
            log::warn!("limb chain {index} has no interior centers; skipped");
            continue;
        }
        let head_first = nearest(&trunk, &nodes[0].center).1;
        let head_last = nearest(&trunk, &nodes[nodes.len() - 1].center).1;
        if head_last < head_first {
            nodes.reverse();
        }
        let head = nodes[0];
        let head_gap = trunk_nodes.iter().map(|t| gap(head, t)).fold(f64::INFINITY, f64::min);
        if head_gap > limit {
            return Err(SkeletonError::DisconnectedChain {
                chain: index,
                gap: head_gap,
                limit,
            });
        }
        let (attach, _) = nearest(&trunk, &head.center);
        let limb = joints_of(&nodes, options);
        let mut previous = attach;
        for joint in limb {
            joints.push(joint);
            parts.push(chain.label);
            bones.push([previous, joints.len() - 1]);
            previous = joints.len() - 1;
        }
    }

    if joints.len() < 2 {
        return Err(SkeletonError::TooFewJoints(joints.len()));
    }
    let (root, _) = nearest(&trunk, &mesh.centroid());
    Skeleton::with_parts(joints, bones, root, parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::frame::{compute_frame, to_frame};
    use crate::slicer::{classify_parts, slice_mesh, SliceConfig};

    fn skeleton_of(mesh: &Mesh) -> (Skeleton, Mesh, PartChains) {
        let frame = compute_frame(mesh).unwrap();
        let local = to_frame(mesh, &frame);
        let chains = classify_parts(&slice_mesh(&local, &SliceConfig::default()).unwrap());
        let skeleton = build_skeleton(&chains, &local, &SkeletonOptions::default()).unwrap();
        (skeleton, local, chains)
    }

    fn assert_tree_inside(s: &Skeleton, mesh: &Mesh) {
        assert_eq!(s.bones.len() + 1, s.joints.len());
        assert!(s.distances_from(s.root).unwrap().iter().all(|d| d.is_finite()));
        let caster = RayCaster::new(mesh);
        for j in &s.joints {
            assert!(caster.contains(j));
        }
    }

    #[test]
    fn cylinder_is_one_bone() {
        let (s, local, _) = skeleton_of(&fixtures::cylinder(0.2, 2.0, 24, 12));
        assert_eq!(s.joints.len(), 2);
        assert_tree_inside(&s, &local);
    }

    #[test]
    fn y_tube_has_one_branch_joint() {
        let (s, local, _) = skeleton_of(&fixtures::y_tube().mesh);
        let degrees: Vec<usize> = (0..s.joint_count()).map(|j| s.degree(j)).collect();
        assert_eq!(degrees.iter().filter(|&&d| d == 3).count(), 1, "{degrees:?}");
        assert!(degrees.iter().all(|&d| d <= 3));
        assert_tree_inside(&s, &local);
    }

    #[test]
    fn humanoid_has_four_leaf_chains() {
        let (s, local, chains) = skeleton_of(&fixtures::humanoid().mesh);
        let leaves: Vec<usize> = (0..s.joint_count()).filter(|&j| s.degree(j) == 1).collect();
        assert_eq!(leaves.len(), 4, "{:?}", s.bones);
        for &leaf in &leaves {
            assert_ne!(s.joint_parts[leaf], PartLabel::Torso);
        }
        assert!(s.joint_count() * 2 <= chains.center_count());
        assert_eq!(s.joint_parts[s.root], PartLabel::Torso);
        assert_tree_inside(&s, &local);
    }

    #[test]
    fn separated_parts_are_rejected() {
        let mesh = fixtures::two_cylinders(0.2, 3.0, 0.5);
        let frame = compute_frame(&mesh).unwrap();
        let local = to_frame(&mesh, &frame);
        let chains = classify_parts(&slice_mesh(&local, &SliceConfig::default()).unwrap());
        assert!(matches!(
            build_skeleton(&chains, &local, &SkeletonOptions::default()),
            Err(SkeletonError::DisconnectedChain { chain: 1, .. })
        ));
    }
}
