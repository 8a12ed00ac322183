//! Vertex-to-skeleton binding and per-joint influence weights.
//!
//! Each vertex is attached to the closest point on its nearest bone. The
//! distance from a vertex to joint `j` is the straight hop to that
//! attachment point plus the shortest way along the skeleton from there to
//! `j`, and weights fall off as an inverse power of it.

use crate::linalg::Vec3;
use crate::mesh::Mesh;
use crate::skeleton::Skeleton;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_INFLUENCE_JOINTS: usize = 4;
pub const DEFAULT_ALPHA: f64 = 2.0;
pub const WEIGHT_EPSILON: f64 = 1e-8;
/// Bone distances closer than this are ties, resolved to the lower index.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SkinError {
    #[error("skeleton has no bones")]
    NoBones,
    #[error("falloff exponent must be positive and finite, got {0}")]
    InvalidAlpha(f64),
    #[error("stiffness must be at least 1, got {0}")]
    InvalidStiffness(f64),
    #[error("bone {index} out of range ({count} bones)")]
    UnknownBone { index: usize, count: usize },
    #[error("influence count must be at least 1")]
    NoInfluence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkinBinding {
    pub bone_of_vertex: Vec<usize>,
    /// Position of the attachment point along its bone, 0 at the first
    /// joint and 1 at the second.
    pub bone_parameter: Vec<f64>,
    /// Distance from the vertex to its attachment point.
    pub bone_distance: Vec<f64>,
    /// Sparse `(joint, weight)` lists, sorted by joint index.
    pub weights: Vec<Vec<(usize, f64)>>,
    pub influence_joints: usize,
}

impl SkinBinding {
    pub fn vertex_count(&self) -> usize {
        self.bone_of_vertex.len()
    }

    /// Weight of `joint` on `vertex`, 0 when it is not an influence.
    pub fn weight(&self, vertex: usize, joint: usize) -> f64 {
        self.weights[vertex]
            .iter()
            .find(|(j, _)| *j == joint)
            .map_or(0.0, |&(_, w)| w)
    }
}

/// Closest point parameter on segment `a`-`b` and the distance to it.
pub fn segment_projection(p: &Vec3, a: &Vec3, b: &Vec3) -> (f64, f64) {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (t, (p - (a + ab * t)).norm())
}

/// Attaches every vertex to the bone segment nearest to it.
pub fn bind_vertices(mesh: &Mesh, skeleton: &Skeleton) -> Result<SkinBinding, SkinError> {
    if skeleton.bones.is_empty() {
        return Err(SkinError::NoBones);
    }
    let attach: Vec<(usize, f64, f64)> = mesh
        .vertices
        .par_iter()
        .map(|v| {
            let mut best = (usize::MAX, 0.0, f64::INFINITY);
            for (i, &[a, b]) in skeleton.bones.iter().enumerate() {
                let (t, d) = segment_projection(v, &skeleton.joints[a], &skeleton.joints[b]);
                if d < best.2 - TIE_TOLERANCE {
                    best = (i, t, d);
                }
            }
            best
        })
        .collect();
    Ok(SkinBinding {
        bone_of_vertex: attach.iter().map(|a| a.0).collect(),
        bone_parameter: attach.iter().map(|a| a.1).collect(),
        bone_distance: attach.iter().map(|a| a.2).collect(),
        weights: vec![Vec::new(); attach.len()],
        influence_joints: DEFAULT_INFLUENCE_JOINTS,
    })
}

/// Distances from the attachment point of `vertex` to every joint, going
/// along the skeleton.
pub fn vertex_joint_distances(skeleton: &Skeleton, paths: &[Vec<f64>], binding: &SkinBinding, vertex: usize) -> Vec<f64> {
    let bone = binding.bone_of_vertex[vertex];
    let [a, b] = skeleton.bones[bone];
    let length = skeleton.bone_lengths[bone];
    let t = binding.bone_parameter[vertex];
    let hop = binding.bone_distance[vertex];
    (0..skeleton.joint_count())
        .map(|j| hop + (t * length + paths[a][j]).min((1.0 - t) * length + paths[b][j]))
        .collect()
}

/// Fills in normalized inverse-distance weights over the
/// `binding.influence_joints` nearest joints.
pub fn compute_weights(skeleton: &Skeleton, binding: &SkinBinding, alpha: f64) -> Result<SkinBinding, SkinError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(SkinError::InvalidAlpha(alpha));
    }
    if binding.influence_joints == 0 {
        return Err(SkinError::NoInfluence);
    }
    let paths = skeleton.path_distance_matrix();
    let weights = (0..binding.vertex_count())
        .into_par_iter()
        .map(|v| {
            let distances = vertex_joint_distances(skeleton, &paths, binding, v);
            let mut order: Vec<usize> = (0..distances.len()).collect();
            order.sort_by(|&i, &j| distances[i].total_cmp(&distances[j]).then(i.cmp(&j)));
            order.truncate(binding.influence_joints);
            order.sort_unstable();
            let raw: Vec<f64> = order
                .iter()
                .map(|&j| 1.0 / (distances[j].powf(alpha) + WEIGHT_EPSILON))
                .collect();
            let total: f64 = raw.iter().sum();
            order.into_iter().zip(raw).map(|(j, w)| (j, w / total)).collect()
        })
        .collect();
    Ok(SkinBinding {
        weights,
        ..binding.clone()
    })
}

/// Sharpens the weights of vertices bound to `stiff_bones` by raising them
/// to `stiffness` and renormalizing.
pub fn rigidity_profile(binding: &SkinBinding, stiff_bones: &[usize], stiffness: f64, bone_count: usize) -> Result<SkinBinding, SkinError> {
    if !(stiffness >= 1.0 && stiffness.is_finite()) {
        return Err(SkinError::InvalidStiffness(stiffness));
    }
    if let Some(&index) = stiff_bones.iter().find(|&&b| b >= bone_count) {
        return Err(SkinError::UnknownBone {
            index,
            count: bone_count,
        });
    }
    let mut out = binding.clone();
    if stiffness == 1.0 {
        return Ok(out);
    }
    for (v, weights) in out.weights.iter_mut().enumerate() {
        if !stiff_bones.contains(&binding.bone_of_vertex[v]) {
            continue;
        }
        let sharpened: Vec<f64> = weights.iter().map(|&(_, w)| w.powf(stiffness)).collect();
        let total: f64 = sharpened.iter().sum();
        for ((_, w), s) in weights.iter_mut().zip(sharpened) {
            *w = s / total;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use proptest::prelude::*;

    fn rig(mesh: &Mesh, skeleton: &Skeleton) -> SkinBinding {
        compute_weights(skeleton, &bind_vertices(mesh, skeleton).unwrap(), DEFAULT_ALPHA).unwrap()
    }

    fn line_skeleton(n: usize) -> Skeleton {
        let joints = (0..n).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        Skeleton::new(joints, (1..n).map(|i| [i - 1, i]).collect(), 0).unwrap()
    }

    #[test]
    fn single_bone_takes_everything() {
        let mesh = fixtures::cylinder(0.2, 1.0, 12, 6);
        let s = line_skeleton(2);
        let b = bind_vertices(&mesh, &s).unwrap();
        assert!(b.bone_of_vertex.iter().all(|&i| i == 0));
    }

    #[test]
    fn ties_go_to_the_lower_bone() {
        let s = line_skeleton(3);
        let ring: Vec<Vec3> = (0..8)
            .map(|k| {
                let a = k as f64 * std::f64::consts::TAU / 8.0;
                Vec3::new(1.0, 0.3 * a.cos(), 0.3 * a.sin())
            })
            .collect();
        let faces = (1..7).map(|k| [0, k, k + 1]).collect();
        let mesh = Mesh::new(ring, faces).unwrap();
        let b = bind_vertices(&mesh, &s).unwrap();
        assert_eq!(b.bone_of_vertex, vec![0; 8]);
    }

    #[test]
    fn midpoint_splits_evenly() {
        let s = line_skeleton(2);
        let mesh = Mesh::new(
            vec![Vec3::new(0.5, 0.25, 0.0), Vec3::new(0.5, 0.0, 0.3), Vec3::new(0.5, -0.1, -0.1)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let b = rig(&mesh, &s);
        for w in &b.weights {
            assert_eq!(w.len(), 2);
            assert!((w[0].1 - 0.5).abs() < 1e-12 && (w[1].1 - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn vertex_on_a_joint_dominates() {
        let s = line_skeleton(5);
        let mesh = Mesh::new(
            vec![Vec3::new(2.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 0.0), Vec3::new(4.0, 0.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let b = rig(&mesh, &s);
        assert!(b.weight(0, 2) >= 1.0 - 1e-6);
        assert!(b.weight(1, 0) >= 1.0 - 1e-6);
        assert!(b.weight(2, 4) >= 1.0 - 1e-6);
        assert_eq!(b.weights[0].len(), DEFAULT_INFLUENCE_JOINTS);
    }

    #[test]
    fn humanoid_arms_bind_to_arm_bones() {
        let h = fixtures::humanoid();
        let frame = crate::frame::compute_frame(&h.mesh).unwrap();
        let local = crate::frame::to_frame(&h.mesh, &frame);
        let chains = crate::slicer::classify_parts(
            &crate::slicer::slice_mesh(&local, &crate::slicer::SliceConfig::default()).unwrap(),
        );
        let s = crate::skeleton::build_skeleton(&chains, &local, &Default::default()).unwrap();
        let b = bind_vertices(&local, &s).unwrap();
        // The fixture labels arm tubes 1 and 2.
        let arm_vertices: Vec<usize> = (0..local.vertex_count())
            .filter(|&v| h.vertex_part[v] == 1 || h.vertex_part[v] == 2)
            .collect();
        let on_limb = arm_vertices
            .iter()
            .filter(|&&v| s.bone_part(b.bone_of_vertex[v]) != crate::slicer::PartLabel::Torso)
            .count();
        assert!(on_limb as f64 >= 0.95 * arm_vertices.len() as f64, "{on_limb}/{}", arm_vertices.len());
    }

    #[test]
    fn stiffness_profiles() {
        let binding = SkinBinding {
            bone_of_vertex: vec![0, 0, 1],
            bone_parameter: vec![0.5; 3],
            bone_distance: vec![0.1; 3],
            weights: vec![vec![(0, 0.5), (1, 0.5)], vec![(0, 0.8), (1, 0.2)], vec![(0, 0.8), (1, 0.2)]],
            influence_joints: 2,
        };
        assert_eq!(rigidity_profile(&binding, &[0], 1.0, 2).unwrap(), binding);
        let sharp = rigidity_profile(&binding, &[0], 2.0, 2).unwrap();
        assert_eq!(sharp.weights[0], vec![(0, 0.5), (1, 0.5)]);
        let (hi, lo) = (0.64 / 0.68, 0.04 / 0.68);
        assert!((sharp.weights[1][0].1 - hi).abs() < 1e-15 && (sharp.weights[1][1].1 - lo).abs() < 1e-15);
        assert!((hi - 0.941_176_470_588).abs() < 1e-11);
        assert_eq!(sharp.weights[2], binding.weights[2]);
        assert!(matches!(
            rigidity_profile(&binding, &[3], 2.0, 2),
            Err(SkinError::UnknownBone { index: 3, .. })
        ));
        assert!(rigidity_profile(&binding, &[0], 0.5, 2).is_err());
    }

    fn random_skeleton() -> impl Strategy<Value = Skeleton> {
        (2usize..8)
            .prop_flat_map(|n| {
                (
                    prop::collection::vec(prop::array::uniform3(-2.0f64..2.0), n),
                    prop::collection::vec(any::<prop::sample::Index>(), n - 1),
                )
            })
            .prop_map(|(points, parents)| {
                let joints: Vec<Vec3> = points.into_iter().map(Vec3::from).collect();
                let bones = parents.iter().enumerate().map(|(i, p)| [p.index(i + 1), i + 1]).collect();
                Skeleton::new(joints, bones, 0).unwrap()
            })
    }

    fn random_points() -> impl Strategy<Value = Mesh> {
        prop::collection::vec(prop::array::uniform3(-3.0f64..3.0), 3..20).prop_map(|p| {
            let n = p.len();
            Mesh::new(p.into_iter().map(Vec3::from).collect(), (1..n - 1).map(|k| [0, k, k + 1]).collect()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn weights_partition_unity(s in random_skeleton(), mesh in random_points(), alpha in 0.5f64..4.0) {
            let b = compute_weights(&s, &bind_vertices(&mesh, &s).unwrap(), alpha).unwrap();
            for w in &b.weights {
                prop_assert!(!w.is_empty() && w.len() <= DEFAULT_INFLUENCE_JOINTS);
                prop_assert!(w.iter().all(|&(_, x)| x >= 0.0));
                prop_assert!((w.iter().map(|x| x.1).sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn larger_alpha_favors_the_nearer_joint(s in random_skeleton(), mesh in random_points(), alpha in 0.5f64..3.0, extra in 0.1f64..2.0) {
            let bound = bind_vertices(&mesh, &s).unwrap();
            let lo = compute_weights(&s, &bound, alpha).unwrap();
            let hi = compute_weights(&s, &bound, alpha + extra).unwrap();
            let paths = s.path_distance_matrix();
            for v in 0..mesh.vertex_count() {
                let d = vertex_joint_distances(&s, &paths, &bound, v);
                for &(i, _) in &lo.weights[v] {
                    for &(j, _) in &lo.weights[v] {
                        if d[i] < d[j] && hi.weight(v, j) > 0.0 && hi.weight(v, i) > 0.0 {
                            let before = lo.weight(v, j) / lo.weight(v, i);
                            let after = hi.weight(v, j) / hi.weight(v, i);
                            prop_assert!(after <= before * (1.0 + 1e-12), "{before} -> {after}");
                        }
                    }
                }
            }
        }

        #[test]
        fn only_the_nearest_joints_influence(s in random_skeleton(), mesh in random_points()) {
            let bound = bind_vertices(&mesh, &s).unwrap();
            let b = compute_weights(&s, &bound, DEFAULT_ALPHA).unwrap();
            let paths = s.path_distance_matrix();
            for v in 0..mesh.vertex_count() {
                let d = vertex_joint_distances(&s, &paths, &bound, v);
                let cutoff = b.weights[v].iter().map(|&(j, _)| d[j]).fold(0.0, f64::max);
                for j in 0..s.joint_count() {
                    if d[j] < cutoff {
                        prop_assert!(b.weight(v, j) > 0.0);
                    }
                }
            }
        }
    }
}
