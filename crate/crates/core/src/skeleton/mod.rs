//! Joint/bone trees built from the slice center chains.

mod build;
mod chain;

pub use build::{build_skeleton, SkeletonOptions, DISCONNECT_MULTIPLIER};
pub use chain::{decimate_chain, smooth_centers, DEFAULT_ANGLE_TOLERANCE_DEG};

use crate::linalg::Vec3;
use crate::slicer::PartLabel;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SkeletonError {
    #[error("no center chains to build from")]
    NoChains,
    #[error("skeleton needs at least 2 joints, got {0}")]
    TooFewJoints(usize),
    #[error("bones do not form a tree over {joints} joints: {reason}")]
    NotATree { joints: usize, reason: String },
    #[error("limb chain {chain} is {gap:.4} away from the trunk (limit {limit:.4})")]
    DisconnectedChain { chain: usize, gap: f64, limit: f64 },
    #[error("joint index {index} out of range ({count} joints)")]
    InvalidJoint { index: usize, count: usize },
}

/// A tree of joints connected by bones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skeleton {
    pub joints: Vec<Vec3>,
    pub bones: Vec<[usize; 2]>,
    pub root: usize,
    pub bone_lengths: Vec<f64>,
    /// Body part each joint was extracted from.
    #[serde(default)]
    pub joint_parts: Vec<PartLabel>,
}

impl Skeleton {
    /// Validates the tree and computes bone lengths. Every joint is labeled
    /// as torso.
    pub fn new(joints: Vec<Vec3>, bones: Vec<[usize; 2]>, root: usize) -> Result<Self, SkeletonError> {
        let parts = vec![PartLabel::Torso; joints.len()];
        Skeleton::with_parts(joints, bones, root, parts)
    }

    pub fn with_parts(
        joints: Vec<Vec3>,
        bones: Vec<[usize; 2]>,
        root: usize,
        joint_parts: Vec<PartLabel>,
    ) -> Result<Self, SkeletonError> {
        let n = joints.len();
        let not_tree = |reason: String| SkeletonError::NotATree { joints: n, reason };
        if n == 0 {
            return Err(SkeletonError::TooFewJoints(0));
        }
        if root >= n {
            return Err(SkeletonError::InvalidJoint { index: root, count: n });
        }
        if bones.len() + 1 != n {
            return Err(not_tree(format!("{} bones", bones.len())));
        }
        let mut sets = crate::mesh::DisjointSet::new(n);
        for &[a, b] in &bones {
            if a >= n || b >= n {
                return Err(SkeletonError::InvalidJoint { index: a.max(b), count: n });
            }
            if a == b || sets.find(a) == sets.find(b) {
                return Err(not_tree(format!("bone ({a}, {b}) closes a cycle")));
            }
            sets.union(a, b);
        }
        let bone_lengths = bones.iter().map(|&[a, b]| (joints[a] - joints[b]).norm()).collect();
        let mut joint_parts = joint_parts;
        joint_parts.resize(n, PartLabel::Torso);
        Ok(Skeleton {
            joints,
            bones,
            root,
            bone_lengths,
            joint_parts,
        })
    }

    pub fn joint_count(&self) -> usize {
        self.joints.len()
    }

    /// Same topology with moved joints; bone lengths are recomputed.
    pub fn with_joints(&self, joints: Vec<Vec3>) -> Skeleton {
        assert_eq!(joints.len(), self.joints.len());
        let bone_lengths = self.bones.iter().map(|&[a, b]| (joints[a] - joints[b]).norm()).collect();
        Skeleton {
            joints,
            bone_lengths,
            ..self.clone()
        }
    }

    /// `(neighbor, bone index)` lists per joint.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.joints.len()];
        for (i, &[a, b]) in self.bones.iter().enumerate() {
            adj[a].push((b, i));
            adj[b].push((a, i));
        }
        adj
    }

    pub fn degree(&self, joint: usize) -> usize {
        self.bones.iter().filter(|b| b.contains(&joint)).count()
    }

    fn check(&self, joint: usize) -> Result<(), SkeletonError> {
        if joint >= self.joints.len() {
            Err(SkeletonError::InvalidJoint {
                index: joint,
                count: self.joints.len(),
            })
        } else {
            Ok(())
        }
    }

    /// Tree-path distances from `from` to every joint.
    pub fn distances_from(&self, from: usize) -> Result<Vec<f64>, SkeletonError> {
        self.check(from)?;
        let adj = self.adjacency();
        let mut dist = vec![f64::INFINITY; self.joints.len()];
        dist[from] = 0.0;
        let mut stack = vec![from];
        while let Some(j) = stack.pop() {
            for &(k, bone) in &adj[j] {
                if dist[k].is_infinite() {
                    dist[k] = dist[j] + self.bone_lengths[bone];
                    stack.push(k);
                }
            }
        }
        Ok(dist)
    }

    /// All-pairs tree-path distance matrix.
    pub fn path_distance_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.joints.len())
            .map(|j| self.distances_from(j).expect("index in range"))
            .collect()
    }

    /// Joints on the unique path from `a` to `b`, both included.
    pub fn path(&self, a: usize, b: usize) -> Result<Vec<usize>, SkeletonError> {
        self.check(a)?;
        self.check(b)?;
        let adj = self.adjacency();
        let mut parent = vec![usize::MAX; self.joints.len()];
        parent[a] = a;
        let mut stack = vec![a];
        while let Some(j) = stack.pop() {
            if j == b {
                break;
            }
            for &(k, _) in &adj[j] {
                if parent[k] == usize::MAX {
                    parent[k] = j;
                    stack.push(k);
                }
            }
        }
        let mut path = vec![b];
        let mut j = b;
        while j != a {
            j = parent[j];
            path.push(j);
        }
        path.reverse();
        Ok(path)
    }

    /// Part label of a bone: that of its endpoint farther from the root.
    pub fn bone_part(&self, bone: usize) -> PartLabel {
        let [a, b] = self.bones[bone];
        let depth = self.distances_from(self.root).expect("root in range");
        let child = if depth[a] > depth[b] { a } else { b };
        self.joint_parts[child]
    }
}

/// Length of the tree path between two joints.
pub fn skeleton_path_distance(skeleton: &Skeleton, a: usize, b: usize) -> Result<f64, SkeletonError> {
    skeleton.check(b)?;
    Ok(skeleton.distances_from(a)?[b])
}
