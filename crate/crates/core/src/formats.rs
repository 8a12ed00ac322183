//! JSON rig, pose and report files.

use crate::deform::Deformation;
use crate::distortion::DistortionReport;
use crate::linalg::Vec3;
use crate::mesh::{Mesh, TopologyReport};
use crate::mls::{ControlHandles, Handle, MlsError};
use crate::rig::{Rig, RigConfig};
use crate::skeleton::Skeleton;
use serde::{Deserialize, Serialize};
use std::hash::Hasher;
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("malformed file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported format version {found} (expected {FORMAT_VERSION})")]
    Version { found: u32 },
    #[error("rig was built for mesh {expected} but this mesh is {found}")]
    ChecksumMismatch { expected: String, found: String },
    #[error("rig file is inconsistent: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Handles(#[from] MlsError),
}

/// 64-bit FNV-1a over the vertex and face counts, the coordinates as
/// little-endian `f64` and the face indices as little-endian `u64`.
pub fn mesh_checksum(mesh: &Mesh) -> u64 {
    let mut h = fnv::FnvHasher::default();
    h.write(&(mesh.vertex_count() as u64).to_le_bytes());
    h.write(&(mesh.face_count() as u64).to_le_bytes());
    for v in &mesh.vertices {
        for c in [v.x, v.y, v.z] {
            h.write(&c.to_le_bytes());
        }
    }
    for f in &mesh.faces {
        for &i in f {
            h.write(&(i as u64).to_le_bytes());
        }
    }
    h.finish()
}

pub fn checksum_hex(checksum: u64) -> String {
    format!("{checksum:016x}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigFile {
    pub format_version: u32,
    pub mesh_checksum: String,
    pub vertex_count: usize,
    pub face_count: usize,
    pub config: RigConfig,
    #[serde(flatten)]
    pub rig: Rig,
}

impl RigFile {
    pub fn new(mesh: &Mesh, rig: Rig, config: RigConfig) -> Self {
        RigFile {
            format_version: FORMAT_VERSION,
            mesh_checksum: checksum_hex(mesh_checksum(mesh)),
            vertex_count: mesh.vertex_count(),
            face_count: mesh.face_count(),
            config,
            rig,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("rig serializes");
        s.push('\n');
        s
    }

    /// Parses and checks the version and internal consistency.
    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != FORMAT_VERSION {
            return Err(FormatError::Version { found });
        }
        let file: RigFile = serde_json::from_value(value)?;
        file.check()?;
        Ok(file)
    }

    fn check(&self) -> Result<(), FormatError> {
        let s = &self.rig.skeleton;
        Skeleton::with_parts(s.joints.clone(), s.bones.clone(), s.root, s.joint_parts.clone())
            .map_err(|e| FormatError::Inconsistent(e.to_string()))?;
        let b = &self.rig.binding;
        let n = self.vertex_count;
        if b.bone_of_vertex.len() != n || b.weights.len() != n || b.bone_parameter.len() != n || b.bone_distance.len() != n {
            return Err(FormatError::Inconsistent(format!("binding does not cover {n} vertices")));
        }
        if b.bone_of_vertex.iter().any(|&i| i >= s.bones.len()) {
            return Err(FormatError::Inconsistent("binding references a missing bone".into()));
        }
        if b.weights.iter().flatten().any(|&(j, w)| j >= s.joints.len() || !(w >= 0.0)) {
            return Err(FormatError::Inconsistent("binding has an invalid weight".into()));
        }
        Ok(())
    }

    /// Fails unless `mesh` is the mesh this rig was built from.
    pub fn verify_mesh(&self, mesh: &Mesh) -> Result<(), FormatError> {
        let found = checksum_hex(mesh_checksum(mesh));
        if found != self.mesh_checksum {
            return Err(FormatError::ChecksumMismatch {
                expected: self.mesh_checksum.clone(),
                found,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandleEntry {
    pub joint: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<&Handle> for HandleEntry {
    fn from(h: &Handle) -> Self {
        HandleEntry {
            joint: h.joint,
            x: h.target.x,
            y: h.target.y,
            z: h.target.z,
        }
    }
}

impl HandleEntry {
    pub fn to_handle(self) -> Handle {
        Handle {
            joint: self.joint,
            target: Vec3::new(self.x, self.y, self.z),
        }
    }
}

/// Joint targets. Also accepted as a bare array of handle entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseFile {
    pub format_version: u32,
    pub handles: Vec<HandleEntry>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PoseInput {
    File(PoseFile),
    Bare(Vec<HandleEntry>),
}

impl PoseFile {
    pub fn from_handles(handles: &ControlHandles) -> Self {
        PoseFile {
            format_version: FORMAT_VERSION,
            handles: handles.handles().iter().map(HandleEntry::from).collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        match serde_json::from_str::<PoseInput>(text) {
            Ok(PoseInput::File(file)) if file.format_version != FORMAT_VERSION => Err(FormatError::Version {
                found: file.format_version,
            }),
            Ok(PoseInput::File(file)) => Ok(file),
            Ok(PoseInput::Bare(handles)) => Ok(PoseFile {
                format_version: FORMAT_VERSION,
                handles,
            }),
            // Re-parse as the tagged form for a precise message.
            Err(_) => Err(serde_json::from_str::<PoseFile>(text).err().map_or_else(
                || FormatError::Inconsistent("unrecognized pose".into()),
                FormatError::Json,
            )),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("pose serializes");
        s.push('\n');
        s
    }

    /// Validated handles for a skeleton with `joint_count` joints.
    pub fn to_handles(&self, joint_count: usize) -> Result<ControlHandles, FormatError> {
        Ok(ControlHandles::new(
            self.handles.iter().map(|h| h.to_handle()).collect(),
            joint_count,
        )?)
    }
}

/// Serialized form of a [`DistortionReport`], angles in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub format_version: u32,
    pub global_distortion: f64,
    pub per_joint_angle_deg: Vec<f64>,
    pub flagged_joints: Vec<usize>,
    pub per_region_distortion: Vec<f64>,
    pub steps_used: usize,
    pub tolerance: f64,
    pub exceeds_tolerance: bool,
    pub topology: TopologyReport,
}

impl ReportFile {
    pub fn new(report: &DistortionReport, topology: TopologyReport) -> Self {
        ReportFile {
            format_version: FORMAT_VERSION,
            global_distortion: report.global_distortion,
            per_joint_angle_deg: report.per_joint_angle.iter().map(|a| a.to_degrees()).collect(),
            flagged_joints: report.flagged_joints.clone(),
            per_region_distortion: report.per_region_distortion.clone(),
            steps_used: report.steps_used,
            tolerance: report.tolerance,
            exceeds_tolerance: report.exceeds_tolerance,
            topology,
        }
    }

    pub fn from_deformation(deformation: &Deformation) -> Self {
        ReportFile::new(&deformation.report, crate::mesh::validate_topology(&deformation.mesh))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::rig::build_rig;

    #[test]
    fn checksum_matches_a_hand_computed_stream() {
        let mesh = Mesh::new(vec![Vec3::zeros(), Vec3::x(), Vec3::y()], vec![[0, 1, 2]]).unwrap();
        let mut bytes = Vec::new();
        bytes.extend(3u64.to_le_bytes());
        bytes.extend(1u64.to_le_bytes());
        for c in [0.0f64, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0] {
            bytes.extend(c.to_le_bytes());
        }
        for i in [0u64, 1, 2] {
            bytes.extend(i.to_le_bytes());
        }
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for b in bytes {
            hash ^= u64::from(b);
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
        assert_eq!(mesh_checksum(&mesh), hash);
        let moved = mesh.map_vertices(|v| v + Vec3::new(0.0, 0.0, 1e-12));
        assert_ne!(mesh_checksum(&moved), hash);
    }

    #[test]
    fn rig_round_trips() {
        let mesh = fixtures::cylinder(0.2, 2.0, 16, 8);
        let config = RigConfig::default();
        let file = RigFile::new(&mesh, build_rig(&mesh, &config).unwrap(), config);
        let text = file.to_json();
        let back = RigFile::from_json(&text).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.to_json(), text);
        back.verify_mesh(&mesh).unwrap();
        assert!(matches!(
            back.verify_mesh(&fixtures::cylinder(0.2, 2.0, 16, 9)),
            Err(FormatError::ChecksumMismatch { .. })
        ));
        assert!(RigFile::from_json(&text[..text.len() / 2]).is_err());
        let bumped = text.replacen("\"format_version\": 1", "\"format_version\": 9", 1);
        assert!(matches!(RigFile::from_json(&bumped), Err(FormatError::Version { found: 9 })));
    }

    #[test]
    fn pose_forms() {
        let tagged = r#"{"format_version":1,"handles":[{"joint":0,"x":1,"y":2,"z":3}]}"#;
        let bare = r#"[{"joint":0,"x":1,"y":2,"z":3}]"#;
        let a = PoseFile::from_json(tagged).unwrap();
        assert_eq!(a, PoseFile::from_json(bare).unwrap());
        assert_eq!(a.to_handles(2).unwrap().handles()[0].target, Vec3::new(1.0, 2.0, 3.0));
        assert!(matches!(
            a.to_handles(0),
            Err(FormatError::Handles(MlsError::InvalidJoint { joint: 0, count: 0 }))
        ));
        assert!(PoseFile::from_json("{").is_err());
        assert!(PoseFile::from_json(&PoseFile::from_json(bare).unwrap().to_json()).is_ok());
    }
}
