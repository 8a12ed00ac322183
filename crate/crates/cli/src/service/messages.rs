//! JSON messages exchanged with clients.

use rigforge::formats::{HandleEntry, ReportFile};
use rigforge::Vec3;
use serde::{Deserialize, Serialize};

/// Client to server, over the stream or the handles endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Inbound {
    Handles {
        /// The client's own counter, echoed back in the resulting frame.
        #[serde(default)]
        revision: Option<u64>,
        handles: Vec<HandleEntry>,
    },
}

/// Server to client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Outbound {
    /// Sent once when a stream opens.
    Topology {
        revision: u64,
        faces: Vec<[usize; 3]>,
        /// Rest positions, flattened `x y z` triples.
        vertices: Vec<f64>,
        joints: Vec<[f64; 3]>,
        bones: Vec<[usize; 2]>,
    },
    Frame(Frame),
    Error {
        status: u16,
        message: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        client_revision: Option<u64>,
    },
}

/// A deformed vertex buffer and the report measured on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    /// Session revision of the handle set this frame was computed from.
    pub revision: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client_revision: Option<u64>,
    /// Flattened `x y z` triples in vertex order.
    pub vertices: Vec<f64>,
    pub report: ReportFile,
}

/// Reply to a successful upload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub id: String,
    pub revision: u64,
    pub vertex_count: usize,
    pub face_count: usize,
    pub joint_count: usize,
    pub bone_count: usize,
    pub chain_count: usize,
    pub joints: Vec<[f64; 3]>,
    pub bones: Vec<[usize; 2]>,
    /// Joints that accept handles.
    pub handle_candidates: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

pub fn flatten(points: &[Vec3]) -> Vec<f64> {
    points.iter().flat_map(|p| [p.x, p.y, p.z]).collect()
}

pub fn triples(points: &[Vec3]) -> Vec<[f64; 3]> {
    points.iter().map(|p| [p.x, p.y, p.z]).collect()
}
