//! Exit statuses and the one-line diagnostics printed with them.

use rigforge::distortion::DistortionError;
use rigforge::formats::FormatError;
use rigforge::mesh::MeshError;
use rigforge::mls::MlsError;
use rigforge::rig::RigError;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    /// Unreadable or malformed mesh, rig or pose file.
    Parse,
    OpenMesh,
    DegenerateFrame,
    ChecksumMismatch,
    InvalidJoint,
    /// Slicing, skeleton extraction or skin binding failed.
    RigFailure,
    WriteFailure,
    DeformFailure,
    ServeFailure,
    Usage,
}

impl Status {
    pub const ALL: [Status; 10] = [
        Status::Parse,
        Status::OpenMesh,
        Status::DegenerateFrame,
        Status::ChecksumMismatch,
        Status::InvalidJoint,
        Status::RigFailure,
        Status::WriteFailure,
        Status::DeformFailure,
        Status::ServeFailure,
        Status::Usage,
    ];

    pub fn code(self) -> u8 {
        match self {
            Status::Parse => 1,
            Status::OpenMesh => 2,
            Status::DegenerateFrame => 3,
            Status::ChecksumMismatch => 4,
            Status::InvalidJoint => 5,
            Status::RigFailure => 6,
            Status::WriteFailure => 7,
            Status::DeformFailure => 8,
            Status::ServeFailure => 9,
            Status::Usage => 64,
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            Status::Parse => "parse",
            Status::OpenMesh => "open-mesh",
            Status::DegenerateFrame => "degenerate-frame",
            Status::ChecksumMismatch => "checksum-mismatch",
            Status::InvalidJoint => "invalid-joint",
            Status::RigFailure => "rig-failure",
            Status::WriteFailure => "write-failure",
            Status::DeformFailure => "deform-failure",
            Status::ServeFailure => "serve-failure",
            Status::Usage => "usage",
        }
    }
}

/// A failed command. Displays as `slug: message` on one line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub status: Status,
    pub message: String,
}

impl Failure {
    pub fn new(status: Status, message: impl Into<String>) -> Self {
        Failure {
            status,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let message = self.message.split_whitespace().collect::<Vec<_>>().join(" ");
        write!(f, "{}: {}", self.status.slug(), message)
    }
}

impl std::error::Error for Failure {}

impl From<RigError> for Failure {
    fn from(e: RigError) -> Self {
        let status = match e {
            RigError::OpenMesh { .. } => Status::OpenMesh,
            RigError::Frame(_) => Status::DegenerateFrame,
            RigError::Slice(_) | RigError::Skeleton(_) | RigError::Skin(_) => Status::RigFailure,
        };
        Failure::new(status, e.to_string())
    }
}

impl From<MlsError> for Failure {
    fn from(e: MlsError) -> Self {
        let status = match e {
            MlsError::InvalidJoint { .. } => Status::InvalidJoint,
            _ => Status::Parse,
        };
        Failure::new(status, e.to_string())
    }
}

impl From<FormatError> for Failure {
    fn from(e: FormatError) -> Self {
        match e {
            FormatError::ChecksumMismatch { .. } => Failure::new(Status::ChecksumMismatch, e.to_string()),
            FormatError::Handles(inner) => inner.into(),
            _ => Failure::new(Status::Parse, e.to_string()),
        }
    }
}

impl From<DistortionError> for Failure {
    fn from(e: DistortionError) -> Self {
        match e {
            DistortionError::Mls(inner) => inner.into(),
            DistortionError::Config(_) => Failure::new(Status::Usage, e.to_string()),
            _ => Failure::new(Status::DeformFailure, e.to_string()),
        }
    }
}

/// Mesh read errors, labelled with the file they came from.
pub fn mesh_failure(path: &std::path::Path, e: MeshError) -> Failure {
    Failure::new(Status::Parse, format!("{}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_and_slugs_are_distinct() {
        for (i, a) in Status::ALL.iter().enumerate() {
            for b in &Status::ALL[i + 1..] {
                assert_ne!(a.code(), b.code());
                assert_ne!(a.slug(), b.slug());
            }
        }
    }

    #[test]
    fn diagnostics_fit_on_one_line() {
        let f = Failure::new(Status::Parse, "line 3:\n  bad\tvertex");
        assert_eq!(f.to_string(), "parse: line 3: bad vertex");
    }
}
