//! Indexed triangle meshes, OBJ I/O, topology validation and the per-vertex
//! curviness measure used by the distortion metric.

mod curviness;
mod obj;
mod topology;

pub use curviness::{non_manifold_vertex_count, vertex_areas, vertex_curviness, Curviness};
pub use obj::{load_mesh, parse_obj, save_mesh, write_obj};
pub use topology::{validate_topology, TopologyReport};
pub(crate) use topology::DisjointSet;

use crate::linalg::Vec3;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("mesh has no vertices")]
    Empty,
    #[error("face {face} references vertex {index} but the mesh has {count} vertices")]
    IndexOutOfRange { face: usize, index: usize, count: usize },
    #[error("face {face} repeats vertex {index}")]
    DegenerateFace { face: usize, index: usize },
    #[error("vertex {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("normal count {normals} does not match vertex count {vertices}")]
    NormalCount { normals: usize, vertices: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Indexed triangle mesh.
///
/// Construct through [`Mesh::new`] to have the index and finiteness
/// invariants checked; the fields stay public for read access.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
    pub normals: Option<Vec<Vec3>>,
}

impl Mesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let mesh = Mesh {
            vertices,
            faces,
            normals: None,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn with_normals(mut self, normals: Vec<Vec3>) -> Result<Self, MeshError> {
        if normals.len() != self.vertices.len() {
            return Err(MeshError::NormalCount {
                normals: normals.len(),
                vertices: self.vertices.len(),
            });
        }
        self.normals = Some(normals.into_iter().map(|n| n.normalize()).collect());
        Ok(self)
    }

    /// Checks the structural invariants.
    pub fn validate(&self) -> Result<(), MeshError> {
        for (i, v) in self.vertices.iter().enumerate() {
            if !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite()) {
                return Err(MeshError::NonFinite(i));
            }
        }
        let count = self.vertices.len();
        for (f, face) in self.faces.iter().enumerate() {
            for &index in face {
                if index >= count {
                    return Err(MeshError::IndexOutOfRange { face: f, index, count });
                }
            }
            if face[0] == face[1] || face[0] == face[2] {
                return Err(MeshError::DegenerateFace { face: f, index: face[0] });
            }
            if face[1] == face[2] {
                return Err(MeshError::DegenerateFace { face: f, index: face[1] });
            }
        }
        Ok(())
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn triangle(&self, face: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Unnormalized face normal (twice the area).
    pub fn face_cross(&self, face: usize) -> Vec3 {
        let [a, b, c] = self.triangle(face);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, face: usize) -> f64 {
        0.5 * self.face_cross(face).norm()
    }

    /// Vertex centroid (uniform weights).
    pub fn centroid(&self) -> Vec3 {
        crate::linalg::mean(&self.vertices).unwrap_or_else(Vec3::zeros)
    }

    /// Axis-aligned bounding box as `(min, max)`.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        let mut min = Vec3::repeat(f64::INFINITY);
        let mut max = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            min = min.inf(v);
            max = max.sup(v);
        }
        (min, max)
    }

    /// Length of the bounding-box diagonal.
    pub fn diameter(&self) -> f64 {
        if self.vertices.is_empty() {
            return 0.0;
        }
        let (min, max) = self.bounds();
        (max - min).norm()
    }

    /// Same topology, new positions.
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Mesh {
        debug_assert_eq!(vertices.len(), self.vertices.len());
        Mesh {
            vertices,
            faces: self.faces.clone(),
            normals: None,
        }
    }

    /// Applies `f` to every vertex, keeping the face list.
    pub fn map_vertices(&self, f: impl Fn(&Vec3) -> Vec3) -> Mesh {
        self.with_vertices(self.vertices.iter().map(f).collect())
    }

    /// Disjoint union: `other`'s faces are re-indexed after `self`'s vertices.
    pub fn merged(&self, other: &Mesh) -> Mesh {
        let offset = self.vertices.len();
        let mut vertices = self.vertices.clone();
        vertices.extend_from_slice(&other.vertices);
        let mut faces = self.faces.clone();
        faces.extend(other.faces.iter().map(|f| [f[0] + offset, f[1] + offset, f[2] + offset]));
        Mesh {
            vertices,
            faces,
            normals: None,
        }
    }
}
