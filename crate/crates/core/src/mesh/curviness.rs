use super::topology::{edge_faces, edge_key, DisjointSet};
use super::Mesh;
use crate::linalg::Vec3;
use std::collections::HashMap;

/// Per-vertex curviness and the vertices that were skipped as non-manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct Curviness {
    pub values: Vec<f64>,
    pub non_manifold: Vec<usize>,
}

impl Curviness {
    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.values.iter().sum::<f64>() / self.values.len() as f64
        }
    }
}

/// Share of a triangle corner's Voronoi region that borders each of the two
/// edges leaving the corner. On obtuse triangles the corner keeps the
/// mixed-area total, split in the Voronoi proportions with negative
/// cotangents clamped, which agrees with the acute split at right angles.
fn corner_edge_shares(p: &Vec3, a: &Vec3, b: &Vec3) -> (f64, f64) {
    let pa = a - p;
    let pb = b - p;
    let ab = b - a;
    let area = 0.5 * pa.cross(&pb).norm();
    if area <= 0.0 {
        return (0.0, 0.0);
    }
    let dot_p = pa.dot(&pb);
    let dot_a = (-pa).dot(&ab);
    let dot_b = (-pb).dot(&(-ab));
    // cot of the angle at `b` (opposite edge p-a) and at `a` (opposite p-b).
    let w_a = pa.norm_squared() * (dot_b / (2.0 * area)).max(0.0);
    let w_b = pb.norm_squared() * (dot_a / (2.0 * area)).max(0.0);
    let total = if dot_p < 0.0 {
        area / 2.0
    } else if dot_a < 0.0 || dot_b < 0.0 {
        area / 4.0
    } else {
        return (w_a / 8.0, w_b / 8.0);
    };
    if w_a + w_b <= 0.0 {
        return (total / 2.0, total / 2.0);
    }
    (total * w_a / (w_a + w_b), total * w_b / (w_a + w_b))
}

/// Angle between the normals of two faces, i.e. |pi - dihedral angle|.
fn bend_angle(n1: &Vec3, n2: &Vec3) -> f64 {
    n1.cross(n2).norm().atan2(n1.dot(n2))
}

/// Vertices whose incident faces do not form a single edge-connected fan,
/// or that touch an edge with more than two faces.
fn non_manifold_vertices(mesh: &Mesh, edges: &HashMap<(usize, usize), Vec<usize>>) -> Vec<bool> {
    let mut flagged = vec![false; mesh.vertices.len()];
    let corner = |f: usize, v: usize| -> usize {
        let face = mesh.faces[f];
        3 * f + face.iter().position(|&x| x == v).expect("vertex on face")
    };
    let mut corners = DisjointSet::new(mesh.faces.len() * 3);
    for (&(a, b), faces) in edges {
        if faces.len() > 2 {
            flagged[a] = true;
            flagged[b] = true;
        } else if faces.len() == 2 {
            corners.union(corner(faces[0], a), corner(faces[1], a));
            corners.union(corner(faces[0], b), corner(faces[1], b));
        }
    }
    let mut fan_root: Vec<Option<usize>> = vec![None; mesh.vertices.len()];
    for (f, face) in mesh.faces.iter().enumerate() {
        for (k, &v) in face.iter().enumerate() {
            let root = corners.find(3 * f + k);
            match fan_root[v] {
                None => fan_root[v] = Some(root),
                Some(r) if r != root => flagged[v] = true,
                _ => {}
            }
        }
    }
    flagged
}

/// Area-weighted mean of |pi - dihedral| over the interior edges at each
/// vertex. Each edge is weighted by the part of the vertex's Voronoi region
/// adjacent to it, so flat diagonals carry no weight and the value does not
/// depend on how planar regions are triangulated.
///
/// Non-manifold vertices get 0 and are listed in `non_manifold`.
pub fn vertex_curviness(mesh: &Mesh) -> Curviness {
    let edges = edge_faces(mesh);
    let flagged = non_manifold_vertices(mesh, &edges);
    let normals: Vec<Vec3> = (0..mesh.faces.len())
        .map(|f| {
            let n = mesh.face_cross(f);
            let len = n.norm();
            if len > 0.0 {
                n / len
            } else {
                Vec3::zeros()
            }
        })
        .collect();
    let angles: HashMap<(usize, usize), f64> = edges
        .iter()
        .filter(|(_, faces)| faces.len() == 2)
        .map(|(&key, faces)| (key, bend_angle(&normals[faces[0]], &normals[faces[1]])))
        .collect();

    let n = mesh.vertices.len();
    let mut weighted = vec![0.0; n];
    let mut weight = vec![0.0; n];
    for face in &mesh.faces {
        for k in 0..3 {
            let v = face[k];
            let a = face[(k + 1) % 3];
            let b = face[(k + 2) % 3];
            let (share_a, share_b) = corner_edge_shares(&mesh.vertices[v], &mesh.vertices[a], &mesh.vertices[b]);
            for (other, share) in [(a, share_a), (b, share_b)] {
                if let Some(theta) = angles.get(&edge_key(v, other)) {
                    weighted[v] += share * theta;
                    weight[v] += share;
                }
            }
        }
    }

    let mut non_manifold = Vec::new();
    let values = (0..n)
        .map(|v| {
            if flagged[v] {
                non_manifold.push(v);
                0.0
            } else if weight[v] > 0.0 {
                weighted[v] / weight[v]
            } else {
                0.0
            }
        })
        .collect();
    if !non_manifold.is_empty() {
        log::warn!("{} non-manifold vertices assigned zero curviness", non_manifold.len());
    }
    Curviness { values, non_manifold }
}

/// Number of vertices whose neighborhood is not a single manifold fan.
pub fn non_manifold_vertex_count(mesh: &Mesh) -> usize {
    let edges = edge_faces(mesh);
    non_manifold_vertices(mesh, &edges).iter().filter(|&&f| f).count()
}

/// Mixed Voronoi area of every vertex.
pub fn vertex_areas(mesh: &Mesh) -> Vec<f64> {
    let mut areas = vec![0.0; mesh.vertices.len()];
    for face in &mesh.faces {
        for k in 0..3 {
            let v = face[k];
            let (sa, sb) = corner_edge_shares(
                &mesh.vertices[v],
                &mesh.vertices[face[(k + 1) % 3]],
                &mesh.vertices[face[(k + 2) % 3]],
            );
            areas[v] += sa + sb;
        }
    }
    areas
}
