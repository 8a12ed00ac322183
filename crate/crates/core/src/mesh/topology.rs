use super::Mesh;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Edge-incidence summary of a mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologyReport {
    pub is_closed: bool,
    pub boundary_edge_count: usize,
    pub non_manifold_edge_count: usize,
    pub connected_component_count: usize,
}

/// Undirected edge key with the smaller index first.
pub(crate) fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Faces incident to every undirected edge.
pub(crate) fn edge_faces(mesh: &Mesh) -> HashMap<(usize, usize), Vec<usize>> {
    let mut edges: HashMap<(usize, usize), Vec<usize>> = HashMap::with_capacity(mesh.faces.len() * 2);
    for (f, face) in mesh.faces.iter().enumerate() {
        for k in 0..3 {
            edges.entry(edge_key(face[k], face[(k + 1) % 3])).or_default().push(f);
        }
    }
    edges
}

pub(crate) struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    pub(crate) fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Lower root wins so results do not depend on call order.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Counts boundary (one incident face) and non-manifold (more than two)
/// edges, and connected components over all vertices. Unreferenced vertices
/// count as components of their own.
pub fn validate_topology(mesh: &Mesh) -> TopologyReport {
    let edges = edge_faces(mesh);
    let mut boundary = 0;
    let mut non_manifold = 0;
    for faces in edges.values() {
        match faces.len() {
            1 => boundary += 1,
            2 => {}
            _ => non_manifold += 1,
        }
    }
    let mut sets = DisjointSet::new(mesh.vertices.len());
    for face in &mesh.faces {
        sets.union(face[0], face[1]);
        sets.union(face[1], face[2]);
    }
    let components = (0..mesh.vertices.len()).filter(|&v| sets.find(v) == v).count();
    TopologyReport {
        is_closed: boundary == 0 && non_manifold == 0,
        boundary_edge_count: boundary,
        non_manifold_edge_count: non_manifold,
        connected_component_count: components,
    }
}
