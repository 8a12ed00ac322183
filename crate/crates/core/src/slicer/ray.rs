//! Ray/mesh intersection with a bounding-volume hierarchy over the faces.

use crate::linalg::{any_perpendicular, Vec3};
use crate::mesh::Mesh;
use nalgebra::{Unit, UnitQuaternion};

/// Hits closer than this to the origin are ignored.
pub const MIN_HIT_DISTANCE: f64 = 1e-9;
/// Hits within this distance of each other collapse into one (shared edges
/// and vertices).
pub const DEDUP_DISTANCE: f64 = 1e-9;
/// A hit with `|direction . normal|` below this is tangential.
pub const GRAZING_COSINE: f64 = 1e-6;
/// Rotation applied to a ray that grazed a triangle before it is re-cast.
pub const JITTER_ANGLE: f64 = 1e-4;

const BARYCENTRIC_SLACK: f64 = 1e-12;
const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub distance: f64,
    pub point: Vec3,
}

/// Result of one cast, after the optional jitter retry.
#[derive(Debug, Clone, PartialEq)]
pub struct RayCast {
    pub hits: Vec<Hit>,
    /// The direction actually used.
    pub direction: Vec3,
    /// The first attempt grazed a triangle and the ray was jittered.
    pub jittered: bool,
    /// The jittered ray still grazed; its hit count may not be reliable.
    pub grazed: bool,
}

#[derive(Debug, Clone, Copy)]
struct Aabb {
    min: Vec3,
    max: Vec3,
}

impl Aabb {
    fn empty() -> Self {
        Aabb {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    fn hit_by(&self, origin: &Vec3, inv_dir: &Vec3, pad: f64) -> bool {
        let mut t0 = 0.0f64;
        let mut t1 = f64::INFINITY;
        for k in 0..3 {
            let lo = self.min[k] - pad;
            let hi = self.max[k] + pad;
            if inv_dir[k].is_infinite() {
                if origin[k] < lo || origin[k] > hi {
                    return false;
                }
                continue;
            }
            let a = (lo - origin[k]) * inv_dir[k];
            let b = (hi - origin[k]) * inv_dir[k];
            let (near, far) = if a < b { (a, b) } else { (b, a) };
            t0 = t0.max(near);
            t1 = t1.min(far);
            if t0 > t1 {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { bounds: Aabb, start: usize, end: usize },
    Branch { bounds: Aabb, left: usize, right: usize },
}

/// Acceleration structure for repeated ray casts against one mesh.
#[derive(Debug, Clone)]
pub struct RayCaster {
    triangles: Vec<[Vec3; 3]>,
    centroids: Vec<Vec3>,
    normals: Vec<Vec3>,
    order: Vec<usize>,
    nodes: Vec<Node>,
    pad: f64,
}

enum Intersection {
    Miss,
    Hit(f64),
    Grazing,
}

impl RayCaster {
    pub fn new(mesh: &Mesh) -> Self {
        let triangles: Vec<[Vec3; 3]> = (0..mesh.face_count()).map(|f| mesh.triangle(f)).collect();
        let normals = (0..mesh.face_count())
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
        let mut caster = RayCaster {
            order: (0..triangles.len()).collect(),
            centroids: triangles.iter().map(|[a, b, c]| (a + b + c) / 3.0).collect(),
            triangles,
            normals,
            nodes: Vec::new(),
            pad: 1e-9 * mesh.diameter().max(1.0),
        };
        if !caster.triangles.is_empty() {
            let n = caster.triangles.len();
            caster.build(0, n);
        }
        caster
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let mut bounds = Aabb::empty();
        let mut centers = Aabb::empty();
        for &t in &self.order[start..end] {
            for p in &self.triangles[t] {
                bounds.grow(p);
            }
            centers.grow(&self.centroids[t]);
        }
        let index = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { bounds, start, end });
            return index;
        }
        let extent = centers.max - centers.min;
        let axis = if extent.x >= extent.y && extent.x >= extent.z {
            0
        } else if extent.y >= extent.z {
            1
        } else {
            2
        };
        let mid = (start + end) / 2;
        let centroids = &self.centroids;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b))
        });
        self.nodes.push(Node::Leaf { bounds, start, end });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[index] = Node::Branch { bounds, left, right };
        index
    }

    fn intersect_triangle(&self, tri: usize, origin: &Vec3, dir: &Vec3) -> Intersection {
        let [a, b, c] = self.triangles[tri];
        let e1 = b - a;
        let e2 = c - a;
        let pvec = dir.cross(&e2);
        let det = e1.dot(&pvec);
        let grazing = self.normals[tri].dot(dir).abs() < GRAZING_COSINE;
        if det == 0.0 {
            if grazing && touches_in_plane(origin, dir, &[a, b, c], self.pad) {
                return Intersection::Grazing;
            }
            return Intersection::Miss;
        }
        let inv = 1.0 / det;
        let tvec = origin - a;
        let u = tvec.dot(&pvec) * inv;
        if !(-BARYCENTRIC_SLACK..=1.0 + BARYCENTRIC_SLACK).contains(&u) {
            return Intersection::Miss;
        }
        let qvec = tvec.cross(&e1);
        let v = dir.dot(&qvec) * inv;
        if v < -BARYCENTRIC_SLACK || u + v > 1.0 + BARYCENTRIC_SLACK {
            return Intersection::Miss;
        }
        let t = e2.dot(&qvec) * inv;
        if t <= MIN_HIT_DISTANCE {
            return Intersection::Miss;
        }
        if grazing {
            Intersection::Grazing
        } else {
            Intersection::Hit(t)
        }
    }

    /// Raw hits and a grazing flag for one direction, no retry.
    fn cast_once(&self, origin: &Vec3, dir: &Vec3) -> (Vec<Hit>, bool) {
        let mut distances = Vec::new();
        let mut grazed = false;
        if self.nodes.is_empty() {
            return (Vec::new(), false);
        }
        let inv_dir = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            match &self.nodes[node] {
                Node::Branch { bounds, left, right } => {
                    if bounds.hit_by(origin, &inv_dir, self.pad) {
                        stack.push(*right);
                        stack.push(*left);
                    }
                }
                Node::Leaf { bounds, start, end } => {
                    if !bounds.hit_by(origin, &inv_dir, self.pad) {
                        continue;
                    }
                    for &tri in &self.order[*start..*end] {
                        match self.intersect_triangle(tri, origin, dir) {
                            Intersection::Hit(t) => distances.push(t),
                            Intersection::Grazing => grazed = true,
                            Intersection::Miss => {}
                        }
                    }
                }
            }
        }
        distances.sort_by(f64::total_cmp);
        let mut hits: Vec<Hit> = Vec::with_capacity(distances.len());
        for t in distances {
            if let Some(last) = hits.last() {
                if t - last.distance <= DEDUP_DISTANCE {
                    continue;
                }
            }
            hits.push(Hit {
                distance: t,
                point: origin + dir * t,
            });
        }
        (hits, grazed)
    }

    /// Casts a ray, retrying once with the direction rotated by
    /// [`JITTER_ANGLE`] about `jitter_axis` if any hit was tangential.
    /// Tangential hits are never reported.
    pub fn cast(&self, origin: &Vec3, direction: &Vec3, jitter_axis: &Vec3) -> RayCast {
        let dir = direction.normalize();
        let (hits, grazed) = self.cast_once(origin, &dir);
        if !grazed {
            return RayCast {
                hits,
                direction: dir,
                jittered: false,
                grazed: false,
            };
        }
        let axis = {
            let a = jitter_axis - dir * jitter_axis.dot(&dir);
            if a.norm() > 1e-12 {
                a
            } else {
                any_perpendicular(&dir)
            }
        };
        let turned = UnitQuaternion::from_axis_angle(&Unit::new_normalize(axis), JITTER_ANGLE) * dir;
        let (hits, grazed) = self.cast_once(origin, &turned);
        RayCast {
            hits,
            direction: turned,
            jittered: true,
            grazed,
        }
    }

    /// Number of rays with odd and even hit counts from `origin`; rays that
    /// still grazed after jitter are counted separately.
    pub fn parity(&self, origin: &Vec3, directions: &[Vec3], jitter_axis: &Vec3) -> ParityVote {
        let mut vote = ParityVote::default();
        for d in directions {
            let cast = self.cast(origin, d, jitter_axis);
            if cast.grazed {
                vote.grazed += 1;
            } else if cast.hits.len() % 2 == 1 {
                vote.odd += 1;
            } else {
                vote.even += 1;
            }
        }
        vote
    }

    /// Majority parity vote over a fixed set of 3D directions.
    pub fn contains(&self, point: &Vec3) -> bool {
        let dirs = sphere_directions(26);
        self.parity(point, &dirs, &Vec3::z()).is_inside()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParityVote {
    pub odd: usize,
    pub even: usize,
    pub grazed: usize,
}

impl ParityVote {
    /// Fraction of non-grazing rays with an odd hit count.
    pub fn odd_fraction(&self) -> f64 {
        let total = self.odd + self.even;
        if total == 0 {
            0.0
        } else {
            self.odd as f64 / total as f64
        }
    }

    pub fn is_inside(&self) -> bool {
        self.odd > self.even
    }
}

/// Whether a ray lying in a triangle's plane crosses one of its edges.
fn touches_in_plane(origin: &Vec3, dir: &Vec3, tri: &[Vec3; 3], tol: f64) -> bool {
    (0..3).any(|k| {
        let p = tri[k];
        let q = tri[(k + 1) % 3];
        let e = q - p;
        let w = origin - p;
        let a = dir.dot(dir);
        let b = dir.dot(&e);
        let c = e.dot(&e);
        let d = dir.dot(&w);
        let f = e.dot(&w);
        let denom = a * c - b * b;
        if denom.abs() < 1e-300 {
            return false;
        }
        let t = (b * f - c * d) / denom;
        let s = (a * f - b * d) / denom;
        if t < 0.0 || !(0.0..=1.0).contains(&s) {
            return false;
        }
        ((origin + dir * t) - (p + e * s)).norm() <= tol
    })
}

/// Deterministic, roughly uniform unit directions (Fibonacci sphere).
pub fn sphere_directions(count: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// All hits along a ray, sorted by distance, deduplicated on shared edges.
/// Convenience wrapper that builds a [`RayCaster`] for a single query.
pub fn intersect_ray(mesh: &Mesh, origin: &Vec3, direction: &Vec3) -> Vec<Hit> {
    RayCaster::new(mesh)
        .cast(origin, direction, &any_perpendicular(direction))
        .hits
}
