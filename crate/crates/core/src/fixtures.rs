//! Procedural test meshes: primitives, swept tubes and the composite
//! character fixtures (humanoid, jointed limbs, Y-branch) used throughout the
//! test suites and the guide.
//!
//! Every generator returns a consistently outward-oriented mesh. Tubes are
//! closed with flat fan caps and add no vertices beyond their rings.

use crate::linalg::{any_perpendicular, Vec3};
use crate::mesh::Mesh;
use crate::mls::ControlHandles;
use crate::skeleton::Skeleton;
use nalgebra::{Unit, UnitQuaternion};
use std::f64::consts::{PI, TAU};

fn build(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Mesh {
    Mesh::new(vertices, faces).expect("fixture generators produce valid meshes")
}

/// Unit cube `[0,1]^3`, 8 vertices and 12 triangles.
pub fn unit_cube() -> Mesh {
    axis_box(Vec3::zeros(), Vec3::repeat(1.0))
}

/// Axis-aligned box between `min` and `max`, 12 triangles.
pub fn axis_box(min: Vec3, max: Vec3) -> Mesh {
    let corner = |i: usize| {
        Vec3::new(
            if i & 1 == 0 { min.x } else { max.x },
            if i & 2 == 0 { min.y } else { max.y },
            if i & 4 == 0 { min.z } else { max.z },
        )
    };
    let vertices = (0..8).map(corner).collect();
    let quads = [
        [0, 2, 3, 1], // -z
        [4, 5, 7, 6], // +z
        [0, 1, 5, 4], // -y
        [2, 6, 7, 3], // +y
        [0, 4, 6, 2], // -x
        [1, 3, 7, 5], // +x
    ];
    let faces = quads
        .iter()
        .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
        .collect();
    build(vertices, faces)
}

/// Regular tetrahedron centered at the origin.
pub fn tetrahedron() -> Mesh {
    let vertices = vec![
        Vec3::new(1.0, 1.0, 1.0),
        Vec3::new(1.0, -1.0, -1.0),
        Vec3::new(-1.0, 1.0, -1.0),
        Vec3::new(-1.0, -1.0, 1.0),
    ];
    build(vertices, vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])
}

/// Open planar grid in the z = 0 plane with `nx` by `ny` cells.
pub fn planar_grid(nx: usize, ny: usize, spacing: f64) -> Mesh {
    let mut vertices = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(Vec3::new(i as f64 * spacing, j as f64 * spacing, 0.0));
        }
    }
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut faces = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            faces.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            faces.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    build(vertices, faces)
}

/// UV sphere with its poles on the x axis. With an even `stacks` count the
/// equator is a vertex ring in the x = 0 plane at angles `TAU * j / slices`
/// measured from +y towards +z.
pub fn uv_sphere(radius: f64, stacks: usize, slices: usize) -> Mesh {
    assert!(stacks >= 2 && slices >= 3);
    let mut vertices = vec![Vec3::new(radius, 0.0, 0.0)];
    for i in 1..stacks {
        let phi = PI * i as f64 / stacks as f64;
        for j in 0..slices {
            let theta = TAU * j as f64 / slices as f64;
            vertices.push(radius * Vec3::new(phi.cos(), phi.sin() * theta.cos(), phi.sin() * theta.sin()));
        }
    }
    vertices.push(Vec3::new(-radius, 0.0, 0.0));
    let south = vertices.len() - 1;
    let ring = |i: usize, j: usize| 1 + (i - 1) * slices + j % slices;
    let mut faces = Vec::new();
    for j in 0..slices {
        faces.push([0, ring(1, j), ring(1, j + 1)]);
        faces.push([south, ring(stacks - 1, j + 1), ring(stacks - 1, j)]);
    }
    for i in 1..stacks - 1 {
        for j in 0..slices {
            let (a, b, c, d) = (ring(i, j), ring(i, j + 1), ring(i + 1, j + 1), ring(i + 1, j));
            faces.push([a, d, c]);
            faces.push([a, c, b]);
        }
    }
    build(vertices, faces)
}

/// Icosahedron with every face split into four `subdivisions` times, the
/// new vertices pushed out to the sphere. All triangles are acute.
pub fn icosphere(radius: f64, subdivisions: usize) -> Mesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize() * radius)
    .collect();
    let mut faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints = std::collections::HashMap::new();
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vec3>| {
            *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                vertices.push(((vertices[a] + vertices[b]) / 2.0).normalize() * radius);
                vertices.len() - 1
            })
        };
        faces = faces
            .iter()
            .flat_map(|&[a, b, c]| {
                let ab = midpoint(a, b, &mut vertices);
                let bc = midpoint(b, c, &mut vertices);
                let ca = midpoint(c, a, &mut vertices);
                [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
            })
            .collect();
    }
    build(vertices, faces)
}

/// Closed tube swept along `path` with per-point radii, using parallel
/// transported frames. `path.len()` rings of `segments` vertices each.
pub fn tube(path: &[Vec3], radii: &[f64], segments: usize) -> Mesh {
    assert!(path.len() >= 2);
    tube_from(path, radii, segments, any_perpendicular(&(path[1] - path[0])))
}

/// [`tube`] with the first vertex of the first ring in direction
/// `first_normal`.
pub fn tube_from(path: &[Vec3], radii: &[f64], segments: usize, first_normal: Vec3) -> Mesh {
    assert!(path.len() >= 2 && radii.len() == path.len() && segments >= 3);
    let n = path.len();
    let tangents: Vec<Vec3> = (0..n)
        .map(|i| {
            let prev = path[i.saturating_sub(1)];
            let next = path[(i + 1).min(n - 1)];
            (next - prev).normalize()
        })
        .collect();
    let mut normal = first_normal;
    let mut vertices = Vec::with_capacity(n * segments);
    for i in 0..n {
        let t = tangents[i];
        normal = (normal - t * normal.dot(&t)).normalize();
        let binormal = t.cross(&normal);
        for j in 0..segments {
            let theta = TAU * j as f64 / segments as f64;
            vertices.push(path[i] + radii[i] * (theta.cos() * normal + theta.sin() * binormal));
        }
    }
    let idx = |i: usize, j: usize| i * segments + j % segments;
    let mut faces = Vec::new();
    for i in 0..n - 1 {
        for j in 0..segments {
            let (a, b, c, d) = (idx(i, j), idx(i, j + 1), idx(i + 1, j + 1), idx(i + 1, j));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    for k in 1..segments - 1 {
        faces.push([idx(0, 0), idx(0, k + 1), idx(0, k)]);
        faces.push([idx(n - 1, 0), idx(n - 1, k), idx(n - 1, k + 1)]);
    }
    build(vertices, faces)
}

/// Evenly spaced points on the segment `from`..`to`, both ends included.
pub fn line_points(from: Vec3, to: Vec3, count: usize) -> Vec<Vec3> {
    (0..count)
        .map(|i| from + (to - from) * (i as f64 / (count - 1) as f64))
        .collect()
}

/// Straight capped cylinder along +x starting at the origin.
pub fn cylinder(radius: f64, length: f64, segments: usize, rings: usize) -> Mesh {
    let path = line_points(Vec3::zeros(), Vec3::new(length, 0.0, 0.0), rings);
    tube(&path, &vec![radius; rings], segments)
}

/// Straight cylinder along +z from the origin, uniformly bent into a
/// circular arc of total angle `bend` (radians) in the x-z plane.
pub fn bent_cylinder(radius: f64, length: f64, segments: usize, rings: usize, bend: f64) -> Mesh {
    let path = line_points(Vec3::zeros(), Vec3::new(0.0, 0.0, length), rings);
    let straight = tube(&path, &vec![radius; rings], segments);
    straight.map_vertices(|v| bend_about_y(v, length, bend))
}

/// Maps a point of a +z aligned straight body of length `length` onto the
/// same body bent by `bend` radians; lengths along the axis are preserved.
pub fn bend_about_y(v: &Vec3, length: f64, bend: f64) -> Vec3 {
    if bend.abs() < 1e-12 {
        return *v;
    }
    let r = length / bend;
    let phi = v.z / r;
    Vec3::new(r - (r - v.x) * phi.cos(), v.y, (r - v.x) * phi.sin())
}

/// Composite fixtures carry labels known by construction.
#[derive(Debug, Clone)]
pub struct Humanoid {
    pub mesh: Mesh,
    /// Per-vertex part label: 0 trunk, 1-2 arms, 3-4 legs.
    pub vertex_part: Vec<usize>,
    /// Height of a slice through the chest, crossing the trunk and both arms.
    pub chest_height: f64,
}

/// Trunk, two hanging arms and two legs as five disjoint closed tubes, with
/// height along +z.
pub fn humanoid() -> Humanoid {
    let segments = 24;
    let parts: [(Vec3, Vec3, f64, usize); 5] = [
        (Vec3::new(0.0, 0.0, 0.9), Vec3::new(0.0, 0.0, 1.8), 0.2, 19),
        (Vec3::new(-0.29, 0.0, 1.75), Vec3::new(-0.29, 0.0, 1.0), 0.06, 16),
        (Vec3::new(0.29, 0.0, 1.75), Vec3::new(0.29, 0.0, 1.0), 0.06, 16),
        (Vec3::new(-0.1, 0.0, 0.88), Vec3::new(-0.1, 0.0, 0.0), 0.08, 18),
        (Vec3::new(0.1, 0.0, 0.88), Vec3::new(0.1, 0.0, 0.0), 0.08, 18),
    ];
    let mut mesh: Option<Mesh> = None;
    let mut vertex_part = Vec::new();
    for (label, &(a, b, r, rings)) in parts.iter().enumerate() {
        let part = tube(&line_points(a, b, rings), &vec![r; rings], segments);
        vertex_part.extend(std::iter::repeat_n(label, part.vertex_count()));
        mesh = Some(match mesh {
            None => part,
            Some(m) => m.merged(&part),
        });
    }
    Humanoid {
        mesh: mesh.expect("five parts"),
        vertex_part,
        chest_height: 1.5,
    }
}

#[derive(Debug, Clone)]
pub struct Leg {
    pub mesh: Mesh,
    pub hip: Vec3,
    pub knee: Vec3,
    pub ankle: Vec3,
    /// Unit normal of the plane the leg bends in; a positive rotation about
    /// it increases the bend.
    pub bend_axis: Vec3,
}

impl Leg {
    /// Handles on every joint of `skeleton`, with the joints beyond the one
    /// nearest the knee rotated by `angle` radians about `bend_axis`
    /// through it. The rest stay in place.
    pub fn bend_handles(&self, skeleton: &Skeleton, angle: f64) -> ControlHandles {
        let nearest = |p: &Vec3| {
            (0..skeleton.joint_count())
                .min_by(|&a, &b| (skeleton.joints[a] - p).norm().total_cmp(&(skeleton.joints[b] - p).norm()))
                .expect("skeleton has joints")
        };
        let hip = nearest(&self.hip);
        let pivot = nearest(&self.knee);
        let from_hip = skeleton.distances_from(hip).expect("joint in range");
        let from_pivot = skeleton.distances_from(pivot).expect("joint in range");
        let rotation = UnitQuaternion::from_axis_angle(&Unit::new_normalize(self.bend_axis), angle);
        let center = skeleton.joints[pivot];
        ControlHandles::at_rest(skeleton).map_targets(|p| {
            let j = nearest(p);
            let distal = j != pivot && (from_hip[pivot] + from_pivot[j] - from_hip[j]).abs() < 1e-9;
            if distal {
                center + rotation * (p - center)
            } else {
                *p
            }
        })
    }
}

/// Two straight tubes joined by a circular arc, hanging from `top` along
/// -z and bending towards +x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointedTube {
    pub top: Vec3,
    pub upper_length: f64,
    pub lower_length: f64,
    pub radius: f64,
    /// Radius of the arc's centerline.
    pub bend_radius: f64,
    /// Flexion at rest, radians.
    pub rest_bend: f64,
    pub upper_rings: usize,
    /// Rings strictly inside the arc.
    pub arc_rings: usize,
    pub lower_rings: usize,
    pub segments: usize,
}

impl JointedTube {
    pub fn vertex_count(&self) -> usize {
        (self.upper_rings + self.arc_rings + self.lower_rings) * self.segments
    }

    pub fn build(&self) -> Leg {
        let down = Vec3::new(0.0, 0.0, -1.0);
        let arc_len = self.bend_radius * self.rest_bend;
        let arc_start = self.top + down * (self.upper_length - arc_len / 2.0);
        let bend_axis = Vec3::new(0.0, -1.0, 0.0);
        let rotate = |dir: Vec3, angle: f64| UnitQuaternion::from_axis_angle(&Unit::new_normalize(bend_axis), angle) * dir;
        let arc_center = arc_start + Vec3::x() * self.bend_radius;
        let arc_point = |angle: f64| arc_center + rotate(-Vec3::x() * self.bend_radius, angle);
        let arc_end = arc_point(self.rest_bend);
        let bottom = arc_end + rotate(down, self.rest_bend) * (self.lower_length - arc_len / 2.0);

        let mut path = line_points(self.top, arc_start, self.upper_rings);
        let steps = self.arc_rings + 1;
        path.extend((1..steps).map(|k| arc_point(self.rest_bend * k as f64 / steps as f64)));
        path.extend(line_points(arc_end, bottom, self.lower_rings));
        // Rounded ends, so end slices do not cut a flat tilted cap.
        let mut radii = vec![self.radius; path.len()];
        let last = radii.len() - 1;
        for (k, scale) in [0.5, 0.85].into_iter().enumerate() {
            radii[k] = self.radius * scale;
            radii[last - k] = self.radius * scale;
        }
        // A ring vertex in the bend plane keeps the mesh mirror-symmetric.
        let mesh = tube_from(&path, &radii, self.segments, Vec3::x());
        Leg {
            mesh,
            hip: self.top,
            knee: arc_point(self.rest_bend / 2.0),
            ankle: bottom,
            bend_axis,
        }
    }
}

/// Vertex count of [`knee_leg`].
pub const KNEE_LEG_VERTICES: usize = 891;

/// Thigh and shin of a leg with the knee slightly flexed at rest.
pub const KNEE_LEG: JointedTube = JointedTube {
    top: Vec3::new(0.0, 0.0, 1.0),
    upper_length: 0.5,
    lower_length: 0.5,
    radius: 0.055,
    bend_radius: 0.06,
    rest_bend: 35.0 * PI / 180.0,
    upper_rings: 14,
    arc_rings: 4,
    lower_rings: 15,
    segments: 27,
};

/// Upper arm and forearm, thinner and shorter than the leg.
pub const ARM: JointedTube = JointedTube {
    top: Vec3::new(0.0, 0.0, 1.5),
    upper_length: 0.3,
    lower_length: 0.28,
    radius: 0.04,
    bend_radius: 0.05,
    rest_bend: 30.0 * PI / 180.0,
    upper_rings: 12,
    arc_rings: 4,
    lower_rings: 12,
    segments: 20,
};

/// The leg of [`KNEE_LEG`]: 33 rings of 27 vertices, 891 vertices in total.
pub fn knee_leg() -> Leg {
    KNEE_LEG.build()
}

/// The arm of [`ARM`], elbow at `knee`.
pub fn arm() -> Leg {
    ARM.build()
}

#[derive(Debug, Clone)]
pub struct YTube {
    pub mesh: Mesh,
    /// Height at which the branches separate from the stem.
    pub branch_height: f64,
}

/// A thick vertical stem with two thinner branches leaving its top at
/// +-30 degrees, as three disjoint closed tubes.
pub fn y_tube() -> YTube {
    let segments = 20;
    let stem = tube(
        &line_points(Vec3::zeros(), Vec3::new(0.0, 0.0, 1.0), 12),
        &[0.12; 12],
        segments,
    );
    let mut mesh = stem;
    for side in [-1.0, 1.0] {
        let dir = Vec3::new(side * 30f64.to_radians().sin(), 0.0, 30f64.to_radians().cos());
        let start = Vec3::new(side * 0.1, 0.0, 1.08);
        let branch = tube(&line_points(start, start + dir * 0.8, 10), &[0.08; 10], segments);
        mesh = mesh.merged(&branch);
    }
    YTube {
        mesh,
        branch_height: 1.04,
    }
}

/// Two parallel cylinders along +x, `gap` apart between their surfaces.
pub fn two_cylinders(radius: f64, length: f64, gap: f64) -> Mesh {
    let a = cylinder(radius, length, 20, 12);
    let offset = Vec3::new(0.0, 2.0 * radius + gap, 0.0);
    a.merged(&a.map_vertices(|v| v + offset))
}
