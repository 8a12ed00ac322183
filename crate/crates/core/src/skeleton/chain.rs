use crate::linalg::Vec3;

pub const DEFAULT_ANGLE_TOLERANCE_DEG: f64 = 10.0;

/// Angle in degrees between `b - a` and `c - b`. Zero-length segments count
/// as straight.
fn turn_angle(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let u = b - a;
    let w = c - b;
    if u.norm_squared() == 0.0 || w.norm_squared() == 0.0 {
        return 0.0;
    }
    u.cross(&w).norm().atan2(u.dot(&w)).to_degrees()
}

/// Keeps the endpoints and every interior center whose incoming and
/// outgoing segments turn by more than `angle_tolerance` degrees.
pub fn decimate_chain(centers: &[Vec3], angle_tolerance: f64) -> Vec<Vec3> {
    if centers.len() <= 2 {
        return centers.to_vec();
    }
    let mut out = vec![centers[0]];
    for w in centers.windows(3) {
        if turn_angle(&w[0], &w[1], &w[2]) > angle_tolerance {
            out.push(w[1]);
        }
    }
    out.push(centers[centers.len() - 1]);
    out
}

fn bezier(b: &[Vec3; 4], t: f64) -> Vec3 {
    let s = 1.0 - t;
    b[0] * (s * s * s) + b[1] * (3.0 * s * s * t) + b[2] * (3.0 * s * t * t) + b[3] * (t * t * t)
}

const SAMPLES_PER_SEGMENT: usize = 32;

/// Resamples the chain at uniform arc length along the cubic Bezier
/// (Catmull-Rom) curve through the centers. The count and both endpoints
/// are preserved, and no output point moves farther from its input
/// counterpart than the longer of the two adjacent input segments.
pub fn smooth_centers(centers: &[Vec3]) -> Vec<Vec3> {
    let n = centers.len();
    if n < 4 {
        return centers.to_vec();
    }
    let tangent = |i: usize| -> Vec3 {
        if i == 0 {
            centers[1] - centers[0]
        } else if i == n - 1 {
            centers[n - 1] - centers[n - 2]
        } else {
            (centers[i + 1] - centers[i - 1]) / 2.0
        }
    };
    let segments: Vec<[Vec3; 4]> = (0..n - 1)
        .map(|i| {
            [
                centers[i],
                centers[i] + tangent(i) / 3.0,
                centers[i + 1] - tangent(i + 1) / 3.0,
                centers[i + 1],
            ]
        })
        .collect();

    let mut dense = vec![centers[0]];
    for seg in &segments {
        for k in 1..=SAMPLES_PER_SEGMENT {
            dense.push(bezier(seg, k as f64 / SAMPLES_PER_SEGMENT as f64));
        }
    }
    let mut arc = vec![0.0];
    for w in dense.windows(2) {
        arc.push(arc.last().unwrap() + (w[1] - w[0]).norm());
    }
    let total = *arc.last().unwrap();

    let mut out = Vec::with_capacity(n);
    out.push(centers[0]);
    let mut j = 0;
    for k in 1..n - 1 {
        let target = total * k as f64 / (n - 1) as f64;
        while j + 1 < arc.len() - 1 && arc[j + 1] < target {
            j += 1;
        }
        let span = arc[j + 1] - arc[j];
        let t = if span > 0.0 { (target - arc[j]) / span } else { 0.0 };
        let p = dense[j] + (dense[j + 1] - dense[j]) * t;
        let limit = (centers[k] - centers[k - 1]).norm().max((centers[k + 1] - centers[k]).norm());
        let offset = p - centers[k];
        let dist = offset.norm();
        out.push(if dist > limit {
            centers[k] + offset * (limit / dist)
        } else {
            p
        });
    }
    out.push(centers[n - 1]);
    out
}
