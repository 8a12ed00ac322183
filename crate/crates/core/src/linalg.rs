//! Small fixed-size linear algebra: a cyclic Jacobi eigensolver for
//! symmetric matrices and a few rotation helpers.

use nalgebra::{SMatrix, SVector, UnitQuaternion, Vector3};

pub type Vec3 = Vector3<f64>;

/// Off-diagonal convergence threshold, relative to the Frobenius norm.
pub const JACOBI_TOLERANCE: f64 = 1e-12;
const MAX_SWEEPS: usize = 64;

/// Eigen-decomposition of a symmetric matrix.
///
/// Eigenvalues are sorted in descending order and `vectors.column(k)` is
/// the unit eigenvector of `values[k]`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<const N: usize> {
    pub values: SVector<f64, N>,
    pub vectors: SMatrix<f64, N, N>,
}

/// Cyclic Jacobi rotations until every off-diagonal entry is below
/// `JACOBI_TOLERANCE` times the matrix norm.
///
/// Only the upper triangle is read.
pub fn symmetric_eigen<const N: usize>(matrix: &SMatrix<f64, N, N>) -> SymmetricEigen<N> {
    let mut a = *matrix;
    for i in 0..N {
        for j in 0..i {
            a[(i, j)] = a[(j, i)];
        }
    }
    let mut v = SMatrix::<f64, N, N>::identity();
    let scale = a.norm();
    if scale > 0.0 {
        let threshold = JACOBI_TOLERANCE * scale;
        for _ in 0..MAX_SWEEPS {
            let mut off = 0.0f64;
            for p in 0..N {
                for q in (p + 1)..N {
                    off = off.max(a[(p, q)].abs());
                }
            }
            if off <= threshold {
                break;
            }
            for p in 0..N {
                for q in (p + 1)..N {
                    let apq = a[(p, q)];
                    if apq.abs() <= f64::MIN_POSITIVE {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..N {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..N {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                    for k in 0..N {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..N).collect();
    // Stable sort keeps the result deterministic for repeated eigenvalues.
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let mut values = SVector::<f64, N>::zeros();
    let mut vectors = SMatrix::<f64, N, N>::zeros();
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = a[(src, src)];
        vectors.set_column(dst, &v.column(src));
    }
    SymmetricEigen { values, vectors }
}

/// Rotation vector (axis times angle, angle in `[0, pi]`).
pub fn rotation_vector(rotation: &UnitQuaternion<f64>) -> Vec3 {
    let q = rotation.quaternion();
    let (w, xyz) = if q.w < 0.0 {
        (-q.w, -q.imag())
    } else {
        (q.w, q.imag())
    };
    let s = xyz.norm();
    if s == 0.0 {
        return Vec3::zeros();
    }
    let angle = 2.0 * s.atan2(w);
    xyz * (angle / s)
}

/// Shortest-arc rotation taking direction `from` onto direction `to`.
///
/// Antiparallel inputs rotate by pi about a deterministic perpendicular axis.
pub fn shortest_arc(from: &Vec3, to: &Vec3) -> UnitQuaternion<f64> {
    let a = from.normalize();
    let b = to.normalize();
    let cross = a.cross(&b);
    let dot = a.dot(&b).clamp(-1.0, 1.0);
    let sin = cross.norm();
    if sin <= 1e-15 {
        if dot > 0.0 {
            return UnitQuaternion::identity();
        }
        let axis = any_perpendicular(&a);
        return UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(axis), std::f64::consts::PI);
    }
    let angle = sin.atan2(dot);
    UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(cross), angle)
}

/// A unit vector perpendicular to `v`, chosen against the least aligned
/// coordinate axis.
pub fn any_perpendicular(v: &Vec3) -> Vec3 {
    let abs = v.abs();
    let basis = if abs.x <= abs.y && abs.x <= abs.z {
        Vec3::x()
    } else if abs.y <= abs.z {
        Vec3::y()
    } else {
        Vec3::z()
    };
    v.cross(&basis).normalize()
}

/// Arithmetic mean of a point set, `None` when empty.
pub fn mean(points: &[Vec3]) -> Option<Vec3> {
    if points.is_empty() {
        return None;
    }
    let sum = points.iter().fold(Vec3::zeros(), |acc, p| acc + p);
    Some(sum / points.len() as f64)
}

/// Median of a slice of finite values, `None` when empty.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    Some(if sorted.len() % 2 == 0 {
        0.5 * (sorted[mid - 1] + sorted[mid])
    } else {
        sorted[mid]
    })
}
