//! Acceptance criteria, one PASS or FAIL line each. Exits non-zero when
//! any criterion fails.

mod common;

use common::{output_parts, p, rigforge, write_mesh};
use nalgebra::{Quaternion, UnitQuaternion};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rigforge::deform::{deform, DeformOptions};
use rigforge::distortion::measure_distortion;
use rigforge::fixtures;
use rigforge::formats::{PoseFile, ReportFile, RigFile};
use rigforge::frame::{compute_frame, to_frame};
use rigforge::linalg::any_perpendicular;
use rigforge::mesh::Mesh;
use rigforge::mls::ControlHandles;
use rigforge::procrustes::weighted_procrustes;
use rigforge::rig::{build_rig, Rig, RigConfig};
use rigforge::skeleton::{decimate_chain, DEFAULT_ANGLE_TOLERANCE_DEG};
use rigforge::slicer::{classify_parts, slice_mesh, RayCaster, SliceConfig};
use rigforge::Vec3;
use std::time::{Duration, Instant};
use tempfile::TempDir;

type Outcome = Result<String, String>;

fn ensure(condition: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if condition {
        Ok(())
    } else {
        Err(message())
    }
}

fn rig_of(mesh: &Mesh) -> Result<Rig, String> {
    build_rig(mesh, &RigConfig::default()).map_err(|e| e.to_string())
}

/// Every fixture that has a skeleton. The sphere has no major axis and
/// is only used where no rig is needed.
fn rigged_fixtures() -> Vec<(&'static str, Mesh)> {
    vec![
        ("cylinder", fixtures::cylinder(0.2, 2.0, 24, 12)),
        ("humanoid", fixtures::humanoid().mesh),
        ("knee", fixtures::knee_leg().mesh),
        ("arm", fixtures::arm().mesh),
        ("y-tube", fixtures::y_tube().mesh),
    ]
}

fn unit_vector(rng: &mut StdRng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Uniformly distributed rotation.
fn random_rotation(rng: &mut StdRng) -> UnitQuaternion<f64> {
    loop {
        let q = Quaternion::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = q.norm();
        if n > 1e-3 && n <= 1.0 {
            return UnitQuaternion::from_quaternion(q);
        }
    }
}

fn rigid_motion(rng: &mut StdRng) -> (UnitQuaternion<f64>, Vec3) {
    let t = Vec3::new(
        rng.random_range(-2.0..2.0),
        rng.random_range(-2.0..2.0),
        rng.random_range(-2.0..2.0),
    );
    (random_rotation(rng), t)
}

/// A closed tube of circular `segments`-gon sections from `a` to `b`.
struct TubeVolume {
    a: Vec3,
    b: Vec3,
    radius: f64,
    segments: usize,
}

impl TubeVolume {
    /// A point well inside: away from the caps and inside the inscribed
    /// polygon.
    fn sample_inside(&self, rng: &mut StdRng) -> Vec3 {
        let axis = self.b - self.a;
        let u = any_perpendicular(&axis).normalize();
        let v = axis.normalize().cross(&u);
        let inscribed = self.radius * (std::f64::consts::PI / self.segments as f64).cos();
        let r = 0.9 * inscribed * rng.random::<f64>().sqrt();
        let phi = rng.random_range(0.0..std::f64::consts::TAU);
        self.a + axis * rng.random_range(0.02..0.98) + (u * phi.cos() + v * phi.sin()) * r
    }
}

/// A point outside the bounding box of `mesh`, by at least a tenth of
/// its diameter.
fn sample_outside_box(mesh: &Mesh, rng: &mut StdRng) -> Vec3 {
    let (lo, hi) = mesh.bounds();
    let margin = 0.1 * (hi - lo).norm();
    loop {
        let p = Vec3::new(
            rng.random_range(lo.x - 3.0 * margin..hi.x + 3.0 * margin),
            rng.random_range(lo.y - 3.0 * margin..hi.y + 3.0 * margin),
            rng.random_range(lo.z - 3.0 * margin..hi.z + 3.0 * margin),
        );
        if (0..3).any(|k| p[k] < lo[k] - margin || p[k] > hi[k] + margin) {
            return p;
        }
    }
}

fn parity_suite() -> Outcome {
    let started = Instant::now();
    let mut rng = StdRng::seed_from_u64(1);
    let sphere = fixtures::icosphere(1.0, 3);
    let cylinder = fixtures::cylinder(0.3, 2.0, 32, 12);
    let humanoid = fixtures::humanoid().mesh;
    // Inside the ball inscribed in the faceted sphere.
    let sphere_radius = 0.95;
    let cylinder_part = TubeVolume {
        a: Vec3::zeros(),
        b: Vec3::new(2.0, 0.0, 0.0),
        radius: 0.3,
        segments: 32,
    };
    // Part layout of the humanoid fixture.
    let body_parts = [
        (Vec3::new(0.0, 0.0, 0.9), Vec3::new(0.0, 0.0, 1.8), 0.2),
        (Vec3::new(-0.29, 0.0, 1.75), Vec3::new(-0.29, 0.0, 1.0), 0.06),
        (Vec3::new(0.29, 0.0, 1.75), Vec3::new(0.29, 0.0, 1.0), 0.06),
        (Vec3::new(-0.1, 0.0, 0.88), Vec3::new(-0.1, 0.0, 0.0), 0.08),
        (Vec3::new(0.1, 0.0, 0.88), Vec3::new(0.1, 0.0, 0.0), 0.08),
    ]
    .map(|(a, b, radius)| TubeVolume { a, b, radius, segments: 24 });

    let mut summary = Vec::new();
    for (name, mesh) in [("sphere", &sphere), ("cylinder", &cylinder), ("humanoid", &humanoid)] {
        let caster = RayCaster::new(mesh);
        let mut interior = Vec::new();
        let mut exterior = Vec::new();
        for k in 0..200 {
            interior.push(match name {
                "sphere" => unit_vector(&mut rng) * sphere_radius * rng.random::<f64>().cbrt(),
                "cylinder" => cylinder_part.sample_inside(&mut rng),
                _ => body_parts[k % body_parts.len()].sample_inside(&mut rng),
            });
            exterior.push(if name == "humanoid" && k % 2 == 0 {
                // Gaps between the arms and the trunk, and between the legs.
                let z = rng.random_range(1.05..1.7);
                match k % 6 {
                    0 => Vec3::new(-0.215, rng.random_range(-0.01..0.01), z),
                    2 => Vec3::new(0.215, rng.random_range(-0.01..0.01), z),
                    _ => Vec3::new(rng.random_range(-0.01..0.01), 0.0, rng.random_range(0.05..0.8)),
                }
            } else {
                sample_outside_box(mesh, &mut rng)
            });
        }
        let (mut checked, mut grazed, mut wrong) = (0, 0, 0);
        for (points, inside) in [(&interior, true), (&exterior, false)] {
            for origin in points {
                for _ in 0..64 {
                    let d = unit_vector(&mut rng);
                    let cast = caster.cast(origin, &d, &any_perpendicular(&d));
                    if cast.grazed {
                        grazed += 1;
                        continue;
                    }
                    checked += 1;
                    if (cast.hits.len() % 2 == 1) != inside {
                        wrong += 1;
                    }
                }
            }
        }
        ensure(wrong == 0, || format!("{name}: {wrong} of {checked} rays have the wrong parity"))?;
        summary.push(format!("{name} {checked} rays ({grazed} grazing)"));
    }
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!("{}, all parities correct in {:.2}s", summary.join(", "), elapsed.as_secs_f64()))
}

fn rigid_reproduction() -> Outcome {
    let mesh = fixtures::humanoid().mesh;
    let rig = rig_of(&mesh)?;
    let diameter = mesh.diameter();
    let mut rng = StdRng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (rotation, t) = rigid_motion(&mut rng);
        let handles = ControlHandles::at_rest(&rig.skeleton).map_targets(|p| rotation * p + t);
        let out = deform(&mesh, &rig.skeleton, &rig.binding, &handles, &DeformOptions::default())
            .map_err(|e| e.to_string())?;
        for (v, w) in mesh.vertices.iter().zip(&out.mesh.vertices) {
            worst = worst.max((rotation * v + t - w).norm() / diameter);
        }
    }
    ensure(worst <= 1e-6, || format!("largest error {worst:.3e} of the diameter"))?;
    Ok(format!("100 motions, largest error {worst:.2e} of the diameter"))
}

fn identity_and_topology() -> Outcome {
    let mut worst: f64 = 0.0;
    let fixtures = rigged_fixtures();
    for (name, mesh) in &fixtures {
        let rig = rig_of(mesh)?;
        let handles = ControlHandles::at_rest(&rig.skeleton);
        let out = deform(mesh, &rig.skeleton, &rig.binding, &handles, &DeformOptions::default())
            .map_err(|e| e.to_string())?;
        ensure(out.mesh.faces == mesh.faces, || format!("{name}: faces changed"))?;
        for (a, b) in mesh.vertices.iter().zip(&out.mesh.vertices) {
            worst = worst.max((a - b).amax());
        }
        ensure(worst <= 1e-9, || format!("{name}: coordinate moved by {worst:.3e}"))?;
    }
    Ok(format!(
        "{} fixtures, faces identical, largest coordinate change {worst:.2e}",
        fixtures.len()
    ))
}

fn partition_of_unity() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut vertices = 0;
    for (name, mesh) in rigged_fixtures() {
        let rig = rig_of(&mesh)?;
        for (v, weights) in rig.binding.weights.iter().enumerate() {
            ensure(weights.iter().all(|&(_, w)| w >= 0.0), || format!("{name}: negative weight at vertex {v}"))?;
            let sum: f64 = weights.iter().map(|(_, w)| w).sum();
            worst = worst.max((sum - 1.0).abs());
        }
        vertices += mesh.vertex_count();
        ensure(worst <= 1e-9, || format!("{name}: weight sum off by {worst:.3e}"))?;
    }
    Ok(format!("{vertices} vertices, largest sum error {worst:.2e}"))
}

fn distortion_null_and_monotone() -> Outcome {
    let mut rng = StdRng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for (_, mesh) in rigged_fixtures() {
        let rig = rig_of(&mesh)?;
        let bones = rig.skeleton.bones.len();
        for _ in 0..20 {
            let (rotation, t) = rigid_motion(&mut rng);
            let moved = mesh.map_vertices(|v| rotation * v + t);
            let (global, _) = measure_distortion(&mesh, &moved, &rig.binding, bones).map_err(|e| e.to_string())?;
            worst = worst.max(global);
        }
    }
    ensure(worst < 1e-9, || format!("rigid motion distortion {worst:.3e}"))?;

    let (radius, length, segments, rings) = (0.1, 1.0, 16, 24);
    let rest = fixtures::bent_cylinder(radius, length, segments, rings, 0.0);
    let rig = rig_of(&rest)?;
    let mut values = Vec::new();
    for degrees in [30.0f64, 60.0, 90.0, 120.0] {
        let bent = fixtures::bent_cylinder(radius, length, segments, rings, degrees.to_radians());
        let (global, _) =
            measure_distortion(&rest, &bent, &rig.binding, rig.skeleton.bones.len()).map_err(|e| e.to_string())?;
        values.push(global);
    }
    ensure(values.windows(2).all(|w| w[0] < w[1]), || format!("bends 30/60/90/120 give {values:?}"))?;
    Ok(format!(
        "rigid max {worst:.2e}; bends 30/60/90/120 give {:.4} < {:.4} < {:.4} < {:.4}",
        values[0], values[1], values[2], values[3]
    ))
}

fn run_binary(args: &[&str]) -> Result<String, String> {
    let (code, stdout, stderr) = output_parts(rigforge().args(args).output().map_err(|e| e.to_string())?);
    ensure(code == 0, || format!("rigforge {args:?} exited {code}: {stderr}"))?;
    Ok(stdout)
}

fn read_report(path: &std::path::Path) -> Result<ReportFile, String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    ReportFile::from_json(&text).map_err(|e| e.to_string())
}

fn large_angle_detection() -> Outcome {
    let leg = fixtures::knee_leg();
    ensure(leg.mesh.vertex_count() == 891, || {
        format!("knee fixture has {} vertices", leg.mesh.vertex_count())
    })?;
    let dir = TempDir::new().map_err(|e| e.to_string())?;
    let started = Instant::now();
    let mesh_path = write_mesh(dir.path(), "knee.obj", &leg.mesh);
    let rig_path = dir.path().join("knee.rig.json");
    run_binary(&["rig", p(&mesh_path), "-o", p(&rig_path)])?;
    let rig = RigFile::from_json(&std::fs::read_to_string(&rig_path).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let skeleton = &rig.rig.skeleton;
    let knee = (0..skeleton.joint_count())
        .min_by(|&a, &b| (skeleton.joints[a] - leg.knee).norm().total_cmp(&(skeleton.joints[b] - leg.knee).norm()))
        .ok_or("empty skeleton")?;
    let bend = |degrees: f64, extra: &[&str]| -> Result<ReportFile, String> {
        let pose = dir.path().join(format!("bend{degrees}.json"));
        let handles = leg.bend_handles(skeleton, degrees.to_radians());
        std::fs::write(&pose, PoseFile::from_handles(&handles).to_json()).map_err(|e| e.to_string())?;
        let out = dir.path().join(format!("bend{degrees}{}.obj", extra.len()));
        let mut args = vec!["deform", p(&mesh_path), p(&rig_path), p(&pose), "-o", p(&out)];
        args.extend_from_slice(extra);
        run_binary(&args)?;
        read_report(&out.with_extension("report.json"))
    };
    let decomposed = bend(120.0, &[])?;
    let single = bend(120.0, &["--no-decompose"])?;
    let small = bend(20.0, &[])?;
    let elapsed = started.elapsed();
    ensure(decomposed.flagged_joints.contains(&knee), || {
        format!("knee joint {knee} not in {:?}", decomposed.flagged_joints)
    })?;
    ensure(decomposed.steps_used >= 2, || format!("{} steps", decomposed.steps_used))?;
    ensure(decomposed.global_distortion <= single.global_distortion, || {
        format!(
            "decomposed {} > single pass {}",
            decomposed.global_distortion, single.global_distortion
        )
    })?;
    ensure(small.flagged_joints.is_empty(), || format!("20 degrees flags {:?}", small.flagged_joints))?;
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "knee joint {knee} flagged at {:.1} deg, {} steps, distortion {:.4} vs single pass {:.4}, 20 deg unflagged, {:.2}s",
        decomposed.per_joint_angle_deg[knee],
        decomposed.steps_used,
        decomposed.global_distortion,
        single.global_distortion,
        elapsed.as_secs_f64()
    ))
}

fn skeleton_compactness() -> Outcome {
    let cylinder = fixtures::cylinder(0.2, 2.0, 24, 12);
    let local = to_frame(&cylinder, &compute_frame(&cylinder).map_err(|e| e.to_string())?);
    let slices = slice_mesh(&local, &SliceConfig::default()).map_err(|e| e.to_string())?;
    let chains = classify_parts(&slices);
    ensure(chains.chains.len() == 1, || format!("{} chains", chains.chains.len()))?;
    let centers: Vec<Vec3> = chains.chains[0].nodes.iter().map(|n| n.center).collect();
    let decimated = decimate_chain(&centers, DEFAULT_ANGLE_TOLERANCE_DEG);
    ensure(decimated.len() == 2, || format!("chain decimates to {} joints", decimated.len()))?;
    let rig = rig_of(&cylinder)?;
    ensure(rig.skeleton.joint_count() == 2, || format!("cylinder rig has {} joints", rig.skeleton.joint_count()))?;
    let body = rig_of(&fixtures::humanoid().mesh)?;
    let (joints, raw) = (body.skeleton.joint_count(), body.center_count);
    ensure(2 * joints <= raw, || format!("humanoid {joints} joints from {raw} centers"))?;
    Ok(format!(
        "cylinder {} centers to 2 joints; humanoid {joints} joints from {raw} centers",
        centers.len()
    ))
}

/// `sum w |R (p - p*) - (q - q*)|^2` with weighted centroids.
fn alignment_error(rotation: &UnitQuaternion<f64>, p: &[Vec3], q: &[Vec3], w: &[f64]) -> f64 {
    let total: f64 = w.iter().sum();
    let centroid = |x: &[Vec3]| x.iter().zip(w).map(|(x, w)| x * *w).sum::<Vec3>() / total;
    let (pc, qc) = (centroid(p), centroid(q));
    p.iter()
        .zip(q)
        .zip(w)
        .map(|((p, q), w)| w * (rotation * (p - pc) - (q - qc)).norm_squared())
        .sum()
}

fn procrustes_oracle() -> Outcome {
    let mut rng = StdRng::seed_from_u64(8);
    let mut closest = f64::INFINITY;
    for trial in 0..100 {
        let n = 1 + trial % 5;
        let p: Vec<Vec3> = (0..n).map(|_| unit_vector(&mut rng) * rng.random_range(0.1..2.0)).collect();
        let (rotation, t) = rigid_motion(&mut rng);
        let q: Vec<Vec3> = p.iter().map(|x| rotation * x + t + unit_vector(&mut rng) * 0.2).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let solved = alignment_error(&weighted_procrustes(&p, &q, &w).rotation, &p, &q, &w);
        let scale: f64 = q.iter().map(|x| x.norm_squared()).sum::<f64>().max(1.0);
        for _ in 0..10_000 {
            let candidate = alignment_error(&random_rotation(&mut rng), &p, &q, &w);
            ensure(solved <= candidate + 1e-12 * scale, || {
                format!("trial {trial} ({n} handles): solved {solved} > random {candidate}")
            })?;
            if n > 1 {
                closest = closest.min(candidate - solved);
            }
        }
    }
    Ok(format!(
        "100 trials x 10000 rotations, smallest margin {closest:.2e} with 2 or more handles"
    ))
}

fn determinism() -> Outcome {
    let dir = TempDir::new().map_err(|e| e.to_string())?;
    let mut summary = Vec::new();
    for (name, mesh) in [("humanoid", fixtures::humanoid().mesh), ("knee", fixtures::knee_leg().mesh)] {
        let mesh_path = write_mesh(dir.path(), &format!("{name}.obj"), &mesh);
        let mut files = Vec::new();
        for (k, threads) in ["0", "0", "1"].iter().enumerate() {
            let out = dir.path().join(format!("{name}{k}.json"));
            let (code, _, stderr) = output_parts(
                rigforge()
                    .env("RIGFORGE_THREADS", threads)
                    .args(["rig", p(&mesh_path), "-o", p(&out)])
                    .output()
                    .map_err(|e| e.to_string())?,
            );
            ensure(code == 0, || format!("{name}: exit {code}: {stderr}"))?;
            files.push(std::fs::read(&out).map_err(|e| e.to_string())?);
        }
        ensure(files.windows(2).all(|w| w[0] == w[1]), || format!("{name}: rig files differ"))?;
        summary.push(format!("{name} {} bytes", files[0].len()));
    }
    Ok(format!("{} identical across 3 runs", summary.join(", ")))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("parity suite", parity_suite),
        ("rigid reproduction", rigid_reproduction),
        ("identity and topology", identity_and_topology),
        ("weight partition of unity", partition_of_unity),
        ("distortion null and monotone", distortion_null_and_monotone),
        ("large-angle detection and decomposition", large_angle_detection),
        ("skeleton compactness", skeleton_compactness),
        ("procrustes oracle", procrustes_oracle),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|panic| {
            let message = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {message}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
