use std::f64::consts::PI;

use proptest::prelude::*;
use sts_core::geometry::*;
use sts_core::scene::{CameraModel, CameraPose, Intrinsics, Size3};
use sts_core::synth::{level_camera_rotation, orbit_scene};

fn pose() -> impl Strategy<Value = Pose2> {
    (-500.0..500.0f64, -500.0..500.0f64, -PI..PI).prop_map(|(x, y, yaw)| Pose2::new(x, y, yaw))
}

fn ang_diff(a: f64, b: f64) -> f64 {
    normalize_angle(a - b).abs()
}

// brute-force oracle: sample the polyline every millimetre
fn dense_nearest(p: [f64; 2], pts: &[[f64; 2]]) -> (f64, f64) {
    let mut best = (f64::INFINITY, 0.0);
    let mut acc = 0.0;
    for w in pts.windows(2) {
        let len = ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt();
        let n = (len / 0.001).ceil() as usize;
        for k in 0..=n {
            let t = (k as f64 / n as f64).min(1.0);
            let q = [w[0][0] + t * (w[1][0] - w[0][0]), w[0][1] + t * (w[1][1] - w[0][1])];
            let d = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
            if d < best.0 {
                best = (d, acc + t * len);
            }
        }
        acc += len;
    }
    best
}

// winding number of a closed polygon around p
fn winding(p: [f64; 2], poly: &[[f64; 2]]) -> i32 {
    let mut w = 0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let is_left = (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1]);
        if a[1] <= p[1] {
            if b[1] > p[1] && is_left > 0.0 {
                w += 1;
            }
        } else if b[1] <= p[1] && is_left < 0.0 {
            w -= 1;
        }
    }
    w
}

fn seg_dist(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let l2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / l2).clamp(0.0, 1.0);
    ((p[0] - a[0] - t * ab[0]).powi(2) + (p[1] - a[1] - t * ab[1]).powi(2)).sqrt()
}

fn star(angles: &[f64], radii: &[f64]) -> Vec<[f64; 2]> {
    let k = angles.len();
    (0..k)
        .map(|i| {
            let a = 2.0 * PI * (i as f64 + angles[i]) / k as f64;
            [radii[i] * a.cos(), radii[i] * a.sin()]
        })
        .collect()
}

fn camera(yaw: f64, x: f64, y: f64) -> CameraModel {
    CameraModel {
        name: "CAM".into(),
        intrinsics: Intrinsics { fx: 1000.0, fy: 1000.0, cx: 800.0, cy: 450.0 },
        width: 1600,
        height: 900,
        poses: vec![CameraPose { frame: 0, x, y, z: 1.5, rotation: level_camera_rotation(yaw) }],
        image_paths: None,
    }
}

// independent pinhole oracle: explicit quaternion-to-matrix formula
fn oracle_box(pose: Pose2, size: Size3, cam: &CameraModel) -> Option<[f64; 4]> {
    let cp = &cam.poses[0];
    let [w, x, y, z] = cp.rotation;
    let r = [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ];
    let (s, c) = pose.yaw.sin_cos();
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for (lx, ly) in [(1.0, 1.0), (1.0, -1.0), (-1.0, -1.0), (-1.0, 1.0)] {
        for h in [0.0, size.height] {
            let bx = lx * size.length / 2.0;
            let by = ly * size.width / 2.0;
            let g = [pose.x + c * bx - s * by - cp.x, pose.y + s * bx + c * by - cp.y, h - cp.z];
            // camera coordinates = Rᵀ g
            let pc: Vec<f64> = (0..3).map(|j| r[0][j] * g[0] + r[1][j] * g[1] + r[2][j] * g[2]).collect();
            if pc[2] <= 1e-9 {
                continue;
            }
            let u = 1000.0 * pc[0] / pc[2] + 800.0;
            let v = 1000.0 * pc[1] / pc[2] + 450.0;
            lo = [lo[0].min(u), lo[1].min(v)];
            hi = [hi[0].max(u), hi[1].max(v)];
        }
    }
    let b = [lo[0].max(0.0), lo[1].max(0.0), hi[0].min(1600.0), hi[1].min(900.0)];
    (b[0] < b[2] && b[1] < b[3]).then_some(b)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn relative_pose_round_trips(subject in pose(), reference in pose()) {
        let rel = relative_pose(subject, reference);
        let back = compose(reference, rel);
        prop_assert!((back.x - subject.x).abs() < 1e-9);
        prop_assert!((back.y - subject.y).abs() < 1e-9);
        prop_assert!(ang_diff(back.yaw, subject.yaw) < 1e-12);
        prop_assert!(rel.yaw > -PI && rel.yaw <= PI);
    }

    #[test]
    fn heading_change_across_the_seam(start in -PI..PI, rate in -2.5..2.5f64, n in 2usize..12) {
        let yaws: Vec<f64> = (0..n).map(|i| normalize_angle(start + rate * i as f64)).collect();
        prop_assert!((heading_change(&yaws) - rate * (n - 1) as f64).abs() < 1e-9);
    }

    #[test]
    fn quadratic_motion_speed(a in 0.0..3.0f64, b in 0.5..15.0f64, dir in -PI..PI, dt in 0.1..1.0f64, n in 3usize..10) {
        // s(t) = a t² + b t along a fixed direction; central differences are exact
        let t: Vec<f64> = (0..n).map(|i| 1000.0 + i as f64 * dt).collect();
        let s = |ti: f64| a * (ti - 1000.0).powi(2) + b * (ti - 1000.0);
        let pos: Vec<[f64; 2]> = t.iter().map(|&ti| [s(ti) * dir.cos(), s(ti) * dir.sin()]).collect();
        let v = speed_profile(&pos, &t, &vec![None; n]);
        for i in 1..n - 1 {
            let exact = 2.0 * a * (t[i] - 1000.0) + b;
            prop_assert!((v[i] - exact).abs() < 1e-6, "i={} got {} want {}", i, v[i], exact);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn projection_matches_dense_sampling(
        verts in prop::collection::vec((-20.0..20.0f64, -20.0..20.0f64), 2..5),
        px in -30.0..30.0f64,
        py in -30.0..30.0f64,
    ) {
        let pts: Vec<[f64; 2]> = verts.iter().map(|v| [v.0, v.1]).collect();
        prop_assume!(pts.windows(2).all(|w| distance(w[0], w[1]) > 0.5));
        let p = [px, py];
        let got = project_to_polyline(p, &pts);
        let (d_oracle, s_oracle) = dense_nearest(p, &pts);
        prop_assert!((got.d.abs() - d_oracle).abs() <= 1e-3);
        // equidistant branches are legitimate ties; then the foot must still be nearest
        let foot_dist = distance(p, point_at_arclength(&pts, got.s));
        prop_assert!((got.s - s_oracle).abs() <= 2e-3 || (foot_dist - d_oracle).abs() <= 1e-3);
    }

    #[test]
    fn even_odd_agrees_with_winding_number(
        angles in prop::collection::vec(0.05..0.95f64, 3..9),
        radii_seed in prop::collection::vec(2.0..20.0f64, 8),
        px in -25.0..25.0f64,
        py in -25.0..25.0f64,
    ) {
        let poly = star(&angles, &radii_seed[..angles.len()]);
        prop_assume!(polygon_is_simple(&poly));
        let p = [px, py];
        let edge = (0..poly.len()).map(|i| seg_dist(p, poly[i], poly[(i + 1) % poly.len()])).fold(f64::INFINITY, f64::min);
        prop_assume!(edge > 1e-6);
        prop_assert_eq!(point_in_polygon(p, &poly), winding(p, &poly) != 0);
    }

    #[test]
    fn box_projection_matches_corner_oracle(
        cam_yaw in -PI..PI,
        bearing in -0.6..0.6f64,
        range in 4.0..60.0f64,
        agent_yaw in -PI..PI,
        l in 0.5..6.0f64,
        w in 0.5..2.5f64,
        h in 0.8..3.0f64,
    ) {
        let cam = camera(cam_yaw, 3.0, -2.0);
        let ang = cam_yaw + bearing;
        let pose = Pose2::new(3.0 + range * ang.cos(), -2.0 + range * ang.sin(), agent_yaw);
        let size = Size3 { length: l, width: w, height: h };
        let got = project_agent_to_camera(pose, size, &cam, 0).map(|p| p.box_px);
        let want = oracle_box(pose, size, &cam);
        match (got, want) {
            (Some(g), Some(o)) => for k in 0..4 { prop_assert!((g[k] - o[k]).abs() < 1e-6, "{:?} vs {:?}", g, o); },
            (None, None) => {}
            (g, o) => prop_assert!(false, "got {:?} oracle {:?}", g, o),
        }
    }
}

#[test]
fn orbit_visits_four_views() {
    let scene = orbit_scene();
    let va = assign_views(&scene, &["a1".to_string()], 0, 3);
    let per: Vec<Option<String>> = va.per_frame.iter().map(|r| r[0].clone()).collect();
    assert_eq!(
        per,
        vec![
            Some("CAM_FRONT".to_string()),
            Some("CAM_BACK_LEFT".to_string()),
            Some("CAM_BACK".to_string()),
            Some("CAM_BACK_RIGHT".to_string()),
        ]
    );
    assert_eq!(va.views.len(), 4);
    assert!(!va.unobserved);
}

#[test]
fn point_straight_ahead_projects_to_principal_point() {
    let cam = camera(0.3, 0.0, 0.0);
    let pose = Pose2::new(20.0 * 0.3f64.cos(), 20.0 * 0.3f64.sin(), 0.0);
    let size = Size3 { length: 1.0, width: 1.0, height: 3.0 };
    let p = project_agent_to_camera(pose, size, &cam, 0).unwrap();
    assert!((p.center_px[0] - 800.0).abs() < 1e-6);
    assert!((p.center_px[1] - 450.0).abs() < 1e-6);
}
