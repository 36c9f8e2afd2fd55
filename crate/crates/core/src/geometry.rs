//! Planar geometry and kinematics: rigid transforms, polyline and polygon
//! queries, lane association, speed and heading profiles, and pinhole
//! projection of agent boxes into scene cameras.

use std::f64::consts::PI;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::scene::{CameraModel, MapModel, Scene, Size3};

const EPS: f64 = 1e-9;

/// Wraps an angle into (−π, π].
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a % (2.0 * PI);
    if r <= -PI {
        r += 2.0 * PI;
    } else if r > PI {
        r -= 2.0 * PI;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Pose2 { x, y, yaw: normalize_angle(yaw) }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    /// Expresses a global point in this pose's body frame (x forward, y left).
    pub fn to_body(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.yaw.sin_cos();
        let dx = p[0] - self.x;
        let dy = p[1] - self.y;
        [c * dx + s * dy, -s * dx + c * dy]
    }

    pub fn from_body(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.yaw.sin_cos();
        [self.x + c * p[0] - s * p[1], self.y + s * p[0] + c * p[1]]
    }
}

/// `subject` expressed in `reference`'s body frame.
pub fn relative_pose(subject: Pose2, reference: Pose2) -> Pose2 {
    let [x, y] = reference.to_body(subject.position());
    Pose2::new(x, y, subject.yaw - reference.yaw)
}

/// Inverse of [`relative_pose`]: maps a body-frame pose back to global.
pub fn compose(reference: Pose2, relative: Pose2) -> Pose2 {
    let [x, y] = reference.from_body(relative.position());
    Pose2::new(x, y, reference.yaw + relative.yaw)
}

/// A global rigid motion of the plane: rotate by `angle` about the origin,
/// then translate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Se2 {
    pub angle: f64,
    pub tx: f64,
    pub ty: f64,
}

impl Se2 {
    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.angle.sin_cos();
        [c * p[0] - s * p[1] + self.tx, s * p[0] + c * p[1] + self.ty]
    }

    pub fn apply_yaw(&self, yaw: f64) -> f64 {
        normalize_angle(yaw + self.angle)
    }
}

/// Applies one rigid transform to every pose, map element and camera pose.
pub fn transform_scene(scene: &Scene, t: Se2) -> Scene {
    let mut out = scene.clone();
    let pts = |v: &mut Vec<[f64; 2]>| v.iter_mut().for_each(|p| *p = t.apply(*p));
    for e in &mut out.ego {
        [e.x, e.y] = t.apply([e.x, e.y]);
        e.yaw = t.apply_yaw(e.yaw);
    }
    for a in &mut out.agents {
        for s in &mut a.states {
            [s.x, s.y] = t.apply([s.x, s.y]);
            s.yaw = t.apply_yaw(s.yaw);
        }
    }
    for l in &mut out.map.lanes {
        pts(&mut l.centerline);
    }
    for b in &mut out.map.boundaries {
        pts(&mut b.polyline);
    }
    for c in &mut out.map.crosswalks {
        pts(&mut c.polygon);
    }
    for d in &mut out.map.drivable_area {
        pts(&mut d.polygon);
    }
    if let Some(cams) = &mut out.cameras {
        let rz = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), t.angle);
        for cam in cams {
            for p in &mut cam.poses {
                [p.x, p.y] = t.apply([p.x, p.y]);
                let q = rz * quat(&p.rotation);
                let q = q.quaternion();
                p.rotation = [q.w, q.i, q.j, q.k];
            }
        }
    }
    out
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn norm(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}

pub fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    norm(sub(a, b))
}

pub fn polyline_length(pts: &[[f64; 2]]) -> f64 {
    pts.windows(2).map(|w| distance(w[0], w[1])).sum()
}

/// Point at arclength `s`, clamped to the polyline ends.
pub fn point_at_arclength(pts: &[[f64; 2]], s: f64) -> [f64; 2] {
    let mut acc = 0.0;
    for w in pts.windows(2) {
        let len = distance(w[0], w[1]);
        if s <= acc + len && len > 0.0 {
            let t = ((s - acc) / len).clamp(0.0, 1.0);
            return [w[0][0] + t * (w[1][0] - w[0][0]), w[0][1] + t * (w[1][1] - w[0][1])];
        }
        acc += len;
    }
    *pts.last().expect("polyline has vertices")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolylineProjection {
    /// Arclength of the closest point.
    pub s: f64,
    /// Signed offset, positive left of the direction of travel.
    pub d: f64,
    pub segment_index: usize,
    pub foot: [f64; 2],
    /// Unit tangent of the segment holding the foot point.
    pub tangent: [f64; 2],
}

/// Closest point on a polyline (≥ 2 vertices). Ties go to the earliest
/// segment.
pub fn project_to_polyline(p: [f64; 2], pts: &[[f64; 2]]) -> PolylineProjection {
    assert!(pts.len() >= 2, "polyline needs at least two vertices");
    let mut best: Option<(f64, PolylineProjection)> = None;
    let mut acc = 0.0;
    for (i, w) in pts.windows(2).enumerate() {
        let seg = sub(w[1], w[0]);
        let len = norm(seg);
        if len == 0.0 {
            continue;
        }
        let u = [seg[0] / len, seg[1] / len];
        let t = dot(sub(p, w[0]), u).clamp(0.0, len);
        let foot = [w[0][0] + u[0] * t, w[0][1] + u[1] * t];
        let off = sub(p, foot);
        let dist = norm(off);
        let side = cross(u, off);
        let d = if dist == 0.0 { 0.0 } else if side >= 0.0 { dist } else { -dist };
        let cand = PolylineProjection { s: acc + t, d, segment_index: i, foot, tangent: u };
        if best.as_ref().is_none_or(|(bd, _)| dist < *bd) {
            best = Some((dist, cand));
        }
        acc += len;
    }
    best.map(|(_, p)| p).unwrap_or(PolylineProjection {
        s: 0.0,
        d: distance(p, pts[0]),
        segment_index: 0,
        foot: pts[0],
        tangent: [1.0, 0.0],
    })
}

fn on_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> bool {
    let ab = sub(b, a);
    let len = norm(ab);
    if len == 0.0 {
        return distance(p, a) <= EPS;
    }
    let t = dot(sub(p, a), ab) / (len * len);
    if !(-EPS..=1.0 + EPS).contains(&t) {
        return false;
    }
    (cross(ab, sub(p, a)) / len).abs() <= EPS
}

/// Even-odd rule; points on the boundary count as inside.
pub fn point_in_polygon(p: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if on_segment(p, a, b) {
            return true;
        }
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    cross(sub(b, a), sub(c, a))
}

/// Closed-segment intersection test (touching counts).
pub fn segments_intersect(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0)) && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0)) {
        return true;
    }
    (o1 == 0.0 && on_segment(c, a, b))
        || (o2 == 0.0 && on_segment(d, a, b))
        || (o3 == 0.0 && on_segment(a, c, d))
        || (o4 == 0.0 && on_segment(b, c, d))
}

/// True when no two non-adjacent edges touch.
pub fn polygon_is_simple(poly: &[[f64; 2]]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if a == b {
            return false;
        }
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            let (c, d) = (poly[j], poly[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

/// Does the segment `a→b` touch the polygon (either endpoint inside, or an
/// edge crossing)?
pub fn segment_touches_polygon(a: [f64; 2], b: [f64; 2], poly: &[[f64; 2]]) -> bool {
    if point_in_polygon(a, poly) || point_in_polygon(b, poly) {
        return true;
    }
    let n = poly.len();
    (0..n).any(|i| segments_intersect(a, b, poly[i], poly[(i + 1) % n]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaneAssignConfig {
    pub max_lateral: f64,
    pub max_heading_deg: f64,
}

impl Default for LaneAssignConfig {
    fn default() -> Self {
        LaneAssignConfig { max_lateral: 3.0, max_heading_deg: 60.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneCoordinate {
    pub lane_id: String,
    pub s: f64,
    pub d: f64,
}

/// Lane with the smallest |d| among lanes passing the lateral and heading
/// gates; equal |d| resolves to the smaller lane id.
pub fn assign_lane(pose: Pose2, map: &MapModel, cfg: &LaneAssignConfig) -> Option<LaneCoordinate> {
    let max_heading = cfg.max_heading_deg.to_radians();
    let mut best: Option<(f64, &str, PolylineProjection)> = None;
    for lane in &map.lanes {
        if lane.centerline.len() < 2 {
            continue;
        }
        let proj = project_to_polyline(pose.position(), &lane.centerline);
        if proj.d.abs() > cfg.max_lateral {
            continue;
        }
        let tangent_yaw = proj.tangent[1].atan2(proj.tangent[0]);
        if normalize_angle(pose.yaw - tangent_yaw).abs() > max_heading {
            continue;
        }
        let key = proj.d.abs();
        let better = match &best {
            None => true,
            Some((bd, bid, _)) => key < *bd || (key == *bd && lane.lane_id.as_str() < *bid),
        };
        if better {
            best = Some((key, lane.lane_id.as_str(), proj));
        }
    }
    best.map(|(_, id, p)| LaneCoordinate { lane_id: id.to_string(), s: p.s, d: p.d })
}

/// Per-state speeds: stored value when present, otherwise central finite
/// differences of position over actual timestamp deltas (one-sided at the
/// ends).
pub fn speed_profile(positions: &[[f64; 2]], times_s: &[f64], stored: &[Option<f64>]) -> Vec<f64> {
    let n = positions.len();
    (0..n)
        .map(|i| {
            if let Some(v) = stored.get(i).copied().flatten() {
                return v.max(0.0);
            }
            if n < 2 {
                return 0.0;
            }
            let (a, b) = if i == 0 {
                (0, 1)
            } else if i == n - 1 {
                (n - 2, n - 1)
            } else {
                (i - 1, i + 1)
            };
            let dt = (times_s[b] - times_s[a]).abs();
            if dt <= 0.0 {
                0.0
            } else {
                distance(positions[b], positions[a]) / dt
            }
        })
        .collect()
}

/// Signed velocity along each state's heading, from position differences.
/// Negative values mean the body moves backwards.
pub fn longitudinal_velocity(positions: &[[f64; 2]], yaws: &[f64], times_s: &[f64]) -> Vec<f64> {
    let n = positions.len();
    (0..n)
        .map(|i| {
            if n < 2 {
                return 0.0;
            }
            let (a, b) = if i == 0 {
                (0, 1)
            } else if i == n - 1 {
                (n - 2, n - 1)
            } else {
                (i - 1, i + 1)
            };
            let dt = times_s[b] - times_s[a];
            if dt == 0.0 {
                return 0.0;
            }
            let v = [(positions[b][0] - positions[a][0]) / dt, (positions[b][1] - positions[a][1]) / dt];
            let (s, c) = yaws[i].sin_cos();
            v[0] * c + v[1] * s
        })
        .collect()
}

/// Accumulated signed heading change; left turns positive.
pub fn heading_change(yaws: &[f64]) -> f64 {
    yaws.windows(2).map(|w| normalize_angle(w[1] - w[0])).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraProjection {
    pub center_px: [f64; 2],
    /// `[u1, v1, u2, v2]`, clipped to the image.
    pub box_px: [f64; 4],
}

pub(crate) fn quat(r: &[f64; 4]) -> UnitQuaternion<f64> {
    UnitQuaternion::from_quaternion(Quaternion::new(r[0], r[1], r[2], r[3]))
}

struct CameraFrame {
    rot: UnitQuaternion<f64>,
    origin: Vector3<f64>,
}

impl CameraFrame {
    fn of(camera: &CameraModel, frame: usize) -> Option<Self> {
        let p = camera.pose_at(frame)?;
        Some(CameraFrame { rot: quat(&p.rotation), origin: Vector3::new(p.x, p.y, p.z) })
    }

    fn to_camera(&self, p: Vector3<f64>) -> Vector3<f64> {
        self.rot.inverse_transform_vector(&(p - self.origin))
    }
}

/// The 8 corners of an upright box: footprint at z = 0, top at z = height.
pub fn box_corners(pose: Pose2, size: Size3) -> [[f64; 3]; 8] {
    let hl = size.length / 2.0;
    let hw = size.width / 2.0;
    let mut out = [[0.0; 3]; 8];
    let mut k = 0;
    for (lx, ly) in [(hl, hw), (hl, -hw), (-hl, -hw), (-hl, hw)] {
        let [x, y] = pose.from_body([lx, ly]);
        out[k] = [x, y, 0.0];
        out[k + 4] = [x, y, size.height];
        k += 1;
    }
    out
}

fn pixel(camera: &CameraModel, pc: Vector3<f64>) -> [f64; 2] {
    let k = &camera.intrinsics;
    [k.fx * pc.x / pc.z + k.cx, k.fy * pc.y / pc.z + k.cy]
}

/// Pinhole projection of an agent's upright box. `None` when the box center
/// lies behind the image plane or the box misses the image entirely.
pub fn project_agent_to_camera(pose: Pose2, size: Size3, camera: &CameraModel, frame: usize) -> Option<CameraProjection> {
    let cf = CameraFrame::of(camera, frame)?;
    let center = cf.to_camera(Vector3::new(pose.x, pose.y, size.height / 2.0));
    if center.z <= EPS {
        return None;
    }
    let center_px = pixel(camera, center);
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for c in box_corners(pose, size) {
        let pc = cf.to_camera(Vector3::new(c[0], c[1], c[2]));
        if pc.z <= EPS {
            continue;
        }
        let px = pixel(camera, pc);
        for k in 0..2 {
            lo[k] = lo[k].min(px[k]);
            hi[k] = hi[k].max(px[k]);
        }
    }
    let (w, h) = (camera.width as f64, camera.height as f64);
    let bx = [lo[0].max(0.0), lo[1].max(0.0), hi[0].min(w), hi[1].min(h)];
    if !(bx[0] < bx[2] && bx[1] < bx[3]) {
        return None;
    }
    Some(CameraProjection { center_px, box_px: bx })
}

/// Angle between a camera's optical axis and the ray to a 3D point.
pub fn angle_to_optical_axis(camera: &CameraModel, frame: usize, p: [f64; 3]) -> Option<f64> {
    let cf = CameraFrame::of(camera, frame)?;
    let v = cf.to_camera(Vector3::new(p[0], p[1], p[2]));
    let n = v.norm();
    if n == 0.0 {
        return None;
    }
    Some((v.z / n).clamp(-1.0, 1.0).acos())
}

/// Camera that sees the agent center inside its image with the smallest
/// angular offset from the optical axis.
pub fn best_view<'a>(pose: Pose2, size: Size3, cameras: &'a [CameraModel], frame: usize) -> Option<(&'a CameraModel, CameraProjection)> {
    let mut best: Option<(f64, &CameraModel, CameraProjection)> = None;
    for cam in cameras {
        let Some(proj) = project_agent_to_camera(pose, size, cam, frame) else {
            continue;
        };
        let [u, v] = proj.center_px;
        if !(u >= 0.0 && u < cam.width as f64 && v >= 0.0 && v < cam.height as f64) {
            continue;
        }
        let Some(angle) = angle_to_optical_axis(cam, frame, [pose.x, pose.y, size.height / 2.0]) else {
            continue;
        };
        let better = match &best {
            None => true,
            Some((ba, bc, _)) => angle < *ba || (angle == *ba && cam.name < bc.name),
        };
        if better {
            best = Some((angle, cam, proj));
        }
    }
    best.map(|(_, c, p)| (c, p))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ViewAssignment {
    /// For each frame of the window, the chosen camera per subject agent
    /// (`None` when no camera sees it).
    pub per_frame: Vec<Vec<Option<String>>>,
    /// Ordered unique camera names across frames and agents.
    pub views: Vec<String>,
    pub unobserved: bool,
}

pub fn assign_views(scene: &Scene, agent_ids: &[String], frame_start: usize, frame_end: usize) -> ViewAssignment {
    let cams = scene.cameras();
    let mut out = ViewAssignment::default();
    for frame in frame_start..=frame_end {
        let mut row = Vec::with_capacity(agent_ids.len());
        for id in agent_ids {
            let pick = scene.agent(id).and_then(|track| {
                let st = track.state_at(frame)?;
                best_view(st.pose(), track.size, cams, frame).map(|(c, _)| c.name.clone())
            });
            if let Some(name) = &pick {
                if !out.views.contains(name) {
                    out.views.push(name.clone());
                }
            }
            row.push(pick);
        }
        out.per_frame.push(row);
    }
    out.unobserved = out.views.is_empty();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{CameraPose, Intrinsics};
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn identity_relative_pose() {
        let p = Pose2::new(3.0, -2.0, 0.7);
        let r = relative_pose(p, p);
        assert!(r.x.abs() < 1e-12 && r.y.abs() < 1e-12 && r.yaw.abs() < 1e-12);
    }

    #[test]
    fn north_is_ahead_when_facing_north() {
        let reference = Pose2::new(1.0, 1.0, FRAC_PI_2);
        let subject = Pose2::new(1.0, 6.0, 0.3);
        let r = relative_pose(subject, reference);
        assert!((r.x - 5.0).abs() < 1e-12);
        assert!(r.y.abs() < 1e-12);
        assert!((r.yaw - (0.3 - FRAC_PI_2)).abs() < 1e-12);
    }

    #[test]
    fn normalize_keeps_pi_and_wraps_minus_pi() {
        assert_eq!(normalize_angle(PI), PI);
        assert!((normalize_angle(-PI) - PI).abs() < 1e-15);
        assert!((normalize_angle(3.0 * PI) - PI).abs() < 1e-12);
    }

    #[test]
    fn projection_on_first_vertex_and_left_of_midpoint() {
        let line = [[0.0, 0.0], [10.0, 0.0]];
        let p = project_to_polyline([0.0, 0.0], &line);
        assert_eq!((p.s, p.d), (0.0, 0.0));
        let p = project_to_polyline([5.0, 2.0], &line);
        assert_eq!((p.s, p.d), (5.0, 2.0));
        let p = project_to_polyline([5.0, -2.0], &line);
        assert_eq!(p.d, -2.0);
    }

    #[test]
    fn polygon_membership_basics() {
        let quad = [[0.0, 0.0], [4.0, 0.0], [4.0, 2.0], [0.0, 2.0]];
        assert!(point_in_polygon([2.0, 1.0], &quad));
        assert!(point_in_polygon([4.0, 1.0], &quad));
        assert!(!point_in_polygon([100.0, 100.0], &quad));
    }

    #[test]
    fn bow_tie_is_not_simple() {
        assert!(!polygon_is_simple(&[[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]));
        assert!(polygon_is_simple(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]));
    }

    fn two_lane_map(y0: f64, y1: f64, ids: (&str, &str)) -> MapModel {
        let lane = |id: &str, y: f64| crate::scene::Lane {
            lane_id: id.into(),
            centerline: vec![[-50.0, y], [50.0, y]],
            left_boundary_id: None,
            right_boundary_id: None,
            successors: vec![],
            adjacent_left: None,
            adjacent_right: None,
        };
        MapModel { lanes: vec![lane(ids.0, y0), lane(ids.1, y1)], ..Default::default() }
    }

    #[test]
    fn lane_assignment_gates_and_tie_break() {
        let cfg = LaneAssignConfig::default();
        let map = two_lane_map(0.0, 10.0, ("b", "a"));
        let on = assign_lane(Pose2::new(3.0, 0.0, 0.0), &map, &cfg).unwrap();
        assert_eq!(on.lane_id, "b");
        assert!(on.d.abs() < 1e-12);
        assert!(assign_lane(Pose2::new(0.0, -10.0, 0.0), &map, &cfg).is_none());
        assert!(assign_lane(Pose2::new(3.0, 0.0, FRAC_PI_2), &map, &cfg).is_none());

        let tie = two_lane_map(1.5, -1.5, ("lane_b", "lane_a"));
        let got = assign_lane(Pose2::new(0.0, 0.0, 0.0), &tie, &cfg).unwrap();
        assert_eq!(got.lane_id, "lane_a");
    }

    #[test]
    fn speed_profiles() {
        let t: Vec<f64> = (0..6).map(|i| i as f64 * 0.5).collect();
        let still = vec![[1.0, 1.0]; 6];
        assert!(speed_profile(&still, &t, &[None; 6]).iter().all(|v| *v == 0.0));
        let moving: Vec<[f64; 2]> = (0..6).map(|i| [5.0 * i as f64, 0.0]).collect();
        for v in speed_profile(&moving, &t, &[None; 6]) {
            assert!((v - 10.0).abs() < 1e-12);
        }
        let stored = speed_profile(&moving, &t, &[Some(3.0); 6]);
        assert!(stored.iter().all(|v| *v == 3.0));
    }

    #[test]
    fn heading_change_basics() {
        assert_eq!(heading_change(&[0.4; 5]), 0.0);
        let quarter: Vec<f64> = (0..6).map(|i| FRAC_PI_2 * i as f64 / 5.0).collect();
        assert!((heading_change(&quarter) - FRAC_PI_2).abs() < 1e-12);
    }

    fn forward_camera() -> CameraModel {
        // camera axes: x right, y down, z forward; facing global +x.
        let r = nalgebra::Rotation3::from_matrix_unchecked(nalgebra::Matrix3::new(
            0.0, 0.0, 1.0, //
            -1.0, 0.0, 0.0, //
            0.0, -1.0, 0.0,
        ));
        let q = UnitQuaternion::from_rotation_matrix(&r);
        CameraModel {
            name: "CAM_FRONT".into(),
            intrinsics: Intrinsics { fx: 1000.0, fy: 1000.0, cx: 800.0, cy: 450.0 },
            width: 1600,
            height: 900,
            poses: vec![CameraPose { frame: 0, x: 0.0, y: 0.0, z: 0.75, rotation: [q.w, q.i, q.j, q.k] }],
            image_paths: None,
        }
    }

    #[test]
    fn optical_axis_and_behind() {
        let cam = forward_camera();
        let size = Size3 { length: 4.0, width: 2.0, height: 1.5 };
        let p = project_agent_to_camera(Pose2::new(10.0, 0.0, 0.0), size, &cam, 0).unwrap();
        assert!((p.center_px[0] - 800.0).abs() < 1e-9);
        assert!(project_agent_to_camera(Pose2::new(-10.0, 0.0, 0.0), size, &cam, 0).is_none());
        assert!(project_agent_to_camera(Pose2::new(10.0, 0.0, 0.0), size, &cam, 3).is_none());
    }
}
