//! Window detectors. Each is a pure function of one window's kinematics and
//! returns the verdict together with a strength used to pick the best window
//! when overlapping windows of the same (type, subjects) are merged.

use std::collections::{HashSet, VecDeque};

use crate::geometry::{
    distance, heading_change, normalize_angle, point_in_polygon, project_to_polyline, segment_touches_polygon,
    segments_intersect, LaneCoordinate, Pose2,
};
use crate::scene::MapModel;

use super::tracks::WindowTrack;
use super::MinerConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Longitudinal {
    Accelerate,
    Decelerate,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Turn {
    Left,
    Right,
    UTurn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FollowLead {
    Follow,
    Lead,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OvertakePass {
    Overtake,
    Pass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StationaryRelation {
    InFront,
    Behind,
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MovingSide {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpeedClass {
    Stand,
    Walk,
    Run,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WalkPair {
    Alongside,
    Opposite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PedestrianActions {
    pub speed: Option<SpeedClass>,
    pub cross: bool,
    pub jaywalk: bool,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn std_dev(v: &[f64]) -> f64 {
    let m = mean(v);
    mean(&v.iter().map(|x| (x - m) * (x - m)).collect::<Vec<_>>()).sqrt()
}

fn min(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

fn longest_run(v: &[f64], pred: impl Fn(f64) -> bool) -> usize {
    let mut best = 0;
    let mut cur = 0;
    for &x in v {
        if pred(x) {
            cur += 1;
            best = best.max(cur);
        } else {
            cur = 0;
        }
    }
    best
}

/// Stop > decelerate > accelerate. Strength is |Δv|.
pub fn detect_longitudinal(speeds: &[f64], cfg: &MinerConfig) -> Option<(Longitudinal, f64)> {
    let n = speeds.len();
    if n < 2 {
        return None;
    }
    let dv = speeds[n - 1] - speeds[0];
    let kind = if speeds[0] >= cfg.v_moving && speeds[n - 2] < cfg.v_stationary && speeds[n - 1] < cfg.v_stationary {
        Longitudinal::Stop
    } else if dv <= cfg.dv_decel && speeds[n - 1] >= cfg.v_stationary {
        Longitudinal::Decelerate
    } else if dv >= cfg.dv_accel {
        Longitudinal::Accelerate
    } else {
        return None;
    };
    Some((kind, dv.abs()))
}

/// Strength is |Δheading| in degrees.
pub fn detect_turn(poses: &[Pose2], speeds: &[f64], cfg: &MinerConfig) -> Option<(Turn, f64)> {
    if poses.len() < 2 || !speeds.iter().any(|&v| v >= cfg.v_stationary) {
        return None;
    }
    let disp = distance(poses[0].position(), poses[poses.len() - 1].position());
    if disp < cfg.turn_min_displacement {
        return None;
    }
    let yaws: Vec<f64> = poses.iter().map(|p| p.yaw).collect();
    let dh = heading_change(&yaws).to_degrees();
    let kind = if dh.abs() >= cfg.uturn_min {
        Turn::UTurn
    } else if (cfg.turn_min..=cfg.turn_max).contains(&dh) {
        Turn::Left
    } else if (-cfg.turn_max..=-cfg.turn_min).contains(&dh) {
        Turn::Right
    } else {
        return None;
    };
    Some((kind, dh.abs()))
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Lane id changes between adjacent lanes, the shared boundary (when the map
/// names one) is crossed, and the heading stays roughly constant. Strength
/// favors windows whose crossing sits near the middle.
pub fn detect_lane_change(
    poses: &[Pose2],
    lanes: &[Option<LaneCoordinate>],
    map: &MapModel,
    cfg: &MinerConfig,
) -> Option<f64> {
    let (Some(Some(first)), Some(Some(last))) = (lanes.first(), lanes.last()) else {
        return None;
    };
    if first.lane_id == last.lane_id {
        return None;
    }
    let l1 = map.lane(&first.lane_id)?;
    let l2 = map.lane(&last.lane_id)?;
    let adjacent = l1.adjacent_left.as_deref() == Some(&l2.lane_id)
        || l1.adjacent_right.as_deref() == Some(&l2.lane_id)
        || l2.adjacent_left.as_deref() == Some(&l1.lane_id)
        || l2.adjacent_right.as_deref() == Some(&l1.lane_id);
    if !adjacent {
        return None;
    }
    let yaws: Vec<f64> = poses.iter().map(|p| p.yaw).collect();
    if heading_change(&yaws).to_degrees().abs() >= cfg.lc_heading_max {
        return None;
    }
    let ids1 = [&l1.left_boundary_id, &l1.right_boundary_id];
    let shared = [&l2.left_boundary_id, &l2.right_boundary_id]
        .into_iter()
        .flatten()
        .find(|id| ids1.iter().any(|x| x.as_deref() == Some(id.as_str())))
        .and_then(|id| map.boundary(id));
    let center = (poses.len() - 1) as f64 / 2.0;
    match shared {
        Some(b) if b.polyline.len() >= 2 => {
            let signs: Vec<i8> = poses.iter().map(|p| sign(project_to_polyline(p.position(), &b.polyline).d)).collect();
            let s0 = signs[0];
            let s1 = *signs.last().unwrap();
            if s0 == 0 || s1 == 0 || s0 == s1 {
                return None;
            }
            let k = signs.iter().position(|&s| s != s0).unwrap_or(0) as f64 - 0.5;
            Some(-(k - center).abs())
        }
        _ => Some(0.0),
    }
}

/// Body-frame longitudinal velocity at or below −v_stationary for enough
/// consecutive samples.
pub fn detect_reverse(vlong: &[f64], cfg: &MinerConfig) -> Option<f64> {
    let run = longest_run(vlong, |v| v <= -cfg.v_stationary);
    (run >= cfg.reverse_frames).then(|| -min(vlong))
}

fn lane_reaches(map: &MapModel, from: &str, to: &str, hops: usize) -> bool {
    let mut seen = HashSet::new();
    let mut queue = VecDeque::from([(from.to_string(), 0usize)]);
    while let Some((id, d)) = queue.pop_front() {
        if id == to {
            return true;
        }
        if d == hops || !seen.insert(id.clone()) {
            continue;
        }
        if let Some(l) = map.lane(&id) {
            for s in &l.successors {
                queue.push_back((s.clone(), d + 1));
            }
        }
    }
    false
}

/// Same lane, or one reaches the other through successor links within
/// `hops`.
pub fn lanes_chained(map: &MapModel, a: &str, b: &str, hops: usize) -> bool {
    a == b || lane_reaches(map, a, b, hops) || lane_reaches(map, b, a, hops)
}

/// `others[t]` holds the positions of every third agent at window frame `t`.
/// Strength is −std(gap).
pub fn detect_follow_lead(
    a: &WindowTrack,
    b: &WindowTrack,
    others: &[Vec<[f64; 2]>],
    map: &MapModel,
    cfg: &MinerConfig,
) -> Option<(FollowLead, f64)> {
    let n = a.poses.len();
    if min(&a.speeds) < cfg.v_moving || min(&b.speeds) < cfg.v_moving {
        return None;
    }
    let rel: Vec<[f64; 2]> = (0..n).map(|t| b.poses[t].to_body(a.poses[t].position())).collect();
    let kind = if rel.iter().all(|r| r[0] < 0.0) {
        FollowLead::Follow
    } else if rel.iter().all(|r| r[0] > 0.0) {
        FollowLead::Lead
    } else {
        return None;
    };
    let gaps: Vec<f64> = rel.iter().map(|r| r[0].abs()).collect();
    if gaps.iter().any(|g| *g < cfg.follow_gap[0] || *g > cfg.follow_gap[1]) {
        return None;
    }
    for t in 0..n {
        let (Some(la), Some(lb)) = (&a.lanes[t], &b.lanes[t]) else {
            return None;
        };
        if !lanes_chained(map, &la.lane_id, &lb.lane_id, cfg.follow_max_hops) {
            return None;
        }
    }
    let dv: Vec<f64> = (0..n).map(|t| (a.speeds[t] - b.speeds[t]).abs()).collect();
    if mean(&dv) > cfg.follow_dv {
        return None;
    }
    let sd = std_dev(&gaps);
    if sd > cfg.follow_gap_std {
        return None;
    }
    let half = cfg.lane_width / 2.0;
    for (t, row) in others.iter().enumerate().take(n) {
        let xa = rel[t][0];
        for p in row {
            let c = b.poses[t].to_body(*p);
            let between = if xa < 0.0 { c[0] > xa && c[0] < 0.0 } else { c[0] < xa && c[0] > 0.0 };
            if between && c[1].abs() <= half {
                return None;
            }
        }
    }
    Some((kind, -sd))
}

/// A sweeps past B in an adjacent lateral band. Strength prefers windows
/// centered on the crossing.
pub fn detect_overtake_pass(a: &WindowTrack, b: &WindowTrack, cfg: &MinerConfig) -> Option<(OvertakePass, f64)> {
    let n = a.poses.len();
    let rel: Vec<[f64; 2]> = (0..n).map(|t| b.poses[t].to_body(a.poses[t].position())).collect();
    let [lo, hi] = cfg.adjacent_lateral;
    if rel.iter().any(|r| r[1].abs() < lo || r[1].abs() > hi) {
        return None;
    }
    let half = (a.size.length + b.size.length) / 2.0;
    let first_behind = rel.iter().position(|r| r[0] < -half)?;
    if !rel[first_behind..].iter().any(|r| r[0] > half) {
        return None;
    }
    if min(&a.speeds) < cfg.v_moving {
        return None;
    }
    let kind = if min(&b.speeds) >= cfg.v_moving {
        OvertakePass::Overtake
    } else if max(&b.speeds) < cfg.v_stationary {
        OvertakePass::Pass
    } else {
        return None;
    };
    Some((kind, -(rel[0][0] + rel[n - 1][0]).abs()))
}

/// Mean positions over the window; a third agent blocks the relation when
/// its center sits strictly between A and B within `between_tolerance` of
/// the connecting segment. Strength is −distance.
pub fn detect_stationary_relation(
    a: &WindowTrack,
    b: &WindowTrack,
    others: &[[f64; 2]],
    cfg: &MinerConfig,
) -> Option<(StationaryRelation, f64)> {
    if max(&a.speeds) >= cfg.v_stationary || max(&b.speeds) >= cfg.v_stationary {
        return None;
    }
    let n = a.poses.len() as f64;
    let rel: Vec<[f64; 2]> = a.poses.iter().zip(&b.poses).map(|(pa, pb)| pb.to_body(pa.position())).collect();
    let x = rel.iter().map(|r| r[0]).sum::<f64>() / n;
    let y = rel.iter().map(|r| r[1]).sum::<f64>() / n;
    let longitudinal = (y.abs() < cfg.stationary_front_lateral && x.abs() < cfg.stationary_gap_long && x != 0.0)
        .then(|| if x > 0.0 { StationaryRelation::InFront } else { StationaryRelation::Behind });
    let lateral = (x.abs() < cfg.stationary_side_long && y.abs() < cfg.stationary_gap_lat && y != 0.0)
        .then(|| if y > 0.0 { StationaryRelation::Left } else { StationaryRelation::Right });
    let kind = match (longitudinal, lateral) {
        (Some(l), Some(s)) => {
            if x.abs() >= y.abs() {
                l
            } else {
                s
            }
        }
        (Some(l), None) => l,
        (None, Some(s)) => s,
        (None, None) => return None,
    };
    let pa = mean_position(&a.poses);
    let pb = mean_position(&b.poses);
    if others.iter().any(|c| strictly_between(*c, pa, pb, cfg.between_tolerance)) {
        return None;
    }
    Some((kind, -distance(pa, pb)))
}

fn mean_position(poses: &[Pose2]) -> [f64; 2] {
    let n = poses.len() as f64;
    [poses.iter().map(|p| p.x).sum::<f64>() / n, poses.iter().map(|p| p.y).sum::<f64>() / n]
}

fn strictly_between(c: [f64; 2], a: [f64; 2], b: [f64; 2], tol: f64) -> bool {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    if len2 == 0.0 {
        return false;
    }
    let t = ((c[0] - a[0]) * ab[0] + (c[1] - a[1]) * ab[1]) / len2;
    if t <= 0.0 || t >= 1.0 {
        return false;
    }
    let foot = [a[0] + t * ab[0], a[1] + t * ab[1]];
    distance(c, foot) <= tol
}

/// Parallel travel with a constant-sign lateral offset. Strength is
/// −mean|x|.
pub fn detect_moving_side(a: &WindowTrack, b: &WindowTrack, cfg: &MinerConfig) -> Option<(MovingSide, f64)> {
    if min(&a.speeds) < cfg.v_moving || min(&b.speeds) < cfg.v_moving {
        return None;
    }
    let n = a.poses.len();
    let mut xs = Vec::with_capacity(n);
    let mut side = 0i8;
    for t in 0..n {
        let dh = normalize_angle(a.poses[t].yaw - b.poses[t].yaw).to_degrees().abs();
        if dh > cfg.moving_heading_max {
            return None;
        }
        let r = b.poses[t].to_body(a.poses[t].position());
        if r[0].abs() >= cfg.moving_long_max || r[1].abs() > cfg.adjacent_lateral[1] {
            return None;
        }
        let s = sign(r[1]);
        if s == 0 || (side != 0 && s != side) {
            return None;
        }
        side = s;
        xs.push(r[0].abs());
    }
    let kind = if side > 0 { MovingSide::Left } else { MovingSide::Right };
    Some((kind, -mean(&xs)))
}

fn on_road(p: [f64; 2], map: &MapModel) -> bool {
    map.drivable_area.iter().any(|d| point_in_polygon(p, &d.polygon))
}

pub fn detect_pedestrian_action(positions: &[[f64; 2]], speeds: &[f64], map: &MapModel, cfg: &MinerConfig) -> PedestrianActions {
    let speed = if speeds.iter().all(|&v| v < cfg.ped_stand) {
        Some(SpeedClass::Stand)
    } else if longest_run(speeds, |v| v >= cfg.ped_run) >= cfg.ped_run_frames {
        Some(SpeedClass::Run)
    } else if (cfg.ped_stand..=cfg.ped_run).contains(&median(speeds)) {
        Some(SpeedClass::Walk)
    } else {
        None
    };
    let touches_crosswalk = positions
        .windows(2)
        .any(|w| map.crosswalks.iter().any(|c| segment_touches_polygon(w[0], w[1], &c.polygon)));
    let crosses_centerline = positions.windows(2).any(|w| {
        let mid = [(w[0][0] + w[1][0]) / 2.0, (w[0][1] + w[1][1]) / 2.0];
        on_road(mid, map)
            && map
                .lanes
                .iter()
                .any(|l| l.centerline.windows(2).any(|c| segments_intersect(w[0], w[1], c[0], c[1])))
    });
    let cross = touches_crosswalk && crosses_centerline;
    let road: Vec<[f64; 2]> = positions.iter().copied().filter(|p| on_road(*p, map)).collect();
    let jaywalk = !cross
        && speed != Some(SpeedClass::Stand)
        && road.len() >= 2
        && !road.iter().any(|p| map.crosswalks.iter().any(|c| point_in_polygon(*p, &c.polygon)));
    PedestrianActions { speed, cross, jaywalk }
}

fn densify(path: &[[f64; 2]], step: f64) -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    for w in path.windows(2) {
        let d = distance(w[0], w[1]);
        let k = (d / step).ceil().max(1.0) as usize;
        for i in 0..k {
            let t = i as f64 / k as f64;
            out.push([w[0][0] + t * (w[1][0] - w[0][0]), w[0][1] + t * (w[1][1] - w[0][1])]);
        }
    }
    if let Some(last) = path.last() {
        out.push(*last);
    }
    out
}

/// V holds still through the second half of the window (or stops) while the
/// pedestrian path enters V's lane corridor ahead of it. Without a lane the
/// corridor is taken in V's body frame. Strength is −distance to the nearest
/// corridor hit.
pub fn detect_wait_ped_cross(
    v: &WindowTrack,
    v_stops: bool,
    ped: &[[f64; 2]],
    map: &MapModel,
    cfg: &MinerConfig,
) -> Option<f64> {
    let n = v.speeds.len();
    let holds = v.speeds[n / 2..].iter().all(|&s| s < cfg.v_stationary);
    if !(holds || v_stops) {
        return None;
    }
    let half = cfg.lane_width / 2.0;
    let last = v.poses[n - 1];
    let lane = v.lanes[n - 1].as_ref().and_then(|c| map.lane(&c.lane_id).map(|l| (c, l)));
    let mut best: Option<f64> = None;
    for p in densify(ped, 0.1) {
        let ahead = match lane {
            Some((coord, l)) => {
                let pr = project_to_polyline(p, &l.centerline);
                let ds = pr.s - coord.s;
                (pr.d.abs() <= half && ds > 0.0 && ds <= cfg.wait_ped_lookahead).then_some(ds)
            }
            None => {
                let r = last.to_body(p);
                (r[1].abs() <= half && r[0] > 0.0 && r[0] <= cfg.wait_ped_lookahead).then_some(r[0])
            }
        };
        if let Some(d) = ahead {
            best = Some(best.map_or(d, |b: f64| b.min(d)));
        }
    }
    best.map(|d| -d)
}

/// Pedestrian pair relations. Symmetric; strength is −minimum distance.
pub fn detect_walk_pair(
    a: &WindowTrack,
    b: &WindowTrack,
    cfg: &MinerConfig,
) -> Option<(WalkPair, f64)> {
    if median(&a.speeds) < cfg.ped_stand || median(&b.speeds) < cfg.ped_stand {
        return None;
    }
    let n = a.poses.len();
    let dists: Vec<f64> = (0..n).map(|t| distance(a.poses[t].position(), b.poses[t].position())).collect();
    let dh: Vec<f64> = (0..n)
        .map(|t| normalize_angle(a.poses[t].yaw - b.poses[t].yaw).to_degrees().abs())
        .collect();
    let dmin = min(&dists);
    if dh.iter().all(|&h| h <= cfg.pair_heading_alongside) && dists.iter().all(|&d| d <= cfg.pair_dist) {
        return Some((WalkPair::Alongside, -dmin));
    }
    if dh.iter().all(|&h| h >= cfg.pair_heading_opposite) && dmin <= cfg.pair_dist {
        let x0 = b.poses[0].to_body(a.poses[0].position())[0];
        let x1 = b.poses[n - 1].to_body(a.poses[n - 1].position())[0];
        if sign(x0) * sign(x1) < 0 {
            return Some((WalkPair::Opposite, -dmin));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Size3;
    use std::f64::consts::PI;

    const CAR: Size3 = Size3 { length: 4.5, width: 1.9, height: 1.6 };

    fn track(poses: Vec<Pose2>, speeds: Vec<f64>) -> WindowTrack {
        let n = poses.len();
        WindowTrack { poses, speeds, vlong: vec![0.0; n], lanes: vec![None; n], size: CAR }
    }

    fn straight(x0: f64, y: f64, v: f64) -> WindowTrack {
        track((0..6).map(|i| Pose2::new(x0 + v * 0.5 * i as f64, y, 0.0)).collect(), vec![v; 6])
    }

    #[test]
    fn longitudinal_profiles() {
        let cfg = MinerConfig::default();
        assert_eq!(detect_longitudinal(&[8.0; 6], &cfg), None);
        let stop = detect_longitudinal(&[8.0, 6.0, 4.0, 2.0, 0.3, 0.2], &cfg).unwrap();
        assert_eq!(stop.0, Longitudinal::Stop);
        let acc = detect_longitudinal(&[2.0, 3.0, 4.0, 5.0, 6.0, 7.0], &cfg).unwrap();
        assert_eq!(acc.0, Longitudinal::Accelerate);
        let dec = detect_longitudinal(&[9.0, 8.0, 7.0, 6.0, 5.0, 4.0], &cfg).unwrap();
        assert_eq!(dec.0, Longitudinal::Decelerate);
    }

    fn arc(total_deg: f64, v: f64) -> Vec<Pose2> {
        let th = total_deg.to_radians();
        let r = v * 2.5 / th.abs();
        (0..6)
            .map(|i| {
                let yaw = th * i as f64 / 5.0;
                let s = th.signum();
                Pose2::new(r * yaw.abs().sin(), s * r * (1.0 - yaw.cos()), yaw)
            })
            .collect()
    }

    #[test]
    fn turn_sign_convention() {
        let cfg = MinerConfig::default();
        assert_eq!(detect_turn(&arc(90.0, 6.0), &[6.0; 6], &cfg).unwrap().0, Turn::Left);
        assert_eq!(detect_turn(&arc(-90.0, 6.0), &[6.0; 6], &cfg).unwrap().0, Turn::Right);
        assert_eq!(detect_turn(&arc(180.0, 6.0), &[6.0; 6], &cfg).unwrap().0, Turn::UTurn);
        assert_eq!(detect_turn(&arc(20.0, 6.0), &[6.0; 6], &cfg), None);
    }

    #[test]
    fn reverse_by_body_frame_velocity() {
        let cfg = MinerConfig::default();
        assert!(detect_reverse(&[-1.0; 6], &cfg).is_some());
        assert!(detect_reverse(&[1.0; 6], &cfg).is_none());
        let positions: Vec<[f64; 2]> = (0..6).map(|i| [i as f64 * 0.5, 0.0]).collect();
        let times: Vec<f64> = (0..6).map(|i| i as f64 * 0.5).collect();
        let vlong = crate::geometry::longitudinal_velocity(&positions, &[PI; 6], &times);
        assert!(detect_reverse(&vlong, &cfg).is_some());
    }

    #[test]
    fn overtake_pass_and_far_sweep() {
        let cfg = MinerConfig::default();
        let b = straight(0.0, 0.0, 6.0);
        let a = straight(-7.5, 3.5, 12.0);
        assert_eq!(detect_overtake_pass(&a, &b, &cfg).unwrap().0, OvertakePass::Overtake);
        let parked = straight(0.0, 0.0, 0.0);
        let a = straight(-7.5, 3.5, 6.0);
        assert_eq!(detect_overtake_pass(&a, &parked, &cfg).unwrap().0, OvertakePass::Pass);
        let far = straight(-7.5, 7.5, 12.0);
        assert_eq!(detect_overtake_pass(&far, &b, &cfg), None);
    }

    #[test]
    fn stationary_axis_cases() {
        let cfg = MinerConfig::default();
        let b = straight(0.0, 0.0, 0.0);
        assert_eq!(detect_stationary_relation(&straight(6.0, 0.0, 0.0), &b, &[], &cfg).unwrap().0, StationaryRelation::InFront);
        assert_eq!(detect_stationary_relation(&straight(0.5, 2.5, 0.0), &b, &[], &cfg).unwrap().0, StationaryRelation::Left);
        assert_eq!(detect_stationary_relation(&straight(6.0, 0.0, 0.0), &b, &[[3.0, 0.0]], &cfg), None);
    }

    #[test]
    fn moving_side_and_divergence() {
        let cfg = MinerConfig::default();
        let b = straight(0.0, 0.0, 10.0);
        assert_eq!(detect_moving_side(&straight(0.5, 3.5, 10.0), &b, &cfg).unwrap().0, MovingSide::Left);
        assert_eq!(detect_moving_side(&b, &straight(0.5, 3.5, 10.0), &cfg).unwrap().0, MovingSide::Right);
        let diverging = track(
            (0..6)
                .map(|i| {
                    let s = 5.0 * i as f64;
                    let h = 40f64.to_radians();
                    Pose2::new(0.5 + s * h.cos(), 3.5 + s * h.sin(), h)
                })
                .collect(),
            vec![10.0; 6],
        );
        assert_eq!(detect_moving_side(&diverging, &b, &cfg), None);
        assert_eq!(detect_moving_side(&straight(0.5, 3.5, 10.0), &straight(0.0, 0.0, 0.0), &cfg), None);
    }

    #[test]
    fn pedestrian_classes() {
        let cfg = MinerConfig::default();
        let map = MapModel::default();
        let still = vec![[0.0, 0.0]; 6];
        assert_eq!(detect_pedestrian_action(&still, &[0.0; 6], &map, &cfg).speed, Some(SpeedClass::Stand));
        assert_eq!(detect_pedestrian_action(&still, &[1.4; 6], &map, &cfg).speed, Some(SpeedClass::Walk));
        assert_eq!(detect_pedestrian_action(&still, &[3.5; 6], &map, &cfg).speed, Some(SpeedClass::Run));
    }

    #[test]
    fn wait_needs_still_vehicle_and_corridor_hit() {
        let cfg = MinerConfig::default();
        let map = MapModel::default();
        let v = straight(0.0, 0.0, 0.0);
        let crossing: Vec<[f64; 2]> = (0..6).map(|i| [8.0, -2.0 + 0.7 * i as f64]).collect();
        assert!(detect_wait_ped_cross(&v, false, &crossing, &map, &cfg).is_some());
        let sidewalk: Vec<[f64; 2]> = (0..6).map(|i| [i as f64, 7.0]).collect();
        assert!(detect_wait_ped_cross(&v, false, &sidewalk, &map, &cfg).is_none());
        let moving = straight(0.0, 0.0, 8.0);
        assert!(detect_wait_ped_cross(&moving, false, &crossing, &map, &cfg).is_none());
    }
}
