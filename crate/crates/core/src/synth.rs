//! Labeled synthetic scenes built from closed-form motions.
//!
//! Every scene uses six frames at 0.5 s on a straight two-lane road (lane
//! `L0` at y = 0, `L1` at y = 3.5, shared crossable boundary at y = 1.75)
//! with six ego-mounted virtual cameras, then gets a seed-dependent global
//! rigid transform. Labels list every instance the default miner is expected
//! to emit for the scene, co-occurrences included. Negative controls also
//! carry the near-miss instances that must not appear.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Rotation3, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::fixed6::quantize;
use crate::geometry::{normalize_angle, transform_scene, Se2};
use crate::scene::*;

pub const FRAMES: usize = 6;
pub const DT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Label {
    pub scenario_type: String,
    pub agents: Vec<String>,
    pub frame_start: usize,
    pub frame_end: usize,
}

impl Label {
    fn full(t: &str, agents: &[&str]) -> Self {
        Label {
            scenario_type: t.to_string(),
            agents: agents.iter().map(|s| s.to_string()).collect(),
            frame_start: 0,
            frame_end: FRAMES - 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthCase {
    pub kind: String,
    pub scene: Scene,
    pub labels: Vec<Label>,
    /// Instances a negative control sits just outside of.
    pub near_misses: Vec<Label>,
}

impl SynthCase {
    pub fn is_control(&self) -> bool {
        !self.near_misses.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("unknown synth kind `{0}`")]
    UnknownKind(String),
}

pub const CONTROL_KINDS: [&str; 10] = [
    "control_shallow_turn",
    "control_far_sweep",
    "control_interloper",
    "control_weak_accel",
    "control_weak_decel",
    "control_lane_drift",
    "control_long_gap",
    "control_wide_stationary",
    "control_brisk_walk",
    "control_diverging",
];

pub const SCENARIO_KINDS: [&str; 43] = [
    "ego_left_turn",
    "ego_accelerate",
    "ego_right_turn",
    "ego_lane_change",
    "ego_decelerate",
    "ego_stop",
    "agent_right_turn",
    "agent_lane_change",
    "agent_overtake_ego",
    "agent_follow_ego",
    "agent_stop",
    "agent_run",
    "agent_lead_ego",
    "agent_reverse",
    "agent_u_turn",
    "agent_stationary_right_of_ego",
    "agent_stationary_behind_ego",
    "agent_jaywalk",
    "agent_left_turn",
    "agent_walk",
    "agent_stand",
    "agent_cross",
    "agent_accelerate",
    "ego_lead_agent",
    "ego_pass_agent",
    "ego_wait_ped_cross",
    "ego_follow_agent",
    "ego_overtake_agent",
    "ego_stationary_left_of_agent",
    "ego_stationary_in_front_of_agent",
    "agent_follow_agent",
    "agent_stationary_left_of_agent",
    "agent_stationary_right_of_agent",
    "agent_walk_alongside",
    "agent_stationary_in_front_of_agent",
    "agent_stationary_behind_agent",
    "agent_pass_agent",
    "agent_moving_left_of_agent",
    "agent_moving_right_of_agent",
    "agent_walk_opposite",
    "agent_lead_agent",
    "agent_wait_ped_cross",
    "agent_overtake_agent",
];

/// (x, y, yaw, speed) per frame.
type Motion = Vec<[f64; 4]>;

const CAR: Size3 = Size3 { length: 4.5, width: 1.9, height: 1.6 };
const PED: Size3 = Size3 { length: 0.7, width: 0.7, height: 1.75 };

fn t_of(i: usize) -> f64 {
    i as f64 * DT
}

fn constant(x0: f64, y0: f64, yaw: f64, v: f64) -> Motion {
    let (s, c) = yaw.sin_cos();
    (0..FRAMES).map(|i| [x0 + c * v * t_of(i), y0 + s * v * t_of(i), yaw, v]).collect()
}

fn parked(x: f64, y: f64, yaw: f64) -> Motion {
    constant(x, y, yaw, 0.0)
}

/// Straight along +x with the given per-frame speeds, trapezoidal
/// integration.
fn profile(x0: f64, y0: f64, speeds: [f64; FRAMES]) -> Motion {
    let mut x = x0;
    let mut out = Vec::with_capacity(FRAMES);
    for i in 0..FRAMES {
        if i > 0 {
            x += (speeds[i - 1] + speeds[i]) / 2.0 * DT;
        }
        out.push([x, y0, 0.0, speeds[i]]);
    }
    out
}

/// Circular arc starting at (x0, y0) heading +x, turning `deg` in total.
fn arc(x0: f64, y0: f64, deg: f64, v: f64) -> Motion {
    let th = deg.to_radians();
    let r = v * t_of(FRAMES - 1) / th.abs();
    let s = th.signum();
    (0..FRAMES)
        .map(|i| {
            let yaw = th * i as f64 / (FRAMES - 1) as f64;
            [x0 + r * yaw.abs().sin(), y0 + s * r * (1.0 - yaw.cos()), yaw, v]
        })
        .collect()
}

/// Raised-cosine lateral shift by `dy` over the window at forward speed `v`;
/// `cycles` = 0.5 gives a one-way shift, 1.0 returns to the start line.
fn lateral(x0: f64, y0: f64, dy: f64, v: f64, cycles: f64) -> Motion {
    let big_t = t_of(FRAMES - 1);
    let w = 2.0 * PI * cycles / big_t;
    (0..FRAMES)
        .map(|i| {
            let t = t_of(i);
            let y = y0 + dy * (1.0 - (w * t).cos()) / 2.0;
            let vy = dy * w * (w * t).sin() / 2.0;
            [x0 + v * t, y, vy.atan2(v), v.hypot(vy)]
        })
        .collect()
}

fn crossing_ped() -> Motion {
    (0..FRAMES).map(|i| [8.0, -1.5 + 1.4 * t_of(i), PI / 2.0, 1.4]).collect()
}

struct Agent {
    id: &'static str,
    class: AgentClass,
    motion: Motion,
}

fn car(id: &'static str, motion: Motion) -> Agent {
    Agent { id, class: AgentClass::Car, motion }
}

fn ped(id: &'static str, motion: Motion) -> Agent {
    Agent { id, class: AgentClass::Pedestrian, motion }
}

struct Layout {
    ego: Motion,
    agents: Vec<Agent>,
    crosswalk: bool,
    labels: Vec<Label>,
    near: Vec<Label>,
}

fn parked_ego() -> Motion {
    parked(-80.0, 0.0, 0.0)
}

fn layout(ego: Motion, agents: Vec<Agent>, labels: Vec<Label>) -> Layout {
    Layout { ego, agents, crosswalk: false, labels, near: vec![] }
}

fn l(t: &str, agents: &[&str]) -> Label {
    Label::full(t, agents)
}

fn case_layout(kind: &str) -> Option<Layout> {
    let ego_only = |m: Motion, t: &str| layout(m, vec![], vec![l(t, &[])]);
    let solo = |m: Motion, t: &str| layout(parked_ego(), vec![car("a1", m)], vec![l(t, &["a1"])]);
    let lay = match kind {
        "ego_left_turn" => ego_only(arc(0.0, 0.0, 90.0, 6.0), kind),
        "ego_right_turn" => ego_only(arc(0.0, 0.0, -90.0, 6.0), kind),
        "ego_accelerate" => ego_only(profile(0.0, 0.0, [2.0, 3.0, 4.0, 5.0, 6.0, 7.0]), kind),
        "ego_decelerate" => ego_only(profile(0.0, 0.0, [9.0, 8.0, 7.0, 6.0, 5.0, 4.0]), kind),
        "ego_stop" => ego_only(profile(0.0, 0.0, [8.0, 6.0, 4.0, 2.0, 0.3, 0.1]), kind),
        "ego_lane_change" => ego_only(lateral(0.0, 0.0, 3.5, 8.0, 0.5), kind),

        "agent_right_turn" => solo(arc(0.0, 0.0, -90.0, 6.0), kind),
        "agent_left_turn" => solo(arc(0.0, 0.0, 90.0, 6.0), kind),
        "agent_u_turn" => solo(arc(0.0, 0.0, 180.0, 6.0), kind),
        "agent_lane_change" => solo(lateral(0.0, 0.0, 3.5, 8.0, 0.5), kind),
        "agent_accelerate" => solo(profile(0.0, 0.0, [2.0, 3.0, 4.0, 5.0, 6.0, 7.0]), kind),
        "agent_stop" => solo(profile(0.0, 0.0, [8.0, 6.0, 4.0, 2.0, 0.3, 0.1]), kind),
        "agent_reverse" => solo(
            (0..FRAMES).map(|i| [10.0 - 2.0 * t_of(i), 0.0, 0.0, 2.0]).collect(),
            kind,
        ),
        "agent_overtake_ego" => layout(
            constant(0.0, 0.0, 0.0, 6.0),
            vec![car("a1", constant(-7.5, 3.5, 0.0, 12.0))],
            vec![l(kind, &["a1"])],
        ),
        "agent_follow_ego" | "ego_lead_agent" => layout(
            constant(12.0, 0.0, 0.0, 10.0),
            vec![car("a1", constant(0.0, 0.0, 0.0, 10.0))],
            vec![l("agent_follow_ego", &["a1"]), l("ego_lead_agent", &["a1"])],
        ),
        "agent_lead_ego" | "ego_follow_agent" => layout(
            constant(0.0, 0.0, 0.0, 10.0),
            vec![car("a1", constant(12.0, 0.0, 0.0, 10.0))],
            vec![l("agent_lead_ego", &["a1"]), l("ego_follow_agent", &["a1"])],
        ),
        "agent_stationary_right_of_ego" | "ego_stationary_left_of_agent" => layout(
            parked(0.0, 3.5, 0.0),
            vec![car("a1", parked(0.5, 0.0, 0.0))],
            vec![l("agent_stationary_right_of_ego", &["a1"]), l("ego_stationary_left_of_agent", &["a1"])],
        ),
        "agent_stationary_behind_ego" | "ego_stationary_in_front_of_agent" => layout(
            parked(8.0, 0.0, 0.0),
            vec![car("a1", parked(0.0, 0.0, 0.0))],
            vec![l("agent_stationary_behind_ego", &["a1"]), l("ego_stationary_in_front_of_agent", &["a1"])],
        ),
        "agent_stand" => layout(parked_ego(), vec![ped("p1", parked(10.0, 8.0, 0.0))], vec![l(kind, &["p1"])]),
        "agent_walk" => layout(parked_ego(), vec![ped("p1", constant(0.0, 7.0, 0.0, 1.4))], vec![l(kind, &["p1"])]),
        "agent_run" => layout(parked_ego(), vec![ped("p1", constant(0.0, 7.0, 0.0, 3.5))], vec![l(kind, &["p1"])]),
        "agent_cross" => Layout {
            crosswalk: true,
            ..layout(
                parked_ego(),
                vec![ped("p1", crossing_ped())],
                vec![l("agent_walk", &["p1"]), l("agent_cross", &["p1"])],
            )
        },
        "agent_jaywalk" => layout(
            parked_ego(),
            vec![ped("p1", crossing_ped())],
            vec![l("agent_walk", &["p1"]), l("agent_jaywalk", &["p1"])],
        ),

        "ego_pass_agent" => layout(
            constant(-7.5, 3.5, 0.0, 12.0),
            vec![car("a1", parked(0.0, 0.0, 0.0))],
            vec![l(kind, &["a1"])],
        ),
        "ego_overtake_agent" => layout(
            constant(-7.5, 3.5, 0.0, 12.0),
            vec![car("a1", constant(0.0, 0.0, 0.0, 6.0))],
            vec![l(kind, &["a1"])],
        ),
        "ego_wait_ped_cross" => Layout {
            crosswalk: true,
            ..layout(
                parked(0.0, 0.0, 0.0),
                vec![ped("p1", crossing_ped())],
                vec![l(kind, &["p1"]), l("agent_walk", &["p1"]), l("agent_cross", &["p1"])],
            )
        },

        "agent_follow_agent" => layout(
            parked_ego(),
            vec![car("a1", constant(0.0, 0.0, 0.0, 10.0)), car("a2", constant(12.0, 0.0, 0.0, 10.0))],
            vec![l("agent_follow_agent", &["a1", "a2"]), l("agent_lead_agent", &["a2", "a1"])],
        ),
        "agent_lead_agent" => layout(
            parked_ego(),
            vec![car("a1", constant(12.0, 0.0, 0.0, 10.0)), car("a2", constant(0.0, 0.0, 0.0, 10.0))],
            vec![l("agent_lead_agent", &["a1", "a2"]), l("agent_follow_agent", &["a2", "a1"])],
        ),
        "agent_overtake_agent" => layout(
            parked_ego(),
            vec![car("a1", constant(-7.5, 3.5, 0.0, 12.0)), car("a2", constant(0.0, 0.0, 0.0, 6.0))],
            vec![l(kind, &["a1", "a2"])],
        ),
        "agent_pass_agent" => layout(
            parked_ego(),
            vec![car("a1", constant(-7.5, 3.5, 0.0, 12.0)), car("a2", parked(0.0, 0.0, 0.0))],
            vec![l(kind, &["a1", "a2"])],
        ),
        "agent_stationary_left_of_agent" => layout(
            parked_ego(),
            vec![car("a1", parked(0.5, 3.5, 0.0)), car("a2", parked(0.0, 0.0, 0.0))],
            vec![l(kind, &["a1", "a2"]), l("agent_stationary_right_of_agent", &["a2", "a1"])],
        ),
        "agent_stationary_right_of_agent" => layout(
            parked_ego(),
            vec![car("a1", parked(0.5, 0.0, 0.0)), car("a2", parked(0.0, 3.5, 0.0))],
            vec![l(kind, &["a1", "a2"]), l("agent_stationary_left_of_agent", &["a2", "a1"])],
        ),
        "agent_stationary_in_front_of_agent" => layout(
            parked_ego(),
            vec![car("a1", parked(8.0, 0.0, 0.0)), car("a2", parked(0.0, 0.0, 0.0))],
            vec![l(kind, &["a1", "a2"]), l("agent_stationary_behind_agent", &["a2", "a1"])],
        ),
        "agent_stationary_behind_agent" => layout(
            parked_ego(),
            vec![car("a1", parked(0.0, 0.0, 0.0)), car("a2", parked(8.0, 0.0, 0.0))],
            vec![l(kind, &["a1", "a2"]), l("agent_stationary_in_front_of_agent", &["a2", "a1"])],
        ),
        "agent_moving_left_of_agent" => layout(
            parked_ego(),
            vec![car("a1", constant(0.5, 3.5, 0.0, 10.0)), car("a2", constant(0.0, 0.0, 0.0, 10.0))],
            vec![l(kind, &["a1", "a2"]), l("agent_moving_right_of_agent", &["a2", "a1"])],
        ),
        "agent_moving_right_of_agent" => layout(
            parked_ego(),
            vec![car("a1", constant(0.5, 0.0, 0.0, 10.0)), car("a2", constant(0.0, 3.5, 0.0, 10.0))],
            vec![l(kind, &["a1", "a2"]), l("agent_moving_left_of_agent", &["a2", "a1"])],
        ),
        "agent_walk_alongside" => layout(
            parked_ego(),
            vec![ped("p1", constant(0.0, 7.0, 0.0, 1.4)), ped("p2", constant(0.0, 8.0, 0.0, 1.4))],
            vec![l(kind, &["p1", "p2"]), l("agent_walk", &["p1"]), l("agent_walk", &["p2"])],
        ),
        "agent_walk_opposite" => layout(
            parked_ego(),
            vec![ped("p1", constant(-2.1, 7.0, 0.0, 1.4)), ped("p2", constant(2.1, 8.5, PI, 1.4))],
            vec![l(kind, &["p1", "p2"]), l("agent_walk", &["p1"]), l("agent_walk", &["p2"])],
        ),
        "agent_wait_ped_cross" => Layout {
            crosswalk: true,
            ..layout(
                parked_ego(),
                vec![car("a1", parked(0.0, 0.0, 0.0)), ped("p1", crossing_ped())],
                vec![l(kind, &["a1", "p1"]), l("agent_walk", &["p1"]), l("agent_cross", &["p1"])],
            )
        },

        "control_shallow_turn" => Layout {
            near: vec![l("ego_left_turn", &[])],
            ..layout(arc(0.0, 0.0, 25.0, 2.0), vec![], vec![])
        },
        "control_far_sweep" => Layout {
            near: vec![l("ego_overtake_agent", &["a1"]), l("ego_pass_agent", &["a1"])],
            ..layout(constant(-7.5, 0.0, 0.0, 12.0), vec![car("a1", constant(0.0, 7.5, 0.0, 6.0))], vec![])
        },
        "control_interloper" => Layout {
            near: vec![l("agent_follow_agent", &["a1", "a2"]), l("agent_lead_agent", &["a2", "a1"])],
            ..layout(
                parked_ego(),
                vec![
                    car("a1", constant(0.0, 0.0, 0.0, 10.0)),
                    car("a2", constant(20.0, 0.0, 0.0, 10.0)),
                    car("a3", constant(10.0, 0.0, 0.0, 10.0)),
                ],
                vec![
                    l("agent_follow_agent", &["a1", "a3"]),
                    l("agent_lead_agent", &["a3", "a1"]),
                    l("agent_follow_agent", &["a3", "a2"]),
                    l("agent_lead_agent", &["a2", "a3"]),
                ],
            )
        },
        "control_weak_accel" => Layout {
            near: vec![l("ego_accelerate", &[])],
            ..layout(profile(0.0, 0.0, [5.0, 5.48, 5.96, 6.44, 6.92, 7.4]), vec![], vec![])
        },
        "control_weak_decel" => Layout {
            near: vec![l("ego_decelerate", &[])],
            ..layout(profile(0.0, 0.0, [8.0, 7.52, 7.04, 6.56, 6.08, 5.6]), vec![], vec![])
        },
        "control_lane_drift" => Layout {
            near: vec![l("ego_lane_change", &[])],
            ..layout(lateral(0.0, 0.0, 1.0, 8.0, 1.0), vec![], vec![])
        },
        "control_long_gap" => Layout {
            near: vec![l("ego_follow_agent", &["a1"]), l("agent_lead_ego", &["a1"])],
            ..layout(constant(0.0, 0.0, 0.0, 10.0), vec![car("a1", constant(31.0, 0.0, 0.0, 10.0))], vec![])
        },
        "control_wide_stationary" => Layout {
            near: vec![
                l("agent_stationary_left_of_agent", &["a1", "a2"]),
                l("agent_stationary_right_of_agent", &["a2", "a1"]),
            ],
            ..layout(parked_ego(), vec![car("a1", parked(0.5, 6.5, 0.0)), car("a2", parked(0.0, 0.0, 0.0))], vec![])
        },
        "control_brisk_walk" => Layout {
            near: vec![l("agent_run", &["p1"])],
            ..layout(parked_ego(), vec![ped("p1", constant(0.0, 7.0, 0.0, 2.0))], vec![l("agent_walk", &["p1"])])
        },
        "control_diverging" => Layout {
            near: vec![l("agent_moving_left_of_agent", &["a1", "a2"]), l("agent_moving_right_of_agent", &["a2", "a1"])],
            ..layout(
                parked_ego(),
                vec![
                    car("a1", constant(0.5, 3.5, 40f64.to_radians(), 10.0)),
                    car("a2", constant(0.0, 0.0, 0.0, 10.0)),
                ],
                vec![],
            )
        },
        _ => return None,
    };
    Some(lay)
}

fn road_map(crosswalk: bool) -> MapModel {
    let line = |y: f64| vec![[-100.0, y], [200.0, y]];
    let boundary = |id: &str, y: f64, crossable: bool| Boundary { boundary_id: id.into(), polyline: line(y), crossable };
    MapModel {
        lanes: vec![
            Lane {
                lane_id: "L0".into(),
                centerline: line(0.0),
                left_boundary_id: Some("B_mid".into()),
                right_boundary_id: Some("B_right".into()),
                successors: vec![],
                adjacent_left: Some("L1".into()),
                adjacent_right: None,
            },
            Lane {
                lane_id: "L1".into(),
                centerline: line(3.5),
                left_boundary_id: Some("B_left".into()),
                right_boundary_id: Some("B_mid".into()),
                successors: vec![],
                adjacent_left: None,
                adjacent_right: Some("L0".into()),
            },
        ],
        boundaries: vec![
            boundary("B_right", -1.75, false),
            boundary("B_mid", 1.75, true),
            boundary("B_left", 5.25, false),
        ],
        crosswalks: if crosswalk {
            vec![Crosswalk { id: "CW0".into(), polygon: vec![[6.0, -1.75], [10.0, -1.75], [10.0, 5.25], [6.0, 5.25]] }]
        } else {
            vec![]
        },
        drivable_area: vec![DrivableArea { polygon: vec![[-100.0, -1.75], [200.0, -1.75], [200.0, 5.25], [-100.0, 5.25]] }],
    }
}

pub const CAMERA_LAYOUT: [(&str, f64); 6] = [
    ("CAM_FRONT", 0.0),
    ("CAM_FRONT_LEFT", 55.0),
    ("CAM_FRONT_RIGHT", -55.0),
    ("CAM_BACK_LEFT", 110.0),
    ("CAM_BACK_RIGHT", -110.0),
    ("CAM_BACK", 180.0),
];

/// Quaternion `[w, x, y, z]` of a level camera looking along global `yaw`.
pub fn level_camera_rotation(yaw: f64) -> [f64; 4] {
    let (s, c) = yaw.sin_cos();
    // columns: camera x (right), y (down), z (forward) in global axes
    let m = Matrix3::new(s, 0.0, c, -c, 0.0, s, 0.0, -1.0, 0.0);
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m));
    [q.w, q.i, q.j, q.k]
}

/// Six cameras rigidly mounted on the ego at 1.6 m.
pub fn ego_cameras(ego: &[EgoState]) -> Vec<CameraModel> {
    CAMERA_LAYOUT
        .iter()
        .map(|(name, off)| CameraModel {
            name: name.to_string(),
            intrinsics: Intrinsics { fx: 1142.5, fy: 1142.5, cx: 800.0, cy: 450.0 },
            width: 1600,
            height: 900,
            poses: ego
                .iter()
                .map(|e| CameraPose {
                    frame: e.frame,
                    x: e.x,
                    y: e.y,
                    z: 1.6,
                    rotation: level_camera_rotation(e.yaw + off.to_radians()),
                })
                .collect(),
            image_paths: None,
        })
        .collect()
}

fn clamp_yaw(yaw: f64) -> f64 {
    let q = quantize(normalize_angle(yaw));
    if q > PI || q <= -PI {
        3.141592
    } else {
        q
    }
}

/// Rounds every float to what survives serialization, keeping yaw in
/// (−π, π].
pub fn quantize_scene(scene: &mut Scene) {
    let pts = |v: &mut Vec<[f64; 2]>| {
        for p in v.iter_mut() {
            *p = [quantize(p[0]), quantize(p[1])];
        }
    };
    for e in &mut scene.ego {
        e.x = quantize(e.x);
        e.y = quantize(e.y);
        e.yaw = clamp_yaw(e.yaw);
        e.speed = e.speed.map(quantize);
    }
    for a in &mut scene.agents {
        a.size = Size3 { length: quantize(a.size.length), width: quantize(a.size.width), height: quantize(a.size.height) };
        for s in &mut a.states {
            s.x = quantize(s.x);
            s.y = quantize(s.y);
            s.yaw = clamp_yaw(s.yaw);
            s.speed = s.speed.map(quantize);
            s.visibility = s.visibility.map(quantize);
        }
    }
    for l in &mut scene.map.lanes {
        pts(&mut l.centerline);
    }
    for b in &mut scene.map.boundaries {
        pts(&mut b.polyline);
    }
    for c in &mut scene.map.crosswalks {
        pts(&mut c.polygon);
    }
    for d in &mut scene.map.drivable_area {
        pts(&mut d.polygon);
    }
    if let Some(cams) = &mut scene.cameras {
        for c in cams {
            let k = &mut c.intrinsics;
            *k = Intrinsics { fx: quantize(k.fx), fy: quantize(k.fy), cx: quantize(k.cx), cy: quantize(k.cy) };
            for p in &mut c.poses {
                p.x = quantize(p.x);
                p.y = quantize(p.y);
                p.z = quantize(p.z);
                p.rotation = p.rotation.map(quantize);
            }
        }
    }
}

fn sub_rng(seed: u64, salt: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(salt.as_bytes());
    let d = h.finalize();
    ChaCha8Rng::seed_from_u64(u64::from_le_bytes(d[..8].try_into().expect("8 bytes")))
}

/// Rigid transform used for a synth scene: rotation in [−π, π), translation
/// within ±500 m.
pub fn scene_transform(seed: u64, kind: &str) -> Se2 {
    let mut rng = sub_rng(seed, kind);
    Se2 {
        angle: rng.random_range(-PI..PI),
        tx: rng.random_range(-500.0..500.0),
        ty: rng.random_range(-500.0..500.0),
    }
}

pub fn synth_kinds() -> Vec<&'static str> {
    SCENARIO_KINDS.iter().chain(CONTROL_KINDS.iter()).copied().collect()
}

/// Builds one labeled scene. Deterministic in (`kind`, `seed`).
pub fn synth_scene(kind: &str, seed: u64) -> Result<SynthCase, SynthError> {
    let lay = case_layout(kind).ok_or_else(|| SynthError::UnknownKind(kind.to_string()))?;
    let mut rng = sub_rng(seed, &format!("{kind}/content"));
    let t0: i64 = 1_500_000_000_000_000 + rng.random_range(0..1_000_000_000i64);
    let frames: Vec<FrameStamp> = (0..FRAMES)
        .map(|i| FrameStamp { index: i, timestamp_us: t0 + (i as i64) * 500_000 })
        .collect();
    let ego: Vec<EgoState> = lay
        .ego
        .iter()
        .enumerate()
        .map(|(i, m)| EgoState { frame: i, x: m[0], y: m[1], yaw: m[2], speed: Some(m[3]) })
        .collect();
    let agents = lay
        .agents
        .iter()
        .map(|a| AgentTrack {
            agent_id: a.id.to_string(),
            class: a.class,
            size: if a.class.is_pedestrian() { PED } else { CAR },
            states: a
                .motion
                .iter()
                .enumerate()
                .map(|(i, m)| AgentState {
                    frame: i,
                    x: m[0],
                    y: m[1],
                    yaw: m[2],
                    speed: Some(m[3]),
                    visibility: Some(rng.random_range(0.4..1.0)),
                })
                .collect(),
        })
        .collect();
    let cameras = ego_cameras(&ego);
    let local = Scene {
        scene_id: format!("synth-{kind}-{seed}"),
        frames,
        ego,
        agents,
        map: road_map(lay.crosswalk),
        cameras: Some(cameras),
    };
    let mut scene = transform_scene(&local, scene_transform(seed, kind));
    quantize_scene(&mut scene);
    let mut labels = lay.labels;
    labels.sort();
    Ok(SynthCase { kind: kind.to_string(), scene, labels, near_misses: lay.near })
}

/// One designated scene per catalog scenario type plus ten negative
/// controls, in a fixed order.
pub fn synth_suite(seed: u64) -> Vec<SynthCase> {
    synth_kinds()
        .into_iter()
        .map(|k| synth_scene(k, seed).expect("built-in kind"))
        .collect()
}

/// A stationary ego with one car circling it at 15 m through the front,
/// left, back and right sectors (four frames).
pub fn orbit_scene() -> Scene {
    let ego: Vec<EgoState> = (0..4).map(|i| EgoState { frame: i, x: 0.0, y: 0.0, yaw: 0.0, speed: Some(0.0) }).collect();
    let states = (0..4)
        .map(|i| {
            let a = i as f64 * PI / 2.0;
            AgentState {
                frame: i,
                x: 15.0 * a.cos(),
                y: 15.0 * a.sin(),
                yaw: normalize_angle(a + PI / 2.0),
                speed: None,
                visibility: None,
            }
        })
        .collect();
    let cameras = ego_cameras(&ego);
    let mut s = Scene {
        scene_id: "orbit".into(),
        frames: (0..4).map(|i| FrameStamp { index: i, timestamp_us: i as i64 * 500_000 }).collect(),
        ego,
        agents: vec![AgentTrack { agent_id: "a1".into(), class: AgentClass::Car, size: CAR, states }],
        map: MapModel::default(),
        cameras: Some(cameras),
    };
    quantize_scene(&mut s);
    s
}

fn star_polygon(rng: &mut ChaCha8Rng, cx: f64, cy: f64) -> Vec<[f64; 2]> {
    let k = rng.random_range(3..8);
    (0..k)
        .map(|i| {
            let a = 2.0 * PI * (i as f64 + rng.random_range(0.1..0.9)) / k as f64;
            let r = rng.random_range(2.0..20.0);
            [cx + r * a.cos(), cy + r * a.sin()]
        })
        .collect()
}

fn polyline(rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let n = rng.random_range(2..6);
    let mut p = [rng.random_range(-500.0..500.0), rng.random_range(-500.0..500.0)];
    (0..n)
        .map(|_| {
            p = [p[0] + rng.random_range(1.0..30.0), p[1] + rng.random_range(-10.0..10.0)];
            p
        })
        .collect()
}

fn random_yaw(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(-PI..PI)
}

/// A random scene satisfying every interchange invariant, with all floats
/// pre-quantized so that serialization round-trips exactly.
pub fn random_scene(seed: u64) -> Scene {
    let mut rng = sub_rng(seed, "random_scene");
    let f = rng.random_range(1..9usize);
    let mut ts = rng.random_range(0..1_000_000_000i64);
    let frames = (0..f)
        .map(|i| {
            ts += rng.random_range(1..1_000_000);
            FrameStamp { index: i, timestamp_us: ts }
        })
        .collect();
    let ego: Vec<EgoState> = (0..f)
        .map(|i| EgoState {
            frame: i,
            x: rng.random_range(-1000.0..1000.0),
            y: rng.random_range(-1000.0..1000.0),
            yaw: random_yaw(&mut rng),
            speed: rng.random_bool(0.5).then(|| rng.random_range(0.0..30.0)),
        })
        .collect();
    let n_agents = rng.random_range(0..5);
    let agents = (0..n_agents)
        .map(|k| {
            let mut frames: Vec<usize> = (0..f).filter(|_| rng.random_bool(0.7)).collect();
            if frames.is_empty() {
                frames.push(rng.random_range(0..f));
            }
            AgentTrack {
                agent_id: format!("agent-{k}"),
                class: AgentClass::ALL[rng.random_range(0..8)],
                size: Size3 {
                    length: rng.random_range(0.3..15.0),
                    width: rng.random_range(0.3..4.0),
                    height: rng.random_range(0.5..4.0),
                },
                states: frames
                    .into_iter()
                    .map(|fr| AgentState {
                        frame: fr,
                        x: rng.random_range(-1000.0..1000.0),
                        y: rng.random_range(-1000.0..1000.0),
                        yaw: random_yaw(&mut rng),
                        speed: rng.random_bool(0.5).then(|| rng.random_range(0.0..30.0)),
                        visibility: rng.random_bool(0.5).then(|| rng.random_range(0.0..=1.0)),
                    })
                    .collect(),
            }
        })
        .collect();
    let n_bound = rng.random_range(0..4);
    let boundaries: Vec<Boundary> = (0..n_bound)
        .map(|k| Boundary { boundary_id: format!("b{k}"), polyline: polyline(&mut rng), crossable: rng.random_bool(0.5) })
        .collect();
    let n_lanes = rng.random_range(0..4);
    let pick_boundary = |rng: &mut ChaCha8Rng| {
        (n_bound > 0 && rng.random_bool(0.7)).then(|| format!("b{}", rng.random_range(0..n_bound)))
    };
    let lanes = (0..n_lanes)
        .map(|k| {
            let other = |rng: &mut ChaCha8Rng| (rng.random_bool(0.4)).then(|| format!("lane{}", rng.random_range(0..n_lanes)));
            Lane {
                lane_id: format!("lane{k}"),
                centerline: polyline(&mut rng),
                left_boundary_id: pick_boundary(&mut rng),
                right_boundary_id: pick_boundary(&mut rng),
                successors: (0..rng.random_range(0..3)).map(|_| format!("lane{}", rng.random_range(0..n_lanes))).collect(),
                adjacent_left: other(&mut rng),
                adjacent_right: other(&mut rng),
            }
        })
        .collect();
    let crosswalks = (0..rng.random_range(0..3))
        .map(|k| {
            let (cx, cy) = (rng.random_range(-500.0..500.0), rng.random_range(-500.0..500.0));
            Crosswalk { id: format!("cw{k}"), polygon: star_polygon(&mut rng, cx, cy) }
        })
        .collect();
    let drivable_area = (0..rng.random_range(0..3))
        .map(|_| {
            let (cx, cy) = (rng.random_range(-500.0..500.0), rng.random_range(-500.0..500.0));
            DrivableArea { polygon: star_polygon(&mut rng, cx, cy) }
        })
        .collect();
    let cameras = rng.random_bool(0.5).then(|| {
        (0..rng.random_range(1..4))
            .map(|k| CameraModel {
                name: format!("CAM_{k}"),
                intrinsics: Intrinsics {
                    fx: rng.random_range(100.0..2000.0),
                    fy: rng.random_range(100.0..2000.0),
                    cx: rng.random_range(0.0..1600.0),
                    cy: rng.random_range(0.0..900.0),
                },
                width: rng.random_range(1..4000),
                height: rng.random_range(1..3000),
                poses: (0..f)
                    .map(|fr| {
                        let q = UnitQuaternion::from_euler_angles(
                            rng.random_range(-PI..PI),
                            rng.random_range(-1.5..1.5),
                            rng.random_range(-PI..PI),
                        );
                        CameraPose {
                            frame: fr,
                            x: rng.random_range(-1000.0..1000.0),
                            y: rng.random_range(-1000.0..1000.0),
                            z: rng.random_range(0.0..3.0),
                            rotation: [q.w, q.i, q.j, q.k],
                        }
                    })
                    .collect(),
                image_paths: rng
                    .random_bool(0.5)
                    .then(|| (0..f).map(|fr| format!("samples/CAM_{k}/{fr:04}.jpg")).collect()),
            })
            .collect()
    });
    let mut scene = Scene {
        scene_id: format!("random-{seed}"),
        frames,
        ego,
        agents,
        map: MapModel { lanes, boundaries, crosswalks, drivable_area },
        cameras,
    };
    quantize_scene(&mut scene);
    scene
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_shape() {
        let suite = synth_suite(7);
        assert_eq!(suite.len(), 53);
        assert_eq!(suite.iter().filter(|c| c.is_control()).count(), 10);
        for c in &suite {
            assert!(validate_scene(&c.scene).is_empty(), "{}: {:?}", c.kind, validate_scene(&c.scene));
        }
    }

    #[test]
    fn same_seed_same_scene() {
        assert_eq!(synth_scene("ego_stop", 3).unwrap(), synth_scene("ego_stop", 3).unwrap());
        assert_ne!(synth_scene("ego_stop", 3).unwrap().scene, synth_scene("ego_stop", 4).unwrap().scene);
    }

    #[test]
    fn unknown_kind() {
        assert!(synth_scene("ego_moonwalk", 0).is_err());
    }

    #[test]
    fn stop_profile_and_opposite_walkers() {
        let c = synth_scene("ego_stop", 0).unwrap();
        let speeds: Vec<f64> = c.scene.ego.iter().map(|e| e.speed.unwrap()).collect();
        assert_eq!(speeds, vec![8.0, 6.0, 4.0, 2.0, 0.3, 0.1]);
        assert_eq!(c.labels, vec![Label::full("ego_stop", &[])]);

        let c = synth_scene("agent_walk_opposite", 0).unwrap();
        let (p1, p2) = (&c.scene.agents[0], &c.scene.agents[1]);
        let d: Vec<f64> = (0..FRAMES)
            .map(|i| (p1.states[i].x - p2.states[i].x).hypot(p1.states[i].y - p2.states[i].y))
            .collect();
        let (imin, dmin) = d.iter().copied().enumerate().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        assert_eq!(imin, 3);
        assert!((dmin - 1.5).abs() < 1e-5);
    }

    #[test]
    fn random_scenes_validate() {
        for seed in 0..200 {
            let s = random_scene(seed);
            assert!(validate_scene(&s).is_empty(), "seed {seed}: {:?}", validate_scene(&s));
        }
    }
}
