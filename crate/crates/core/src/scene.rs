//! Scene interchange format: one JSON document per recorded clip.
//!
//! Scenes carry key frames only. Geometry is planar (x, y, yaw) in a global
//! frame; z appears only in camera poses. Serialization is deterministic:
//! keys follow declaration order and every float is written with six
//! decimals, so `serialize_scene` output is byte-stable.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fixed6;
use crate::geometry::{polygon_is_simple, Pose2};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub scene_id: String,
    pub frames: Vec<FrameStamp>,
    pub ego: Vec<EgoState>,
    pub agents: Vec<AgentTrack>,
    pub map: MapModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cameras: Option<Vec<CameraModel>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameStamp {
    pub index: usize,
    pub timestamp_us: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EgoState {
    pub frame: usize,
    #[serde(serialize_with = "fixed6::f64")]
    pub x: f64,
    #[serde(serialize_with = "fixed6::f64")]
    pub y: f64,
    #[serde(serialize_with = "fixed6::f64")]
    pub yaw: f64,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        serialize_with = "fixed6::opt_f64"
    )]
    pub speed: Option<f64>,
}

impl EgoState {
    pub fn pose(&self) -> Pose2 {
        Pose2::new(self.x, self.y, self.yaw)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentClass {
    Car,
    Truck,
    Bus,
    Trailer,
    ConstructionVehicle,
    Motorcycle,
    Bicycle,
    Pedestrian,
}

impl AgentClass {
    pub const ALL: [AgentClass; 8] = [
        AgentClass::Car,
        AgentClass::Truck,
        AgentClass::Bus,
        AgentClass::Trailer,
        AgentClass::ConstructionVehicle,
        AgentClass::Motorcycle,
        AgentClass::Bicycle,
        AgentClass::Pedestrian,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentClass::Car => "car",
            AgentClass::Truck => "truck",
            AgentClass::Bus => "bus",
            AgentClass::Trailer => "trailer",
            AgentClass::ConstructionVehicle => "construction_vehicle",
            AgentClass::Motorcycle => "motorcycle",
            AgentClass::Bicycle => "bicycle",
            AgentClass::Pedestrian => "pedestrian",
        }
    }

    pub fn is_pedestrian(self) -> bool {
        self == AgentClass::Pedestrian
    }
}

impl fmt::Display for AgentClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Size3 {
    #[serde(serialize_with = "fixed6::f64")]
    pub length: f64,
    #[serde(serialize_with = "fixed6::f64")]
    pub width: f64,
    #[serde(serialize_with = "fixed6::f64")]
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentTrack {
    pub agent_id: String,
    pub class: AgentClass,
    pub size: Size3,
    pub states: Vec<AgentState>,
}

impl AgentTrack {
    pub fn state_at(&self, frame: usize) -> Option<&AgentState> {
        self.states
            .binary_search_by_key(&frame, |s| s.frame)
            .ok()
            .map(|i| &self.states[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentState {
    pub frame: usize,
    #[serde(serialize_with = "fixed6::f64")]
    pub x: f64,
    #[serde(serialize_with = "fixed6::f64")]
    pub y: f64,
    #[serde(serialize_with = "fixed6::f64")]
    pub yaw: f64,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        serialize_with = "fixed6::opt_f64"
    )]
    pub speed: Option<f64>,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        serialize_with = "fixed6::opt_f64"
    )]
    pub visibility: Option<f64>,
}

impl AgentState {
    pub fn pose(&self) -> Pose2 {
        Pose2::new(self.x, self.y, self.yaw)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapModel {
    pub lanes: Vec<Lane>,
    pub boundaries: Vec<Boundary>,
    pub crosswalks: Vec<Crosswalk>,
    pub drivable_area: Vec<DrivableArea>,
}

impl MapModel {
    pub fn lane(&self, lane_id: &str) -> Option<&Lane> {
        self.lanes.iter().find(|l| l.lane_id == lane_id)
    }

    pub fn boundary(&self, boundary_id: &str) -> Option<&Boundary> {
        self.boundaries.iter().find(|b| b.boundary_id == boundary_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lane {
    pub lane_id: String,
    #[serde(serialize_with = "fixed6::points")]
    pub centerline: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left_boundary_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right_boundary_id: Option<String>,
    #[serde(default)]
    pub successors: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjacent_left: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjacent_right: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Boundary {
    pub boundary_id: String,
    #[serde(serialize_with = "fixed6::points")]
    pub polyline: Vec<[f64; 2]>,
    pub crossable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Crosswalk {
    pub id: String,
    #[serde(serialize_with = "fixed6::points")]
    pub polygon: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrivableArea {
    #[serde(serialize_with = "fixed6::points")]
    pub polygon: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Intrinsics {
    #[serde(serialize_with = "fixed6::f64")]
    pub fx: f64,
    #[serde(serialize_with = "fixed6::f64")]
    pub fy: f64,
    #[serde(serialize_with = "fixed6::f64")]
    pub cx: f64,
    #[serde(serialize_with = "fixed6::f64")]
    pub cy: f64,
}

/// Camera pose in the global frame. `rotation` is a unit quaternion
/// `[w, x, y, z]` mapping camera axes (x right, y down, z forward) to global.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraPose {
    pub frame: usize,
    #[serde(serialize_with = "fixed6::f64")]
    pub x: f64,
    #[serde(serialize_with = "fixed6::f64")]
    pub y: f64,
    #[serde(serialize_with = "fixed6::f64")]
    pub z: f64,
    #[serde(serialize_with = "fixed6::quat")]
    pub rotation: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraModel {
    pub name: String,
    pub intrinsics: Intrinsics,
    pub width: u32,
    pub height: u32,
    pub poses: Vec<CameraPose>,
    /// Optional per-frame image paths, passed through to reviewers untouched.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_paths: Option<Vec<String>>,
}

impl CameraModel {
    pub fn pose_at(&self, frame: usize) -> Option<&CameraPose> {
        self.poses.iter().find(|p| p.frame == frame)
    }
}

impl Scene {
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    /// Frame timestamps in seconds.
    pub fn times_s(&self) -> Vec<f64> {
        self.frames
            .iter()
            .map(|f| f.timestamp_us as f64 * 1e-6)
            .collect()
    }

    pub fn ego_at(&self, frame: usize) -> Option<&EgoState> {
        self.ego.get(frame).filter(|e| e.frame == frame).or_else(|| self.ego.iter().find(|e| e.frame == frame))
    }

    pub fn agent(&self, agent_id: &str) -> Option<&AgentTrack> {
        self.agents.iter().find(|a| a.agent_id == agent_id)
    }

    pub fn cameras(&self) -> &[CameraModel] {
        self.cameras.as_deref().unwrap_or(&[])
    }
}

/// One broken invariant: where, and which rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub rule: String,
}

impl Violation {
    fn new(path: impl Into<String>, rule: impl Into<String>) -> Self {
        Violation {
            path: path.into(),
            rule: rule.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.rule)
    }
}

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("scene document is not valid UTF-8: {0}")]
    Encoding(#[from] std::str::Utf8Error),
    #[error("parse error at line {line}, column {column} (field `{path}`): {message}")]
    Syntax {
        line: usize,
        column: usize,
        path: String,
        message: String,
    },
    #[error("scene failed validation: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Validation(Vec<Violation>),
}

pub fn parse_scene(document: &[u8]) -> Result<Scene, SceneError> {
    let text = std::str::from_utf8(document)?;
    let mut de = serde_json::Deserializer::from_str(text);
    let scene: Scene = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        SceneError::Syntax {
            line: inner.line(),
            column: inner.column(),
            path,
            message: inner.to_string(),
        }
    })?;
    de.end().map_err(|e| SceneError::Syntax {
        line: e.line(),
        column: e.column(),
        path: ".".into(),
        message: e.to_string(),
    })?;
    let violations = validate_scene(&scene);
    if violations.is_empty() {
        Ok(scene)
    } else {
        Err(SceneError::Validation(violations))
    }
}

pub fn serialize_scene(scene: &Scene) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(scene).expect("a validated scene always serializes");
    out.push(b'\n');
    out
}

fn yaw_normalized(yaw: f64) -> bool {
    yaw.is_finite() && yaw > -PI && yaw <= PI
}

fn check_polyline(out: &mut Vec<Violation>, path: &str, pts: &[[f64; 2]]) {
    if pts.len() < 2 {
        out.push(Violation::new(path, "polyline needs ≥ 2 vertices"));
    }
    if pts.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        out.push(Violation::new(path, "non-finite coordinate"));
    }
}

fn check_polygon(out: &mut Vec<Violation>, path: &str, pts: &[[f64; 2]]) {
    if pts.len() < 3 {
        out.push(Violation::new(path, "polygon needs ≥ 3 vertices"));
        return;
    }
    if pts.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        out.push(Violation::new(path, "non-finite coordinate"));
        return;
    }
    if !polygon_is_simple(pts) {
        out.push(Violation::new(path, "polygon is self-intersecting"));
    }
}

pub fn validate_scene(scene: &Scene) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = scene.frames.len();

    if scene.scene_id.is_empty() {
        out.push(Violation::new("scene_id", "must be non-empty"));
    }
    if n == 0 {
        out.push(Violation::new("frames", "scene needs ≥ 1 frame"));
    }
    for (i, f) in scene.frames.iter().enumerate() {
        if f.index != i {
            out.push(Violation::new(
                format!("frames[{i}].index"),
                format!("frame index must equal position {i}"),
            ));
        }
        if i > 0 && f.timestamp_us <= scene.frames[i - 1].timestamp_us {
            out.push(Violation::new(
                format!("frames[{i}].timestamp_us"),
                "timestamps must be strictly increasing",
            ));
        }
    }

    if scene.ego.len() != n {
        out.push(Violation::new(
            "ego",
            format!("expected one ego state per frame ({n}), found {}", scene.ego.len()),
        ));
    }
    for (i, e) in scene.ego.iter().enumerate() {
        let p = format!("ego[{i}]");
        if e.frame >= n {
            out.push(Violation::new(format!("{p}.frame"), "frame out of range"));
        } else if e.frame != i {
            out.push(Violation::new(format!("{p}.frame"), "ego states must be in frame order"));
        }
        if !e.x.is_finite() || !e.y.is_finite() {
            out.push(Violation::new(&p, "non-finite coordinate"));
        }
        if !yaw_normalized(e.yaw) {
            out.push(Violation::new(format!("{p}.yaw"), "yaw not normalized"));
        }
        if let Some(v) = e.speed {
            if !(v.is_finite() && v >= 0.0) {
                out.push(Violation::new(format!("{p}.speed"), "speed must be ≥ 0"));
            }
        }
    }

    let mut ids = HashSet::new();
    for (a_i, a) in scene.agents.iter().enumerate() {
        let p = format!("agents[{a_i}]");
        if !ids.insert(a.agent_id.as_str()) {
            out.push(Violation::new(format!("{p}.agent_id"), "duplicate agent_id"));
        }
        let s = a.size;
        if !(s.length > 0.0 && s.width > 0.0 && s.height > 0.0) {
            out.push(Violation::new(format!("{p}.size"), "size components must be > 0"));
        }
        if a.states.is_empty() {
            out.push(Violation::new(format!("{p}.states"), "track needs ≥ 1 state"));
        }
        for (s_i, st) in a.states.iter().enumerate() {
            let sp = format!("{p}.states[{s_i}]");
            if st.frame >= n {
                out.push(Violation::new(format!("{sp}.frame"), "frame out of range"));
            }
            if s_i > 0 && st.frame <= a.states[s_i - 1].frame {
                out.push(Violation::new(
                    format!("{sp}.frame"),
                    "states must be sorted by frame without duplicates",
                ));
            }
            if !st.x.is_finite() || !st.y.is_finite() {
                out.push(Violation::new(&sp, "non-finite coordinate"));
            }
            if !yaw_normalized(st.yaw) {
                out.push(Violation::new(format!("{sp}.yaw"), "yaw not normalized"));
            }
            if let Some(v) = st.speed {
                if !(v.is_finite() && v >= 0.0) {
                    out.push(Violation::new(format!("{sp}.speed"), "speed must be ≥ 0"));
                }
            }
            if let Some(v) = st.visibility {
                if !(0.0..=1.0).contains(&v) {
                    out.push(Violation::new(format!("{sp}.visibility"), "visibility must lie in [0, 1]"));
                }
            }
        }
    }

    let map = &scene.map;
    let boundary_ids: HashSet<&str> = map.boundaries.iter().map(|b| b.boundary_id.as_str()).collect();
    let mut lane_ids = HashSet::new();
    for (i, l) in map.lanes.iter().enumerate() {
        let p = format!("map.lanes[{i}]");
        if !lane_ids.insert(l.lane_id.as_str()) {
            out.push(Violation::new(format!("{p}.lane_id"), "duplicate lane_id"));
        }
        check_polyline(&mut out, &format!("{p}.centerline"), &l.centerline);
        for (field, id) in [("left_boundary_id", &l.left_boundary_id), ("right_boundary_id", &l.right_boundary_id)] {
            if let Some(id) = id {
                if !boundary_ids.contains(id.as_str()) {
                    out.push(Violation::new(format!("{p}.{field}"), format!("unknown boundary `{id}`")));
                }
            }
        }
    }
    let mut seen_b = HashSet::new();
    for (i, b) in map.boundaries.iter().enumerate() {
        let p = format!("map.boundaries[{i}]");
        if !seen_b.insert(b.boundary_id.as_str()) {
            out.push(Violation::new(format!("{p}.boundary_id"), "duplicate boundary_id"));
        }
        check_polyline(&mut out, &format!("{p}.polyline"), &b.polyline);
    }
    for (i, c) in map.crosswalks.iter().enumerate() {
        check_polygon(&mut out, &format!("map.crosswalks[{i}].polygon"), &c.polygon);
    }
    for (i, d) in map.drivable_area.iter().enumerate() {
        check_polygon(&mut out, &format!("map.drivable_area[{i}].polygon"), &d.polygon);
    }

    let mut cam_names = HashSet::new();
    for (i, c) in scene.cameras().iter().enumerate() {
        let p = format!("cameras[{i}]");
        if !cam_names.insert(c.name.as_str()) {
            out.push(Violation::new(format!("{p}.name"), "duplicate camera name"));
        }
        if !(c.intrinsics.fx > 0.0 && c.intrinsics.fy > 0.0) {
            out.push(Violation::new(format!("{p}.intrinsics"), "fx and fy must be > 0"));
        }
        if c.width == 0 || c.height == 0 {
            out.push(Violation::new(&p, "image size must be > 0"));
        }
        let frames_ok = c.poses.len() == n && c.poses.iter().enumerate().all(|(k, pose)| pose.frame == k);
        if !frames_ok {
            out.push(Violation::new(format!("{p}.poses"), "exactly one pose per frame, in frame order"));
        }
        for (k, pose) in c.poses.iter().enumerate() {
            let norm = pose.rotation.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-3 {
                out.push(Violation::new(format!("{p}.poses[{k}].rotation"), "rotation must be a unit quaternion"));
            }
        }
        if let Some(paths) = &c.image_paths {
            if paths.len() != n {
                out.push(Violation::new(format!("{p}.image_paths"), "one image path per frame"));
            }
        }
    }

    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> Scene {
        Scene {
            scene_id: "s0".into(),
            frames: vec![FrameStamp { index: 0, timestamp_us: 0 }],
            ego: vec![EgoState { frame: 0, x: 0.0, y: 0.0, yaw: 0.0, speed: None }],
            agents: vec![],
            map: MapModel::default(),
            cameras: None,
        }
    }

    #[test]
    fn minimal_document_parses() {
        let doc = br#"{"scene_id":"s0","frames":[{"index":0,"timestamp_us":0}],
            "ego":[{"frame":0,"x":0,"y":0,"yaw":0}],"agents":[],
            "map":{"lanes":[],"boundaries":[],"crosswalks":[],"drivable_area":[]}}"#;
        let scene = parse_scene(doc).unwrap();
        assert_eq!(scene.frame_count(), 1);
        assert!(scene.agents.is_empty());
    }

    #[test]
    fn empty_agents_serialize_as_empty_list() {
        let text = String::from_utf8(serialize_scene(&minimal())).unwrap();
        assert!(text.contains("\"agents\": []"));
        assert_eq!(serialize_scene(&minimal()), serialize_scene(&minimal()));
    }

    #[test]
    fn unknown_top_level_key_is_a_syntax_error() {
        let doc = br#"{"scene_id":"s0","frames":[],"ego":[],"agents":[],
            "map":{"lanes":[],"boundaries":[],"crosswalks":[],"drivable_area":[]},"extra":1}"#;
        assert!(matches!(parse_scene(doc), Err(SceneError::Syntax { .. })));
    }

    #[test]
    fn syntax_error_names_field_path() {
        let doc = br#"{"scene_id":"s0","frames":[{"index":0,"timestamp_us":"zero"}]}"#;
        match parse_scene(doc) {
            Err(SceneError::Syntax { path, line, .. }) => {
                assert_eq!(path, "frames[0].timestamp_us");
                assert_eq!(line, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn agent_frame_out_of_range() {
        let mut s = minimal();
        s.frames = (0..6).map(|i| FrameStamp { index: i, timestamp_us: i as i64 * 500_000 }).collect();
        s.ego = (0..6).map(|i| EgoState { frame: i, x: 0.0, y: 0.0, yaw: 0.0, speed: None }).collect();
        s.agents.push(AgentTrack {
            agent_id: "a".into(),
            class: AgentClass::Car,
            size: Size3 { length: 4.0, width: 2.0, height: 1.5 },
            states: vec![AgentState { frame: 7, x: 0.0, y: 0.0, yaw: 0.0, speed: None, visibility: None }],
        });
        let v = validate_scene(&s);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, "frame out of range");
        assert!(matches!(parse_scene(&serialize_scene(&s)), Err(SceneError::Validation(_))));
    }

    #[test]
    fn yaw_four_radians_is_not_normalized() {
        let mut s = minimal();
        s.ego[0].yaw = 4.0;
        let v = validate_scene(&s);
        assert_eq!(v, vec![Violation::new("ego[0].yaw", "yaw not normalized")]);
    }

    #[test]
    fn two_vertex_polygon_is_rejected() {
        let mut s = minimal();
        s.map.crosswalks.push(Crosswalk { id: "c".into(), polygon: vec![[0.0, 0.0], [1.0, 0.0]] });
        let v = validate_scene(&s);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, "polygon needs ≥ 3 vertices");
    }

    #[test]
    fn valid_scene_has_no_violations() {
        assert!(validate_scene(&minimal()).is_empty());
    }
}
