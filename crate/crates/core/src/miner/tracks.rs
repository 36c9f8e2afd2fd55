//! Per-track kinematics precomputed once per scene.

use crate::geometry::{assign_lane, longitudinal_velocity, speed_profile, LaneCoordinate, Pose2};
use crate::scene::{AgentClass, Scene, Size3};

use super::MinerConfig;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) enum Subject {
    Ego,
    Agent(String),
}

#[derive(Debug, Clone)]
pub(crate) struct Sample {
    pub pose: Pose2,
    pub speed: f64,
    pub vlong: f64,
    pub visibility: Option<f64>,
    pub lane: Option<LaneCoordinate>,
}

/// A track restricted to one window, every frame present.
#[derive(Debug, Clone)]
pub struct WindowTrack {
    pub poses: Vec<Pose2>,
    pub speeds: Vec<f64>,
    pub vlong: Vec<f64>,
    pub lanes: Vec<Option<LaneCoordinate>>,
    pub size: Size3,
}

impl WindowTrack {
    pub fn positions(&self) -> Vec<[f64; 2]> {
        self.poses.iter().map(|p| p.position()).collect()
    }

    pub fn yaws(&self) -> Vec<f64> {
        self.poses.iter().map(|p| p.yaw).collect()
    }
}

pub(crate) struct Track {
    pub subject: Subject,
    /// `None` for the ego.
    pub class: Option<AgentClass>,
    pub size: Size3,
    /// Indexed by scene frame.
    pub samples: Vec<Option<Sample>>,
}

impl Track {
    pub fn is_pedestrian(&self) -> bool {
        self.class.is_some_and(AgentClass::is_pedestrian)
    }

    pub fn is_vehicle(&self) -> bool {
        !self.is_pedestrian()
    }

    pub fn window(&self, start: usize, end: usize) -> Option<WindowTrack> {
        let slice = self.samples.get(start..=end)?;
        let mut w = WindowTrack {
            poses: Vec::with_capacity(slice.len()),
            speeds: Vec::with_capacity(slice.len()),
            vlong: Vec::with_capacity(slice.len()),
            lanes: Vec::with_capacity(slice.len()),
            size: self.size,
        };
        for s in slice {
            let s = s.as_ref()?;
            w.poses.push(s.pose);
            w.speeds.push(s.speed);
            w.vlong.push(s.vlong);
            w.lanes.push(s.lane.clone());
        }
        Some(w)
    }

    pub fn position_at(&self, frame: usize) -> Option<[f64; 2]> {
        self.samples.get(frame)?.as_ref().map(|s| s.pose.position())
    }
}

fn build(
    subject: Subject,
    class: Option<AgentClass>,
    size: Size3,
    states: &[(usize, Pose2, Option<f64>, Option<f64>)],
    scene: &Scene,
    times: &[f64],
    cfg: &MinerConfig,
) -> Track {
    let positions: Vec<[f64; 2]> = states.iter().map(|s| s.1.position()).collect();
    let yaws: Vec<f64> = states.iter().map(|s| s.1.yaw).collect();
    let t: Vec<f64> = states.iter().map(|s| times[s.0]).collect();
    let stored: Vec<Option<f64>> = states.iter().map(|s| s.2).collect();
    let speeds = speed_profile(&positions, &t, &stored);
    let vlong = longitudinal_velocity(&positions, &yaws, &t);
    let mut samples = vec![None; scene.frame_count()];
    for (i, (frame, pose, _, vis)) in states.iter().enumerate() {
        let lane = if class.is_some_and(AgentClass::is_pedestrian) {
            None
        } else {
            assign_lane(*pose, &scene.map, &cfg.lane_assign)
        };
        samples[*frame] = Some(Sample { pose: *pose, speed: speeds[i], vlong: vlong[i], visibility: *vis, lane });
    }
    Track { subject, class, size, samples }
}

/// Ego first, then agents in document order.
pub(crate) fn build_tracks(scene: &Scene, cfg: &MinerConfig) -> Vec<Track> {
    let times = scene.times_s();
    let mut out = Vec::with_capacity(scene.agents.len() + 1);
    let ego: Vec<_> = scene.ego.iter().map(|e| (e.frame, e.pose(), e.speed, None)).collect();
    out.push(build(Subject::Ego, None, cfg.ego_size, &ego, scene, &times, cfg));
    for a in &scene.agents {
        let st: Vec<_> = a.states.iter().map(|s| (s.frame, s.pose(), s.speed, s.visibility)).collect();
        out.push(build(Subject::Agent(a.agent_id.clone()), Some(a.class), a.size, &st, scene, &times, cfg));
    }
    out
}
