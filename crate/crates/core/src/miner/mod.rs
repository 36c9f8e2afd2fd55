//! Sliding-window scenario mining.
//!
//! Every window `[t, t+W-1]` runs every detector over the ego, single agents
//! and ordered subject pairs. Hits for the same (type, subjects) whose
//! windows overlap collapse to the strongest window. Detections of
//! `distractor_only` types are never emitted, but together with all other
//! hits they form the context that prunes each instance's negatives.

mod config;
pub mod detect;
mod tracks;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::catalog::{Catalog, ScenarioCategory};
use crate::geometry::{assign_views, distance};
use crate::scene::Scene;

pub use config::MinerConfig;
pub use tracks::WindowTrack;

use detect::*;
use tracks::{build_tracks, Subject, Track};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceStatus {
    #[default]
    Mined,
    Accepted,
    Rejected,
}

impl fmt::Display for InstanceStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InstanceStatus::Mined => "mined",
            InstanceStatus::Accepted => "accepted",
            InstanceStatus::Rejected => "rejected",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioInstance {
    pub scenario_id: String,
    pub scene_id: String,
    #[serde(rename = "type")]
    pub scenario_type: String,
    pub category: ScenarioCategory,
    pub frame_start: usize,
    pub frame_end: usize,
    pub agent_ids: Vec<String>,
    pub views: Vec<String>,
    pub negatives: Vec<String>,
    pub metrics: BTreeMap<String, f64>,
    #[serde(default)]
    pub status: InstanceStatus,
}

/// First 16 hex digits of SHA-256 over `scene|type|agents|start|end`.
pub fn scenario_id(scene_id: &str, scenario_type: &str, agents: &[String], start: usize, end: usize) -> String {
    let key = format!("{scene_id}|{scenario_type}|{}|{start}|{end}", agents.join(","));
    let digest = Sha256::digest(key.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Pedestrian pair relations are unordered; only the ordering with the
/// smaller id first is stored.
pub fn is_symmetric(scenario_type: &str) -> bool {
    matches!(scenario_type, "agent_walk_alongside" | "agent_walk_opposite")
}

#[derive(Debug, Clone)]
struct Detection {
    scenario_type: String,
    agents: Vec<String>,
    start: usize,
    end: usize,
    strength: f64,
    metrics: BTreeMap<String, f64>,
}

struct Collector<'a> {
    catalog: &'a Catalog,
    hits: Vec<Detection>,
}

impl Collector<'_> {
    fn push(&mut self, scenario_type: String, agents: Vec<String>, start: usize, end: usize, strength: f64, metrics: &[(&str, f64)]) {
        if !self.catalog.contains(&scenario_type) {
            return;
        }
        let metrics = metrics.iter().filter(|(_, v)| v.is_finite()).map(|(k, v)| (k.to_string(), *v)).collect();
        self.hits.push(Detection { scenario_type, agents, start, end, strength, metrics });
    }
}

fn single_type(s: &Subject, what: &str) -> (String, Vec<String>) {
    match s {
        Subject::Ego => (format!("ego_{what}"), vec![]),
        Subject::Agent(id) => (format!("agent_{what}"), vec![id.clone()]),
    }
}

fn pair_type(a: &Subject, b: &Subject, rel: &str) -> Option<(String, Vec<String>)> {
    match (a, b) {
        (Subject::Agent(x), Subject::Agent(y)) => Some((format!("agent_{rel}_agent"), vec![x.clone(), y.clone()])),
        (Subject::Agent(x), Subject::Ego) => Some((format!("agent_{rel}_ego"), vec![x.clone()])),
        (Subject::Ego, Subject::Agent(y)) => Some((format!("ego_{rel}_agent"), vec![y.clone()])),
        (Subject::Ego, Subject::Ego) => None,
    }
}

fn wait_type(v: &Subject, p: &str) -> (String, Vec<String>) {
    match v {
        Subject::Ego => ("ego_wait_ped_cross".into(), vec![p.to_string()]),
        Subject::Agent(id) => ("agent_wait_ped_cross".into(), vec![id.clone(), p.to_string()]),
    }
}

fn detect_window(tracks: &[Track], scene: &Scene, cfg: &MinerConfig, start: usize, end: usize, out: &mut Collector) {
    let windows: Vec<Option<WindowTrack>> = tracks.iter().map(|t| t.window(start, end)).collect();
    let map = &scene.map;
    let mut stops = vec![false; tracks.len()];

    for (i, tr) in tracks.iter().enumerate() {
        let Some(w) = &windows[i] else { continue };
        if let Some((kind, dv)) = detect_longitudinal(&w.speeds, cfg) {
            let what = match kind {
                Longitudinal::Accelerate => "accelerate",
                Longitudinal::Decelerate => "decelerate",
                Longitudinal::Stop => {
                    stops[i] = true;
                    "stop"
                }
            };
            let (t, a) = single_type(&tr.subject, what);
            out.push(t, a, start, end, dv, &[("dv", w.speeds[w.speeds.len() - 1] - w.speeds[0])]);
        }
        if tr.is_vehicle() {
            if let Some((kind, dh)) = detect_turn(&w.poses, &w.speeds, cfg) {
                let what = match kind {
                    Turn::Left => "left_turn",
                    Turn::Right => "right_turn",
                    Turn::UTurn => "u_turn",
                };
                let (t, a) = single_type(&tr.subject, what);
                out.push(t, a, start, end, dh, &[("dheading_deg", dh)]);
            }
            if let Some(s) = detect_lane_change(&w.poses, &w.lanes, map, cfg) {
                let (t, a) = single_type(&tr.subject, "lane_change");
                out.push(t, a, start, end, s, &[]);
            }
            if let Some(s) = detect_reverse(&w.vlong, cfg) {
                let (t, a) = single_type(&tr.subject, "reverse");
                out.push(t, a, start, end, s, &[("max_reverse_speed", s)]);
            }
        } else {
            let act = detect_pedestrian_action(&w.positions(), &w.speeds, map, cfg);
            let med = {
                let mut s = w.speeds.clone();
                s.sort_by(f64::total_cmp);
                s[s.len() / 2]
            };
            if let Some(sc) = act.speed {
                let what = match sc {
                    SpeedClass::Stand => "stand",
                    SpeedClass::Walk => "walk",
                    SpeedClass::Run => "run",
                };
                let (t, a) = single_type(&tr.subject, what);
                out.push(t, a, start, end, -(med - 1.4).abs(), &[("median_speed", med)]);
            }
            if act.cross {
                let (t, a) = single_type(&tr.subject, "cross");
                out.push(t, a, start, end, 0.0, &[]);
            }
            if act.jaywalk {
                let (t, a) = single_type(&tr.subject, "jaywalk");
                out.push(t, a, start, end, 0.0, &[]);
            }
        }
    }

    let n_frames = end - start + 1;
    for (i, ti) in tracks.iter().enumerate() {
        let Some(wi) = &windows[i] else { continue };
        for (j, tj) in tracks.iter().enumerate() {
            if i == j {
                continue;
            }
            let Some(wj) = &windows[j] else { continue };
            let (ai, bj) = (&ti.subject, &tj.subject);
            if ti.is_vehicle() && tj.is_vehicle() {
                let others_per_frame: Vec<Vec<[f64; 2]>> = (start..=end)
                    .map(|f| {
                        tracks
                            .iter()
                            .enumerate()
                            .filter(|(k, _)| *k != i && *k != j)
                            .filter_map(|(_, t)| t.position_at(f))
                            .collect()
                    })
                    .collect();
                if let Some((kind, s)) = detect_follow_lead(wi, wj, &others_per_frame, map, cfg) {
                    let rel = if kind == FollowLead::Follow { "follow" } else { "lead" };
                    if let Some((t, a)) = pair_type(ai, bj, rel) {
                        out.push(t, a, start, end, s, &[("gap_std", -s)]);
                    }
                }
                if let Some((kind, s)) = detect_overtake_pass(wi, wj, cfg) {
                    let rel = if kind == OvertakePass::Overtake { "overtake" } else { "pass" };
                    if let Some((t, a)) = pair_type(ai, bj, rel) {
                        out.push(t, a, start, end, s, &[]);
                    }
                }
                let mean_others: Vec<[f64; 2]> = tracks
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != i && *k != j)
                    .filter_map(|(_, t)| {
                        let pts: Vec<[f64; 2]> = (start..=end).filter_map(|f| t.position_at(f)).collect();
                        (!pts.is_empty()).then(|| {
                            let n = pts.len() as f64;
                            [pts.iter().map(|p| p[0]).sum::<f64>() / n, pts.iter().map(|p| p[1]).sum::<f64>() / n]
                        })
                    })
                    .collect();
                if let Some((kind, s)) = detect_stationary_relation(wi, wj, &mean_others, cfg) {
                    let rel = match kind {
                        StationaryRelation::InFront => "stationary_in_front_of",
                        StationaryRelation::Behind => "stationary_behind",
                        StationaryRelation::Left => "stationary_left_of",
                        StationaryRelation::Right => "stationary_right_of",
                    };
                    if let Some((t, a)) = pair_type(ai, bj, rel) {
                        out.push(t, a, start, end, s, &[("distance", -s)]);
                    }
                }
                if let Some((kind, s)) = detect_moving_side(wi, wj, cfg) {
                    let rel = if kind == MovingSide::Left { "moving_left_of" } else { "moving_right_of" };
                    if let Some((t, a)) = pair_type(ai, bj, rel) {
                        out.push(t, a, start, end, s, &[]);
                    }
                }
            } else if ti.is_vehicle() && tj.is_pedestrian() {
                let Subject::Agent(pid) = bj else { continue };
                if let Some(s) = detect_wait_ped_cross(wi, stops[i], &wj.positions(), map, cfg) {
                    let (t, a) = wait_type(ai, pid);
                    out.push(t, a, start, end, s, &[("corridor_distance", -s)]);
                }
            } else if ti.is_pedestrian() && tj.is_pedestrian() {
                let (Subject::Agent(x), Subject::Agent(y)) = (ai, bj) else { continue };
                if x >= y {
                    continue;
                }
                if let Some((kind, s)) = detect_walk_pair(wi, wj, cfg) {
                    let t = if kind == WalkPair::Alongside { "agent_walk_alongside" } else { "agent_walk_opposite" };
                    out.push(t.into(), vec![x.clone(), y.clone()], start, end, s, &[("min_distance", -s)]);
                }
            }
        }
    }
    debug_assert!(n_frames == cfg.window_frames);
}

/// Overlapping windows of one (type, subjects) collapse to the strongest;
/// ties keep the earliest.
fn merge_windows(mut hits: Vec<Detection>) -> Vec<Detection> {
    hits.sort_by(|a, b| {
        (&a.scenario_type, &a.agents, a.start).cmp(&(&b.scenario_type, &b.agents, b.start))
    });
    let mut out: Vec<Detection> = Vec::new();
    let mut group_end: Option<usize> = None;
    for h in hits {
        let same_key = out
            .last()
            .is_some_and(|l| l.scenario_type == h.scenario_type && l.agents == h.agents);
        if same_key && group_end.is_some_and(|e| h.start <= e) {
            group_end = Some(group_end.unwrap().max(h.end));
            let last = out.last_mut().unwrap();
            if h.strength > last.strength {
                *last = h;
            }
        } else {
            group_end = Some(h.end);
            out.push(h);
        }
    }
    out
}

fn canonical(scenario_type: &str, mut agents: Vec<String>) -> Vec<String> {
    if is_symmetric(scenario_type) {
        agents.sort();
    }
    agents
}

/// Mines one scene. Deterministic; output ordered by (type, agents,
/// frame_start).
pub fn mine_scene(scene: &Scene, catalog: &Catalog, cfg: &MinerConfig) -> Vec<ScenarioInstance> {
    let w = cfg.window_frames.max(1);
    let f = scene.frame_count();
    if f < w {
        log::warn!("scene {} has {f} frames, fewer than the window of {w}; nothing mined", scene.scene_id);
        return Vec::new();
    }
    let tracks = build_tracks(scene, cfg);
    let mut col = Collector { catalog, hits: Vec::new() };
    let mut start = 0;
    while start + w <= f {
        detect_window(&tracks, scene, cfg, start, start + w - 1, &mut col);
        start += cfg.stride.max(1);
    }

    let mut context: HashMap<Vec<String>, HashSet<String>> = HashMap::new();
    for h in &col.hits {
        context
            .entry(canonical(&h.scenario_type, h.agents.clone()))
            .or_default()
            .insert(h.scenario_type.clone());
    }

    let by_id: HashMap<&str, &Track> = tracks
        .iter()
        .filter_map(|t| match &t.subject {
            Subject::Agent(id) => Some((id.as_str(), t)),
            Subject::Ego => None,
        })
        .collect();
    let ego = &tracks[0];
    let has_front = scene.cameras().iter().any(|c| c.name == "CAM_FRONT");

    let mut out = Vec::new();
    for d in merge_windows(col.hits) {
        let Some(entry) = catalog.get(&d.scenario_type) else { continue };
        if entry.distractor_only {
            continue;
        }
        let co_detected: HashSet<String> = entry
            .negatives
            .iter()
            .filter(|n| {
                let k = catalog.get(n).map_or(0, |e| e.arity).min(d.agents.len());
                let subj = canonical(n, d.agents[..k].to_vec());
                context.get(&subj).is_some_and(|s| s.contains(*n))
            })
            .cloned()
            .collect();
        let negatives = catalog
            .negatives_of(&d.scenario_type, &co_detected, &HashSet::new())
            .unwrap_or_default();

        let mut metrics = d.metrics.clone();
        let mut worst_vis: Option<f64> = None;
        let mut ego_dist = if d.agents.is_empty() { 0.0 } else { f64::INFINITY };
        for id in &d.agents {
            let Some(t) = by_id.get(id.as_str()) else { continue };
            for fr in d.start..=d.end {
                let Some(Some(s)) = t.samples.get(fr) else { continue };
                if let Some(v) = s.visibility {
                    worst_vis = Some(worst_vis.map_or(v, |w: f64| w.min(v)));
                }
                if let Some(e) = ego.position_at(fr) {
                    ego_dist = ego_dist.min(distance(e, s.pose.position()));
                }
            }
        }
        metrics.insert("occlusion".into(), worst_vis.map_or(0.0, |v| 1.0 - v));
        metrics.insert("ego_distance".into(), if ego_dist.is_finite() { ego_dist } else { 0.0 });

        let views = if d.agents.is_empty() {
            if has_front {
                vec!["CAM_FRONT".to_string()]
            } else {
                vec![]
            }
        } else {
            assign_views(scene, &d.agents, d.start, d.end).views
        };
        if views.is_empty() {
            metrics.insert("unobserved".into(), 1.0);
        }

        out.push(ScenarioInstance {
            scenario_id: scenario_id(&scene.scene_id, &d.scenario_type, &d.agents, d.start, d.end),
            scene_id: scene.scene_id.clone(),
            scenario_type: d.scenario_type,
            category: entry.category,
            frame_start: d.start,
            frame_end: d.end,
            agent_ids: d.agents,
            views,
            negatives,
            metrics,
            status: InstanceStatus::Mined,
        });
    }
    out.sort_by(|a, b| {
        (&a.scenario_type, &a.agent_ids, a.frame_start).cmp(&(&b.scenario_type, &b.agent_ids, b.frame_start))
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(t: &str, start: usize, strength: f64) -> Detection {
        Detection {
            scenario_type: t.into(),
            agents: vec!["a".into()],
            start,
            end: start + 5,
            strength,
            metrics: BTreeMap::new(),
        }
    }

    #[test]
    fn overlapping_windows_keep_strongest() {
        let merged = merge_windows(vec![det("x", 0, 1.0), det("x", 1, 3.0), det("x", 2, 2.0), det("x", 20, 0.0)]);
        assert_eq!(merged.len(), 2);
        assert_eq!(merged[0].start, 1);
        assert_eq!(merged[1].start, 20);
    }

    #[test]
    fn ties_keep_earliest() {
        let merged = merge_windows(vec![det("x", 3, 1.0), det("x", 2, 1.0)]);
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].start, 2);
    }

    #[test]
    fn scenario_ids_are_stable_hex() {
        let id = scenario_id("s", "ego_stop", &[], 0, 5);
        assert_eq!(id.len(), 16);
        assert_eq!(id, scenario_id("s", "ego_stop", &[], 0, 5));
        assert_ne!(id, scenario_id("s", "ego_stop", &[], 1, 6));
    }
}
