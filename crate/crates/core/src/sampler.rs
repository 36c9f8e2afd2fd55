//! Per-type sub-sampling of over-represented scenario types.
//!
//! Each instance is binned by the ego-frame polar position of its first
//! subject agent at the window's first frame. Over-cap types are thinned by a
//! round-robin over bins (ring-major, then sector) that takes the cheapest
//! remaining instance of each bin in turn, cost being
//! `occlusion_weight·occlusion + distance_weight·ego_distance/50`.

use std::collections::{BTreeMap, HashMap};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::miner::ScenarioInstance;
use crate::scene::Scene;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub cap: usize,
    pub sectors: usize,
    /// Ring bounds in meters; distances past the last bound fall in the
    /// outermost ring.
    pub rings: Vec<f64>,
    pub occlusion_weight: f64,
    pub distance_weight: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig { cap: 50, sectors: 8, rings: vec![0.0, 10.0, 25.0, 50.0], occlusion_weight: 1.0, distance_weight: 0.5 }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.cap < 1 {
            out.push("cap must be at least 1".to_string());
        }
        if self.sectors < 1 {
            out.push("sectors must be at least 1".to_string());
        }
        if self.rings.len() < 2 {
            out.push("rings needs at least two bounds".to_string());
        }
        if self.rings.windows(2).any(|w| !(w[0] < w[1])) {
            out.push("ring bounds must be strictly increasing".to_string());
        }
        out
    }

    fn ring_count(&self) -> usize {
        self.rings.len().saturating_sub(1).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Bin {
    pub sector: usize,
    pub ring: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub scenario_id: String,
    pub occlusion: f64,
    pub ego_distance: f64,
    pub bin: Bin,
}

impl SampleScore {
    pub fn cost(&self, cfg: &SamplingConfig) -> f64 {
        cfg.occlusion_weight * self.occlusion + cfg.distance_weight * self.ego_distance / 50.0
    }
}

/// Sector of an ego-frame bearing in degrees; sector 0 is centred on straight
/// ahead and sectors count counter-clockwise.
pub fn sector_of(bearing_deg: f64, sectors: usize) -> usize {
    let width = 360.0 / sectors as f64;
    ((bearing_deg / width).round() as i64).rem_euclid(sectors as i64) as usize
}

pub fn ring_of(distance: f64, cfg: &SamplingConfig) -> usize {
    let n = cfg.ring_count();
    (1..cfg.rings.len()).find(|&i| distance < cfg.rings[i]).map_or(n - 1, |i| i - 1)
}

/// Bin of an ego-frame position.
pub fn bin_of(x: f64, y: f64, cfg: &SamplingConfig) -> Bin {
    Bin { sector: sector_of(y.atan2(x).to_degrees(), cfg.sectors), ring: ring_of(x.hypot(y), cfg) }
}

pub fn score_sample(instance: &ScenarioInstance, scene: &Scene, cfg: &SamplingConfig) -> SampleScore {
    let mut score = SampleScore {
        scenario_id: instance.scenario_id.clone(),
        occlusion: 0.0,
        ego_distance: 0.0,
        bin: Bin { sector: 0, ring: 0 },
    };
    if instance.agent_ids.is_empty() {
        return score;
    }
    let frames = instance.frame_start..=instance.frame_end;
    let mut worst_vis: Option<f64> = None;
    let mut dist = f64::INFINITY;
    for id in &instance.agent_ids {
        let Some(track) = scene.agent(id) else {
            warn!("{}: agent {id} not in scene {}", instance.scenario_id, scene.scene_id);
            continue;
        };
        for s in track.states.iter().filter(|s| frames.contains(&s.frame)) {
            if let Some(v) = s.visibility {
                worst_vis = Some(worst_vis.map_or(v, |w: f64| w.min(v)));
            }
            if let Some(e) = scene.ego_at(s.frame) {
                dist = dist.min((s.x - e.x).hypot(s.y - e.y));
            }
        }
    }
    match worst_vis {
        Some(v) => score.occlusion = (1.0 - v).clamp(0.0, 1.0),
        None => warn!("{}: no visibility recorded, occlusion taken as 0", instance.scenario_id),
    }
    if dist.is_finite() {
        score.ego_distance = dist;
    }
    let first = scene
        .agent(&instance.agent_ids[0])
        .and_then(|a| a.state_at(instance.frame_start));
    if let (Some(s), Some(e)) = (first, scene.ego_at(instance.frame_start)) {
        let p = e.pose().to_body([s.x, s.y]);
        score.bin = bin_of(p[0], p[1], cfg);
    }
    score
}

/// Scores every instance whose scene is available; the rest are scored from
/// their stored metrics and binned at the origin.
pub fn score_all(
    instances: &[ScenarioInstance],
    scenes: &HashMap<String, Scene>,
    cfg: &SamplingConfig,
) -> HashMap<String, SampleScore> {
    instances
        .iter()
        .map(|i| {
            let s = match scenes.get(&i.scene_id) {
                Some(scene) => score_sample(i, scene, cfg),
                None => {
                    warn!("{}: scene {} unavailable, using stored metrics", i.scenario_id, i.scene_id);
                    SampleScore {
                        scenario_id: i.scenario_id.clone(),
                        occlusion: i.metrics.get("occlusion").copied().unwrap_or(0.0),
                        ego_distance: i.metrics.get("ego_distance").copied().unwrap_or(0.0),
                        bin: Bin { sector: 0, ring: 0 },
                    }
                }
            };
            (i.scenario_id.clone(), s)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeCount {
    pub kept: usize,
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsampleResult {
    /// Sorted by (scene_id, scenario_id).
    pub kept: Vec<ScenarioInstance>,
    pub report: BTreeMap<String, TypeCount>,
}

fn select<'a>(group: Vec<&'a ScenarioInstance>, scores: &HashMap<String, SampleScore>, cfg: &SamplingConfig) -> Vec<&'a ScenarioInstance> {
    if group.len() <= cfg.cap {
        return group;
    }
    let fallback = |i: &ScenarioInstance| SampleScore {
        scenario_id: i.scenario_id.clone(),
        occlusion: 0.0,
        ego_distance: 0.0,
        bin: Bin { sector: 0, ring: 0 },
    };
    let mut bins: BTreeMap<(usize, usize), Vec<(f64, &'a ScenarioInstance)>> = BTreeMap::new();
    for i in group {
        let s = scores.get(&i.scenario_id).cloned().unwrap_or_else(|| fallback(i));
        bins.entry((s.bin.ring, s.bin.sector)).or_default().push((s.cost(cfg), i));
    }
    let mut queues: Vec<std::vec::IntoIter<(f64, &'a ScenarioInstance)>> = bins
        .into_values()
        .map(|mut v| {
            v.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.scenario_id.cmp(&b.1.scenario_id)));
            v.into_iter()
        })
        .collect();
    let mut kept = Vec::with_capacity(cfg.cap);
    while kept.len() < cfg.cap {
        let before = kept.len();
        for q in queues.iter_mut() {
            if kept.len() == cfg.cap {
                break;
            }
            if let Some((_, i)) = q.next() {
                kept.push(i);
            }
        }
        if kept.len() == before {
            break;
        }
    }
    kept
}

/// Caps every scenario type at `cfg.cap` instances. Independent of input
/// order.
pub fn subsample(instances: &[ScenarioInstance], scores: &HashMap<String, SampleScore>, cfg: &SamplingConfig) -> SubsampleResult {
    let mut by_type: BTreeMap<&str, Vec<&ScenarioInstance>> = BTreeMap::new();
    for i in instances {
        by_type.entry(&i.scenario_type).or_default().push(i);
    }
    let mut kept = Vec::new();
    let mut report = BTreeMap::new();
    for (t, group) in by_type {
        let n = group.len();
        let chosen = select(group, scores, cfg);
        report.insert(t.to_string(), TypeCount { kept: chosen.len(), dropped: n - chosen.len() });
        kept.extend(chosen.into_iter().cloned());
    }
    kept.sort_by(|a, b| (&a.scene_id, &a.scenario_id).cmp(&(&b.scene_id, &b.scenario_id)));
    SubsampleResult { kept, report }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polar_bins() {
        let cfg = SamplingConfig::default();
        // straight right of the ego at 30 m
        assert_eq!(bin_of(0.0, -30.0, &cfg), Bin { sector: 6, ring: 2 });
        assert_eq!(bin_of(5.0, 0.0, &cfg), Bin { sector: 0, ring: 0 });
        assert_eq!(bin_of(-20.0, 0.0, &cfg), Bin { sector: 4, ring: 1 });
        assert_eq!(ring_of(400.0, &cfg), 2);
    }

    #[test]
    fn bad_config() {
        let cfg = SamplingConfig { cap: 0, rings: vec![0.0, 10.0, 5.0], ..Default::default() };
        assert_eq!(cfg.validate().len(), 2);
    }
}
