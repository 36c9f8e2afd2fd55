//! Multiple-choice question generation and prompt rendering.
//!
//! Every question draws its randomness from a generator seeded with
//! `sha256(seed || scenario_id)`, so a question's distractors and letter do
//! not depend on which other instances are in the batch or on their order.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use log::warn;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::catalog::{render_template, Catalog, CatalogError, ScenarioCategory};
use crate::fixed6::quantize;
use crate::geometry::{best_view, normalize_angle, speed_profile, Pose2};
use crate::miner::ScenarioInstance;
use crate::scene::{AgentClass, Scene};

pub const BENCHMARK_VERSION: &str = "1";
pub const MIN_OPTIONS: usize = 2;
pub const MAX_OPTIONS: usize = 8;

#[derive(Debug, Error)]
pub enum QuestgenError {
    #[error("option count {0} outside 2..=8")]
    OptionCount(usize),
    #[error("views unavailable: {0}")]
    ViewsUnavailable(String),
    #[error("unknown prompt family `{0}`")]
    UnknownFamily(String),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajPoint {
    pub frame: usize,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewRef {
    pub camera: String,
    pub center_px: [f64; 2],
    pub box_px: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRef {
    /// 1 or 2, matching `{AGENT1}` / `{AGENT2}`.
    pub role: u8,
    pub agent_id: String,
    pub class: AgentClass,
    /// Ego frame at the window's first frame.
    pub trajectory: Vec<TrajPoint>,
    /// Best camera per window frame, `None` where no camera sees the agent.
    pub views: Vec<Option<ViewRef>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionOption {
    pub letter: String,
    /// With `{AGENTn}` tokens.
    pub text: String,
    pub scenario_type: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub question_id: String,
    pub scenario_id: String,
    pub scene_id: String,
    pub category: ScenarioCategory,
    pub frame_start: usize,
    pub frame_end: usize,
    pub ego_trajectory: Vec<TrajPoint>,
    pub agents: Vec<AgentRef>,
    /// Camera names present in the scene.
    pub cameras: Vec<String>,
    /// With `{AGENTn}` tokens.
    pub question_text: String,
    pub options: Vec<QuestionOption>,
    /// Catalog definition per option, same order, with `{AGENTn}` tokens.
    pub definitions: Vec<String>,
    pub correct_letter: String,
    pub seed: u64,
}

impl Question {
    pub fn letters(&self) -> Vec<String> {
        self.options.iter().map(|o| o.letter.clone()).collect()
    }

    pub fn correct_type(&self) -> Option<&str> {
        self.options.iter().find(|o| o.letter == self.correct_letter).map(|o| o.scenario_type.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skipped {
    pub scenario_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkDoc {
    pub version: String,
    pub catalog_version: String,
    pub seed: u64,
    /// Requested option count; individual questions may carry fewer.
    pub options: usize,
    /// Sorted by question id.
    pub questions: Vec<Question>,
    pub letter_counts: BTreeMap<String, usize>,
    pub skipped: Vec<Skipped>,
}

impl BenchmarkDoc {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("benchmark serializes");
        s.push('\n');
        s
    }
}

pub fn letter(i: usize) -> String {
    char::from(b'A' + i as u8).to_string()
}

/// Per-question generator seed.
pub fn sub_seed(seed: u64, scenario_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(scenario_id.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Catalog question sentence with neutral agent tokens; errors when the
/// instance's agent count does not match the type.
pub fn render_question_text(instance: &ScenarioInstance, catalog: &Catalog) -> Result<String, CatalogError> {
    catalog.question_text(&instance.scenario_type, instance.agent_ids.len())
}

fn traj_point(frame: usize, origin: Pose2, pose: Pose2, speed: f64) -> TrajPoint {
    let p = origin.to_body(pose.position());
    TrajPoint {
        frame,
        x: quantize(p[0]),
        y: quantize(p[1]),
        yaw: quantize(normalize_angle(pose.yaw - origin.yaw)),
        speed: quantize(speed),
    }
}

fn trajectory(
    states: &[(usize, Pose2, Option<f64>)],
    times: &[f64],
    origin: Pose2,
    start: usize,
) -> Vec<TrajPoint> {
    let pos: Vec<[f64; 2]> = states.iter().map(|s| s.1.position()).collect();
    let t: Vec<f64> = states.iter().map(|s| times.get(s.0).copied().unwrap_or(0.0)).collect();
    let stored: Vec<Option<f64>> = states.iter().map(|s| s.2).collect();
    let v = speed_profile(&pos, &t, &stored);
    states.iter().zip(v).map(|(s, v)| traj_point(s.0 - start, origin, s.1, v)).collect()
}

fn build_agents(inst: &ScenarioInstance, scene: &Scene, origin: Pose2) -> Option<Vec<AgentRef>> {
    let times = scene.times_s();
    let window = inst.frame_start..=inst.frame_end;
    inst.agent_ids
        .iter()
        .enumerate()
        .map(|(k, id)| {
            let a = scene.agent(id)?;
            let states: Vec<_> = a
                .states
                .iter()
                .filter(|s| window.contains(&s.frame))
                .map(|s| (s.frame, s.pose(), s.speed))
                .collect();
            let views = window
                .clone()
                .map(|f| {
                    let st = a.state_at(f)?;
                    let (cam, proj) = best_view(st.pose(), a.size, scene.cameras(), f)?;
                    Some(ViewRef {
                        camera: cam.name.clone(),
                        center_px: proj.center_px.map(quantize),
                        box_px: proj.box_px.map(quantize),
                    })
                })
                .collect();
            Some(AgentRef {
                role: k as u8 + 1,
                agent_id: id.clone(),
                class: a.class,
                trajectory: trajectory(&states, &times, origin, inst.frame_start),
                views,
            })
        })
        .collect()
}

/// Option count for an instance with `usable` distractors, or `None` when
/// it cannot reach `min(4, k)` options.
pub fn effective_options(k: usize, usable: usize) -> Option<usize> {
    let eff = k.min(usable + 1);
    (eff >= k.min(4) && eff >= MIN_OPTIONS).then_some(eff)
}

fn question_for(
    inst: &ScenarioInstance,
    scene: &Scene,
    catalog: &Catalog,
    k: usize,
    seed: u64,
) -> Result<Question, String> {
    let entry = catalog.get(&inst.scenario_type).ok_or("type not in catalog")?;
    let question_text = render_question_text(inst, catalog).map_err(|e| e.to_string())?;
    let origin = scene.ego_at(inst.frame_start).ok_or("window outside scene")?.pose();
    let correct_text = entry.option_text.clone();
    let mut seen: HashSet<String> = HashSet::from([correct_text.clone()]);
    let pool: Vec<&str> = inst
        .negatives
        .iter()
        .filter(|n| *n != &inst.scenario_type)
        .filter_map(|n| catalog.get(n))
        .filter(|e| seen.insert(e.option_text.clone()))
        .map(|e| e.name.as_str())
        .collect();
    let eff = effective_options(k, pool.len())
        .ok_or_else(|| format!("{} usable negative(s), need at least {}", pool.len(), k.min(4) - 1))?;

    let q_seed = sub_seed(seed, &inst.scenario_id);
    let mut rng = ChaCha8Rng::seed_from_u64(q_seed);
    let mut picked: Vec<&str> = pool.choose_multiple(&mut rng, eff - 1).copied().collect();
    picked.shuffle(&mut rng);
    let pos = rng.random_range(0..eff);
    picked.insert(pos, &inst.scenario_type);

    let mut options = Vec::with_capacity(eff);
    let mut definitions = Vec::with_capacity(eff);
    for (i, t) in picked.iter().enumerate() {
        let e = catalog.get(t).expect("picked from catalog");
        options.push(QuestionOption { letter: letter(i), text: e.option_text.clone(), scenario_type: e.name.clone() });
        definitions.push(e.definition_template.clone());
    }
    let ego_states: Vec<_> = scene
        .ego
        .iter()
        .filter(|e| (inst.frame_start..=inst.frame_end).contains(&e.frame))
        .map(|e| (e.frame, e.pose(), e.speed))
        .collect();
    Ok(Question {
        question_id: format!("q-{}", inst.scenario_id),
        scenario_id: inst.scenario_id.clone(),
        scene_id: inst.scene_id.clone(),
        category: entry.category,
        frame_start: inst.frame_start,
        frame_end: inst.frame_end,
        ego_trajectory: trajectory(&ego_states, &scene.times_s(), origin, inst.frame_start),
        agents: build_agents(inst, scene, origin).ok_or("subject agent missing from scene")?,
        cameras: scene.cameras().iter().map(|c| c.name.clone()).collect(),
        question_text,
        options,
        definitions,
        correct_letter: letter(pos),
        seed: q_seed,
    })
}

/// One question per usable instance. Instances without a scene, with a type
/// outside the catalog or with too few usable negatives are skipped and
/// listed in `skipped`.
pub fn generate_questions(
    instances: &[ScenarioInstance],
    scenes: &HashMap<String, Scene>,
    catalog: &Catalog,
    k: usize,
    seed: u64,
) -> Result<BenchmarkDoc, QuestgenError> {
    if !(MIN_OPTIONS..=MAX_OPTIONS).contains(&k) {
        return Err(QuestgenError::OptionCount(k));
    }
    let mut questions = Vec::new();
    let mut skipped = Vec::new();
    for inst in instances {
        let made = match scenes.get(&inst.scene_id) {
            Some(scene) => question_for(inst, scene, catalog, k, seed),
            None => Err(format!("scene {} unavailable", inst.scene_id)),
        };
        match made {
            Ok(q) => questions.push(q),
            Err(reason) => {
                warn!("skipping {}: {reason}", inst.scenario_id);
                skipped.push(Skipped { scenario_id: inst.scenario_id.clone(), reason });
            }
        }
    }
    questions.sort_by(|a, b| a.question_id.cmp(&b.question_id));
    questions.dedup_by(|a, b| a.question_id == b.question_id);
    skipped.sort_by(|a, b| a.scenario_id.cmp(&b.scenario_id));
    let mut letter_counts: BTreeMap<String, usize> = (0..k).map(|i| (letter(i), 0)).collect();
    for q in &questions {
        *letter_counts.entry(q.correct_letter.clone()).or_default() += 1;
    }
    Ok(BenchmarkDoc {
        version: BENCHMARK_VERSION.into(),
        catalog_version: catalog.version.clone(),
        seed,
        options: k,
        questions,
        letter_counts,
        skipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptFamily {
    LlmTrajectory,
    VlmImages,
    ExpertMultiview,
}

impl PromptFamily {
    pub const ALL: [PromptFamily; 3] = [PromptFamily::LlmTrajectory, PromptFamily::VlmImages, PromptFamily::ExpertMultiview];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptFamily::LlmTrajectory => "llm_trajectory",
            PromptFamily::VlmImages => "vlm_images",
            PromptFamily::ExpertMultiview => "expert_multiview",
        }
    }
}

impl fmt::Display for PromptFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptFamily {
    type Err = QuestgenError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PromptFamily::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| QuestgenError::UnknownFamily(s.to_string()))
    }
}

/// One template per family with `{QUESTION}`, `{OPTIONS}`, `{TRAJ}`,
/// `{VIEWS}`, `{DEFINITIONS}` and `{LETTERS}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub llm_trajectory: String,
    pub vlm_images: String,
    pub expert_multiview: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            llm_trajectory: include_str!("../../../data/templates/llm_trajectory.txt").into(),
            vlm_images: include_str!("../../../data/templates/vlm_images.txt").into(),
            expert_multiview: include_str!("../../../data/templates/expert_multiview.txt").into(),
        }
    }
}

impl PromptTemplates {
    /// Reads `<family>.txt` from `dir`, keeping the built-in template for
    /// any file that is absent.
    pub fn load_dir(dir: &Path) -> Result<Self, QuestgenError> {
        let mut t = PromptTemplates::default();
        for fam in PromptFamily::ALL {
            let p = dir.join(format!("{fam}.txt"));
            if p.exists() {
                *t.get_mut(fam) = std::fs::read_to_string(p)?;
            }
        }
        Ok(t)
    }

    pub fn get(&self, family: PromptFamily) -> &str {
        match family {
            PromptFamily::LlmTrajectory => &self.llm_trajectory,
            PromptFamily::VlmImages => &self.vlm_images,
            PromptFamily::ExpertMultiview => &self.expert_multiview,
        }
    }

    fn get_mut(&mut self, family: PromptFamily) -> &mut String {
        match family {
            PromptFamily::LlmTrajectory => &mut self.llm_trajectory,
            PromptFamily::VlmImages => &mut self.vlm_images,
            PromptFamily::ExpertMultiview => &mut self.expert_multiview,
        }
    }
}

fn first_view(a: &AgentRef) -> Option<&ViewRef> {
    a.views.iter().flatten().next()
}

/// Name used for `{AGENTn}` in the question (first) and in options and
/// definitions (second).
fn agent_tokens(q: &Question, family: PromptFamily) -> Result<Vec<(String, String)>, QuestgenError> {
    q.agents
        .iter()
        .map(|a| match family {
            PromptFamily::LlmTrajectory => {
                let n = format!("Agent {}", a.role);
                Ok((n.clone(), n))
            }
            PromptFamily::VlmImages => {
                let n = format!("Object {}", a.role);
                Ok((n.clone(), n))
            }
            PromptFamily::ExpertMultiview => {
                let v = first_view(a).ok_or_else(|| {
                    QuestgenError::ViewsUnavailable(format!("{} is not seen by any camera", a.agent_id))
                })?;
                let tag = format!("c{}", a.role);
                Ok((
                    format!("<{tag},{},{:.0},{:.0}>", v.camera, v.center_px[0], v.center_px[1]),
                    tag,
                ))
            }
        })
        .collect()
}

fn sentence_case(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn traj_block(title: &str, pts: &[TrajPoint]) -> String {
    let mut s = format!("{title}:\n");
    for p in pts {
        s.push_str(&format!(
            "Frame number: {}\nx: {:.2}, y: {:.2}, yaw: {:.2}, speed: {:.2}\n",
            p.frame, p.x, p.y, p.yaw, p.speed
        ));
    }
    s
}

fn views_block(q: &Question, family: PromptFamily, names: &[(String, String)]) -> String {
    let mut lines = Vec::new();
    if q.agents.is_empty() {
        lines.push(format!("Cameras: {}", q.cameras.join(", ")));
    }
    for k in 0..=(q.frame_end - q.frame_start) {
        for (a, (_, name)) in q.agents.iter().zip(names) {
            let line = match (a.views.get(k).and_then(Option::as_ref), family) {
                (None, _) => format!("Frame {k}: {name} is not visible"),
                (Some(v), PromptFamily::ExpertMultiview) => format!(
                    "Frame {k}: <{name},{},{:.0},{:.0}>",
                    v.camera, v.center_px[0], v.center_px[1]
                ),
                (Some(v), _) => format!(
                    "Frame {k}: {name} is in {} inside region [{:.0}, {:.0}, {:.0}, {:.0}]",
                    v.camera, v.box_px[0], v.box_px[1], v.box_px[2], v.box_px[3]
                ),
            };
            lines.push(line);
        }
    }
    lines.join("\n")
}

/// Renders one question for a model family.
pub fn render_prompt(q: &Question, family: PromptFamily, templates: &PromptTemplates) -> Result<String, QuestgenError> {
    if family != PromptFamily::LlmTrajectory && q.cameras.is_empty() {
        return Err(QuestgenError::ViewsUnavailable(format!("scene {} has no cameras", q.scene_id)));
    }
    let names = agent_tokens(q, family)?;
    let in_question: Vec<&str> = names.iter().map(|n| n.0.as_str()).collect();
    let in_options: Vec<&str> = names.iter().map(|n| n.1.as_str()).collect();
    let options = q
        .options
        .iter()
        .map(|o| format!("{}. {}", o.letter, sentence_case(&render_template(&o.text, &in_options))))
        .collect::<Vec<_>>()
        .join("\n");
    let definitions = q
        .options
        .iter()
        .zip(&q.definitions)
        .map(|(o, d)| format!("{}: {}", o.letter, sentence_case(&render_template(d, &in_options))))
        .collect::<Vec<_>>()
        .join("\n");
    let traj = if family == PromptFamily::LlmTrajectory {
        let mut blocks = vec![traj_block("Ego", &q.ego_trajectory)];
        for (a, n) in q.agents.iter().zip(&in_options) {
            blocks.push(traj_block(&format!("{n} ({})", a.class), &a.trajectory));
        }
        blocks.join("\n")
    } else {
        String::new()
    };
    let views = if family == PromptFamily::LlmTrajectory { String::new() } else { views_block(q, family, &names) };
    let letters = q.letters().join(" or ");
    Ok(templates
        .get(family)
        .replace("{TRAJ}", &traj)
        .replace("{VIEWS}", &views)
        .replace("{OPTIONS}", &options)
        .replace("{DEFINITIONS}", &definitions)
        .replace("{LETTERS}", &letters)
        .replace("{QUESTION}", &render_template(&q.question_text, &in_question)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn option_count_fallback() {
        assert_eq!(effective_options(5, 10), Some(5));
        assert_eq!(effective_options(5, 3), Some(4));
        assert_eq!(effective_options(5, 2), None);
        assert_eq!(effective_options(2, 1), Some(2));
        assert_eq!(effective_options(3, 1), None);
    }

    #[test]
    fn sub_seeds_differ_per_id() {
        assert_ne!(sub_seed(1, "a"), sub_seed(1, "b"));
        assert_ne!(sub_seed(1, "a"), sub_seed(2, "a"));
        assert_eq!(sub_seed(1, "a"), sub_seed(1, "a"));
    }

    #[test]
    fn family_names_round_trip() {
        for f in PromptFamily::ALL {
            assert_eq!(f.as_str().parse::<PromptFamily>().unwrap(), f);
        }
        assert!("gpt".parse::<PromptFamily>().is_err());
    }

    #[test]
    fn templates_end_with_instruction() {
        let t = PromptTemplates::default();
        for f in PromptFamily::ALL {
            assert!(t.get(f).trim_end().ends_with("and nothing else."));
        }
    }
}
