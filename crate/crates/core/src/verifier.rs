//! Review store and merge rules for human verification.
//!
//! The store is an append-only JSON-lines event log replayed on open. A torn
//! final line (crash mid-write) is dropped with a warning; damage anywhere
//! else is an error. All mutation goes through `&mut Store`, so a caller
//! that wraps it in a lock gets a single writer.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{assign_views, distance};
use crate::jsonl::{parse_jsonl, JsonlError};
use crate::miner::{InstanceStatus, ScenarioInstance};
use crate::scene::{AgentClass, Boundary, Crosswalk, DrivableArea, Lane, Scene};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Review {
    pub scenario_id: String,
    pub reviewer: String,
    pub positive: bool,
    #[serde(default)]
    pub invalid_negatives: Vec<String>,
    #[serde(default)]
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewSession {
    pub session_id: String,
    pub reviewer: String,
    /// Unix milliseconds.
    pub created_at: u64,
    pub assigned: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositiveRule {
    #[default]
    Majority,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeRule {
    #[default]
    FullAgreement,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MergePolicy {
    pub positive_rule: PositiveRule,
    pub negative_rule: NegativeRule,
    pub quorum: usize,
}

impl Default for MergePolicy {
    fn default() -> Self {
        MergePolicy { positive_rule: PositiveRule::Majority, negative_rule: NegativeRule::FullAgreement, quorum: 3 }
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("scenario `{0}` already stored with a different payload")]
    Conflict(String),
    #[error("{what} `{id}` not found")]
    NotFound { what: &'static str, id: String },
    #[error("{field}: {message}")]
    Validation { field: String, message: String },
    #[error("store log line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl StoreError {
    fn validation(field: &str, message: impl Into<String>) -> Self {
        StoreError::Validation { field: field.to_string(), message: message.into() }
    }

    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            StoreError::Conflict(_) => "conflict",
            StoreError::NotFound { .. } => "not_found",
            StoreError::Validation { .. } => "validation",
            StoreError::Corrupt { .. } => "corrupt",
            StoreError::Io(_) => "io",
        }
    }

    pub fn field(&self) -> Option<&str> {
        match self {
            StoreError::Validation { field, .. } => Some(field),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Event {
    Ingest { instance: ScenarioInstance },
    Session { session: ReviewSession },
    Review { review: Review },
    Merge { policy: MergePolicy },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AgreementStats {
    /// Instances with at least `quorum` reviews.
    pub n_merged: usize,
    /// Instances on which every reviewer gave the same verdict.
    pub positive_agreements: usize,
    pub positive_agreement: f64,
    /// Instances whose reviewers marked different sets of invalid negatives.
    pub negative_disagreements: usize,
    pub negative_disagreement: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MergeOutcome {
    /// Accepted instances with their surviving negatives, sorted by id.
    pub verified: Vec<ScenarioInstance>,
    pub rejected: Vec<String>,
    pub under_quorum: Vec<String>,
    /// Accepted ids left without any surviving negative.
    pub unusable: Vec<String>,
    pub stats: AgreementStats,
}

fn ratio(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

/// Applies the merge rules to a fixed set of instances and reviews. A
/// majority means strictly more than half of the reviews received; ties
/// reject. A negative survives only if no reviewer marked it invalid.
pub fn merge_reviews(instances: &[ScenarioInstance], reviews: &[Review], policy: &MergePolicy) -> MergeOutcome {
    let mut by_id: HashMap<&str, Vec<&Review>> = HashMap::new();
    for r in reviews {
        by_id.entry(&r.scenario_id).or_default().push(r);
    }
    let mut sorted: Vec<&ScenarioInstance> = instances.iter().collect();
    sorted.sort_by(|a, b| a.scenario_id.cmp(&b.scenario_id));
    let mut out = MergeOutcome::default();
    for inst in sorted {
        let rs = by_id.get(inst.scenario_id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
        if rs.len() < policy.quorum.max(1) {
            out.under_quorum.push(inst.scenario_id.clone());
            continue;
        }
        out.stats.n_merged += 1;
        let positives = rs.iter().filter(|r| r.positive).count();
        if positives == 0 || positives == rs.len() {
            out.stats.positive_agreements += 1;
        }
        let sets: BTreeSet<BTreeSet<&str>> =
            rs.iter().map(|r| r.invalid_negatives.iter().map(String::as_str).collect()).collect();
        if sets.len() > 1 {
            out.stats.negative_disagreements += 1;
        }
        if 2 * positives <= rs.len() {
            out.rejected.push(inst.scenario_id.clone());
            continue;
        }
        let invalid: BTreeSet<&str> = sets.iter().flatten().copied().collect();
        let mut v = inst.clone();
        v.negatives.retain(|n| !invalid.contains(n.as_str()));
        v.status = InstanceStatus::Accepted;
        if v.negatives.is_empty() {
            out.unusable.push(v.scenario_id.clone());
        }
        out.verified.push(v);
    }
    out.stats.positive_agreement = ratio(out.stats.positive_agreements, out.stats.n_merged);
    out.stats.negative_disagreement = ratio(out.stats.negative_disagreements, out.stats.n_merged);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewerStats {
    pub reviewer: String,
    pub reviews: usize,
    pub mean_s: f64,
    pub median_s: f64,
    pub total_hours: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub instances: usize,
    pub reviews: usize,
    pub reviewers: Vec<ReviewerStats>,
    pub total_hours: f64,
    /// Mean review time over all reviews.
    pub seconds_per_sample: f64,
    pub agreement: AgreementStats,
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn review_stats(reviews: &[Review], agreement: AgreementStats, instances: usize) -> StatsReport {
    let mut per: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in reviews {
        per.entry(&r.reviewer).or_default().push(r.elapsed_ms as f64 / 1000.0);
    }
    let reviewers = per
        .into_iter()
        .map(|(name, mut secs)| {
            let total: f64 = secs.iter().sum();
            ReviewerStats {
                reviewer: name.to_string(),
                reviews: secs.len(),
                mean_s: total / secs.len() as f64,
                median_s: median(&mut secs),
                total_hours: total / 3600.0,
            }
        })
        .collect();
    let total_s: f64 = reviews.iter().map(|r| r.elapsed_ms as f64 / 1000.0).sum();
    StatsReport {
        instances,
        reviews: reviews.len(),
        reviewers,
        total_hours: total_s / 3600.0,
        seconds_per_sample: if reviews.is_empty() { 0.0 } else { total_s / reviews.len() as f64 },
        agreement,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub scenario_id: String,
    pub scene_id: String,
    #[serde(rename = "type")]
    pub scenario_type: String,
    pub status: InstanceStatus,
    pub reviews: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Page {
    pub total: usize,
    pub offset: usize,
    pub items: Vec<ScenarioSummary>,
}

pub struct Store {
    log: Option<(PathBuf, File)>,
    instances: BTreeMap<String, ScenarioInstance>,
    reviews: BTreeMap<(String, String), Review>,
    sessions: BTreeMap<String, ReviewSession>,
    last_policy: MergePolicy,
}

impl Default for Store {
    fn default() -> Self {
        Store::in_memory()
    }
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

impl Store {
    pub fn in_memory() -> Self {
        Store {
            log: None,
            instances: BTreeMap::new(),
            reviews: BTreeMap::new(),
            sessions: BTreeMap::new(),
            last_policy: MergePolicy::default(),
        }
    }

    /// Opens or creates the log at `path` and replays it.
    pub fn open(path: &Path) -> Result<Self, StoreError> {
        let mut store = Store::in_memory();
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(e.into()),
        };
        let lines: Vec<&str> = text.lines().collect();
        let n = lines.len();
        let mut keep = String::with_capacity(text.len() + 1);
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<Event>(line) {
                Ok(ev) => {
                    store.apply(ev);
                    keep.push_str(line);
                    keep.push('\n');
                }
                Err(e) if i + 1 == n && !text.ends_with('\n') => {
                    warn!("{}: dropping torn final line {}: {e}", path.display(), i + 1);
                }
                Err(e) => return Err(StoreError::Corrupt { line: i + 1, message: e.to_string() }),
            }
        }
        if keep != text {
            std::fs::write(path, &keep)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        store.log = Some((path.to_path_buf(), file));
        Ok(store)
    }

    pub fn path(&self) -> Option<&Path> {
        self.log.as_ref().map(|(p, _)| p.as_path())
    }

    fn apply(&mut self, ev: Event) {
        match ev {
            Event::Ingest { instance } => {
                self.instances.insert(instance.scenario_id.clone(), instance);
            }
            Event::Session { session } => {
                self.sessions.insert(session.reviewer.clone(), session);
            }
            Event::Review { review } => {
                self.reviews.insert((review.scenario_id.clone(), review.reviewer.clone()), review);
            }
            Event::Merge { policy } => {
                self.apply_merge(&policy);
            }
        }
    }

    fn record(&mut self, events: Vec<Event>) -> Result<(), StoreError> {
        if let Some((_, file)) = &mut self.log {
            let mut buf = Vec::new();
            for ev in &events {
                serde_json::to_writer(&mut buf, ev).map_err(io::Error::from)?;
                buf.push(b'\n');
            }
            file.write_all(&buf)?;
            file.sync_data()?;
        }
        for ev in events {
            self.apply(ev);
        }
        Ok(())
    }

    /// Stores new instances with status `mined`. Re-ingesting an identical
    /// instance is a no-op; a differing payload under a known id fails the
    /// whole batch. Returns the number of new instances.
    pub fn ingest(&mut self, instances: Vec<ScenarioInstance>) -> Result<usize, StoreError> {
        let mut fresh: BTreeMap<String, ScenarioInstance> = BTreeMap::new();
        for mut inst in instances {
            inst.status = InstanceStatus::Mined;
            let known = self.instances.get(&inst.scenario_id).or_else(|| fresh.get(&inst.scenario_id));
            match known {
                Some(k) if same_payload(k, &inst) => continue,
                Some(_) => return Err(StoreError::Conflict(inst.scenario_id)),
                None => {
                    fresh.insert(inst.scenario_id.clone(), inst);
                }
            }
        }
        let n = fresh.len();
        self.record(fresh.into_values().map(|instance| Event::Ingest { instance }).collect())?;
        Ok(n)
    }

    /// Parses a scenario JSON-lines document and ingests it.
    pub fn ingest_jsonl(&mut self, text: &str) -> Result<usize, StoreError> {
        let items: Vec<ScenarioInstance> = parse_jsonl(text).map_err(|e| match e {
            JsonlError::Line { line, message } => StoreError::Validation { field: format!("line {line}"), message },
            JsonlError::Io(e) => StoreError::Io(e),
        })?;
        self.ingest(items)
    }

    /// Returns the reviewer's session, creating it on first use. The session
    /// is assigned every instance stored at creation time.
    pub fn create_session(&mut self, reviewer: &str) -> Result<ReviewSession, StoreError> {
        let reviewer = reviewer.trim();
        if reviewer.is_empty() {
            return Err(StoreError::validation("reviewer", "must not be empty"));
        }
        if let Some(s) = self.sessions.get(reviewer) {
            return Ok(s.clone());
        }
        let session = ReviewSession {
            session_id: format!("session-{}", self.sessions.len() + 1),
            reviewer: reviewer.to_string(),
            created_at: now_ms(),
            assigned: self.instances.keys().cloned().collect(),
        };
        self.record(vec![Event::Session { session: session.clone() }])?;
        Ok(session)
    }

    pub fn session(&self, reviewer: &str) -> Option<&ReviewSession> {
        self.sessions.get(reviewer)
    }

    /// Stores a review, replacing an earlier one by the same reviewer.
    pub fn submit_review(&mut self, review: Review) -> Result<Review, StoreError> {
        let Some(inst) = self.instances.get(&review.scenario_id) else {
            return Err(StoreError::NotFound { what: "scenario", id: review.scenario_id });
        };
        if !self.sessions.contains_key(&review.reviewer) {
            return Err(StoreError::validation("reviewer", format!("`{}` has no session", review.reviewer)));
        }
        if let Some(bad) = review.invalid_negatives.iter().find(|n| !inst.negatives.contains(n)) {
            return Err(StoreError::validation(
                "invalid_negatives",
                format!("`{bad}` is not a negative of {}", review.scenario_id),
            ));
        }
        let mut review = review;
        review.invalid_negatives.sort();
        review.invalid_negatives.dedup();
        self.record(vec![Event::Review { review: review.clone() }])?;
        Ok(review)
    }

    pub fn instance(&self, scenario_id: &str) -> Option<&ScenarioInstance> {
        self.instances.get(scenario_id)
    }

    pub fn instances(&self) -> impl Iterator<Item = &ScenarioInstance> {
        self.instances.values()
    }

    pub fn reviews(&self) -> impl Iterator<Item = &Review> {
        self.reviews.values()
    }

    pub fn reviews_for(&self, scenario_id: &str) -> Vec<&Review> {
        self.reviews.values().filter(|r| r.scenario_id == scenario_id).collect()
    }

    /// Instances in id order. With `reviewer`, only those that reviewer has
    /// not reviewed yet.
    pub fn list(&self, status: Option<InstanceStatus>, reviewer: Option<&str>, offset: usize, limit: usize) -> Page {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for (id, _) in self.reviews.keys() {
            *counts.entry(id).or_default() += 1;
        }
        let matching: Vec<&ScenarioInstance> = self
            .instances
            .values()
            .filter(|i| status.is_none_or(|s| i.status == s))
            .filter(|i| {
                reviewer.is_none_or(|r| !self.reviews.contains_key(&(i.scenario_id.clone(), r.to_string())))
            })
            .collect();
        let items = matching
            .iter()
            .skip(offset)
            .take(limit)
            .map(|i| ScenarioSummary {
                scenario_id: i.scenario_id.clone(),
                scene_id: i.scene_id.clone(),
                scenario_type: i.scenario_type.clone(),
                status: i.status,
                reviews: counts.get(i.scenario_id.as_str()).copied().unwrap_or(0),
            })
            .collect();
        Page { total: matching.len(), offset, items }
    }

    fn outcome(&self, policy: &MergePolicy) -> MergeOutcome {
        let instances: Vec<ScenarioInstance> = self.instances.values().cloned().collect();
        let reviews: Vec<Review> = self.reviews.values().cloned().collect();
        merge_reviews(&instances, &reviews, policy)
    }

    fn apply_merge(&mut self, policy: &MergePolicy) {
        let out = self.outcome(policy);
        for id in &out.rejected {
            if let Some(i) = self.instances.get_mut(id) {
                i.status = InstanceStatus::Rejected;
            }
        }
        for id in &out.under_quorum {
            if let Some(i) = self.instances.get_mut(id) {
                i.status = InstanceStatus::Mined;
            }
        }
        for v in &out.verified {
            if let Some(i) = self.instances.get_mut(&v.scenario_id) {
                i.status = InstanceStatus::Accepted;
            }
        }
        self.last_policy = policy.clone();
    }

    /// Merges all reviews and records the resulting statuses. Stored
    /// negatives stay untouched; the verified set carries the pruned ones.
    pub fn merge(&mut self, policy: &MergePolicy) -> Result<MergeOutcome, StoreError> {
        if policy.quorum < 1 {
            return Err(StoreError::validation("quorum", "must be at least 1"));
        }
        let out = self.outcome(policy);
        self.record(vec![Event::Merge { policy: policy.clone() }])?;
        Ok(out)
    }

    /// Timing per reviewer plus agreement under the last merge policy.
    pub fn stats(&self) -> StatsReport {
        let reviews: Vec<Review> = self.reviews.values().cloned().collect();
        review_stats(&reviews, self.outcome(&self.last_policy).stats, self.instances.len())
    }
}

fn same_payload(a: &ScenarioInstance, b: &ScenarioInstance) -> bool {
    let mut a = a.clone();
    a.status = b.status;
    a == *b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcerptState {
    pub frame: usize,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub speed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcerptSubject {
    /// `"ego"` for the ego vehicle.
    pub id: String,
    pub class: Option<AgentClass>,
    pub states: Vec<ExcerptState>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExcerptMap {
    pub lanes: Vec<Lane>,
    pub boundaries: Vec<Boundary>,
    pub crosswalks: Vec<Crosswalk>,
    pub drivable_area: Vec<DrivableArea>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameViews {
    pub frame: usize,
    /// Chosen view per subject agent, in `agent_ids` order.
    pub views: Vec<Option<String>>,
    /// Image path per camera named in `views`, when the scene lists them.
    pub images: BTreeMap<String, String>,
}

/// What a reviewer needs to judge one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneExcerpt {
    pub scene_id: String,
    pub subjects: Vec<ExcerptSubject>,
    pub map: ExcerptMap,
    pub frames: Vec<FrameViews>,
}

pub const EXCERPT_RADIUS: f64 = 60.0;

/// Subject trajectories over the window, map elements with a vertex within
/// 60 m of any subject position, and per-frame view names.
pub fn scene_excerpt(instance: &ScenarioInstance, scene: &Scene) -> SceneExcerpt {
    let window = instance.frame_start..=instance.frame_end;
    let mut subjects = vec![ExcerptSubject {
        id: "ego".into(),
        class: None,
        states: scene
            .ego
            .iter()
            .filter(|e| window.contains(&e.frame))
            .map(|e| ExcerptState { frame: e.frame, x: e.x, y: e.y, yaw: e.yaw, speed: e.speed })
            .collect(),
    }];
    for id in &instance.agent_ids {
        if let Some(a) = scene.agent(id) {
            subjects.push(ExcerptSubject {
                id: id.clone(),
                class: Some(a.class),
                states: a
                    .states
                    .iter()
                    .filter(|s| window.contains(&s.frame))
                    .map(|s| ExcerptState { frame: s.frame, x: s.x, y: s.y, yaw: s.yaw, speed: s.speed })
                    .collect(),
            });
        }
    }
    let anchors: Vec<[f64; 2]> = subjects.iter().flat_map(|s| s.states.iter().map(|p| [p.x, p.y])).collect();
    let near = |pts: &[[f64; 2]]| pts.iter().any(|p| anchors.iter().any(|a| distance(*a, *p) <= EXCERPT_RADIUS));
    let map = ExcerptMap {
        lanes: scene.map.lanes.iter().filter(|l| near(&l.centerline)).cloned().collect(),
        boundaries: scene.map.boundaries.iter().filter(|b| near(&b.polyline)).cloned().collect(),
        crosswalks: scene.map.crosswalks.iter().filter(|c| near(&c.polygon)).cloned().collect(),
        drivable_area: scene.map.drivable_area.iter().filter(|d| near(&d.polygon)).cloned().collect(),
    };
    let va = assign_views(scene, &instance.agent_ids, instance.frame_start, instance.frame_end);
    let frames = window
        .clone()
        .enumerate()
        .map(|(k, frame)| {
            let views = va.per_frame.get(k).cloned().unwrap_or_default();
            let images = scene
                .cameras()
                .iter()
                .filter(|c| views.iter().flatten().any(|v| *v == c.name))
                .filter_map(|c| {
                    let p = c.image_paths.as_ref()?.get(frame)?;
                    Some((c.name.clone(), p.clone()))
                })
                .collect();
            FrameViews { frame, views, images }
        })
        .collect();
    SceneExcerpt { scene_id: scene.scene_id.clone(), subjects, map, frames }
}
