//! Scenario catalog: the 43 mineable scenario types, their definitions,
//! option texts, question templates and negative lists.
//!
//! Entries flagged `distractor_only` appear in negative lists but are never
//! emitted as instances; the miner still detects them so that negatives stay
//! sound.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_CATALOG_VERSION: &str = "stsnu.v1";

const DEFAULT_CATALOG_JSON: &str = include_str!("../../../data/catalog/stsnu.v1.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioCategory {
    Ego,
    Agent,
    EgoToAgent,
    AgentToAgent,
}

impl ScenarioCategory {
    pub const ALL: [ScenarioCategory; 4] = [
        ScenarioCategory::Ego,
        ScenarioCategory::Agent,
        ScenarioCategory::EgoToAgent,
        ScenarioCategory::AgentToAgent,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioCategory::Ego => "ego",
            ScenarioCategory::Agent => "agent",
            ScenarioCategory::EgoToAgent => "ego_to_agent",
            ScenarioCategory::AgentToAgent => "agent_to_agent",
        }
    }

    /// Column heading used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            ScenarioCategory::Ego => "Ego",
            ScenarioCategory::Agent => "Agent",
            ScenarioCategory::EgoToAgent => "Ego-Agent",
            ScenarioCategory::AgentToAgent => "Agent-Agent",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            ScenarioCategory::Ego => 0,
            ScenarioCategory::Agent | ScenarioCategory::EgoToAgent => 1,
            ScenarioCategory::AgentToAgent => 2,
        }
    }

    /// Number of mineable entries the shipped catalog defines per category.
    pub fn expected_count(self) -> usize {
        match self {
            ScenarioCategory::Ego => 6,
            ScenarioCategory::Agent => 17,
            ScenarioCategory::EgoToAgent => 7,
            ScenarioCategory::AgentToAgent => 13,
        }
    }
}

impl fmt::Display for ScenarioCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogEntry {
    pub name: String,
    pub category: ScenarioCategory,
    pub arity: usize,
    #[serde(default, skip_serializing_if = "is_false")]
    pub distractor_only: bool,
    pub definition_text: String,
    /// `definition_text` with agent mentions replaced by `{AGENTn}`.
    pub definition_template: String,
    pub option_text: String,
    pub negatives: Vec<String>,
    pub question_template: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogViolation {
    pub entry: String,
    pub rule: String,
}

impl fmt::Display for CatalogViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.entry, self.rule)
    }
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("catalog syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("duplicate catalog entry `{0}`")]
    Duplicate(String),
    #[error("entry `{entry}` lists unknown negative `{negative}`")]
    UnknownNegative { entry: String, negative: String },
    #[error("catalog invalid: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<CatalogViolation>),
    #[error("template for `{entry}` expects {expected} agent(s), got {got}")]
    Arity { entry: String, expected: usize, got: usize },
    #[error("unknown scenario type `{0}`")]
    UnknownType(String),
}

#[derive(Debug, Clone)]
pub struct Catalog {
    pub version: String,
    entries: Vec<CatalogEntry>,
    index: HashMap<String, usize>,
}

/// Parses a catalog document and resolves cross references, without the
/// cardinality checks of [`validate_catalog`].
pub fn parse_catalog(text: &str, version: &str) -> Result<Catalog, CatalogError> {
    let entries: Vec<CatalogEntry> = serde_json::from_str(text).map_err(|e| CatalogError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut index = HashMap::new();
    for (i, e) in entries.iter().enumerate() {
        if index.insert(e.name.clone(), i).is_some() {
            return Err(CatalogError::Duplicate(e.name.clone()));
        }
    }
    for e in &entries {
        if let Some(n) = e.negatives.iter().find(|n| !index.contains_key(*n)) {
            return Err(CatalogError::UnknownNegative { entry: e.name.clone(), negative: n.clone() });
        }
    }
    Ok(Catalog { version: version.to_string(), entries, index })
}

/// Parses and fully validates a catalog.
pub fn load_catalog(text: &str, version: &str) -> Result<Catalog, CatalogError> {
    let cat = parse_catalog(text, version)?;
    let violations = validate_catalog(&cat);
    if violations.is_empty() {
        Ok(cat)
    } else {
        Err(CatalogError::Invalid(violations))
    }
}

/// The catalog shipped with the crate.
pub fn default_catalog() -> Catalog {
    load_catalog(DEFAULT_CATALOG_JSON, DEFAULT_CATALOG_VERSION).expect("shipped catalog is valid")
}

pub fn default_catalog_json() -> &'static str {
    DEFAULT_CATALOG_JSON
}

fn placeholders(template: &str) -> Vec<usize> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(i) = rest.find("{AGENT") {
        let tail = &rest[i + 6..];
        let digits: String = tail.chars().take_while(|c| c.is_ascii_digit()).collect();
        if tail[digits.len()..].starts_with('}') {
            if let Ok(n) = digits.parse() {
                out.push(n);
            }
        }
        rest = &rest[i + 6..];
    }
    out
}

/// Checks cardinalities, arity, self references, negative contexts and
/// template placeholders. Empty means valid.
pub fn validate_catalog(cat: &Catalog) -> Vec<CatalogViolation> {
    let mut out = Vec::new();
    let mut v = |entry: &str, rule: String| out.push(CatalogViolation { entry: entry.to_string(), rule });
    let mut counts: BTreeMap<ScenarioCategory, usize> = BTreeMap::new();
    let mut option_texts: HashMap<&str, &str> = HashMap::new();
    for e in &cat.entries {
        if e.arity != e.category.arity() {
            v(&e.name, format!("arity {} does not match category {}", e.arity, e.category));
        }
        if !e.distractor_only {
            *counts.entry(e.category).or_default() += 1;
            if e.negatives.is_empty() {
                v(&e.name, "negatives must not be empty".into());
            }
        }
        if e.negatives.iter().any(|n| n == &e.name) {
            v(&e.name, "lists itself as a negative".into());
        }
        let mut seen = HashSet::new();
        for n in &e.negatives {
            if !seen.insert(n) {
                v(&e.name, format!("negative `{n}` listed twice"));
            }
            match cat.get(n) {
                None => v(&e.name, format!("unknown negative `{n}`")),
                Some(ne) if ne.arity > e.arity => {
                    v(&e.name, format!("negative `{n}` needs more agents than the question provides"))
                }
                _ => {}
            }
        }
        for (field, template) in [
            ("question_template", &e.question_template),
            ("option_text", &e.option_text),
            ("definition_template", &e.definition_template),
        ] {
            let ph = placeholders(template);
            if ph.iter().any(|&n| n == 0 || n > e.arity) {
                v(&e.name, format!("{field} references an agent beyond arity {}", e.arity));
            }
            if field == "question_template" {
                for k in 1..=e.arity {
                    if !ph.contains(&k) {
                        v(&e.name, format!("question_template missing {{AGENT{k}}}"));
                    }
                }
            }
        }
        if let Some(other) = option_texts.insert(&e.option_text, &e.name) {
            v(&e.name, format!("option text duplicates `{other}`"));
        }
    }
    for cat_kind in ScenarioCategory::ALL {
        let got = counts.get(&cat_kind).copied().unwrap_or(0);
        if got != cat_kind.expected_count() {
            v(
                cat_kind.as_str(),
                format!("category has {got} mineable entries, expected {}", cat_kind.expected_count()),
            );
        }
    }
    out
}

/// Substitutes `{AGENT1}`, `{AGENT2}` with the given tokens.
pub fn render_template(template: &str, agents: &[&str]) -> String {
    let mut s = template.to_string();
    for (i, a) in agents.iter().enumerate() {
        s = s.replace(&format!("{{AGENT{}}}", i + 1), a);
    }
    s
}

impl Catalog {
    pub fn entries(&self) -> &[CatalogEntry] {
        &self.entries
    }

    pub fn get(&self, name: &str) -> Option<&CatalogEntry> {
        self.index.get(name).map(|&i| &self.entries[i])
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    /// Entries that can be emitted as instances.
    pub fn mineable(&self) -> impl Iterator<Item = &CatalogEntry> {
        self.entries.iter().filter(|e| !e.distractor_only)
    }

    pub fn category_counts(&self) -> BTreeMap<ScenarioCategory, usize> {
        let mut m = BTreeMap::new();
        for e in self.mineable() {
            *m.entry(e.category).or_default() += 1;
        }
        m
    }

    /// The entry's negatives minus `context` minus `rejected`, in catalog
    /// order.
    pub fn negatives_of(
        &self,
        name: &str,
        context: &HashSet<String>,
        rejected: &HashSet<String>,
    ) -> Result<Vec<String>, CatalogError> {
        let e = self.get(name).ok_or_else(|| CatalogError::UnknownType(name.to_string()))?;
        Ok(e
            .negatives
            .iter()
            .filter(|n| !context.contains(*n) && !rejected.contains(*n))
            .cloned()
            .collect())
    }

    /// Question sentence with `{AGENTn}` tokens left in place; fails when
    /// the number of supplied agents does not match the entry.
    pub fn question_text(&self, name: &str, n_agents: usize) -> Result<String, CatalogError> {
        let e = self.get(name).ok_or_else(|| CatalogError::UnknownType(name.to_string()))?;
        if n_agents != e.arity {
            return Err(CatalogError::Arity { entry: name.to_string(), expected: e.arity, got: n_agents });
        }
        Ok(e.question_template.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(name: &str, negatives: &[&str]) -> serde_json::Value {
        serde_json::json!({
            "name": name,
            "category": "ego",
            "arity": 0,
            "definition_text": "d",
            "definition_template": "d",
            "option_text": format!("opt {name}"),
            "negatives": negatives,
            "question_template": "q?"
        })
    }

    #[test]
    fn default_catalog_cardinalities() {
        let cat = default_catalog();
        assert_eq!(cat.mineable().count(), 43);
        let c = cat.category_counts();
        assert_eq!(c[&ScenarioCategory::Ego], 6);
        assert_eq!(c[&ScenarioCategory::Agent], 17);
        assert_eq!(c[&ScenarioCategory::EgoToAgent], 7);
        assert_eq!(c[&ScenarioCategory::AgentToAgent], 13);
        assert!(validate_catalog(&cat).is_empty());
    }

    #[test]
    fn left_turn_negatives() {
        let cat = default_catalog();
        let negs = &cat.get("ego_left_turn").unwrap().negatives;
        for n in [
            "ego_stop",
            "ego_decelerate",
            "ego_right_turn",
            "ego_u_turn",
            "ego_lane_change",
            "ego_reverse",
            "ego_accelerate",
        ] {
            assert!(negs.iter().any(|x| x == n), "{n}");
        }
    }

    #[test]
    fn negatives_of_set_difference() {
        let cat = default_catalog();
        let none = HashSet::new();
        assert_eq!(cat.negatives_of("ego_accelerate", &none, &none).unwrap().len(), 7);
        let ctx: HashSet<String> = ["ego_accelerate".to_string()].into();
        let got = cat.negatives_of("ego_right_turn", &ctx, &none).unwrap();
        assert!(!got.contains(&"ego_accelerate".to_string()));
        let all: HashSet<String> = cat.get("ego_stop").unwrap().negatives.iter().cloned().collect();
        assert!(cat.negatives_of("ego_stop", &none, &all).unwrap().is_empty());
    }

    #[test]
    fn missing_negative_is_a_load_error() {
        let doc = serde_json::json!([minimal("a", &["ghost"])]).to_string();
        assert!(matches!(parse_catalog(&doc, "t"), Err(CatalogError::UnknownNegative { .. })));
    }

    #[test]
    fn duplicate_entry_is_a_load_error() {
        let doc = serde_json::json!([minimal("a", &[]), minimal("a", &[])]).to_string();
        assert!(matches!(parse_catalog(&doc, "t"), Err(CatalogError::Duplicate(n)) if n == "a"));
    }

    #[test]
    fn self_reference_and_missing_placeholder() {
        let mut entries: Vec<CatalogEntry> = default_catalog().entries().to_vec();
        let i = entries.iter().position(|e| e.name == "ego_stop").unwrap();
        entries[i].negatives.push("ego_stop".into());
        let j = entries.iter().position(|e| e.name == "agent_follow_agent").unwrap();
        entries[j].question_template = entries[j].question_template.replace("{AGENT2}", "other");
        let cat = parse_catalog(&serde_json::to_string(&entries).unwrap(), "t").unwrap();
        let v = validate_catalog(&cat);
        assert!(v.iter().any(|x| x.entry == "ego_stop" && x.rule.contains("itself")));
        assert!(v.iter().any(|x| x.entry == "agent_follow_agent" && x.rule.contains("{AGENT2}")));
    }

    #[test]
    fn question_arity_checked() {
        let cat = default_catalog();
        assert_eq!(
            cat.question_text("ego_stop", 0).unwrap(),
            "Which of the following options best describes ego driving maneuver?"
        );
        assert!(cat.question_text("agent_stop", 2).is_err());
    }
}
