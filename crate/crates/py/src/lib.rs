//! Python bindings. Documents cross the boundary as JSON strings, in the
//! same formats the command-line tool reads and writes.

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

pub mod api {
    use std::collections::HashMap;

    use serde_json::json;
    use sts_core::catalog::{default_catalog_json, load_catalog};
    use sts_core::jsonl::{parse_jsonl, to_jsonl_string};
    use sts_core::questgen::{generate_questions, render_prompt as render, BenchmarkDoc, PromptFamily, PromptTemplates, Question};
    use sts_core::sampler::{score_all, subsample as run_subsample, SamplingConfig};
    use sts_core::scorer::{self, AnswerLine};
    use sts_core::synth;
    use sts_core::verifier::{merge_reviews as merge, MergePolicy, Review, StoreError};
    use sts_core::{default_catalog, Catalog, MinerConfig, ScenarioInstance, Scene};
    use thiserror::Error;

    #[derive(Debug, Error)]
    pub enum ApiError {
        #[error("{0}")]
        Invalid(String),
        #[error("{0}")]
        Io(String),
    }

    impl From<StoreError> for ApiError {
        fn from(e: StoreError) -> Self {
            match e {
                StoreError::Io(e) => ApiError::Io(e.to_string()),
                e => ApiError::Invalid(e.to_string()),
            }
        }
    }

    fn invalid(e: impl std::fmt::Display) -> ApiError {
        ApiError::Invalid(e.to_string())
    }

    pub type Result<T> = std::result::Result<T, ApiError>;

    fn catalog(text: Option<&str>) -> Result<Catalog> {
        match text {
            Some(t) => load_catalog(t, "custom").map_err(invalid),
            None => Ok(default_catalog()),
        }
    }

    fn scenes(docs: &[String]) -> Result<HashMap<String, Scene>> {
        docs.iter()
            .map(|d| sts_core::parse_scene(d.as_bytes()).map(|s| (s.scene_id.clone(), s)).map_err(invalid))
            .collect()
    }

    pub fn catalog_json() -> String {
        default_catalog_json().to_string()
    }

    /// Violations as `path: rule` strings; a syntax error is a single entry.
    pub fn validate_scene(scene_json: &str) -> Vec<String> {
        match serde_json::from_str::<Scene>(scene_json) {
            Ok(s) => sts_core::validate_scene(&s).iter().map(|v| v.to_string()).collect(),
            Err(e) => vec![e.to_string()],
        }
    }

    /// Canonical serialization of a valid scene.
    pub fn normalize_scene(scene_json: &str) -> Result<String> {
        let s = sts_core::parse_scene(scene_json.as_bytes()).map_err(invalid)?;
        String::from_utf8(sts_core::serialize_scene(&s)).map_err(invalid)
    }

    pub fn mine_scene(scene_json: &str, catalog_json: Option<&str>, config_json: Option<&str>) -> Result<String> {
        let scene = sts_core::parse_scene(scene_json.as_bytes()).map_err(invalid)?;
        let cfg: MinerConfig = match config_json {
            Some(c) => serde_json::from_str(c).map_err(invalid)?,
            None => MinerConfig::default(),
        };
        let problems = cfg.validate();
        if !problems.is_empty() {
            return Err(ApiError::Invalid(problems.join("; ")));
        }
        Ok(to_jsonl_string(&sts_core::mine_scene(&scene, &catalog(catalog_json)?, &cfg)))
    }

    pub fn synth_kinds() -> Vec<String> {
        synth::synth_kinds().into_iter().map(String::from).collect()
    }

    /// The scene plus its expected labels, as `{"scene": ..., "labels": [...]}`.
    pub fn synth_scene(kind: &str, seed: u64) -> Result<String> {
        let case = synth::synth_scene(kind, seed).map_err(invalid)?;
        Ok(json!({"scene": case.scene, "labels": case.labels, "near_misses": case.near_misses}).to_string())
    }

    /// Returns the kept instances (JSON lines) and the per-type report (JSON).
    pub fn subsample(instances_jsonl: &str, scene_jsons: &[String], config_json: Option<&str>) -> Result<(String, String)> {
        let cfg: SamplingConfig = match config_json {
            Some(c) => serde_json::from_str(c).map_err(invalid)?,
            None => SamplingConfig::default(),
        };
        let problems = cfg.validate();
        if !problems.is_empty() {
            return Err(ApiError::Invalid(problems.join("; ")));
        }
        let instances: Vec<ScenarioInstance> = parse_jsonl(instances_jsonl).map_err(invalid)?;
        let scores = score_all(&instances, &scenes(scene_jsons)?, &cfg);
        let out = run_subsample(&instances, &scores, &cfg);
        Ok((to_jsonl_string(&out.kept), serde_json::to_string(&out.report).map_err(invalid)?))
    }

    pub fn merge_reviews(instances_jsonl: &str, reviews_jsonl: &str, quorum: usize) -> Result<String> {
        if quorum < 1 {
            return Err(ApiError::Invalid("quorum must be at least 1".into()));
        }
        let instances: Vec<ScenarioInstance> = parse_jsonl(instances_jsonl).map_err(invalid)?;
        let reviews: Vec<Review> = parse_jsonl(reviews_jsonl).map_err(invalid)?;
        let policy = MergePolicy { quorum, ..MergePolicy::default() };
        serde_json::to_string(&merge(&instances, &reviews, &policy)).map_err(invalid)
    }

    pub fn generate_benchmark(
        instances_jsonl: &str,
        scene_jsons: &[String],
        options: usize,
        seed: u64,
        catalog_json: Option<&str>,
    ) -> Result<String> {
        let instances: Vec<ScenarioInstance> = parse_jsonl(instances_jsonl).map_err(invalid)?;
        let doc = generate_questions(&instances, &scenes(scene_jsons)?, &catalog(catalog_json)?, options, seed).map_err(invalid)?;
        Ok(doc.to_json())
    }

    pub fn render_prompt(question_json: &str, family: &str) -> Result<String> {
        let q: Question = serde_json::from_str(question_json).map_err(invalid)?;
        let fam: PromptFamily = family.parse().map_err(invalid)?;
        render(&q, fam, &PromptTemplates::default()).map_err(invalid)
    }

    pub fn parse_letter(raw: &str, k: usize) -> Option<String> {
        scorer::parse_letter(raw, k)
    }

    pub fn score(benchmark_json: &str, answers_jsonl: &str) -> Result<String> {
        let doc: BenchmarkDoc = serde_json::from_str(benchmark_json).map_err(invalid)?;
        let answers: Vec<AnswerLine> = parse_jsonl(answers_jsonl).map_err(invalid)?;
        let r = scorer::score(&doc, &answers).map_err(invalid)?;
        serde_json::to_string(&r).map_err(invalid)
    }

    pub fn ground_truth_answers(benchmark_json: &str) -> Result<String> {
        let doc: BenchmarkDoc = serde_json::from_str(benchmark_json).map_err(invalid)?;
        Ok(to_jsonl_string(&scorer::ground_truth_answers(&doc)))
    }
}

use api::ApiError;

impl From<ApiError> for PyErr {
    fn from(e: ApiError) -> PyErr {
        match e {
            ApiError::Invalid(m) => PyValueError::new_err(m),
            ApiError::Io(m) => PyOSError::new_err(m),
        }
    }
}

/// The shipped scenario catalog as JSON.
#[pyfunction]
fn catalog_json() -> String {
    api::catalog_json()
}

/// List of `path: rule` violations; empty means valid.
#[pyfunction]
fn validate_scene(scene_json: &str) -> Vec<String> {
    api::validate_scene(scene_json)
}

#[pyfunction]
fn normalize_scene(scene_json: &str) -> PyResult<String> {
    Ok(api::normalize_scene(scene_json)?)
}

/// Scenario instances as JSON lines.
#[pyfunction]
#[pyo3(signature = (scene_json, catalog_json=None, config_json=None))]
fn mine_scene(scene_json: &str, catalog_json: Option<&str>, config_json: Option<&str>) -> PyResult<String> {
    Ok(api::mine_scene(scene_json, catalog_json, config_json)?)
}

#[pyfunction]
fn synth_kinds() -> Vec<String> {
    api::synth_kinds()
}

#[pyfunction]
#[pyo3(signature = (kind, seed=0))]
fn synth_scene(kind: &str, seed: u64) -> PyResult<String> {
    Ok(api::synth_scene(kind, seed)?)
}

#[pyfunction]
#[pyo3(signature = (instances_jsonl, scenes, config_json=None))]
fn subsample(instances_jsonl: &str, scenes: Vec<String>, config_json: Option<&str>) -> PyResult<(String, String)> {
    Ok(api::subsample(instances_jsonl, &scenes, config_json)?)
}

#[pyfunction]
#[pyo3(signature = (instances_jsonl, reviews_jsonl, quorum=3))]
fn merge_reviews(instances_jsonl: &str, reviews_jsonl: &str, quorum: usize) -> PyResult<String> {
    Ok(api::merge_reviews(instances_jsonl, reviews_jsonl, quorum)?)
}

#[pyfunction]
#[pyo3(signature = (instances_jsonl, scenes, options=5, seed=0, catalog_json=None))]
fn generate_benchmark(
    instances_jsonl: &str,
    scenes: Vec<String>,
    options: usize,
    seed: u64,
    catalog_json: Option<&str>,
) -> PyResult<String> {
    Ok(api::generate_benchmark(instances_jsonl, &scenes, options, seed, catalog_json)?)
}

#[pyfunction]
fn render_prompt(question_json: &str, family: &str) -> PyResult<String> {
    Ok(api::render_prompt(question_json, family)?)
}

#[pyfunction]
fn parse_letter(raw: &str, k: usize) -> Option<String> {
    api::parse_letter(raw, k)
}

#[pyfunction]
fn score(benchmark_json: &str, answers_jsonl: &str) -> PyResult<String> {
    Ok(api::score(benchmark_json, answers_jsonl)?)
}

#[pyfunction]
fn ground_truth_answers(benchmark_json: &str) -> PyResult<String> {
    Ok(api::ground_truth_answers(benchmark_json)?)
}

/// Review store; in memory unless a log path is given.
#[pyclass(name = "Store", unsendable)]
struct PyStore {
    inner: sts_core::verifier::Store,
}

#[pymethods]
impl PyStore {
    #[new]
    #[pyo3(signature = (path=None))]
    fn new(path: Option<std::path::PathBuf>) -> PyResult<Self> {
        let inner = match path {
            Some(p) => sts_core::verifier::Store::open(&p).map_err(ApiError::from)?,
            None => sts_core::verifier::Store::in_memory(),
        };
        Ok(PyStore { inner })
    }

    /// Number of new instances.
    fn ingest(&mut self, instances_jsonl: &str) -> PyResult<usize> {
        Ok(self.inner.ingest_jsonl(instances_jsonl).map_err(ApiError::from)?)
    }

    fn create_session(&mut self, reviewer: &str) -> PyResult<String> {
        let s = self.inner.create_session(reviewer).map_err(ApiError::from)?;
        Ok(serde_json::to_string(&s).expect("session serializes"))
    }

    fn submit_review(&mut self, review_json: &str) -> PyResult<String> {
        let r = serde_json::from_str(review_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let stored = self.inner.submit_review(r).map_err(ApiError::from)?;
        Ok(serde_json::to_string(&stored).expect("review serializes"))
    }

    #[pyo3(signature = (quorum=3))]
    fn merge(&mut self, quorum: usize) -> PyResult<String> {
        let policy = sts_core::verifier::MergePolicy { quorum, ..Default::default() };
        let out = self.inner.merge(&policy).map_err(ApiError::from)?;
        Ok(serde_json::to_string(&out).expect("outcome serializes"))
    }

    fn stats(&self) -> String {
        serde_json::to_string(&self.inner.stats()).expect("stats serialize")
    }

    fn __len__(&self) -> usize {
        self.inner.instances().count()
    }
}

#[pymodule]
fn sts_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(catalog_json, m)?)?;
    m.add_function(wrap_pyfunction!(validate_scene, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_scene, m)?)?;
    m.add_function(wrap_pyfunction!(mine_scene, m)?)?;
    m.add_function(wrap_pyfunction!(synth_kinds, m)?)?;
    m.add_function(wrap_pyfunction!(synth_scene, m)?)?;
    m.add_function(wrap_pyfunction!(subsample, m)?)?;
    m.add_function(wrap_pyfunction!(merge_reviews, m)?)?;
    m.add_function(wrap_pyfunction!(generate_benchmark, m)?)?;
    m.add_function(wrap_pyfunction!(render_prompt, m)?)?;
    m.add_function(wrap_pyfunction!(parse_letter, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(ground_truth_answers, m)?)?;
    m.add_class::<PyStore>()?;
    Ok(())
}
