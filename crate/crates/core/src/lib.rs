//! Spatio-temporal scenario mining and multiple-choice benchmark toolkit.
//!
//! The pipeline runs scene interchange documents through the miner, the
//! sub-sampler, human review (merged by majority vote), question generation
//! and finally scoring of model answers.

pub mod catalog;
pub mod geometry;
pub mod jsonl;
pub mod miner;
pub mod questgen;
pub mod sampler;
pub mod scene;
pub mod scorer;
pub mod synth;
pub mod verifier;

mod fixed6;

pub use catalog::{default_catalog, Catalog, CatalogEntry, ScenarioCategory};
pub use miner::{mine_scene, MinerConfig, ScenarioInstance};
pub use scene::{parse_scene, serialize_scene, validate_scene, Scene};
