use serde_json::Value;
use sts_py::api;

fn scene(kind: &str, seed: u64) -> String {
    let v: Value = serde_json::from_str(&api::synth_scene(kind, seed).unwrap()).unwrap();
    v["scene"].to_string()
}

#[test]
fn mine_to_score_through_json() {
    let s = scene("agent_overtake_agent", 4);
    assert!(api::validate_scene(&s).is_empty());
    let mined = api::mine_scene(&s, None, None).unwrap();
    assert!(mined.lines().count() >= 1);

    let (kept, report) = api::subsample(&mined, &[s.clone()], None).unwrap();
    assert_eq!(kept.lines().count(), mined.lines().count());
    assert!(report.contains("agent_overtake_agent"));

    let bench = api::generate_benchmark(&mined, &[s.clone()], 5, 7, None).unwrap();
    assert_eq!(bench, api::generate_benchmark(&mined, &[s], 5, 7, None).unwrap());
    let doc: Value = serde_json::from_str(&bench).unwrap();
    let prompt = api::render_prompt(&doc["questions"][0].to_string(), "llm_trajectory").unwrap();
    assert!(prompt.contains("Frame number: 0"));

    let gt = api::ground_truth_answers(&bench).unwrap();
    let r: Value = serde_json::from_str(&api::score(&bench, &gt).unwrap()).unwrap();
    assert_eq!(r["overall"], 1.0);
}

#[test]
fn merge_majority() {
    let s = scene("agent_stop", 1);
    let mined = api::mine_scene(&s, None, None).unwrap();
    let id = serde_json::from_str::<Value>(mined.lines().next().unwrap()).unwrap()["scenario_id"].clone();
    let reviews: String = [("a", true), ("b", true), ("c", false)]
        .iter()
        .map(|(r, pos)| serde_json::json!({"scenario_id": id, "reviewer": r, "positive": pos}).to_string() + "\n")
        .collect();
    let out: Value = serde_json::from_str(&api::merge_reviews(&mined, &reviews, 3).unwrap()).unwrap();
    assert!(out["verified"].as_array().unwrap().iter().any(|v| v["scenario_id"] == id));
    assert!(api::merge_reviews(&mined, &reviews, 0).is_err());
}

#[test]
fn errors_surface_as_invalid() {
    assert!(!api::validate_scene("{}").is_empty());
    assert!(matches!(api::normalize_scene("{"), Err(api::ApiError::Invalid(_))));
    assert!(matches!(api::synth_scene("no_such_kind", 0), Err(api::ApiError::Invalid(_))));
    assert!(api::render_prompt("{}", "llm_trajectory").is_err());
    assert_eq!(api::parse_letter("B", 5).as_deref(), Some("B"));
    assert_eq!(api::parse_letter("F", 5), None);
    assert_eq!(api::synth_kinds().len(), 53);
    assert!(api::catalog_json().trim_start().starts_with('['));
}
