use serde_json::Value;
use sts_core::synth::synth_scene;

const SCHEMA: &str = include_str!("../../../docs/scene.schema.json");

fn resolve<'a>(root: &'a Value, node: &'a Value) -> &'a Value {
    match node.get("$ref").and_then(Value::as_str) {
        Some(r) => &root["$defs"][r.trim_start_matches("#/$defs/")],
        None => node,
    }
}

// every key the serializer writes must be declared, and every required key written
fn check(root: &Value, schema: &Value, doc: &Value, path: &str) {
    let schema = resolve(root, schema);
    match doc {
        Value::Object(m) => {
            let props = schema["properties"].as_object().unwrap_or_else(|| panic!("{path}: no properties"));
            for (k, v) in m {
                let sub = props.get(k).unwrap_or_else(|| panic!("{path}.{k} missing from schema"));
                check(root, sub, v, &format!("{path}.{k}"));
            }
            for r in schema["required"].as_array().into_iter().flatten() {
                assert!(m.contains_key(r.as_str().unwrap()), "{path}: required `{r}` not written");
            }
        }
        Value::Array(items) => {
            if let Some(sub) = schema.get("items") {
                for (i, v) in items.iter().enumerate() {
                    check(root, sub, v, &format!("{path}[{i}]"));
                }
            }
        }
        _ => {}
    }
}

#[test]
fn schema_covers_serialized_scenes() {
    let root: Value = serde_json::from_str(SCHEMA).unwrap();
    for kind in ["agent_wait_ped_cross", "ego_lane_change", "agent_overtake_agent"] {
        let mut scene = synth_scene(kind, 2).unwrap().scene;
        for c in scene.cameras.as_mut().unwrap() {
            c.image_paths = Some(vec!["a.jpg".into(); c.poses.len()]);
        }
        let doc: Value = serde_json::from_slice(&sts_core::serialize_scene(&scene)).unwrap();
        check(&root, &root, &doc, "scene");
    }
}
