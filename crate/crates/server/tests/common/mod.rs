#![allow(dead_code)]

use grounded_core::world::SceneSpec;
use grounded_server::NewSession;

pub const STORE: &str = include_str!("../../../../scenarios/store.json");

pub fn store_scene() -> SceneSpec {
    let v: serde_json::Value = serde_json::from_str(STORE).unwrap();
    serde_json::from_value(v["scene"].clone()).unwrap()
}

pub fn new_session() -> NewSession {
    NewSession { scene: Some(store_scene()), agent_seed: 7, ..NewSession::default() }
}

/// `(utterance, click)` pairs of the store script.
pub fn store_steps() -> Vec<(String, Option<String>)> {
    let v: serde_json::Value = serde_json::from_str(STORE).unwrap();
    v["steps"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| (s["say"].as_str().unwrap().to_string(), s["click"].as_str().map(str::to_string)))
        .collect()
}
