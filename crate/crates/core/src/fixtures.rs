//! Bundled registry and authoring scenarios.

use crate::capability::{load_registry, CapabilityRegistry};

pub const SMART_HOME_V1_NAME: &str = "smart-home-v1.json";
pub const SMART_HOME_V1: &str = include_str!("../fixtures/smart-home-v1.json");

/// Scenario documents, keyed by task id.
pub const SCENARIOS: [(&str, &str); 4] = [
    ("T1", include_str!("../fixtures/T1.json")),
    ("T2", include_str!("../fixtures/T2.json")),
    ("T3", include_str!("../fixtures/T3.json")),
    ("T4", include_str!("../fixtures/T4.json")),
];

/// Curated candidate rule sets with their expected grades.
pub const CANDIDATES: &str = include_str!("../fixtures/candidates.json");

pub fn smart_home() -> CapabilityRegistry {
    load_registry(SMART_HOME_V1).expect("bundled registry is valid")
}

/// Resolves registry file references in bundled scenarios.
pub fn resolve_registry(name: &str) -> Option<&'static str> {
    (name == SMART_HOME_V1_NAME).then_some(SMART_HOME_V1)
}

pub fn scenario_source(id: &str) -> Option<&'static str> {
    SCENARIOS.iter().find(|(k, _)| *k == id).map(|(_, v)| *v)
}
