#![allow(dead_code)]

use std::path::PathBuf;

use or_twin::io::{load_project, Project};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn project(name: &str, file: &str) -> Project {
    load_project(&fixture(name).join(file)).unwrap_or_else(|e| panic!("{name}/{file}: {e}"))
}

pub fn expected(name: &str) -> serde_json::Value {
    let text = std::fs::read_to_string(fixture(name).join("expected.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

pub mod gen;
