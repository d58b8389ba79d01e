#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use popassign::Instance;
use serde_json::Value;
use tempfile::TempDir;

pub const UNANIMOUS_3: &str = r#"{
    "agents": ["a1", "a2", "a3"],
    "objects": ["b1", "b2", "b3"],
    "edges": [["a1","b1"],["a1","b2"],["a1","b3"],["a2","b1"],["a2","b2"],["a2","b3"],
              ["a3","b1"],["a3","b2"],["a3","b3"]],
    "preferences": {
        "a1": {"tiers": [["b1"],["b2"],["b3"]]},
        "a2": {"tiers": [["b1"],["b2"],["b3"]]},
        "a3": {"tiers": [["b1"],["b2"],["b3"]]}
    }
}"#;

/// Two agents share b1 ≻ b2; the third also ranks its private b3 last.
pub const ASSIGNMENT_NOT_MATCHING: &str = r#"{
    "agents": ["a1", "a2", "a3"],
    "objects": ["b1", "b2", "b3"],
    "edges": [["a1","b1"],["a1","b2"],["a2","b1"],["a2","b2"],
              ["a3","b1"],["a3","b2"],["a3","b3"]],
    "preferences": {
        "a1": {"tiers": [["b1"],["b2"]]},
        "a2": {"tiers": [["b1"],["b2"]]},
        "a3": {"tiers": [["b1"],["b2"],["b3"]]}
    }
}"#;

pub const PARTIAL_ORDER: &str = r#"{
    "agents": ["a", "b", "c"],
    "objects": ["x", "y", "z"],
    "edges": [["a","x"],["a","y"],["a","z"],["b","x"],["b","y"],["b","z"],
              ["c","x"],["c","y"],["c","z"]],
    "preferences": {
        "a": {"pairs": [["x","z"],["y","z"]]},
        "b": {"pairs": [["x","z"]]},
        "c": {"pairs": [["y","x"],["y","z"]]}
    }
}"#;

pub struct Workspace {
    dir: TempDir,
}

impl Workspace {
    pub fn new() -> Self {
        Self { dir: tempfile::tempdir().expect("temp dir") }
    }

    pub fn file(&self, name: &str, contents: &str) -> PathBuf {
        let path = self.dir.path().join(name);
        std::fs::write(&path, contents).expect("write temp file");
        path
    }

    pub fn instance(&self, name: &str, instance: &Instance) -> PathBuf {
        self.file(name, &instance.to_json())
    }
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Run {
    pub fn json(&self) -> Value {
        serde_json::from_str(&self.stdout).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", self.stdout))
    }
}

pub fn popassign<I, S>(args: I) -> Run
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let out = Command::new(env!("CARGO_BIN_EXE_popassign")).args(args).output().expect("binary runs");
    Run {
        code: out.status.code().expect("exit code"),
        stdout: String::from_utf8(out.stdout).expect("utf-8"),
        stderr: String::from_utf8(out.stderr).expect("utf-8"),
    }
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}
