//! Helpers shared by the integration and acceptance suites.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn osd(args: &[&str]) -> Run {
    osd_env(args, &[])
}

pub fn osd_env(args: &[&str], envs: &[(&str, &str)]) -> Run {
    osd_cmd(args, envs, None)
}

/// Run the binary with `cwd` as working directory so relative paths in the
/// arguments (and therefore in the recorded manifests) are root-independent.
pub fn osd_in(cwd: &Path, args: &[&str], envs: &[(&str, &str)]) -> Run {
    osd_cmd(args, envs, Some(cwd))
}

fn osd_cmd(args: &[&str], envs: &[(&str, &str)], cwd: Option<&Path>) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_osd"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    if let Some(dir) = cwd {
        cmd.current_dir(dir);
    }
    let out = cmd.output().expect("spawn osd");
    Run {
        code: out.status.code().expect("exit code"),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn assert_ok(run: &Run) {
    assert_eq!(run.code, 0, "stderr: {}\nstdout: {}", run.stderr, run.stdout);
}

/// All files under a directory keyed by relative path; manifests have the
/// wall-clock duration nulled so reruns compare equal.
pub fn dir_snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                let mut bytes = std::fs::read(&path).unwrap();
                if path
                    .file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.ends_with("manifest.json"))
                {
                    let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
                    v["duration_seconds"] = serde_json::Value::Null;
                    bytes = serde_json::to_vec(&v).unwrap();
                }
                out.insert(rel, bytes);
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

/// Compare snapshots without dumping file bytes on mismatch.
pub fn assert_same_files(a: &BTreeMap<String, Vec<u8>>, b: &BTreeMap<String, Vec<u8>>) {
    let keys_a: Vec<&String> = a.keys().collect();
    let keys_b: Vec<&String> = b.keys().collect();
    assert_eq!(keys_a, keys_b, "file sets differ");
    for (name, bytes) in a {
        assert!(bytes == &b[name], "{name} differs between runs");
    }
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}
