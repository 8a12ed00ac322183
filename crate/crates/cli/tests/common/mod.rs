#![allow(dead_code)]

use rigforge::fixtures;
use rigforge::mesh::{write_obj, Mesh};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn rigforge() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rigforge"))
}

/// Runs with string arguments and returns (code, stdout, stderr).
pub fn run_str(args: &[&str]) -> (i32, String, String) {
    output_parts(rigforge().args(args).output().expect("binary runs"))
}

pub fn output_parts(out: Output) -> (i32, String, String) {
    (
        out.status.code().expect("exited normally"),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

pub fn write_mesh(dir: &Path, name: &str, mesh: &Mesh) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, write_obj(mesh)).unwrap();
    path
}

pub fn cylinder() -> Mesh {
    fixtures::cylinder(0.2, 2.0, 24, 12)
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// The last stderr line, which carries the diagnostic.
pub fn diagnostic(stderr: &str) -> &str {
    stderr.lines().last().unwrap_or("")
}
