//! Helpers for driving the `pathfuse` binary.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn pathfuse(args: &[&str]) -> Output {
    command(args).output().expect("spawn pathfuse")
}

/// Command with `PATHFUSE_CONFIG` cleared so the caller's environment
/// cannot leak into a test.
pub fn command(args: &[&str]) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_pathfuse"));
    c.args(args).env_remove("PATHFUSE_CONFIG");
    c
}

pub fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn s(p: &Path) -> &str {
    p.to_str().expect("UTF-8 path")
}

/// Artifacts of one synth -> fuse -> gen -> emit run.
pub struct Chain {
    pub demo: PathBuf,
    pub fused: PathBuf,
    pub xml: PathBuf,
    pub program: PathBuf,
}

impl Chain {
    pub fn artifacts(&self) -> [&PathBuf; 4] {
        [&self.demo, &self.fused, &self.xml, &self.program]
    }
}

/// Full pipeline on the checked-in fixtures; panics on any non-zero exit.
pub fn run_chain(dir: &Path, synth_flags: &[&str], calib: &str) -> Chain {
    let c = Chain {
        demo: dir.join("demo.csv"),
        fused: dir.join("fused.json"),
        xml: dir.join("path.xml"),
        program: dir.join("program.txt"),
    };
    let truth = fixture("truth_s.json");
    let cad = fixture("cad.csv");
    let calib = fixture(calib);
    let mut synth = vec!["synth", "--truth", s(&truth), "-o", s(&c.demo)];
    synth.extend_from_slice(synth_flags);
    let steps: [Vec<&str>; 4] = [
        synth,
        vec![
            "fuse",
            "--cad",
            s(&cad),
            "--demo",
            s(&c.demo),
            "--calib",
            s(&calib),
            "-o",
            s(&c.fused),
        ],
        vec![
            "pathml",
            "gen",
            "--fused",
            s(&c.fused),
            "--process",
            "adhesive",
            "--glue-flow-rate",
            "12.5",
            "--project",
            "seam",
            "-o",
            s(&c.xml),
        ],
        vec!["emit", s(&c.xml), "-o", s(&c.program)],
    ];
    for args in &steps {
        let o = pathfuse(args);
        assert_eq!(code(&o), 0, "{args:?} failed: {}", stderr(&o));
    }
    c
}

/// `(x, y, z)` text of every MOVEL line.
pub fn movel_positions(program: &str) -> Vec<[String; 3]> {
    program
        .lines()
        .filter_map(|l| l.strip_prefix("MOVEL "))
        .map(|rest| {
            let f: Vec<&str> = rest.split(' ').collect();
            [f[0].to_string(), f[1].to_string(), f[2].to_string()]
        })
        .collect()
}

/// CAD waypoints formatted the way the program prints them.
pub fn cad_positions_3dp() -> Vec<[String; 3]> {
    let text = std::fs::read_to_string(fixture("cad.csv")).unwrap();
    text.lines()
        .skip(1)
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|t| t.parse().unwrap()).collect();
            [0, 1, 2].map(|k| format!("{:.3}", v[k]))
        })
        .collect()
}
