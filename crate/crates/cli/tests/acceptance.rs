//! Determinism gate for the command-line interface: identical invocations
//! must produce byte-identical artifacts regardless of thread scheduling.
//! Prints one `[acceptance] <name>: PASS`/`FAIL` line (visible with
//! `cargo test --test acceptance -- --nocapture`).

use std::fs;
use std::path::Path;
use std::process::Command;

const SCENE: &str = "\
scene.frames = 14
scene.width = 160
scene.height = 120
scene.background = 28,30,34
scene.noise = 6

actor.1.shape = rect
actor.1.color = 214,52,48
actor.1.size = 18,14
actor.1.start = 6,10
actor.1.velocity = 4,2

actor.2.shape = ellipse
actor.2.color = 52,205,60
actor.2.size = 16,16
actor.2.start = 130,90
actor.2.velocity = -5,-2
";

fn blobtrack(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_blobtrack"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read(path: &Path) -> Vec<u8> {
    fs::read(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

fn conclude(label: &str, failures: Vec<String>) {
    if failures.is_empty() {
        println!("[acceptance] {label}: PASS");
    } else {
        println!("[acceptance] {label}: FAIL");
        for f in &failures {
            println!("  - {f}");
        }
        panic!("{label}: {} check(s) failed", failures.len());
    }
}

#[test]
fn repeated_invocations_are_byte_identical() {
    let mut failures = Vec::new();
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("scene.txt");
    fs::write(&script, SCENE).unwrap();
    let script = script.to_str().unwrap();

    // Fixed-seed generation twice over.
    let gen_a = dir.path().join("gen_a");
    let gen_b = dir.path().join("gen_b");
    for out in [&gen_a, &gen_b] {
        let output = blobtrack(&[
            "generate",
            "--script",
            script,
            "--seed",
            "41",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(output.status.success(), "generate failed: {output:?}");
    }
    let mut names: Vec<_> = fs::read_dir(&gen_a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    if names.len() != 15 {
        failures.push(format!("expected 14 frames + gt.csv, saw {}", names.len()));
    }
    for name in &names {
        if read(&gen_a.join(name)) != read(&gen_b.join(name)) {
            failures.push(format!("generate artifact {name:?} differs between runs"));
        }
    }

    // The same frames tracked twice over, with every report enabled.
    let run_a = dir.path().join("run_a");
    let run_b = dir.path().join("run_b");
    for out in [&run_a, &run_b] {
        let output = blobtrack(&[
            "run",
            "--input",
            gen_a.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--set",
            "output.features=true",
            "--set",
            "output.associations=true",
        ]);
        assert!(output.status.success(), "run failed: {output:?}");
    }
    for name in ["tracks.csv", "features.csv", "associations.csv"] {
        if read(&run_a.join(name)) != read(&run_b.join(name)) {
            failures.push(format!("run artifact {name} differs between runs"));
        }
    }
    if read(&run_a.join("tracks.csv")).is_empty() {
        failures.push("track CSV is empty; the scene should produce tracks".into());
    }

    conclude("byte-identical reruns", failures);
}
