//! End-to-end tests of the `pickpass` binary: exit codes, file outputs, and
//! byte-identical reruns.

use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pickpass"))
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

fn run(args: &[&str]) -> Output {
    bin()
        .args(args)
        .current_dir(repo_root())
        .output()
        .expect("binary runs")
}

fn tempdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("pickpass-cli-test-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn dir_snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                files.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn help_and_version_exit_zero() {
    assert!(run(&["--help"]).status.success());
    assert!(run(&["train", "--help"]).status.success());
    assert!(run(&["--version"]).status.success());
}

#[test]
fn missing_config_is_exit_code_2_naming_the_path() {
    let out = run(&["train", "--config", "/nonexistent/nope.json", "--out", "/tmp/x"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("nope.json"), "error must name the file: {stderr}");
}

#[test]
fn bad_agent_spec_is_exit_code_2() {
    let out = run(&[
        "eval",
        "--agent",
        "psychic",
        "--game",
        "configs/game_my_first_meal.json",
        "--games",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn stats_matches_known_fixture() {
    let dir = tempdir("stats");
    std::fs::write(dir.join("xs.txt"), "1\n2\n3\n").unwrap();
    std::fs::write(dir.join("ys.txt"), "4\n5\n6\n").unwrap();
    let out = run(&[
        "stats",
        "--xs",
        dir.join("xs.txt").to_str().unwrap(),
        "--ys",
        dir.join("ys.txt").to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let report: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!((report["t_statistic"].as_f64().unwrap() + 3.674234614174767).abs() < 1e-12);
    assert_eq!(report["degrees_of_freedom"].as_f64().unwrap(), 4.0);
    assert!((report["p_value"].as_f64().unwrap() - 0.0213116).abs() < 1e-4);
}

#[test]
fn stats_degenerate_is_exit_code_3() {
    let dir = tempdir("stats-degenerate");
    std::fs::write(dir.join("xs.txt"), "2\n2\n").unwrap();
    std::fs::write(dir.join("ys.txt"), "3\n3\n").unwrap();
    let out = run(&[
        "stats",
        "--xs",
        dir.join("xs.txt").to_str().unwrap(),
        "--ys",
        dir.join("ys.txt").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn train_rerun_is_byte_identical_and_eval_loads_it() {
    let dir = tempdir("train");
    let spec = dir.join("train.json");
    std::fs::write(
        &spec,
        r#"{
            "game": "configs/game_my_first_meal.json",
            "train": { "epochs": 1, "games_per_epoch": 6, "batch_size": 16,
                       "buffer_capacity": 2048, "hidden_layers": [16, 16] },
            "seeds": [0]
        }"#,
    )
    .unwrap();
    let out_a = dir.join("a");
    let out_b = dir.join("b");
    for out in [&out_a, &out_b] {
        let res = run(&[
            "train",
            "--config",
            spec.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--workers",
            "2",
        ]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    assert_eq!(dir_snapshot(&out_a), dir_snapshot(&out_b), "reruns are byte-identical");

    let ckpt = out_a.join("game_my_first_meal/seed_0/final.ckpt.json");
    assert!(ckpt.exists());
    let res = run(&[
        "eval",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--games",
        "10",
        "--seed",
        "1",
    ]);
    assert!(res.status.success());
    assert!(String::from_utf8_lossy(&res.stdout).contains("win rate"));

    // Unit switch changes the denominator but still runs.
    let res = run(&[
        "eval",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--games",
        "9",
        "--unit",
        "rounds",
        "--seed",
        "1",
    ]);
    assert!(res.status.success());
    assert!(String::from_utf8_lossy(&res.stdout).contains("9 rounds"));

    // The manifest records every output with a hash.
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_a.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "train");
    assert!(manifest["outputs"]
        .as_object()
        .unwrap()
        .contains_key("game_my_first_meal/seed_0/final.ckpt.json"));
}

#[test]
fn logs_roundtrip_into_priority_list() {
    let dir = tempdir("logs");
    let log = dir.join("games.jsonl");
    let res = run(&[
        "eval",
        "--agent",
        "random",
        "--game",
        "configs/game_my_first_meal.json",
        "--opponent",
        "random",
        "--games",
        "30",
        "--seed",
        "9",
        "--log",
        log.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let out = dir.join("interp");
    let res = run(&[
        "interpret",
        "--from-logs",
        log.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let ranking: Vec<String> =
        serde_json::from_str(&std::fs::read_to_string(out.join("priority.json")).unwrap()).unwrap();
    assert_eq!(ranking.len(), 10, "full menu ranked");
    assert!(out.join("points.csv").exists());
}

#[test]
fn sweep_missing_checkpoints_lists_absentees() {
    let dir = tempdir("sweep-missing");
    let spec = dir.join("sweep.json");
    std::fs::write(
        &spec,
        r#"{
            "interpolate": { "menu_a": "configs/menus/my_first_meal.json",
                             "menu_b": "configs/menus/cutthroat_combo.json",
                             "steps": 2 },
            "opponent_priority": "configs/priority_placeholder.json",
            "games_per_batch": 2, "batches": 1, "seed": 1, "seeds": [0]
        }"#,
    )
    .unwrap();
    let out = run(&[
        "sweep",
        "--config",
        spec.to_str().unwrap(),
        "--checkpoints",
        dir.join("none").to_str().unwrap(),
        "--out",
        dir.join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("config_0"), "absentees listed: {stderr}");
    assert!(stderr.contains("config_1"), "absentees listed: {stderr}");
}

#[test]
fn play_handles_invalid_input_and_eof() {
    let mut child = bin()
        .args([
            "play",
            "--config",
            "configs/game_my_first_meal.json",
            "--agents",
            "random",
            "--seed",
            "3",
        ])
        .current_dir(repo_root())
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    use std::io::Write;
    child
        .stdin
        .as_mut()
        .unwrap()
        .write_all(b"banana\n42\n0\n")
        .unwrap();
    drop(child.stdin.take());
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success(), "EOF aborts cleanly");
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.matches("invalid input").count() >= 2, "re-prompts on bad input");
    assert!(text.contains("(eof) game aborted"));
}

#[test]
fn play_full_game_prints_final_table() {
    let mut child = bin()
        .args([
            "play",
            "--config",
            "configs/game_my_first_meal.json",
            "--agents",
            "priority:configs/priority_placeholder.json",
            "--seed",
            "5",
            "--show-memory",
        ])
        .current_dir(repo_root())
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    use std::io::Write;
    child
        .stdin
        .as_mut()
        .unwrap()
        .write_all("0\n".repeat(27).as_bytes())
        .unwrap();
    drop(child.stdin.take());
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("=== final ==="));
    assert!(text.contains("memory: seat"));
    assert!(text.contains("points"));
}
