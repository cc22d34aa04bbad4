use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bend_core::config::DESK_PRESET;

fn bend(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bend"))
        .args(args)
        .env("BEND_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn table1_prints_exact_fractions() {
    let o = bend(&["table1"]);
    assert!(o.status.success());
    let s = stdout(&o);
    for row in [
        "0,1,8/27,",
        "0,2/3,4/9,",
        "0,1/3,2/9,",
        "0,0,1/27,",
        "0.667,2/3,5/9,",
        "1,2/3,1,",
    ] {
        assert!(s.contains(row), "missing {row} in\n{s}");
    }
    assert!(s.contains("iou_0.sbend = 1\n"));
    assert!(s.contains("iou_1.sbend = 2/3\n"));
}

#[test]
fn cost_reports_breakeven() {
    let o = bend(&["cost", "--m", "4"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("breakeven_m = 3.6418"));
    assert!(s.contains("1,10190.88,2800.00,"));
}

#[test]
fn undefined_breakeven_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg =
        format!("{DESK_PRESET}\n[cost]\nk_pre = 1\nk = 1\nt_orge = 1.0\nt_ate = 0.0\nt_ddpm = 0.0\nt_sgen = 5.0\n");
    let o = bend(&["cost", "--config", &write_config(dir.path(), &cfg)]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &format!("surprise = true\n{DESK_PRESET}"));
    let o = bend(&["train-base", "--config", &path]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("surprise"));
}

#[test]
fn missing_subset_layer_exits_2_naming_it() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(
        dir.path(),
        &DESK_PRESET.replace("layers = [\"fc2\"]", "layers = [\"head\"]"),
    );
    let out = dir.path().join("out");
    let o = bend(&["train-base", "--config", &path, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("'head'"));
}

#[test]
fn malformed_predictions_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.csv");
    fs::write(&p, "classifier_id,s_0,s_1\n0,1\ntarget,0,0\n").unwrap();
    let o = bend(&["ensemble", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn ensemble_on_unanimous_matrix_reports_equal_accuracies() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.csv");
    fs::write(&p, "classifier_id,s_0,s_1,s_2\n0,1,0,2\n1,1,0,2\ntarget,1,0,0\n").unwrap();
    for method in ["sbend", "abend"] {
        let o = bend(&["ensemble", p.to_str().unwrap(), "--method", method, "--trials", "50"]);
        assert!(o.status.success());
        let s = stdout(&o);
        let value = |k: &str| {
            s.lines()
                .find_map(|l| l.strip_prefix(&format!("{k} = ")))
                .unwrap()
                .parse::<f64>()
                .unwrap()
        };
        for k in ["accuracy", "max", "mean", "median", "potential"] {
            assert_eq!(value(k), 2.0 / 3.0, "{method} {k}");
        }
    }
}

#[test]
fn iou0_abend_mean_is_vote_share() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.csv");
    fs::write(
        &p,
        "classifier_id,s_0,s_1,s_2\n0,1,0,0\n1,0,1,0\n2,0,0,1\ntarget,0,0,0\n",
    )
    .unwrap();
    let o = bend(&["ensemble", p.to_str().unwrap(), "--method", "sbend"]);
    assert!(stdout(&o).contains("accuracy = 1\n"));
    let o = bend(&[
        "ensemble",
        p.to_str().unwrap(),
        "--method",
        "abend",
        "--trials",
        "100000",
        "--seed",
        "3",
    ]);
    let s = stdout(&o);
    let mean: f64 = s
        .lines()
        .find_map(|l| l.strip_prefix("accuracy = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((mean - 2.0 / 3.0).abs() < 0.005, "{mean}");
}

#[test]
fn missing_config_file_exits_3() {
    let o = bend(&["train-base", "--config", "/nonexistent/run.toml"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn bad_thread_cap_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap().to_owned();
    let o = Command::new(env!("CARGO_BIN_EXE_bend"))
        .args(["pipeline", "--preset", "desk", "--out", &out, "--k", "2", "--m", "2"])
        .env("BEND_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}
