use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn gcf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gcf"))
        .args(args)
        .env_remove("GCF_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout_json(out: &Output) -> Value {
    assert_eq!(
        code(out),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn vec3(v: &Value) -> [f64; 3] {
    let a = v.as_array().unwrap();
    [0, 1, 2].map(|i| a[i].as_f64().unwrap())
}

fn norm(v: [f64; 3]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| {
            rec.unwrap()
                .iter()
                .map(|f| f.parse::<f64>().unwrap())
                .collect()
        })
        .collect();
    (header, rows)
}

fn write_config(dir: &Path, name: &str, value: &Value) -> String {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path.display().to_string()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

const EXAMPLE_ONE: [&str; 9] = [
    "allocate", "--mg", "0,0,9.8", "--mad", "20,20,0", "--set", "ball:15", "--mode", "lex",
];

#[test]
fn allocate_reproduces_the_worked_example() {
    let v = stdout_json(&gcf(&EXAMPLE_ONE));
    assert_eq!(vec3(&v["f_g"]), [0.0, 0.0, 9.8]);
    let ft = norm(vec3(&v["f_t"]));
    assert!(
        (ft - (15.0f64 * 15.0 - 9.8 * 9.8).sqrt()).abs() <= 1e-9,
        "{ft}"
    );
    assert!((ft - 11.356).abs() <= 1e-3);
    assert_eq!(v["gravity_residual"].as_f64().unwrap(), 0.0);
}

#[test]
fn allocate_without_limits_returns_the_raw_demand() {
    for mode in ["lex", "weighted"] {
        let v = stdout_json(&gcf(&[
            "allocate",
            "--mg",
            "0,0,9.8",
            "--mad",
            "3,-4,-2.5",
            "--set",
            "ball:1e9",
            "--mode",
            mode,
        ]));
        let fd = vec3(&v["f_d"]);
        let expected = [3.0, -4.0, -2.5 - 9.8];
        for i in 0..3 {
            assert!((fd[i] - expected[i]).abs() <= 1e-9, "{mode}: {fd:?}");
        }
    }
}

#[test]
fn zero_disturbance_output_is_byte_identical() {
    for mode in ["lex", "weighted"] {
        let base = [
            "allocate",
            "--mg",
            "0,0,9.8",
            "--mad",
            "20,20,0",
            "--set",
            "box:-8,-8,-15..8,8,2",
            "--mode",
            mode,
        ];
        let plain = gcf(&base);
        let mut with = base.to_vec();
        with.extend(["--dist", "0,0,0"]);
        let disturbed = gcf(&with);
        assert_eq!(code(&plain), 0);
        assert_eq!(plain.stdout, disturbed.stdout, "{mode}");
    }
}

#[test]
fn allocate_intersects_repeated_sets() {
    let v = stdout_json(&gcf(&[
        "allocate",
        "--mg",
        "0,0,9.8",
        "--mad",
        "0,0,0",
        "--set",
        "ball:15",
        "--set",
        "box:-1,-1,-20..1,1,0",
        "--mode",
        "lex",
    ]));
    assert_eq!(vec3(&v["f_d"]), [0.0, 0.0, -9.8]);
}

#[test]
fn allocate_exit_codes() {
    let malformed = [
        vec![
            "allocate", "--mg", "0,0", "--mad", "0,0,0", "--set", "ball:1", "--mode", "lex",
        ],
        vec![
            "allocate", "--mg", "0,0,9.8", "--mad", "0,0,0", "--set", "cone:1", "--mode", "lex",
        ],
        vec![
            "allocate", "--mg", "0,0,9.8", "--mad", "0,0,0", "--set", "ball:1", "--mode", "best",
        ],
        vec![
            "allocate", "--mg", "0,0,9.8", "--mad", "0,0,0", "--set", "ball:1", "--mode", "lex",
            "--wg", "5",
        ],
        vec![
            "allocate", "--mg", "0,0,9.8", "--mad", "0,0,0", "--set", "ball:1", "--mode",
            "weighted", "--wg", "1", "--wt", "5",
        ],
        vec![
            "allocate", "--mad", "0,0,0", "--set", "ball:1", "--mode", "lex",
        ],
    ];
    for args in malformed {
        assert_eq!(code(&gcf(&args)), 2, "{args:?}");
    }
    let infeasible = [
        vec![
            "allocate", "--mg", "0,0,9.8", "--mad", "0,0,0", "--set", "ball:-1", "--mode", "lex",
        ],
        vec![
            "allocate",
            "--mg",
            "0,0,9.8",
            "--mad",
            "0,0,0",
            "--set",
            "box:1,1,1..0,0,0",
            "--mode",
            "weighted",
        ],
        vec![
            "allocate",
            "--mg",
            "0,0,9.8",
            "--mad",
            "0,0,0",
            "--set",
            "box:-1,-1,-1..0,0,0",
            "--set",
            "box:1,1,1..2,2,2",
            "--mode",
            "lex",
        ],
    ];
    for args in infeasible {
        let out = gcf(&args);
        assert_eq!(code(&out), 3, "{args:?}");
        assert!(out.stdout.is_empty());
    }
}

#[test]
fn simulate_bundled_hover_meets_tracking_tolerances() {
    let tmp = tempfile::tempdir().unwrap();
    let out = gcf(&[
        "simulate",
        "--config",
        "bundled:quad_hover",
        "--out",
        path_str(tmp.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let m: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("metrics.json")).unwrap())
            .unwrap();
    assert!(m["tracking_rmse"].as_f64().unwrap() <= 0.05, "{m}");
    assert!(m["final_position_error"].as_f64().unwrap() <= 0.05, "{m}");
    assert_eq!(m["controller_events"].as_u64().unwrap(), 0);

    let (header, rows) = read_csv(&tmp.path().join("log.csv"));
    assert_eq!(header.len(), 31);
    assert_eq!(&header[..4], ["t", "px", "py", "pz"]);
    assert_eq!(header.last().unwrap(), "fault");
    assert_eq!(rows.len(), 2501);
    assert!(rows.iter().all(|r| r.len() == header.len()));
    for name in ["config.json", "events.csv", "manifest.json"] {
        assert!(tmp.path().join(name).exists(), "{name}");
    }
}

#[test]
fn simulate_ballistic_lands_at_fourteen() {
    let tmp = tempfile::tempdir().unwrap();
    let out = gcf(&[
        "simulate",
        "--config",
        "bundled:ballistic",
        "--out",
        path_str(tmp.path()),
    ]);
    assert_eq!(code(&out), 0);
    let m: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("metrics.json")).unwrap())
            .unwrap();
    let vz = m["touchdown_vz"].as_f64().unwrap();
    assert!((vz - 14.0).abs() <= 0.01, "{vz}");
}

#[test]
fn reruns_reproduce_artifacts_byte_for_byte() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = gcf(&[
            "simulate",
            "--config",
            "bundled:quad_hover",
            "--out",
            path_str(dir),
        ]);
        assert_eq!(code(&out), 0);
    }
    for name in ["log.csv", "metrics.json", "events.csv", "config.json"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let manifest = |d: &Path| -> Value {
        serde_json::from_slice(&fs::read(d.join("manifest.json")).unwrap()).unwrap()
    };
    let (ma, mb) = (manifest(&a), manifest(&b));
    assert_eq!(ma["config_hash"], mb["config_hash"]);
    assert_eq!(ma["source_hash"], mb["source_hash"]);
    assert_eq!(ma["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn resolved_config_replays_to_the_same_log() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    assert_eq!(
        code(&gcf(&[
            "simulate",
            "--config",
            "bundled:quad_hover",
            "--out",
            path_str(&first)
        ])),
        0
    );
    let replay = tmp.path().join("replay");
    let resolved = first.join("config.json");
    assert_eq!(
        code(&gcf(&[
            "simulate",
            "--config",
            path_str(&resolved),
            "--out",
            path_str(&replay)
        ])),
        0
    );
    assert_eq!(
        fs::read(first.join("log.csv")).unwrap(),
        fs::read(replay.join("log.csv")).unwrap()
    );
    let manifest = |d: &Path| -> Value {
        serde_json::from_slice(&fs::read(d.join("manifest.json")).unwrap()).unwrap()
    };
    assert_eq!(
        manifest(&first)["config_hash"],
        manifest(&replay)["config_hash"]
    );
}

#[test]
fn fault_override_replaces_the_configured_fault() {
    let tmp = tempfile::tempdir().unwrap();
    let out = gcf(&[
        "simulate",
        "--config",
        "bundled:quad_hover",
        "--fault-override",
        "motor:2@1",
        "--out",
        path_str(tmp.path()),
    ]);
    assert_eq!(code(&out), 0);
    let (header, rows) = read_csv(&tmp.path().join("log.csv"));
    let (t, u2, fault) = (
        0,
        header.iter().position(|h| h == "u2").unwrap(),
        header.len() - 1,
    );
    for r in &rows {
        assert_eq!(r[fault] == 1.0, r[t] >= 1.0);
        if r[fault] == 1.0 {
            assert_eq!(r[u2], 0.0);
        }
    }
    let wrong = gcf(&[
        "simulate",
        "--config",
        "bundled:quad_hover",
        "--fault-override",
        "wing@1",
        "--out",
        path_str(tmp.path()),
    ]);
    assert_eq!(code(&wrong), 2);
}

#[test]
fn batch_runs_write_one_directory_per_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = gcf(&[
        "simulate",
        "--batch",
        "--config",
        "bundled:ballistic",
        "--config",
        "bundled:quad_hover",
        "--out",
        path_str(tmp.path()),
    ]);
    assert_eq!(code(&out), 0);
    let single = tmp.path().join("single");
    assert_eq!(
        code(&gcf(&[
            "simulate",
            "--config",
            "bundled:ballistic",
            "--out",
            path_str(&single)
        ])),
        0
    );
    assert_eq!(
        fs::read(tmp.path().join("ballistic/log.csv")).unwrap(),
        fs::read(single.join("log.csv")).unwrap()
    );
    assert!(tmp.path().join("quad_hover/metrics.json").exists());
    let twice = gcf(&[
        "simulate",
        "--config",
        "bundled:ballistic",
        "--config",
        "bundled:ballistic",
    ]);
    assert_eq!(code(&twice), 2);
}

#[test]
fn output_directory_defaults_to_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("from-env");
    let out = Command::new(env!("CARGO_BIN_EXE_gcf"))
        .args(["simulate", "--config", "bundled:ballistic"])
        .env("GCF_OUT_DIR", &dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert!(dir.join("log.csv").exists());
}

#[test]
fn simulate_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let missing = gcf(&[
        "simulate",
        "--config",
        "/nonexistent/config.json",
        "--out",
        path_str(&out_dir),
    ]);
    assert_eq!(code(&missing), 2);
    assert_eq!(code(&gcf(&["simulate", "--config", "bundled:nope"])), 2);

    let mut cfg: Value = serde_json::from_str(gcf_sim::bundled("ballistic").unwrap()).unwrap();
    cfg["typo_key"] = json!(1);
    let typo = write_config(tmp.path(), "typo.json", &cfg);
    assert_eq!(
        code(&gcf(&[
            "simulate",
            "--config",
            &typo,
            "--out",
            path_str(&out_dir)
        ])),
        2
    );

    cfg.as_object_mut().unwrap().remove("typo_key");
    cfg["initial_state"]["omega"] = json!([1e200, 1e200, 0.0]);
    let blowup = write_config(tmp.path(), "blowup.json", &cfg);
    let partial = tmp.path().join("partial");
    let out = gcf(&["simulate", "--config", &blowup, "--out", path_str(&partial)]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = read_csv(&partial.join("log.csv"));
    assert_eq!(rows.len(), 1);
    assert!(partial.join("manifest.json").exists());
}

fn horizon_config(extra: Value) -> Value {
    let mut cfg = json!({
        "version": 1,
        "mass": 1.0,
        "accel_desired": [20.0, 20.0, 0.0],
        "set": {"kind": "ball", "radius": 15.0},
        "nodes": 10
    });
    for (k, v) in extra.as_object().unwrap() {
        cfg[k] = v.clone();
    }
    cfg
}

fn run_mpc(cfg: &Value, viewpoint: &str) -> (Output, tempfile::TempDir) {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(tmp.path(), "horizon.json", cfg);
    let out_dir = tmp.path().join("out");
    let out = gcf(&[
        "mpc",
        "--config",
        &path,
        "--viewpoint",
        viewpoint,
        "--out",
        path_str(&out_dir),
    ]);
    (out, tmp)
}

#[test]
fn unconstrained_horizon_reaches_zero_objective() {
    let cfg = horizon_config(json!({
        "accel_desired": [1.0, -2.0, 0.5],
        "set": {"kind": "ball", "radius": 1e9},
        "weights": {"gravity": 1e4, "tracking": 1e2, "energy": 0.0}
    }));
    for viewpoint in ["impulse", "energy"] {
        let (out, _tmp) = run_mpc(&cfg, viewpoint);
        let v = stdout_json(&out);
        assert!(
            v["objective"].as_f64().unwrap() <= 1e-12,
            "{viewpoint}: {v}"
        );
    }
}

#[test]
fn example_horizon_matches_the_static_allocation() {
    let (out, tmp) = run_mpc(&horizon_config(json!({})), "impulse");
    stdout_json(&out);
    let stat = stdout_json(&gcf(&[
        "allocate", "--mg", "0,0,9.8", "--mad", "20,20,0", "--set", "ball:15", "--mode", "weighted",
    ]));
    let fd = vec3(&stat["f_d"]);
    let (header, rows) = read_csv(&tmp.path().join("out/schedule.csv"));
    let col = header.iter().position(|h| h == "fdx").unwrap();
    assert_eq!(rows.len(), 10);
    for r in &rows {
        for i in 0..3 {
            assert!(
                (r[col + i] - fd[i]).abs() <= 1e-2,
                "node {}: {:?} vs {fd:?}",
                r[0],
                &r[col..col + 3]
            );
        }
    }
}

#[test]
fn traces_never_increase() {
    let cases = [
        (horizon_config(json!({})), "impulse"),
        (horizon_config(json!({})), "energy"),
        (
            horizon_config(json!({
                "set": {"kind": "box", "lo": [-5.0, -5.0, -20.0], "hi": [5.0, 5.0, 0.0]},
                "disturbance": [1.0, -2.0, 3.0],
                "nodes": 15
            })),
            "impulse",
        ),
        (
            horizon_config(json!({"h0": -20.0, "span": 5.0, "nodes": 6})),
            "energy",
        ),
    ];
    for (cfg, viewpoint) in cases {
        let (out, tmp) = run_mpc(&cfg, viewpoint);
        stdout_json(&out);
        let (header, rows) = read_csv(&tmp.path().join("out/trace.csv"));
        assert_eq!(header, ["iteration", "objective"]);
        assert!(!rows.is_empty());
        assert!(rows.windows(2).all(|w| w[1][1] <= w[0][1]), "{viewpoint}");
    }
}

#[test]
fn mpc_exit_codes() {
    let (out, tmp) = run_mpc(
        &horizon_config(json!({
            "set": {"kind": "box", "lo": [-5.0, -5.0, -20.0], "hi": [5.0, 5.0, 0.0]},
            "disturbance": [1.0, -2.0, 3.0],
            "max_iterations": 1,
            "nodes": 15
        })),
        "impulse",
    );
    assert_eq!(code(&out), 5, "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = read_csv(&tmp.path().join("out/trace.csv"));
    assert_eq!(rows.len(), 2);

    let (out, _tmp) = run_mpc(&horizon_config(json!({"nodes": 1})), "impulse");
    assert_eq!(code(&out), 2);
    let (out, _tmp) = run_mpc(&horizon_config(json!({"colour": "red"})), "impulse");
    assert_eq!(code(&out), 2);
    let (out, _tmp) = run_mpc(
        &horizon_config(json!({"set": {"kind": "intersection", "sets": [
            {"kind": "box", "lo": [-1.0, -1.0, -1.0], "hi": [0.0, 0.0, 0.0]},
            {"kind": "box", "lo": [1.0, 1.0, 1.0], "hi": [2.0, 2.0, 2.0]}
        ]}})),
        "impulse",
    );
    assert_eq!(code(&out), 3);
    assert_eq!(
        code(&gcf(&[
            "mpc",
            "--config",
            "/nonexistent.json",
            "--viewpoint",
            "impulse"
        ])),
        2
    );
}

#[test]
fn only_documented_exit_codes_are_used() {
    assert_eq!(code(&gcf(&["frobnicate"])), 2);
    assert_eq!(code(&gcf(&[])), 2);
    assert_eq!(code(&gcf(&["--help"])), 0);
}
