use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use drape_core::mesh::{load_obj, write_obj};
use drape_core::pipeline::{place_garment, sphere_drape_scene};
use drape_core::solver::SolverConfig;
use serde_json::Value;

fn scenes() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenes")
}

fn drape(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drape")).args(args).current_dir(cwd).env_remove("DRAPE_THREADS").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL_SCENE: &str = r#"
[garment]
kind = "square"
n = 5
size = 1.0
sink = 0.1
[body]
kind = "sphere"
radius = 0.3
[material]
stiffness = 0.1
"#;

#[test]
fn sphere_sample_writes_three_artifacts_without_penetration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenes().join("sphere_drape.toml");
    let o = drape(&["drape", "--config", cfg.to_str().unwrap(), "--out", "run"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let run = dir.path().join("run");
    for f in ["draped.obj", "metrics.json", "trace.csv"] {
        assert!(run.join(f).is_file(), "{f} missing");
    }
    let m = json(&run.join("metrics.json"));
    assert_eq!(m["schema_version"], 1);
    assert_eq!(m["b2g_percent"].as_f64(), Some(0.0));
    assert!(m["min_distance_m"].as_f64().unwrap() >= SolverConfig::default().epsilon - 1e-6);
    let trace = std::fs::read_to_string(run.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 201);
    assert_eq!(load_obj(run.join("draped.obj")).unwrap().faces.len(), 50);
}

#[test]
fn all_stages_off_returns_the_placement() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenes().join("sphere_drape.toml");
    let o = drape(
        &["drape", "--config", cfg.to_str().unwrap(), "--out", "id", "--toggle", "gnn=off", "--toggle", "solver=off", "--toggle", "collision=off"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let scene = sphere_drape_scene().unwrap();
    let x = place_garment(&scene.mesh, &scene.body, SolverConfig::default().epsilon, scene.placement).unwrap();
    let got = std::fs::read_to_string(dir.path().join("id/draped.obj")).unwrap();
    // the OBJ header names the mesh; the sample renames only the scene
    assert_eq!(got, write_obj(&scene.mesh, &x));
    assert_eq!(std::fs::read_to_string(dir.path().join("id/trace.csv")).unwrap().lines().count(), 1);
}

#[test]
fn missing_garment_file_is_a_validation_error_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[garment]\nkind = \"obj\"\npath = \"absent.obj\"\n[body]\nkind = \"sphere\"\nradius = 0.3\n");
    let o = drape(&["drape", "--config", &cfg], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("garment.path"), "{}", stderr(&o));
}

#[test]
fn malformed_documents_exit_with_validation_status() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(dir.path(), "u.toml", &format!("{SMALL_SCENE}\n[pipeline]\nuse_friction = true\n"));
    assert_eq!(code(&drape(&["drape", "--config", &unknown], dir.path())), 2);
    let syntax = write(dir.path(), "s.toml", "solver.T = = 3\n");
    assert_eq!(code(&drape(&["drape", "--config", &syntax], dir.path())), 2);
    assert_eq!(code(&drape(&["drape"], dir.path())), 2);
    let ok = write(dir.path(), "ok.toml", SMALL_SCENE);
    assert_eq!(code(&drape(&["drape", "--config", &ok, "--toggle", "gnn=sometimes"], dir.path())), 2);
    // the network stage without a checkpoint
    assert_eq!(code(&drape(&["drape", "--config", &ok, "--toggle", "gnn=on"], dir.path())), 2);
    let o = drape(&["drape", "--config", "absent.toml"], dir.path());
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn runaway_step_size_exits_with_divergence_status() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "d.toml", &format!("solver.T = 200\nsolver.eta_base = 10.0\n{SMALL_SCENE}"));
    let o = drape(&["drape", "--config", &cfg], dir.path());
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("diverged"), "{}", stderr(&o));
}

#[test]
fn unwritable_output_exits_with_io_status() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL_SCENE);
    std::fs::write(dir.path().join("blocker"), "").unwrap();
    let o = drape(&["drape", "--config", &cfg, "--out", "blocker/run"], dir.path());
    assert_eq!(code(&o), 4, "{}", stderr(&o));
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenes().join("capsule_drape.toml");
    let runs: Vec<PathBuf> = ["1", "3"]
        .iter()
        .map(|t| {
            let out = format!("t{t}");
            let o = Command::new(env!("CARGO_BIN_EXE_drape"))
                .args(["drape", "--config", cfg.to_str().unwrap(), "--out", &out])
                .env("DRAPE_THREADS", t)
                .current_dir(dir.path())
                .output()
                .unwrap();
            assert_eq!(code(&o), 0, "{}", stderr(&o));
            dir.path().join(out)
        })
        .collect();
    for f in ["draped.obj", "metrics.json", "trace.csv"] {
        assert_eq!(std::fs::read(runs[0].join(f)).unwrap(), std::fs::read(runs[1].join(f)).unwrap(), "{f}");
    }
}

#[test]
fn gradcheck_passes_on_a_correct_build() {
    let dir = tempfile::tempdir().unwrap();
    let o = drape(&["gradcheck", "--out", "gc"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("[PASS]")).count(), 5, "{stdout}");
    assert!(json(&dir.path().join("gc/gradcheck.json"))["suites"].as_array().unwrap().iter().all(|s| s["passed"] == true));
}

#[test]
fn eval_reports_all_eight_stage_combinations() {
    let dir = tempfile::tempdir().unwrap();
    let train = write(dir.path(), "t.toml", "out = \"tr\"\n[train]\niterations = 3\nlatent = 8\nblocks = 2\nscenes = 2\nbatch = 2\ncheckpoint_every = 0\n");
    let o = drape(&["train", "--config", &train], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(dir.path().join("tr/loss.csv")).unwrap().lines().count(), 4);
    let eval = write(dir.path(), "e.toml", "out = \"ev\"\nchekpoint_is_a_typo = 1\n");
    assert_eq!(code(&drape(&["eval", "--config", &eval], dir.path())), 2);
    let eval = write(dir.path(), "e.toml", "out = \"ev\"\nsolver.T = 3\neval.scenes = 3\n");
    assert_eq!(code(&drape(&["eval", "--config", &eval], dir.path())), 2, "no checkpoint");
    let o = drape(&["eval", "--config", &eval, "--checkpoint", "tr/checkpoint"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let table = json(&dir.path().join("ev/eval.json"));
    let rows = table["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 8);
    let labels: Vec<&str> = rows.iter().map(|r| r["label"].as_str().unwrap()).collect();
    assert!(labels.contains(&"none") && labels.contains(&"gnn+solver+collision"));
    for r in rows {
        if r["toggles"]["use_collision"] == true {
            assert_eq!(r["b2g_percent"].as_f64(), Some(0.0), "{}", r["label"]);
        }
    }
    assert_eq!(std::fs::read_to_string(dir.path().join("ev/eval.csv")).unwrap().lines().count(), 9);
}

#[test]
fn bench_time_grows_with_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "b.toml", &format!("bench.samples = 100\nbench.warmup = 5\nbench.T = [15, 3]\nbench.step_vertices = 0\n{SMALL_SCENE}"));
    let o = drape(&["bench", "--config", &cfg, "--out", "bn"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let b = json(&dir.path().join("bn/bench.json"));
    let rows = b["rows"].as_array().unwrap();
    assert_eq!(rows.iter().map(|r| r["T"].as_u64().unwrap()).collect::<Vec<_>>(), [3, 15]);
    let median = |r: &Value| r["ms"]["total"]["median"].as_f64().unwrap();
    assert!(median(&rows[1]) > median(&rows[0]));
    assert_eq!(b["monotone_in_t"], true);
    assert!(b["stretch_step"].is_null());
}

#[test]
fn gen_is_reproducible_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str, out: &str| {
        let o = drape(&["gen", "square", "--n", "4", "--size", "0.5", "--jitter", "0.01", "--seed", seed, "--out", out], dir.path());
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        std::fs::read(dir.path().join(out)).unwrap()
    };
    assert_eq!(run("5", "a.obj"), run("5", "b.obj"));
    assert_ne!(run("5", "a.obj"), run("6", "c.obj"));
    assert_eq!(load_obj(dir.path().join("a.obj")).unwrap().vertices.len(), 16);
    let o = drape(&["gen", "tube", "--nu", "2", "--out", "t.obj"], dir.path());
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert_eq!(code(&drape(&["gen", "square"], dir.path())), 2);
}
