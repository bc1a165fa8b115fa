use std::path::Path;

use drape_core::pipeline::{capsule_drape_scene, sphere_drape_scene, Toggles};
use drape_core::train::TrainConfig;

use super::*;

fn scenes_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenes")
}

fn parse(text: &str) -> RunConfig {
    RunConfig::parse(text, ".").unwrap()
}

fn config_key(e: CliError) -> String {
    match e {
        CliError::Config { key, .. } => key,
        other => panic!("expected a config error, got {other}"),
    }
}

#[test]
fn sample_scenes_match_builtin_scenes() {
    for (file, want) in [("sphere_drape.toml", sphere_drape_scene().unwrap()), ("capsule_drape.toml", capsule_drape_scene().unwrap())] {
        let got = RunConfig::load(&scenes_dir().join(file)).unwrap().scene().unwrap();
        assert_eq!(got.name, want.name);
        assert_eq!(got.mesh.vertices, want.mesh.vertices);
        assert_eq!(got.mesh.faces, want.mesh.faces);
        assert_eq!(got.material, want.material);
        assert_eq!(got.placement, want.placement);
        assert_eq!(format!("{:?}", got.body), format!("{:?}", want.body));
    }
}

#[test]
fn dotted_and_table_forms_agree() {
    let a = parse("solver.T = 7\nsolver.gamma = 0.9\n").solver().unwrap();
    let b = parse("[solver]\nT = 7\ngamma = 0.9\n").solver().unwrap();
    assert_eq!(a, b);
    assert_eq!(a.iterations, 7);
    assert_eq!(a.gamma, 0.9);
}

#[test]
fn empty_document_takes_defaults() {
    let c = parse("");
    assert_eq!(c.solver().unwrap(), SolverConfig::default());
    assert_eq!(c.material().unwrap(), MaterialParams::default());
    assert_eq!(c.train().unwrap(), TrainConfig::default());
    assert_eq!(c.toggles(), Toggles { use_gnn: false, use_solver: true, use_collision: true });
    assert_eq!(config_key(c.scene().unwrap_err()), "garment");
}

#[test]
fn unknown_key_is_rejected() {
    let e = RunConfig::parse("[solver]\nTT = 3\n", ".").unwrap_err();
    assert_eq!(e.exit_code(), crate::error::EXIT_VALIDATION);
    assert!(e.to_string().contains("TT"), "{e}");
}

#[test]
fn missing_garment_file_names_the_key() {
    let c = parse("[garment]\nkind = \"obj\"\npath = \"nope/missing.obj\"\n[body]\nkind = \"sphere\"\nradius = 0.3\n");
    let e = c.scene().unwrap_err();
    assert_eq!(e.exit_code(), crate::error::EXIT_VALIDATION);
    assert_eq!(config_key(e), "garment.path");
}

#[test]
fn missing_required_values_name_the_key() {
    let c = parse("[garment]\nkind = \"square\"\nsize = 1.0\n[body]\nkind = \"sphere\"\nradius = 0.3\n");
    assert_eq!(config_key(c.scene().unwrap_err()), "garment.n");
    let c = parse("[garment]\nkind = \"square\"\nn = 4\nsize = 1.0\n[body]\nkind = \"capsule\"\nradius = 0.3\n");
    assert_eq!(config_key(c.scene().unwrap_err()), "body.a");
}

#[test]
fn out_of_range_values_are_rejected() {
    assert_eq!(config_key(parse("solver.delta = 1.0").solver().unwrap_err()), "solver.delta");
    assert_eq!(config_key(parse("solver.gamma = 1.5").solver().unwrap_err()), "solver");
    assert_eq!(config_key(parse("material.stiffness = -1.0").material().unwrap_err()), "material.stiffness");
    assert_eq!(config_key(parse("material.mu = -5.0").material().unwrap_err()), "material");
    assert_eq!(config_key(parse("train.learning_rate = 0.0").train().unwrap_err()), "train");
    assert_eq!(config_key(parse("train.bounds.stiffness = [0.5, 0.1]").train().unwrap_err()), "train.bounds.stiffness");
    assert_eq!(config_key(parse("bench.samples = 0").bench().unwrap_err()), "bench.samples");
    assert_eq!(config_key(parse("eval.scenes = 0").eval_scenes().unwrap_err()), "eval.scenes");
}

#[test]
fn delta_and_eta_scale_map_to_learnable_values() {
    let s = parse("solver.delta = 1.2\nsolver.eta_scale = 0.5\n").solver().unwrap();
    assert!((s.delta() - 1.2).abs() < 1e-12);
    assert!((s.log_eta_scale - 0.5f64.ln()).abs() < 1e-15);
}

#[test]
fn toggle_overrides_apply_on_top_of_the_file() {
    let mut c = parse("pipeline.use_solver = false\n");
    c.apply(&Overrides { toggles: vec![("gnn".into(), "on".into()), ("use_collision".into(), "off".into())], seed: Some(9), ..Default::default() })
        .unwrap();
    assert_eq!(c.toggles(), Toggles { use_gnn: true, use_solver: false, use_collision: false });
    assert_eq!(c.seed(), 9);
    assert_eq!(c.train().unwrap().seed, 9);
    let bad = c.apply(&Overrides { toggles: vec![("gnn".into(), "maybe".into())], ..Default::default() });
    assert_eq!(bad.unwrap_err().exit_code(), crate::error::EXIT_VALIDATION);
    let bad = c.apply(&Overrides { toggles: vec![("friction".into(), "on".into())], ..Default::default() });
    assert!(bad.is_err());
    assert!(split_toggle("gnn").is_err());
    assert_eq!(split_toggle("gnn = off").unwrap(), ("gnn".to_string(), "off".to_string()));
}

#[test]
fn train_section_overrides_defaults() {
    let t = parse("seed = 3\n[train]\niterations = 10\nlatent = 8\nblocks = 2\nT = 2\nweights.gravity = 0.5\nbounds.sphere_radius = [0.2, 0.3]\n").train().unwrap();
    assert_eq!((t.iterations, t.gnn.latent, t.gnn.blocks, t.t_train, t.seed), (10, 8, 2, 2, 3));
    assert_eq!(t.weights.gravity, 0.5);
    assert_eq!(t.bounds.sphere_radius, (0.2, 0.3));
}
