use drape_core::forces;
use drape_core::pipeline::{capsule_drape_scene, drape_pipeline, sphere_drape_scene, PipelineConfig, Toggles};
use drape_core::solver::SolverConfig;
use drape_core::train::{scene_set, SceneBounds};

fn config(toggles: Toggles, iterations: usize) -> PipelineConfig {
    PipelineConfig { toggles, solver: SolverConfig { iterations, ..Default::default() }, ..Default::default() }
}

const CLASSICAL: Toggles = Toggles { use_gnn: false, use_solver: true, use_collision: true };

#[test]
fn sample_scenes_end_clear_of_the_body() {
    for scene in [sphere_drape_scene().unwrap(), capsule_drape_scene().unwrap()] {
        let cfg = config(CLASSICAL, 50);
        let r = drape_pipeline(&scene, &cfg, None).unwrap();
        let min_d = scene.body.batch_query(&r.x_final).iter().map(|q| q.d).fold(f64::INFINITY, f64::min);
        assert!(min_d >= cfg.solver.epsilon - 1e-6, "{}: {min_d}", scene.name);
        assert_eq!(r.b2g_percent, 0.0, "{}", scene.name);
        assert!(r.projection.unwrap().converged);
        assert_eq!(r.trace.len(), 51);
    }
}

#[test]
fn solver_lowers_internal_energy_from_the_placement() {
    let scene = sphere_drape_scene().unwrap();
    let r = drape_pipeline(&scene, &config(Toggles { use_collision: false, ..CLASSICAL }, 100), None).unwrap();
    let first = r.trace.first().unwrap();
    let last = r.trace.last().unwrap();
    assert!(last.total_energy < first.total_energy);
    assert!(last.total_force < first.total_force);
}

#[test]
fn no_stages_leaves_the_placement() {
    let scene = sphere_drape_scene().unwrap();
    let r = drape_pipeline(&scene, &config(Toggles::NONE, 10), None).unwrap();
    assert_eq!(r.x_final, r.x_init);
    assert!(r.trace.is_empty() && r.projection.is_none());
}

#[test]
fn network_stage_requires_parameters() {
    let scene = sphere_drape_scene().unwrap();
    assert!(drape_pipeline(&scene, &config(Toggles::default(), 3), None).is_err());
}

#[test]
fn repeated_drapes_are_identical() {
    let scene = capsule_drape_scene().unwrap();
    let cfg = config(CLASSICAL, 15);
    let a = drape_pipeline(&scene, &cfg, None).unwrap();
    let b = drape_pipeline(&scene, &cfg, None).unwrap();
    assert_eq!(a.x_final, b.x_final);
    assert_eq!(a.trace, b.trace);
}

#[test]
fn procedural_scenes_drape_without_penetration() {
    let solver = SolverConfig { iterations: 3, ..Default::default() };
    for prep in scene_set(11, 6, &SceneBounds::default(), &solver).unwrap() {
        let r = drape_prepared_classical(&prep, &solver);
        assert_eq!(forces::metric_b2g(&r, &prep.rest, &prep.scene.body), 0.0, "{}", prep.scene.name);
    }
}

fn drape_prepared_classical(prep: &drape_core::pipeline::PreparedScene, solver: &SolverConfig) -> Vec<drape_core::geom::Vec3> {
    let cfg = PipelineConfig { toggles: CLASSICAL, solver: *solver, ..Default::default() };
    drape_core::pipeline::drape_prepared(prep, &cfg, None).unwrap().x_final
}
