//! Scenario files, suite manifests and the bundled library.

use std::path::Path;

use orion_core::harness::run::scenario_group;
use orion_core::harness::{
    library, load_scenario, PlannerKind, Scenario, ScenarioError, SuiteManifest,
};

const MINIMAL: &str = r#"{
  "schema_version": 1,
  "name": "tiny",
  "world": {
    "width": 6.0,
    "height": 4.0,
    "objects": [{"id": 1, "label": "chair", "position": {"x": 3.0, "y": 2.0}}],
    "robot_start": {"x": 1.0, "y": 1.0, "theta": 0.0}
  },
  "tasks": [{"command": "find a chair"}]
}"#;

fn repo_scenarios() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn files(root: &Path) -> Vec<std::path::PathBuf> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<std::path::PathBuf>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}

#[test]
fn bundled_files_match_the_generator() {
    let tmp = tempfile::tempdir().unwrap();
    library::export(tmp.path()).unwrap();
    let (want, got) = (files(tmp.path()), files(&repo_scenarios()));
    assert_eq!(
        got, want,
        "scenarios/ is out of date; rerun export-scenarios"
    );
    for f in &want {
        let a = std::fs::read_to_string(tmp.path().join(f)).unwrap();
        let b = std::fs::read_to_string(repo_scenarios().join(f)).unwrap();
        assert!(a == b, "{} differs from the generator output", f.display());
    }
}

#[test]
fn library_group_sizes() {
    let all = library::all();
    let count = |g: &str| all.iter().filter(|s| scenario_group(&s.name) == g).count();
    assert_eq!(
        (count("a"), count("b"), count("c"), count("dyn")),
        (12, 15, 5, 9)
    );
    for s in all
        .iter()
        .chain([library::demo(), library::two_room_benchmark()].iter())
    {
        s.validate().unwrap_or_else(|e| panic!("{}: {e}", s.name));
    }
}

#[test]
fn every_wall_end_is_anchored_or_capped() {
    // A free wall end is a point a thin chassis can clip edge-on; each must
    // touch the boundary or another segment. End caps themselves are exempt.
    for s in library::all()
        .iter()
        .chain([library::demo(), library::two_room_benchmark()].iter())
    {
        let w = s.build_world();
        for (i, seg) in w.walls.iter().enumerate() {
            if seg.a.distance(&seg.b) <= library::FRAME_DEPTH + 1e-6 {
                continue;
            }
            for p in [seg.a, seg.b] {
                let on_boundary = p.x.abs() < 1e-9
                    || p.y.abs() < 1e-9
                    || (p.x - w.width).abs() < 1e-9
                    || (p.y - w.height).abs() < 1e-9;
                let touches = w
                    .walls
                    .iter()
                    .enumerate()
                    .any(|(j, o)| j != i && o.distance_to_point(&p) < 1e-6);
                assert!(
                    on_boundary || touches,
                    "{}: wall {i} has a free end at ({}, {})",
                    s.name,
                    p.x,
                    p.y
                );
            }
        }
    }
}

#[test]
fn minimal_file_gets_defaults() {
    let s = Scenario::from_json(MINIMAL).unwrap();
    assert_eq!(s.seeds, vec![0]);
    assert_eq!(s.planner, PlannerKind::default());
    assert!(s.world.boundary);
    assert!(s.mutations.is_empty() && s.premap.is_empty());
    assert_eq!(s.budget.max_steps, 10);
    assert_eq!(s.budget.max_ticks, 6000);
}

#[test]
fn unknown_field_is_rejected_by_name() {
    let text = MINIMAL.replace("\"name\": \"tiny\",", "\"name\": \"tiny\", \"florb\": 3,");
    let err = Scenario::from_json(&text).unwrap_err();
    assert!(matches!(err, ScenarioError::Schema(_)));
    assert!(err.to_string().contains("florb"), "{err}");
}

#[test]
fn bad_values_are_rejected() {
    let v2 = MINIMAL.replace("\"schema_version\": 1", "\"schema_version\": 2");
    assert!(matches!(
        Scenario::from_json(&v2),
        Err(ScenarioError::Version(2))
    ));

    let outside = MINIMAL.replace("\"x\": 3.0, \"y\": 2.0", "\"x\": 9.0, \"y\": 2.0");
    match Scenario::from_json(&outside) {
        Err(ScenarioError::Geometry { field, .. }) => assert!(field.contains("objects"), "{field}"),
        other => panic!("expected geometry error, got {other:?}"),
    }

    let label = MINIMAL.replace("\"chair\"", "\"unicorn\"");
    assert!(matches!(
        Scenario::from_json(&label),
        Err(ScenarioError::UnknownLabel { .. })
    ));

    let missing = MINIMAL.replace(
        "\"tasks\": [{\"command\": \"find a chair\"}]",
        "\"seeds\": [1]",
    );
    assert!(matches!(
        Scenario::from_json(&missing),
        Err(ScenarioError::Schema(_))
    ));
}

#[test]
fn canonical_json_round_trips() {
    for s in library::all() {
        let text = s.to_canonical_json();
        let back = Scenario::from_json(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_canonical_json(), text);
    }
}

#[test]
fn manifests_load_their_scenarios() {
    let dir = repo_scenarios().join("suites");
    let (m, scenarios) = SuiteManifest::load(&dir.join("comparison.json")).unwrap();
    assert_eq!(m.backends.len(), 3);
    assert_eq!(scenarios.len(), 9);
    assert!(scenarios.iter().all(|s| scenario_group(&s.name) == "dyn"));
    let (_, a) = SuiteManifest::load(&dir.join("suite-a.json")).unwrap();
    assert_eq!(a, library::scenario_a());
}

#[test]
fn manifest_without_backends_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("m.json");
    std::fs::write(&path, r#"{"name": "x", "scenarios": [], "backends": []}"#).unwrap();
    assert!(matches!(
        SuiteManifest::load(&path),
        Err(ScenarioError::Invalid { .. })
    ));
}

#[test]
fn missing_file_is_an_io_error() {
    assert!(matches!(
        load_scenario(Path::new("/nonexistent/x.json")),
        Err(ScenarioError::Io(_))
    ));
}
