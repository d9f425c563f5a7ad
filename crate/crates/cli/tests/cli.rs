use std::path::{Path, PathBuf};
use std::process::Command;

use orthext::gen;
use orthext_cli::doc;
use proptest::prelude::*;
use serde_json::Value;

fn write_doc(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn orthext(args: &[&str]) -> (i32, Value) {
    let out = Command::new(env!("CARGO_BIN_EXE_orthext")).args(args).output().unwrap();
    let json = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (out.status.code().unwrap(), json)
}

const SQUARE: &str = r#"{"format_version": 1,
  "vertices": [{"id": "a", "x": 0, "y": 0}, {"id": "b", "x": 4, "y": 0},
               {"id": "c", "x": 4, "y": 4}, {"id": "d", "x": 0, "y": 4}],
  "edges": [{"u": "a", "v": "b"}, {"u": "b", "v": "c"}, {"u": "c", "v": "d"}, {"u": "d", "v": "a"}]}"#;

/// A path a-b-c drawn straight; the edge a-c must go around, which costs
/// at least one bend.
const DETOUR: &str = r#"{"format_version": 1,
  "vertices": [{"id": "a", "x": 0, "y": 0}, {"id": "b", "x": 2, "y": 0}, {"id": "c", "x": 2, "y": 2}],
  "edges": [{"u": "a", "v": "b"}, {"u": "b", "v": "c"}, {"u": "a", "v": "c", "missing": true}],
  "ports": [{"anchor": "a", "side": "N"}, {"anchor": "c", "side": "W"}]}"#;

const CROSSING: &str = r#"{"format_version": 1,
  "vertices": [{"id": "a", "x": 0, "y": 1}, {"id": "b", "x": 2, "y": 1},
               {"id": "c", "x": 1, "y": 0}, {"id": "d", "x": 1, "y": 2}],
  "edges": [{"u": "a", "v": "b"}, {"u": "c", "v": "d"}]}"#;

#[test]
fn validate_rejects_crossing_edges() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_doc(dir.path(), "x.json", CROSSING);
    let (code, json) = orthext(&["validate", f.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert_eq!(json["valid"], false);
}

#[test]
fn malformed_json_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_doc(dir.path(), "bad.json", "{\"format_version\": 1,");
    assert_eq!(orthext(&["solve", f.to_str().unwrap()]).0, 2);
    assert_eq!(orthext(&["solve", "/nonexistent/file.json"]).0, 2);
}

#[test]
fn complete_drawing_solves_with_zero_bends() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_doc(dir.path(), "sq.json", SQUARE);
    let (code, json) = orthext(&["solve", f.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(json["beta"], 0);
    assert_eq!(json["status"], "optimum");
    assert!(json["stats"].is_object());
}

#[test]
fn detour_needs_one_bend() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_doc(dir.path(), "detour.json", DETOUR);
    let svg = dir.path().join("out.svg");
    let (code, json) = orthext(&["solve", f.to_str().unwrap(), "--render", svg.to_str().unwrap()]);
    assert_eq!((code, json["beta"].as_u64()), (0, Some(1)), "{json}");
    let text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("missing-edge").count(), 1);
    let (code, json) = orthext(&["oracle", f.to_str().unwrap()]);
    assert_eq!((code, json["beta"].as_u64()), (0, Some(1)));
}

#[test]
fn budget_below_optimum_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_doc(dir.path(), "detour.json", DETOUR);
    let (code, json) = orthext(&["solve", f.to_str().unwrap(), "--budget", "0"]);
    assert_eq!(code, 1);
    assert_eq!(json["status"], "no_extension");
    assert!(json["beta"].is_null());
}

#[test]
fn solve_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_doc(dir.path(), "detour.json", DETOUR);
    let a = orthext(&["solve", f.to_str().unwrap(), "--seed", "3", "--sequential"]);
    let b = orthext(&["solve", f.to_str().unwrap(), "--seed", "3", "--sequential"]);
    assert_eq!(a, b);
}

#[test]
fn written_solution_is_a_complete_document() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_doc(dir.path(), "detour.json", DETOUR);
    let solved = dir.path().join("solved.json");
    assert_eq!(orthext(&["solve", f.to_str().unwrap(), "--write", solved.to_str().unwrap()]).0, 0);
    let (code, json) = orthext(&["validate", solved.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(json["kappa"], 0);
}

#[test]
fn reduce_and_sectors_report_structure() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_doc(dir.path(), "detour.json", DETOUR);
    let (code, json) = orthext(&["reduce", f.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(!json["branches"].as_array().unwrap().is_empty());
    let (code, json) = orthext(&["sectors", f.to_str().unwrap()]);
    assert_eq!(code, 0, "{json}");
    assert!(json["sector_count"].as_u64().unwrap() > 0);
    assert!(json["dot"].as_str().unwrap().starts_with("graph sectors"));
}

#[test]
fn render_writes_svg() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_doc(dir.path(), "sq.json", SQUARE);
    let out = dir.path().join("sq.svg");
    let (code, _) = orthext(&["render", f.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(std::fs::read_to_string(&out).unwrap().matches("<polyline").count(), 4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn documents_round_trip(seed in 0u64..10_000) {
        let d = gen::cycle_drawing(seed, 12);
        let mut inst = orthext::instance::BmoeInstance {
            vertices: d.vertices.keys().cloned().collect(),
            edges: d.edges.keys().cloned().collect(),
            drawing: d,
            ..Default::default()
        };
        let first = inst.vertices.iter().next().unwrap().clone();
        inst.vertices.insert("x".into());
        inst.edges.insert(orthext::drawing::edge_key(&first, "x"));
        inst.budget = Some((seed % 5) as u32);
        let text = doc::serialize(&inst);
        prop_assert_eq!(doc::parse(&text).unwrap(), inst);
    }
}
