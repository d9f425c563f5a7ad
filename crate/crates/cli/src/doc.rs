//! JSON instance documents.
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "vertices": [{"id": "a", "x": 0, "y": 0}, {"id": "x"}],
//!   "edges": [{"u": "a", "v": "b", "bends": [{"x": 2, "y": 0}]}, {"u": "a", "v": "x", "missing": true}],
//!   "budget": 3,
//!   "ports": [{"anchor": "a", "side": "N"}]
//! }
//! ```
//!
//! Coordinates are integers or exact strings such as `"3/2"` or `"0.25"`.
//! A vertex without coordinates is missing; so is every edge marked
//! `missing`. A port names the edge it serves only when its anchor has
//! more than one missing edge.

use std::collections::BTreeMap;

use orthext::drawing::{edge_key, EdgeKey};
use orthext::geom::{Dir, Point, Rat};
use orthext::instance::{BmoeInstance, PortCandidate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DocError {
    #[error("parse error at line {line}, column {column}: {msg}")]
    Parse { line: usize, column: usize, msg: String },
    #[error("field `{field}`: {msg}")]
    Field { field: String, msg: String },
    #[error("invalid instance: {0}")]
    Invalid(String),
}

fn field(field: impl Into<String>, msg: impl Into<String>) -> DocError {
    DocError::Field { field: field.into(), msg: msg.into() }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexDoc {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Rat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Rat>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDoc {
    pub u: String,
    pub v: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bends: Vec<Point>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub missing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortDoc {
    pub anchor: String,
    pub side: Dir,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge: Option<[String; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDocument {
    pub format_version: u32,
    pub vertices: Vec<VertexDoc>,
    pub edges: Vec<EdgeDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ports: Vec<PortDoc>,
}

impl InstanceDocument {
    pub fn from_instance(inst: &BmoeInstance) -> InstanceDocument {
        let vertices = inst
            .vertices
            .iter()
            .map(|v| {
                let p = inst.drawing.vertices.get(v);
                VertexDoc { id: v.clone(), x: p.map(|p| p.x), y: p.map(|p| p.y) }
            })
            .collect();
        let edges = inst
            .edges
            .iter()
            .map(|k| match inst.drawing.edges.get(k) {
                Some(pl) => {
                    let n = pl.points.len();
                    EdgeDoc { u: k.0.clone(), v: k.1.clone(), bends: pl.points[1..n - 1].to_vec(), missing: false }
                }
                None => EdgeDoc { u: k.0.clone(), v: k.1.clone(), bends: vec![], missing: true },
            })
            .collect();
        let ports = inst
            .fixed_ports
            .iter()
            .map(|p| {
                let own = inst.missing_edges().iter().filter(|(u, v)| *u == p.anchor || *v == p.anchor).count();
                let edge = (own != 1).then(|| [p.edge.0.clone(), p.edge.1.clone()]);
                PortDoc { anchor: p.anchor.clone(), side: p.side, edge }
            })
            .collect();
        InstanceDocument { format_version: FORMAT_VERSION, vertices, edges, budget: inst.budget, ports }
    }

    pub fn to_instance(&self) -> Result<BmoeInstance, DocError> {
        if self.format_version != FORMAT_VERSION {
            return Err(field("format_version", format!("unsupported version {}", self.format_version)));
        }
        let mut inst = BmoeInstance { budget: self.budget, ..BmoeInstance::default() };
        let mut pos: BTreeMap<String, Point> = BTreeMap::new();
        for (i, v) in self.vertices.iter().enumerate() {
            if !inst.vertices.insert(v.id.clone()) {
                return Err(field(format!("vertices[{i}].id"), format!("duplicate id {}", v.id)));
            }
            match (v.x, v.y) {
                (Some(x), Some(y)) => {
                    pos.insert(v.id.clone(), Point { x, y });
                }
                (None, None) => {}
                _ => return Err(field(format!("vertices[{i}]"), "needs both coordinates or neither")),
            }
        }
        for (id, p) in &pos {
            inst.drawing.add_vertex(id, *p);
        }
        for (i, e) in self.edges.iter().enumerate() {
            for (name, id) in [("u", &e.u), ("v", &e.v)] {
                if !inst.vertices.contains(id) {
                    return Err(field(format!("edges[{i}].{name}"), format!("unknown vertex {id}")));
                }
            }
            let key = edge_key(&e.u, &e.v);
            if !inst.edges.insert(key.clone()) {
                return Err(field(format!("edges[{i}]"), format!("duplicate edge {}-{}", e.u, e.v)));
            }
            if e.missing {
                if !e.bends.is_empty() {
                    return Err(field(format!("edges[{i}].bends"), "a missing edge has no bends"));
                }
                continue;
            }
            let (Some(a), Some(b)) = (pos.get(&e.u), pos.get(&e.v)) else {
                return Err(field(format!("edges[{i}]"), "a drawn edge needs drawn endpoints"));
            };
            let mut pts = vec![*a];
            pts.extend(&e.bends);
            pts.push(*b);
            if key.0 != e.u {
                pts.reverse();
            }
            inst.drawing.add_edge(&key.0, &key.1, pts);
        }
        let missing: Vec<EdgeKey> = inst.missing_edges();
        for (i, p) in self.ports.iter().enumerate() {
            let own: Vec<&EdgeKey> = missing.iter().filter(|(u, v)| *u == p.anchor || *v == p.anchor).collect();
            let edge = match &p.edge {
                Some([u, v]) => edge_key(u, v),
                None if own.len() == 1 => own[0].clone(),
                None => return Err(field(format!("ports[{i}].edge"), format!("anchor {} needs an explicit edge", p.anchor))),
            };
            if !own.contains(&&edge) {
                return Err(field(format!("ports[{i}]"), format!("{} is not a missing edge at {}", edge_name(&edge), p.anchor)));
            }
            inst.fixed_ports.push(PortCandidate { anchor: p.anchor.clone(), side: p.side, edge });
        }
        Ok(inst)
    }
}

fn edge_name(e: &EdgeKey) -> String {
    format!("{}-{}", e.0, e.1)
}

/// Reads a document without checking the instance's structure.
pub fn parse_unchecked(text: &str) -> Result<BmoeInstance, DocError> {
    let doc: InstanceDocument = serde_json::from_str(text)
        .map_err(|e| DocError::Parse { line: e.line(), column: e.column(), msg: e.to_string() })?;
    doc.to_instance()
}

/// Reads and checks a document.
pub fn parse(text: &str) -> Result<BmoeInstance, DocError> {
    let inst = parse_unchecked(text)?;
    inst.check().map_err(|e| DocError::Invalid(e.to_string()))?;
    Ok(inst)
}

pub fn serialize(inst: &BmoeInstance) -> String {
    serde_json::to_string_pretty(&InstanceDocument::from_instance(inst)).expect("documents serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"format_version": 1,
        "vertices": [{"id": "a", "x": 0, "y": 0}, {"id": "b", "x": 2, "y": 0}],
        "edges": [{"u": "a", "v": "b"}]}"#;

    #[test]
    fn minimal_document_has_nothing_missing() {
        let inst = parse(MINIMAL).unwrap();
        assert_eq!(inst.kappa(), 0);
        assert_eq!(inst.drawing.edges.len(), 1);
    }

    #[test]
    fn vertex_without_coordinates_is_missing() {
        let text = r#"{"format_version": 1,
            "vertices": [{"id": "a", "x": 0, "y": 0}, {"id": "b", "x": 2, "y": 0}, {"id": "x"}],
            "edges": [{"u": "a", "v": "b"}, {"u": "b", "v": "x", "missing": true}]}"#;
        let inst = parse(text).unwrap();
        assert_eq!(inst.missing_vertices(), vec!["x".to_string()]);
        assert_eq!(inst.kappa(), 2);
    }

    #[test]
    fn dangling_endpoint_is_a_field_error() {
        let text = r#"{"format_version": 1,
            "vertices": [{"id": "a", "x": 0, "y": 0}],
            "edges": [{"u": "a", "v": "zz", "missing": true}]}"#;
        match parse(text) {
            Err(DocError::Field { field, .. }) => assert_eq!(field, "edges[0].v"),
            other => panic!("expected a field error, got {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_a_line() {
        let err = parse("{\n\"format_version\": 1,\n\"vertices\": [,]}").unwrap_err();
        assert!(matches!(err, DocError::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn exact_strings_and_reversed_edges() {
        let text = r#"{"format_version": 1,
            "vertices": [{"id": "b", "x": "1/2", "y": 0}, {"id": "a", "x": "0.5", "y": "3"}],
            "edges": [{"u": "b", "v": "a"}]}"#;
        let inst = parse(text).unwrap();
        let pl = &inst.drawing.edges[&edge_key("a", "b")];
        assert_eq!(pl.points[0], Point { x: Rat::new(1, 2), y: Rat::int(3) });
        assert_eq!(parse(&serialize(&inst)).unwrap(), inst);
    }

    #[test]
    fn port_edge_is_inferred_when_unique() {
        let text = r#"{"format_version": 1,
            "vertices": [{"id": "a", "x": 0, "y": 0}, {"id": "b", "x": 2, "y": 0}, {"id": "x"}],
            "edges": [{"u": "a", "v": "b"}, {"u": "a", "v": "x", "missing": true}],
            "ports": [{"anchor": "a", "side": "N"}]}"#;
        let inst = parse(text).unwrap();
        assert_eq!(inst.fixed_ports[0].edge, edge_key("a", "x"));
        assert_eq!(parse(&serialize(&inst)).unwrap(), inst);
    }
}
