//! Problem instances: the whole-graph extension problem and its single-face form.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::drawing::{edge_key, validate, Drawing, EdgeKey, VertexId};
use crate::error::InstanceError;
use crate::geom::{Dir, Point};
use crate::region::FaceRegion;

/// An anchor side reserved for one missing edge.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct PortCandidate {
    pub anchor: VertexId,
    pub side: Dir,
    pub edge: EdgeKey,
}

/// Graph `G`, a drawing of the connected subgraph `H`, and an optional bend budget.
#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct BmoeInstance {
    pub vertices: BTreeSet<VertexId>,
    pub edges: BTreeSet<EdgeKey>,
    pub drawing: Drawing,
    pub budget: Option<u32>,
    /// Ports fixed by the caller; other anchor sides are branched over.
    pub fixed_ports: Vec<PortCandidate>,
}

fn connected(vertices: &BTreeSet<VertexId>, edges: &BTreeSet<EdgeKey>) -> bool {
    let Some(start) = vertices.iter().next() else { return true };
    let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (u, v) in edges {
        adj.entry(u).or_default().push(v);
        adj.entry(v).or_default().push(u);
    }
    let mut seen = BTreeSet::from([start.as_str()]);
    let mut queue = VecDeque::from([start.as_str()]);
    while let Some(v) = queue.pop_front() {
        for w in adj.get(v).into_iter().flatten() {
            if seen.insert(w) {
                queue.push_back(w);
            }
        }
    }
    seen.len() == vertices.len()
}

impl BmoeInstance {
    pub fn missing_vertices(&self) -> Vec<VertexId> {
        self.vertices.iter().filter(|v| !self.drawing.vertices.contains_key(*v)).cloned().collect()
    }

    pub fn missing_edges(&self) -> Vec<EdgeKey> {
        self.edges.iter().filter(|e| !self.drawing.edges.contains_key(*e)).cloned().collect()
    }

    pub fn kappa(&self) -> usize {
        self.missing_vertices().len() + self.missing_edges().len()
    }

    pub fn neighbors(&self, v: &str) -> Vec<VertexId> {
        self.edges
            .iter()
            .filter_map(|(a, b)| {
                if a == v {
                    Some(b.clone())
                } else if b == v {
                    Some(a.clone())
                } else {
                    None
                }
            })
            .collect()
    }

    /// Structural preconditions: drawing valid, `H` inside `G`, both connected, degree at most four.
    pub fn check(&self) -> Result<(), InstanceError> {
        let bad = |m: String| Err(InstanceError::Malformed(m));
        for v in self.drawing.vertices.keys() {
            if !self.vertices.contains(v) {
                return bad(format!("drawn vertex {v} is not in the graph"));
            }
        }
        for (u, v) in &self.edges {
            if u == v {
                return bad(format!("self-loop at {u}"));
            }
            if !self.vertices.contains(u) || !self.vertices.contains(v) {
                return bad(format!("edge {u}-{v} uses an unknown vertex"));
            }
        }
        for k in self.drawing.edges.keys() {
            if !self.edges.contains(k) {
                return bad(format!("drawn edge {}-{} is not in the graph", k.0, k.1));
            }
        }
        for v in &self.vertices {
            if self.neighbors(v).len() > 4 {
                return bad(format!("vertex {v} has degree above four"));
            }
        }
        let report = validate(&self.drawing);
        if !report.is_valid() {
            return bad(format!("drawing of H is invalid: {:?}", report.violations));
        }
        if self.drawing.vertices.is_empty() {
            return bad("H is empty".into());
        }
        let hv: BTreeSet<VertexId> = self.drawing.vertices.keys().cloned().collect();
        let he: BTreeSet<EdgeKey> = self.drawing.edges.keys().cloned().collect();
        if !connected(&hv, &he) {
            return bad("H is not connected".into());
        }
        if !connected(&self.vertices, &self.edges) {
            return bad("G is not connected".into());
        }
        for p in &self.fixed_ports {
            if !self.edges.contains(&p.edge) || (p.edge.0 != p.anchor && p.edge.1 != p.anchor) {
                return bad(format!("fixed port at {} names a foreign edge", p.anchor));
            }
        }
        Ok(())
    }
}

/// Extension problem restricted to one face `f` of a drawing.
///
/// Missing edges may join a missing vertex to an anchor, two missing
/// vertices, or (after cutting the outer face open) two anchors.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct FaceInstance {
    pub drawing: Drawing,
    /// Any point of the marked face.
    pub seed: Point,
    pub outer: bool,
    pub missing_vertices: Vec<VertexId>,
    pub missing_edges: Vec<EdgeKey>,
    pub ports: Vec<PortCandidate>,
    /// Subdivision vertices whose two edges must leave perpendicularly.
    pub must_bend: BTreeSet<VertexId>,
    pub dummies: BTreeSet<VertexId>,
    /// Corner vertices of the bounding rectangle added to an outer face.
    #[serde(default)]
    pub frame: Option<[VertexId; 4]>,
}

/// How a missing edge ends: at a missing vertex, or at an anchor port.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum EdgeEnd {
    Vertex(usize),
    Port(usize),
}

impl FaceInstance {
    pub fn k(&self) -> usize {
        self.missing_vertices.len()
    }

    pub fn region(&self) -> Option<FaceRegion> {
        let segs: Vec<_> = self.drawing.segments().into_iter().map(|(_, s)| s).collect();
        let pts: Vec<Point> = self.drawing.vertices.values().copied().collect();
        FaceRegion::new(&segs, &pts, &self.seed)
    }

    pub fn port_of(&self, anchor: &str, edge: &EdgeKey) -> Option<usize> {
        self.ports.iter().position(|p| p.anchor == anchor && &p.edge == edge)
    }

    pub fn vertex_index(&self, v: &str) -> Option<usize> {
        self.missing_vertices.iter().position(|x| x == v)
    }

    /// Both ends of missing edge `e`, in key order.
    pub fn ends(&self, e: usize) -> Result<[EdgeEnd; 2], InstanceError> {
        let (u, v) = &self.missing_edges[e];
        let end = |w: &VertexId| -> Result<EdgeEnd, InstanceError> {
            if let Some(i) = self.vertex_index(w) {
                Ok(EdgeEnd::Vertex(i))
            } else if let Some(p) = self.port_of(w, &self.missing_edges[e]) {
                Ok(EdgeEnd::Port(p))
            } else {
                Err(InstanceError::Malformed(format!("edge {u}-{v} has no port at {w}")))
            }
        };
        Ok([end(u)?, end(v)?])
    }

    /// Missing edges incident to missing vertex `x`.
    pub fn edges_at(&self, x: usize) -> Vec<usize> {
        let id = &self.missing_vertices[x];
        (0..self.missing_edges.len())
            .filter(|&e| &self.missing_edges[e].0 == id || &self.missing_edges[e].1 == id)
            .collect()
    }

    pub fn check(&self) -> Result<(), InstanceError> {
        let bad = |m: String| Err(InstanceError::Malformed(m));
        let report = validate(&self.drawing);
        if !report.is_valid() {
            return bad(format!("face drawing invalid: {:?}", report.violations));
        }
        let Some(region) = self.region() else { return bad("seed lies on the drawing".into()) };
        for x in &self.missing_vertices {
            if self.drawing.vertices.contains_key(x) {
                return bad(format!("missing vertex {x} is drawn"));
            }
        }
        let mut used: BTreeSet<(VertexId, Dir)> = BTreeSet::new();
        for p in &self.ports {
            let Some(pos) = self.drawing.vertices.get(&p.anchor) else {
                return bad(format!("port anchor {} is not drawn", p.anchor));
            };
            if !self.missing_edges.contains(&p.edge) {
                return bad(format!("port at {} names an unknown edge", p.anchor));
            }
            if !used.insert((p.anchor.clone(), p.side)) {
                return bad(format!("side {:?} of {} used twice", p.side, p.anchor));
            }
            if self.drawing.ports_used(&p.anchor).iter().any(|(d, _)| *d == p.side) {
                return bad(format!("side {:?} of {} is taken by a drawn edge", p.side, p.anchor));
            }
            let node = region.arr.locate(pos);
            match region.arr.step(node, p.side) {
                Some(c) if region.inside(c) => {}
                _ => return bad(format!("port {:?} of {} does not enter the face", p.side, p.anchor)),
            }
        }
        for e in 0..self.missing_edges.len() {
            self.ends(e)?;
        }
        for x in &self.must_bend {
            let Some(i) = self.vertex_index(x) else { return bad(format!("must-bend {x} is not missing")) };
            if self.edges_at(i).len() != 2 {
                return bad(format!("must-bend {x} needs degree two"));
            }
        }
        for x in 0..self.k() {
            if self.edges_at(x).len() > 4 {
                return bad(format!("missing vertex {} has degree above four", self.missing_vertices[x]));
            }
        }
        Ok(())
    }

    /// Missing vertices and missing edges of a solved drawing.
    pub fn missing_part(&self, solved: &Drawing) -> Drawing {
        let mut out = Drawing::new();
        for x in &self.missing_vertices {
            if let Some(p) = solved.vertices.get(x) {
                out.vertices.insert(x.clone(), *p);
            }
        }
        for e in &self.missing_edges {
            if let Some(pl) = solved.edges.get(e) {
                out.edges.insert(e.clone(), pl.clone());
            }
        }
        out
    }

    pub fn edge_key(&self, u: &str, v: &str) -> EdgeKey {
        edge_key(u, v)
    }
}
