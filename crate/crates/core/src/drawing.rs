//! Planar orthogonal drawings: validation, bend counting, strip operations
//! and shape descriptors.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::DrawingError;
use crate::geom::{segments_intersect, AxisSegment, Bbox, Dir, IntersectionKind, Point, Rat};

pub type VertexId = String;

/// Unordered vertex pair stored as `(min, max)`.
pub type EdgeKey = (VertexId, VertexId);

pub fn edge_key(u: &str, v: &str) -> EdgeKey {
    if u <= v {
        (u.to_string(), v.to_string())
    } else {
        (v.to_string(), u.to_string())
    }
}

/// Chain of axis-aligned segments whose interior points are all bends.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct OrthoPolyline {
    pub points: Vec<Point>,
}

impl OrthoPolyline {
    pub fn new(points: Vec<Point>) -> OrthoPolyline {
        OrthoPolyline { points }
    }

    /// Drops repeated and collinear interior points.
    pub fn simplified(points: &[Point]) -> OrthoPolyline {
        let mut out: Vec<Point> = Vec::with_capacity(points.len());
        for p in points {
            if out.last() == Some(p) {
                continue;
            }
            if out.len() >= 2 {
                let a = out[out.len() - 2];
                let b = out[out.len() - 1];
                if a.dir_to(&b).is_some() && a.dir_to(&b) == b.dir_to(p) {
                    out.pop();
                }
            }
            out.push(*p);
        }
        OrthoPolyline { points: out }
    }

    pub fn bends(&self) -> usize {
        self.points.len().saturating_sub(2)
    }

    pub fn segments(&self) -> Vec<AxisSegment> {
        self.points.windows(2).map(|w| AxisSegment { a: w[0], b: w[1] }).collect()
    }

    pub fn reversed(&self) -> OrthoPolyline {
        let mut p = self.points.clone();
        p.reverse();
        OrthoPolyline { points: p }
    }

    pub fn directions(&self) -> Vec<Dir> {
        self.points.windows(2).filter_map(|w| w[0].dir_to(&w[1])).collect()
    }

    /// Structural problems of the chain on its own.
    pub fn defects(&self) -> Option<String> {
        if self.points.len() < 2 {
            return Some("fewer than two points".into());
        }
        let dirs: Vec<Option<Dir>> = self.points.windows(2).map(|w| w[0].dir_to(&w[1])).collect();
        if dirs.iter().any(|d| d.is_none()) {
            return Some("segment is not axis-aligned or has zero length".into());
        }
        for w in dirs.windows(2) {
            if w[0].unwrap().is_horizontal() == w[1].unwrap().is_horizontal() {
                return Some("interior point is not a bend".into());
            }
        }
        let segs = self.segments();
        for i in 0..segs.len() {
            for j in i + 2..segs.len() {
                if segments_intersect(&segs[i], &segs[j]) != IntersectionKind::Disjoint {
                    return Some("self-intersecting".into());
                }
            }
        }
        None
    }
}

/// JSON object keys must be strings, so edge maps go out as `[[u, v], value]` pairs.
mod edge_map {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::EdgeKey;

    pub fn serialize<S: Serializer, V: Serialize>(m: &BTreeMap<EdgeKey, V>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(m)
    }

    pub fn deserialize<'de, D: Deserializer<'de>, V: Deserialize<'de>>(d: D) -> Result<BTreeMap<EdgeKey, V>, D::Error> {
        Ok(Vec::<(EdgeKey, V)>::deserialize(d)?.into_iter().collect())
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct Drawing {
    pub vertices: BTreeMap<VertexId, Point>,
    /// Polyline of `(u, v)` runs from `u` to `v`.
    #[serde(with = "edge_map")]
    pub edges: BTreeMap<EdgeKey, OrthoPolyline>,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Violation {
    MalformedEdge { edge: EdgeKey, reason: String },
    UnknownVertex { edge: EdgeKey },
    EndpointMismatch { edge: EdgeKey },
    VertexCollision { u: VertexId, v: VertexId },
    DegreeExceeded { vertex: VertexId, degree: usize },
    PassesThroughVertex { edge: EdgeKey, vertex: VertexId },
    EdgesIntersect { e1: EdgeKey, e2: EdgeKey, at: Point },
}

#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Axis-parallel line: `H(c)` is `y = c`, `V(c)` is `x = c`.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum AxisLine {
    H(Rat),
    V(Rat),
}

impl AxisLine {
    fn coord(&self, p: &Point) -> Rat {
        match self {
            AxisLine::H(_) => p.y,
            AxisLine::V(_) => p.x,
        }
    }

    fn at(&self) -> Rat {
        match self {
            AxisLine::H(c) | AxisLine::V(c) => *c,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum StripMode {
    Remove,
    Add,
}

impl Drawing {
    pub fn new() -> Drawing {
        Drawing::default()
    }

    pub fn add_vertex(&mut self, id: &str, p: Point) {
        self.vertices.insert(id.to_string(), p);
    }

    /// Inserts an edge given by its point chain from `u` to `v`.
    pub fn add_edge(&mut self, u: &str, v: &str, points: Vec<Point>) {
        let key = edge_key(u, v);
        let line = if key.0 == u { OrthoPolyline::new(points) } else { OrthoPolyline::new(points).reversed() };
        self.edges.insert(key, line);
    }

    /// Polyline of `{u, v}` oriented from `u`.
    pub fn polyline_from(&self, u: &str, v: &str) -> Option<OrthoPolyline> {
        let key = edge_key(u, v);
        let line = self.edges.get(&key)?;
        Some(if key.0 == u { line.clone() } else { line.reversed() })
    }

    pub fn incident(&self, v: &str) -> Vec<&EdgeKey> {
        self.edges.keys().filter(|(a, b)| a == v || b == v).collect()
    }

    pub fn degree(&self, v: &str) -> usize {
        self.incident(v).len()
    }

    /// Directions in which drawn edges leave `v`, with the other endpoint.
    pub fn ports_used(&self, v: &str) -> Vec<(Dir, VertexId)> {
        let mut out = Vec::new();
        for (a, b) in self.incident(v) {
            let other = if a == v { b } else { a };
            if let Some(pl) = self.polyline_from(v, other) {
                if pl.points.len() >= 2 {
                    if let Some(d) = pl.points[0].dir_to(&pl.points[1]) {
                        out.push((d, other.clone()));
                    }
                }
            }
        }
        out.sort();
        out
    }

    /// Vertex positions and bend points.
    pub fn feature_points(&self) -> BTreeSet<Point> {
        let mut out: BTreeSet<Point> = self.vertices.values().copied().collect();
        for pl in self.edges.values() {
            out.extend(pl.points.iter().copied());
        }
        out
    }

    pub fn segments(&self) -> Vec<(EdgeKey, AxisSegment)> {
        let mut out = Vec::new();
        for (k, pl) in &self.edges {
            for s in pl.segments() {
                out.push((k.clone(), s));
            }
        }
        out
    }

    pub fn bbox(&self) -> Option<Bbox> {
        Bbox::of(self.feature_points().iter())
    }

    pub fn map_points(&self, f: impl Fn(&Point) -> Point) -> Drawing {
        Drawing {
            vertices: self.vertices.iter().map(|(k, p)| (k.clone(), f(p))).collect(),
            edges: self
                .edges
                .iter()
                .map(|(k, pl)| (k.clone(), OrthoPolyline { points: pl.points.iter().map(&f).collect() }))
                .collect(),
        }
    }

    /// Union with `other`; entries of `other` win on key clashes.
    pub fn merged(&self, other: &Drawing) -> Drawing {
        let mut d = self.clone();
        d.vertices.extend(other.vertices.iter().map(|(k, v)| (k.clone(), *v)));
        d.edges.extend(other.edges.iter().map(|(k, v)| (k.clone(), v.clone())));
        d
    }
}

pub fn validate(d: &Drawing) -> ValidationReport {
    let mut out = Vec::new();
    let mut good: Vec<(&EdgeKey, Vec<AxisSegment>)> = Vec::new();
    for (k, pl) in &d.edges {
        let (Some(pu), Some(pv)) = (d.vertices.get(&k.0), d.vertices.get(&k.1)) else {
            out.push(Violation::UnknownVertex { edge: k.clone() });
            continue;
        };
        if let Some(reason) = pl.defects() {
            out.push(Violation::MalformedEdge { edge: k.clone(), reason });
            continue;
        }
        if pl.points[0] != *pu || *pl.points.last().unwrap() != *pv {
            out.push(Violation::EndpointMismatch { edge: k.clone() });
            continue;
        }
        good.push((k, pl.segments()));
    }
    let ids: Vec<(&VertexId, &Point)> = d.vertices.iter().collect();
    for i in 0..ids.len() {
        for j in i + 1..ids.len() {
            if ids[i].1 == ids[j].1 {
                out.push(Violation::VertexCollision { u: ids[i].0.clone(), v: ids[j].0.clone() });
            }
        }
    }
    for v in d.vertices.keys() {
        let deg = d.degree(v);
        if deg > 4 {
            out.push(Violation::DegreeExceeded { vertex: v.clone(), degree: deg });
        }
    }
    for (k, segs) in &good {
        for (v, p) in &d.vertices {
            if *v == k.0 || *v == k.1 {
                continue;
            }
            if segs.iter().any(|s| s.contains(p)) {
                out.push(Violation::PassesThroughVertex { edge: (*k).clone(), vertex: v.clone() });
            }
        }
    }
    for i in 0..good.len() {
        for j in i + 1..good.len() {
            let (k1, s1) = &good[i];
            let (k2, s2) = &good[j];
            let shared: Vec<Point> = [&k1.0, &k1.1]
                .into_iter()
                .filter(|v| **v == k2.0 || **v == k2.1)
                .filter_map(|v| d.vertices.get(v).copied())
                .collect();
            'pairs: for a in s1 {
                for b in s2 {
                    let bad = match segments_intersect(a, b) {
                        IntersectionKind::Disjoint => None,
                        IntersectionKind::Point(p) if shared.contains(&p) => None,
                        IntersectionKind::Point(p) => Some(p),
                        IntersectionKind::Overlap(s) => Some(s.a),
                    };
                    if let Some(at) = bad {
                        out.push(Violation::EdgesIntersect { e1: (*k1).clone(), e2: (*k2).clone(), at });
                        break 'pairs;
                    }
                }
            }
        }
    }
    ValidationReport { violations: out }
}

/// Total bends over the edges accepted by `filter`.
pub fn count_bends(d: &Drawing, filter: impl Fn(&EdgeKey) -> bool) -> usize {
    d.edges.iter().filter(|(k, _)| filter(k)).map(|(_, pl)| pl.bends()).sum()
}

/// Distance from `line` to the nearest feature point strictly above (or right of) it.
pub fn feature_clearance(d: &Drawing, line: AxisLine) -> Option<Rat> {
    d.feature_points()
        .iter()
        .map(|p| line.coord(p) - line.at())
        .filter(|gap| *gap > Rat::zero())
        .min()
}

/// Shifts every feature point above (right of) `line` by `sigma` towards
/// (`Remove`) or away from (`Add`) the line.
pub fn strip_op(d: &Drawing, line: AxisLine, sigma: Rat, mode: StripMode) -> Result<Drawing, DrawingError> {
    if sigma <= Rat::zero() {
        return Err(DrawingError::SigmaNotPositive);
    }
    if let Some(p) = d.feature_points().iter().find(|p| line.coord(p) == line.at()) {
        return Err(DrawingError::LineHitsFeature(*p));
    }
    if mode == StripMode::Remove {
        if let Some(limit) = feature_clearance(d, line) {
            if sigma >= limit {
                return Err(DrawingError::SigmaTooLarge { limit: limit.to_string() });
            }
        }
    }
    let shift = if mode == StripMode::Remove { -sigma } else { sigma };
    let c = line.at();
    Ok(match line {
        AxisLine::H(_) => d.map_points(|p| if p.y > c { Point { x: p.x, y: p.y + shift } } else { *p }),
        AxisLine::V(_) => d.map_points(|p| if p.x > c { Point { x: p.x + shift, y: p.y } } else { *p }),
    })
}

fn crossed_sides(d: &Drawing, rect: &Bbox) -> Result<BTreeSet<Dir>, DrawingError> {
    let (lo, hi) = (rect.lo, rect.hi);
    if lo.x >= hi.x || lo.y >= hi.y {
        return Err(DrawingError::InvalidSelection("empty rectangle".into()));
    }
    let sides = [
        (Dir::S, AxisSegment { a: lo, b: Point { x: hi.x, y: lo.y } }),
        (Dir::E, AxisSegment { a: Point { x: hi.x, y: lo.y }, b: hi }),
        (Dir::N, AxisSegment { a: Point { x: lo.x, y: hi.y }, b: hi }),
        (Dir::W, AxisSegment { a: lo, b: Point { x: lo.x, y: hi.y } }),
    ];
    for p in d.feature_points() {
        if sides.iter().any(|(_, s)| s.contains(&p)) {
            return Err(DrawingError::InvalidSelection(format!("feature point {p:?} on the boundary")));
        }
    }
    let mut crossed = BTreeSet::new();
    for (_, seg) in d.segments() {
        for (dir, side) in &sides {
            match segments_intersect(&seg, side) {
                IntersectionKind::Disjoint => {}
                IntersectionKind::Point(_) => {
                    crossed.insert(*dir);
                }
                IntersectionKind::Overlap(_) => {
                    return Err(DrawingError::InvalidSelection("segment runs along the boundary".into()))
                }
            }
        }
    }
    if crossed.len() > 1 {
        return Err(DrawingError::InvalidSelection(format!("edges cross {} sides", crossed.len())));
    }
    Ok(crossed)
}

/// Extent of the part of `d` selected by `rect` along the compressed axis.
pub fn selection_extent(d: &Drawing, rect: &Bbox, horizontal_axis: bool) -> Rat {
    let coord = |p: &Point| if horizontal_axis { p.x } else { p.y };
    let pts: Vec<Rat> = d.feature_points().iter().filter(|p| rect.contains(p)).map(coord).collect();
    match (pts.iter().min(), pts.iter().max()) {
        (Some(a), Some(b)) => *b - *a,
        _ => Rat::zero(),
    }
}

/// Squeezes the part of `d` inside `rect` to extent at most `eps` along the
/// axis orthogonal to the crossed side. The result is shape-equivalent to `d`.
pub fn compress_selection(d: &Drawing, rect: &Bbox, eps: Rat) -> Result<Drawing, DrawingError> {
    if eps <= Rat::zero() {
        return Err(DrawingError::SigmaNotPositive);
    }
    let crossed = crossed_sides(d, rect)?;
    // A vertical crossed side (or none) compresses along x.
    let along_x = crossed.iter().next().map(|s| matches!(s, Dir::W | Dir::E)).unwrap_or(true);
    let coord = |p: &Point| if along_x { p.x } else { p.y };
    let mut inside: BTreeSet<Rat> = d.feature_points().iter().filter(|p| rect.contains(p)).map(coord).collect();
    if let Some(side) = crossed.iter().next() {
        inside.insert(match side {
            Dir::W => rect.lo.x,
            Dir::E => rect.hi.x,
            Dir::S => rect.lo.y,
            Dir::N => rect.hi.y,
        });
    }
    let (Some(&first), Some(&last)) = (inside.iter().next(), inside.iter().last()) else {
        return Ok(d.clone());
    };
    let mut breaks: BTreeSet<Rat> = d.feature_points().iter().map(coord).collect();
    breaks.extend(inside.iter().copied());
    let cols: Vec<Rat> = breaks.into_iter().filter(|c| *c >= first && *c <= last).collect();
    if cols.len() < 2 {
        return Ok(d.clone());
    }
    let tau = eps / Rat::int(cols.len() as i128);
    let mut out = d.clone();
    // Right to left so that the columns still to be processed keep their coordinates.
    for w in cols.windows(2).rev() {
        let gap = w[1] - w[0];
        if gap <= tau {
            continue;
        }
        let sigma = gap - tau;
        let at = w[0] + (gap - sigma).half();
        let line = if along_x { AxisLine::V(at) } else { AxisLine::H(at) };
        out = strip_op(&out, line, sigma, StripMode::Remove)?;
    }
    Ok(out)
}

/// Orthogonal shape: direction sequence per edge and port usage per vertex.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct ShapeDescriptor {
    #[serde(with = "edge_map")]
    pub edges: BTreeMap<EdgeKey, Vec<Dir>>,
    pub ports: BTreeMap<VertexId, Vec<(Dir, VertexId)>>,
}

pub fn shape_descriptor(d: &Drawing) -> ShapeDescriptor {
    ShapeDescriptor {
        edges: d.edges.iter().map(|(k, pl)| (k.clone(), pl.directions())).collect(),
        ports: d.vertices.keys().map(|v| (v.clone(), d.ports_used(v))).collect(),
    }
}
