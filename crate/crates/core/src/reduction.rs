//! From the whole-graph problem to clean, hole-free single-face instances:
//! face and port branching, pruning of redundant regions, framing of the
//! outer face and cutting it open along a segment.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::drawing::{edge_key, validate, Drawing, EdgeKey, OrthoPolyline, VertexId};
use crate::error::{InstanceError, SolveError};
use crate::geom::{AxisSegment, Bbox, Dir, Point, Rat};
use crate::instance::{BmoeInstance, FaceInstance, PortCandidate};
use crate::region::{Arrangement, Cell, CellKind, FaceRegion};

/// One outcome of the face/port/subdivision branching.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReductionBranch {
    pub faces: Vec<FaceInstance>,
    /// One forced bend per subdivided edge between two drawn vertices.
    pub offset: u32,
    /// The drawing of `H` plus the missing edges drawn straight in this branch.
    pub base: Drawing,
    /// Subdivision vertex and the edge it splits.
    pub subdivisions: BTreeMap<VertexId, EdgeKey>,
}

pub fn fresh_id(taken: &dyn Fn(&str) -> bool, prefix: &str) -> VertexId {
    (0..).map(|i| format!("~{prefix}{i}")).find(|c| !taken(c)).unwrap()
}

fn arrangement_of(d: &Drawing) -> (Arrangement, Vec<EdgeKey>) {
    let segs = d.segments();
    let keys = segs.iter().map(|(k, _)| k.clone()).collect();
    let raw: Vec<AxisSegment> = segs.into_iter().map(|(_, s)| s).collect();
    let pts: Vec<Point> = d.vertices.values().copied().collect();
    (Arrangement::new(&raw, &pts, &[], &[]), keys)
}

/// The part of `d` that bounds component `comp` of its arrangement, and a seed inside it.
fn face_part(d: &Drawing, arr: &Arrangement, keys: &[EdgeKey], comp: usize) -> (Drawing, Point, bool) {
    let mut edges: BTreeSet<EdgeKey> = BTreeSet::new();
    let mut vertices: BTreeSet<VertexId> = BTreeSet::new();
    let mut seed: Option<Point> = None;
    let mut outer = false;
    for c in arr.cells() {
        if arr.component(c) != Some(comp) {
            continue;
        }
        if arr.is_unbounded(c) {
            outer = true;
        }
        if seed.is_none() && arr.kind(c) == CellKind::Face {
            seed = Some(arr.rep(c));
        }
        for n in arr.ring(c) {
            if let Some(s) = arr.segment_at(n) {
                edges.insert(keys[s].clone());
            }
        }
    }
    for (v, p) in &d.vertices {
        let node = arr.locate(p);
        if arr.ring(node).into_iter().any(|n| arr.component(n) == Some(comp)) {
            vertices.insert(v.clone());
        }
    }
    let mut out = Drawing::new();
    for e in &edges {
        vertices.insert(e.0.clone());
        vertices.insert(e.1.clone());
        out.edges.insert(e.clone(), d.edges[e].clone());
    }
    for v in vertices {
        out.vertices.insert(v.clone(), d.vertices[&v]);
    }
    let seed = seed.unwrap_or_else(|| arr.rep((0, 0)));
    (out, seed, outer)
}

/// Restricts a face instance's drawing to what bounds its marked face.
pub fn restrict_to_face(fi: &FaceInstance) -> FaceInstance {
    let (arr, keys) = arrangement_of(&fi.drawing);
    let comp = arr.component(arr.locate(&fi.seed)).expect("seed inside a face");
    let (mut part, _, _) = face_part(&fi.drawing, &arr, &keys, comp);
    for p in &fi.ports {
        part.vertices.entry(p.anchor.clone()).or_insert(fi.drawing.vertices[&p.anchor]);
    }
    let mut out = fi.clone();
    out.drawing = part;
    out.dummies.retain(|v| out.drawing.vertices.contains_key(v));
    if let Some(fr) = &fi.frame {
        if !fr.iter().all(|v| out.drawing.vertices.contains_key(v)) {
            out.frame = None;
        }
    }
    out
}

fn cartesian(options: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for opts in options {
        let mut next = Vec::new();
        for prefix in &out {
            for o in opts {
                let mut p = prefix.clone();
                p.push(*o);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Enumerates every face assignment, straight-or-subdivide choice and port function.
pub fn reduce_to_faces(inst: &BmoeInstance) -> Result<Vec<ReductionBranch>, InstanceError> {
    inst.check()?;
    let drawn = &inst.drawing.vertices;
    let missing_v = inst.missing_vertices();
    let missing_e = inst.missing_edges();
    let hh: Vec<EdgeKey> =
        missing_e.iter().filter(|(u, v)| drawn.contains_key(u) && drawn.contains_key(v)).cloned().collect();
    let taken = |c: &str| inst.vertices.contains(c);
    let sub_ids: Vec<VertexId> = (0..hh.len())
        .map(|i| {
            let base = format!("s{}_{}_{}", i, hh[i].0, hh[i].1);
            fresh_id(&taken, &base)
        })
        .collect();
    let mut branches = Vec::new();
    for mask in 0u32..(1u32 << hh.len()) {
        let mut base = inst.drawing.clone();
        let mut vertices = missing_v.clone();
        let mut edges: Vec<EdgeKey> = missing_e.iter().filter(|e| !hh.contains(e)).cloned().collect();
        let mut subdivisions = BTreeMap::new();
        let mut ok = true;
        for (i, e) in hh.iter().enumerate() {
            if mask & (1 << i) != 0 {
                let (pa, pb) = (drawn[&e.0], drawn[&e.1]);
                if pa.dir_to(&pb).is_none() {
                    ok = false;
                    break;
                }
                base.add_edge(&e.0, &e.1, vec![pa, pb]);
            } else {
                let u = sub_ids[i].clone();
                vertices.push(u.clone());
                edges.push(edge_key(&e.0, &u));
                edges.push(edge_key(&u, &e.1));
                subdivisions.insert(u, e.clone());
            }
        }
        if !ok || !validate(&base).is_valid() {
            continue;
        }
        branches.extend(branch_faces(inst, &base, &vertices, &edges, &subdivisions));
    }
    if branches.is_empty() {
        return Err(InstanceError::NoValidBranch);
    }
    Ok(branches)
}

fn branch_faces(
    inst: &BmoeInstance,
    base: &Drawing,
    vertices: &[VertexId],
    edges: &[EdgeKey],
    subdivisions: &BTreeMap<VertexId, EdgeKey>,
) -> Vec<ReductionBranch> {
    let (arr, keys) = arrangement_of(base);
    let is_missing = |v: &str| vertices.iter().any(|x| x == v);
    // components of the missing graph
    let mut comp_of: BTreeMap<VertexId, usize> = BTreeMap::new();
    let mut comps: Vec<Vec<VertexId>> = Vec::new();
    for x in vertices {
        if comp_of.contains_key(x) {
            continue;
        }
        let id = comps.len();
        let mut members = vec![x.clone()];
        comp_of.insert(x.clone(), id);
        let mut queue = VecDeque::from([x.clone()]);
        while let Some(v) = queue.pop_front() {
            for (a, b) in edges {
                let other = if *a == v { b } else if *b == v { a } else { continue };
                if is_missing(other) && !comp_of.contains_key(other) {
                    comp_of.insert(other.clone(), id);
                    members.push(other.clone());
                    queue.push_back(other.clone());
                }
            }
        }
        comps.push(members);
    }
    // (anchor, edge) pairs per component
    let mut attach: Vec<Vec<(VertexId, EdgeKey)>> = vec![Vec::new(); comps.len()];
    let mut comp_edges: Vec<Vec<EdgeKey>> = vec![Vec::new(); comps.len()];
    for e in edges {
        let (a, b) = e;
        let (c, anchor) = match (comp_of.get(a), comp_of.get(b)) {
            (Some(&c), Some(_)) => (c, None),
            (Some(&c), None) => (c, Some(b.clone())),
            (None, Some(&c)) => (c, Some(a.clone())),
            (None, None) => continue,
        };
        comp_edges[c].push(e.clone());
        if let Some(a) = anchor {
            attach[c].push((a, e.clone()));
        }
    }
    let fixed: BTreeMap<(VertexId, EdgeKey), Dir> = inst
        .fixed_ports
        .iter()
        .map(|p| {
            let mut key = p.edge.clone();
            for (u, orig) in subdivisions {
                if *orig == p.edge {
                    key = edge_key(&p.anchor, u);
                }
            }
            ((p.anchor.clone(), key), p.side)
        })
        .collect();
    let side_options = |a: &VertexId, e: &EdgeKey, face: usize| -> Vec<Dir> {
        let node = arr.locate(&base.vertices[a]);
        Dir::ALL
            .into_iter()
            .filter(|d| match arr.step(node, *d) {
                Some(c) => arr.component(c) == Some(face),
                None => false,
            })
            .filter(|d| fixed.get(&(a.clone(), e.clone())).map_or(true, |f| f == d))
            .collect()
    };
    let face_options: Vec<Vec<usize>> = (0..comps.len())
        .map(|c| {
            (0..arr.n_components)
                .filter(|&f| attach[c].iter().all(|(a, e)| !side_options(a, e, f).is_empty()))
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    for faces in cartesian(&face_options) {
        let pairs: Vec<(VertexId, EdgeKey, usize)> = (0..comps.len())
            .flat_map(|c| attach[c].iter().map(move |(a, e)| (a.clone(), e.clone(), c)))
            .collect();
        let opts: Vec<Vec<Dir>> = pairs.iter().map(|(a, e, c)| side_options(a, e, faces[*c])).collect();
        let idx_opts: Vec<Vec<usize>> = opts.iter().map(|o| (0..o.len()).collect()).collect();
        for choice in cartesian(&idx_opts) {
            let ports: Vec<(PortCandidate, usize)> = pairs
                .iter()
                .zip(&choice)
                .enumerate()
                .map(|(i, ((a, e, c), &o))| {
                    (PortCandidate { anchor: a.clone(), side: opts[i][o], edge: e.clone() }, faces[*c])
                })
                .collect();
            let mut sides = BTreeSet::new();
            if !ports.iter().all(|(p, _)| sides.insert((p.anchor.clone(), p.side))) {
                continue;
            }
            let mut by_face: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for (c, f) in faces.iter().enumerate() {
                by_face.entry(*f).or_default().push(c);
            }
            let mut face_instances = Vec::new();
            for (f, cs) in by_face {
                let (drawing, seed, outer) = face_part(base, &arr, &keys, f);
                let mut mv: Vec<VertexId> = cs.iter().flat_map(|c| comps[*c].iter().cloned()).collect();
                mv.sort();
                let mut me: Vec<EdgeKey> = cs.iter().flat_map(|c| comp_edges[*c].iter().cloned()).collect();
                me.sort();
                let mut fp: Vec<PortCandidate> =
                    ports.iter().filter(|(_, pf)| *pf == f).map(|(p, _)| p.clone()).collect();
                fp.retain(|p| me.contains(&p.edge));
                // lexicographic by anchor, then by the other endpoint
                fp.sort_by(|x, y| (&x.anchor, &x.edge).cmp(&(&y.anchor, &y.edge)));
                let must_bend = mv.iter().filter(|v| subdivisions.contains_key(*v)).cloned().collect();
                face_instances.push(FaceInstance {
                    drawing,
                    seed,
                    outer,
                    missing_vertices: mv,
                    missing_edges: me,
                    ports: fp,
                    must_bend,
                    dummies: BTreeSet::new(),
                    frame: None,
                });
            }
            out.push(ReductionBranch {
                faces: face_instances,
                offset: subdivisions.len() as u32,
                base: base.clone(),
                subdivisions: subdivisions.clone(),
            });
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReflexCorner {
    pub point: Point,
    /// The corner is an anchor of some port.
    pub essential: bool,
    /// Direction and end point of each projection.
    pub projections: Vec<(Dir, Point)>,
}

/// Ring around a node, counter-clockwise from the east axis cell.
const RING: [(i64, i64); 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];

fn offset(region: &FaceRegion, c: Cell, d: (i64, i64)) -> Option<Cell> {
    let (i, j) = (c.0 as i64 + d.0, c.1 as i64 + d.1);
    if i < 0 || j < 0 || i >= region.arr.ni as i64 || j >= region.arr.nj as i64 {
        None
    } else {
        Some((i as usize, j as usize))
    }
}

fn axis_dir(k: usize) -> Dir {
    [Dir::E, Dir::N, Dir::W, Dir::S][k / 2]
}

/// Wedges of the face around a boundary node: each is the list of ring
/// positions between two blocked axis cells.
fn wedges(region: &FaceRegion, node: Cell) -> Vec<Vec<usize>> {
    let inside: Vec<bool> = RING.iter().map(|d| offset(region, node, *d).is_some_and(|c| region.inside(c))).collect();
    let blocked: Vec<bool> =
        RING.iter().map(|d| offset(region, node, *d).map_or(true, |c| region.arr.is_blocked(c))).collect();
    let Some(start) = (0..8).step_by(2).find(|&k| blocked[k]) else {
        return if inside.iter().all(|b| *b) { vec![(0..8).collect()] } else { vec![] };
    };
    let mut out = Vec::new();
    let mut cur: Vec<usize> = Vec::new();
    for s in 1..=8 {
        let k = (start + s) % 8;
        if k % 2 == 0 && blocked[k] {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            continue;
        }
        if inside[k] {
            cur.push(k);
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn first_hit(region: &FaceRegion, node: Cell, d: Dir) -> Point {
    let mut c = node;
    loop {
        match region.arr.step(c, d) {
            Some(n) if region.inside(n) => c = n,
            Some(n) => return region.arr.rep(n),
            None => return region.arr.rep(c),
        }
    }
}

pub fn reflex_corners(fi: &FaceInstance) -> Vec<ReflexCorner> {
    let Some(region) = fi.region() else { return vec![] };
    let anchors: BTreeSet<Point> = fi.ports.iter().map(|p| fi.drawing.vertices[&p.anchor]).collect();
    let mut out = Vec::new();
    for p in fi.drawing.feature_points() {
        let node = region.arr.locate(&p);
        let mut projections = Vec::new();
        let mut reflex = false;
        for w in wedges(&region, node) {
            let quadrants = w.iter().filter(|k| *k % 2 == 1).count();
            if quadrants < 3 {
                continue;
            }
            reflex = true;
            for &k in w.iter().filter(|k| *k % 2 == 0) {
                let back = (k + 4) % 8;
                if offset(&region, node, RING[back]).map_or(true, |c| region.arr.is_blocked(c)) {
                    let d = axis_dir(k);
                    projections.push((d, first_hit(&region, node, d)));
                }
            }
        }
        if reflex {
            out.push(ReflexCorner { point: p, essential: anchors.contains(&p), projections });
        }
    }
    out
}

/// A rectangle of the face cut off by a projection.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedundantRegion {
    pub corner: Point,
    pub line: AxisSegment,
    pub rect: Bbox,
}

fn cells_between(region: &FaceRegion, a: Cell, b: Cell, d: Dir) -> Vec<Cell> {
    let mut out = Vec::new();
    let mut c = a;
    while let Some(n) = region.arr.step(c, d) {
        if n == b {
            break;
        }
        out.push(n);
        c = n;
    }
    out
}

pub fn find_redundant_region(fi: &FaceInstance) -> Option<RedundantRegion> {
    let region = fi.region()?;
    let port_cells: Vec<(Cell, Dir, Option<Cell>)> = fi
        .ports
        .iter()
        .map(|p| {
            let node = region.arr.locate(&fi.drawing.vertices[&p.anchor]);
            (node, p.side, region.arr.step(node, p.side))
        })
        .collect();
    for corner in reflex_corners(fi) {
        if corner.essential {
            continue;
        }
        for (d, hit) in &corner.projections {
            let (a, b) = (region.arr.locate(&corner.point), region.arr.locate(hit));
            let line_cells: BTreeSet<Cell> = cells_between(&region, a, b, *d).into_iter().collect();
            if port_cells.iter().any(|(n, s, _)| (*n == a && s == d) || (*n == b && *s == d.opposite())) {
                continue;
            }
            // split the face along the projection
            let mut label: BTreeMap<Cell, usize> = BTreeMap::new();
            let mut parts: Vec<Vec<Cell>> = Vec::new();
            for c in region.arr.cells() {
                if !region.inside(c) || line_cells.contains(&c) || label.contains_key(&c) {
                    continue;
                }
                let id = parts.len();
                let mut part = vec![c];
                label.insert(c, id);
                let mut queue = VecDeque::from([c]);
                while let Some(x) = queue.pop_front() {
                    for dd in Dir::ALL {
                        if let Some(n) = region.arr.step(x, dd) {
                            if region.inside(n) && !line_cells.contains(&n) && !label.contains_key(&n) {
                                label.insert(n, id);
                                part.push(n);
                                queue.push_back(n);
                            }
                        }
                    }
                }
                parts.push(part);
            }
            if parts.len() < 2 {
                continue;
            }
            for part in &parts {
                let (i0, i1) = (part.iter().map(|c| c.0).min()?, part.iter().map(|c| c.0).max()?);
                let (j0, j1) = (part.iter().map(|c| c.1).min()?, part.iter().map(|c| c.1).max()?);
                if i0 % 2 == 1 || j0 % 2 == 1 || i1 % 2 == 1 || j1 % 2 == 1 {
                    continue;
                }
                if part.len() != (i1 - i0 + 1) * (j1 - j0 + 1) {
                    continue;
                }
                if region.arr.is_unbounded((i0, j0)) || region.arr.is_unbounded((i1, j1)) {
                    continue;
                }
                let set: BTreeSet<&Cell> = part.iter().collect();
                if port_cells.iter().any(|(_, _, first)| first.is_some_and(|f| set.contains(&f))) {
                    continue;
                }
                let (xlo, _) = region.arr.x_span(i0)?;
                let (_, xhi) = region.arr.x_span(i1)?;
                let (ylo, _) = region.arr.y_span(j0)?;
                let (_, yhi) = region.arr.y_span(j1)?;
                let line = AxisSegment { a: corner.point, b: *hit };
                return Some(RedundantRegion {
                    corner: corner.point,
                    line,
                    rect: Bbox { lo: Point { x: xlo, y: ylo }, hi: Point { x: xhi, y: yhi } },
                });
            }
        }
    }
    None
}

/// Makes `p` a vertex of `d`, splitting the edge through it when needed.
fn vertex_at(d: &mut Drawing, p: Point, taken: &dyn Fn(&str) -> bool, dummies: &mut BTreeSet<VertexId>) -> VertexId {
    if let Some((v, _)) = d.vertices.iter().find(|(_, q)| **q == p) {
        return v.clone();
    }
    let id = fresh_id(&|c: &str| taken(c) || d.vertices.contains_key(c), "d");
    let (key, pl) = d
        .edges
        .iter()
        .find(|(_, pl)| pl.segments().iter().any(|s| s.contains(&p)))
        .map(|(k, pl)| (k.clone(), pl.clone()))
        .expect("point lies on the drawing");
    let segs = pl.segments();
    let at = segs.iter().position(|s| s.contains(&p)).unwrap();
    let mut first: Vec<Point> = pl.points[..=at].to_vec();
    first.push(p);
    let mut second = vec![p];
    second.extend_from_slice(&pl.points[at + 1..]);
    d.edges.remove(&key);
    d.vertices.insert(id.clone(), p);
    d.add_edge(&key.0, &id, OrthoPolyline::simplified(&first).points);
    d.add_edge(&id, &key.1, OrthoPolyline::simplified(&second).points);
    dummies.insert(id.clone());
    id
}

/// Cuts the redundant rectangle off the face by drawing its projection as an edge.
pub fn prune(fi: &FaceInstance, rr: &RedundantRegion) -> FaceInstance {
    let mut out = fi.clone();
    let taken = |c: &str| fi.missing_vertices.iter().any(|x| x == c);
    let mut dummies = out.dummies.clone();
    let u = vertex_at(&mut out.drawing, rr.line.a, &taken, &mut dummies);
    let v = vertex_at(&mut out.drawing, rr.line.b, &taken, &mut dummies);
    out.drawing.add_edge(&u, &v, vec![rr.line.a, rr.line.b]);
    out.dummies = dummies;
    // keep the seed out of the removed rectangle
    let region = out.region();
    let seed_ok = region.as_ref().is_some_and(|r| r.contains(&out.seed)) && !strictly_inside(&rr.rect, &out.seed);
    if !seed_ok {
        let r = out.region().expect("pruned face");
        let new_seed = out
            .ports
            .iter()
            .find_map(|p| {
                let node = r.arr.locate(&out.drawing.vertices[&p.anchor]);
                r.arr.step(node, p.side).map(|c| r.arr.rep(c))
            })
            .unwrap_or(out.seed);
        out.seed = first_face_cell(&r, &new_seed);
    }
    restrict_to_face(&out)
}

fn strictly_inside(b: &Bbox, p: &Point) -> bool {
    b.lo.x < p.x && p.x < b.hi.x && b.lo.y < p.y && p.y < b.hi.y
}

/// A 2-cell of the component containing `p`.
fn first_face_cell(r: &FaceRegion, p: &Point) -> Point {
    let comp = r.arr.component(r.arr.locate(p));
    r.arr
        .cells()
        .find(|c| r.arr.kind(*c) == CellKind::Face && r.arr.component(*c) == comp && comp.is_some())
        .map(|c| r.arr.rep(c))
        .unwrap_or(*p)
}

pub fn make_clean(fi: &FaceInstance) -> FaceInstance {
    let mut cur = fi.clone();
    let limit = 3 * reflex_corners(fi).len() + 1;
    for _ in 0..limit {
        match find_redundant_region(&cur) {
            Some(rr) => cur = prune(&cur, &rr),
            None => break,
        }
    }
    cur
}

/// Encloses an outer-face instance in a rectangle; the marked face becomes
/// the region between the rectangle and the old drawing.
pub fn frame_outer(fi: &FaceInstance) -> FaceInstance {
    let bb = fi.drawing.bbox().expect("non-empty drawing");
    let c = bb.width().max(bb.height()).max(Rat::one());
    let (x0, y0, x1, y1) = (bb.lo.x - c, bb.lo.y - c, bb.hi.x + c, bb.hi.y + c);
    let corners = [Point { x: x0, y: y0 }, Point { x: x1, y: y0 }, Point { x: x1, y: y1 }, Point { x: x0, y: y1 }];
    let mut out = fi.clone();
    let taken = |s: &str| fi.drawing.vertices.contains_key(s) || fi.missing_vertices.iter().any(|x| x == s);
    let mut ids: Vec<VertexId> = Vec::new();
    for p in corners {
        let id = fresh_id(&|s: &str| taken(s) || ids.iter().any(|x| x == s), "R");
        out.drawing.vertices.insert(id.clone(), p);
        out.dummies.insert(id.clone());
        ids.push(id);
    }
    for i in 0..4 {
        let (u, v) = (&ids[i], &ids[(i + 1) % 4]);
        out.drawing.add_edge(u, v, vec![corners[i], corners[(i + 1) % 4]]);
    }
    out.seed = Point { x: x0 + c.half(), y: y0 + c.half() };
    out.outer = false;
    out.frame = Some([ids[0].clone(), ids[1].clone(), ids[2].clone(), ids[3].clone()]);
    out
}

/// Vertical cut from the top of the hole to the frame.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutLine {
    pub zeta: AxisSegment,
    pub slots: usize,
}

pub fn cut_slots(k: usize) -> usize {
    4 * k * (k + 1)
}

pub fn cut_line(fi: &FaceInstance) -> Result<CutLine, SolveError> {
    let frame = fi.frame.as_ref().ok_or_else(|| SolveError::Internal("cut needs a framed instance".into()))?;
    let on_frame = |v: &str| frame.iter().any(|f| f == v);
    let hole: Vec<(EdgeKey, AxisSegment)> =
        fi.drawing.segments().into_iter().filter(|(k, _)| !on_frame(&k.0) && !on_frame(&k.1)).collect();
    let mut hole_pts: Vec<Point> = hole.iter().flat_map(|(_, s)| [s.a, s.b]).collect();
    hole_pts.extend(fi.drawing.vertices.iter().filter(|(v, _)| !on_frame(v)).map(|(_, p)| *p));
    let top = hole_pts.iter().map(|p| p.y).max().ok_or_else(|| SolveError::Internal("empty hole".into()))?;
    let frame_top = fi.drawing.vertices[&frame[2]].y;
    let bottom = hole
        .iter()
        .filter(|(_, s)| s.is_horizontal() && s.a.y == top)
        .map(|(_, s)| (s.lo().x, Point { x: Rat::mid(s.a.x, s.b.x), y: top }))
        .min()
        .map(|(_, p)| p)
        .or_else(|| hole_pts.iter().filter(|p| p.y == top).min().copied())
        .ok_or_else(|| SolveError::Internal("no cut line".into()))?;
    let zeta = AxisSegment { a: bottom, b: Point { x: bottom.x, y: frame_top } };
    let region = fi.region().ok_or_else(|| SolveError::Internal("framed face".into()))?;
    if !region.segment_inside(&zeta.a, &zeta.b) {
        return Err(SolveError::Internal("cut line leaves the face".into()));
    }
    Ok(CutLine { zeta, slots: cut_slots(fi.k()) })
}

/// A hole-free instance obtained by cutting the framed face open, with the
/// bookkeeping to glue solutions back together.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CutBranch {
    pub instance: FaceInstance,
    /// Missing edge index per slot, top to bottom.
    pub array: Vec<Option<usize>>,
    /// Crossing edges: original key and the vertex path replacing it.
    pub paths: Vec<(EdgeKey, Vec<VertexId>)>,
}

impl CutBranch {
    /// Missing part of the framed instance recovered from a solution of this branch.
    pub fn glue(&self, original: &FaceInstance, solved: &Drawing) -> Drawing {
        let mut out = Drawing::new();
        for x in &original.missing_vertices {
            if let Some(p) = solved.vertices.get(x) {
                out.vertices.insert(x.clone(), *p);
            }
        }
        for e in &original.missing_edges {
            if let Some((_, path)) = self.paths.iter().find(|(k, _)| k == e) {
                let mut pts: Vec<Point> = Vec::new();
                for w in path.windows(2) {
                    let Some(pl) = solved.polyline_from(&w[0], &w[1]) else { continue };
                    pts.extend(pl.points);
                }
                let line = OrthoPolyline::simplified(&pts);
                out.add_edge(&path[0], path.last().unwrap(), line.points);
            } else if let Some(pl) = solved.edges.get(e) {
                out.edges.insert(e.clone(), pl.clone());
            }
        }
        out
    }
}

/// The framed drawing with the cut drawn as a chain of slot vertices.
#[derive(Clone, Debug)]
pub struct CutBase {
    pub drawing: Drawing,
    pub slots: Vec<VertexId>,
    pub dummies: BTreeSet<VertexId>,
    pub line: CutLine,
}

pub fn cut_base(fi: &FaceInstance) -> Result<CutBase, SolveError> {
    let line = cut_line(fi)?;
    let mut d = fi.drawing.clone();
    let mut dummies = fi.dummies.clone();
    let taken = |c: &str| fi.missing_vertices.iter().any(|x| x == c);
    let bottom = vertex_at(&mut d, line.zeta.a, &taken, &mut dummies);
    let top = vertex_at(&mut d, line.zeta.b, &taken, &mut dummies);
    let n = line.slots;
    let len = line.zeta.b.y - line.zeta.a.y;
    let mut chain = vec![top.clone()];
    let mut slots = Vec::new();
    for i in 1..=n {
        let id = fresh_id(&|c: &str| taken(c) || d.vertices.contains_key(c), "z");
        let y = line.zeta.b.y - len * Rat::int(i as i128) / Rat::int(n as i128 + 1);
        d.vertices.insert(id.clone(), Point { x: line.zeta.a.x, y });
        dummies.insert(id.clone());
        slots.push(id.clone());
        chain.push(id);
    }
    chain.push(bottom);
    for w in chain.windows(2) {
        let (p, q) = (d.vertices[&w[0]], d.vertices[&w[1]]);
        d.add_edge(&w[0], &w[1], vec![p, q]);
    }
    Ok(CutBase { drawing: d, slots, dummies, line })
}

/// Order in which an edge visits its crossing slots.
fn visit_order(slots: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(slots.len());
    let (mut lo, mut hi) = (0usize, slots.len());
    let mut take_low = true;
    while lo < hi {
        if take_low {
            out.push(slots[lo]);
            lo += 1;
        } else {
            hi -= 1;
            out.push(slots[hi]);
        }
        take_low = !take_low;
    }
    out
}

/// Builds the branch for one crossing array, per-edge orientation bits and crossing directions.
/// `reverse[e]` starts the walk at the second endpoint; `eastward[e]` crosses from west to east.
pub fn build_cut_branch(
    fi: &FaceInstance,
    base: &CutBase,
    array: &[Option<usize>],
    reverse: &[bool],
    eastward: &[bool],
) -> CutBranch {
    let mut missing_edges: Vec<EdgeKey> = Vec::new();
    let mut ports: Vec<PortCandidate> = Vec::new();
    let mut paths = Vec::new();
    for (e, key) in fi.missing_edges.iter().enumerate() {
        let slots: Vec<usize> = (0..array.len()).filter(|&i| array[i] == Some(e)).collect();
        if slots.is_empty() {
            missing_edges.push(key.clone());
            ports.extend(fi.ports.iter().filter(|p| &p.edge == key).cloned());
            continue;
        }
        let (start, end) = if reverse[e] { (&key.1, &key.0) } else { (&key.0, &key.1) };
        let mut path = vec![start.clone()];
        path.extend(visit_order(&slots).into_iter().map(|s| base.slots[s].clone()));
        path.push(end.clone());
        let (arrive, leave) = if eastward[e] { (Dir::W, Dir::E) } else { (Dir::E, Dir::W) };
        for (i, w) in path.windows(2).enumerate() {
            let piece = edge_key(&w[0], &w[1]);
            missing_edges.push(piece.clone());
            if i == 0 {
                if let Some(p) = fi.ports.iter().find(|p| &p.edge == key && &p.anchor == start) {
                    ports.push(PortCandidate { anchor: p.anchor.clone(), side: p.side, edge: piece.clone() });
                }
            } else {
                ports.push(PortCandidate { anchor: w[0].clone(), side: leave, edge: piece.clone() });
            }
            if i + 2 == path.len() {
                if let Some(p) = fi.ports.iter().find(|p| &p.edge == key && &p.anchor == end) {
                    ports.push(PortCandidate { anchor: p.anchor.clone(), side: p.side, edge: piece.clone() });
                }
            } else {
                ports.push(PortCandidate { anchor: w[1].clone(), side: arrive, edge: piece.clone() });
            }
        }
        paths.push((key.clone(), path));
    }
    missing_edges.sort();
    ports.sort_by(|x, y| (&x.anchor, &x.edge).cmp(&(&y.anchor, &y.edge)));
    let instance = FaceInstance {
        drawing: base.drawing.clone(),
        seed: fi.seed,
        outer: false,
        missing_vertices: fi.missing_vertices.clone(),
        missing_edges,
        ports,
        must_bend: fi.must_bend.clone(),
        dummies: base.dummies.clone(),
        frame: None,
    };
    CutBranch { instance, array: array.to_vec(), paths }
}

/// Every branch of the cut-open step: all crossing arrays over `4k(k+1)`
/// slots, both walk orientations for edges crossing twice or more, and both
/// crossing directions. Produced lazily.
pub fn enumerate_cut_branches(fi: &FaceInstance) -> Result<impl Iterator<Item = CutBranch> + '_, SolveError> {
    let base = cut_base(fi)?;
    let n = base.slots.len();
    let m = fi.missing_edges.len();
    let arrays = ArrayIter { digits: vec![0; n], base: m + 1, done: false };
    Ok(arrays.flat_map(move |digits| {
        let array: Vec<Option<usize>> = digits.iter().map(|&d| if d == 0 { None } else { Some(d - 1) }).collect();
        let counts: Vec<usize> = (0..m).map(|e| array.iter().filter(|a| **a == Some(e)).count()).collect();
        let crossing: Vec<usize> = (0..m).filter(|&e| counts[e] > 0).collect();
        let multi: Vec<usize> = (0..m).filter(|&e| counts[e] > 1).collect();
        let mut out = Vec::new();
        for obits in 0u64..(1u64 << multi.len()) {
            for dbits in 0u64..(1u64 << crossing.len()) {
                let mut reverse = vec![false; m];
                let mut eastward = vec![false; m];
                for (i, e) in multi.iter().enumerate() {
                    reverse[*e] = obits >> i & 1 == 1;
                }
                for (i, e) in crossing.iter().enumerate() {
                    eastward[*e] = dbits >> i & 1 == 1;
                }
                out.push(build_cut_branch(fi, &base, &array, &reverse, &eastward));
            }
        }
        out
    }))
}

struct ArrayIter {
    digits: Vec<usize>,
    base: usize,
    done: bool,
}

impl Iterator for ArrayIter {
    type Item = Vec<usize>;
    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let cur = self.digits.clone();
        let mut i = 0;
        loop {
            if i == self.digits.len() {
                self.done = true;
                break;
            }
            self.digits[i] += 1;
            if self.digits[i] < self.base {
                break;
            }
            self.digits[i] = 0;
            i += 1;
        }
        Some(cur)
    }
}

/// Crossing sequences with at most `extra` crossings beyond one per edge,
/// each placed on evenly spread slots. Arrays with the same sequence are
/// interchangeable, so one representative per sequence suffices.
pub fn canonical_arrays(m: usize, slots: usize, extra: usize) -> Vec<Vec<Option<usize>>> {
    let mut seqs: Vec<Vec<usize>> = vec![vec![]];
    let mut frontier: Vec<Vec<usize>> = vec![vec![]];
    while let Some(seq) = frontier.pop() {
        if seq.len() == slots {
            continue;
        }
        for e in 0..m {
            let mut next = seq.clone();
            next.push(e);
            let over: usize = (0..m).map(|x| next.iter().filter(|y| **y == x).count().saturating_sub(1)).sum();
            if over <= extra {
                seqs.push(next.clone());
                frontier.push(next);
            }
        }
    }
    seqs.sort();
    seqs.dedup();
    seqs.into_iter()
        .map(|seq| {
            let l = seq.len();
            let mut arr = vec![None; slots];
            for (j, e) in seq.iter().enumerate() {
                let s = if l == slots { j } else { (j + 1) * slots / (l + 1) };
                arr[s] = Some(*e);
            }
            arr
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point;

    fn p(x: i64, y: i64) -> Point {
        Point::new(x, y)
    }

    /// Cycle drawing through the given corners, one vertex per corner.
    pub(crate) fn cycle(names: &[&str], pts: &[Point]) -> Drawing {
        let mut d = Drawing::new();
        for (n, q) in names.iter().zip(pts) {
            d.add_vertex(n, *q);
        }
        for i in 0..names.len() {
            let (u, v) = (names[i], names[(i + 1) % names.len()]);
            d.add_edge(u, v, vec![pts[i], pts[(i + 1) % names.len()]]);
        }
        d
    }

    fn bmoe(d: Drawing, extra_v: &[&str], extra_e: &[(&str, &str)]) -> BmoeInstance {
        let mut vertices: BTreeSet<VertexId> = d.vertices.keys().cloned().collect();
        vertices.extend(extra_v.iter().map(|s| s.to_string()));
        let mut edges: BTreeSet<EdgeKey> = d.edges.keys().cloned().collect();
        edges.extend(extra_e.iter().map(|(u, v)| edge_key(u, v)));
        BmoeInstance { vertices, edges, drawing: d, budget: None, fixed_ports: vec![] }
    }

    #[test]
    fn no_missing_parts_gives_one_empty_branch() {
        let d = cycle(&["a", "b", "c", "d"], &[p(0, 0), p(2, 0), p(2, 2), p(0, 2)]);
        let br = reduce_to_faces(&bmoe(d, &[], &[])).unwrap();
        assert_eq!(br.len(), 1);
        assert!(br[0].faces.is_empty());
        assert_eq!(br[0].offset, 0);
    }

    #[test]
    fn two_free_sides_two_branches() {
        // path a-b-c bent at b; a has free sides N, S and W but only one face exists
        let mut d = Drawing::new();
        d.add_vertex("a", p(0, 0));
        d.add_vertex("b", p(2, 0));
        d.add_edge("a", "b", vec![p(0, 0), p(2, 0)]);
        let br = reduce_to_faces(&bmoe(d.clone(), &["x"], &[("a", "x")])).unwrap();
        assert_eq!(br.len(), 3);
        // block one side with an extra drawn edge
        d.add_vertex("c", p(0, 2));
        d.add_edge("a", "c", vec![p(0, 0), p(0, 2)]);
        let br = reduce_to_faces(&bmoe(d, &["x"], &[("a", "x")])).unwrap();
        assert_eq!(br.len(), 2);
        for b in &br {
            assert_eq!(b.faces.len(), 1);
            assert_eq!(b.faces[0].ports.len(), 1);
            b.faces[0].check().unwrap();
        }
    }

    #[test]
    fn facing_vertices_straight_or_subdivided() {
        // rectangle with two vertices facing each other across the inside
        let mut d = cycle(&["a", "b", "c", "d"], &[p(0, 0), p(4, 0), p(4, 4), p(0, 4)]);
        d.edges.clear();
        d.add_vertex("u", p(2, 0));
        d.add_vertex("w", p(2, 4));
        for (x, y) in [("a", "u"), ("u", "b"), ("b", "c"), ("c", "w"), ("w", "d"), ("d", "a")] {
            let (px, py) = (d.vertices[x], d.vertices[y]);
            d.add_edge(x, y, vec![px, py]);
        }
        let br = reduce_to_faces(&bmoe(d, &[], &[("u", "w")])).unwrap();
        let straight: Vec<_> = br.iter().filter(|b| b.offset == 0).collect();
        assert_eq!(straight.len(), 1);
        assert!(straight[0].base.edges.contains_key(&edge_key("u", "w")));
        let sub: Vec<_> = br.iter().filter(|b| b.offset == 1).collect();
        assert!(!sub.is_empty());
        for b in sub {
            assert_eq!(b.faces.len(), 1);
            assert_eq!(b.faces[0].must_bend.len(), 1);
            b.faces[0].check().unwrap();
        }
    }

    fn l_instance(anchor_at_long_arm: bool) -> FaceInstance {
        // L: long arm along the bottom, short arm up the left
        let pts = [p(0, 0), p(8, 0), p(8, 2), p(2, 2), p(2, 6), p(0, 6)];
        let mut d = cycle(&["a", "b", "c", "r", "e", "f"], &pts);
        let anchor = if anchor_at_long_arm { ("m", p(6, 0), ("a", "b")) } else { ("m", p(1, 6), ("e", "f")) };
        let (u, v) = anchor.2;
        d.edges.remove(&edge_key(u, v));
        d.add_vertex(anchor.0, anchor.1);
        let (pu, pv) = (d.vertices[u], d.vertices[v]);
        d.add_edge(u, anchor.0, vec![pu, anchor.1]);
        d.add_edge(anchor.0, v, vec![anchor.1, pv]);
        let side = if anchor_at_long_arm { Dir::N } else { Dir::S };
        let e = edge_key("m", "x");
        FaceInstance {
            drawing: d,
            seed: Point::new(Rat::new(1, 2), Rat::new(1, 2)),
            outer: false,
            missing_vertices: vec!["x".into()],
            missing_edges: vec![e.clone()],
            ports: vec![PortCandidate { anchor: "m".into(), side, edge: e }],
            must_bend: BTreeSet::new(),
            dummies: BTreeSet::new(),
            frame: None,
        }
    }

    #[test]
    fn l_shape_reflex_corner() {
        let fi = l_instance(true);
        let rc = reflex_corners(&fi);
        assert_eq!(rc.len(), 1);
        assert_eq!(rc[0].point, p(2, 2));
        let mut pr = rc[0].projections.clone();
        pr.sort();
        assert_eq!(pr, vec![(Dir::S, p(2, 0)), (Dir::W, p(0, 2))]);
    }

    #[test]
    fn l_short_arm_is_redundant() {
        let fi = l_instance(true);
        let rr = find_redundant_region(&fi).expect("short arm");
        assert_eq!(rr.rect, Bbox { lo: p(0, 2), hi: p(2, 6) });
        let pruned = prune(&fi, &rr);
        pruned.check().unwrap();
        assert!(reflex_corners(&pruned).is_empty());
        let region = pruned.region().unwrap();
        assert!(!region.contains(&p(1, 4)));
        assert!(region.contains(&p(5, 1)));
        assert!(find_redundant_region(&pruned).is_none());
        // one dummy on the far side; the corner r was already a vertex
        assert_eq!(pruned.dummies.len(), 1);
    }

    #[test]
    fn anchor_in_short_arm_blocks_that_prune() {
        let fi = l_instance(false);
        let rr = find_redundant_region(&fi).expect("long arm is redundant now");
        // either projection of the corner cuts off the bottom arm
        assert_eq!(rr.rect.hi, p(8, 2));
        assert_eq!(rr.rect.lo.y, Rat::zero());
        let clean = make_clean(&fi);
        assert!(find_redundant_region(&clean).is_none());
        let r = clean.region().unwrap();
        assert!(r.contains(&p(1, 5)));
        assert!(!r.contains(&p(5, 1)));
    }

    #[test]
    fn staircase_prunes_to_top_step() {
        let pts = [p(0, 0), p(6, 0), p(6, 2), p(4, 2), p(4, 4), p(2, 4), p(2, 6), p(0, 6)];
        let names = ["a", "b", "c", "d", "e", "f", "g", "h"];
        let mut d = cycle(&names, &pts);
        d.edges.remove(&edge_key("g", "h"));
        d.add_vertex("m", p(1, 6));
        d.add_edge("g", "m", vec![p(2, 6), p(1, 6)]);
        d.add_edge("m", "h", vec![p(1, 6), p(0, 6)]);
        let e = edge_key("m", "x");
        let fi = FaceInstance {
            drawing: d,
            seed: Point::new(1, 1),
            outer: false,
            missing_vertices: vec!["x".into()],
            missing_edges: vec![e.clone()],
            ports: vec![PortCandidate { anchor: "m".into(), side: Dir::S, edge: e }],
            must_bend: BTreeSet::new(),
            dummies: BTreeSet::new(),
            frame: None,
        };
        let before = reflex_corners(&fi).len();
        assert_eq!(before, 2);
        let clean = make_clean(&fi);
        clean.check().unwrap();
        assert!(reflex_corners(&clean).is_empty());
        let r = clean.region().unwrap();
        assert!(r.contains(&Point::new(1, 5)));
        assert!(!r.contains(&Point::new(5, 1)));
    }

    #[test]
    fn frame_and_cut() {
        let d = cycle(&["a", "b", "c", "d"], &[p(0, 0), p(2, 0), p(2, 2), p(0, 2)]);
        let e = edge_key("a", "x");
        let fi = FaceInstance {
            drawing: d,
            seed: p(5, 5),
            outer: true,
            missing_vertices: vec!["x".into()],
            missing_edges: vec![e.clone()],
            ports: vec![PortCandidate { anchor: "a".into(), side: Dir::W, edge: e }],
            must_bend: BTreeSet::new(),
            dummies: BTreeSet::new(),
            frame: None,
        };
        fi.check().unwrap();
        let framed = frame_outer(&fi);
        framed.check().unwrap();
        let r = framed.region().unwrap();
        assert!(r.bounded());
        assert!(!r.contains(&p(1, 1)));
        assert!(r.contains(&p(3, 3)));
        let line = cut_line(&framed).unwrap();
        assert_eq!(line.slots, 8);
        assert_eq!(line.zeta.a, p(1, 2));
        assert_eq!(line.zeta.b, p(1, 4));
        let branches: Vec<CutBranch> = enumerate_cut_branches(&framed).unwrap().collect();
        // 2^8 arrays; one edge: single crossing has 2 directions, multiple crossings 4 variants
        let expected: usize = (0..=8usize)
            .map(|q| {
                let choose = (1..=q).fold(1usize, |acc, i| acc * (8 - i + 1) / i);
                choose * if q == 0 { 1 } else if q == 1 { 2 } else { 4 }
            })
            .sum();
        assert_eq!(branches.len(), expected);
        assert!(branches.iter().any(|b| b.array.iter().all(|a| a.is_none())));
        for b in branches.iter().take(40) {
            b.instance.check().unwrap();
            assert!(b.instance.region().unwrap().bounded());
        }
    }

    #[test]
    fn slot_counts() {
        assert_eq!(cut_slots(1), 8);
        assert_eq!(cut_slots(2), 24);
    }

    #[test]
    fn visit_order_alternates_ends() {
        assert_eq!(visit_order(&[1, 3, 5, 7]), vec![1, 7, 3, 5]);
        assert_eq!(visit_order(&[2]), vec![2]);
    }

    #[test]
    fn canonical_arrays_cover_sequences() {
        let arrs = canonical_arrays(2, 8, 0);
        // sequences of distinct edges: [], [0], [1], [0,1], [1,0]
        assert_eq!(arrs.len(), 5);
        let arrs = canonical_arrays(1, 8, 1);
        assert_eq!(arrs.len(), 3);
    }
}
