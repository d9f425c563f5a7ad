//! Seeded random instances: simply connected polyomino faces with ports, and
//! cycle drawings with bends.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::drawing::{edge_key, Drawing, VertexId};
use crate::geom::{AxisSegment, Dir, Point, Rat};
use crate::instance::{BmoeInstance, FaceInstance, PortCandidate};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

type Sq = (i64, i64);

fn holes_or_pinches(cells: &BTreeSet<Sq>, w: i64, h: i64) -> bool {
    // complement must reach the outside
    let mut seen: BTreeSet<Sq> = BTreeSet::new();
    let mut stack = vec![(-1, -1)];
    while let Some((x, y)) = stack.pop() {
        if x < -1 || y < -1 || x > w || y > h || cells.contains(&(x, y)) || !seen.insert((x, y)) {
            continue;
        }
        stack.extend([(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)]);
    }
    let outside = (w + 2) * (h + 2) - cells.len() as i64;
    if seen.len() as i64 != outside {
        return true;
    }
    // two squares meeting only at a corner
    for x in -1..=w {
        for y in -1..=h {
            let a = cells.contains(&(x, y));
            let b = cells.contains(&(x + 1, y));
            let c = cells.contains(&(x, y + 1));
            let d = cells.contains(&(x + 1, y + 1));
            if (a && d && !b && !c) || (b && c && !a && !d) {
                return true;
            }
        }
    }
    false
}

/// Corners of the union of unit squares, counter-clockwise.
fn outline(cells: &BTreeSet<Sq>) -> Vec<(i64, i64)> {
    let mut sides: BTreeSet<((i64, i64), (i64, i64))> = BTreeSet::new();
    for &(x, y) in cells {
        let ring = [(x, y), (x + 1, y), (x + 1, y + 1), (x, y + 1)];
        for i in 0..4 {
            let (a, b) = (ring[i], ring[(i + 1) % 4]);
            if !sides.remove(&(b, a)) {
                sides.insert((a, b));
            }
        }
    }
    let next: BTreeMap<(i64, i64), (i64, i64)> = sides.into_iter().collect();
    let start = *next.keys().next().unwrap();
    let mut pts = vec![start];
    let mut cur = next[&start];
    while cur != start {
        pts.push(cur);
        cur = next[&cur];
    }
    let n = pts.len();
    (0..n)
        .filter(|&i| {
            let (a, b, c) = (pts[(i + n - 1) % n], pts[i], pts[(i + 1) % n]);
            (b.0 - a.0) * (c.1 - b.1) - (b.1 - a.1) * (c.0 - b.0) != 0
        })
        .map(|i| pts[i])
        .collect()
}

/// Random simply connected rectilinear polygon with at most `max_corners`
/// corners, coordinates doubled so side midpoints are integral.
pub fn polygon(rng: &mut impl Rng, size: i64, cells: usize, max_corners: usize) -> (Vec<Point>, Point) {
    loop {
        let mut set: BTreeSet<Sq> = BTreeSet::from([(rng.gen_range(0..size), rng.gen_range(0..size))]);
        let mut guard = 0;
        while set.len() < cells && guard < 500 {
            guard += 1;
            let base = *set.iter().collect::<Vec<_>>().choose(rng).unwrap();
            let (dx, dy) = [(1, 0), (-1, 0), (0, 1), (0, -1)][rng.gen_range(0..4)];
            let n = (base.0 + dx, base.1 + dy);
            if n.0 < 0 || n.1 < 0 || n.0 >= size || n.1 >= size || set.contains(&n) {
                continue;
            }
            set.insert(n);
            if holes_or_pinches(&set, size, size) {
                set.remove(&n);
            }
        }
        let corners = outline(&set);
        if corners.len() > max_corners {
            continue;
        }
        let first = *set.iter().next().unwrap();
        let seed = Point::new(2 * first.0 + 1, 2 * first.1 + 1);
        return (corners.into_iter().map(|(x, y)| Point::new(2 * x, 2 * y)).collect(), seed);
    }
}

/// A face bounded by `corners` with `q` ports, all joined to one missing vertex.
/// Anchors sit at side midpoints (inward side) or at reflex corners.
pub fn face_instance(rng: &mut impl Rng, corners: &[Point], seed: Point, q: usize) -> FaceInstance {
    let n = corners.len();
    let reflex: Vec<usize> = (0..n)
        .filter(|&i| {
            let (a, b, c) = (corners[(i + n - 1) % n], corners[i], corners[(i + 1) % n]);
            let cross = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x);
            cross < Rat::zero()
        })
        .collect();
    // candidate anchors: (side index or corner index, point, inward side)
    let mut cands: Vec<(bool, usize, Point, Dir)> = Vec::new();
    for i in 0..n {
        let (a, b) = (corners[i], corners[(i + 1) % n]);
        let mid = Point { x: Rat::mid(a.x, b.x), y: Rat::mid(a.y, b.y) };
        let d = a.dir_to(&b).unwrap();
        // counter-clockwise boundary: the face is on the left
        cands.push((true, i, mid, d.ccw()));
    }
    for &i in &reflex {
        let (a, b, c) = (corners[(i + n - 1) % n], corners[i], corners[(i + 1) % n]);
        let into = a.dir_to(&b).unwrap();
        let out = b.dir_to(&c).unwrap();
        let side = if rng.gen_bool(0.5) { into } else { out.opposite() };
        cands.push((false, i, b, side));
    }
    cands.shuffle(rng);
    let chosen: Vec<_> = cands.into_iter().take(q).collect();
    let mut ring: Vec<(VertexId, Point)> = Vec::new();
    let mut anchor_ids: Vec<(VertexId, Dir)> = Vec::new();
    for i in 0..n {
        let corner_port = chosen.iter().find(|c| !c.0 && c.1 == i);
        let id = if corner_port.is_some() { format!("a{i}") } else { format!("c{i}") };
        ring.push((id.clone(), corners[i]));
        if let Some(c) = corner_port {
            anchor_ids.push((id, c.3));
        }
        if let Some(c) = chosen.iter().find(|c| c.0 && c.1 == i) {
            let id = format!("m{i}");
            ring.push((id.clone(), c.2));
            anchor_ids.push((id, c.3));
        }
    }
    let mut d = Drawing::new();
    for (id, p) in &ring {
        d.add_vertex(id, *p);
    }
    for i in 0..ring.len() {
        let (u, v) = (&ring[i], &ring[(i + 1) % ring.len()]);
        d.add_edge(&u.0, &v.0, vec![u.1, v.1]);
    }
    anchor_ids.sort();
    let mut edges = Vec::new();
    let mut ports = Vec::new();
    for (a, side) in anchor_ids {
        let e = edge_key(&a, "x");
        edges.push(e.clone());
        ports.push(PortCandidate { anchor: a, side, edge: e });
    }
    edges.sort();
    FaceInstance {
        drawing: d,
        seed,
        outer: false,
        missing_vertices: vec!["x".into()],
        missing_edges: edges,
        ports,
        must_bend: BTreeSet::new(),
        dummies: BTreeSet::new(),
        frame: None,
    }
}

/// Random face with `q` ports; redundant regions are pruned away.
pub fn clean_face(seed: u64, max_corners: usize, q: usize) -> FaceInstance {
    let mut r = rng(seed);
    loop {
        let cells = r.gen_range(3..12);
        let (corners, inside) = polygon(&mut r, 5, cells, max_corners);
        let fi = face_instance(&mut r, &corners, inside, q);
        if fi.ports.len() < q || fi.check().is_err() {
            continue;
        }
        let clean = crate::reduction::make_clean(&fi);
        if clean.check().is_ok() {
            return clean;
        }
    }
}

/// Cycle drawing around a random polygon where some corners are bends.
pub fn cycle_drawing(seed: u64, max_corners: usize) -> Drawing {
    let mut r = rng(seed);
    let cells = r.gen_range(2..10);
    let (corners, _) = polygon(&mut r, 5, cells, max_corners);
    let n = corners.len();
    let mut is_vertex: Vec<bool> = (0..n).map(|_| r.gen_bool(0.5)).collect();
    for i in [0, n / 3, 2 * n / 3] {
        is_vertex[i] = true;
    }
    let idx: Vec<usize> = (0..n).filter(|i| is_vertex[*i]).collect();
    let mut d = Drawing::new();
    for &i in &idx {
        d.add_vertex(&format!("v{i}"), corners[i]);
    }
    for (k, &i) in idx.iter().enumerate() {
        let j = idx[(k + 1) % idx.len()];
        let mut pts = vec![corners[i]];
        let mut t = (i + 1) % n;
        while t != j {
            pts.push(corners[t]);
            t = (t + 1) % n;
        }
        pts.push(corners[j]);
        d.add_edge(&format!("v{i}"), &format!("v{j}"), pts);
    }
    d
}

/// Polygon face with anchors on its sides, all joined to one missing vertex `x`.
/// Anchor `k` is named `a{k}`, corner `i` is named `c{i}`.
pub fn polygon_face(pts: &[Point], anchors: &[(Point, Dir)], seed: Point) -> FaceInstance {
    let mut d = Drawing::new();
    let mut ring: Vec<(String, Point)> = Vec::new();
    for (i, q) in pts.iter().enumerate() {
        ring.push((format!("c{i}"), *q));
        let next = pts[(i + 1) % pts.len()];
        let mut on_side: Vec<(usize, Point)> = anchors
            .iter()
            .enumerate()
            .filter(|(_, (a, _))| (AxisSegment { a: *q, b: next }).contains_in_interior(a))
            .map(|(k, (a, _))| (k, *a))
            .collect();
        on_side.sort_by_key(|(_, a)| a.l1(q));
        ring.extend(on_side.into_iter().map(|(k, a)| (format!("a{k}"), a)));
    }
    for (id, q) in &ring {
        d.add_vertex(id, *q);
    }
    for i in 0..ring.len() {
        let (u, v) = (&ring[i], &ring[(i + 1) % ring.len()]);
        d.add_edge(&u.0, &v.0, vec![u.1, v.1]);
    }
    let mut ports = Vec::new();
    let mut edges = Vec::new();
    for (a, side) in anchors {
        let id = ring.iter().find(|(_, q)| q == a).expect("anchor on a side").0.clone();
        let e = edge_key(&id, "x");
        edges.push(e.clone());
        ports.push(PortCandidate { anchor: id, side: *side, edge: e });
    }
    edges.sort();
    ports.sort_by(|x, y| (&x.anchor, &x.edge).cmp(&(&y.anchor, &y.edge)));
    FaceInstance {
        drawing: d,
        seed,
        outer: false,
        missing_vertices: vec!["x".into()],
        missing_edges: edges,
        ports,
        must_bend: BTreeSet::new(),
        dummies: BTreeSet::new(),
        frame: None,
    }
}

/// Face bounded by polygon `pts` with named anchors `a{k}` on its sides and
/// missing edges between anchors and missing vertices. Every name in `edges`
/// that is not an anchor is a missing vertex.
pub fn custom_face(
    pts: &[Point],
    seed: Point,
    outer: bool,
    anchors: &[(Point, Dir)],
    edges: &[(&str, &str)],
) -> FaceInstance {
    let mut fi = polygon_face(pts, anchors, seed);
    fi.outer = outer;
    let anchor_of = |name: &str| name.strip_prefix('a').and_then(|k| k.parse::<usize>().ok()).filter(|k| *k < anchors.len());
    let mut vertices: BTreeSet<VertexId> = BTreeSet::new();
    let mut keys = Vec::new();
    let mut ports = Vec::new();
    for (u, v) in edges {
        let e = edge_key(u, v);
        for w in [u, v] {
            match anchor_of(w) {
                Some(k) => ports.push(PortCandidate { anchor: w.to_string(), side: anchors[k].1, edge: e.clone() }),
                None => {
                    vertices.insert(w.to_string());
                }
            }
        }
        keys.push(e);
    }
    keys.sort();
    ports.sort_by(|x, y| (&x.anchor, &x.edge).cmp(&(&y.anchor, &y.edge)));
    fi.missing_vertices = vertices.into_iter().collect();
    fi.missing_edges = keys;
    fi.ports = ports;
    fi
}

/// The 4x4 square with one missing edge between two anchors.
pub fn anchor_pair(a: (Point, Dir), b: (Point, Dir)) -> FaceInstance {
    let mut fi = polygon_face(&[Point::new(0, 0), Point::new(4, 0), Point::new(4, 4), Point::new(0, 4)], &[a, b], Point::new(1, 1));
    let e = edge_key(&fi.ports[0].anchor, &fi.ports[1].anchor);
    fi.missing_vertices.clear();
    fi.missing_edges = vec![e.clone()];
    for port in &mut fi.ports {
        port.edge = e.clone();
    }
    fi
}

/// A named face instance with the oracle placements to compare against.
pub struct TinyCase {
    pub name: &'static str,
    pub face: FaceInstance,
    pub candidates: Option<Vec<Point>>,
}

/// Handcrafted faces with at most two missing vertices and four missing
/// edges: inner faces, outer faces, and faces with prunable regions.
pub fn tiny_suite() -> Vec<TinyCase> {
    use Dir::*;
    let p = |x: i64, y: i64| Point::new(x, y);
    let sq = [p(0, 0), p(4, 0), p(4, 4), p(0, 4)];
    let sq6 = [p(0, 0), p(6, 0), p(6, 6), p(0, 6)];
    let l = [p(0, 0), p(6, 0), p(6, 2), p(2, 2), p(2, 6), p(0, 6)];
    let u = [p(0, 0), p(6, 0), p(6, 6), p(4, 6), p(4, 2), p(2, 2), p(2, 6), p(0, 6)];
    let s = [p(0, 0), p(6, 0), p(6, 6), p(2, 6), p(2, 8), p(6, 8), p(6, 10), p(0, 10), p(0, 4), p(4, 4), p(4, 2), p(0, 2)];
    let tower = [p(0, 0), p(8, 0), p(8, 4), p(6, 4), p(6, 8), p(4, 8), p(4, 4), p(0, 4)];
    let comb = [p(0, 0), p(10, 0), p(10, 6), p(8, 6), p(8, 2), p(6, 2), p(6, 6), p(4, 6), p(4, 2), p(2, 2), p(2, 6), p(0, 6)];
    let inner = p(1, 1);
    let outside = p(-1, -1);
    let mut straight = custom_face(&sq6, inner, false, &[(p(2, 0), N), (p(2, 6), S)], &[("a0", "u"), ("u", "a1")]);
    straight.must_bend.insert("u".into());
    let mut corner = custom_face(&sq6, inner, false, &[(p(2, 0), N), (p(6, 3), W)], &[("a0", "u"), ("u", "a1")]);
    corner.must_bend.insert("u".into());
    let faces: Vec<(&'static str, FaceInstance)> = vec![
        ("square-facing", anchor_pair((p(2, 0), N), (p(2, 4), S))),
        ("square-offset", anchor_pair((p(1, 0), N), (p(3, 4), S))),
        ("square-perpendicular", anchor_pair((p(2, 0), N), (p(4, 2), W))),
        ("square-u-turn", anchor_pair((p(1, 0), N), (p(3, 0), N))),
        ("square-one-port", polygon_face(&sq, &[(p(2, 4), S)], inner)),
        ("square-star", polygon_face(&sq, &[(p(2, 0), N), (p(4, 2), W), (p(2, 4), S), (p(0, 2), E)], inner)),
        ("square-two-bottom", polygon_face(&sq, &[(p(1, 0), N), (p(3, 0), N), (p(2, 4), S)], inner)),
        ("l-two-ports", polygon_face(&l, &[(p(4, 0), N), (p(0, 5), E)], inner)),
        ("u-arms", polygon_face(&u, &[(p(1, 6), S), (p(5, 6), S)], inner)),
        ("square-path-k2", custom_face(&sq6, inner, false, &[(p(2, 0), N), (p(4, 6), S)], &[("a0", "x"), ("x", "y"), ("y", "a1")])),
        (
            "two-vertices",
            custom_face(
                &sq6,
                inner,
                false,
                &[(p(2, 0), N), (p(0, 2), E), (p(4, 6), S), (p(6, 4), W)],
                &[("a0", "x"), ("a1", "x"), ("a2", "y"), ("a3", "y")],
            ),
        ),
        (
            "u-k2",
            custom_face(&u, inner, false, &[(p(1, 6), S), (p(5, 6), S), (p(3, 0), N)], &[("a0", "x"), ("x", "y"), ("a1", "y"), ("a2", "x")]),
        ),
        ("must-bend-facing", straight),
        ("must-bend-corner", corner),
        ("outer-one-port", custom_face(&sq, outside, true, &[(p(4, 2), E)], &[("a0", "x")])),
        ("outer-opposite", custom_face(&sq, outside, true, &[(p(2, 0), S), (p(2, 4), N)], &[("a0", "x"), ("a1", "x")])),
        ("outer-sides", custom_face(&sq, outside, true, &[(p(0, 2), W), (p(4, 2), E)], &[("a0", "x"), ("a1", "x")])),
        ("outer-corner", custom_face(&sq, outside, true, &[(p(4, 2), E), (p(2, 4), N)], &[("a0", "x"), ("a1", "x")])),
        ("outer-l", custom_face(&l, outside, true, &[(p(4, 2), N), (p(0, 3), W)], &[("a0", "x"), ("a1", "x")])),
        ("outer-k2", custom_face(&sq, outside, true, &[(p(2, 0), S), (p(2, 4), N)], &[("a0", "x"), ("x", "y"), ("y", "a1")])),
        ("s-far-ports", polygon_face(&s, &[(p(3, 0), N), (p(1, 10), S)], inner)),
        ("tower-prune", polygon_face(&tower, &[(p(2, 0), N), (p(8, 2), W)], inner)),
        ("comb-prune", polygon_face(&comb, &[(p(1, 6), S), (p(9, 6), S)], inner)),
        (
            "comb-prune-k2",
            custom_face(&comb, inner, false, &[(p(1, 6), S), (p(9, 6), S), (p(5, 0), N)], &[("a0", "x"), ("a1", "y"), ("x", "y"), ("a2", "y")]),
        ),
    ];
    faces
        .into_iter()
        .map(|(name, face)| TinyCase { name, candidates: crate::oracle::oracle_candidates(&face), face })
        .collect()
}


/// A small extension instance: an 8 by 8 cycle with a pendant edge, and a
/// missing vertex `x` joined to three cycle vertices. Also returns a
/// hand-drawn extension with 7 bends, where `ax` alone has three.
pub fn showcase() -> (BmoeInstance, Drawing) {
    let p = |x: i64, y: i64| Point::new(x, y);
    let cycle = [
        ("p0", p(0, 0)),
        ("a", p(3, 0)),
        ("e", p(6, 0)),
        ("p1", p(8, 0)),
        ("b", p(8, 5)),
        ("p2", p(8, 8)),
        ("c", p(2, 8)),
        ("p3", p(0, 8)),
    ];
    let mut inst = BmoeInstance::default();
    for (i, (id, q)) in cycle.iter().enumerate() {
        let (nid, nq) = cycle[(i + 1) % cycle.len()];
        inst.drawing.add_vertex(id, *q);
        inst.drawing.add_edge(id, nid, vec![*q, nq]);
    }
    inst.drawing.add_vertex("d", p(6, 2));
    inst.drawing.add_edge("e", "d", vec![p(6, 0), p(6, 2)]);
    inst.vertices = inst.drawing.vertices.keys().cloned().chain(["x".to_string()]).collect();
    inst.edges = inst.drawing.edges.keys().cloned().collect();
    for v in ["a", "b", "c"] {
        inst.edges.insert(edge_key(v, "x"));
    }
    let mut ext = inst.drawing.clone();
    ext.add_vertex("x", p(5, 4));
    ext.add_edge("a", "x", vec![p(3, 0), p(3, 2), p(1, 2), p(1, 4), p(5, 4)]);
    ext.add_edge("b", "x", vec![p(8, 5), p(6, 5), p(6, 4), p(5, 4)]);
    ext.add_edge("c", "x", vec![p(2, 8), p(2, 6), p(5, 6), p(5, 4)]);
    (inst, ext)
}
