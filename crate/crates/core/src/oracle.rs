//! Brute-force ground truth on fine lattices, kept independent of the
//! arrangement and sector code.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::rc::Rc;

use crate::drawing::{validate, Drawing, OrthoPolyline};
use crate::error::OracleError;
use crate::geom::{AxisSegment, Bbox, Dir, Point, Rat};
use crate::instance::{BmoeInstance, EdgeEnd, FaceInstance, PortCandidate};
use crate::reduction::reduce_to_faces;

pub const UNREACHABLE: u32 = u32::MAX;

/// Axis lattice with the points inside the marked face.
#[derive(Clone, Debug)]
pub struct FineGrid {
    pub xs: Vec<Rat>,
    pub ys: Vec<Rat>,
    pub interior: Vec<bool>,
    segments: Vec<AxisSegment>,
}

fn refine(mut v: Vec<Rat>, r: usize) -> Vec<Rat> {
    v.sort();
    v.dedup();
    let mut out = Vec::new();
    for w in v.windows(2) {
        for t in 0..r {
            out.push(w[0] + (w[1] - w[0]) * Rat::new(t as i128, r as i128));
        }
    }
    if let Some(last) = v.last() {
        out.push(*last);
    }
    out
}

impl FineGrid {
    /// Lattice through every feature point and each of `extra`, with `r - 1`
    /// extra lines per gap. Outer faces get two margin lines on every side.
    pub fn new(fi: &FaceInstance, r: usize, extra: &[Point]) -> FineGrid {
        let feats = fi.drawing.feature_points();
        let mut xs: Vec<Rat> = feats.iter().map(|p| p.x).chain(extra.iter().map(|p| p.x)).collect();
        let mut ys: Vec<Rat> = feats.iter().map(|p| p.y).chain(extra.iter().map(|p| p.y)).collect();
        if fi.outer {
            if let Some(bb) = Bbox::of(feats.iter().chain(extra)) {
                for t in 1..=2 {
                    xs.extend([bb.lo.x - Rat::int(t), bb.hi.x + Rat::int(t)]);
                    ys.extend([bb.lo.y - Rat::int(t), bb.hi.y + Rat::int(t)]);
                }
            }
        }
        xs = refine(xs, r.max(1));
        ys = refine(ys, r.max(1));
        for p in extra.iter().chain([&fi.seed]) {
            xs.push(p.x);
            ys.push(p.y);
        }
        xs.sort();
        xs.dedup();
        ys.sort();
        ys.dedup();
        let segments: Vec<AxisSegment> = fi.drawing.segments().into_iter().map(|(_, s)| s).collect();
        let mut g = FineGrid { interior: vec![false; xs.len() * ys.len()], xs, ys, segments };
        g.flood(&fi.seed);
        g
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.xs.len() + i
    }

    pub fn point(&self, i: usize, j: usize) -> Point {
        Point { x: self.xs[i], y: self.ys[j] }
    }

    pub fn index_of(&self, p: &Point) -> Option<(usize, usize)> {
        Some((self.xs.binary_search(&p.x).ok()?, self.ys.binary_search(&p.y).ok()?))
    }

    fn on_drawing(&self, p: &Point) -> bool {
        self.segments.iter().any(|s| s.contains(p))
    }

    fn step(&self, i: usize, j: usize, d: Dir) -> Option<(usize, usize)> {
        let (dx, dy) = d.delta();
        let (ni, nj) = (i as i64 + dx as i64, j as i64 + dy as i64);
        if ni < 0 || nj < 0 || ni >= self.xs.len() as i64 || nj >= self.ys.len() as i64 {
            None
        } else {
            Some((ni as usize, nj as usize))
        }
    }

    /// A move between neighbouring lattice points that keeps off the drawing.
    /// Every drawing coordinate is a lattice line, so only collinear overlap
    /// can block the open segment, and its midpoint tells.
    fn free_move(&self, a: (usize, usize), b: (usize, usize)) -> bool {
        let (p, q) = (self.point(a.0, a.1), self.point(b.0, b.1));
        let mid = Point { x: Rat::mid(p.x, q.x), y: Rat::mid(p.y, q.y) };
        !self.on_drawing(&mid) && !self.on_drawing(&q)
    }

    fn flood(&mut self, seed: &Point) {
        let Some(s) = self.index_of(seed) else { return };
        if self.on_drawing(seed) {
            return;
        }
        let id = self.idx(s.0, s.1);
        self.interior[id] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(c) = queue.pop_front() {
            for d in Dir::ALL {
                if let Some(n) = self.step(c.0, c.1, d) {
                    let nid = self.idx(n.0, n.1);
                    if !self.interior[nid] && self.free_move(c, n) {
                        self.interior[nid] = true;
                        queue.push_back(n);
                    }
                }
            }
        }
    }

    pub fn is_interior(&self, p: &Point) -> bool {
        self.index_of(p).is_some_and(|(i, j)| self.interior[self.idx(i, j)])
    }

    /// Minimum heading changes from the port ray to every lattice point.
    pub fn bend_distances(&self, anchor: &Point, side: Dir) -> Vec<u32> {
        let n = self.xs.len() * self.ys.len();
        let mut best = vec![UNREACHABLE; n * 4];
        let mut deque: VecDeque<((usize, usize), Dir, u32)> = VecDeque::new();
        let Some(a) = self.index_of(anchor) else { return vec![UNREACHABLE; n] };
        if let Some(first) = self.step(a.0, a.1, side) {
            if self.interior[self.idx(first.0, first.1)] && self.free_move(a, first) {
                deque.push_back((first, side, 0));
            }
        }
        while let Some((c, h, cost)) = deque.pop_front() {
            let slot = self.idx(c.0, c.1) * 4 + h.index();
            if best[slot] <= cost {
                continue;
            }
            best[slot] = cost;
            if let Some(n) = self.step(c.0, c.1, h) {
                if self.interior[self.idx(n.0, n.1)] && self.free_move(c, n) {
                    deque.push_front((n, h, cost));
                }
            }
            for t in [h.cw(), h.ccw()] {
                deque.push_back((c, t, cost + 1));
            }
        }
        (0..n).map(|i| (0..4).map(|h| best[i * 4 + h]).min().unwrap()).collect()
    }
}

/// Bend distance from `p` to the port, `UNREACHABLE` if `p` is not in the open face.
pub fn oracle_bdist(fi: &FaceInstance, p: &Point, port: &PortCandidate) -> u32 {
    oracle_bdist_many(fi, std::slice::from_ref(p), port, 3)[0]
}

/// Batched form sharing one lattice.
pub fn oracle_bdist_many(fi: &FaceInstance, pts: &[Point], port: &PortCandidate, r: usize) -> Vec<u32> {
    let anchor = fi.drawing.vertices[&port.anchor];
    let mut extra = pts.to_vec();
    extra.push(anchor);
    let g = FineGrid::new(fi, r, &extra);
    let dist = g.bend_distances(&anchor, port.side);
    pts.iter()
        .map(|p| {
            if *p == anchor {
                return 0;
            }
            if !g.is_interior(p) {
                return UNREACHABLE;
            }
            let (i, j) = g.index_of(p).unwrap();
            dist[g.idx(i, j)]
        })
        .collect()
}


/// Exhaustive optimum of a face instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleSolution {
    pub beta: u32,
    /// Missing vertices and missing edges only.
    pub drawing: Drawing,
}

pub const MAX_VERTICES: usize = 2;
pub const MAX_EDGES: usize = 5;
pub const MAX_CANDIDATES: usize = 40;

/// Cell representatives of the feature-line arrangement inside the face:
/// every combination of a line or gap midpoint per axis. With two missing
/// vertices, open cells also offer points a quarter of the way in along
/// their midlines.
pub fn default_candidates(fi: &FaceInstance) -> Vec<Point> {
    #[derive(PartialEq)]
    enum Slot {
        Line,
        Mid,
        Quarter,
    }
    let quarter = fi.k() >= 2;
    let feats = fi.drawing.feature_points();
    let slots = |mut v: Vec<Rat>| -> Vec<(Rat, Slot)> {
        v.sort();
        v.dedup();
        if fi.outer {
            if let (Some(lo), Some(hi)) = (v.first().copied(), v.last().copied()) {
                v.insert(0, lo - Rat::int(2));
                v.push(hi + Rat::int(2));
            }
        }
        let mut out = Vec::new();
        for (i, c) in v.iter().enumerate() {
            out.push((*c, Slot::Line));
            if let Some(n) = v.get(i + 1) {
                out.push((Rat::mid(*c, *n), Slot::Mid));
                if quarter {
                    let w = *n - *c;
                    out.push((*c + w * Rat::new(1, 4), Slot::Quarter));
                    out.push((*c + w * Rat::new(3, 4), Slot::Quarter));
                }
            }
        }
        out
    };
    let xs = slots(feats.iter().map(|p| p.x).collect());
    let ys = slots(feats.iter().map(|p| p.y).collect());
    let mut pts = Vec::new();
    for (x, sx) in &xs {
        for (y, sy) in &ys {
            let ok = match (sx, sy) {
                (Slot::Quarter, t) | (t, Slot::Quarter) => *t == Slot::Mid,
                _ => true,
            };
            if ok {
                pts.push(Point { x: *x, y: *y });
            }
        }
    }
    let g = FineGrid::new(fi, 1, &pts);
    pts.retain(|q| g.is_interior(q));
    pts
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum End {
    Vertex(usize),
    Port(usize),
}

struct Search<'a> {
    fi: &'a FaceInstance,
    g: FineGrid,
    ends: Vec<[End; 2]>,
    /// Lattice index of each anchor and the first lattice point on its port ray.
    anchors: Vec<(usize, Option<usize>)>,
    /// Per port: forward bend distances from the port, per (point, heading).
    from_port: Vec<Vec<u32>>,
    to_point: BTreeMap<usize, Rc<Vec<u32>>>,
    to_port: Vec<Rc<Vec<u32>>>,
    occupied: Vec<bool>,
    place: Vec<usize>,
    paths: Vec<Vec<usize>>,
    cap: u32,
    nodes: u64,
}

impl<'a> Search<'a> {
    fn n(&self) -> usize {
        self.g.xs.len() * self.g.ys.len()
    }

    fn coords(&self, id: usize) -> (usize, usize) {
        (id % self.g.xs.len(), id / self.g.xs.len())
    }

    fn next(&self, id: usize, d: Dir) -> Option<usize> {
        let (i, j) = self.coords(id);
        self.g.step(i, j, d).map(|(a, b)| self.g.idx(a, b))
    }

    fn open_step(&self, a: usize, b: usize) -> bool {
        self.g.interior[a] && self.g.interior[b] && self.g.free_move(self.coords(a), self.coords(b))
    }

    /// Least bends from state (point, heading about to move) to entering `target`
    /// through one of `arrivals` (pairs of last interior point and heading).
    fn reverse_bfs(&self, arrivals: &[(usize, Dir)]) -> Vec<u32> {
        let mut best = vec![UNREACHABLE; self.n() * 4];
        let mut deque: VecDeque<(usize, Dir, u32)> = arrivals.iter().map(|&(p, h)| (p, h, 0)).collect();
        while let Some((p, h, c)) = deque.pop_front() {
            let slot = p * 4 + h.index();
            if best[slot] <= c {
                continue;
            }
            best[slot] = c;
            if let Some(prev) = self.next(p, h.opposite()) {
                if self.open_step(prev, p) {
                    deque.push_front((prev, h, c));
                }
            }
            for t in [h.cw(), h.ccw()] {
                deque.push_back((p, t, c + 1));
            }
        }
        best
    }

    fn arrivals_at_point(&self, v: usize) -> Vec<(usize, Dir)> {
        Dir::ALL
            .into_iter()
            .filter_map(|d| {
                let prev = self.next(v, d.opposite())?;
                self.open_step(prev, v).then_some((prev, d))
            })
            .collect()
    }

    fn point_target(&mut self, v: usize) -> Rc<Vec<u32>> {
        if !self.to_point.contains_key(&v) {
            let t = self.reverse_bfs(&self.arrivals_at_point(v));
            self.to_point.insert(v, Rc::new(t));
        }
        self.to_point[&v].clone()
    }

    fn forward(&self, port: usize) -> Vec<u32> {
        let mut best = vec![UNREACHABLE; self.n() * 4];
        let Some(first) = self.anchors[port].1 else { return best };
        let mut deque = VecDeque::from([(first, self.fi.ports[port].side, 0u32)]);
        while let Some((p, h, c)) = deque.pop_front() {
            let slot = p * 4 + h.index();
            if best[slot] <= c {
                continue;
            }
            best[slot] = c;
            if let Some(n) = self.next(p, h) {
                if self.open_step(p, n) {
                    deque.push_front((n, h, c));
                }
            }
            for t in [h.cw(), h.ccw()] {
                deque.push_back((p, t, c + 1));
            }
        }
        best
    }

    /// Bend lower bound of edge `e` given the current placement.
    fn edge_bound(&mut self, e: usize) -> u32 {
        match self.ends[e] {
            [End::Port(p), End::Port(q)] => {
                let Some(first) = self.anchors[p].1 else { return UNREACHABLE };
                self.to_port[q][first * 4 + self.fi.ports[p].side.index()]
            }
            [End::Port(p), End::Vertex(x)] | [End::Vertex(x), End::Port(p)] => {
                let v = self.place[x];
                (0..4).map(|h| self.from_port[p][v * 4 + h]).min().unwrap()
            }
            _ => 0,
        }
    }

    fn run(&mut self, order: &[usize], pos: usize, spent: u32, rest: &[u32]) -> bool {
        self.nodes += 1;
        if pos == order.len() {
            return self.must_bend_ok();
        }
        let e = order[pos];
        let (start, target) = match self.ends[e] {
            [End::Vertex(x), End::Port(p)] | [End::Port(p), End::Vertex(x)] => (End::Port(p), End::Vertex(x)),
            [a, b] => (a, b),
        };
        let (target_pt, arrivals_ok): (usize, Option<(usize, Dir)>) = match target {
            End::Vertex(x) => (self.place[x], None),
            End::Port(q) => {
                let Some(first) = self.anchors[q].1 else { return false };
                (self.anchors[q].0, Some((first, self.fi.ports[q].side.opposite())))
            }
        };
        let table: Rc<Vec<u32>> = match target {
            End::Vertex(_) => self.point_target(target_pt),
            End::Port(q) => self.to_port[q].clone(),
        };
        let budget = self.cap.saturating_sub(spent + rest[pos + 1]);
        match start {
            End::Port(p) => {
                let (a, first) = self.anchors[p];
                let Some(first) = first else { return false };
                if first == target_pt && arrivals_ok.is_none() {
                    return self.finish(order, pos, spent, rest, 0, &mut vec![a, first]);
                }
                if self.occupied[first] {
                    return false;
                }
                let side = self.fi.ports[p].side;
                self.occupied[first] = true;
                let mut path = vec![a, first];
                let ok = self.walk(order, pos, spent, rest, table.as_slice(), target_pt, arrivals_ok, budget, side, 0, false, &mut path);
                self.occupied[first] = false;
                if ok {
                    return true;
                }
            }
            End::Vertex(x) => {
                let v = self.place[x];
                for h in Dir::ALL {
                    let Some(n) = self.next(v, h) else { continue };
                    if n == target_pt && arrivals_ok.is_none() && self.open_step(v, n) {
                        let mut path = vec![v, n];
                        if self.finish(order, pos, spent, rest, 0, &mut path) {
                            return true;
                        }
                        continue;
                    }
                    if !self.open_step(v, n) || self.occupied[n] {
                        continue;
                    }
                    self.occupied[n] = true;
                    let mut path = vec![v, n];
                    let ok = self.walk(order, pos, spent, rest, table.as_slice(), target_pt, arrivals_ok, budget, h, 0, false, &mut path);
                    self.occupied[n] = false;
                    if ok {
                        return true;
                    }
                }
            }
        }
        false
    }

    fn finish(&mut self, order: &[usize], pos: usize, spent: u32, rest: &[u32], bends: u32, path: &mut Vec<usize>) -> bool {
        let e = order[pos];
        self.paths[e] = path.clone();
        if self.run(order, pos + 1, spent + bends, rest) {
            return true;
        }
        self.paths[e].clear();
        false
    }

    #[allow(clippy::too_many_arguments)]
    fn walk(
        &mut self,
        order: &[usize],
        pos: usize,
        spent: u32,
        rest: &[u32],
        table: &[u32],
        target: usize,
        arrival: Option<(usize, Dir)>,
        budget: u32,
        h: Dir,
        bends: u32,
        turned: bool,
        path: &mut Vec<usize>,
    ) -> bool {
        let cur = *path.last().unwrap();
        let need = table[cur * 4 + h.index()];
        if need == UNREACHABLE || bends + need > budget {
            return false;
        }
        if let Some(n) = self.next(cur, h) {
            let arrives = match arrival {
                Some((last, d)) => n == target && cur == last && h == d,
                None => n == target && self.open_step(cur, n),
            };
            if arrives {
                path.push(n);
                if self.finish(order, pos, spent, rest, bends, path) {
                    return true;
                }
                path.pop();
            } else if self.open_step(cur, n) && !self.occupied[n] {
                self.occupied[n] = true;
                path.push(n);
                let ok = self.walk(order, pos, spent, rest, table, target, arrival, budget, h, bends, false, path);
                path.pop();
                self.occupied[n] = false;
                if ok {
                    return true;
                }
            }
        }
        if !turned && bends < budget {
            for t in [h.cw(), h.ccw()] {
                if self.walk(order, pos, spent, rest, table, target, arrival, budget, t, bends + 1, true, path) {
                    return true;
                }
            }
        }
        false
    }

    fn must_bend_ok(&self) -> bool {
        for (x, id) in self.fi.missing_vertices.iter().enumerate() {
            if !self.fi.must_bend.contains(id) {
                continue;
            }
            let v = self.place[x];
            let dirs: Vec<bool> = (0..self.ends.len())
                .filter(|&e| self.ends[e].contains(&End::Vertex(x)))
                .map(|e| {
                    let p = &self.paths[e];
                    let nb = if p[0] == v { p[1] } else { p[p.len() - 2] };
                    self.coords(nb).1 == self.coords(v).1
                })
                .collect();
            if dirs.len() == 2 && dirs[0] == dirs[1] {
                return false;
            }
        }
        true
    }

    fn drawing(&self) -> Drawing {
        let mut d = Drawing::new();
        for (x, id) in self.fi.missing_vertices.iter().enumerate() {
            let (i, j) = self.coords(self.place[x]);
            d.add_vertex(id, self.g.point(i, j));
        }
        for (e, key) in self.fi.missing_edges.iter().enumerate() {
            let mut pts: Vec<Point> = self.paths[e]
                .iter()
                .map(|&id| {
                    let (i, j) = self.coords(id);
                    self.g.point(i, j)
                })
                .collect();
            let first_is_key0 = match self.ends[e][0] {
                End::Vertex(x) => pts[0] == d.vertices[&self.fi.missing_vertices[x]],
                End::Port(p) => pts[0] == self.fi.drawing.vertices[&self.fi.ports[p].anchor],
            };
            if !first_is_key0 {
                pts.reverse();
            }
            let line = OrthoPolyline::simplified(&pts);
            d.add_edge(&key.0, &key.1, line.points);
        }
        d
    }
}

/// Minimum total bends over placements of the missing vertices on
/// `candidates` and edge routes on a fine lattice, trying caps `0..=bend_cap`.
/// `r` is the number of lattice steps per gap between consecutive lines.
pub fn oracle_solve(
    fi: &FaceInstance,
    candidates: Option<&[Point]>,
    bend_cap: u32,
    r: Option<usize>,
) -> Result<Option<OracleSolution>, OracleError> {
    fi.check()?;
    if fi.k() > MAX_VERTICES {
        return Err(OracleError::TooLarge(format!("{} missing vertices", fi.k())));
    }
    if fi.missing_edges.len() > MAX_EDGES {
        return Err(OracleError::TooLarge(format!("{} missing edges", fi.missing_edges.len())));
    }
    if fi.missing_edges.is_empty() && fi.k() == 0 {
        return Ok(Some(OracleSolution { beta: 0, drawing: Drawing::new() }));
    }
    let cands: Vec<Point> = match candidates {
        Some(c) => c.to_vec(),
        None => default_candidates(fi),
    };
    if cands.len() > MAX_CANDIDATES && fi.k() > 0 {
        return Err(OracleError::TooLarge(format!("{} candidates", cands.len())));
    }
    let r = r.unwrap_or(fi.missing_edges.len() + 2);
    let mut extra = cands.clone();
    extra.extend(fi.ports.iter().map(|p| fi.drawing.vertices[&p.anchor]));
    let g = FineGrid::new(fi, r, &extra);
    let ends: Vec<[End; 2]> = (0..fi.missing_edges.len())
        .map(|e| {
            fi.ends(e).map(|pair| {
                pair.map(|x| match x {
                    EdgeEnd::Vertex(v) => End::Vertex(v),
                    EdgeEnd::Port(p) => End::Port(p),
                })
            })
        })
        .collect::<Result<_, _>>()?;
    let anchors: Vec<(usize, Option<usize>)> = fi
        .ports
        .iter()
        .map(|p| {
            let (i, j) = g.index_of(&fi.drawing.vertices[&p.anchor]).expect("anchor on the lattice");
            let first = g.step(i, j, p.side).filter(|&(a, b)| {
                let q = g.point(a, b);
                let mid = Point { x: Rat::mid(q.x, g.xs[i]), y: Rat::mid(q.y, g.ys[j]) };
                g.interior[g.idx(a, b)] && !g.on_drawing(&mid)
            });
            (g.idx(i, j), first.map(|(a, b)| g.idx(a, b)))
        })
        .collect();
    let slots: Vec<usize> = cands
        .iter()
        .filter(|c| g.is_interior(c))
        .map(|c| {
            let (i, j) = g.index_of(c).unwrap();
            g.idx(i, j)
        })
        .collect();
    let n = g.xs.len() * g.ys.len();
    let mut s = Search {
        fi,
        g,
        ends,
        anchors,
        from_port: Vec::new(),
        to_point: BTreeMap::new(),
        to_port: Vec::new(),
        occupied: vec![false; n],
        place: vec![0; fi.k()],
        paths: vec![Vec::new(); fi.missing_edges.len()],
        cap: 0,
        nodes: 0,
    };
    s.from_port = (0..fi.ports.len()).map(|p| s.forward(p)).collect();
    s.to_port = (0..fi.ports.len())
        .map(|p| match s.anchors[p].1 {
            Some(first) => Rc::new(s.reverse_bfs(&[(first, fi.ports[p].side.opposite())])),
            None => Rc::new(vec![UNREACHABLE; n * 4]),
        })
        .collect();
    // every placement of the missing vertices on distinct candidate slots
    let k = fi.k();
    let mut placements: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..k {
        let mut next = Vec::new();
        for pre in &placements {
            for s in slots.iter().filter(|s| !pre.contains(s)) {
                let mut p = pre.clone();
                p.push(*s);
                next.push(p);
            }
        }
        placements = next;
    }
    let m = fi.missing_edges.len();
    let mut bounded: Vec<(u32, Vec<usize>, Vec<u32>)> = Vec::new();
    for pl in placements {
        s.place = pl.clone();
        let lbs: Vec<u32> = (0..m).map(|e| s.edge_bound(e)).collect();
        if lbs.iter().any(|b| *b == UNREACHABLE) {
            continue;
        }
        bounded.push((lbs.iter().sum(), pl, lbs));
    }
    bounded.sort();
    for cap in 0..=bend_cap {
        s.cap = cap;
        for (lb, pl, lbs) in &bounded {
            if *lb > cap {
                break;
            }
            s.place = pl.clone();
            // most constrained edges first; rest[i] bounds edges order[i..]
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by_key(|e| std::cmp::Reverse(lbs[*e]));
            let mut rest = vec![0u32; m + 1];
            for i in (0..m).rev() {
                rest[i] = rest[i + 1] + lbs[order[i]];
            }
            for &v in pl {
                s.occupied[v] = true;
            }
            let found = s.run(&order, 0, 0, &rest);
            for &v in pl {
                s.occupied[v] = false;
            }
            if found {
                let drawing = s.drawing();
                let merged = fi.drawing.merged(&drawing);
                debug_assert!(validate(&merged).is_valid(), "{:?}", validate(&merged));
                let beta = drawing.edges.values().map(|pl| pl.bends() as u32).sum();
                return Ok(Some(OracleSolution { beta, drawing }));
            }
        }
    }
    Ok(None)
}

fn feature_lines(fi: &FaceInstance, feats: &BTreeSet<Point>, of: impl Fn(&Point) -> Rat) -> (Vec<Rat>, Vec<Rat>) {
    let mut v: Vec<Rat> = feats.iter().map(of).collect();
    v.sort();
    v.dedup();
    if fi.outer {
        let (lo, hi) = (v[0], v[v.len() - 1]);
        v.insert(0, lo - Rat::int(2));
        v.push(hi + Rat::int(2));
    }
    let gaps = v.windows(2).map(|w| Rat::mid(w[0], w[1])).collect();
    (v, gaps)
}

/// Oracle placements on the face's feature lines, plus gap midpoints when
/// `mids` is set, plus midpoints lying on a port's line when `aligned` is
/// set. Outer faces add a line two units beyond the drawing on every side.
pub fn coarse_candidates(fi: &FaceInstance, mids: bool, aligned: bool) -> Vec<Point> {
    let feats = fi.drawing.feature_points();
    let (xs, xm) = feature_lines(fi, &feats, |p| p.x);
    let (ys, ym) = feature_lines(fi, &feats, |p| p.y);
    let region = fi.region().expect("face");
    let mut px = BTreeSet::new();
    let mut py = BTreeSet::new();
    for port in &fi.ports {
        let a = fi.drawing.vertices[&port.anchor];
        if port.side.delta().0 == 0 {
            px.insert(a.x);
        } else {
            py.insert(a.y);
        }
    }
    let all_x: Vec<Rat> = xs.iter().chain(&xm).copied().collect();
    let all_y: Vec<Rat> = ys.iter().chain(&ym).copied().collect();
    let mut out = BTreeSet::new();
    for x in &all_x {
        for y in &all_y {
            let on_lines = xs.contains(x) && ys.contains(y);
            let both_mid = xm.contains(x) && ym.contains(y);
            let on_port = px.contains(x) || py.contains(y);
            if on_lines || (mids && both_mid) || (aligned && on_port) {
                let p = Point { x: *x, y: *y };
                if region.contains(&p) && !feats.contains(&p) {
                    out.insert(p);
                }
            }
        }
    }
    out.into_iter().collect()
}

/// `None` when the oracle's own placements fit its limit, otherwise the
/// richest coarse placement set that does.
pub fn oracle_candidates(fi: &FaceInstance) -> Option<Vec<Point>> {
    if default_candidates(fi).len() <= MAX_CANDIDATES {
        return None;
    }
    [(true, true), (false, true), (true, false), (false, false)]
        .into_iter()
        .map(|(mids, aligned)| coarse_candidates(fi, mids, aligned))
        .find(|c| c.len() <= MAX_CANDIDATES)
}

/// Optimum of a whole instance within `bend_cap`: every reduction branch,
/// each of its faces searched with default candidates, plus the branch offset.
pub fn oracle_bmoe(inst: &BmoeInstance, bend_cap: u32) -> Result<Option<u32>, OracleError> {
    let mut best: Option<u32> = None;
    'branches: for br in reduce_to_faces(inst)? {
        let mut total = br.offset;
        for fi in &br.faces {
            let Some(left) = bend_cap.checked_sub(total) else { continue 'branches };
            match oracle_solve(fi, oracle_candidates(fi).as_deref(), left, None)? {
                Some(sol) => total += sol.beta,
                None => continue 'branches,
            }
        }
        if total <= bend_cap && best.map_or(true, |b| total < b) {
            best = Some(total);
        }
    }
    Ok(best)
}
