//! Bend distances inside a face, the sector decomposition they induce, and the
//! per-subsector point grids the solver routes on.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::drawing::VertexId;
use crate::error::SectorError;
use crate::geom::{AxisSegment, Dir, Point, Rat};
use crate::instance::{FaceInstance, PortCandidate};
use crate::reduction::reflex_corners;
use crate::region::{Cell, CellKind, FaceRegion};

pub const INF: u32 = u32::MAX;

/// Cells of the line arrangement that lie in the closed face.
#[derive(Clone, Debug)]
pub struct CellComplex {
    pub region: FaceRegion,
    pub elements: Vec<Cell>,
    /// Element lies on the drawing rather than in the open face.
    pub boundary: Vec<bool>,
    elem_of: Vec<u32>,
    pub vertices: BTreeMap<VertexId, Point>,
    pub feature_count: usize,
}

impl CellComplex {
    pub fn build(fi: &FaceInstance) -> Result<CellComplex, SectorError> {
        let region = fi.region().ok_or(SectorError::Unbounded)?;
        if !region.bounded() {
            return Err(SectorError::Unbounded);
        }
        let arr = &region.arr;
        let mut elements = Vec::new();
        let mut boundary = Vec::new();
        let mut elem_of = vec![u32::MAX; arr.n_cells()];
        for c in arr.cells() {
            let inside = region.inside(c);
            if inside || region.on_boundary(c) {
                elem_of[arr.idx(c)] = elements.len() as u32;
                elements.push(c);
                boundary.push(!inside);
            }
        }
        Ok(CellComplex {
            elements,
            boundary,
            elem_of,
            vertices: fi.drawing.vertices.clone(),
            feature_count: fi.drawing.feature_points().len(),
            region,
        })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn element_at(&self, c: Cell) -> Option<usize> {
        let v = self.elem_of[self.region.arr.idx(c)];
        (v != u32::MAX).then_some(v as usize)
    }

    pub fn locate(&self, p: &Point) -> Option<usize> {
        self.element_at(self.region.arr.locate(p))
    }

    pub fn interior(&self, e: usize) -> bool {
        !self.boundary[e]
    }

    pub fn kind(&self, e: usize) -> CellKind {
        self.region.arr.kind(self.elements[e])
    }

    pub fn rep(&self, e: usize) -> Point {
        self.region.arr.rep(self.elements[e])
    }

    /// Interior elements one axis step away.
    pub fn neighbors(&self, e: usize) -> impl Iterator<Item = (Dir, usize)> + '_ {
        let c = self.elements[e];
        Dir::ALL.into_iter().filter_map(move |d| {
            let n = self.region.arr.step(c, d)?;
            let m = self.element_at(n)?;
            self.interior(m).then_some((d, m))
        })
    }

    /// Interior elements met by walking from `e` in direction `d`, in order.
    pub fn sweep(&self, e: usize, d: Dir) -> Vec<usize> {
        let mut out = Vec::new();
        let mut c = self.elements[e];
        while let Some(n) = self.region.arr.step(c, d) {
            match self.element_at(n) {
                Some(m) if self.interior(m) => out.push(m),
                _ => break,
            }
            c = n;
        }
        out
    }

    /// First cell off the open face when walking from `e` in direction `d`.
    pub fn hit(&self, e: usize, d: Dir) -> Option<Cell> {
        let mut c = self.elements[e];
        while let Some(n) = self.region.arr.step(c, d) {
            match self.element_at(n) {
                Some(m) if self.interior(m) => c = n,
                _ => return Some(n),
            }
        }
        None
    }

    pub fn x_span(&self, e: usize) -> (Rat, Rat) {
        self.region.arr.x_span(self.elements[e].0).expect("bounded face")
    }

    pub fn y_span(&self, e: usize) -> (Rat, Rat) {
        self.region.arr.y_span(self.elements[e].1).expect("bounded face")
    }
}

/// Bend distance from every element to one port.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BendField {
    pub port: PortCandidate,
    pub dist: Vec<u32>,
    /// 1-cells at level `i` touching an element of level `i - 1`.
    pub interfaces: Vec<Vec<usize>>,
}

impl BendField {
    pub fn max_level(&self) -> u32 {
        self.dist.iter().copied().filter(|d| *d != INF).max().unwrap_or(0)
    }
}

/// Wavefront over the complex: level 0 is the port ray, level `i + 1` is what
/// a straight segment reaches from level `i`.
pub fn bend_field(c: &CellComplex, port: &PortCandidate) -> Result<BendField, SectorError> {
    let anchor = c.vertices.get(&port.anchor).ok_or_else(|| SectorError::AnchorNotOnBoundary(port.anchor.clone()))?;
    let a = c.locate(anchor).filter(|&a| !c.interior(a));
    let Some(a) = a else { return Err(SectorError::AnchorNotOnBoundary(port.anchor.clone())) };
    let ray = c.sweep(a, port.side);
    if ray.is_empty() {
        return Err(SectorError::PortBlocked { anchor: port.anchor.clone() });
    }
    let mut dist = vec![INF; c.len()];
    dist[a] = 0;
    let mut frontier = Vec::new();
    for e in ray {
        dist[e] = 0;
        frontier.push(e);
    }
    let mut level = 0;
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &e in &frontier {
            for d in Dir::ALL {
                for m in c.sweep(e, d) {
                    if dist[m] == INF {
                        dist[m] = level + 1;
                        next.push(m);
                    }
                }
            }
        }
        frontier = next;
        level += 1;
    }
    let mut interfaces: Vec<Vec<usize>> = vec![Vec::new(); level as usize + 1];
    for e in 0..c.len() {
        if !c.interior(e) || dist[e] == 0 || dist[e] == INF || c.kind(e) == CellKind::Face {
            continue;
        }
        if c.kind(e) == CellKind::Node {
            continue;
        }
        if c.neighbors(e).any(|(_, m)| dist[m] + 1 == dist[e]) {
            interfaces[dist[e] as usize].push(e);
        }
    }
    Ok(BendField { port: port.clone(), dist, interfaces })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Degenerate {
    None,
    Segment,
    Point,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sector {
    pub id: usize,
    pub elements: Vec<usize>,
    pub bvect: Vec<u32>,
    pub degenerate: Degenerate,
    pub baseline: Option<AxisSegment>,
    pub xi_max: usize,
}

/// Sectors as vertices; edges carry the directions in which one sector sees the other.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SectorGraph {
    pub n: usize,
    /// Key `(a, b)` with `a < b`; directions point from `a` to `b`.
    pub edges: BTreeMap<(usize, usize), BTreeSet<Dir>>,
}

impl SectorGraph {
    pub fn new(n: usize) -> SectorGraph {
        SectorGraph { n, edges: BTreeMap::new() }
    }

    pub fn add(&mut self, a: usize, b: usize, d: Dir) {
        let (key, d) = if a < b { ((a, b), d) } else { ((b, a), d.opposite()) };
        self.edges.entry(key).or_default().insert(d);
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.edges.contains_key(&(a.min(b), a.max(b)))
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        self.edges
            .keys()
            .filter_map(|&(a, b)| {
                if a == v {
                    Some(b)
                } else if b == v {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in self.edges.keys() {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let adj = self.adjacency();
        let mut seen = vec![false; self.n];
        seen[0] = true;
        let mut queue = VecDeque::from([0]);
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == self.n
    }

    pub fn is_tree(&self) -> bool {
        self.is_connected() && self.edges.len() + 1 == self.n.max(1)
    }
}

/// Sectors of a complex for a list of bend fields.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Decomposition {
    pub sectors: Vec<Sector>,
    pub graph: SectorGraph,
    /// Sector of each element; `INF` on the boundary.
    pub sector_of: Vec<u32>,
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    let mut y = x;
    while parent[y] != r {
        let next = parent[y];
        parent[y] = r;
        y = next;
    }
    r
}

pub fn bvect(fields: &[BendField], e: usize) -> Vec<u32> {
    fields.iter().map(|f| f.dist[e]).collect()
}

pub fn sectors(c: &CellComplex, fields: &[BendField]) -> Result<Decomposition, SectorError> {
    let n = c.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for e in 0..n {
        if !c.interior(e) {
            continue;
        }
        for (_, m) in c.neighbors(e) {
            if m > e && fields.iter().all(|f| f.dist[e] == f.dist[m]) {
                let (a, b) = (find(&mut parent, e), find(&mut parent, m));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut id_of_root: BTreeMap<usize, usize> = BTreeMap::new();
    let mut sector_of = vec![INF; n];
    let mut members: Vec<Vec<usize>> = Vec::new();
    for e in 0..n {
        if !c.interior(e) {
            continue;
        }
        let r = find(&mut parent, e);
        let id = *id_of_root.entry(r).or_insert_with(|| {
            members.push(Vec::new());
            members.len() - 1
        });
        sector_of[e] = id as u32;
        members[id].push(e);
    }
    let mut graph = SectorGraph::new(members.len());
    for e in 0..n {
        if !c.interior(e) {
            continue;
        }
        for (d, m) in c.neighbors(e) {
            let (a, b) = (sector_of[e] as usize, sector_of[m] as usize);
            if a != b {
                graph.add(a, b, d);
            }
        }
    }
    let mut out = Vec::with_capacity(members.len());
    for (id, elements) in members.into_iter().enumerate() {
        let faces = elements.iter().filter(|e| c.kind(**e) == CellKind::Face).count();
        let degenerate = if faces > 0 {
            Degenerate::None
        } else if elements.len() == 1 && c.kind(elements[0]) == CellKind::Node {
            Degenerate::Point
        } else {
            Degenerate::Segment
        };
        let mut s = Sector { id, bvect: bvect(fields, elements[0]), elements, degenerate, baseline: None, xi_max: 1 };
        let (xi, base) = local_maxima(c, &s)?;
        s.xi_max = xi;
        s.baseline = base;
        out.push(s);
    }
    Ok(Decomposition { sectors: out, graph, sector_of })
}

/// Number of plateaus higher than both neighbours, the ends counting as zero.
pub fn histogram_maxima(heights: &[i64]) -> usize {
    let mut plateaus: Vec<i64> = Vec::new();
    for &h in heights {
        if plateaus.last() != Some(&h) {
            plateaus.push(h);
        }
    }
    let at = |i: isize| if i < 0 || i as usize >= plateaus.len() { i64::MIN } else { plateaus[i as usize] };
    (0..plateaus.len() as isize).filter(|&i| at(i) > at(i - 1) && at(i) > at(i + 1)).count()
}

/// Maps a cell to (column, height) for a baseline on side `d` of the sector.
fn orient(c: Cell, d: Dir) -> (i64, i64) {
    let (i, j) = (c.0 as i64, c.1 as i64);
    match d {
        Dir::S => (i, j),
        Dir::N => (i, -j),
        Dir::W => (j, i),
        Dir::E => (j, -i),
    }
}

/// Local maxima of a sector and the baseline achieving the fewest.
pub fn local_maxima(c: &CellComplex, s: &Sector) -> Result<(usize, Option<AxisSegment>), SectorError> {
    if s.degenerate != Degenerate::None {
        return Ok((1, None));
    }
    let cells: BTreeSet<Cell> = s.elements.iter().map(|e| c.elements[*e]).collect();
    let faces: Vec<Cell> = cells.iter().copied().filter(|x| x.0 % 2 == 0 && x.1 % 2 == 0).collect();
    let oriented_set: BTreeMap<Dir, BTreeSet<(i64, i64)>> =
        Dir::ALL.into_iter().map(|d| (d, cells.iter().map(|x| orient(*x, d)).collect())).collect();
    let mut best: Option<(usize, AxisSegment)> = None;
    for d in Dir::ALL {
        let set = &oriented_set[&d];
        let mut cols: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
        for f in &faces {
            let (a, b) = orient(*f, d);
            cols.entry(a).or_default().push(b);
        }
        let base = cols.values().flatten().copied().min().unwrap();
        let keys: Vec<i64> = cols.keys().copied().collect();
        if keys.windows(2).any(|w| w[1] - w[0] != 2) {
            continue;
        }
        let mut heights = Vec::new();
        let mut ok = true;
        for (a, bs) in &mut cols {
            bs.sort();
            let top = *bs.last().unwrap();
            let expected = ((top - base) / 2 + 1) as usize;
            if bs[0] != base || bs.len() != expected || (base..top).any(|b| !set.contains(&(*a, b))) {
                ok = false;
                break;
            }
            heights.push(top);
        }
        if !ok {
            continue;
        }
        let xi = histogram_maxima(&heights);
        let base_cells: Vec<usize> =
            s.elements.iter().copied().filter(|e| faces.contains(&c.elements[*e]) && orient(c.elements[*e], d).1 == base).collect();
        let seg = side_segment(c, &base_cells, d);
        if best.as_ref().map_or(true, |(b, _)| xi < *b) {
            best = Some((xi, seg));
        }
    }
    match best {
        Some((xi, seg)) => Ok((xi, Some(seg))),
        None => Err(SectorError::NoBaseline(s.id)),
    }
}

/// Union of the `d` sides of a row of 2-cells.
fn side_segment(c: &CellComplex, cells: &[usize], d: Dir) -> AxisSegment {
    let xs: Vec<(Rat, Rat)> = cells.iter().map(|e| c.x_span(*e)).collect();
    let ys: Vec<(Rat, Rat)> = cells.iter().map(|e| c.y_span(*e)).collect();
    let (x0, x1) = (xs.iter().map(|s| s.0).min().unwrap(), xs.iter().map(|s| s.1).max().unwrap());
    let (y0, y1) = (ys.iter().map(|s| s.0).min().unwrap(), ys.iter().map(|s| s.1).max().unwrap());
    let (a, b) = match d {
        Dir::S => (Point { x: x0, y: y0 }, Point { x: x1, y: y0 }),
        Dir::N => (Point { x: x0, y: y1 }, Point { x: x1, y: y1 }),
        Dir::W => (Point { x: x0, y: y0 }, Point { x: x0, y: y1 }),
        Dir::E => (Point { x: x1, y: y0 }, Point { x: x1, y: y1 }),
    };
    AxisSegment { a, b }
}

/// Reflex corners of the face touching two or more sectors.
pub fn critical_corners(c: &CellComplex, dec: &Decomposition, reflex: &[Point]) -> Vec<Point> {
    reflex
        .iter()
        .copied()
        .filter(|p| {
            let node = c.region.arr.locate(p);
            let near: BTreeSet<u32> = c
                .region
                .arr
                .ring(node)
                .into_iter()
                .filter_map(|n| c.element_at(n))
                .filter(|e| c.interior(*e))
                .map(|e| dec.sector_of[e])
                .collect();
            near.len() >= 2
        })
        .collect()
}

/// Critical corners a ray from sector `s` reaches travelling in direction `d`.
pub fn sd_critical(c: &CellComplex, dec: &Decomposition, critical: &[Point], s: usize, d: Dir) -> Vec<Point> {
    let nodes: BTreeMap<Cell, Point> = critical.iter().map(|p| (c.region.arr.locate(p), *p)).collect();
    let mut out = BTreeSet::new();
    for &e in &dec.sectors[s].elements {
        if let Some(h) = c.hit(e, d) {
            if let Some(p) = nodes.get(&h) {
                out.insert(*p);
            }
        }
    }
    out.into_iter().collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Subsector {
    pub id: usize,
    pub sector: usize,
    pub elements: Vec<usize>,
    pub i_span: (usize, usize),
    pub j_span: (usize, usize),
}

/// Splits every sector along the lines through its critical corners.
/// Elements on a cut line join a neighbouring piece.
pub fn refine_subsectors(c: &CellComplex, dec: &Decomposition, reflex: &[Point]) -> Vec<Subsector> {
    let critical = critical_corners(c, dec, reflex);
    let mut out = Vec::new();
    for s in &dec.sectors {
        let mut cut_rows = BTreeSet::new();
        let mut cut_cols = BTreeSet::new();
        for d in Dir::ALL {
            for p in sd_critical(c, dec, &critical, s.id, d) {
                let node = c.region.arr.locate(&p);
                if d.is_horizontal() {
                    cut_rows.insert(node.1);
                } else {
                    cut_cols.insert(node.0);
                }
            }
        }
        let members: BTreeSet<usize> = s.elements.iter().copied().collect();
        let on_cut = |e: usize| {
            let (i, j) = c.elements[e];
            cut_rows.contains(&j) || cut_cols.contains(&i)
        };
        let mut group: BTreeMap<usize, usize> = BTreeMap::new();
        let mut n_groups = 0;
        for &e in &s.elements {
            if on_cut(e) || group.contains_key(&e) {
                continue;
            }
            group.insert(e, n_groups);
            let mut queue = VecDeque::from([e]);
            while let Some(x) = queue.pop_front() {
                for (_, m) in c.neighbors(x) {
                    if members.contains(&m) && !on_cut(m) && !group.contains_key(&m) {
                        group.insert(m, n_groups);
                        queue.push_back(m);
                    }
                }
            }
            n_groups += 1;
        }
        if n_groups == 0 {
            for &e in &s.elements {
                group.insert(e, 0);
            }
            n_groups = 1;
        }
        // attach cut elements, preferring the piece below or to the left
        loop {
            let mut changed = false;
            for &e in &s.elements {
                if group.contains_key(&e) {
                    continue;
                }
                let pick = [Dir::S, Dir::W, Dir::N, Dir::E].into_iter().find_map(|d| {
                    let n = c.region.arr.step(c.elements[e], d)?;
                    let m = c.element_at(n)?;
                    if members.contains(&m) {
                        group.get(&m).copied()
                    } else {
                        None
                    }
                });
                if let Some(g) = pick {
                    group.insert(e, g);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let mut pieces: Vec<Vec<usize>> = vec![Vec::new(); n_groups];
        for &e in &s.elements {
            pieces[*group.get(&e).unwrap_or(&0)].push(e);
        }
        for elements in pieces.into_iter().filter(|p| !p.is_empty()) {
            let is: Vec<usize> = elements.iter().map(|e| c.elements[*e].0).collect();
            let js: Vec<usize> = elements.iter().map(|e| c.elements[*e].1).collect();
            out.push(Subsector {
                id: out.len(),
                sector: s.id,
                i_span: (*is.iter().min().unwrap(), *is.iter().max().unwrap()),
                j_span: (*js.iter().min().unwrap(), *js.iter().max().unwrap()),
                elements,
            });
        }
    }
    out
}

pub fn subgridsize(k: u64) -> u64 {
    112 * k * k * k + 202 * k * k + 85 * k
}

/// Bound on grid points per sector: `subgridsize(k)^2` per subsector, `(8k)^2` subsectors.
pub fn gridsize(k: u64) -> u128 {
    let s = subgridsize(k) as u128;
    let sub = (8 * k) as u128;
    s * s * sub * sub
}

/// Offsets in `[-1/2, 1/2]`; the first `m` of them form the grid for scale `m`,
/// so larger scales always contain smaller ones.
pub fn grid_offsets(m: usize) -> Vec<Rat> {
    let mut out = vec![Rat::zero()];
    let mut level = 1i128;
    while out.len() < m {
        let den = 1i128 << (level + 1);
        let mut num = 1;
        while num < den / 2 && out.len() < m {
            out.push(Rat::new(num, den));
            if out.len() < m {
                out.push(Rat::new(-num, den));
            }
            num += 2;
        }
        if level == 1 && out.len() < m {
            out.push(Rat::new(1, 2));
            if out.len() < m {
                out.push(Rat::new(-1, 2));
            }
        }
        level += 1;
    }
    out.truncate(m);
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SectorGrid {
    pub m: usize,
    pub eps: Rat,
    /// Skeleton point of each subsector.
    pub centers: Vec<Point>,
    pub points: Vec<Vec<Point>>,
}

impl SectorGrid {
    pub fn all_points(&self) -> impl Iterator<Item = (usize, &Point)> {
        self.points.iter().enumerate().flat_map(|(v, ps)| ps.iter().map(move |p| (v, p)))
    }
}

fn middle_index(lo: usize, hi: usize) -> usize {
    let evens: Vec<usize> = (lo..=hi).filter(|i| i % 2 == 0).collect();
    if evens.is_empty() {
        lo + (hi - lo) / 2
    } else {
        evens[evens.len() / 2]
    }
}

pub fn sector_grid(c: &CellComplex, subs: &[Subsector], m: usize) -> SectorGrid {
    let m = m.max(1);
    let arr = &c.region.arr;
    let mut centers = Vec::new();
    let mut center_cells = Vec::new();
    for v in subs {
        let cell = (middle_index(v.i_span.0, v.i_span.1), middle_index(v.j_span.0, v.j_span.1));
        let inside = c.element_at(cell).is_some_and(|e| v.elements.contains(&e));
        let cell = if inside {
            cell
        } else {
            let pick = v.elements.iter().find(|e| c.kind(**e) == CellKind::Face).unwrap_or(&v.elements[0]);
            c.elements[*pick]
        };
        centers.push(arr.rep(cell));
        center_cells.push(cell);
    }
    let mut clearance: Option<Rat> = None;
    for (p, cell) in centers.iter().zip(&center_cells) {
        if cell.0 % 2 == 0 {
            let (lo, hi) = arr.x_span(cell.0).expect("bounded");
            let cl = (p.x - lo).min(hi - p.x);
            clearance = Some(clearance.map_or(cl, |c| c.min(cl)));
        }
        if cell.1 % 2 == 0 {
            let (lo, hi) = arr.y_span(cell.1).expect("bounded");
            let cl = (p.y - lo).min(hi - p.y);
            clearance = Some(clearance.map_or(cl, |c| c.min(cl)));
        }
    }
    let offsets = grid_offsets(m);
    let mut eps = clearance.unwrap_or(Rat::one()) / Rat::int(4);
    let build = |eps: Rat| -> Vec<Vec<Point>> {
        centers
            .iter()
            .zip(&center_cells)
            .map(|(p, cell)| {
                let dx: Vec<Rat> = if cell.0 % 2 == 0 { offsets.clone() } else { vec![Rat::zero()] };
                let dy: Vec<Rat> = if cell.1 % 2 == 0 { offsets.clone() } else { vec![Rat::zero()] };
                let mut pts = Vec::new();
                for oy in &dy {
                    for ox in &dx {
                        pts.push(Point { x: p.x + *ox * eps, y: p.y + *oy * eps });
                    }
                }
                pts
            })
            .collect()
    };
    loop {
        let points = build(eps);
        // every point stays in the cell of its skeleton point, so all
        // projections meet the same boundary segments
        let ok = points.iter().zip(&center_cells).all(|(ps, cell)| ps.iter().all(|q| arr.locate(q) == *cell));
        if ok {
            return SectorGrid { m, eps, centers, points };
        }
        eps = eps.half();
    }
}

/// Everything the solver needs about one face instance.
#[derive(Clone, Debug)]
pub struct SectorComplex {
    pub complex: CellComplex,
    pub fields: Vec<BendField>,
    pub dec: Decomposition,
    pub reflex: Vec<Point>,
    pub subsectors: Vec<Subsector>,
}

impl SectorComplex {
    pub fn build(fi: &FaceInstance) -> Result<SectorComplex, SectorError> {
        let complex = CellComplex::build(fi)?;
        let fields = fi.ports.iter().map(|p| bend_field(&complex, p)).collect::<Result<Vec<_>, _>>()?;
        let dec = sectors(&complex, &fields)?;
        let reflex: Vec<Point> = reflex_corners(fi).into_iter().map(|r| r.point).collect();
        let subsectors = refine_subsectors(&complex, &dec, &reflex);
        Ok(SectorComplex { complex, fields, dec, reflex, subsectors })
    }

    /// Sectors for the first `t` ports only.
    pub fn prefix(&self, t: usize) -> Result<Decomposition, SectorError> {
        sectors(&self.complex, &self.fields[..t])
    }

    pub fn subsector_of_element(&self) -> Vec<u32> {
        let mut out = vec![INF; self.complex.len()];
        for v in &self.subsectors {
            for &e in &v.elements {
                out[e] = v.id as u32;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drawing::{edge_key, Drawing};
    use proptest::prelude::*;

    fn p(x: i64, y: i64) -> Point {
        Point::new(x, y)
    }

    fn face(pts: &[Point], anchors: &[(Point, Dir)]) -> FaceInstance {
        let mut d = Drawing::new();
        let mut ring: Vec<(String, Point)> = Vec::new();
        for (i, q) in pts.iter().enumerate() {
            ring.push((format!("c{i}"), *q));
            let next = pts[(i + 1) % pts.len()];
            for (k, (a, _)) in anchors.iter().enumerate() {
                let on = AxisSegment { a: *q, b: next }.contains_in_interior(a);
                if on {
                    ring.push((format!("a{k}"), *a));
                }
            }
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
        for (a, side) in anchors.iter() {
            let id = ring.iter().find(|(_, q)| q == a).unwrap().0.clone();
            let e = edge_key(&id, "x");
            edges.push(e.clone());
            ports.push(PortCandidate { anchor: id, side: *side, edge: e });
        }
        FaceInstance {
            drawing: d,
            seed: pts[0].translate(Rat::new(1, 2), Rat::new(1, 2)),
            outer: false,
            missing_vertices: vec!["x".into()],
            missing_edges: edges,
            ports,
            must_bend: BTreeSet::new(),
            dummies: BTreeSet::new(),
            frame: None,
        }
    }

    fn rect_top_port() -> FaceInstance {
        face(&[p(0, 0), p(4, 0), p(4, 4), p(0, 4)], &[(p(2, 4), Dir::S)])
    }

    #[test]
    fn unit_square_complex() {
        let fi = face(&[p(0, 0), p(1, 0), p(1, 1), p(0, 1)], &[]);
        let c = CellComplex::build(&fi).unwrap();
        let interior = (0..c.len()).filter(|e| c.interior(*e)).count();
        assert_eq!(interior, 1);
        assert_eq!(c.len(), 9);
    }

    #[test]
    fn rectangle_field_and_sectors() {
        let fi = rect_top_port();
        let sc = SectorComplex::build(&fi).unwrap();
        let f = &sc.fields[0];
        for e in 0..sc.complex.len() {
            if !sc.complex.interior(e) {
                continue;
            }
            let on_ray = sc.complex.rep(e).x == Rat::int(2);
            assert_eq!(f.dist[e], if on_ray { 0 } else { 1 });
        }
        assert_eq!(sc.dec.sectors.len(), 3);
        assert!(sc.dec.graph.is_tree());
        let degenerate: Vec<_> = sc.dec.sectors.iter().filter(|s| s.degenerate == Degenerate::Segment).collect();
        assert_eq!(degenerate.len(), 1);
        assert_eq!(degenerate[0].bvect, vec![0]);
        for s in &sc.dec.sectors {
            assert_eq!(s.xi_max, 1);
        }
    }

    #[test]
    fn hidden_arm_is_two_bends_away() {
        // L with the port at the top of the vertical arm, pointing down
        let fi = face(&[p(0, 0), p(6, 0), p(6, 2), p(2, 2), p(2, 6), p(0, 6)], &[(p(1, 6), Dir::S)]);
        let sc = SectorComplex::build(&fi).unwrap();
        let e = sc.complex.locate(&p(5, 1)).unwrap();
        assert_eq!(sc.fields[0].dist[e], 1);
        // port on the right end pointing left sees the arm top only around the corner
        let fi = face(&[p(0, 0), p(6, 0), p(6, 2), p(2, 2), p(2, 6), p(0, 6)], &[(p(6, 1), Dir::W)]);
        let sc = SectorComplex::build(&fi).unwrap();
        let e = sc.complex.locate(&p(1, 5)).unwrap();
        assert_eq!(sc.fields[0].dist[e], 1);
        let fi = face(&[p(0, 0), p(6, 0), p(6, 2), p(2, 2), p(2, 6), p(0, 6)], &[(p(4, 2), Dir::S)]);
        let sc = SectorComplex::build(&fi).unwrap();
        let e = sc.complex.locate(&Point::new(1, 5)).unwrap();
        assert_eq!(sc.fields[0].dist[e], 2);
    }

    #[test]
    fn blocked_port() {
        let fi = face(&[p(0, 0), p(4, 0), p(4, 4), p(0, 4)], &[(p(2, 4), Dir::N)]);
        let c = CellComplex::build(&fi).unwrap();
        assert!(matches!(bend_field(&c, &fi.ports[0]), Err(SectorError::PortBlocked { .. })));
    }

    #[test]
    fn maxima_of_histograms() {
        assert_eq!(histogram_maxima(&[3]), 1);
        assert_eq!(histogram_maxima(&[1, 3, 3, 1, 2]), 2);
        assert_eq!(histogram_maxima(&[1, 2, 3]), 1);
        // six peaks
        assert_eq!(histogram_maxima(&[2, 1, 3, 1, 4, 2, 5, 1, 2, 1, 3]), 6);
    }

    fn independent_counts(h: &[i64]) -> (usize, usize) {
        // count turns walking the top outline: a maximum is a plateau entered
        // going up and left going down, a minimum the reverse
        let mut up_then_down = 0;
        let mut down_then_up = 0;
        let mut last_move = 1i32;
        let padded: Vec<i64> = std::iter::once(0).chain(h.iter().copied()).chain([0]).collect();
        for w in padded.windows(2) {
            let mv = (w[1] - w[0]).signum() as i32;
            if mv == 0 {
                continue;
            }
            if last_move > 0 && mv < 0 {
                up_then_down += 1;
            }
            if last_move < 0 && mv > 0 {
                down_then_up += 1;
            }
            last_move = mv;
        }
        (up_then_down, down_then_up)
    }

    proptest! {
        #[test]
        fn maxima_exceed_minima_by_one(h in proptest::collection::vec(1i64..6, 1..12)) {
            let (max, min) = independent_counts(&h);
            prop_assert_eq!(histogram_maxima(&h), max);
            prop_assert_eq!(max, min + 1);
        }
    }

    #[test]
    fn formulas() {
        assert_eq!(subgridsize(1), 399);
        assert_eq!(subgridsize(2), 1874);
        assert_eq!(gridsize(1), 399u128 * 399 * 64);
    }

    #[test]
    fn offsets_are_nested_and_bounded() {
        for m in 1..20 {
            let a = grid_offsets(m);
            let b = grid_offsets(m + 1);
            assert_eq!(a.len(), m);
            assert_eq!(&b[..m], &a[..]);
            let set: BTreeSet<Rat> = b.iter().copied().collect();
            assert_eq!(set.len(), m + 1);
            assert!(b.iter().all(|o| o.abs() <= Rat::new(1, 2)));
        }
        assert_eq!(grid_offsets(1), vec![Rat::zero()]);
    }

    #[test]
    fn grid_points_stay_in_subsectors() {
        let fi = face(&[p(0, 0), p(6, 0), p(6, 2), p(2, 2), p(2, 6), p(0, 6)], &[(p(4, 2), Dir::S), (p(0, 3), Dir::E)]);
        let sc = SectorComplex::build(&fi).unwrap();
        let sub_of = sc.subsector_of_element();
        for m in [1, 2, 5] {
            let g = sector_grid(&sc.complex, &sc.subsectors, m);
            for (v, q) in g.all_points() {
                let e = sc.complex.locate(q).unwrap();
                assert_eq!(sub_of[e], v as u32);
            }
            if m == 1 {
                assert!(g.points.iter().all(|ps| ps.len() == 1));
            }
        }
    }

    #[test]
    fn no_critical_corner_single_subsector() {
        let sc = SectorComplex::build(&rect_top_port()).unwrap();
        assert_eq!(sc.subsectors.len(), sc.dec.sectors.len());
    }
}
