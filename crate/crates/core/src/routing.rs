//! Routing graph over the sector grid, and exhaustive enumeration of the
//! ways a solution can look inside one sector.
//!
//! Routing lines run through every grid point coordinate and every anchor.
//! Nodes sit where a routing line meets another routing line (bends allowed)
//! or an arrangement line (pass-through only). Missing vertices go on grid
//! points. Each node and each routing edge lies in one complex element and is
//! owned by that element's sector; an edge whose end lies in another sector
//! forms a stub, the place where two local solutions have to agree.

use std::collections::{BTreeSet, HashMap};

use crate::error::SolveError;
use crate::geom::{Dir, Point, Rat};
use crate::instance::{EdgeEnd, FaceInstance};
use crate::sector::{SectorComplex, SectorGrid};

pub const NONE: u32 = u32::MAX;

#[derive(Clone, Debug)]
pub struct RNode {
    pub pt: Point,
    /// Owning sector, `NONE` for anchor terminals.
    pub owner: u32,
    pub bend_ok: bool,
    pub place_ok: bool,
    pub port: Option<usize>,
    /// Incident routing edge per `Dir::index`, `NONE` if absent.
    pub adj: [u32; 4],
}

#[derive(Clone, Debug)]
pub struct REdge {
    /// `ends[1]` lies in direction `dir` from `ends[0]`.
    pub ends: [usize; 2],
    pub dir: Dir,
    pub owner: u32,
}

impl REdge {
    pub fn other(&self, n: usize) -> usize {
        if self.ends[0] == n {
            self.ends[1]
        } else {
            self.ends[0]
        }
    }

    /// Heading when traversing the edge away from `n`.
    pub fn heading_from(&self, n: usize) -> Dir {
        if self.ends[0] == n {
            self.dir
        } else {
            self.dir.opposite()
        }
    }
}

#[derive(Clone, Debug)]
pub struct Stub {
    pub node: usize,
    pub edge: usize,
    /// `(sector, position in its view)` for the node side and the edge side.
    pub sides: [(usize, usize); 2],
}

#[derive(Clone, Debug, Default)]
pub struct SectorView {
    pub nodes: Vec<usize>,
    pub edges: Vec<usize>,
    pub places: Vec<usize>,
    pub stubs: Vec<usize>,
    /// Ports whose first routing edge this sector owns.
    pub ports: Vec<usize>,
    stub_pos: HashMap<(usize, usize), usize>,
}

impl SectorView {
    pub fn stub_at(&self, node: usize, edge: usize) -> Option<usize> {
        self.stub_pos.get(&(node, edge)).copied()
    }
}

#[derive(Clone, Debug)]
pub struct RoutingGraph {
    pub nodes: Vec<RNode>,
    pub edges: Vec<REdge>,
    pub stubs: Vec<Stub>,
    pub views: Vec<SectorView>,
    /// Terminal node of each port.
    pub anchors: Vec<usize>,
}

/// Endpoints and incidences of the missing edges, by index.
#[derive(Clone, Debug)]
pub struct Terminals {
    pub ends: Vec<[EdgeEnd; 2]>,
    pub vertex_edges: Vec<Vec<usize>>,
    pub must_bend: Vec<bool>,
    pub port_edge: Vec<usize>,
}

impl Terminals {
    pub fn new(fi: &FaceInstance) -> Result<Terminals, SolveError> {
        let ends = (0..fi.missing_edges.len()).map(|e| fi.ends(e)).collect::<Result<Vec<_>, _>>()?;
        let vertex_edges = (0..fi.k()).map(|x| fi.edges_at(x)).collect();
        let must_bend = fi.missing_vertices.iter().map(|x| fi.must_bend.contains(x)).collect();
        let port_edge = fi
            .ports
            .iter()
            .map(|p| fi.missing_edges.iter().position(|e| *e == p.edge))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| SolveError::Internal("port names an unknown edge".into()))?;
        Ok(Terminals { ends, vertex_edges, must_bend, port_edge })
    }
}

impl RoutingGraph {
    pub fn build(fi: &FaceInstance, sc: &SectorComplex, grid: &SectorGrid) -> Result<RoutingGraph, SolveError> {
        let c = &sc.complex;
        let arr = &c.region.arr;
        let dec = &sc.dec;
        let mut rx: BTreeSet<Rat> = BTreeSet::new();
        let mut ry: BTreeSet<Rat> = BTreeSet::new();
        let mut places: BTreeSet<Point> = BTreeSet::new();
        for (_, p) in grid.all_points() {
            rx.insert(p.x);
            ry.insert(p.y);
            places.insert(*p);
        }
        let anchor_pts: Vec<Point> = fi
            .ports
            .iter()
            .map(|p| {
                fi.drawing.vertices.get(&p.anchor).copied().ok_or_else(|| SolveError::Internal(format!("anchor {}", p.anchor)))
            })
            .collect::<Result<_, _>>()?;
        for a in &anchor_pts {
            rx.insert(a.x);
            ry.insert(a.y);
        }
        let all_x: Vec<Rat> = rx.iter().chain(arr.xs.iter()).copied().collect::<BTreeSet<_>>().into_iter().collect();
        let all_y: Vec<Rat> = ry.iter().chain(arr.ys.iter()).copied().collect::<BTreeSet<_>>().into_iter().collect();

        let owner_at = |p: &Point| -> Option<u32> {
            let e = c.locate(p)?;
            if c.interior(e) {
                Some(dec.sector_of[e])
            } else {
                None
            }
        };
        let mut nodes: Vec<RNode> = Vec::new();
        let mut index: HashMap<Point, usize> = HashMap::new();
        for &x in &all_x {
            for &y in &all_y {
                let (bx, by) = (rx.contains(&x), ry.contains(&y));
                if !bx && !by {
                    continue;
                }
                let pt = Point { x, y };
                let Some(owner) = owner_at(&pt) else { continue };
                index.insert(pt, nodes.len());
                nodes.push(RNode {
                    pt,
                    owner,
                    bend_ok: bx && by,
                    place_ok: places.contains(&pt),
                    port: None,
                    adj: [NONE; 4],
                });
            }
        }
        let mut edges: Vec<REdge> = Vec::new();
        let mut link = |nodes: &mut Vec<RNode>, a: usize, b: usize, dir: Dir, owner: u32| {
            let id = edges.len() as u32;
            nodes[a].adj[dir.index()] = id;
            nodes[b].adj[dir.opposite().index()] = id;
            edges.push(REdge { ends: [a, b], dir, owner });
        };
        for &x in &rx {
            for w in all_y.windows(2) {
                let (p, q) = (Point { x, y: w[0] }, Point { x, y: w[1] });
                let (Some(&a), Some(&b)) = (index.get(&p), index.get(&q)) else { continue };
                let Some(owner) = owner_at(&Point { x, y: Rat::mid(w[0], w[1]) }) else { continue };
                link(&mut nodes, a, b, Dir::N, owner);
            }
        }
        for &y in &ry {
            for w in all_x.windows(2) {
                let (p, q) = (Point { x: w[0], y }, Point { x: w[1], y });
                let (Some(&a), Some(&b)) = (index.get(&p), index.get(&q)) else { continue };
                let Some(owner) = owner_at(&Point { x: Rat::mid(w[0], w[1]), y }) else { continue };
                link(&mut nodes, a, b, Dir::E, owner);
            }
        }
        let mut anchors = Vec::new();
        for (pi, (port, a)) in fi.ports.iter().zip(&anchor_pts).enumerate() {
            let d = port.side;
            let next = if d.is_horizontal() {
                let k = all_x.binary_search(&a.x).map_err(|_| SolveError::Internal("anchor off its line".into()))?;
                let k = if d == Dir::E { k.checked_add(1) } else { k.checked_sub(1) };
                k.and_then(|k| all_x.get(k)).map(|&x| Point { x, y: a.y })
            } else {
                let k = all_y.binary_search(&a.y).map_err(|_| SolveError::Internal("anchor off its line".into()))?;
                let k = if d == Dir::N { k.checked_add(1) } else { k.checked_sub(1) };
                k.and_then(|k| all_y.get(k)).map(|&y| Point { x: a.x, y })
            };
            let first = next.and_then(|q| index.get(&q).copied());
            let mid = next.map(|q| Point { x: Rat::mid(a.x, q.x), y: Rat::mid(a.y, q.y) });
            let (Some(first), Some(owner)) = (first, mid.and_then(|m| owner_at(&m))) else {
                return Err(SolveError::Internal(format!("port ray of {} has no routing node", port.anchor)));
            };
            let id = nodes.len();
            nodes.push(RNode { pt: *a, owner: NONE, bend_ok: false, place_ok: false, port: Some(pi), adj: [NONE; 4] });
            if nodes[first].adj[d.opposite().index()] != NONE {
                return Err(SolveError::Internal("port edge collides with a routing edge".into()));
            }
            link(&mut nodes, id, first, d, owner);
            anchors.push(id);
        }

        let n_sec = dec.sectors.len();
        let mut views: Vec<SectorView> = vec![SectorView::default(); n_sec];
        for (i, n) in nodes.iter().enumerate() {
            if n.owner == NONE {
                continue;
            }
            let v = &mut views[n.owner as usize];
            v.nodes.push(i);
            if n.place_ok {
                v.places.push(i);
            }
        }
        let mut stubs = Vec::new();
        for (ei, e) in edges.iter().enumerate() {
            views[e.owner as usize].edges.push(ei);
            for &n in &e.ends {
                let no = nodes[n].owner;
                if no == NONE {
                    views[e.owner as usize].ports.push(nodes[n].port.expect("terminal"));
                    continue;
                }
                if no == e.owner {
                    continue;
                }
                if !dec.graph.adjacent(no as usize, e.owner as usize) {
                    return Err(SolveError::Internal(format!("stub between non-adjacent sectors {no} and {}", e.owner)));
                }
                let id = stubs.len();
                let pa = views[no as usize].stubs.len();
                views[no as usize].stubs.push(id);
                views[no as usize].stub_pos.insert((n, ei), pa);
                let pb = views[e.owner as usize].stubs.len();
                views[e.owner as usize].stubs.push(id);
                views[e.owner as usize].stub_pos.insert((n, ei), pb);
                stubs.push(Stub { node: n, edge: ei, sides: [(no as usize, pa), (e.owner as usize, pb)] });
            }
        }
        for v in &mut views {
            v.ports.sort();
        }
        Ok(RoutingGraph { nodes, edges, stubs, views, anchors })
    }

    /// Position of global stub `st` in the view of sector `s`.
    pub fn stub_pos(&self, st: usize, s: usize) -> usize {
        let sides = &self.stubs[st].sides;
        if sides[0].0 == s {
            sides[0].1
        } else {
            sides[1].1
        }
    }

    /// The sector across stub `st` from `s`.
    pub fn across(&self, st: usize, s: usize) -> (usize, usize) {
        let sides = &self.stubs[st].sides;
        if sides[0].0 == s {
            sides[1]
        } else {
            sides[0]
        }
    }
}

const FAR: u8 = u8::MAX;

/// Lower bounds on the bends of each missing edge, from bend distances to
/// its port terminals in the routing graph with occupancy ignored.
#[derive(Clone, Debug)]
pub struct Bounds {
    /// Per missing edge, per routing edge: bends needed by any route using it.
    pub through: Vec<Vec<u8>>,
    /// Per missing edge, per node: bends needed to reach its vertex end there.
    pub at_node: Vec<Vec<u8>>,
    /// Per routing edge: whether it is horizontal, and the id of its line.
    pub line: Vec<(bool, u32)>,
    pub lines: usize,
}

/// Bends of a path whose horizontal parts lie on `h` distinct lines and
/// whose vertical parts lie on `v`: segments alternate, so there are at
/// least `h + v` of them and neither kind can outnumber the other by two.
pub fn line_bound(h: u32, v: u32) -> u32 {
    if h + v == 0 {
        return 0;
    }
    (h + v - 1).max((2 * h.max(v)).saturating_sub(2))
}

impl Bounds {
    pub fn new(g: &RoutingGraph, t: &Terminals) -> Bounds {
        let from_port: Vec<Vec<u8>> = (0..g.anchors.len()).map(|p| port_distances(g, p)).collect();
        let ne = g.edges.len();
        let node_dist = |d: &[u8]| -> Vec<u8> {
            let mut out = vec![FAR; g.nodes.len()];
            for (r, e) in g.edges.iter().enumerate() {
                // state 2r travels along `dir`, 2r + 1 against it
                out[e.ends[1]] = out[e.ends[1]].min(d[2 * r]);
                out[e.ends[0]] = out[e.ends[0]].min(d[2 * r + 1]);
            }
            out
        };
        let mut through = Vec::new();
        let mut at_node = Vec::new();
        for ends in &t.ends {
            let ports: Vec<usize> =
                ends.iter().filter_map(|x| if let EdgeEnd::Port(p) = x { Some(*p) } else { None }).collect();
            let th: Vec<u8> = match ports.as_slice() {
                [] => vec![0; ne],
                [p] => (0..ne).map(|r| from_port[*p][2 * r].min(from_port[*p][2 * r + 1])).collect(),
                [p, q, ..] => (0..ne)
                    .map(|r| {
                        let (a, b) = (&from_port[*p], &from_port[*q]);
                        let one = a[2 * r].saturating_add(b[2 * r + 1]);
                        let two = a[2 * r + 1].saturating_add(b[2 * r]);
                        one.min(two)
                    })
                    .collect(),
            };
            through.push(th);
            at_node.push(match ports.as_slice() {
                [p] => node_dist(&from_port[*p]),
                _ => vec![0; g.nodes.len()],
            });
        }
        let mut ids: HashMap<(bool, Rat), u32> = HashMap::new();
        let line = g
            .edges
            .iter()
            .map(|r| {
                let horizontal = r.dir.is_horizontal();
                let at = g.nodes[r.ends[0]].pt;
                let c = if horizontal { at.y } else { at.x };
                let n = ids.len() as u32;
                (horizontal, *ids.entry((horizontal, c)).or_insert(n))
            })
            .collect();
        Bounds { through, at_node, line, lines: ids.len() }
    }
}

/// 0-1 BFS from the terminal of port `p` over (routing edge, orientation).
fn port_distances(g: &RoutingGraph, p: usize) -> Vec<u8> {
    let mut dist = vec![FAR; 2 * g.edges.len()];
    let a = g.anchors[p];
    let Some(first) = g.nodes[a].adj.iter().copied().find(|r| *r != NONE) else { return dist };
    let state = |r: usize, from: usize| -> usize { 2 * r + usize::from(g.edges[r].ends[0] != from) };
    let mut dq = std::collections::VecDeque::new();
    let s0 = state(first as usize, a);
    dist[s0] = 0;
    dq.push_back(s0);
    while let Some(st) = dq.pop_front() {
        let (r, back) = (st / 2, st % 2 == 1);
        let e = &g.edges[r];
        let (v, h) = if back { (e.ends[0], e.dir.opposite()) } else { (e.ends[1], e.dir) };
        let node = &g.nodes[v];
        if node.owner == NONE {
            continue;
        }
        for d2 in [h, h.cw(), h.ccw()] {
            let r2 = node.adj[d2.index()];
            if r2 == NONE {
                continue;
            }
            let cost = u8::from(d2 != h);
            if cost == 1 && !node.bend_ok {
                continue;
            }
            let nd = dist[st].saturating_add(cost);
            let s2 = state(r2 as usize, v);
            if nd < dist[s2] {
                dist[s2] = nd;
                if cost == 0 {
                    dq.push_front(s2);
                } else {
                    dq.push_back(s2);
                }
            }
        }
    }
    dist
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Label {
    Free,
    Vertex(u8),
    Edge(u8),
}

/// One way a solution can meet a sector. Stub labels are `0` for unused
/// and `e + 1` for missing edge `e`; the witness is kept for reconstruction.
#[derive(Clone, Debug)]
pub struct LocalSolution {
    pub stubs: Vec<u8>,
    pub placed: u32,
    pub bends: u32,
    /// Per missing edge, the bend bound implied by what this solution uses.
    pub lbs: Vec<u8>,
    pub nodes: Vec<(u32, Label)>,
    pub edges: Vec<(u32, u8)>,
}

#[derive(Clone, Copy, Debug)]
enum TermKind {
    Vertex(usize),
    Port(usize),
}

#[derive(Clone, Debug)]
struct Term {
    kind: TermKind,
    node: usize,
    edge: usize,
    done: bool,
    leave: Option<Dir>,
}

#[derive(Clone, Copy, Debug)]
enum Phase {
    Terms,
    Stubs(usize),
}

/// Depth-first enumeration for one sector. Placements first, then one piece
/// from each pending terminal, then pieces joining stubs in increasing order,
/// so every configuration is produced once.
pub struct Enumerator<'a> {
    g: &'a RoutingGraph,
    t: &'a Terminals,
    b: &'a Bounds,
    s: u32,
    view: &'a SectorView,
    fixed: &'a [Option<u8>],
    cap: u32,
    steps: u64,
    limit: u64,
    node_lab: Vec<Label>,
    edge_lab: Vec<u8>,
    stub_lab: Vec<Option<u8>>,
    at: Vec<Option<usize>>,
    terms: Vec<Term>,
    bends: u32,
    /// Distance bound per missing edge.
    lb: Vec<u8>,
    /// Per missing edge: routing edges used on each line, and lines used per axis.
    on_line: Vec<Vec<u16>>,
    axis: Vec<[u32; 2]>,
    lb_sum: u32,
    found: HashMap<(Vec<u8>, u32), LocalSolution>,
}

impl<'a> Enumerator<'a> {
    pub fn new(
        g: &'a RoutingGraph,
        t: &'a Terminals,
        b: &'a Bounds,
        s: usize,
        fixed: &'a [Option<u8>],
        cap: u32,
        limit: u64,
    ) -> Enumerator<'a> {
        let view = &g.views[s];
        Enumerator {
            g,
            t,
            b,
            s: s as u32,
            view,
            fixed,
            cap,
            steps: 0,
            limit,
            node_lab: vec![Label::Free; g.nodes.len()],
            edge_lab: vec![0; g.edges.len()],
            stub_lab: vec![None; view.stubs.len()],
            at: vec![None; t.vertex_edges.len()],
            terms: Vec::new(),
            bends: 0,
            lb: vec![0; t.ends.len()],
            on_line: vec![vec![0; b.lines]; t.ends.len()],
            axis: vec![[0, 0]; t.ends.len()],
            lb_sum: 0,
            found: HashMap::new(),
        }
    }

    /// All local solutions, one per interface with the fewest bends.
    pub fn run(mut self) -> Result<(Vec<LocalSolution>, u64), SolveError> {
        self.place(0)?;
        let mut out: Vec<LocalSolution> = self.found.into_values().collect();
        out.sort_by(|a, b| (&a.stubs, a.placed).cmp(&(&b.stubs, b.placed)));
        Ok((out, self.steps))
    }

    fn tick(&mut self) -> Result<(), SolveError> {
        self.steps += 1;
        if self.steps > self.limit {
            return Err(SolveError::EnumerationLimit(self.limit as usize));
        }
        Ok(())
    }

    fn bound(&self, e: usize) -> u32 {
        let [h, v] = self.axis[e];
        u32::from(self.lb[e]).max(line_bound(h, v))
    }

    /// Raises the distance bound of edge `e` to `v`; `None` if the cap is exceeded.
    fn raise(&mut self, e: u8, v: u8) -> Option<u8> {
        let e = e as usize;
        let old = self.lb[e];
        if v <= old {
            return Some(old);
        }
        if v == FAR {
            return None;
        }
        let before = self.bound(e);
        self.lb[e] = v;
        let sum = self.lb_sum - before + self.bound(e);
        if sum > self.cap {
            self.lb[e] = old;
            return None;
        }
        self.lb_sum = sum;
        Some(old)
    }

    fn restore(&mut self, e: u8, old: u8) {
        let e = e as usize;
        let before = self.bound(e);
        self.lb[e] = old;
        self.lb_sum = self.lb_sum - before + self.bound(e);
    }

    /// Records routing edge `r` as used by `e`; false, with nothing
    /// recorded, if that breaks the cap.
    fn mark(&mut self, e: u8, r: usize) -> bool {
        let e = e as usize;
        let (horizontal, line) = self.b.line[r];
        let first = self.on_line[e][line as usize] == 0;
        if first {
            let before = self.bound(e);
            self.axis[e][usize::from(horizontal)] += 1;
            let sum = self.lb_sum - before + self.bound(e);
            if sum > self.cap {
                self.axis[e][usize::from(horizontal)] -= 1;
                return false;
            }
            self.lb_sum = sum;
        }
        self.on_line[e][line as usize] += 1;
        self.edge_lab[r] = e as u8 + 1;
        true
    }

    fn unmark(&mut self, e: u8, r: usize) {
        let e = e as usize;
        let (horizontal, line) = self.b.line[r];
        self.edge_lab[r] = 0;
        self.on_line[e][line as usize] -= 1;
        if self.on_line[e][line as usize] == 0 {
            let before = self.bound(e);
            self.axis[e][usize::from(horizontal)] -= 1;
            self.lb_sum = self.lb_sum - before + self.bound(e);
        }
    }

    fn place(&mut self, x: usize) -> Result<(), SolveError> {
        if x == self.at.len() {
            self.terms.clear();
            for (y, n) in self.at.iter().enumerate() {
                if let Some(n) = n {
                    for &e in &self.t.vertex_edges[y] {
                        self.terms.push(Term { kind: TermKind::Vertex(y), node: *n, edge: e, done: false, leave: None });
                    }
                }
            }
            for &p in &self.view.ports {
                let node = self.g.anchors[p];
                let edge = self.t.port_edge[p];
                self.terms.push(Term { kind: TermKind::Port(p), node, edge, done: false, leave: None });
            }
            return self.resume(Phase::Terms);
        }
        self.place(x + 1)?;
        for i in 0..self.view.places.len() {
            let n = self.view.places[i];
            if self.node_lab[n] != Label::Free {
                continue;
            }
            self.tick()?;
            let mut olds = Vec::new();
            for &e in &self.t.vertex_edges[x] {
                match self.raise(e as u8, self.b.at_node[e][n]) {
                    Some(o) => olds.push((e as u8, o)),
                    None => break,
                }
            }
            if olds.len() == self.t.vertex_edges[x].len() {
                self.node_lab[n] = Label::Vertex(x as u8);
                self.at[x] = Some(n);
                self.place(x + 1)?;
                self.at[x] = None;
                self.node_lab[n] = Label::Free;
            }
            for (e, o) in olds.into_iter().rev() {
                self.restore(e, o);
            }
        }
        Ok(())
    }

    fn resume(&mut self, phase: Phase) -> Result<(), SolveError> {
        match phase {
            Phase::Terms => match self.terms.iter().position(|t| !t.done) {
                Some(i) => self.start_term(i),
                None => self.stubs_from(0),
            },
            Phase::Stubs(j) => self.stubs_from(j + 1),
        }
    }

    fn start_term(&mut self, i: usize) -> Result<(), SolveError> {
        self.terms[i].done = true;
        let (n, e) = (self.terms[i].node, self.terms[i].edge as u8);
        match self.terms[i].kind {
            TermKind::Vertex(_) => {
                for d in Dir::ALL {
                    let r = self.g.nodes[n].adj[d.index()];
                    if r == NONE || self.edge_lab[r as usize] != 0 {
                        continue;
                    }
                    self.terms[i].leave = Some(d);
                    self.go(n, r as usize, e, Phase::Terms)?;
                }
                self.terms[i].leave = None;
            }
            TermKind::Port(_) => {
                let r = self.g.nodes[n].adj.iter().copied().find(|r| *r != NONE).expect("port edge");
                self.go(n, r as usize, e, Phase::Terms)?;
            }
        }
        self.terms[i].done = false;
        Ok(())
    }

    /// Traverses routing edge `r` away from `u` carrying edge `e`.
    fn go(&mut self, u: usize, r: usize, e: u8, phase: Phase) -> Result<(), SolveError> {
        self.tick()?;
        let edge = &self.g.edges[r];
        if edge.owner != self.s {
            let j = self.view.stub_at(u, r).expect("stub");
            return self.end_at_stub(j, r, e, phase);
        }
        let d = edge.heading_from(u);
        let v = edge.other(u);
        let Some(old) = self.raise(e, self.b.through[e as usize][r]) else { return Ok(()) };
        if !self.mark(e, r) {
            self.restore(e, old);
            return Ok(());
        }
        let vn = &self.g.nodes[v];
        let res = if vn.owner == NONE {
            let p = vn.port.expect("terminal");
            match self.terms.iter().position(|t| !t.done && matches!(t.kind, TermKind::Port(q) if q == p)) {
                Some(i) if self.terms[i].edge as u8 == e => {
                    self.terms[i].done = true;
                    let res = self.resume(phase);
                    self.terms[i].done = false;
                    res
                }
                _ => Ok(()),
            }
        } else if vn.owner != self.s {
            let j = self.view.stub_at(v, r).expect("stub");
            // the edge is ours, so only the stub label records the exit
            self.end_at_stub(j, usize::MAX, e, phase)
        } else {
            match self.node_lab[v] {
                Label::Vertex(y) => {
                    let pending = self.terms.iter().position(|t| {
                        !t.done && t.edge as u8 == e && matches!(t.kind, TermKind::Vertex(z) if z == y as usize)
                    });
                    match pending {
                        Some(i) => {
                            self.terms[i].done = true;
                            self.terms[i].leave = Some(d.opposite());
                            let res = self.resume(phase);
                            self.terms[i].done = false;
                            self.terms[i].leave = None;
                            res
                        }
                        None => Ok(()),
                    }
                }
                Label::Edge(_) => Ok(()),
                Label::Free => {
                    self.node_lab[v] = Label::Edge(e);
                    let res = self.extend(v, d, e, phase);
                    self.node_lab[v] = Label::Free;
                    res
                }
            }
        };
        self.unmark(e, r);
        self.restore(e, old);
        res
    }

    /// Continues from node `v`, reached heading `d`, straight or with one bend.
    fn extend(&mut self, v: usize, d: Dir, e: u8, phase: Phase) -> Result<(), SolveError> {
        for d2 in [d, d.cw(), d.ccw()] {
            let r = self.g.nodes[v].adj[d2.index()];
            if r == NONE || self.edge_lab[r as usize] != 0 {
                continue;
            }
            let cost = u32::from(d2 != d);
            if cost == 1 && (!self.g.nodes[v].bend_ok || self.bends + 1 > self.cap) {
                continue;
            }
            self.bends += cost;
            let res = self.go(v, r as usize, e, phase);
            self.bends -= cost;
            res?;
        }
        Ok(())
    }

    /// Ends the current piece at stub `j`; `mirror` is the foreign edge to mark, if any.
    fn end_at_stub(&mut self, j: usize, mirror: usize, e: u8, phase: Phase) -> Result<(), SolveError> {
        if self.stub_lab[j].is_some() {
            return Ok(());
        }
        if let Phase::Stubs(i) = phase {
            if j <= i {
                return Ok(());
            }
        }
        if matches!(self.fixed[j], Some(l) if l != e + 1) {
            return Ok(());
        }
        let mut old = None;
        if mirror != usize::MAX {
            old = self.raise(e, self.b.through[e as usize][mirror]);
            let Some(o) = old else { return Ok(()) };
            if !self.mark(e, mirror) {
                self.restore(e, o);
                return Ok(());
            }
        }
        self.stub_lab[j] = Some(e + 1);
        let res = self.resume(phase);
        self.stub_lab[j] = None;
        if let Some(o) = old {
            self.unmark(e, mirror);
            self.restore(e, o);
        }
        res
    }

    fn stubs_from(&mut self, i: usize) -> Result<(), SolveError> {
        let Some(j) = (i..self.stub_lab.len()).find(|&j| self.stub_lab[j].is_none()) else {
            return self.emit();
        };
        let fixed = self.fixed[j];
        if matches!(fixed, None | Some(0)) {
            self.stub_lab[j] = Some(0);
            self.stubs_from(j + 1)?;
            self.stub_lab[j] = None;
        }
        let labels: Vec<u8> = match fixed {
            Some(0) => vec![],
            Some(l) => vec![l - 1],
            None => (0..self.t.ends.len() as u8).collect(),
        };
        let st = &self.g.stubs[self.view.stubs[j]];
        let (n, r) = (st.node, st.edge);
        for e in labels {
            self.tick()?;
            self.stub_lab[j] = Some(e + 1);
            if self.g.nodes[n].owner == self.s {
                if self.node_lab[n] == Label::Free && self.edge_lab[r] == 0 {
                    if let Some(old) = self.raise(e, self.b.through[e as usize][r]) {
                        if self.mark(e, r) {
                            let d = self.g.edges[r].heading_from(self.g.edges[r].other(n));
                            self.node_lab[n] = Label::Edge(e);
                            let res = self.extend(n, d, e, Phase::Stubs(j));
                            self.node_lab[n] = Label::Free;
                            self.unmark(e, r);
                            res?;
                        }
                        self.restore(e, old);
                    }
                }
            } else if self.edge_lab[r] == 0 {
                self.go(n, r, e, Phase::Stubs(j))?;
            }
            self.stub_lab[j] = None;
        }
        Ok(())
    }

    fn emit(&mut self) -> Result<(), SolveError> {
        self.tick()?;
        for (x, n) in self.at.iter().enumerate() {
            if n.is_some() && self.t.must_bend[x] {
                let dirs: Vec<Dir> = self
                    .terms
                    .iter()
                    .filter(|t| matches!(t.kind, TermKind::Vertex(y) if y == x))
                    .filter_map(|t| t.leave)
                    .collect();
                if dirs.len() != 2 || dirs[0].is_horizontal() == dirs[1].is_horizontal() {
                    return Ok(());
                }
            }
        }
        let stubs: Vec<u8> = self.stub_lab.iter().map(|l| l.expect("assigned")).collect();
        let placed = self.at.iter().enumerate().filter(|(_, n)| n.is_some()).fold(0u32, |m, (x, _)| m | 1 << x);
        let key = (stubs, placed);
        if self.found.get(&key).is_some_and(|old| old.bends <= self.bends) {
            return Ok(());
        }
        let nodes = self
            .view
            .nodes
            .iter()
            .filter(|&&n| self.node_lab[n] != Label::Free)
            .map(|&n| (n as u32, self.node_lab[n]))
            .collect();
        let edges =
            self.view.edges.iter().filter(|&&r| self.edge_lab[r] != 0).map(|&r| (r as u32, self.edge_lab[r] - 1)).collect();
        let lbs = (0..self.lb.len()).map(|e| self.bound(e).min(u32::from(FAR - 1)) as u8).collect();
        let sol = LocalSolution { stubs: key.0.clone(), placed, bends: self.bends, lbs, nodes, edges };
        self.found.insert(key, sol);
        Ok(())
    }
}
