//! Dynamic program over a nice tree decomposition of the sector graph, and
//! the drivers that combine faces, cut branches and reduction branches.

use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::drawing::{validate, Drawing, EdgeKey, OrthoPolyline};
use crate::error::SolveError;
use crate::instance::{BmoeInstance, EdgeEnd, FaceInstance};
use crate::reduction::{build_cut_branch, canonical_arrays, cut_base, frame_outer, make_clean, reduce_to_faces, CutBranch};
use crate::routing::{Bounds, Enumerator, Label, LocalSolution, RoutingGraph, Terminals, NONE};
use crate::sector::{sector_grid, SectorComplex, SectorGrid};
use crate::td::{decompose, make_nice, NiceKind, NiceTreeDecomposition};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Execution {
    Parallel,
    Sequential,
}

impl Default for Execution {
    fn default() -> Execution {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Grid points per axis and subsector.
    pub grid_scale: usize,
    /// Largest bend number searched for; derived from the instance if unset.
    pub bend_cap: Option<u32>,
    pub budget: Option<u32>,
    pub seed: u64,
    /// Refuse instances with more reduction branches than this.
    pub max_branches: Option<usize>,
    /// Crossings of the cut line beyond one per edge.
    pub cut_extra: usize,
    /// Search steps allowed per dynamic program run.
    pub step_limit: u64,
    pub execution: Execution,
}

impl Default for SolveOptions {
    fn default() -> SolveOptions {
        SolveOptions {
            grid_scale: 5,
            bend_cap: None,
            budget: None,
            seed: 0,
            max_branches: None,
            cut_extra: 0,
            step_limit: 200_000_000,
            execution: Execution::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveStats {
    pub branches: usize,
    pub faces: usize,
    pub cut_branches: usize,
    pub sectors: usize,
    pub bags: usize,
    pub width: usize,
    pub configs: usize,
    pub local_solutions: usize,
    pub steps: u64,
    pub cap: u32,
}

impl SolveStats {
    fn absorb(&mut self, o: &SolveStats) {
        self.branches += o.branches;
        self.faces += o.faces;
        self.cut_branches += o.cut_branches;
        self.sectors = self.sectors.max(o.sectors);
        self.bags += o.bags;
        self.width = self.width.max(o.width);
        self.configs += o.configs;
        self.local_solutions += o.local_solutions;
        self.steps += o.steps;
        self.cap = self.cap.max(o.cap);
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimum { beta: u32, drawing: Drawing },
    NoExtension { cap: u32 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub stats: SolveStats,
}

impl SolveResult {
    pub fn beta(&self) -> Option<u32> {
        match &self.status {
            SolveStatus::Optimum { beta, .. } => Some(*beta),
            SolveStatus::NoExtension { .. } => None,
        }
    }

    pub fn drawing(&self) -> Option<&Drawing> {
        match &self.status {
            SolveStatus::Optimum { drawing, .. } => Some(drawing),
            SolveStatus::NoExtension { .. } => None,
        }
    }
}

/// Checks a missing part against its face instance and returns its bend count.
pub fn audit_face(fi: &FaceInstance, missing: &Drawing) -> Result<u32, String> {
    let merged = fi.drawing.merged(missing);
    let report = validate(&merged);
    if !report.is_valid() {
        return Err(format!("{:?}", report.violations));
    }
    let region = fi.region().ok_or("no face")?;
    for x in &fi.missing_vertices {
        let p = missing.vertices.get(x).ok_or(format!("vertex {x} not placed"))?;
        if !region.contains(p) {
            return Err(format!("vertex {x} outside the face"));
        }
    }
    let mut bends = 0;
    for (e, key) in fi.missing_edges.iter().enumerate() {
        let pl = missing.edges.get(key).ok_or(format!("edge {key:?} not drawn"))?;
        let pts = &pl.points;
        let mid = crate::geom::Point { x: crate::geom::Rat::mid(pts[0].x, pts[1].x), y: crate::geom::Rat::mid(pts[0].y, pts[1].y) };
        if !region.contains(&mid) {
            return Err(format!("edge {key:?} leaves the face"));
        }
        let ends = fi.ends(e).map_err(|e| e.to_string())?;
        let n = pts.len();
        for (i, end) in ends.iter().enumerate() {
            if let EdgeEnd::Port(p) = end {
                let d = if i == 0 { pts[0].dir_to(&pts[1]) } else { pts[n - 1].dir_to(&pts[n - 2]) };
                if d != Some(fi.ports[*p].side) {
                    return Err(format!("edge {key:?} ignores its port side"));
                }
            }
        }
        bends += pl.bends() as u32;
    }
    for x in &fi.must_bend {
        let p = missing.vertices[x];
        let dirs: Vec<_> = merged.ports_used(x).into_iter().map(|(d, _)| d).collect();
        if dirs.len() != 2 || dirs[0].is_horizontal() == dirs[1].is_horizontal() {
            return Err(format!("must-bend vertex {x} at {p:?} is straight"));
        }
    }
    Ok(bends)
}

type Key = (u32, Vec<u32>);

#[derive(Default)]
struct Table {
    keys: Vec<Key>,
    vals: Vec<u32>,
    back: Vec<(u32, u32)>,
    index: HashMap<Key, usize>,
}

impl Table {
    fn offer(&mut self, key: Key, val: u32, back: (u32, u32)) {
        match self.index.get(&key) {
            Some(&i) => {
                if val < self.vals[i] {
                    self.vals[i] = val;
                    self.back[i] = back;
                }
            }
            None => {
                self.index.insert(key.clone(), self.keys.len());
                self.keys.push(key);
                self.vals.push(val);
                self.back.push(back);
            }
        }
    }
}

/// Local solutions found so far, deduplicated per sector, and enumeration results per query.
struct Store {
    sols: Vec<Vec<LocalSolution>>,
    ids: Vec<HashMap<(Vec<u8>, u32), u32>>,
    cache: HashMap<(usize, Vec<Option<u8>>), Rc<Vec<u32>>>,
    steps: u64,
}

impl Store {
    fn new(n: usize) -> Store {
        Store { sols: vec![Vec::new(); n], ids: vec![HashMap::new(); n], cache: HashMap::new(), steps: 0 }
    }

    fn query(
        &mut self,
        g: &RoutingGraph,
        t: &Terminals,
        b: &Bounds,
        s: usize,
        fixed: Vec<Option<u8>>,
        cap: u32,
        limit: u64,
    ) -> Result<Rc<Vec<u32>>, SolveError> {
        let key = (s, fixed);
        if let Some(ids) = self.cache.get(&key) {
            return Ok(ids.clone());
        }
        let left = limit.saturating_sub(self.steps);
        let (found, steps) =
            Enumerator::new(g, t, b, s, &key.1, cap, left).run().map_err(|_| SolveError::EnumerationLimit(limit as usize))?;
        self.steps += steps;
        let mut out = Vec::with_capacity(found.len());
        for sol in found {
            let k = (sol.stubs.clone(), sol.placed);
            let id = match self.ids[s].get(&k) {
                Some(&id) => id,
                None => {
                    let id = self.sols[s].len() as u32;
                    self.ids[s].insert(k, id);
                    self.sols[s].push(sol);
                    id
                }
            };
            out.push(id);
        }
        let out = Rc::new(out);
        self.cache.insert(key, out.clone());
        Ok(out)
    }
}

/// A clean, bounded, hole-free face instance with everything the dynamic program needs.
pub struct Prepared {
    pub fi: FaceInstance,
    pub sc: SectorComplex,
    pub grid: SectorGrid,
    pub graph: RoutingGraph,
    pub terms: Terminals,
    pub bounds: Bounds,
    pub ntd: NiceTreeDecomposition,
}

impl Prepared {
    pub fn new(fi: FaceInstance, grid_scale: usize, seed: u64) -> Result<Prepared, SolveError> {
        let sc = SectorComplex::build(&fi)?;
        let grid = sector_grid(&sc.complex, &sc.subsectors, grid_scale);
        let graph = RoutingGraph::build(&fi, &sc, &grid)?;
        let terms = Terminals::new(&fi)?;
        let bounds = Bounds::new(&graph, &terms);
        let td = decompose(&sc.dec.graph.adjacency(), seed);
        let ntd = make_nice(&td);
        Ok(Prepared { fi, sc, grid, graph, terms, bounds, ntd })
    }

    fn base_stats(&self) -> SolveStats {
        SolveStats {
            sectors: self.sc.dec.sectors.len(),
            bags: self.ntd.nodes.len(),
            width: self.ntd.width(),
            ..SolveStats::default()
        }
    }

    /// Optimum with at most `cap` bends, its missing part, and run statistics.
    pub fn solve(&self, cap: u32, limit: u64) -> Result<(Option<(u32, Drawing)>, SolveStats), SolveError> {
        let k = self.fi.k();
        if k > 31 || self.fi.missing_edges.len() > 254 {
            return Err(SolveError::Internal("too many missing elements".into()));
        }
        let g = &self.graph;
        let t = &self.terms;
        let nodes = &self.ntd.nodes;
        let mut store = Store::new(self.sc.dec.sectors.len());
        let mut tables: Vec<Table> = Vec::with_capacity(nodes.len());
        let bends_of = |store: &Store, bag: &[usize], th: &[u32]| -> u32 {
            bag.iter().zip(th).map(|(s, id)| store.sols[*s][*id as usize].bends).sum()
        };
        for node in nodes {
            let bag: Vec<usize> = node.bag.iter().copied().collect();
            let mut table = Table::default();
            match node.kind {
                NiceKind::Leaf => table.offer((0, vec![]), 0, (NONE, NONE)),
                NiceKind::Introduce(w) => {
                    let child = &tables[node.children[0]];
                    let cbag: Vec<usize> = nodes[node.children[0]].bag.iter().copied().collect();
                    let pos = bag.iter().position(|s| *s == w).expect("introduced sector in bag");
                    for i in 0..child.keys.len() {
                        let (xv, th) = &child.keys[i];
                        let val = child.vals[i];
                        let fixed: Vec<Option<u8>> = g.views[w]
                            .stubs
                            .iter()
                            .map(|&st| {
                                let (u, upos) = g.across(st, w);
                                cbag.iter().position(|s| *s == u).map(|cp| store.sols[u][th[cp] as usize].stubs[upos])
                            })
                            .collect();
                        let mut excluded = *xv;
                        for (s, id) in cbag.iter().zip(th) {
                            excluded |= store.sols[*s][*id as usize].placed;
                        }
                        let past = val + bends_of(&store, &cbag, th);
                        if past > cap {
                            continue;
                        }
                        let ids = store.query(g, t, &self.bounds, w, fixed, cap, limit)?;
                        let mut lbs = vec![0u8; t.ends.len()];
                        for (s, id) in cbag.iter().zip(th) {
                            for (a, b) in lbs.iter_mut().zip(&store.sols[*s][*id as usize].lbs) {
                                *a = (*a).max(*b);
                            }
                        }
                        for &id in ids.iter() {
                            let sol = &store.sols[w][id as usize];
                            if sol.placed & excluded != 0 || past + sol.bends > cap {
                                continue;
                            }
                            let bound: u32 = lbs.iter().zip(&sol.lbs).map(|(a, b)| u32::from(*a.max(b))).sum();
                            if bound > cap {
                                continue;
                            }
                            let mut nth = th.clone();
                            nth.insert(pos, id);
                            table.offer((*xv, nth), val, (i as u32, NONE));
                        }
                    }
                }
                NiceKind::Forget(u) => {
                    let child = &tables[node.children[0]];
                    let cbag: Vec<usize> = nodes[node.children[0]].bag.iter().copied().collect();
                    let cp = cbag.iter().position(|s| *s == u).expect("forgotten sector in child bag");
                    for i in 0..child.keys.len() {
                        let (xv, th) = &child.keys[i];
                        let sol = &store.sols[u][th[cp] as usize];
                        let mut nth = th.clone();
                        nth.remove(cp);
                        table.offer((xv | sol.placed, nth), child.vals[i] + sol.bends, (i as u32, NONE));
                    }
                }
                NiceKind::Join => {
                    let (l, r) = (&tables[node.children[0]], &tables[node.children[1]]);
                    let mut by_theta: HashMap<&Vec<u32>, Vec<usize>> = HashMap::new();
                    for (j, (_, th)) in r.keys.iter().enumerate() {
                        by_theta.entry(th).or_default().push(j);
                    }
                    for i in 0..l.keys.len() {
                        let (xl, th) = &l.keys[i];
                        let Some(js) = by_theta.get(th) else { continue };
                        let here = bends_of(&store, &bag, th);
                        for &j in js {
                            let xr = r.keys[j].0;
                            let val = l.vals[i] + r.vals[j];
                            if xl & xr != 0 || val + here > cap {
                                continue;
                            }
                            table.offer((xl | xr, th.clone()), val, (i as u32, j as u32));
                        }
                    }
                }
            }
            tables.push(table);
        }
        let mut stats = self.base_stats();
        stats.configs = tables.iter().map(|t| t.keys.len()).sum();
        stats.local_solutions = store.sols.iter().map(|s| s.len()).sum();
        stats.steps = store.steps;
        stats.cap = cap;
        let all = if k == 0 { 0 } else { (1u32 << k) - 1 };
        let root = &tables[self.ntd.root];
        let Some(&ri) = root.index.get(&(all, vec![])) else { return Ok((None, stats)) };
        let beta = root.vals[ri];
        if beta > cap {
            return Ok((None, stats));
        }
        // walk the backpointers to the chosen local solutions
        let mut chosen: BTreeMap<usize, u32> = BTreeMap::new();
        let mut stack = vec![(self.ntd.root, ri)];
        while let Some((ni, ei)) = stack.pop() {
            let node = &nodes[ni];
            let (a, b) = tables[ni].back[ei];
            if let NiceKind::Introduce(w) = node.kind {
                let pos = node.bag.iter().position(|s| *s == w).expect("in bag");
                let id = tables[ni].keys[ei].1[pos];
                if chosen.insert(w, id).is_some_and(|old| old != id) {
                    return Err(SolveError::Internal(format!("sector {w} chosen twice")));
                }
            }
            if a != NONE {
                stack.push((node.children[0], a as usize));
            }
            if b != NONE {
                stack.push((node.children[1], b as usize));
            }
        }
        let missing = self.reconstruct(&store, &chosen)?;
        let bends = audit_face(&self.fi, &missing).map_err(|m| SolveError::Internal(format!("reconstruction: {m}")))?;
        if bends != beta {
            return Err(SolveError::Internal(format!("reconstruction has {bends} bends, table says {beta}")));
        }
        Ok((Some((beta, missing)), stats))
    }

    fn reconstruct(&self, store: &Store, chosen: &BTreeMap<usize, u32>) -> Result<Drawing, SolveError> {
        let g = &self.graph;
        let fi = &self.fi;
        let mut at: Vec<Option<usize>> = vec![None; fi.k()];
        let mut lab: HashMap<usize, u8> = HashMap::new();
        for (&s, &id) in chosen {
            let sol = &store.sols[s][id as usize];
            for &(n, l) in &sol.nodes {
                if let Label::Vertex(x) = l {
                    at[x as usize] = Some(n as usize);
                }
            }
            for &(r, e) in &sol.edges {
                lab.insert(r as usize, e);
            }
        }
        let bad = |m: String| SolveError::Internal(m);
        let mut out = Drawing::new();
        for (x, n) in at.iter().enumerate() {
            let n = n.ok_or_else(|| bad(format!("vertex {} unplaced", fi.missing_vertices[x])))?;
            out.add_vertex(&fi.missing_vertices[x], g.nodes[n].pt);
        }
        let term_node = |end: &EdgeEnd| match end {
            EdgeEnd::Vertex(x) => at[*x].expect("placed"),
            EdgeEnd::Port(p) => g.anchors[*p],
        };
        for (e, key) in fi.missing_edges.iter().enumerate() {
            let ends = &self.terms.ends[e];
            let (start, goal) = (term_node(&ends[0]), term_node(&ends[1]));
            let total = lab.values().filter(|l| **l as usize == e).count();
            let mut pts = vec![g.nodes[start].pt];
            let (mut cur, mut prev) = (start, usize::MAX);
            let mut used = 0;
            while cur != goal || used == 0 {
                let next = g.nodes[cur]
                    .adj
                    .iter()
                    .filter(|r| **r != NONE)
                    .map(|r| *r as usize)
                    .find(|r| *r != prev && lab.get(r) == Some(&(e as u8)))
                    .ok_or_else(|| bad(format!("edge {key:?} breaks off")))?;
                cur = g.edges[next].other(cur);
                prev = next;
                pts.push(g.nodes[cur].pt);
                used += 1;
                if used > total {
                    return Err(bad(format!("edge {key:?} loops")));
                }
            }
            if used != total {
                return Err(bad(format!("edge {key:?} has a detached cycle")));
            }
            let (u, v): &EdgeKey = key;
            out.add_edge(u, v, OrthoPolyline::simplified(&pts).points);
        }
        Ok(out)
    }
}

/// Bend cap used when none is given.
pub fn default_cap(fi: &FaceInstance) -> u32 {
    let corners = fi.drawing.feature_points().len().max(4);
    (2 * (fi.k() + fi.missing_edges.len()) * corners) as u32
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FaceOutcome {
    pub beta: Option<u32>,
    /// Missing part under the face's own names.
    pub drawing: Drawing,
    pub stats: SolveStats,
}

fn map_items<T: Sync, R: Send>(items: &[T], exec: Execution, f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    #[cfg(feature = "parallel")]
    if exec == Execution::Parallel {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// First item, in order, for which `f` finds something. Errors stop the
/// search like hits do.
fn first_hit<T: Sync, R: Send>(
    items: &[T],
    exec: Execution,
    f: impl Fn(&T) -> Result<Option<R>, SolveError> + Sync + Send,
) -> Result<Option<(usize, R)>, SolveError> {
    let keep = |(i, r): (usize, Result<Option<R>, SolveError>)| match r {
        Ok(None) => None,
        Ok(Some(v)) => Some(Ok((i, v))),
        Err(e) => Some(Err(e)),
    };
    #[cfg(feature = "parallel")]
    if exec == Execution::Parallel {
        use rayon::prelude::*;
        return items.par_iter().enumerate().map(|(i, x)| (i, f(x))).find_map_first(keep).transpose();
    }
    let _ = exec;
    items.iter().enumerate().map(|(i, x)| (i, f(x))).find_map(keep).transpose()
}

/// Cut branches of an outer face: one representative crossing array per
/// crossing sequence, with every orientation and crossing direction.
pub fn cut_branches(framed: &FaceInstance, extra: usize) -> Result<Vec<CutBranch>, SolveError> {
    let base = cut_base(framed)?;
    let m = framed.missing_edges.len();
    let mut out = Vec::new();
    for array in canonical_arrays(m, base.slots.len(), extra) {
        let counts: Vec<usize> = (0..m).map(|e| array.iter().filter(|a| **a == Some(e)).count()).collect();
        let crossing: Vec<usize> = (0..m).filter(|&e| counts[e] > 0).collect();
        let multi: Vec<usize> = (0..m).filter(|&e| counts[e] > 1).collect();
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
                out.push(build_cut_branch(framed, &base, &array, &reverse, &eastward));
            }
        }
    }
    Ok(out)
}

/// Solves one face instance to optimality within `cap` bends.
pub fn solve_face(fi: &FaceInstance, opts: &SolveOptions, cap: u32) -> Result<FaceOutcome, SolveError> {
    fi.check()?;
    let mut stats = SolveStats { faces: 1, ..SolveStats::default() };
    if fi.k() == 0 && fi.missing_edges.is_empty() {
        return Ok(FaceOutcome { beta: Some(0), drawing: Drawing::new(), stats });
    }
    // each candidate is a solvable instance plus the way back to `fi`
    let (framed, branches): (Option<FaceInstance>, Vec<(FaceInstance, Option<CutBranch>)>) = if fi.outer {
        let framed = frame_outer(fi);
        let cuts = cut_branches(&framed, opts.cut_extra)?;
        stats.cut_branches = cuts.len();
        let list = cuts
            .into_iter()
            .filter(|b| b.instance.check().is_ok())
            .map(|b| (make_clean(&b.instance), Some(b)))
            .collect();
        (Some(framed), list)
    } else {
        (None, vec![(make_clean(fi), None)])
    };
    let prepared: Vec<Result<Prepared, SolveError>> =
        map_items(&branches, opts.execution, |(inst, _)| Prepared::new(inst.clone(), opts.grid_scale, opts.seed));
    let prepared: Vec<(Prepared, &Option<CutBranch>)> = prepared
        .into_iter()
        .zip(&branches)
        .map(|(p, (_, cut))| p.map(|p| (p, cut)))
        .collect::<Result<_, _>>()?;
    // cheap branches first; at a given cap every hit is optimal, so the
    // first one in order wins
    let mut prepared = prepared;
    prepared.sort_by_key(|(p, _)| p.graph.views.len());
    let seen = Mutex::new(SolveStats::default());
    for c in 0..=cap {
        let best = first_hit(&prepared, opts.execution, |(p, _)| {
            let (found, st) = p.solve(c, opts.step_limit)?;
            seen.lock().expect("stats").absorb(&st);
            Ok(found)
        })?;
        let best = best.map(|(i, (beta, d))| (beta, d, i));
        if let Some((beta, d, i)) = best {
            let drawing = match (&framed, prepared[i].1) {
                (Some(framed), Some(cut)) => {
                    let solved = prepared[i].0.fi.drawing.merged(&d);
                    cut.glue(framed, &solved)
                }
                _ => d,
            };
            let bends = audit_face(fi, &drawing).map_err(|m| SolveError::Internal(format!("glued solution: {m}")))?;
            if bends != beta {
                return Err(SolveError::Internal(format!("glued solution has {bends} bends, expected {beta}")));
            }
            stats.absorb(&seen.into_inner().expect("stats"));
            stats.cap = c;
            return Ok(FaceOutcome { beta: Some(beta), drawing, stats });
        }
    }
    stats.absorb(&seen.into_inner().expect("stats"));
    stats.cap = cap;
    Ok(FaceOutcome { beta: None, drawing: Drawing::new(), stats })
}

/// Memo of face results: a found optimum holds for every larger cap, a
/// failure for every smaller one.
#[derive(Default)]
struct FaceMemo {
    map: Mutex<HashMap<String, (u32, FaceOutcome)>>,
}

impl FaceMemo {
    fn solve(&self, fi: &FaceInstance, opts: &SolveOptions, cap: u32) -> Result<FaceOutcome, SolveError> {
        let key = format!("{fi:?}");
        if let Some((c, out)) = self.map.lock().expect("memo").get(&key) {
            match out.beta {
                Some(b) if b <= cap => return Ok(out.clone()),
                None if cap <= *c => return Ok(out.clone()),
                _ => {}
            }
        }
        let out = solve_face(fi, opts, cap)?;
        self.map.lock().expect("memo").insert(key, (cap, out.clone()));
        Ok(out)
    }
}

/// The whole pipeline: reduction branches, faces, and recombination.
pub fn solve_bmoe(inst: &BmoeInstance, opts: &SolveOptions) -> Result<SolveResult, SolveError> {
    inst.check()?;
    let mut stats = SolveStats::default();
    if inst.kappa() == 0 {
        let status = SolveStatus::Optimum { beta: 0, drawing: inst.drawing.clone() };
        return Ok(SolveResult { status, stats });
    }
    let branches = reduce_to_faces(inst)?;
    if let Some(max) = opts.max_branches {
        if branches.len() > max {
            return Err(SolveError::BranchLimit(branches.len()));
        }
    }
    let limit = match (opts.bend_cap, opts.budget) {
        (Some(c), Some(b)) => Some(c.min(b)),
        (c, b) => c.or(b),
    };
    let memo = FaceMemo::default();
    // branches without an outer face are cheap, so they go first and the
    // best total found so far caps every later face
    let mut order: Vec<&crate::reduction::ReductionBranch> = branches.iter().collect();
    order.sort_by_key(|br| (br.faces.iter().filter(|f| f.outer).count(), br.offset));
    let best_total = AtomicU32::new(u32::MAX);
    let results = map_items(&order, opts.execution, |br| -> Result<(Option<(u32, Drawing)>, SolveStats), SolveError> {
        let mut st = SolveStats { branches: 1, ..SolveStats::default() };
        let mut total = br.offset;
        let mut parts = Drawing::new();
        for fi in &br.faces {
            let bound = match (limit, best_total.load(Ordering::Relaxed)) {
                (l, u32::MAX) => l,
                (Some(l), b) => Some(l.min(b - 1)),
                (None, b) => Some(b.saturating_sub(1)),
            };
            let cap = match bound {
                Some(l) if l < total => return Ok((None, st)),
                Some(l) => l - total,
                None => default_cap(fi),
            };
            let out = memo.solve(fi, opts, cap)?;
            st.absorb(&out.stats);
            let Some(b) = out.beta else { return Ok((None, st)) };
            total += b;
            parts = parts.merged(&out.drawing);
        }
        if limit.is_some_and(|l| total > l) {
            return Ok((None, st));
        }
        best_total.fetch_min(total, Ordering::Relaxed);
        let d = compose(inst, br, &parts)?;
        let bends = missing_bends(inst, &d);
        if bends != total {
            return Err(SolveError::Internal(format!("combined drawing has {bends} bends, expected {total}")));
        }
        Ok((Some((total, d)), st))
    });
    let mut best: Option<(u32, Drawing)> = None;
    for r in results {
        let (found, st) = r?;
        stats.absorb(&st);
        if let Some((beta, d)) = found {
            if best.as_ref().map_or(true, |b| beta < b.0) {
                best = Some((beta, d));
            }
        }
    }
    let status = match best {
        Some((beta, drawing)) => SolveStatus::Optimum { beta, drawing },
        None => SolveStatus::NoExtension { cap: limit.unwrap_or(stats.cap) },
    };
    Ok(SolveResult { status, stats })
}

/// Joins the branch base and the face solutions into a drawing of `G`,
/// merging subdivided edges back, and checks it.
fn compose(inst: &BmoeInstance, br: &crate::reduction::ReductionBranch, parts: &Drawing) -> Result<Drawing, SolveError> {
    let mut d = br.base.merged(parts);
    for (u, (a, b)) in &br.subdivisions {
        let first = d.polyline_from(a, u).ok_or_else(|| SolveError::Internal(format!("{a}-{u} missing")))?;
        let second = d.polyline_from(u, b).ok_or_else(|| SolveError::Internal(format!("{u}-{b} missing")))?;
        let mut pts = first.points;
        pts.extend(second.points.into_iter().skip(1));
        d.edges.retain(|k, _| k.0 != *u && k.1 != *u);
        d.vertices.remove(u);
        d.add_edge(a, b, pts);
    }
    let report = validate(&d);
    if !report.is_valid() {
        return Err(SolveError::Internal(format!("combined drawing invalid: {:?}", report.violations)));
    }
    for v in &inst.vertices {
        if !d.vertices.contains_key(v) {
            return Err(SolveError::Internal(format!("vertex {v} not drawn")));
        }
    }
    for e in &inst.edges {
        if !d.edges.contains_key(e) {
            return Err(SolveError::Internal(format!("edge {e:?} not drawn")));
        }
    }
    Ok(d)
}

/// Bends on the edges of `G` that `H` lacks.
pub fn missing_bends(inst: &BmoeInstance, d: &Drawing) -> u32 {
    inst.missing_edges().iter().filter_map(|e| d.edges.get(e)).map(|pl| pl.bends() as u32).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{anchor_pair, polygon_face};
    use crate::geom::{Dir, Point};
    use crate::oracle::oracle_solve;

    fn p(x: i64, y: i64) -> Point {
        Point::new(x, y)
    }

    fn square(anchors: &[(Point, Dir)]) -> FaceInstance {
        polygon_face(&[p(0, 0), p(4, 0), p(4, 4), p(0, 4)], anchors, p(1, 1))
    }

    fn both(fi: &FaceInstance, cap: u32) -> (Option<u32>, Option<u32>) {
        let opts = SolveOptions { execution: Execution::Sequential, ..SolveOptions::default() };
        let dp = solve_face(fi, &opts, cap).unwrap();
        if let Some(b) = dp.beta {
            assert_eq!(audit_face(fi, &dp.drawing), Ok(b));
        }
        let oracle = oracle_solve(fi, None, cap, None).unwrap().map(|s| s.beta);
        (dp.beta, oracle)
    }

    #[test]
    fn anchor_pairs_match_oracle() {
        let fi = anchor_pair((p(2, 0), Dir::N), (p(2, 4), Dir::S));
        assert_eq!(both(&fi, 3), (Some(0), Some(0)));
        let fi = anchor_pair((p(2, 0), Dir::N), (p(4, 2), Dir::W));
        assert_eq!(both(&fi, 3), (Some(1), Some(1)));
        let fi = anchor_pair((p(1, 0), Dir::N), (p(3, 0), Dir::N));
        assert_eq!(both(&fi, 3), (Some(2), Some(2)));
        assert_eq!(both(&fi, 1), (None, None));
    }

    #[test]
    fn single_port_vertex_sits_on_the_ray() {
        let fi = square(&[(p(2, 4), Dir::S)]);
        assert_eq!(both(&fi, 2), (Some(0), Some(0)));
    }

    #[test]
    fn stars_match_oracle() {
        let fi = square(&[(p(2, 0), Dir::N), (p(4, 2), Dir::W), (p(2, 4), Dir::S), (p(0, 2), Dir::E)]);
        assert_eq!(both(&fi, 2), (Some(0), Some(0)));
        let fi = square(&[(p(1, 0), Dir::N), (p(3, 0), Dir::N), (p(2, 4), Dir::S)]);
        assert_eq!(both(&fi, 3), (Some(2), Some(2)));
    }

    #[test]
    fn empty_face_is_free() {
        let mut fi = square(&[]);
        fi.missing_vertices.clear();
        let out = solve_face(&fi, &SolveOptions::default(), 0).unwrap();
        assert_eq!(out.beta, Some(0));
    }
}
