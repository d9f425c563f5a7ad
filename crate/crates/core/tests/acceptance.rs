//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::Rng;

use orthext::dp::{cut_branches, solve_bmoe, solve_face, Execution, FaceOutcome, SolveOptions, SolveResult};
use orthext::drawing::{
    compress_selection, count_bends, feature_clearance, shape_descriptor, strip_op, validate, AxisLine, Drawing,
    StripMode,
};
use orthext::gen;
use orthext::geom::{Bbox, Dir, Point, Rat};
use orthext::instance::{BmoeInstance, FaceInstance};
use orthext::oracle::{oracle_bdist_many, oracle_candidates, oracle_solve};
use orthext::reduction::{cut_slots, frame_outer, make_clean};
use orthext::sector::{
    critical_corners, sd_critical, subgridsize, CellComplex, SectorComplex, INF,
};

type Verdict = Result<String, String>;

/// Every solver result seen by any criterion: (checked, violations).
static GATE: Mutex<(usize, Vec<String>)> = Mutex::new((0, Vec::new()));

fn record(what: &str, problem: Option<String>) {
    let mut g = GATE.lock().unwrap();
    g.0 += 1;
    if let Some(p) = problem {
        g.1.push(format!("{what}: {p}"));
    }
}

/// First segment directions of the missing edges must match the ports.
fn port_problem(fi: &FaceInstance, merged: &Drawing) -> Option<String> {
    for port in &fi.ports {
        let other = if port.edge.0 == port.anchor { &port.edge.1 } else { &port.edge.0 };
        let pl = merged.polyline_from(&port.anchor, other)?;
        let first = pl.points[0].dir_to(&pl.points[1]);
        if first != Some(port.side) && fi.ports.iter().filter(|q| q.edge == port.edge && q.anchor == port.anchor).count() == 1 {
            return Some(format!("{}-{} leaves {} towards {first:?}, port says {:?}", port.edge.0, port.edge.1, port.anchor, port.side));
        }
    }
    None
}

fn gate_face(what: &str, fi: &FaceInstance, out: &FaceOutcome) {
    let Some(beta) = out.beta else { return record(what, None) };
    let merged = fi.drawing.merged(&out.drawing);
    let report = validate(&merged);
    let problem = if !report.is_valid() {
        Some(format!("invalid drawing: {:?}", report.violations))
    } else if let Some(v) = fi.missing_vertices.iter().find(|v| !merged.vertices.contains_key(*v)) {
        Some(format!("vertex {v} not drawn"))
    } else if let Some(e) = fi.missing_edges.iter().find(|e| !merged.edges.contains_key(*e)) {
        Some(format!("edge {e:?} not drawn"))
    } else {
        let bends = count_bends(&merged, |k| fi.missing_edges.contains(k)) as u32;
        if bends != beta {
            Some(format!("{bends} bends on missing edges, reported {beta}"))
        } else {
            port_problem(fi, &merged)
        }
    };
    record(what, problem);
}

fn gate_bmoe(what: &str, inst: &BmoeInstance, res: &SolveResult) {
    let (Some(beta), Some(d)) = (res.beta(), res.drawing()) else { return record(what, None) };
    let report = validate(d);
    let missing = inst.missing_edges();
    let problem = if !report.is_valid() {
        Some(format!("invalid drawing: {:?}", report.violations))
    } else if inst.vertices.iter().any(|v| !d.vertices.contains_key(v)) || inst.edges.iter().any(|e| !d.edges.contains_key(e)) {
        Some("drawing lacks part of the graph".into())
    } else if inst.drawing.edges.iter().any(|(k, pl)| d.edges.get(k) != Some(pl)) {
        Some("drawing moved an edge of the partial drawing".into())
    } else {
        let bends = count_bends(d, |k| missing.contains(k)) as u32;
        (bends != beta).then(|| format!("{bends} bends on missing edges, reported {beta}"))
    };
    record(what, problem);
}

fn sequential() -> SolveOptions {
    SolveOptions { grid_scale: 5, execution: Execution::Sequential, ..SolveOptions::default() }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// A random point of element `e` (a face, an open edge or a node).
fn sample_in(c: &CellComplex, e: usize, rng: &mut impl Rng) -> Point {
    let pick = |(lo, hi): (Rat, Rat), rng: &mut dyn rand::RngCore| {
        if lo == hi {
            lo
        } else {
            let t = Rat::new(rng.gen_range(1..64), 64);
            lo + (hi - lo) * t
        }
    };
    Point { x: pick(c.x_span(e), rng), y: pick(c.y_span(e), rng) }
}

fn bend_field_match() -> Verdict {
    let start = Instant::now();
    let mut checked = 0usize;
    for s in 0..50u64 {
        let fi = gen::clean_face(1000 + s, 20, 1 + (s as usize % 3));
        let sc = SectorComplex::build(&fi).map_err(|e| format!("seed {s}: {e}"))?;
        let c = &sc.complex;
        let mut rng = gen::rng(s);
        let mut pts = Vec::new();
        let mut owners = Vec::new();
        for e in 0..c.len() {
            if !c.interior(e) {
                continue;
            }
            pts.push(c.rep(e));
            owners.push(e);
            for _ in 0..3 {
                pts.push(sample_in(c, e, &mut rng));
                owners.push(e);
            }
        }
        for (pi, field) in sc.fields.iter().enumerate() {
            let truth = oracle_bdist_many(&fi, &pts, &fi.ports[pi], 3);
            for ((p, e), t) in pts.iter().zip(&owners).zip(&truth) {
                ensure(field.dist[*e] == *t, || {
                    format!("seed {s} port {pi}: element {e} has {} but oracle says {t} at {p:?}", field.dist[*e])
                })?;
                checked += 1;
            }
        }
    }
    let took = start.elapsed();
    ensure(took < Duration::from_secs(60), || format!("took {took:?}"))?;
    Ok(format!("{checked} point/port pairs, {:.1}s", took.as_secs_f64()))
}

fn one_port_tree() -> Verdict {
    for s in 0..100u64 {
        let fi = gen::clean_face(2000 + s, 20, 1);
        let sc = SectorComplex::build(&fi).map_err(|e| format!("seed {s}: {e}"))?;
        ensure(sc.dec.graph.is_tree(), || format!("seed {s}: sector graph is not a tree"))?;
    }
    Ok("100/100 trees".into())
}

/// The 50-instance suite with 2 to 4 ports shared by several criteria.
fn multi_port_suite() -> Vec<FaceInstance> {
    (0..50u64).map(|s| gen::clean_face(3000 + s, 20, 2 + (s as usize % 3))).collect()
}

fn sector_count_bound() -> Verdict {
    let mut worst = 0.0f64;
    let suite: Vec<FaceInstance> = (0..100u64)
        .map(|s| gen::clean_face(2000 + s, 20, 1))
        .chain(multi_port_suite())
        .collect();
    for (i, fi) in suite.iter().enumerate() {
        let sc = SectorComplex::build(fi).map_err(|e| e.to_string())?;
        let x = fi.drawing.feature_points().len();
        let n = sc.dec.sectors.len();
        ensure(n <= 9 * x * x, || format!("instance {i}: {n} sectors for {x} feature points"))?;
        worst = worst.max(n as f64 / (9 * x * x) as f64);
    }
    Ok(format!("{} instances, max ratio {worst:.3}", suite.len()))
}

fn prefix_spread() -> Verdict {
    let mut pairs = 0usize;
    for (i, fi) in multi_port_suite().iter().enumerate() {
        let sc = SectorComplex::build(fi).map_err(|e| e.to_string())?;
        for t in 1..fi.ports.len() {
            let parent = sc.prefix(t).map_err(|e| e.to_string())?;
            let child = sc.prefix(t + 1).map_err(|e| e.to_string())?;
            for ps in &parent.sectors {
                let kids: BTreeSet<u32> = ps.elements.iter().map(|e| child.sector_of[*e]).collect();
                let dists: Vec<u32> =
                    kids.iter().map(|k| child.sectors[*k as usize].bvect[t]).collect();
                let (lo, hi) = (*dists.iter().min().unwrap(), *dists.iter().max().unwrap());
                ensure(hi != INF && hi - lo <= 3, || format!("instance {i}, prefix {t}: spread {lo}..{hi}"))?;
                pairs += kids.len() * (kids.len() - 1) / 2;
            }
        }
    }
    Ok(format!("{pairs} child pairs"))
}

fn child_counts_and_maxima() -> Verdict {
    let mut checks = 0usize;
    for (i, fi) in multi_port_suite().iter().enumerate() {
        let sc = SectorComplex::build(fi).map_err(|e| e.to_string())?;
        let q = fi.ports.len();
        for s in &sc.dec.sectors {
            ensure(s.xi_max <= q, || format!("instance {i}: sector {} has xi_max {} > {q}", s.id, s.xi_max))?;
            checks += 1;
        }
        for t in 1..q {
            let parent = sc.prefix(t).map_err(|e| e.to_string())?;
            let child = sc.prefix(t + 1).map_err(|e| e.to_string())?;
            for ps in &parent.sectors {
                let kids: BTreeSet<u32> = ps.elements.iter().map(|e| child.sector_of[*e]).collect();
                ensure(kids.len() <= 4 + ps.xi_max, || {
                    format!("instance {i}, prefix {t}: {} children, parent xi_max {}", kids.len(), ps.xi_max)
                })?;
                for k in &kids {
                    let cs = &child.sectors[*k as usize];
                    ensure(cs.xi_max <= ps.xi_max, || {
                        format!("instance {i}, prefix {t}: child xi_max {} above parent {}", cs.xi_max, ps.xi_max)
                    })?;
                }
                checks += 1;
            }
        }
    }
    Ok(format!("{checks} checks"))
}

fn critical_corner_bound() -> Verdict {
    let mut worst = 0usize;
    for (i, fi) in multi_port_suite().iter().enumerate() {
        let sc = SectorComplex::build(fi).map_err(|e| e.to_string())?;
        let k = fi.k().max(1);
        let crit = critical_corners(&sc.complex, &sc.dec, &sc.reflex);
        for s in 0..sc.dec.sectors.len() {
            for d in Dir::ALL {
                let n = sd_critical(&sc.complex, &sc.dec, &crit, s, d).len();
                worst = worst.max(n);
                ensure(n <= 4 * k, || format!("instance {i}: sector {s} has {n} critical corners towards {d:?}"))?;
            }
        }
    }
    Ok(format!("max per direction {worst}"))
}

fn formulas() -> Verdict {
    ensure(subgridsize(1) == 399, || format!("subgridsize(1) = {}", subgridsize(1)))?;
    ensure(subgridsize(2) == 1874, || format!("subgridsize(2) = {}", subgridsize(2)))?;
    ensure(cut_slots(1) == 8, || format!("cut_slots(1) = {}", cut_slots(1)))?;
    ensure(cut_slots(2) == 24, || format!("cut_slots(2) = {}", cut_slots(2)))?;
    Ok("399, 1874, 8, 24".into())
}

fn strip_and_compress() -> Verdict {
    let mut applied = 0usize;
    let mut s = 0u64;
    while applied < 200 {
        s += 1;
        ensure(s < 2000, || format!("only {applied} applications after {s} drawings"))?;
        let d = gen::cycle_drawing(5000 + s, 16);
        let mut rng = gen::rng(s);
        let bb = d.bbox().unwrap();
        let before = shape_descriptor(&d);
        let bends: Vec<usize> = d.edges.keys().map(|k| count_bends(&d, |e| e == k)).collect();
        // a line strictly between feature coordinates
        let vertical = rng.gen_bool(0.5);
        let (lo, hi) = if vertical { (bb.lo.x, bb.hi.x) } else { (bb.lo.y, bb.hi.y) };
        let at = lo + (hi - lo) * Rat::new(rng.gen_range(1..16) * 2 + 1, 34);
        let line = if vertical { AxisLine::V(at) } else { AxisLine::H(at) };
        if d.feature_points().iter().any(|p| if vertical { p.x == at } else { p.y == at }) {
            continue;
        }
        let out = match rng.gen_range(0..3) {
            0 => strip_op(&d, line, Rat::new(rng.gen_range(1..8), 2), StripMode::Add),
            1 => {
                let Some(room) = feature_clearance(&d, line) else { continue };
                strip_op(&d, line, room * Rat::new(rng.gen_range(1..8), 8), StripMode::Remove)
            }
            _ => {
                // everything right of the line (or above it) is selected
                let pad = Rat::int(1);
                let rect = if vertical {
                    Bbox { lo: Point { x: at, y: bb.lo.y - pad }, hi: Point { x: bb.hi.x + pad, y: bb.hi.y + pad } }
                } else {
                    Bbox { lo: Point { x: bb.lo.x - pad, y: at }, hi: Point { x: bb.hi.x + pad, y: bb.hi.y + pad } }
                };
                compress_selection(&d, &rect, Rat::new(1, rng.gen_range(1..5)))
            }
        };
        let out = out.map_err(|e| format!("drawing {s}: operation refused: {e}"))?;
        ensure(validate(&out).is_valid(), || format!("drawing {s}: result invalid"))?;
        ensure(shape_descriptor(&out) == before, || format!("drawing {s}: shape changed"))?;
        let after: Vec<usize> = out.edges.keys().map(|k| count_bends(&out, |e| e == k)).collect();
        ensure(after == bends, || format!("drawing {s}: bend counts changed"))?;
        applied += 1;
    }
    Ok("200/200".into())
}

fn oracle_beta(fi: &FaceInstance, cands: Option<&[Point]>, cap: u32) -> Result<Option<u32>, String> {
    oracle_solve(fi, cands, cap, None).map(|o| o.map(|s| s.beta)).map_err(|e| e.to_string())
}

/// Boundary points where the face turns; anchors in the middle of a side
/// do not count.
fn corners(fi: &FaceInstance) -> usize {
    let mut leaving: std::collections::BTreeMap<Point, BTreeSet<Dir>> = Default::default();
    for pl in fi.drawing.edges.values() {
        for w in pl.points.windows(2) {
            if let (Some(d), Some(back)) = (w[0].dir_to(&w[1]), w[1].dir_to(&w[0])) {
                leaving.entry(w[0]).or_default().insert(d);
                leaving.entry(w[1]).or_default().insert(back);
            }
        }
    }
    leaving.values().filter(|ds| !(ds.len() == 2 && ds.iter().all(|d| ds.contains(&d.opposite())))).count()
}

fn tiny_oracle_equivalence() -> Verdict {
    let suite = gen::tiny_suite();
    let (mut inner, mut outer, mut pruned) = (0, 0, 0);
    let mut slowest = 0.0f64;
    for case in &suite {
        let fi = &case.face;
        let corners = corners(fi);
        ensure(fi.k() <= 2 && fi.missing_edges.len() <= 4 && corners <= 12, || format!("{} is not tiny", case.name))?;
        let t = Instant::now();
        let out = solve_face(fi, &sequential(), 8).map_err(|e| format!("{}: {e}", case.name))?;
        let took = t.elapsed();
        gate_face(case.name, fi, &out);
        let truth = oracle_beta(fi, case.candidates.as_deref(), 8).map_err(|e| format!("{}: {e}", case.name))?;
        ensure(out.beta == truth, || format!("{}: solver {:?}, oracle {truth:?}", case.name, out.beta))?;
        ensure(took < Duration::from_secs(120), || format!("{}: took {took:?}", case.name))?;
        slowest = slowest.max(took.as_secs_f64());
        if fi.outer {
            outer += 1;
        } else {
            inner += 1;
        }
        if make_clean(fi) != *fi {
            pruned += 1;
        }
    }
    ensure(suite.len() >= 20 && inner > 0 && outer > 0 && pruned > 0, || format!("suite mix {inner}/{outer}/{pruned}"))?;
    Ok(format!("{} instances ({inner} inner, {outer} outer, {pruned} pruned), slowest {slowest:.1}s", suite.len()))
}

/// Tiny random faces that contain at least one redundant region.
fn redundant_faces(n: usize) -> Vec<FaceInstance> {
    let mut out = Vec::new();
    for s in 0u64.. {
        let mut rng = gen::rng(7000 + s);
        let (pts, seed) = gen::polygon(&mut rng, 6, 10, 12);
        let fi = gen::face_instance(&mut rng, &pts, seed, 1 + (s as usize % 2));
        if fi.check().is_ok() && make_clean(&fi) != fi {
            out.push(fi);
            if out.len() == n {
                break;
            }
        }
    }
    out
}

fn reduction_equivalence() -> Verdict {
    for (i, fi) in redundant_faces(10).iter().enumerate() {
        let clean = make_clean(fi);
        let a = oracle_beta(fi, oracle_candidates(fi).as_deref(), 8)?;
        let b = oracle_beta(&clean, oracle_candidates(&clean).as_deref(), 8)?;
        ensure(a == b, || format!("redundant face {i}: {a:?} before pruning, {b:?} after"))?;
        let out = solve_face(&clean, &sequential(), 8).map_err(|e| e.to_string())?;
        gate_face("pruned face", &clean, &out);
    }
    let outer: Vec<gen::TinyCase> = gen::tiny_suite().into_iter().filter(|c| c.face.outer && c.face.k() == 1).collect();
    ensure(outer.len() >= 5, || format!("only {} outer faces", outer.len()))?;
    let mut branches = 0;
    for case in outer.iter().take(5) {
        let direct = oracle_beta(&case.face, case.candidates.as_deref(), 8)?
            .ok_or_else(|| format!("{}: oracle finds nothing", case.name))?;
        // with the cap at the direct optimum, any branch below it shows up
        // and one branch must reach it
        let mut best: Option<u32> = None;
        for br in cut_branches(&frame_outer(&case.face), 0).map_err(|e| e.to_string())? {
            if br.instance.check().is_err() {
                continue;
            }
            branches += 1;
            let cands = oracle_candidates(&br.instance);
            if let Some(b) = oracle_beta(&br.instance, cands.as_deref(), direct)? {
                best = Some(best.map_or(b, |x| x.min(b)));
            }
        }
        ensure(best == Some(direct), || format!("{}: direct {direct}, best branch {best:?}", case.name))?;
    }
    Ok(format!("10 pruned faces invariant, 5 outer faces over {branches} cut branches"))
}

fn soundness_gate() -> Verdict {
    for s in 0..30u64 {
        let fi = gen::clean_face(9000 + s, 12, 1 + (s as usize % 3));
        let out = solve_face(&fi, &sequential(), 8).map_err(|e| format!("clean face {s}: {e}"))?;
        gate_face("random clean face", &fi, &out);
    }
    let (inst, _) = gen::showcase();
    for execution in [Execution::Sequential, Execution::Parallel] {
        let res = solve_bmoe(&inst, &SolveOptions { execution, ..sequential() }).map_err(|e| e.to_string())?;
        gate_bmoe("sample instance", &inst, &res);
    }
    let g = GATE.lock().unwrap();
    ensure(g.1.is_empty(), || format!("{} violations, first: {}", g.1.len(), g.1[0]))?;
    Ok(format!("{} returned drawings, 0 violations", g.0))
}

fn sample_instance() -> Verdict {
    let (inst, known) = gen::showcase();
    let missing = inst.missing_edges();
    let known_bends = count_bends(&known, |k| missing.contains(k));
    ensure(validate(&known).is_valid() && known_bends == 7, || format!("hand-drawn extension has {known_bends} bends"))?;
    let res = solve_bmoe(&inst, &sequential()).map_err(|e| e.to_string())?;
    gate_bmoe("sample instance", &inst, &res);
    let beta = res.beta().ok_or("no extension found")?;
    ensure(beta <= 7, || format!("beta {beta}"))?;
    let d = res.drawing().ok_or("no drawing")?;
    ensure(validate(d).is_valid(), || "returned drawing is invalid".into())?;
    Ok(format!("beta {beta} (hand-drawn extension has 7), drawing valid"))
}

fn main() {
    let criteria: Vec<(usize, &str, fn() -> Verdict)> = vec![
        (1, "bend field matches fine-lattice oracle", bend_field_match),
        (2, "one-port sector graph is a tree", one_port_tree),
        (3, "sector count within 9x^2", sector_count_bound),
        (4, "child bend-distance spread at most 3", prefix_spread),
        (5, "child counts and xi_max bounds", child_counts_and_maxima),
        (6, "critical corners per direction within 4k", critical_corner_bound),
        (7, "grid and slot formulas", formulas),
        (8, "solver matches oracle on tiny instances", tiny_oracle_equivalence),
        (9, "oracle optimum survives pruning and cutting", reduction_equivalence),
        (10, "strip and compress preserve shape", strip_and_compress),
        (12, "sample instance has an extension within 7 bends", sample_instance),
        (11, "soundness gate over every returned drawing", soundness_gate),
    ];
    let mut failed = 0;
    for (n, name, run) in criteria {
        let t = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match verdict {
            Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail} [{:.1}s]", t.elapsed().as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {why} [{:.1}s]", t.elapsed().as_secs_f64());
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
