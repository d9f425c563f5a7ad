//! Subcommands. Every command prints one JSON value on standard output
//! and reports through its exit code.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use orthext::dp::{solve_bmoe, Execution, SolveOptions, SolveStatus};
use orthext::drawing::validate;
use orthext::error::SolveError;
use orthext::instance::{BmoeInstance, FaceInstance};
use orthext::oracle::oracle_bmoe;
use orthext::reduction::{frame_outer, reduce_to_faces};
use orthext::sector::SectorComplex;
use orthext::td::decompose;
use serde_json::{json, Value};

use crate::doc;
use crate::render::{render, Layer, RenderInputs, RenderSpec};

pub const OK: i32 = 0;
pub const NO_EXTENSION: i32 = 1;
pub const INPUT_ERROR: i32 = 2;
pub const INTERNAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "orthext", version, about = "Bend-minimal extension of partial orthogonal drawings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check a document and its drawing.
    Validate { file: PathBuf },
    /// List the face instances of every reduction branch.
    Reduce { file: PathBuf },
    /// Sector decomposition of one face instance.
    Sectors {
        file: PathBuf,
        #[command(flatten)]
        pick: FacePick,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the full pipeline.
    Solve(SolveArgs),
    /// Brute-force optimum, for tiny instances only.
    Oracle {
        file: PathBuf,
        #[arg(long = "bend-cap", default_value_t = 8)]
        bend_cap: u32,
    },
    /// Draw a document as SVG.
    Render {
        file: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Comma-separated: drawing, sectors, subsectors, grid, solution.
        #[arg(long, value_delimiter = ',', default_value = "drawing")]
        layers: Vec<Layer>,
        /// Solved document whose extra parts form the solution layer.
        #[arg(long)]
        solution: Option<PathBuf>,
        #[command(flatten)]
        pick: FacePick,
        #[arg(long = "grid-scale", default_value_t = 5)]
        grid_scale: usize,
    },
}

#[derive(Args, Debug, Clone, Copy)]
pub struct FacePick {
    #[arg(long, default_value_t = 0)]
    branch: usize,
    #[arg(long, default_value_t = 0)]
    face: usize,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    file: PathBuf,
    #[arg(long = "grid-scale", default_value_t = 5)]
    grid_scale: usize,
    #[arg(long = "bend-cap")]
    bend_cap: Option<u32>,
    /// Overrides the document's budget.
    #[arg(long)]
    budget: Option<u32>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "max-branches")]
    max_branches: Option<usize>,
    /// Extra crossings of the cut line per outer face.
    #[arg(long = "cut-extra", default_value_t = 0)]
    cut_extra: usize,
    #[arg(long)]
    sequential: bool,
    #[arg(long)]
    render: Option<PathBuf>,
    /// Write the solved instance as a document.
    #[arg(long)]
    write: Option<PathBuf>,
}

/// Exit code plus the JSON printed on standard output.
pub struct Outcome {
    pub code: i32,
    pub json: Value,
}

fn fail(code: i32, status: &str, msg: impl ToString) -> Outcome {
    Outcome { code, json: json!({ "beta": null, "status": status, "error": msg.to_string() }) }
}

fn input_error(msg: impl ToString) -> Outcome {
    fail(INPUT_ERROR, "input_error", msg)
}

fn solve_error(e: &SolveError) -> Outcome {
    match e {
        SolveError::Instance(_) | SolveError::Sector(_) => input_error(e),
        SolveError::EnumerationLimit(_) | SolveError::BranchLimit(_) => fail(NO_EXTENSION, "limit", e),
        SolveError::Td(_) | SolveError::Internal(_) => fail(INTERNAL, "internal_error", e),
    }
}

fn read(path: &Path) -> Result<String, Outcome> {
    fs::read_to_string(path).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<BmoeInstance, Outcome> {
    doc::parse(&read(path)?).map_err(input_error)
}

fn write(path: &Path, text: &str) -> Result<(), Outcome> {
    fs::write(path, text).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

/// The chosen face, framed when it is the outer one.
fn pick_face(inst: &BmoeInstance, pick: FacePick) -> Result<FaceInstance, Outcome> {
    let branches = reduce_to_faces(inst).map_err(input_error)?;
    let br = branches.get(pick.branch).ok_or_else(|| input_error(format!("no branch {}", pick.branch)))?;
    let fi = br.faces.get(pick.face).ok_or_else(|| input_error(format!("branch {} has no face {}", pick.branch, pick.face)))?;
    Ok(if fi.outer { frame_outer(fi) } else { fi.clone() })
}

pub fn run(cli: Cli) -> Outcome {
    match execute(cli.command) {
        Ok(o) | Err(o) => o,
    }
}

fn execute(cmd: Command) -> Result<Outcome, Outcome> {
    match cmd {
        Command::Validate { file } => {
            let inst = doc::parse_unchecked(&read(&file)?).map_err(input_error)?;
            let report = validate(&inst.drawing);
            let check = inst.check();
            let valid = report.is_valid() && check.is_ok();
            let json = json!({
                "valid": valid,
                "violations": report.violations,
                "error": check.err().map(|e| e.to_string()),
                "kappa": inst.kappa(),
            });
            Ok(Outcome { code: if valid { OK } else { INPUT_ERROR }, json })
        }
        Command::Reduce { file } => {
            let inst = load(&file)?;
            let branches = reduce_to_faces(&inst).map_err(input_error)?;
            let list: Vec<Value> =
                branches.iter().map(|b| json!({ "offset": b.offset, "faces": b.faces, "subdivisions": b.subdivisions })).collect();
            Ok(Outcome { code: OK, json: json!({ "branches": list }) })
        }
        Command::Sectors { file, pick, seed } => {
            let inst = load(&file)?;
            let fi = pick_face(&inst, pick)?;
            let sc = SectorComplex::build(&fi).map_err(input_error)?;
            let g = &sc.dec.graph;
            let td = decompose(&g.adjacency(), seed.unwrap_or(0));
            let mut dot = String::from("graph sectors {\n");
            for s in &sc.dec.sectors {
                dot.push_str(&format!("  {} [label=\"{:?}\"];\n", s.id, s.bvect));
            }
            for (a, b) in g.edges.keys() {
                dot.push_str(&format!("  {a} -- {b};\n"));
            }
            dot.push_str("}\n");
            let sectors: Vec<Value> = sc
                .dec
                .sectors
                .iter()
                .map(|s| json!({ "id": s.id, "bvect": s.bvect, "xi_max": s.xi_max, "cells": s.elements.len() }))
                .collect();
            let json = json!({
                "sectors": sectors,
                "sector_count": sc.dec.sectors.len(),
                "adjacencies": g.edges.len(),
                "is_tree": g.is_tree(),
                "subsectors": sc.subsectors.len(),
                "treewidth": td.width(),
                "dot": dot,
            });
            Ok(Outcome { code: OK, json })
        }
        Command::Solve(a) => {
            let inst = load(&a.file)?;
            let execution = if a.sequential { Execution::Sequential } else { Execution::default() };
            let opts = SolveOptions {
                grid_scale: a.grid_scale,
                bend_cap: a.bend_cap,
                budget: a.budget.or(inst.budget),
                seed: a.seed,
                max_branches: a.max_branches,
                cut_extra: a.cut_extra,
                execution,
                ..SolveOptions::default()
            };
            let res = solve_bmoe(&inst, &opts).map_err(|e| solve_error(&e))?;
            let (code, status) = match &res.status {
                SolveStatus::Optimum { .. } => (OK, "optimum"),
                SolveStatus::NoExtension { .. } => (NO_EXTENSION, "no_extension"),
            };
            if let Some(d) = res.drawing() {
                if let Some(path) = &a.render {
                    let spec = RenderSpec { layers: vec![Layer::Drawing, Layer::Solution], ..RenderSpec::default() };
                    let svg = render(&RenderInputs { drawing: Some(&inst.drawing), solution: Some(d), ..Default::default() }, &spec);
                    write(path, &svg)?;
                }
                if let Some(path) = &a.write {
                    let solved = BmoeInstance { drawing: d.clone(), fixed_ports: Vec::new(), ..inst.clone() };
                    write(path, &doc::serialize(&solved))?;
                }
            }
            Ok(Outcome { code, json: json!({ "beta": res.beta(), "status": status, "stats": res.stats }) })
        }
        Command::Oracle { file, bend_cap } => {
            let inst = load(&file)?;
            match oracle_bmoe(&inst, bend_cap) {
                Ok(Some(beta)) => Ok(Outcome { code: OK, json: json!({ "beta": beta, "status": "optimum" }) }),
                Ok(None) => Ok(Outcome { code: NO_EXTENSION, json: json!({ "beta": null, "status": "no_extension" }) }),
                Err(e) => Err(input_error(e)),
            }
        }
        Command::Render { file, out, layers, solution, pick, grid_scale } => {
            let inst = load(&file)?;
            let solved = match &solution {
                Some(p) => Some(doc::parse_unchecked(&read(p)?).map_err(input_error)?.drawing),
                None => None,
            };
            let wants_sectors = layers.iter().any(|l| matches!(l, Layer::Sectors | Layer::Subsectors | Layer::Grid));
            let sc = if wants_sectors {
                let fi = pick_face(&inst, pick)?;
                Some(SectorComplex::build(&fi).map_err(input_error)?)
            } else {
                None
            };
            let spec = RenderSpec { layers, grid_scale, ..RenderSpec::default() };
            let inputs = RenderInputs { drawing: Some(&inst.drawing), sectors: sc.as_ref(), solution: solved.as_ref() };
            let svg = render(&inputs, &spec);
            write(&out, &svg)?;
            Ok(Outcome { code: OK, json: json!({ "written": out, "bytes": svg.len() }) })
        }
    }
}
