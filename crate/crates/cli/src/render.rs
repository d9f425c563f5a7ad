//! SVG output. The y axis points up, as in the documents.

use std::fmt::Write;

use orthext::drawing::Drawing;
use orthext::geom::{Point, Rat};
use orthext::region::CellKind;
use orthext::sector::{sector_grid, SectorComplex};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Layer {
    Drawing,
    Sectors,
    Subsectors,
    Grid,
    Solution,
}

impl std::str::FromStr for Layer {
    type Err = String;

    fn from_str(s: &str) -> Result<Layer, String> {
        match s {
            "drawing" => Ok(Layer::Drawing),
            "sectors" => Ok(Layer::Sectors),
            "subsectors" => Ok(Layer::Subsectors),
            "grid" => Ok(Layer::Grid),
            "solution" => Ok(Layer::Solution),
            _ => Err(format!("unknown layer `{s}`")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RenderSpec {
    pub layers: Vec<Layer>,
    /// Pixels per unit.
    pub scale: f64,
    pub margin: f64,
    pub grid_scale: usize,
}

impl Default for RenderSpec {
    fn default() -> RenderSpec {
        RenderSpec { layers: vec![Layer::Drawing, Layer::Solution], scale: 40.0, margin: 20.0, grid_scale: 5 }
    }
}

/// What a picture can show. Layers whose input is absent are skipped.
#[derive(Default)]
pub struct RenderInputs<'a> {
    pub drawing: Option<&'a Drawing>,
    pub sectors: Option<&'a SectorComplex>,
    /// Full drawing after solving; parts absent from `drawing` get their own stroke.
    pub solution: Option<&'a Drawing>,
}

struct Frame {
    lo: (f64, f64),
    hi: (f64, f64),
    scale: f64,
    margin: f64,
}

impl Frame {
    fn x(&self, v: Rat) -> f64 {
        (v.to_f64() - self.lo.0) * self.scale + self.margin
    }

    fn y(&self, v: Rat) -> f64 {
        (self.hi.1 - v.to_f64()) * self.scale + self.margin
    }

    fn pt(&self, p: &Point) -> (f64, f64) {
        (self.x(p.x), self.y(p.y))
    }
}

/// Distinct fill for the `i`-th region.
fn color(i: usize) -> String {
    let hue = (i as f64 * 137.508) % 360.0;
    format!("hsl({hue:.1},65%,78%)")
}

fn polyline(out: &mut String, f: &Frame, pts: &[Point], class: &str, stroke: &str, width: f64) {
    let coords: Vec<String> = pts.iter().map(|p| f.pt(p)).map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    let _ = writeln!(
        out,
        r#"<polyline class="{class}" points="{}" fill="none" stroke="{stroke}" stroke-width="{width}"/>"#,
        coords.join(" ")
    );
}

fn vertices(out: &mut String, f: &Frame, d: &Drawing, skip: Option<&Drawing>, fill: &str) {
    for (id, p) in &d.vertices {
        if skip.is_some_and(|s| s.vertices.contains_key(id)) {
            continue;
        }
        let (x, y) = f.pt(p);
        let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="{fill}"/>"#);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" font-size="11">{id}</text>"#, x + 5.0, y - 5.0);
    }
}

pub fn render(inputs: &RenderInputs, spec: &RenderSpec) -> String {
    let mut pts: Vec<Point> = Vec::new();
    for d in [inputs.drawing, inputs.solution].into_iter().flatten() {
        pts.extend(d.feature_points());
    }
    if let Some(sc) = inputs.sectors {
        for e in 0..sc.complex.len() {
            let (x0, x1) = sc.complex.x_span(e);
            let (y0, y1) = sc.complex.y_span(e);
            pts.extend([Point { x: x0, y: y0 }, Point { x: x1, y: y1 }]);
        }
    }
    let xs = pts.iter().map(|p| p.x.to_f64());
    let ys = pts.iter().map(|p| p.y.to_f64());
    let lo = (xs.clone().fold(f64::INFINITY, f64::min), ys.clone().fold(f64::INFINITY, f64::min));
    let hi = (xs.fold(f64::NEG_INFINITY, f64::max), ys.fold(f64::NEG_INFINITY, f64::max));
    let (lo, hi) = if pts.is_empty() { ((0.0, 0.0), (1.0, 1.0)) } else { (lo, hi) };
    let f = Frame { lo, hi, scale: spec.scale, margin: spec.margin };
    let w = (hi.0 - lo.0) * spec.scale + 2.0 * spec.margin;
    let h = (hi.1 - lo.1) * spec.scale + 2.0 * spec.margin;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.2} {h:.2}">"#
    );
    let mut layers = spec.layers.clone();
    layers.sort();
    layers.dedup();
    for layer in layers {
        match (layer, inputs.sectors, inputs.drawing, inputs.solution) {
            (Layer::Sectors, Some(sc), _, _) => {
                let c = &sc.complex;
                for s in &sc.dec.sectors {
                    let _ = writeln!(out, r#"<g class="sector" data-id="{}" fill="{}">"#, s.id, color(s.id));
                    let mut label: Option<(usize, f64)> = None;
                    for &e in &s.elements {
                        if c.kind(e) != CellKind::Face {
                            continue;
                        }
                        let (x0, x1) = c.x_span(e);
                        let (y0, y1) = c.y_span(e);
                        let (w, h) = (f.x(x1) - f.x(x0), f.y(y0) - f.y(y1));
                        let _ = writeln!(
                            out,
                            r#"<rect x="{:.2}" y="{:.2}" width="{w:.2}" height="{h:.2}"/>"#,
                            f.x(x0),
                            f.y(y1)
                        );
                        if label.map_or(true, |(_, a)| w * h > a) {
                            label = Some((e, w * h));
                        }
                    }
                    if let Some((e, _)) = label {
                        let (x, y) = f.pt(&c.rep(e));
                        let text: Vec<String> = s.bvect.iter().map(|b| b.to_string()).collect();
                        let _ = writeln!(
                            out,
                            r#"<text x="{x:.2}" y="{y:.2}" font-size="10" fill="black" text-anchor="middle">({})</text>"#,
                            text.join(",")
                        );
                    }
                    out.push_str("</g>\n");
                }
            }
            (Layer::Subsectors, Some(sc), _, _) => {
                let c = &sc.complex;
                for v in &sc.subsectors {
                    let _ = writeln!(
                        out,
                        r#"<g class="subsector" data-id="{}" fill="none" stroke="{}" stroke-dasharray="3,2">"#,
                        v.id,
                        color(v.id).replace("78%", "40%")
                    );
                    for &e in &v.elements {
                        if c.kind(e) != CellKind::Face {
                            continue;
                        }
                        let (x0, x1) = c.x_span(e);
                        let (y0, y1) = c.y_span(e);
                        let _ = writeln!(
                            out,
                            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/>"#,
                            f.x(x0),
                            f.y(y1),
                            f.x(x1) - f.x(x0),
                            f.y(y0) - f.y(y1)
                        );
                    }
                    out.push_str("</g>\n");
                }
            }
            (Layer::Grid, Some(sc), _, _) => {
                let grid = sector_grid(&sc.complex, &sc.subsectors, spec.grid_scale);
                out.push_str("<g class=\"grid\" fill=\"#555\">\n");
                for (_, p) in grid.all_points() {
                    let (x, y) = f.pt(p);
                    let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="1.2"/>"#);
                }
                out.push_str("</g>\n");
            }
            (Layer::Drawing, _, Some(d), _) => {
                out.push_str("<g class=\"drawing\">\n");
                for pl in d.edges.values() {
                    polyline(&mut out, &f, &pl.points, "edge", "black", 2.0);
                }
                vertices(&mut out, &f, d, None, "black");
                out.push_str("</g>\n");
            }
            (Layer::Solution, _, base, Some(sol)) => {
                out.push_str("<g class=\"solution\">\n");
                for (k, pl) in &sol.edges {
                    if base.is_some_and(|b| b.edges.contains_key(k)) {
                        continue;
                    }
                    polyline(&mut out, &f, &pl.points, "missing-edge", "#d62728", 2.5);
                }
                vertices(&mut out, &f, sol, base, "#d62728");
                out.push_str("</g>\n");
            }
            _ => {}
        }
    }
    out.push_str("</svg>\n");
    out
}
