//! Arrangement of the axis lines through a set of feature points, with the
//! cells blocked by drawn segments and the cells of one marked face.
//!
//! Cells are addressed by index pairs `(i, j)`: odd indices sit on a line,
//! even indices on the open interval between two lines (or an unbounded end).

use std::collections::VecDeque;

use crate::geom::{AxisSegment, Dir, Point, Rat};

pub type Cell = (usize, usize);

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CellKind {
    Face,
    /// Open piece of a horizontal line.
    HEdge,
    /// Open piece of a vertical line.
    VEdge,
    Node,
}

#[derive(Clone, Debug)]
pub struct Arrangement {
    pub xs: Vec<Rat>,
    pub ys: Vec<Rat>,
    pub ni: usize,
    pub nj: usize,
    /// Index of a segment covering the cell, `u32::MAX` if free.
    seg_of: Vec<u32>,
    /// Component label of free cells, `u32::MAX` on segments.
    comp: Vec<u32>,
    pub n_components: usize,
    pub segments: Vec<AxisSegment>,
}

fn locate_1d(lines: &[Rat], v: Rat) -> usize {
    match lines.binary_search(&v) {
        Ok(k) => 2 * k + 1,
        Err(k) => 2 * k,
    }
}

impl Arrangement {
    /// Lines through every segment endpoint, every point in `points` and the
    /// extra coordinates.
    pub fn new(segments: &[AxisSegment], points: &[Point], extra_x: &[Rat], extra_y: &[Rat]) -> Arrangement {
        let mut xs: Vec<Rat> = Vec::new();
        let mut ys: Vec<Rat> = Vec::new();
        for s in segments {
            xs.extend([s.a.x, s.b.x]);
            ys.extend([s.a.y, s.b.y]);
        }
        for p in points {
            xs.push(p.x);
            ys.push(p.y);
        }
        xs.extend_from_slice(extra_x);
        ys.extend_from_slice(extra_y);
        xs.sort();
        xs.dedup();
        ys.sort();
        ys.dedup();
        let ni = 2 * xs.len() + 1;
        let nj = 2 * ys.len() + 1;
        let mut arr = Arrangement {
            xs,
            ys,
            ni,
            nj,
            seg_of: vec![u32::MAX; ni * nj],
            comp: vec![u32::MAX; ni * nj],
            n_components: 0,
            segments: segments.to_vec(),
        };
        for (k, s) in segments.iter().enumerate() {
            let (lo, hi) = (arr.locate(&s.lo()), arr.locate(&s.hi()));
            for i in lo.0..=hi.0 {
                for j in lo.1..=hi.1 {
                    let id = arr.idx((i, j));
                    if arr.seg_of[id] == u32::MAX {
                        arr.seg_of[id] = k as u32;
                    }
                }
            }
        }
        for p in points {
            let id = arr.idx(arr.locate(p));
            if arr.seg_of[id] == u32::MAX {
                arr.seg_of[id] = u32::MAX - 1;
            }
        }
        arr.label_components();
        arr
    }

    fn label_components(&mut self) {
        let mut next = 0u32;
        for start in 0..self.ni * self.nj {
            if self.seg_of[start] != u32::MAX || self.comp[start] != u32::MAX {
                continue;
            }
            self.comp[start] = next;
            let mut queue = VecDeque::from([start]);
            while let Some(id) = queue.pop_front() {
                let c = self.cell_of(id);
                for d in Dir::ALL {
                    if let Some(n) = self.step(c, d) {
                        let nid = self.idx(n);
                        if self.seg_of[nid] == u32::MAX && self.comp[nid] == u32::MAX {
                            self.comp[nid] = next;
                            queue.push_back(nid);
                        }
                    }
                }
            }
            next += 1;
        }
        self.n_components = next as usize;
    }

    pub fn idx(&self, c: Cell) -> usize {
        c.1 * self.ni + c.0
    }

    pub fn cell_of(&self, id: usize) -> Cell {
        (id % self.ni, id / self.ni)
    }

    pub fn n_cells(&self) -> usize {
        self.ni * self.nj
    }

    pub fn locate(&self, p: &Point) -> Cell {
        (locate_1d(&self.xs, p.x), locate_1d(&self.ys, p.y))
    }

    pub fn kind(&self, c: Cell) -> CellKind {
        match (c.0 % 2 == 1, c.1 % 2 == 1) {
            (false, false) => CellKind::Face,
            (false, true) => CellKind::HEdge,
            (true, false) => CellKind::VEdge,
            (true, true) => CellKind::Node,
        }
    }

    pub fn step(&self, c: Cell, d: Dir) -> Option<Cell> {
        let (dx, dy) = d.delta();
        let i = c.0 as i64 + dx as i64;
        let j = c.1 as i64 + dy as i64;
        if i < 0 || j < 0 || i >= self.ni as i64 || j >= self.nj as i64 {
            None
        } else {
            Some((i as usize, j as usize))
        }
    }

    /// Cells sharing a side or a corner with `c`.
    pub fn ring(&self, c: Cell) -> Vec<Cell> {
        let mut out = Vec::with_capacity(8);
        for di in -1i64..=1 {
            for dj in -1i64..=1 {
                if di == 0 && dj == 0 {
                    continue;
                }
                let (i, j) = (c.0 as i64 + di, c.1 as i64 + dj);
                if i >= 0 && j >= 0 && i < self.ni as i64 && j < self.nj as i64 {
                    out.push((i as usize, j as usize));
                }
            }
        }
        out
    }

    pub fn is_blocked(&self, c: Cell) -> bool {
        self.seg_of[self.idx(c)] != u32::MAX
    }

    /// Segment covering a blocked cell.
    pub fn segment_at(&self, c: Cell) -> Option<usize> {
        let s = self.seg_of[self.idx(c)];
        if s >= u32::MAX - 1 {
            None
        } else {
            Some(s as usize)
        }
    }

    pub fn component(&self, c: Cell) -> Option<usize> {
        let v = self.comp[self.idx(c)];
        (v != u32::MAX).then_some(v as usize)
    }

    pub fn is_unbounded(&self, c: Cell) -> bool {
        c.0 == 0 || c.1 == 0 || c.0 == self.ni - 1 || c.1 == self.nj - 1
    }

    fn coord_rep(lines: &[Rat], i: usize) -> Rat {
        if i % 2 == 1 {
            return lines[(i - 1) / 2];
        }
        let k = i / 2;
        if lines.is_empty() {
            Rat::zero()
        } else if k == 0 {
            lines[0] - Rat::one()
        } else if k == lines.len() {
            lines[k - 1] + Rat::one()
        } else {
            Rat::mid(lines[k - 1], lines[k])
        }
    }

    /// A point in the relative interior of the cell.
    pub fn rep(&self, c: Cell) -> Point {
        Point { x: Self::coord_rep(&self.xs, c.0), y: Self::coord_rep(&self.ys, c.1) }
    }

    /// Open coordinate span of index `i` on an axis; `None` for unbounded ends.
    pub fn span(lines: &[Rat], i: usize) -> Option<(Rat, Rat)> {
        if i % 2 == 1 {
            let v = lines[(i - 1) / 2];
            return Some((v, v));
        }
        let k = i / 2;
        if k == 0 || k == lines.len() {
            None
        } else {
            Some((lines[k - 1], lines[k]))
        }
    }

    pub fn x_span(&self, i: usize) -> Option<(Rat, Rat)> {
        Self::span(&self.xs, i)
    }

    pub fn y_span(&self, j: usize) -> Option<(Rat, Rat)> {
        Self::span(&self.ys, j)
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.n_cells()).map(move |id| self.cell_of(id))
    }
}

/// One face of a drawing: the arrangement plus the component of the seed.
#[derive(Clone, Debug)]
pub struct FaceRegion {
    pub arr: Arrangement,
    pub face: usize,
}

impl FaceRegion {
    pub fn new(segments: &[AxisSegment], points: &[Point], seed: &Point) -> Option<FaceRegion> {
        Self::with_lines(segments, points, seed, &[], &[])
    }

    pub fn with_lines(
        segments: &[AxisSegment],
        points: &[Point],
        seed: &Point,
        extra_x: &[Rat],
        extra_y: &[Rat],
    ) -> Option<FaceRegion> {
        let arr = Arrangement::new(segments, points, extra_x, extra_y);
        let face = arr.component(arr.locate(seed))?;
        Some(FaceRegion { arr, face })
    }

    pub fn inside(&self, c: Cell) -> bool {
        self.arr.component(c) == Some(self.face)
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.inside(self.arr.locate(p))
    }

    pub fn bounded(&self) -> bool {
        !self.arr.cells().any(|c| self.inside(c) && self.arr.is_unbounded(c))
    }

    /// Blocked cells touching the face.
    pub fn on_boundary(&self, c: Cell) -> bool {
        self.arr.is_blocked(c) && self.arr.ring(c).into_iter().any(|n| self.inside(n))
    }

    pub fn point_on_boundary(&self, p: &Point) -> bool {
        let c = self.arr.locate(p);
        // a point off the lines is never blocked
        self.on_boundary(c)
    }

    /// Whether the open axis segment `pq` stays inside the face.
    /// Both endpoints must be arrangement-aligned in the moving axis or inside a cell.
    pub fn segment_inside(&self, p: &Point, q: &Point) -> bool {
        let Some(d) = p.dir_to(q) else { return false };
        let mut c = self.arr.locate(p);
        let end = self.arr.locate(q);
        if c == end {
            return self.inside(c);
        }
        loop {
            let Some(n) = self.arr.step(c, d) else { return false };
            if n == end {
                return true;
            }
            if !self.inside(n) {
                return false;
            }
            c = n;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: i64, y: i64) -> Point {
        Point::new(x, y)
    }

    fn ring_segments(pts: &[Point]) -> Vec<AxisSegment> {
        (0..pts.len()).map(|i| AxisSegment::new(pts[i], pts[(i + 1) % pts.len()]).unwrap()).collect()
    }

    #[test]
    fn square_has_inner_and_outer_component() {
        let sq = ring_segments(&[p(0, 0), p(2, 0), p(2, 2), p(0, 2)]);
        let arr = Arrangement::new(&sq, &[], &[], &[]);
        assert_eq!(arr.n_components, 2);
        let inner = FaceRegion::new(&sq, &[], &p(1, 1)).unwrap();
        assert!(inner.bounded());
        assert!(inner.contains(&Point::new(Rat::new(1, 2), Rat::new(3, 2))));
        assert!(!inner.contains(&p(3, 1)));
        let outer = FaceRegion::new(&sq, &[], &p(5, 5)).unwrap();
        assert!(!outer.bounded());
        assert!(outer.contains(&p(-1, 1)));
    }

    #[test]
    fn slit_keeps_face_connected() {
        let mut segs = ring_segments(&[p(0, 0), p(4, 0), p(4, 4), p(0, 4)]);
        segs.push(AxisSegment::new(p(2, 0), p(2, 3)).unwrap());
        let f = FaceRegion::new(&segs, &[], &p(1, 1)).unwrap();
        assert!(f.contains(&p(3, 1)));
        assert!(!f.segment_inside(&p(1, 1), &p(3, 1)));
        assert!(f.segment_inside(&Point::new(1, Rat::new(7, 2)), &Point::new(3, Rat::new(7, 2))));
        assert!(f.point_on_boundary(&p(2, 3)));
    }

    #[test]
    fn hole_separates_components() {
        let mut segs = ring_segments(&[p(0, 0), p(6, 0), p(6, 6), p(0, 6)]);
        segs.extend(ring_segments(&[p(2, 2), p(4, 2), p(4, 4), p(2, 4)]));
        let annulus = FaceRegion::new(&segs, &[], &p(1, 1)).unwrap();
        assert!(annulus.contains(&p(5, 5)));
        assert!(!annulus.contains(&p(3, 3)));
        assert_eq!(annulus.arr.n_components, 3);
    }
}
