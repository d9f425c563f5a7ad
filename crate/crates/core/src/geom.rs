//! Exact axis-aligned geometry over rationals.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::GeomError;

/// Exact rational number with a positive, reduced denominator.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Rat(Ratio<i128>);

impl Rat {
    pub fn new(numer: i128, denom: i128) -> Rat {
        assert!(denom != 0, "zero denominator");
        Rat(Ratio::new(numer, denom))
    }

    pub fn int(n: i128) -> Rat {
        Rat(Ratio::from_integer(n))
    }

    pub fn zero() -> Rat {
        Rat(Ratio::zero())
    }

    pub fn one() -> Rat {
        Rat::int(1)
    }

    pub fn numer(&self) -> i128 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i128 {
        *self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn abs(&self) -> Rat {
        Rat(self.0.abs())
    }

    pub fn half(&self) -> Rat {
        *self / Rat::int(2)
    }

    pub fn mid(a: Rat, b: Rat) -> Rat {
        (a + b).half()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn min(self, other: Rat) -> Rat {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Rat) -> Rat {
        if self >= other {
            self
        } else {
            other
        }
    }
}

impl From<i64> for Rat {
    fn from(n: i64) -> Rat {
        Rat::int(n as i128)
    }
}

impl From<i32> for Rat {
    fn from(n: i32) -> Rat {
        Rat::int(n as i128)
    }
}

macro_rules! rat_binop {
    ($tr:ident, $f:ident, $atr:ident, $af:ident, $op:tt) => {
        impl $tr for Rat {
            type Output = Rat;
            fn $f(self, o: Rat) -> Rat {
                Rat(self.0 $op o.0)
            }
        }
        impl $atr for Rat {
            fn $af(&mut self, o: Rat) {
                self.0 = self.0 $op o.0;
            }
        }
    };
}

rat_binop!(Add, add, AddAssign, add_assign, +);
rat_binop!(Sub, sub, SubAssign, sub_assign, -);

impl Mul for Rat {
    type Output = Rat;
    fn mul(self, o: Rat) -> Rat {
        Rat(self.0 * o.0)
    }
}

impl Div for Rat {
    type Output = Rat;
    fn div(self, o: Rat) -> Rat {
        assert!(!o.is_zero(), "division by zero");
        Rat(self.0 / o.0)
    }
}

impl Neg for Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        Rat(-self.0)
    }
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl fmt::Debug for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl FromStr for Rat {
    type Err = GeomError;

    /// Accepts `7`, `-3/4` and finite decimals such as `2.25`.
    fn from_str(s: &str) -> Result<Rat, GeomError> {
        let s = s.trim();
        let bad = || GeomError::Parse(s.to_string());
        if let Some((n, d)) = s.split_once('/') {
            let n: i128 = n.trim().parse().map_err(|_| bad())?;
            let d: i128 = d.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            return Ok(Rat::new(n, d));
        }
        if let Some((ip, fp)) = s.split_once('.') {
            if fp.is_empty() || !fp.chars().all(|c| c.is_ascii_digit()) || fp.len() > 18 {
                return Err(bad());
            }
            let neg = ip.starts_with('-');
            let ip_abs = ip.trim_start_matches(['-', '+']);
            let whole: i128 = if ip_abs.is_empty() { 0 } else { ip_abs.parse().map_err(|_| bad())? };
            let frac: i128 = fp.parse().map_err(|_| bad())?;
            let scale = 10i128.pow(fp.len() as u32);
            let v = Rat::new(whole * scale + frac, scale);
            return Ok(if neg { -v } else { v });
        }
        s.parse::<i128>().map(Rat::int).map_err(|_| bad())
    }
}

impl Serialize for Rat {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match (self.is_integer(), self.numer().to_i64()) {
            (true, Some(n)) => s.serialize_i64(n),
            _ => s.serialize_str(&self.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for Rat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Rat, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        match v {
            serde_json::Value::Number(n) => {
                if let Some(i) = n.as_i64() {
                    Ok(Rat::from(i))
                } else {
                    n.to_string().parse().map_err(serde::de::Error::custom)
                }
            }
            serde_json::Value::String(s) => s.parse().map_err(serde::de::Error::custom),
            other => Err(serde::de::Error::custom(format!("expected a number, got {other}"))),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Point {
    pub x: Rat,
    pub y: Rat,
}

impl Point {
    pub fn new(x: impl Into<Rat>, y: impl Into<Rat>) -> Point {
        Point { x: x.into(), y: y.into() }
    }

    pub fn step(&self, d: Dir, len: Rat) -> Point {
        let (dx, dy) = d.delta();
        Point { x: self.x + Rat::int(dx as i128) * len, y: self.y + Rat::int(dy as i128) * len }
    }

    /// Rotation by a quarter turn counter-clockwise around the origin.
    pub fn rot90(&self) -> Point {
        Point { x: -self.y, y: self.x }
    }

    pub fn translate(&self, dx: Rat, dy: Rat) -> Point {
        Point { x: self.x + dx, y: self.y + dy }
    }

    /// Direction of the axis-aligned move from `self` to `other`.
    pub fn dir_to(&self, other: &Point) -> Option<Dir> {
        match (self.x.cmp(&other.x), self.y.cmp(&other.y)) {
            (Ordering::Equal, Ordering::Less) => Some(Dir::N),
            (Ordering::Equal, Ordering::Greater) => Some(Dir::S),
            (Ordering::Less, Ordering::Equal) => Some(Dir::E),
            (Ordering::Greater, Ordering::Equal) => Some(Dir::W),
            _ => None,
        }
    }

    pub fn l1(&self, other: &Point) -> Rat {
        (self.x - other.x).abs() + (self.y - other.y).abs()
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Axis directions; `N` is increasing y.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub enum Dir {
    N,
    E,
    S,
    W,
}

impl Dir {
    pub const ALL: [Dir; 4] = [Dir::N, Dir::E, Dir::S, Dir::W];

    pub fn delta(self) -> (i32, i32) {
        match self {
            Dir::N => (0, 1),
            Dir::E => (1, 0),
            Dir::S => (0, -1),
            Dir::W => (-1, 0),
        }
    }

    pub fn opposite(self) -> Dir {
        match self {
            Dir::N => Dir::S,
            Dir::E => Dir::W,
            Dir::S => Dir::N,
            Dir::W => Dir::E,
        }
    }

    pub fn cw(self) -> Dir {
        match self {
            Dir::N => Dir::E,
            Dir::E => Dir::S,
            Dir::S => Dir::W,
            Dir::W => Dir::N,
        }
    }

    pub fn ccw(self) -> Dir {
        self.cw().opposite()
    }

    pub fn is_horizontal(self) -> bool {
        matches!(self, Dir::E | Dir::W)
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn letter(self) -> char {
        match self {
            Dir::N => 'N',
            Dir::E => 'E',
            Dir::S => 'S',
            Dir::W => 'W',
        }
    }

    pub fn from_letter(c: char) -> Option<Dir> {
        match c.to_ascii_uppercase() {
            'N' => Some(Dir::N),
            'E' => Some(Dir::E),
            'S' => Some(Dir::S),
            'W' => Some(Dir::W),
            _ => None,
        }
    }
}

/// Non-degenerate horizontal or vertical segment.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct AxisSegment {
    pub a: Point,
    pub b: Point,
}

impl AxisSegment {
    pub fn new(a: Point, b: Point) -> Result<AxisSegment, GeomError> {
        if a.dir_to(&b).is_none() {
            return Err(GeomError::NotAxisAligned(a, b));
        }
        Ok(AxisSegment { a, b })
    }

    pub fn is_horizontal(&self) -> bool {
        self.a.y == self.b.y
    }

    pub fn lo(&self) -> Point {
        self.a.min(self.b)
    }

    pub fn hi(&self) -> Point {
        self.a.max(self.b)
    }

    pub fn length(&self) -> Rat {
        self.a.l1(&self.b)
    }

    /// Closed containment.
    pub fn contains(&self, p: &Point) -> bool {
        let (lo, hi) = (self.lo(), self.hi());
        if self.is_horizontal() {
            p.y == lo.y && lo.x <= p.x && p.x <= hi.x
        } else {
            p.x == lo.x && lo.y <= p.y && p.y <= hi.y
        }
    }

    pub fn contains_in_interior(&self, p: &Point) -> bool {
        self.contains(p) && *p != self.a && *p != self.b
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum IntersectionKind {
    Disjoint,
    Point(Point),
    Overlap(AxisSegment),
}

/// Exact intersection of two closed axis segments.
pub fn segments_intersect(s: &AxisSegment, t: &AxisSegment) -> IntersectionKind {
    let (s0, s1, t0, t1) = (s.lo(), s.hi(), t.lo(), t.hi());
    match (s.is_horizontal(), t.is_horizontal()) {
        (true, true) | (false, false) => {
            let same_line = if s.is_horizontal() { s0.y == t0.y } else { s0.x == t0.x };
            if !same_line {
                return IntersectionKind::Disjoint;
            }
            let lo = s0.max(t0);
            let hi = s1.min(t1);
            match lo.cmp(&hi) {
                Ordering::Greater => IntersectionKind::Disjoint,
                Ordering::Equal => IntersectionKind::Point(lo),
                Ordering::Less => IntersectionKind::Overlap(AxisSegment { a: lo, b: hi }),
            }
        }
        (h, _) => {
            let (hs, vs) = if h { (s, t) } else { (t, s) };
            let p = Point { x: vs.a.x, y: hs.a.y };
            if hs.contains(&p) && vs.contains(&p) {
                IntersectionKind::Point(p)
            } else {
                IntersectionKind::Disjoint
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Location {
    Inside,
    Boundary,
    Outside,
}

/// Simple rectilinear polygon given by its corners in cyclic order.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct RectPolygon {
    corners: Vec<Point>,
}

impl RectPolygon {
    pub fn new(corners: Vec<Point>) -> Result<RectPolygon, GeomError> {
        let n = corners.len();
        if n < 4 || n % 2 == 1 {
            return Err(GeomError::BadPolygon(format!("{n} corners")));
        }
        let mut dirs = Vec::with_capacity(n);
        for i in 0..n {
            let d = corners[i]
                .dir_to(&corners[(i + 1) % n])
                .ok_or(GeomError::NotAxisAligned(corners[i], corners[(i + 1) % n]))?;
            dirs.push(d);
        }
        for i in 0..n {
            if dirs[i].is_horizontal() == dirs[(i + 1) % n].is_horizontal() {
                return Err(GeomError::BadPolygon(format!("corner {:?} is not a turn", corners[(i + 1) % n])));
            }
        }
        let poly = RectPolygon { corners };
        let sides = poly.sides();
        for i in 0..n {
            for j in i + 1..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                let hit = segments_intersect(&sides[i], &sides[j]);
                let ok = match hit {
                    IntersectionKind::Disjoint => !adjacent,
                    IntersectionKind::Point(_) => adjacent,
                    IntersectionKind::Overlap(_) => false,
                };
                if !ok {
                    return Err(GeomError::BadPolygon("boundary is not simple".into()));
                }
            }
        }
        Ok(poly)
    }

    /// Axis-aligned rectangle with the given opposite corners.
    pub fn rect(lo: Point, hi: Point) -> Result<RectPolygon, GeomError> {
        RectPolygon::new(vec![lo, Point { x: hi.x, y: lo.y }, hi, Point { x: lo.x, y: hi.y }])
    }

    pub fn corners(&self) -> &[Point] {
        &self.corners
    }

    pub fn sides(&self) -> Vec<AxisSegment> {
        let n = self.corners.len();
        (0..n).map(|i| AxisSegment { a: self.corners[i], b: self.corners[(i + 1) % n] }).collect()
    }

    /// Twice the signed area; positive for counter-clockwise order.
    pub fn signed_area2(&self) -> Rat {
        let n = self.corners.len();
        let mut acc = Rat::zero();
        for i in 0..n {
            let (p, q) = (self.corners[i], self.corners[(i + 1) % n]);
            acc += p.x * q.y - q.x * p.y;
        }
        acc
    }

    pub fn map(&self, f: impl Fn(&Point) -> Point) -> RectPolygon {
        RectPolygon { corners: self.corners.iter().map(f).collect() }
    }
}

pub fn point_in_polygon(poly: &RectPolygon, p: &Point) -> Location {
    let sides = poly.sides();
    if sides.iter().any(|s| s.contains(p)) {
        return Location::Boundary;
    }
    // Horizontal ray to +x; vertical sides counted on the half-open span [lo, hi).
    let mut crossings = 0;
    for s in sides.iter().filter(|s| !s.is_horizontal()) {
        let (lo, hi) = (s.lo(), s.hi());
        if s.a.x > p.x && lo.y <= p.y && p.y < hi.y {
            crossings += 1;
        }
    }
    if crossings % 2 == 1 {
        Location::Inside
    } else {
        Location::Outside
    }
}

/// Whether the open segment `pq` lies in the interior of `poly`.
pub fn orth_visible(poly: &RectPolygon, p: &Point, q: &Point) -> bool {
    if p.dir_to(q).is_none() {
        return false;
    }
    let pq = AxisSegment { a: *p, b: *q };
    for s in poly.sides() {
        match segments_intersect(&pq, &s) {
            IntersectionKind::Disjoint => {}
            IntersectionKind::Point(x) if x == *p || x == *q => {}
            _ => return false,
        }
    }
    let m = Point { x: Rat::mid(p.x, q.x), y: Rat::mid(p.y, q.y) };
    point_in_polygon(poly, &m) == Location::Inside
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Bbox {
    pub lo: Point,
    pub hi: Point,
}

impl Bbox {
    pub fn of<'a>(pts: impl IntoIterator<Item = &'a Point>) -> Option<Bbox> {
        let mut it = pts.into_iter();
        let first = *it.next()?;
        let mut b = Bbox { lo: first, hi: first };
        for p in it {
            b.lo.x = b.lo.x.min(p.x);
            b.lo.y = b.lo.y.min(p.y);
            b.hi.x = b.hi.x.max(p.x);
            b.hi.y = b.hi.y.max(p.y);
        }
        Some(b)
    }

    pub fn width(&self) -> Rat {
        self.hi.x - self.lo.x
    }

    pub fn height(&self) -> Rat {
        self.hi.y - self.lo.y
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.lo.x <= p.x && p.x <= self.hi.x && self.lo.y <= p.y && p.y <= self.hi.y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(x: i64, y: i64) -> Point {
        Point::new(x, y)
    }

    fn l_shape() -> RectPolygon {
        RectPolygon::new(vec![p(0, 0), p(4, 0), p(4, 2), p(2, 2), p(2, 4), p(0, 4)]).unwrap()
    }

    #[test]
    fn rat_parse_and_display() {
        assert_eq!("3/6".parse::<Rat>().unwrap(), Rat::new(1, 2));
        assert_eq!("-2.25".parse::<Rat>().unwrap(), Rat::new(-9, 4));
        assert_eq!("4".parse::<Rat>().unwrap().to_string(), "4");
        assert_eq!(Rat::new(6, -4).to_string(), "-3/2");
        assert!("1/0".parse::<Rat>().is_err());
        assert!("x".parse::<Rat>().is_err());
    }

    #[test]
    fn rat_json_roundtrip() {
        let v = vec![Rat::int(3), Rat::new(7, 3)];
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, "[3,\"7/3\"]");
        let back: Vec<Rat> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
        let dec: Rat = serde_json::from_str("0.5").unwrap();
        assert_eq!(dec, Rat::new(1, 2));
    }

    #[test]
    fn crossing_and_overlap() {
        let h = AxisSegment::new(p(0, 1), p(4, 1)).unwrap();
        let v = AxisSegment::new(p(2, 0), p(2, 3)).unwrap();
        assert_eq!(segments_intersect(&h, &v), IntersectionKind::Point(p(2, 1)));
        let h2 = AxisSegment::new(p(3, 1), p(6, 1)).unwrap();
        assert_eq!(
            segments_intersect(&h, &h2),
            IntersectionKind::Overlap(AxisSegment { a: p(3, 1), b: p(4, 1) })
        );
        let h3 = AxisSegment::new(p(4, 1), p(6, 1)).unwrap();
        assert_eq!(segments_intersect(&h, &h3), IntersectionKind::Point(p(4, 1)));
        let far = AxisSegment::new(p(5, 0), p(5, 3)).unwrap();
        assert_eq!(segments_intersect(&h, &far), IntersectionKind::Disjoint);
        assert!(AxisSegment::new(p(0, 0), p(1, 1)).is_err());
        assert!(AxisSegment::new(p(0, 0), p(0, 0)).is_err());
    }

    #[test]
    fn polygon_validation() {
        assert!(RectPolygon::new(vec![p(0, 0), p(1, 0), p(1, 1)]).is_err());
        // collinear middle point is not a corner
        assert!(RectPolygon::new(vec![p(0, 0), p(1, 0), p(2, 0), p(2, 1), p(0, 1), p(0, 0)]).is_err());
        // figure eight
        let bow = vec![p(0, 0), p(2, 0), p(2, 2), p(1, 2), p(1, -1), p(0, -1)];
        assert!(RectPolygon::new(bow).is_err());
        assert_eq!(l_shape().signed_area2(), Rat::int(24));
    }

    #[test]
    fn locate_in_l_shape() {
        let poly = l_shape();
        assert_eq!(point_in_polygon(&poly, &p(1, 1)), Location::Inside);
        assert_eq!(point_in_polygon(&poly, &p(3, 3)), Location::Outside);
        assert_eq!(point_in_polygon(&poly, &p(2, 3)), Location::Boundary);
        assert_eq!(point_in_polygon(&poly, &p(4, 1)), Location::Boundary);
        assert_eq!(point_in_polygon(&poly, &Point::new(Rat::new(1, 2), Rat::int(2))), Location::Inside);
        // ray passes exactly through the reflex corner's row
        assert_eq!(point_in_polygon(&poly, &Point::new(Rat::new(1, 2), Rat::new(2, 1))), Location::Inside);
        assert_eq!(point_in_polygon(&poly, &p(-1, 2)), Location::Outside);
    }

    #[test]
    fn visibility_around_reflex_corner() {
        let poly = l_shape();
        assert!(orth_visible(&poly, &p(0, 1), &p(4, 1)));
        assert!(!orth_visible(&poly, &p(0, 2), &p(4, 2)));
        assert!(!orth_visible(&poly, &Point::new(1, 3), &Point::new(3, 3)));
        assert!(!orth_visible(&poly, &p(1, 1), &p(2, 2)));
        assert!(orth_visible(&poly, &p(1, 0), &p(1, 4)));
        assert!(!orth_visible(&poly, &p(2, 2), &p(4, 2)));
    }

    fn arb_rat() -> impl Strategy<Value = Rat> {
        (-40i128..40, 1i128..5).prop_map(|(n, d)| Rat::new(n, d))
    }

    proptest! {
        #[test]
        fn location_invariant_under_translation_and_rotation(
            dx in arb_rat(), dy in arb_rat(), px in arb_rat(), py in arb_rat(), turns in 0usize..4
        ) {
            let poly = l_shape();
            let q = Point { x: px / Rat::int(8), y: py / Rat::int(8) };
            let base = point_in_polygon(&poly, &q);
            let mv = |pt: &Point| {
                let mut r = pt.translate(dx, dy);
                for _ in 0..turns {
                    r = r.rot90();
                }
                r
            };
            let moved = poly.map(mv);
            prop_assert_eq!(point_in_polygon(&moved, &mv(&q)), base);
        }

        #[test]
        fn intersection_is_symmetric(a in 0i64..6, b in 0i64..6, c in 0i64..6, d in 1i64..4, e in 1i64..4, hz in any::<bool>()) {
            let s = AxisSegment::new(p(a, b), p(a + d, b)).unwrap();
            let t = if hz {
                AxisSegment::new(p(c, b), p(c + e, b)).unwrap()
            } else {
                AxisSegment::new(p(c, 0), p(c, e + 3)).unwrap()
            };
            prop_assert_eq!(segments_intersect(&s, &t), segments_intersect(&t, &s));
        }
    }
}
