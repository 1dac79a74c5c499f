//! Square-lattice geometry: points, the eight-element point group, walks and
//! the two domains the walks live in.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::ops::{Add, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Point {
    pub x: i32,
    pub y: i32,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0, y: 0 };

    #[inline]
    pub const fn new(x: i32, y: i32) -> Self {
        Point { x, y }
    }

    #[inline]
    pub fn l1(self) -> i32 {
        self.x.abs() + self.y.abs()
    }

    #[inline]
    pub fn l1_dist(self, other: Point) -> i32 {
        (self.x - other.x).abs() + (self.y - other.y).abs()
    }

    #[inline]
    pub fn norm(self) -> f64 {
        f64::from(self.x).hypot(f64::from(self.y))
    }
}

impl Add for Point {
    type Output = Point;
    #[inline]
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    #[inline]
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// An element of the square lattice point group, stored as a row-major 2x2
/// integer orthogonal matrix `[a, b, c, d]` acting as `(x, y) -> (ax + by, cx + dy)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Symmetry([i8; 4]);

impl Symmetry {
    pub const IDENTITY: Symmetry = Symmetry([1, 0, 0, 1]);
    /// Counter-clockwise quarter turn.
    pub const ROT90: Symmetry = Symmetry([0, -1, 1, 0]);
    pub const ROT180: Symmetry = Symmetry([-1, 0, 0, -1]);
    pub const ROT270: Symmetry = Symmetry([0, 1, -1, 0]);
    /// Negates the x coordinate (mirror in the vertical axis).
    pub const REFLECT_X: Symmetry = Symmetry([-1, 0, 0, 1]);
    /// Negates the y coordinate (mirror in the horizontal axis).
    pub const REFLECT_Y: Symmetry = Symmetry([1, 0, 0, -1]);
    /// Mirror in the line y = x.
    pub const REFLECT_DIAG: Symmetry = Symmetry([0, 1, 1, 0]);
    /// Mirror in the line y = -x.
    pub const REFLECT_ANTI_DIAG: Symmetry = Symmetry([0, -1, -1, 0]);

    pub const ALL: [Symmetry; 8] = [
        Self::IDENTITY,
        Self::ROT90,
        Self::ROT180,
        Self::ROT270,
        Self::REFLECT_X,
        Self::REFLECT_Y,
        Self::REFLECT_DIAG,
        Self::REFLECT_ANTI_DIAG,
    ];

    /// The seven non-identity elements, used as the pivot proposal set.
    pub const NON_IDENTITY: [Symmetry; 7] = [
        Self::ROT90,
        Self::ROT180,
        Self::ROT270,
        Self::REFLECT_X,
        Self::REFLECT_Y,
        Self::REFLECT_DIAG,
        Self::REFLECT_ANTI_DIAG,
    ];

    pub fn matrix(self) -> [i8; 4] {
        self.0
    }

    /// Builds a symmetry from a matrix, rejecting anything outside the group.
    pub fn from_matrix(m: [i8; 4]) -> Option<Symmetry> {
        Self::ALL.into_iter().find(|s| s.0 == m)
    }

    pub fn determinant(self) -> i32 {
        let [a, b, c, d] = self.0.map(i32::from);
        a * d - b * c
    }

    #[inline]
    pub fn act(self, p: Point) -> Point {
        let [a, b, c, d] = self.0.map(i32::from);
        Point::new(a * p.x + b * p.y, c * p.x + d * p.y)
    }

    /// `pivot + M (p - pivot)`.
    #[inline]
    pub fn apply_about(self, pivot: Point, p: Point) -> Point {
        pivot + self.act(p - pivot)
    }

    /// Matrix product: `self.compose(h)` acts as `h` first, then `self`.
    pub fn compose(self, h: Symmetry) -> Symmetry {
        let [a, b, c, d] = self.0;
        let [e, f, g, k] = h.0;
        Symmetry([a * e + b * g, a * f + b * k, c * e + d * g, c * f + d * k])
    }

    /// Orthogonal, so the inverse is the transpose.
    pub fn invert(self) -> Symmetry {
        let [a, b, c, d] = self.0;
        Symmetry([a, c, b, d])
    }

    pub fn name(self) -> &'static str {
        match self.0 {
            [1, 0, 0, 1] => "identity",
            [0, -1, 1, 0] => "rot90",
            [-1, 0, 0, -1] => "rot180",
            [0, 1, -1, 0] => "rot270",
            [-1, 0, 0, 1] => "reflect-x",
            [1, 0, 0, -1] => "reflect-y",
            [0, 1, 1, 0] => "reflect-diag",
            [0, -1, -1, 0] => "reflect-anti-diag",
            _ => unreachable!("symmetry matrices are constructed from the group table"),
        }
    }
}

impl fmt::Display for Symmetry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which region of the plane the walk must stay in (apart from its start at
/// the origin).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    /// Sites after the first have `y > 0`.
    HalfPlane,
    /// Sites after the first avoid the cut `{(x, 0) : x >= 0}`.
    CutPlane,
}

impl Domain {
    /// Whether site `p` may sit at position `index` of a walk.
    #[inline]
    pub fn contains(self, p: Point, index: usize) -> bool {
        if index == 0 {
            return p == Point::ORIGIN;
        }
        self.boundary_distance(p) > 0
    }

    /// L1 distance from `p` to the forbidden set. A walk that is at a site
    /// with distance `d > 0` stays inside the domain for the next `d - 1` steps.
    #[inline]
    pub fn boundary_distance(self, p: Point) -> i32 {
        match self {
            Domain::HalfPlane => p.y.max(0),
            Domain::CutPlane => p.y.abs() + (-p.x).max(0),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::HalfPlane => "half-plane",
            Domain::CutPlane => "cut-plane",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "half-plane" | "half" | "halfplane" => Ok(Domain::HalfPlane),
            "cut-plane" | "cut" | "cutplane" => Ok(Domain::CutPlane),
            other => Err(Error::Parse(format!("unknown domain {other:?}"))),
        }
    }
}

/// Random access to the sites of an `N`-step walk.
pub trait Sites {
    /// Number of steps `N`; valid indices are `0..=N`.
    fn steps(&self) -> usize;
    fn site(&self, i: usize) -> Point;
}

/// A nearest-neighbour self-avoiding walk starting at the origin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Walk {
    sites: Vec<Point>,
}

impl Walk {
    /// Validates the walk invariants: starts at the origin, unit steps, no
    /// repeated sites, at least one step.
    pub fn new(sites: Vec<Point>) -> Result<Walk> {
        if sites.len() < 2 {
            return Err(Error::InvalidWalk("a walk needs at least one step".into()));
        }
        if sites[0] != Point::ORIGIN {
            return Err(Error::InvalidWalk(format!("walk starts at {}", sites[0])));
        }
        for (k, pair) in sites.windows(2).enumerate() {
            if pair[0].l1_dist(pair[1]) != 1 {
                return Err(Error::InvalidWalk(format!(
                    "step {k} from {} to {} is not a unit step",
                    pair[0], pair[1]
                )));
            }
        }
        let mut seen = HashSet::with_capacity(sites.len());
        for (k, &p) in sites.iter().enumerate() {
            if !seen.insert(p) {
                return Err(Error::InvalidWalk(format!("site {k} revisits {p}")));
            }
        }
        Ok(Walk { sites })
    }

    /// Like [`Walk::new`] but additionally checks domain membership of every site.
    pub fn new_in(sites: Vec<Point>, domain: Domain) -> Result<Walk> {
        let walk = Walk::new(sites)?;
        walk.check_domain(domain)?;
        Ok(walk)
    }

    pub(crate) fn from_sites_unchecked(sites: Vec<Point>) -> Walk {
        Walk { sites }
    }

    /// The straight walk `(0,0), (0,1), ..., (0,n)`.
    pub fn straight(n: usize) -> Walk {
        assert!(n >= 1, "a walk needs at least one step");
        let n = i32::try_from(n).expect("walk length fits in i32");
        Walk {
            sites: (0..=n).map(|y| Point::new(0, y)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.sites.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sites(&self) -> &[Point] {
        &self.sites
    }

    pub(crate) fn sites_mut(&mut self) -> &mut [Point] {
        &mut self.sites
    }

    pub fn into_sites(self) -> Vec<Point> {
        self.sites
    }

    pub fn is_straight_up(&self) -> bool {
        self.sites
            .iter()
            .enumerate()
            .all(|(k, p)| p.x == 0 && p.y as usize == k)
    }

    pub fn check_domain(&self, domain: Domain) -> Result<()> {
        match self
            .sites
            .iter()
            .enumerate()
            .find(|&(k, &p)| !domain.contains(p, k))
        {
            Some((k, p)) => Err(Error::InvalidWalk(format!("site {k} at {p} lies outside the {domain}"))),
            None => Ok(()),
        }
    }

    /// Re-checks every invariant from scratch.
    pub fn validate(&self, domain: Domain) -> Result<()> {
        Walk::new_in(self.sites.clone(), domain).map(|_| ())
    }

    /// Number of interior sites where the walk changes direction.
    pub fn turns(&self) -> usize {
        self.sites
            .windows(3)
            .filter(|w| (w[1] - w[0]) != (w[2] - w[1]))
            .count()
    }

    /// The walk with its tail `index+1..=N` transformed by `g` about site `index`.
    /// No validity checks are made.
    pub fn pivoted(&self, index: usize, g: Symmetry) -> Walk {
        let mut sites = self.sites.clone();
        let q = sites[index];
        for p in &mut sites[index + 1..] {
            *p = g.apply_about(q, *p);
        }
        Walk { sites }
    }

    /// Writes the plain-text form: a header `N <length> <domain>` followed by
    /// one `x y` line per site.
    pub fn write_text<W: Write>(&self, domain: Domain, mut out: W) -> std::io::Result<()> {
        writeln!(out, "N {} {}", self.len(), domain)?;
        for p in &self.sites {
            writeln!(out, "{} {}", p.x, p.y)?;
        }
        Ok(())
    }

    pub fn to_text(&self, domain: Domain) -> String {
        let mut buf = Vec::with_capacity(self.sites.len() * 8);
        self.write_text(domain, &mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("ascii output")
    }

    /// Parses the plain-text form and validates the walk in its stated domain.
    pub fn read_text<R: BufRead>(input: R) -> Result<(Walk, Domain)> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty walk file".into()))??;
        let mut parts = header.split_whitespace();
        let (Some("N"), Some(n), Some(domain), None) = (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(Error::Parse(format!("bad walk header {header:?}")));
        };
        let n: usize = n
            .parse()
            .map_err(|_| Error::Parse(format!("bad walk length {n:?}")))?;
        let domain: Domain = domain.parse()?;
        let mut sites = Vec::with_capacity(n + 1);
        for line in lines.by_ref().take(n + 1) {
            let line = line?;
            let mut xy = line.split_whitespace().map(str::parse::<i32>);
            match (xy.next(), xy.next(), xy.next()) {
                (Some(Ok(x)), Some(Ok(y)), None) => sites.push(Point::new(x, y)),
                _ => return Err(Error::Parse(format!("bad site line {line:?}"))),
            }
        }
        if sites.len() != n + 1 {
            return Err(Error::Parse(format!(
                "walk header announces {} sites, found {}",
                n + 1,
                sites.len()
            )));
        }
        Ok((Walk::new_in(sites, domain)?, domain))
    }
}

impl Sites for Walk {
    #[inline]
    fn steps(&self) -> usize {
        self.len()
    }

    #[inline]
    fn site(&self, i: usize) -> Point {
        self.sites[i]
    }
}

const STEPS: [Point; 4] = [
    Point::new(0, 1),
    Point::new(0, -1),
    Point::new(1, 0),
    Point::new(-1, 0),
];

/// Calls `visit` for every self-avoiding walk of exactly `n` steps in `domain`.
pub fn for_each_walk<F: FnMut(&[Point])>(n: usize, domain: Domain, mut visit: F) {
    fn extend<F: FnMut(&[Point])>(
        path: &mut Vec<Point>,
        seen: &mut HashSet<Point>,
        n: usize,
        domain: Domain,
        visit: &mut F,
    ) {
        if path.len() == n + 1 {
            visit(path);
            return;
        }
        let last = *path.last().expect("path starts at the origin");
        for step in STEPS {
            let next = last + step;
            if domain.contains(next, path.len()) && seen.insert(next) {
                path.push(next);
                extend(path, seen, n, domain, visit);
                path.pop();
                seen.remove(&next);
            }
        }
    }
    let mut path = vec![Point::ORIGIN];
    let mut seen = HashSet::from([Point::ORIGIN]);
    extend(&mut path, &mut seen, n, domain, &mut visit);
}

/// All self-avoiding walks of exactly `n` steps in `domain`.
pub fn enumerate_walks(n: usize, domain: Domain) -> Vec<Walk> {
    let mut out = Vec::new();
    for_each_walk(n, domain, |sites| out.push(Walk::from_sites_unchecked(sites.to_vec())));
    out
}
