//! Hitting-point random variables measured on a walk.
//!
//! Every observable is read off the polygonal curve through the walk's sites:
//! the first or extremal point where it meets a line, a circle or a parabola
//! of scale `c = l N^{3/4}`, or on which side of a set of points it passes.
//! Scans jump ahead using a lower bound on the number of unit steps needed to
//! reach the curve, so a walk far from the curve costs few site lookups.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Domain, Point, Sites};

/// Slack subtracted from distance bounds before they are used to skip steps.
const SKIP_MARGIN: f64 = 1e-6;

/// Exit radius for the pass-right ray cast, in units of `c`.
pub const PASS_RIGHT_TRUNCATION: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObservableKind {
    Xe,
    Xf,
    Ye,
    Yf,
    ThetaE,
    ThetaF,
    PassRight,
}

impl ObservableKind {
    pub const ALL: [ObservableKind; 7] = [
        ObservableKind::Xe,
        ObservableKind::Xf,
        ObservableKind::Ye,
        ObservableKind::Yf,
        ObservableKind::ThetaE,
        ObservableKind::ThetaF,
        ObservableKind::PassRight,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ObservableKind::Xe => "xe",
            ObservableKind::Xf => "xf",
            ObservableKind::Ye => "ye",
            ObservableKind::Yf => "yf",
            ObservableKind::ThetaE => "theta-e",
            ObservableKind::ThetaF => "theta-f",
            ObservableKind::PassRight => "pass-right",
        }
    }

    /// Minimum over all crossings rather than the first one.
    pub fn is_extremal(self) -> bool {
        matches!(self, ObservableKind::Xe | ObservableKind::Ye | ObservableKind::ThetaE)
    }

    pub fn is_theta(self) -> bool {
        matches!(self, ObservableKind::ThetaE | ObservableKind::ThetaF)
    }
}

impl fmt::Display for ObservableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObservableKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ObservableKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Parse(format!("unknown observable {s:?}")))
    }
}

/// Which random variable to measure and at which scale.
///
/// `angles` is used by [`ObservableKind::PassRight`] only; each entry is the
/// polar angle as a fraction of the domain's angular range (`pi` in the
/// half-plane, `2 pi` in the cut-plane), strictly between 0 and 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSpec {
    pub kind: ObservableKind,
    pub domain: Domain,
    pub l: f64,
    #[serde(default)]
    pub d: f64,
    #[serde(default)]
    pub angles: Vec<f64>,
}

impl ObservableSpec {
    pub fn new(kind: ObservableKind, domain: Domain, l: f64) -> Self {
        ObservableSpec {
            kind,
            domain,
            l,
            d: 0.0,
            angles: Vec::new(),
        }
    }

    pub fn with_d(mut self, d: f64) -> Self {
        self.d = d;
        self
    }

    pub fn with_angles(mut self, angles: Vec<f64>) -> Self {
        self.angles = angles;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l.is_finite() && self.l > 0.0) {
            return Err(Error::Config(format!("{}: l must be positive, got {}", self.kind, self.l)));
        }
        if !(self.d.abs() < 1.0) {
            return Err(Error::Config(format!("{}: d must lie in (-1, 1), got {}", self.kind, self.d)));
        }
        if self.d != 0.0 && !self.kind.is_theta() {
            return Err(Error::Config(format!("{}: d applies to theta observables only", self.kind)));
        }
        if self.d != 0.0 && self.domain == Domain::CutPlane {
            return Err(Error::Config(format!(
                "{}: the cut-plane circle must be centred at the origin (d = 0)",
                self.kind
            )));
        }
        if self.kind == ObservableKind::PassRight {
            if self.angles.is_empty() {
                return Err(Error::Config("pass-right needs at least one angle".into()));
            }
            if let Some(u) = self.angles.iter().find(|u| !(**u > 0.0 && **u < 1.0)) {
                return Err(Error::Config(format!("pass-right angle fraction {u} is not in (0, 1)")));
            }
        } else if !self.angles.is_empty() {
            return Err(Error::Config(format!("{}: angles apply to pass-right only", self.kind)));
        }
        Ok(())
    }

    /// `c = l N^{3/4}` for walks of `n` steps.
    pub fn scale(&self, n: usize) -> f64 {
        self.l * (n as f64).powf(0.75)
    }

    /// Short identifier, usable as a file stem.
    pub fn id(&self) -> String {
        if self.kind.is_theta() {
            format!("{}_{}_l{}_d{}", self.domain, self.kind, self.l, self.d)
        } else {
            format!("{}_{}_l{}", self.domain, self.kind, self.l)
        }
    }

    /// The curve whose crossings define the observable, for scale `c`.
    pub fn curve(&self, c: f64) -> Option<Curve> {
        use ObservableKind::*;
        Some(match (self.domain, self.kind) {
            (_, PassRight) => return None,
            (Domain::HalfPlane, Xe | Xf) => Curve::HorizontalLine { c },
            (Domain::HalfPlane, Ye | Yf) => Curve::VerticalRay { c },
            (Domain::HalfPlane, ThetaE | ThetaF) => Curve::Circle {
                c,
                center: c * self.d,
                full_turn: false,
            },
            (Domain::CutPlane, Xe | Xf) => Curve::RightParabola { c },
            (Domain::CutPlane, Ye | Yf) => Curve::LeftHalfParabola { c },
            (Domain::CutPlane, ThetaE | ThetaF) => Curve::Circle {
                c,
                center: 0.0,
                full_turn: true,
            },
        })
    }
}

/// A curve in the plane together with the coordinate an observable reads off
/// a point on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Curve {
    /// `y = c`; reads `x / c`.
    HorizontalLine { c: f64 },
    /// `x = c, y > 0`; reads `y / c`.
    VerticalRay { c: f64 },
    /// Radius `c` about `(center, 0)`; reads the polar angle about the centre
    /// over `pi`, or over `2 pi` with angles in `[0, 2 pi)` when `full_turn`.
    Circle { c: f64, center: f64, full_turn: bool },
    /// `(c (t^2 - 1), 2 c t)`; reads `t`.
    RightParabola { c: f64 },
    /// `(c (1 - t^2), 2 c t), t > 0`; reads `t`.
    LeftHalfParabola { c: f64 },
}

impl Curve {
    /// Zero exactly on the curve (or its full extension), with opposite
    /// signs on either side.
    #[inline]
    pub fn value(&self, x: f64, y: f64) -> f64 {
        match *self {
            Curve::HorizontalLine { c } => y - c,
            Curve::VerticalRay { c } => x - c,
            Curve::Circle { c, center, .. } => {
                let dx = x - center;
                dx * dx + y * y - c * c
            }
            Curve::RightParabola { c } => y * y - 4.0 * c * (x + c),
            Curve::LeftHalfParabola { c } => y * y - 4.0 * c * (c - x),
        }
    }

    /// Coefficients `(A, B)` with `value(a + s e) = A s^2 + B s + value(a)`.
    #[inline]
    fn coefficients(&self, ax: f64, ay: f64, ex: f64, ey: f64) -> (f64, f64) {
        match *self {
            Curve::HorizontalLine { .. } => (0.0, ey),
            Curve::VerticalRay { .. } => (0.0, ex),
            Curve::Circle { center, .. } => (ex * ex + ey * ey, 2.0 * (ex * (ax - center) + ey * ay)),
            Curve::RightParabola { c } => (ey * ey, 2.0 * ey * ay - 4.0 * c * ex),
            Curve::LeftHalfParabola { c } => (ey * ey, 2.0 * ey * ay + 4.0 * c * ex),
        }
    }

    /// A lower bound on the Euclidean distance from `(x, y)` to the curve.
    #[inline]
    pub fn distance_bound(&self, x: f64, y: f64) -> f64 {
        match *self {
            Curve::HorizontalLine { c } => (y - c).abs(),
            Curve::VerticalRay { c } => (x - c).abs(),
            Curve::Circle { c, center, .. } => ((x - center).hypot(y) - c).abs(),
            // focus at the origin: |p| - (distance to the directrix) is 2-Lipschitz
            Curve::RightParabola { c } => (x.hypot(y) - (x + 2.0 * c)).abs() * 0.5,
            Curve::LeftHalfParabola { c } => (x.hypot(y) - (2.0 * c - x)).abs() * 0.5,
        }
    }

    /// Whether a zero of [`Curve::value`] at height `y` lies on the curve proper.
    #[inline]
    fn admits(&self, y: f64) -> bool {
        match self {
            Curve::VerticalRay { .. } | Curve::LeftHalfParabola { .. } => y > 0.0,
            _ => true,
        }
    }

    /// The observable's coordinate of a point on the curve.
    pub fn parameter(&self, x: f64, y: f64) -> f64 {
        match *self {
            Curve::HorizontalLine { c } => x / c,
            Curve::VerticalRay { c } => y / c,
            Curve::Circle { center, full_turn, .. } => {
                let angle = y.atan2(x - center);
                if full_turn {
                    let angle = if angle < 0.0 { angle + 2.0 * PI } else { angle };
                    angle / (2.0 * PI)
                } else {
                    angle / PI
                }
            }
            Curve::RightParabola { c } | Curve::LeftHalfParabola { c } => y / (2.0 * c),
        }
    }
}

/// A point where the walk meets a curve: segment `segment` runs from site
/// `segment` to site `segment + 1`, and `s` in `[0, 1]` is the position along it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub segment: usize,
    pub s: f64,
    pub x: f64,
    pub y: f64,
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> (f64, f64) {
    let disc = (b * b - 4.0 * a * c).max(0.0);
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        return (0.0, 0.0);
    }
    let (r1, r2) = (q / a, c / q);
    if r1 <= r2 {
        (r1, r2)
    } else {
        (r2, r1)
    }
}

/// Crossings of one unit segment with `curve`, in order along the segment.
///
/// A site lying on the curve counts as a crossing at `s = 0`; the final site
/// of the walk counts at `s = 1` when `last` is set. Interior crossings are
/// simple roots only: a tangency that does not change sides is not counted.
pub fn segment_crossings(curve: &Curve, a: Point, b: Point, segment: usize, last: bool, out: &mut Vec<Crossing>) {
    let (ax, ay) = (a.x as f64, a.y as f64);
    let (ex, ey) = ((b.x - a.x) as f64, (b.y - a.y) as f64);
    let f0 = curve.value(ax, ay);
    let f1 = curve.value(b.x as f64, b.y as f64);
    let mut push = |s: f64| {
        let (x, y) = (ax + s * ex, ay + s * ey);
        if curve.admits(y) {
            out.push(Crossing { segment, s, x, y });
        }
    };
    if f0 == 0.0 {
        push(0.0);
    }
    let (qa, qb) = curve.coefficients(ax, ay, ex, ey);
    let inside = |s: f64| s > 0.0 && s < 1.0;
    if qa == 0.0 {
        if f0 * f1 < 0.0 {
            push((-f0 / qb).clamp(0.0, 1.0));
        }
    } else if f0 * f1 < 0.0 {
        // exactly one root in between
        let (r1, r2) = quadratic_roots(qa, qb, f0);
        let dist = |r: f64| (r - r.clamp(0.0, 1.0)).abs();
        let r = if dist(r1) <= dist(r2) { r1 } else { r2 };
        push(r.clamp(0.0, 1.0));
    } else if f0 != 0.0 && f1 != 0.0 {
        // same sign at both ends: two roots or none
        let v = -qb / (2.0 * qa);
        if inside(v) && (qa * v * v + qb * v + f0) * f0 < 0.0 {
            let (r1, r2) = quadratic_roots(qa, qb, f0);
            push(r1.clamp(0.0, v));
            push(r2.clamp(v, 1.0));
        }
    } else if f0 == 0.0 && f1 != 0.0 {
        let r = -qb / qa;
        if qb != 0.0 && inside(r) {
            push(r);
        }
    } else if f1 == 0.0 && f0 != 0.0 {
        // roots multiply to f0 / qa and one of them is 1
        let r = f0 / qa;
        if inside(r) {
            push(r);
        }
    }
    if last && f1 == 0.0 {
        push(1.0);
    }
}

/// Segments after the one starting at distance `dist` from the curve that
/// cannot touch it, including that one.
#[inline]
fn safe_segments(dist: f64) -> usize {
    let room = dist - 1.0 - SKIP_MARGIN;
    if room > 0.0 {
        room.ceil() as usize
    } else {
        0
    }
}

/// Appends the crossings in segments `start..` to `out`, stopping after the
/// first crossing segment if `first_only`.
fn scan<S: Sites + ?Sized>(walk: &S, curve: &Curve, start: usize, first_only: bool, out: &mut Vec<Crossing>) {
    let n = walk.steps();
    let mut j = start;
    let mut p = if j < n { walk.site(j) } else { Point::ORIGIN };
    while j < n {
        let safe = safe_segments(curve.distance_bound(p.x as f64, p.y as f64));
        if safe > 0 {
            j += safe;
            if j < n {
                p = walk.site(j);
            }
            continue;
        }
        let q = walk.site(j + 1);
        let before = out.len();
        segment_crossings(curve, p, q, j, j + 1 == n, out);
        if first_only && out.len() > before {
            return;
        }
        j += 1;
        p = q;
    }
}

/// Every crossing of the walk with `curve`, in traversal order.
pub fn intersections<S: Sites + ?Sized>(walk: &S, curve: &Curve) -> Vec<Crossing> {
    let mut out = Vec::new();
    scan(walk, curve, 0, false, &mut out);
    out
}

/// The first crossing in traversal order.
pub fn first_crossing<S: Sites + ?Sized>(walk: &S, curve: &Curve) -> Option<Crossing> {
    let mut out = Vec::new();
    scan(walk, curve, 0, true, &mut out);
    out.first().copied()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Censor {
    /// The walk never reaches the curve (or never leaves the disk).
    NeverReached,
    /// The walk crosses the circle but its last site is inside it.
    EndsInside,
}

impl Censor {
    pub fn as_str(self) -> &'static str {
        match self {
            Censor::NeverReached => "never-reached",
            Censor::EndsInside => "ends-inside",
        }
    }
}

/// Outcome of measuring one observable on one walk.
#[derive(Debug, Clone, PartialEq)]
pub enum Measurement {
    Value(f64),
    /// Pass-right: `true` where the walk passes to the right of the point.
    Sides(Vec<bool>),
    Censored(Censor),
}

impl Measurement {
    pub fn value(&self) -> Option<f64> {
        match *self {
            Measurement::Value(v) => Some(v),
            _ => None,
        }
    }

    pub fn censor(&self) -> Option<Censor> {
        match *self {
            Measurement::Censored(c) => Some(c),
            _ => None,
        }
    }
}

/// Measures `spec` on `walk` from scratch, at the scale for the walk's length.
pub fn measure<S: Sites + ?Sized>(walk: &S, spec: &ObservableSpec) -> Measurement {
    measure_at(walk, spec, spec.scale(walk.steps()))
}

/// Measures `spec` on `walk` from scratch with the curve at scale `c`.
pub fn measure_at<S: Sites + ?Sized>(walk: &S, spec: &ObservableSpec, c: f64) -> Measurement {
    match spec.curve(c) {
        None => pass_right(walk, spec.domain, c, &spec.angles).measurement(),
        Some(curve) => {
            let value = if spec.kind.is_extremal() {
                intersections(walk, &curve)
                    .iter()
                    .map(|x| curve.parameter(x.x, x.y))
                    .reduce(f64::min)
            } else {
                first_crossing(walk, &curve).map(|x| curve.parameter(x.x, x.y))
            };
            value.map_or(Measurement::Censored(Censor::NeverReached), Measurement::Value)
        }
    }
}

/// Points `c e^{i theta}` for angle fractions `angles` of the domain's range.
pub fn pass_right_points(domain: Domain, c: f64, angles: &[f64]) -> Vec<(f64, f64)> {
    let range = match domain {
        Domain::HalfPlane => PI,
        Domain::CutPlane => 2.0 * PI,
    };
    angles
        .iter()
        .map(|u| {
            let (sin, cos) = (range * u).sin_cos();
            (c * cos, c * sin)
        })
        .collect()
}

/// Side decisions for a set of points, with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PassRight {
    /// Index of the first site outside the truncation disk, if any.
    pub exit: Option<usize>,
    /// `true` where the walk passes right of the point; empty without an exit.
    pub sides: Vec<bool>,
    /// The last site lies inside radius `c`.
    pub ends_inside: bool,
    /// Points whose decision was flipped by the closing half-line.
    pub closure_flips: usize,
}

impl PassRight {
    pub fn outcome(&self) -> std::result::Result<&[bool], Censor> {
        match (self.exit, self.ends_inside) {
            (None, _) => Err(Censor::NeverReached),
            (Some(_), true) => Err(Censor::EndsInside),
            (Some(_), false) => Ok(&self.sides),
        }
    }

    pub fn measurement(&self) -> Measurement {
        match self.outcome() {
            Ok(sides) => Measurement::Sides(sides.to_vec()),
            Err(reason) => Measurement::Censored(reason),
        }
    }
}

/// First site strictly outside the disk of radius `r` about the origin.
fn first_exit<S: Sites + ?Sized>(walk: &S, r: f64) -> Option<usize> {
    let n = walk.steps();
    let mut j = 0;
    while j <= n {
        let dist = walk.site(j).norm();
        if dist > r {
            return Some(j);
        }
        // the next k sites stay within dist + k
        j += ((r - dist).floor() as usize).max(1);
    }
    None
}

/// Decides on which side of each point `c e^{i theta}` the walk passes.
///
/// The walk is cut at its first site outside radius `3c` and continued by the
/// half-line from that site straight away from the origin. A horizontal ray
/// from each point towards `+x` is intersected with this curve; a vertex
/// exactly at the ray's height counts as lying below it. Even parity puts the
/// point on the side of the positive real axis (the upper edge of the cut in
/// the cut-plane), so the walk passes to its left; odd parity means the walk
/// passes to its right. In the cut-plane a point below the axis sees the lower
/// edge at the end of its ray, so the reading is reversed.
///
/// Censored as [`Censor::NeverReached`] if the walk never leaves radius `3c`
/// and as [`Censor::EndsInside`] if its last site is inside radius `c`.
pub fn pass_right<S: Sites + ?Sized>(walk: &S, domain: Domain, c: f64, angles: &[f64]) -> PassRight {
    let points = pass_right_points(domain, c, angles);
    let ends_inside = walk.site(walk.steps()).norm() < c;
    let Some(exit) = first_exit(walk, PASS_RIGHT_TRUNCATION * c) else {
        return PassRight {
            exit: None,
            sides: Vec::new(),
            ends_inside,
            closure_flips: 0,
        };
    };

    // points sorted by height, so each vertical segment finds its rays directly
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].1.total_cmp(&points[b].1));
    let heights: Vec<f64> = order.iter().map(|&k| points[k].1).collect();
    let mut parity = vec![false; points.len()];

    let mut prev = walk.site(0);
    for j in 1..=exit {
        let next = walk.site(j);
        if next.x == prev.x {
            let low = prev.y.min(next.y) as f64;
            let x = next.x as f64;
            let from = heights.partition_point(|&h| h < low);
            let to = heights.partition_point(|&h| h < low + 1.0);
            for &k in &order[from..to] {
                if x > points[k].0 {
                    parity[k] ^= true;
                }
            }
        }
        prev = next;
    }

    let mut closure_flips = 0;
    let end = walk.site(exit);
    let (px, py) = (end.x as f64, end.y as f64);
    for (k, &(zx, zy)) in points.iter().enumerate() {
        let meets = (py > 0.0 && py <= zy) || (py < 0.0 && py > zy);
        if meets && px + (zy - py) * px / py > zx {
            parity[k] ^= true;
            closure_flips += 1;
        }
    }

    let sides = points
        .iter()
        .zip(parity)
        .map(|(&(_, zy), odd)| {
            let lower_edge = domain == Domain::CutPlane && zy < 0.0;
            odd != lower_edge
        })
        .collect();
    PassRight {
        exit: Some(exit),
        sides,
        ends_inside,
        closure_flips,
    }
}

#[derive(Debug, Clone)]
enum Cache {
    Empty,
    /// All crossing parameters with their segment, in traversal order.
    Extremal(Vec<(usize, f64)>),
    /// The first crossing, if any.
    First(Option<(usize, f64)>),
    PassRight(PassRight),
}

/// Incremental measurement along a chain.
///
/// After a pivot at index `i` only sites above `i` move, so crossings in
/// segments below `i` are kept and the scan resumes at segment `i`.
#[derive(Debug, Clone)]
pub struct Observer {
    spec: ObservableSpec,
    c: f64,
    curve: Option<Curve>,
    cache: Cache,
    current: Measurement,
    closure_flips: u64,
}

impl Observer {
    pub fn new(spec: ObservableSpec, n: usize) -> Result<Observer> {
        spec.validate()?;
        let c = spec.scale(n);
        Ok(Observer {
            curve: spec.curve(c),
            spec,
            c,
            cache: Cache::Empty,
            current: Measurement::Censored(Censor::NeverReached),
            closure_flips: 0,
        })
    }

    pub fn spec(&self) -> &ObservableSpec {
        &self.spec
    }

    pub fn scale(&self) -> f64 {
        self.c
    }

    /// Total closing-half-line flips over all pass-right evaluations.
    pub fn closure_flips(&self) -> u64 {
        self.closure_flips
    }

    /// Forgets the cache so the next update measures from scratch.
    pub fn reset(&mut self) {
        self.cache = Cache::Empty;
    }

    /// Brings the measurement up to date. `changed_from` is the smallest pivot
    /// index accepted since the previous update, `None` if the walk is unchanged.
    pub fn update<S: Sites + ?Sized>(&mut self, walk: &S, changed_from: Option<usize>) -> &Measurement {
        let from = match (&self.cache, changed_from) {
            (Cache::Empty, _) => 0,
            (_, None) => return &self.current,
            (_, Some(i)) => i,
        };
        let curve = self.curve;
        match curve {
            None => self.update_pass_right(walk, from),
            Some(curve) if self.spec.kind.is_extremal() => {
                let mut crossings = match std::mem::replace(&mut self.cache, Cache::Empty) {
                    Cache::Extremal(mut v) => {
                        v.truncate(v.partition_point(|&(seg, _)| seg < from));
                        v
                    }
                    _ => Vec::new(),
                };
                let mut found = Vec::new();
                scan(walk, &curve, from, false, &mut found);
                crossings.extend(found.iter().map(|x| (x.segment, curve.parameter(x.x, x.y))));
                self.current = crossings
                    .iter()
                    .map(|&(_, v)| v)
                    .reduce(f64::min)
                    .map_or(Measurement::Censored(Censor::NeverReached), Measurement::Value);
                self.cache = Cache::Extremal(crossings);
            }
            Some(curve) => {
                let keep = match self.cache {
                    Cache::First(Some((seg, v))) if seg < from => Some((seg, v)),
                    _ => None,
                };
                let first = keep.or_else(|| {
                    let mut found = Vec::new();
                    scan(walk, &curve, from, true, &mut found);
                    found.first().map(|x| (x.segment, curve.parameter(x.x, x.y)))
                });
                self.current = first.map_or(Measurement::Censored(Censor::NeverReached), |(_, v)| Measurement::Value(v));
                self.cache = Cache::First(first);
            }
        }
        &self.current
    }

    fn update_pass_right<S: Sites + ?Sized>(&mut self, walk: &S, from: usize) {
        if let Cache::PassRight(prev) = &mut self.cache {
            if prev.exit.is_some_and(|e| e <= from) {
                // the truncated walk is unchanged; only the last site can have moved
                prev.ends_inside = walk.site(walk.steps()).norm() < self.c;
                if prev.outcome().is_ok() {
                    self.closure_flips += prev.closure_flips as u64;
                }
                self.current = prev.measurement();
                return;
            }
        }
        let result = pass_right(walk, self.spec.domain, self.c, &self.spec.angles);
        if result.outcome().is_ok() {
            self.closure_flips += result.closure_flips as u64;
        }
        self.current = result.measurement();
        self.cache = Cache::PassRight(result);
    }
}
