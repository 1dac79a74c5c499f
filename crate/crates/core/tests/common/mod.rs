//! Slow, obviously-correct reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::HashSet;

use saw_sle::lattice::{Domain, Point, Sites, Walk};
use saw_sle::observables::{segment_crossings, Crossing, Curve};
use saw_sle::pivot::{Chain, ChainConfig, PivotProposal};

/// A walk taken from a pivot chain after `steps` iterations, so it is far
/// from straight.
pub fn random_walk(n: usize, domain: Domain, seed: u64, steps: usize) -> Walk {
    let mut chain = Chain::new(ChainConfig::new(n, domain, seed)).unwrap();
    for _ in 0..steps {
        chain.step();
    }
    chain.walk()
}

/// Applies the pivot and checks every site from scratch.
pub fn naive_accept(walk: &Walk, domain: Domain, prop: PivotProposal) -> bool {
    let moved = walk.pivoted(prop.index, prop.symmetry);
    let mut seen = HashSet::new();
    moved
        .sites()
        .iter()
        .enumerate()
        .all(|(k, &p)| domain.contains(p, k) && seen.insert(p))
}

/// Every segment examined one by one.
pub fn naive_crossings(walk: &Walk, curve: &Curve) -> Vec<Crossing> {
    let n = walk.steps();
    let mut out = Vec::new();
    for j in 0..n {
        segment_crossings(curve, walk.site(j), walk.site(j + 1), j, j + 1 == n, &mut out);
    }
    out
}

/// Points where the observable's coordinate is read, as in the cut-plane and
/// half-plane conventions: angle `pi u` or `2 pi u` at radius `c`.
pub fn angle_points(domain: Domain, c: f64, angles: &[f64]) -> Vec<(f64, f64)> {
    let turn = match domain {
        Domain::HalfPlane => std::f64::consts::PI,
        Domain::CutPlane => 2.0 * std::f64::consts::PI,
    };
    angles.iter().map(|u| (c * (turn * u).cos(), c * (turn * u).sin())).collect()
}

/// Pass-right decisions by generic polygon ray casting: the walk up to its
/// first site beyond `3c`, closed by a long radial segment, with the
/// crossing rule "a vertex at the ray's height is below it".
/// `None` if the walk never leaves radius `3c` or ends inside radius `c`.
pub fn brute_pass_right(walk: &Walk, domain: Domain, c: f64, angles: &[f64]) -> Option<Vec<bool>> {
    let sites = walk.sites();
    let exit = sites.iter().position(|p| p.norm() > 3.0 * c)?;
    if sites.last().unwrap().norm() < c {
        return None;
    }
    let mut poly: Vec<(f64, f64)> = sites[..=exit].iter().map(|p| (p.x as f64, p.y as f64)).collect();
    let (ex, ey) = *poly.last().unwrap();
    let far = 1e3 * (3.0 * c + sites.len() as f64) / (ex.hypot(ey));
    poly.push((ex * far, ey * far));

    let points = angle_points(domain, c, angles);
    Some(
        points
            .iter()
            .map(|&(zx, zy)| {
                let mut odd = false;
                for w in poly.windows(2) {
                    let ((x1, y1), (x2, y2)) = (w[0], w[1]);
                    if (y1 > zy) != (y2 > zy) {
                        let x = x1 + (zy - y1) * (x2 - x1) / (y2 - y1);
                        if x > zx {
                            odd = !odd;
                        }
                    }
                }
                let lower_edge = domain == Domain::CutPlane && zy < 0.0;
                odd != lower_edge
            })
            .collect(),
    )
}

/// Every walk of `n` steps in `domain` by filtering all `4^n` step sequences.
pub fn brute_walks(n: usize, domain: Domain) -> Vec<Vec<Point>> {
    let dirs = [Point::new(1, 0), Point::new(-1, 0), Point::new(0, 1), Point::new(0, -1)];
    let mut out = Vec::new();
    for code in 0..4usize.pow(n as u32) {
        let mut sites = vec![Point::ORIGIN];
        let mut c = code;
        for _ in 0..n {
            let d = dirs[c % 4];
            c /= 4;
            let last = *sites.last().unwrap();
            sites.push(Point::new(last.x + d.x, last.y + d.y));
        }
        let distinct: HashSet<_> = sites.iter().collect();
        if distinct.len() == sites.len() && sites.iter().enumerate().all(|(k, &p)| domain.contains(p, k)) {
            out.push(sites);
        }
    }
    out
}

/// The uniformizing map for the half-plane minus a circular arc, as printed:
/// `2s / (1 + (1 - 4xs/(x+1)^2)^{1/2})`.
pub fn phi(x: f64, s: f64) -> f64 {
    2.0 * s / (1.0 + (1.0 - 4.0 * x * s / ((x + 1.0) * (x + 1.0))).sqrt())
}

/// Five-point central difference of `phi(., s)` at `x`.
pub fn phi_prime_numeric(x: f64, s: f64, h: f64) -> f64 {
    let f = |t: f64| phi(t, s);
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

/// Pivot-site weights straight from the definition: 8, 4, 2, 1 on the
/// fifths of `[0, N)`.
pub fn piecewise_weight(i: usize, n: usize) -> f64 {
    match (0..4).find(|&k| 5 * i < (k + 1) * n) {
        Some(0) => 8.0,
        Some(1) => 4.0,
        Some(2) => 2.0,
        _ => 1.0,
    }
}
