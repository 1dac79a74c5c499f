//! Explicit unfolding of any walk into the straight vertical walk by pivot
//! moves that never leave the set of valid walks in the domain. Running it on
//! every small walk is an executable irreducibility check for the chain.

use crate::error::{Error, Result};
use crate::lattice::{Domain, Point, Symmetry, Walk};

use super::PivotProposal;

/// Which case of the unfolding produced a move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnfoldStep {
    /// Last step horizontal: mirror in the extremal diagonal line.
    Diagonal,
    /// Last step vertical, walk on one side of its line: quarter turn at the last turn.
    Rotate,
    /// Last step vertical, walk on both sides: mirror in the leftmost vertical line.
    Widen,
    /// Zero turns but not pointing up: turn the whole walk about the origin.
    Straighten,
}

fn turn_at(sites: &[Point], k: usize) -> bool {
    sites[k] - sites[k - 1] != sites[k + 1] - sites[k]
}

/// Last index attaining the maximum of `key`.
fn last_argmax(sites: &[Point], key: impl Fn(Point) -> i32) -> usize {
    let best = sites.iter().map(|&p| key(p)).max().expect("non-empty walk");
    sites.iter().rposition(|&p| key(p) == best).expect("maximum is attained")
}

fn next_move(sites: &[Point], domain: Domain) -> Option<(PivotProposal, UnfoldStep)> {
    let n = sites.len() - 1;
    let last_turn = (1..n).rev().find(|&k| turn_at(sites, k));
    let Some(last_turn) = last_turn else {
        let symmetry = match sites[1] {
            Point { x: 0, y: 1 } => return None,
            Point { x: 0, y: -1 } => Symmetry::ROT180,
            Point { x: -1, y: 0 } => Symmetry::ROT270,
            _ => Symmetry::ROT90,
        };
        return Some((PivotProposal { index: 0, symmetry }, UnfoldStep::Straighten));
    };

    let last = sites[n] - sites[n - 1];
    let (index, symmetry, kind) = match (last.x, domain) {
        (1, _) => (
            last_argmax(sites, |p| p.y - p.x),
            Symmetry::REFLECT_DIAG,
            UnfoldStep::Diagonal,
        ),
        (-1, Domain::HalfPlane) => (
            last_argmax(sites, |p| p.y + p.x),
            Symmetry::REFLECT_ANTI_DIAG,
            UnfoldStep::Diagonal,
        ),
        (-1, Domain::CutPlane) => {
            // quadrant left of (l, 0) bounded by x - y = l and x + y = l
            let i = last_argmax(sites, |p| p.x + p.y.abs());
            let g = if sites[i].y > 0 {
                Symmetry::REFLECT_ANTI_DIAG
            } else {
                Symmetry::REFLECT_DIAG
            };
            (i, g, UnfoldStep::Diagonal)
        }
        _ => {
            let line = sites[n].x;
            let up = last.y > 0;
            let right_of = sites.iter().all(|p| p.x >= line);
            let left_of = sites.iter().all(|p| p.x <= line);
            if right_of || left_of {
                // swing the final straight run off the line, away from the walk
                let ccw = right_of == up;
                let g = if ccw { Symmetry::ROT90 } else { Symmetry::ROT270 };
                (last_turn, g, UnfoldStep::Rotate)
            } else {
                let leftmost = sites.iter().map(|p| p.x).min().expect("non-empty walk");
                let i = sites.iter().rposition(|p| p.x == leftmost).expect("minimum is attained");
                (i, Symmetry::REFLECT_X, UnfoldStep::Widen)
            }
        }
    };
    Some((PivotProposal { index, symmetry }, kind))
}

/// Pivot moves taking `walk` to the straight vertical walk, each one keeping
/// the walk self-avoiding and inside `domain`.
pub fn unfold(walk: &Walk, domain: Domain) -> Result<Vec<(PivotProposal, UnfoldStep)>> {
    walk.validate(domain)?;
    let n = walk.len();
    let limit = 4 * (n + 2) * (n + 2);
    let mut current = walk.clone();
    let mut moves = Vec::new();
    while let Some((prop, kind)) = next_move(current.sites(), domain) {
        if moves.len() >= limit {
            return Err(Error::UnfoldStuck(moves.len()));
        }
        current = current.pivoted(prop.index, prop.symmetry);
        moves.push((prop, kind));
    }
    Ok(moves)
}

/// Applies moves in order, validating every intermediate walk.
pub fn apply_moves(walk: &Walk, domain: Domain, moves: &[PivotProposal]) -> Result<Walk> {
    let mut current = walk.clone();
    for (k, prop) in moves.iter().enumerate() {
        current = current.pivoted(prop.index, prop.symmetry);
        current.validate(domain).map_err(|e| {
            Error::InvalidWalk(format!("after move {k} ({} at {}): {e}", prop.symmetry, prop.index))
        })?;
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::enumerate_walks;

    fn width(w: &Walk) -> i32 {
        let xs = w.sites().iter().map(|p| p.x);
        xs.clone().max().unwrap() - xs.min().unwrap()
    }

    #[test]
    fn straight_walk_needs_nothing() {
        assert!(unfold(&Walk::straight(9), Domain::HalfPlane).unwrap().is_empty());
        assert!(unfold(&Walk::straight(9), Domain::CutPlane).unwrap().is_empty());
    }

    #[test]
    fn single_corner() {
        let w = Walk::new(vec![Point::new(0, 0), Point::new(0, 1), Point::new(1, 1)]).unwrap();
        let moves = unfold(&w, Domain::HalfPlane).unwrap();
        assert_eq!(
            moves,
            vec![(
                PivotProposal {
                    index: 1,
                    symmetry: Symmetry::REFLECT_DIAG
                },
                UnfoldStep::Diagonal
            )]
        );
        let props: Vec<_> = moves.iter().map(|m| m.0).collect();
        assert_eq!(apply_moves(&w, Domain::HalfPlane, &props).unwrap(), Walk::straight(2));
    }

    #[test]
    fn all_small_walks_unfold() {
        for domain in [Domain::HalfPlane, Domain::CutPlane] {
            for n in 1..=8 {
                for w in enumerate_walks(n, domain) {
                    let moves = unfold(&w, domain).unwrap();
                    let mut current = w.clone();
                    let mut stalled = false;
                    for (prop, kind) in &moves {
                        let next = current.pivoted(prop.index, prop.symmetry);
                        next.validate(domain).unwrap();
                        match kind {
                            // a pivot at the origin removes no turn
                            UnfoldStep::Diagonal if prop.index == 0 => assert!(next.turns() <= current.turns()),
                            UnfoldStep::Diagonal | UnfoldStep::Rotate => {
                                assert_eq!(next.turns() + 1, current.turns(), "{kind:?} on {current:?}")
                            }
                            UnfoldStep::Widen => {
                                // equal width only when the whole head sits on the mirror line,
                                // and then the following widening is strict
                                assert!(width(&next) >= width(&current));
                                let equal = width(&next) == width(&current);
                                assert!(!(equal && stalled), "{current:?}");
                                stalled = equal;
                            }
                            UnfoldStep::Straighten => assert_eq!(next.turns(), 0),
                        }
                        if *kind != UnfoldStep::Widen {
                            stalled = false;
                        }
                        current = next;
                    }
                    assert!(current.is_straight_up(), "{domain} {w:?}");
                }
            }
        }
    }
}
