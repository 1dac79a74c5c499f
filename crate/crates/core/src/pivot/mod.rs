//! The pivot Markov chain on fixed-length walks in a [`Domain`].
//!
//! Accepted pivots are not written into the stored walk immediately. Each one
//! is folded into a short list of piecewise affine maps (one per distinct
//! pivot index), so that [`Chain::site`] can answer for the logical walk with
//! a binary search and a single lattice isometry. The stored walk is rewritten
//! only when the number of pending pivots reaches the flush threshold.

mod unfold;

pub use unfold::{apply_moves, unfold, UnfoldStep};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Domain, Point, Sites, Symmetry, Walk};

pub const DEFAULT_FLUSH_THRESHOLD: usize = 32;

/// Pairs `(a, b)` with `(i - a) + (b - i) <= LOCAL_RADIUS` are checked before
/// the full scan. Most rejections are short-range folds.
const LOCAL_RADIUS: usize = 6;

/// How pivot sites are weighted along the walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SiteProfile {
    Uniform,
    /// Weights 8, 4, 2, 1 on `[0, N/5)`, `[N/5, 2N/5)`, `[2N/5, 3N/5)`, `[3N/5, N)`.
    #[default]
    Piecewise,
}

impl std::str::FromStr for SiteProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(SiteProfile::Uniform),
            "piecewise" => Ok(SiteProfile::Piecewise),
            other => Err(Error::Parse(format!("unknown site profile {other:?}"))),
        }
    }
}

/// A piecewise-constant distribution over pivot sites `0..N`, sampled exactly
/// with integer arithmetic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiteDistribution {
    n: usize,
    /// `(start, end, weight)` with `end` exclusive; empty bands are dropped.
    bands: Vec<(usize, usize, u64)>,
    total: u64,
}

impl SiteDistribution {
    pub fn new(n: usize, profile: SiteProfile) -> Self {
        assert!(n >= 1, "need at least one pivot site");
        let bands: Vec<(usize, usize, u64)> = match profile {
            SiteProfile::Uniform => vec![(0, n, 1)],
            SiteProfile::Piecewise => {
                // band k starts at the first i with 5 i >= k N
                let edge = |k: usize| (k * n).div_ceil(5);
                let edges = [0, edge(1), edge(2), edge(3), n];
                [8u64, 4, 2, 1]
                    .iter()
                    .enumerate()
                    .map(|(k, &w)| (edges[k], edges[k + 1], w))
                    .filter(|&(a, b, _)| b > a)
                    .collect()
            }
        };
        let total = bands.iter().map(|&(a, b, w)| (b - a) as u64 * w).sum();
        SiteDistribution { n, bands, total }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Normalization constant: the probability of a weight-1 site.
    pub fn unit_probability(&self) -> f64 {
        1.0 / self.total as f64
    }

    pub fn weight(&self, i: usize) -> u64 {
        self.bands
            .iter()
            .find(|&&(a, b, _)| (a..b).contains(&i))
            .map_or(0, |&(_, _, w)| w)
    }

    pub fn probability(&self, i: usize) -> f64 {
        self.weight(i) as f64 / self.total as f64
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let mut u = rng.random_range(0..self.total);
        for &(a, b, w) in &self.bands {
            let mass = (b - a) as u64 * w;
            if u < mass {
                return a + (u / w) as usize;
            }
            u -= mass;
        }
        unreachable!("u is drawn below the total mass")
    }
}

/// Pivot about site `index`, moving sites `index + 1..=N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PivotProposal {
    pub index: usize,
    pub symmetry: Symmetry,
}

/// `p -> M p + t` with `M` a lattice symmetry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Affine {
    m: Symmetry,
    t: Point,
}

impl Affine {
    const IDENTITY: Affine = Affine {
        m: Symmetry::IDENTITY,
        t: Point::ORIGIN,
    };

    #[inline]
    fn about(pivot: Point, g: Symmetry) -> Affine {
        Affine {
            m: g,
            t: pivot - g.act(pivot),
        }
    }

    #[inline]
    fn apply(self, p: Point) -> Point {
        self.m.act(p) + self.t
    }

    /// `self` after `inner`.
    #[inline]
    fn after(self, inner: Affine) -> Affine {
        Affine {
            m: self.m.compose(inner.m),
            t: self.m.act(inner.t) + self.t,
        }
    }
}

/// Accepted pivots that have not been written into the stored walk.
///
/// `cuts` is sorted and distinct; `maps[k]` acts on indices in
/// `(cuts[k], cuts[k + 1]]`, the last one up to `N`. Indices `<= cuts[0]` are
/// untouched.
#[derive(Debug, Clone, Default)]
struct Pending {
    cuts: Vec<usize>,
    maps: Vec<Affine>,
    count: usize,
}

impl Pending {
    #[inline]
    fn map_for(&self, i: usize) -> Option<Affine> {
        if self.cuts.is_empty() || i <= self.cuts[0] {
            return None;
        }
        let k = self.cuts.partition_point(|&c| c < i);
        Some(self.maps[k - 1])
    }

    fn push(&mut self, index: usize, transform: Affine) {
        let pos = self.cuts.partition_point(|&c| c < index);
        if pos == self.cuts.len() || self.cuts[pos] != index {
            let inherited = if pos == 0 { Affine::IDENTITY } else { self.maps[pos - 1] };
            self.cuts.insert(pos, index);
            self.maps.insert(pos, inherited);
        }
        for m in &mut self.maps[pos..] {
            *m = transform.after(*m);
        }
        self.count += 1;
    }

    fn clear(&mut self) {
        self.cuts.clear();
        self.maps.clear();
        self.count = 0;
    }
}

/// Site lookup for monotone index sequences: tracks the pending piece
/// instead of searching for it on every access.
#[derive(Clone)]
struct Cursor<'a> {
    sites: &'a [Point],
    cuts: &'a [usize],
    maps: &'a [Affine],
    piece: usize,
}

impl<'a> Cursor<'a> {
    fn new(chain: &'a Chain, i: usize) -> Self {
        let cuts = &chain.pending.cuts[..];
        Cursor {
            sites: chain.walk.sites(),
            cuts,
            maps: &chain.pending.maps,
            piece: cuts.partition_point(|&c| c < i),
        }
    }

    #[inline]
    fn at(&self, i: usize) -> Point {
        let p = self.sites[i];
        match self.piece {
            0 => p,
            k => self.maps[k - 1].apply(p),
        }
    }

    /// Site `i`, for `i` not above any index previously requested.
    #[inline]
    fn down(&mut self, i: usize) -> Point {
        while self.piece > 0 && self.cuts[self.piece - 1] >= i {
            self.piece -= 1;
        }
        self.at(i)
    }

    /// Site `i`, for `i` not below any index previously requested.
    #[inline]
    fn up(&mut self, i: usize) -> Point {
        while self.piece < self.cuts.len() && self.cuts[self.piece] < i {
            self.piece += 1;
        }
        self.at(i)
    }
}

/// Serializable position of the chain's random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub word_pos: u128,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub n: usize,
    pub domain: Domain,
    pub profile: SiteProfile,
    pub flush_threshold: usize,
    pub seed: u64,
}

impl ChainConfig {
    pub fn new(n: usize, domain: Domain, seed: u64) -> Self {
        ChainConfig {
            n,
            domain,
            profile: SiteProfile::Piecewise,
            flush_threshold: DEFAULT_FLUSH_THRESHOLD,
            seed,
        }
    }
}

/// A single pivot chain. Not shared between threads while running, but `Send`.
#[derive(Debug, Clone)]
pub struct Chain {
    domain: Domain,
    walk: Walk,
    pending: Pending,
    flush_threshold: usize,
    sites: SiteDistribution,
    rng: ChaCha8Rng,
    seed: u64,
    iterations: u64,
    accepted: u64,
    flushes: u64,
    last: Option<(PivotProposal, bool)>,
    changed_from: Option<usize>,
}

impl Chain {
    /// Starts from the straight vertical walk.
    pub fn new(config: ChainConfig) -> Result<Chain> {
        if config.n < 1 {
            return Err(Error::Config("walk length must be at least 1".into()));
        }
        Chain::from_walk(Walk::straight(config.n), config)
    }

    /// Starts from an arbitrary valid walk of length `config.n`.
    pub fn from_walk(walk: Walk, config: ChainConfig) -> Result<Chain> {
        if walk.len() != config.n {
            return Err(Error::Config(format!(
                "walk has {} steps but the chain expects {}",
                walk.len(),
                config.n
            )));
        }
        if config.flush_threshold == 0 {
            return Err(Error::Config("flush threshold must be positive".into()));
        }
        walk.check_domain(config.domain)?;
        Ok(Chain {
            domain: config.domain,
            sites: SiteDistribution::new(config.n, config.profile),
            walk,
            pending: Pending::default(),
            flush_threshold: config.flush_threshold,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            seed: config.seed,
            iterations: 0,
            accepted: 0,
            flushes: 0,
            last: None,
            changed_from: None,
        })
    }

    /// Rebuilds a chain at a saved position of its random stream.
    pub fn restore(
        walk: Walk,
        config: ChainConfig,
        rng: RngState,
        iterations: u64,
        accepted: u64,
    ) -> Result<Chain> {
        if rng.seed != config.seed {
            return Err(Error::Config(format!(
                "saved stream uses seed {} but the chain was configured with {}",
                rng.seed, config.seed
            )));
        }
        let mut chain = Chain::from_walk(walk, config)?;
        chain.rng.set_word_pos(rng.word_pos);
        chain.iterations = iterations;
        chain.accepted = accepted;
        Ok(chain)
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.walk.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.iterations == 0 {
            0.0
        } else {
            self.accepted as f64 / self.iterations as f64
        }
    }

    pub fn pending(&self) -> usize {
        self.pending.count
    }

    pub fn flush_threshold(&self) -> usize {
        self.flush_threshold
    }

    pub fn site_distribution(&self) -> &SiteDistribution {
        &self.sites
    }

    pub fn rng_state(&self) -> RngState {
        RngState {
            seed: self.seed,
            word_pos: self.rng.get_word_pos(),
        }
    }

    /// The most recent proposal and whether it was accepted.
    pub fn last_step(&self) -> Option<(PivotProposal, bool)> {
        self.last
    }

    /// Site `i` of the logical walk (all accepted pivots applied).
    #[inline]
    pub fn site(&self, i: usize) -> Point {
        let p = self.walk.sites()[i];
        match self.pending.map_for(i) {
            Some(m) => m.apply(p),
            None => p,
        }
    }

    pub fn get(&self, i: usize) -> Option<Point> {
        (i <= self.len()).then(|| self.site(i))
    }

    /// A materialized copy of the logical walk.
    pub fn walk(&self) -> Walk {
        let mut copy = self.walk.clone();
        Self::materialize(&mut copy, &self.pending);
        copy
    }

    /// The stored walk, which lags the logical walk by the pending pivots.
    pub fn stored_walk(&self) -> &Walk {
        &self.walk
    }

    fn materialize(walk: &mut Walk, pending: &Pending) {
        let n = walk.len();
        let sites = walk.sites_mut();
        for (k, (&cut, map)) in pending.cuts.iter().zip(&pending.maps).enumerate() {
            let end = pending.cuts.get(k + 1).copied().unwrap_or(n);
            for p in &mut sites[cut + 1..=end] {
                *p = map.apply(*p);
            }
        }
    }

    /// Writes all pending pivots into the stored walk.
    pub fn flush(&mut self) {
        if self.pending.count == 0 {
            return;
        }
        Self::materialize(&mut self.walk, &self.pending);
        self.pending.clear();
        self.flushes += 1;
        if cfg!(debug_assertions) && self.flushes % 64 == 1 {
            self.walk
                .validate(self.domain)
                .expect("the chain only ever holds valid walks");
        }
    }

    pub fn propose(&mut self) -> PivotProposal {
        let index = self.sites.sample(&mut self.rng);
        let symmetry = Symmetry::NON_IDENTITY[self.rng.random_range(0..Symmetry::NON_IDENTITY.len())];
        PivotProposal { index, symmetry }
    }

    /// Whether pivoting the logical walk by `prop` gives a self-avoiding walk in the domain.
    pub fn accept_test(&self, prop: PivotProposal) -> bool {
        let n = self.len();
        let i = prop.index;
        debug_assert!(i < n, "pivot index {i} out of range");
        let q = self.site(i);
        let map = Affine::about(q, prop.symmetry);

        // short-range folds first
        for r in 2..=LOCAL_RADIUS {
            for da in 1..r {
                let db = r - da;
                if da > i || i + db > n {
                    continue;
                }
                if self.site(i - da) == map.apply(self.site(i + db)) {
                    return false;
                }
            }
        }

        // domain: a site at boundary distance D keeps the next D - 1 sites inside
        let mut tail = Cursor::new(self, i + 1);
        let mut j = i + 1;
        while j <= n {
            let dist = self.domain.boundary_distance(map.apply(tail.up(j)));
            if dist == 0 {
                return false;
            }
            j += dist as usize;
        }

        // self-avoidance of the moved part (b > i) against the fixed part (a < i),
        // outward from the pivot on both indices
        if i == 0 {
            return true;
        }
        let mut tail = Cursor::new(self, i + 1);
        let head = Cursor::new(self, i - 1);
        let mut b = i + 1;
        while b <= n {
            let pb = map.apply(tail.up(b));
            // a = i is never a collision and bounds the minimum distance
            let mut bound = pb.l1_dist(q);
            let mut fixed = head.clone();
            let mut a = i - 1;
            loop {
                let d = fixed.down(a).l1_dist(pb);
                if d == 0 {
                    return false;
                }
                bound = bound.min(d);
                // sites a - k with k <= d - bound are at distance >= bound
                let skip = (d - bound + 1) as usize;
                if skip > a {
                    break;
                }
                a -= skip;
            }
            // moved sites b + u with u < bound cannot reach any fixed site
            b += bound as usize;
        }
        true
    }

    /// The smallest pivot index applied since the previous call, if any;
    /// sites up to that index are unchanged.
    pub fn take_changed_from(&mut self) -> Option<usize> {
        self.changed_from.take()
    }

    /// Appends an accepted pivot, flushing first if the pending list is full.
    pub fn apply(&mut self, prop: PivotProposal) {
        self.changed_from = Some(self.changed_from.map_or(prop.index, |i| i.min(prop.index)));
        if self.pending.count >= self.flush_threshold {
            self.flush();
        }
        let q = self.site(prop.index);
        self.pending.push(prop.index, Affine::about(q, prop.symmetry));
    }

    /// One Metropolis step. Rejections leave the walk unchanged.
    pub fn step(&mut self) -> bool {
        let prop = self.propose();
        self.iterations += 1;
        let ok = self.accept_test(prop);
        if ok {
            self.apply(prop);
            self.accepted += 1;
        }
        self.last = Some((prop, ok));
        ok
    }
}

impl Sites for Chain {
    #[inline]
    fn steps(&self) -> usize {
        self.len()
    }

    #[inline]
    fn site(&self, i: usize) -> Point {
        Chain::site(self, i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn naive_accept(walk: &Walk, domain: Domain, prop: PivotProposal) -> bool {
        let new = walk.pivoted(prop.index, prop.symmetry);
        let set: HashSet<Point> = new.sites().iter().copied().collect();
        set.len() == new.sites().len()
            && new.sites().iter().enumerate().all(|(k, &p)| domain.contains(p, k))
    }

    fn chain(n: usize, domain: Domain, seed: u64) -> Chain {
        Chain::new(ChainConfig::new(n, domain, seed)).unwrap()
    }

    #[test]
    fn site_distribution_small() {
        let d = SiteDistribution::new(5, SiteProfile::Piecewise);
        let w: Vec<u64> = (0..5).map(|i| d.weight(i)).collect();
        assert_eq!(w, vec![8, 4, 2, 1, 1]);
        assert_eq!(d.unit_probability(), 1.0 / 16.0);
        let u = SiteDistribution::new(16, SiteProfile::Uniform);
        assert!((0..16).all(|i| u.probability(i) == 1.0 / 16.0));
        for n in [1, 2, 3, 4, 6, 7, 10, 99, 1000] {
            let d = SiteDistribution::new(n, SiteProfile::Piecewise);
            let sum: f64 = (0..n).map(|i| d.probability(i)).sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!((0..n).all(|i| d.weight(i) > 0));
            if n % 5 == 0 {
                assert!((d.unit_probability() - 5.0 / (16.0 * n as f64)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn site_lookup_through_pending() {
        let mut c = chain(10, Domain::HalfPlane, 1);
        assert_eq!(c.site(0), Point::ORIGIN);
        let k = 4;
        c.apply(PivotProposal {
            index: k,
            symmetry: Symmetry::ROT90,
        });
        for i in 0..=k {
            assert_eq!(c.site(i), Point::new(0, i as i32));
        }
        let pivot = Point::new(0, k as i32);
        for i in k + 1..=10 {
            assert_eq!(c.site(i), Symmetry::ROT90.apply_about(pivot, Point::new(0, i as i32)));
        }
        assert_eq!(c.get(11), None);
    }

    #[test]
    fn flush_matches_sequential_materialization() {
        let mut c = chain(60, Domain::CutPlane, 9);
        let mut reference = c.walk();
        let mut applied = 0;
        while applied < 16 {
            let prop = c.propose();
            if c.accept_test(prop) {
                c.apply(prop);
                reference = reference.pivoted(prop.index, prop.symmetry);
                applied += 1;
                for i in 0..=60 {
                    assert_eq!(c.site(i), reference.sites()[i]);
                }
            }
        }
        assert_eq!(c.pending(), 16);
        c.flush();
        assert_eq!(c.pending(), 0);
        assert_eq!(c.stored_walk(), &reference);
        c.flush();
        assert_eq!(c.stored_walk(), &reference);
    }

    #[test]
    fn straight_walk_examples() {
        let c = chain(20, Domain::HalfPlane, 3);
        assert!(!c.accept_test(PivotProposal {
            index: 10,
            symmetry: Symmetry::ROT180
        }));
        for index in 0..20 {
            assert!(c.accept_test(PivotProposal {
                index,
                symmetry: Symmetry::REFLECT_X
            }));
        }
    }

    #[test]
    fn pruned_test_matches_naive_on_chain_walks() {
        for domain in [Domain::HalfPlane, Domain::CutPlane] {
            let mut c = chain(80, domain, 11);
            for _ in 0..20_000 {
                c.step();
            }
            for _ in 0..2_000 {
                let walk = c.walk();
                let prop = c.propose();
                assert_eq!(c.accept_test(prop), naive_accept(&walk, domain, prop), "{prop:?}");
                c.step();
            }
        }
    }

    #[test]
    fn rejection_leaves_walk_unchanged() {
        let mut c = chain(200, Domain::HalfPlane, 5);
        for _ in 0..5_000 {
            let before = c.walk();
            let accepted = c.step();
            if !accepted {
                assert_eq!(c.walk(), before);
            }
        }
        assert_eq!(c.iterations(), 5_000);
        assert!(c.pending() <= c.flush_threshold());
    }

    #[test]
    fn restore_resumes_the_stream() {
        let cfg = ChainConfig::new(100, Domain::HalfPlane, 77);
        let mut a = Chain::new(cfg).unwrap();
        for _ in 0..3_000 {
            a.step();
        }
        let mut b = Chain::restore(a.walk(), cfg, a.rng_state(), a.iterations(), a.accepted()).unwrap();
        for _ in 0..3_000 {
            assert_eq!(a.step(), b.step());
        }
        assert_eq!(a.walk(), b.walk());
        assert_eq!(a.accepted(), b.accepted());
        let other = ChainConfig { seed: 78, ..cfg };
        assert!(Chain::restore(a.walk(), other, a.rng_state(), 0, 0).is_err());
    }
}
