//! Empirical distributions with batch-means error bars, and their comparison
//! against exact or reference curves.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables::{Censor, Measurement, ObservableKind, ObservableSpec};
use crate::sle::{ExactCdf, ReferenceFn};

pub const DEFAULT_BATCHES: usize = 100;

pub const CSV_HEADER: &str = "t,empirical,exact,diff,stderr";

/// `points` values `w sinh(u)` with `u` evenly spaced, so the grid is
/// densest around zero.
pub fn sinh_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, b) = (lo.asinh(), hi.asinh());
    let last = (points - 1) as f64;
    (0..points)
        .map(|k| match k {
            0 => lo,
            k if k == points - 1 => hi,
            k => (a + (b - a) * k as f64 / last).sinh(),
        })
        .collect()
}

pub fn uniform_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let last = (points - 1) as f64;
    (0..points).map(|k| lo + (hi - lo) * k as f64 / last).collect()
}

/// `0.01, 0.02, ..., 0.99`.
pub fn pass_right_grid() -> Vec<f64> {
    (1..100).map(|k| k as f64 / 100.0).collect()
}

/// Evaluation grid used for each observable kind.
pub fn default_grid(kind: ObservableKind) -> Vec<f64> {
    match kind {
        ObservableKind::Xe | ObservableKind::Xf => sinh_grid(-20.0, 4.0, 200),
        ObservableKind::Ye | ObservableKind::Yf => sinh_grid(0.0, 20.0, 200),
        ObservableKind::ThetaE | ObservableKind::ThetaF => uniform_grid(0.0, 1.0, 100),
        ObservableKind::PassRight => pass_right_grid(),
    }
}

/// The curve an empirical distribution is compared against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Exact(ExactCdf),
    /// An approximate closed form, for variables without a known law.
    Reference(ReferenceFn),
}

impl Target {
    /// Exact law for extremal kinds and pass-right, reference function otherwise.
    ///
    /// Cut-plane variables share the half-plane laws; pass-right angle
    /// fractions map to the same half-plane angle `pi u` in both domains.
    pub fn for_spec(spec: &ObservableSpec) -> Target {
        match spec.kind {
            ObservableKind::Xe => Target::Exact(ExactCdf::Xe),
            ObservableKind::Ye => Target::Exact(ExactCdf::Ye),
            ObservableKind::ThetaE => Target::Exact(ExactCdf::ThetaE { d: spec.d }),
            ObservableKind::PassRight => Target::Exact(ExactCdf::PassRight),
            ObservableKind::Xf => Target::Reference(ReferenceFn::X),
            ObservableKind::Yf => Target::Reference(ReferenceFn::Y),
            ObservableKind::ThetaF => Target::Reference(ReferenceFn::Theta),
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        match self {
            Target::Exact(f) => f.eval(t),
            Target::Reference(f) => Ok(f.eval(t)),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Target::Exact(_) => "exact",
            Target::Reference(_) => "reference",
        }
    }
}

/// How observations are tallied at each grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TallyMode {
    /// Scalar values; the tally at `t_k` counts values `<= t_k`.
    Cdf,
    /// One yes/no outcome per grid point.
    Fraction,
}

impl TallyMode {
    pub fn for_kind(kind: ObservableKind) -> TallyMode {
        if kind == ObservableKind::PassRight {
            TallyMode::Fraction
        } else {
            TallyMode::Cdf
        }
    }
}

/// Tallies over a contiguous stretch of the chain.
///
/// In [`TallyMode::Cdf`] `counts[k]` is the number of values in
/// `(t_{k-1}, t_k]`, with a final bin for values above the grid.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Batch {
    pub observations: u64,
    pub samples: u64,
    pub counts: Vec<u64>,
}

impl Batch {
    fn empty(bins: usize) -> Batch {
        Batch {
            observations: 0,
            samples: 0,
            counts: vec![0; bins],
        }
    }

    /// Tally at each grid point.
    fn tallies(&self, mode: TallyMode, points: usize) -> Vec<u64> {
        match mode {
            TallyMode::Fraction => self.counts.clone(),
            TallyMode::Cdf => self.counts[..points]
                .iter()
                .scan(0u64, |acc, &c| {
                    *acc += c;
                    Some(*acc)
                })
                .collect(),
        }
    }
}

/// Binned empirical distribution of one observable, split into batches of
/// `batch_len` consecutive observations for error estimation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfAccumulator {
    id: String,
    grid: Vec<f64>,
    mode: TallyMode,
    batch_len: u64,
    min_batches: usize,
    batches: Vec<Batch>,
    open: Batch,
    never_reached: u64,
    ends_inside: u64,
}

impl CdfAccumulator {
    /// `expected` is the number of observations the run will make; it is
    /// split into `batches` batches.
    pub fn new(id: impl Into<String>, grid: Vec<f64>, mode: TallyMode, expected: u64, batches: usize) -> Result<Self> {
        if grid.is_empty() || grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("grid must be non-empty and strictly increasing".into()));
        }
        if batches < 2 {
            return Err(Error::Config(format!("need at least 2 batches, got {batches}")));
        }
        let bins = match mode {
            TallyMode::Cdf => grid.len() + 1,
            TallyMode::Fraction => grid.len(),
        };
        Ok(CdfAccumulator {
            id: id.into(),
            grid,
            mode,
            batch_len: expected.div_ceil(batches as u64).max(1),
            min_batches: batches,
            batches: Vec::new(),
            open: Batch::empty(bins),
            never_reached: 0,
            ends_inside: 0,
        })
    }

    pub fn for_spec(spec: &ObservableSpec, expected: u64, batches: usize) -> Result<Self> {
        CdfAccumulator::new(
            spec.id(),
            default_grid(spec.kind),
            TallyMode::for_kind(spec.kind),
            expected,
            batches,
        )
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn mode(&self) -> TallyMode {
        self.mode
    }

    pub fn batch_len(&self) -> u64 {
        self.batch_len
    }

    fn all_batches(&self) -> impl Iterator<Item = &Batch> {
        self.batches.iter().chain((self.open.observations > 0).then_some(&self.open))
    }

    pub fn observations(&self) -> u64 {
        self.all_batches().map(|b| b.observations).sum()
    }

    /// Uncensored observations.
    pub fn samples(&self) -> u64 {
        self.all_batches().map(|b| b.samples).sum()
    }

    pub fn censored(&self) -> u64 {
        self.never_reached + self.ends_inside
    }

    pub fn censored_by(&self, reason: Censor) -> u64 {
        match reason {
            Censor::NeverReached => self.never_reached,
            Censor::EndsInside => self.ends_inside,
        }
    }

    pub fn batch_count(&self) -> usize {
        self.all_batches().count()
    }

    /// Total tally at each grid point.
    pub fn tallies(&self) -> Vec<u64> {
        let mut total = vec![0u64; self.grid.len()];
        for b in self.all_batches() {
            for (t, c) in total.iter_mut().zip(b.tallies(self.mode, self.grid.len())) {
                *t += c;
            }
        }
        total
    }

    pub fn record(&mut self, m: &Measurement) -> Result<()> {
        match (m, self.mode) {
            (Measurement::Value(v), TallyMode::Cdf) => {
                let bin = self.grid.partition_point(|&t| t < *v);
                self.open.counts[bin] += 1;
                self.open.samples += 1;
            }
            (Measurement::Sides(sides), TallyMode::Fraction) if sides.len() == self.grid.len() => {
                for (c, &right) in self.open.counts.iter_mut().zip(sides) {
                    *c += right as u64;
                }
                self.open.samples += 1;
            }
            (Measurement::Censored(Censor::NeverReached), _) => self.never_reached += 1,
            (Measurement::Censored(Censor::EndsInside), _) => self.ends_inside += 1,
            _ => {
                return Err(Error::GridMismatch(format!(
                    "{}: measurement {m:?} does not fit a {:?} tally of {} points",
                    self.id,
                    self.mode,
                    self.grid.len()
                )))
            }
        }
        self.open.observations += 1;
        if self.open.observations == self.batch_len {
            let bins = self.open.counts.len();
            self.batches.push(std::mem::replace(&mut self.open, Batch::empty(bins)));
        }
        Ok(())
    }

    /// Combines two accumulators of the same observable. Batches are kept
    /// whole and put in a canonical order, so merging is commutative and
    /// associative exactly, not only up to rounding.
    pub fn merge(&self, other: &CdfAccumulator) -> Result<CdfAccumulator> {
        if self.id != other.id || self.grid != other.grid || self.mode != other.mode {
            return Err(Error::GridMismatch(format!("{} vs {}", self.id, other.id)));
        }
        let mut batches: Vec<Batch> = self.all_batches().chain(other.all_batches()).cloned().collect();
        batches.sort_unstable();
        Ok(CdfAccumulator {
            id: self.id.clone(),
            grid: self.grid.clone(),
            mode: self.mode,
            batch_len: self.batch_len.max(other.batch_len),
            min_batches: self.min_batches.min(other.min_batches),
            batches,
            open: Batch::empty(self.open.counts.len()),
            never_reached: self.never_reached + other.never_reached,
            ends_inside: self.ends_inside + other.ends_inside,
        })
    }

    /// Empirical values with batch-means standard errors, against `target`.
    pub fn finalize(&self, target: &Target) -> Result<ComparisonCurve> {
        let samples = self.samples();
        let used: Vec<&Batch> = self.all_batches().filter(|b| b.samples > 0).collect();
        if samples < self.min_batches as u64 || used.len() < 2 {
            return Err(Error::TooFewSamples {
                have: samples,
                batches: used.len(),
            });
        }
        let m = self.grid.len();
        let empirical: Vec<f64> = self.tallies().iter().map(|&c| c as f64 / samples as f64).collect();
        let per_batch: Vec<Vec<f64>> = used
            .iter()
            .map(|b| {
                b.tallies(self.mode, m)
                    .into_iter()
                    .map(|c| c as f64 / b.samples as f64)
                    .collect()
            })
            .collect();
        let nb = per_batch.len() as f64;
        let stderr = (0..m)
            .map(|k| {
                let mean = per_batch.iter().map(|f| f[k]).sum::<f64>() / nb;
                let var = per_batch.iter().map(|f| (f[k] - mean).powi(2)).sum::<f64>() / (nb - 1.0);
                (var / nb).sqrt()
            })
            .collect();
        ComparisonCurve::new(self.grid.clone(), empirical, stderr, target)
    }
}

/// Empirical curve next to a target curve, written as one CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonCurve {
    pub grid: Vec<f64>,
    pub empirical: Vec<f64>,
    pub exact: Vec<f64>,
    pub diff: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Ordered `key: value` header lines.
    pub metadata: Vec<(String, String)>,
}

impl ComparisonCurve {
    pub fn new(grid: Vec<f64>, empirical: Vec<f64>, stderr: Vec<f64>, target: &Target) -> Result<Self> {
        let exact = grid.iter().map(|&t| target.eval(t)).collect::<Result<Vec<_>>>()?;
        let diff = empirical.iter().zip(&exact).map(|(e, x)| e - x).collect();
        Ok(ComparisonCurve {
            grid,
            empirical,
            exact,
            diff,
            stderr,
            metadata: vec![("target".into(), target.label().into())],
        })
    }

    /// A curve with no samples: empirical values and errors are NaN.
    pub fn empty(grid: Vec<f64>, target: &Target) -> Result<Self> {
        let nan = vec![f64::NAN; grid.len()];
        ComparisonCurve::new(grid, nan.clone(), nan, target)
    }

    /// Recomputes the target column and the differences.
    pub fn retarget(&mut self, target: &Target) -> Result<()> {
        let fresh = ComparisonCurve::new(self.grid.clone(), self.empirical.clone(), self.stderr.clone(), target)?;
        self.exact = fresh.exact;
        self.diff = fresh.diff;
        self.set_meta("target", target.label());
        Ok(())
    }

    /// Kolmogorov-Smirnov distance on the grid: `max |empirical - exact|`.
    pub fn ks(&self) -> f64 {
        self.diff.iter().fold(0.0, |m, d| m.max(d.abs()))
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.metadata.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.metadata.push((key.to_string(), value)),
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (k, v) in &self.metadata {
            writeln!(out, "# {k}: {v}")?;
        }
        writeln!(out, "{CSV_HEADER}")?;
        for k in 0..self.grid.len() {
            writeln!(
                out,
                "{},{},{},{},{}",
                self.grid[k], self.empirical[k], self.exact[k], self.diff[k], self.stderr[k]
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = Vec::new();
        self.write_csv(&mut out).expect("writing to memory");
        String::from_utf8(out).expect("csv is utf-8")
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut curve = ComparisonCurve {
            grid: Vec::new(),
            empirical: Vec::new(),
            exact: Vec::new(),
            diff: Vec::new(),
            stderr: Vec::new(),
            metadata: Vec::new(),
        };
        let mut header = false;
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                let (k, v) = meta
                    .split_once(':')
                    .ok_or_else(|| Error::Parse(format!("line {}: metadata without ':'", lineno + 1)))?;
                curve.metadata.push((k.trim().to_string(), v.trim().to_string()));
                continue;
            }
            if !header {
                if line != CSV_HEADER {
                    return Err(Error::Parse(format!("line {}: expected header {CSV_HEADER:?}", lineno + 1)));
                }
                header = true;
                continue;
            }
            let fields = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            let [t, emp, exact, diff, se] = fields[..] else {
                return Err(Error::Parse(format!("line {}: expected 5 columns", lineno + 1)));
            };
            curve.grid.push(t);
            curve.empirical.push(emp);
            curve.exact.push(exact);
            curve.diff.push(diff);
            curve.stderr.push(se);
        }
        if !header {
            return Err(Error::Parse("missing CSV header".into()));
        }
        Ok(curve)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn acc(expected: u64, batches: usize) -> CdfAccumulator {
        CdfAccumulator::new("t", vec![0.0, 0.5, 1.0], TallyMode::Cdf, expected, batches).unwrap()
    }

    #[test]
    fn grids() {
        let x = default_grid(ObservableKind::Xe);
        assert_eq!((x.len(), x[0], x[199]), (200, -20.0, 4.0));
        assert!(x.windows(2).all(|w| w[0] < w[1]));
        let gap_near_zero = x.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        assert!(gap_near_zero < 0.05);
        let y = default_grid(ObservableKind::Ye);
        assert_eq!((y[0], y[199]), (0.0, 20.0));
        let th = default_grid(ObservableKind::ThetaE);
        assert_eq!((th.len(), th[0], th[99]), (100, 0.0, 1.0));
        let p = default_grid(ObservableKind::PassRight);
        assert_eq!((p.len(), p[0], p[98]), (99, 0.01, 0.99));
    }

    #[test]
    fn record_edges() {
        let mut a = acc(10, 2);
        a.record(&Measurement::Value(-1.0)).unwrap();
        assert_eq!(a.tallies(), vec![1, 1, 1]);
        a.record(&Measurement::Value(2.0)).unwrap();
        assert_eq!(a.tallies(), vec![1, 1, 1]);
        assert_eq!(a.samples(), 2);
        a.record(&Measurement::Value(0.5)).unwrap();
        assert_eq!(a.tallies(), vec![1, 2, 2]);
        a.record(&Measurement::Censored(Censor::EndsInside)).unwrap();
        assert_eq!((a.samples(), a.observations(), a.censored()), (3, 4, 1));
        assert!(a.record(&Measurement::Sides(vec![true])).is_err());
    }

    #[test]
    fn constant_stream_has_zero_error() {
        let mut a = acc(1000, 10);
        for _ in 0..1000 {
            a.record(&Measurement::Value(0.25)).unwrap();
        }
        assert_eq!(a.batch_count(), 10);
        let c = a.finalize(&Target::Reference(ReferenceFn::Theta)).unwrap();
        assert_eq!(c.empirical, vec![0.0, 1.0, 1.0]);
        assert_eq!(c.stderr, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn too_few_samples() {
        let mut a = acc(100, 10);
        for _ in 0..5 {
            a.record(&Measurement::Value(0.25)).unwrap();
        }
        assert!(matches!(
            a.finalize(&Target::Exact(ExactCdf::PassRight)),
            Err(Error::TooFewSamples { have: 5, .. })
        ));
    }

    #[test]
    fn merge_identity_and_mismatch() {
        let mut a = acc(20, 4);
        for k in 0..13 {
            a.record(&Measurement::Value(k as f64 / 10.0)).unwrap();
        }
        let empty = acc(20, 4);
        let merged = a.merge(&empty).unwrap();
        assert_eq!(merged.tallies(), a.tallies());
        assert_eq!(merged, empty.merge(&a).unwrap());
        let other = CdfAccumulator::new("t", vec![0.0, 1.0], TallyMode::Cdf, 20, 4).unwrap();
        assert!(matches!(a.merge(&other), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn csv_round_trip() {
        let mut a = acc(100, 4);
        for k in 0..100 {
            a.record(&Measurement::Value((k % 7) as f64 / 7.0)).unwrap();
        }
        let mut c = a.finalize(&Target::Exact(ExactCdf::ThetaE { d: 0.0 })).unwrap();
        c.set_meta("seed", 3);
        let text = c.to_csv();
        assert!(text.lines().any(|l| l == CSV_HEADER));
        let back = ComparisonCurve::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.meta("seed"), Some("3"));
    }
}
