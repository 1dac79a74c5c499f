//! Running independent chains, checkpointing them, and turning their tallies
//! into comparison curves.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::lattice::{Domain, Walk};
use crate::observables::{Censor, ObservableKind, ObservableSpec, Observer};
use crate::pivot::{apply_moves, unfold, Chain, ChainConfig, RngState};
use crate::stats::{CdfAccumulator, ComparisonCurve, Target};

const CHECKPOINT_MAGIC: &str = "saw-sle checkpoint 1";

/// Controls beyond the configuration itself.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimulateOptions {
    /// Continue chains from their checkpoints when present.
    pub resume: bool,
    /// Stop every chain after this many iterations (burn-in included),
    /// leaving a checkpoint, as if the run had been interrupted.
    pub stop_after: Option<u64>,
}

/// Everything a chain needs to continue where it stopped.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct Tallies {
    accumulators: Vec<CdfAccumulator>,
    closure_flips: Vec<u64>,
}

struct ChainRun {
    index: usize,
    seed: u64,
    chain: Chain,
    /// Iterations done, burn-in included.
    done: u64,
    observers: Vec<Observer>,
    tallies: Tallies,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSummary {
    pub seed: u64,
    pub iterations: u64,
    pub accepted: u64,
    pub finished: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSummary {
    pub id: String,
    pub samples: u64,
    pub never_reached: u64,
    pub ends_inside: u64,
    /// `max |empirical - target|`, absent without enough samples.
    pub ks: Option<f64>,
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub config: RunConfig,
    pub chains: Vec<ChainSummary>,
    pub observables: Vec<ObservableSummary>,
    pub warnings: Vec<String>,
    /// Tallies of each chain, in configuration order of the observables.
    pub per_chain: Vec<Vec<CdfAccumulator>>,
    pub wall_seconds: f64,
    pub complete: bool,
}

impl RunReport {
    pub fn acceptance_rate(&self) -> f64 {
        let iterations: u64 = self.chains.iter().map(|c| c.iterations).sum();
        let accepted: u64 = self.chains.iter().map(|c| c.accepted).sum();
        if iterations == 0 {
            0.0
        } else {
            accepted as f64 / iterations as f64
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let status = if self.complete { "complete" } else { "interrupted" };
        let _ = writeln!(out, "status: {status}");
        let _ = writeln!(out, "wall_seconds: {:.3}", self.wall_seconds);
        let _ = writeln!(out, "acceptance_rate: {:.6}", self.acceptance_rate());
        for c in &self.chains {
            let rate = if c.iterations == 0 { 0.0 } else { c.accepted as f64 / c.iterations as f64 };
            let _ = writeln!(
                out,
                "chain seed={} iterations={} accepted={} rate={rate:.6} finished={}",
                c.seed, c.iterations, c.accepted, c.finished
            );
        }
        for o in &self.observables {
            let ks = o.ks.map_or("n/a".to_string(), |k| format!("{k:.6}"));
            let _ = writeln!(
                out,
                "observable {} samples={} censored_never_reached={} censored_ends_inside={} ks={ks}",
                o.id, o.samples, o.never_reached, o.ends_inside
            );
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        let _ = writeln!(out, "# effective configuration");
        let mut effective = self.config.clone();
        effective.burn_in = Some(self.config.burn_in());
        out.push_str(&effective.to_toml());
        out
    }
}

pub fn checkpoint_path(config: &RunConfig, chain: usize) -> PathBuf {
    config.output.join("checkpoints").join(format!("chain-{chain}.ckpt"))
}

/// Writes `contents` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(Error::at(dir))?;
    }
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(Error::at(&tmp))?;
        f.write_all(contents).map_err(Error::at(&tmp))?;
        f.sync_all().map_err(Error::at(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(Error::at(path))
}

impl ChainRun {
    fn fresh(config: &RunConfig, specs: &[ObservableSpec], index: usize) -> Result<ChainRun> {
        let seed = config.seeds[index];
        let chain = Chain::new(chain_config(config, seed))?;
        let tallies = Tallies {
            accumulators: specs
                .iter()
                .map(|s| CdfAccumulator::for_spec(s, config.observations_per_chain(), config.batches))
                .collect::<Result<_>>()?,
            closure_flips: vec![0; specs.len()],
        };
        ChainRun::assemble(config, specs, index, chain, 0, tallies)
    }

    fn assemble(
        config: &RunConfig,
        specs: &[ObservableSpec],
        index: usize,
        chain: Chain,
        done: u64,
        tallies: Tallies,
    ) -> Result<ChainRun> {
        let observers = specs
            .iter()
            .map(|s| Observer::new(s.clone(), config.n))
            .collect::<Result<_>>()?;
        Ok(ChainRun {
            index,
            seed: config.seeds[index],
            chain,
            done,
            observers,
            tallies,
        })
    }

    fn save(&self, config: &RunConfig) -> Result<()> {
        let mut tallies = self.tallies.clone();
        for (total, obs) in tallies.closure_flips.iter_mut().zip(&self.observers) {
            *total += obs.closure_flips();
        }
        let rng = self.chain.rng_state();
        let mut text = String::new();
        let _ = writeln!(text, "{CHECKPOINT_MAGIC}");
        let _ = writeln!(text, "fingerprint {}", config.fingerprint());
        let _ = writeln!(text, "chain {}", self.index);
        let _ = writeln!(text, "seed {}", self.seed);
        let _ = writeln!(text, "domain {}", self.chain.domain());
        let _ = writeln!(text, "n {}", self.chain.len());
        let _ = writeln!(text, "done {}", self.done);
        let _ = writeln!(text, "iterations {}", self.chain.iterations());
        let _ = writeln!(text, "accepted {}", self.chain.accepted());
        let _ = writeln!(text, "rng_word_pos {}", rng.word_pos);
        let _ = writeln!(text, "tallies {}", serde_json::to_string(&tallies).expect("tallies serialize"));
        let _ = writeln!(text, "walk");
        text.push_str(&self.chain.walk().to_text(self.chain.domain()));
        write_atomic(&checkpoint_path(config, self.index), text.as_bytes())
    }

    fn load(config: &RunConfig, specs: &[ObservableSpec], index: usize, path: &Path) -> Result<ChainRun> {
        let mismatch = |reason: String| Error::CheckpointMismatch {
            path: path.to_path_buf(),
            reason,
        };
        let file = fs::File::open(path).map_err(Error::at(path))?;
        let mut lines = BufReader::new(file).lines();
        let mut fields = std::collections::HashMap::new();
        let mut magic = false;
        for line in lines.by_ref() {
            let line = line.map_err(Error::at(path))?;
            if !magic {
                if line != CHECKPOINT_MAGIC {
                    return Err(mismatch("not a checkpoint file".into()));
                }
                magic = true;
                continue;
            }
            if line == "walk" {
                break;
            }
            let (k, v) = line
                .split_once(' ')
                .ok_or_else(|| mismatch(format!("malformed line {line:?}")))?;
            fields.insert(k.to_string(), v.to_string());
        }
        let get = |k: &str| fields.get(k).cloned().ok_or_else(|| mismatch(format!("missing {k}")));
        let num = |k: &str| -> Result<u128> { get(k)?.parse().map_err(|_| mismatch(format!("bad {k}"))) };
        if get("fingerprint")? != config.fingerprint() {
            return Err(mismatch("configuration differs from the one that wrote it".into()));
        }
        if num("chain")? != index as u128 || num("seed")? != config.seeds[index] as u128 {
            return Err(mismatch("chain index or seed differs".into()));
        }
        let rest: Vec<String> = lines.collect::<std::io::Result<_>>().map_err(Error::at(path))?;
        let (walk, domain) = Walk::read_text(rest.join("\n").as_bytes())?;
        if domain != config.domain || walk.len() != config.n {
            return Err(mismatch("walk does not match the configuration".into()));
        }
        let tallies: Tallies =
            serde_json::from_str(&get("tallies")?).map_err(|e| mismatch(format!("tallies: {e}")))?;
        if tallies.accumulators.len() != specs.len() || tallies.closure_flips.len() != specs.len() {
            return Err(mismatch("observable count differs".into()));
        }
        let rng = RngState {
            seed: config.seeds[index],
            word_pos: num("rng_word_pos")?,
        };
        let chain = Chain::restore(
            walk,
            chain_config(config, config.seeds[index]),
            rng,
            num("iterations")? as u64,
            num("accepted")? as u64,
        )?;
        ChainRun::assemble(config, specs, index, chain, num("done")? as u64, tallies)
    }

    /// Advances to `until` iterations in total. Returns false if stopped early.
    fn advance(&mut self, config: &RunConfig, until: u64) -> Result<()> {
        let burn_in = config.burn_in();
        while self.done < until {
            self.chain.step();
            self.done += 1;
            if self.done > burn_in && (self.done - burn_in) % config.stride == 0 {
                let changed = self.chain.take_changed_from();
                for (obs, acc) in self.observers.iter_mut().zip(&mut self.tallies.accumulators) {
                    let m = obs.update(&self.chain, changed);
                    acc.record(m)?;
                }
            }
            if config.checkpoint_interval > 0 && self.done % config.checkpoint_interval == 0 {
                self.save(config)?;
            }
        }
        Ok(())
    }

    fn closure_flips(&self) -> Vec<u64> {
        self.tallies
            .closure_flips
            .iter()
            .zip(&self.observers)
            .map(|(t, o)| t + o.closure_flips())
            .collect()
    }
}

fn chain_config(config: &RunConfig, seed: u64) -> ChainConfig {
    ChainConfig {
        n: config.n,
        domain: config.domain,
        profile: config.profile,
        flush_threshold: config.flush_threshold,
        seed,
    }
}

struct ChainResult {
    summary: ChainSummary,
    accumulators: Vec<CdfAccumulator>,
    closure_flips: Vec<u64>,
}

fn run_chain(config: &RunConfig, specs: &[ObservableSpec], index: usize, options: SimulateOptions) -> Result<ChainResult> {
    let path = checkpoint_path(config, index);
    let mut run = if options.resume && path.exists() {
        ChainRun::load(config, specs, index, &path)?
    } else {
        ChainRun::fresh(config, specs, index)?
    };
    let total = config.burn_in() + config.iterations;
    let until = options.stop_after.map_or(total, |s| s.min(total));
    run.advance(config, until)?;
    let finished = run.done >= total;
    if !finished || config.checkpoint_interval > 0 {
        run.save(config)?;
    }
    Ok(ChainResult {
        summary: ChainSummary {
            seed: run.seed,
            iterations: run.chain.iterations(),
            accepted: run.chain.accepted(),
            finished,
        },
        closure_flips: run.closure_flips(),
        accumulators: run.tallies.accumulators,
    })
}

/// Runs every chain of `config` and writes one CSV per observable into the
/// output directory, plus `report.txt`.
pub fn simulate(config: &RunConfig, options: SimulateOptions) -> Result<RunReport> {
    config.validate()?;
    let start = Instant::now();
    let specs = config.specs();
    fs::create_dir_all(&config.output).map_err(Error::at(&config.output))?;

    let results: Vec<ChainResult> = (0..config.seeds.len())
        .into_par_iter()
        .map(|k| run_chain(config, &specs, k, options))
        .collect::<Result<_>>()?;
    let chains: Vec<ChainSummary> = results.iter().map(|r| r.summary.clone()).collect();
    let complete = chains.iter().all(|c| c.finished);

    let mut report = RunReport {
        config: config.clone(),
        chains,
        observables: Vec::new(),
        warnings: Vec::new(),
        per_chain: results.iter().map(|r| r.accumulators.clone()).collect(),
        wall_seconds: 0.0,
        complete,
    };
    if config.iterations == 0 {
        report.warnings.push("zero iterations: curves have no samples".into());
    }

    for (k, spec) in specs.iter().enumerate() {
        let merged = results
            .iter()
            .map(|r| &r.accumulators[k])
            .try_fold(None::<CdfAccumulator>, |acc, a| -> Result<_> {
                Ok(Some(match acc {
                    None => a.clone(),
                    Some(m) => m.merge(a)?,
                }))
            })?
            .expect("at least one chain");
        let flips: u64 = results.iter().map(|r| r.closure_flips[k]).sum();
        let mut summary = ObservableSummary {
            id: spec.id(),
            samples: merged.samples(),
            never_reached: merged.censored_by(Censor::NeverReached),
            ends_inside: merged.censored_by(Censor::EndsInside),
            ks: None,
            csv: None,
        };
        if complete {
            let target = Target::for_spec(spec);
            let mut curve = match merged.finalize(&target) {
                Ok(curve) => {
                    summary.ks = Some(curve.ks());
                    curve
                }
                Err(Error::TooFewSamples { have, batches }) => {
                    report
                        .warnings
                        .push(format!("{}: {have} samples in {batches} batches, no estimate", spec.id()));
                    ComparisonCurve::empty(merged.grid().to_vec(), &target)?
                }
                Err(e) => return Err(e),
            };
            annotate(&mut curve, config, spec, &merged, &report, flips);
            let path = config.output.join(format!("{}.csv", spec.id()));
            write_atomic(&path, curve.to_csv().as_bytes())?;
            summary.csv = Some(path);
        }
        report.observables.push(summary);
    }

    report.wall_seconds = start.elapsed().as_secs_f64();
    write_atomic(&config.output.join("report.txt"), report.render().as_bytes())?;
    Ok(report)
}

fn annotate(
    curve: &mut ComparisonCurve,
    config: &RunConfig,
    spec: &ObservableSpec,
    acc: &CdfAccumulator,
    report: &RunReport,
    closure_flips: u64,
) {
    curve.set_meta("observable", spec.kind);
    curve.set_meta("domain", config.domain);
    curve.set_meta("n", config.n);
    curve.set_meta("l", spec.l);
    curve.set_meta("d", spec.d);
    curve.set_meta("scale_c", spec.scale(config.n));
    curve.set_meta("iterations", config.iterations * config.seeds.len() as u64);
    curve.set_meta("burn_in", config.burn_in());
    curve.set_meta("stride", config.stride);
    curve.set_meta("acceptance_rate", report.acceptance_rate());
    curve.set_meta("samples", acc.samples());
    curve.set_meta("censored", acc.censored());
    curve.set_meta("censored_never_reached", acc.censored_by(Censor::NeverReached));
    curve.set_meta("censored_ends_inside", acc.censored_by(Censor::EndsInside));
    if spec.kind == ObservableKind::PassRight {
        curve.set_meta("closure_flips", closure_flips);
    }
    let seeds: Vec<String> = config.seeds.iter().map(|s| s.to_string()).collect();
    curve.set_meta("seed", seeds.join(" "));
    curve.set_meta("profile", format!("{:?}", config.profile).to_lowercase());
    curve.set_meta(
        "error_method",
        format!("batch means over {} batches of {} observations", acc.batch_count(), acc.batch_len()),
    );
}

/// Reads a comparison CSV and recomputes its target column from the
/// observable named in its metadata.
pub fn compare(path: &Path) -> Result<ComparisonCurve> {
    let file = fs::File::open(path).map_err(Error::at(path))?;
    let mut curve = ComparisonCurve::read_csv(BufReader::new(file))?;
    let kind: ObservableKind = curve
        .meta("observable")
        .ok_or_else(|| Error::Parse(format!("{}: no observable in metadata", path.display())))?
        .parse()?;
    let domain: Domain = curve.meta("domain").unwrap_or("half-plane").parse()?;
    let num = |k: &str, default: f64| -> Result<f64> {
        curve
            .meta(k)
            .map_or(Ok(default), |v| v.parse().map_err(|_| Error::Parse(format!("bad {k} {v:?}"))))
    };
    let spec = ObservableSpec::new(kind, domain, num("l", 1.0)?).with_d(num("d", 0.0)?);
    curve.retarget(&Target::for_spec(&spec))?;
    Ok(curve)
}

/// Largest walk length `unfold_check` enumerates.
pub const UNFOLD_CHECK_LIMIT: usize = 14;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnfoldLength {
    pub length: usize,
    pub walks: usize,
    pub max_moves: usize,
    pub total_moves: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnfoldReport {
    pub domain: Domain,
    pub lengths: Vec<UnfoldLength>,
    /// Walks whose unfolding failed or left the domain, with the reason.
    pub violations: Vec<String>,
}

impl UnfoldReport {
    pub fn render(&self) -> String {
        let mut out = format!("domain: {}\n", self.domain);
        for l in &self.lengths {
            let _ = writeln!(
                out,
                "length {:>2}: {:>8} walks, max moves {:>3}, total moves {}",
                l.length, l.walks, l.max_moves, l.total_moves
            );
        }
        let _ = writeln!(out, "violations: {}", self.violations.len());
        for v in self.violations.iter().take(20) {
            let _ = writeln!(out, "  {v}");
        }
        out
    }
}

/// Unfolds every walk of length `1..=max_length` in `domain` and checks each
/// intermediate walk and the final straight walk.
pub fn unfold_check(max_length: usize, domain: Domain) -> Result<UnfoldReport> {
    if max_length > UNFOLD_CHECK_LIMIT {
        return Err(Error::EnumerationTooLarge(max_length, UNFOLD_CHECK_LIMIT));
    }
    let mut report = UnfoldReport {
        domain,
        lengths: Vec::new(),
        violations: Vec::new(),
    };
    for length in 1..=max_length {
        let mut row = UnfoldLength {
            length,
            walks: 0,
            max_moves: 0,
            total_moves: 0,
        };
        crate::lattice::for_each_walk(length, domain, |sites| {
            row.walks += 1;
            let walk = Walk::from_sites_unchecked(sites.to_vec());
            let outcome = unfold(&walk, domain).and_then(|moves| {
                let props: Vec<_> = moves.iter().map(|m| m.0).collect();
                let end = apply_moves(&walk, domain, &props)?;
                if !end.is_straight_up() {
                    return Err(Error::InvalidWalk("did not end straight".into()));
                }
                Ok(props.len())
            });
            match outcome {
                Ok(m) => {
                    row.max_moves = row.max_moves.max(m);
                    row.total_moves += m;
                }
                Err(e) => report.violations.push(format!("{:?}: {e}", walk.sites())),
            }
        });
        report.lengths.push(row);
    }
    Ok(report)
}
