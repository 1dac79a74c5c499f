//! Run configuration: a TOML file plus `key=value` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lattice::Domain;
use crate::observables::{ObservableKind, ObservableSpec};
use crate::pivot::{SiteProfile, DEFAULT_FLUSH_THRESHOLD};
use crate::stats::{pass_right_grid, DEFAULT_BATCHES};

/// At most this many `l` values per observable kind.
pub const MAX_SCALES_PER_KIND: usize = 4;

/// One `[[observable]]` table: a kind and the parameter values to run it at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableGroup {
    pub kind: ObservableKind,
    pub l: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub d: Vec<f64>,
    /// Pass-right angle fractions; defaults to `0.01, ..., 0.99`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angles: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: Domain,
    pub n: usize,
    /// Measured iterations per chain, after burn-in.
    pub iterations: u64,
    /// Unmeasured iterations per chain before the first measurement;
    /// defaults to a tenth of `iterations`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<u64>,
    /// One chain per seed.
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub profile: SiteProfile,
    #[serde(default = "default_flush_threshold")]
    pub flush_threshold: usize,
    /// Measure every `stride`-th iteration.
    #[serde(default = "default_stride")]
    pub stride: u64,
    /// Iterations between checkpoints; 0 disables them.
    #[serde(default)]
    pub checkpoint_interval: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Batches per chain for error bars.
    #[serde(default = "default_batches")]
    pub batches: usize,
    #[serde(rename = "observable", default)]
    pub observables: Vec<ObservableGroup>,
}

fn default_flush_threshold() -> usize {
    DEFAULT_FLUSH_THRESHOLD
}

fn default_stride() -> u64 {
    1
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_batches() -> usize {
    DEFAULT_BATCHES
}

impl RunConfig {
    /// A configuration with defaults and no observables.
    pub fn new(domain: Domain, n: usize, iterations: u64, seeds: Vec<u64>) -> Self {
        RunConfig {
            domain,
            n,
            iterations,
            burn_in: None,
            seeds,
            profile: SiteProfile::default(),
            flush_threshold: DEFAULT_FLUSH_THRESHOLD,
            stride: 1,
            checkpoint_interval: 0,
            output: default_output(),
            batches: DEFAULT_BATCHES,
            observables: Vec::new(),
        }
    }

    pub fn with_observable(mut self, kind: ObservableKind, l: Vec<f64>, d: Vec<f64>) -> Self {
        self.observables.push(ObservableGroup { kind, l, d, angles: None });
        self
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        RunConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration serializes")
    }

    /// Applies `key=value` overrides to top-level keys. Values are read as
    /// TOML, falling back to a bare string.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(&self.to_toml()).expect("round trip of own output");
        for item in overrides {
            let item = item.as_ref();
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {item:?} is not key=value")))?;
            let key = key.trim();
            let value = value.trim();
            let parsed: toml::Value = toml::from_str::<toml::Table>(&format!("v = {value}"))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(value.to_string()));
            table.insert(key.to_string(), parsed);
        }
        let text = toml::to_string(&table).map_err(|e| Error::Config(e.to_string()))?;
        RunConfig::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!("n must be at least 2, got {}", self.n)));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        if seeds.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        if self.stride == 0 {
            return Err(Error::Config("stride must be positive".into()));
        }
        if self.flush_threshold == 0 {
            return Err(Error::Config("flush_threshold must be positive".into()));
        }
        if self.batches < 2 {
            return Err(Error::Config("batches must be at least 2".into()));
        }
        if self.observables.is_empty() {
            return Err(Error::Config("at least one [[observable]] is required".into()));
        }
        for kind in ObservableKind::ALL {
            let scales: usize = self.observables.iter().filter(|g| g.kind == kind).map(|g| g.l.len()).sum();
            if scales > MAX_SCALES_PER_KIND {
                return Err(Error::Config(format!(
                    "{kind}: {scales} values of l, at most {MAX_SCALES_PER_KIND} allowed"
                )));
            }
        }
        if self.observables.iter().any(|g| g.l.is_empty()) {
            return Err(Error::Config("every observable needs at least one l".into()));
        }
        let specs = self.specs();
        for s in &specs {
            s.validate()?;
        }
        let mut ids: Vec<String> = specs.iter().map(|s| s.id()).collect();
        ids.sort();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("an observable is listed twice".into()));
        }
        Ok(())
    }

    pub fn burn_in(&self) -> u64 {
        self.burn_in.unwrap_or(self.iterations / 10)
    }

    /// Observations each chain makes.
    pub fn observations_per_chain(&self) -> u64 {
        self.iterations / self.stride
    }

    /// Every (kind, l, d) combination, in configuration order.
    pub fn specs(&self) -> Vec<ObservableSpec> {
        let mut out = Vec::new();
        for g in &self.observables {
            let ds = if g.d.is_empty() { vec![0.0] } else { g.d.clone() };
            for &l in &g.l {
                for &d in &ds {
                    let mut spec = ObservableSpec::new(g.kind, self.domain, l).with_d(d);
                    if g.kind == ObservableKind::PassRight {
                        spec.angles = g.angles.clone().unwrap_or_else(pass_right_grid);
                    }
                    out.push(spec);
                }
            }
        }
        out
    }

    /// Digest of everything that affects the results. Output location and
    /// checkpoint spacing are excluded.
    pub fn fingerprint(&self) -> String {
        let mut canonical = self.clone();
        canonical.output = PathBuf::new();
        canonical.checkpoint_interval = 0;
        canonical.burn_in = Some(self.burn_in());
        let digest = Sha256::digest(canonical.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
domain = "half-plane"
n = 1000
iterations = 5000
seeds = [1, 2]

[[observable]]
kind = "theta-e"
l = [0.05, 0.1]
d = [0.0, 0.5]

[[observable]]
kind = "pass-right"
l = [0.1]
"#;

    #[test]
    fn parse_and_expand() {
        let c = RunConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(c.burn_in(), 500);
        assert_eq!(c.flush_threshold, DEFAULT_FLUSH_THRESHOLD);
        let specs = c.specs();
        assert_eq!(specs.len(), 5);
        assert_eq!(specs[4].angles.len(), 99);
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn overrides() {
        let c = RunConfig::from_toml(SAMPLE).unwrap();
        let o = c.with_overrides(&["n=2000", "domain=cut-plane", "output=/tmp/x"]).unwrap_err();
        // cut-plane theta with d = 0.5 is rejected
        assert!(o.is_config_error());
        let o = c.with_overrides(&["n=2000", "burn_in = 7", "output=/tmp/x"]).unwrap();
        assert_eq!((o.n, o.burn_in(), o.output.as_path()), (2000, 7, Path::new("/tmp/x")));
        assert_ne!(o.fingerprint(), c.fingerprint());
        let moved = c.with_overrides(&["output=elsewhere", "checkpoint_interval=10"]).unwrap();
        assert_eq!(moved.fingerprint(), c.fingerprint());
    }

    #[test]
    fn rejects_bad_configs() {
        let c = RunConfig::from_toml(SAMPLE).unwrap();
        for bad in [&["n=1"][..], &["seeds=[3, 3]"], &["stride=0"], &["seeds=[]"], &["bogus=1"]] {
            assert!(c.with_overrides(bad).unwrap_err().is_config_error(), "{bad:?}");
        }
        let five = c
            .clone()
            .with_observable(ObservableKind::ThetaE, vec![0.2, 0.3, 0.4], vec![]);
        assert!(five.validate().is_err());
    }
}
