//! Pivot-algorithm Monte Carlo for self-avoiding walks in the half-plane and
//! the cut-plane, hitting-point observables measured on the walks, and the
//! exact SLE(8/3) laws they are compared against.

pub mod config;
pub mod error;
pub mod lattice;
pub mod observables;
pub mod pivot;
pub mod run;
pub mod sle;
pub mod stats;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use lattice::{Domain, Point, Sites, Symmetry, Walk};
pub use observables::{Measurement, ObservableKind, ObservableSpec, Observer};
pub use pivot::{Chain, ChainConfig, PivotProposal, SiteProfile};
pub use stats::{CdfAccumulator, ComparisonCurve, Target};
pub use run::{simulate, RunReport, SimulateOptions};
