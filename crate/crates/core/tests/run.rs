use std::fs;
use std::path::Path;

use saw_sle::run::{compare, simulate, unfold_check, SimulateOptions};
use saw_sle::{Domain, Error, ObservableKind, RunConfig};

fn config(dir: &Path, domain: Domain) -> RunConfig {
    let mut c = RunConfig::new(domain, 600, 6000, vec![3, 4])
        .with_observable(ObservableKind::ThetaE, vec![0.1], vec![])
        .with_observable(ObservableKind::Xf, vec![0.1], vec![])
        .with_observable(ObservableKind::PassRight, vec![0.1], vec![]);
    if domain == Domain::HalfPlane {
        c = c.with_observable(ObservableKind::Ye, vec![0.05], vec![]);
    }
    c.batches = 20;
    c.checkpoint_interval = 1000;
    c.output = dir.to_path_buf();
    c
}

fn csvs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn reruns_and_resumed_runs_are_bit_identical() {
    for domain in [Domain::HalfPlane, Domain::CutPlane] {
        let tmp = tempfile::tempdir().unwrap();
        let a = config(&tmp.path().join("a"), domain);
        let b = config(&tmp.path().join("b"), domain);
        let mut r = config(&tmp.path().join("r"), domain);
        r.checkpoint_interval = 700;

        let report = simulate(&a, SimulateOptions::default()).unwrap();
        assert!(report.complete);
        simulate(&b, SimulateOptions::default()).unwrap();
        let stopped = simulate(
            &r,
            SimulateOptions {
                resume: false,
                stop_after: Some(2345),
            },
        )
        .unwrap();
        assert!(!stopped.complete);
        assert!(csvs(&r.output).is_empty());
        simulate(&r, SimulateOptions { resume: true, stop_after: None }).unwrap();

        let first = csvs(&a.output);
        assert_eq!(first.len(), a.specs().len());
        assert_eq!(first, csvs(&b.output));
        assert_eq!(first, csvs(&r.output));
    }
}

#[test]
fn report_lists_rates_censoring_and_configuration() {
    let tmp = tempfile::tempdir().unwrap();
    let c = config(tmp.path(), Domain::HalfPlane);
    let report = simulate(&c, SimulateOptions::default()).unwrap();
    let rate = report.acceptance_rate();
    assert!(rate > 0.05 && rate < 0.6, "{rate}");
    let text = fs::read_to_string(tmp.path().join("report.txt")).unwrap();
    for needle in ["acceptance_rate", "wall_seconds", "censored_never_reached", "burn_in = 600", "flush_threshold = 32"] {
        assert!(text.contains(needle), "missing {needle}");
    }
    let csv = fs::read_to_string(tmp.path().join("half-plane_theta-e_l0.1_d0.csv")).unwrap();
    assert!(csv.contains("# error_method: batch means"));
    assert!(!csv.contains("wall"));
    let o = &report.observables[0];
    assert_eq!(o.samples + o.never_reached + o.ends_inside, 12000);
}

#[test]
fn zero_iterations_give_empty_curves_and_a_warning() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = config(tmp.path(), Domain::HalfPlane);
    c.iterations = 0;
    let report = simulate(&c, SimulateOptions::default()).unwrap();
    assert!(!report.warnings.is_empty());
    let csv = fs::read_to_string(tmp.path().join("half-plane_ye_l0.05.csv")).unwrap();
    let row = csv.lines().find(|l| !l.starts_with('#') && !l.starts_with('t')).unwrap();
    assert!(row.ends_with(",NaN,0,NaN,NaN"), "{row}");
}

#[test]
fn checkpoints_from_another_configuration_are_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let c = config(tmp.path(), Domain::HalfPlane);
    simulate(
        &c,
        SimulateOptions {
            resume: false,
            stop_after: Some(1500),
        },
    )
    .unwrap();
    let mut other = c.clone();
    other.n = 601;
    let err = simulate(&other, SimulateOptions { resume: true, stop_after: None }).unwrap_err();
    assert!(matches!(err, Error::CheckpointMismatch { .. }), "{err}");
    assert!(err.is_config_error());
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let c = config(&blocker.join("out"), Domain::HalfPlane);
    let err = simulate(&c, SimulateOptions::default()).unwrap_err();
    assert!(!err.is_config_error(), "{err}");
}

#[test]
fn compare_recomputes_the_target_column() {
    let tmp = tempfile::tempdir().unwrap();
    let c = config(tmp.path(), Domain::HalfPlane);
    simulate(&c, SimulateOptions::default()).unwrap();
    let path = tmp.path().join("half-plane_theta-e_l0.1_d0.csv");
    let original = fs::read_to_string(&path).unwrap();
    // wipe the exact column and let compare restore it
    let damaged: String = original
        .lines()
        .map(|l| {
            if l.starts_with('#') || l.starts_with('t') {
                l.to_string()
            } else {
                let f: Vec<&str> = l.split(',').collect();
                format!("{},{},0,0,{}", f[0], f[1], f[4])
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    fs::write(&path, damaged).unwrap();
    let curve = compare(&path).unwrap();
    assert_eq!(curve.to_csv(), original);
}

#[test]
fn unfold_check_counts_and_guards() {
    let half = unfold_check(1, Domain::HalfPlane).unwrap();
    assert_eq!((half.lengths[0].walks, half.lengths[0].max_moves), (1, 0));
    let cut = unfold_check(1, Domain::CutPlane).unwrap();
    assert_eq!(cut.lengths[0].walks, 3);
    assert!(cut.violations.is_empty());
    let eight = unfold_check(8, Domain::CutPlane).unwrap();
    assert!(eight.violations.is_empty());
    assert!(matches!(unfold_check(40, Domain::HalfPlane), Err(Error::EnumerationTooLarge(..))));
}

#[test]
fn configuration_files_load_and_validate() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("run.toml");
    fs::write(
        &path,
        "domain = \"cut-plane\"\nn = 1000\niterations = 10\nseeds = [1]\n\n[[observable]]\nkind = \"xe\"\nl = [0.02]\n",
    )
    .unwrap();
    let c = RunConfig::load(&path).unwrap();
    assert_eq!(c.domain, Domain::CutPlane);
    fs::write(&path, "domain = \"cut-plane\"\nn = 1000\n").unwrap();
    assert!(RunConfig::load(&path).unwrap_err().is_config_error());
    assert!(RunConfig::load(&tmp.path().join("missing.toml")).unwrap_err().is_config_error());
}
