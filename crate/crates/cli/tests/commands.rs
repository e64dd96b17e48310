use std::path::Path;
use std::process::{Command, Output};

use xebsim::campaign::run_campaign;
use xebsim::store::{CellRecord, Estimator, RESULTS_FILE};
use xebsim::CampaignConfig;
use xebsim_collapse::{synthetic_sweep, SyntheticSpec};
use xebsim_core::Connectivity;

fn xebsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xebsim")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn records(dir: &Path) -> Vec<CellRecord> {
    std::fs::read_to_string(dir.join(RESULTS_FILE))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn small_config() -> CampaignConfig {
    let mut c = CampaignConfig::new(Connectivity::Chain1D, vec![4, 6], vec![0.1, 0.3]);
    c.n_circuits = 6;
    c.n_shots = 20;
    c.q = 0.02;
    c
}

#[test]
fn identical_states_give_unit_cross_entropy() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = xebsim(&[
        "run", "--connectivity", "1d", "--L", "4", "--p", "0.0", "--rho", "all_zero", "--sigma", "all_zero",
        "--n-circuits", "3", "--n-shots", "10", "--output", out,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = records(dir.path());
    assert_eq!(r.len(), 1);
    assert_eq!(r[0].chi_bar, 1.0);
}

#[test]
fn rho_equals_sigma_exact_has_no_spread() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = CampaignConfig::new(Connectivity::AllToAll, vec![8], vec![0.2]);
    c.n_circuits = 7;
    c.rho = xebsim::StateKind::MaximallyMixed;
    c.sigma = xebsim::StateKind::MaximallyMixed;
    let store = run_campaign(&c, Estimator::Exact, dir.path()).unwrap();
    let r = &store.records()[0];
    assert_eq!((r.chi_bar, r.eps), (1.0, 0.0));
}

#[test]
fn rerun_is_idempotent_and_worker_count_does_not_matter() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut c = small_config();
    c.worker_count = Some(1);
    run_campaign(&c, Estimator::Sampled, a.path()).unwrap();
    let first = std::fs::read(a.path().join(RESULTS_FILE)).unwrap();
    run_campaign(&c, Estimator::Sampled, a.path()).unwrap();
    assert_eq!(std::fs::read(a.path().join(RESULTS_FILE)).unwrap(), first);
    c.worker_count = Some(3);
    run_campaign(&c, Estimator::Sampled, b.path()).unwrap();
    assert_eq!(std::fs::read(b.path().join(RESULTS_FILE)).unwrap(), first);
}

#[test]
fn resume_after_a_torn_write_matches_an_uninterrupted_run() {
    let full = tempfile::tempdir().unwrap();
    let c = small_config();
    run_campaign(&c, Estimator::Exact, full.path()).unwrap();
    let expected = std::fs::read_to_string(full.path().join(RESULTS_FILE)).unwrap();

    // keep one complete line and half of the next, as if killed mid-write
    let cut = tempfile::tempdir().unwrap();
    let lines: Vec<&str> = expected.lines().collect();
    let torn = format!("{}\n{}", lines[0], &lines[1][..lines[1].len() / 2]);
    std::fs::write(cut.path().join(RESULTS_FILE), torn).unwrap();
    let store = run_campaign(&c, Estimator::Exact, cut.path()).unwrap();
    assert_eq!(std::fs::read_to_string(cut.path().join(RESULTS_FILE)).unwrap(), expected);
    assert!(store.manifest().completed.values().all(|&d| d));
}

#[test]
fn changed_config_is_refused_with_config_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let base = ["exact", "--connectivity", "1d", "--L", "4", "--p", "0.2", "--n-circuits", "2", "--output", out];
    assert!(xebsim(&base).status.success());
    let mut changed = base.to_vec();
    changed.extend(["--seed", "9"]);
    assert_eq!(xebsim(&changed).status.code(), Some(2));
    assert_eq!(xebsim(&["run", "--connectivity", "1d", "--L", "5", "--p", "0.2"]).status.code(), Some(2));
}

#[test]
fn sampled_estimator_agrees_with_exact_on_shared_circuits() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut c = CampaignConfig::new(Connectivity::Chain1D, vec![16], vec![0.16]);
    c.n_circuits = 300;
    c.n_shots = 300;
    let sampled = run_campaign(&c, Estimator::Sampled, a.path()).unwrap().records()[0].clone();
    let exact = run_campaign(&c, Estimator::Exact, b.path()).unwrap().records()[0].clone();
    assert!(
        (sampled.chi_bar - exact.chi_bar).abs() <= 3.0 * sampled.eps,
        "{} vs {} (eps {})",
        sampled.chi_bar,
        exact.chi_bar,
        sampled.eps
    );
}

#[test]
fn fit_command_recovers_synthetic_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    synthetic_sweep(&SyntheticSpec::default(), 11).unwrap().write_csv(std::fs::File::create(&csv).unwrap()).unwrap();
    let out = dir.path().join("fit");
    let o = xebsim(&[
        "fit", "--input", csv.to_str().unwrap(), "--p-c-bounds", "0.12,0.2", "--nu-bounds", "0.8,2.0", "--output",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["nu"].as_f64().unwrap() - 1.3).abs() < 0.1);
    assert!((v["p_c"].as_f64().unwrap() - 0.16).abs() < 0.01);
    assert!(out.join("rescaled.csv").exists() && out.join("cost_surface.csv").exists());
    let bad = xebsim(&["fit", "--input", csv.to_str().unwrap(), "--p-c-bounds", "0.0,0.5", "--nu-bounds", "0.8,2.0", "--output", out.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn verify_exit_codes() {
    let ok = xebsim(&["verify", "compression", "--budget", "20"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));
    let corrupted = xebsim(&["verify", "compression", "--budget", "20", "--corrupt-sign-map"]);
    assert_eq!(corrupted.status.code(), Some(1));
    let ineq = xebsim(&["verify", "inequality", "--budget", "200", "--L", "10", "--q", "0.005"]);
    assert_eq!(ineq.status.code(), Some(0));
    let oracle = xebsim(&["verify", "oracle", "--budget", "30"]);
    assert_eq!(oracle.status.code(), Some(0));
}

#[test]
fn circuit_compress_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("c.txt");
    let cc = dir.path().join("cc.txt");
    assert!(xebsim(&["circuit", "--L", "8", "--p", "0.2", "--seed", "4", "--output", c.to_str().unwrap()]).status.success());
    assert!(xebsim(&["compress", "--input", c.to_str().unwrap(), "--output", cc.to_str().unwrap()]).status.success());
    let parsed = xebsim_core::compression::CompressedCircuit::from_text(&std::fs::read_to_string(&cc).unwrap()).unwrap();
    assert_eq!(parsed.k, 4);
    let r = xebsim(&["report", "--circuit", c.to_str().unwrap(), "--json"]);
    assert!(r.status.success());
    let v: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(v["bound_violations"], 0);
    let noisy = dir.path().join("n.txt");
    assert!(xebsim(&["circuit", "--L", "8", "--p", "0.2", "--q", "0.05", "--output", noisy.to_str().unwrap()]).status.success());
    assert_eq!(xebsim(&["compress", "--input", noisy.to_str().unwrap()]).status.code(), Some(2));
}
