use std::fs;
use std::path::Path;
use std::process::Command;

use infdist::pipeline::{parse_ev_csv, ExperimentConfig, FitDocument, ResultStore, Stage};

fn config(json: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(json).unwrap()
}

fn run(dir: &Path, cfg: ExperimentConfig) -> ResultStore {
    let store = ResultStore::create(dir, cfg).unwrap();
    store.run_through(Stage::Report).unwrap();
    store
}

const DESK: &str = r#"{"distances":[3,5,7],"p_values":[0.003],"shots_per_point":100000,"input_state":"0",
    "observable":"Z","method":"direct","cutoff_d":7,"seed":1,"bootstrap_trials":100}"#;

#[test]
fn desk_run_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let store = run(dir.path(), config(DESK));
    let csv = fs::read_to_string(dir.path().join("ev.csv")).unwrap();
    assert!(csv.starts_with(&format!("# config_hash={}", store.config_hash)));
    let rows = parse_ev_csv(&csv).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.value > 0.85 && r.value < 1.0));
    let fit: FitDocument = serde_json::from_str(&fs::read_to_string(dir.path().join("fit.json")).unwrap()).unwrap();
    let a = fit.series[0].fit.as_ref().unwrap().a;
    assert!(a > 0.97, "A = {a}");
    let report = fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(report.contains("resource savings"));
    assert!(dir.path().join("plot_p0.003_Z+.csv").exists());
    assert!(dir.path().join("curve_p0.003_Z+.csv").exists());
}

#[test]
fn noiseless_run_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        r#"{"distances":[3,5,7],"p_values":[0.0],"shots_per_point":2000,"input_state":"T","observable":"X",
        "method":"decomposition","cutoff_d":7,"seed":4,"bootstrap_trials":20}"#,
    );
    run(dir.path(), cfg);
    let rows = parse_ev_csv(&fs::read_to_string(dir.path().join("ev.csv")).unwrap()).unwrap();
    // six components per distance plus the combined row
    assert_eq!(rows.len(), 3 * 7);
    for r in rows.iter().filter(|r| r.method == "direct") {
        let want = match r.state.as_str() {
            "X+" => 1.0,
            "X-" => -1.0,
            _ => 0.0,
        };
        if want != 0.0 {
            assert_eq!(r.value, want, "{r:?}");
        } else {
            assert!(r.value.abs() < 0.1, "{r:?}");
        }
    }
    let fit: FitDocument = serde_json::from_str(&fs::read_to_string(dir.path().join("fit.json")).unwrap()).unwrap();
    let s = &fit.series[0];
    assert_eq!(s.state, "T");
    assert!((s.true_ev - 0.5f64.sqrt()).abs() < 1e-12);
}

#[test]
fn stabiliser_run_at_zero_noise_is_flagged_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        r#"{"distances":[3,5,7],"p_values":[0.0],"shots_per_point":500,"input_state":"-","observable":"X",
        "method":"direct","cutoff_d":7,"seed":4,"bootstrap_trials":20}"#,
    );
    run(dir.path(), cfg);
    let rows = parse_ev_csv(&fs::read_to_string(dir.path().join("ev.csv")).unwrap()).unwrap();
    assert!(rows.iter().all(|r| r.value == -1.0));
    let fit: FitDocument = serde_json::from_str(&fs::read_to_string(dir.path().join("fit.json")).unwrap()).unwrap();
    assert!(fit.series[0].degenerate);
    assert!(fs::read_to_string(dir.path().join("report.txt")).unwrap().contains("degenerate"));
}

#[test]
fn workers_do_not_change_results() {
    let mut outputs = Vec::new();
    for workers in [1, 3] {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config(DESK);
        cfg.shots_per_point = infdist::pipeline::ShotSchedule::PerDistance(vec![20_000, 10_000, 5_000]);
        cfg.workers = workers;
        run(dir.path(), cfg);
        outputs.push((
            fs::read(dir.path().join("ev.csv")).unwrap(),
            fs::read(dir.path().join("fit.json")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn rerun_after_deleting_fit_reuses_shots() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(DESK);
    cfg.shots_per_point = infdist::pipeline::ShotSchedule::Uniform(5_000);
    run(dir.path(), cfg.clone());
    let shot_file = dir.path().join("shots/d5_p0.003_Z+_Z.bin");
    let decode_file = dir.path().join("decode/d5_p0.003_Z+_Z.json");
    let stamp = |p: &Path| fs::metadata(p).unwrap().modified().unwrap();
    let (shots_before, decode_before) = (stamp(&shot_file), stamp(&decode_file));
    let fit_before = fs::read(dir.path().join("fit.json")).unwrap();
    fs::remove_file(dir.path().join("fit.json")).unwrap();
    std::thread::sleep(std::time::Duration::from_millis(20));
    run(dir.path(), cfg);
    assert_eq!(stamp(&shot_file), shots_before);
    assert_eq!(stamp(&decode_file), decode_before);
    assert_eq!(fs::read(dir.path().join("fit.json")).unwrap(), fit_before);
}

#[test]
fn invalid_configs_are_rejected() {
    for bad in [
        r#"{"distances":[5,3],"p_values":[0.001],"shots_per_point":10,"input_state":"0","observable":"Z","method":"direct","cutoff_d":5,"seed":0}"#,
        r#"{"distances":[3,5],"p_values":[0.001],"shots_per_point":10,"input_state":"0","observable":"Z","method":"direct","cutoff_d":7,"seed":0}"#,
        r#"{"distances":[3,5],"p_values":[0.001],"shots_per_point":0,"input_state":"0","observable":"Z","method":"direct","cutoff_d":5,"seed":0}"#,
        r#"{"distances":[3,5],"p_values":[0.001],"shots_per_point":10,"input_state":"T","observable":"X","method":"direct","cutoff_d":5,"seed":0}"#,
        r#"{"distances":[3,5],"p_values":[0.7],"shots_per_point":10,"input_state":"0","observable":"Z","method":"direct","cutoff_d":5,"seed":0}"#,
    ] {
        assert!(matches!(ExperimentConfig::from_json(bad), Err(infdist::Error::Config(_))), "{bad}");
    }
}

#[test]
fn config_hash_ignores_workers() {
    let a = config(DESK);
    let mut b = a.clone();
    b.workers = 7;
    assert_eq!(a.hash(), b.hash());
    b.seed = 2;
    assert_ne!(a.hash(), b.hash());
}

#[test]
fn empty_store_reports_no_results() {
    let dir = tempfile::tempdir().unwrap();
    let store = ResultStore::create(dir.path(), config(DESK)).unwrap();
    store.run_stage(Stage::Report).unwrap();
    assert!(fs::read_to_string(dir.path().join("report.txt")).unwrap().starts_with("no results"));
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_infdist")).args(args).output().unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let out = out.to_str().unwrap();

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"distances":[3],"cutoff_d":5}"#).unwrap();
    assert_eq!(cli(&["run", "--config", bad.to_str().unwrap(), "--out", out]).status.code(), Some(2));

    let good = dir.path().join("good.json");
    fs::write(
        &good,
        r#"{"distances":[3,5],"p_values":[0.003],"shots_per_point":1000,"input_state":"0","observable":"Z",
        "method":"direct","cutoff_d":5,"seed":3,"bootstrap_trials":10}"#,
    )
    .unwrap();
    // decoding before the graphs exist is a stage failure
    assert_eq!(cli(&["decode", "--config", good.to_str().unwrap(), "--out", out]).status.code(), Some(3));
    let status = cli(&["run", "--out", out, "--stage", "estimate", "--workers", "2"]).status;
    assert_eq!(status.code(), Some(0));
    assert!(Path::new(out).join("ev.csv").exists());
    assert!(!Path::new(out).join("fit.json").exists());
    assert_eq!(cli(&["fit", "--out", out]).status.code(), Some(0));
    assert_eq!(cli(&["report", "--out", out]).status.code(), Some(0));
    assert_eq!(cli(&["run", "--out", out, "--stage", "nope"]).status.code(), Some(2));
}
