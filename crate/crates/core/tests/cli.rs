use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use surveymix::mixture::MixtureModel;
use surveymix::synth::GeneratorSpec;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_surveymix"));
    c.env_remove("SURVEYMIX_OUT");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn table1() -> MixtureModel {
    MixtureModel::new(
        vec![0.73, 0.27],
        vec![vec![3.6, 4.1], vec![6.0, 6.7]],
        vec![vec![2.5, 2.2], vec![1.0, 0.2]],
    )
    .unwrap()
}

fn table4() -> MixtureModel {
    MixtureModel::new(
        vec![0.13, 0.58, 0.29],
        vec![vec![1.5, 3.2], vec![3.7, 4.2], vec![5.5, 6.2]],
        vec![vec![1.7, 2.0], vec![1.9, 1.3], vec![1.4, 1.0]],
    )
    .unwrap()
}

const PROFILE: [[f64; 3]; 2] = [[0.49, 0.36, 0.15], [0.16, 0.39, 0.45]];

fn write_specs(dir: &Path, name: &str, specs: &[GeneratorSpec]) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(specs).unwrap()).unwrap();
    path
}

fn table1_spec(dir: &Path, n: usize) -> PathBuf {
    write_specs(
        dir,
        "table1.json",
        &[GeneratorSpec::new(table1(), n, 3)
            .discretized()
            .with_party_profile(PROFILE.to_vec())],
    )
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn fit_writes_table_style_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = table1_spec(tmp.path(), 1500);
    let out = tmp.path().join("fit");
    let o = run(&["fit", "--synth", s(&spec), "--k", "2", "--restarts", "3", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in [
        "model.json",
        "fit_meta.json",
        "composition.csv",
        "composition.md",
        "precision_recall.csv",
        "precision_recall.md",
        "party_means.json",
        "scatter.svg",
        "density.svg",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let model = MixtureModel::from_json_file(out.join("model.json")).unwrap();
    assert_eq!((model.k(), model.dims()), (2, 2));
    let md = std::fs::read_to_string(out.join("composition.md")).unwrap();
    for row in ["Cluster center position", "Variance", "Contains portion of data", "Democrat", "Independent", "Republican", "Party grouping"] {
        assert!(md.contains(row), "composition.md lacks {row}");
    }
    assert!(stdout(&o).contains("party grouping"));
}

#[test]
fn survey_csv_round_trip_through_cli() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = table1_spec(tmp.path(), 800);
    let synth_out = tmp.path().join("synth");
    let o = run(&["synth", "--synth", s(&spec), "--out", s(&synth_out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = synth_out.join("synth.csv");
    let schema = synth_out.join("synth_schema.json");
    assert!(synth_out.join("synth_spec.json").is_file());

    let fit_out = tmp.path().join("fit");
    let o = run(&[
        "fit", "--data", s(&csv), "--schema", s(&schema), "--issues", "issue1,issue2", "--k", "2",
        "--restarts", "2", "--years", "2012", "--out", s(&fit_out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fit_out.join("fit_meta.json")).unwrap()).unwrap();
    assert_eq!(meta["n"], 800);

    // one issue is enough to fit, but not to draw a scatter or density plot
    let one = tmp.path().join("one");
    let o = run(&["fit", "--data", s(&csv), "--schema", s(&schema), "--issues", "issue2", "--restarts", "2", "--out", s(&one)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(one.join("model.json").is_file());
    assert!(!one.join("density.svg").exists());
}

#[test]
fn missing_schema_is_a_usage_error_naming_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("data.csv");
    std::fs::write(&csv, "year,party,a\n2012,1,3\n").unwrap();
    let missing = tmp.path().join("no_such_schema.json");
    let out = tmp.path().join("out");
    let o = run(&["fit", "--data", s(&csv), "--schema", s(&missing), "--k", "2", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_str(&stderr(&o)).unwrap();
    assert_eq!(err["error"], "io");
    assert!(err["path"].as_str().unwrap().ends_with("no_such_schema.json"));
    let saved: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("error.json")).unwrap()).unwrap();
    assert_eq!(saved, err);
}

#[test]
fn computational_failure_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = table1_spec(tmp.path(), 5);
    let o = run(&["fit", "--synth", s(&spec), "--k", "9", "--out", s(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let err: serde_json::Value = serde_json::from_str(&stderr(&o)).unwrap();
    assert_eq!(err["error"], "infeasible");
}

#[test]
fn usage_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = table1_spec(tmp.path(), 50);
    let cases: Vec<Vec<&str>> = vec![
        vec!["xval", "--synth", s(&spec), "--k", "1..3", "--folds", "1"],
        vec!["sweep", "--synth", s(&spec), "--k", "4..2"],
        vec!["sweep", "--synth", s(&spec)],
        vec!["fit", "--synth", s(&spec), "--k", "1..3"],
        vec!["fit", "--k", "2"],
        vec!["fit", "--synth", s(&spec), "--floor", "-1"],
        vec!["fit", "--synth", s(&spec), "--jitter", "0.5"],
        vec!["timeseries", "--synth", s(&spec), "--k", "3"],
        vec!["render"],
        vec!["bogus"],
    ];
    for args in cases {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn sweep_single_k_and_local_min() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_specs(tmp.path(), "t4.json", &[GeneratorSpec::new(table4(), 5914, 31)]);
    let out = tmp.path().join("one");
    let o = run(&["sweep", "--synth", s(&spec), "--k", "1..1", "--restarts", "2", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(stdout(&o).contains("selected k = 1 (single)"));

    let out = tmp.path().join("range");
    let o = run(&["sweep", "--synth", s(&spec), "--k", "2..4", "--floor", "1.0", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("selected k = 3 (local-min)"), "{}", stdout(&o));
    for f in ["sweep.csv", "sweep.json", "aic_curve.svg"] {
        assert!(out.join(f).is_file());
    }
}

#[test]
fn unconstrained_sweep_warns_without_interior_minimum() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_specs(
        tmp.path(),
        "t4.json",
        &[GeneratorSpec::new(table4(), 5914, 8).discretized()],
    );
    let out = tmp.path().join("o");
    let o = run(&["sweep", "--synth", s(&spec), "--k", "2..20", "--floor", "0", "--restarts", "3", "--seed", "2", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("sweep.json")).unwrap()).unwrap();
    if report["selection_rule"] == "global-min" {
        assert!(stderr(&o).contains("no interior local minimum"));
    }
    // collapsed single-position clusters appear at large k
    let tiny = report["entries"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|e| e["k"].as_u64().unwrap() >= 6)
        .filter_map(|e| e["min_variance"].as_f64())
        .any(|v| v < 0.01);
    assert!(tiny);
}

#[test]
fn xval_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = table1_spec(tmp.path(), 600);
    let out = tmp.path().join("x");
    let o = run(&["xval", "--synth", s(&spec), "--k", "1..4", "--folds", "5", "--restarts", "2", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let folds = std::fs::read_to_string(out.join("xval_folds.csv")).unwrap();
    assert_eq!(folds.lines().count(), 1 + 5 * 4);
    let summary = std::fs::read_to_string(out.join("xval_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 4);
    assert!(out.join("xval.json").is_file() && out.join("xval_curve.svg").is_file());
}

fn party_separation(out: &Path) -> Vec<(i64, f64)> {
    let ts: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("timeseries.json")).unwrap()).unwrap();
    ts["series"]["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| (r["year"].as_i64().unwrap(), r["party_separation"].as_f64().unwrap()))
        .collect()
}

#[test]
fn timeseries_skips_thin_years_and_tracks_drift() {
    let tmp = tempfile::tempdir().unwrap();
    let base = |year: i32, shift: f64, n: usize, seed: u64| {
        let mut means = table1().means().to_vec();
        means[1][0] += shift;
        let model = MixtureModel::new(table1().weights().to_vec(), means, table1().variances().to_vec()).unwrap();
        GeneratorSpec::new(model, n, seed)
            .with_party_profile(PROFILE.to_vec())
            .with_year(year)
    };
    let mut specs: Vec<GeneratorSpec> = (0..6).map(|i| base(2000 + i, 0.1 * i as f64, 20_000, 50 + i as u64)).collect();
    specs.push(base(2010, 0.0, 1, 99));
    let spec = write_specs(tmp.path(), "drift.json", &specs);
    let out = tmp.path().join("ts");
    let o = run(&["timeseries", "--synth", s(&spec), "--restarts", "3", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("year 2010 skipped"));
    for f in ["distance.csv", "distance_separation.svg", "distance_center.svg", "models/model_2000.json", "models/model_2005.json"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let sep = party_separation(&out);
    assert_eq!(sep.len(), 6);
    let n = sep.len() as f64;
    let (mx, my) = (sep.iter().map(|p| p.0 as f64).sum::<f64>() / n, sep.iter().map(|p| p.1).sum::<f64>() / n);
    let slope = sep.iter().map(|p| (p.0 as f64 - mx) * (p.1 - my)).sum::<f64>()
        / sep.iter().map(|p| (p.0 as f64 - mx).powi(2)).sum::<f64>();
    assert!(slope > 0.02, "{sep:?}");

    // identical generators in two years give near-identical distances
    let twin = write_specs(tmp.path(), "twin.json", &[base(2001, 0.0, 20_000, 1), base(2002, 0.0, 20_000, 2)]);
    let out = tmp.path().join("twin");
    let o = run(&["timeseries", "--synth", s(&twin), "--restarts", "3", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let sep = party_separation(&out);
    assert!((sep[0].1 - sep[1].1).abs() < 0.1, "{sep:?}");
}

#[test]
fn config_file_with_flag_override_and_env_out() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = table1_spec(tmp.path(), 300);
    let cfg = tmp.path().join("run.json");
    std::fs::write(
        &cfg,
        serde_json::json!({"synth": spec, "k": "1..3", "restarts": 2, "seed": 4, "plots": false}).to_string(),
    )
    .unwrap();
    let env_out = tmp.path().join("from_env");
    let o = bin()
        .args(["sweep", "--config", s(&cfg), "--k", "1..2"])
        .env("SURVEYMIX_OUT", &env_out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(env_out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(!env_out.join("aic_curve.svg").exists());
}

#[test]
fn eleven_issue_scatter_uses_projection() {
    let tmp = tempfile::tempdir().unwrap();
    let d = 11;
    let model = MixtureModel::new(
        vec![0.7, 0.3],
        vec![vec![3.5; d], vec![6.0; d]],
        vec![vec![2.0; d], vec![0.8; d]],
    )
    .unwrap();
    let spec = write_specs(
        tmp.path(),
        "wide.json",
        &[GeneratorSpec::new(model, 400, 5).discretized().with_party_profile(PROFILE.to_vec())],
    );
    let out = tmp.path().join("wide");
    let o = run(&["fit", "--synth", s(&spec), "--restarts", "2", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let svg = std::fs::read_to_string(out.join("scatter.svg")).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let count = |c: &str| doc.descendants().filter(|n| n.attribute("class") == Some(c)).count();
    assert_eq!((count("point"), count("cluster-mean"), count("party-mean")), (400, 2, 2));
    assert!(!out.join("density.svg").exists());
}
