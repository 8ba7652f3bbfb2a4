use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use clap::Parser;
use rsf_cli::commands::{CasePrediction, ModelFile};
use rsf_core::{predict_ensemble, RawTable};

fn rsf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rsf")).args(args).output().unwrap()
}

fn ok(args: &[&str]) {
    let out = rsf(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Synthetic PBC-like file with `n` rows in `dir`.
fn synth(dir: &Path, n: usize) -> PathBuf {
    let path = dir.join("pbc.csv");
    ok(&["synth-pbc", "--n", &n.to_string(), "--seed", "4", "--out", s(&path), "--out-dir", s(&dir.join("synth"))]);
    path
}

fn common<'a>(data: &'a Path, out: &'a Path) -> Vec<&'a str> {
    vec!["--data", s(data), "--time-col", "time", "--status-col", "status", "--out-dir", s(out)]
}

#[test]
fn single_tree_fit_is_byte_identical_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 120);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let mut args = vec!["fit", "--ntree", "1", "--nsplit", "5", "--granularity", "5"];
        args.extend(common(&data, out));
        ok(&args);
    }
    for file in ["model.json", "fit.json", "manifest.json"] {
        let (x, y) = (fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap());
        if file == "manifest.json" {
            // the manifest names its own output directory
            let strip = |v: Vec<u8>, d: &Path| String::from_utf8(v).unwrap().replace(s(d), "OUT");
            assert_eq!(strip(x, &a), strip(y, &b));
        } else {
            assert_eq!(x, y, "{file}");
        }
    }
}

#[test]
fn predictions_match_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 100);
    let out = dir.path().join("out");
    let mut args = vec!["fit", "--ntree", "10", "--nsplit", "10", "--granularity", "4"];
    args.extend(common(&data, &out));
    ok(&args);
    let model = out.join("model.json");
    let mut args = vec!["predict", "--model", s(&model)];
    args.extend(common(&data, &out));
    ok(&args);

    let model = ModelFile::load(&model).unwrap();
    let preds: Vec<CasePrediction> = serde_json::from_slice(&fs::read(out.join("predictions.json")).unwrap()).unwrap();
    let raw = RawTable::read_csv(&data).unwrap();
    let codes = raw.encode_features(model.forest.schema()).unwrap();
    assert_eq!(preds.len(), raw.rows.len());
    for p in &preds {
        let x: Vec<u32> = codes.iter().map(|c| c[p.case]).collect();
        let (surv, chf) = predict_ensemble(&model.forest, &x).unwrap();
        assert_eq!((&p.survival, &p.chf), (&surv, &chf));
    }
}

#[test]
fn vimp_csv_has_the_documented_header() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 100);
    let out = dir.path().join("out");
    let mut args = vec!["vimp", "--ntree", "10", "--boot-reps", "5", "--granularity", "3"];
    args.extend(common(&data, &out));
    ok(&args);
    let text = fs::read_to_string(out.join("vimp.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "variable,mean,lower,upper,level,granularity,nsplit");
    assert_eq!(lines.count(), 17);
}

#[test]
fn sweep_single_cell_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 100);
    let run = |name: &str| {
        let out = dir.path().join(name);
        let mut args = vec!["granularity-sweep", "--ntree", "8", "--boot-reps", "3", "--granularity", "2", "--nsplit", "5"];
        args.extend(common(&data, &out));
        ok(&args);
        (
            fs::read_to_string(out.join("sweep_error.csv")).unwrap(),
            fs::read_to_string(out.join("sweep_vimp.csv")).unwrap(),
        )
    };
    let (errors, vimp) = run("a");
    assert_eq!(errors.lines().count(), 2);
    assert!(errors.starts_with("granularity,nsplit,oob_error\n2,5,"));
    assert_eq!(vimp.lines().count(), 18);
    assert_eq!(run("b"), (errors, vimp));
}

#[test]
fn noise_vimp_adds_named_noise_per_granularity() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 100);
    let out = dir.path().join("out");
    let mut args = vec!["noise-vimp", "--ntree", "6", "--boot-reps", "3", "--granularity", "2,3", "--nsplit", "5"];
    args.extend(common(&data, &out));
    ok(&args);
    let mut reader = csv::Reader::from_path(out.join("noise_vimp.csv")).unwrap();
    let header = reader.headers().unwrap().clone();
    let g = header.iter().position(|h| h == "granularity").unwrap();
    let noise = header.iter().position(|h| h == "noise").unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    for level in ["2", "3"] {
        let at: Vec<&csv::StringRecord> = rows.iter().filter(|r| &r[g] == level).collect();
        assert_eq!(at.len(), 67);
        let flagged: Vec<&str> = at.iter().filter(|r| &r[noise] == "true").map(|r| &r[0]).collect();
        assert_eq!(flagged.len(), 50);
        assert!(flagged.iter().all(|n| n.starts_with('c') || n.starts_with('d')));
    }
}

#[test]
fn bad_input_gives_one_line_and_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let out = rsf(&["fit", "--data", s(&missing), "--out-dir", s(dir.path())]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("rsf: "));

    let data = dir.path().join("bad.csv");
    fs::write(&data, "time,status,x\n1,1,a\n2,7,b\n").unwrap();
    let out = rsf(&["fit", "--data", s(&data), "--out-dir", s(dir.path())]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.contains("status"));

    let out = rsf(&["fit", "--ntree", "0", "--data", s(&data), "--out-dir", s(dir.path())]);
    assert!(!out.status.success());
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    fs::write(&config, r#"{"n_trees": 3, "seed": 9, "nsplit": [7]}"#).unwrap();
    let args = rsf_cli::Cli::try_parse_from(["rsf", "--config", s(&config), "--seed", "2", "fit"]).unwrap();
    let resolved = args.common.resolve().unwrap();
    assert_eq!((resolved.n_trees, resolved.seed, resolved.nsplit.clone()), (3, 2, vec![7]));

    fs::write(&config, r#"{"n_tree": 3}"#).unwrap();
    let args = rsf_cli::Cli::try_parse_from(["rsf", "--config", s(&config), "fit"]).unwrap();
    assert!(args.common.resolve().is_err());
}
