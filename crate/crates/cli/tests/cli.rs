use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dpa_lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpa-lab"))
        .args(args)
        .env_remove("DPA_LAB_OUT")
        .output()
        .expect("binary runs")
}

fn tiny_alignment(out: &Path, extra: &[&str]) -> Output {
    let out = out.to_str().unwrap();
    let mut args = vec![
        "run",
        "score_alignment",
        "--seed",
        "3",
        "--out",
        out,
        "--epochs",
        "2",
        "--set",
        "samples=300",
        "--set",
        "hidden=8",
        "--set",
        "grid_n=30",
        "--set",
        "batch_size=100",
    ];
    args.extend_from_slice(extra);
    dpa_lab(&args)
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

#[test]
fn invalid_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "epochs = many\nnot_a_key = 1\n").unwrap();
    let o = dpa_lab(&["run", "score_alignment", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("epochs") && err.contains("not_a_key"), "{err}");

    let o = dpa_lab(&["run", "score_alignment", "--dataset", "nowhere"]);
    assert_eq!(o.status.code(), Some(2));
    let o = dpa_lab(&["run", "mfep_table", "--seeds", "9..3"]);
    assert_eq!(o.status.code(), Some(2));
    let o = dpa_lab(&["run", "no_such_experiment"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_failure_exits_with_one_and_names_the_module() {
    let dir = tempfile::tempdir().unwrap();
    // a 3-row sample cannot support the residual independence diagnostics
    let o = dpa_lab(&[
        "run",
        "independence_table",
        "--dataset",
        "gaussian_line",
        "--epochs",
        "1",
        "--set",
        "samples=30",
        "--set",
        "batch_size=10",
        "--set",
        "hidden=4",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error["));
}

#[test]
fn alignment_run_is_reproducible_and_renders_two_panels() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let oa = tiny_alignment(a.path(), &[]);
    assert!(oa.status.success(), "{}", String::from_utf8_lossy(&oa.stderr));
    let ob = tiny_alignment(b.path(), &[]);
    assert!(ob.status.success());

    let files = csv_files(a.path());
    let names: Vec<&str> = files.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(
        names,
        [
            "arrows.csv",
            "losses.csv",
            "polylines.csv",
            "records.csv",
            "summary.csv"
        ]
    );
    assert_eq!(files, csv_files(b.path()));
    for (_, body) in &files {
        let first = String::from_utf8_lossy(body).lines().next().unwrap().to_string();
        assert!(
            first.starts_with("# dpa-lab ") && first.contains("config_hash=") && first.contains("kind=score_alignment")
        );
    }

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("manifest.json")).unwrap()).unwrap();
    for art in manifest["artifacts"].as_array().unwrap() {
        assert!(a.path().join(art.as_str().unwrap()).is_file());
    }
    assert_eq!(manifest["seeds"], serde_json::json!([3]));

    fs::remove_file(a.path().join("figure.svg")).unwrap();
    let r = dpa_lab(&["render", "--input", a.path().to_str().unwrap()]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let svg = fs::read_to_string(a.path().join("figure.svg")).unwrap();
    assert!(svg.contains(r#"id="panel-0""#) && svg.contains(r#"id="panel-1""#) && !svg.contains(r#"id="panel-2""#));
    assert!(
        svg.contains(r#"class="density""#) && svg.contains(r#"class="levelset""#) && svg.contains(r#"class="arrows""#)
    );
}

#[test]
fn config_hash_ignores_output_location_but_not_settings() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    assert!(tiny_alignment(a.path(), &[]).status.success());
    assert!(tiny_alignment(b.path(), &["--parallel-seeds", "2"]).status.success());
    assert!(tiny_alignment(c.path(), &["--set", "lr=0.002"]).status.success());
    let hash = |d: &Path| {
        let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("manifest.json")).unwrap()).unwrap();
        m["config_hash"].as_str().unwrap().to_string()
    };
    assert_eq!(hash(a.path()), hash(b.path()));
    assert_ne!(hash(a.path()), hash(c.path()));
}

#[test]
fn render_without_inputs_names_the_producer() {
    let dir = tempfile::tempdir().unwrap();
    let o = dpa_lab(&["render", "--input", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("dpa-lab run score_alignment"), "{err}");
}

#[test]
fn render_with_density_only_polylines() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("polylines.csv"),
        "# dpa-lab 0 config_hash=x kind=score_alignment\npanel,layer,id,x,y\n0,density,0,0,0\n0,density,0,1,1\n",
    )
    .unwrap();
    let o = dpa_lab(&["render", "--input", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let svg = fs::read_to_string(dir.path().join("figure.svg")).unwrap();
    assert!(svg.contains(r#"class="density""#) && !svg.contains(r#"class="levelset""#));
}

#[test]
fn tiny_mueller_brown_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = dpa_lab(&[
        "run",
        "mueller_brown",
        "--seed",
        "1",
        "--epochs",
        "2",
        "--set",
        "samples=400",
        "--set",
        "hidden=8",
        "--set",
        "batch_size=100",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "mfep.csv",
        "path.csv",
        "metrics.csv",
        "polylines.csv",
        "figure.svg",
        "manifest.json",
    ] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let svg = fs::read_to_string(dir.path().join("figure.svg")).unwrap();
    assert!(svg.contains(r#"class="mfep""#) && svg.contains(r#"class="path""#));
}

#[test]
fn tiny_mfep_table_has_one_row_per_model() {
    let dir = tempfile::tempdir().unwrap();
    let o = dpa_lab(&[
        "run",
        "mfep_table",
        "--seeds",
        "1..3",
        "--models",
        "dpa,ae",
        "--epochs",
        "2",
        "--parallel-seeds",
        "2",
        "--set",
        "samples=400",
        "--set",
        "hidden=8",
        "--set",
        "batch_size=100",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(dir.path().join("table.csv")).unwrap();
    let rows: Vec<&str> = table.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("dpa,") && rows[1].starts_with("ae,"));
}

#[test]
fn tiny_independence_and_crt_runs() {
    let dir = tempfile::tempdir().unwrap();
    let o = dpa_lab(&[
        "run",
        "independence_table",
        "--dataset",
        "s_curve",
        "--beta",
        "1",
        "--epochs",
        "2",
        "--set",
        "samples=400",
        "--set",
        "hidden=8",
        "--set",
        "trees=10",
        "--set",
        "bootstrap=10",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(dir.path().join("table.csv")).unwrap();
    assert_eq!(table.lines().filter(|l| l.starts_with("s_curve")).count(), 1);
    let nesting = fs::read_to_string(dir.path().join("nesting.csv")).unwrap();
    assert_eq!(nesting.lines().filter(|l| l.starts_with("s_curve")).count(), 4);

    let crt_dir = tempfile::tempdir().unwrap();
    let o = dpa_lab(&[
        "run",
        "crt",
        "--epochs",
        "2",
        "--set",
        "samples=300",
        "--set",
        "hidden=8",
        "--set",
        "null_draws=100",
        "--set",
        "replications=3",
        "--set",
        "subsample=40",
        "--out",
        crt_dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let crt = fs::read_to_string(crt_dir.path().join("crt.csv")).unwrap();
    assert_eq!(crt.lines().filter(|l| !l.starts_with('#')).count(), 4);
    assert!(crt.contains("#summary,ks_d="));
}
