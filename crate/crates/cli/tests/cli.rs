use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use specgap::qmc::random_shift;
use tempfile::TempDir;

fn specgap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specgap"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, coefficient: Value, m_max: u32, extra: Value) -> PathBuf {
    let mut cfg = serde_json::json!({
        "coefficient": coefficient,
        "mesh": {"n": 64},
        "qmc": {"m_max": m_max, "seed": 7},
    });
    if let (Some(base), Some(more)) = (cfg.as_object_mut(), extra.as_object()) {
        for (k, v) in more {
            base.insert(k.clone(), v.clone());
        }
    }
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

fn affine(c0: f64) -> Value {
    serde_json::json!({"family": "affine", "a0": 1.0, "c0": c0, "s": 100})
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn smoke_survey_has_one_level_and_no_fit() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "smoke.json",
        affine(1.0),
        0,
        serde_json::json!({}),
    );
    let levels = dir.path().join("levels.csv");
    let o = specgap(&[
        "survey",
        "-c",
        path_str(&cfg),
        "--levels",
        path_str(&levels),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("fit: none"));
    let text = fs::read_to_string(&levels).unwrap();
    let rows = data_lines(&text);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0], "m,N,delta_N,argmin_index,diff");
    assert!(rows[1].starts_with("0,1,") && rows[1].ends_with(",0,0.0"));
    for key in ["# config_sha256=", "# seed=7", "# genvec_sha256="] {
        assert!(text.contains(key), "missing {key}");
    }
}

#[test]
fn survey_outputs_and_fit_idempotence() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "run.json",
        affine(1.0),
        8,
        serde_json::json!({"output": {"levels_csv": "out/levels.csv", "svg": "out/plot.svg", "report_json": "out/report.json"}}),
    );
    let gaps = dir.path().join("gaps.csv");
    let o = specgap(&[
        "survey",
        "-c",
        path_str(&cfg),
        "--dump-gaps",
        path_str(&gaps),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let fit_line = out
        .lines()
        .find(|l| l.starts_with("fit: alpha"))
        .expect("fit printed");

    let levels = dir.path().join("out/levels.csv");
    assert_eq!(
        data_lines(&fs::read_to_string(&levels).unwrap()).len(),
        1 + 9
    );
    assert_eq!(
        data_lines(&fs::read_to_string(&gaps).unwrap()).len(),
        1 + 256
    );

    let svg = fs::read_to_string(dir.path().join("out/plot.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("stroke-dasharray"));
    assert!(!svg.contains("href") && !svg.contains("<image"));

    let report: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/report.json")).unwrap())
            .unwrap();
    assert_eq!(report["levels"].as_array().unwrap().len(), 9);
    assert!(report["provenance"]["config_sha256"].is_string());

    let refit = specgap(&["fit", path_str(&levels)]);
    assert!(refit.status.success(), "{}", stderr(&refit));
    let refit_out = stdout(&refit);
    let parse = |line: &str, key: &str| -> f64 {
        line.split_whitespace()
            .skip_while(|w| *w != key)
            .nth(2)
            .unwrap()
            .parse()
            .unwrap()
    };
    let line = refit_out.lines().next().unwrap();
    assert_eq!(parse(fit_line, "alpha"), parse(line, "alpha"));
    assert_eq!(parse(fit_line, "beta"), parse(line, "beta"));
}

#[test]
fn worker_count_does_not_change_levels() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "det.json",
        affine(1.0),
        9,
        serde_json::json!({}),
    );
    let mut files = Vec::new();
    for w in ["1", "4"] {
        let path = dir.path().join(format!("levels-{w}.csv"));
        let o = specgap(&[
            "survey",
            "-c",
            path_str(&cfg),
            "--workers",
            w,
            "--levels",
            path_str(&path),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        files.push(fs::read(&path).unwrap());
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn points_without_shift() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "p.json", affine(1.0), 4, serde_json::json!({}));
    let o = specgap(&["points", "-c", path_str(&cfg), "--count", "2", "--no-shift"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let rows = data_lines(&out);
    assert_eq!(rows.len(), 3);
    assert!(rows[1].split(',').all(|v| v == "-0.5"));
    assert!(rows[2].split(',').all(|v| v == "0.0"));
    assert_eq!(rows[1].split(',').count(), 100);
}

#[test]
fn points_match_direct_lattice_formula() {
    let dir = TempDir::new().unwrap();
    let z = [1u64, 27, 45, 83];
    let genvec = dir.path().join("z.txt");
    fs::write(
        &genvec,
        z.iter().map(|v| format!("{v}\n")).collect::<String>(),
    )
    .unwrap();
    let coefficient = serde_json::json!({"family": "affine", "c0": 1.0, "s": 4});
    let cfg = write_config(dir.path(), "p.json", coefficient, 6, serde_json::json!({}));
    for m in 0..=6u32 {
        let n = 1u64 << m;
        let o = specgap(&[
            "points",
            "-c",
            path_str(&cfg),
            "--genvec",
            path_str(&genvec),
            "--seed",
            "3",
            "--count",
            &n.to_string(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let mut ours: Vec<Vec<f64>> = data_lines(&stdout(&o))[1..]
            .iter()
            .map(|r| r.split(',').map(|v| v.parse().unwrap()).collect())
            .collect();
        // An n-point rank-1 lattice shifted by the same Delta.
        let shift = random_shift(3, 4);
        let mut direct: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                z.iter()
                    .zip(&shift)
                    .map(|(&zj, &d)| ((((i * zj) % n) as f64 / n as f64) + d).fract() - 0.5)
                    .collect()
            })
            .collect();
        let key = |a: &Vec<f64>, b: &Vec<f64>| a.partial_cmp(b).unwrap();
        ours.sort_by(key);
        direct.sort_by(key);
        assert_eq!(ours, direct, "m = {m}");
    }
}

#[test]
fn points_count_beyond_lattice_fails() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "p.json", affine(1.0), 2, serde_json::json!({}));
    let o = specgap(&["points", "-c", path_str(&cfg), "--count", "5"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("--count 5"));
}

#[test]
fn fit_recovers_exact_power_law() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("synthetic.csv");
    let mut text = String::from("# synthetic\nm,N,delta_N,argmin_index,diff\n");
    for m in 0..=10 {
        let n = f64::from(1u32 << m);
        let diff = if m == 10 { 0.0 } else { 3.0 * n.powf(-0.5) };
        text.push_str(&format!("{m},{},{},0,{diff}\n", 1u32 << m, 1.0 + diff));
    }
    fs::write(&path, text).unwrap();
    let o = specgap(&["fit", path_str(&path)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let words: Vec<String> = stdout(&o).split_whitespace().map(String::from).collect();
    let alpha: f64 = words[2].parse().unwrap();
    let beta: f64 = words[5].parse().unwrap();
    assert!(
        (alpha - 3.0).abs() < 1e-10 && (beta - 0.5).abs() < 1e-10,
        "{alpha} {beta}"
    );
    assert!(stdout(&o).contains("filtered = 1"));
}

#[test]
fn fit_rejects_flat_and_malformed_tables() {
    let dir = TempDir::new().unwrap();
    let flat = dir.path().join("flat.csv");
    fs::write(
        &flat,
        "m,N,delta_N,argmin_index,diff\n0,1,2.0,0,0.0\n1,2,2.0,0,0.0\n",
    )
    .unwrap();
    assert!(!specgap(&["fit", path_str(&flat)]).status.success());

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "m,N,delta_N,argmin_index,diff\n0,1,oops,0,0.0\n").unwrap();
    let o = specgap(&["fit", path_str(&bad)]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("delta_N"), "{}", stderr(&o));
}

fn theory(dir: &Path, coefficient: Value) -> Value {
    let cfg = write_config(dir, "t.json", coefficient, 4, serde_json::json!({}));
    let o = specgap(&["theory", "-c", path_str(&cfg)]);
    assert!(o.status.success(), "{}", stderr(&o));
    serde_json::from_str(&stdout(&o)).unwrap()
}

#[test]
fn theory_verdicts() {
    let dir = TempDir::new().unwrap();
    let half = theory(dir.path(), affine(0.5));
    assert_eq!(half["condition_holds"], true);
    assert!((half["gap_floor"].as_f64().unwrap() - 9.44).abs() < 0.01);
    assert!(half["lipschitz"]["1"].as_f64().unwrap() > 0.0);
    assert!(half["lipschitz"]["2"].as_f64().unwrap() > 0.0);

    let one = theory(dir.path(), affine(1.0));
    assert_eq!(one["condition_holds"], false);
    assert!(one["gap_floor"].is_null());

    let flat = theory(dir.path(), affine(0.0));
    assert!((flat["gap_floor"].as_f64().unwrap() - 3.0 * PI * PI).abs() < 1e-9);

    let ln = theory(
        dir.path(),
        serde_json::json!({"family": "log_normal", "a_star": 0.0, "c0": 1.0}),
    );
    assert!(ln["condition_holds"].is_null() && ln["brackets_discrete"].is_null());
    assert!(!ln["notes"].as_array().unwrap().is_empty());
}

#[test]
fn strict_policy_failure_exits_nonzero() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "strict.json",
        serde_json::json!({"family": "log_normal", "a_star": 0.0, "c0": 1.0}),
        3,
        serde_json::json!({"survey": {"fail_policy": "strict"}}),
    );
    let levels = dir.path().join("l.csv");
    let o = specgap(&[
        "survey",
        "-c",
        path_str(&cfg),
        "--no-shift",
        "--levels",
        path_str(&levels),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("sample 0"));
    assert!(!levels.exists());

    // The same configuration under the default policy records the failure.
    let cfg = write_config(
        dir.path(),
        "record.json",
        serde_json::json!({"family": "log_normal", "a_star": 0.0, "c0": 1.0}),
        3,
        serde_json::json!({}),
    );
    let o = specgap(&[
        "survey",
        "-c",
        path_str(&cfg),
        "--no-shift",
        "--levels",
        path_str(&levels),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("failed samples: 1"));
}

#[test]
fn config_errors_name_the_field() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, r#"{"coefficient": {"family": "affine", "c0": 1}, "mesh": {"n": 64, "h": 0.1}, "qmc": {"m_max": 2}}"#).unwrap();
    let o = specgap(&["survey", "-c", path_str(&path)]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("field `mesh.h`"), "{}", stderr(&o));

    fs::write(
        &path,
        r#"{"coefficient": {"family": "cubic", "c0": 1}, "mesh": {"n": 64}, "qmc": {"m_max": 2}}"#,
    )
    .unwrap();
    let o = specgap(&["theory", "-c", path_str(&path)]);
    assert!(stderr(&o).contains("coefficient.family"), "{}", stderr(&o));

    fs::write(&path, r#"{"coefficient": {"family": "affine", "c0": 1.3}, "mesh": {"n": 64}, "qmc": {"m_max": 2}}"#).unwrap();
    let o = specgap(&["survey", "-c", path_str(&path)]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("a_min"), "{}", stderr(&o));
}
