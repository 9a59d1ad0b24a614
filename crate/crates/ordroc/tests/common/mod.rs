#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use ordroc::csv_io::write_table;
use ordroc::sim::{generate, SimSetting};

pub fn ordroc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ordroc")).args(args).current_dir(dir).output().unwrap()
}

pub fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = ordroc(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

/// Three groups with the covariate `x1`, written to `data.csv`.
pub fn write_example(dir: &Path) {
    let setting = SimSetting { setting: 4, groups: 3, raters: 5, k: 60, seed: 7, ..SimSetting::default() };
    let table = generate(&setting).unwrap();
    write_table(std::fs::File::create(dir.join("data.csv")).unwrap(), &table).unwrap();
}

pub fn fit_example(dir: &Path) {
    write_example(dir);
    ok(
        dir,
        &["fit", "--in", "data.csv", "--score", "score", "--status", "status", "--group", "group", "--covariate", "x1", "--out", "model.json"],
    );
}

/// Five unequal groups without covariates, written to `faces.csv`.
pub fn fit_faces(dir: &Path) {
    let setting = SimSetting {
        setting: 4,
        groups: 5,
        raters: 1,
        ratio: Some(vec![57, 30, 13, 53, 31]),
        k: 20,
        with_x1: false,
        seed: 11,
        ..SimSetting::default()
    };
    let table = generate(&setting).unwrap();
    write_table(std::fs::File::create(dir.join("faces.csv")).unwrap(), &table).unwrap();
    ok(dir, &["fit", "--in", "faces.csv", "--score", "score", "--status", "status", "--group", "group", "--out", "faces.json"]);
}

pub fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let mut rows = vec![r.headers().unwrap().iter().map(String::from).collect()];
    rows.extend(r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()));
    rows
}
