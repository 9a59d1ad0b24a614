mod common;

use common::{fit_example, fit_faces, json, ok};
use jsonschema::JSONSchema;
use ordroc::formats::{ModelFile, AUC_SCHEMA, EXPERIMENT_SCHEMA, MODEL_SCHEMA, TEST_SCHEMA};
use ordroc_core::{fit, DesignSpec, FitOptions};

fn check(schema: &str, doc: &serde_json::Value) {
    let schema: serde_json::Value = serde_json::from_str(schema).unwrap();
    let compiled = JSONSchema::compile(&schema).unwrap();
    let msgs: Vec<String> = match compiled.validate(doc) {
        Ok(()) => Vec::new(),
        Err(errors) => errors.map(|e| format!("{}: {e}", e.instance_path)).collect(),
    };
    assert!(msgs.is_empty(), "schema violations: {msgs:?}");
}

#[test]
fn cli_outputs_match_their_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fit_example(d);
    check(MODEL_SCHEMA, &json(&d.join("model.json")));
    ok(d, &["auc", "--model", "model.json", "--group", "2", "--out", "auc.json"]);
    check(AUC_SCHEMA, &json(&d.join("auc.json")));
    ok(d, &["test", "--model", "model.json", "--metric", "auc", "--out", "t_auc.json"]);
    check(TEST_SCHEMA, &json(&d.join("t_auc.json")));
    ok(d, &["test", "--model", "model.json", "--metric", "roc", "--out", "t_roc.json"]);
    check(TEST_SCHEMA, &json(&d.join("t_roc.json")));
    ok(d, &["test", "--model", "model.json", "--metric", "curve", "--grid", "64", "--out", "t_curve.json"]);
    check(TEST_SCHEMA, &json(&d.join("t_curve.json")));

    fit_faces(d);
    check(MODEL_SCHEMA, &json(&d.join("faces.json")));

    let cfg = "[simulation]\nexperiment = \"type1\"\nreplications = 4\nks = [10]\ngroups = [3]\n[simulation.design]\nraters = 4\n";
    std::fs::write(d.join("sim.toml"), cfg).unwrap();
    ok(d, &["--config", "sim.toml", "simulate"]);
    check(EXPERIMENT_SCHEMA, &json(&d.join("type1_summary.json")));
}

#[test]
fn schemas_reject_foreign_fields() {
    let dir = tempfile::tempdir().unwrap();
    fit_example(dir.path());
    let mut m = json(&dir.path().join("model.json"));
    m["extra"] = serde_json::json!(1);
    let schema: serde_json::Value = serde_json::from_str(MODEL_SCHEMA).unwrap();
    assert!(!JSONSchema::compile(&schema).unwrap().is_valid(&m));
}

#[test]
fn model_file_round_trips() {
    let table = ordroc::sim::generate(&ordroc::sim::SimSetting { groups: 3, raters: 4, k: 40, ..Default::default() }).unwrap();
    let spec = DesignSpec::for_table(&table);
    let model = fit(&table, &spec, &FitOptions::default()).unwrap();
    let file = ModelFile::from_model(&model);
    let text = serde_json::to_string(&file).unwrap();
    let back: ModelFile = serde_json::from_str(&text).unwrap();
    assert_eq!(back, file);
    let restored = back.to_model().unwrap();
    assert_eq!(restored.params, model.params);
    assert_eq!(restored.vcov, model.vcov);
    assert_eq!(restored.spec, model.spec);
    assert_eq!(restored.covariate_means, model.covariate_means);
}
