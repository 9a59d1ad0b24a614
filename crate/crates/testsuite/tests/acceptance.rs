//! Acceptance criteria. Each test prints one `ACn PASS|FAIL` line.

use std::io::Write;

use clap::Parser;
use ordroc_core::homogeneity::Metric;
use ordroc_core::likelihood::{hessian, log_likelihood, score};
use ordroc_core::power::{min_sample_size, solve_eta, true_gamma, PowerSpec, TrueDesign};
use ordroc_core::{build_design, chisq, roc, DesignSpec, ModelParams, Observation, ObservationTable};
use ordroc::cli::Cli;
use ordroc::sim::{self, SimSetting};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

// Written to the stderr handle directly so the verdict shows without --nocapture.
fn report(id: &str, pass: bool, detail: String) {
    let line = format!("{id} {} {detail}\n", if pass { "PASS" } else { "FAIL" });
    std::io::stderr().write_all(line.as_bytes()).unwrap();
    assert!(pass, "{id} failed: {detail}");
}

fn oracle_normal() -> Normal {
    Normal::new(0.0, 1.0).unwrap()
}

#[test]
fn ac01_true_model_values() {
    let n = oracle_normal();
    let expected = [0.736, 0.776, 0.812, 0.844, 0.873, 0.897, 0.918];
    let design = TrueDesign::setting(4, 7, 10).unwrap();
    let spec = design.design_spec();
    let gamma = true_gamma(&design, &spec).unwrap();
    let mut worst = 0.0f64;
    for (g, e) in expected.iter().enumerate() {
        let x = spec.encode(g, &[0.5]).unwrap();
        let auc = roc::auc_at(&gamma, &x).unwrap();
        worst = worst.max((auc - e).abs());
        // latent-model closed form, statrs is good to about 1e-10
        let closed = n.cdf((0.5 + 0.5 + design.a[g]) / 2.5f64.sqrt());
        assert!((auc - closed).abs() < 1e-9, "group {g}: {auc} vs {closed}");
    }
    let null = TrueDesign::setting(1, 5, 10).unwrap();
    let nspec = null.design_spec();
    let ngamma = true_gamma(&null, &nspec).unwrap();
    let base = roc::auc_at(&ngamma, &nspec.encode(0, &[0.5]).unwrap()).unwrap();
    worst = worst.max((base - 0.736).abs());
    report("AC1", worst <= 1e-3, format!("true AUCs at x1=0.5: max deviation {worst:.2e} (tolerance 1e-3)"));
}

fn norm_rel(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-3);
    diff / scale
}

fn central(f: &dyn Fn(&[f64]) -> f64, v: &[f64], k: usize) -> f64 {
    let h = f64::EPSILON.cbrt() * v[k].abs().max(1.0);
    let mut up = v.to_vec();
    let mut dn = v.to_vec();
    up[k] += h;
    dn[k] -= h;
    (f(&up) - f(&dn)) / (2.0 * h)
}

fn small_instance(rng: &mut ChaCha8Rng) -> (ordroc_core::Design, ModelParams) {
    let levels = 4;
    loop {
        let rows: Vec<Observation> = (0..20)
            .map(|_| Observation {
                score: rng.gen_range(1..=levels as u32),
                status: rng.gen_bool(0.5),
                group: rng.gen_range(0..2),
                covariates: vec![rng.gen_range(-1.0..1.0)],
            })
            .collect();
        let table = ObservationTable::new(levels, vec!["a".into(), "b".into()], vec!["x1".into()], rows).unwrap();
        let spec = DesignSpec::for_table(&table);
        let Ok(design) = build_design(&table, &spec) else { continue };
        let mut tau = vec![rng.gen_range(-1.5..-0.5)];
        for _ in 1..levels - 1 {
            let last = *tau.last().unwrap();
            tau.push(last + rng.gen_range(0.3..1.2));
        }
        let mut r = || rng.gen_range(-0.6..0.6);
        let params = ModelParams {
            tau,
            alpha0: r(),
            alpha1: vec![r(), r()],
            alpha2: vec![r(), r()],
            beta0: r(),
            beta1: vec![r(), r()],
            beta2: vec![r(), r()],
        };
        return (design, params);
    }
}

#[test]
fn ac02_derivative_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let (mut s_worst, mut h_worst, mut j_worst) = (0.0f64, 0.0f64, 0.0f64);
    let draws = 60;
    for _ in 0..draws {
        let (design, params) = small_instance(&mut rng);
        let layout = params.layout();
        let v = params.to_vec();
        let at = |w: &[f64]| ModelParams::from_slice(layout, w).unwrap();
        let ll = |w: &[f64]| log_likelihood(&design, &at(w)).unwrap();
        let analytic = score(&design, &params).unwrap();
        let numeric: Vec<f64> = (0..v.len()).map(|k| central(&ll, &v, k)).collect();
        s_worst = s_worst.max(norm_rel(analytic.as_slice(), &numeric));

        let h = hessian(&design, &params).unwrap();
        let mut num_h = Vec::new();
        let mut ana_h = Vec::new();
        for j in 0..v.len() {
            let sj = |w: &[f64]| score(&design, &at(w)).unwrap()[j];
            for k in 0..v.len() {
                num_h.push(central(&sj, &v, k));
                ana_h.push(h[(j, k)]);
            }
        }
        h_worst = h_worst.max(norm_rel(&ana_h, &num_h));

        let x = [rng.gen_range(0.0..1.0), rng.gen_range(-1.0..1.0)];
        let t = rng.gen_range(0.05..0.95);
        let f_roc = |w: &[f64]| roc::roc_at(&at(w), &x, t).unwrap();
        let f_auc = |w: &[f64]| roc::auc_at(&at(w), &x).unwrap();
        let nr: Vec<f64> = (0..v.len()).map(|k| central(&f_roc, &v, k)).collect();
        let na: Vec<f64> = (0..v.len()).map(|k| central(&f_auc, &v, k)).collect();
        j_worst = j_worst.max(norm_rel(&roc::roc_jacobian(&params, &x, t).unwrap(), &nr));
        j_worst = j_worst.max(norm_rel(&roc::auc_jacobian(&params, &x).unwrap(), &na));
    }
    let pass = s_worst <= 1e-6 && h_worst <= 1e-5 && j_worst <= 1e-7;
    report(
        "AC2",
        pass,
        format!("{draws} draws: score {s_worst:.1e} (<=1e-6), hessian {h_worst:.1e} (<=1e-5), ROC/AUC jacobians {j_worst:.1e} (<=1e-7)"),
    );
}

#[test]
fn ac03_roc_area_matches_auc() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let mut worst = 0.0f64;
    let draws = 120;
    for _ in 0..draws {
        let mut r = |s: f64| rng.gen_range(-s..s);
        let params = ModelParams {
            tau: vec![-1.0, 0.0, 1.0],
            alpha0: r(1.5),
            alpha1: vec![r(1.0), r(1.0)],
            alpha2: vec![r(1.0), r(1.0)],
            beta0: r(0.5),
            beta1: vec![r(0.4), r(0.4)],
            beta2: vec![r(0.4), r(0.4)],
        };
        let x = [r(1.0), r(1.0)];
        let n = 10_000;
        let mut area = 0.0;
        let mut prev = 0.0;
        for i in 1..=n {
            let t = i as f64 / n as f64;
            let cur = if i == n { 1.0 } else { roc::roc_at(&params, &x, t).unwrap() };
            area += 0.5 * (prev + cur) / n as f64;
            prev = cur;
        }
        worst = worst.max((area - roc::auc_at(&params, &x).unwrap()).abs());
    }
    report("AC3", worst <= 1e-4, format!("{draws} draws: max |trapezoid - AUC| {worst:.1e} (<=1e-4)"));
}

#[test]
fn ac04_noncentrality_solver() {
    let n = oracle_normal();
    let z = n.inverse_cdf(0.975) + n.inverse_cdf(0.8);
    let eta1 = solve_eta(0.05, 0.2, 1).unwrap();
    let closed_err = (eta1 - z * z).abs();
    let mut round_trip = 0.0f64;
    for df in 1..=10 {
        let eta = solve_eta(0.05, 0.2, df).unwrap();
        let crit = chisq::critical_value(0.05, df as f64);
        round_trip = round_trip.max((chisq::noncentral_sf(crit, df as f64, eta) - 0.8).abs());
    }
    // df = 1 power through the closed form, independent of the series
    let crit1 = n.inverse_cdf(0.975);
    let power1 = 1.0 - (n.cdf(crit1 - eta1.sqrt()) - n.cdf(-crit1 - eta1.sqrt()));
    round_trip = round_trip.max((power1 - 0.8).abs());
    report(
        "AC4",
        closed_err <= 1e-4 && round_trip <= 1e-6,
        format!("eta(0.05,0.2,1)={eta1:.6} vs {:.6} (err {closed_err:.1e} <=1e-4); max power error df 1..10 {round_trip:.1e} (<=1e-6)", z * z),
    );
}

fn null_design(groups: usize, k: u64, seed: u64) -> SimSetting {
    SimSetting { setting: 1, groups, raters: 10, k, levels: 7, seed, ..SimSetting::default() }
}

#[test]
fn ac05_consistency() {
    let r = sim::consistency_experiment(&null_design(5, 5, 501), &[5, 15], 500).unwrap();
    let at = |k: u64| r.find("mean_auc", k, 5).unwrap().clone();
    let (s5, s15) = (at(5), at(15));
    let bias = |s: &sim::Summary| (s.estimate - 0.736).abs() / 0.736;
    let (b5, b15) = (bias(&s5), bias(&s15));
    let pass = b15 < 0.01 && (0.01..=0.03).contains(&b5);
    report(
        "AC5",
        pass,
        format!(
            "mean AUC K=5 {:.4} (rel bias {:.2}%, want 2%+-1%, {} fits failed), K=15 {:.4} (rel bias {:.2}%, want <1%, {} failed)",
            s5.estimate,
            100.0 * b5,
            s5.failures,
            s15.estimate,
            100.0 * b15,
            s15.failures
        ),
    );
}

#[test]
fn ac06_coverage() {
    let r = sim::coverage_experiment(&null_design(5, 100, 601), &[100, 200], 1000, 0.3, 0.95).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for k in [100, 200] {
        for q in ["coverage_roc", "coverage_auc"] {
            let s = r.find(q, k, 5).unwrap();
            pass &= (0.93..=0.97).contains(&s.estimate);
            parts.push(format!("{q} K={k} {:.3}+-{:.3}", s.estimate, s.mc_se));
        }
    }
    report("AC6", pass, format!("{} (band [0.93, 0.97])", parts.join(", ")));
}

#[test]
fn ac07_type1_error() {
    let r = sim::type1_experiment(&null_design(3, 200, 701), 200, &[3, 5, 7], 2000, 0.3, 0.05).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for g in [3, 5, 7] {
        for q in ["reject_roc", "reject_auc"] {
            let s = r.find(q, 200, g).unwrap();
            pass &= (0.035..=0.065).contains(&s.estimate);
            parts.push(format!("G={g} {q} {:.4}", s.estimate));
        }
    }
    for ks in &r.ks {
        pass &= ks.p_value >= 0.01;
        parts.push(format!("KS G={} {} p={:.3}", ks.groups, ks.quantity, ks.p_value));
    }
    report("AC7", pass, format!("{} (rates in [0.035, 0.065], KS p >= 0.01)", parts.join(", ")));
}

const EQUAL_TABLE: [(u8, usize, [u64; 4]); 15] = [
    (2, 3, [41, 47, 58, 41]),
    (2, 4, [35, 37, 47, 35]),
    (2, 5, [33, 35, 41, 33]),
    (2, 6, [31, 34, 38, 31]),
    (2, 7, [29, 31, 36, 29]),
    (3, 3, [42, 49, 68, 43]),
    (3, 4, [30, 35, 46, 30]),
    (3, 5, [24, 28, 34, 24]),
    (3, 6, [21, 23, 30, 25]),
    (3, 7, [20, 22, 26, 20]),
    (4, 3, [80, 89, 115, 80]),
    (4, 4, [37, 43, 56, 37]),
    (4, 5, [19, 24, 30, 22]),
    (4, 6, [12, 14, 19, 12]),
    (4, 7, [8, 10, 13, 8]),
];

const RATIO_TABLE: [([u32; 4], [u64; 4]); 16] = [
    ([1, 1, 1, 2], [28, 33, 45, 29]),
    ([1, 1, 2, 1], [37, 42, 57, 37]),
    ([1, 2, 1, 1], [35, 39, 51, 35]),
    ([2, 1, 1, 1], [26, 29, 38, 26]),
    ([1, 1, 2, 2], [29, 32, 46, 29]),
    ([1, 2, 1, 2], [26, 30, 40, 26]),
    ([2, 2, 1, 1], [25, 28, 37, 25]),
    ([1, 2, 2, 1], [34, 37, 50, 34]),
    ([2, 1, 1, 2], [20, 23, 30, 20]),
    ([2, 1, 2, 1], [25, 28, 38, 25]),
    ([1, 2, 3, 4], [20, 24, 33, 20]),
    ([4, 3, 2, 1], [18, 19, 24, 18]),
    ([4, 2, 2, 1], [17, 19, 25, 17]),
    ([1, 2, 2, 4], [20, 24, 32, 20]),
    ([4, 2, 1, 4], [10, 11, 15, 10]),
    ([4, 1, 2, 4], [10, 12, 16, 10]),
];

const METRICS: [Metric; 4] = [Metric::RocAt(0.3), Metric::RocAt(0.5), Metric::RocAt(0.7), Metric::Auc];

fn k_row(truth: &TrueDesign) -> [u64; 4] {
    METRICS.map(|m| min_sample_size(&PowerSpec::new(truth.clone(), m)).unwrap().k_min)
}

#[test]
fn ac08_minimum_sample_sizes() {
    let mut outside = Vec::new();
    let mut cells = 0;
    let mut worst = 0.0f64;
    let mut monotone_t = true;
    let mut check = |label: String, ours: [u64; 4], published: [u64; 4], outside: &mut Vec<String>| {
        println!("  {label}: computed {ours:?} published {published:?}");
        monotone_t &= ours[0] <= ours[1] && ours[1] <= ours[2];
        for (j, (&o, &p)) in ours.iter().zip(&published).enumerate() {
            cells += 1;
            let rel = (o as f64 - p as f64).abs() / p as f64;
            worst = worst.max(rel);
            if rel > 0.2 + 1e-12 {
                outside.push(format!("{label} col{} {o} vs {p}", j + 1));
            }
        }
    };
    let mut setting4 = Vec::new();
    for (setting, g, published) in EQUAL_TABLE {
        let ours = k_row(&TrueDesign::setting(setting, g, 10).unwrap());
        if setting == 4 {
            setting4.push(ours);
        }
        check(format!("setting {setting} G={g}"), ours, published, &mut outside);
    }
    for (ratio, published) in RATIO_TABLE {
        let truth = TrueDesign::setting(4, 4, 10).unwrap().with_ratio(&ratio, 10).unwrap();
        let label = format!("ratio {}", ordroc_core::power::ratio_label(&ratio));
        check(label, k_row(&truth), published, &mut outside);
    }
    let decreasing = (0..4).all(|j| setting4.windows(2).all(|w| w[1][j] < w[0][j]));
    let pass = outside.is_empty() && monotone_t && decreasing;
    report(
        "AC8",
        pass,
        format!(
            "{} of {cells} cells outside +-20% (worst {:.0}%){}; t-monotone {monotone_t}; setting-4 decreasing in G {decreasing}",
            outside.len(),
            100.0 * worst,
            if outside.is_empty() { String::new() } else { format!(": {}", outside.join("; ")) }
        ),
    );
}

#[test]
fn ac09_power_validation() {
    let mut pass = true;
    let mut parts = Vec::new();
    for (setting, groups, seed) in [(2u8, 3usize, 901u64), (4, 7, 902)] {
        let design = SimSetting { setting, groups, raters: 10, levels: 7, seed, ..SimSetting::default() };
        let (r, k_min) = sim::power_validation(&design, Metric::RocAt(0.3), 0.05, 0.2, 1000).unwrap();
        let at = r.find("reject", k_min, groups).unwrap();
        let half = r.find("reject", k_min.div_ceil(2), groups).unwrap();
        pass &= at.estimate >= 0.75;
        parts.push(format!(
            "setting {setting} G={groups} K_min={k_min}: power {:.3}+-{:.3} (half K {:.3})",
            at.estimate, at.mc_se, half.estimate
        ));
    }
    report("AC9", pass, format!("{} (want >= 0.75)", parts.join(", ")));
}

#[test]
fn ac10_face_shaped_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let design = SimSetting {
        setting: 4,
        groups: 5,
        raters: 1,
        ratio: Some(vec![57, 30, 13, 53, 31]),
        k: 20,
        levels: 7,
        with_x1: false,
        seed: 1001,
        ..SimSetting::default()
    };
    let table = sim::generate(&design).unwrap();
    let names = ["Exam", "Rev", "Super", "Finger", "Stnt"];
    let csv = dir.path().join("faces.csv");
    {
        let mut w = csv::Writer::from_path(&csv).unwrap();
        w.write_record(["rating", "same_source", "participant_group"]).unwrap();
        for r in table.rows() {
            w.write_record([(r.score as i64 - 4).to_string(), u8::from(r.status).to_string(), names[r.group].to_string()])
                .unwrap();
        }
        w.flush().unwrap();
    }
    let path = |f: &str| dir.path().join(f).to_string_lossy().into_owned();
    let run = |args: &[&str]| {
        let cli = Cli::try_parse_from(std::iter::once("ordroc").chain(args.iter().copied())).map_err(|e| e.to_string())?;
        ordroc::cli::run(&cli).map_err(|e| e.to_string())
    };
    let (csv_path, model, test_out, pairs_out) = (path("faces.csv"), path("model.json"), path("test.json"), path("pairs.csv"));
    let steps = [
        run(&[
            "fit", "--in", &csv_path, "--score", "rating", "--status", "same_source", "--group", "participant_group",
            "--score-range", "-3,3", "--out", &model,
        ]),
        run(&["test", "--model", &model, "--metric", "auc", "--out", &test_out]),
        run(&["pairwise", "--model", &model, "--metric", "auc", "--out", &pairs_out]),
    ];
    let errors: Vec<&String> = steps.iter().filter_map(|r| r.as_ref().err()).collect();
    let mut detail = format!("N={}", table.len());
    let mut pass = errors.is_empty() && table.len() == 3680;
    if errors.is_empty() {
        let model: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
        let report_json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&test_out).unwrap()).unwrap();
        let params = model["estimates"].as_array().unwrap().len();
        let df = report_json["df"].as_u64().unwrap();
        let crit = report_json["critical_value"].as_f64().unwrap();
        let rows = std::fs::read_to_string(&pairs_out).unwrap().lines().count() - 1;
        pass &= params == 24 && df == 4 && (crit - 9.488).abs() < 1e-3 && rows == 10;
        detail = format!(
            "{detail}; fit, test and pairwise ran; {params} parameters, df={df}, critical {crit:.3}, Psi={:.1}, {rows} pairwise rows",
            report_json["statistic"].as_f64().unwrap()
        );
    } else {
        detail = format!("{detail}; errors: {errors:?}");
    }
    report("AC10", pass, detail);
}
