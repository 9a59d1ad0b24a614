//! Data generation from the latent simulation model and Monte Carlo
//! experiments built on it.

use ordroc_core::homogeneity::{homogeneity_test, pairwise, Metric};
use ordroc_core::power::{min_sample_size, true_gamma, PowerSpec, TrueDesign, X1};
use ordroc_core::{chisq, fit, roc, DesignSpec, FitOptions, FittedModel, Observation, ObservationTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One simulated study design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSetting {
    /// Offset pattern, 1 to 4.
    pub setting: u8,
    pub groups: usize,
    /// Raters per group, or the base `J` when `ratio` is given.
    pub raters: u32,
    pub ratio: Option<Vec<u32>>,
    /// Items per rater.
    pub k: u64,
    pub levels: usize,
    pub psi: f64,
    pub phi: f64,
    /// Evaluation point for accuracy summaries.
    pub x1: f64,
    pub tau_sim: Option<Vec<f64>>,
    pub k0_fraction: f64,
    /// Include `X1` as a covariate; when off it is fixed at 0.
    pub with_x1: bool,
    pub seed: u64,
}

impl Default for SimSetting {
    fn default() -> Self {
        Self {
            setting: 1,
            groups: 5,
            raters: 10,
            ratio: None,
            k: 100,
            levels: 7,
            psi: 0.5,
            phi: 1.5,
            x1: 0.5,
            tau_sim: None,
            k0_fraction: 0.5,
            with_x1: true,
            seed: 1,
        }
    }
}

impl SimSetting {
    pub fn truth(&self) -> Result<TrueDesign> {
        let mut t = TrueDesign::setting(self.setting, self.groups, self.raters)?;
        if let Some(r) = &self.ratio {
            t = t.with_ratio(r, self.raters)?;
        }
        t.psi = self.psi;
        t.phi = self.phi;
        t.x1 = self.x1;
        t.levels = self.levels;
        t.tau_sim = self.tau_sim.clone();
        t.k0_fraction = self.k0_fraction;
        t.validate()?;
        Ok(t)
    }

    pub fn with_k(&self, k: u64) -> Self {
        Self { k, ..self.clone() }
    }

    pub fn with_groups(&self, groups: usize) -> Self {
        Self { groups, ratio: None, ..self.clone() }
    }

    pub fn design_spec(&self) -> DesignSpec {
        let labels = (1..=self.groups).map(|g| g.to_string()).collect();
        let covs = if self.with_x1 { vec![X1.to_string()] } else { Vec::new() };
        DesignSpec::new(labels, covs).expect("at least two groups")
    }

    /// Covariate values at which groups are compared.
    pub fn evaluation_covariates(&self) -> Vec<f64> {
        if self.with_x1 {
            vec![self.x1]
        } else {
            Vec::new()
        }
    }
}

/// Draws replicated tables for one setting.
#[derive(Debug, Clone)]
pub struct Generator {
    setting: SimSetting,
    truth: TrueDesign,
    tau: Vec<f64>,
    stream_base: u64,
}

impl Generator {
    pub fn new(setting: &SimSetting) -> Result<Self> {
        let truth = setting.truth()?;
        let tau = truth.thresholds();
        Ok(Self { setting: setting.clone(), truth, tau, stream_base: 0 })
    }

    /// Separates the random streams of different experiment cells.
    pub fn with_cell(mut self, cell: u32) -> Self {
        self.stream_base = u64::from(cell) << 32;
        self
    }

    pub fn truth(&self) -> &TrueDesign {
        &self.truth
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.tau
    }

    fn rng(&self, replication: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.setting.seed);
        rng.set_stream(self.stream_base | replication);
        rng
    }

    /// Raw latent draws `(group, status, x1, T)` in generation order.
    pub fn latent_draws(&self, replication: u64) -> Vec<(usize, bool, f64, f64)> {
        let mut rng = self.rng(replication);
        let k = self.setting.k;
        let k0 = self.truth.k0(k);
        let mut out = Vec::new();
        for (g, &j) in self.truth.raters.iter().enumerate() {
            for _ in 0..j {
                for item in 0..k {
                    let status = item >= k0;
                    let x1 = if self.setting.with_x1 { rng.gen::<f64>() } else { 0.0 };
                    let z: f64 = rng.sample(StandardNormal);
                    let (m, s) = self.truth.latent(status, g, x1);
                    out.push((g, status, x1, m + s * z));
                }
            }
        }
        out
    }

    /// Every rater in group `g` scores `K0` items with `D = 0` then `K - K0`
    /// with `D = 1`; the latent score is cut at the thresholds.
    pub fn table(&self, replication: u64) -> Result<ObservationTable> {
        let rows = self
            .latent_draws(replication)
            .into_iter()
            .map(|(group, status, x1, t)| Observation {
                score: 1 + self.tau.iter().filter(|&&c| c < t).count() as u32,
                status,
                group,
                covariates: if self.setting.with_x1 { vec![x1] } else { Vec::new() },
            })
            .collect();
        let spec = self.setting.design_spec();
        Ok(ObservationTable::new(
            self.setting.levels,
            spec.group_levels().to_vec(),
            spec.covariate_names().to_vec(),
            rows,
        )?)
    }
}

/// Replication `0` of `setting`.
pub fn generate(setting: &SimSetting) -> Result<ObservationTable> {
    Generator::new(setting)?.table(0)
}

/// One per-replication value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub quantity: String,
    pub k: u64,
    pub groups: usize,
    pub replication: u64,
    pub value: f64,
}

/// Aggregate of one quantity over replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub quantity: String,
    pub k: u64,
    pub groups: usize,
    /// Replications whose fit succeeded.
    pub replications: usize,
    pub failures: usize,
    pub estimate: f64,
    pub mc_se: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub truth: Option<f64>,
}

/// Kolmogorov-Smirnov comparison of a statistic sample with its null law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsSummary {
    pub quantity: String,
    pub groups: usize,
    pub df: usize,
    pub n: usize,
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub experiment: String,
    pub seed: u64,
    pub records: Vec<Record>,
    pub summary: Vec<Summary>,
    #[serde(default)]
    pub ks: Vec<KsSummary>,
}

impl ExperimentResult {
    fn new(experiment: &str, seed: u64) -> Self {
        Self { experiment: experiment.into(), seed, records: Vec::new(), summary: Vec::new(), ks: Vec::new() }
    }

    pub fn find(&self, quantity: &str, k: u64, groups: usize) -> Option<&Summary> {
        self.summary.iter().find(|s| s.quantity == quantity && s.k == k && s.groups == groups)
    }

    pub fn write_records_csv(&self, writer: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io("<csv output>", e))
    }
}

pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Binomial standard error `sqrt(p (1 - p) / n)`.
pub fn fraction_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// `sup |F_n - F|` of a sample against a continuous CDF.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic Kolmogorov p-value with the Stephens small-sample correction.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

type Outcome = std::result::Result<Vec<(String, f64)>, ordroc_core::Error>;

struct Cell {
    k: u64,
    groups: usize,
    values: Vec<Outcome>,
}

fn fit_replication(generator: &Generator, spec: &DesignSpec, replication: u64) -> std::result::Result<FittedModel, ordroc_core::Error> {
    let table = generator.table(replication).map_err(|e| match e {
        Error::Model(m) => m,
        other => ordroc_core::Error::InvalidInput(other.to_string()),
    })?;
    let model = fit(&table, spec, &FitOptions::default())?;
    if !model.converged {
        return Err(ordroc_core::Error::Precondition(format!(
            "fit did not converge (score max-norm {:.3e})",
            model.gradient_norm
        )));
    }
    Ok(model)
}

fn run_cell(
    setting: &SimSetting,
    cell: u32,
    replications: u64,
    measure: impl Fn(&FittedModel) -> Outcome + Sync,
) -> Result<Cell> {
    let generator = Generator::new(setting)?.with_cell(cell);
    let spec = setting.design_spec();
    let values = (0..replications)
        .into_par_iter()
        .map(|r| fit_replication(&generator, &spec, r).and_then(|m| measure(&m)))
        .collect();
    Ok(Cell { k: setting.k, groups: setting.groups, values })
}

/// Records every value and summarizes each quantity; `fraction` quantities
/// get the binomial standard error.
fn absorb(result: &mut ExperimentResult, cell: &Cell, truths: &[(&str, f64)], fractions: &[&str]) -> Vec<(String, Vec<f64>)> {
    let mut by_quantity: Vec<(String, Vec<f64>)> = Vec::new();
    let mut failures = 0;
    for (r, outcome) in cell.values.iter().enumerate() {
        match outcome {
            Ok(values) => {
                for (q, v) in values {
                    result.records.push(Record {
                        quantity: q.clone(),
                        k: cell.k,
                        groups: cell.groups,
                        replication: r as u64,
                        value: *v,
                    });
                    match by_quantity.iter_mut().find(|(name, _)| name == q) {
                        Some((_, vs)) => vs.push(*v),
                        None => by_quantity.push((q.clone(), vec![*v])),
                    }
                }
            }
            Err(_) => failures += 1,
        }
    }
    for (q, vs) in &by_quantity {
        let (mean, se) = mean_and_se(vs);
        let mc_se = if fractions.contains(&q.as_str()) { fraction_se(mean, vs.len()) } else { se };
        result.summary.push(Summary {
            quantity: q.clone(),
            k: cell.k,
            groups: cell.groups,
            replications: vs.len(),
            failures,
            estimate: mean,
            mc_se,
            truth: truths.iter().find(|(n, _)| n == q).map(|(_, t)| *t),
        });
    }
    by_quantity
}

fn true_accuracy(setting: &SimSetting, metric: Metric) -> Result<Vec<f64>> {
    let truth = setting.truth()?;
    let spec = truth.design_spec();
    let gamma = true_gamma(&truth, &spec)?;
    (0..setting.groups)
        .map(|g| {
            let x = spec.encode(g, &[setting.x1])?;
            Ok(match metric {
                Metric::Auc => roc::auc_at(&gamma, &x)?,
                Metric::RocAt(t) => roc::roc_at(&gamma, &x, t)?,
            })
        })
        .collect()
}

/// Mean estimated AUC at the evaluation point, averaged over groups and
/// replications, for each `K`.
pub fn consistency_experiment(setting: &SimSetting, ks: &[u64], replications: u64) -> Result<ExperimentResult> {
    let mut result = ExperimentResult::new("consistency", setting.seed);
    let truth = true_accuracy(setting, Metric::Auc)?;
    let truth_mean = truth.iter().sum::<f64>() / truth.len() as f64;
    for (i, &k) in ks.iter().enumerate() {
        let s = setting.with_k(k);
        let covs = s.evaluation_covariates();
        let cell = run_cell(&s, i as u32, replications, |m| {
            let mut total = 0.0;
            for g in 0..m.spec.n_groups() {
                let x = m.spec.encode(g, &covs)?;
                total += roc::auc_at(&m.params, &x)?;
            }
            Ok(vec![("mean_auc".into(), total / m.spec.n_groups() as f64)])
        })?;
        absorb(&mut result, &cell, &[("mean_auc", truth_mean)], &[]);
    }
    Ok(result)
}

/// Coverage of the pairwise intervals for `ROC_1(t) - ROC_2(t)` and
/// `AUC_1 - AUC_2`.
pub fn coverage_experiment(setting: &SimSetting, ks: &[u64], replications: u64, t: f64, level: f64) -> Result<ExperimentResult> {
    let mut result = ExperimentResult::new("coverage", setting.seed);
    let roc_truth = true_accuracy(setting, Metric::RocAt(t))?;
    let auc_truth = true_accuracy(setting, Metric::Auc)?;
    let d_roc = roc_truth[0] - roc_truth[1];
    let d_auc = auc_truth[0] - auc_truth[1];
    for (i, &k) in ks.iter().enumerate() {
        let s = setting.with_k(k);
        let covs = s.evaluation_covariates();
        let cell = run_cell(&s, i as u32, replications, |m| {
            let profiles = ordroc_core::CovariateProfile::per_group(m.spec.n_groups(), &covs);
            let rep = pairwise(m, &profiles, &[Metric::RocAt(t), Metric::Auc], level, false)?;
            let pair = &rep.pairs[0];
            let covers = |j: usize, truth: f64| f64::from(u8::from(pair.points[j].ci_lower <= truth && truth <= pair.points[j].ci_upper));
            Ok(vec![("coverage_roc".into(), covers(0, d_roc)), ("coverage_auc".into(), covers(1, d_auc))])
        })?;
        absorb(&mut result, &cell, &[("coverage_roc", level), ("coverage_auc", level)], &["coverage_roc", "coverage_auc"]);
    }
    Ok(result)
}

/// Rejection rate of the homogeneity test at `ROC(t)` and AUC for each
/// group count, with a KS check of the statistic against `chi2_{G-1}`.
pub fn type1_experiment(setting: &SimSetting, k: u64, groups: &[usize], replications: u64, t: f64, alpha: f64) -> Result<ExperimentResult> {
    let mut result = ExperimentResult::new("type1", setting.seed);
    for (i, &g) in groups.iter().enumerate() {
        let s = setting.with_k(k).with_groups(g);
        let covs = s.evaluation_covariates();
        let cell = run_cell(&s, i as u32, replications, |m| {
            let profiles = ordroc_core::CovariateProfile::per_group(m.spec.n_groups(), &covs);
            let r = homogeneity_test(m, &profiles, Metric::RocAt(t), alpha)?;
            let a = homogeneity_test(m, &profiles, Metric::Auc, alpha)?;
            Ok(vec![
                ("psi_roc".into(), r.statistic),
                ("reject_roc".into(), f64::from(u8::from(r.reject))),
                ("psi_auc".into(), a.statistic),
                ("reject_auc".into(), f64::from(u8::from(a.reject))),
            ])
        })?;
        let samples = absorb(&mut result, &cell, &[("reject_roc", alpha), ("reject_auc", alpha)], &["reject_roc", "reject_auc"]);
        let df = g - 1;
        for (q, vs) in samples.iter().filter(|(q, _)| q.starts_with("psi")) {
            let d = ks_statistic(vs, |x| chisq::cdf(x, df as f64));
            result.ks.push(KsSummary { quantity: q.clone(), groups: g, df, n: vs.len(), statistic: d, p_value: ks_p_value(d, vs.len()) });
        }
    }
    Ok(result)
}

/// Empirical power at the computed minimum sample size and at half of it.
pub fn power_validation(
    setting: &SimSetting,
    metric: Metric,
    alpha: f64,
    beta: f64,
    replications: u64,
) -> Result<(ExperimentResult, u64)> {
    let mut spec = PowerSpec::new(setting.truth()?, metric);
    spec.alpha = alpha;
    spec.beta = beta;
    let k_min = min_sample_size(&spec)?.k_min;
    let mut result = ExperimentResult::new("power", setting.seed);
    for (i, k) in [k_min, k_min.div_ceil(2)].into_iter().enumerate() {
        let s = setting.with_k(k);
        let covs = s.evaluation_covariates();
        let cell = run_cell(&s, i as u32, replications, |m| {
            let profiles = ordroc_core::CovariateProfile::per_group(m.spec.n_groups(), &covs);
            let r = homogeneity_test(m, &profiles, metric, alpha)?;
            Ok(vec![("reject".into(), f64::from(u8::from(r.reject)))])
        })?;
        absorb(&mut result, &cell, &[("reject", 1.0 - beta)], &["reject"]);
    }
    Ok((result, k_min))
}
