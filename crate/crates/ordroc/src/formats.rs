//! JSON and CSV representations of models and reports.

use std::collections::BTreeMap;
use std::io::Write;

use ordroc_core::homogeneity::{CurveTestReport, Metric, PairwiseReport, Region, TestReport};
use ordroc_core::nalgebra::DMatrix;
use ordroc_core::power::SampleSizeResult;
use ordroc_core::{AucSummary, CovariateProfile, DesignSpec, FittedModel, ModelParams, ParamLayout, RocSummary};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MODEL_SCHEMA: &str = include_str!("../schemas/model.schema.json");
pub const AUC_SCHEMA: &str = include_str!("../schemas/auc.schema.json");
pub const TEST_SCHEMA: &str = include_str!("../schemas/test.schema.json");
pub const EXPERIMENT_SCHEMA: &str = include_str!("../schemas/experiment.schema.json");

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignEcho {
    pub levels: usize,
    pub group_levels: Vec<String>,
    pub reference: String,
    pub covariate_names: Vec<String>,
}

impl DesignEcho {
    pub fn spec(&self) -> Result<DesignSpec> {
        Ok(DesignSpec::new(self.group_levels.clone(), self.covariate_names.clone())?.with_reference(&self.reference)?)
    }
}

/// Serialized fitted model. `vcov` is row-major in `parameter_names` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub parameter_names: Vec<String>,
    pub estimates: Vec<f64>,
    pub vcov: Vec<f64>,
    pub loglik: f64,
    pub convergence: Convergence,
    pub design: DesignEcho,
    pub n_obs: usize,
    pub covariate_means: Vec<f64>,
    pub warnings: Vec<String>,
}

impl ModelFile {
    pub fn from_model(model: &FittedModel) -> Self {
        let spec = &model.spec;
        Self {
            parameter_names: model.parameter_names(),
            estimates: model.params.to_vec(),
            vcov: model.vcov.transpose().as_slice().to_vec(),
            loglik: model.loglik,
            convergence: Convergence {
                converged: model.converged,
                iterations: model.iterations,
                gradient_norm: model.gradient_norm,
            },
            design: DesignEcho {
                levels: model.params.levels(),
                group_levels: spec.group_levels().to_vec(),
                reference: spec.reference_label().to_string(),
                covariate_names: spec.covariate_names().to_vec(),
            },
            n_obs: model.n_obs,
            covariate_means: model.covariate_means.clone(),
            warnings: model.warnings.clone(),
        }
    }

    pub fn to_model(&self) -> Result<FittedModel> {
        let spec = self.design.spec()?;
        let layout = ParamLayout::new(spec.x_dimension(), self.design.levels);
        let dim = layout.dim();
        if self.estimates.len() != dim || self.vcov.len() != dim * dim {
            return Err(Error::Usage(format!(
                "model file has {} estimates and {} covariance entries, expected {dim} and {}",
                self.estimates.len(),
                self.vcov.len(),
                dim * dim
            )));
        }
        let params = ModelParams::from_slice(layout, &self.estimates)?;
        Ok(FittedModel {
            params,
            vcov: DMatrix::from_row_slice(dim, dim, &self.vcov),
            loglik: self.loglik,
            iterations: self.convergence.iterations,
            converged: self.convergence.converged,
            gradient_norm: self.convergence.gradient_norm,
            spec,
            n_obs: self.n_obs,
            covariate_means: self.covariate_means.clone(),
            warnings: self.warnings.clone(),
            loglik_path: Vec::new(),
        })
    }
}

/// Evaluation point with group by label and covariates by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileEcho {
    pub group: String,
    pub covariates: BTreeMap<String, f64>,
}

impl ProfileEcho {
    pub fn new(spec: &DesignSpec, profile: &CovariateProfile) -> Self {
        Self {
            group: spec.group_levels()[profile.group].clone(),
            covariates: spec.covariate_names().iter().cloned().zip(profile.covariates.iter().copied()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucReport {
    pub auc: f64,
    pub var: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub level: f64,
    pub truncated: bool,
    pub profile: ProfileEcho,
}

impl AucReport {
    pub fn new(spec: &DesignSpec, s: &AucSummary) -> Self {
        Self {
            auc: s.auc,
            var: s.variance,
            ci_lower: s.ci_lower,
            ci_upper: s.ci_upper,
            level: s.level,
            truncated: s.truncated,
            profile: ProfileEcho::new(spec, &s.profile),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricEcho {
    Auc,
    RocAt { t: f64 },
    RocCurve,
}

impl From<Metric> for MetricEcho {
    fn from(m: Metric) -> Self {
        match m {
            Metric::Auc => MetricEcho::Auc,
            Metric::RocAt(t) => MetricEcho::RocAt { t },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastEcho {
    pub reference: String,
    pub groups: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Values {
    Scalar(f64),
    Vector(Vec<f64>),
}

/// Test report for scalar and curve modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReportFile {
    pub metric: MetricEcho,
    pub statistic: Values,
    pub df: usize,
    pub p_value: Values,
    pub alpha: f64,
    pub critical_value: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reject: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub regions: Option<Vec<RegionEcho>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub crossings: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lambda: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lambda_c: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub var_lambda_c: Option<Vec<Vec<f64>>>,
    pub contrast: ContrastEcho,
    pub profile: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionEcho {
    pub from: f64,
    pub to: f64,
    pub reject: bool,
}

impl From<Region> for RegionEcho {
    fn from(r: Region) -> Self {
        Self { from: r.from, to: r.to, reject: r.reject }
    }
}

fn contrast_echo(spec: &DesignSpec) -> ContrastEcho {
    let k = ordroc_core::ContrastMatrix::for_spec(spec).to_matrix();
    ContrastEcho {
        reference: spec.reference_label().to_string(),
        groups: spec.group_levels().to_vec(),
        matrix: rows_of(&k),
    }
}

fn profile_map(spec: &DesignSpec, covariates: &[f64]) -> BTreeMap<String, f64> {
    spec.covariate_names().iter().cloned().zip(covariates.iter().copied()).collect()
}

impl TestReportFile {
    pub fn scalar(spec: &DesignSpec, covariates: &[f64], r: &TestReport) -> Self {
        Self {
            metric: r.metric.into(),
            statistic: Values::Scalar(r.statistic),
            df: r.df,
            p_value: Values::Scalar(r.p_value),
            alpha: r.alpha,
            critical_value: r.critical_value,
            reject: Some(r.reject),
            grid: None,
            regions: None,
            crossings: None,
            lambda: Some(r.lambda.clone()),
            lambda_c: Some(r.lambda_c.clone()),
            var_lambda_c: Some(rows_of(&r.var_lambda_c)),
            contrast: contrast_echo(spec),
            profile: profile_map(spec, covariates),
        }
    }

    pub fn curve(spec: &DesignSpec, covariates: &[f64], r: &CurveTestReport) -> Self {
        Self {
            metric: MetricEcho::RocCurve,
            statistic: Values::Vector(r.statistic.clone()),
            df: r.df,
            p_value: Values::Vector(r.p_value.clone()),
            alpha: r.alpha,
            critical_value: r.critical_value,
            reject: None,
            grid: Some(r.grid.clone()),
            regions: Some(r.regions.iter().copied().map(RegionEcho::from).collect()),
            crossings: Some(r.crossings.clone()),
            lambda: None,
            lambda_c: None,
            var_lambda_c: None,
            contrast: contrast_echo(spec),
            profile: profile_map(spec, covariates),
        }
    }
}

fn flush(w: csv::Writer<impl Write>) -> Result<()> {
    w.into_inner().map_err(|e| Error::io("<csv output>", e.into_error()))?.flush().map_err(|e| Error::io("<csv output>", e))
}

/// Columns `t,roc,var,lower,upper`.
pub fn write_roc_csv(writer: impl Write, s: &RocSummary) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "roc", "var", "lower", "upper"])?;
    for i in 0..s.grid.len() {
        w.write_record(&[s.grid[i], s.roc[i], s.variance[i], s.band_lower[i], s.band_upper[i]].map(|v| v.to_string()))?;
    }
    flush(w)
}

/// Columns `t,psi,p_value,critical,reject`.
pub fn write_curve_csv(writer: impl Write, r: &CurveTestReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "psi", "p_value", "critical", "reject"])?;
    for i in 0..r.grid.len() {
        w.write_record([
            r.grid[i].to_string(),
            r.statistic[i].to_string(),
            r.p_value[i].to_string(),
            r.critical_value.to_string(),
            r.reject[i].to_string(),
        ])?;
    }
    flush(w)
}

fn metric_label(m: Metric) -> String {
    match m {
        Metric::Auc => "auc".into(),
        Metric::RocAt(t) => format!("roc@{t}"),
    }
}

/// Columns `pair,metric,delta,var,lower,upper,significant`; `delta` is
/// first minus second.
pub fn write_pairwise_csv(writer: impl Write, r: &PairwiseReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["pair", "metric", "delta", "var", "lower", "upper", "significant"])?;
    for pair in &r.pairs {
        let label = format!("{}-{}", pair.first_label, pair.second_label);
        for pt in &pair.points {
            w.write_record([
                label.clone(),
                metric_label(pt.metric),
                pt.delta.to_string(),
                pt.variance.to_string(),
                pt.ci_lower.to_string(),
                pt.ci_upper.to_string(),
                pt.significant.to_string(),
            ])?;
        }
    }
    flush(w)
}

/// One row of a minimum sample size table.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSizeRow {
    pub label: String,
    pub cells: Vec<std::result::Result<SampleSizeResult, String>>,
}

/// Rows labelled by `G` or ratio; columns in `headers` order. Failed cells
/// are written as `NA`.
pub fn write_sample_size_csv(writer: impl Write, row_header: &str, headers: &[String], rows: &[SampleSizeRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut head = vec![row_header.to_string()];
    head.extend(headers.iter().cloned());
    w.write_record(&head)?;
    for row in rows {
        let mut rec = vec![row.label.clone()];
        rec.extend(row.cells.iter().map(|c| match c {
            Ok(r) => r.k_min.to_string(),
            Err(_) => "NA".to_string(),
        }));
        w.write_record(&rec)?;
    }
    flush(w)
}
