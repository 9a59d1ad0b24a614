//! Chi-square test of equal accuracy across groups and post hoc pairwise
//! differences.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::chisq;
use crate::data::{CovariateProfile, DesignSpec};
use crate::error::{Error, Result};
use crate::fit::FittedModel;
use crate::params::ModelParams;
use crate::roc::{self, quadratic_form};

/// Largest condition number of `Var(Lambda_C)` accepted as invertible.
pub const MAX_CONDITION: f64 = 1e12;

/// Crossing points are located to this width in `t`.
pub const CROSSING_TOLERANCE: f64 = 1e-4;

/// Accuracy summary compared across groups.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    RocAt(f64),
    Auc,
}

/// `K = (I_{G-1}, -1_{G-1})` up to column order: one row per non-reference
/// group, `+1` in its column and `-1` in the reference column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContrastMatrix {
    groups: usize,
    reference: usize,
}

impl ContrastMatrix {
    pub fn new(groups: usize, reference: usize) -> Result<Self> {
        if groups < 2 || reference >= groups {
            return Err(Error::InvalidInput(alloc::format!(
                "contrast needs at least two groups and a valid reference, got G={groups}, reference={reference}"
            )));
        }
        Ok(Self { groups, reference })
    }

    pub fn for_spec(spec: &DesignSpec) -> Self {
        Self { groups: spec.n_groups(), reference: spec.reference() }
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn reference(&self) -> usize {
        self.reference
    }

    pub fn rows(&self) -> usize {
        self.groups - 1
    }

    fn others(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.groups).filter(move |&g| g != self.reference)
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let mut k = DMatrix::zeros(self.rows(), self.groups);
        for (i, g) in self.others().enumerate() {
            k[(i, g)] = 1.0;
            k[(i, self.reference)] = -1.0;
        }
        k
    }

    /// `K v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.others().map(|g| v[g] - v[self.reference]).collect()
    }

    /// `K A K'` for a symmetric `G x G` matrix.
    pub fn sandwich(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        let r = self.reference;
        let idx: Vec<usize> = self.others().collect();
        DMatrix::from_fn(idx.len(), idx.len(), |i, j| {
            let (g, h) = (idx[i], idx[j]);
            a[(g, h)] - a[(g, r)] - a[(r, h)] + a[(r, r)]
        })
    }
}

fn check_profiles(spec: &DesignSpec, profiles: &[CovariateProfile]) -> Result<()> {
    if profiles.len() != spec.n_groups() {
        return Err(Error::InvalidInput(alloc::format!(
            "expected one profile per group ({}), got {}",
            spec.n_groups(),
            profiles.len()
        )));
    }
    for (g, p) in profiles.iter().enumerate() {
        if p.group != g {
            return Err(Error::InvalidInput("profiles must be listed in group order".into()));
        }
        if p.covariates != profiles[0].covariates {
            return Err(Error::InvalidInput("profiles must share the continuous covariate values".into()));
        }
    }
    Ok(())
}

fn metric_value(params: &ModelParams, x: &[f64], metric: Metric) -> Result<(f64, Vec<f64>)> {
    match metric {
        Metric::RocAt(t) => Ok((roc::roc_at(params, x, t)?, roc::roc_jacobian(params, x, t)?)),
        Metric::Auc => Ok((roc::auc_at(params, x)?, roc::auc_jacobian(params, x)?)),
    }
}

/// Stacked group estimates `Lambda` and their Jacobian rows `F` at `params`.
pub fn lambda_from_params(
    params: &ModelParams,
    spec: &DesignSpec,
    profiles: &[CovariateProfile],
    metric: Metric,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    check_profiles(spec, profiles)?;
    let dim = params.layout().dim();
    let mut lambda = Vec::with_capacity(profiles.len());
    let mut f = DMatrix::zeros(profiles.len(), dim);
    for (g, profile) in profiles.iter().enumerate() {
        let x = spec.encode_profile(profile)?;
        let (v, jac) = metric_value(params, &x, metric)?;
        lambda.push(v);
        f.row_mut(g).copy_from(&DVector::from_vec(jac).transpose());
    }
    Ok((lambda, f))
}

pub fn lambda_vector(model: &FittedModel, profiles: &[CovariateProfile], metric: Metric) -> Result<(Vec<f64>, DMatrix<f64>)> {
    lambda_from_params(&model.params, &model.spec, profiles, metric)
}

/// `Lambda_C`, `Var(Lambda_C) = K F Sigma F' K'` and the quadratic form
/// `Lambda_C Var^-1 Lambda_C'`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastForm {
    pub lambda_c: Vec<f64>,
    pub var_lambda_c: DMatrix<f64>,
    pub statistic: f64,
}

pub fn contrast_form(lambda: &[f64], f: &DMatrix<f64>, sigma: &DMatrix<f64>, contrast: &ContrastMatrix) -> Result<ContrastForm> {
    if lambda.len() != contrast.groups() || f.nrows() != contrast.groups() {
        return Err(Error::ArityMismatch { expected: contrast.groups(), found: lambda.len() });
    }
    let group_cov = f * sigma * f.transpose();
    let mut var = contrast.sandwich(&group_cov);
    var = 0.5 * (&var + var.transpose());
    let lambda_c = contrast.apply(lambda);
    let eig = var.clone().symmetric_eigen().eigenvalues;
    let max = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = eig.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularContrast { condition });
    }
    let chol = var.clone().cholesky().ok_or(Error::SingularContrast { condition })?;
    let lc = DVector::from_column_slice(&lambda_c);
    let solved = chol.solve(&lc);
    let statistic = lc.dot(&solved).max(0.0);
    Ok(ContrastForm { lambda_c, var_lambda_c: var, statistic })
}

/// Scalar homogeneity test at one metric.
#[derive(Debug, Clone, PartialEq)]
pub struct TestReport {
    pub metric: Metric,
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub alpha: f64,
    pub critical_value: f64,
    pub reject: bool,
    pub lambda: Vec<f64>,
    pub lambda_c: Vec<f64>,
    pub var_lambda_c: DMatrix<f64>,
    pub reference: usize,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(alloc::format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

pub fn test_statistic(
    metric: Metric,
    lambda: &[f64],
    f: &DMatrix<f64>,
    vcov: &DMatrix<f64>,
    contrast: &ContrastMatrix,
    alpha: f64,
) -> Result<TestReport> {
    check_alpha(alpha)?;
    let form = contrast_form(lambda, f, vcov, contrast)?;
    let df = contrast.rows();
    let critical_value = chisq::critical_value(alpha, df as f64);
    Ok(TestReport {
        metric,
        statistic: form.statistic,
        df,
        p_value: chisq::sf(form.statistic, df as f64),
        alpha,
        critical_value,
        reject: form.statistic > critical_value,
        lambda: lambda.to_vec(),
        lambda_c: form.lambda_c,
        var_lambda_c: form.var_lambda_c,
        reference: contrast.reference(),
    })
}

/// Homogeneity test of a fitted model at one metric.
pub fn homogeneity_test(model: &FittedModel, profiles: &[CovariateProfile], metric: Metric, alpha: f64) -> Result<TestReport> {
    let (lambda, f) = lambda_vector(model, profiles, metric)?;
    test_statistic(metric, &lambda, &f, &model.vcov, &ContrastMatrix::for_spec(&model.spec), alpha)
}

/// Maximal FPR interval sharing one decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub from: f64,
    pub to: f64,
    pub reject: bool,
}

/// Pointwise test over an FPR grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveTestReport {
    pub grid: Vec<f64>,
    pub statistic: Vec<f64>,
    pub p_value: Vec<f64>,
    pub reject: Vec<bool>,
    pub df: usize,
    pub alpha: f64,
    pub critical_value: f64,
    /// FPR values where the statistic crosses the critical value.
    pub crossings: Vec<f64>,
    /// Regions bounded by the grid ends and the crossings.
    pub regions: Vec<Region>,
}

pub fn roc_curve_test(model: &FittedModel, profiles: &[CovariateProfile], grid: &[f64], alpha: f64) -> Result<CurveTestReport> {
    check_alpha(alpha)?;
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty FPR grid".into()));
    }
    let contrast = ContrastMatrix::for_spec(&model.spec);
    let df = contrast.rows();
    let critical_value = chisq::critical_value(alpha, df as f64);
    let psi = |t: f64| -> Result<f64> {
        let (lambda, f) = lambda_vector(model, profiles, Metric::RocAt(t))?;
        Ok(contrast_form(&lambda, &f, &model.vcov, &contrast)?.statistic)
    };
    let mut statistic = Vec::with_capacity(grid.len());
    for &t in grid {
        statistic.push(psi(t)?);
    }
    let reject: Vec<bool> = statistic.iter().map(|&s| s > critical_value).collect();
    let mut crossings = Vec::new();
    let mut regions = Vec::new();
    let mut start = grid[0];
    for i in 1..grid.len() {
        if reject[i] != reject[i - 1] {
            let (mut lo, mut hi) = (grid[i - 1], grid[i]);
            while hi - lo > CROSSING_TOLERANCE {
                let mid = 0.5 * (lo + hi);
                if (psi(mid)? > critical_value) == reject[i - 1] {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let cross = 0.5 * (lo + hi);
            crossings.push(cross);
            regions.push(Region { from: start, to: cross, reject: reject[i - 1] });
            start = cross;
        }
    }
    regions.push(Region { from: start, to: grid[grid.len() - 1], reject: reject[grid.len() - 1] });
    Ok(CurveTestReport {
        grid: grid.to_vec(),
        p_value: statistic.iter().map(|&s| chisq::sf(s, df as f64)).collect(),
        statistic,
        reject,
        df,
        alpha,
        critical_value,
        crossings,
        regions,
    })
}

/// One metric of a pairwise comparison, `first - second`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairPoint {
    pub metric: Metric,
    pub delta: f64,
    pub variance: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    /// Interval excludes zero.
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairComparison {
    pub first: usize,
    pub second: usize,
    pub first_label: String,
    pub second_label: String,
    pub points: Vec<PairPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseReport {
    pub level: f64,
    pub bonferroni: bool,
    /// Normal critical value used for every interval.
    pub z: f64,
    pub pairs: Vec<PairComparison>,
}

/// Difference `first - second` of one metric with its delta-method interval.
pub fn pair_point(lambda: &[f64], f: &DMatrix<f64>, vcov: &DMatrix<f64>, first: usize, second: usize, metric: Metric, z: f64) -> PairPoint {
    let diff: Vec<f64> = (0..f.ncols()).map(|k| f[(first, k)] - f[(second, k)]).collect();
    let delta = lambda[first] - lambda[second];
    let variance = quadratic_form(&diff, vcov).max(0.0);
    let half = z * libm::sqrt(variance);
    PairPoint {
        metric,
        delta,
        variance,
        ci_lower: delta - half,
        ci_upper: delta + half,
        significant: delta - half > 0.0 || delta + half < 0.0,
    }
}

/// All `G(G-1)/2` pairs `(g, h)` with `g < h`, in that order.
pub fn pairwise(
    model: &FittedModel,
    profiles: &[CovariateProfile],
    metrics: &[Metric],
    level: f64,
    bonferroni: bool,
) -> Result<PairwiseReport> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidInput(alloc::format!("confidence level must lie in (0, 1), got {level}")));
    }
    let g_count = model.spec.n_groups();
    let n_pairs = g_count * (g_count - 1) / 2;
    let effective = if bonferroni { 1.0 - (1.0 - level) / n_pairs as f64 } else { level };
    let z = roc::z_critical(effective);
    let mut stacked = Vec::with_capacity(metrics.len());
    for &m in metrics {
        stacked.push(lambda_vector(model, profiles, m)?);
    }
    let labels = model.spec.group_levels();
    let mut pairs = Vec::with_capacity(n_pairs);
    for first in 0..g_count {
        for second in first + 1..g_count {
            let points = metrics
                .iter()
                .zip(&stacked)
                .map(|(&m, (lambda, f))| pair_point(lambda, f, &model.vcov, first, second, m, z))
                .collect();
            pairs.push(PairComparison {
                first,
                second,
                first_label: labels[first].clone(),
                second_label: labels[second].clone(),
                points,
            });
        }
    }
    Ok(PairwiseReport { level, bonferroni, z, pairs })
}
