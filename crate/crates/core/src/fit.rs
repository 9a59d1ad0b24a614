//! Maximum likelihood fitting by damped Newton-Raphson.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::data::{build_design, Design, DesignSpec, ObservationTable};
use crate::error::{Error, Result};
use crate::likelihood::{self, derivatives};
use crate::normal;
use crate::params::{ModelParams, ParamLayout};

/// Optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Max-norm of the score at which the fit counts as converged.
    pub gradient_tolerance: f64,
    /// Relative change of the log likelihood over the last step.
    pub loglik_tolerance: f64,
    /// Sufficient-increase constant of the backtracking line search.
    pub armijo: f64,
    pub max_halvings: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            gradient_tolerance: 1e-8,
            loglik_tolerance: 1e-12,
            armijo: 1e-4,
            max_halvings: 50,
        }
    }
}

/// A fitted model with its observed-information covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub params: ModelParams,
    /// Estimated `Var(gamma_hat)`, the inverse of the negated Hessian.
    pub vcov: DMatrix<f64>,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Max-norm of the score at the returned estimate.
    pub gradient_norm: f64,
    pub spec: DesignSpec,
    pub n_obs: usize,
    /// Sample mean of each continuous covariate; the default comparison point.
    pub covariate_means: Vec<f64>,
    pub warnings: Vec<String>,
    /// Log likelihood after every accepted step, starting value first.
    pub loglik_path: Vec<f64>,
}

impl FittedModel {
    pub fn layout(&self) -> ParamLayout {
        self.params.layout()
    }

    pub fn parameter_names(&self) -> Vec<String> {
        self.layout().names(&self.spec.x_names())
    }
}

// Thresholds are optimized as tau_1 = t_1, tau_l = tau_{l-1} + exp(t_l).
fn tau_to_theta(tau: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(tau.len());
    out.push(tau[0]);
    for w in tau.windows(2) {
        out.push(libm::log(w[1] - w[0]));
    }
    out
}

fn theta_to_tau(theta: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(theta.len());
    let mut acc = theta[0];
    out.push(acc);
    for t in &theta[1..] {
        acc += libm::exp(*t);
        out.push(acc);
    }
    out
}

fn params_from_theta(layout: ParamLayout, theta: &[f64]) -> Option<ModelParams> {
    let mut v = theta.to_vec();
    let t0 = layout.tau(0);
    let tau = theta_to_tau(&theta[t0..]);
    v[t0..].copy_from_slice(&tau);
    ModelParams::from_slice(layout, &v).ok()
}

fn theta_from_params(params: &ModelParams) -> Vec<f64> {
    let layout = params.layout();
    let mut v = params.to_vec();
    let t0 = layout.tau(0);
    let th = tau_to_theta(&params.tau);
    v[t0..].copy_from_slice(&th);
    v
}

/// Score and Hessian mapped from the `tau` scale to the optimization scale.
fn to_theta_scale(layout: ParamLayout, theta: &[f64], score: &DVector<f64>, hess: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let dim = layout.dim();
    let t0 = layout.tau(0);
    let nt = layout.levels - 1;
    let mut jac = DMatrix::<f64>::identity(dim, dim);
    for l in 0..nt {
        for k in 0..=l {
            jac[(t0 + l, t0 + k)] = if k == 0 { 1.0 } else { libm::exp(theta[t0 + k]) };
        }
    }
    let g = jac.transpose() * score;
    let mut h = jac.transpose() * hess * &jac;
    for k in 1..nt {
        let tail: f64 = (k..nt).map(|l| score[t0 + l]).sum();
        h[(t0 + k, t0 + k)] += tail * libm::exp(theta[t0 + k]);
    }
    (g, h)
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Thresholds from the probit transform of pooled cumulative category
/// frequencies; every coefficient starts at zero.
pub fn starting_values(design: &Design) -> ModelParams {
    let levels = design.levels();
    let mut counts = alloc::vec![0usize; levels];
    for r in design.iter() {
        counts[r.category] += 1;
    }
    let n = design.len().max(1) as f64;
    let mut tau = Vec::with_capacity(levels - 1);
    let mut cum = 0usize;
    let lo = 0.5 / n;
    for &c in &counts[..levels - 1] {
        cum += c;
        let prob = (cum as f64 / n).clamp(lo, 1.0 - lo);
        let mut t = normal::quantile(prob);
        if let Some(&prev) = tau.last() {
            if t <= prev + 1e-3 {
                t = prev + 0.1;
            }
        }
        tau.push(t);
    }
    ModelParams::zeros(design.p(), tau).expect("ordered by construction")
}

/// Fits the model to `table` coded by `spec`.
pub fn fit(table: &ObservationTable, spec: &DesignSpec, options: &FitOptions) -> Result<FittedModel> {
    table.check_fit_preconditions()?;
    let design = build_design(table, spec)?;
    let mut model = fit_design(&design, options)?;
    model.covariate_means = table.covariate_means();

    let counts = table.category_counts();
    let first = counts.iter().position(|&c| c > 0).unwrap_or(0);
    let last = counts.iter().rposition(|&c| c > 0).unwrap_or(0);
    let empty: Vec<String> = (first..=last)
        .filter(|&l| counts[l] == 0)
        .map(|l| format!("{}", l + 1))
        .collect();
    if !empty.is_empty() {
        model.warnings.push(format!(
            "interior score categories with no observations (thresholds weakly identified): {}",
            empty.join(", ")
        ));
    }
    for (g, (n0, n1)) in table.status_counts().into_iter().enumerate() {
        if n0 < 5 || n1 < 5 {
            model.warnings.push(format!(
                "group `{}` has only {n0} rows with D=0 and {n1} with D=1",
                table.group_levels()[g]
            ));
        }
    }
    Ok(model)
}

/// Fits on an already-built design view.
pub fn fit_design(design: &Design, options: &FitOptions) -> Result<FittedModel> {
    let start = starting_values(design);
    let layout = start.layout();
    let mut theta = theta_from_params(&start);
    let mut params = start;
    let mut der = derivatives(design, &params, true)?;
    let mut path = alloc::vec![der.loglik];
    let mut rel_change = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        let grad_norm = max_abs(&der.score);
        if grad_norm <= options.gradient_tolerance && rel_change <= options.loglik_tolerance {
            converged = true;
            break;
        }
        let hess = der.hessian.as_ref().expect("requested");
        let (g, h) = to_theta_scale(layout, &theta, &der.score, hess);
        let Some(step) = line_search(design, layout, &theta, &g, &h, der.loglik, grad_norm, options) else {
            converged = grad_norm <= options.gradient_tolerance;
            break;
        };
        iterations += 1;
        theta = step.theta;
        params = step.params;
        rel_change = (step.loglik - der.loglik).abs() / der.loglik.abs().max(1.0);
        der = derivatives(design, &params, true)?;
        path.push(der.loglik);
    }
    if !converged && iterations >= options.max_iterations {
        converged = max_abs(&der.score) <= options.gradient_tolerance && rel_change <= options.loglik_tolerance;
    }

    let names = layout.names(&design.spec().x_names());
    let hess = der.hessian.take().expect("requested");
    let vcov = invert_information(-hess, &names)?;
    Ok(FittedModel {
        gradient_norm: max_abs(&der.score),
        params,
        vcov,
        loglik: der.loglik,
        iterations,
        converged,
        spec: design.spec().clone(),
        n_obs: design.len(),
        covariate_means: alloc::vec![0.0; design.spec().covariate_names().len()],
        warnings: Vec::new(),
        loglik_path: path,
    })
}

struct Step {
    theta: Vec<f64>,
    params: ModelParams,
    loglik: f64,
}

/// Newton direction on the (possibly shifted) negated Hessian, then
/// backtracking by halving until the Armijo condition holds.
#[allow(clippy::too_many_arguments)]
fn line_search(
    design: &Design,
    layout: ParamLayout,
    theta: &[f64],
    g: &DVector<f64>,
    h: &DMatrix<f64>,
    loglik: f64,
    grad_norm: f64,
    options: &FitOptions,
) -> Option<Step> {
    let dim = layout.dim();
    let neg_h: DMatrix<f64> = -h;
    let diag_scale = (0..dim).map(|i| neg_h[(i, i)].abs()).fold(0.0f64, f64::max).max(1.0);
    let mut shift = 0.0;
    let direction = loop {
        let mut m = neg_h.clone();
        for i in 0..dim {
            m[(i, i)] += shift;
        }
        if let Some(ch) = m.cholesky() {
            break ch.solve(g);
        }
        // not negative definite: blend toward a scaled gradient step
        shift = if shift == 0.0 { 1e-8 * diag_scale } else { shift * 10.0 };
        if shift > 1e12 * diag_scale {
            return None;
        }
    };
    let slope = g.dot(&direction);
    if !(slope > 0.0) {
        return None;
    }
    let mut t = 1.0;
    for _ in 0..=options.max_halvings {
        let cand: Vec<f64> = theta.iter().zip(direction.iter()).map(|(a, d)| a + t * d).collect();
        if let Some(params) = params_from_theta(layout, &cand) {
            if let Ok(ll) = likelihood::log_likelihood(design, &params) {
                if ll >= loglik + options.armijo * t * slope {
                    return Some(Step { theta: cand, params, loglik: ll });
                }
                // Near the optimum the predicted gain is below the rounding of
                // the summed likelihood; a full step that stays within that
                // rounding and shrinks the score is taken.
                if t == 1.0 && ll >= loglik - 1e-12 * loglik.abs().max(1.0) {
                    if let Ok(s) = likelihood::score(design, &params) {
                        if max_abs(&s) < grad_norm {
                            return Some(Step { theta: cand, params, loglik: ll });
                        }
                    }
                }
            }
        }
        t *= 0.5;
    }
    None
}

pub(crate) fn invert_information(info: DMatrix<f64>, names: &[String]) -> Result<DMatrix<f64>> {
    if let Some(ch) = info.clone().cholesky() {
        let inv = ch.inverse();
        return Ok(0.5 * (&inv + inv.transpose()));
    }
    let eig = info.symmetric_eigen();
    let (imin, &min_eigenvalue) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let v = eig.eigenvectors.column(imin);
    let mut loadings: Vec<(String, f64)> = names.iter().cloned().zip(v.iter().copied()).collect();
    loadings.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
    loadings.retain(|(_, w)| w.abs() > 0.1);
    Err(Error::SingularInformation { min_eigenvalue, directions: loadings })
}

/// Inverse of the negated Hessian of the log likelihood at `params`.
pub fn vcov_at(params: &ModelParams, design: &Design) -> Result<DMatrix<f64>> {
    let h = likelihood::hessian(design, params)?;
    let names = params.layout().names(&design.spec().x_names());
    invert_information(-h, &names)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{encode_design, Observation};
    use alloc::string::ToString;
    use alloc::vec;

    #[test]
    fn theta_round_trip() {
        let tau = vec![-1.2, -0.3, 0.4, 2.0];
        let back = theta_to_tau(&tau_to_theta(&tau));
        for (a, b) in tau.iter().zip(&back) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    fn binary_design(n1: usize, n2: usize) -> Design {
        let mut rows = Vec::new();
        for _ in 0..n1 {
            rows.push(Observation { score: 1, status: false, group: 1, covariates: vec![] });
        }
        for _ in 0..n2 {
            rows.push(Observation { score: 2, status: false, group: 1, covariates: vec![] });
        }
        let t = ObservationTable::new(2, vec!["a".to_string(), "b".to_string()], vec![], rows).unwrap();
        encode_design(&t, &DesignSpec::for_table(&t)).unwrap()
    }

    #[test]
    fn binomial_probit_variance_closed_form() {
        // p = 1 but the dummy column is identically zero; only tau is informed
        let d = binary_design(30, 70);
        let kappa = normal::quantile(0.3);
        let params = ModelParams::zeros(1, vec![kappa]).unwrap();
        let h = likelihood::hessian(&d, &params).unwrap();
        let tau_idx = params.layout().tau(0);
        let n = 100.0;
        let phi = normal::pdf(kappa);
        let cdf = normal::cdf(kappa);
        let info = n * phi * phi / (cdf * (1.0 - cdf));
        assert!(((-h[(tau_idx, tau_idx)]) - info).abs() < 1e-9 * info);
        // score vanishes at the MLE
        let g = likelihood::score(&d, &params).unwrap();
        assert!(g[tau_idx].abs() < 1e-10);
    }
}
