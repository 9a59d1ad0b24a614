//! Covariate-specific binormal ROC curves and AUCs implied by the model,
//! their gradients with respect to `gamma`, and delta-method intervals.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::data::CovariateProfile;
use crate::error::{Error, Result};
use crate::fit::FittedModel;
use crate::normal;
use crate::params::ModelParams;

/// Latent means and standard deviations of the two classes at one `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinormalParams {
    pub mu0: f64,
    pub mu1: f64,
    pub sigma0: f64,
    pub sigma1: f64,
}

impl BinormalParams {
    /// TPR at false positive rate `t`.
    pub fn roc(&self, t: f64) -> f64 {
        normal::cdf((self.mu1 - self.mu0) / self.sigma1 + self.sigma0 / self.sigma1 * normal::quantile(t))
    }

    pub fn auc(&self) -> f64 {
        normal::cdf((self.mu1 - self.mu0) / libm::hypot(self.sigma0, self.sigma1))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_arity(params: &ModelParams, x: &[f64]) -> Result<()> {
    if x.len() != params.p() {
        return Err(Error::ArityMismatch { expected: params.p(), found: x.len() });
    }
    Ok(())
}

/// Latent moments at the encoded covariate vector `x`.
pub fn binormal_from(params: &ModelParams, x: &[f64]) -> Result<BinormalParams> {
    check_arity(params, x)?;
    let a1x = dot(&params.alpha1, x);
    let a2x = dot(&params.alpha2, x);
    let b1x = dot(&params.beta1, x);
    let b2x = dot(&params.beta2, x);
    Ok(BinormalParams {
        mu0: a1x,
        mu1: params.alpha0 + a1x + a2x,
        sigma0: libm::exp(b1x),
        sigma1: libm::exp(params.beta0 + b1x + b2x),
    })
}

struct RocTerms {
    numer: f64,
    /// `exp(beta0 + beta1 x + beta2 x)`, the D = 1 standard deviation.
    sigma1: f64,
    /// `exp(beta0 + beta2 x)`, the ratio sigma1 / sigma0.
    ratio: f64,
}

fn roc_terms(params: &ModelParams, x: &[f64]) -> RocTerms {
    let b1x = dot(&params.beta1, x);
    let b2x = dot(&params.beta2, x);
    RocTerms {
        numer: params.alpha0 + dot(&params.alpha2, x),
        sigma1: libm::exp(params.beta0 + b1x + b2x),
        ratio: libm::exp(params.beta0 + b2x),
    }
}

fn check_fpr(t: f64) -> Result<()> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidInput(alloc::format!("false positive rate must lie in (0, 1), got {t}")));
    }
    Ok(())
}

/// `ROC(t) = Phi((alpha0 + alpha2 x) / exp(beta0 + beta1 x + beta2 x) + Phi^-1(t) / exp(beta0 + beta2 x))`.
pub fn roc_at(params: &ModelParams, x: &[f64], t: f64) -> Result<f64> {
    check_arity(params, x)?;
    check_fpr(t)?;
    let r = roc_terms(params, x);
    Ok(normal::cdf(r.numer / r.sigma1 + normal::quantile(t) / r.ratio))
}

/// `AUC = Phi((alpha0 + alpha2 x) / sqrt(exp(2(beta0 + beta1 x + beta2 x)) + exp(2 beta1 x)))`.
pub fn auc_at(params: &ModelParams, x: &[f64]) -> Result<f64> {
    check_arity(params, x)?;
    let r = roc_terms(params, x);
    let sigma0 = libm::exp(dot(&params.beta1, x));
    Ok(normal::cdf(r.numer / libm::hypot(r.sigma1, sigma0)))
}

/// Gradient of [`roc_at`] with respect to the flat parameter vector.
/// Threshold and `alpha1` entries are identically zero.
pub fn roc_jacobian(params: &ModelParams, x: &[f64], t: f64) -> Result<Vec<f64>> {
    check_arity(params, x)?;
    check_fpr(t)?;
    let layout = params.layout();
    let r = roc_terms(params, x);
    let q = normal::quantile(t);
    let mean_part = r.numer / r.sigma1;
    let slope_part = q / r.ratio;
    let dens = normal::pdf(mean_part + slope_part);
    let mut jac = alloc::vec![0.0; layout.dim()];
    jac[layout.alpha0()] = dens / r.sigma1;
    jac[layout.beta0()] = -dens * (mean_part + slope_part);
    for (j, &xj) in x.iter().enumerate() {
        jac[layout.alpha2(j)] = dens * xj / r.sigma1;
        jac[layout.beta1(j)] = -dens * xj * mean_part;
        jac[layout.beta2(j)] = -dens * xj * (mean_part + slope_part);
    }
    Ok(jac)
}

/// Gradient of [`auc_at`] with respect to the flat parameter vector.
pub fn auc_jacobian(params: &ModelParams, x: &[f64]) -> Result<Vec<f64>> {
    check_arity(params, x)?;
    let layout = params.layout();
    let r = roc_terms(params, x);
    let sigma0 = libm::exp(dot(&params.beta1, x));
    let s1sq = r.sigma1 * r.sigma1;
    let total = s1sq + sigma0 * sigma0;
    let root = libm::sqrt(total);
    let dens = normal::pdf(r.numer / root);
    // d(numer / root) / d(log sigma) terms
    let d_beta0 = -r.numer * s1sq / (total * root);
    let d_beta1 = -r.numer / root;
    let mut jac = alloc::vec![0.0; layout.dim()];
    jac[layout.alpha0()] = dens / root;
    jac[layout.beta0()] = dens * d_beta0;
    for (j, &xj) in x.iter().enumerate() {
        jac[layout.alpha2(j)] = dens * xj / root;
        jac[layout.beta1(j)] = dens * xj * d_beta1;
        jac[layout.beta2(j)] = dens * xj * d_beta0;
    }
    Ok(jac)
}

/// `J V J'` for a single gradient row.
pub fn quadratic_form(jac: &[f64], vcov: &DMatrix<f64>) -> f64 {
    let j = DVector::from_column_slice(jac);
    (j.transpose() * vcov * &j)[(0, 0)]
}

/// FPR grid of `n` equally spaced interior points `(i + 1/2) / n`.
pub fn default_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect()
}

/// Points in the default grid.
pub const DEFAULT_GRID_POINTS: usize = 512;

/// Two-sided standard normal critical value for confidence `level`.
pub fn z_critical(level: f64) -> f64 {
    normal::quantile(0.5 * (1.0 + level))
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidInput(alloc::format!("confidence level must lie in (0, 1), got {level}")));
    }
    Ok(())
}

fn check_vcov(vcov: &DMatrix<f64>) -> Result<()> {
    let eig = vcov.clone().symmetric_eigen().eigenvalues;
    let max = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = eig.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    if min < -1e-8 * max {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    Ok(())
}

/// Pointwise Wald band on the probability scale.
#[derive(Debug, Clone, PartialEq)]
pub struct RocSummary {
    pub profile: CovariateProfile,
    pub level: f64,
    pub grid: Vec<f64>,
    pub roc: Vec<f64>,
    /// One row per grid point.
    pub jacobian: DMatrix<f64>,
    pub variance: Vec<f64>,
    pub band_lower: Vec<f64>,
    pub band_upper: Vec<f64>,
    /// Any band limit clipped to `[0, 1]`.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AucSummary {
    pub profile: CovariateProfile,
    pub level: f64,
    pub auc: f64,
    pub jacobian: Vec<f64>,
    pub variance: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub truncated: bool,
}

fn wald(est: f64, var: f64, z: f64) -> (f64, f64, bool) {
    let half = z * libm::sqrt(var.max(0.0));
    let (lo, hi) = (est - half, est + half);
    let truncated = lo < 0.0 || hi > 1.0;
    (lo.max(0.0), hi.min(1.0), truncated)
}

pub fn roc_summary(model: &FittedModel, profile: &CovariateProfile, grid: &[f64], level: f64) -> Result<RocSummary> {
    check_level(level)?;
    check_vcov(&model.vcov)?;
    let x = model.spec.encode_profile(profile)?;
    let z = z_critical(level);
    let dim = model.layout().dim();
    let mut jacobian = DMatrix::zeros(grid.len(), dim);
    let (mut roc, mut variance, mut lower, mut upper) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut truncated = false;
    for (i, &t) in grid.iter().enumerate() {
        let est = roc_at(&model.params, &x, t)?;
        let jac = roc_jacobian(&model.params, &x, t)?;
        let var = quadratic_form(&jac, &model.vcov).max(0.0);
        let (lo, hi, tr) = wald(est, var, z);
        truncated |= tr;
        for (k, v) in jac.iter().enumerate() {
            jacobian[(i, k)] = *v;
        }
        roc.push(est);
        variance.push(var);
        lower.push(lo);
        upper.push(hi);
    }
    Ok(RocSummary {
        profile: profile.clone(),
        level,
        grid: grid.to_vec(),
        roc,
        jacobian,
        variance,
        band_lower: lower,
        band_upper: upper,
        truncated,
    })
}

pub fn auc_summary(model: &FittedModel, profile: &CovariateProfile, level: f64) -> Result<AucSummary> {
    check_level(level)?;
    check_vcov(&model.vcov)?;
    let x = model.spec.encode_profile(profile)?;
    let auc = auc_at(&model.params, &x)?;
    let jacobian = auc_jacobian(&model.params, &x)?;
    let variance = quadratic_form(&jacobian, &model.vcov).max(0.0);
    let (ci_lower, ci_upper, truncated) = wald(auc, variance, z_critical(level));
    Ok(AucSummary { profile: profile.clone(), level, auc, jacobian, variance, ci_lower, ci_upper, truncated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn zeros(p: usize) -> ModelParams {
        ModelParams::zeros(p, vec![-1.0, 0.0, 1.0]).unwrap()
    }

    /// Simulation-truth mapping at x = (x1 = 0.5) with a single group.
    fn sim_truth(psi: f64, phi: f64) -> (ModelParams, Vec<f64>) {
        let mut params = zeros(1);
        params.alpha0 = psi;
        params.alpha1 = vec![1.0];
        params.alpha2 = vec![1.0];
        params.beta0 = 0.5 * libm::log(phi);
        (params, vec![0.5])
    }

    #[test]
    fn zero_coefficients_give_chance() {
        let b = binormal_from(&zeros(2), &[0.3, 0.7]).unwrap();
        assert_eq!(b, BinormalParams { mu0: 0.0, mu1: 0.0, sigma0: 1.0, sigma1: 1.0 });
        assert!((roc_at(&zeros(2), &[0.3, 0.7], 0.25).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(auc_at(&zeros(2), &[0.3, 0.7]).unwrap(), 0.5);
    }

    #[test]
    fn location_only_shift_is_uninformative() {
        let mut params = zeros(1);
        params.alpha1 = vec![1.0];
        let b = binormal_from(&params, &[0.3]).unwrap();
        assert!((b.mu0 - 0.3).abs() < 1e-15 && (b.mu1 - 0.3).abs() < 1e-15);
        assert_eq!(auc_at(&params, &[0.3]).unwrap(), 0.5);
    }

    #[test]
    fn simulation_truth_moments_and_values() {
        let (params, x) = sim_truth(0.5, 1.5);
        let b = binormal_from(&params, &x).unwrap();
        assert!((b.mu1 - b.mu0 - 1.0).abs() < 1e-15);
        assert!((b.sigma1 - 1.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(b.sigma0, 1.0);
        // Phi(1/sqrt 1.5 + Phi^-1(0.3)/sqrt 1.5)
        let oracle = {
            use statrs::distribution::{ContinuousCDF, Normal};
            let n = Normal::new(0.0, 1.0).unwrap();
            n.cdf((1.0 + n.inverse_cdf(0.3)) / 1.5f64.sqrt())
        };
        let v = roc_at(&params, &x, 0.3).unwrap();
        assert!((v - oracle).abs() < 1e-14);
        assert!((v - 0.6511).abs() < 1e-4);
        assert!((auc_at(&params, &x).unwrap() - 0.736).abs() < 5e-4);
        assert!((b.roc(0.3) - v).abs() < 1e-15);
        assert!((b.auc() - auc_at(&params, &x).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn jacobian_zero_structure_and_null_auc_beta_terms() {
        let mut params = zeros(2);
        params.alpha1 = vec![0.4, -0.2];
        params.beta1 = vec![0.3, 0.1];
        params.beta2 = vec![-0.2, 0.2];
        params.alpha0 = 0.0;
        let x = [0.0, 0.5];
        let layout = params.layout();
        let ja = auc_jacobian(&params, &x).unwrap();
        let jr = roc_jacobian(&params, &x, 0.4).unwrap();
        for j in [&ja, &jr] {
            for l in 0..layout.levels - 1 {
                assert_eq!(j[layout.tau(l)], 0.0);
            }
            for k in 0..2 {
                assert_eq!(j[layout.alpha1(k)], 0.0);
            }
        }
        // alpha0 + alpha2 x = 0 makes every beta entry of the AUC gradient vanish
        assert_eq!(ja[layout.beta0()], 0.0);
        for k in 0..2 {
            assert_eq!(ja[layout.beta1(k)], 0.0);
            assert_eq!(ja[layout.beta2(k)], 0.0);
        }
    }

    #[test]
    fn corners() {
        let mut params = zeros(1);
        params.alpha0 = 0.5;
        let x = vec![0.2];
        assert!(roc_at(&params, &x, 1e-8).unwrap() < 1e-6);
        assert!(roc_at(&params, &x, 1.0 - 1e-8).unwrap() > 1.0 - 1e-6);
        assert!(roc_at(&params, &x, 0.0).is_err());
        assert!(roc_at(&params, &x, 1.0).is_err());
    }

    fn arb_params() -> impl Strategy<Value = (ModelParams, Vec<f64>)> {
        (
            prop::collection::vec(-1.0f64..1.0, 9),
            prop::collection::vec(-1.0f64..1.0, 2),
        )
            .prop_map(|(c, x)| {
                let params = ModelParams {
                    tau: vec![-1.0, 1.0],
                    alpha0: c[0],
                    alpha1: vec![c[1], c[2]],
                    alpha2: vec![c[3], c[4]],
                    beta0: 0.5 * c[5],
                    beta1: vec![0.5 * c[6], 0.5 * c[7]],
                    beta2: vec![0.5 * c[8], 0.3],
                };
                (params, x)
            })
    }

    proptest! {
        #[test]
        fn roc_nondecreasing_in_fpr((params, x) in arb_params(), a in 0.01f64..0.99, b in 0.01f64..0.99) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(roc_at(&params, &x, lo).unwrap() <= roc_at(&params, &x, hi).unwrap());
        }

        #[test]
        fn equal_variance_probit_slope_is_one((params, x) in arb_params()) {
            let mut params = params;
            params.beta0 = 0.0;
            params.beta2 = vec![0.0, 0.0];
            let base = normal::quantile(roc_at(&params, &x, 0.5).unwrap());
            for t in [0.05, 0.2, 0.7, 0.95] {
                let d = normal::quantile(roc_at(&params, &x, t).unwrap()) - normal::quantile(t);
                prop_assert!((d - base).abs() < 1e-10);
            }
        }
    }

    fn central_difference(f: impl Fn(&[f64]) -> f64, v: &[f64], k: usize) -> f64 {
        let h = f64::EPSILON.cbrt() * v[k].abs().max(1.0);
        let mut up = v.to_vec();
        let mut dn = v.to_vec();
        up[k] += h;
        dn[k] -= h;
        (f(&up) - f(&dn)) / (2.0 * h)
    }

    fn gradient_error(analytic: &[f64], numeric: &[f64]) -> f64 {
        let diff: f64 = analytic.iter().zip(numeric).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let scale: f64 = numeric.iter().map(|b| b * b).sum::<f64>().sqrt().max(1e-3);
        diff / scale
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn jacobians_match_finite_differences((params, x) in arb_params(), t in 0.05f64..0.95) {
            let layout = params.layout();
            let v = params.to_vec();
            let eval_roc = |w: &[f64]| roc_at(&ModelParams::from_slice(layout, w).unwrap(), &x, t).unwrap();
            let eval_auc = |w: &[f64]| auc_at(&ModelParams::from_slice(layout, w).unwrap(), &x).unwrap();
            let num_roc: Vec<f64> = (0..v.len()).map(|k| central_difference(eval_roc, &v, k)).collect();
            let num_auc: Vec<f64> = (0..v.len()).map(|k| central_difference(eval_auc, &v, k)).collect();
            prop_assert!(gradient_error(&roc_jacobian(&params, &x, t).unwrap(), &num_roc) < 1e-7);
            prop_assert!(gradient_error(&auc_jacobian(&params, &x).unwrap(), &num_auc) < 1e-7);
        }

        #[test]
        fn auc_is_area_under_roc((params, x) in arb_params()) {
            let n = 10_000;
            let mut area = 0.0;
            let mut prev = 0.0;
            for i in 1..=n {
                let t = i as f64 / n as f64;
                let cur = if i == n { 1.0 } else { roc_at(&params, &x, t).unwrap() };
                area += 0.5 * (prev + cur) / n as f64;
                prev = cur;
            }
            prop_assert!((area - auc_at(&params, &x).unwrap()).abs() < 1e-4);
        }
    }
}
