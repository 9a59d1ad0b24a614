//! Noncentrality and minimum sample size for the homogeneity test under a
//! specified true model.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::chisq;
use crate::data::{CovariateProfile, DesignSpec};
use crate::error::{Error, Result};
use crate::fit::invert_information;
use crate::homogeneity::{contrast_form, lambda_from_params, ContrastMatrix, Metric};
use crate::likelihood::add_observation_information;
use crate::normal;
use crate::params::ModelParams;
use crate::quadrature::GaussLegendre;

/// Nodes used to integrate `X1` over `[0, 1]`.
pub const QUADRATURE_NODES: usize = 32;

/// Default upper limit of the sample-size scan.
pub const DEFAULT_CAP: u64 = 1_000_000;

/// Name of the continuous covariate of the simulation model.
pub const X1: &str = "x1";

/// Group offsets `a_g` of the four simulation settings.
pub fn setting_offsets(setting: u8, groups: usize) -> Result<Vec<f64>> {
    if groups < 2 {
        return Err(Error::InvalidInput("need at least two groups".into()));
    }
    let mut a = alloc::vec![0.0; groups];
    match setting {
        1 => {}
        2 => a[groups - 1] = 0.5,
        3 => {
            a[groups - 2] = 0.5;
            a[groups - 1] = 0.5;
        }
        4 => a.iter_mut().enumerate().for_each(|(g, v)| *v = 0.2 * g as f64),
        _ => return Err(Error::InvalidInput(alloc::format!("unknown setting {setting}, expected 1 to 4"))),
    }
    Ok(a)
}

/// Latent data-generating model:
/// `T | X1, D=0 ~ N(1 + X1, 1)` and `T | X1, D=1 ~ N(1 + 2 X1 + psi + a_g, phi)`,
/// with `X1 ~ U[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueDesign {
    pub psi: f64,
    pub phi: f64,
    /// One offset per group.
    pub a: Vec<f64>,
    /// Covariate value at which groups are compared.
    pub x1: f64,
    pub levels: usize,
    /// Latent cut points; pooled-mixture quantiles when `None`.
    pub tau_sim: Option<Vec<f64>>,
    /// Raters per group `J_g`.
    pub raters: Vec<u32>,
    /// Share of each rater's items with `D = 0`.
    pub k0_fraction: f64,
}

impl TrueDesign {
    /// Equal raters per group with the defaults `psi = 0.5`, `phi = 1.5`,
    /// `x1 = 0.5`, `L = 7`.
    pub fn setting(setting: u8, groups: usize, raters_per_group: u32) -> Result<Self> {
        Ok(Self {
            psi: 0.5,
            phi: 1.5,
            a: setting_offsets(setting, groups)?,
            x1: 0.5,
            levels: 7,
            tau_sim: None,
            raters: alloc::vec![raters_per_group; groups],
            k0_fraction: 0.5,
        })
    }

    /// `J_g = n_g J`.
    pub fn with_ratio(mut self, ratio: &[u32], base: u32) -> Result<Self> {
        if ratio.len() != self.a.len() {
            return Err(Error::ArityMismatch { expected: self.a.len(), found: ratio.len() });
        }
        self.raters = ratio.iter().map(|n| n * base).collect();
        Ok(self)
    }

    pub fn groups(&self) -> usize {
        self.a.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        if !(self.phi > 0.0 && self.phi.is_finite()) {
            return bad("phi must be positive");
        }
        if self.a.len() < 2 {
            return bad("need at least two groups");
        }
        if self.raters.len() != self.a.len() || self.raters.iter().any(|&j| j == 0) {
            return bad("raters must list a positive count for every group");
        }
        if self.levels < 2 {
            return bad("need at least two score levels");
        }
        if !(self.k0_fraction > 0.0 && self.k0_fraction < 1.0) {
            return bad("k0_fraction must lie in (0, 1)");
        }
        if !self.psi.is_finite() || !self.x1.is_finite() || self.a.iter().any(|v| !v.is_finite()) {
            return bad("non-finite design value");
        }
        if let Some(t) = &self.tau_sim {
            if t.len() != self.levels - 1 || t.windows(2).any(|w| !(w[0] < w[1])) || t.iter().any(|v| !v.is_finite()) {
                return bad("tau_sim must hold L-1 strictly increasing finite values");
            }
        }
        Ok(())
    }

    /// Group labels `"1".."G"`, one continuous covariate, last group as reference.
    pub fn design_spec(&self) -> DesignSpec {
        let labels = (1..=self.groups()).map(|g| g.to_string()).collect();
        DesignSpec::new(labels, alloc::vec![X1.to_string()]).expect("at least two groups")
    }

    pub fn profiles(&self) -> Vec<CovariateProfile> {
        CovariateProfile::per_group(self.groups(), &[self.x1])
    }

    /// Latent mean and standard deviation given `(D, g, X1)`.
    pub fn latent(&self, status: bool, group: usize, x1: f64) -> (f64, f64) {
        if status {
            (1.0 + 2.0 * x1 + self.psi + self.a[group], libm::sqrt(self.phi))
        } else {
            (1.0 + x1, 1.0)
        }
    }

    /// `tau_sim`, or the `l / L` quantiles of the pooled latent mixture with
    /// equal weight on `D`, groups weighted by `J_g` and `X1` integrated out.
    pub fn thresholds(&self) -> Vec<f64> {
        if let Some(t) = &self.tau_sim {
            return t.clone();
        }
        let rule = GaussLegendre::on_interval(QUADRATURE_NODES, 0.0, 1.0);
        let total: f64 = self.raters.iter().map(|&j| j as f64).sum();
        let mixture_cdf = |c: f64| -> f64 {
            let mut acc = 0.0;
            for (g, &j) in self.raters.iter().enumerate() {
                let w = j as f64 / total;
                let f = rule.integrate(|x| {
                    let (m0, s0) = self.latent(false, g, x);
                    let (m1, s1) = self.latent(true, g, x);
                    0.5 * normal::cdf((c - m0) / s0) + 0.5 * normal::cdf((c - m1) / s1)
                });
                acc += w * f;
            }
            acc
        };
        let l = self.levels as f64;
        (1..self.levels)
            .map(|k| {
                let target = k as f64 / l;
                let (mut lo, mut hi) = (-20.0, 40.0);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if mixture_cdf(mid) < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            })
            .collect()
    }

    /// Whole items per rater with `D = 0` when `K` items are drawn.
    pub fn k0(&self, k: u64) -> u64 {
        libm::round(k as f64 * self.k0_fraction) as u64
    }
}

/// True parameter vector of the ordinal model under `design` in the coding
/// of `spec`. The latent intercept 1 is absorbed into the thresholds.
pub fn true_gamma(design: &TrueDesign, spec: &DesignSpec) -> Result<ModelParams> {
    design.validate()?;
    if spec.n_groups() != design.groups() || spec.covariate_names().len() != 1 {
        return Err(Error::InvalidInput("design spec must have the truth's groups and a single covariate".into()));
    }
    let tau: Vec<f64> = design.thresholds().iter().map(|t| t - 1.0).collect();
    let p = spec.x_dimension();
    let mut params = ModelParams::zeros(p, tau)?;
    let reference = spec.reference();
    let a_ref = design.a[reference];
    params.alpha0 = design.psi + a_ref;
    params.beta0 = 0.5 * libm::log(design.phi);
    let x1_slot = p - 1;
    params.alpha1[x1_slot] = 1.0;
    params.alpha2[x1_slot] = 1.0;
    for g in 0..design.groups() {
        if let Some(slot) = spec.dummy_slot(g) {
            params.alpha2[slot] = design.a[g] - a_ref;
        }
    }
    params.validate()?;
    Ok(params)
}

/// Expected Fisher information of the whole study at `K` items per rater:
/// every group contributes `J_g` raters, each with `K0` items at `D = 0`
/// and `K - K0` at `D = 1`, `X1` integrated by Gauss-Legendre quadrature.
/// Uses the exact `k0_fraction` split, so the result is linear in `K`.
pub fn expected_information(gamma0: &ModelParams, design: &TrueDesign, spec: &DesignSpec, k: f64) -> Result<DMatrix<f64>> {
    design.validate()?;
    let dim = gamma0.layout().dim();
    let rule = GaussLegendre::on_interval(QUADRATURE_NODES, 0.0, 1.0);
    let mut info = alloc::vec![0.0; dim * dim];
    let mut x = alloc::vec![0.0; spec.x_dimension()];
    for (g, &j) in design.raters.iter().enumerate() {
        for (status, share) in [(false, design.k0_fraction), (true, 1.0 - design.k0_fraction)] {
            let cell = j as f64 * k * share;
            for (&node, &w) in rule.nodes.iter().zip(&rule.weights) {
                spec.encode_into(g, &[node], &mut x)?;
                add_observation_information(gamma0, status, &x, cell * w, &mut info);
            }
        }
    }
    let m = DMatrix::from_row_slice(dim, dim, &info);
    Ok(0.5 * (&m + m.transpose()))
}

/// Noncentrality `eta` with `P(chi2_df(eta) > chi2_{df,alpha}) = 1 - beta`.
pub fn solve_eta(alpha: f64, beta: f64, df: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0 && beta > 0.0 && beta < 1.0) || df == 0 {
        return Err(Error::InvalidInput("alpha and beta must lie in (0, 1) and df >= 1".into()));
    }
    let target = 1.0 - beta;
    let crit = chisq::critical_value(alpha, df as f64);
    let power = |eta: f64| chisq::noncentral_sf(crit, df as f64, eta);
    if target <= alpha {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, 200.0);
    assert!(power(hi) >= target, "noncentrality bracket does not contain the target power");
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let pw = power(mid);
        if (pw - target).abs() <= 1e-10 || hi - lo < 1e-13 {
            break;
        }
        if pw < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}

/// Inputs of a minimum sample size calculation.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpec {
    pub alpha: f64,
    pub beta: f64,
    pub metric: Metric,
    pub truth: TrueDesign,
    pub cap: u64,
}

impl PowerSpec {
    pub fn new(truth: TrueDesign, metric: Metric) -> Self {
        Self { alpha: 0.05, beta: 0.2, metric, truth, cap: DEFAULT_CAP }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSizeResult {
    pub k_min: u64,
    pub eta_target: f64,
    pub eta_at_k: f64,
    /// `eta` at `k_min - 1`; zero when `k_min = 1`.
    pub eta_below: f64,
    /// Power of the test at `k_min`.
    pub power_at_k: f64,
    pub lambda: Vec<f64>,
    pub lambda_c: Vec<f64>,
    pub tau_sim: Vec<f64>,
}

/// `eta(K) = Lambda_C (K F Sigma(K) F' K')^-1 Lambda_C'` with `Sigma(K)` the
/// inverse expected information.
pub struct NoncentralityCurve {
    eta_per_item: f64,
    lambda: Vec<f64>,
    lambda_c: Vec<f64>,
}

impl NoncentralityCurve {
    pub fn new(truth: &TrueDesign, metric: Metric) -> Result<Self> {
        truth.validate()?;
        let spec = truth.design_spec();
        let gamma0 = true_gamma(truth, &spec)?;
        let (lambda, f) = lambda_from_params(&gamma0, &spec, &truth.profiles(), metric)?;
        let contrast = ContrastMatrix::for_spec(&spec);
        let lambda_c = contrast.apply(&lambda);
        if lambda_c.iter().all(|v| v.abs() < 1e-12) {
            return Err(Error::NullEffect);
        }
        let info = expected_information(&gamma0, truth, &spec, 1.0)?;
        let names = gamma0.layout().names(&spec.x_names());
        let sigma = invert_information(info, &names)?;
        let form = contrast_form(&lambda, &f, &sigma, &contrast)?;
        Ok(Self { eta_per_item: form.statistic, lambda, lambda_c })
    }

    pub fn eta(&self, k: u64) -> f64 {
        k as f64 * self.eta_per_item
    }

    pub fn eta_per_item(&self) -> f64 {
        self.eta_per_item
    }
}

/// Smallest `K` with `eta(K) >= eta_{beta,alpha}`. `eta` is linear in `K`,
/// so the scan doubles an upper bracket and then bisects.
pub fn min_sample_size(spec: &PowerSpec) -> Result<SampleSizeResult> {
    let df = spec.truth.groups() - 1;
    let eta_target = solve_eta(spec.alpha, spec.beta, df)?;
    let curve = NoncentralityCurve::new(&spec.truth, spec.metric)?;
    let mut hi = 1u64;
    while curve.eta(hi) < eta_target {
        if hi >= spec.cap {
            return Err(Error::SampleSizeCap { cap: spec.cap });
        }
        hi = (hi * 2).min(spec.cap);
    }
    let mut lo = 0u64;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if curve.eta(mid) >= eta_target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let crit = chisq::critical_value(spec.alpha, df as f64);
    let eta_at_k = curve.eta(hi);
    Ok(SampleSizeResult {
        k_min: hi,
        eta_target,
        eta_at_k,
        eta_below: curve.eta(hi - 1),
        power_at_k: chisq::noncentral_sf(crit, df as f64, eta_at_k),
        lambda: curve.lambda.clone(),
        lambda_c: curve.lambda_c.clone(),
        tau_sim: spec.truth.thresholds(),
    })
}

/// Short description of a rater allocation, e.g. `"4:2:1:4"`.
pub fn ratio_label(ratio: &[u32]) -> String {
    let parts: Vec<String> = ratio.iter().map(|n| n.to_string()).collect();
    parts.join(":")
}
