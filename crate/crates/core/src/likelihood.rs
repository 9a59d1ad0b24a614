//! Log likelihood, analytic score and Hessian of the location-scale ordinal
//! probit model.
//!
//! For a row with `z = (D, x, D x)`, location `m = z'a`, scale `s = exp(z'b)`
//! and category `r`, the bounding latent distances are
//! `k_r = (tau_r - m) / s` and `k_{r-1}`, with `tau_0 = -inf`, `tau_L = +inf`.
//! Every derivative is assembled from the distance derivatives
//! `dk/da = -z/s`, `dk/db = -k z`, `dk/dtau = 1/s` and
//! `d2k/da db = z z'/s`, `d2k/db db = k z z'`, `d2k/dtau db = -z/s`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::data::{Design, DesignRow};
use crate::error::{Error, Result};
use crate::normal;
use crate::params::{ModelParams, ParamLayout};

/// Lower bound applied to category probabilities inside logarithms.
pub const PROB_FLOOR: f64 = 1e-300;

/// Sparse view of `z = (D, x, D x)`: at most `2p + 1` nonzero entries.
#[derive(Debug, Clone, Default)]
pub(crate) struct SparseZ {
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl SparseZ {
    pub fn fill(&mut self, status: bool, x: &[f64]) {
        self.idx.clear();
        self.val.clear();
        let p = x.len();
        if status {
            self.idx.push(0);
            self.val.push(1.0);
        }
        for (j, &v) in x.iter().enumerate() {
            if v != 0.0 {
                self.idx.push(1 + j);
                self.val.push(v);
            }
        }
        if status {
            for (j, &v) in x.iter().enumerate() {
                if v != 0.0 {
                    self.idx.push(1 + p + j);
                    self.val.push(v);
                }
            }
        }
    }

    fn dot(&self, dense: &[f64]) -> f64 {
        self.idx.iter().zip(&self.val).map(|(&i, &v)| dense[i] * v).sum()
    }
}

/// Location `m` and scale `s` of the latent variable at `(D, x)`.
pub(crate) fn location_scale(z: &SparseZ, location: &[f64], scale: &[f64]) -> (f64, f64) {
    (z.dot(location), libm::exp(z.dot(scale)))
}

/// Per-row first-order quantities for one observed category.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CategoryTerms {
    pub s: f64,
    /// Distance to the upper threshold, with its index (absent for category L).
    pub upper: Option<(usize, f64)>,
    pub lower: Option<(usize, f64)>,
    /// `d ln P / d k_upper`, `d ln P / d k_lower`.
    pub a_up: f64,
    pub a_lo: f64,
    pub ln_p: f64,
    pub p: f64,
}

impl CategoryTerms {
    pub fn new(category: usize, tau: &[f64], m: f64, s: f64) -> Self {
        let upper = (category < tau.len()).then(|| (category, (tau[category] - m) / s));
        let lower = (category > 0).then(|| (category - 1, (tau[category - 1] - m) / s));
        let ku = upper.map_or(f64::INFINITY, |u| u.1);
        let kl = lower.map_or(f64::NEG_INFINITY, |l| l.1);
        let (p, ln_p) = if ku > kl { normal::interval(kl, ku) } else { (0.0, f64::NEG_INFINITY) };
        let ln_p_safe = ln_p.max(libm::log(PROB_FLOOR));
        let a_up = upper.map_or(0.0, |(_, k)| libm::exp(normal::ln_pdf(k) - ln_p_safe));
        let a_lo = lower.map_or(0.0, |(_, k)| -libm::exp(normal::ln_pdf(k) - ln_p_safe));
        Self { s, upper, lower, a_up, a_lo, ln_p, p }
    }

    fn ku(&self) -> f64 {
        self.upper.map_or(0.0, |u| u.1)
    }

    fn kl(&self) -> f64 {
        self.lower.map_or(0.0, |l| l.1)
    }

    /// Floored log probability used in the likelihood.
    pub fn loglik(&self) -> f64 {
        self.ln_p.max(libm::log(PROB_FLOOR))
    }

    /// Coefficients of `z` in the location and scale gradients.
    pub fn gradient_coefficients(&self) -> (f64, f64) {
        let ca = -(self.a_up + self.a_lo) / self.s;
        let cb = -(self.a_up * self.ku() + self.a_lo * self.kl());
        (ca, cb)
    }
}

/// Log likelihood, score and (optionally) Hessian at one parameter point.
#[derive(Debug, Clone)]
pub struct Derivatives {
    pub loglik: f64,
    pub score: DVector<f64>,
    pub hessian: Option<DMatrix<f64>>,
}

fn check_shapes(design: &Design, params: &ModelParams) -> Result<ParamLayout> {
    params.validate()?;
    if params.p() != design.p() || params.levels() != design.levels() {
        return Err(Error::ArityMismatch {
            expected: ParamLayout::new(design.p(), design.levels()).dim(),
            found: params.layout().dim(),
        });
    }
    Ok(params.layout())
}

pub fn log_likelihood(design: &Design, params: &ModelParams) -> Result<f64> {
    let _ = check_shapes(design, params)?;
    let (loc, sc) = (params.location(), params.scale());
    let mut z = SparseZ::default();
    let mut total = 0.0;
    for row in design.iter() {
        z.fill(row.status, row.x);
        let (m, s) = location_scale(&z, &loc, &sc);
        total += CategoryTerms::new(row.category, &params.tau, m, s).loglik();
    }
    if !total.is_finite() {
        return Err(Error::DegenerateParameters);
    }
    Ok(total)
}

pub fn score(design: &Design, params: &ModelParams) -> Result<DVector<f64>> {
    Ok(derivatives(design, params, false)?.score)
}

/// Matrix of second derivatives of the log likelihood (not negated).
pub fn hessian(design: &Design, params: &ModelParams) -> Result<DMatrix<f64>> {
    Ok(derivatives(design, params, true)?.hessian.expect("requested"))
}

pub fn derivatives(design: &Design, params: &ModelParams, with_hessian: bool) -> Result<Derivatives> {
    let layout = check_shapes(design, params)?;
    let dim = layout.dim();
    let (loc, sc) = (params.location(), params.scale());
    let mut acc = Accumulator::new(layout, with_hessian);
    let mut z = SparseZ::default();
    for row in design.iter() {
        acc.add_row(&row, &mut z, &loc, &sc, &params.tau);
    }
    if !acc.loglik.is_finite() || acc.grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::DegenerateParameters);
    }
    let hessian = with_hessian.then(|| DMatrix::from_row_slice(dim, dim, &acc.hess));
    Ok(Derivatives { loglik: acc.loglik, score: DVector::from_vec(acc.grad), hessian })
}

struct Accumulator {
    layout: ParamLayout,
    with_hessian: bool,
    loglik: f64,
    grad: Vec<f64>,
    hess: Vec<f64>,
}

impl Accumulator {
    fn new(layout: ParamLayout, with_hessian: bool) -> Self {
        let dim = layout.dim();
        Self {
            layout,
            with_hessian,
            loglik: 0.0,
            grad: alloc::vec![0.0; dim],
            hess: if with_hessian { alloc::vec![0.0; dim * dim] } else { Vec::new() },
        }
    }

    fn add_row(&mut self, row: &DesignRow<'_>, z: &mut SparseZ, loc: &[f64], sc: &[f64], tau: &[f64]) {
        z.fill(row.status, row.x);
        let (m, s) = location_scale(z, loc, sc);
        let t = CategoryTerms::new(row.category, tau, m, s);
        self.loglik += t.loglik();

        let q = self.layout.z_len();
        let tau0 = self.layout.tau(0);
        let (ca, cb) = t.gradient_coefficients();
        for (&i, &v) in z.idx.iter().zip(&z.val) {
            self.grad[i] += ca * v;
            self.grad[q + i] += cb * v;
        }
        if let Some((u, _)) = t.upper {
            self.grad[tau0 + u] += t.a_up / s;
        }
        if let Some((l, _)) = t.lower {
            self.grad[tau0 + l] += t.a_lo / s;
        }
        if !self.with_hessian {
            return;
        }

        let (au, al) = (t.a_up, t.a_lo);
        let (ku, kl) = (t.ku(), t.kl());
        let b_uu = -ku * au - au * au;
        let b_ll = -kl * al - al * al;
        let b_ul = -au * al;
        let s2 = s * s;
        let w_aa = (b_uu + 2.0 * b_ul + b_ll) / s2;
        let w_ab = (au + al) / s + ((b_uu + b_ul) * ku + (b_ul + b_ll) * kl) / s;
        let w_bb = au * ku + al * kl + b_uu * ku * ku + 2.0 * b_ul * ku * kl + b_ll * kl * kl;
        // coefficients of z in the (location, tau_k) and (scale, tau_k) blocks
        let at_u = -(b_uu + b_ul) / s2;
        let at_l = -(b_ul + b_ll) / s2;
        let bt_u = -(au + b_uu * ku + b_ul * kl) / s;
        let bt_l = -(al + b_ul * ku + b_ll * kl) / s;

        let dim = self.layout.dim();
        let h = &mut self.hess;
        for (&i, &vi) in z.idx.iter().zip(&z.val) {
            for (&j, &vj) in z.idx.iter().zip(&z.val) {
                let zz = vi * vj;
                h[i * dim + j] += w_aa * zz;
                h[i * dim + q + j] += w_ab * zz;
                h[(q + j) * dim + i] += w_ab * zz;
                h[(q + i) * dim + q + j] += w_bb * zz;
            }
            for (tau_idx, at, bt) in [
                (t.upper.map(|u| tau0 + u.0), at_u, bt_u),
                (t.lower.map(|l| tau0 + l.0), at_l, bt_l),
            ] {
                if let Some(k) = tau_idx {
                    h[i * dim + k] += at * vi;
                    h[k * dim + i] += at * vi;
                    h[(q + i) * dim + k] += bt * vi;
                    h[k * dim + q + i] += bt * vi;
                }
            }
        }
        if let Some((u, _)) = t.upper {
            let iu = tau0 + u;
            h[iu * dim + iu] += b_uu / s2;
            if let Some((l, _)) = t.lower {
                let il = tau0 + l;
                h[iu * dim + il] += b_ul / s2;
                h[il * dim + iu] += b_ul / s2;
            }
        }
        if let Some((l, _)) = t.lower {
            let il = tau0 + l;
            h[il * dim + il] += b_ll / s2;
        }
    }
}

/// Category probabilities `P(R = l | D, x)` for `l = 1..L`.
pub fn category_probabilities(params: &ModelParams, status: bool, x: &[f64]) -> Vec<f64> {
    let mut z = SparseZ::default();
    z.fill(status, x);
    let (m, s) = location_scale(&z, &params.location(), &params.scale());
    (0..params.levels())
        .map(|c| CategoryTerms::new(c, &params.tau, m, s).p)
        .collect()
}

/// Fisher information of a single observation at `(D, x)`:
/// `sum_l P_l * g_l g_l'` with `g_l` the gradient of `ln P_l`. Added into
/// `out` (dense, row-major, `dim x dim`) with multiplier `weight`.
pub fn add_observation_information(params: &ModelParams, status: bool, x: &[f64], weight: f64, out: &mut [f64]) {
    let layout = params.layout();
    let dim = layout.dim();
    debug_assert_eq!(out.len(), dim * dim);
    let q = layout.z_len();
    let tau0 = layout.tau(0);
    let mut z = SparseZ::default();
    z.fill(status, x);
    let (m, s) = location_scale(&z, &params.location(), &params.scale());
    let mut idx: Vec<usize> = Vec::with_capacity(2 * z.idx.len() + 2);
    let mut val: Vec<f64> = Vec::with_capacity(2 * z.idx.len() + 2);
    for c in 0..params.levels() {
        let t = CategoryTerms::new(c, &params.tau, m, s);
        if t.p <= 0.0 {
            continue;
        }
        idx.clear();
        val.clear();
        let (ca, cb) = t.gradient_coefficients();
        for (&i, &v) in z.idx.iter().zip(&z.val) {
            idx.push(i);
            val.push(ca * v);
            idx.push(q + i);
            val.push(cb * v);
        }
        if let Some((u, _)) = t.upper {
            idx.push(tau0 + u);
            val.push(t.a_up / s);
        }
        if let Some((l, _)) = t.lower {
            idx.push(tau0 + l);
            val.push(t.a_lo / s);
        }
        let w = weight * t.p;
        for (&i, &vi) in idx.iter().zip(&val) {
            for (&j, &vj) in idx.iter().zip(&val) {
                out[i * dim + j] += w * vi * vj;
            }
        }
    }
}
