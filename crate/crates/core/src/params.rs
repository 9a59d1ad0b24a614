//! Parameter vector of the location-scale ordinal probit model.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Index arithmetic for the flat parameter vector, ordered
/// `(alpha0, alpha1[p], alpha2[p], beta0, beta1[p], beta2[p], tau[L-1])`.
///
/// The location block `(alpha0, alpha1, alpha2)` and the scale block
/// `(beta0, beta1, beta2)` both pair with the per-row vector `z = (D, x, D x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamLayout {
    pub p: usize,
    pub levels: usize,
}

impl ParamLayout {
    pub fn new(p: usize, levels: usize) -> Self {
        Self { p, levels }
    }

    /// Length of `z = (D, x, D x)`.
    pub fn z_len(&self) -> usize {
        2 * self.p + 1
    }

    /// Total dimension `4p + L + 1`.
    pub fn dim(&self) -> usize {
        4 * self.p + self.levels + 1
    }

    pub fn alpha0(&self) -> usize {
        0
    }
    pub fn alpha1(&self, j: usize) -> usize {
        1 + j
    }
    pub fn alpha2(&self, j: usize) -> usize {
        1 + self.p + j
    }
    /// Start of the scale block.
    pub fn beta0(&self) -> usize {
        self.z_len()
    }
    pub fn beta1(&self, j: usize) -> usize {
        self.beta0() + 1 + j
    }
    pub fn beta2(&self, j: usize) -> usize {
        self.beta0() + 1 + self.p + j
    }
    /// Threshold `tau_{l+1}` for `l` in `0..L-1`.
    pub fn tau(&self, l: usize) -> usize {
        2 * self.z_len() + l
    }

    pub fn names(&self, x_names: &[String]) -> Vec<String> {
        debug_assert_eq!(x_names.len(), self.p);
        let mut out = Vec::with_capacity(self.dim());
        out.push("alpha0".to_string());
        out.extend(x_names.iter().map(|n| format!("alpha1[{n}]")));
        out.extend(x_names.iter().map(|n| format!("alpha2[{n}]")));
        out.push("beta0".to_string());
        out.extend(x_names.iter().map(|n| format!("beta1[{n}]")));
        out.extend(x_names.iter().map(|n| format!("beta2[{n}]")));
        out.extend((1..self.levels).map(|l| format!("tau[{l}]")));
        out
    }
}

/// Model parameters `gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub tau: Vec<f64>,
    pub alpha0: f64,
    pub alpha1: Vec<f64>,
    pub alpha2: Vec<f64>,
    pub beta0: f64,
    pub beta1: Vec<f64>,
    pub beta2: Vec<f64>,
}

impl ModelParams {
    /// All coefficients zero with the given thresholds.
    pub fn zeros(p: usize, tau: Vec<f64>) -> Result<Self> {
        let params = Self {
            tau,
            alpha0: 0.0,
            alpha1: alloc::vec![0.0; p],
            alpha2: alloc::vec![0.0; p],
            beta0: 0.0,
            beta1: alloc::vec![0.0; p],
            beta2: alloc::vec![0.0; p],
        };
        params.validate()?;
        Ok(params)
    }

    pub fn p(&self) -> usize {
        self.alpha1.len()
    }

    pub fn levels(&self) -> usize {
        self.tau.len() + 1
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout::new(self.p(), self.levels())
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.p();
        if self.alpha2.len() != p || self.beta1.len() != p || self.beta2.len() != p {
            return Err(Error::InvalidInput("coefficient vectors differ in length".into()));
        }
        if self.tau.is_empty() {
            return Err(Error::InvalidInput("need at least one threshold".into()));
        }
        if self.tau.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput("thresholds must be strictly increasing".into()));
        }
        let all_finite = self
            .tau
            .iter()
            .chain(&self.alpha1)
            .chain(&self.alpha2)
            .chain(&self.beta1)
            .chain(&self.beta2)
            .chain([&self.alpha0, &self.beta0])
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidInput("non-finite parameter".into()));
        }
        Ok(())
    }

    /// Flat vector in the published ordering.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.layout().dim());
        v.push(self.alpha0);
        v.extend_from_slice(&self.alpha1);
        v.extend_from_slice(&self.alpha2);
        v.push(self.beta0);
        v.extend_from_slice(&self.beta1);
        v.extend_from_slice(&self.beta2);
        v.extend_from_slice(&self.tau);
        v
    }

    pub fn from_slice(layout: ParamLayout, v: &[f64]) -> Result<Self> {
        if v.len() != layout.dim() {
            return Err(Error::ArityMismatch { expected: layout.dim(), found: v.len() });
        }
        let p = layout.p;
        let params = Self {
            alpha0: v[0],
            alpha1: v[1..1 + p].to_vec(),
            alpha2: v[1 + p..1 + 2 * p].to_vec(),
            beta0: v[layout.beta0()],
            beta1: v[layout.beta0() + 1..layout.beta0() + 1 + p].to_vec(),
            beta2: v[layout.beta0() + 1 + p..layout.tau(0)].to_vec(),
            tau: v[layout.tau(0)..].to_vec(),
        };
        params.validate()?;
        Ok(params)
    }

    /// Location block `(alpha0, alpha1, alpha2)` as one vector matching `z`.
    pub fn location(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.p() + 1);
        v.push(self.alpha0);
        v.extend_from_slice(&self.alpha1);
        v.extend_from_slice(&self.alpha2);
        v
    }

    /// Scale block `(beta0, beta1, beta2)` as one vector matching `z`.
    pub fn scale(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.p() + 1);
        v.push(self.beta0);
        v.extend_from_slice(&self.beta1);
        v.extend_from_slice(&self.beta2);
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn dimension_formula() {
        assert_eq!(ParamLayout::new(4, 7).dim(), 24);
        assert_eq!(ParamLayout::new(0, 2).dim(), 3);
    }

    #[test]
    fn flat_round_trip() {
        let params = ModelParams {
            tau: vec![-1.0, 0.0, 2.0],
            alpha0: 0.3,
            alpha1: vec![1.0, 2.0],
            alpha2: vec![3.0, 4.0],
            beta0: -0.1,
            beta1: vec![0.1, 0.2],
            beta2: vec![0.3, 0.4],
        };
        let v = params.to_vec();
        let layout = params.layout();
        assert_eq!(v.len(), layout.dim());
        assert_eq!(v[layout.alpha2(1)], 4.0);
        assert_eq!(v[layout.beta1(0)], 0.1);
        assert_eq!(v[layout.tau(2)], 2.0);
        assert_eq!(ModelParams::from_slice(layout, &v).unwrap(), params);
    }

    #[test]
    fn unordered_thresholds_rejected() {
        assert!(ModelParams::zeros(1, vec![0.5, 0.5]).is_err());
        assert!(ModelParams::zeros(1, vec![0.5, 0.2]).is_err());
    }
}
