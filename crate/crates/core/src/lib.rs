//! Covariate-adjusted ROC analysis for ordinal scores.
//!
//! A location-scale ordinal probit model is fitted by maximum likelihood;
//! group- and covariate-specific binormal ROC curves and AUCs follow in
//! closed form, with delta-method variances from the observed information.
//! On top of that sit a chi-square homogeneity test across rater groups and
//! a sample size calculator based on the expected information.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod chisq;
pub mod data;
pub mod error;
pub mod fit;
pub mod homogeneity;
pub mod likelihood;
pub mod normal;
pub mod params;
pub mod power;
pub mod quadrature;
pub mod roc;

pub use nalgebra;

pub use data::{build_design, CovariateProfile, Design, DesignSpec, Observation, ObservationTable};
pub use error::{Error, Result};
pub use fit::{fit, fit_design, FitOptions, FittedModel};
pub use homogeneity::{
    homogeneity_test, lambda_vector, pairwise, roc_curve_test, test_statistic, ContrastMatrix, CurveTestReport,
    Metric, PairwiseReport, TestReport,
};
pub use params::{ModelParams, ParamLayout};
pub use power::{expected_information, min_sample_size, solve_eta, true_gamma, PowerSpec, SampleSizeResult, TrueDesign};
pub use roc::{auc_at, auc_summary, binormal_from, roc_at, roc_summary, AucSummary, BinormalParams, RocSummary};
