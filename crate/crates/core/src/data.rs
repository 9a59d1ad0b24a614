//! Ordinal score tables and their design-matrix view.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// One rated item.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// Ordinal score on `1..=L`.
    pub score: u32,
    /// Binary status `D`; `true` is the `D = 1` class.
    pub status: bool,
    /// Index into [`ObservationTable::group_levels`].
    pub group: usize,
    pub covariates: Vec<f64>,
}

/// A validated ordinal-score dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationTable {
    rows: Vec<Observation>,
    levels: usize,
    group_levels: Vec<String>,
    covariate_names: Vec<String>,
}

impl ObservationTable {
    pub fn new(
        levels: usize,
        group_levels: Vec<String>,
        covariate_names: Vec<String>,
        rows: Vec<Observation>,
    ) -> Result<Self> {
        if levels < 2 {
            return Err(Error::InvalidInput(format!("ordinal scale must have L >= 2, got {levels}")));
        }
        if group_levels.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least two groups, got {}",
                group_levels.len()
            )));
        }
        for (i, name) in group_levels.iter().enumerate() {
            if group_levels[..i].contains(name) {
                return Err(Error::InvalidInput(format!("duplicate group level `{name}`")));
            }
        }
        let arity = covariate_names.len();
        for (i, row) in rows.iter().enumerate() {
            if row.score < 1 || row.score as usize > levels {
                return Err(Error::ScoreOutOfRange { row: i, score: row.score as i64, levels });
            }
            if row.group >= group_levels.len() {
                return Err(Error::UnknownGroup { row: i, label: row.group.to_string() });
            }
            if row.covariates.len() != arity {
                return Err(Error::ArityMismatch { expected: arity, found: row.covariates.len() });
            }
            if row.covariates.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("row {i} has a non-finite covariate")));
            }
        }
        Ok(Self { rows, levels, group_levels, covariate_names })
    }

    pub fn rows(&self) -> &[Observation] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Ordinal scale size `L`.
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn group_levels(&self) -> &[String] {
        &self.group_levels
    }

    pub fn n_groups(&self) -> usize {
        self.group_levels.len()
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    /// Row counts per group as `(D = 0, D = 1)`.
    pub fn status_counts(&self) -> Vec<(usize, usize)> {
        let mut counts = alloc::vec![(0usize, 0usize); self.n_groups()];
        for r in &self.rows {
            if r.status {
                counts[r.group].1 += 1;
            } else {
                counts[r.group].0 += 1;
            }
        }
        counts
    }

    /// Observed count per score category.
    pub fn category_counts(&self) -> Vec<usize> {
        let mut counts = alloc::vec![0usize; self.levels];
        for r in &self.rows {
            counts[r.score as usize - 1] += 1;
        }
        counts
    }

    /// Mean of each continuous covariate.
    pub fn covariate_means(&self) -> Vec<f64> {
        let mut m = alloc::vec![0.0; self.covariate_names.len()];
        if self.rows.is_empty() {
            return m;
        }
        for r in &self.rows {
            for (acc, v) in m.iter_mut().zip(&r.covariates) {
                *acc += v;
            }
        }
        let n = self.rows.len() as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    /// Every group needs both statuses represented before a model can be fit.
    pub fn check_fit_preconditions(&self) -> Result<()> {
        for (g, (n0, n1)) in self.status_counts().into_iter().enumerate() {
            if n0 == 0 || n1 == 0 {
                return Err(Error::Precondition(format!(
                    "group `{}` has {n0} rows with D=0 and {n1} with D=1; both are required",
                    self.group_levels[g]
                )));
            }
        }
        Ok(())
    }
}

/// Group coding and covariate layout of the model's `x` vector.
///
/// `x` holds reference-cell dummies for every non-reference group (in level
/// order) followed by the continuous covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpec {
    group_levels: Vec<String>,
    reference: usize,
    covariate_names: Vec<String>,
}

impl DesignSpec {
    /// Reference defaults to the last declared level.
    pub fn new(group_levels: Vec<String>, covariate_names: Vec<String>) -> Result<Self> {
        if group_levels.len() < 2 {
            return Err(Error::InvalidInput("need at least two groups".into()));
        }
        let reference = group_levels.len() - 1;
        Ok(Self { group_levels, reference, covariate_names })
    }

    pub fn for_table(table: &ObservationTable) -> Self {
        Self {
            group_levels: table.group_levels().to_vec(),
            reference: table.n_groups() - 1,
            covariate_names: table.covariate_names().to_vec(),
        }
    }

    pub fn with_reference(mut self, label: &str) -> Result<Self> {
        self.reference = self.group_index(label)?;
        Ok(self)
    }

    pub fn group_index(&self, label: &str) -> Result<usize> {
        self.group_levels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownGroup { row: 0, label: label.to_string() })
    }

    pub fn group_levels(&self) -> &[String] {
        &self.group_levels
    }

    pub fn n_groups(&self) -> usize {
        self.group_levels.len()
    }

    pub fn reference(&self) -> usize {
        self.reference
    }

    pub fn reference_label(&self) -> &str {
        &self.group_levels[self.reference]
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    /// Length `p` of `x`: `(G - 1)` dummies plus the continuous covariates.
    pub fn x_dimension(&self) -> usize {
        self.group_levels.len() - 1 + self.covariate_names.len()
    }

    /// Column labels of `x`.
    pub fn x_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .group_levels
            .iter()
            .enumerate()
            .filter(|(g, _)| *g != self.reference)
            .map(|(_, l)| format!("group[{l}]"))
            .collect();
        names.extend(self.covariate_names.iter().cloned());
        names
    }

    /// Dummy slot of group `g`, `None` for the reference group.
    pub fn dummy_slot(&self, g: usize) -> Option<usize> {
        match g.cmp(&self.reference) {
            core::cmp::Ordering::Less => Some(g),
            core::cmp::Ordering::Equal => None,
            core::cmp::Ordering::Greater => Some(g - 1),
        }
    }

    /// Writes the `x` vector of one row into `out` (length `p`).
    pub fn encode_into(&self, group: usize, covariates: &[f64], out: &mut [f64]) -> Result<()> {
        let n_dummy = self.group_levels.len() - 1;
        if covariates.len() != self.covariate_names.len() {
            return Err(Error::ArityMismatch {
                expected: self.covariate_names.len(),
                found: covariates.len(),
            });
        }
        if group >= self.group_levels.len() {
            return Err(Error::UnknownGroup { row: 0, label: group.to_string() });
        }
        out[..n_dummy].iter_mut().for_each(|v| *v = 0.0);
        if let Some(slot) = self.dummy_slot(group) {
            out[slot] = 1.0;
        }
        out[n_dummy..].copy_from_slice(covariates);
        Ok(())
    }

    pub fn encode(&self, group: usize, covariates: &[f64]) -> Result<Vec<f64>> {
        let mut out = alloc::vec![0.0; self.x_dimension()];
        self.encode_into(group, covariates, &mut out)?;
        Ok(out)
    }

    pub fn encode_profile(&self, profile: &CovariateProfile) -> Result<Vec<f64>> {
        self.encode(profile.group, &profile.covariates)
    }

    fn check_consistent(&self, table: &ObservationTable) -> Result<()> {
        if self.group_levels != table.group_levels() || self.covariate_names != table.covariate_names() {
            return Err(Error::InvalidInput(
                "design spec does not match the table's groups or covariates".into(),
            ));
        }
        Ok(())
    }
}

/// Evaluation point for covariate-specific accuracy summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateProfile {
    pub group: usize,
    pub covariates: Vec<f64>,
}

impl CovariateProfile {
    pub fn new(group: usize, covariates: Vec<f64>) -> Self {
        Self { group, covariates }
    }

    /// One profile per group sharing the same continuous covariate values.
    pub fn per_group(n_groups: usize, covariates: &[f64]) -> Vec<Self> {
        (0..n_groups).map(|g| Self::new(g, covariates.to_vec())).collect()
    }
}

/// One row of the design view.
#[derive(Debug, Clone, Copy)]
pub struct DesignRow<'a> {
    /// Index of the score category, `0..L`.
    pub category: usize,
    pub status: bool,
    pub x: &'a [f64],
}

/// Row-major design view: per-row `x` plus the response and status kept aside.
#[derive(Debug, Clone)]
pub struct Design {
    spec: DesignSpec,
    levels: usize,
    p: usize,
    x: Vec<f64>,
    category: Vec<u32>,
    status: Vec<bool>,
}

impl Design {
    pub fn spec(&self) -> &DesignSpec {
        &self.spec
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.status.len()
    }

    pub fn is_empty(&self) -> bool {
        self.status.is_empty()
    }

    pub fn row(&self, i: usize) -> DesignRow<'_> {
        DesignRow {
            category: self.category[i] as usize,
            status: self.status[i],
            x: &self.x[i * self.p..(i + 1) * self.p],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = DesignRow<'_>> + '_ {
        (0..self.len()).map(move |i| self.row(i))
    }

    /// A new design with every row repeated `times` times (consecutively).
    pub fn replicated(&self, times: usize) -> Self {
        let mut out = Self {
            spec: self.spec.clone(),
            levels: self.levels,
            p: self.p,
            x: Vec::with_capacity(self.x.len() * times),
            category: Vec::with_capacity(self.len() * times),
            status: Vec::with_capacity(self.len() * times),
        };
        for _ in 0..times {
            out.x.extend_from_slice(&self.x);
            out.category.extend_from_slice(&self.category);
            out.status.extend_from_slice(&self.status);
        }
        out
    }

    /// Column names of the identifiability matrix checked by [`build_design`]:
    /// the threshold intercept, `D`, `x` and `D*x`.
    fn rank_column_names(&self) -> Vec<String> {
        let xn = self.spec.x_names();
        let mut names = Vec::with_capacity(2 * self.p + 2);
        names.push("(threshold intercept)".to_string());
        names.push("D".to_string());
        names.extend(xn.iter().cloned());
        names.extend(xn.iter().map(|n| format!("D*{n}")));
        names
    }

    /// Rank check of `[1, D, x, D x]`. Columns that are linear combinations
    /// of earlier ones are reported together with the columns they depend on.
    pub fn check_rank(&self) -> Result<()> {
        let k = 2 * self.p + 2;
        // Gram matrix of the columns, accumulated row by row.
        let mut gram = alloc::vec![0.0; k * k];
        let mut z = alloc::vec![0.0; k];
        for r in self.iter() {
            let d = if r.status { 1.0 } else { 0.0 };
            z[0] = 1.0;
            z[1] = d;
            for j in 0..self.p {
                z[2 + j] = r.x[j];
                z[2 + self.p + j] = d * r.x[j];
            }
            for a in 0..k {
                if z[a] == 0.0 {
                    continue;
                }
                for b in 0..k {
                    gram[a * k + b] += z[a] * z[b];
                }
            }
        }
        let dependent = dependent_columns(&gram, k);
        if dependent.is_empty() {
            return Ok(());
        }
        let names = self.rank_column_names();
        let mut cols: Vec<usize> = Vec::new();
        for (col, deps) in &dependent {
            for c in core::iter::once(col).chain(deps.iter()) {
                if !cols.contains(c) {
                    cols.push(*c);
                }
            }
        }
        cols.sort_unstable();
        Err(Error::RankDeficient {
            rank: k - dependent.len(),
            columns_total: k,
            columns: cols.into_iter().map(|c| names[c].clone()).collect(),
        })
    }
}

/// For a Gram matrix, greedily keep columns that add new directions. Each
/// dropped column is returned with the kept columns carrying non-negligible
/// weight in its least-squares representation.
fn dependent_columns(gram: &[f64], k: usize) -> Vec<(usize, Vec<usize>)> {
    use nalgebra::{DMatrix, DVector};
    let scale = (0..k).map(|i| gram[i * k + i]).fold(0.0f64, f64::max).max(1.0);
    let tol = 1e-10;
    let mut kept: Vec<usize> = Vec::new();
    let mut out = Vec::new();
    for c in 0..k {
        let diag = gram[c * k + c];
        if diag <= tol * scale {
            out.push((c, Vec::new()));
            continue;
        }
        if kept.is_empty() {
            kept.push(c);
            continue;
        }
        let m = kept.len();
        let a = DMatrix::from_fn(m, m, |i, j| gram[kept[i] * k + kept[j]]);
        let b = DVector::from_fn(m, |i, _| gram[kept[i] * k + c]);
        let coef = match a.clone().cholesky() {
            Some(ch) => ch.solve(&b),
            None => {
                kept.push(c);
                continue;
            }
        };
        // squared residual norm of column c after projection on kept columns
        let resid = diag - b.dot(&coef);
        if resid <= tol * diag {
            let deps = kept
                .iter()
                .zip(coef.iter())
                .filter(|(_, w)| w.abs() > 1e-8)
                .map(|(&i, _)| i)
                .collect();
            out.push((c, deps));
        } else {
            kept.push(c);
        }
    }
    out
}

/// Builds the design view and verifies that the model is identifiable on it.
pub fn build_design(table: &ObservationTable, spec: &DesignSpec) -> Result<Design> {
    let design = encode_design(table, spec)?;
    design.check_rank()?;
    Ok(design)
}

/// Design view without the rank check.
pub fn encode_design(table: &ObservationTable, spec: &DesignSpec) -> Result<Design> {
    spec.check_consistent(table)?;
    let p = spec.x_dimension();
    let n = table.len();
    let mut x = alloc::vec![0.0; n * p];
    let mut category = Vec::with_capacity(n);
    let mut status = Vec::with_capacity(n);
    for (i, row) in table.rows().iter().enumerate() {
        spec.encode_into(row.group, &row.covariates, &mut x[i * p..(i + 1) * p])?;
        category.push(row.score - 1);
        status.push(row.status);
    }
    Ok(Design { spec: spec.clone(), levels: table.levels(), p, x, category, status })
}
