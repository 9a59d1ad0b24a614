//! CSV ingestion of scored observations.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use ordroc_core::{Observation, ObservationTable};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column mapping and scale for an input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub score: String,
    pub status: String,
    pub group: String,
    #[serde(default)]
    pub covariates: Vec<String>,
    /// Declared number of levels; the observed maximum is used if larger.
    #[serde(default)]
    pub levels: Option<usize>,
    /// Ordered group levels. Rows with other labels are rejected.
    #[serde(default)]
    pub group_levels: Option<Vec<String>>,
    /// Source scale `[min, max]`, mapped onto `1..=max-min+1`.
    #[serde(default)]
    pub score_range: Option<[i64; 2]>,
}

impl Schema {
    pub fn new(score: &str, status: &str, group: &str, covariates: &[&str]) -> Self {
        Self {
            score: score.into(),
            status: status.into(),
            group: group.into(),
            covariates: covariates.iter().map(|c| c.to_string()).collect(),
            levels: None,
            group_levels: None,
            score_range: None,
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<ObservationTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers.iter().position(|h| h.trim() == name).ok_or_else(|| Error::MissingColumn(name.to_string()))
}

fn parse_status(raw: &str) -> Option<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "1" | "true" => Some(true),
        "0" | "false" => Some(false),
        _ => None,
    }
}

/// Rows are numbered from 1 for the first data line.
pub fn read_csv(reader: impl Read, schema: &Schema) -> Result<ObservationTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let score_col = column(&headers, &schema.score)?;
    let status_col = column(&headers, &schema.status)?;
    let group_col = column(&headers, &schema.group)?;
    let cov_cols = schema.covariates.iter().map(|c| column(&headers, c)).collect::<Result<Vec<_>>>()?;

    let mut labels: Vec<String> = schema.group_levels.clone().unwrap_or_default();
    let mut index: HashMap<String, usize> = labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
    let fixed_levels = schema.group_levels.is_some();
    let offset = schema.score_range.map_or(0, |[lo, _]| lo - 1);

    let mut rows = Vec::new();
    let mut max_score = 0u32;
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let field = |c: usize| -> Result<&str> {
            match record.get(c) {
                Some(v) if !v.is_empty() => Ok(v),
                _ => Err(Error::Row { row, message: format!("missing value in column `{}`", &headers[c]) }),
            }
        };
        let raw_score = field(score_col)?;
        let score: i64 = raw_score
            .parse()
            .map_err(|_| Error::Row { row, message: format!("score `{raw_score}` is not an integer") })?;
        if let Some([lo, hi]) = schema.score_range {
            if score < lo || score > hi {
                return Err(Error::Row { row, message: format!("score {score} outside {lo}..{hi}") });
            }
        }
        let score = score - offset;
        if score < 1 {
            return Err(Error::Row { row, message: format!("score {score} outside 1..L") });
        }
        let score = u32::try_from(score).map_err(|_| Error::Row { row, message: "score too large".into() })?;
        let raw_status = field(status_col)?;
        let status = parse_status(raw_status)
            .ok_or_else(|| Error::Row { row, message: format!("status `{raw_status}` is not 0/1") })?;
        let label = field(group_col)?.to_string();
        let group = match index.get(&label) {
            Some(&g) => g,
            None if fixed_levels => {
                return Err(Error::Row { row, message: format!("unknown group label `{label}`") });
            }
            None => {
                labels.push(label.clone());
                index.insert(label, labels.len() - 1);
                labels.len() - 1
            }
        };
        let covariates = cov_cols
            .iter()
            .map(|&c| {
                let raw = field(c)?;
                raw.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Row { row, message: format!("`{raw}` in column `{}` is not a number", &headers[c]) })
            })
            .collect::<Result<Vec<_>>>()?;
        max_score = max_score.max(score);
        rows.push(Observation { score, status, group, covariates });
    }

    let declared = match (schema.levels, schema.score_range) {
        (Some(l), _) => l,
        (None, Some([lo, hi])) => (hi - lo + 1) as usize,
        (None, None) => 0,
    };
    if let Some(l) = schema.levels {
        if let Some(bad) = rows.iter().position(|r| r.score as usize > l) {
            return Err(Error::Row { row: bad + 1, message: format!("score {} outside 1..{l}", rows[bad].score) });
        }
    }
    let levels = declared.max(max_score as usize);
    Ok(ObservationTable::new(levels, labels, schema.covariates.clone(), rows)?)
}

/// Writes a table with columns `score,status,group,<covariates>`.
pub fn write_table(writer: impl Write, table: &ObservationTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["score".to_string(), "status".to_string(), "group".to_string()];
    header.extend(table.covariate_names().iter().cloned());
    w.write_record(&header)?;
    let labels = table.group_levels();
    for r in table.rows() {
        let mut rec = vec![r.score.to_string(), u8::from(r.status).to_string(), labels[r.group].clone()];
        rec.extend(r.covariates.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}
