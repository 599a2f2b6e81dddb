//! Panel data in long format: one record per person-occasion.
//!
//! The response stored at occasion `t` is the proximal outcome `Y_{t+1}`
//! observed after the treatment decision at `t`.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("ragged panel: {0}")]
    RaggedPanel(String),
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("parse error at line {line}, column `{column}`: {message}")]
    ParseError {
        line: usize,
        column: String,
        message: String,
    },
    #[error("i/o error: {0}")]
    Io(String),
}

/// A single person-occasion record.
#[derive(Debug, Clone, PartialEq)]
pub struct Occasion {
    /// Availability indicator `I_t`.
    pub available: bool,
    /// Treatment indicator `A_t`.
    pub treatment: u8,
    /// Covariates `X_t`, aligned with [`PanelDataset::covariate_names`].
    pub covariates: Vec<f64>,
    /// Response `Y_{t+1}`.
    pub response: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndividualSeries {
    pub id: String,
    pub occasions: Vec<Occasion>,
}

impl IndividualSeries {
    fn validate(&self, n_covariates: usize) -> Result<(), DataError> {
        for (idx, occ) in self.occasions.iter().enumerate() {
            let t = idx + 1;
            if occ.treatment > 1 {
                return Err(DataError::InvariantViolation(format!(
                    "individual `{}` occasion {t}: treatment must be 0 or 1",
                    self.id
                )));
            }
            if !occ.available && occ.treatment == 1 {
                return Err(DataError::InvariantViolation(format!(
                    "individual `{}` occasion {t}: treated while unavailable",
                    self.id
                )));
            }
            if occ.covariates.len() != n_covariates {
                return Err(DataError::InvariantViolation(format!(
                    "individual `{}` occasion {t}: expected {n_covariates} covariates, found {}",
                    self.id,
                    occ.covariates.len()
                )));
            }
            if !occ.response.is_finite() || occ.covariates.iter().any(|v| !v.is_finite()) {
                return Err(DataError::InvariantViolation(format!(
                    "individual `{}` occasion {t}: non-finite value",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

/// Validated, complete panel of `n` individuals observed at `T` occasions each.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    covariate_names: Vec<String>,
    individuals: Vec<IndividualSeries>,
    occasions: usize,
}

impl PanelDataset {
    pub fn new(covariate_names: Vec<String>, individuals: Vec<IndividualSeries>) -> Result<Self, DataError> {
        let first = individuals
            .first()
            .ok_or_else(|| DataError::RaggedPanel("dataset has no individuals".into()))?;
        let occasions = first.occasions.len();
        if occasions == 0 {
            return Err(DataError::RaggedPanel(format!(
                "individual `{}` has no occasions",
                first.id
            )));
        }
        for ind in &individuals {
            if ind.occasions.len() != occasions {
                return Err(DataError::RaggedPanel(format!(
                    "individual `{}` has {} occasions, expected {occasions}",
                    ind.id,
                    ind.occasions.len()
                )));
            }
            ind.validate(covariate_names.len())?;
        }
        Ok(Self {
            covariate_names,
            individuals,
            occasions,
        })
    }

    pub fn n(&self) -> usize {
        self.individuals.len()
    }

    /// Number of occasions `T` per individual.
    pub fn occasions(&self) -> usize {
        self.occasions
    }

    pub fn individuals(&self) -> &[IndividualSeries] {
        &self.individuals
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn covariate_index(&self, name: &str) -> Option<usize> {
        self.covariate_names.iter().position(|c| c == name)
    }

    /// Per-individual, per-occasion values of a covariate column.
    pub fn covariate_table(&self, name: &str) -> Option<Vec<Vec<f64>>> {
        let j = self.covariate_index(name)?;
        Some(
            self.individuals
                .iter()
                .map(|ind| ind.occasions.iter().map(|o| o.covariates[j]).collect())
                .collect(),
        )
    }
}

/// Column names used when reading a long-format CSV.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsvSchema {
    pub id: String,
    pub t: String,
    pub avail: String,
    pub trt: String,
    pub y: String,
    /// Covariate columns to keep. Empty means every other column.
    pub covariates: Vec<String>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            id: "id".into(),
            t: "t".into(),
            avail: "avail".into(),
            trt: "trt".into(),
            y: "y".into(),
            covariates: Vec::new(),
        }
    }
}

pub fn ingest_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<PanelDataset, DataError> {
    let file =
        std::fs::File::open(path.as_ref()).map_err(|e| DataError::Io(format!("{}: {e}", path.as_ref().display())))?;
    ingest_reader(file, schema)
}

pub fn ingest_reader<R: Read>(reader: R, schema: &CsvSchema) -> Result<PanelDataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| DataError::Io(e.to_string()))?.clone();
    let find = |name: &str| -> Result<usize, DataError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    };
    let id_col = find(&schema.id)?;
    let t_col = find(&schema.t)?;
    let avail_col = find(&schema.avail)?;
    let trt_col = find(&schema.trt)?;
    let y_col = find(&schema.y)?;
    let reserved = [id_col, t_col, avail_col, trt_col, y_col];
    let covariate_names: Vec<String> = if schema.covariates.is_empty() {
        headers
            .iter()
            .enumerate()
            .filter(|(j, _)| !reserved.contains(j))
            .map(|(_, h)| h.to_string())
            .collect()
    } else {
        schema.covariates.clone()
    };
    let covariate_cols = covariate_names.iter().map(|c| find(c)).collect::<Result<Vec<_>, _>>()?;

    let mut order: Vec<String> = Vec::new();
    let mut by_id: HashMap<String, Vec<(i64, Occasion)>> = HashMap::new();
    for (row_idx, record) in rdr.records().enumerate() {
        // header is line 1
        let line = row_idx + 2;
        let record = record.map_err(|e| DataError::Io(e.to_string()))?;
        let cell = |j: usize| record.get(j).unwrap_or("");
        let number = |j: usize| -> Result<f64, DataError> {
            let raw = cell(j);
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| DataError::ParseError {
                    line,
                    column: headers.get(j).unwrap_or("").to_string(),
                    message: format!("expected a finite number, found `{raw}`"),
                })
        };
        let binary = |j: usize| -> Result<u8, DataError> {
            let v = number(j)?;
            if v == 0.0 {
                Ok(0)
            } else if v == 1.0 {
                Ok(1)
            } else {
                Err(DataError::InvariantViolation(format!(
                    "line {line}: column `{}` must be 0 or 1, found {v}",
                    headers.get(j).unwrap_or("")
                )))
            }
        };
        let id = cell(id_col).to_string();
        let t = number(t_col)?;
        if t.fract() != 0.0 {
            return Err(DataError::ParseError {
                line,
                column: schema.t.clone(),
                message: format!("occasion index must be an integer, found {t}"),
            });
        }
        let avail = binary(avail_col)?;
        let trt = binary(trt_col)?;
        if avail == 0 && trt == 1 {
            return Err(DataError::InvariantViolation(format!(
                "line {line}: individual `{id}` treated while unavailable"
            )));
        }
        let covariates = covariate_cols
            .iter()
            .map(|&j| number(j))
            .collect::<Result<Vec<_>, _>>()?;
        let occ = Occasion {
            available: avail == 1,
            treatment: trt,
            covariates,
            response: number(y_col)?,
        };
        by_id
            .entry(id.clone())
            .or_insert_with(|| {
                order.push(id.clone());
                Vec::new()
            })
            .push((t as i64, occ));
    }

    let mut individuals = Vec::with_capacity(order.len());
    for id in order {
        let mut rows = by_id.remove(&id).unwrap_or_default();
        rows.sort_by_key(|(t, _)| *t);
        for (expected, (t, _)) in rows.iter().enumerate() {
            if *t != expected as i64 + 1 {
                return Err(DataError::RaggedPanel(format!(
                    "individual `{id}`: occasions must run 1..T without gaps or duplicates (found t={t} at position {})",
                    expected + 1
                )));
            }
        }
        individuals.push(IndividualSeries {
            id,
            occasions: rows.into_iter().map(|(_, o)| o).collect(),
        });
    }
    if individuals.is_empty() {
        return Err(DataError::RaggedPanel("file contains no data rows".into()));
    }
    PanelDataset::new(covariate_names, individuals)
}

/// Write a dataset in the same long format accepted by [`ingest_reader`].
pub fn write_csv<W: std::io::Write>(data: &PanelDataset, writer: W) -> Result<(), DataError> {
    let mut wtr = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| DataError::Io(e.to_string());
    let mut header = vec!["id".to_string(), "t".into(), "avail".into(), "trt".into(), "y".into()];
    header.extend(data.covariate_names.iter().cloned());
    wtr.write_record(&header).map_err(io)?;
    for ind in &data.individuals {
        for (idx, occ) in ind.occasions.iter().enumerate() {
            let mut rec = vec![
                ind.id.clone(),
                (idx + 1).to_string(),
                u8::from(occ.available).to_string(),
                occ.treatment.to_string(),
                format!("{}", occ.response),
            ];
            rec.extend(occ.covariates.iter().map(|v| format!("{v}")));
            wtr.write_record(&rec).map_err(io)?;
        }
    }
    wtr.flush().map_err(|e| DataError::Io(e.to_string()))
}
