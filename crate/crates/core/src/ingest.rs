//! Keyed panel records: parsing, validation, and per-dyad series extraction.
//!
//! Each record is one access event of a caregiver–elder dyad, identified by
//! the composite key `(id_caregiver, tick, day, hour)`. Records are ordered by
//! dyad and then by `tick`, which is the canonical clock; `day` and `hour` are
//! only range-checked and used as tie breakers within a tick.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const KEY_COLUMNS: [&str; 4] = ["id_caregiver", "tick", "day", "hour"];

pub const DEFAULT_OBSERVABLES: [&str; 4] = ["efforts", "wkb", "hrsncared", "overwhelmed"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("header contains none of the observable columns {0:?}")]
    NoObservables(Vec<String>),
    #[error("line {line}, column `{column}`: cannot parse {value:?} as {expected}")]
    TypeError {
        line: u64,
        column: String,
        value: String,
        expected: &'static str,
    },
    #[error("line {line}, column `{column}`: {message}")]
    OutOfRange {
        line: u64,
        column: String,
        message: String,
    },
    #[error("duplicate composite key (id_caregiver={id}, tick={tick}, day={day}, hour={hour})")]
    DuplicateKey {
        id: String,
        tick: u64,
        day: u64,
        hour: u8,
    },
    #[error("unknown dyad `{0}`")]
    UnknownDyad(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("malformed csv: {0}")]
    Csv(String),
}

impl From<csv::Error> for IngestError {
    fn from(e: csv::Error) -> Self {
        IngestError::Csv(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub id_caregiver: String,
    pub tick: u64,
    pub day: u64,
    pub hour: u8,
    /// Observable values, aligned with [`Dataset::variables`].
    pub values: Vec<f64>,
    pub covariates: BTreeMap<String, String>,
}

impl Record {
    fn key(&self) -> (&str, u64, u64, u8) {
        (&self.id_caregiver, self.tick, self.day, self.hour)
    }
}

/// An immutable, validated collection of records sorted by `(id_caregiver, tick, day, hour)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<Record>,
    variables: Vec<String>,
    covariate_names: Vec<String>,
    dyads: BTreeMap<String, Range<usize>>,
}

/// The time-ordered values of one variable for one dyad.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSeries {
    pub dyad_id: String,
    pub variable: String,
    pub values: Vec<f64>,
    pub ticks: Vec<u64>,
}

impl RawSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl Dataset {
    /// Validates and sorts records.
    ///
    /// Every record must carry one value per entry of `variables` and only
    /// covariates named in `covariate_names`.
    pub fn from_records(
        mut records: Vec<Record>,
        variables: Vec<String>,
        covariate_names: Vec<String>,
    ) -> Result<Self, IngestError> {
        for (i, r) in records.iter().enumerate() {
            // Synthetic line numbers as if the records came from a csv with a header.
            let line = i as u64 + 2;
            if r.values.len() != variables.len() {
                return Err(IngestError::OutOfRange {
                    line,
                    column: "values".into(),
                    message: format!(
                        "expected {} observable values, found {}",
                        variables.len(),
                        r.values.len()
                    ),
                });
            }
            if r.hour > 23 {
                return Err(IngestError::OutOfRange {
                    line,
                    column: "hour".into(),
                    message: format!("hour {} outside [0, 23]", r.hour),
                });
            }
            for (name, &v) in variables.iter().zip(&r.values) {
                check_observable(name, v, line)?;
            }
            if let Some(extra) = r.covariates.keys().find(|k| !covariate_names.contains(k)) {
                return Err(IngestError::OutOfRange {
                    line,
                    column: extra.clone(),
                    message: "covariate not declared in the dataset header".into(),
                });
            }
        }

        records.sort_by(|a, b| a.key().cmp(&b.key()));
        if let Some(w) = records.windows(2).find(|w| w[0].key() == w[1].key()) {
            let r = &w[0];
            return Err(IngestError::DuplicateKey {
                id: r.id_caregiver.clone(),
                tick: r.tick,
                day: r.day,
                hour: r.hour,
            });
        }

        let mut dyads = BTreeMap::new();
        let mut start = 0;
        for i in 1..=records.len() {
            if i == records.len() || records[i].id_caregiver != records[start].id_caregiver {
                dyads.insert(records[start].id_caregiver.clone(), start..i);
                start = i;
            }
        }

        Ok(Dataset {
            records,
            variables,
            covariate_names,
            dyads,
        })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Dyad ids in ascending order.
    pub fn dyad_ids(&self) -> impl Iterator<Item = &str> {
        self.dyads.keys().map(String::as_str)
    }

    pub fn n_dyads(&self) -> usize {
        self.dyads.len()
    }

    pub fn dyad_records(&self, dyad_id: &str) -> Result<&[Record], IngestError> {
        self.dyads
            .get(dyad_id)
            .map(|r| &self.records[r.clone()])
            .ok_or_else(|| IngestError::UnknownDyad(dyad_id.to_string()))
    }

    pub fn variable_index(&self, variable: &str) -> Result<usize, IngestError> {
        self.variables
            .iter()
            .position(|v| v == variable)
            .ok_or_else(|| IngestError::UnknownVariable(variable.to_string()))
    }

    /// Values of `variable` for `dyad_id`, in tick order.
    pub fn extract_series(&self, dyad_id: &str, variable: &str) -> Result<RawSeries, IngestError> {
        let records = self.dyad_records(dyad_id)?;
        let idx = self.variable_index(variable)?;
        Ok(RawSeries {
            dyad_id: dyad_id.to_string(),
            variable: variable.to_string(),
            values: records.iter().map(|r| r.values[idx]).collect(),
            ticks: records.iter().map(|r| r.tick).collect(),
        })
    }

    /// All values of `variable` across dyads (dyad ascending, then tick order).
    pub fn pooled_values(&self, variable: &str) -> Result<Vec<f64>, IngestError> {
        let idx = self.variable_index(variable)?;
        Ok(self.records.iter().map(|r| r.values[idx]).collect())
    }

    /// Serializes back to the csv schema accepted by [`parse_records_with`].
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header: Vec<&str> = KEY_COLUMNS
            .iter()
            .copied()
            .chain(self.variables.iter().map(String::as_str))
            .chain(self.covariate_names.iter().map(String::as_str))
            .collect();
        w.write_record(&header).expect("in-memory csv write");
        for r in &self.records {
            let mut row = vec![
                r.id_caregiver.clone(),
                r.tick.to_string(),
                r.day.to_string(),
                r.hour.to_string(),
            ];
            row.extend(r.values.iter().map(|v| v.to_string()));
            row.extend(
                self.covariate_names
                    .iter()
                    .map(|c| r.covariates.get(c).cloned().unwrap_or_default()),
            );
            w.write_record(&row).expect("in-memory csv write");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("utf-8 csv")
    }
}

fn check_observable(name: &str, v: f64, line: u64) -> Result<(), IngestError> {
    let bad = |message: String| IngestError::OutOfRange {
        line,
        column: name.to_string(),
        message,
    };
    if !v.is_finite() {
        return Err(bad(format!("non-finite value {v}")));
    }
    match name {
        "hrsncared" if v < 0.0 => Err(bad(format!("hrsncared must be >= 0, found {v}"))),
        "overwhelmed" if v != 0.0 && v != 1.0 => {
            Err(bad(format!("overwhelmed must be 0 or 1, found {v}")))
        }
        _ => Ok(()),
    }
}

/// Parses csv text using the default observable list.
pub fn parse_records(csv_text: &str) -> Result<Dataset, IngestError> {
    let observables: Vec<String> = DEFAULT_OBSERVABLES.iter().map(|s| s.to_string()).collect();
    parse_records_with(csv_text, &observables)
}

/// Parses csv text. Columns named in `observables` that are present in the
/// header become variables (in `observables` order); other non-key columns
/// become covariates (in header order).
pub fn parse_records_with(csv_text: &str, observables: &[String]) -> Result<Dataset, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(csv_text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let column = |name: &str| header.iter().position(|h| h == name);

    let mut key_idx = [0usize; 4];
    for (slot, name) in key_idx.iter_mut().zip(KEY_COLUMNS) {
        *slot = column(name).ok_or_else(|| IngestError::MissingColumn(name.to_string()))?;
    }
    let variables: Vec<String> = observables
        .iter()
        .filter(|o| column(o).is_some())
        .cloned()
        .collect();
    if variables.is_empty() {
        return Err(IngestError::NoObservables(observables.to_vec()));
    }
    let var_idx: Vec<usize> = variables.iter().map(|v| column(v).unwrap()).collect();
    let covariate_names: Vec<String> = header
        .iter()
        .filter(|h| !KEY_COLUMNS.contains(&h.as_str()) && !variables.contains(h))
        .cloned()
        .collect();
    let cov_idx: Vec<usize> = covariate_names.iter().map(|c| column(c).unwrap()).collect();

    let mut records = Vec::new();
    let mut seen = BTreeSet::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let cell = |i: usize| row.get(i).unwrap_or("");
        let type_err = |i: usize, expected: &'static str| IngestError::TypeError {
            line,
            column: header[i].clone(),
            value: cell(i).to_string(),
            expected,
        };

        let id = cell(key_idx[0]).to_string();
        if id.is_empty() {
            return Err(type_err(key_idx[0], "non-empty id"));
        }
        let tick: u64 = cell(key_idx[1])
            .parse()
            .map_err(|_| type_err(key_idx[1], "non-negative integer"))?;
        let day: u64 = cell(key_idx[2])
            .parse()
            .map_err(|_| type_err(key_idx[2], "non-negative integer"))?;
        let hour: u8 = cell(key_idx[3])
            .parse()
            .map_err(|_| type_err(key_idx[3], "integer hour"))?;
        if hour > 23 {
            return Err(IngestError::OutOfRange {
                line,
                column: "hour".into(),
                message: format!("hour {hour} outside [0, 23]"),
            });
        }

        let mut values = Vec::with_capacity(var_idx.len());
        for (name, &i) in variables.iter().zip(&var_idx) {
            let v: f64 = cell(i).parse().map_err(|_| type_err(i, "real number"))?;
            check_observable(name, v, line)?;
            values.push(v);
        }
        let covariates = covariate_names
            .iter()
            .zip(&cov_idx)
            .map(|(name, &i)| (name.clone(), cell(i).to_string()))
            .collect();

        if !seen.insert((id.clone(), tick, day, hour)) {
            return Err(IngestError::DuplicateKey {
                id,
                tick,
                day,
                hour,
            });
        }
        records.push(Record {
            id_caregiver: id,
            tick,
            day,
            hour,
            values,
            covariates,
        });
    }

    Dataset::from_records(records, variables, covariate_names)
}
