//! The n×m score matrix: rows are training instances, columns are constraints.

use std::collections::HashSet;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    values: DMatrix<f64>,
    constraint_ids: Vec<String>,
    instance_ids: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct ScoreMatrixJson {
    instance_ids: Vec<String>,
    constraint_ids: Vec<String>,
    values: Vec<Vec<f64>>,
}

fn check_unique(ids: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateId(id.clone()));
        }
    }
    Ok(())
}

impl ScoreMatrix {
    pub fn new(
        values: DMatrix<f64>,
        instance_ids: Vec<String>,
        constraint_ids: Vec<String>,
    ) -> Result<Self> {
        let (n, m) = values.shape();
        if n < 2 || m < 1 {
            return Err(Error::TooFewInstances { rows: n, cols: m });
        }
        if instance_ids.len() != n || constraint_ids.len() != m {
            return Err(Error::Shape(format!(
                "{}x{} values with {} instance ids and {} constraint ids",
                n,
                m,
                instance_ids.len(),
                constraint_ids.len()
            )));
        }
        for i in 0..n {
            for j in 0..m {
                let v = values[(i, j)];
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
            }
        }
        check_unique(&instance_ids)?;
        check_unique(&constraint_ids)?;
        Ok(ScoreMatrix {
            values,
            constraint_ids,
            instance_ids,
        })
    }

    /// Builds a matrix with generated ids `i0..`, `c0..`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::Shape("ragged rows".into()));
        }
        let values = DMatrix::from_fn(n, m, |i, j| rows[i][j]);
        Self::new(
            values,
            (0..n).map(|i| format!("i{i}")).collect(),
            (0..m).map(|j| format!("c{j}")).collect(),
        )
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n_instances(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_constraints(&self) -> usize {
        self.values.ncols()
    }

    pub fn constraint_ids(&self) -> &[String] {
        &self.constraint_ids
    }

    pub fn instance_ids(&self) -> &[String] {
        &self.instance_ids
    }

    pub fn get(&self, instance: usize, constraint: usize) -> f64 {
        self.values[(instance, constraint)]
    }

    pub fn row(&self, instance: usize) -> Vec<f64> {
        self.values.row(instance).iter().copied().collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = Vec::with_capacity(self.n_constraints() + 1);
        header.push("instance_id".to_string());
        header.extend(self.constraint_ids.iter().cloned());
        w.write_record(&header)?;
        for (i, id) in self.instance_ids.iter().enumerate() {
            let mut rec = Vec::with_capacity(self.n_constraints() + 1);
            rec.push(id.clone());
            // `Display` for f64 prints the shortest string that parses back
            // to the identical bit pattern.
            rec.extend(self.values.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let header = r.headers()?.clone();
        if header.len() < 2 {
            return Err(Error::Parse(
                "score csv needs at least one constraint column".into(),
            ));
        }
        let constraint_ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut instance_ids = Vec::new();
        let mut flat = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(Error::Parse(format!(
                    "row has {} fields, expected {}",
                    rec.len(),
                    header.len()
                )));
            }
            instance_ids.push(rec[0].to_string());
            for cell in rec.iter().skip(1) {
                let v: f64 = cell
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad score `{cell}`")))?;
                flat.push(v);
            }
        }
        let values = DMatrix::from_row_slice(instance_ids.len(), constraint_ids.len(), &flat);
        Self::new(values, instance_ids, constraint_ids)
    }

    pub fn to_json(&self) -> Result<String> {
        let j = ScoreMatrixJson {
            instance_ids: self.instance_ids.clone(),
            constraint_ids: self.constraint_ids.clone(),
            values: (0..self.n_instances()).map(|i| self.row(i)).collect(),
        };
        Ok(serde_json::to_string(&j)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: ScoreMatrixJson = serde_json::from_str(s)?;
        let n = j.values.len();
        let m = j.constraint_ids.len();
        if j.values.iter().any(|r| r.len() != m) {
            return Err(Error::Shape(
                "values rows do not match constraint_ids".into(),
            ));
        }
        let values = DMatrix::from_fn(n, m, |i, k| j.values[i][k]);
        Self::new(values, j.instance_ids, j.constraint_ids)
    }

    /// Keeps the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let values = DMatrix::from_fn(rows.len(), self.n_constraints(), |i, j| {
            self.values[(rows[i], j)]
        });
        Self::new(
            values,
            rows.iter().map(|&r| self.instance_ids[r].clone()).collect(),
            self.constraint_ids.clone(),
        )
    }

    /// Keeps the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        let values = DMatrix::from_fn(self.n_instances(), cols.len(), |i, j| {
            self.values[(i, cols[j])]
        });
        Self::new(
            values,
            self.instance_ids.clone(),
            cols.iter()
                .map(|&c| self.constraint_ids[c].clone())
                .collect(),
        )
    }

    pub(crate) fn map_values(&self, f: impl Fn(usize, usize, f64) -> f64) -> Self {
        let values = DMatrix::from_fn(self.n_instances(), self.n_constraints(), |i, j| {
            f(i, j, self.values[(i, j)])
        });
        ScoreMatrix {
            values,
            constraint_ids: self.constraint_ids.clone(),
            instance_ids: self.instance_ids.clone(),
        }
    }
}
