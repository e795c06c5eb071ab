use serde::{Deserialize, Serialize};

use super::LearnError;

pub const OTHER_CATEGORY: &str = "__other__";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, ColumnData::Numeric(_))
    }

    fn take(&self, rows: &[usize]) -> ColumnData {
        match self {
            ColumnData::Numeric(v) => ColumnData::Numeric(rows.iter().map(|&i| v[i]).collect()),
            ColumnData::Categorical(v) => ColumnData::Categorical(rows.iter().map(|&i| v[i].clone()).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
}

/// Column-major table of mixed numeric and categorical features.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    columns: Vec<Column>,
    n_rows: usize,
}

impl FeatureMatrix {
    pub fn new(columns: Vec<Column>) -> Result<Self, LearnError> {
        let n_rows = columns.first().map_or(0, |c| c.data.len());
        if let Some(bad) = columns.iter().find(|c| c.data.len() != n_rows) {
            return Err(LearnError::RaggedColumns {
                column: bad.name.clone(),
                expected: n_rows,
                found: bad.data.len(),
            });
        }
        Ok(Self { columns, n_rows })
    }

    /// A matrix with no columns but a fixed row count.
    pub fn empty(n_rows: usize) -> Self {
        Self {
            columns: Vec::new(),
            n_rows,
        }
    }

    /// Numeric-only matrix from row-major data.
    pub fn from_rows(names: &[&str], rows: &[Vec<f64>]) -> Result<Self, LearnError> {
        let columns = names
            .iter()
            .enumerate()
            .map(|(j, name)| Column {
                name: name.to_string(),
                data: ColumnData::Numeric(rows.iter().map(|r| r[j]).collect()),
            })
            .collect();
        let mut m = Self::new(columns)?;
        m.n_rows = rows.len();
        Ok(m)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn push_column(&mut self, column: Column) -> Result<(), LearnError> {
        if !self.columns.is_empty() || self.n_rows != 0 {
            if column.data.len() != self.n_rows {
                return Err(LearnError::RaggedColumns {
                    column: column.name,
                    expected: self.n_rows,
                    found: column.data.len(),
                });
            }
        } else {
            self.n_rows = column.data.len();
        }
        self.columns.push(column);
        Ok(())
    }

    pub fn push_numeric(&mut self, name: &str, values: Vec<f64>) -> Result<(), LearnError> {
        self.push_column(Column {
            name: name.to_string(),
            data: ColumnData::Numeric(values),
        })
    }

    pub fn take_rows(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            columns: self
                .columns
                .iter()
                .map(|c| Column {
                    name: c.name.clone(),
                    data: c.data.take(rows),
                })
                .collect(),
            n_rows: rows.len(),
        }
    }

    /// Columns whose names are in `names`, in this matrix's order.
    pub fn select(&self, names: &[&str]) -> FeatureMatrix {
        FeatureMatrix {
            columns: self
                .columns
                .iter()
                .filter(|c| names.contains(&c.name.as_str()))
                .cloned()
                .collect(),
            n_rows: self.n_rows,
        }
    }

    pub fn hconcat(&self, other: &FeatureMatrix) -> Result<FeatureMatrix, LearnError> {
        let mut out = self.clone();
        for c in &other.columns {
            out.push_column(c.clone())?;
        }
        Ok(out)
    }
}

/// Row-major dense `f64` matrix consumed by the learners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n_rows * n_cols, "dense matrix shape");
        Self { n_rows, n_cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n_cols = rows.first().map_or(0, Vec::len);
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(rows.len(), n_cols, data)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n_cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.n_cols..(row + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    /// Column-wise zero mean, unit variance (population variance). Constant
    /// columns are centered only.
    pub fn standardized(&self) -> DenseMatrix {
        let mut out = self.clone();
        if self.n_rows == 0 {
            return out;
        }
        let n = self.n_rows as f64;
        for j in 0..self.n_cols {
            let mean = (0..self.n_rows).map(|i| self.get(i, j)).sum::<f64>() / n;
            let var = (0..self.n_rows).map(|i| (self.get(i, j) - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            for i in 0..self.n_rows {
                let v = self.get(i, j) - mean;
                out.data[i * self.n_cols + j] = if sd > 0.0 { v / sd } else { v };
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum EncodedColumn {
    Numeric { name: String },
    Categorical { name: String, vocabulary: Vec<String> },
}

/// One-hot encoding fitted on training data. Vocabulary order is the order
/// of first appearance; unseen values fall into `__other__` when the
/// training vocabulary had it, otherwise they encode as all zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneHotEncoder {
    columns: Vec<EncodedColumn>,
}

impl OneHotEncoder {
    pub fn fit(x: &FeatureMatrix) -> Self {
        let columns = x
            .columns()
            .iter()
            .map(|c| match &c.data {
                ColumnData::Numeric(_) => EncodedColumn::Numeric { name: c.name.clone() },
                ColumnData::Categorical(values) => {
                    let mut vocabulary: Vec<String> = Vec::new();
                    for v in values {
                        if !vocabulary.contains(v) {
                            vocabulary.push(v.clone());
                        }
                    }
                    EncodedColumn::Categorical {
                        name: c.name.clone(),
                        vocabulary,
                    }
                }
            })
            .collect();
        Self { columns }
    }

    pub fn n_outputs(&self) -> usize {
        self.columns
            .iter()
            .map(|c| match c {
                EncodedColumn::Numeric { .. } => 1,
                EncodedColumn::Categorical { vocabulary, .. } => vocabulary.len(),
            })
            .sum()
    }

    /// Names of the encoded columns: numeric columns keep their name,
    /// indicators are `column=value`.
    pub fn output_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.n_outputs());
        for c in &self.columns {
            match c {
                EncodedColumn::Numeric { name } => names.push(name.clone()),
                EncodedColumn::Categorical { name, vocabulary } => {
                    names.extend(vocabulary.iter().map(|v| format!("{name}={v}")))
                }
            }
        }
        names
    }

    pub fn transform(&self, x: &FeatureMatrix) -> Result<DenseMatrix, LearnError> {
        if x.n_cols() != self.columns.len() {
            return Err(LearnError::SchemaMismatch(format!(
                "expected {} columns, found {}",
                self.columns.len(),
                x.n_cols()
            )));
        }
        let n_out = self.n_outputs();
        let mut data = vec![0.0; x.n_rows() * n_out];
        let mut offset = 0;
        for (spec, col) in self.columns.iter().zip(x.columns()) {
            match (spec, &col.data) {
                (EncodedColumn::Numeric { name }, ColumnData::Numeric(values)) if *name == col.name => {
                    for (i, v) in values.iter().enumerate() {
                        data[i * n_out + offset] = *v;
                    }
                    offset += 1;
                }
                (EncodedColumn::Categorical { name, vocabulary }, ColumnData::Categorical(values))
                    if *name == col.name =>
                {
                    let other = vocabulary.iter().position(|v| v == OTHER_CATEGORY);
                    for (i, v) in values.iter().enumerate() {
                        if let Some(k) = vocabulary.iter().position(|w| w == v).or(other) {
                            data[i * n_out + offset + k] = 1.0;
                        }
                    }
                    offset += vocabulary.len();
                }
                _ => {
                    return Err(LearnError::SchemaMismatch(format!(
                        "column `{}` does not match the training schema",
                        col.name
                    )))
                }
            }
        }
        Ok(DenseMatrix::new(x.n_rows(), n_out, data))
    }
}
