//! Column-typed numeric tables.

use std::collections::HashSet;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous,
    Discrete,
}

/// Named numeric columns of equal length, each marked continuous or discrete.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    kinds: Vec<ColumnKind>,
}

impl Dataset {
    /// Builds a dataset, rejecting duplicate names, ragged columns and
    /// non-finite cells.
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>, kinds: Vec<ColumnKind>) -> Result<Self> {
        if names.len() != columns.len() || names.len() != kinds.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} names, {} columns, {} kinds",
                names.len(),
                columns.len(),
                kinds.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateColumn(name.clone()));
            }
        }
        if let Some(first) = columns.first() {
            let n = first.len();
            for (name, col) in names.iter().zip(&columns) {
                if col.len() != n {
                    return Err(Error::DimensionMismatch(format!(
                        "column `{name}` has {} rows, expected {n}",
                        col.len()
                    )));
                }
                if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                    return Err(Error::Parse {
                        row,
                        column: name.clone(),
                        value: col[row].to_string(),
                    });
                }
            }
        }
        Ok(Self {
            names,
            columns,
            kinds,
        })
    }

    /// All-continuous dataset from `(name, values)` pairs.
    pub fn continuous<S: Into<String>>(cols: impl IntoIterator<Item = (S, Vec<f64>)>) -> Result<Self> {
        let (names, columns): (Vec<String>, Vec<Vec<f64>>) =
            cols.into_iter().map(|(n, c)| (n.into(), c)).unzip();
        let kinds = vec![ColumnKind::Continuous; names.len()];
        Self::new(names, columns, kinds)
    }

    pub fn n(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn kinds(&self) -> &[ColumnKind] {
        &self.kinds
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn column(&self, idx: usize) -> &[f64] {
        &self.columns[idx]
    }

    pub fn kind(&self, idx: usize) -> ColumnKind {
        self.kinds[idx]
    }

    /// Marks the named columns as discrete.
    pub fn with_discrete<S: AsRef<str>>(mut self, names: &[S]) -> Result<Self> {
        for name in names {
            let idx = self.index_of(name.as_ref())?;
            self.kinds[idx] = ColumnKind::Discrete;
        }
        Ok(self)
    }

    /// Returns a copy with column `idx` replaced by `f` applied elementwise.
    pub fn map_column(&self, idx: usize, f: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        out.columns[idx].iter_mut().for_each(|v| *v = f(*v));
        out
    }

    /// Returns a copy with rows reordered so that row `i` of the result is row
    /// `perm[i]` of `self`.
    pub fn permute_rows(&self, perm: &[usize]) -> Self {
        let mut out = self.clone();
        for (dst, src) in out.columns.iter_mut().zip(&self.columns) {
            *dst = perm.iter().map(|&i| src[i]).collect();
        }
        out
    }

    /// Returns a copy with columns in the given order.
    pub fn select_columns(&self, order: &[usize]) -> Self {
        Self {
            names: order.iter().map(|&i| self.names[i].clone()).collect(),
            columns: order.iter().map(|&i| self.columns[i].clone()).collect(),
            kinds: order.iter().map(|&i| self.kinds[i]).collect(),
        }
    }

    /// n × k matrix of the given columns, in order.
    pub fn matrix(&self, idx: &[usize]) -> Array2<f64> {
        let n = self.n();
        Array2::from_shape_fn((n, idx.len()), |(i, k)| self.columns[idx[k]][i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicates_and_ragged_columns() {
        let dup = Dataset::continuous([("a", vec![1.0]), ("a", vec![2.0])]);
        assert!(matches!(dup, Err(Error::DuplicateColumn(_))));
        let ragged = Dataset::continuous([("a", vec![1.0, 2.0]), ("b", vec![2.0])]);
        assert!(matches!(ragged, Err(Error::DimensionMismatch(_))));
        let nan = Dataset::continuous([("a", vec![1.0, f64::NAN])]);
        assert!(matches!(nan, Err(Error::Parse { row: 1, .. })));
    }

    #[test]
    fn discrete_marking_checks_names() {
        let d = Dataset::continuous([("a", vec![1.0]), ("b", vec![2.0])]).unwrap();
        let d2 = d.clone().with_discrete(&["b"]).unwrap();
        assert_eq!(d2.kind(1), ColumnKind::Discrete);
        assert!(matches!(
            d.with_discrete(&["zz"]),
            Err(Error::UnknownColumn(_))
        ));
    }

    #[test]
    fn matrix_is_row_major_selection() {
        let d = Dataset::continuous([("a", vec![1.0, 2.0]), ("b", vec![3.0, 4.0])]).unwrap();
        let m = d.matrix(&[1, 0]);
        assert_eq!(m[[0, 0]], 3.0);
        assert_eq!(m[[1, 1]], 2.0);
    }
}
