use crate::scalar::Real;

use super::NumericsError;

/// Column-major design matrix with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix<T> {
    names: Vec<String>,
    columns: Vec<Vec<T>>,
    rows: usize,
}

impl<T: Real> DesignMatrix<T> {
    pub fn from_columns(names: Vec<String>, columns: Vec<Vec<T>>) -> Result<Self, NumericsError> {
        if names.len() != columns.len() {
            return Err(NumericsError::DimensionMismatch(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        let rows = columns.first().map_or(0, Vec::len);
        if let Some((i, c)) = columns.iter().enumerate().find(|(_, c)| c.len() != rows) {
            return Err(NumericsError::DimensionMismatch(format!(
                "column `{}` has {} rows, expected {rows}",
                names[i],
                c.len()
            )));
        }
        if columns.iter().flatten().any(|v| !v.is_finite()) {
            return Err(NumericsError::NonFinite("design matrix"));
        }
        Ok(Self { names, columns, rows })
    }

    /// Prepends an `(intercept)` column of ones.
    pub fn with_intercept<S: Into<String>>(
        names: impl IntoIterator<Item = S>,
        columns: Vec<Vec<T>>,
    ) -> Result<Self, NumericsError> {
        let rows = columns.first().map_or(0, Vec::len);
        let mut all_names = vec!["(intercept)".to_string()];
        all_names.extend(names.into_iter().map(Into::into));
        let mut all = Vec::with_capacity(columns.len() + 1);
        all.push(vec![T::one(); rows]);
        all.extend(columns);
        Self::from_columns(all_names, all)
    }

    /// Intercept-only design with `rows` rows.
    pub fn intercept_only(rows: usize) -> Self {
        Self {
            names: vec!["(intercept)".to_string()],
            columns: vec![vec![T::one(); rows]],
            rows,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, j: usize) -> &[T] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<T>] {
        &self.columns
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.columns[j][i]
    }

    pub fn row(&self, i: usize) -> Vec<T> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// X·beta.
    pub fn mul_vec(&self, beta: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.rows];
        for (c, &b) in self.columns.iter().zip(beta) {
            for (o, &x) in out.iter_mut().zip(c) {
                *o = *o + x * b;
            }
        }
        out
    }

    /// Rows for which `keep` is true.
    pub fn select_rows(&self, keep: &[bool]) -> Self {
        let columns: Vec<Vec<T>> = self
            .columns
            .iter()
            .map(|c| c.iter().zip(keep).filter(|(_, &k)| k).map(|(&v, _)| v).collect())
            .collect();
        let rows = keep.iter().filter(|&&k| k).count();
        Self {
            names: self.names.clone(),
            columns,
            rows,
        }
    }
}
