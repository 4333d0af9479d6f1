use crate::scalar::Real;

use super::{DesignMatrix, NumericsError, PivotedQr};

/// Result of an ordinary or weighted least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit<T> {
    pub names: Vec<String>,
    pub coefficients: Vec<T>,
    /// Weighted residual sum of squares over the degrees of freedom.
    pub residual_variance: T,
    /// `residual_variance · (XᵀWX)⁻¹`.
    pub covariance: Vec<Vec<T>>,
    /// `(XᵀWX)⁻¹`.
    pub unscaled_covariance: Vec<Vec<T>>,
    pub dof: usize,
}

impl<T: Real> LinearFit<T> {
    pub fn coefficient(&self, name: &str) -> Option<T> {
        self.names.iter().position(|n| n == name).map(|i| self.coefficients[i])
    }

    pub fn std_error(&self, name: &str) -> Option<T> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.covariance[i][i].sqrt())
    }

    pub fn variance(&self, name: &str) -> Option<T> {
        self.names.iter().position(|n| n == name).map(|i| self.covariance[i][i])
    }

    pub fn predict(&self, row: &[T]) -> T {
        row.iter().zip(&self.coefficients).map(|(&x, &b)| x * b).sum()
    }
}

pub fn ols_fit<T: Real>(x: &DesignMatrix<T>, y: &[T]) -> Result<LinearFit<T>, NumericsError> {
    let ones = vec![T::one(); y.len()];
    wls_fit(x, y, &ones)
}

/// Minimizes Σ wᵢ (yᵢ − xᵢβ)² by pivoted QR of W^{1/2}X.
pub fn wls_fit<T: Real>(x: &DesignMatrix<T>, y: &[T], w: &[T]) -> Result<LinearFit<T>, NumericsError> {
    let n = x.rows();
    let p = x.cols();
    if y.len() != n || w.len() != n {
        return Err(NumericsError::DimensionMismatch(format!(
            "design has {n} rows, response {} and weights {}",
            y.len(),
            w.len()
        )));
    }
    if n <= p {
        return Err(NumericsError::TooFewRows { rows: n, cols: p });
    }
    if let Some((index, &value)) = w.iter().enumerate().find(|(_, &v)| !(v > T::zero())) {
        return Err(NumericsError::NonPositiveWeight {
            index,
            value: value.to_f64_lossy(),
        });
    }
    if y.iter().chain(w).any(|v| !v.is_finite()) {
        return Err(NumericsError::NonFinite("response or weights"));
    }
    let sw: Vec<T> = w.iter().map(|v| v.sqrt()).collect();
    let columns: Vec<Vec<T>> = x
        .columns()
        .iter()
        .map(|c| c.iter().zip(&sw).map(|(&a, &s)| a * s).collect())
        .collect();
    let swy: Vec<T> = y.iter().zip(&sw).map(|(&a, &s)| a * s).collect();
    let qr = PivotedQr::new(columns)?;
    let coefficients = qr.solve(&swy);
    let fitted = x.mul_vec(&coefficients);
    let rss: T = y
        .iter()
        .zip(&fitted)
        .zip(w)
        .map(|((&yi, &fi), &wi)| wi * (yi - fi) * (yi - fi))
        .sum();
    let dof = n - p;
    let residual_variance = rss / T::from_usize_lossy(dof);
    let unscaled_covariance = qr.inverse_gram();
    let covariance = unscaled_covariance
        .iter()
        .map(|row| row.iter().map(|&v| v * residual_variance).collect())
        .collect();
    Ok(LinearFit {
        names: x.names().to_vec(),
        coefficients,
        residual_variance,
        covariance,
        unscaled_covariance,
        dof,
    })
}
