use serde::Serialize;

use crate::scalar::Real;

use super::NumericsError;

/// Rubin's-rules combination of m completed-data analyses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PooledEstimate<T> {
    pub point: T,
    pub within_var: T,
    pub between_var: T,
    pub total_var: T,
    pub m: usize,
}

/// point = mean, W = mean variance, B = sample variance of the estimates,
/// T = W + (1 + 1/m) B.
pub fn rubins_pool<T: Real>(estimates: &[T], variances: &[T]) -> Result<PooledEstimate<T>, NumericsError> {
    let m = estimates.len();
    if variances.len() != m {
        return Err(NumericsError::DimensionMismatch(format!(
            "{m} estimates but {} variances",
            variances.len()
        )));
    }
    if m < 2 {
        return Err(NumericsError::TooFewImputations(m));
    }
    if let Some(&v) = variances.iter().find(|&&v| !(v >= T::zero())) {
        return Err(NumericsError::NegativeVariance(v.to_f64_lossy()));
    }
    let mf = T::from_usize_lossy(m);
    let within_var = variances.iter().copied().sum::<T>() / mf;
    // mean taken relative to the smallest estimate, which is exact when all
    // estimates coincide
    let low = estimates.iter().copied().fold(estimates[0], T::min);
    let point = low + estimates.iter().map(|&e| e - low).sum::<T>() / mf;
    let between_var = estimates.iter().map(|&e| (e - point) * (e - point)).sum::<T>() / (mf - T::one());
    let total_var = within_var + (T::one() + T::one() / mf) * between_var;
    Ok(PooledEstimate {
        point,
        within_var,
        between_var,
        total_var,
        m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_imputations_by_hand() {
        let p = rubins_pool(&[1.0, 2.0], &[0.5, 0.5]).unwrap();
        assert_eq!(p.point, 1.5);
        assert_eq!(p.within_var, 0.5);
        assert_eq!(p.between_var, 0.5);
        assert_eq!(p.total_var, 1.25);
    }

    #[test]
    fn identical_estimates_have_no_between_variance() {
        let p = rubins_pool(&[0.3; 5], &[0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
        assert_eq!(p.between_var, 0.0);
        assert_eq!(p.total_var, p.within_var);
    }

    #[test]
    fn errors() {
        assert_eq!(rubins_pool(&[1.0], &[0.1]), Err(NumericsError::TooFewImputations(1)));
        assert!(rubins_pool(&[1.0, 2.0], &[0.1, -0.1]).is_err());
        assert!(rubins_pool(&[1.0, 2.0], &[0.1]).is_err());
    }
}
