use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::scalar::Real;

use super::{LinearFit, LogisticFit};

/// One draw of model parameters from their (approximate) posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterDraw<T> {
    pub coefficients: Vec<T>,
    /// Drawn residual variance (linear models only).
    pub residual_variance: Option<T>,
}

pub trait PosteriorDraw<T: Real> {
    fn posterior_draw<R: Rng + ?Sized>(&self, rng: &mut R) -> ParameterDraw<T>;
}

/// Lower Cholesky factor of a symmetric positive semi-definite matrix;
/// columns with a non-positive pivot are zeroed.
pub fn cholesky_psd<T: Real>(a: &[Vec<T>]) -> Vec<Vec<T>> {
    let p = a.len();
    let mut l = vec![vec![T::zero(); p]; p];
    let scale = (0..p).map(|i| a[i][i].abs()).fold(T::zero(), T::max);
    let tiny = scale * T::epsilon() * T::c(16.0);
    for j in 0..p {
        let d = a[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<T>();
        if d <= tiny {
            continue;
        }
        let ljj = d.sqrt();
        l[j][j] = ljj;
        for i in (j + 1)..p {
            let s = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<T>();
            l[i][j] = s / ljj;
        }
    }
    l
}

fn mvn_draw<T: Real, R: Rng + ?Sized>(mean: &[T], chol: &[Vec<T>], scale: T, rng: &mut R) -> Vec<T> {
    let z: Vec<T> = (0..mean.len())
        .map(|_| T::c(rng.sample::<f64, _>(StandardNormal)))
        .collect();
    mean.iter()
        .enumerate()
        .map(|(i, &m)| {
            let s: T = (0..=i).map(|k| chol[i][k] * z[k]).sum();
            m + scale * s
        })
        .collect()
}

impl<T: Real> PosteriorDraw<T> for LinearFit<T> {
    /// σ²* = s²·ν / χ²_ν, then β* ~ N(β̂, σ²*·(XᵀWX)⁻¹).
    fn posterior_draw<R: Rng + ?Sized>(&self, rng: &mut R) -> ParameterDraw<T> {
        let nu = self.dof as f64;
        let chi = ChiSquared::new(nu).expect("dof > 0").sample(rng);
        let sigma2 = self.residual_variance * T::c(nu / chi);
        let chol = cholesky_psd(&self.unscaled_covariance);
        let coefficients = mvn_draw(&self.coefficients, &chol, sigma2.sqrt(), rng);
        ParameterDraw {
            coefficients,
            residual_variance: Some(sigma2),
        }
    }
}

impl<T: Real> PosteriorDraw<T> for LogisticFit<T> {
    /// β* ~ N(β̂, I(β̂)⁻¹).
    fn posterior_draw<R: Rng + ?Sized>(&self, rng: &mut R) -> ParameterDraw<T> {
        let chol = cholesky_psd(&self.covariance);
        ParameterDraw {
            coefficients: mvn_draw(&self.coefficients, &chol, T::one(), rng),
            residual_variance: None,
        }
    }
}

pub fn posterior_draw<T: Real, F: PosteriorDraw<T>, R: Rng + ?Sized>(fit: &F, rng: &mut R) -> ParameterDraw<T> {
    fit.posterior_draw(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn logistic_with_cov(cov: Vec<Vec<f64>>) -> LogisticFit<f64> {
        LogisticFit {
            names: vec!["a".into(), "b".into()],
            coefficients: vec![0.5, -1.0],
            converged: true,
            iterations: 1,
            gradient_norm: 0.0,
            log_likelihood: 0.0,
            ll_history: vec![],
            covariance: cov,
        }
    }

    #[test]
    fn degenerate_covariance_returns_estimate() {
        let fit = logistic_with_cov(vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(fit.posterior_draw(&mut rng).coefficients, vec![0.5, -1.0]);
    }

    #[test]
    fn same_state_same_draw() {
        let fit = logistic_with_cov(vec![vec![1.0, 0.3], vec![0.3, 2.0]]);
        let a = fit.posterior_draw(&mut ChaCha8Rng::seed_from_u64(9));
        let b = fit.posterior_draw(&mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = vec![vec![4.0, 2.0, 0.4], vec![2.0, 5.0, 1.0], vec![0.4, 1.0, 3.0]];
        let l = cholesky_psd(&a);
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|k| l[i][k] * l[j][k]).sum();
                assert!((s - a[i][j]).abs() < 1e-12);
            }
        }
    }
}
