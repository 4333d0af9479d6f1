use crate::scalar::{expit, softplus, Real};

use super::{DesignMatrix, NumericsError, PivotedQr};

#[derive(Debug, Clone, Copy)]
pub struct LogisticOptions<T> {
    pub max_iterations: usize,
    /// Stop when max |score| falls to this value.
    pub gradient_tolerance: T,
    /// Or when the relative log-likelihood change falls to this value.
    pub relative_ll_tolerance: T,
    pub max_step_halvings: usize,
    /// |coefficient| beyond which a failed fit is reported as separation.
    pub separation_threshold: T,
}

impl<T: Real> Default for LogisticOptions<T> {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            gradient_tolerance: T::c(1e-8).max(T::epsilon() * T::c(1e3)),
            relative_ll_tolerance: T::c(1e-12).max(T::epsilon() * T::c(10.0)),
            max_step_halvings: 30,
            separation_threshold: T::c(50.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit<T> {
    pub names: Vec<String>,
    pub coefficients: Vec<T>,
    pub converged: bool,
    pub iterations: usize,
    /// max |score| at the returned coefficients.
    pub gradient_norm: T,
    pub log_likelihood: T,
    /// Log-likelihood after each accepted step, starting at β = 0.
    pub ll_history: Vec<T>,
    /// Inverse observed information at the optimum.
    pub covariance: Vec<Vec<T>>,
}

impl<T: Real> LogisticFit<T> {
    pub fn linear_predictor(&self, row: &[T]) -> T {
        row.iter().zip(&self.coefficients).map(|(&x, &b)| x * b).sum()
    }

    pub fn predict_proba(&self, row: &[T]) -> T {
        expit(self.linear_predictor(row))
    }

    pub fn coefficient(&self, name: &str) -> Option<T> {
        self.names.iter().position(|n| n == name).map(|i| self.coefficients[i])
    }
}

/// Bernoulli log-likelihood Σ yη − log(1 + e^η).
pub fn log_likelihood<T: Real>(x: &DesignMatrix<T>, y: &[T], beta: &[T]) -> T {
    x.mul_vec(beta)
        .iter()
        .zip(y)
        .map(|(&eta, &yi)| yi * eta - softplus(eta))
        .sum()
}

/// Score vector Xᵀ(y − p).
pub fn score<T: Real>(x: &DesignMatrix<T>, y: &[T], beta: &[T]) -> Vec<T> {
    let resid: Vec<T> = x
        .mul_vec(beta)
        .iter()
        .zip(y)
        .map(|(&eta, &yi)| yi - expit(eta))
        .collect();
    x.columns()
        .iter()
        .map(|c| c.iter().zip(&resid).map(|(&a, &r)| a * r).sum())
        .collect()
}

fn information<T: Real>(x: &DesignMatrix<T>, beta: &[T]) -> Vec<Vec<T>> {
    let w: Vec<T> = x
        .mul_vec(beta)
        .iter()
        .map(|&eta| {
            let p = expit(eta);
            p * (T::one() - p)
        })
        .collect();
    let p = x.cols();
    let mut h = vec![vec![T::zero(); p]; p];
    for a in 0..p {
        for b in a..p {
            let s: T = x
                .column(a)
                .iter()
                .zip(x.column(b))
                .zip(&w)
                .map(|((&u, &v), &wi)| u * v * wi)
                .sum();
            h[a][b] = s;
            h[b][a] = s;
        }
    }
    h
}

fn max_abs<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

const POLISH_STEPS: usize = 5;

pub fn logistic_fit<T: Real>(x: &DesignMatrix<T>, y: &[T]) -> Result<LogisticFit<T>, NumericsError> {
    logistic_fit_with(x, y, &LogisticOptions::default())
}

/// Newton-Raphson (equivalently IRLS) with step halving, so the
/// log-likelihood never decreases between accepted iterates.
pub fn logistic_fit_with<T: Real>(
    x: &DesignMatrix<T>,
    y: &[T],
    opts: &LogisticOptions<T>,
) -> Result<LogisticFit<T>, NumericsError> {
    let n = x.rows();
    let p = x.cols();
    if y.len() != n {
        return Err(NumericsError::DimensionMismatch(format!(
            "design has {n} rows, response {}",
            y.len()
        )));
    }
    if n < p {
        return Err(NumericsError::TooFewRows { rows: n, cols: p });
    }
    if let Some((index, &v)) = y.iter().enumerate().find(|(_, &v)| v != T::zero() && v != T::one()) {
        return Err(NumericsError::NonBinaryResponse {
            index,
            value: v.to_f64_lossy(),
        });
    }

    let mut beta = vec![T::zero(); p];
    let mut ll = log_likelihood(x, y, &beta);
    let mut history = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    let mut grad = score(x, y, &beta);

    while iterations < opts.max_iterations {
        if max_abs(&grad) <= opts.gradient_tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let h = information(x, &beta);
        let delta = PivotedQr::new(h)?.solve(&grad);

        let mut step = T::one();
        let mut accepted = None;
        for _ in 0..=opts.max_step_halvings {
            let cand: Vec<T> = beta.iter().zip(&delta).map(|(&b, &d)| b + step * d).collect();
            let ll_c = log_likelihood(x, y, &cand);
            if ll_c >= ll {
                accepted = Some((cand, ll_c));
                break;
            }
            step = step * T::c(0.5);
        }
        let Some((cand, ll_c)) = accepted else {
            // no ascent direction left at working precision
            converged = true;
            break;
        };
        let rel = (ll_c - ll).abs() / (ll.abs() + T::epsilon());
        beta = cand;
        ll = ll_c;
        history.push(ll);
        grad = score(x, y, &beta);
        if rel <= opts.relative_ll_tolerance {
            converged = true;
            break;
        }
    }
    // Polish: once the likelihood is flat to working precision, plain
    // Newton steps that shrink the score are taken without the ascent
    // guard. They are counted in `iterations` but not in `ll_history`.
    if converged {
        let band = T::c(64.0) * T::epsilon() * (ll.abs() + T::one());
        for _ in 0..POLISH_STEPS {
            if max_abs(&grad) <= opts.gradient_tolerance || iterations >= opts.max_iterations {
                break;
            }
            let delta = PivotedQr::new(information(x, &beta))?.solve(&grad);
            let cand: Vec<T> = beta.iter().zip(&delta).map(|(&b, &d)| b + d).collect();
            let g_c = score(x, y, &cand);
            let ll_c = log_likelihood(x, y, &cand);
            if max_abs(&g_c) >= max_abs(&grad) || ll_c < ll - band {
                break;
            }
            iterations += 1;
            beta = cand;
            grad = g_c;
            ll = ll_c;
        }
    }
    if !converged && max_abs(&grad) <= opts.gradient_tolerance {
        converged = true;
    }

    let gradient_norm = max_abs(&grad);
    if !converged {
        let (j, &b) = beta
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap_or(std::cmp::Ordering::Equal))
            .expect("p >= 1");
        if b.abs() > opts.separation_threshold {
            return Err(NumericsError::Separation {
                column: x.names()[j].clone(),
                coefficient: b.to_f64_lossy(),
            });
        }
        return Err(NumericsError::NonConvergence {
            iterations,
            gradient: gradient_norm.to_f64_lossy(),
        });
    }
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(NumericsError::NonFinite("logistic coefficients"));
    }
    // complete separation: the score vanishes only because every fitted
    // probability has collapsed onto its response
    let perfectly_fitted = x
        .mul_vec(&beta)
        .iter()
        .zip(y)
        .all(|(&eta, &yi)| (yi - expit(eta)).abs() < T::c(1e-6));
    if perfectly_fitted && n > 0 {
        let (j, &b) = beta
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap_or(std::cmp::Ordering::Equal))
            .expect("p >= 1");
        return Err(NumericsError::Separation {
            column: x.names()[j].clone(),
            coefficient: b.to_f64_lossy(),
        });
    }

    let covariance = match PivotedQr::new(information(x, &beta)) {
        Ok(qr) => {
            let p = x.cols();
            let mut inv = vec![vec![T::zero(); p]; p];
            for j in 0..p {
                let mut e = vec![T::zero(); p];
                e[j] = T::one();
                for (i, v) in qr.solve(&e).into_iter().enumerate() {
                    inv[i][j] = v;
                }
            }
            inv
        }
        Err(_) => {
            let (j, &b) = beta
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap_or(std::cmp::Ordering::Equal))
                .expect("p >= 1");
            return Err(NumericsError::Separation {
                column: x.names()[j].clone(),
                coefficient: b.to_f64_lossy(),
            });
        }
    };

    Ok(LogisticFit {
        names: x.names().to_vec(),
        coefficients: beta,
        converged,
        iterations,
        gradient_norm,
        log_likelihood: ll,
        ll_history: history,
        covariance,
    })
}
