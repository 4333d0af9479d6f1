use crate::scalar::Real;

use super::NumericsError;

/// Householder QR with column pivoting of an n×p matrix (n ≥ p).
///
/// Stores the reflectors so that Qᵀ can be applied to right-hand sides.
#[derive(Debug, Clone)]
pub struct PivotedQr<T> {
    n: usize,
    p: usize,
    /// Householder vectors, `v[k]` acting on rows k..n.
    reflectors: Vec<Vec<T>>,
    betas: Vec<T>,
    /// Upper-triangular factor, row-major p×p, in pivoted column order.
    r: Vec<Vec<T>>,
    /// `perm[k]` = original column placed at position k.
    perm: Vec<usize>,
    condition: T,
}

/// Largest tolerated |R₀₀| / |R_pp| for the working precision.
pub(crate) fn condition_limit<T: Real>() -> T {
    T::c(1e12).min(T::c(0.01) / T::epsilon())
}

impl<T: Real> PivotedQr<T> {
    /// Factor the matrix given as columns of equal length.
    pub fn new(mut columns: Vec<Vec<T>>) -> Result<Self, NumericsError> {
        let p = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        if n < p || p == 0 {
            return Err(NumericsError::TooFewRows { rows: n, cols: p });
        }
        let mut perm: Vec<usize> = (0..p).collect();
        let mut norms: Vec<T> = columns.iter().map(|c| sum_sq(c)).collect();
        let mut reflectors = Vec::with_capacity(p);
        let mut betas = Vec::with_capacity(p);
        let mut r = vec![vec![T::zero(); p]; p];

        for k in 0..p {
            // pivot: largest remaining column norm
            let (piv, _) =
                norms[k..].iter().enumerate().fold(
                    (k, T::neg_infinity()),
                    |acc, (i, &v)| if v > acc.1 { (k + i, v) } else { acc },
                );
            if piv != k {
                columns.swap(k, piv);
                norms.swap(k, piv);
                perm.swap(k, piv);
                for row in r.iter_mut().take(k) {
                    row.swap(k, piv);
                }
            }

            let x = &columns[k][k..];
            let alpha_norm = sum_sq(x).sqrt();
            let mut v: Vec<T> = x.to_vec();
            let beta;
            let rkk;
            if alpha_norm == T::zero() {
                beta = T::zero();
                rkk = T::zero();
            } else {
                let sign = if v[0] >= T::zero() { T::one() } else { -T::one() };
                rkk = -sign * alpha_norm;
                v[0] = v[0] - rkk;
                let vtv = sum_sq(&v);
                beta = if vtv > T::zero() { T::c(2.0) / vtv } else { T::zero() };
            }
            r[k][k] = rkk;
            for j in (k + 1)..p {
                let col = &mut columns[j][k..];
                apply_reflector(&v, beta, col);
                r[k][j] = col[0];
            }
            // downdate remaining norms by recomputation (p is small)
            for j in (k + 1)..p {
                norms[j] = sum_sq(&columns[j][(k + 1)..]);
            }
            reflectors.push(v);
            betas.push(beta);
        }

        let d0 = r[0][0].abs();
        let dmin = (0..p).map(|k| r[k][k].abs()).fold(T::infinity(), T::min);
        let condition = if dmin == T::zero() { T::infinity() } else { d0 / dmin };
        if !(condition <= condition_limit::<T>()) {
            return Err(NumericsError::Singular {
                condition: condition.to_f64_lossy(),
            });
        }
        Ok(Self {
            n,
            p,
            reflectors,
            betas,
            r,
            perm,
            condition,
        })
    }

    pub fn condition_estimate(&self) -> T {
        self.condition
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Least-squares solution of A·x ≈ b.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        assert_eq!(b.len(), self.n, "rhs length");
        let mut qtb = b.to_vec();
        for (k, (v, &beta)) in self.reflectors.iter().zip(&self.betas).enumerate() {
            apply_reflector(v, beta, &mut qtb[k..]);
        }
        let z = self.back_substitute(&qtb[..self.p]);
        let mut x = vec![T::zero(); self.p];
        for (k, &orig) in self.perm.iter().enumerate() {
            x[orig] = z[k];
        }
        x
    }

    /// (AᵀA)⁻¹ in the original column order.
    pub fn inverse_gram(&self) -> Vec<Vec<T>> {
        let p = self.p;
        // R⁻¹ by back substitution on unit vectors
        let mut rinv = vec![vec![T::zero(); p]; p];
        for j in 0..p {
            let mut e = vec![T::zero(); p];
            e[j] = T::one();
            let col = self.back_substitute(&e);
            for i in 0..p {
                rinv[i][j] = col[i];
            }
        }
        // (RᵀR)⁻¹ = R⁻¹ R⁻ᵀ, then undo pivoting
        let mut out = vec![vec![T::zero(); p]; p];
        for a in 0..p {
            for b in 0..p {
                let s = (0..p).map(|k| rinv[a][k] * rinv[b][k]).sum::<T>();
                out[self.perm[a]][self.perm[b]] = s;
            }
        }
        out
    }

    fn back_substitute(&self, rhs: &[T]) -> Vec<T> {
        let p = self.p;
        let mut z = vec![T::zero(); p];
        for i in (0..p).rev() {
            let mut s = rhs[i];
            for j in (i + 1)..p {
                s = s - self.r[i][j] * z[j];
            }
            z[i] = s / self.r[i][i];
        }
        z
    }
}

fn sum_sq<T: Real>(x: &[T]) -> T {
    x.iter().map(|&v| v * v).sum()
}

fn apply_reflector<T: Real>(v: &[T], beta: T, x: &mut [T]) {
    if beta == T::zero() {
        return;
    }
    let dot: T = v.iter().zip(x.iter()).map(|(&a, &b)| a * b).sum();
    let s = beta * dot;
    for (xi, &vi) in x.iter_mut().zip(v) {
        *xi = *xi - s * vi;
    }
}
