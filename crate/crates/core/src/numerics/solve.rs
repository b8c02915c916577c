//! Direct dense solves: LU with partial pivoting and Cholesky.

use crate::error::{Error, Result};
use crate::numerics::mat::DenseMat;
use crate::real::Real;

/// LU factorization with partial pivoting.
pub struct Lu<R> {
    lu: DenseMat<R>,
    piv: Vec<usize>,
    sign: i32,
}

impl<R: Real> Lu<R> {
    pub fn factor(a: &DenseMat<R>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Dimension("LU of non-square matrix".into()));
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        let mut sign = 1i32;
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].abs();
            for i in (k + 1)..n {
                if lu[(i, k)].abs() > best {
                    best = lu[(i, k)].abs();
                    p = i;
                }
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                piv.swap(k, p);
                sign = -sign;
            }
            let pivot = lu[(k, k)];
            if pivot == R::zero() {
                continue; // singular; detected by callers via is_singular/solve
            }
            for i in (k + 1)..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                for j in (k + 1)..n {
                    lu[(i, j)] = lu[(i, j)] - f * lu[(k, j)];
                }
            }
        }
        Ok(Self { lu, piv, sign })
    }

    pub fn is_singular(&self, rtol: R) -> bool {
        let n = self.lu.rows();
        let scale = self.lu.max_abs().max(R::epsilon());
        (0..n).any(|k| self.lu[(k, k)].abs() <= rtol * scale)
    }

    pub fn det(&self) -> R {
        let n = self.lu.rows();
        let mut d = if self.sign > 0 { R::one() } else { -R::one() };
        for k in 0..n {
            d = d * self.lu[(k, k)];
        }
        d
    }

    pub fn solve(&self, b: &[R]) -> Result<Vec<R>> {
        let n = self.lu.rows();
        if b.len() != n {
            return Err(Error::Dimension("rhs length mismatch".into()));
        }
        if self.is_singular(R::of(1e-14)) {
            return Err(Error::Dimension("singular matrix in solve".into()));
        }
        let mut x: Vec<R> = self.piv.iter().map(|&p| b[p]).collect();
        for k in 0..n {
            for j in 0..k {
                let f = self.lu[(k, j)];
                x[k] = x[k] - f * x[j];
            }
        }
        for k in (0..n).rev() {
            for j in (k + 1)..n {
                let f = self.lu[(k, j)];
                x[k] = x[k] - f * x[j];
            }
            x[k] = x[k] / self.lu[(k, k)];
        }
        Ok(x)
    }

    pub fn solve_mat(&self, b: &DenseMat<R>) -> Result<DenseMat<R>> {
        let n = self.lu.rows();
        if b.rows() != n {
            return Err(Error::Dimension("rhs rows mismatch".into()));
        }
        let mut out = DenseMat::zeros(n, b.cols());
        for j in 0..b.cols() {
            let col: Vec<R> = (0..n).map(|i| b[(i, j)]).collect();
            let x = self.solve(&col)?;
            for i in 0..n {
                out[(i, j)] = x[i];
            }
        }
        Ok(out)
    }
}

/// Solve `A x = b` for square `A`.
pub fn solve<R: Real>(a: &DenseMat<R>, b: &[R]) -> Result<Vec<R>> {
    Lu::factor(a)?.solve(b)
}

/// Inverse via LU; errors on singular input.
pub fn inverse<R: Real>(a: &DenseMat<R>) -> Result<DenseMat<R>> {
    let lu = Lu::factor(a)?;
    lu.solve_mat(&DenseMat::identity(a.rows()))
}

/// 2-norm condition number from singular values.
pub fn cond_2<R: Real>(a: &DenseMat<R>) -> Result<R> {
    let (_, sigma, _) = crate::numerics::svd::svd_square(a)?;
    let smax = sigma.first().copied().unwrap_or(R::zero());
    let smin = sigma.last().copied().unwrap_or(R::zero());
    if smin <= R::zero() {
        return Ok(R::infinity());
    }
    Ok(smax / smin)
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix;
/// `None` if the matrix is not PD (used as the interior-point cone test).
pub struct Cholesky<R> {
    l: DenseMat<R>,
}

impl<R: Real> Cholesky<R> {
    pub fn factor(a: &DenseMat<R>) -> Option<Self> {
        if !a.is_square() {
            return None;
        }
        let n = a.rows();
        let mut l = DenseMat::<R>::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)];
                }
                if i == j {
                    if s <= R::zero() || !s.is_finite() {
                        return None;
                    }
                    l[(i, j)] = s.sqrt();
                } else {
                    l[(i, j)] = s / l[(j, j)];
                }
            }
        }
        Some(Self { l })
    }

    pub fn logdet(&self) -> R {
        let n = self.l.rows();
        let mut s = R::zero();
        for i in 0..n {
            s = s + self.l[(i, i)].ln();
        }
        s + s
    }

    pub fn solve(&self, b: &[R]) -> Vec<R> {
        let n = self.l.rows();
        let mut x = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                let f = self.l[(i, k)];
                x[i] = x[i] - f * x[k];
            }
            x[i] = x[i] / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let f = self.l[(k, i)];
                x[i] = x[i] - f * x[k];
            }
            x[i] = x[i] / self.l[(i, i)];
        }
        x
    }

    /// Inverse of the factored matrix.
    pub fn inverse(&self) -> DenseMat<R> {
        let n = self.l.rows();
        let mut out = DenseMat::zeros(n, n);
        for j in 0..n {
            let mut e = vec![R::zero(); n];
            e[j] = R::one();
            let x = self.solve(&e);
            for i in 0..n {
                out[(i, j)] = x[i];
            }
        }
        out.symmetrized()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves() {
        let a = DenseMat::<f64>::from_rows(&[&[2.0, 1.0], &[1.0, 3.0]]).unwrap();
        let x = solve(&a, &[3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12);
        assert!((x[1] - 1.4).abs() < 1e-12);
    }

    #[test]
    fn lu_det() {
        let a = DenseMat::<f64>::from_rows(&[&[0.0, 2.0], &[1.0, 0.0]]).unwrap();
        assert!((Lu::factor(&a).unwrap().det() + 2.0).abs() < 1e-14);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = DenseMat::<f64>::diag(&[1.0, -1.0]);
        assert!(Cholesky::factor(&a).is_none());
    }

    #[test]
    fn cholesky_solve_and_logdet() {
        let a = DenseMat::<f64>::from_rows(&[&[4.0, 1.0], &[1.0, 3.0]]).unwrap();
        let ch = Cholesky::factor(&a).unwrap();
        let x = ch.solve(&[1.0, 2.0]);
        let back = a.matvec(&x).unwrap();
        assert!((back[0] - 1.0).abs() < 1e-12 && (back[1] - 2.0).abs() < 1e-12);
        assert!((ch.logdet() - (11.0f64).ln()).abs() < 1e-12);
    }
}
