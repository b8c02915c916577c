//! One-sided Jacobi SVD for square matrices, plus the differential/algebraic
//! coordinate split used for descriptor dynamic matrices of rank r <= n.

use crate::error::{Error, Result};
use crate::numerics::mat::DenseMat;
use crate::real::Real;

/// Rank cut: singular values below this fraction of the largest are zero.
pub const RANK_RTOL: f64 = 1e-10;

/// Full SVD `A = U diag(sigma) V^T` of a square matrix, singular values
/// descending, `U` and `V` orthogonal (null-space columns completed).
pub fn svd_square<R: Real>(a: &DenseMat<R>) -> Result<(DenseMat<R>, Vec<R>, DenseMat<R>)> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "svd_square expects square input, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    if n == 0 {
        return Ok((DenseMat::identity(0), vec![], DenseMat::identity(0)));
    }

    let mut b = a.clone();
    let mut v = DenseMat::<R>::identity(n);
    let eps = R::epsilon() * R::of(n as f64);

    for _sweep in 0..100 {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let mut aa = R::zero();
                let mut bb = R::zero();
                let mut ab = R::zero();
                for k in 0..n {
                    aa = aa + b[(k, i)] * b[(k, i)];
                    bb = bb + b[(k, j)] * b[(k, j)];
                    ab = ab + b[(k, i)] * b[(k, j)];
                }
                if ab.abs() <= eps * (aa * bb).sqrt().max(R::epsilon()) {
                    continue;
                }
                rotated = true;
                let zeta = (bb - aa) / (R::of(2.0) * ab);
                let t = {
                    let s = if zeta >= R::zero() {
                        R::one()
                    } else {
                        -R::one()
                    };
                    s / (zeta.abs() + (R::one() + zeta * zeta).sqrt())
                };
                let c = R::one() / (R::one() + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let bi = b[(k, i)];
                    let bj = b[(k, j)];
                    b[(k, i)] = c * bi - s * bj;
                    b[(k, j)] = s * bi + c * bj;
                }
                for k in 0..n {
                    let vi = v[(k, i)];
                    let vj = v[(k, j)];
                    v[(k, i)] = c * vi - s * vj;
                    v[(k, j)] = s * vi + c * vj;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    // Column norms are the singular values; sort descending.
    let mut sigma: Vec<R> = (0..n)
        .map(|j| {
            let mut s = R::zero();
            for k in 0..n {
                s = s + b[(k, j)] * b[(k, j)];
            }
            s.sqrt()
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        sigma[j]
            .partial_cmp(&sigma[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let b_sorted = DenseMat::from_fn(n, n, |r, c| b[(r, order[c])]);
    let v_sorted = DenseMat::from_fn(n, n, |r, c| v[(r, order[c])]);
    sigma = order.iter().map(|&j| sigma[j]).collect();

    // Left vectors: normalized columns where sigma > 0, orthonormal
    // completion for the null space.
    let smax = sigma.first().copied().unwrap_or(R::zero());
    let cut = R::of(RANK_RTOL) * smax.max(R::epsilon());
    let mut u = DenseMat::<R>::zeros(n, n);
    let mut filled = 0usize;
    for j in 0..n {
        if sigma[j] > cut {
            for k in 0..n {
                u[(k, j)] = b_sorted[(k, j)] / sigma[j];
            }
            filled += 1;
        } else {
            sigma[j] = sigma[j].max(R::zero());
        }
    }
    complete_orthonormal(&mut u, filled)?;

    Ok((u, sigma, v_sorted))
}

fn complete_orthonormal<R: Real>(u: &mut DenseMat<R>, filled: usize) -> Result<()> {
    let n = u.rows();
    let mut next = filled;
    let mut cand = 0usize;
    while next < n {
        if cand >= n {
            return Err(Error::Dimension(
                "failed to complete orthonormal basis".into(),
            ));
        }
        // Start from a unit coordinate vector, orthogonalize twice.
        let mut w = vec![R::zero(); n];
        w[cand] = R::one();
        cand += 1;
        for _ in 0..2 {
            for j in 0..next {
                let mut proj = R::zero();
                for k in 0..n {
                    proj = proj + u[(k, j)] * w[k];
                }
                for k in 0..n {
                    w[k] = w[k] - proj * u[(k, j)];
                }
            }
        }
        let norm = w.iter().fold(R::zero(), |acc, &x| acc + x * x).sqrt();
        if norm > R::of(0.5) {
            for k in 0..n {
                u[(k, next)] = w[k] / norm;
            }
            next += 1;
        }
    }
    Ok(())
}

/// Orthogonal split of a square (possibly singular) matrix `E` into
/// `U^T E V = diag(S_r, 0)` with `S_r` invertible: the first `r` transformed
/// coordinates are differential, the rest algebraic.
#[derive(Debug, Clone)]
pub struct DaeDecomposition<R> {
    pub u: DenseMat<R>,
    pub v: DenseMat<R>,
    pub sigma: Vec<R>,
    pub rank: usize,
}

impl<R: Real> DaeDecomposition<R> {
    /// Differential block of `U` (first `rank` columns).
    pub fn u1(&self) -> DenseMat<R> {
        sub_cols(&self.u, 0, self.rank)
    }

    /// Algebraic block of `U` (remaining columns).
    pub fn u2(&self) -> DenseMat<R> {
        sub_cols(&self.u, self.rank, self.u.cols() - self.rank)
    }

    pub fn v1(&self) -> DenseMat<R> {
        sub_cols(&self.v, 0, self.rank)
    }

    pub fn v2(&self) -> DenseMat<R> {
        sub_cols(&self.v, self.rank, self.v.cols() - self.rank)
    }

    /// `U^T E V` reconstruction residual, for verification.
    pub fn residual(&self, e: &DenseMat<R>) -> R {
        let n = e.rows();
        let ut_e_v = self
            .u
            .transpose()
            .matmul(e)
            .and_then(|m| m.matmul(&self.v))
            .expect("square");
        let mut worst = R::zero();
        for i in 0..n {
            for j in 0..n {
                let want = if i == j && i < self.rank {
                    self.sigma[i]
                } else {
                    R::zero()
                };
                worst = worst.max((ut_e_v[(i, j)] - want).abs());
            }
        }
        worst
    }
}

fn sub_cols<R: Real>(m: &DenseMat<R>, c0: usize, count: usize) -> DenseMat<R> {
    DenseMat::from_fn(m.rows(), count, |i, j| m[(i, c0 + j)])
}

/// SVD-based differential/algebraic coordinate split of a square matrix.
/// Rank 0 and full rank are both valid.
pub fn dae_coordinates<R: Real>(e: &DenseMat<R>) -> Result<DaeDecomposition<R>> {
    let (u, sigma, v) = svd_square(e)?;
    let smax = sigma.first().copied().unwrap_or(R::zero());
    let cut = R::of(RANK_RTOL) * smax;
    let rank = sigma.iter().filter(|&&s| s > cut && s > R::zero()).count();
    Ok(DaeDecomposition { u, v, sigma, rank })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diag_rank_one() {
        let e = DenseMat::<f64>::diag(&[1.0, 0.0]);
        let d = dae_coordinates(&e).unwrap();
        assert_eq!(d.rank, 1);
        // U and V are the identity up to sign.
        for j in 0..2 {
            let mut col_u: Vec<f64> = (0..2).map(|i| d.u[(i, j)]).collect();
            if col_u[j] < 0.0 {
                col_u.iter_mut().for_each(|x| *x = -*x);
            }
            assert!((col_u[j] - 1.0).abs() < 1e-14);
        }
        assert!(d.residual(&e) < 1e-12);
    }

    #[test]
    fn identity_full_rank() {
        let e = DenseMat::<f64>::identity(3);
        let d = dae_coordinates(&e).unwrap();
        assert_eq!(d.rank, 3);
        assert_eq!(d.u2().cols(), 0);
    }

    #[test]
    fn zero_matrix_rank_zero() {
        let e = DenseMat::<f64>::zeros(2, 2);
        let d = dae_coordinates(&e).unwrap();
        assert_eq!(d.rank, 0);
        // U must still be orthogonal.
        let utu = d.u.transpose().matmul(&d.u).unwrap();
        assert!(utu.sub(&DenseMat::identity(2)).unwrap().max_abs() < 1e-12);
    }
}
