//! Symmetric eigensolving (cyclic Jacobi) and small general eigenvalue
//! extraction via the characteristic polynomial.

use crate::error::{Error, Result};
use crate::numerics::mat::DenseMat;
use crate::real::Real;

/// Relative asymmetry tolerated before an input is rejected as non-symmetric.
pub const SYMMETRY_RTOL: f64 = 1e-12;

/// Eigenvalues (ascending) and eigenvectors (columns) of a symmetric matrix.
///
/// Input is symmetrized as `(M + M^T)/2` first; assembled LMIs accumulate
/// rounding asymmetry below [`SYMMETRY_RTOL`].
pub fn sym_eigen<R: Real>(m: &DenseMat<R>) -> Result<(Vec<R>, DenseMat<R>)> {
    check_symmetric(m)?;
    let mut a = m.symmetrized();
    let n = a.rows();
    let mut v = DenseMat::<R>::identity(n);
    if n == 0 {
        return Ok((vec![], v));
    }

    let eps = R::epsilon() * R::of(n as f64);
    for _sweep in 0..100 {
        let mut off = R::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off = off + a[(i, j)] * a[(i, j)];
            }
        }
        let scale = a.fro_norm().max(R::one());
        if off.sqrt() <= eps * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= eps * eps * scale {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (R::of(2.0) * apq);
                let t = {
                    let s = if theta >= R::zero() {
                        R::one()
                    } else {
                        -R::one()
                    };
                    s / (theta.abs() + (R::one() + theta * theta).sqrt())
                };
                let c = R::one() / (R::one() + t * t).sqrt();
                let s = t * c;
                // Rotate rows/columns p and q.
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[(i, i)]
            .partial_cmp(&a[(j, j)])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values: Vec<R> = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DenseMat::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok((values, vectors))
}

/// Eigenvalues only, ascending.
pub fn sym_eigenvalues<R: Real>(m: &DenseMat<R>) -> Result<Vec<R>> {
    sym_eigen(m).map(|(vals, _)| vals)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eig_sym<R: Real>(m: &DenseMat<R>) -> Result<R> {
    let vals = sym_eigenvalues(m)?;
    vals.first()
        .copied()
        .ok_or_else(|| Error::Dimension("empty matrix".into()))
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eig_sym<R: Real>(m: &DenseMat<R>) -> Result<R> {
    let vals = sym_eigenvalues(m)?;
    vals.last()
        .copied()
        .ok_or_else(|| Error::Dimension("empty matrix".into()))
}

/// Symmetric PSD square root via the spectral decomposition.
/// Slightly negative eigenvalues (within `clip`) are clamped to zero.
pub fn sym_sqrt<R: Real>(m: &DenseMat<R>, clip: R) -> Result<DenseMat<R>> {
    let (vals, vecs) = sym_eigen(m)?;
    let n = m.rows();
    for &l in &vals {
        if l < -clip {
            return Err(Error::Range(format!(
                "matrix square root of non-PSD input (eigenvalue {l})"
            )));
        }
    }
    let mut out = DenseMat::zeros(n, n);
    for k in 0..n {
        let s = vals[k].max(R::zero()).sqrt();
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = out[(i, j)] + s * vecs[(i, k)] * vecs[(j, k)];
            }
        }
    }
    Ok(out)
}

fn check_symmetric<R: Real>(m: &DenseMat<R>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "expected square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let scale = m.max_abs().max(R::one());
    if m.asymmetry() > R::of(SYMMETRY_RTOL) * scale {
        return Err(Error::Symmetry(format!(
            "asymmetry {} exceeds {} relative",
            m.asymmetry(),
            SYMMETRY_RTOL
        )));
    }
    Ok(())
}

/// Eigenvalues of a small general real matrix, as `(re, im)` pairs sorted by
/// real part. Characteristic polynomial by Faddeev-LeVerrier, roots by
/// Durand-Kerner. Intended for the low-order slow subsystems that show up
/// after descriptor reduction; not a general-purpose QR replacement.
pub fn eigenvalues_general<R: Real>(m: &DenseMat<R>) -> Result<Vec<(R, R)>> {
    if !m.is_square() {
        return Err(Error::Dimension("eigenvalues of non-square matrix".into()));
    }
    let n = m.rows();
    if n == 0 {
        return Ok(vec![]);
    }
    if n == 1 {
        return Ok(vec![(m[(0, 0)], R::zero())]);
    }

    // p(s) = s^n + c[1] s^(n-1) + ... + c[n]
    let mut coeffs = vec![R::one()];
    let mut acc = DenseMat::<R>::identity(n);
    for k in 1..=n {
        acc = m.matmul(&acc).expect("square");
        let mut tr = R::zero();
        for i in 0..n {
            tr = tr + acc[(i, i)];
        }
        let ck = -tr / R::of(k as f64);
        for i in 0..n {
            acc[(i, i)] = acc[(i, i)] + ck;
        }
        coeffs.push(ck);
    }

    if n == 2 {
        // Exact quadratic formula, including the complex case.
        let b = coeffs[1];
        let c = coeffs[2];
        let disc = b * b - R::of(4.0) * c;
        let half = R::of(0.5);
        if disc >= R::zero() {
            let r = disc.sqrt();
            let mut roots = vec![((-b - r) * half, R::zero()), ((-b + r) * half, R::zero())];
            roots.sort_by(|a, bb| a.0.partial_cmp(&bb.0).unwrap_or(std::cmp::Ordering::Equal));
            return Ok(roots);
        }
        let r = (-disc).sqrt() * half;
        return Ok(vec![(-b * half, -r), (-b * half, r)]);
    }

    Ok(durand_kerner(&coeffs))
}

/// All complex roots of a monic polynomial with real coefficients
/// `c[0]=1, c[1], ..., c[n]`.
fn durand_kerner<R: Real>(coeffs: &[R]) -> Vec<(R, R)> {
    let n = coeffs.len() - 1;
    let radius = coeffs
        .iter()
        .skip(1)
        .fold(R::one(), |acc, &c| acc.max(c.abs() + R::one()));
    // Deterministic start: points on a circle avoiding the real axis.
    let mut roots: Vec<(R, R)> = (0..n)
        .map(|k| {
            let ang = R::of(2.0 * std::f64::consts::PI * (k as f64 + 0.25) / n as f64);
            (radius * ang.cos(), radius * ang.sin())
        })
        .collect();

    let eval = |z: (R, R)| -> (R, R) {
        let mut acc = (R::zero(), R::zero());
        for &c in coeffs {
            acc = cmul(acc, z);
            acc.0 = acc.0 + c;
        }
        acc
    };

    for _ in 0..200 {
        let mut worst = R::zero();
        for i in 0..n {
            let mut denom = (R::one(), R::zero());
            for j in 0..n {
                if i != j {
                    denom = cmul(denom, csub(roots[i], roots[j]));
                }
            }
            let num = eval(roots[i]);
            let delta = cdiv(num, denom);
            roots[i] = csub(roots[i], delta);
            worst = worst.max(cabs(delta));
        }
        if worst < R::of(1e-14) * radius.max(R::one()) {
            break;
        }
    }
    // Collapse conjugate noise on essentially-real roots.
    let tol = R::of(1e-9) * radius.max(R::one());
    for r in roots.iter_mut() {
        if r.1.abs() < tol {
            r.1 = R::zero();
        }
    }
    roots.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
    });
    roots
}

fn cmul<R: Real>(a: (R, R), b: (R, R)) -> (R, R) {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

fn csub<R: Real>(a: (R, R), b: (R, R)) -> (R, R) {
    (a.0 - b.0, a.1 - b.1)
}

fn cdiv<R: Real>(a: (R, R), b: (R, R)) -> (R, R) {
    let d = b.0 * b.0 + b.1 * b.1;
    ((a.0 * b.0 + a.1 * b.1) / d, (a.1 * b.0 - a.0 * b.1) / d)
}

fn cabs<R: Real>(a: (R, R)) -> R {
    (a.0 * a.0 + a.1 * a.1).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_min_eig() {
        let m = DenseMat::<f64>::identity(3);
        assert_eq!(min_eig_sym(&m).unwrap(), 1.0);
    }

    #[test]
    fn diagonal_min_eig() {
        let m = DenseMat::<f64>::diag(&[3.0, -2.0]);
        assert_eq!(min_eig_sym(&m).unwrap(), -2.0);
    }

    #[test]
    fn rejects_asymmetric() {
        let m = DenseMat::<f64>::from_rows(&[&[1.0, 2.0], &[0.0, 1.0]]).unwrap();
        assert!(matches!(min_eig_sym(&m), Err(Error::Symmetry(_))));
    }

    #[test]
    fn rejects_non_square() {
        let m = DenseMat::<f64>::zeros(2, 3);
        assert!(matches!(min_eig_sym(&m), Err(Error::Dimension(_))));
    }

    #[test]
    fn general_eigs_match_known_2x2() {
        // [[0, 1], [-2, -3]] has eigenvalues -1, -2.
        let m = DenseMat::<f64>::from_rows(&[&[0.0, 1.0], &[-2.0, -3.0]]).unwrap();
        let e = eigenvalues_general(&m).unwrap();
        assert!((e[0].0 + 2.0).abs() < 1e-12 && e[0].1 == 0.0);
        assert!((e[1].0 + 1.0).abs() < 1e-12 && e[1].1 == 0.0);
    }

    #[test]
    fn general_eigs_complex_pair() {
        // Rotation-like matrix: eigenvalues -1 +/- 2i.
        let m = DenseMat::<f64>::from_rows(&[&[-1.0, 2.0], &[-2.0, -1.0]]).unwrap();
        let e = eigenvalues_general(&m).unwrap();
        assert!((e[0].0 + 1.0).abs() < 1e-12);
        assert!((e[0].1.abs() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn general_eigs_companion_4x4() {
        // Companion matrix of (s+1)(s+2)(s+3)(s+4).
        let c = [24.0, 50.0, 35.0, 10.0]; // coefficients of s^0..s^3
        let mut m = DenseMat::<f64>::zeros(4, 4);
        for i in 0..3 {
            m[(i + 1, i)] = 1.0;
        }
        for i in 0..4 {
            m[(i, 3)] = -c[i];
        }
        let e = eigenvalues_general(&m).unwrap();
        for (k, want) in [-4.0, -3.0, -2.0, -1.0].iter().enumerate() {
            assert!((e[k].0 - want).abs() < 1e-8, "{:?}", e);
            assert_eq!(e[k].1, 0.0);
        }
    }

    #[test]
    fn sym_sqrt_squares_back() {
        let m = DenseMat::<f64>::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]).unwrap();
        let s = sym_sqrt(&m, 1e-12).unwrap();
        let back = s.matmul(&s).unwrap();
        assert!(back.sub(&m).unwrap().max_abs() < 1e-12);
    }
}
