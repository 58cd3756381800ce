//! Dense least squares through a truncated-SVD pseudoinverse.
//!
//! Collocation matrices in this crate are run deliberately deep into
//! ill-conditioning (condition numbers up to ~1e19), so plain LU has no
//! chance. Every solve goes through the SVD: singular values below
//! `rcond * sigma_max` are dropped and the minimum-norm least-squares
//! solution over the retained spectrum is returned.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Diagnostics from one pseudoinverse solve.
#[derive(Debug, Clone, Copy)]
pub struct SolveInfo {
    /// `sigma_max / sigma_min` over all nonzero singular values. This is the
    /// untruncated ratio so the reported numbers stay comparable across
    /// different truncation settings.
    pub condition: f64,
    /// Number of singular values retained by the truncation.
    pub rank: usize,
    /// The relative cutoff that was used.
    pub truncation: f64,
}

/// Default relative truncation cutoff.
///
/// Plain machine epsilon, not the textbook `eps * max(dim)`: the
/// collocation matrices here run at condition numbers around 1e18, where
/// the dimension-scaled cutoff discards singular values that still carry
/// solution content. Empirically the residual floor sits an order of
/// magnitude lower with the bare-epsilon cutoff, and the adaptive loop's
/// node sets stay bounded instead of growing without converging.
pub fn default_rcond(_nrows: usize, _ncols: usize) -> f64 {
    f64::EPSILON
}

/// Solves `A x ~= b` in the least-squares sense via the Penrose
/// pseudoinverse, truncating singular values below `rcond * sigma_max`.
pub fn pseudo_solve(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    rcond: f64,
) -> Result<(DVector<f64>, SolveInfo)> {
    if a.nrows() != b.len() {
        return Err(Error::invalid(format!(
            "matrix has {} rows but rhs has {} entries",
            a.nrows(),
            b.len()
        )));
    }
    if !(0.0..1.0).contains(&rcond) {
        return Err(Error::invalid("rcond must lie in [0, 1)"));
    }

    let svd = a
        .clone()
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Linalg("SVD did not converge".into()))?;
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let sigma = &svd.singular_values;

    let sigma_max = sigma.iter().copied().fold(0.0f64, f64::max);
    let sigma_min = sigma
        .iter()
        .copied()
        .filter(|&s| s > 0.0)
        .fold(f64::INFINITY, f64::min);
    let condition = if sigma_max > 0.0 && sigma_min.is_finite() {
        sigma_max / sigma_min
    } else {
        f64::INFINITY
    };

    let thresh = rcond * sigma_max;
    let mut x = DVector::zeros(a.ncols());
    let mut rank = 0;
    for i in 0..sigma.len() {
        let s = sigma[i];
        if s > 0.0 && s >= thresh {
            rank += 1;
            let coef = u.column(i).dot(b) / s;
            x.axpy(coef, &v_t.row(i).transpose(), 1.0);
        }
    }

    Ok((
        x,
        SolveInfo {
            condition,
            rank,
            truncation: rcond,
        },
    ))
}

/// Condition number (ratio of extreme nonzero singular values) of `a`.
pub fn condition_number(a: &DMatrix<f64>) -> Result<f64> {
    let svd = a
        .clone()
        .try_svd(false, false, f64::EPSILON, 0)
        .ok_or_else(|| Error::Linalg("SVD did not converge".into()))?;
    let sigma = &svd.singular_values;
    let sigma_max = sigma.iter().copied().fold(0.0f64, f64::max);
    let sigma_min = sigma
        .iter()
        .copied()
        .filter(|&s| s > 0.0)
        .fold(f64::INFINITY, f64::min);
    if sigma_max > 0.0 && sigma_min.is_finite() {
        Ok(sigma_max / sigma_min)
    } else {
        Ok(f64::INFINITY)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    /// Columns of the pseudoinverse, built by applying the solve to the
    /// identity's columns.
    fn pinv(a: &DMatrix<f64>, rcond: f64) -> DMatrix<f64> {
        let mut p = DMatrix::zeros(a.ncols(), a.nrows());
        for i in 0..a.nrows() {
            let mut e = DVector::zeros(a.nrows());
            e[i] = 1.0;
            let (col, _) = pseudo_solve(a, &e, rcond).unwrap();
            p.set_column(i, &col);
        }
        p
    }

    #[test]
    fn identity_passes_through() {
        let a = DMatrix::<f64>::identity(3, 3);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let (x, info) = pseudo_solve(&a, &b, 0.0).unwrap();
        assert!((&x - &b).norm() < 1e-15);
        assert!((info.condition - 1.0).abs() < 1e-12);
        assert_eq!(info.rank, 3);
    }

    #[test]
    fn rank_one_minimum_norm_solution() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let b = DVector::from_vec(vec![1.0, 1.0]);
        let (x, info) = pseudo_solve(&a, &b, 1e-12).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14);
        assert!(x[1].abs() < 1e-14);
        assert_eq!(info.rank, 1);
    }

    #[test]
    fn zero_matrix_gives_zero_solution() {
        let a = DMatrix::<f64>::zeros(3, 2);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let (x, info) = pseudo_solve(&a, &b, 1e-12).unwrap();
        assert_eq!(info.rank, 0);
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let a = DMatrix::<f64>::identity(3, 3);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        assert!(pseudo_solve(&a, &b, 0.0).is_err());
    }

    #[test]
    fn well_conditioned_random_system_solves() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let a = random_matrix(&mut rng, 6, 6);
            let b = DVector::from_fn(6, |_, _| rng.random_range(-1.0..1.0));
            let (x, info) = pseudo_solve(&a, &b, 0.0).unwrap();
            if info.condition < 1e6 {
                assert!((&a * &x - &b).norm() <= 1e-10);
            }
        }
    }

    #[test]
    fn moore_penrose_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(rows, cols) in &[(6, 6), (8, 5), (5, 8)] {
            let a = random_matrix(&mut rng, rows, cols);
            let p = pinv(&a, default_rcond(rows, cols));
            let apa = &a * &p * &a;
            let pap = &p * &a * &p;
            assert!((&apa - &a).norm() <= 1e-10 * a.norm());
            assert!((&pap - &p).norm() <= 1e-10 * p.norm());
        }
    }

    #[test]
    fn untruncated_solve_matches_direct_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(&mut rng, 8, 8);
        let b = DVector::from_fn(8, |_, _| rng.random_range(-1.0..1.0));
        let direct = a.clone().lu().solve(&b).unwrap();
        let (x, info) = pseudo_solve(&a, &b, 0.0).unwrap();
        let rel = (&x - &direct).norm() / direct.norm();
        assert!(rel <= 1e-12 * info.condition.max(1.0));
    }

    #[test]
    fn condition_reported_from_full_spectrum() {
        // Diagonal matrix with a singular value far below any plausible
        // truncation threshold: the reported condition must still see it.
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e-18]));
        let b = DVector::from_vec(vec![1.0, 1.0]);
        let (_, info) = pseudo_solve(&a, &b, 1e-10).unwrap();
        assert!(info.condition > 1e17);
        assert_eq!(info.rank, 1);
    }
}
