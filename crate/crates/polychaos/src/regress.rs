//! Least-squares fitting, closed-form leave-one-out error, and prediction
//! metrics.
//!
//! Fits go through an orthogonal factorization rather than the explicit
//! normal-equation inverse; leverages come from the same factorization.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Leverage at or above `1 - LEVERAGE_TOL` makes the LOO error meaningless;
/// such fits get the +inf sentinel and lose every error comparison.
pub const LEVERAGE_TOL: f64 = 1e-8;

/// Relative diagonal threshold below which a factorization is flagged
/// ill-conditioned.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct FitResult {
    pub beta: DVector<f64>,
    pub eps_loo: f64,
    pub leverage: DVector<f64>,
    pub cond_flag: bool,
}

/// Ordinary least squares via QR; rank-deficient inputs fall back to the
/// SVD minimum-norm solution with `cond_flag` set.
pub fn ols_fit(psi: &DMatrix<f64>, y: &DVector<f64>) -> Result<FitResult> {
    let (n, p) = (psi.nrows(), psi.ncols());
    if y.len() != n {
        return Err(Error::Shape(format!(
            "response length {} does not match {} rows",
            y.len(),
            n
        )));
    }
    if p == 0 || n < p {
        return Err(Error::InvalidParameter(format!(
            "ols_fit needs 1 <= P <= N, got N={n}, P={p}"
        )));
    }

    let qr = psi.clone().qr();
    let r = qr.r();
    let diag_max = (0..p).map(|i| r[(i, i)].abs()).fold(0.0f64, f64::max);
    let rank_ok = diag_max > 0.0 && (0..p).all(|i| r[(i, i)].abs() > RANK_TOL * diag_max);

    let (beta, leverage, cond_flag) = if rank_ok {
        let q = qr.q();
        let qty = q.transpose() * y;
        let beta = r
            .solve_upper_triangular(&qty)
            .ok_or_else(|| Error::BuildFailure("triangular solve failed".into()))?;
        let leverage = DVector::from_fn(n, |i, _| q.row(i).norm_squared());
        (beta, leverage, false)
    } else {
        let svd = psi.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let tol = RANK_TOL * smax;
        let beta = svd
            .solve(y, tol)
            .map_err(|e| Error::BuildFailure(e.to_string()))?;
        let u = svd.u.as_ref().expect("svd computed with u");
        let kept: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&k| svd.singular_values[k] > tol)
            .collect();
        let leverage = DVector::from_fn(n, |i, _| {
            kept.iter().map(|&k| u[(i, k)] * u[(i, k)]).sum::<f64>()
        });
        (beta, leverage, true)
    };

    let eps_loo = loo_from_parts(psi, y, &beta, &leverage);
    Ok(FitResult {
        beta,
        eps_loo,
        leverage,
        cond_flag,
    })
}

/// Closed-form leave-one-out error of a fit: (1/N) sum ((y - yhat)/(1 - h))^2.
///
/// Any leverage above `1 - 1e-8` returns the +inf sentinel.
pub fn loo_error(fit: &FitResult, psi: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    loo_from_parts(psi, y, &fit.beta, &fit.leverage)
}

fn loo_from_parts(
    psi: &DMatrix<f64>,
    y: &DVector<f64>,
    beta: &DVector<f64>,
    leverage: &DVector<f64>,
) -> f64 {
    let yhat = psi * beta;
    let n = y.len();
    let mut acc = 0.0;
    for i in 0..n {
        let h = leverage[i];
        if h > 1.0 - LEVERAGE_TOL {
            return f64::INFINITY;
        }
        let e = (y[i] - yhat[i]) / (1.0 - h);
        acc += e * e;
    }
    acc / n as f64
}

/// Coefficient of determination: 1 - MSE / Var(y_true), with the
/// (N-1)-denominator variance. May be negative.
pub fn r_squared(y_true: &DVector<f64>, y_pred: &DVector<f64>) -> Result<f64> {
    let n = y_true.len();
    if n < 2 || y_pred.len() != n {
        return Err(Error::InvalidParameter(format!(
            "r_squared needs two equal-length vectors of size >= 2, got {} and {}",
            n,
            y_pred.len()
        )));
    }
    let mean = y_true.iter().sum::<f64>() / n as f64;
    let var = y_true.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    if var <= 0.0 {
        return Err(Error::UndefinedMetric(
            "zero variance in reference responses".into(),
        ));
    }
    let mse = y_true
        .iter()
        .zip(y_pred.iter())
        .map(|(t, p)| (t - p).powi(2))
        .sum::<f64>()
        / n as f64;
    Ok(1.0 - mse / var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Independent oracle: explicit leave-one-out refits through the normal
    /// equations.
    fn explicit_loo(psi: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
        let n = psi.nrows();
        let mut acc = 0.0;
        for i in 0..n {
            let keep: Vec<usize> = (0..n).filter(|&r| r != i).collect();
            let sub = psi.select_rows(keep.iter());
            let ysub = y.select_rows(keep.iter());
            let gram = sub.transpose() * &sub;
            let rhs = sub.transpose() * ysub;
            let beta = gram.lu().solve(&rhs).expect("oracle solve");
            let pred = (psi.row(i) * &beta)[0];
            acc += (y[i] - pred).powi(2);
        }
        acc / n as f64
    }

    fn random_problem(rng: &mut impl Rng, n: usize, p: usize) -> (DMatrix<f64>, DVector<f64>) {
        let psi = DMatrix::from_fn(n, p, |_, _| rng.gen_range(-1.0..1.0));
        let y = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
        (psi, y)
    }

    #[test]
    fn constant_design_gives_mean() {
        let psi = DMatrix::from_element(3, 1, 1.0);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let fit = ols_fit(&psi, &y).unwrap();
        assert!((fit.beta[0] - 2.0).abs() < 1e-14);
        assert!(!fit.cond_flag);
    }

    #[test]
    fn identity_design_interpolates_and_trips_sentinel() {
        let psi = DMatrix::identity(2, 2);
        let y = DVector::from_vec(vec![0.7, -1.3]);
        let fit = ols_fit(&psi, &y).unwrap();
        assert!((fit.beta[0] - 0.7).abs() < 1e-14);
        assert!((fit.beta[1] + 1.3).abs() < 1e-14);
        assert!(fit.leverage.iter().all(|&h| (h - 1.0).abs() < 1e-12));
        assert!(fit.eps_loo.is_infinite());
    }

    #[test]
    fn matches_normal_equations() {
        let mut rng = crate::seed::rng(11, &[0]);
        let (psi, y) = random_problem(&mut rng, 20, 5);
        let fit = ols_fit(&psi, &y).unwrap();
        let gram = psi.transpose() * &psi;
        let rhs = psi.transpose() * &y;
        let oracle = gram.lu().solve(&rhs).unwrap();
        let rel = (&fit.beta - &oracle).norm() / oracle.norm();
        assert!(rel < 1e-10, "relative error {rel}");
    }

    #[test]
    fn loo_constant_exact_cases() {
        let psi = DMatrix::from_element(3, 1, 1.0);
        let fit = ols_fit(&psi, &DVector::from_element(3, 5.5)).unwrap();
        assert!(fit.eps_loo.abs() < 1e-25);

        let y = DVector::from_vec(vec![0.0, 0.0, 3.0]);
        let fit = ols_fit(&psi, &y).unwrap();
        assert!((fit.eps_loo - 4.5).abs() < 1e-12);
        assert!((explicit_loo(&psi, &y) - 4.5).abs() < 1e-12);
    }

    #[test]
    fn fast_loo_equals_explicit_refits() {
        let mut rng = crate::seed::rng(12, &[0]);
        let (psi, y) = random_problem(&mut rng, 30, 6);
        let fit = ols_fit(&psi, &y).unwrap();
        let oracle = explicit_loo(&psi, &y);
        assert!((fit.eps_loo - oracle).abs() <= 1e-8 * oracle.abs());
    }

    #[test]
    fn leverage_sums_to_rank() {
        let mut rng = crate::seed::rng(13, &[0]);
        for _ in 0..20 {
            let n = rng.gen_range(5..30);
            let p = rng.gen_range(1..n);
            let (psi, y) = random_problem(&mut rng, n, p);
            let fit = ols_fit(&psi, &y).unwrap();
            let sum: f64 = fit.leverage.iter().sum();
            assert!((sum - p as f64).abs() < 1e-8, "sum {sum} rank {p}");
            assert!(fit
                .leverage
                .iter()
                .all(|&h| h >= -1e-10 && h <= 1.0 + 1e-10));
        }
    }

    #[test]
    fn rank_deficient_flags_and_minimum_norm() {
        let mut rng = crate::seed::rng(14, &[0]);
        let (mut psi, y) = random_problem(&mut rng, 10, 3);
        let dup = psi.column(1).into_owned();
        psi.set_column(2, &dup);
        let fit = ols_fit(&psi, &y).unwrap();
        assert!(fit.cond_flag);
        // Minimum-norm solution splits the duplicated coefficient evenly.
        assert!((fit.beta[1] - fit.beta[2]).abs() < 1e-8);
        let sum: f64 = fit.leverage.iter().sum();
        assert!((sum - 2.0).abs() < 1e-8, "rank-2 leverage sum {sum}");
    }

    #[test]
    fn r_squared_basics() {
        let y = DVector::from_vec(vec![1.0, 2.0, 4.0]);
        assert_eq!(r_squared(&y, &y).unwrap(), 1.0);

        let y = DVector::from_vec(vec![0.0, 2.0]);
        let pred = DVector::from_vec(vec![1.0, 1.0]);
        assert!((r_squared(&y, &pred).unwrap() - 0.5).abs() < 1e-15);

        let flat = DVector::from_element(4, 2.0);
        assert!(matches!(
            r_squared(&flat, &flat),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn r_squared_invariant_under_common_shift() {
        let mut rng = crate::seed::rng(15, &[0]);
        for _ in 0..20 {
            let n = rng.gen_range(3..40);
            let y = DVector::from_fn(n, |_, _| rng.gen_range(-5.0..5.0));
            let p = DVector::from_fn(n, |_, _| rng.gen_range(-5.0..5.0));
            let c = rng.gen_range(-100.0..100.0);
            let a = r_squared(&y, &p).unwrap();
            let b = r_squared(&y.add_scalar(c), &p.add_scalar(c)).unwrap();
            assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
        }
    }
}
