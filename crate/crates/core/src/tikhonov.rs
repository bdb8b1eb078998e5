//! Real-coefficient Tikhonov regularization of complex systems and L-curve
//! parameter selection.
//!
//! For real `x`, `‖Gx − g‖² + λ‖x‖²` is minimized by
//! `(ReGᵀReG + ImGᵀImG + λI) x = ReGᵀReg + ImGᵀImg`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The real-split normal matrix `M = ReGᵀReG + ImGᵀImG` and `b = ReGᵀReg + ImGᵀImg`.
pub fn normal_equations(g: &DMatrix<Complex64>, rhs: &DVector<Complex64>) -> (DMatrix<f64>, DVector<f64>) {
    let re = g.map(|z| z.re);
    let im = g.map(|z| z.im);
    let m = re.tr_mul(&re) + im.tr_mul(&im);
    let b = re.tr_mul(&rhs.map(|z| z.re)) + im.tr_mul(&rhs.map(|z| z.im));
    (m, b)
}

fn check_problem(g: &DMatrix<Complex64>, rhs: &DVector<Complex64>) -> Result<()> {
    if g.is_empty() {
        return Err(Error::Domain("system matrix is empty".into()));
    }
    if g.nrows() != rhs.len() {
        return Err(Error::Domain(format!(
            "system has {} rows but right-hand side has {} entries",
            g.nrows(),
            rhs.len()
        )));
    }
    Ok(())
}

/// Solves the regularized normal equations by Cholesky factorization.
pub fn solve_tikhonov(g: &DMatrix<Complex64>, rhs: &DVector<Complex64>, lambda: f64) -> Result<DVector<f64>> {
    check_problem(g, rhs)?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("regularization parameter must be positive, got {lambda}")));
    }
    let (mut m, b) = normal_equations(g, rhs);
    let scale = m.diagonal().amax();
    for i in 0..m.nrows() {
        m[(i, i)] += lambda;
    }
    let chol = m.cholesky().ok_or_else(|| {
        Error::Numerical(format!(
            "Cholesky factorization failed for lambda = {lambda:e} (largest normal-matrix diagonal {scale:e})"
        ))
    })?;
    Ok(chol.solve(&b))
}

pub fn residual_norm(g: &DMatrix<Complex64>, rhs: &DVector<Complex64>, x: &DVector<f64>) -> f64 {
    (g * x.map(|v| Complex64::new(v, 0.0)) - rhs).norm()
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n).map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)).collect()
}

/// 25 log-spaced values in `[1e−8, 1]`.
pub fn default_lambda_grid() -> Vec<f64> {
    log_grid(1e-8, 1.0, 25)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LCurvePoint {
    pub lambda: f64,
    pub residual_norm: f64,
    pub solution_norm: f64,
    /// Signed discrete curvature; absent at the two end points.
    pub curvature: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LCurve {
    pub points: Vec<LCurvePoint>,
    pub selected: usize,
    /// The curve had no usable shape and the median λ was returned.
    pub degenerate: bool,
}

/// Signed curvature of the circle through three points; positive for a
/// counter-clockwise turn.
pub fn menger_curvature(p1: (f64, f64), p2: (f64, f64), p3: (f64, f64)) -> f64 {
    let cross = (p2.0 - p1.0) * (p3.1 - p1.1) - (p2.1 - p1.1) * (p3.0 - p1.0);
    let d = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).hypot(a.1 - b.1);
    let denom = d(p1, p2) * d(p2, p3) * d(p1, p3);
    if denom == 0.0 {
        0.0
    } else {
        2.0 * cross / denom
    }
}

/// Regularized solutions for every λ, via one symmetric eigendecomposition
/// of the normal matrix.
pub fn tikhonov_sweep(g: &DMatrix<Complex64>, rhs: &DVector<Complex64>, lambdas: &[f64]) -> Result<Vec<DVector<f64>>> {
    check_problem(g, rhs)?;
    let (m, b) = normal_equations(g, rhs);
    let eig = SymmetricEigen::new(m);
    let qtb = eig.eigenvectors.tr_mul(&b);
    let evals = eig.eigenvalues.map(|v| v.max(0.0));
    Ok(lambdas
        .par_iter()
        .map(|&lam| {
            let coef = DVector::from_iterator(qtb.len(), qtb.iter().zip(evals.iter()).map(|(c, e)| c / (e + lam)));
            &eig.eigenvectors * coef
        })
        .collect())
}

fn check_lambda_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
        return Err(Error::Domain("λ grid must be nonempty with positive finite values".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("λ grid must be strictly increasing".into()));
    }
    if grid.len() > 1 && (grid.len() < 5 || grid[grid.len() - 1] / grid[0] < 1e4 * (1.0 - 1e-12)) {
        return Err(Error::Precondition(format!(
            "L-curve needs at least 5 values spanning 4 decades, got {} spanning {:.2}",
            grid.len(),
            (grid[grid.len() - 1] / grid[0]).log10()
        )));
    }
    Ok(())
}

/// Picks the λ of maximal signed curvature on the discrete curve
/// `(log₁₀‖Gx_λ − g‖, log₁₀‖x_λ‖)`.
pub fn select_lambda_lcurve(g: &DMatrix<Complex64>, rhs: &DVector<Complex64>, grid: &[f64]) -> Result<(f64, LCurve)> {
    check_lambda_grid(grid)?;
    let xs = tikhonov_sweep(g, rhs, grid)?;
    let mut points: Vec<LCurvePoint> = grid
        .iter()
        .zip(&xs)
        .map(|(&lambda, x)| LCurvePoint {
            lambda,
            residual_norm: residual_norm(g, rhs, x),
            solution_norm: x.norm(),
            curvature: None,
        })
        .collect();
    if points.len() == 1 {
        return Ok((grid[0], LCurve { points, selected: 0, degenerate: false }));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|p| (p.residual_norm.log10(), p.solution_norm.log10())).collect();
    let r0 = points[0].residual_norm;
    let flat = points.iter().all(|p| (p.residual_norm - r0).abs() <= 1e-12 * r0.abs().max(f64::MIN_POSITIVE));
    let finite = logs.iter().all(|(a, b)| a.is_finite() && b.is_finite());
    let mut best: Option<(usize, f64)> = None;
    if finite && !flat {
        for i in 1..points.len() - 1 {
            let k = menger_curvature(logs[i - 1], logs[i], logs[i + 1]);
            points[i].curvature = Some(k);
            if best.is_none_or(|(_, b)| k > b) {
                best = Some((i, k));
            }
        }
    }
    match best {
        Some((i, _)) => Ok((grid[i], LCurve { points, selected: i, degenerate: false })),
        None => {
            let i = (grid.len() - 1) / 2;
            log::warn!("degenerate L-curve; falling back to median lambda {:e}", grid[i]);
            Ok((grid[i], LCurve { points, selected: i, degenerate: true }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn scalar_examples() {
        let g = DMatrix::from_diagonal_element(2, 2, c(1.0));
        let x = solve_tikhonov(&g, &DVector::from_element(2, c(1.0)), 1.0).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-15 && (x[1] - 0.5).abs() < 1e-15);
        let x = solve_tikhonov(&DMatrix::from_element(1, 1, c(2.0)), &DVector::from_element(1, c(4.0)), 0.5).unwrap();
        assert!((x[0] - 8.0 / 4.5).abs() < 1e-14);
        assert!(solve_tikhonov(&g, &DVector::from_element(2, c(1.0)), 0.0).is_err());
    }

    fn random_problem(seed: u64, rows: usize, cols: usize) -> (DMatrix<Complex64>, DVector<Complex64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut z = || Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let g = DMatrix::from_fn(rows, cols, |_, _| z());
        let b = DVector::from_fn(rows, |_, _| z());
        (g, b)
    }

    #[test]
    fn gradient_vanishes_at_solution() {
        let (g, b) = random_problem(3, 8, 5);
        let lam = 0.3;
        let x = solve_tikhonov(&g, &b, lam).unwrap();
        let obj = |x: &DVector<f64>| residual_norm(&g, &b, x).powi(2) + lam * x.norm_squared();
        let h = 1e-6;
        let grad = DVector::from_fn(5, |i, _| {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            (obj(&xp) - obj(&xm)) / (2.0 * h)
        });
        assert!(grad.norm() < 1e-6 * b.norm());
    }

    #[test]
    fn sweep_matches_cholesky() {
        let (g, b) = random_problem(4, 12, 6);
        let lams = [1e-3, 0.1, 2.0];
        let xs = tikhonov_sweep(&g, &b, &lams).unwrap();
        for (lam, x) in lams.iter().zip(xs) {
            assert!((solve_tikhonov(&g, &b, *lam).unwrap() - x).norm() < 1e-10);
        }
    }

    #[test]
    fn lcurve_grid_rules() {
        let (g, b) = random_problem(5, 10, 4);
        let (lam, curve) = select_lambda_lcurve(&g, &b, &[0.25]).unwrap();
        assert_eq!(lam, 0.25);
        assert_eq!(curve.points.len(), 1);
        assert!(matches!(select_lambda_lcurve(&g, &b, &[1e-3, 1e-2, 1e-1]), Err(Error::Precondition(_))));
        assert!(matches!(select_lambda_lcurve(&g, &b, &log_grid(1e-2, 1.0, 9)), Err(Error::Precondition(_))));
        assert!(matches!(select_lambda_lcurve(&g, &b, &[1.0, 0.1, 1e-2, 1e-3, 1e-6]), Err(Error::Domain(_))));
        let grid = default_lambda_grid();
        assert_eq!(grid.len(), 25);
        let (lam, _) = select_lambda_lcurve(&g, &b, &grid).unwrap();
        assert!(grid.contains(&lam));
    }

    #[test]
    fn lcurve_finds_corner_of_ill_posed_problem() {
        // singular values 10^{-j}: the corner sits near the noise level
        let n = 10;
        let mut g = DMatrix::<Complex64>::zeros(n, n);
        for j in 0..n {
            g[(j, j)] = c(10f64.powi(-(j as i32)));
        }
        let xt = DVector::from_element(n, 1.0);
        let mut rhs = &g * xt.map(c);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for v in rhs.iter_mut() {
            *v += c(1e-4 * rng.random_range(-1.0..1.0));
        }
        let grid = log_grid(1e-14, 1.0, 57);
        let (lam, curve) = select_lambda_lcurve(&g, &rhs, &grid).unwrap();
        assert!(!curve.degenerate);
        assert!((1e-11..1e-5).contains(&lam), "{lam:e}");
    }

    #[test]
    fn degenerate_curve_falls_back_to_median() {
        let g = DMatrix::from_element(3, 2, c(1.0));
        let zero = DVector::zeros(3);
        let grid = log_grid(1e-6, 1.0, 7);
        let (lam, curve) = select_lambda_lcurve(&g, &zero, &grid).unwrap();
        assert!(curve.degenerate);
        assert_eq!(lam, grid[3]);
    }

    #[test]
    fn menger_sign() {
        // down then right is a counter-clockwise turn
        assert!(menger_curvature((0.0, 1.0), (0.0, 0.0), (1.0, 0.0)) > 0.0);
        assert!(menger_curvature((0.0, 0.0), (1.0, 0.0), (2.0, 0.0)) == 0.0);
        let r = menger_curvature((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0));
        assert!((r - 1.0).abs() < 1e-15);
    }
}
