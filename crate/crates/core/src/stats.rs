//! Small numeric helpers shared across modules.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Sample standard deviation (n - 1 denominator).
pub fn sample_std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn is_constant(xs: &[f64]) -> bool {
    let m = mean(xs);
    std_dev(xs) <= 1e-12 * (1.0 + m.abs())
}

/// Zero mean, unit population variance; constant inputs map to all zeros.
pub fn standardize(xs: &[f64]) -> Vec<f64> {
    if is_constant(xs) {
        return vec![0.0; xs.len()];
    }
    let m = mean(xs);
    let s = std_dev(xs);
    xs.iter().map(|x| (x - m) / s).collect()
}

/// Row indices of one moving-block bootstrap replicate of `n` rows.
pub fn moving_block_indices<R: Rng + ?Sized>(n: usize, block_len: usize, rng: &mut R) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    let b = block_len.clamp(1, n);
    let starts = n - b + 1;
    let mut out = Vec::with_capacity(n + b);
    while out.len() < n {
        let s = rng.random_range(0..starts);
        out.extend(s..s + b);
    }
    out.truncate(n);
    out
}

/// Least squares of `y` on the columns of `x` through the SVD pseudo-inverse.
/// Returns coefficients and the numerical rank of `x`.
pub fn lstsq(x: &DMatrix<f64>, y: &DVector<f64>) -> (DVector<f64>, usize) {
    let svd = x.clone().svd(true, true);
    let tol = svd_tolerance(&svd.singular_values, x.nrows(), x.ncols());
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let beta = svd
        .solve(y, tol)
        .unwrap_or_else(|_| DVector::zeros(x.ncols()));
    (beta, rank)
}

fn svd_tolerance(sv: &DVector<f64>, rows: usize, cols: usize) -> f64 {
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    smax * rows.max(cols) as f64 * f64::EPSILON * 16.0
}

/// Ridge solution `(XᵀX + λI)⁻¹ Xᵀy`.
pub fn ridge(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> DVector<f64> {
    let xt = x.transpose();
    let mut gram = &xt * x;
    for i in 0..gram.nrows() {
        gram[(i, i)] += lambda;
    }
    let rhs = xt * y;
    gram.clone()
        .cholesky()
        .map(|c| c.solve(&rhs))
        .or_else(|| gram.lu().solve(&rhs))
        .unwrap_or_else(|| DVector::zeros(x.ncols()))
}

/// Residuals of every column of `data` after projecting out an intercept and
/// the columns of `covariates`. Returns the residual matrix and the rank of
/// the covariate design (intercept included).
pub fn residualize(data: &DMatrix<f64>, covariates: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let n = data.nrows();
    let mut design = DMatrix::from_element(n, covariates.ncols() + 1, 1.0);
    design
        .view_mut((0, 1), (n, covariates.ncols()))
        .copy_from(covariates);
    let svd = design.clone().svd(true, false);
    let tol = svd_tolerance(&svd.singular_values, n, design.ncols());
    let u = svd.u.expect("requested U");
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > tol)
        .collect();
    let basis = u.select_columns(&keep);
    let proj = &basis * (basis.transpose() * data);
    (data - proj, keep.len())
}

/// Two-sided p-value of the Fisher z test for a partial correlation `r`
/// estimated from `n` samples with `k` conditioning variables and `extra`
/// further degrees of freedom spent (context covariates).
pub fn fisher_z_pvalue(r: f64, dof: f64) -> (f64, f64) {
    if dof <= 0.0 {
        return (0.0, 1.0);
    }
    let r = r.clamp(-0.999_999_999_999, 0.999_999_999_999);
    let z = 0.5 * ((1.0 + r) / (1.0 - r)).ln() * dof.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let p = 2.0 * (1.0 - normal.cdf(z.abs()));
    (z, p.clamp(0.0, 1.0))
}

/// Cosine similarity; zero when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}
