//! Partial-correlation conditional independence tests with Fisher's z.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::stats;

// Residual variance ratio below which a variable counts as fully explained.
const DEGENERATE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiRecord {
    pub pair: (usize, usize),
    pub conditioning: Vec<usize>,
    pub statistic: f64,
    pub p_value: f64,
    /// The conditioning covariance was singular and the test was not run.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub skipped: bool,
}

/// Precomputes the correlation matrix of the data after projecting out the
/// context covariates, so each test only touches a small submatrix.
#[derive(Debug, Clone)]
pub struct CiTester {
    corr: DMatrix<f64>,
    live: Vec<bool>,
    n: usize,
    context_rank: usize,
}

impl CiTester {
    /// `data` is samples × variables; `context`, when given, is samples ×
    /// covariates and every test is conditioned on it.
    pub fn new(data: &DMatrix<f64>, context: Option<&DMatrix<f64>>) -> Self {
        let n = data.nrows();
        let empty = DMatrix::zeros(n, 0);
        let (resid, rank) = stats::residualize(data, context.unwrap_or(&empty));
        let centered = stats::residualize(data, &empty).0;
        let p = data.ncols();
        let var: Vec<f64> = (0..p).map(|k| resid.column(k).norm_squared() / n as f64).collect();
        let raw_var: Vec<f64> = (0..p).map(|k| centered.column(k).norm_squared() / n as f64).collect();
        let live: Vec<bool> = (0..p)
            .map(|k| raw_var[k] > 0.0 && var[k] > DEGENERATE * raw_var[k])
            .collect();
        let mut corr = DMatrix::zeros(p, p);
        for a in 0..p {
            if !live[a] {
                continue;
            }
            corr[(a, a)] = 1.0;
            for b in (a + 1)..p {
                if !live[b] {
                    continue;
                }
                let c = resid.column(a).dot(&resid.column(b)) / n as f64 / (var[a] * var[b]).sqrt();
                corr[(a, b)] = c;
                corr[(b, a)] = c;
            }
        }
        Self {
            corr,
            live,
            n,
            context_rank: rank.saturating_sub(1),
        }
    }

    pub fn samples(&self) -> usize {
        self.n
    }

    pub fn correlation(&self, a: usize, b: usize) -> f64 {
        self.corr[(a, b)]
    }

    pub fn test(&self, i: usize, j: usize, z: &[usize]) -> CiRecord {
        let record = |statistic: f64, p_value: f64, skipped: bool| CiRecord {
            pair: (i, j),
            conditioning: z.to_vec(),
            statistic,
            p_value,
            skipped,
        };
        if !self.live[i] || !self.live[j] {
            return record(0.0, 1.0, false);
        }
        let zs: Vec<usize> = z.iter().copied().filter(|&k| self.live[k]).collect();
        let (rij, vi, vj) = if zs.is_empty() {
            (self.corr[(i, j)], 1.0, 1.0)
        } else {
            let rzz = DMatrix::from_fn(zs.len(), zs.len(), |a, b| self.corr[(zs[a], zs[b])]);
            let Some(chol) = rzz.cholesky() else {
                return record(f64::NAN, f64::NAN, true);
            };
            if chol.l().diagonal().iter().any(|d| d * d < DEGENERATE) {
                return record(f64::NAN, f64::NAN, true);
            }
            let riz = DMatrix::from_fn(zs.len(), 1, |a, _| self.corr[(i, zs[a])]);
            let rjz = DMatrix::from_fn(zs.len(), 1, |a, _| self.corr[(j, zs[a])]);
            let si = chol.solve(&riz);
            let sj = chol.solve(&rjz);
            (
                self.corr[(i, j)] - riz.dot(&sj),
                1.0 - riz.dot(&si),
                1.0 - rjz.dot(&sj),
            )
        };
        if vi < DEGENERATE || vj < DEGENERATE {
            return record(0.0, 1.0, false);
        }
        let r = rij / (vi * vj).sqrt();
        let dof = self.n as f64 - zs.len() as f64 - self.context_rank as f64 - 3.0;
        let (statistic, p_value) = stats::fisher_z_pvalue(r, dof);
        record(statistic, p_value, false)
    }
}
