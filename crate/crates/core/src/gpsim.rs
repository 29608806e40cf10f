//! Covariance matrices on time grids, PSD verdicts and Gaussian path sampling.

use std::io::{self, Write};

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use thiserror::Error;

use crate::kernel::{cov, BifParams, KernelError, TimeGrid};
use crate::numeric::fmt17;
use crate::rng::substream;

/// Relative diagonal jitters tried, in order, when strict Cholesky fails.
pub const JITTER_LADDER: [f64; 2] = [1e-12, 1e-10];

#[derive(Debug, Error)]
pub enum GpError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("covariance matrix is not positive semi-definite (Cholesky failed after jitter {jitter:e})")]
    NotPsd { jitter: f64 },
    #[error("eigenvalue iteration did not converge")]
    NumericalFailure,
    #[error("matrix is not square and symmetric")]
    NotSymmetric,
    #[error("tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),
    #[error("at least one path must be requested")]
    NoPaths,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "verdict")]
pub enum PsdVerdict {
    #[serde(rename = "PSD")]
    Psd {
        #[serde(serialize_with = "crate::json::f17")]
        min_eig: f64,
    },
    #[serde(rename = "NotPSD")]
    NotPsd {
        #[serde(serialize_with = "crate::json::f17")]
        min_eig: f64,
    },
    Undetermined,
}

impl PsdVerdict {
    pub fn is_psd(&self) -> bool {
        matches!(self, Self::Psd { .. })
    }
}

/// Symmetric matrix of kernel evaluations over a grid.
#[derive(Debug, Clone)]
pub struct CovMatrix {
    grid: Option<TimeGrid>,
    entries: DMatrix<f64>,
    verdict: PsdVerdict,
}

/// Lower-triangular factor `L` with `L Lᵀ ≈ entries`.
#[derive(Debug, Clone)]
pub struct Factor {
    pub l: DMatrix<f64>,
    /// Absolute diagonal jitter that was needed (0 for a strict factorization).
    pub jitter: f64,
}

/// `entries[i][j] = cov(p, grid[i], grid[j])`, verdict `Undetermined`.
pub fn build_cov_matrix(p: &BifParams, grid: &TimeGrid) -> Result<CovMatrix, GpError> {
    let t = grid.points();
    let n = t.len();
    let mut entries = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = cov(p, t[i], t[j])?;
            entries[(i, j)] = v;
            entries[(j, i)] = v;
        }
    }
    Ok(CovMatrix { grid: Some(grid.clone()), entries, verdict: PsdVerdict::Undetermined })
}

impl CovMatrix {
    /// Wraps an arbitrary square symmetric matrix.
    pub fn from_entries(entries: DMatrix<f64>) -> Result<Self, GpError> {
        if !entries.is_square() || entries != entries.transpose() {
            return Err(GpError::NotSymmetric);
        }
        Ok(Self { grid: None, entries, verdict: PsdVerdict::Undetermined })
    }

    pub fn grid(&self) -> Option<&TimeGrid> {
        self.grid.as_ref()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn verdict(&self) -> PsdVerdict {
        self.verdict
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Largest diagonal entry; all tolerances are relative to it.
    pub fn scale(&self) -> f64 {
        self.entries.diagonal().iter().copied().fold(0.0, f64::max)
    }

    /// Cholesky factor with the zero-time pinning and jitter ladder.
    ///
    /// Rows whose diagonal is exactly zero (the `t = 0` coordinates) are
    /// pinned to zero and only the complementary submatrix is factorized.
    pub fn factor(&self) -> Result<Factor, GpError> {
        let n = self.dim();
        let live: Vec<usize> = (0..n).filter(|&i| self.entries[(i, i)] != 0.0).collect();
        let mut l = DMatrix::zeros(n, n);
        if live.is_empty() {
            return Ok(Factor { l, jitter: 0.0 });
        }
        let sub = self.entries.select_rows(&live).select_columns(&live);
        let scale = self.scale();

        let mut jitter = 0.0;
        let mut chol = Cholesky::new(sub.clone());
        for rel in JITTER_LADDER {
            if chol.is_some() {
                break;
            }
            jitter = rel * scale;
            let mut shifted = sub.clone();
            for i in 0..live.len() {
                shifted[(i, i)] += jitter;
            }
            chol = Cholesky::new(shifted);
        }
        let Some(chol) = chol else {
            return Err(GpError::NotPsd { jitter });
        };
        let sub_l = chol.l();
        for (a, &i) in live.iter().enumerate() {
            for (b, &j) in live.iter().enumerate().take(a + 1) {
                l[(i, j)] = sub_l[(a, b)];
            }
        }
        Ok(Factor { l, jitter })
    }
}

/// Decides PSD by the smallest symmetric eigenvalue, relative to the matrix
/// scale, and stores the verdict on the matrix.
pub fn check_psd(m: &mut CovMatrix, tol: f64) -> Result<PsdVerdict, GpError> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(GpError::InvalidTolerance(tol));
    }
    if m.entries != m.entries.transpose() {
        return Err(GpError::NotSymmetric);
    }
    let eig = SymmetricEigen::try_new(m.entries.clone(), f64::EPSILON, 10_000)
        .ok_or(GpError::NumericalFailure)?;
    let min_eig = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if !min_eig.is_finite() {
        return Err(GpError::NumericalFailure);
    }
    let verdict = if min_eig >= -tol * m.scale() {
        PsdVerdict::Psd { min_eig }
    } else {
        PsdVerdict::NotPsd { min_eig }
    };
    m.verdict = verdict;
    Ok(verdict)
}

/// `m` sampled paths of `B^{H,K}` on a grid, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch {
    grid: TimeGrid,
    paths: Vec<f64>,
    rows: usize,
    seed: u64,
}

impl PathBatch {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.grid.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.cols();
        &self.paths[i * n..(i + 1) * n]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        let n = self.cols();
        self.paths.iter().skip(j).step_by(n).copied()
    }

    /// Empirical `E[B_{t_i} B_{t_j}]` (the mean is known to be zero) and its
    /// standard error estimated from the sample.
    pub fn empirical_cov(&self, i: usize, j: usize) -> (f64, f64) {
        let m = self.rows as f64;
        let prods: Vec<f64> = (0..self.rows).map(|r| self.row(r)[i] * self.row(r)[j]).collect();
        let mean = crate::numeric::csum(prods.iter().copied()) / m;
        let var = crate::numeric::csum(prods.iter().map(|x| (x - mean) * (x - mean))) / (m - 1.0);
        (mean, (var / m).sqrt())
    }

    /// CSV with header `t_0,...,t_{n-1}` and one row per path.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let header: Vec<String> = (0..self.cols()).map(|j| format!("t_{j}")).collect();
        writeln!(out, "{}", header.join(","))?;
        for r in 0..self.rows {
            let line: Vec<String> = self.row(r).iter().map(|&x| fmt17(x)).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

pub fn sample_paths(p: &BifParams, grid: &TimeGrid, m: usize, seed: u64) -> Result<PathBatch, GpError> {
    sample_paths_with_workers(p, grid, m, seed, 1)
}

/// Samples `m` paths; row `r` draws its normals from substream `r` of `seed`,
/// so the batch does not depend on the number of workers.
pub fn sample_paths_with_workers(
    p: &BifParams,
    grid: &TimeGrid,
    m: usize,
    seed: u64,
    workers: usize,
) -> Result<PathBatch, GpError> {
    // Sampling never accepts parameters outside the existence domain.
    BifParams::new(p.h(), p.k())?;
    if m == 0 {
        return Err(GpError::NoPaths);
    }
    let factor = build_cov_matrix(p, grid)?.factor()?;
    let n = grid.len();
    let live: Vec<usize> = (0..n).filter(|&j| grid.points()[j] != 0.0).collect();
    let l = factor.l.select_rows(&live).select_columns(&live);

    let mut paths = vec![0.0; m * n];
    let fill = |first_row: usize, chunk: &mut [f64]| {
        let mut z = DVector::zeros(live.len());
        for (k, row) in chunk.chunks_mut(n).enumerate() {
            let mut rng = substream(seed, (first_row + k) as u64);
            for zi in z.iter_mut() {
                *zi = StandardNormal.sample(&mut rng);
            }
            let x = &l * &z;
            for (a, &j) in live.iter().enumerate() {
                row[j] = x[a];
            }
        }
    };

    let workers = workers.clamp(1, m);
    if workers == 1 {
        fill(0, &mut paths);
    } else {
        let rows_per = m.div_ceil(workers);
        std::thread::scope(|s| {
            for (w, chunk) in paths.chunks_mut(rows_per * n).enumerate() {
                let fill = &fill;
                s.spawn(move || fill(w * rows_per, chunk));
            }
        });
    }
    Ok(PathBatch { grid: grid.clone(), paths, rows: m, seed })
}
