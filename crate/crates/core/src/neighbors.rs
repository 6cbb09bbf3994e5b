// Copyright 2026 The subseg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Sparse neighbour selection in the global subspace.
//!
//! For a projected trajectory `alpha_i` the candidates are the `T` columns
//! closest in NSI distance `x_ij = 1 - (alpha_i^T alpha_j)^2`. Over those
//! candidates we solve
//!
//! ```text
//! min_c  lambda * |Q c|_1 + 1/2 * |diag(x) c|_2^2   s.t.  1^T c = 1
//! ```
//!
//! with `Q = diag(softmax(x / sigma))`, so far candidates pay a larger L1
//! price. The sparse coefficients are turned into the weight matrix `Omega`
//! by `omega_ij = (c_ij / x_ij) / sum_t (c_it / x_it)`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVectorView};

use crate::par::map_rows;
use crate::projection::GlobalSubspace;
use crate::{Error, Result};

/// Floor applied to distances when dividing by them in the weight formula.
pub const DISTANCE_FLOOR: f64 = 1e-12;
/// Residual level above which a solve that ran out of iterations is flagged.
pub const STALL_RESIDUAL: f64 = 1e-3;

/// Normalized subspace inclusion of two unit vectors, `(a^T b)^2`.
///
/// For single vectors the trace form reduces to the squared inner product
/// because both spans are one dimensional.
pub fn nsi(a: DVectorView<'_, f64>, b: DVectorView<'_, f64>) -> f64 {
    let d = a.dot(&b);
    d * d
}

/// Pairwise NSI of all projected trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct NsiMatrix {
    data: DMatrix<f64>,
}

impl NsiMatrix {
    pub fn from_subspace(g: &GlobalSubspace) -> Self {
        let a = g.data();
        let gram = a.transpose() * a;
        let p = gram.nrows();
        let mut data = DMatrix::zeros(p, p);
        for i in 0..p {
            for j in i..p {
                let v = gram[(i, j)] * gram[(i, j)];
                data[(i, j)] = v;
                data[(j, i)] = v;
            }
        }
        Self { data }
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    /// `1 - NSI_ij`, clamped at zero against round-off.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        (1.0 - self.data[(i, j)]).max(0.0)
    }

    /// The distance matrix `X` whose row `i` is the vector `X_i`.
    pub fn distances(&self) -> DMatrix<f64> {
        self.data.map(|v| (1.0 - v).max(0.0))
    }
}

/// NSI matrix and the matching distance rows `X_i`.
pub fn nsi_dissimilarity_rows(g: &GlobalSubspace) -> (NsiMatrix, DMatrix<f64>) {
    let nsi = NsiMatrix::from_subspace(g);
    let x = nsi.distances();
    (nsi, x)
}

/// Indices of the `t` smallest entries of `x_i` other than `i`, ties going to
/// the lower index. Returned in ranking order.
pub fn search_area(x_i: &[f64], i: usize, t: usize) -> Result<Vec<usize>> {
    if t < 2 {
        return Err(Error::config(
            "neighbors",
            "search area must hold at least 2 points",
        ));
    }
    let mut idx: Vec<usize> = (0..x_i.len()).filter(|&j| j != i).collect();
    idx.sort_by(|&a, &b| x_i[a].total_cmp(&x_i[b]).then(a.cmp(&b)));
    idx.truncate(t);
    Ok(idx)
}

/// Diagonal of `Q_i`: `exp(x_j / sigma) / sum_t exp(x_t / sigma)`.
pub fn proximity_weights(x: &[f64], sigma: f64) -> Vec<f64> {
    let top = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = x.iter().map(|&v| libm::exp((v - top) / sigma)).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

/// Mean candidate distance, the default `sigma`. Falls back to 1 when every
/// candidate coincides with the point.
pub fn auto_sigma(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 1.0;
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    if mean > 0.0 {
        mean
    } else {
        1.0
    }
}

/// `lambda * sum q_j |c_j| + 1/2 * sum (x_j c_j)^2`.
pub fn neighbor_objective(x: &[f64], q: &[f64], lambda: f64, c: &[f64]) -> f64 {
    let mut l1 = 0.0;
    let mut quad = 0.0;
    for ((&xj, &qj), &cj) in x.iter().zip(q).zip(c) {
        l1 += qj * cj.abs();
        quad += (xj * cj) * (xj * cj);
    }
    lambda * l1 + 0.5 * quad
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmParams {
    pub rho: f64,
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub max_iter: usize,
}

impl Default for AdmmParams {
    fn default() -> Self {
        Self {
            rho: 1.0,
            tol_abs: 1e-8,
            tol_rel: 1e-6,
            max_iter: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sigma {
    /// Mean distance of the candidates of each row.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborParams {
    /// Size `T` of the search area.
    pub neighbors: usize,
    pub lambda: f64,
    pub sigma: Sigma,
    pub admm: AdmmParams,
}

impl Default for NeighborParams {
    fn default() -> Self {
        Self {
            neighbors: 20,
            lambda: 0.02,
            sigma: Sigma::Auto,
            admm: AdmmParams::default(),
        }
    }
}

impl NeighborParams {
    pub fn validate(&self) -> Result<()> {
        if self.neighbors < 2 {
            return Err(Error::config("neighbors", "must be at least 2"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::config("lambda", "must be finite and nonnegative"));
        }
        if let Sigma::Fixed(s) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::config("sigma", "must be finite and positive"));
            }
        }
        let a = &self.admm;
        if !(a.rho > 0.0 && a.tol_abs > 0.0 && a.tol_rel >= 0.0 && a.max_iter > 0) {
            return Err(Error::config(
                "admm",
                "rho, tolerances and max_iter must be positive",
            ));
        }
        Ok(())
    }
}

/// Solver diagnostics for one row.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RowStats {
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
    /// Out of iterations with a residual above [`STALL_RESIDUAL`]; the last
    /// iterate is still used.
    pub stalled: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowSolution {
    /// One coefficient per candidate, summing to one.
    pub coefficients: Vec<f64>,
    pub stats: RowStats,
}

/// Alternating-direction solver for one row.
///
/// Splits `c = z`: the `c` step is the equality-constrained least squares
/// `min 1/2 c^T D c + rho/2 |c - z + u|^2, 1^T c = 1` solved through its KKT
/// system (diagonal here, so in closed form), the `z` step soft-thresholds
/// with `lambda * q / rho`, and `u` accumulates the splitting residual. The
/// returned coefficients are the sparse `z` iterate shifted on its support so
/// the affine constraint holds exactly.
pub fn solve_sparse_neighbors(
    x: &[f64],
    sigma: f64,
    lambda: f64,
    admm: &AdmmParams,
) -> RowSolution {
    let n = x.len();
    if n == 0 {
        return RowSolution {
            coefficients: Vec::new(),
            stats: RowStats::default(),
        };
    }
    if n == 1 {
        return RowSolution {
            coefficients: vec![1.0],
            stats: RowStats {
                converged: true,
                ..RowStats::default()
            },
        };
    }

    let q = proximity_weights(x, sigma);
    let rho = admm.rho;
    let d: Vec<f64> = x.iter().map(|v| v * v).collect();
    let inv: Vec<f64> = d.iter().map(|dj| 1.0 / (dj + rho)).collect();
    let inv_sum: f64 = inv.iter().sum();
    let thresh: Vec<f64> = q.iter().map(|qj| lambda * qj / rho).collect();
    let sqrt_n = libm::sqrt(n as f64);

    let mut c = vec![1.0 / n as f64; n];
    let mut z = c.clone();
    let mut u = vec![0.0; n];
    let mut stats = RowStats::default();

    for it in 1..=admm.max_iter {
        // c-step: (D + rho I) c + nu 1 = rho (z - u), 1^T c = 1
        let weighted: f64 = (0..n).map(|j| rho * (z[j] - u[j]) * inv[j]).sum();
        let nu = (weighted - 1.0) / inv_sum;
        for j in 0..n {
            c[j] = (rho * (z[j] - u[j]) - nu) * inv[j];
        }

        let mut dz = 0.0;
        let mut r = 0.0;
        for j in 0..n {
            let v = c[j] + u[j];
            let znew = v.signum() * (v.abs() - thresh[j]).max(0.0);
            dz += (znew - z[j]) * (znew - z[j]);
            z[j] = znew;
            u[j] += c[j] - z[j];
            r += (c[j] - z[j]) * (c[j] - z[j]);
        }

        let primal = libm::sqrt(r);
        let dual = rho * libm::sqrt(dz);
        let c_norm = libm::sqrt(c.iter().map(|v| v * v).sum::<f64>());
        let z_norm = libm::sqrt(z.iter().map(|v| v * v).sum::<f64>());
        let u_norm = libm::sqrt(u.iter().map(|v| v * v).sum::<f64>());
        let eps_pri = sqrt_n * admm.tol_abs + admm.tol_rel * c_norm.max(z_norm);
        let eps_dual = sqrt_n * admm.tol_abs + admm.tol_rel * rho * u_norm;

        stats.iterations = it;
        stats.primal_residual = primal;
        stats.dual_residual = dual;
        if primal <= eps_pri && dual <= eps_dual {
            stats.converged = true;
            break;
        }
    }
    stats.stalled =
        !stats.converged && stats.primal_residual.max(stats.dual_residual) > STALL_RESIDUAL;

    let support: Vec<usize> = (0..n).filter(|&j| z[j] != 0.0).collect();
    let coefficients = if support.is_empty() {
        c
    } else {
        let shift = (1.0 - z.iter().sum::<f64>()) / support.len() as f64;
        for &j in &support {
            z[j] += shift;
        }
        z
    };
    RowSolution {
        coefficients,
        stats,
    }
}

/// Sparse coefficients of every row, scattered into a `P x P` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseNeighborSolution {
    /// Row `i` holds `c_i`; zero outside the search area and on the diagonal.
    pub c: DMatrix<f64>,
    /// Search area of each row, in ranking order.
    pub candidates: Vec<Vec<usize>>,
    pub stats: Vec<RowStats>,
}

impl SparseNeighborSolution {
    pub fn stalled_rows(&self) -> Vec<usize> {
        self.stats
            .iter()
            .enumerate()
            .filter(|(_, s)| s.stalled)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Solves the sparse neighbour problem for every projected trajectory.
/// Rows are independent and run in parallel under the `parallel` feature.
pub fn sparse_neighbors(
    x: &DMatrix<f64>,
    params: &NeighborParams,
) -> Result<SparseNeighborSolution> {
    params.validate()?;
    let p = x.nrows();
    if x.ncols() != p {
        return Err(Error::ShapeMismatch(alloc::format!(
            "distance matrix is {:?}",
            x.shape()
        )));
    }
    let rows = map_rows(p, |i| -> Result<(Vec<usize>, RowSolution)> {
        let row: Vec<f64> = x.row(i).iter().copied().collect();
        let cand = if p <= 1 {
            Vec::new()
        } else {
            search_area(&row, i, params.neighbors)?
        };
        let xc: Vec<f64> = cand.iter().map(|&j| row[j]).collect();
        let sigma = match params.sigma {
            Sigma::Auto => auto_sigma(&xc),
            Sigma::Fixed(s) => s,
        };
        let sol = solve_sparse_neighbors(&xc, sigma, params.lambda, &params.admm);
        Ok((cand, sol))
    });

    let mut c = DMatrix::zeros(p, p);
    let mut candidates = Vec::with_capacity(p);
    let mut stats = Vec::with_capacity(p);
    for (i, row) in rows.into_iter().enumerate() {
        let (cand, sol) = row?;
        for (&j, &v) in cand.iter().zip(&sol.coefficients) {
            c[(i, j)] = v;
        }
        candidates.push(cand);
        stats.push(sol.stats);
    }
    Ok(SparseNeighborSolution {
        c,
        candidates,
        stats,
    })
}

/// `Omega`, the row-normalized distance-weighted coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    omega: DMatrix<f64>,
}

impl WeightMatrix {
    pub fn data(&self) -> &DMatrix<f64> {
        &self.omega
    }

    pub fn row_support(&self, i: usize) -> Vec<usize> {
        self.omega
            .row(i)
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(j, _)| j)
            .collect()
    }
}

/// `omega_ij = (c_ij / x_ij) / sum_{t != i} (c_it / x_it)` with a zero
/// diagonal. Distances are floored at [`DISTANCE_FLOOR`] so exact duplicates
/// receive nearly all of the weight. Rows whose normalizer vanishes stay zero.
pub fn weight_matrix(c: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<WeightMatrix> {
    if c.shape() != x.shape() || c.nrows() != c.ncols() {
        return Err(Error::ShapeMismatch(alloc::format!(
            "coefficients {:?} vs distances {:?}",
            c.shape(),
            x.shape()
        )));
    }
    let p = c.nrows();
    let mut omega = DMatrix::zeros(p, p);
    for i in 0..p {
        let mut total = 0.0;
        for t in 0..p {
            if t != i && c[(i, t)] != 0.0 {
                total += c[(i, t)] / x[(i, t)].max(DISTANCE_FLOOR);
            }
        }
        if total == 0.0 || !total.is_finite() {
            continue;
        }
        for j in 0..p {
            if j != i && c[(i, j)] != 0.0 {
                omega[(i, j)] = c[(i, j)] / x[(i, j)].max(DISTANCE_FLOOR) / total;
            }
        }
    }
    Ok(WeightMatrix { omega })
}
