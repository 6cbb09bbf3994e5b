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

//! Global subspace projection: plain PCA, or block sparse PCA by the
//! generalized power method.
//!
//! The sparse variables are the `2F` coordinate rows `w_i` of the trajectory
//! matrix `W` (each a vector in `R^P`). The block method maximizes
//!
//! ```text
//! f(Y) = sum_j sum_i [ (mu_j * w_i^T y_j)^2 - gamma_j ]_+
//! ```
//!
//! over `P x m` matrices `Y` with orthonormal columns. `f` is convex, so
//! the iteration `Y <- polar(grad f(Y))` never decreases it. The loadings
//! `Z` (`2F x m`) are read off the final `Y` through the sparsity pattern and
//! the global subspace is `W~ = normalize_columns(Z^T W)`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::linalg::{polar, svd};
use crate::synthcam::TrajectoryMatrix;
use crate::{Error, Result};

/// Projected trajectory norms below this are treated as zero.
pub const ZERO_COLUMN_TOL: f64 = 1e-12;
/// Singular values at or below `RANK_TOL * sigma_max` count as zero for PCA.
const RANK_TOL: f64 = 1e-12;

/// Parameters of the block sparse PCA.
#[derive(Debug, Clone, PartialEq)]
pub struct SpcaParams {
    m: usize,
    gamma: Vec<f64>,
    mu: Vec<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl SpcaParams {
    /// Checks the data-independent invariants: `m >= 1`, matching lengths,
    /// `gamma_j >= 0`, and distinct positive `mu_j`. Feasibility of `gamma`
    /// against the data is checked by [`SpcaParams::check_feasible`].
    pub fn new(gamma: Vec<f64>, mu: Vec<f64>, tol: f64, max_iter: usize) -> Result<Self> {
        let m = mu.len();
        if m == 0 {
            return Err(Error::config("m", "projected dimension must be at least 1"));
        }
        if gamma.len() != m {
            return Err(Error::config(
                "gamma",
                alloc::format!("expected {m} sparsity weights, got {}", gamma.len()),
            ));
        }
        if gamma.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::config(
                "gamma",
                "sparsity weights must be finite and nonnegative",
            ));
        }
        if mu.iter().any(|u| !(u.is_finite() && *u > 0.0)) {
            return Err(Error::config("mu", "scales must be finite and positive"));
        }
        for a in 0..m {
            for b in a + 1..m {
                if mu[a] == mu[b] {
                    return Err(Error::config("mu", "scales must be pairwise distinct"));
                }
            }
        }
        if !(tol > 0.0) {
            return Err(Error::config("tol", "must be positive"));
        }
        if max_iter == 0 {
            return Err(Error::config("max_iter", "must be at least 1"));
        }
        Ok(Self {
            m,
            gamma,
            mu,
            tol,
            max_iter,
        })
    }

    /// `gamma` broadcast to all `m` components and `mu = [1/1, 1/2, ..., 1/m]`.
    pub fn with_gamma(m: usize, gamma: f64) -> Result<Self> {
        let mu = (1..=m).map(|j| 1.0 / j as f64).collect();
        Self::new(vec![gamma; m], mu, 1e-8, 500)
    }

    /// `gamma = 0.01` for every component, `mu_j = 1/j`.
    pub fn defaults(m: usize) -> Result<Self> {
        Self::with_gamma(m, 0.01)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// Upper bound `mu_j^2 * max_i |w_i|^2` above which component `j` has an
    /// empty sparsity pattern.
    pub fn gamma_bound(&self, w: &DMatrix<f64>, j: usize) -> f64 {
        let max_sq = w.row_iter().map(|r| r.norm_squared()).fold(0.0, f64::max);
        self.mu[j] * self.mu[j] * max_sq
    }

    pub fn check_feasible(&self, w: &DMatrix<f64>) -> Result<()> {
        for j in 0..self.m {
            let bound = self.gamma_bound(w, j);
            if self.gamma[j] > bound {
                return Err(Error::InfeasibleSparsity {
                    component: j,
                    gamma: self.gamma[j],
                    bound,
                });
            }
        }
        Ok(())
    }
}

/// Output of the block sparse PCA.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseLoadings {
    /// `2F x m` loadings; zero off the pattern, nonzero columns unit norm.
    pub z: DMatrix<f64>,
    /// `P x m` with orthonormal columns.
    pub y: DMatrix<f64>,
    /// `2F x m` active set.
    pub pattern: DMatrix<bool>,
}

/// Result of [`gpower_block`]. A run that hits `max_iter` is still usable;
/// `converged` records whether the tolerance was met.
#[derive(Debug, Clone)]
pub struct GpowerOutcome {
    pub loadings: SparseLoadings,
    pub iterations: usize,
    pub converged: bool,
    /// Objective at the initial iterate followed by one value per iteration.
    pub objective_trace: Vec<f64>,
}

/// Unit-norm projected trajectories, `m x P`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalSubspace {
    data: DMatrix<f64>,
}

impl GlobalSubspace {
    /// Normalizes every column; fails on a (numerically) zero column.
    pub fn from_projection(projected: DMatrix<f64>) -> Result<Self> {
        let mut data = projected;
        for (c, mut col) in data.column_iter_mut().enumerate() {
            let n = col.norm();
            if !(n >= ZERO_COLUMN_TOL) {
                return Err(Error::ZeroColumn { column: c });
            }
            col /= n;
        }
        Ok(Self { data })
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn m(&self) -> usize {
        self.data.nrows()
    }

    pub fn points(&self) -> usize {
        self.data.ncols()
    }
}

/// PCA output; `rank_deficient` is set when `W` had fewer than `m` nonzero
/// singular values and the trailing rows were zero-padded.
#[derive(Debug, Clone)]
pub struct PcaProjection {
    pub subspace: GlobalSubspace,
    pub rank_deficient: Option<usize>,
}

/// Projects trajectories onto the top `m` left singular vectors of `W`.
/// Rows of the result span the top-`m` right singular subspace.
pub fn pca_project(w: &TrajectoryMatrix, m: usize) -> Result<PcaProjection> {
    let data = w.data();
    let k = data.nrows().min(data.ncols());
    if m == 0 || m > k {
        return Err(Error::config("m", alloc::format!("must lie in 1..={k}")));
    }
    let dec = svd(data);
    let smax = dec.singular_values[0];
    let rank = dec
        .singular_values
        .iter()
        .filter(|&&s| s > RANK_TOL * smax)
        .count();
    let mut basis = dec.u.columns(0, m).into_owned();
    for j in rank..m {
        basis.column_mut(j).fill(0.0);
    }
    let subspace = GlobalSubspace::from_projection(basis.transpose() * data)?;
    Ok(PcaProjection {
        subspace,
        rank_deficient: (rank < m).then_some(rank),
    })
}

/// `(mu_j * w_i^T y_j)` for every coordinate row `i` and component `j`.
fn scaled_scores(w: &DMatrix<f64>, y: &DMatrix<f64>, mu: &[f64]) -> DMatrix<f64> {
    let mut s = w * y;
    for (j, mut col) in s.column_iter_mut().enumerate() {
        col *= mu[j];
    }
    s
}

/// Block sparse PCA objective `sum_j sum_i [(mu_j w_i^T y_j)^2 - gamma_j]_+`.
pub fn objective(w: &DMatrix<f64>, y: &DMatrix<f64>, params: &SpcaParams) -> f64 {
    let s = scaled_scores(w, y, &params.mu);
    let mut total = 0.0;
    for j in 0..params.m {
        for i in 0..s.nrows() {
            let v = s[(i, j)] * s[(i, j)] - params.gamma[j];
            if v > 0.0 {
                total += v;
            }
        }
    }
    total
}

/// Active set: entry `(i, j)` is active iff `(mu_j w_i^T y_j)^2 > gamma_j`.
pub fn extract_pattern(
    y: &DMatrix<f64>,
    w: &TrajectoryMatrix,
    params: &SpcaParams,
) -> DMatrix<bool> {
    pattern_of(w.data(), y, params)
}

fn pattern_of(w: &DMatrix<f64>, y: &DMatrix<f64>, params: &SpcaParams) -> DMatrix<bool> {
    let s = scaled_scores(w, y, &params.mu);
    DMatrix::from_fn(s.nrows(), s.ncols(), |i, j| {
        s[(i, j)] * s[(i, j)] > params.gamma[j]
    })
}

fn gradient(w: &DMatrix<f64>, y: &DMatrix<f64>, params: &SpcaParams) -> DMatrix<f64> {
    let proj = w * y;
    let mut masked = proj.clone();
    for j in 0..params.m {
        let mu2 = params.mu[j] * params.mu[j];
        for i in 0..proj.nrows() {
            let sij = proj[(i, j)];
            masked[(i, j)] = if mu2 * sij * sij > params.gamma[j] {
                2.0 * mu2 * sij
            } else {
                0.0
            };
        }
    }
    w.transpose() * masked
}

/// Loadings at a fixed `Y`: `z_j` is the pattern-masked `W y_j`, normalized.
fn loadings_from(w: &DMatrix<f64>, y: DMatrix<f64>, params: &SpcaParams) -> SparseLoadings {
    let pattern = pattern_of(w, &y, params);
    let mut z = w * &y;
    for j in 0..params.m {
        for i in 0..z.nrows() {
            if !pattern[(i, j)] {
                z[(i, j)] = 0.0;
            }
        }
        let n = z.column(j).norm();
        if n > 0.0 {
            z.column_mut(j).unscale_mut(n);
        }
    }
    SparseLoadings { z, y, pattern }
}

/// Generalized power iteration for the block sparse PCA problem.
///
/// Starts from the top `m` right singular vectors of `W` and stops once the
/// relative objective gain drops below `params.tol`.
pub fn gpower_block(w: &TrajectoryMatrix, params: &SpcaParams) -> Result<GpowerOutcome> {
    let data = w.data();
    let (rows, cols) = data.shape();
    let m = params.m;
    if m > rows.min(cols) {
        return Err(Error::config(
            "m",
            alloc::format!("must lie in 1..={}", rows.min(cols)),
        ));
    }
    if data.iter().all(|&x| x == 0.0) {
        return Err(Error::config(
            "data",
            "trajectory matrix is identically zero",
        ));
    }
    params.check_feasible(data)?;

    let mut y = svd(data).v.columns(0, m).into_owned();
    let mut f = objective(data, &y, params);
    let mut trace = vec![f];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < params.max_iter {
        let g = gradient(data, &y, params);
        if g.iter().all(|&x| x == 0.0) {
            converged = true;
            break;
        }
        let next = polar(&g);
        let f_next = objective(data, &next, params);
        iterations += 1;
        trace.push(f_next);
        let gain = f_next - f;
        y = next;
        f = f_next;
        if gain <= params.tol * f.abs() {
            converged = true;
            break;
        }
    }

    Ok(GpowerOutcome {
        loadings: loadings_from(data, y, params),
        iterations,
        converged,
        objective_trace: trace,
    })
}

/// Global subspace `normalize_columns(Z^T W)`.
pub fn assemble_global(w: &TrajectoryMatrix, loadings: &SparseLoadings) -> Result<GlobalSubspace> {
    if loadings.z.nrows() != w.data().nrows() {
        return Err(Error::ShapeMismatch(alloc::format!(
            "loadings have {} rows, trajectory matrix has {}",
            loadings.z.nrows(),
            w.data().nrows()
        )));
    }
    GlobalSubspace::from_projection(loadings.z.transpose() * w.data())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{orthonormality_error, principal_angles};
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn traj(data: DMatrix<f64>) -> TrajectoryMatrix {
        TrajectoryMatrix::new(data).unwrap()
    }

    #[test]
    fn default_parameters() {
        let p = SpcaParams::defaults(5).unwrap();
        assert_eq!(p.gamma(), &[0.01; 5]);
        assert_eq!(p.mu(), &[1.0, 0.5, 1.0 / 3.0, 0.25, 0.2]);
    }

    #[test]
    fn mu_must_be_distinct_and_positive() {
        assert!(SpcaParams::new(vec![0.0; 2], vec![1.0, 1.0], 1e-8, 10).is_err());
        assert!(SpcaParams::new(vec![0.0; 2], vec![1.0, 0.0], 1e-8, 10).is_err());
        assert!(SpcaParams::new(vec![-1.0, 0.0], vec![1.0, 0.5], 1e-8, 10).is_err());
        assert!(SpcaParams::new(vec![0.0], vec![1.0, 0.5], 1e-8, 10).is_err());
    }

    #[test]
    fn gamma_above_bound_is_rejected() {
        let w = traj(random_matrix(6, 8, 1));
        let p = SpcaParams::with_gamma(2, 0.0).unwrap();
        let bound = p.gamma_bound(w.data(), 1);
        let bad = SpcaParams::new(vec![0.0, bound * 1.01], p.mu().to_vec(), 1e-8, 50).unwrap();
        assert!(matches!(
            gpower_block(&w, &bad),
            Err(Error::InfeasibleSparsity { component: 1, .. })
        ));
    }

    #[test]
    fn pca_of_identity_gives_coordinate_axes() {
        let w = traj(DMatrix::identity(4, 4));
        let proj = pca_project(&w, 4).unwrap();
        assert!(proj.rank_deficient.is_none());
        let a = proj.subspace.data();
        let gram = a.transpose() * a;
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)].abs() - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pca_rows_span_top_right_singular_subspace() {
        let data = random_matrix(12, 30, 2);
        let w = traj(data.clone());
        let proj = pca_project(&w, 3).unwrap();
        let rows = proj.subspace.data().transpose();
        // normalizing columns rescales rows of W~^T, so compare the span of
        // the unnormalized projection instead
        let d = svd(&data);
        let raw = d.u.columns(0, 3).transpose() * &data;
        let ang = principal_angles(&raw.transpose(), &d.v.columns(0, 3).into_owned());
        assert!(ang.iter().all(|&a| a < 1e-10));
        for c in 0..rows.nrows() {
            assert!((rows.row(c).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pca_flags_rank_deficiency() {
        let u = DVector::from_fn(6, |i, _| i as f64 + 1.0);
        let v = DVector::from_fn(8, |i, _| (i as f64) - 3.5);
        let w = traj(&u * v.transpose());
        let proj = pca_project(&w, 3).unwrap();
        assert_eq!(proj.rank_deficient, Some(1));
        let a = proj.subspace.data();
        assert!(a.row(1).iter().all(|&x| x == 0.0));
        assert!(a.row(2).iter().all(|&x| x == 0.0));
        for c in a.column_iter() {
            assert!((c.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pca_rejects_oversized_m() {
        let w = traj(random_matrix(4, 3, 3));
        assert!(pca_project(&w, 4).is_err());
        assert!(pca_project(&w, 0).is_err());
    }

    #[test]
    fn zero_gamma_recovers_principal_subspace() {
        let data = random_matrix(20, 40, 4);
        let w = traj(data.clone());
        let params = SpcaParams::with_gamma(4, 0.0).unwrap();
        let out = gpower_block(&w, &params).unwrap();
        assert!(out.loadings.pattern.iter().all(|&a| a));
        let d = svd(&data);
        let ang = principal_angles(&out.loadings.z, &d.u.columns(0, 4).into_owned());
        assert!(ang.iter().all(|&a| a < 1e-6), "{ang:?}");
        assert!(orthonormality_error(&out.loadings.y) < 1e-10);
    }

    #[test]
    fn objective_never_decreases() {
        for seed in 0..5 {
            let data = random_matrix(16, 25, 10 + seed);
            let w = traj(data.clone());
            let p0 = SpcaParams::with_gamma(3, 0.0).unwrap();
            let bound = p0.gamma_bound(&data, 2);
            let params = SpcaParams::with_gamma(3, 0.3 * bound).unwrap();
            let out = gpower_block(&w, &params).unwrap();
            for pair in out.objective_trace.windows(2) {
                assert!(pair[1] >= pair[0] - 1e-12 * pair[0].abs(), "{pair:?}");
            }
            assert!(orthonormality_error(&out.loadings.y) < 1e-10);
        }
    }

    #[test]
    fn loadings_respect_pattern_and_norm() {
        let data = random_matrix(10, 15, 21);
        let w = traj(data.clone());
        let params = SpcaParams::with_gamma(3, 0.5).unwrap();
        let out = gpower_block(&w, &params).unwrap();
        let l = &out.loadings;
        for j in 0..3 {
            let col = l.z.column(j);
            for i in 0..10 {
                if !l.pattern[(i, j)] {
                    assert_eq!(col[i], 0.0);
                }
            }
            let n = col.norm();
            assert!(n == 0.0 || (n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn near_bound_gamma_leaves_single_active_row() {
        let mut data = random_matrix(8, 12, 5);
        // make row 3 the unique longest row
        for c in 0..12 {
            data[(3, c)] *= 4.0;
        }
        let w = traj(data.clone());
        let base = SpcaParams::with_gamma(2, 0.0).unwrap();
        let gamma: Vec<f64> = (0..2)
            .map(|j| base.gamma_bound(&data, j) * (1.0 - 1e-9))
            .collect();
        let params = SpcaParams::new(gamma, base.mu().to_vec(), 1e-8, 200).unwrap();
        let out = gpower_block(&w, &params).unwrap();
        for j in 0..2 {
            let active = out
                .loadings
                .pattern
                .column(j)
                .iter()
                .filter(|&&a| a)
                .count();
            assert!(active <= 1);
        }
    }

    #[test]
    fn pattern_strictness_and_threshold() {
        let w = traj(DMatrix::from_row_slice(
            4,
            2,
            &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0],
        ));
        let y = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let zero = SpcaParams::new(vec![0.0], vec![1.0], 1e-8, 10).unwrap();
        let pat = extract_pattern(&y, &w, &zero);
        // rows with w_i^T y = 0 stay inactive
        assert_eq!(
            pat.column(0).iter().copied().collect::<Vec<_>>(),
            vec![true, false, true, false]
        );
        let high = SpcaParams::new(vec![2.5], vec![1.0], 1e-8, 10).unwrap();
        assert!(extract_pattern(&y, &w, &high).iter().all(|&a| !a));
        // exact equality is inactive
        let tie = SpcaParams::new(vec![1.0], vec![1.0], 1e-8, 10).unwrap();
        assert!(extract_pattern(&y, &w, &tie).iter().all(|&a| !a));
    }

    #[test]
    fn pattern_matches_direct_evaluation() {
        let data = random_matrix(10, 6, 33);
        let w = traj(data.clone());
        let y = polar(&random_matrix(6, 2, 34));
        let params = SpcaParams::new(vec![0.05, 0.02], vec![1.0, 0.5], 1e-8, 10).unwrap();
        let pat = extract_pattern(&y, &w, &params);
        for i in 0..10 {
            for j in 0..2 {
                let mut dot = 0.0;
                for k in 0..6 {
                    dot += data[(i, k)] * y[(k, j)];
                }
                let lhs = params.mu()[j] * dot;
                assert_eq!(pat[(i, j)], lhs * lhs > params.gamma()[j]);
            }
        }
    }

    #[test]
    fn zero_gamma_global_matches_pca_up_to_row_sign() {
        let data = random_matrix(14, 20, 8);
        let w = traj(data);
        let params = SpcaParams::with_gamma(3, 0.0).unwrap();
        let out = gpower_block(&w, &params).unwrap();
        let g = assemble_global(&w, &out.loadings).unwrap();
        let p = pca_project(&w, 3).unwrap().subspace;
        for r in 0..3 {
            let a = g.data().row(r);
            let b = p.data().row(r);
            let same = (a - b).norm();
            let flip = (a + b).norm();
            assert!(same.min(flip) < 1e-8, "row {r}: {same} {flip}");
        }
    }

    #[test]
    fn assemble_single_column_and_zero_column() {
        let w = traj(DMatrix::from_column_slice(2, 1, &[3.0, 4.0]));
        let loadings = SparseLoadings {
            z: DMatrix::identity(2, 1),
            y: DMatrix::identity(1, 1),
            pattern: DMatrix::from_element(2, 1, true),
        };
        let g = assemble_global(&w, &loadings).unwrap();
        assert!((g.data()[(0, 0)].abs() - 1.0).abs() < 1e-12);

        let w = traj(DMatrix::from_column_slice(2, 2, &[0.0, 4.0, 1.0, 0.0]));
        let loadings = SparseLoadings {
            z: DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
            y: DMatrix::identity(2, 1),
            pattern: DMatrix::from_element(2, 1, true),
        };
        assert_eq!(
            assemble_global(&w, &loadings),
            Err(Error::ZeroColumn { column: 0 })
        );
    }
}
