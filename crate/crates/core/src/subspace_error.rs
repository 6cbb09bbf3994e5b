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

//! Local subspaces and the point-to-subspace error matrix.
//!
//! Point `i` and its sparse neighbours span the local subspace `S_i`. With an
//! orthonormal basis `B_i` of `S_i` the pseudo-inverse is `B_i^T`, so the
//! error of point `t` against `S_i` is `e_it = |alpha_t - B_i B_i^T alpha_t|^2`.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::linalg::svd;
use crate::neighbors::WeightMatrix;
use crate::par::map_rows;
use crate::projection::GlobalSubspace;
use crate::{Error, Result};

/// Default relative singular-value cut for local subspace rank.
pub const RANK_TOL: f64 = 1e-3;

/// Errors below this are round-off and reported as exactly zero. Columns of
/// the global subspace have unit norm, so every error lies in `[0, 1]`.
pub const ERROR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LocalSubspace {
    /// Sorted member indices, always including the owning point.
    pub members: Vec<usize>,
    /// `m x rank` orthonormal basis.
    pub basis: DMatrix<f64>,
}

impl LocalSubspace {
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }
}

/// `P x P` matrix with `e_it` in row `i`, column `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMatrix {
    data: DMatrix<f64>,
}

impl ErrorMatrix {
    /// Wraps precomputed errors; the matrix must be square with finite,
    /// nonnegative entries.
    pub fn from_data(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(Error::ShapeMismatch(alloc::format!(
                "error matrix is {:?}",
                data.shape()
            )));
        }
        if data.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::config(
                "errors",
                "entries must be finite and nonnegative",
            ));
        }
        Ok(Self { data })
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }
}

/// `{i}` together with the nonzero entries of row `i` of `Omega`.
pub fn collect_local_subspace(omega: &WeightMatrix, i: usize) -> Vec<usize> {
    let mut members = omega.row_support(i);
    if let Err(pos) = members.binary_search(&i) {
        members.insert(pos, i);
    }
    members
}

/// Left singular vectors of the member columns whose singular value exceeds
/// `rank_tol * sigma_max`.
pub fn subspace_basis(g: &GlobalSubspace, members: &[usize], rank_tol: f64) -> DMatrix<f64> {
    let cols = g.data().select_columns(members.iter());
    let d = svd(&cols);
    if d.singular_values.is_empty() || d.singular_values[0] == 0.0 {
        return DMatrix::zeros(g.m(), 0);
    }
    let cut = rank_tol * d.singular_values[0];
    let rank = d.singular_values.iter().filter(|&&s| s > cut).count();
    d.u.columns(0, rank).into_owned()
}

/// Squared residual of every projected point against the span of `basis`,
/// with round-off flushed to zero.
pub fn error_vector(basis: &DMatrix<f64>, g: &GlobalSubspace) -> Vec<f64> {
    let a = g.data();
    let coeffs = basis.transpose() * a;
    let residual = a - basis * coeffs;
    residual
        .column_iter()
        .map(|c| {
            let e = c.norm_squared();
            if e < ERROR_FLOOR {
                0.0
            } else {
                e
            }
        })
        .collect()
}

/// Local subspace of every point. Independent per row.
pub fn local_subspaces(
    g: &GlobalSubspace,
    omega: &WeightMatrix,
    rank_tol: f64,
) -> Result<Vec<LocalSubspace>> {
    let p = g.points();
    if omega.data().shape() != (p, p) {
        return Err(Error::ShapeMismatch(alloc::format!(
            "weight matrix {:?} for {p} points",
            omega.data().shape()
        )));
    }
    Ok(map_rows(p, |i| {
        let members = collect_local_subspace(omega, i);
        let basis = subspace_basis(g, &members, rank_tol);
        LocalSubspace { members, basis }
    }))
}

/// Row `i` is the error vector of local subspace `i`.
pub fn error_matrix(subspaces: &[LocalSubspace], g: &GlobalSubspace) -> Result<ErrorMatrix> {
    let p = g.points();
    if subspaces.len() != p {
        return Err(Error::ShapeMismatch(alloc::format!(
            "{} local subspaces for {p} points",
            subspaces.len()
        )));
    }
    let rows = map_rows(p, |i| error_vector(&subspaces[i].basis, g));
    let mut data = DMatrix::zeros(p, p);
    for (i, row) in rows.into_iter().enumerate() {
        for (t, v) in row.into_iter().enumerate() {
            data[(i, t)] = v;
        }
    }
    Ok(ErrorMatrix { data })
}
