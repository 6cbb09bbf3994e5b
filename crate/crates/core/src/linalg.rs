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

//! Small dense linear algebra helpers on top of `nalgebra`.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

/// Thin SVD with singular values sorted in decreasing order.
///
/// `u` is `r x k`, `v` is `c x k` (right singular vectors as columns) where
/// `k = min(r, c)`.
#[derive(Debug, Clone)]
pub struct SortedSvd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v: DMatrix<f64>,
}

pub fn svd(a: &DMatrix<f64>) -> SortedSvd {
    let (r, c) = a.shape();
    let k = r.min(c);
    if k == 0 {
        return SortedSvd {
            u: DMatrix::zeros(r, 0),
            singular_values: DVector::zeros(0),
            v: DMatrix::zeros(c, 0),
        };
    }
    let dec = a.clone().svd_unordered(true, true);
    let u = dec.u.expect("u requested");
    let v_t = dec.v_t.expect("v_t requested");
    let sv = dec.singular_values;

    let mut order: Vec<usize> = (0..k).collect();
    // Stable on ties so the factorization is reproducible.
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));

    let mut su = DMatrix::zeros(r, k);
    let mut sv_sorted = DVector::zeros(k);
    let mut svv = DMatrix::zeros(c, k);
    for (dst, &src) in order.iter().enumerate() {
        su.set_column(dst, &u.column(src));
        sv_sorted[dst] = sv[src];
        svv.set_column(dst, &v_t.row(src).transpose());
    }
    SortedSvd {
        u: su,
        singular_values: sv_sorted,
        v: svv,
    }
}

/// Number of singular values strictly above `rel_tol * sigma_max`.
pub fn numerical_rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    let s = svd(a).singular_values;
    if s.is_empty() || s[0] == 0.0 {
        return 0;
    }
    let cut = rel_tol * s[0];
    s.iter().filter(|&&x| x > cut).count()
}

/// Orthogonal polar factor `U V^T` of `a`.
pub fn polar(a: &DMatrix<f64>) -> DMatrix<f64> {
    let d = svd(a);
    &d.u * d.v.transpose()
}

/// Orthonormal basis of the column span of `a` (singular values above
/// `rel_tol * sigma_max`).
pub fn orthonormal_basis(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let d = svd(a);
    if d.singular_values.is_empty() || d.singular_values[0] == 0.0 {
        return DMatrix::zeros(a.nrows(), 0);
    }
    let cut = rel_tol * d.singular_values[0];
    let r = d.singular_values.iter().filter(|&&x| x > cut).count();
    d.u.columns(0, r).into_owned()
}

/// Principal angles (radians, ascending) between the column spans of `a`
/// and `b`. Both inputs are orthonormalized first.
pub fn principal_angles(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let qa = orthonormal_basis(a, 1e-12);
    let qb = orthonormal_basis(b, 1e-12);
    let cross = qa.transpose() * qb;
    let s = svd(&cross).singular_values;
    let mut angles: Vec<f64> = s.iter().map(|&c| libm::acos(c.clamp(-1.0, 1.0))).collect();
    angles.sort_by(f64::total_cmp);
    angles
}

/// `max |A^T A - I|` over all entries.
pub fn orthonormality_error(a: &DMatrix<f64>) -> f64 {
    let g = a.transpose() * a;
    let mut worst: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

pub(crate) fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svd_is_sorted_and_reconstructs() {
        let a = DMatrix::from_row_slice(
            3,
            4,
            &[1.0, 2.0, 0.0, -1.0, 0.5, 0.0, 3.0, 2.0, -2.0, 1.0, 1.0, 0.0],
        );
        let d = svd(&a);
        for k in 1..d.singular_values.len() {
            assert!(d.singular_values[k - 1] >= d.singular_values[k]);
        }
        let rec = &d.u * DMatrix::from_diagonal(&d.singular_values) * d.v.transpose();
        assert!((rec - a).norm() < 1e-12);
    }

    #[test]
    fn rank_of_outer_product_is_one() {
        let u = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let v = DVector::from_vec(vec![4.0, -1.0]);
        assert_eq!(numerical_rank(&(u * v.transpose()), 1e-9), 1);
    }

    #[test]
    fn principal_angles_of_coordinate_planes() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let ang = principal_angles(&a, &b);
        assert!(ang[0].abs() < 1e-12);
        assert!((ang[1] - core::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn polar_factor_is_orthonormal() {
        let a = DMatrix::from_row_slice(4, 2, &[3.0, 1.0, 0.0, 2.0, 1.0, 1.0, -1.0, 0.5]);
        assert!(orthonormality_error(&polar(&a)) < 1e-14);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&mut []), None);
    }
}
