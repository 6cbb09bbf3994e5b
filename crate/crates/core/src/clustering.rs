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

//! Affinity assembly and normalized spectral clustering.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::median;
use crate::neighbors::WeightMatrix;
use crate::subspace_error::ErrorMatrix;
use crate::synthcam::Labeling;
use crate::{Error, Result};

const KMEANS_MAX_ITER: usize = 300;

/// How error entries enter the affinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorTerm {
    /// `exp(-e / sigma_e)` with a fixed scale.
    Similarity(f64),
    /// `exp(-e / sigma_e)` with `sigma_e` the median of the positive errors.
    SimilarityAuto,
    /// `|e|` added as is.
    Raw,
}

/// Symmetric, nonnegative, zero-diagonal adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct Affinity {
    a: DMatrix<f64>,
    /// Connected components of the graph with an edge wherever `A_ij > 0`.
    pub components: usize,
    /// Error scale actually used; `None` for [`ErrorTerm::Raw`].
    pub sigma_e: Option<f64>,
}

impl Affinity {
    pub fn data(&self) -> &DMatrix<f64> {
        &self.a
    }
}

/// Median of the strictly positive error entries, or 1 if there are none.
pub fn auto_sigma_e(e: &ErrorMatrix) -> f64 {
    let mut positive: Vec<f64> = e.data().iter().copied().filter(|&v| v > 0.0).collect();
    median(&mut positive).unwrap_or(1.0)
}

/// `A = (B + B^T) / 2` with `B_it = |omega_it| + s_it` off the diagonal and a
/// zero diagonal, where `s` is the error term.
pub fn build_affinity(omega: &WeightMatrix, e: &ErrorMatrix, term: ErrorTerm) -> Result<Affinity> {
    let w = omega.data();
    let err = e.data();
    if w.shape() != err.shape() || w.nrows() != w.ncols() {
        return Err(Error::ShapeMismatch(alloc::format!(
            "weights {:?} vs errors {:?}",
            w.shape(),
            err.shape()
        )));
    }
    let sigma_e = match term {
        ErrorTerm::Similarity(s) => {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::config("sigma_e", "must be finite and positive"));
            }
            Some(s)
        }
        ErrorTerm::SimilarityAuto => Some(auto_sigma_e(e)),
        ErrorTerm::Raw => None,
    };
    let p = w.nrows();
    let b = DMatrix::from_fn(p, p, |i, t| {
        if i == t {
            return 0.0;
        }
        let s = match sigma_e {
            Some(sig) => libm::exp(-err[(i, t)] / sig),
            None => err[(i, t)].abs(),
        };
        w[(i, t)].abs() + s
    });
    let mut a = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in i + 1..p {
            let v = 0.5 * (b[(i, j)] + b[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    let components = connected_components(&a);
    Ok(Affinity {
        a,
        components,
        sigma_e,
    })
}

/// Component count of the graph with edges where `a_ij > 0`.
pub fn connected_components(a: &DMatrix<f64>) -> usize {
    let p = a.nrows();
    let mut seen = vec![false; p];
    let mut stack = Vec::new();
    let mut count = 0;
    for start in 0..p {
        if seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(v) = stack.pop() {
            for u in 0..p {
                if !seen[u] && a[(v, u)] > 0.0 {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
    }
    count
}

/// `L = I - D^{-1/2} A D^{-1/2}`; zero-degree vertices get identity rows.
pub fn normalized_laplacian(a: &DMatrix<f64>) -> DMatrix<f64> {
    let p = a.nrows();
    let inv_sqrt: Vec<f64> = a
        .row_iter()
        .map(|r| {
            let d = r.sum();
            if d > 0.0 {
                1.0 / libm::sqrt(d)
            } else {
                0.0
            }
        })
        .collect();
    let mut l = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let v = inv_sqrt[i] * a[(i, j)] * inv_sqrt[j];
            let entry = if i == j { 1.0 - v } else { -v };
            l[(i, j)] = entry;
            l[(j, i)] = entry;
        }
    }
    l
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEmbedding {
    /// `P x n`, rows scaled to unit norm (zero rows stay zero).
    pub u: DMatrix<f64>,
    /// The `n` smallest eigenvalues in increasing order.
    pub eigenvalues: Vec<f64>,
}

/// All eigenvalues of a symmetric matrix, ascending, with eigenvectors.
pub fn sorted_eigen(l: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(l.clone());
    let p = l.nrows();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(p, p, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Eigenvectors of the `n` smallest eigenvalues with unit-normalized rows.
pub fn spectral_embed(l: &DMatrix<f64>, n: usize) -> Result<SpectralEmbedding> {
    let p = l.nrows();
    if n == 0 || n > p {
        return Err(Error::config(
            "n",
            alloc::format!("cluster count must lie in 1..={p}"),
        ));
    }
    let (values, vectors) = sorted_eigen(l);
    let mut u = vectors.columns(0, n).into_owned();
    for mut row in u.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
    Ok(SpectralEmbedding {
        u,
        eigenvalues: values[..n].to_vec(),
    })
}

fn sq_dist(a: &DMatrix<f64>, i: usize, c: &DMatrix<f64>, k: usize) -> f64 {
    let mut s = 0.0;
    for d in 0..a.ncols() {
        let v = a[(i, d)] - c[(k, d)];
        s += v * v;
    }
    s
}

fn plus_plus_init(x: &DMatrix<f64>, n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let p = x.nrows();
    let mut centers = DMatrix::zeros(n, x.ncols());
    let first = rng.random_range(0..p);
    centers.set_row(0, &x.row(first));
    let mut best: Vec<f64> = (0..p).map(|i| sq_dist(x, i, &centers, 0)).collect();
    for k in 1..n {
        let total: f64 = best.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = p - 1;
            for (i, &d) in best.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..p)
        };
        centers.set_row(k, &x.row(pick));
        for (i, b) in best.iter_mut().enumerate() {
            *b = b.min(sq_dist(x, i, &centers, k));
        }
    }
    centers
}

/// One Lloyd run; returns labels and inertia.
fn lloyd(x: &DMatrix<f64>, mut centers: DMatrix<f64>) -> (Vec<usize>, f64) {
    let (p, dim) = x.shape();
    let n = centers.nrows();
    let mut labels = vec![usize::MAX; p];
    for _ in 0..KMEANS_MAX_ITER {
        let mut changed = false;
        for i in 0..p {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for k in 0..n {
                let d = sq_dist(x, i, &centers, k);
                if d < best_d {
                    best_d = d;
                    best = k;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = DMatrix::<f64>::zeros(n, dim);
        let mut counts = vec![0usize; n];
        for i in 0..p {
            counts[labels[i]] += 1;
            for d in 0..dim {
                sums[(labels[i], d)] += x[(i, d)];
            }
        }
        for k in 0..n {
            if counts[k] > 0 {
                for d in 0..dim {
                    centers[(k, d)] = sums[(k, d)] / counts[k] as f64;
                }
            } else {
                // empty cluster: re-seed at the point farthest from its centre
                let far = (0..p)
                    .max_by(|&a, &b| {
                        sq_dist(x, a, &centers, labels[a])
                            .total_cmp(&sq_dist(x, b, &centers, labels[b]))
                    })
                    .expect("at least one point");
                centers.set_row(k, &x.row(far));
                labels[far] = k;
            }
        }
    }
    let inertia = (0..p).map(|i| sq_dist(x, i, &centers, labels[i])).sum();
    (labels, inertia)
}

/// Best-inertia k-means over `restarts` k-means++ seedings of the rows of `x`.
pub fn kmeans(x: &DMatrix<f64>, n: usize, restarts: usize, seed: u64) -> Result<Labeling> {
    let p = x.nrows();
    if n == 0 || n > p {
        return Err(Error::config(
            "n",
            alloc::format!("cluster count must lie in 1..={p}"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..restarts.max(1) {
        let centers = plus_plus_init(x, n, &mut rng);
        let (labels, inertia) = lloyd(x, centers);
        if best.as_ref().is_none_or(|(_, b)| inertia < *b) {
            best = Some((labels, inertia));
        }
    }
    let (labels, _) = best.expect("at least one restart");
    Labeling::new(labels, n)
}
