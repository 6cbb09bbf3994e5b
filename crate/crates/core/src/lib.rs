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

//! Motion segmentation of feature-point trajectories by two-stage sparse
//! subspace estimation.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`projection`]: the `2F x P` trajectory matrix is reduced to an `m x P`
//!    global subspace, either with plain PCA or with block sparse PCA solved
//!    by a generalized power iteration on the Stiefel manifold.
//! 2. [`neighbors`]: every projected trajectory picks a sparse set of
//!    neighbours through a weighted L1 problem under an affine constraint,
//!    restricted to a search area ranked by normalized subspace inclusion.
//! 3. [`subspace_error`]: each point and its neighbours span a local
//!    subspace; the squared residual of every point against every local
//!    subspace forms the error matrix.
//! 4. [`clustering`]: sparse weights and error similarities are combined into
//!    an affinity graph which is cut by normalized spectral clustering.
//! 5. [`metrics`]: labelings are scored by the misclassification rate under
//!    the best label bijection.
//!
//! [`synthcam`] generates labelled multi-body scenes under the affine camera
//! model for testing and benchmarking.
//!
//! The crate is `no_std` and only needs `alloc`. The `parallel` feature pulls
//! in `std` and `rayon` to run the independent per-row stages concurrently.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod clustering;
mod error;
pub mod linalg;
pub mod metrics;
pub mod neighbors;
mod par;
pub mod pipeline;
pub mod projection;
pub mod subspace_error;
pub mod synthcam;

pub use error::{Error, Result};
pub use pipeline::{segment, segment_observed, SegmentConfig, Segmentation};
pub use synthcam::{Labeling, SceneConfig, TrajectoryMatrix};
