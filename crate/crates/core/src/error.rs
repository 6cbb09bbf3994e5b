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

use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A parameter failed validation; `field` names the offending setting.
    #[error("invalid `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("motion tracks disagree on frame count: expected {expected}, found {found}")]
    FrameMismatch { expected: usize, found: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Sparsity weight `gamma[component]` exceeds `mu^2 * max_i |w_i|^2`, so
    /// the sparsity pattern of that component is empty.
    #[error("sparsity weight of component {component} is infeasible: {gamma} > bound {bound}")]
    InfeasibleSparsity {
        component: usize,
        gamma: f64,
        bound: f64,
    },

    /// A projected trajectory vanished; usually a fully-missing trajectory.
    #[error("projected trajectory {column} has zero norm")]
    ZeroColumn { column: usize },

    #[error("labelings have different lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },

    #[error("label {label} out of range for {n} clusters")]
    LabelOutOfRange { label: usize, n: usize },
}

impl Error {
    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field,
            reason: reason.into(),
        }
    }
}
