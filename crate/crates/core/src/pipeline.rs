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

//! End-to-end segmentation: project, select sparse neighbours, weight,
//! build local subspaces, measure errors, assemble the affinity and cluster.

use alloc::vec::Vec;

use crate::clustering::{
    build_affinity, kmeans, normalized_laplacian, sorted_eigen, Affinity, ErrorTerm,
    SpectralEmbedding,
};
use crate::neighbors::{
    nsi_dissimilarity_rows, sparse_neighbors, weight_matrix, NeighborParams,
    SparseNeighborSolution, WeightMatrix,
};
use crate::projection::{assemble_global, gpower_block, pca_project, GlobalSubspace, SpcaParams};
use crate::subspace_error::{error_matrix, local_subspaces, ErrorMatrix, LocalSubspace, RANK_TOL};
use crate::synthcam::{Labeling, TrajectoryMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projector {
    Pca,
    Spca,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentConfig {
    /// Number of motions.
    pub n: usize,
    pub projector: Projector,
    /// Dimension of the global subspace.
    pub m: usize,
    /// Sparsity weight broadcast to every component; `mu_j = 1/j`.
    pub gamma: f64,
    pub neighbors: NeighborParams,
    /// Relative singular-value cut for local subspace rank.
    pub rank_tol: f64,
    pub error_term: ErrorTerm,
    pub kmeans_restarts: usize,
    pub seed: u64,
}

impl SegmentConfig {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            projector: Projector::Spca,
            m: 5,
            gamma: 0.01,
            neighbors: NeighborParams::default(),
            rank_tol: RANK_TOL,
            error_term: ErrorTerm::SimilarityAuto,
            kmeans_restarts: 10,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("n", "must be at least 1"));
        }
        if self.m == 0 {
            return Err(Error::config("m", "must be at least 1"));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::config("gamma", "must be finite and nonnegative"));
        }
        if !(self.rank_tol > 0.0 && self.rank_tol < 1.0) {
            return Err(Error::config("rank_tol", "must lie in (0, 1)"));
        }
        self.neighbors.validate()
    }
}

/// Pipeline stages, reported to a [`StageObserver`] as they start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Projection,
    Distances,
    SparseNeighbors,
    Weights,
    LocalSubspaces,
    Errors,
    Affinity,
    Spectral,
    KMeans,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Projection => "projection",
            Stage::Distances => "distances",
            Stage::SparseNeighbors => "sparse_neighbors",
            Stage::Weights => "weights",
            Stage::LocalSubspaces => "local_subspaces",
            Stage::Errors => "errors",
            Stage::Affinity => "affinity",
            Stage::Spectral => "spectral",
            Stage::KMeans => "kmeans",
        }
    }
}

/// Hook for timing or tracing stages; the core has no clock of its own.
pub trait StageObserver {
    fn enter(&mut self, _stage: Stage) {}
    fn finish(&mut self) {}
}

impl StageObserver for () {}

/// Non-fatal conditions met on the way.
#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    /// PCA found fewer than `m` nonzero singular values.
    RankDeficient { rank: usize, m: usize },
    /// The sparse PCA iteration hit its cap.
    SpcaNotConverged { iterations: usize },
    /// Sparse neighbour rows whose solver stalled; their last iterate is used.
    SolverStall { rows: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolverSummary {
    pub rows: usize,
    pub converged: usize,
    pub max_primal_residual: f64,
    pub max_dual_residual: f64,
    pub mean_iterations: f64,
    /// Mean number of nonzero sparse coefficients per row.
    pub mean_support: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineReport {
    pub projector: Projector,
    pub m: usize,
    pub spca_iterations: Option<usize>,
    pub solver: SolverSummary,
    pub mean_local_rank: f64,
    pub sigma_e: Option<f64>,
    pub components: usize,
    /// The `n + 1` smallest Laplacian eigenvalues (fewer if `P <= n`).
    pub eigenvalues: Vec<f64>,
    pub warnings: Vec<Warning>,
}

impl PipelineReport {
    pub fn flagged_rows(&self) -> Vec<usize> {
        self.warnings
            .iter()
            .filter_map(|w| match w {
                Warning::SolverStall { rows } => Some(rows.clone()),
                _ => None,
            })
            .flatten()
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Segmentation {
    pub labels: Labeling,
    pub report: PipelineReport,
}

/// Every intermediate product of one run.
#[derive(Debug, Clone)]
pub struct Stages {
    pub global: GlobalSubspace,
    pub neighbors: SparseNeighborSolution,
    pub omega: WeightMatrix,
    pub subspaces: Vec<LocalSubspace>,
    pub errors: ErrorMatrix,
    pub affinity: Affinity,
    pub embedding: SpectralEmbedding,
}

pub fn segment(w: &TrajectoryMatrix, config: &SegmentConfig) -> Result<Segmentation> {
    segment_observed(w, config, &mut ())
}

pub fn segment_observed(
    w: &TrajectoryMatrix,
    config: &SegmentConfig,
    observer: &mut dyn StageObserver,
) -> Result<Segmentation> {
    segment_detailed(w, config, observer).map(|(s, _)| s)
}

/// Runs the full pipeline and also returns the intermediate products.
pub fn segment_detailed(
    w: &TrajectoryMatrix,
    config: &SegmentConfig,
    observer: &mut dyn StageObserver,
) -> Result<(Segmentation, Stages)> {
    config.validate()?;
    let p = w.points();
    if config.n > p {
        return Err(Error::config(
            "n",
            alloc::format!("{} clusters for {p} trajectories", config.n),
        ));
    }
    let mut warnings = Vec::new();

    observer.enter(Stage::Projection);
    let (global, spca_iterations) = match config.projector {
        Projector::Pca => {
            let proj = pca_project(w, config.m)?;
            if let Some(rank) = proj.rank_deficient {
                warnings.push(Warning::RankDeficient { rank, m: config.m });
            }
            (proj.subspace, None)
        }
        Projector::Spca => {
            let params = SpcaParams::with_gamma(config.m, config.gamma)?;
            let out = gpower_block(w, &params)?;
            if !out.converged {
                warnings.push(Warning::SpcaNotConverged {
                    iterations: out.iterations,
                });
            }
            (assemble_global(w, &out.loadings)?, Some(out.iterations))
        }
    };

    observer.enter(Stage::Distances);
    let (_, x) = nsi_dissimilarity_rows(&global);

    observer.enter(Stage::SparseNeighbors);
    let neighbors = sparse_neighbors(&x, &config.neighbors)?;
    let stalled = neighbors.stalled_rows();
    if !stalled.is_empty() {
        warnings.push(Warning::SolverStall { rows: stalled });
    }

    observer.enter(Stage::Weights);
    let omega = weight_matrix(&neighbors.c, &x)?;

    observer.enter(Stage::LocalSubspaces);
    let subspaces = local_subspaces(&global, &omega, config.rank_tol)?;

    observer.enter(Stage::Errors);
    let errors = error_matrix(&subspaces, &global)?;

    observer.enter(Stage::Affinity);
    let affinity = build_affinity(&omega, &errors, config.error_term)?;

    observer.enter(Stage::Spectral);
    let lap = normalized_laplacian(affinity.data());
    let (values, vectors) = sorted_eigen(&lap);
    let mut u = vectors.columns(0, config.n).into_owned();
    for mut row in u.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
    let embedding = SpectralEmbedding {
        u,
        eigenvalues: values[..config.n].to_vec(),
    };

    observer.enter(Stage::KMeans);
    let labels = kmeans(&embedding.u, config.n, config.kmeans_restarts, config.seed)?;
    observer.finish();

    let stats = &neighbors.stats;
    let rows = stats.len().max(1) as f64;
    let solver = SolverSummary {
        rows: stats.len(),
        converged: stats.iter().filter(|s| s.converged).count(),
        max_primal_residual: stats.iter().map(|s| s.primal_residual).fold(0.0, f64::max),
        max_dual_residual: stats.iter().map(|s| s.dual_residual).fold(0.0, f64::max),
        mean_iterations: stats.iter().map(|s| s.iterations as f64).sum::<f64>() / rows,
        mean_support: neighbors.c.iter().filter(|&&v| v != 0.0).count() as f64 / rows,
    };
    let mean_local_rank = subspaces.iter().map(|s| s.rank() as f64).sum::<f64>() / rows;
    let report = PipelineReport {
        projector: config.projector,
        m: config.m,
        spca_iterations,
        solver,
        mean_local_rank,
        sigma_e: affinity.sigma_e,
        components: affinity.components,
        eigenvalues: values.iter().take(config.n + 1).copied().collect(),
        warnings,
    };
    Ok((
        Segmentation { labels, report },
        Stages {
            global,
            neighbors,
            omega,
            subspaces,
            errors,
            affinity,
            embedding,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthcam::{generate_scene, SceneConfig};

    #[test]
    fn rejects_bad_config() {
        let scene = generate_scene(&SceneConfig::uniform(2, 10, 6, 1)).unwrap();
        let mut cfg = SegmentConfig::new(0);
        assert!(matches!(
            segment(&scene.trajectories, &cfg),
            Err(Error::InvalidConfig { field: "n", .. })
        ));
        cfg.n = 30;
        assert!(segment(&scene.trajectories, &cfg).is_err());
    }

    #[test]
    fn observer_sees_every_stage() {
        struct Log(Vec<Stage>, bool);
        impl StageObserver for Log {
            fn enter(&mut self, stage: Stage) {
                self.0.push(stage);
            }
            fn finish(&mut self) {
                self.1 = true;
            }
        }
        let scene = generate_scene(&SceneConfig::uniform(2, 12, 8, 2)).unwrap();
        let mut log = Log(Vec::new(), false);
        let seg = segment_observed(&scene.trajectories, &SegmentConfig::new(2), &mut log).unwrap();
        assert_eq!(log.0.len(), 9);
        assert_eq!(log.0[0], Stage::Projection);
        assert!(log.1);
        assert_eq!(seg.labels.len(), 24);
        assert_eq!(seg.report.eigenvalues.len(), 3);
    }
}
