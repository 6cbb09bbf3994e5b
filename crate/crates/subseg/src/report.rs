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

//! JSON run report and the stage timer that feeds it.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use subseg_core::clustering::ErrorTerm;
use subseg_core::neighbors::Sigma;
use subseg_core::pipeline::{Projector, Stage, StageObserver, Warning};
use subseg_core::{SegmentConfig, Segmentation, TrajectoryMatrix};

pub const REPORT_FORMAT: &str = "subseg-report/1";

/// Records wall time per stage.
#[derive(Debug, Default)]
pub struct TimingObserver {
    current: Option<(Stage, Instant)>,
    pub timings: Vec<(Stage, Duration)>,
}

impl TimingObserver {
    fn close(&mut self) {
        if let Some((stage, start)) = self.current.take() {
            self.timings.push((stage, start.elapsed()));
        }
    }
}

impl StageObserver for TimingObserver {
    fn enter(&mut self, stage: Stage) {
        self.close();
        self.current = Some((stage, Instant::now()));
    }

    fn finish(&mut self) {
        self.close();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub n: usize,
    pub projector: String,
    pub m: usize,
    pub gamma: f64,
    pub neighbors: usize,
    pub lambda: f64,
    /// `"auto"` or the fixed value.
    pub sigma: String,
    /// `"auto"`, `"raw"` or the fixed value.
    pub sigma_e: String,
    pub rank_tol: f64,
    pub seed: u64,
}

impl From<&SegmentConfig> for RunSettings {
    fn from(c: &SegmentConfig) -> Self {
        Self {
            n: c.n,
            projector: match c.projector {
                Projector::Pca => "pca",
                Projector::Spca => "spca",
            }
            .into(),
            m: c.m,
            gamma: c.gamma,
            neighbors: c.neighbors.neighbors,
            lambda: c.neighbors.lambda,
            sigma: match c.neighbors.sigma {
                Sigma::Auto => "auto".into(),
                Sigma::Fixed(v) => v.to_string(),
            },
            sigma_e: match c.error_term {
                ErrorTerm::SimilarityAuto => "auto".into(),
                ErrorTerm::Similarity(v) => v.to_string(),
                ErrorTerm::Raw => "raw".into(),
            },
            rank_tol: c.rank_tol,
            seed: c.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub rows: usize,
    pub converged: usize,
    pub max_primal_residual: f64,
    pub max_dual_residual: f64,
    pub mean_iterations: f64,
    pub mean_support: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub format: String,
    pub input: Option<String>,
    pub settings: RunSettings,
    pub frames: usize,
    pub points: usize,
    pub labels: Vec<usize>,
    pub cluster_sizes: Vec<usize>,
    /// Image position of every trajectory in the first frame, `None` when
    /// unobserved there.
    pub first_frame: Vec<Option<[f64; 2]>>,
    pub timings: Vec<StageTiming>,
    pub total_seconds: f64,
    pub eigenvalues: Vec<f64>,
    pub solver: SolverStats,
    pub spca_iterations: Option<usize>,
    pub mean_local_rank: f64,
    pub sigma_e: Option<f64>,
    pub components: usize,
    /// Rows whose sparse neighbour solve stalled. Their last iterate was used.
    pub flagged_rows: Vec<usize>,
    pub warnings: Vec<String>,
}

fn describe(w: &Warning) -> String {
    match w {
        Warning::RankDeficient { rank, m } => {
            format!("trajectory matrix has rank {rank} < m = {m}; trailing directions zero-padded")
        }
        Warning::SpcaNotConverged { iterations } => {
            format!(
                "sparse PCA stopped after {iterations} iterations without meeting the tolerance"
            )
        }
        Warning::SolverStall { rows } => format!("{} sparse neighbour rows stalled", rows.len()),
    }
}

impl Report {
    pub fn new(
        input: Option<String>,
        w: &TrajectoryMatrix,
        config: &SegmentConfig,
        seg: &Segmentation,
        timer: &TimingObserver,
    ) -> Self {
        let r = &seg.report;
        let first_frame = (0..w.points())
            .map(|p| w.position(0, p).map(|(x, y)| [x, y]))
            .collect();
        let timings: Vec<StageTiming> = timer
            .timings
            .iter()
            .map(|(s, d)| StageTiming {
                stage: s.name().into(),
                seconds: d.as_secs_f64(),
            })
            .collect();
        Self {
            format: REPORT_FORMAT.into(),
            input,
            settings: config.into(),
            frames: w.frames(),
            points: w.points(),
            labels: seg.labels.labels().to_vec(),
            cluster_sizes: seg.labels.cluster_sizes(),
            first_frame,
            total_seconds: timings.iter().map(|t| t.seconds).sum(),
            timings,
            eigenvalues: r.eigenvalues.clone(),
            solver: SolverStats {
                rows: r.solver.rows,
                converged: r.solver.converged,
                max_primal_residual: r.solver.max_primal_residual,
                max_dual_residual: r.solver.max_dual_residual,
                mean_iterations: r.solver.mean_iterations,
                mean_support: r.solver.mean_support,
            },
            spca_iterations: r.spca_iterations,
            mean_local_rank: r.mean_local_rank,
            sigma_e: r.sigma_e,
            components: r.components,
            flagged_rows: r.flagged_rows(),
            warnings: r.warnings.iter().map(describe).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Parses a report and checks that labels and positions line up.
    pub fn from_json(text: &str) -> Result<Self, String> {
        let r: Report = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if r.format != REPORT_FORMAT {
            return Err(format!("unknown report format {:?}", r.format));
        }
        if r.labels.is_empty() {
            return Err("report holds no labels".into());
        }
        if r.labels.len() != r.first_frame.len() || r.labels.len() != r.points {
            return Err(format!(
                "{} labels, {} positions and {} points disagree",
                r.labels.len(),
                r.first_frame.len(),
                r.points
            ));
        }
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use subseg_core::synthcam::generate_scene;
    use subseg_core::{segment_observed, SceneConfig};

    #[test]
    fn timer_sees_every_stage_and_report_round_trips() {
        let scene = generate_scene(&SceneConfig::uniform(2, 10, 8, 3)).unwrap();
        let cfg = SegmentConfig::new(2);
        let mut timer = TimingObserver::default();
        let seg = segment_observed(&scene.trajectories, &cfg, &mut timer).unwrap();
        assert_eq!(timer.timings.len(), 9);
        let report = Report::new(None, &scene.trajectories, &cfg, &seg, &timer);
        assert_eq!(report.cluster_sizes.iter().sum::<usize>(), 20);
        let back = Report::from_json(&report.to_json()).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn rejects_empty_or_inconsistent() {
        assert!(Report::from_json("").is_err());
        assert!(Report::from_json("{}").is_err());
    }
}
