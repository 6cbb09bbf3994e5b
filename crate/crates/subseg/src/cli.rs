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

//! Subcommands `generate`, `segment`, `eval` and `report`.
//!
//! Exit codes: 0 success, 1 output could not be written, 2 invalid
//! configuration or arguments, 3 unreadable or malformed input, 4 the
//! pipeline itself failed.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use subseg_core::clustering::ErrorTerm;
use subseg_core::metrics::{aggregate, misclassification, ScoreReport};
use subseg_core::neighbors::Sigma;
use subseg_core::pipeline::Projector;
use subseg_core::synthcam::generate_scene;
use subseg_core::{segment_observed, SceneConfig, SegmentConfig};

use crate::config::{self, ConfigError, SceneFile};
use crate::format::{self, TrajectoryFile};
use crate::report::{Report, TimingObserver};
use crate::svg;

pub const THREADS_VAR: &str = "SUBSEG_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Io = 1,
    Config = 2,
    Parse = 3,
    Pipeline = 4,
}

#[derive(Debug)]
pub struct CliError {
    pub exit: Exit,
    pub message: String,
}

impl CliError {
    fn new(exit: Exit, message: impl Into<String>) -> Self {
        Self {
            exit,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::new(Exit::Config, e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "subseg",
    version,
    about = "Motion segmentation of feature trajectories"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic multi-body scene as a trajectory file.
    Generate(GenerateArgs),
    /// Segment a trajectory file.
    Segment(SegmentArgs),
    /// Score predicted labels against ground truth.
    Eval(EvalArgs),
    /// Plot a segmentation report as SVG.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// TOML scene description. Flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub motions: Option<usize>,
    /// Points per motion.
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub frames: Option<usize>,
    /// Rotation per frame in radians, for every body.
    #[arg(long)]
    pub rotation_rate: Option<f64>,
    #[arg(long)]
    pub translation_rate: Option<f64>,
    /// Image noise standard deviation in pixels.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Fraction of truncated trajectories.
    #[arg(long)]
    pub missing: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output path; stdout when absent.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProjectorArg {
    Pca,
    Spca,
}

/// `auto` or a positive number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scale {
    Auto,
    Value(f64),
}

impl FromStr for Scale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Scale::Auto);
        }
        match s.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(Scale::Value(v)),
            _ => Err(format!("expected `auto` or a positive number, got {s:?}")),
        }
    }
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// Trajectory file.
    pub input: PathBuf,
    /// Number of motions. Defaults to the label count stored in the file.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_enum, default_value = "spca")]
    pub projector: ProjectorArg,
    /// Projection dimension.
    #[arg(long, default_value_t = 5)]
    pub m: usize,
    /// Sparsity weight of every component.
    #[arg(long, default_value_t = 0.01)]
    pub gamma: f64,
    /// Size of the neighbour search area.
    #[arg(long, default_value_t = 20)]
    pub neighbors: usize,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value = "auto")]
    pub sigma: Scale,
    #[arg(long, default_value = "auto")]
    pub sigma_e: Scale,
    /// Add raw subspace errors to the affinity instead of their similarity.
    #[arg(long, conflicts_with = "sigma_e")]
    pub affinity_raw_error: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Where to write the JSON report.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Where to write the labels; stdout when absent.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

impl SegmentArgs {
    fn config(&self, n: usize) -> SegmentConfig {
        let mut c = SegmentConfig::new(n);
        c.projector = match self.projector {
            ProjectorArg::Pca => Projector::Pca,
            ProjectorArg::Spca => Projector::Spca,
        };
        c.m = self.m;
        c.gamma = self.gamma;
        c.neighbors.neighbors = self.neighbors;
        if let Some(l) = self.lambda {
            c.neighbors.lambda = l;
        }
        c.neighbors.sigma = match self.sigma {
            Scale::Auto => Sigma::Auto,
            Scale::Value(v) => Sigma::Fixed(v),
        };
        c.error_term = match (self.affinity_raw_error, self.sigma_e) {
            (true, _) => ErrorTerm::Raw,
            (false, Scale::Auto) => ErrorTerm::SimilarityAuto,
            (false, Scale::Value(v)) => ErrorTerm::Similarity(v),
        };
        c.seed = self.seed;
        c
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Pairs of `<truth trajectory file> <labels file>`.
    #[arg(required = true, num_args = 2.., value_names = ["TRUTH", "LABELS"])]
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub report: PathBuf,
    pub svg: PathBuf,
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::new(Exit::Parse, format!("cannot read {}: {e}", path.display())))
}

fn write_to(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<(), CliError> {
    let res = match path {
        Some(p) => std::fs::write(p, text).map_err(|e| (p.display().to_string(), e)),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| ("stdout".into(), e)),
    };
    res.map_err(|(p, e)| CliError::new(Exit::Io, format!("cannot write {p}: {e}")))
}

fn read_trajectories(path: &Path) -> Result<TrajectoryFile, CliError> {
    format::parse_trajectories(&read(path)?)
        .map_err(|e| CliError::new(Exit::Parse, format!("{}: {e}", path.display())))
}

pub fn generate(args: &GenerateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let file = match &args.config {
        Some(p) => SceneFile::parse(&read(p).map_err(|e| CliError::new(Exit::Config, e.message))?)?,
        None => SceneFile::default(),
    };
    let mut cfg: SceneConfig = file.resolve()?;
    if let Some(n) = args.motions {
        cfg.n_motions = n;
        let base = SceneConfig::uniform(
            n,
            cfg.points_per_motion.first().copied().unwrap_or(0),
            cfg.frames,
            cfg.seed,
        );
        cfg.points_per_motion = base.points_per_motion;
        cfg.rotation_rate = base.rotation_rate;
        cfg.translation_rate = base.translation_rate;
    }
    let n = cfg.n_motions;
    if let Some(p) = args.points {
        cfg.points_per_motion = vec![p; n];
    }
    if let Some(f) = args.frames {
        cfg.frames = f;
    }
    if let Some(r) = args.rotation_rate {
        cfg.rotation_rate = vec![r; n];
    }
    if let Some(t) = args.translation_rate {
        cfg.translation_rate = vec![t; n];
    }
    if let Some(s) = args.noise {
        cfg.noise_sigma = s;
    }
    if let Some(m) = args.missing {
        cfg.missing_rate = m;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    config::validate(&cfg)?;
    let scene = generate_scene(&cfg).map_err(|e| CliError::new(Exit::Config, e.to_string()))?;
    let text = format::write_trajectories(&TrajectoryFile {
        trajectories: scene.trajectories,
        truth: Some(scene.truth),
    });
    write_to(args.output.as_deref(), &text, out)
}

pub fn segment(
    args: &SegmentArgs,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let file = read_trajectories(&args.input)?;
    let n = match (args.n, &file.truth) {
        (Some(n), _) => n,
        (None, Some(t)) => t.n_clusters(),
        (None, None) => {
            return Err(CliError::new(
                Exit::Config,
                "invalid `n`: the input stores no labels, pass --n",
            ))
        }
    };
    let cfg = args.config(n);
    cfg.validate()
        .map_err(|e| CliError::new(Exit::Config, e.to_string()))?;

    let mut timer = TimingObserver::default();
    let seg = segment_observed(&file.trajectories, &cfg, &mut timer)
        .map_err(|e| CliError::new(Exit::Pipeline, format!("segmentation failed: {e}")))?;
    let report = Report::new(
        Some(args.input.display().to_string()),
        &file.trajectories,
        &cfg,
        &seg,
        &timer,
    );

    for w in &report.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    if !report.flagged_rows.is_empty() {
        let rows: Vec<String> = report.flagged_rows.iter().map(|r| r.to_string()).collect();
        let _ = writeln!(err, "flagged rows: {}", rows.join(" "));
    }
    if let Some(p) = &args.report {
        write_to(Some(p), &report.to_json(), out)?;
    }
    write_to(
        args.labels.as_deref(),
        &format::write_labels(&seg.labels),
        out,
    )
}

pub fn eval(args: &EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if !args.files.len().is_multiple_of(2) {
        return Err(CliError::new(
            Exit::Config,
            "eval takes pairs of <truth> <labels> files",
        ));
    }
    let mut scores: Vec<ScoreReport> = Vec::new();
    let mut groups = Vec::new();
    let mut text = String::new();
    for pair in args.files.chunks(2) {
        let truth = read_trajectories(&pair[0])?.truth.ok_or_else(|| {
            CliError::new(
                Exit::Parse,
                format!("{}: no ground-truth labels", pair[0].display()),
            )
        })?;
        let pred = format::parse_labels(&read(&pair[1])?)
            .map_err(|e| CliError::new(Exit::Parse, format!("{}: {e}", pair[1].display())))?;
        let score = misclassification(&pred, &truth)
            .map_err(|e| CliError::new(Exit::Parse, format!("{}: {e}", pair[1].display())))?;
        text.push_str(&format!(
            "{}: {:.2}% misclassified\n",
            pair[1].display(),
            100.0 * score.misclassification
        ));
        groups.push(format!("{} motions", truth.n_clusters()));
        scores.push(score);
    }
    let table =
        aggregate(&scores, &groups).map_err(|e| CliError::new(Exit::Parse, e.to_string()))?;
    text.push_str(&table.to_string());
    write_to(None, &text, out)
}

pub fn report(args: &ReportArgs) -> Result<(), CliError> {
    let text = read(&args.report)?;
    let report = Report::from_json(&text)
        .map_err(|e| CliError::new(Exit::Parse, format!("{}: {e}", args.report.display())))?;
    write_to(Some(&args.svg), &svg::render(&report), &mut std::io::sink())
}

/// Sizes the global worker pool from `SUBSEG_THREADS` when set.
pub fn configure_threads(value: Option<OsString>) -> Result<(), CliError> {
    let Some(v) = value else { return Ok(()) };
    let threads = v
        .to_str()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
        .ok_or_else(|| {
            CliError::new(
                Exit::Config,
                format!("invalid `{THREADS_VAR}`: expected a positive integer, got {v:?}"),
            )
        })?;
    // A pool built earlier in this process keeps its size.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();
    Ok(())
}

/// Runs one command and returns the process exit code.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result =
        configure_threads(std::env::var_os(THREADS_VAR)).and_then(|()| match &cli.command {
            Command::Generate(a) => generate(a, out),
            Command::Segment(a) => segment(a, out, err),
            Command::Eval(a) => eval(a, out),
            Command::Report(a) => report(a),
        });
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit as i32
        }
    }
}
