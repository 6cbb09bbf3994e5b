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

//! Synthetic multi-body rigid-motion scenes under the affine camera.
//!
//! A point `X` of body `k` is imaged at frame `f` as the first two rows of
//! `R_f X + T_f` (orthographic projection, no perspective division). Stacking
//! the image coordinates of all frames column-wise yields the `2F x P`
//! trajectory matrix `W = M S^T`, whose per-body blocks have rank at most 4.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, Matrix3, Rotation3, Unit, Vector3};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::{Error, Result};

/// Half width of the cube object centres are drawn from.
const CENTER_SPREAD: f64 = 100.0;
/// Half width of the cube around the centre that body points are drawn from.
const BODY_EXTENT: f64 = 50.0;
/// How far the rotation axis and translation direction wander per frame.
const DIRECTION_DRIFT: f64 = 0.3;

/// Per-frame rigid poses `(R_f, T_f)` of one body.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionTrack {
    rotations: Vec<Matrix3<f64>>,
    translations: Vec<Vector3<f64>>,
}

impl MotionTrack {
    pub fn new(rotations: Vec<Matrix3<f64>>, translations: Vec<Vector3<f64>>) -> Result<Self> {
        if rotations.len() != translations.len() {
            return Err(Error::FrameMismatch {
                expected: rotations.len(),
                found: translations.len(),
            });
        }
        Ok(Self {
            rotations,
            translations,
        })
    }

    pub fn frames(&self) -> usize {
        self.rotations.len()
    }

    pub fn rotations(&self) -> &[Matrix3<f64>] {
        &self.rotations
    }

    pub fn translations(&self) -> &[Vector3<f64>] {
        &self.translations
    }
}

/// World coordinates of the points attached to one body.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud3D {
    points: Vec<Vector3<f64>>,
}

impl PointCloud3D {
    /// At least four finite points are required so a body's trajectory block
    /// can reach its full rank of 4.
    pub fn new(points: Vec<Vector3<f64>>) -> Result<Self> {
        if points.len() < 4 {
            return Err(Error::config(
                "points_per_motion",
                "each body needs at least 4 points",
            ));
        }
        if points.iter().any(|p| !p.iter().all(|x| x.is_finite())) {
            return Err(Error::config("points", "point coordinates must be finite"));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Stacked image coordinates: rows `2f` and `2f + 1` hold the x and y
/// coordinates of every trajectory at frame `f`. Unobserved entries are zero
/// and cleared in `mask`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMatrix {
    data: DMatrix<f64>,
    mask: DMatrix<bool>,
}

impl TrajectoryMatrix {
    /// Fully observed trajectories.
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        let mask = DMatrix::from_element(data.nrows(), data.ncols(), true);
        Self::with_mask(data, mask)
    }

    /// Masked entries must already hold zero.
    pub fn with_mask(data: DMatrix<f64>, mask: DMatrix<bool>) -> Result<Self> {
        if !data.nrows().is_multiple_of(2) || data.nrows() == 0 {
            return Err(Error::ShapeMismatch(alloc::format!(
                "trajectory matrix needs an even, nonzero row count, got {}",
                data.nrows()
            )));
        }
        if mask.shape() != data.shape() {
            return Err(Error::ShapeMismatch(alloc::format!(
                "mask is {:?} but data is {:?}",
                mask.shape(),
                data.shape()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::config("data", "trajectory entries must be finite"));
        }
        if data.iter().zip(mask.iter()).any(|(&x, &m)| !m && x != 0.0) {
            return Err(Error::config("mask", "unobserved entries must be zero"));
        }
        Ok(Self { data, mask })
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn mask(&self) -> &DMatrix<bool> {
        &self.mask
    }

    pub fn frames(&self) -> usize {
        self.data.nrows() / 2
    }

    pub fn points(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_complete(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    /// Image position of trajectory `p` at frame `f`, if observed.
    pub fn position(&self, f: usize, p: usize) -> Option<(f64, f64)> {
        if self.mask[(2 * f, p)] && self.mask[(2 * f + 1, p)] {
            Some((self.data[(2 * f, p)], self.data[(2 * f + 1, p)]))
        } else {
            None
        }
    }

    /// Reorders trajectories so that new column `k` is old column `order[k]`.
    pub fn select_columns(&self, order: &[usize]) -> Self {
        let data = self.data.select_columns(order.iter());
        let mask = self.mask.select_columns(order.iter());
        Self { data, mask }
    }
}

/// Cluster assignment of every trajectory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labeling {
    labels: Vec<usize>,
    n: usize,
}

impl Labeling {
    pub fn new(labels: Vec<usize>, n: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= n) {
            return Err(Error::LabelOutOfRange { label: bad, n });
        }
        Ok(Self { labels, n })
    }

    /// Uses `max(label) + 1` clusters.
    pub fn from_labels(labels: Vec<usize>) -> Self {
        let n = labels.iter().copied().max().map_or(0, |m| m + 1);
        Self { labels, n }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_clusters(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn select(&self, order: &[usize]) -> Self {
        Self {
            labels: order.iter().map(|&i| self.labels[i]).collect(),
            n: self.n,
        }
    }
}

/// Parameters of a generated scene. Rates are given per body.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub n_motions: usize,
    pub points_per_motion: Vec<usize>,
    pub frames: usize,
    /// Radians per frame.
    pub rotation_rate: Vec<f64>,
    /// World units per frame.
    pub translation_rate: Vec<f64>,
    /// Standard deviation of image noise.
    pub noise_sigma: f64,
    /// Fraction of trajectories that lose a trailing run of frames.
    pub missing_rate: f64,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self::uniform(2, 60, 30, 0)
    }
}

impl SceneConfig {
    /// Default rotation per frame. Slower bodies that all start at the identity
    /// pose share nearly two dimensions of their motion subspaces.
    pub const DEFAULT_ROTATION_RATE: f64 = 0.15;
    pub const DEFAULT_TRANSLATION_RATE: f64 = 2.0;

    /// `n_motions` bodies with equal point counts and the default rates.
    pub fn uniform(n_motions: usize, points: usize, frames: usize, seed: u64) -> Self {
        Self {
            n_motions,
            points_per_motion: vec![points; n_motions],
            frames,
            rotation_rate: vec![Self::DEFAULT_ROTATION_RATE; n_motions],
            translation_rate: vec![Self::DEFAULT_TRANSLATION_RATE; n_motions],
            noise_sigma: 0.0,
            missing_rate: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_motions == 0 {
            return Err(Error::config("n_motions", "must be at least 1"));
        }
        if self.frames < 3 {
            return Err(Error::config("frames", "must be at least 3"));
        }
        for (field, len) in [
            ("points_per_motion", self.points_per_motion.len()),
            ("rotation_rate", self.rotation_rate.len()),
            ("translation_rate", self.translation_rate.len()),
        ] {
            if len != self.n_motions {
                return Err(Error::config(
                    field,
                    alloc::format!("expected {} entries, got {len}", self.n_motions),
                ));
            }
        }
        if self.points_per_motion.iter().any(|&p| p < 4) {
            return Err(Error::config(
                "points_per_motion",
                "each body needs at least 4 points",
            ));
        }
        for (field, rates) in [
            ("rotation_rate", &self.rotation_rate),
            ("translation_rate", &self.translation_rate),
        ] {
            if rates.iter().any(|r| !r.is_finite() || *r < 0.0) {
                return Err(Error::config(field, "rates must be finite and nonnegative"));
            }
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::config(
                "noise_sigma",
                "must be finite and nonnegative",
            ));
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return Err(Error::config("missing_rate", "must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn total_points(&self) -> usize {
        self.points_per_motion.iter().sum()
    }
}

/// A generated scene with its ground truth.
#[derive(Debug, Clone)]
pub struct Scene {
    pub trajectories: TrajectoryMatrix,
    pub truth: Labeling,
    pub tracks: Vec<MotionTrack>,
    pub clouds: Vec<PointCloud3D>,
}

fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v: Vector3<f64> = Vector3::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        let n = v.norm();
        if n > 1e-6 {
            return v / n;
        }
    }
}

fn drift<R: Rng + ?Sized>(dir: &Vector3<f64>, rng: &mut R) -> Vector3<f64> {
    let g: Vector3<f64> = Vector3::new(
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
    );
    let v = dir + DIRECTION_DRIFT * g;
    let n = v.norm();
    if n > 1e-9 {
        v / n
    } else {
        *dir
    }
}

/// Body trajectory starting at the identity pose.
///
/// Each frame composes an axis-angle step of magnitude `rotation_rate` onto
/// the previous rotation and adds a translation step of length
/// `translation_rate`. Axis and translation direction wander slowly so
/// different bodies yield independent motion subspaces.
pub fn make_motion_track(
    seed: u64,
    frames: usize,
    rotation_rate: f64,
    translation_rate: f64,
) -> MotionTrack {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut axis = random_unit(&mut rng);
    let mut heading = random_unit(&mut rng);

    let mut rotations = Vec::with_capacity(frames);
    let mut translations = Vec::with_capacity(frames);
    let mut r = Matrix3::identity();
    let mut t = Vector3::zeros();
    for f in 0..frames {
        if f > 0 {
            axis = drift(&axis, &mut rng);
            heading = drift(&heading, &mut rng);
            let step = Rotation3::from_axis_angle(&Unit::new_unchecked(axis), rotation_rate);
            r = step.matrix() * r;
            t += translation_rate * heading;
        }
        rotations.push(r);
        translations.push(t);
    }
    MotionTrack {
        rotations,
        translations,
    }
}

/// `n_points` points scattered in a cube around a random body centre.
pub fn make_point_cloud(seed: u64, n_points: usize) -> Result<PointCloud3D> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center = Vector3::new(
        rng.random_range(-CENTER_SPREAD..CENTER_SPREAD),
        rng.random_range(-CENTER_SPREAD..CENTER_SPREAD),
        rng.random_range(-CENTER_SPREAD..CENTER_SPREAD),
    );
    let points = (0..n_points)
        .map(|_| {
            center
                + Vector3::new(
                    rng.random_range(-BODY_EXTENT..BODY_EXTENT),
                    rng.random_range(-BODY_EXTENT..BODY_EXTENT),
                    rng.random_range(-BODY_EXTENT..BODY_EXTENT),
                )
        })
        .collect();
    PointCloud3D::new(points)
}

/// Images every cloud through its body's track. Column block `k` holds the
/// trajectories of body `k` and is labelled `k`.
pub fn project_scene(
    motions: &[MotionTrack],
    clouds: &[PointCloud3D],
) -> Result<(TrajectoryMatrix, Labeling)> {
    if motions.len() != clouds.len() {
        return Err(Error::ShapeMismatch(alloc::format!(
            "{} motion tracks for {} point clouds",
            motions.len(),
            clouds.len()
        )));
    }
    if motions.is_empty() {
        return Err(Error::config("n_motions", "must be at least 1"));
    }
    let frames = motions[0].frames();
    if let Some(bad) = motions.iter().find(|m| m.frames() != frames) {
        return Err(Error::FrameMismatch {
            expected: frames,
            found: bad.frames(),
        });
    }
    let total: usize = clouds.iter().map(PointCloud3D::len).sum();
    let mut data = DMatrix::zeros(2 * frames, total);
    let mut labels = Vec::with_capacity(total);
    let mut col = 0;
    for (k, (track, cloud)) in motions.iter().zip(clouds).enumerate() {
        for x in cloud.points() {
            for f in 0..frames {
                let p = track.rotations[f] * x + track.translations[f];
                data[(2 * f, col)] = p.x;
                data[(2 * f + 1, col)] = p.y;
            }
            labels.push(k);
            col += 1;
        }
    }
    Ok((
        TrajectoryMatrix::new(data)?,
        Labeling::new(labels, motions.len())?,
    ))
}

/// Adds zero-mean Gaussian noise to observed entries and truncates
/// `ceil(missing_rate * P)` randomly chosen trajectories.
///
/// A truncated trajectory keeps at least its first half and loses a trailing
/// run of frames (as a feature lost to occlusion); lost entries are zeroed
/// and cleared in the mask.
pub fn corrupt(
    w: &TrajectoryMatrix,
    noise_sigma: f64,
    missing_rate: f64,
    seed: u64,
) -> TrajectoryMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = w.data.clone();
    let mut mask = w.mask.clone();
    let frames = w.frames();
    let p = w.points();

    if noise_sigma > 0.0 {
        let normal = Normal::new(0.0, noise_sigma).expect("noise sigma is finite");
        for (x, &m) in data.iter_mut().zip(w.mask.iter()) {
            if m {
                *x += normal.sample(&mut rng);
            }
        }
    }

    if missing_rate > 0.0 && frames >= 2 {
        let count = libm::ceil(missing_rate * p as f64) as usize;
        let count = count.min(p);
        let first_cut = frames.div_ceil(2).max(1);
        for col in index::sample(&mut rng, p, count) {
            let cut = rng.random_range(first_cut..frames);
            for row in 2 * cut..2 * frames {
                data[(row, col)] = 0.0;
                mask[(row, col)] = false;
            }
        }
    }

    TrajectoryMatrix { data, mask }
}

/// Builds, images and corrupts a full scene from `config`.
pub fn generate_scene(config: &SceneConfig) -> Result<Scene> {
    config.validate()?;
    let mut seeder = ChaCha8Rng::seed_from_u64(config.seed);
    let mut tracks = Vec::with_capacity(config.n_motions);
    let mut clouds = Vec::with_capacity(config.n_motions);
    for k in 0..config.n_motions {
        let track_seed = seeder.random::<u64>();
        let cloud_seed = seeder.random::<u64>();
        tracks.push(make_motion_track(
            track_seed,
            config.frames,
            config.rotation_rate[k],
            config.translation_rate[k],
        ));
        clouds.push(make_point_cloud(cloud_seed, config.points_per_motion[k])?);
    }
    let (clean, truth) = project_scene(&tracks, &clouds)?;
    let corrupt_seed = seeder.random::<u64>();
    let trajectories = corrupt(
        &clean,
        config.noise_sigma,
        config.missing_rate,
        corrupt_seed,
    );
    Ok(Scene {
        trajectories,
        truth,
        tracks,
        clouds,
    })
}
