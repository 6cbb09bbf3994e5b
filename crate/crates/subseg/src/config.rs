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

//! TOML scene description for `subseg generate --config`.
//!
//! Every key is optional; missing keys take the library defaults. Per-body
//! keys accept either one value for all bodies or a list with one entry per
//! body. Unknown keys are rejected.
//!
//! ```toml
//! n_motions = 3
//! points_per_motion = [40, 50, 60]
//! frames = 30
//! rotation_rate = 0.15
//! noise_sigma = 0.5
//! missing_rate = 0.1
//! seed = 7
//! ```

use serde::Deserialize;
use subseg_core::SceneConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot parse scene config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid `{field}`: {reason}")]
    Field { field: String, reason: String },
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum PerBody<T> {
    All(T),
    Each(Vec<T>),
}

impl<T: Clone> PerBody<T> {
    fn expand(&self, n: usize, field: &str) -> Result<Vec<T>, ConfigError> {
        match self {
            PerBody::All(v) => Ok(vec![v.clone(); n]),
            PerBody::Each(v) if v.len() == n => Ok(v.clone()),
            PerBody::Each(v) => Err(ConfigError::Field {
                field: field.to_string(),
                reason: format!("{} entries for {n} motions", v.len()),
            }),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub n_motions: Option<usize>,
    pub points_per_motion: Option<PerBody<usize>>,
    pub frames: Option<usize>,
    pub rotation_rate: Option<PerBody<f64>>,
    pub translation_rate: Option<PerBody<f64>>,
    pub noise_sigma: Option<f64>,
    pub missing_rate: Option<f64>,
    pub seed: Option<u64>,
}

impl SceneFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Fills gaps from the defaults and validates the result.
    pub fn resolve(&self) -> Result<SceneConfig, ConfigError> {
        let base = SceneConfig::default();
        let n = self.n_motions.unwrap_or(base.n_motions);
        let mut cfg = SceneConfig::uniform(
            n,
            base.points_per_motion[0],
            self.frames.unwrap_or(base.frames),
            0,
        );
        if let Some(p) = &self.points_per_motion {
            cfg.points_per_motion = p.expand(n, "points_per_motion")?;
        }
        if let Some(r) = &self.rotation_rate {
            cfg.rotation_rate = r.expand(n, "rotation_rate")?;
        }
        if let Some(t) = &self.translation_rate {
            cfg.translation_rate = t.expand(n, "translation_rate")?;
        }
        cfg.noise_sigma = self.noise_sigma.unwrap_or(base.noise_sigma);
        cfg.missing_rate = self.missing_rate.unwrap_or(base.missing_rate);
        cfg.seed = self.seed.unwrap_or(base.seed);
        validate(&cfg)?;
        Ok(cfg)
    }
}

/// Runs the library validation and reports the offending field by name.
pub fn validate(cfg: &SceneConfig) -> Result<(), ConfigError> {
    cfg.validate().map_err(|e| match e {
        subseg_core::Error::InvalidConfig { field, reason } => ConfigError::Field {
            field: field.to_string(),
            reason,
        },
        other => ConfigError::Field {
            field: "scene".into(),
            reason: other.to_string(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(
            SceneFile::parse("").unwrap().resolve().unwrap(),
            SceneConfig::default()
        );
    }

    #[test]
    fn per_body_lists() {
        let f = SceneFile::parse(
            "n_motions = 3\npoints_per_motion = [5, 6, 7]\nrotation_rate = 0.2\nseed = 4",
        )
        .unwrap();
        let cfg = f.resolve().unwrap();
        assert_eq!(cfg.points_per_motion, vec![5, 6, 7]);
        assert_eq!(cfg.rotation_rate, vec![0.2; 3]);
        assert_eq!(cfg.seed, 4);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(matches!(
            SceneFile::parse("colour = 1"),
            Err(ConfigError::Toml(_))
        ));
        let err = SceneFile::parse("n_motions = 0")
            .unwrap()
            .resolve()
            .unwrap_err();
        assert!(err.to_string().contains("n_motions"), "{err}");
        let err = SceneFile::parse("n_motions = 2\npoints_per_motion = [4]")
            .unwrap()
            .resolve()
            .unwrap_err();
        assert!(err.to_string().contains("points_per_motion"));
    }
}
