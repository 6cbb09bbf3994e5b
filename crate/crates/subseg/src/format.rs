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

//! Plain-text trajectory and label files.
//!
//! A trajectory file is laid out as
//!
//! ```text
//! F P n
//! <2F lines of P coordinates>
//! <2F lines of P mask bits, 0 or 1>
//! <one line of P labels, or a single "-">
//! ```
//!
//! `n` is the number of motions and is 0 when no labels are stored. Rows
//! `2f` and `2f + 1` hold the x and y coordinates of frame `f`. Blank lines
//! and lines starting with `#` are ignored. Coordinates are written in the
//! shortest form that parses back to the same `f64`.
//!
//! A labels file holds one cluster id per line.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use subseg_core::{Labeling, TrajectoryMatrix};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FormatError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("unexpected end of input: {0}")]
    Truncated(String),
    #[error("invalid contents: {0}")]
    Invalid(String),
}

/// Trajectories with optional ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryFile {
    pub trajectories: TrajectoryMatrix,
    pub truth: Option<Labeling>,
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate(),
        }
    }

    /// Next meaningful line and its 1-based number.
    fn next(&mut self, what: &str) -> Result<(usize, &'a str), FormatError> {
        for (i, line) in self.inner.by_ref() {
            let t = line.trim();
            if !t.is_empty() && !t.starts_with('#') {
                return Ok((i + 1, t));
            }
        }
        Err(FormatError::Truncated(format!("expected {what}")))
    }

    fn rest(&mut self) -> Option<usize> {
        self.inner
            .by_ref()
            .find(|(_, l)| {
                let t = l.trim();
                !t.is_empty() && !t.starts_with('#')
            })
            .map(|(i, _)| i + 1)
    }
}

fn fields<T: std::str::FromStr>(
    line: usize,
    text: &str,
    expect: usize,
    what: &str,
) -> Result<Vec<T>, FormatError> {
    let out: Vec<T> = text
        .split_whitespace()
        .map(|tok| {
            tok.parse().map_err(|_| FormatError::Syntax {
                line,
                reason: format!("cannot read {what} from {tok:?}"),
            })
        })
        .collect::<Result<_, _>>()?;
    if out.len() != expect {
        return Err(FormatError::Syntax {
            line,
            reason: format!("expected {expect} {what} values, found {}", out.len()),
        });
    }
    Ok(out)
}

pub fn parse_trajectories(text: &str) -> Result<TrajectoryFile, FormatError> {
    let mut lines = Lines::new(text);
    let (ln, header) = lines.next("header `F P n`")?;
    let h: Vec<usize> = fields(ln, header, 3, "header")?;
    let (frames, points, n) = (h[0], h[1], h[2]);
    if frames == 0 || points == 0 {
        return Err(FormatError::Syntax {
            line: ln,
            reason: "F and P must be positive".into(),
        });
    }
    let rows = 2 * frames;

    let mut data = DMatrix::zeros(rows, points);
    for r in 0..rows {
        let (ln, text) = lines.next("coordinate row")?;
        let vals: Vec<f64> = fields(ln, text, points, "coordinate")?;
        if let Some(bad) = vals.iter().find(|v| !v.is_finite()) {
            return Err(FormatError::Syntax {
                line: ln,
                reason: format!("non-finite coordinate {bad}"),
            });
        }
        for (c, v) in vals.into_iter().enumerate() {
            data[(r, c)] = v;
        }
    }

    let mut mask = DMatrix::from_element(rows, points, true);
    for r in 0..rows {
        let (ln, text) = lines.next("mask row")?;
        let bits: Vec<u8> = fields(ln, text, points, "mask")?;
        for (c, b) in bits.into_iter().enumerate() {
            mask[(r, c)] = match b {
                0 => false,
                1 => true,
                _ => {
                    return Err(FormatError::Syntax {
                        line: ln,
                        reason: format!("mask bits must be 0 or 1, found {b}"),
                    })
                }
            };
        }
    }
    for (v, &m) in data.iter_mut().zip(mask.iter()) {
        if !m {
            *v = 0.0;
        }
    }

    let (ln, text) = lines.next("labels line or `-`")?;
    let truth = if text == "-" {
        if n != 0 {
            return Err(FormatError::Syntax {
                line: ln,
                reason: format!("header declares {n} motions but no labels follow"),
            });
        }
        None
    } else {
        let labels: Vec<usize> = fields(ln, text, points, "label")?;
        let labeling = Labeling::new(labels, n).map_err(|e| FormatError::Syntax {
            line: ln,
            reason: e.to_string(),
        })?;
        Some(labeling)
    };
    if let Some(extra) = lines.rest() {
        return Err(FormatError::Syntax {
            line: extra,
            reason: "trailing content after labels".into(),
        });
    }

    let trajectories =
        TrajectoryMatrix::with_mask(data, mask).map_err(|e| FormatError::Invalid(e.to_string()))?;
    Ok(TrajectoryFile {
        trajectories,
        truth,
    })
}

pub fn write_trajectories(file: &TrajectoryFile) -> String {
    let w = &file.trajectories;
    let n = file.truth.as_ref().map_or(0, |l| l.n_clusters());
    let mut out = String::new();
    writeln!(out, "{} {} {}", w.frames(), w.points(), n).unwrap();
    for row in w.data().row_iter() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    for row in w.mask().row_iter() {
        let line: Vec<&str> = row.iter().map(|&b| if b { "1" } else { "0" }).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    match &file.truth {
        Some(l) => {
            let line: Vec<String> = l.labels().iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(" "));
        }
        None => out.push('-'),
    }
    out.push('\n');
    out
}

pub fn parse_labels(text: &str) -> Result<Labeling, FormatError> {
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let v: usize = t.parse().map_err(|_| FormatError::Syntax {
            line: i + 1,
            reason: format!("cannot read label from {t:?}"),
        })?;
        labels.push(v);
    }
    if labels.is_empty() {
        return Err(FormatError::Truncated("labels file holds no labels".into()));
    }
    Ok(Labeling::from_labels(labels))
}

pub fn write_labels(labels: &Labeling) -> String {
    let mut out = String::with_capacity(3 * labels.len());
    for l in labels.labels() {
        writeln!(out, "{l}").unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "2 3 2\n1 2 3\n4 5 6\n7 8 0\n9 10 0\n1 1 1\n1 1 1\n1 1 0\n1 1 0\n0 1 1\n";

    #[test]
    fn reads_small_file() {
        let f = parse_trajectories(SMALL).unwrap();
        assert_eq!(f.trajectories.frames(), 2);
        assert_eq!(f.trajectories.points(), 3);
        assert!(!f.trajectories.mask()[(3, 2)]);
        assert_eq!(f.truth.unwrap().labels(), &[0, 1, 1]);
    }

    #[test]
    fn write_then_read() {
        let f = parse_trajectories(SMALL).unwrap();
        let text = write_trajectories(&f);
        assert_eq!(text, SMALL);
        assert_eq!(parse_trajectories(&text).unwrap(), f);
    }

    #[test]
    fn missing_labels_marker() {
        let text = SMALL.replace("2 3 2", "2 3 0").replace("0 1 1\n", "-\n");
        assert!(parse_trajectories(&text).unwrap().truth.is_none());
    }

    #[test]
    fn errors_name_the_line() {
        let bad = SMALL.replace("4 5 6", "4 x 6");
        assert!(matches!(
            parse_trajectories(&bad),
            Err(FormatError::Syntax { line: 3, .. })
        ));
        let short = SMALL.replace("1 2 3", "1 2");
        assert!(matches!(
            parse_trajectories(&short),
            Err(FormatError::Syntax { line: 2, .. })
        ));
        assert!(matches!(
            parse_trajectories("2 3 2\n1 2 3\n"),
            Err(FormatError::Truncated(_))
        ));
        let label = SMALL.replace("0 1 1", "0 1 5");
        assert!(parse_trajectories(&label).is_err());
        let extra = format!("{SMALL}1 2 3\n");
        assert!(parse_trajectories(&extra).is_err());
    }

    #[test]
    fn labels_file() {
        let l = parse_labels("0\n1\n\n1\n").unwrap();
        assert_eq!(l.labels(), &[0, 1, 1]);
        assert_eq!(write_labels(&l), "0\n1\n1\n");
        assert!(parse_labels("").is_err());
        assert!(parse_labels("0\n-1\n").is_err());
    }
}
