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

//! Misclassification rate under the best label bijection, and per-group
//! summaries in the layout of the usual benchmark tables.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::linalg::median;
use crate::synthcam::Labeling;
use crate::{Error, Result};

/// Largest label count accepted by the exhaustive bijection search.
pub const MAX_LABELS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    /// Fraction of points in disagreement under the best bijection.
    pub misclassification: f64,
    /// `best_permutation[predicted] = true` id. Ids beyond the other
    /// labeling's range map to unused slots.
    pub best_permutation: Vec<usize>,
    /// `confusion[predicted][true]` counts over a square `k x k` table with
    /// `k = max(pred.n, truth.n)`.
    pub confusion: Vec<Vec<usize>>,
}

/// Exhaustive search over all bijections of `k` labels, keeping the one with
/// the largest matched count.
fn best_bijection(confusion: &[Vec<usize>]) -> (Vec<usize>, usize) {
    fn walk(
        row: usize,
        confusion: &[Vec<usize>],
        used: &mut [bool],
        current: &mut Vec<usize>,
        score: usize,
        best: &mut (Vec<usize>, usize),
    ) {
        let k = confusion.len();
        if row == k {
            if score > best.1 || best.0.is_empty() {
                *best = (current.clone(), score);
            }
            return;
        }
        for col in 0..k {
            if !used[col] {
                used[col] = true;
                current.push(col);
                walk(
                    row + 1,
                    confusion,
                    used,
                    current,
                    score + confusion[row][col],
                    best,
                );
                current.pop();
                used[col] = false;
            }
        }
    }
    let k = confusion.len();
    let mut best = (Vec::new(), 0);
    walk(
        0,
        confusion,
        &mut vec![false; k],
        &mut Vec::with_capacity(k),
        0,
        &mut best,
    );
    best
}

pub fn misclassification(pred: &Labeling, truth: &Labeling) -> Result<ScoreReport> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    let k = pred.n_clusters().max(truth.n_clusters()).max(1);
    if k > MAX_LABELS {
        return Err(Error::config(
            "n",
            alloc::format!("at most {MAX_LABELS} labels are supported"),
        ));
    }
    let mut confusion = vec![vec![0usize; k]; k];
    for (&p, &t) in pred.labels().iter().zip(truth.labels()) {
        confusion[p][t] += 1;
    }
    let (perm, matched) = best_bijection(&confusion);
    let total = pred.len();
    let misclassification = if total == 0 {
        0.0
    } else {
        1.0 - matched as f64 / total as f64
    };
    Ok(ScoreReport {
        misclassification,
        best_permutation: perm,
        confusion,
    })
}

/// Mean and median misclassification (in percent) of one group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSummary {
    pub group: String,
    pub count: usize,
    pub mean_percent: f64,
    pub median_percent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    /// Groups in first-appearance order, followed by an overall row.
    pub rows: Vec<GroupSummary>,
}

fn summarize(group: String, values: &[f64]) -> GroupSummary {
    let mut pct: Vec<f64> = values.iter().map(|v| 100.0 * v).collect();
    let mean = pct.iter().sum::<f64>() / pct.len() as f64;
    let med = median(&mut pct).unwrap_or(0.0);
    GroupSummary {
        group,
        count: values.len(),
        mean_percent: mean,
        median_percent: med,
    }
}

/// Groups reports by key and appends an overall row labelled `All`.
pub fn aggregate<K: AsRef<str>>(reports: &[ScoreReport], group_keys: &[K]) -> Result<SummaryTable> {
    if reports.is_empty() {
        return Err(Error::config("reports", "need at least one report"));
    }
    if reports.len() != group_keys.len() {
        return Err(Error::LengthMismatch {
            left: reports.len(),
            right: group_keys.len(),
        });
    }
    let mut groups: Vec<(String, Vec<f64>)> = Vec::new();
    for (r, key) in reports.iter().zip(group_keys) {
        let key = key.as_ref();
        match groups.iter_mut().find(|(g, _)| g == key) {
            Some((_, v)) => v.push(r.misclassification),
            None => groups.push((String::from(key), vec![r.misclassification])),
        }
    }
    let all: Vec<f64> = reports.iter().map(|r| r.misclassification).collect();
    let mut rows: Vec<GroupSummary> = groups.into_iter().map(|(g, v)| summarize(g, &v)).collect();
    rows.push(summarize(String::from("All"), &all));
    Ok(SummaryTable { rows })
}

impl fmt::Display for SummaryTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in &self.rows {
            writeln!(f, "{}, {} sequences", row.group, row.count)?;
            writeln!(f, "  mean   {:.2}", row.mean_percent)?;
            writeln!(f, "  median {:.2}", row.median_percent)?;
        }
        Ok(())
    }
}
