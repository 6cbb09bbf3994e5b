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

//! SVG scatter of first-frame feature positions, coloured by cluster.

use std::fmt::Write as _;

use crate::report::Report;

/// Categorical palette. Clusters past the tenth reuse it with a dashed
/// outline so they stay distinguishable.
pub const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 24.0;
const LEGEND: f64 = 150.0;
const RADIUS: f64 = 3.0;

pub fn colour(cluster: usize) -> &'static str {
    PALETTE[cluster % PALETTE.len()]
}

/// Renders the plot. Points unobserved in the first frame are skipped and
/// counted in a note under the legend.
pub fn render(report: &Report) -> String {
    let observed: Vec<(usize, [f64; 2])> = report
        .labels
        .iter()
        .zip(&report.first_frame)
        .filter_map(|(&l, p)| p.map(|p| (l, p)))
        .collect();
    let hidden = report.labels.len() - observed.len();

    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for (_, [x, y]) in &observed {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if observed.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let plot_w = WIDTH - LEGEND - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    // One scale on both axes keeps the image aspect ratio.
    let span = (x1 - x0).max(y1 - y0).max(f64::EPSILON);
    let scale = plot_w.min(plot_h) / span;
    // Image y grows downward, as in SVG.
    let sx = |x: f64| MARGIN + (x - x0) * scale;
    let sy = |y: f64| MARGIN + (y - y0) * scale;

    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(out, r#"<g id="points">"#).unwrap();
    for (l, [x, y]) in &observed {
        let dash = if *l >= PALETTE.len() {
            r#" stroke="black" stroke-dasharray="1,1""#
        } else {
            ""
        };
        writeln!(
            out,
            r#"<circle class="c{l}" cx="{:.2}" cy="{:.2}" r="{RADIUS}" fill="{}"{dash}/>"#,
            sx(*x),
            sy(*y),
            colour(*l)
        )
        .unwrap();
    }
    writeln!(out, "</g>").unwrap();

    writeln!(
        out,
        r#"<g id="legend" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    let lx = WIDTH - LEGEND;
    for (k, size) in report.cluster_sizes.iter().enumerate() {
        let y = MARGIN + 18.0 * k as f64;
        writeln!(
            out,
            r#"<rect x="{lx}" y="{:.1}" width="10" height="10" fill="{}"/><text x="{}" y="{:.1}">cluster {k}: {size}</text>"#,
            y,
            colour(k),
            lx + 16.0,
            y + 9.5
        )
        .unwrap();
    }
    if hidden > 0 {
        let y = MARGIN + 18.0 * report.cluster_sizes.len() as f64 + 9.5;
        writeln!(
            out,
            r#"<text x="{lx}" y="{y:.1}">{hidden} not in frame 0</text>"#
        )
        .unwrap();
    }
    writeln!(out, "</g>").unwrap();
    out.push_str("</svg>\n");
    out
}
