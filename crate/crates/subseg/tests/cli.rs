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

//! End-to-end runs of the `subseg` binary.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use proptest::prelude::*;
use subseg::format::{parse_labels, parse_trajectories, write_trajectories};
use subseg::report::Report;
use subseg::svg::PALETTE;
use tempfile::TempDir;

fn subseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subseg"))
        .args(args)
        .env_remove("SUBSEG_THREADS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generate(dir: &TempDir, name: &str, extra: &[&str]) -> PathBuf {
    let out = path(dir, name);
    let mut args = vec!["generate", "-o", s(&out)];
    args.extend_from_slice(extra);
    let o = subseg(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    out
}

#[test]
fn default_scene_round_trips() {
    let dir = TempDir::new().unwrap();
    let f = generate(&dir, "scene.txt", &[]);
    let text = std::fs::read_to_string(&f).unwrap();
    let parsed = parse_trajectories(&text).unwrap();
    let again = write_trajectories(&parsed);
    assert_eq!(again, text);
    assert_eq!(parse_trajectories(&again).unwrap(), parsed);
}

#[test]
fn missing_data_header_and_mask_agree() {
    let dir = TempDir::new().unwrap();
    let f = generate(
        &dir,
        "scene.txt",
        &["--missing", "0.3", "--points", "20", "--frames", "12"],
    );
    let file = parse_trajectories(&std::fs::read_to_string(f).unwrap()).unwrap();
    let w = &file.trajectories;
    assert_eq!((w.frames(), w.points()), (12, 40));
    let truncated = (0..w.points())
        .filter(|&p| (0..2 * w.frames()).any(|r| !w.mask()[(r, p)]))
        .count();
    assert_eq!(truncated, 12);
    for p in 0..w.points() {
        for r in 0..2 * w.frames() {
            if !w.mask()[(r, p)] {
                assert_eq!(w.data()[(r, p)], 0.0);
            }
        }
    }
}

#[test]
fn config_errors_exit_2_and_name_the_field() {
    let o = subseg(&["generate", "--motions", "0"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("n_motions"), "{}", stderr(&o));

    let dir = TempDir::new().unwrap();
    let cfg = path(&dir, "scene.toml");
    std::fs::write(&cfg, "n_motions = 2\nmissing_rate = 1.5\n").unwrap();
    let o = subseg(&["generate", "--config", s(&cfg)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("missing_rate"), "{}", stderr(&o));

    std::fs::write(&cfg, "motions = 2\n").unwrap();
    assert_eq!(code(&subseg(&["generate", "--config", s(&cfg)])), 2);
}

#[test]
fn toml_config_is_honoured() {
    let dir = TempDir::new().unwrap();
    let cfg = path(&dir, "scene.toml");
    std::fs::write(
        &cfg,
        "n_motions = 3\npoints_per_motion = [5, 6, 7]\nframes = 9\nseed = 11\n",
    )
    .unwrap();
    let out = path(&dir, "scene.txt");
    let o = subseg(&["generate", "--config", s(&cfg), "-o", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let file = parse_trajectories(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(file.trajectories.frames(), 9);
    assert_eq!(file.truth.unwrap().cluster_sizes(), vec![5, 6, 7]);
}

#[test]
fn segment_parse_and_pipeline_errors() {
    let dir = TempDir::new().unwrap();
    let bad = path(&dir, "bad.txt");
    std::fs::write(&bad, "2 3 0\n1 2\n").unwrap();
    let o = subseg(&["segment", s(&bad), "--n", "2"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
    assert_eq!(
        code(&subseg(&[
            "segment",
            s(&path(&dir, "absent.txt")),
            "--n",
            "2"
        ])),
        3
    );

    // More motions than points cannot be segmented.
    let f = generate(&dir, "tiny.txt", &["--points", "4", "--frames", "6"]);
    let o = subseg(&["segment", s(&f), "--n", "9"]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));

    let o = subseg(&["segment", s(&f), "--n", "0"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("`n`"));
}

#[test]
fn segment_is_deterministic_and_scores_perfectly() {
    let dir = TempDir::new().unwrap();
    let f = generate(&dir, "scene.txt", &["--seed", "3"]);
    let mut runs = Vec::new();
    for i in 0..2 {
        let labels = path(&dir, &format!("labels{i}.txt"));
        let report = path(&dir, &format!("report{i}.json"));
        let o = subseg(&[
            "segment",
            s(&f),
            "--seed",
            "5",
            "--labels",
            s(&labels),
            "--report",
            s(&report),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        runs.push((std::fs::read_to_string(&labels).unwrap(), report));
    }
    assert_eq!(runs[0].0, runs[1].0);
    assert_eq!(parse_labels(&runs[0].0).unwrap().len(), 120);

    let o = subseg(&["eval", s(&f), s(&path(&dir, "labels0.txt"))]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("0.00% misclassified"), "{text}");
    assert!(text.contains("2 motions, 1 sequences"), "{text}");

    let report = Report::from_json(&std::fs::read_to_string(&runs[0].1).unwrap()).unwrap();
    assert_eq!(report.timings.len(), 9);
    assert_eq!(report.labels, parse_labels(&runs[0].0).unwrap().labels());
}

#[test]
fn eval_groups_by_motion_count() {
    let dir = TempDir::new().unwrap();
    let two = generate(&dir, "two.txt", &["--points", "10", "--frames", "8"]);
    let three = generate(
        &dir,
        "three.txt",
        &["--motions", "3", "--points", "10", "--frames", "8"],
    );
    // Truth ids written back as predictions, with one point flipped in the
    // three-motion file.
    let truth3 = parse_trajectories(&std::fs::read_to_string(&three).unwrap())
        .unwrap()
        .truth
        .unwrap();
    let mut pred3: Vec<usize> = truth3.labels().to_vec();
    pred3[0] = (pred3[0] + 1) % 3;
    let p3 = path(&dir, "p3.txt");
    std::fs::write(
        &p3,
        pred3.iter().map(|l| format!("{l}\n")).collect::<String>(),
    )
    .unwrap();
    let truth2 = parse_trajectories(&std::fs::read_to_string(&two).unwrap())
        .unwrap()
        .truth
        .unwrap();
    let p2 = path(&dir, "p2.txt");
    std::fs::write(
        &p2,
        truth2
            .labels()
            .iter()
            .map(|l| format!("{}\n", 1 - l))
            .collect::<String>(),
    )
    .unwrap();

    let o = subseg(&["eval", s(&two), s(&p2), s(&three), s(&p3)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("2 motions, 1 sequences"), "{text}");
    assert!(text.contains("3 motions, 1 sequences"), "{text}");
    assert!(text.contains("All, 2 sequences"), "{text}");
    assert!(text.contains("3.33% misclassified"), "{text}");

    assert_eq!(code(&subseg(&["eval", s(&two), s(&p3)])), 3);
}

fn svg_counts(svg: &str) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for line in svg.lines().filter(|l| l.starts_with("<circle")) {
        let fill = line
            .split("fill=\"")
            .nth(1)
            .unwrap()
            .split('"')
            .next()
            .unwrap();
        *counts.entry(fill.to_string()).or_insert(0) += 1;
    }
    counts
}

fn segment_and_plot(dir: &TempDir, scene: &Path, n: &str) -> (Report, String) {
    let report = path(dir, "report.json");
    let o = subseg(&[
        "segment",
        s(scene),
        "--n",
        n,
        "--report",
        s(&report),
        "--labels",
        s(&path(dir, "l.txt")),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let svg = path(dir, "plot.svg");
    let o = subseg(&["report", s(&report), s(&svg)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = Report::from_json(&std::fs::read_to_string(report).unwrap()).unwrap();
    (r, std::fs::read_to_string(svg).unwrap())
}

#[test]
fn two_motion_plot_has_two_colours_with_matching_counts() {
    let dir = TempDir::new().unwrap();
    let f = generate(&dir, "scene.txt", &["--points", "30", "--frames", "20"]);
    let (report, svg) = segment_and_plot(&dir, &f, "2");
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    let counts = svg_counts(&svg);
    assert_eq!(counts.len(), 2);
    for (k, &size) in report.cluster_sizes.iter().enumerate() {
        assert_eq!(counts[PALETTE[k]], size);
        assert!(svg.contains(&format!("cluster {k}: {size}")));
    }
}

#[test]
fn single_cluster_plot_is_single_colour() {
    let dir = TempDir::new().unwrap();
    let f = generate(
        &dir,
        "scene.txt",
        &["--motions", "1", "--points", "25", "--frames", "10"],
    );
    let (_, svg) = segment_and_plot(&dir, &f, "1");
    let counts = svg_counts(&svg);
    assert_eq!(counts.len(), 1);
    assert_eq!(counts[PALETTE[0]], 25);
}

#[test]
fn malformed_or_empty_report_exits_3() {
    let dir = TempDir::new().unwrap();
    let r = path(&dir, "r.json");
    let svg = path(&dir, "p.svg");
    for body in ["", "{", "{\"format\": \"subseg-report/1\"}"] {
        std::fs::write(&r, body).unwrap();
        assert_eq!(code(&subseg(&["report", s(&r), s(&svg)])), 3, "{body:?}");
    }
    assert!(!svg.exists());
}

#[test]
fn thread_variable_is_validated() {
    let dir = TempDir::new().unwrap();
    let f = path(&dir, "scene.txt");
    let run = |v: &str| {
        Command::new(env!("CARGO_BIN_EXE_subseg"))
            .args(["generate", "-o", s(&f), "--points", "8", "--frames", "6"])
            .env("SUBSEG_THREADS", v)
            .output()
            .unwrap()
    };
    assert_eq!(code(&run("2")), 0);
    let o = run("many");
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("SUBSEG_THREADS"));
}

#[test]
fn thread_count_does_not_change_labels() {
    let dir = TempDir::new().unwrap();
    let f = generate(
        &dir,
        "scene.txt",
        &[
            "--points", "30", "--frames", "15", "--noise", "0.5", "--seed", "8",
        ],
    );
    let labels: Vec<String> = ["1", "4"]
        .iter()
        .map(|t| {
            let o = Command::new(env!("CARGO_BIN_EXE_subseg"))
                .args(["segment", s(&f), "--seed", "2"])
                .env("SUBSEG_THREADS", t)
                .output()
                .unwrap();
            assert_eq!(code(&o), 0, "{}", stderr(&o));
            String::from_utf8(o.stdout).unwrap()
        })
        .collect();
    assert_eq!(labels[0], labels[1]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn text_format_is_a_fixed_point(
        frames in 1usize..6,
        points in 1usize..7,
        values in proptest::collection::vec(-1e6f64..1e6, 84),
        bits in proptest::collection::vec(any::<bool>(), 84),
        labelled in any::<bool>(),
    ) {
        let mut text = format!("{frames} {points} {}\n", if labelled { 1 } else { 0 });
        for r in 0..2 * frames {
            let row: Vec<String> = (0..points).map(|c| values[(r * points + c) % 84].to_string()).collect();
            text.push_str(&row.join(" "));
            text.push('\n');
        }
        for r in 0..2 * frames {
            let row: Vec<&str> = (0..points).map(|c| if bits[(r * points + c) % 84] { "1" } else { "0" }).collect();
            text.push_str(&row.join(" "));
            text.push('\n');
        }
        text.push_str(&if labelled { vec!["0"; points].join(" ") } else { "-".into() });
        text.push('\n');

        let first = parse_trajectories(&text).unwrap();
        let written = write_trajectories(&first);
        let second = parse_trajectories(&written).unwrap();
        prop_assert_eq!(&second, &first);
        prop_assert_eq!(write_trajectories(&second), written);
    }
}
