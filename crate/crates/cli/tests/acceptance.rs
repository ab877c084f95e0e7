//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the verdict lines always reach the
//! console. Criterion 9 needs real models and datasets; point
//! `CXR_SEVERITY_ACCEPTANCE_CONFIG` at a pipeline config to enable it.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use cxr_severity::dataset::{assign_all, derive_training_labels, parse_metadata, GroupingMode, MetadataSchema, StageGroup};
use cxr_severity::eval::{box_stats, trend_check, GroupStats, PredicateId, PredicateStatus, TrendConfig};
use cxr_severity::imgproc::{
    adaptive_equalize, clahe, dice, equalize_hist, fill_holes, morph_close, ClaheParams, GrayImage, LungMask,
};
use cxr_severity::learn::{
    fit_logistic, fit_tree, leave_two_out_cv, penalized_gradient, penalized_log_likelihood, LogisticParams,
    MajorityFitter, SeverityModel, TreeFitter, TreeParams,
};
use cxr_testkit::oracles::{brute_cart, central_difference, majority_leave_two_out, quantile};
use cxr_testkit::rng;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn random_image(r: &mut impl Rng, max_side: usize) -> GrayImage {
    let (w, h) = (r.gen_range(1..=max_side), r.gen_range(1..=max_side));
    // a small random palette leaves most gray levels unused
    let palette: Vec<u8> = (0..r.gen_range(1..=64)).map(|_| r.gen()).collect();
    let pixels = (0..w * h).map(|_| *palette.choose(r).unwrap()).collect();
    GrayImage::new(w, h, pixels).unwrap()
}

/// Union of random rectangles and discs, so masks have holes and bays.
fn random_mask(r: &mut impl Rng) -> LungMask {
    let (w, h) = (r.gen_range(8..48), r.gen_range(8..48));
    let shapes: Vec<(i64, i64, i64, bool)> = (0..r.gen_range(1..6))
        .map(|_| (r.gen_range(0..w as i64), r.gen_range(0..h as i64), r.gen_range(1..10), r.gen()))
        .collect();
    let holes: Vec<(i64, i64)> = (0..r.gen_range(0..4))
        .map(|_| (r.gen_range(0..w as i64), r.gen_range(0..h as i64)))
        .collect();
    LungMask::from_fn(w, h, |x, y| {
        let (x, y) = (x as i64, y as i64);
        let inside = shapes.iter().any(|&(cx, cy, s, disc)| {
            if disc {
                (x - cx).pow(2) + (y - cy).pow(2) <= s * s
            } else {
                (x - cx).abs() <= s && (y - cy).abs() <= s / 2 + 1
            }
        });
        inside && !holes.iter().any(|&(hx, hy)| (x, y) == (hx, hy))
    })
    .unwrap()
}

fn imgproc_suite() -> Check {
    let start = Instant::now();
    let mut r = rng(1);
    let mut checks = 0;
    for _ in 0..200 {
        let img = random_image(&mut r, 40);
        let eq = equalize_hist(&img);
        let mut lut = [None::<u8>; 256];
        for (&a, &b) in img.pixels().iter().zip(eq.pixels()) {
            ensure!(lut[a as usize].is_none_or(|v| v == b), "equalization is not a pixel-value mapping");
            lut[a as usize] = Some(b);
        }
        let mapped: Vec<u8> = lut.iter().flatten().copied().collect();
        ensure!(mapped.windows(2).all(|w| w[0] <= w[1]), "equalization is not monotone");
        checks += 1;
    }
    for (w, h, v) in [(64, 64, 0), (37, 23, 123), (8, 8, 255), (100, 17, 77)] {
        let img = GrayImage::filled(w, h, v).unwrap();
        let out = clahe(&img, &ClaheParams::default()).unwrap();
        ensure!(
            out.pixels().iter().all(|&p| p == out.pixels()[0]),
            "CLAHE of a constant {w}x{h} image is not constant"
        );
        checks += 1;
    }
    for _ in 0..30 {
        let (rows, cols) = (r.gen_range(1..4), r.gen_range(1..4));
        let (w, h) = (cols * r.gen_range(4..20), rows * r.gen_range(4..20));
        let img = GrayImage::new(w, h, (0..w * h).map(|_| r.gen()).collect()).unwrap();
        let tile_pixels = w.div_ceil(cols) * h.div_ceil(rows);
        // a clip limit of at least the tile size never clips
        let params = ClaheParams {
            tile_grid: (rows, cols),
            clip_factor: 256.0 * tile_pixels as f64,
        };
        ensure!(
            clahe(&img, &params).unwrap() == adaptive_equalize(&img, (rows, cols)).unwrap(),
            "unclipped CLAHE differs from adaptive equalization ({w}x{h}, {rows}x{cols} tiles)"
        );
        checks += 1;
    }
    for _ in 0..200 {
        let m = random_mask(&mut r);
        let radius = r.gen_range(1..6);
        let closed = morph_close(&m, radius).unwrap();
        ensure!(m.is_subset_of(&closed), "closing with radius {radius} is not extensive");
        ensure!(morph_close(&closed, radius).unwrap() == closed, "closing with radius {radius} is not idempotent");
        let filled = fill_holes(&m);
        ensure!(m.is_subset_of(&filled), "hole filling removed pixels");
        ensure!(fill_holes(&filled) == filled, "hole filling is not idempotent");
        ensure!(dice(&m, &m).unwrap() == 1.0 || m.is_empty(), "dice(A, A) != 1");
        let complement = LungMask::from_fn(m.width(), m.height(), |x, y| !m.get(x, y)).unwrap();
        if !m.is_empty() && !complement.is_empty() {
            ensure!(dice(&m, &complement).unwrap() == 0.0, "dice of disjoint masks != 0");
        }
        checks += 1;
    }
    let a = LungMask::new(3, 2, vec![1, 1, 1, 1, 0, 0]).unwrap();
    let b = LungMask::new(3, 2, vec![1, 1, 0, 0, 0, 0]).unwrap();
    let d = dice(&a, &b).unwrap();
    ensure!((d - 0.6667).abs() <= 1e-4 && (d - 2.0 / 3.0).abs() <= 1e-9, "known pair dice {d}");
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!("{checks} randomized cases, known pair dice {d:.4}, {:.2}s", elapsed.as_secs_f64()))
}

fn random_problem(r: &mut impl Rng, n: usize, d: usize) -> (Array2<f64>, Vec<bool>) {
    let x = Array2::from_shape_fn((n, d), |_| r.gen_range(-2.0..2.0));
    let mut y: Vec<bool> = (0..n).map(|_| r.gen()).collect();
    y[0] = true;
    y[1] = false;
    (x, y)
}

fn numerical_suite() -> Check {
    let mut r = rng(2);
    let mut worst = 0.0f64;
    let instances = 40;
    for _ in 0..instances {
        let (n, d) = (r.gen_range(2..=50), r.gen_range(1..=10));
        let (x, y) = random_problem(&mut r, n, d);
        let lambda = r.gen_range(0.0..3.0);
        let at: Vec<f64> = (0..=d).map(|_| r.gen_range(-1.5..1.5)).collect();
        let (gw, gb) = penalized_gradient(x.view(), &y, &at[..d], at[d], lambda);
        let analytic: Vec<f64> = gw.into_iter().chain([gb]).collect();
        let numeric = central_difference(
            |p| penalized_log_likelihood(x.view(), &y, &p[..d], p[d], lambda),
            &at,
            1e-5,
        );
        let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
        let rel = norm(&diff) / norm(&analytic).max(1.0);
        ensure!(rel < 1e-6, "gradient relative error {rel:e} at n={n}, d={d}");
        worst = worst.max(rel);
    }
    let mut flip_worst = 0.0f64;
    for _ in 0..20 {
        let (n, d) = (r.gen_range(4..=50), r.gen_range(1..=10));
        let (x, y) = random_problem(&mut r, n, d);
        let flipped: Vec<bool> = y.iter().map(|v| !v).collect();
        let params = LogisticParams::default();
        let a = fit_logistic(x.view(), &y, &params).map_err(|e| e.to_string())?;
        let b = fit_logistic(x.view(), &flipped, &params).map_err(|e| e.to_string())?;
        for (wa, wb) in a.weights.iter().chain([&a.bias]).zip(b.weights.iter().chain([&b.bias])) {
            flip_worst = flip_worst.max((wa + wb).abs());
        }
    }
    ensure!(flip_worst <= 1e-6, "label flip changes |w| by {flip_worst:e}");
    let names: Vec<String> = (0..4).map(|i| format!("f{i}")).collect();
    let zeros = Array2::<f64>::zeros((10, 4));
    let y: Vec<bool> = (0..10).map(|i| i % 2 == 0).collect();
    let model = SeverityModel::fit(names, zeros.view(), &y, &LogisticParams::default()).map_err(|e| e.to_string())?;
    let s = model.score_row(&[0.0; 4]);
    ensure!((s - 0.5).abs() <= 1e-12, "zero features score {s}");
    Ok(format!(
        "{instances} gradient instances, worst relative error {worst:.1e}; flip deviation {flip_worst:.1e}; zero-feature score {s}"
    ))
}

fn tree_suite() -> Check {
    let mut r = rng(3);
    let mut compared = 0;
    let mut splits = 0;
    let cases = [(TreeParams::default(), 50), (TreeParams { max_depth: 3, min_leaf: 2 }, 50)];
    for (params, count) in cases {
        for case in 0..count {
            let n = r.gen_range(2 * params.min_leaf..=30);
            let d = r.gen_range(1..=3);
            // few distinct values: plenty of ties between rows
            let levels: usize = r.gen_range(2..8);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| r.gen_range(0..levels) as f64 * 0.37).collect())
                .collect();
            let noise = r.gen_range(0.0..0.5);
            let y: Vec<bool> = rows
                .iter()
                .map(|row| (row[0] > 0.37 * levels as f64 / 2.0) ^ r.gen_bool(noise))
                .collect();
            let x = Array2::from_shape_fn((n, d), |(i, j)| rows[i][j]);
            let tree = fit_tree(x.view(), &y, &params).map_err(|e| e.to_string())?;
            let oracle = brute_cart(&rows, &y, params.max_depth, params.min_leaf);
            let report = tree.report();
            ensure!(report.depth == oracle.depth(), "case {case}: depth {} vs oracle {}", report.depth, oracle.depth());
            ensure!(report.depth <= params.max_depth, "case {case}: depth {}", report.depth);
            ensure!(
                report.leaf_sizes.iter().all(|&s| s >= params.min_leaf),
                "case {case}: leaf sizes {:?}",
                report.leaf_sizes
            );
            // probe every grid point, including values between and beyond the data
            let probes: Vec<Vec<f64>> = (0..(2 * levels + 1).pow(d as u32))
                .map(|k| {
                    (0..d)
                        .map(|j| {
                            let step = (k / (2 * levels + 1).pow(j as u32)) % (2 * levels + 1);
                            (step as f64 - 1.0) * 0.185
                        })
                        .collect()
                })
                .collect();
            for p in rows.iter().chain(&probes) {
                let view = ndarray::ArrayView1::from(p.as_slice());
                ensure!(tree.predict_row(view) == oracle.predict(p), "case {case}: prediction differs at {p:?}");
            }
            compared += 1;
            splits += report.internal_nodes;
        }
    }
    Ok(format!("{compared} datasets match the exhaustive oracle ({splits} splits in total)"))
}

fn cv_suite() -> Check {
    let mut r = rng(4);
    let n = 22;
    let x = Array2::from_shape_fn((n, 3), |_| (r.gen_range(0..6) as f64) / 2.0);
    let y: Vec<bool> = (0..n).map(|i| (x[[i, 0]] + x[[i, 1]] > 2.5) ^ (i % 7 == 0)).collect();
    let fitter = TreeFitter(TreeParams::default());
    let base = leave_two_out_cv(x.view(), &y, &fitter).map_err(|e| e.to_string())?;
    ensure!(base.folds_total == 231 && base.folds_run == 231, "ran {} of {} folds", base.folds_run, base.folds_total);
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..5 {
        order.shuffle(&mut r);
        let xp = Array2::from_shape_fn((n, 3), |(i, j)| x[[order[i], j]]);
        let yp: Vec<bool> = order.iter().map(|&i| y[i]).collect();
        let res = leave_two_out_cv(xp.view(), &yp, &fitter).map_err(|e| e.to_string())?;
        ensure!(
            res.accuracy == base.accuracy && res.correct == base.correct,
            "permuted accuracy {} vs {}",
            res.accuracy,
            base.accuracy
        );
    }
    let n_pos = y.iter().filter(|&&v| v).count();
    let majority = leave_two_out_cv(x.view(), &y, &MajorityFitter).map_err(|e| e.to_string())?;
    let (correct, folds) = majority_leave_two_out(n_pos, n - n_pos);
    ensure!(
        (majority.correct, majority.folds_total) == (correct, folds),
        "majority baseline {}/{} vs oracle {correct}/{folds}",
        majority.correct,
        majority.folds_total
    );
    Ok(format!(
        "231 folds, accuracy {:.4} unchanged under 5 permutations, majority baseline matches closed form",
        base.accuracy
    ))
}

fn quantile_suite() -> Check {
    let mut r = rng(5);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let len = r.gen_range(1..80);
        let v: Vec<f64> = (0..len).map(|_| r.gen_range(-100.0..100.0)).collect();
        let s = box_stats(&v).map_err(|e| e.to_string())?;
        for (got, p) in [(s.min, 0.0), (s.q1, 0.25), (s.median, 0.5), (s.q3, 0.75), (s.max, 1.0)] {
            let err = (got - quantile(&v, p)).abs();
            ensure!(err <= 1e-12, "quantile {p} off by {err:e} (n={len})");
            worst = worst.max(err);
        }
        ensure!(s.whisker_low <= s.q1 && s.whisker_high >= s.q3, "whiskers inside the box");
    }
    let s = box_stats(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]).unwrap();
    ensure!(
        (s.q1, s.median, s.q3) == (2.75, 4.5, 6.25),
        "[1..8] gave {} {} {}",
        s.q1,
        s.median,
        s.q3
    );
    Ok(format!("200 arrays, worst error {worst:.1e}; [1..8] -> 2.75 / 4.5 / 6.25"))
}

fn grouping_suite() -> Check {
    use StageGroup::*;
    // id, day, admit, release, exclusive, overlapping; None = ungrouped, "!" = unassignable
    let table: [(&str, &str, &str, &str, Option<StageGroup>, &[StageGroup]); 12] = [
        ("admit_minus_1", "9", "10", "20", Some(G2), &[G2]),
        ("admit", "10", "10", "20", Some(G2), &[G2]),
        ("admit_plus_1", "11", "10", "20", Some(G2), &[G2, G3]),
        ("release_minus_1", "19", "10", "20", Some(G4), &[G3, G4]),
        ("release", "20", "10", "20", Some(G4), &[G4]),
        ("release_plus_1", "21", "10", "20", Some(G4), &[G4]),
        ("no_icu", "3", "", "", Some(G1), &[G1]),
        ("missing_day", "", "10", "20", None, &[]),
        ("mid_stay", "15", "10", "20", Some(G3), &[G3]),
        ("before_admit", "5", "10", "20", None, &[]),
        ("open_stay", "14", "10", "", Some(G3), &[G3]),
        ("short_stay", "11", "10", "12", Some(G2), &[G2, G3, G4]),
    ];
    let mut csv = String::from("patient_id,file,day,icu_admit_day,icu_release_day\n");
    for (i, (id, day, admit, release, ..)) in table.iter().enumerate() {
        csv.push_str(&format!("p{i},{id}.png,{day},{admit},{release}\n"));
    }
    let parsed = parse_metadata(csv.as_bytes(), MetadataSchema::Hanno).map_err(|e| e.to_string())?;
    ensure!(parsed.rejects.is_empty() && parsed.records.len() == 12, "rejects: {:?}", parsed.rejects);
    let exclusive = assign_all(&parsed.records, GroupingMode::Exclusive);
    let overlapping = assign_all(&parsed.records, GroupingMode::Overlapping);
    for (id, day, admit, _, ex, ov) in table {
        if day.is_empty() {
            for a in [&exclusive, &overlapping] {
                ensure!(a.unassignable.iter().any(|(u, _)| u == id), "{id} should be unassignable");
            }
            continue;
        }
        if ex.is_none() {
            ensure!(
                exclusive.ungrouped.contains(&id.to_string()) && overlapping.ungrouped.contains(&id.to_string()),
                "{id} should be ungrouped"
            );
            continue;
        }
        let got_ex = exclusive.groups.get(id).cloned().unwrap_or_default();
        let got_ov = overlapping.groups.get(id).cloned().unwrap_or_default();
        ensure!(got_ex == ex.into_iter().collect::<Vec<_>>(), "{id} (admit '{admit}'): exclusive {got_ex:?}, expected {ex:?}");
        ensure!(got_ov == ov, "{id}: overlapping {got_ov:?}, expected {ov:?}");
    }
    Ok("12 boundary records match in exclusive and overlapping mode".into())
}

const COMPARED: [&str; 3] = ["features.csv", "model.json", "report/report.json"];

fn determinism_suite() -> Check {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (_, config) = common::setup(dir.path(), 10, "");
    let out = dir.path().join("out");
    let mut runs = Vec::new();
    for _ in 0..2 {
        if out.exists() {
            std::fs::remove_dir_all(&out).map_err(|e| e.to_string())?;
        }
        let o = common::cli(&config, &["run"]);
        ensure!(o.status.success(), "run failed:\n{}", common::stdout(&o));
        let files: Vec<_> = common::snapshot(&out)
            .into_iter()
            .filter(|(rel, _)| COMPARED.contains(&rel.as_str()) || rel.ends_with(".svg"))
            .collect();
        runs.push(files);
    }
    let svgs = runs[0].iter().filter(|(rel, _)| rel.ends_with(".svg")).count();
    ensure!(runs[0].len() == COMPARED.len() + svgs && svgs >= 2, "missing outputs: {:?}", runs[0].iter().map(|f| &f.0).collect::<Vec<_>>());
    for (a, b) in runs[0].iter().zip(&runs[1]) {
        ensure!(a == b, "{} differs between runs", a.0);
    }
    ensure!(runs[0].len() == runs[1].len(), "different file sets");
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    Ok(format!(
        "{} files byte-identical across two runs ({svgs} SVGs), {:.1}s",
        runs[0].len(),
        elapsed.as_secs_f64()
    ))
}

fn distribution(r: &mut impl Rng, group: StageGroup, center: f64, spread: f64) -> GroupStats {
    let v: Vec<f64> = (0..25).map(|_| center + r.gen_range(-spread..spread)).collect();
    GroupStats {
        group,
        stats: box_stats(&v).unwrap(),
    }
}

fn trend_suite() -> Check {
    let mut r = rng(8);
    let separated: Vec<GroupStats> = [(StageGroup::G1, 0.1), (StageGroup::G2, 0.6), (StageGroup::G3, 0.5), (StageGroup::G4, 0.4)]
        .into_iter()
        .map(|(g, c)| distribution(&mut r, g, c, 0.03))
        .collect();
    let report = trend_check(&separated, &TrendConfig::default());
    ensure!(
        report.summary.all_pass && report.summary.passed == 4,
        "separated groups: {:?}",
        report.predicates.iter().map(|p| (p.id, p.status)).collect::<Vec<_>>()
    );
    let same: Vec<GroupStats> = StageGroup::ALL
        .into_iter()
        .map(|g| GroupStats {
            group: g,
            stats: box_stats(&[0.3, 0.35, 0.4, 0.45, 0.5]).unwrap(),
        })
        .collect();
    let report = trend_check(&same, &TrendConfig::default());
    let p1 = report.get(PredicateId::P1).ok_or("P1 missing")?;
    ensure!(p1.status == PredicateStatus::Fail, "identical groups: P1 {:?}", p1.status);
    ensure!(!report.summary.all_pass, "identical groups pass overall");
    Ok("separated groups pass P1-P4; identical groups fail P1".into())
}

/// Real-data check; never fails the build.
fn optional_suite() -> Option<Check> {
    let config = std::env::var_os("CXR_SEVERITY_ACCEPTANCE_CONFIG")?;
    let config = Path::new(&config).to_path_buf();
    Some((|| {
        let o = common::cli(&config, &["run"]);
        ensure!(o.status.code() != Some(2), "run failed:\n{}", common::stdout(&o));
        let pc = cxr_severity_cli::config::PipelineConfig::load(&config).map_err(|e| e.to_string())?;
        let base = config.parent().map(Path::to_path_buf).unwrap_or_default();
        let run = cxr_severity_cli::config::Resolved::new(pc, base).map_err(|e| e.to_string())?;
        let out = run.out();
        let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()));
        let sep: cxr_severity_cli::commands::Separability =
            serde_json::from_str(&read(&out.join("separability.json"))?).map_err(|e| e.to_string())?;
        let tree_acc = sep.tree.as_ref().map(|t| t.train_accuracy).ok_or("tree was not fitted")?;

        let validation = run
            .config
            .paths
            .validation_metadata
            .as_ref()
            .map(|p| run.path(p))
            .ok_or("no validation metadata")?;
        let records = parse_metadata(
            std::fs::File::open(&validation).map_err(|e| e.to_string())?,
            run.config.paths.validation_schema,
        )
        .map_err(|e| e.to_string())?
        .records;
        let scores = cxr_severity_cli::tables::read_scores(&out.join("scores.csv")).map_err(|e| e.to_string())?;
        let labeled = derive_training_labels(&records).labeled;
        let (mut hit, mut seen) = (0usize, 0usize);
        for (rec, label) in &labeled {
            if let Some(&s) = scores.get(&rec.image_id) {
                seen += 1;
                hit += ((s > run.config.learn.threshold) == label.is_positive()) as usize;
            }
        }
        let val_acc = hit as f64 / seen.max(1) as f64;

        let report: cxr_severity::eval::Report =
            serde_json::from_str(&read(&out.join("report/report.json"))?).map_err(|e| e.to_string())?;
        let p1 = report.comparison.scorers[0]
            .trend
            .get(PredicateId::P1)
            .map(|p| p.status)
            .ok_or("P1 missing")?;
        let summary = serde_json::json!({
            "tree_train_accuracy": tree_acc,
            "validation_accuracy": val_acc,
            "validation_labeled": seen,
            "p1": p1,
        });
        std::fs::write(out.join("acceptance_optional.json"), serde_json::to_string_pretty(&summary).unwrap())
            .map_err(|e| e.to_string())?;
        let detail = format!("tree accuracy {tree_acc:.3}, validation accuracy {val_acc:.3} (n={seen}), P1 {p1:?}");
        ensure!((tree_acc - 0.82).abs() <= 0.05, "{detail}: tree accuracy outside 0.82 +- 0.05");
        ensure!((val_acc - 0.77).abs() <= 0.05, "{detail}: validation accuracy outside 0.77 +- 0.05");
        ensure!(p1 == PredicateStatus::Pass, "{detail}: P1 does not pass");
        Ok(detail)
    })())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 8] = [
        ("image processing identities", imgproc_suite),
        ("logistic numerics", numerical_suite),
        ("tree matches exhaustive CART", tree_suite),
        ("leave-two-out cross-validation", cv_suite),
        ("quantiles and box statistics", quantile_suite),
        ("stage grouping boundaries", grouping_suite),
        ("end-to-end determinism", determinism_suite),
        ("trend predicates", trend_suite),
    ];
    // keep panics from interleaving with the verdict lines
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {why}", i + 1);
            }
        }
    }
    match optional_suite() {
        None => println!("SKIP criterion 9: real-data check (set CXR_SEVERITY_ACCEPTANCE_CONFIG to run)"),
        Some(Ok(detail)) => println!("PASS criterion 9: real-data check: {detail}"),
        Some(Err(why)) => println!("FAIL criterion 9 (optional, not counted): real-data check: {why}"),
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
