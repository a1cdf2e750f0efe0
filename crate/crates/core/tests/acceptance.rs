//! Acceptance run: one line per criterion, non-zero exit if any gating
//! criterion fails. Tolerances are pinned here and nowhere else.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use asc_core::clustering::{candidate_seed, kmeans, kmedoids_hill_climb, ClusterMethod};
use asc_core::evaluation::{
    adjusted_rand_index, calinski_harabasz, dataset_summary, davies_bouldin, intra_inter_ratio,
    silhouette, summary_csv,
};
use asc_core::ingest::{generate_synthetic, SyntheticBundle, SyntheticSpec};
use asc_core::pipeline::cluster_similarity;
use asc_core::similarity::{
    cosine, covariance_model, inverse_document_frequency, mahalanobis_matrix, optimize_lambda,
    text_similarity_matrix, tfidf_weights, LambdaOptions,
};
use asc_core::spectral::{eigendecompose, laplacian};
use asc_core::{
    run_asc, run_single_modality, AscConfig, ConstraintSets, LaplacianKind, Modality,
    NumericDataset, SimilarityKind, SimilarityMatrix,
};
use common::*;
use nalgebra::DMatrix;
use rand::Rng;

const ORACLE_TOL: f64 = 1e-10;
const ORACLE_INSTANCES: usize = 30;
const ORACLE_BUDGET: Duration = Duration::from_secs(5);
const ROW_SUM_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-8;
const PATH_TOL: f64 = 1e-8;
const FUSED_ARI_MIN: f64 = 0.9;
const SINGLE_ARI_MAX: f64 = 0.7;
const FUSION_BUDGET: Duration = Duration::from_secs(10);
const BACKEND_SIL_DELTA: f64 = 0.05;
const BACKEND_ARI_MIN: f64 = 0.9;
const CV_TOL: f64 = 0.01;

type Check = Result<String, String>;
/// Number, name, whether it gates, check.
type Criterion = (u8, &'static str, bool, fn() -> Check);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn bundle() -> SyntheticBundle {
    generate_synthetic(&SyntheticSpec::default()).expect("default spec generates")
}

fn sim(w: DMatrix<f64>) -> SimilarityMatrix {
    SimilarityMatrix::new(w, SimilarityKind::External, None).expect("valid graph")
}

// 1
fn oracle_suite() -> Check {
    let start = Instant::now();
    let mut r = rng("acceptance/oracles");
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    let mut note = |name: &'static str, got: f64, want: f64| {
        let err = (got - want).abs() / want.abs().max(1.0);
        let e = worst.entry(name).or_insert(0.0);
        *e = e.max(err);
    };
    let mut done = 0;
    while done < ORACLE_INSTANCES {
        let n = r.random_range(6..=12);
        let p = r.random_range(1..=4);
        let rows = random_points(&mut r, n, p);
        let Some(want) = mahalanobis_oracle(&rows) else { continue };
        let data = numeric_dataset(&rows);
        let got = mahalanobis_matrix(&data, &covariance_model(&data).unwrap()).unwrap();
        for i in 0..n {
            for j in 0..n {
                note("mahalanobis", got[(i, j)], want[i][j]);
            }
        }
        done += 1;
    }
    for _ in 0..ORACLE_INSTANCES {
        let n = r.random_range(2..=12);
        let q = r.random_range(1..=9);
        let counts = random_counts(&mut r, n, q);
        let text = text_dataset(&counts);
        for (g, w) in inverse_document_frequency(&text).unwrap().iter().zip(idf_oracle(&counts)) {
            note("idf", *g, w);
        }
        let h = tfidf_weights(&text).unwrap();
        let want = tfidf_oracle(&counts);
        let s = text_similarity_matrix(&text).unwrap();
        for i in 0..n {
            for t in 0..q {
                note("tfidf", h[(i, t)], want[i][t]);
            }
            for j in 0..n {
                let c = cosine_oracle(&want[i], &want[j]);
                note("cosine", cosine(&want[i], &want[j]), c);
                if i != j {
                    note("cosine", s.values[(i, j)], c);
                }
            }
        }
    }
    for _ in 0..ORACLE_INSTANCES {
        let n = r.random_range(4..=12);
        let k = r.random_range(2..n.min(5));
        let dim = r.random_range(1..=3);
        let pts = random_points(&mut r, n, dim);
        let labels = random_labels(&mut r, n, k);
        let centers = random_points(&mut r, k, dim);
        let m = from_rows(&pts);
        note("silhouette", silhouette(&m, &labels).unwrap().mean, silhouette_oracle(&pts, &labels));
        note("chc", calinski_harabasz(&m, &labels).unwrap(), chc_oracle(&pts, &labels));
        note("dbi", davies_bouldin(&m, &labels).unwrap(), dbi_oracle(&pts, &labels));
        note(
            "intra_inter",
            intra_inter_ratio(&m, &labels, &from_rows(&centers)).unwrap(),
            intra_inter_oracle(&pts, &labels, &centers),
        );
        let kb = r.random_range(1..=n.min(4));
        let other = random_labels(&mut r, n, kb);
        note("ari", adjusted_rand_index(&labels, &other).unwrap(), ari_oracle(&labels, &other));
    }
    let elapsed = start.elapsed();
    let detail = worst
        .iter()
        .map(|(k, v)| format!("{k}={v:.1e}"))
        .collect::<Vec<_>>()
        .join(" ");
    let bad: Vec<&&str> = worst.iter().filter(|(_, &v)| v > ORACLE_TOL).map(|(k, _)| k).collect();
    ensure(bad.is_empty(), format!("over {ORACLE_TOL:e}: {bad:?} ({detail})"))?;
    ensure(elapsed < ORACLE_BUDGET, format!("took {elapsed:?}"))?;
    Ok(format!("{ORACLE_INSTANCES} instances per metric, {elapsed:.2?}, worst {detail}"))
}

// 2
fn spectral_invariants() -> Check {
    let mut r = rng("acceptance/spectral");
    let (mut worst_row, mut lowest) = (0.0_f64, f64::INFINITY);
    for _ in 0..ORACLE_INSTANCES {
        let n = r.random_range(3..=12);
        let s = sim(random_graph(&mut r, n));
        let lap = laplacian(&s, LaplacianKind::Unnormalized);
        for row in lap.unnormalized.row_iter() {
            worst_row = worst_row.max(row.sum().abs());
        }
        for kind in [LaplacianKind::Unnormalized, LaplacianKind::Symmetric, LaplacianKind::RandomWalk] {
            let dec = eigendecompose(&laplacian(&s, kind), n).map_err(|e| e.to_string())?;
            lowest = lowest.min(dec.eigenvalues[0]);
        }
    }
    ensure(worst_row <= ROW_SUM_TOL, format!("row sum {worst_row:e}"))?;
    ensure(lowest >= -PSD_TOL, format!("eigenvalue {lowest:e}"))?;

    for comps in 1..=3usize {
        let sizes: Vec<usize> = (0..comps).map(|c| 3 + c).collect();
        let labels = planted_labels(&sizes);
        let n = labels.len();
        let mut w = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                if labels[i] == labels[j] {
                    let v = r.random_range(0.2..1.0);
                    w[(i, j)] = v;
                    w[(j, i)] = v;
                }
            }
        }
        let s = sim(w);
        for kind in [LaplacianKind::Unnormalized, LaplacianKind::Symmetric, LaplacianKind::RandomWalk] {
            let dec = eigendecompose(&laplacian(&s, kind), n).map_err(|e| e.to_string())?;
            ensure(
                dec.zero_multiplicity == comps,
                format!("{kind:?}: {} zero eigenvalues for {comps} components", dec.zero_multiplicity),
            )?;
        }
    }

    let mut path = DMatrix::zeros(4, 4);
    for i in 0..3 {
        path[(i, i + 1)] = 1.0;
        path[(i + 1, i)] = 1.0;
    }
    let dec = eigendecompose(&laplacian(&sim(path), LaplacianKind::Unnormalized), 4)
        .map_err(|e| e.to_string())?;
    let s2 = 2f64.sqrt();
    let want = [0.0, 2.0 - s2, 2.0, 2.0 + s2];
    let err = dec
        .eigenvalues
        .iter()
        .zip(want)
        .fold(0.0_f64, |m, (g, w)| m.max((g - w).abs()));
    ensure(err <= PATH_TOL, format!("path spectrum off by {err:e}"))?;
    Ok(format!(
        "row sums <= {worst_row:.1e}, min eigenvalue {lowest:.1e}, components 1/2/3 ok, path error {err:.1e}"
    ))
}

// 3
fn fusion_beats_single() -> Check {
    let start = Instant::now();
    let b = bundle();
    let cfg = AscConfig::default();
    let fused = run_asc(&b.numeric, &b.text, Some(&b.constraints), &cfg).map_err(|e| e.to_string())?;
    let num = run_single_modality(Some(&b.numeric), Some(&b.text), Modality::Numeric, &cfg)
        .map_err(|e| e.to_string())?;
    let txt = run_single_modality(Some(&b.numeric), Some(&b.text), Modality::Text, &cfg)
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let ari = |l: &[usize]| adjusted_rand_index(l, &b.labels).unwrap();
    let (af, an, at) = (ari(fused.labels()), ari(num.labels()), ari(txt.labels()));
    let (sf, sn, st) = (fused.metrics.silhouette, num.metrics.silhouette, txt.metrics.silhouette);
    let detail = format!(
        "lambda={:.2} k={} ARI fused/numeric/text {af:.3}/{an:.3}/{at:.3}, silhouette {sf:.3}/{sn:.3}/{st:.3}, {elapsed:.2?}",
        fused.lambda.unwrap_or(f64::NAN),
        fused.k()
    );
    ensure(af >= FUSED_ARI_MIN, format!("fused ARI low: {detail}"))?;
    ensure(an <= SINGLE_ARI_MAX && at <= SINGLE_ARI_MAX, format!("single modality too good: {detail}"))?;
    ensure(sf > sn && sf > st, format!("silhouette not highest: {detail}"))?;
    ensure(elapsed < FUSION_BUDGET, format!("too slow: {detail}"))?;
    Ok(detail)
}

// 4
/// Three samples, must-link {0, 1}, cannot-link {2}. The triple holds when
/// `lambda >= lo` (via pair 0-2) and `lambda <= hi` (via pair 1-2); the
/// bounds sit 0.01 outside the grid points that should be feasible.
fn lambda_instance(lo: f64, hi: f64) -> (SimilarityMatrix, SimilarityMatrix, ConstraintSets) {
    // fused(0,1) - fused(0,2) = lambda - lo; fused(0,1) - fused(1,2) = hi - lambda.
    let (n01, t01) = (1.0, 0.9);
    let (n02, t02) = (n01 - (1.0 - lo), t01 + lo);
    let (n12, t12) = (n01 + (1.0 - hi), t01 - hi);
    let m = |a: f64, b: f64, c: f64| DMatrix::from_row_slice(3, 3, &[0.0, a, b, a, 0.0, c, b, c, 0.0]);
    (
        sim(m(n01, n02, n12)),
        sim(m(t01, t02, t12)),
        ConstraintSets::new(vec![0, 1], vec![2], 3).unwrap(),
    )
}

fn lambda_optimizer() -> Check {
    let opts = LambdaOptions::default();
    let feasible = |sol: &asc_core::similarity::LambdaSolution| -> Vec<f64> {
        sol.grid.iter().filter(|g| g.feasible).map(|g| g.lambda).collect()
    };
    let (wn, wt, c) = lambda_instance(0.39, 0.61);
    let a = optimize_lambda(&wn, &wt, &c, &opts).map_err(|e| e.to_string())?;
    let fa = feasible(&a);
    ensure(
        fa.len() == 5 && (fa[0] - 0.4).abs() < 1e-12 && (fa[4] - 0.6).abs() < 1e-12,
        format!("feasible region {fa:?}"),
    )?;
    ensure(
        (a.lambda - 0.5).abs() < 1e-12 && (a.objective - 0.25).abs() < 1e-12,
        format!("got lambda {} objective {}", a.lambda, a.objective),
    )?;
    let (wn, wt, c) = lambda_instance(0.59, 0.81);
    let b = optimize_lambda(&wn, &wt, &c, &opts).map_err(|e| e.to_string())?;
    let fb = feasible(&b);
    ensure(
        fb.len() == 5 && (fb[0] - 0.6).abs() < 1e-12 && (fb[4] - 0.8).abs() < 1e-12,
        format!("feasible region {fb:?}"),
    )?;
    ensure((b.lambda - 0.6).abs() < 1e-12, format!("got lambda {}", b.lambda))?;
    for step in [1.0, 0.5, 0.25, 0.2, 0.1, 0.05, 0.02, 0.01] {
        let s = optimize_lambda(&wn, &wt, &c, &LambdaOptions { step, ..opts }).map_err(|e| e.to_string())?;
        let want = (1.0 / step).round() as usize + 1;
        ensure(s.grid.len() == want, format!("step {step}: {} rows, want {want}", s.grid.len()))?;
    }
    Ok(format!(
        "{{0.4..0.6}} -> {:.2} (objective {:.2}); {{0.6..0.8}} -> {:.2}; grid rows = 1/step + 1 for 8 steps",
        a.lambda, a.objective, b.lambda
    ))
}

// 5
fn k_selection() -> Check {
    let cfg = AscConfig::default();
    let mut notes = Vec::new();
    for (sizes, want, label) in [
        (vec![20, 20, 20], 3, "planted-3"),
        (vec![15, 20, 25], 3, "planted-3-uneven"),
        (vec![25, 25], 2, "planted-2"),
    ] {
        let run = cluster_similarity(&sim(planted_graph(&sizes, label)), &cfg).map_err(|e| e.to_string())?;
        let cands = &run.gaps.candidates;
        ensure(cands.contains(&want), format!("{label}: candidates {cands:?}"))?;
        ensure(
            run.selection.chosen_k == want,
            format!("{label}: chose {} from {cands:?}", run.selection.chosen_k),
        )?;
        let ari = adjusted_rand_index(&run.assignment.labels, &planted_labels(&sizes)).unwrap();
        notes.push(format!("{label}: candidates {cands:?} k={} ARI {ari:.2}", run.selection.chosen_k));
    }
    Ok(notes.join("; "))
}

// 6
fn backend_robustness() -> Check {
    let b = bundle();
    let base = run_asc(&b.numeric, &b.text, Some(&b.constraints), &AscConfig::default())
        .map_err(|e| e.to_string())?;
    let k = base.k();
    let lambda = base.lambda.expect("fused run has a weight");
    let mut sils = Vec::new();
    let mut aris = Vec::new();
    let mut medoid_run = None;
    for method in [ClusterMethod::Kmeans, ClusterMethod::Kmedians, ClusterMethod::Kmedoids] {
        let cfg = AscConfig {
            lambda: Some(lambda),
            k: Some(k),
            method,
            ..AscConfig::default()
        };
        let res = run_asc(&b.numeric, &b.text, None, &cfg).map_err(|e| e.to_string())?;
        sils.push(res.metrics.silhouette);
        aris.push(adjusted_rand_index(res.labels(), &b.labels).unwrap());
        if method == ClusterMethod::Kmedoids {
            medoid_run = Some(res);
        }
    }
    let spread = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min);
    let detail = format!("k={k} silhouette {sils:.3?} ARI {aris:.3?}");
    ensure(spread(&sils) <= BACKEND_SIL_DELTA, format!("silhouette spread: {detail}"))?;
    ensure(spread(&aris) == 0.0, format!("ARI differs: {detail}"))?;
    ensure(aris[0] >= BACKEND_ARI_MIN, format!("ARI low: {detail}"))?;

    let run = medoid_run.expect("k-medoids ran");
    let coords = &run.spectral.embedding.coordinates;
    let redo = kmedoids_hill_climb(coords, k, candidate_seed(AscConfig::default().seed, k), 300)
        .map_err(|e| e.to_string())?;
    ensure(redo.labels == run.labels(), "k-medoids rerun disagrees")?;
    let medoids = redo.medoids.expect("medoid indices");
    ensure(is_swap_optimal(&to_rows(coords), &medoids), "a single swap still improves the medoids")?;
    Ok(format!("{detail}, medoids 1-swap optimal"))
}

// 7
fn kmeans_exhaustive() -> Check {
    let mut r = rng("acceptance/exhaustive");
    for inst in 0..50u64 {
        let pts = random_points(&mut r, 7, 2);
        let best = exhaustive_two_means(&pts);
        let got = kmeans(&from_rows(&pts), 2, inst, 300, 20).map_err(|e| e.to_string())?;
        ensure(close(got.objective, best), format!("instance {inst}: {} vs optimum {best}", got.objective))?;
    }
    Ok("50/50 instances at the exhaustive optimum".into())
}

// 8
fn table_arithmetic() -> Check {
    // (mean, SD, CV) per variable as published.
    let table = [
        (21.34, 19.65, 92.08),
        (17.28, 7.59, 43.92),
        (15.38, 12.37, 80.43),
        (64.53, 20.63, 31.97),
        (82.36, 22.57, 27.40),
    ];
    // Two rows `mean -+ sd / sqrt(2)` have exactly that mean and sample SD.
    let a: Vec<f64> = table.iter().map(|(_, s, _)| s / 2f64.sqrt()).collect();
    let values = DMatrix::from_fn(2, table.len(), |r, c| {
        let sign = if r == 0 { -1.0 } else { 1.0 };
        table[c].0 + sign * a[c]
    });
    let data = NumericDataset::new(
        vec!["lo".into(), "hi".into()],
        (1..=table.len()).map(|i| format!("Var{i}")).collect(),
        values,
    )
    .map_err(|e| e.to_string())?;
    let summary = dataset_summary(&data).map_err(|e| e.to_string())?;
    let mut cvs = Vec::new();
    for (f, (_, _, cv)) in summary.features.iter().zip(table) {
        let got = f.cv.ok_or("zero mean")?;
        ensure((got - cv).abs() <= CV_TOL, format!("{}: {got:.4} vs {cv}", f.name))?;
        cvs.push(format!("{got:.2}"));
    }
    let csv = summary_csv(&summary);
    ensure(csv.contains("Var1,21.34,19.65,92.08"), format!("table row: {csv}"))?;
    Ok(format!("CVs {}", cvs.join(", ")))
}

// 9
fn asc(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_asc"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(
        out.status.success(),
        format!("asc {args:?}: {}", String::from_utf8_lossy(&out.stderr)),
    )
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = tmp.path().join("data");
    let d = data.to_str().unwrap();
    asc(&["synth", "--out", d])?;
    let run = |name: &str, threads: &str| -> Result<BTreeMap<String, Vec<u8>>, String> {
        let out = tmp.path().join(name);
        asc(&[
            "cluster",
            "--numeric", &format!("{d}/numeric.csv"),
            "--text", &format!("{d}/text.csv"),
            "--lexicon", &format!("{d}/lexicon.txt"),
            "--constraints", &format!("{d}/constraints.json"),
            "--out", out.to_str().unwrap(),
            "--threads", threads,
        ])?;
        Ok(read_dir(&out))
    };
    let a = run("a", "2")?;
    let b = run("b", "2")?;
    ensure(a == b, "two identical runs differ")?;
    let one = run("one", "1")?;
    let many = run("many", "8")?;
    for f in ["assignments.csv", "metrics.json"] {
        ensure(one.get(f) == many.get(f), format!("{f} depends on thread count"))?;
        ensure(one.get(f) == a.get(f), format!("{f} depends on thread count"))?;
    }
    Ok(format!("{} artifacts byte-identical across reruns; labels and metrics equal at 1/2/8 threads", a.len()))
}

// 10
fn reference_data() -> Check {
    let Some(dir) = std::env::var_os("ASC_REFERENCE_DATA") else {
        return Ok("skipped: set ASC_REFERENCE_DATA to a directory with numeric.csv, text.csv, lexicon.txt, constraints.json".into());
    };
    let dir = Path::new(&dir);
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |f: &str| dir.join(f).to_string_lossy().into_owned();
    asc(&[
        "cluster", "--numeric", &p("numeric.csv"), "--text", &p("text.csv"),
        "--lexicon", &p("lexicon.txt"), "--constraints", &p("constraints.json"),
        "--no-rescale", "--literal-lambda-rhs", "--out", tmp.path().to_str().unwrap(),
    ])?;
    let m: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("metrics.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let detail = format!("lambda={} candidates={} k={}", m["lambda"], m["candidates"], m["k"]);
    let hit = m["lambda"].as_f64().is_some_and(|l| (l - 0.65).abs() < 1e-9)
        && m["candidates"] == serde_json::json!([3, 11, 14])
        && m["k"] == 3;
    ensure(hit, format!("targets lambda=0.65 candidates=[3,11,14] k=3 not met: {detail}"))?;
    Ok(detail)
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (1, "oracle equivalence", true, oracle_suite),
        (2, "spectral invariants", true, spectral_invariants),
        (3, "fusion beats single modality", true, fusion_beats_single),
        (4, "lambda optimizer", true, lambda_optimizer),
        (5, "k selection", true, k_selection),
        (6, "backend robustness", true, backend_robustness),
        (7, "k-means enumeration optimality", true, kmeans_exhaustive),
        (8, "summary table arithmetic", true, table_arithmetic),
        (9, "determinism", true, determinism),
        (10, "reference-data targets (informational)", false, reference_data),
    ];
    let mut failed = 0;
    for (id, name, gating, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let (tag, detail) = match (&outcome, gating) {
            (Ok(d), false) if d.starts_with("skipped") => ("SKIP", d.clone()),
            (Ok(d), _) => ("PASS", d.clone()),
            (Err(d), true) => {
                failed += 1;
                ("FAIL", d.clone())
            }
            (Err(d), false) => ("INFO", d.clone()),
        };
        println!("criterion {id:>2} [{tag}] {name}: {detail}");
    }
    if failed == 0 {
        println!("acceptance: all gating criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} gating criteria failed");
        ExitCode::FAILURE
    }
}
