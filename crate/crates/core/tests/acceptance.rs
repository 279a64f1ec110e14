//! Acceptance gate: one test per criterion, each printing a single
//! pass/fail line. Run with `cargo test --test acceptance -- --nocapture`.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use peekc::annotate::{label_engagement, pagerank, WatchRecord, WeightedGraph};
use peekc::config::ModelConfig;
use peekc::data_model::{
    group_sessions, parse_events, ColumnLayout, EngagementEvent, FragmentId, KcAnnotationSlot,
};
use peekc::evaluate::{compute_metrics, evaluate, ScoredPrediction};
use peekc::learners::gaussian::{cdf, pdf, truncated_gaussian_update, Outcome};
use peekc::learners::{concept_jaccard, coverage_cosine, ModelKind, NoveltyModel};
use peekc::report::{render_bar, render_bubble, PlotSpec};
use peekc::simulate::{generate, SyntheticConfig};
use peekc::skills::SkillExport;
use peekc::EngagementModel;

fn check(criterion: u32, name: &str, pass: bool, detail: String) {
    println!(
        "criterion {criterion:2} {name}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} ({name}) failed: {detail}");
}

/// Posterior skill moments by trapezoid quadrature, written from the
/// generative definition only (performance ~ N(skill, perf_var), outcome
/// constrains the performance against the margin).
fn quadrature_posterior(
    prior_mean: f64,
    prior_var: f64,
    perf_var: f64,
    outcome: Outcome,
    margin: f64,
) -> (f64, f64) {
    let sigma = prior_var.sqrt();
    let perf_sd = perf_var.sqrt();
    let (lo, hi) = (prior_mean - 14.0 * sigma, prior_mean + 14.0 * sigma);
    let n = 60_000usize;
    let h = (hi - lo) / n as f64;
    let likelihood = |s: f64| match outcome {
        Outcome::Win => cdf((s - margin) / perf_sd),
        Outcome::Loss => cdf((-margin - s) / perf_sd),
        Outcome::Draw => cdf((margin - s) / perf_sd) - cdf((-margin - s) / perf_sd),
    };
    let (mut z0, mut z1, mut z2) = (0.0f64, 0.0, 0.0);
    for i in 0..=n {
        let s = lo + i as f64 * h;
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        let f = w * pdf((s - prior_mean) / sigma) / sigma * likelihood(s);
        z0 += f;
        z1 += f * s;
        z2 += f * s * s;
    }
    let mean = z1 / z0;
    (mean, z2 / z0 - mean * mean)
}

#[test]
fn criterion_01_ep_update_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_mean = 0.0f64;
    let mut worst_var = 0.0f64;
    let mut compared = 0;
    for i in 0..200 {
        let prior_mean = rng.random_range(-3.0..3.0);
        let prior_var = rng.random_range(0.05..300.0);
        let beta: f64 = rng.random_range(0.1..5.0);
        let perf_var = 2.0 * beta * beta;
        let margin = rng.random_range(0.01..3.0);
        let outcome = match i % 3 {
            0 => Outcome::Win,
            1 => Outcome::Loss,
            _ => Outcome::Draw,
        };
        let update = truncated_gaussian_update(prior_mean, prior_var, perf_var, outcome, margin);
        if update.underflow {
            continue;
        }
        let (om, ov) = quadrature_posterior(prior_mean, prior_var, perf_var, outcome, margin);
        worst_mean = worst_mean.max((update.mean - om).abs());
        worst_var = worst_var.max((update.variance - ov).abs());
        compared += 1;
    }
    let elapsed = start.elapsed().as_secs_f64();
    check(
        1,
        "ep-update oracle",
        worst_mean <= 1e-3 && worst_var <= 1e-3 && compared >= 150 && elapsed < 5.0,
        format!(
            "{compared}/200 games, worst |dmu| {worst_mean:.2e}, worst |dvar| {worst_var:.2e}, {elapsed:.2}s"
        ),
    );
}

fn scored(counts: (u64, u64, u64, u64)) -> Vec<(u64, Vec<ScoredPrediction>)> {
    let (tp, fp, tn, fn_) = counts;
    let mut v = Vec::new();
    let mut push = |predicted: u8, label: u8, n: u64| {
        for _ in 0..n {
            v.push(ScoredPrediction {
                proba: predicted as f64,
                predicted,
                label,
            });
        }
    };
    push(1, 1, tp);
    push(1, 0, fp);
    push(0, 0, tn);
    push(0, 1, fn_);
    vec![(0, v)]
}

#[test]
fn criterion_02_metric_hand_values() {
    // (tp, fp, tn, fn) -> hand accuracy/precision/recall/f1 with the
    // zero-division-to-zero rule
    let cases: [((u64, u64, u64, u64), (f64, f64, f64, f64)); 10] = [
        ((1, 0, 1, 0), (1.0, 1.0, 1.0, 1.0)),
        ((0, 0, 4, 0), (1.0, 0.0, 0.0, 0.0)),
        ((0, 0, 0, 4), (0.0, 0.0, 0.0, 0.0)),
        ((0, 4, 0, 0), (0.0, 0.0, 0.0, 0.0)),
        ((2, 2, 2, 2), (0.5, 0.5, 0.5, 0.5)),
        ((3, 1, 4, 2), (0.7, 0.75, 0.6, 2.0 * 0.75 * 0.6 / 1.35)),
        ((1, 3, 0, 0), (0.25, 0.25, 1.0, 0.4)),
        ((5, 0, 0, 5), (0.5, 1.0, 0.5, 2.0 / 3.0)),
        ((0, 1, 9, 0), (0.9, 0.0, 0.0, 0.0)),
        ((7, 2, 90, 1), (0.97, 7.0 / 9.0, 7.0 / 8.0, 2.0 * (7.0 / 9.0) * (7.0 / 8.0) / (7.0 / 9.0 + 7.0 / 8.0))),
    ];
    let mut worst = 0.0f64;
    for (counts, (acc, prec, rec, f1)) in cases {
        let report = compute_metrics("test", &scored(counts)).unwrap();
        for (got, want) in [
            (report.micro.accuracy, acc),
            (report.micro.precision, prec),
            (report.micro.recall, rec),
            (report.micro.f1, f1),
        ] {
            worst = worst.max((got - want).abs());
        }
    }
    check(
        2,
        "metric hand values",
        worst <= 1e-12,
        format!("10 scenarios, worst abs error {worst:.2e}"),
    );
}

/// Dense power-iteration PageRank with uniform dangling redistribution.
fn dense_pagerank(n: usize, edges: &[(usize, usize, f64)], damping: f64) -> Vec<f64> {
    let mut transition = vec![vec![0.0f64; n]; n];
    let mut out = vec![0.0f64; n];
    for &(src, _, w) in edges {
        out[src] += w;
    }
    for &(src, dst, w) in edges {
        transition[src][dst] = w / out[src];
    }
    let mut rank = vec![1.0 / n as f64; n];
    for _ in 0..20_000 {
        let dangling: f64 = (0..n).filter(|&i| out[i] == 0.0).map(|i| rank[i]).sum();
        let mut next = vec![(1.0 - damping) / n as f64 + damping * dangling / n as f64; n];
        for (src, row) in transition.iter().enumerate() {
            for (dst, &p) in row.iter().enumerate() {
                next[dst] += damping * rank[src] * p;
            }
        }
        let delta: f64 = next.iter().zip(&rank).map(|(a, b)| (a - b).abs()).sum();
        rank = next;
        if delta < 1e-14 {
            break;
        }
    }
    rank
}

#[test]
fn criterion_03_pagerank_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0f64;
    let mut top5_mismatches = 0;
    for _ in 0..50 {
        let n = rng.random_range(2..=20usize);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j && rng.random_range(0.0..1.0) < 0.3 {
                    edges.push((i, j, rng.random_range(0.1..2.0)));
                }
            }
        }
        let graph = WeightedGraph {
            nodes: (0..n as u64).collect(),
            edges: edges.clone(),
        };
        let result = pagerank(&graph, 0.85, 1e-12, 10_000);
        let oracle = dense_pagerank(n, &edges, 0.85);
        for (node, score) in &result.scores {
            worst = worst.max((score - oracle[*node as usize]).abs());
        }
        let top5 = |scores: Vec<(u64, f64)>| -> BTreeSet<u64> {
            let mut s = scores;
            s.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            s.into_iter().take(5).map(|(k, _)| k).collect()
        };
        let got = top5(result.scores.iter().map(|(&k, &v)| (k, v)).collect());
        let want = top5(oracle.iter().enumerate().map(|(i, &v)| (i as u64, v)).collect());
        if got != want {
            top5_mismatches += 1;
        }
    }
    check(
        3,
        "pagerank oracle",
        worst <= 1e-8 && top5_mismatches == 0,
        format!("50 graphs, Linf {worst:.2e}, top-5 mismatches {top5_mismatches}"),
    );
}

#[test]
fn criterion_04_label_boundary() {
    let at = label_engagement(WatchRecord {
        watch_seconds: 0.75,
        duration_seconds: 1.0,
    })
    .unwrap();
    let below = label_engagement(WatchRecord {
        watch_seconds: 0.75 - 1e-9,
        duration_seconds: 1.0,
    })
    .unwrap();
    check(
        4,
        "label boundary",
        at.1 == 1 && below.1 == 0,
        format!("label(0.75) = {}, label(0.75 - 1e-9) = {}", at.1, below.1),
    );
}

#[test]
fn criterion_05_published_hyperparameters() {
    // Requires the real dataset; when absent this criterion is replaced
    // by the synthetic-recovery criterion (6).
    let data_dir = std::env::var("PEEKC_DATA_DIR").unwrap_or_else(|_| "data".into());
    let dir = std::path::Path::new(&data_dir);
    let train_path = dir.join("train.csv");
    let test_path = dir.join("test.csv");
    if !train_path.exists() || !test_path.exists() || !real_dataset(&train_path) {
        println!(
            "criterion  5 published hyperparameters: SKIP (real dataset not present under {data_dir}; replaced by criterion 6)"
        );
        return;
    }
    let load = |path: &std::path::Path| {
        let file = std::fs::File::open(path).unwrap();
        group_sessions(parse_events(file, ColumnLayout::default()).unwrap())
    };
    let train = load(&train_path);
    let test = load(&test_path);
    let mut config = ModelConfig::default();
    config.model = ModelKind::Novelty;
    let novelty = evaluate(&config, &test, Some(&train), false).unwrap();
    config.model = ModelKind::Interest;
    let interest = evaluate(&config, &test, Some(&train), false).unwrap();
    config.model = ModelKind::Ink;
    let ink = evaluate(&config, &test, Some(&train), false).unwrap();
    let pass = (0.625..=0.685).contains(&novelty.micro.f1)
        && (0.60..=0.66).contains(&interest.micro.f1)
        && ink.micro.accuracy > novelty.micro.accuracy;
    check(
        5,
        "published hyperparameters",
        pass,
        format!(
            "novelty f1 {:.4}, interest f1 {:.4}, ink acc {:.4} vs novelty acc {:.4}",
            novelty.micro.f1, interest.micro.f1, ink.micro.accuracy, novelty.micro.accuracy
        ),
    );
}

/// Heuristic: the real dataset has tens of thousands of learners; a
/// synthetic file dropped into `data/` must not masquerade as it.
fn real_dataset(train_path: &std::path::Path) -> bool {
    let Ok(file) = std::fs::File::open(train_path) else {
        return false;
    };
    let Ok(events) = parse_events(file, ColumnLayout::default()) else {
        return false;
    };
    group_sessions(events).n_learners() >= 10_000
}

fn synthetic_splits() -> (peekc::Dataset, peekc::Dataset, SyntheticConfig) {
    let config = SyntheticConfig::default();
    assert_eq!(config.n_learners, 1000);
    assert_eq!(config.events_per_learner, 50);
    let (train, test) = generate(&config).split();
    (train, test, config)
}

#[test]
fn criterion_06_synthetic_recovery() {
    let (train, test, config) = synthetic_splits();
    let true_config = config.true_model_config();
    let novelty = evaluate(&true_config, &test, Some(&train), false).unwrap();
    let mut all_ran = true;
    let mut tf_binary_f1 = 0.0;
    for kind in ModelKind::ALL {
        let mut c = true_config.clone();
        c.model = kind;
        match evaluate(&c, &test, Some(&train), false) {
            Ok(report) => {
                if kind == ModelKind::TfBinary {
                    tf_binary_f1 = report.micro.f1;
                }
            }
            Err(e) => {
                all_ran = false;
                eprintln!("model {} failed: {e}", kind.name());
            }
        }
    }
    let margin = novelty.micro.f1 - tf_binary_f1;
    check(
        6,
        "synthetic recovery",
        margin >= 0.05 && all_ran,
        format!(
            "novelty f1 {:.4} vs tf-binary f1 {:.4} (margin {margin:.4}), all 9 models ran: {all_ran}",
            novelty.micro.f1, tf_binary_f1
        ),
    );
}

#[test]
fn criterion_07_novelty_beats_kt() {
    let (train, test, config) = synthetic_splits();
    let true_config = config.true_model_config();
    let novelty = evaluate(&true_config, &test, Some(&train), false).unwrap();
    let mut kt_config = true_config.clone();
    kt_config.model = ModelKind::Kt;
    let kt = evaluate(&kt_config, &test, Some(&train), false).unwrap();
    check(
        7,
        "novelty beats kt",
        test.n_learners() >= 100 && novelty.micro.f1 > kt.micro.f1,
        format!(
            "{} learners, novelty f1 {:.4} > kt f1 {:.4}",
            test.n_learners(),
            novelty.micro.f1,
            kt.micro.f1
        ),
    );
}

#[test]
fn criterion_08_latency_budget() {
    let (train, test, config) = synthetic_splits();
    let params = config.true_model_config().novelty;
    let mut fit_total = 0.0f64;
    let mut predict_total = 0.0f64;
    let mut n = 0u64;
    for session in train.sessions.values().chain(test.sessions.values()) {
        let mut model = NoveltyModel::new(session.user_id, params);
        for event in &session.events {
            let t0 = Instant::now();
            let _ = model.predict_proba(event);
            predict_total += t0.elapsed().as_secs_f64();
            let t1 = Instant::now();
            model.fit(event);
            fit_total += t1.elapsed().as_secs_f64();
            n += 1;
        }
    }
    let fit_ms = fit_total / n as f64 * 1e3;
    let predict_ms = predict_total / n as f64 * 1e3;
    check(
        8,
        "latency budget",
        n >= 10_000 && fit_ms <= 10.0 && predict_ms <= 1.0,
        format!("{n} events, mean fit {fit_ms:.4} ms, mean predict {predict_ms:.4} ms"),
    );
}

#[test]
fn criterion_09_data_efficiency_curve() {
    // Cold start (prior mean 0) over the full generated population, so
    // the curve reflects genuine within-session learning.
    let config = SyntheticConfig::default();
    let data = generate(&config);
    let mut cold = config.true_model_config();
    cold.novelty.init_mean = 0.0;
    let report = evaluate(&cold, &data.dataset, None, false).unwrap();
    let f1_t1 = report.per_timestep[0].f1;
    let f1_t10 = report.per_timestep[9].f1;
    check(
        9,
        "data-efficiency curve",
        f1_t10 - f1_t1 >= 0.03,
        format!("f1(t=1) {f1_t1:.4}, f1(t=10) {f1_t10:.4}, gain {:.4}", f1_t10 - f1_t1),
    );
}

#[test]
fn criterion_10_visual_encoding() {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut pass = true;
    let mut detail = String::from("100 exports ok");
    'outer: for round in 0..100 {
        let n = rng.random_range(2..=15usize);
        let mut export: Vec<SkillExport> = (0..n)
            .map(|i| SkillExport {
                kc_id: i as u64,
                mean: rng.random_range(0.1..2.0),
                variance: rng.random_range(0.01..1.0),
                count: rng.random_range(1..50),
            })
            .collect();
        export.sort_by(|a, b| b.mean.total_cmp(&a.mean));
        let spec = PlotSpec::default();
        let bar = render_bar(&export, &spec).unwrap();
        let bubble = render_bubble(&export, &spec).unwrap();
        let bar_doc = match roxmltree::Document::parse(&bar) {
            Ok(d) => d,
            Err(e) => {
                pass = false;
                detail = format!("round {round}: bar not well-formed: {e}");
                break;
            }
        };
        let bubble_doc = match roxmltree::Document::parse(&bubble) {
            Ok(d) => d,
            Err(e) => {
                pass = false;
                detail = format!("round {round}: bubble not well-formed: {e}");
                break;
            }
        };
        // bars appear in export order (mean-descending): pixel heights
        // must be non-increasing
        let heights: Vec<f64> = bar_doc
            .descendants()
            .filter(|d| d.attribute("class") == Some("bar"))
            .map(|d| d.attribute("height").unwrap().parse().unwrap())
            .collect();
        for w in heights.windows(2) {
            if w[0] < w[1] - 1e-9 {
                pass = false;
                detail = format!("round {round}: bar heights not mean-ordered");
                break 'outer;
            }
        }
        // bubbles: radius order isomorphic to mean order, opacity
        // monotone non-increasing in variance
        let circles: Vec<(f64, f64)> = bubble_doc
            .descendants()
            .filter(|d| d.attribute("class") == Some("bubble"))
            .map(|d| {
                (
                    d.attribute("r").unwrap().parse().unwrap(),
                    d.attribute("fill-opacity").unwrap().parse().unwrap(),
                )
            })
            .collect();
        assert_eq!(circles.len(), export.len());
        for i in 0..export.len() {
            for j in 0..export.len() {
                if export[i].mean > export[j].mean + 1e-9 && circles[i].0 < circles[j].0 - 1e-9 {
                    pass = false;
                    detail = format!("round {round}: radius order violates mean order");
                    break 'outer;
                }
                if export[i].variance > export[j].variance + 1e-9
                    && circles[i].1 > circles[j].1 + 1e-9
                {
                    pass = false;
                    detail = format!("round {round}: opacity not monotone in variance");
                    break 'outer;
                }
            }
        }
    }
    check(10, "visual encoding", pass, detail);
}

fn random_event(rng: &mut ChaCha8Rng) -> EngagementEvent {
    let n_kcs = rng.random_range(1..=5usize);
    let mut kc_ids: Vec<u64> = (0..30).collect();
    kc_ids.shuffle(rng);
    EngagementEvent {
        fragment: FragmentId {
            lecture_id: rng.random_range(0..10),
            video_id: 1,
            part_id: 1,
        },
        timestamp: 0,
        user_id: 0,
        kcs: kc_ids
            .into_iter()
            .take(n_kcs)
            .map(|kc_id| KcAnnotationSlot {
                kc_id,
                coverage: rng.random_range(0.05..1.0),
            })
            .collect(),
        label: 1,
    }
}

#[test]
fn criterion_11_similarity_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let a = random_event(&mut rng);
        let b = random_event(&mut rng);
        worst = worst.max((coverage_cosine(&a, &a) - 1.0).abs());
        worst = worst.max((concept_jaccard(&a, &a) - 1.0).abs());
        worst = worst.max((coverage_cosine(&a, &b) - coverage_cosine(&b, &a)).abs());
        worst = worst.max((concept_jaccard(&a, &b) - concept_jaccard(&b, &a)).abs());
        // brute-force dot-product oracle
        let dot: f64 = a
            .kcs
            .iter()
            .flat_map(|x| {
                b.kcs
                    .iter()
                    .filter(move |y| y.kc_id == x.kc_id)
                    .map(move |y| x.coverage * y.coverage)
            })
            .sum();
        let norm = |e: &EngagementEvent| {
            e.kcs.iter().map(|s| s.coverage * s.coverage).sum::<f64>().sqrt()
        };
        let oracle_cos = (dot / (norm(&a) * norm(&b))).clamp(0.0, 1.0);
        worst = worst.max((coverage_cosine(&a, &b) - oracle_cos).abs());
        // brute-force set oracle
        let sa: BTreeSet<u64> = a.kc_ids().collect();
        let sb: BTreeSet<u64> = b.kc_ids().collect();
        let inter = sa.intersection(&sb).count() as f64;
        let union = sa.union(&sb).count() as f64;
        let oracle_jac = if union == 0.0 { 0.0 } else { inter / union };
        worst = worst.max((concept_jaccard(&a, &b) - oracle_jac).abs());
    }
    check(
        11,
        "similarity identities",
        worst <= 1e-12,
        format!("1000 pairs, worst abs error {worst:.2e}"),
    );
}

// keep BTreeMap import meaningful if criteria evolve
#[allow(dead_code)]
type KcMap = BTreeMap<u64, f64>;
