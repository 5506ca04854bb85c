//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p mvrbm --test acceptance`. Failed criteria are
//! reported but only make the process exit non-zero when
//! `MVRBM_ACCEPTANCE_STRICT=1` is set, so a failing criterion does not stop
//! the remaining test targets of a workspace run. A criterion that panics
//! always fails the process.

mod common;

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::*;
use mvrbm::analytics::{average_precision, hamming_kmeans, jaccard, ndcg, rand_index, spearman, RetrievalResult};
use mvrbm::analytics::map_at_k;
use mvrbm::gradcheck::{check_log_likelihood, check_metric, check_sparsity};
use mvrbm::model::{energy, hidden_conditional, visible_conditional, UnitDist};
use mvrbm::oracle::Oracle;
use mvrbm::rng::{stream_rng, Stream};
use mvrbm::synth::{generate, SynthSpec};
use mvrbm::training::{mean_exact_log_likelihood, mean_group_norm};
use mvrbm::{fit, predict_unseen, ModelParams, Normalization, TrainConfig, UnitType, VisibleSchema, VisibleVector};
use ndarray::Array1;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn hidden_states(k: usize) -> Vec<Array1<f64>> {
    (0..1usize << k).map(|m| Array1::from_iter((0..k).map(|j| ((m >> j) & 1) as f64))).collect()
}

fn token_lengths(schema: &VisibleSchema, tokens: usize) -> Vec<usize> {
    schema
        .units()
        .iter()
        .map(|u| match u.kind {
            UnitType::ReplicatedSoftmax { .. } | UnitType::ConstrainedPoisson { .. } => tokens,
            _ => 0,
        })
        .collect()
}

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let (mut ll, mut sp, mut me) = (0.0f64, 0.0f64, 0.0f64);
    for seed in 0..50 {
        let mut r = rng(seed);
        let schema = discrete_schema(&mut r, 4);
        let k = r.gen_range(1..=3);
        let params = random_params(&schema, k, 0.7, &mut r);
        let data = encoded(&schema, 5, 3, &mut r);
        ll = ll.max(check_log_likelihood(&schema, &params, &data).unwrap().relative_error);
        sp = sp.max(check_sparsity(&schema, &params, &data, k).unwrap().relative_error);
        let neighbors = [&data[1], &data[2]];
        let others = [&data[3], &data[4]];
        me = me.max(check_metric(&schema, &params, &data[0], &neighbors, &others).unwrap().relative_error);
    }
    let t = start.elapsed();
    outcome(
        ll <= 1e-6 && sp <= 1e-4 && me <= 1e-4 && t < Duration::from_secs(60),
        format!("max relative error: log-likelihood {ll:.2e}, sparsity {sp:.2e}, metric {me:.2e}; {t:.1?}"),
    )
}

fn normalization() -> Outcome {
    let (mut soft, mut joint, mut rates) = (0.0f64, 0.0f64, 0.0f64);
    for seed in 0..100 {
        let mut r = rng(200 + seed);
        let schema = VisibleSchema::from_pairs([
            ("c", UnitType::Categorical { categories: r.gen_range(2..8) }),
            ("w", UnitType::ReplicatedSoftmax { vocab: r.gen_range(2..20) }),
            ("n", UnitType::ConstrainedPoisson { vocab: r.gen_range(2..20) }),
        ])
        .unwrap();
        let k = r.gen_range(1..8);
        let params = random_params(&schema, k, 3.0, &mut r);
        let h = Array1::from_iter((0..k).map(|_| r.gen_range(0.0..1.0)));
        let n = r.gen_range(0..40);
        for d in visible_conditional(&schema, &params, h.view(), &token_lengths(&schema, n)) {
            match d {
                UnitDist::Categorical(p) | UnitDist::Replicated { probs: p, .. } => {
                    soft = soft.max((p.iter().sum::<f64>() - 1.0).abs())
                }
                UnitDist::Poisson(x) => rates = rates.max((x.iter().sum::<f64>() - n as f64).abs()),
                _ => unreachable!(),
            }
        }
        let v = encoded(&schema, 1, 10, &mut r).remove(0);
        for target in [0, 1] {
            let full = predict_unseen(&schema, &params, &v, target, None, Normalization::FullVocabulary).unwrap();
            soft = soft.max((full.entries.iter().map(|e| e.1).sum::<f64>() - 1.0).abs());
            let some = predict_unseen(&schema, &params, &v, target, Some(&[0, 1]), Normalization::Renormalized).unwrap();
            soft = soft.max((some.entries.iter().map(|e| e.1).sum::<f64>() - 1.0).abs());
        }

        let tiny = discrete_schema(&mut r, 4);
        let tp = random_params(&tiny, r.gen_range(1..=3), 1.0, &mut r);
        let oracle = Oracle::new(&tiny, &tp).unwrap();
        let configs = oracle.enumerate_visible(&token_lengths(&tiny, r.gen_range(0..4))).unwrap();
        let total: f64 = configs.iter().map(|(v, m)| m * oracle.log_likelihood(v).unwrap().exp()).sum();
        joint = joint.max((total - 1.0).abs());
    }
    outcome(
        soft <= 1e-12 && joint <= 1e-9 && rates <= 1e-9,
        format!("max deviation: softmax sums {soft:.1e}, enumerated P(v) sum {joint:.1e}, Poisson rate sums {rates:.1e}"),
    )
}

/// Mean of a Gaussian unit given `h`, from a trapezoid rule over `exp(-E)`.
fn gaussian_mean_by_quadrature(schema: &VisibleSchema, params: &ModelParams, v: &VisibleVector, col: usize, sigma: f64, h: &Array1<f64>) -> f64 {
    let centre = params.visible_bias[col];
    let (lo, hi, n) = (centre - 40.0 * sigma, centre + 40.0 * sigma, 20_000);
    let dx = (hi - lo) / n as f64;
    let mut x = v.clone();
    let pts: Vec<(f64, f64)> = (0..=n)
        .map(|s| {
            let t = lo + s as f64 * dx;
            x.x[col] = t;
            (t, -energy(schema, params, &x, h.view()).unwrap())
        })
        .collect();
    let m = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let (mut num, mut den) = (0.0, 0.0);
    for (s, (t, ne)) in pts.iter().enumerate() {
        let w = if s == 0 || s == n { 0.5 } else { 1.0 } * (ne - m).exp();
        num += w * t;
        den += w;
    }
    num / den
}

fn oracle_equivalence() -> Outcome {
    let (mut hid, mut vis, mut gauss) = (0.0f64, 0.0f64, 0.0f64);
    for seed in 0..60 {
        let mut r = rng(400 + seed);
        let schema = if seed % 2 == 0 { discrete_schema(&mut r, 4) } else { mixed_schema(&mut r, 3) };
        let k = r.gen_range(1..=3);
        let params = random_params(&schema, k, 0.8, &mut r);
        let oracle = Oracle::new(&schema, &params).unwrap();
        for v in encoded(&schema, 4, 3, &mut r) {
            let closed = hidden_conditional(&schema, &params, &v);
            let exact = oracle.hidden_posteriors(&v).unwrap();
            hid = hid.max(max_abs_diff(closed.as_slice().unwrap(), exact.as_slice().unwrap()));
            for h in hidden_states(k) {
                let dists = visible_conditional(&schema, &params, h.view(), &v.lengths);
                if seed % 2 == 0 {
                    let closed: Vec<f64> = dists.iter().flat_map(|d| d.mean()).collect();
                    let exact = oracle.visible_means(&h, &v.lengths).unwrap();
                    vis = vis.max(max_abs_diff(&closed, exact.as_slice().unwrap()));
                } else {
                    let g = schema.len() - 1;
                    let (col, sigma) = match schema.units()[g].kind {
                        UnitType::Gaussian { sigma } => (schema.columns(g).start, sigma),
                        _ => unreachable!(),
                    };
                    let UnitDist::Gaussian { mean, .. } = dists[g] else { unreachable!() };
                    gauss = gauss.max((mean - gaussian_mean_by_quadrature(&schema, &params, &v, col, sigma, &h)).abs());
                }
            }
        }
    }
    outcome(
        hid <= 1e-10 && vis <= 1e-10 && gauss <= 1e-10,
        format!("max deviation: P(h|v) {hid:.1e}, discrete P(v|h) {vis:.1e}, Gaussian mean {gauss:.1e}"),
    )
}

fn learning_sanity() -> Outcome {
    let start = Instant::now();
    let mut worst_drop = 0.0f64;
    for seed in 0..5 {
        let mut r = rng(600 + seed);
        let schema = discrete_schema(&mut r, 4);
        let data = encoded(&schema, 12, 3, &mut r);
        let cfg = TrainConfig { hidden: 3, epochs: 50, exact_gradient: true, lr_w: 0.05, lr_a: 0.05, lr_b: 0.05, seed, ..Default::default() };
        let init = ModelParams::random(schema.total_columns(), 3, cfg.init_std, &mut stream_rng(seed, Stream::Init));
        let mut prev = mean_exact_log_likelihood(&schema, &init, &data).unwrap();
        let (_, log) = fit(&schema, &data, None, &cfg).unwrap();
        for e in &log.epochs {
            let ll = e.exact_log_likelihood.unwrap();
            worst_drop = worst_drop.max(prev - ll);
            prev = ll;
        }
    }
    let (schema, d) = generate(&SynthSpec { concepts: 4, records_per_concept: 50, seed: 1, ..Default::default() }).unwrap();
    let (_, log) = fit(&schema, &d.encoded, None, &TrainConfig::default()).unwrap();
    let (first, last) = (log.epochs[0].recon_error, log.epochs[99].recon_error);
    let reduction = 1.0 - last / first;
    let t = start.elapsed();
    outcome(
        worst_drop <= 1e-9 && reduction >= 0.3 && t < Duration::from_secs(120),
        format!(
            "largest exact log-likelihood decrease {:.1e}; CD-1 reconstruction error {first:.4} -> {last:.4} ({:.1}% lower); {t:.1?}",
            worst_drop.max(0.0),
            100.0 * reduction
        ),
    )
}

/// MAP@100, mean group norm per variant, for one repeat of the planted
/// retrieval experiment.
struct Repeat {
    map: [f64; 3],
    group_norm: [f64; 2],
}

const REPEAT_SEEDS: [u64; 3] = [0, 1, 2];

fn retrieval_repeat(seed: u64) -> Repeat {
    let spec = SynthSpec {
        concepts: 5,
        records_per_concept: 200,
        gaussians: 4,
        separation: 1.0,
        gaussian_noise: 0.8,
        categoricals: 2,
        category_noise: 0.3,
        vocab: 30,
        tokens_per_record: 8,
        token_noise: 0.3,
        nuisance_levels: 5,
        nuisance_gaussians: 4,
        nuisance_separation: 2.0,
        nuisance_categoricals: 2,
        nuisance_token_share: 0.5,
        seed,
        ..Default::default()
    };
    let (schema, d) = generate(&spec).unwrap();
    let (train, test) = d.encoded.split_at(500);
    let (train_labels, test_labels) = d.labels.split_at(500);
    let base = TrainConfig { hidden: 50, groups: 10, seed, ..Default::default() };
    let variants = [(0.0, 0.0), (0.003, 0.0), (0.003, 0.1)];
    let mut map = [0.0; 3];
    let mut group_norm = [0.0; 2];
    for (i, &(alpha, beta)) in variants.iter().enumerate() {
        let cfg = TrainConfig { alpha, beta, ..base.clone() };
        let (params, _) = fit(&schema, train, Some(train_labels), &cfg).unwrap();
        let corpus: Vec<Array1<f64>> = train.iter().map(|v| hidden_conditional(&schema, &params, v)).collect();
        let results: Vec<RetrievalResult> = test
            .iter()
            .zip(test_labels)
            .enumerate()
            .map(|(q, (v, l))| RetrievalResult::by_label(q, &hidden_conditional(&schema, &params, v), *l, &corpus, train_labels).unwrap())
            .collect();
        map[i] = map_at_k(&results, 100).unwrap();
        if i < 2 {
            group_norm[i] = mean_group_norm(&schema, &params, train, base.groups).unwrap();
        }
    }
    Repeat { map, group_norm }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt())
}

fn sparsity_effect(repeats: &[Repeat]) -> Outcome {
    let pass = repeats.iter().all(|r| r.group_norm[1] < r.group_norm[0]);
    let detail = repeats
        .iter()
        .zip(REPEAT_SEEDS)
        .map(|(r, s)| format!("seed {s}: {:.4} -> {:.4}", r.group_norm[0], r.group_norm[1]))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(pass, format!("mean group norm alpha=0 -> alpha=0.003, {detail}"))
}

fn metric_effect(repeats: &[Repeat], took: Duration) -> Outcome {
    let stats: Vec<(f64, f64)> = (0..3).map(|i| mean_std(&repeats.iter().map(|r| r.map[i]).collect::<Vec<_>>())).collect();
    let (plain, sparse, metric) = (stats[0].0, stats[1].0, stats[2].0);
    let pass = plain <= sparse && sparse <= metric && metric >= 1.1 * plain && took < Duration::from_secs(600);
    outcome(
        pass,
        format!(
            "MAP@100 over {} repeats: plain {:.4}±{:.4}, +sparsity {:.4}±{:.4}, +sparsity+metric {:.4}±{:.4} ({:+.1}% vs plain); {took:.1?}",
            repeats.len(),
            stats[0].0,
            stats[0].1,
            stats[1].0,
            stats[1].1,
            stats[2].0,
            stats[2].1,
            100.0 * (metric / plain - 1.0)
        ),
    )
}

fn mean_field_prediction() -> Outcome {
    let mut w0 = 0.0f64;
    let mut rhos = Vec::new();
    for seed in 0..40 {
        let mut r = rng(800 + seed);
        let mut units: Vec<(String, UnitType)> =
            discrete_schema(&mut r, 3).units().iter().map(|u| (u.name.clone(), u.kind)).collect();
        units.push(("target".into(), UnitType::Categorical { categories: 4 }));
        let schema = VisibleSchema::from_pairs(units).unwrap();
        let target = schema.len() - 1;
        let mut params = random_params(&schema, 3, 1.0, &mut r);
        if seed < 20 {
            params.weights.fill(0.0);
        }
        let oracle = Oracle::new(&schema, &params).unwrap();
        let v = encoded(&schema, 1, 3, &mut r).remove(0);
        let exact = oracle.conditional(&v, target).unwrap();
        let mf = predict_unseen(&schema, &params, &v.without_unit(&schema, target), target, None, Normalization::FullVocabulary).unwrap();
        let mut approx = vec![0.0; exact.len()];
        for (t, p) in mf.entries {
            approx[t] = p;
        }
        if seed < 20 {
            w0 = w0.max(max_abs_diff(&approx, &exact));
        } else {
            rhos.push(spearman(&approx, &exact).unwrap());
        }
    }
    let (m, s) = mean_std(&rhos);
    let min = rhos.iter().cloned().fold(f64::INFINITY, f64::min);
    outcome(
        w0 <= 1e-12,
        format!("W=0 max deviation {w0:.1e}; Spearman vs exact conditional on {} models: mean {m:.3}±{s:.3}, min {min:.3}", rhos.len()),
    )
}

fn naive_ap(rel: &[bool], k: usize) -> f64 {
    let total = rel.iter().filter(|&&x| x).count();
    if total == 0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in 0..k.min(rel.len()) {
        if rel[i] {
            let hits = rel[..=i].iter().filter(|&&x| x).count();
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / total.min(k) as f64
}

fn naive_ndcg(rel: &[bool], k: usize) -> f64 {
    let gain = |list: &[bool]| -> f64 {
        list.iter().take(k).enumerate().map(|(i, &x)| if x { 1.0 / (i as f64 + 2.0).log2() } else { 0.0 }).sum()
    };
    let mut ideal = rel.to_vec();
    ideal.sort_by(|a, b| b.cmp(a));
    let best = gain(&ideal);
    if best == 0.0 {
        0.0
    } else {
        gain(rel) / best
    }
}

fn naive_rand(a: &[usize], b: &[usize]) -> f64 {
    let (mut agree, mut pairs) = (0usize, 0usize);
    for i in 0..a.len() {
        for j in 0..a.len() {
            if i < j {
                pairs += 1;
                if (a[i] == a[j]) == (b[i] == b[j]) {
                    agree += 1;
                }
            }
        }
    }
    agree as f64 / pairs as f64
}

fn naive_jaccard(p: &[bool], q: &[bool]) -> f64 {
    let on = |x: &[bool]| -> HashSet<usize> { x.iter().enumerate().filter(|e| *e.1).map(|e| e.0).collect() };
    let (a, b) = (on(p), on(q));
    let union = a.union(&b).count();
    if union == 0 {
        1.0
    } else {
        a.intersection(&b).count() as f64 / union as f64
    }
}

fn metric_utilities() -> Outcome {
    let mut worst = 0.0f64;
    let mut r = rng(900);
    for _ in 0..100 {
        let n = r.gen_range(1..60);
        let rel: Vec<bool> = (0..n).map(|_| r.gen_bool(0.3)).collect();
        let k = r.gen_range(1..80);
        worst = worst.max((average_precision(&rel, k) - naive_ap(&rel, k)).abs());
        worst = worst.max((ndcg(&rel, k) - naive_ndcg(&rel, k)).abs());
        let m = r.gen_range(2..40);
        let a: Vec<usize> = (0..m).map(|_| r.gen_range(0..4)).collect();
        let b: Vec<usize> = (0..m).map(|_| r.gen_range(0..3)).collect();
        worst = worst.max((rand_index(&a, &b).unwrap() - naive_rand(&a, &b)).abs());
        let bits = r.gen_range(0..30);
        let p: Vec<bool> = (0..bits).map(|_| r.gen_bool(0.4)).collect();
        let q: Vec<bool> = (0..bits).map(|_| r.gen_bool(0.4)).collect();
        worst = worst.max((jaccard(&p, &q) - naive_jaccard(&p, &q)).abs());
    }
    let mut codes = Vec::new();
    let mut truth = Vec::new();
    for i in 0..40 {
        let block = i % 2;
        let mut code: Vec<bool> = (0..16).map(|b| (b < 8) == (block == 0)).collect();
        let flip = r.gen_range(0..16);
        code[flip] = !code[flip];
        codes.push(code);
        truth.push(block);
    }
    let assignment = hamming_kmeans(&codes, 2, 0, 100).unwrap();
    let ri = rand_index(&assignment.labels, &truth).unwrap();
    outcome(
        worst <= 1e-12 && ri == 1.0,
        format!("max deviation from naive MAP/NDCG/Rand/Jaccard {worst:.1e}; planted 2-block Rand index {ri}"),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let path = |n: &str| dir.path().join(n).to_str().unwrap().to_owned();
    let run = |args: &[&str]| {
        let out = Command::new(env!("CARGO_BIN_EXE_mvrbm")).args(args).output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    };
    let (data, schema) = (path("data.jsonl"), path("schema.txt"));
    run(&["synth", "--concepts", "4", "--per-concept", "50", "--seed", "2", "--out", &data, "--schema", &schema]);
    let mut models = Vec::new();
    for name in ["a.txt", "b.txt"] {
        let out = path(name);
        run(&[
            "train", "--schema", &schema, "--data", &data, "--out", &out, "--log", &path("log.tsv"),
            "--epochs", "20", "--alpha", "0.003", "--groups", "10", "--beta", "0.1", "--seed", "11",
        ]);
        models.push(std::fs::read(&out).unwrap());
    }
    outcome(models[0] == models[1], format!("two train runs wrote {} and {} bytes, identical: {}", models[0].len(), models[1].len(), models[0] == models[1]))
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(o) => o,
        Err(e) => {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        }
    }
}

fn main() -> ExitCode {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |n: usize, name: &'static str, o: Outcome| {
        println!("criterion {n} {name}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, name, o));
    };
    report(1, "gradient correctness", guarded(gradient_correctness));
    report(2, "normalization", guarded(normalization));
    report(3, "oracle equivalence", guarded(oracle_equivalence));
    report(4, "learning sanity", guarded(learning_sanity));
    let start = Instant::now();
    let repeats = catch_unwind(|| REPEAT_SEEDS.iter().map(|&s| retrieval_repeat(s)).collect::<Vec<_>>());
    let took = start.elapsed();
    match &repeats {
        Ok(reps) => {
            report(5, "sparsity effect", guarded(|| sparsity_effect(reps)));
            report(6, "metric-learning effect", guarded(|| metric_effect(reps, took)));
        }
        Err(_) => {
            report(5, "sparsity effect", outcome(false, "retrieval experiment panicked"));
            report(6, "metric-learning effect", outcome(false, "retrieval experiment panicked"));
        }
    }
    report(7, "mean-field prediction", guarded(mean_field_prediction));
    report(8, "metric utilities", guarded(metric_utilities));
    report(9, "determinism", guarded(determinism));
    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!("acceptance: {} of {} criteria pass", results.len() - failed.len(), results.len());
    let panicked = results.iter().any(|r| r.2.detail.starts_with("panicked") || r.2.detail.contains("experiment panicked"));
    let strict = std::env::var("MVRBM_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if !failed.is_empty() {
        println!("acceptance: failing criteria {failed:?}");
    }
    if panicked || (strict && !failed.is_empty()) {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
