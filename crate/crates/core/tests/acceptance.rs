//! Acceptance suite. Each test prints one `PASS`/`FAIL` line and then
//! asserts, so a run with `--nocapture` shows every criterion's verdict.

use std::collections::BTreeMap;
use std::process::Command;
use std::time::Instant;

use peeksched::domain::{AppId, AppSet, Application, ClassLabel, ModelProfile, ModelRef, Problem, Request, RequestId, ThetaMap};
use peeksched::oracle::{exact_global, exact_grouped, OracleBudget};
use peeksched::schedule::{schedule_utility, AccuracySource, PlanTable, WorkerState};
use peeksched::scheduling::{
    self, augment_short_circuit, form_groups, order_requests, AccuracyMode, RequestOrder, SchedulerSpec,
    SchedulingContext, Selection, PRESET_NAMES,
};
use peeksched::scoring::{self, PenaltySpec, ThetaVector};
use peeksched::sim::{estimate_all, prepare_context, run_trial, EstimationConfig, EstimatorKind, HintSource};
use peeksched::sneakpeek::{posterior, Evidence, PriorKind};
use peeksched::workload::{builtin, gen_scenario, ScenarioSpec};
use peeksched::LatencyMode;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const DATA_OBLIVIOUS: [&str; 4] = ["maxacc-edf", "lo-edf", "lo-priority", "grouped"];

fn report(id: u32, title: &str, pass: bool, detail: String) {
    println!("{} criterion {id:>2} {title}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} ({title}) failed: {detail}");
}

fn trio() -> ScenarioSpec {
    builtin("default_trio").unwrap()
}

#[derive(Debug, Clone, Copy, Default)]
struct Summary {
    utility: f64,
    violation_ms: f64,
}

/// Mean metrics of one preset over seeds `0..seeds`.
fn summarize(scenario: &ScenarioSpec, spec: &SchedulerSpec, estimation: &EstimationConfig, seeds: u64) -> Summary {
    let runs: Vec<_> = (0..seeds)
        .into_par_iter()
        .map(|seed| run_trial(scenario, spec, estimation, seed).unwrap())
        .collect();
    let n = runs.len() as f64;
    Summary {
        utility: runs.iter().map(|m| m.mean_utility).sum::<f64>() / n,
        violation_ms: runs.iter().map(|m| m.mean_violation_ms).sum::<f64>() / n,
    }
}

fn preset(name: &str) -> SchedulerSpec {
    SchedulerSpec::preset(name).unwrap()
}

fn fmt_map(m: &BTreeMap<&str, f64>) -> String {
    m.iter().map(|(k, v)| format!("{k}={v:.4}")).collect::<Vec<_>>().join(" ")
}

fn random_confusion(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    loop {
        let z: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| f64::from(rng.random_range(0u32..50))).collect())
            .collect();
        if z.iter().all(|row| row.iter().sum::<f64>() > 0.0) {
            return z;
        }
    }
}

#[test]
fn criterion_01_accuracy_decomposition() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let n = rng.random_range(1..=10);
        let z = random_confusion(&mut rng, n);
        let profile = ModelProfile::new("m", z.clone(), 1.0, 0.0).unwrap();
        let theta = profile.test_frequencies();
        let a = scoring::theta_accuracy(&theta, profile.recall()).unwrap();
        let b = scoring::accuracy_from_confusion(&z).unwrap();
        worst = worst.max((a - b).abs());
    }
    let elapsed = started.elapsed().as_secs_f64();
    report(
        1,
        "accuracy decomposition identity",
        worst <= 1e-12 && elapsed < 1.0,
        format!("max |diff| = {worst:.2e} over 500 matrices in {elapsed:.3}s"),
    );
}

#[test]
fn criterion_02_quadratic_score_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(1..=50);
        let c = rng.random_range(1..=8);
        let mut probs = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let raw: Vec<f64> = (0..c).map(|_| rng.random::<f64>() + 1e-3).collect();
            let sum: f64 = raw.iter().sum();
            probs.push(raw.iter().map(|v| v / sum).collect::<Vec<f64>>());
            labels.push(ClassLabel(rng.random_range(0..c)));
        }
        let mut counts = vec![0.0; c];
        let mut mu = vec![0.0; c];
        for (p, l) in probs.iter().zip(&labels) {
            counts[l.0] += 1.0;
            mu[l.0] += p[l.0];
        }
        for j in 0..c {
            if counts[j] > 0.0 {
                mu[j] /= counts[j];
            }
        }
        let theta = ThetaVector::from_weights(counts).unwrap();
        let mean_sq = probs.iter().map(|p| p.iter().map(|v| v * v).sum::<f64>()).sum::<f64>() / n as f64;
        let a = scoring::quadratic_score_theta(&theta, &mu, mean_sq).unwrap();
        let b = scoring::quadratic_score_direct(&probs, &labels).unwrap();
        worst = worst.max((a - b).abs());
    }
    report(
        2,
        "quadratic score identity",
        worst <= 1e-12,
        format!("max |diff| = {worst:.2e} over 200 samples"),
    );
}

#[test]
fn criterion_03_conjugacy_exactness() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=10);
        let alpha: Vec<f64> = (0..n).map(|_| rng.random_range(1e-3..100.0)).collect();
        let counts: Vec<u32> = (0..n).map(|_| rng.random_range(0..1000)).collect();
        let prior = peeksched::sneakpeek::DirichletBelief::new(alpha.clone()).unwrap();
        let post = posterior(&prior, &Evidence::new(counts.clone())).unwrap();
        let exact = post
            .alpha()
            .iter()
            .zip(&alpha)
            .zip(&counts)
            .all(|((p, a), &y)| *p == a + f64::from(y));
        if !exact {
            mismatches += 1;
        }
    }
    report(
        3,
        "conjugacy exactness",
        mismatches == 0,
        format!("{mismatches} mismatches over 1000 fuzzed cases"),
    );
}

/// Random instance with at most 3 apps, 6 requests and 3 models per app,
/// sigmoid penalty, a short-circuit variant per app and random θ.
fn oracle_instance(seed: u64) -> SchedulingContext {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let app_count = rng.random_range(1..=3);
    let mut apps = AppSet::new();
    for a in 0..app_count {
        let models = (0..rng.random_range(1..=3))
            .map(|m| {
                let acc = rng.random_range(0.5..0.99);
                let z = vec![vec![acc * 100.0, 100.0 - acc * 100.0], vec![(1.0 - acc) * 120.0, acc * 80.0]];
                ModelProfile::new(format!("m{m}"), z, rng.random_range(5.0..60.0), rng.random_range(0.0..30.0))
                    .unwrap()
            })
            .collect();
        let app = Application::new(AppId::new(format!("app{a}")), 2, models, PenaltySpec::sigmoid(), None).unwrap();
        let sc_acc = rng.random_range(0.3..0.8);
        let sc = ModelProfile::zero_latency(
            "sc",
            vec![vec![sc_acc, 1.0 - sc_acc], vec![1.0 - sc_acc, sc_acc]],
        )
        .unwrap();
        apps.insert(augment_short_circuit(app, sc).unwrap());
    }
    let n = rng.random_range(1..=6);
    let mut requests = Vec::new();
    let mut thetas = ThetaMap::new();
    for i in 0..n {
        let arrival = rng.random_range(0.0..50.0);
        let deadline = arrival + rng.random_range(10.0..150.0);
        let app = AppId::new(format!("app{}", rng.random_range(0..app_count)));
        requests.push(Request::new(RequestId(i), app, arrival, deadline, vec![], ClassLabel(0)).unwrap());
        let p = rng.random_range(0.0..1.0);
        thetas.insert(RequestId(i), ThetaVector::new(vec![p, 1.0 - p]).unwrap());
    }
    SchedulingContext::new(Problem::new(50.0, requests, apps)).with_thetas(thetas)
}

fn oracle_specs() -> Vec<(String, SchedulerSpec)> {
    let mut specs: Vec<(String, SchedulerSpec)> = PRESET_NAMES.iter().map(|n| (n.to_string(), preset(n))).collect();
    for (name, order, sel) in [
        ("fcfs-lo", RequestOrder::Fcfs, Selection::LocallyOptimal),
        ("fcfs-maxacc", RequestOrder::Fcfs, Selection::MaxAccuracy),
    ] {
        specs.push((name.into(), SchedulerSpec::new(order, sel)));
    }
    let mut dyn_lo = SchedulerSpec::new(RequestOrder::Priority, Selection::LocallyOptimal);
    dyn_lo.short_circuit = true;
    dyn_lo.accuracy_source = AccuracyMode::Dynamic;
    specs.push(("lo-priority-dynamic-sc".into(), dyn_lo));
    specs
}

#[test]
fn criterion_04_oracle_equivalence() {
    let started = Instant::now();
    let budget = OracleBudget::default();
    let mode = LatencyMode::SequenceAware;
    let mut grouped_worst: f64 = 0.0;
    let mut global_violations = Vec::new();
    let results: Vec<_> = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let ctx = oracle_instance(seed);
            let mut grouped_gap: f64 = 0.0;
            let mut compared = 0usize;
            let mut violations = Vec::new();
            for (name, spec) in oracle_specs() {
                let source = match spec.accuracy_source {
                    AccuracyMode::Profiled => AccuracySource::Profiled,
                    AccuracyMode::Dynamic => AccuracySource::Dynamic(ctx.thetas.as_ref().unwrap()),
                };
                let schedule = scheduling::schedule(&spec, &ctx).unwrap();
                let u = schedule_utility(&schedule, &ctx.problem, source, mode).unwrap();
                let global = exact_global(&ctx.problem, source, spec.short_circuit, mode, budget).unwrap();
                if u > global.utility + 1e-9 {
                    violations.push(format!("seed {seed} {name}: {u} > {}", global.utility));
                }
                if spec.selection.is_grouped() {
                    let groups = form_groups(&spec, &ctx).unwrap();
                    let exact = exact_grouped(&groups, &ctx.problem, source, spec.short_circuit, mode, budget).unwrap();
                    if groups.len() <= spec.brute_force_threshold {
                        grouped_gap = grouped_gap.max((u - exact.utility).abs());
                        compared += 1;
                    } else if u > exact.utility + 1e-9 {
                        violations.push(format!("seed {seed} {name}: {u} > grouped optimum {}", exact.utility));
                    }
                }
            }
            (grouped_gap, compared, violations)
        })
        .collect();
    let mut compared = 0;
    for (gap, n, v) in results {
        grouped_worst = grouped_worst.max(gap);
        compared += n;
        global_violations.extend(v);
    }
    let elapsed = started.elapsed().as_secs_f64();
    report(
        4,
        "oracle equivalence",
        grouped_worst <= 1e-9 && global_violations.is_empty() && elapsed < 30.0,
        format!(
            "max |grouped − exact_grouped| = {grouped_worst:.2e} over {compared} runs with groups ≤ τ, \
             {} bound violations, {elapsed:.2}s",
            global_violations.len()
        ),
    );
}

/// Mean absolute accuracy-estimation error per application:
/// `(profiled, dynamic)`, averaged over requests and models.
fn estimation_errors(
    scenario: &ScenarioSpec,
    config: &EstimationConfig,
    seed: u64,
) -> BTreeMap<String, (f64, f64)> {
    let generated = gen_scenario(&scenario.clone().with_seed(seed)).unwrap();
    let thetas = estimate_all(&generated, scenario, config, seed).unwrap();
    let mut acc: BTreeMap<String, (f64, f64, usize)> = BTreeMap::new();
    for req in &generated.problem.requests {
        let app = generated.problem.apps.get(&req.app).unwrap();
        let entry = acc.entry(req.app.0.clone()).or_default();
        for model in app.models() {
            let truth = model.recall()[req.true_label.0];
            let dynamic = scoring::theta_accuracy(&thetas[&req.id], model.recall()).unwrap();
            entry.0 += (model.accuracy() - truth).abs();
            entry.1 += (dynamic - truth).abs();
            entry.2 += 1;
        }
    }
    acc.into_iter()
        .map(|(k, (p, d, n))| (k, (p / n as f64, d / n as f64)))
        .collect()
}

fn overall(errors: &BTreeMap<String, (f64, f64)>) -> f64 {
    errors.values().map(|e| e.1).sum::<f64>() / errors.len() as f64
}

fn thousand_requests() -> ScenarioSpec {
    let mut s = trio();
    s.request_count = 1000;
    s.per_app_counts = Some(vec![334, 333, 333]);
    s
}

#[test]
fn criterion_05_estimation_error_reduction() {
    let started = Instant::now();
    let scenario = thousand_requests();
    let k5 = estimation_errors(&scenario, &EstimationConfig::default(), 5);
    let k1 = estimation_errors(&scenario, &EstimationConfig { k: 1, ..Default::default() }, 5);
    let per_app_ok = k5.values().all(|(profiled, dynamic)| dynamic < profiled);
    let (e5, e1) = (overall(&k5), overall(&k1));
    let elapsed = started.elapsed().as_secs_f64();
    let detail = k5
        .iter()
        .map(|(app, (p, d))| format!("{app}: profiled {p:.4} dynamic {d:.4}"))
        .collect::<Vec<_>>()
        .join(", ");
    report(
        5,
        "estimation error reduction",
        per_app_ok && e5 <= e1 && elapsed < 10.0,
        format!("{detail}; k=5 {e5:.4} vs k=1 {e1:.4}; {elapsed:.2}s"),
    );
}

#[test]
fn criterion_06_scheduler_ordering() {
    let started = Instant::now();
    let scenario = trio();
    let est = EstimationConfig::default();
    let s: BTreeMap<&str, Summary> = PRESET_NAMES
        .iter()
        .map(|&name| (name, summarize(&scenario, &preset(name), &est, 200)))
        .collect();
    let u = |n: &str| s[n].utility;
    let min_violation = s.values().map(|x| x.violation_ms).fold(f64::INFINITY, f64::min);
    let pass = u("sneakpeek") > u("grouped")
        && u("grouped") > u("lo-priority")
        && u("lo-priority") >= u("lo-edf")
        && u("sneakpeek") >= 1.3 * u("lo-edf")
        && s["sneakpeek"].violation_ms <= min_violation;
    let elapsed = started.elapsed().as_secs_f64();
    let utilities: BTreeMap<&str, f64> = s.iter().map(|(k, v)| (*k, v.utility)).collect();
    let violations: BTreeMap<&str, f64> = s.iter().map(|(k, v)| (*k, v.violation_ms)).collect();
    report(
        6,
        "scheduler ordering",
        pass && elapsed < 60.0,
        format!(
            "utility [{}], violation ms [{}], ratio {:.3}, {elapsed:.1}s",
            fmt_map(&utilities),
            fmt_map(&violations),
            u("sneakpeek") / u("lo-edf")
        ),
    );
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

fn spearman(y: &[f64]) -> f64 {
    let x: Vec<f64> = (0..y.len()).map(|i| i as f64).collect();
    let (rx, ry) = (ranks(&x), ranks(y));
    let n = y.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

#[test]
fn criterion_07_deadline_sweep() {
    let deadlines = [50.0, 100.0, 150.0, 200.0, 300.0, 400.0];
    let est = EstimationConfig::default();
    let mut curves: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for d in deadlines {
        let mut scenario = trio();
        scenario.deadline = scenario.deadline.with_mean(d);
        for name in PRESET_NAMES {
            curves.entry(name).or_default().push(summarize(&scenario, &preset(name), &est, 100).utility);
        }
    }
    let rho: BTreeMap<&str, f64> = curves.iter().map(|(k, v)| (*k, spearman(v))).collect();
    let at_400: Vec<f64> = DATA_OBLIVIOUS.iter().map(|n| *curves[n].last().unwrap()).collect();
    let spread = at_400.iter().cloned().fold(f64::MIN, f64::max) - at_400.iter().cloned().fold(f64::MAX, f64::min);
    let detail = curves
        .iter()
        .map(|(k, v)| format!("{k} [{}]", v.iter().map(|u| format!("{u:.3}")).collect::<Vec<_>>().join(" ")))
        .collect::<Vec<_>>()
        .join("; ");
    report(
        7,
        "deadline sweep",
        rho.values().all(|&r| r >= 0.9) && spread <= 0.05,
        format!("spearman [{}], 400ms spread {spread:.4}; {detail}", fmt_map(&rho)),
    );
}

#[test]
fn criterion_08_simulated_estimator_floor() {
    let scenario = trio();
    let grouped = summarize(&scenario, &preset("grouped"), &EstimationConfig::default(), 100).utility;
    let mut curve = BTreeMap::new();
    for acc in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let est = EstimationConfig {
            estimator: EstimatorKind::Simulated { accuracy: acc },
            ..Default::default()
        };
        curve.insert(format!("{acc}"), summarize(&scenario, &preset("sneakpeek"), &est, 100).utility);
    }
    let pass = curve["0.9"] > grouped && curve["0.1"] <= grouped;
    let shown = curve.iter().map(|(k, v)| format!("{k}={v:.4}")).collect::<Vec<_>>().join(" ");
    report(
        8,
        "simulated estimator usefulness floor",
        pass,
        format!("sneakpeek [{shown}] vs grouped {grouped:.4}"),
    );
}

#[test]
fn criterion_09_model_variance_sweep() {
    let est = EstimationConfig::default();
    let mut grouped = BTreeMap::new();
    let mut lo_priority = BTreeMap::new();
    for spread in [0.0, 0.05, 0.10, 0.20] {
        let scenario = trio().with_spread(spread).unwrap();
        grouped.insert(format!("{spread}"), summarize(&scenario, &preset("grouped"), &est, 100).utility);
        lo_priority.insert(format!("{spread}"), summarize(&scenario, &preset("lo-priority"), &est, 100).utility);
    }
    let pass = grouped["0.2"] > grouped["0"] && grouped["0.2"] > lo_priority["0.2"];
    let show = |m: &BTreeMap<String, f64>| m.iter().map(|(k, v)| format!("{k}={v:.4}")).collect::<Vec<_>>().join(" ");
    report(
        9,
        "model variance sweep",
        pass,
        format!("grouped [{}], lo-priority [{}]", show(&grouped), show(&lo_priority)),
    );
}

#[test]
fn criterion_10_prior_study() {
    let scenario = thousand_requests();
    let errors = |prior: PriorKind, hint: HintSource| -> f64 {
        let config = EstimationConfig {
            prior,
            hint,
            ..Default::default()
        };
        let per_seed: Vec<f64> = (0..5).map(|seed| overall(&estimation_errors(&scenario, &config, seed))).collect();
        per_seed.iter().sum::<f64>() / per_seed.len() as f64
    };
    let (u_true, w_true, s_true) = (
        errors(PriorKind::Uninformative, HintSource::StreamMix),
        errors(PriorKind::WeaklyInformative, HintSource::StreamMix),
        errors(PriorKind::StronglyInformative, HintSource::StreamMix),
    );
    let (u_test, w_test, s_test) = (
        errors(PriorKind::Uninformative, HintSource::TestMix),
        errors(PriorKind::WeaklyInformative, HintSource::TestMix),
        errors(PriorKind::StronglyInformative, HintSource::TestMix),
    );
    let pass = u_true < s_true && w_true < s_true && u_test < w_test && u_test < s_test;
    report(
        10,
        "prior study",
        pass,
        format!(
            "true-mix hint: uninformative {u_true:.4} weak {w_true:.4} strong {s_true:.4}; \
             test-mix hint: uninformative {u_test:.4} weak {w_test:.4} strong {s_test:.4}"
        ),
    );
}

/// Independent sequential reference for the flat schedulers on one worker.
fn reference_flat(spec: &SchedulerSpec, ctx: &SchedulingContext) -> Vec<(RequestId, ModelRef)> {
    let source = match spec.accuracy_source {
        AccuracyMode::Profiled => AccuracySource::Profiled,
        AccuracyMode::Dynamic => AccuracySource::Dynamic(ctx.thetas.as_ref().unwrap()),
    };
    let table = PlanTable::build(&ctx.problem, source, spec.short_circuit).unwrap();
    let mut worker = WorkerState::new(1.0, 1.0);
    let mut out = Vec::new();
    for id in order_requests(spec.ordering, spec, ctx).unwrap() {
        let pos = table.position(id).unwrap();
        let row = &table.rows[pos];
        let mut best: Option<(usize, f64, f64)> = None;
        for (i, o) in row.options.iter().enumerate() {
            if spec.selection == Selection::MaxAccuracy && o.model == ModelRef::SneakPeek {
                continue;
            }
            let cost = worker.cost(row.app, o, spec.planning).total();
            let score = if spec.selection == Selection::MaxAccuracy {
                o.accuracy
            } else {
                scoring::utility(o.accuracy, row.penalty, row.deadline, table.now + worker.busy, cost).unwrap()
            };
            if best.map_or(true, |(_, s, l)| score > s || (score == s && cost < l)) {
                best = Some((i, score, cost));
            }
        }
        let o = &row.options[best.unwrap().0];
        worker.advance(row.app, o, spec.planning);
        out.push((id, o.model));
    }
    out
}

#[test]
fn criterion_11_multi_worker() {
    let scenario = trio();
    let est = EstimationConfig::default();
    let mut one = BTreeMap::new();
    let mut two = BTreeMap::new();
    for name in PRESET_NAMES {
        one.insert(name, summarize(&scenario, &preset(name), &est, 100).utility);
        two.insert(name, summarize(&scenario, &preset(name).with_workers(2), &est, 100).utility);
    }
    let scaling_ok = PRESET_NAMES.iter().all(|n| two[n] >= one[n]);
    let grouped_ok = two["grouped"] >= two["lo-edf"];

    let mut identical = true;
    for seed in 0..100 {
        for name in PRESET_NAMES {
            let spec = preset(name);
            let ctx = prepare_context(&scenario, &spec, &est, seed).unwrap();
            let schedule = scheduling::schedule(&spec, &ctx).unwrap();
            identical &= schedule.entries.iter().all(|e| e.worker == 0);
            let got: Vec<(RequestId, ModelRef)> = schedule.entries.iter().map(|e| (e.request, e.model)).collect();
            let expected = if spec.selection.is_grouped() {
                let groups = form_groups(&spec, &ctx).unwrap();
                let source = match spec.accuracy_source {
                    AccuracyMode::Profiled => AccuracySource::Profiled,
                    AccuracyMode::Dynamic => AccuracySource::Dynamic(ctx.thetas.as_ref().unwrap()),
                };
                if groups.len() > spec.brute_force_threshold {
                    continue;
                }
                let exact = exact_grouped(&groups, &ctx.problem, source, spec.short_circuit, spec.planning, OracleBudget::default())
                    .unwrap();
                exact.schedule.entries.iter().map(|e| (e.request, e.model)).collect()
            } else {
                reference_flat(&spec, &ctx)
            };
            identical &= got == expected;
        }
    }
    report(
        11,
        "multi-worker sanity",
        scaling_ok && grouped_ok && identical,
        format!(
            "1 worker [{}], 2 workers [{}], single-worker path identical: {identical}",
            fmt_map(&one),
            fmt_map(&two)
        ),
    );
}

#[test]
fn criterion_12_scheduling_overhead() {
    let scenario = trio().with_app_count(6).unwrap();
    assert_eq!(scenario.request_count, 24);
    let est = EstimationConfig::default();
    let mut worst: f64 = 0.0;
    for name in PRESET_NAMES {
        for seed in 0..20 {
            let m = run_trial(&scenario, &preset(name), &est, seed).unwrap();
            worst = worst.max(m.scheduling_overhead_ms);
        }
    }
    report(
        12,
        "scheduling overhead",
        worst < 50.0,
        format!("slowest window {worst:.3} ms for 24 requests across 6 applications"),
    );
}

fn strip_overhead(csv: &str) -> String {
    csv.lines()
        .map(|line| {
            let mut cols: Vec<&str> = line.split(',').collect();
            cols.remove(9);
            cols.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn criterion_13_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.toml");
    std::fs::write(
        &config,
        r#"
trials = 4
base_seed = 17
schedulers = ["maxacc-edf", "lo-edf", "lo-priority", "grouped", "sneakpeek"]

[scenario]
builtin = "default_trio"

[sweep]
param = "deadline_mean"
values = [100, 150.5, 300]
"#,
    )
    .unwrap();
    let run = |out: &str| {
        let out = dir.path().join(out);
        let status = Command::new(env!("CARGO_BIN_EXE_peeksched"))
            .args(["run", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read_to_string(out).unwrap()
    };
    let (a, b) = (run("a.csv"), run("b.csv"));
    let rows = a.lines().count() - 1;
    let same = strip_overhead(&a) == strip_overhead(&b);
    report(
        13,
        "determinism",
        same && rows == 60,
        format!("{rows} rows, identical apart from overhead: {same}"),
    );
}
