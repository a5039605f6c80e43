//! Deterministic execution of schedules and trial metrics.
//!
//! [`execute`] replays a schedule on the problem's workers starting at
//! dispatch (the window close), paying a swap whenever a worker has to load
//! a model other than its resident one. [`evaluate`] scores the resulting
//! completion times against ground truth, and [`run_trial`] ties workload
//! generation, estimation, scheduling and evaluation together.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{AppId, LatencyMode, ModelRef, Problem, RequestId, Schedule, ThetaMap, WorkerPool};
use crate::error::{Error, Result};
use crate::schedule::{plan_timeline, validate, AccuracySource, PlanTable};
use crate::scheduling::{self, augment_short_circuit, SchedulerSpec, SchedulingContext};
use crate::scoring::{self, ThetaVector};
use crate::sneakpeek::{
    estimate_theta, make_prior, profile_estimator, DirichletBelief, EvidenceSource, KnnEstimator, PriorKind,
    SimulatedEstimator, DEFAULT_K,
};
use crate::workload::{gen_scenario, GeneratedScenario, ScenarioSpec};

// RNG streams derived from a trial seed. Workload generation uses stream 0
// and one stream per application starting at 1.
const ESTIMATION_STREAM: u64 = 1 << 32;
const PROFILING_STREAM: u64 = (1 << 32) + 1;
const OUTCOME_STREAM: u64 = (1 << 32) + 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub request: RequestId,
    pub dispatch: f64,
    pub completion: f64,
    pub worker: usize,
    pub model: ModelRef,
    pub swap_occurred: bool,
}

/// Absolute times (from the window start), in schedule order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub entries: Vec<TraceEntry>,
}

impl ExecutionTrace {
    pub fn entry(&self, id: RequestId) -> Option<&TraceEntry> {
        self.entries.iter().find(|e| e.request == id)
    }
}

/// Runs every worker's entries back to back from dispatch. Short-circuit
/// entries complete at their start and leave the resident model in place.
pub fn execute(schedule: &Schedule, problem: &Problem) -> Result<ExecutionTrace> {
    validate(schedule, problem)?;
    let table = PlanTable::build(problem, AccuracySource::Profiled, true)?;
    let planned = plan_timeline(schedule, &table, LatencyMode::SequenceAware)?;
    let entries = schedule
        .entries
        .iter()
        .zip(planned)
        .map(|(e, p)| TraceEntry {
            request: e.request,
            dispatch: problem.now,
            completion: problem.now + p.start + p.cost.total(),
            worker: e.worker,
            model: e.model,
            swap_occurred: p.cost.swapped,
        })
        .collect();
    Ok(ExecutionTrace { entries })
}

/// How realized accuracy is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutcomeMode {
    /// True-label recall of the assigned model.
    #[default]
    Expected,
    /// One Bernoulli draw per request with the true-label recall.
    Sampled { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestOutcome {
    pub request: RequestId,
    pub app: AppId,
    pub model: ModelRef,
    pub worker: usize,
    pub completion: f64,
    pub deadline: f64,
    pub accuracy: f64,
    pub utility: f64,
    pub violation_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub mean_utility: f64,
    pub mean_expected_accuracy: f64,
    pub mean_violation_ms: f64,
    pub violation_count: usize,
    /// Wall-clock estimation plus scheduling time. Not deterministic.
    pub scheduling_overhead_ms: f64,
    pub rows: Vec<RequestOutcome>,
}

impl TrialMetrics {
    /// Equality ignoring the wall-clock overhead.
    pub fn same_outcome(&self, other: &TrialMetrics) -> bool {
        self.mean_utility.to_bits() == other.mean_utility.to_bits()
            && self.mean_expected_accuracy.to_bits() == other.mean_expected_accuracy.to_bits()
            && self.mean_violation_ms.to_bits() == other.mean_violation_ms.to_bits()
            && self.violation_count == other.violation_count
            && self.rows == other.rows
    }
}

/// Scores a trace against ground truth, request by request in problem
/// order.
pub fn evaluate(trace: &ExecutionTrace, problem: &Problem, outcome: OutcomeMode) -> Result<TrialMetrics> {
    let mut rng = match outcome {
        OutcomeMode::Sampled { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(OUTCOME_STREAM);
            Some(rng)
        }
        OutcomeMode::Expected => None,
    };
    let mut rows = Vec::with_capacity(problem.requests.len());
    for req in &problem.requests {
        let entry = trace.entry(req.id).ok_or(Error::IncompleteTrace(req.id))?;
        let app = problem.apps.require(&req.app)?;
        let profile = app.profile(entry.model).ok_or(crate::error::Violation::InvalidModel {
            request: req.id,
            model: entry.model,
        })?;
        let recall = *profile
            .recall()
            .get(req.true_label.0)
            .ok_or_else(|| Error::dims(profile.label_count(), req.true_label.0 + 1))?;
        let accuracy = match rng.as_mut() {
            Some(rng) => f64::from(u8::from(rng.random_bool(recall.clamp(0.0, 1.0)))),
            None => recall,
        };
        let gamma = scoring::penalty(app.penalty(), req.deadline, entry.completion)?;
        rows.push(RequestOutcome {
            request: req.id,
            app: req.app.clone(),
            model: entry.model,
            worker: entry.worker,
            completion: entry.completion,
            deadline: req.deadline,
            accuracy,
            utility: accuracy * (1.0 - gamma),
            violation_ms: (entry.completion - req.deadline).max(0.0),
        });
    }
    let n = rows.len().max(1) as f64;
    Ok(TrialMetrics {
        mean_utility: rows.iter().map(|r| r.utility).sum::<f64>() / n,
        mean_expected_accuracy: rows.iter().map(|r| r.accuracy).sum::<f64>() / n,
        mean_violation_ms: rows.iter().map(|r| r.violation_ms).sum::<f64>() / n,
        violation_count: rows.iter().filter(|r| r.violation_ms > 0.0).count(),
        scheduling_overhead_ms: 0.0,
        rows,
    })
}

/// Where informative priors take their class frequencies from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HintSource {
    /// Label distribution of the profiling test set.
    #[default]
    TestMix,
    /// True stream distribution.
    StreamMix,
    /// The application's registered hint.
    Application,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorKind {
    /// Neighbor search over the application's corpus.
    #[default]
    Knn,
    /// Pseudo-neighbors drawn from a confusion row with this accuracy.
    Simulated { accuracy: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationConfig {
    pub k: usize,
    pub prior: PriorKind,
    pub hint: HintSource,
    pub estimator: EstimatorKind,
    /// Requests per window for strongly informative priors; the scenario's
    /// request count when absent.
    pub window_count: Option<usize>,
    pub outcome: OutcomeMode,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        EstimationConfig {
            k: DEFAULT_K,
            prior: PriorKind::Uninformative,
            hint: HintSource::TestMix,
            estimator: EstimatorKind::Knn,
            window_count: None,
            outcome: OutcomeMode::Expected,
        }
    }
}

/// Prior for one application under `config`.
pub fn app_prior(scenario: &ScenarioSpec, app: &AppId, config: &EstimationConfig) -> Result<DirichletBelief> {
    let spec = scenario
        .app(app)
        .ok_or_else(|| Error::UnknownApplication(app.0.clone()))?;
    let hint: Option<ThetaVector> = match (config.prior, config.hint) {
        (PriorKind::Uninformative, _) => None,
        (_, HintSource::TestMix) => Some(spec.test_mix()?),
        (_, HintSource::StreamMix) => Some(spec.class_mix()?),
        (_, HintSource::Application) => Some(spec.application()?.class_prior_hint().cloned().ok_or(
            Error::MissingPriorHint(" (the application registers none)"),
        )?),
    };
    let window = config.window_count.unwrap_or(scenario.request_count);
    make_prior(config.prior, spec.label_count, hint.as_ref(), Some(window))
}

fn evidence_source<'a>(
    generated: &'a GeneratedScenario,
    app: &AppId,
    label_count: usize,
    config: &EstimationConfig,
) -> Result<Box<dyn EvidenceSource + 'a>> {
    Ok(match config.estimator {
        EstimatorKind::Knn => {
            let corpus = generated
                .corpora
                .get(app)
                .ok_or_else(|| Error::UnknownApplication(app.0.clone()))?;
            Box::new(KnnEstimator {
                index: &corpus.index,
                k: config.k,
            })
        }
        EstimatorKind::Simulated { accuracy } => Box::new(SimulatedEstimator {
            accuracy,
            label_count,
            k: config.k,
        }),
    })
}

/// θ estimates for every request of a generated scenario.
pub fn estimate_all(
    generated: &GeneratedScenario,
    scenario: &ScenarioSpec,
    config: &EstimationConfig,
    seed: u64,
) -> Result<ThetaMap> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(ESTIMATION_STREAM);
    let mut thetas = ThetaMap::new();
    for req in &generated.problem.requests {
        let app = generated.problem.apps.require(&req.app)?;
        let prior = app_prior(scenario, &req.app, config)?;
        let source = evidence_source(generated, &req.app, app.label_count(), config)?;
        let theta = estimate_theta(source.as_ref(), &prior, &req.data_point, req.true_label, &mut rng)?;
        thetas.insert(req.id, theta);
    }
    Ok(thetas)
}

/// Profiles the configured estimator on every application's holdout and
/// registers it as the short-circuit variant.
pub fn register_short_circuit(
    generated: &mut GeneratedScenario,
    scenario: &ScenarioSpec,
    config: &EstimationConfig,
    seed: u64,
) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(PROFILING_STREAM);
    let ids: Vec<AppId> = generated.problem.apps.iter().map(|a| a.id().clone()).collect();
    for id in ids {
        let label_count = generated.problem.apps.require(&id)?.label_count();
        let prior = app_prior(scenario, &id, config)?;
        let profile = {
            let source = evidence_source(generated, &id, label_count, config)?;
            let holdout = &generated.corpora[&id].holdout;
            profile_estimator(format!("{id}-sneakpeek"), source.as_ref(), &prior, holdout, &mut rng)?
        };
        let app = generated.problem.apps.require(&id)?.clone();
        generated.problem.apps.insert(augment_short_circuit(app, profile)?);
    }
    Ok(())
}

/// The scheduling context `run_trial` would hand to the scheduler: the
/// generated problem on `spec.worker_count` identical workers, with
/// short-circuit variants and θ estimates when `spec` uses them.
pub fn prepare_context(
    scenario: &ScenarioSpec,
    spec: &SchedulerSpec,
    estimation: &EstimationConfig,
    seed: u64,
) -> Result<SchedulingContext> {
    prepare_timed(scenario, spec, estimation, seed).map(|(ctx, _)| ctx)
}

/// Also returns the wall-clock milliseconds spent on per-request estimation.
fn prepare_timed(
    scenario: &ScenarioSpec,
    spec: &SchedulerSpec,
    estimation: &EstimationConfig,
    seed: u64,
) -> Result<(SchedulingContext, f64)> {
    let scenario = scenario.clone().with_seed(seed);
    let mut generated = gen_scenario(&scenario)?;
    generated.problem.workers = WorkerPool::identical(spec.worker_count);
    if spec.short_circuit {
        register_short_circuit(&mut generated, &scenario, estimation, seed)?;
    }
    let started = Instant::now();
    let thetas = if spec.needs_estimates() {
        Some(estimate_all(&generated, &scenario, estimation, seed)?)
    } else {
        None
    };
    let elapsed = started.elapsed().as_secs_f64() * 1000.0;
    let ctx = SchedulingContext {
        problem: generated.problem,
        thetas,
    };
    Ok((ctx, elapsed))
}

/// Generates the scenario for `seed`, estimates and schedules as `spec`
/// requires, executes and evaluates.
pub fn run_trial(
    scenario: &ScenarioSpec,
    spec: &SchedulerSpec,
    estimation: &EstimationConfig,
    seed: u64,
) -> Result<TrialMetrics> {
    let (ctx, estimation_ms) = prepare_timed(scenario, spec, estimation, seed)?;
    let started = Instant::now();
    let schedule = scheduling::schedule(spec, &ctx)?;
    let overhead = estimation_ms + started.elapsed().as_secs_f64() * 1000.0;

    let trace = execute(&schedule, &ctx.problem)?;
    let outcome = match estimation.outcome {
        OutcomeMode::Expected => OutcomeMode::Expected,
        OutcomeMode::Sampled { seed: s } => OutcomeMode::Sampled { seed: s ^ seed },
    };
    let mut metrics = evaluate(&trace, &ctx.problem, outcome)?;
    metrics.scheduling_overhead_ms = overhead;
    Ok(metrics)
}
