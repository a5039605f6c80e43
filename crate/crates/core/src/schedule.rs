//! Schedule semantics: start times, constraint validation and schedule-level
//! utility.
//!
//! [`PlanTable`] flattens a [`Problem`] into per-request rows of candidate
//! models with their accuracies and latencies. The schedulers, the oracle
//! and [`schedule_utility`] all evaluate timing through [`WorkerState`], so
//! planning and evaluation agree on what an entry costs.

use std::collections::{HashMap, HashSet};

use crate::domain::{ModelRef, Problem, RequestId, Schedule, ThetaMap, LatencyMode};
use crate::error::{Error, Result, Violation};
use crate::scoring::{self, PenaltySpec};

/// Where per-request model accuracy comes from.
#[derive(Debug, Clone, Copy)]
pub enum AccuracySource<'a> {
    /// Static profiled accuracy of every model.
    Profiled,
    /// θ-weighted recall per request. The short-circuit variant always keeps
    /// its profiled accuracy.
    Dynamic(&'a ThetaMap),
}

/// One schedulable candidate for a request.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelOption {
    pub model: ModelRef,
    pub accuracy: f64,
    pub infer: f64,
    pub swap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanRow {
    pub id: RequestId,
    pub app: usize,
    pub arrival: f64,
    pub deadline: f64,
    pub penalty: PenaltySpec,
    pub options: Vec<ModelOption>,
}

impl PlanRow {
    pub fn option(&self, model: ModelRef) -> Option<&ModelOption> {
        self.options.iter().find(|o| o.model == model)
    }

    /// Population variance of the candidate accuracies.
    pub fn accuracy_variance(&self) -> f64 {
        let n = self.options.len() as f64;
        let mean = self.options.iter().map(|o| o.accuracy).sum::<f64>() / n;
        self.options.iter().map(|o| (o.accuracy - mean).powi(2)).sum::<f64>() / n
    }
}

/// Flattened view of a problem under one accuracy source.
#[derive(Debug, Clone)]
pub struct PlanTable {
    pub now: f64,
    pub rows: Vec<PlanRow>,
    index: HashMap<RequestId, usize>,
    latency_scale: Vec<f64>,
    batch_efficiency: f64,
}

impl PlanTable {
    /// `short_circuit` controls whether an application's short-circuit
    /// variant (when registered) is offered as a candidate.
    pub fn build(problem: &Problem, source: AccuracySource<'_>, short_circuit: bool) -> Result<Self> {
        let mut rows = Vec::with_capacity(problem.requests.len());
        let mut index = HashMap::with_capacity(problem.requests.len());
        for (pos, req) in problem.requests.iter().enumerate() {
            let app = problem.apps.require(&req.app)?;
            let ordinal = problem.apps.ordinal(&req.app).expect("app present");
            let theta = match source {
                AccuracySource::Profiled => None,
                AccuracySource::Dynamic(thetas) => Some(
                    thetas
                        .get(&req.id)
                        .ok_or_else(|| Error::invalid(format!("no theta estimate for {}", req.id)))?,
                ),
            };
            let mut options = Vec::new();
            for (model, profile) in app.candidates() {
                if model == ModelRef::SneakPeek && !short_circuit {
                    continue;
                }
                let accuracy = match (model, theta) {
                    (ModelRef::Variant(_), Some(theta)) => {
                        scoring::theta_accuracy(theta, profile.recall())?
                    }
                    _ => profile.accuracy(),
                };
                options.push(ModelOption {
                    model,
                    accuracy,
                    infer: profile.infer_latency(),
                    swap: profile.swap_latency(),
                });
            }
            if index.insert(req.id, pos).is_some() {
                return Err(Error::invalid(format!("duplicate request id {}", req.id)));
            }
            rows.push(PlanRow {
                id: req.id,
                app: ordinal,
                arrival: req.arrival,
                deadline: req.deadline,
                penalty: app.penalty(),
                options,
            });
        }
        Ok(PlanTable {
            now: problem.now,
            rows,
            index,
            latency_scale: (0..problem.workers.len()).map(|k| problem.workers.scale(k)).collect(),
            batch_efficiency: problem.workers.batch_efficiency(),
        })
    }

    pub fn position(&self, id: RequestId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn row(&self, id: RequestId) -> Option<&PlanRow> {
        self.position(id).map(|p| &self.rows[p])
    }

    pub fn worker_count(&self) -> usize {
        self.latency_scale.len()
    }

    pub fn fresh_workers(&self) -> Vec<WorkerState> {
        self.latency_scale
            .iter()
            .map(|&scale| WorkerState::new(scale, self.batch_efficiency))
            .collect()
    }

    /// `(1 + Var[accuracy]) · exp(−d̃)` with d̃ the non-negative time to
    /// deadline in seconds.
    pub fn priority(&self, pos: usize) -> f64 {
        let row = &self.rows[pos];
        let slack_s = (row.deadline - self.now).max(0.0) / 1000.0;
        (1.0 + row.accuracy_variance()) * (-slack_s).exp()
    }

    /// Utility of running option `opt` of row `pos` on `worker` next.
    pub fn utility_next(&self, pos: usize, opt: usize, worker: &WorkerState, mode: LatencyMode) -> f64 {
        let row = &self.rows[pos];
        let option = &row.options[opt];
        let cost = worker.cost(row.app, option, mode);
        let start = self.now + worker.busy;
        scoring::utility(option.accuracy, row.penalty, row.deadline, start, cost.total())
            .expect("deadlines are validated positive")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntryCost {
    pub swap: f64,
    pub infer: f64,
    /// The entry loaded a model that was not resident.
    pub swapped: bool,
}

impl EntryCost {
    pub fn total(&self) -> f64 {
        self.swap + self.infer
    }
}

/// Planned state of one worker: busy time since dispatch and the resident
/// model, identified by `(application ordinal, variant index)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkerState {
    pub busy: f64,
    pub resident: Option<(usize, usize)>,
    scale: f64,
    batch_efficiency: f64,
}

impl WorkerState {
    pub fn new(scale: f64, batch_efficiency: f64) -> Self {
        WorkerState {
            busy: 0.0,
            resident: None,
            scale,
            batch_efficiency,
        }
    }

    /// Short-circuit entries cost nothing and leave the resident model alone.
    pub fn cost(&self, app: usize, option: &ModelOption, mode: LatencyMode) -> EntryCost {
        let ModelRef::Variant(index) = option.model else {
            return EntryCost {
                swap: 0.0,
                infer: 0.0,
                swapped: false,
            };
        };
        let resident = self.resident == Some((app, index));
        let swap = match mode {
            LatencyMode::AlwaysSwap => option.swap,
            LatencyMode::SequenceAware if resident => 0.0,
            LatencyMode::SequenceAware => option.swap,
        };
        let batch = if resident && mode == LatencyMode::SequenceAware {
            self.batch_efficiency
        } else {
            1.0
        };
        EntryCost {
            swap: swap * self.scale,
            infer: option.infer * self.scale * batch,
            swapped: !resident,
        }
    }

    /// Appends an entry; returns its cost.
    pub fn advance(&mut self, app: usize, option: &ModelOption, mode: LatencyMode) -> EntryCost {
        let cost = self.cost(app, option, mode);
        self.busy += cost.total();
        if let ModelRef::Variant(index) = option.model {
            self.resident = Some((app, index));
        }
        cost
    }
}

/// Checks the schedule covers every request exactly once with valid models
/// and workers.
pub fn validate(schedule: &Schedule, problem: &Problem) -> Result<(), Violation> {
    validate_inner(schedule, problem, true)
}

/// Like [`validate`] but allows requests to be left unscheduled.
pub fn validate_partial(schedule: &Schedule, problem: &Problem) -> Result<(), Violation> {
    validate_inner(schedule, problem, false)
}

fn validate_inner(schedule: &Schedule, problem: &Problem, complete: bool) -> Result<(), Violation> {
    let mut seen = HashSet::with_capacity(schedule.len());
    for entry in &schedule.entries {
        let Some(req) = problem.request(entry.request) else {
            return Err(Violation::UnknownRequest(entry.request));
        };
        if !seen.insert(entry.request) {
            return Err(Violation::DuplicateRequest(entry.request));
        }
        let valid_model = problem
            .apps
            .get(&req.app)
            .is_some_and(|app| app.profile(entry.model).is_some());
        if !valid_model {
            return Err(Violation::InvalidModel {
                request: entry.request,
                model: entry.model,
            });
        }
        if entry.worker >= problem.workers.len() {
            return Err(Violation::InvalidWorker {
                request: entry.request,
                worker: entry.worker,
                workers: problem.workers.len(),
            });
        }
    }
    if complete {
        if let Some(missing) = problem.requests.iter().find(|r| !seen.contains(&r.id)) {
            return Err(Violation::MissingRequest(missing.id));
        }
    }
    Ok(())
}

/// Planned per-entry timing of a schedule, relative to dispatch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannedEntry {
    pub start: f64,
    pub cost: EntryCost,
}

/// Walks the schedule over fresh workers. `table` must contain every
/// scheduled model as an option.
pub fn plan_timeline(schedule: &Schedule, table: &PlanTable, mode: LatencyMode) -> Result<Vec<PlannedEntry>> {
    let mut workers = table.fresh_workers();
    let mut out = Vec::with_capacity(schedule.len());
    for entry in &schedule.entries {
        let pos = table
            .position(entry.request)
            .ok_or(Violation::UnknownRequest(entry.request))?;
        let row = &table.rows[pos];
        let option = row.option(entry.model).ok_or(Violation::InvalidModel {
            request: entry.request,
            model: entry.model,
        })?;
        let worker = workers.get_mut(entry.worker).ok_or(Violation::InvalidWorker {
            request: entry.request,
            worker: entry.worker,
            workers: table.worker_count(),
        })?;
        let start = worker.busy;
        let cost = worker.advance(row.app, option, mode);
        out.push(PlannedEntry { start, cost });
    }
    Ok(out)
}

/// Time from dispatch until `id` starts: the effective latencies of every
/// entry ahead of it on the same worker.
pub fn start_time(schedule: &Schedule, id: RequestId, problem: &Problem, mode: LatencyMode) -> Result<f64> {
    let at = schedule
        .entries
        .iter()
        .position(|e| e.request == id)
        .ok_or(Error::NotScheduled(id))?;
    validate_partial(schedule, problem)?;
    let table = PlanTable::build(problem, AccuracySource::Profiled, true)?;
    let planned = plan_timeline(schedule, &table, mode)?;
    Ok(planned[at].start)
}

/// Mean planned utility over all requests of the problem; unscheduled
/// requests contribute zero.
pub fn schedule_utility(
    schedule: &Schedule,
    problem: &Problem,
    source: AccuracySource<'_>,
    mode: LatencyMode,
) -> Result<f64> {
    validate_partial(schedule, problem)?;
    if problem.requests.is_empty() {
        return Ok(0.0);
    }
    let table = PlanTable::build(problem, source, true)?;
    Ok(table_utility(schedule, &table, mode)? / problem.requests.len() as f64)
}

/// Sum of planned utilities of the scheduled entries.
pub(crate) fn table_utility(schedule: &Schedule, table: &PlanTable, mode: LatencyMode) -> Result<f64> {
    let planned = plan_timeline(schedule, table, mode)?;
    let mut total = 0.0;
    for (entry, plan) in schedule.entries.iter().zip(&planned) {
        let row = table.row(entry.request).expect("planned entries exist");
        let option = row.option(entry.model).expect("planned options exist");
        total += scoring::utility(
            option.accuracy,
            row.penalty,
            row.deadline,
            table.now + plan.start,
            plan.cost.total(),
        )?;
    }
    Ok(total)
}
