//! Request schedulers.
//!
//! Flat schedulers order requests (FCFS, EDF or priority) and then pick a
//! model per request. Grouped schedulers partition requests by application,
//! optionally split groups by their estimated label, and run each group
//! contiguously on one model. Every scheduler places work on the worker
//! that becomes free first; with a single worker this is the plain
//! sequential schedule.

mod flat;
mod grouped;
mod order;

use serde::{Deserialize, Serialize};

pub use flat::{schedule_flat, select_model};
pub use grouped::{form_groups, schedule_grouped};
pub use order::{order_requests, priority_group, priority_request};
pub(crate) use order::sort_by_priority;

use crate::domain::{Application, LatencyMode, ModelProfile, Problem, Schedule, ThetaMap};
use crate::error::{Error, Result};
use crate::schedule::{AccuracySource, PlanTable};

/// Request-level ordering policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestOrder {
    Fcfs,
    Edf,
    Priority,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    MaxAccuracy,
    LocallyOptimal,
    Grouped,
    GroupedDataAware,
}

impl Selection {
    pub fn is_grouped(self) -> bool {
        matches!(self, Selection::Grouped | Selection::GroupedDataAware)
    }
}

/// Which accuracy the scheduler plans with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccuracyMode {
    Profiled,
    Dynamic,
}

/// Group count at or below which grouped scheduling searches exhaustively.
pub const DEFAULT_BRUTE_FORCE_THRESHOLD: usize = 3;

/// Names accepted by [`SchedulerSpec::preset`], in reporting order.
pub const PRESET_NAMES: [&str; 5] = ["maxacc-edf", "lo-edf", "lo-priority", "grouped", "sneakpeek"];

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SchedulerSpec {
    /// Ignored by the grouped selections, which order groups by priority.
    pub ordering: RequestOrder,
    pub selection: Selection,
    pub brute_force_threshold: usize,
    pub short_circuit: bool,
    pub accuracy_source: AccuracyMode,
    pub worker_count: usize,
    pub planning: LatencyMode,
}

impl SchedulerSpec {
    pub fn new(ordering: RequestOrder, selection: Selection) -> Self {
        SchedulerSpec {
            ordering,
            selection,
            brute_force_threshold: DEFAULT_BRUTE_FORCE_THRESHOLD,
            short_circuit: false,
            accuracy_source: AccuracyMode::Profiled,
            worker_count: 1,
            planning: LatencyMode::SequenceAware,
        }
    }

    /// The evaluation baselines plus the full data-aware scheduler.
    pub fn preset(name: &str) -> Result<Self> {
        let spec = match name {
            "maxacc-edf" => Self::new(RequestOrder::Edf, Selection::MaxAccuracy),
            "lo-edf" => Self::new(RequestOrder::Edf, Selection::LocallyOptimal),
            "lo-priority" => Self::new(RequestOrder::Priority, Selection::LocallyOptimal),
            "grouped" => Self::new(RequestOrder::Priority, Selection::Grouped),
            "sneakpeek" => SchedulerSpec {
                short_circuit: true,
                accuracy_source: AccuracyMode::Dynamic,
                ..Self::new(RequestOrder::Priority, Selection::GroupedDataAware)
            },
            other => return Err(Error::invalid(format!("unknown scheduler preset `{other}`"))),
        };
        Ok(spec)
    }

    pub fn with_workers(mut self, worker_count: usize) -> Self {
        self.worker_count = worker_count;
        self
    }

    pub fn with_threshold(mut self, tau: usize) -> Self {
        self.brute_force_threshold = tau;
        self
    }

    /// True when the scheduler needs per-request θ estimates.
    pub fn needs_estimates(&self) -> bool {
        self.accuracy_source == AccuracyMode::Dynamic || self.selection == Selection::GroupedDataAware
    }
}

/// Everything a scheduler sees for one window. Short-circuit profiles live
/// on the applications (see [`augment_short_circuit`]).
#[derive(Debug, Clone)]
pub struct SchedulingContext {
    pub problem: Problem,
    pub thetas: Option<ThetaMap>,
}

impl SchedulingContext {
    pub fn new(problem: Problem) -> Self {
        SchedulingContext { problem, thetas: None }
    }

    pub fn with_thetas(mut self, thetas: ThetaMap) -> Self {
        self.thetas = Some(thetas);
        self
    }

    pub(crate) fn accuracy_source(&self, mode: AccuracyMode) -> Result<AccuracySource<'_>> {
        match mode {
            AccuracyMode::Profiled => Ok(AccuracySource::Profiled),
            AccuracyMode::Dynamic => self
                .thetas
                .as_ref()
                .map(AccuracySource::Dynamic)
                .ok_or_else(|| Error::invalid("dynamic accuracy requires θ estimates")),
        }
    }

    pub(crate) fn plan(&self, spec: &SchedulerSpec) -> Result<PlanTable> {
        if spec.worker_count != self.problem.workers.len() {
            return Err(Error::invalid(format!(
                "scheduler expects {} workers, problem has {}",
                spec.worker_count,
                self.problem.workers.len()
            )));
        }
        PlanTable::build(&self.problem, self.accuracy_source(spec.accuracy_source)?, spec.short_circuit)
    }
}

/// Runs whichever scheduler `spec` describes.
pub fn schedule(spec: &SchedulerSpec, ctx: &SchedulingContext) -> Result<Schedule> {
    if spec.selection.is_grouped() {
        schedule_grouped(spec, ctx)
    } else {
        schedule_flat(spec, ctx)
    }
}

/// Registers a zero-latency short-circuit variant on `app`. It is always
/// planned with its profiled accuracy.
pub fn augment_short_circuit(mut app: Application, profile: ModelProfile) -> Result<Application> {
    if profile.infer_latency() != 0.0 || profile.swap_latency() != 0.0 {
        return Err(Error::invalid("short-circuit profile must have zero latencies"));
    }
    app.set_short_circuit(profile)?;
    Ok(app)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::AppId;
    use crate::scoring::PenaltySpec;

    fn profile(acc: f64, infer: f64) -> ModelProfile {
        let hit = acc * 100.0;
        ModelProfile::new("m", vec![vec![hit, 100.0 - hit], vec![100.0 - hit, hit]], infer, 0.0).unwrap()
    }

    #[test]
    fn presets_parse() {
        for name in PRESET_NAMES {
            SchedulerSpec::preset(name).unwrap();
        }
        assert!(SchedulerSpec::preset("nope").is_err());
        let sp = SchedulerSpec::preset("sneakpeek").unwrap();
        assert!(sp.short_circuit && sp.needs_estimates());
        assert!(!SchedulerSpec::preset("grouped").unwrap().needs_estimates());
    }

    #[test]
    fn augment_adds_one_candidate() {
        let app = Application::new(
            AppId::new("a"),
            2,
            vec![profile(0.8, 10.0), profile(0.7, 5.0)],
            PenaltySpec::step(),
            None,
        )
        .unwrap();
        let sc = ModelProfile::zero_latency("sp", vec![vec![6.0, 4.0], vec![4.0, 6.0]]).unwrap();
        let app = augment_short_circuit(app, sc.clone()).unwrap();
        assert_eq!(app.candidates().count(), 3);
        assert!(matches!(augment_short_circuit(app, sc), Err(Error::DuplicateSneakPeek(_))));
    }

    #[test]
    fn augment_rejects_latency() {
        let app = Application::new(AppId::new("a"), 2, vec![profile(0.8, 10.0)], PenaltySpec::step(), None).unwrap();
        assert!(augment_short_circuit(app, profile(0.6, 1.0)).is_err());
    }
}
