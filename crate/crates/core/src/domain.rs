//! Domain types shared by the estimator, the schedulers and the simulator.
//!
//! All times are milliseconds as `f64`. Request arrival and deadline
//! timestamps are measured from the start of the scheduling window; a
//! [`Problem`] is dispatched to the workers at `now` (the window close).

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::{self, PenaltySpec, ThetaVector};

/// Index of a class in an application's label set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClassLabel(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RequestId(pub u64);

impl fmt::Display for RequestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AppId(pub String);

impl AppId {
    pub fn new(id: impl Into<String>) -> Self {
        AppId(id.into())
    }
}

impl fmt::Display for AppId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Which candidate a schedule entry runs: a registered variant (index into
/// the application's model list) or the short-circuit estimator itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelRef {
    Variant(usize),
    SneakPeek,
}

impl fmt::Display for ModelRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelRef::Variant(i) => write!(f, "m{i}"),
            ModelRef::SneakPeek => f.write_str("sneakpeek"),
        }
    }
}

/// Everything the scheduler knows about one model variant.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelProfile {
    id: String,
    confusion: Vec<Vec<f64>>,
    infer_latency: f64,
    swap_latency: f64,
    accuracy: f64,
    recall: Vec<f64>,
}

impl ModelProfile {
    /// Builds a profile from a confusion matrix (rows = true label).
    pub fn new(
        id: impl Into<String>,
        confusion: Vec<Vec<f64>>,
        infer_latency: f64,
        swap_latency: f64,
    ) -> Result<Self> {
        let n = confusion.len();
        if n == 0 {
            return Err(Error::EmptyConfusion);
        }
        for row in &confusion {
            if row.len() != n {
                return Err(Error::dims(n, row.len()));
            }
            if row.iter().any(|&z| !(z >= 0.0) || !z.is_finite()) {
                return Err(Error::invalid("confusion counts must be finite and non-negative"));
            }
            if row.iter().sum::<f64>() <= 0.0 {
                return Err(Error::invalid("confusion matrix rows must have positive sums"));
            }
        }
        if !(infer_latency > 0.0) {
            return Err(Error::invalid(format!(
                "inference latency must be positive, got {infer_latency}"
            )));
        }
        Self::with_latencies(id.into(), confusion, infer_latency, swap_latency)
    }

    /// Profile for a short-circuit estimator: zero inference and swap latency.
    pub fn zero_latency(id: impl Into<String>, confusion: Vec<Vec<f64>>) -> Result<Self> {
        let n = confusion.len();
        if n == 0 {
            return Err(Error::EmptyConfusion);
        }
        for row in &confusion {
            if row.len() != n {
                return Err(Error::dims(n, row.len()));
            }
            if row.iter().sum::<f64>() <= 0.0 {
                return Err(Error::invalid("confusion matrix rows must have positive sums"));
            }
        }
        Self::with_latencies(id.into(), confusion, 0.0, 0.0)
    }

    fn with_latencies(
        id: String,
        confusion: Vec<Vec<f64>>,
        infer_latency: f64,
        swap_latency: f64,
    ) -> Result<Self> {
        if !(swap_latency >= 0.0) {
            return Err(Error::invalid(format!(
                "swap latency must be non-negative, got {swap_latency}"
            )));
        }
        let accuracy = scoring::accuracy_from_confusion(&confusion)?;
        let recall = confusion
            .iter()
            .enumerate()
            .map(|(i, row)| row[i] / row.iter().sum::<f64>())
            .collect();
        Ok(ModelProfile {
            id,
            confusion,
            infer_latency,
            swap_latency,
            accuracy,
            recall,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn confusion(&self) -> &[Vec<f64>] {
        &self.confusion
    }

    pub fn infer_latency(&self) -> f64 {
        self.infer_latency
    }

    pub fn swap_latency(&self) -> f64 {
        self.swap_latency
    }

    /// trace(Z) / sum(Z).
    pub fn accuracy(&self) -> f64 {
        self.accuracy
    }

    pub fn recall(&self) -> &[f64] {
        &self.recall
    }

    pub fn label_count(&self) -> usize {
        self.confusion.len()
    }

    /// Row frequencies of the profiling test set.
    pub fn test_frequencies(&self) -> ThetaVector {
        ThetaVector::from_weights(self.confusion.iter().map(|r| r.iter().sum::<f64>()).collect())
            .expect("validated confusion rows have positive sums")
    }
}

/// A registered application: its label space, model variants and penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct Application {
    id: AppId,
    label_count: usize,
    models: Vec<ModelProfile>,
    penalty: PenaltySpec,
    class_prior_hint: Option<ThetaVector>,
    short_circuit: Option<ModelProfile>,
}

impl Application {
    pub fn new(
        id: AppId,
        label_count: usize,
        models: Vec<ModelProfile>,
        penalty: PenaltySpec,
        class_prior_hint: Option<ThetaVector>,
    ) -> Result<Self> {
        if label_count == 0 {
            return Err(Error::invalid("application needs at least one label"));
        }
        if models.is_empty() {
            return Err(Error::invalid(format!("application {id} has no models")));
        }
        for m in &models {
            if m.label_count() != label_count {
                return Err(Error::dims(label_count, m.label_count()));
            }
        }
        if let Some(hint) = &class_prior_hint {
            if hint.len() != label_count {
                return Err(Error::dims(label_count, hint.len()));
            }
        }
        Ok(Application {
            id,
            label_count,
            models,
            penalty,
            class_prior_hint,
            short_circuit: None,
        })
    }

    pub fn id(&self) -> &AppId {
        &self.id
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    pub fn models(&self) -> &[ModelProfile] {
        &self.models
    }

    pub fn penalty(&self) -> PenaltySpec {
        self.penalty
    }

    pub fn class_prior_hint(&self) -> Option<&ThetaVector> {
        self.class_prior_hint.as_ref()
    }

    pub fn short_circuit(&self) -> Option<&ModelProfile> {
        self.short_circuit.as_ref()
    }

    pub fn with_penalty(mut self, penalty: PenaltySpec) -> Self {
        self.penalty = penalty;
        self
    }

    pub(crate) fn set_short_circuit(&mut self, profile: ModelProfile) -> Result<()> {
        if self.short_circuit.is_some() {
            return Err(Error::DuplicateSneakPeek(self.id.0.clone()));
        }
        if profile.label_count() != self.label_count {
            return Err(Error::dims(self.label_count, profile.label_count()));
        }
        self.short_circuit = Some(profile);
        Ok(())
    }

    pub fn profile(&self, model: ModelRef) -> Option<&ModelProfile> {
        match model {
            ModelRef::Variant(i) => self.models.get(i),
            ModelRef::SneakPeek => self.short_circuit.as_ref(),
        }
    }

    /// Registered variants in list order, followed by the short-circuit
    /// variant when present.
    pub fn candidates(&self) -> impl Iterator<Item = (ModelRef, &ModelProfile)> {
        self.models
            .iter()
            .enumerate()
            .map(|(i, m)| (ModelRef::Variant(i), m))
            .chain(self.short_circuit.iter().map(|m| (ModelRef::SneakPeek, m)))
    }
}

/// Applications keyed by id, iterated in id order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AppSet {
    apps: BTreeMap<AppId, Application>,
}

impl AppSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, app: Application) -> Option<Application> {
        self.apps.insert(app.id.clone(), app)
    }

    pub fn get(&self, id: &AppId) -> Option<&Application> {
        self.apps.get(id)
    }

    pub fn get_mut(&mut self, id: &AppId) -> Option<&mut Application> {
        self.apps.get_mut(id)
    }

    pub fn require(&self, id: &AppId) -> Result<&Application> {
        self.get(id).ok_or_else(|| Error::UnknownApplication(id.0.clone()))
    }

    /// Position of `id` in iteration order; stable for an unmodified set.
    pub fn ordinal(&self, id: &AppId) -> Option<usize> {
        self.apps.keys().position(|k| k == id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Application> {
        self.apps.values()
    }

    pub fn len(&self) -> usize {
        self.apps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.apps.is_empty()
    }
}

impl FromIterator<Application> for AppSet {
    fn from_iter<I: IntoIterator<Item = Application>>(iter: I) -> Self {
        let mut set = AppSet::new();
        for app in iter {
            set.insert(app);
        }
        set
    }
}

/// One inference demand.
#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub id: RequestId,
    pub app: AppId,
    pub arrival: f64,
    /// Absolute deadline, measured from the window start.
    pub deadline: f64,
    pub data_point: Vec<f64>,
    /// Ground truth. Only the simulator's metrics may read this.
    pub true_label: ClassLabel,
}

impl Request {
    pub fn new(
        id: RequestId,
        app: AppId,
        arrival: f64,
        deadline: f64,
        data_point: Vec<f64>,
        true_label: ClassLabel,
    ) -> Result<Self> {
        if !(deadline > arrival) {
            return Err(Error::invalid(format!(
                "request {id}: deadline {deadline} must follow arrival {arrival}"
            )));
        }
        Ok(Request {
            id,
            app,
            arrival,
            deadline,
            data_point,
            true_label,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub request: RequestId,
    pub model: ModelRef,
    pub worker: usize,
}

/// Execution order with a model (and worker) per request. An entry's
/// position among the entries of its worker is its execution order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Schedule {
    pub entries: Vec<ScheduleEntry>,
}

impl Schedule {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, request: RequestId, model: ModelRef, worker: usize) {
        self.entries.push(ScheduleEntry {
            request,
            model,
            worker,
        });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, id: RequestId) -> Option<&ScheduleEntry> {
        self.entries.iter().find(|e| e.request == id)
    }

    /// Entries of one worker, in execution order.
    pub fn worker_entries(&self, worker: usize) -> impl Iterator<Item = &ScheduleEntry> {
        self.entries.iter().filter(move |e| e.worker == worker)
    }
}

/// How planning charges model swaps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatencyMode {
    /// Every entry pays `infer + swap`.
    AlwaysSwap,
    /// Swap is paid only when the model differs from the resident one.
    #[default]
    SequenceAware,
}

/// Worker latency characteristics. `latency_scale[k]` multiplies every
/// profiled latency on worker `k`; `batch_efficiency` multiplies the
/// inference latency of an entry that reuses the resident model.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkerPool {
    latency_scale: Vec<f64>,
    batch_efficiency: f64,
}

impl WorkerPool {
    pub fn identical(count: usize) -> Self {
        WorkerPool {
            latency_scale: vec![1.0; count.max(1)],
            batch_efficiency: 1.0,
        }
    }

    pub fn with_scales(latency_scale: Vec<f64>) -> Result<Self> {
        if latency_scale.is_empty() || latency_scale.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::invalid("worker latency scales must be positive"));
        }
        Ok(WorkerPool {
            latency_scale,
            batch_efficiency: 1.0,
        })
    }

    pub fn with_batch_efficiency(mut self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor <= 1.0) {
            return Err(Error::invalid(format!(
                "batch efficiency must lie in (0, 1], got {factor}"
            )));
        }
        self.batch_efficiency = factor;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.latency_scale.len()
    }

    pub fn is_empty(&self) -> bool {
        self.latency_scale.is_empty()
    }

    pub fn scale(&self, worker: usize) -> f64 {
        self.latency_scale[worker]
    }

    pub fn batch_efficiency(&self) -> f64 {
        self.batch_efficiency
    }
}

impl Default for WorkerPool {
    fn default() -> Self {
        WorkerPool::identical(1)
    }
}

/// A batch of requests to be scheduled at `now`.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub now: f64,
    pub requests: Vec<Request>,
    pub apps: AppSet,
    pub workers: WorkerPool,
}

impl Problem {
    pub fn new(now: f64, requests: Vec<Request>, apps: AppSet) -> Self {
        Problem {
            now,
            requests,
            apps,
            workers: WorkerPool::default(),
        }
    }

    pub fn with_workers(mut self, workers: WorkerPool) -> Self {
        self.workers = workers;
        self
    }

    pub fn request(&self, id: RequestId) -> Option<&Request> {
        self.requests.iter().find(|r| r.id == id)
    }
}

/// Per-request class-frequency estimates.
pub type ThetaMap = BTreeMap<RequestId, ThetaVector>;
