//! Seeded synthetic scenarios.
//!
//! Each application gets a class-skewed label stream, isotropic Gaussian
//! feature clusters (one per class) for the neighbor estimator, and model
//! profiles whose confusion matrices are synthesized from target accuracies.
//! Profiles are measured on a balanced test set while the stream is skewed,
//! so profiled accuracy and the accuracy actually delivered differ.

use std::collections::BTreeMap;

use rand::distr::{Distribution, Uniform, weighted::WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::{AppId, AppSet, Application, ClassLabel, ModelProfile, Problem, Request, RequestId};
use crate::error::{Error, Result};
use crate::scoring::{PenaltySpec, ThetaVector};
use crate::sneakpeek::NeighborIndex;

/// Observations per confusion row for a balanced test set.
const ROW_TOTAL: f64 = 1000.0;
/// Deadline offsets never fall below this.
const MIN_OFFSET_MS: f64 = 1.0;

pub const BUILTIN_NAMES: [&str; 4] = ["fall", "voice", "heart", "default_trio"];

/// Per-request deadline offset from arrival.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeadlineDist {
    /// Uniform on `[mean/2, 3·mean/2]`.
    Uniform { mean: f64 },
    Normal { mean: f64, sd: f64 },
}

impl DeadlineDist {
    pub fn mean(&self) -> f64 {
        match *self {
            DeadlineDist::Uniform { mean } | DeadlineDist::Normal { mean, .. } => mean,
        }
    }

    pub fn with_mean(self, mean: f64) -> Self {
        match self {
            DeadlineDist::Uniform { .. } => DeadlineDist::Uniform { mean },
            DeadlineDist::Normal { sd, .. } => DeadlineDist::Normal { mean, sd },
        }
    }

    fn sampler(&self) -> Result<OffsetSampler> {
        match *self {
            DeadlineDist::Uniform { mean } if mean > 0.0 && mean.is_finite() => {
                Ok(OffsetSampler::Uniform(Uniform::new_inclusive(0.5 * mean, 1.5 * mean).map_err(gen_err)?))
            }
            DeadlineDist::Normal { mean, sd } if mean > 0.0 && mean.is_finite() && sd >= 0.0 && sd.is_finite() => {
                Ok(OffsetSampler::Normal(Normal::new(mean, sd).map_err(gen_err)?))
            }
            other => Err(Error::Gen(format!("invalid deadline distribution {other:?}"))),
        }
    }
}

enum OffsetSampler {
    Uniform(Uniform<f64>),
    Normal(Normal<f64>),
}

impl OffsetSampler {
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let raw = match self {
            OffsetSampler::Uniform(d) => d.sample(rng),
            OffsetSampler::Normal(d) => d.sample(rng),
        };
        raw.max(MIN_OFFSET_MS)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub id: String,
    pub accuracy: f64,
    pub infer_latency: f64,
    pub swap_latency: f64,
}

impl ModelSpec {
    pub fn new(id: &str, accuracy: f64, infer_latency: f64, swap_latency: f64) -> Self {
        ModelSpec {
            id: id.to_string(),
            accuracy,
            infer_latency,
            swap_latency,
        }
    }
}

/// Three models around a mean: `mean·(1−spread)`, `mean`, `mean·(1+spread)`
/// for accuracy and inference latency alike. Swap latency is shared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceSuite {
    pub mean_accuracy: f64,
    pub mean_latency: f64,
    pub swap_latency: f64,
    pub spread_pct: f64,
}

impl VarianceSuite {
    pub fn models(&self) -> Result<Vec<ModelSpec>> {
        if !(self.spread_pct >= 0.0 && self.spread_pct < 1.0) {
            return Err(Error::Gen(format!("spread_pct must lie in [0, 1), got {}", self.spread_pct)));
        }
        let s = self.spread_pct;
        Ok([("low", 1.0 - s), ("mean", 1.0), ("high", 1.0 + s)]
            .into_iter()
            .map(|(tag, f)| {
                ModelSpec::new(
                    &format!("suite-{tag}"),
                    (self.mean_accuracy * f).clamp(0.0, 1.0),
                    self.mean_latency * f,
                    self.swap_latency,
                )
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSource {
    Explicit(Vec<ModelSpec>),
    Variance(VarianceSuite),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppSpec {
    pub id: String,
    pub label_count: usize,
    /// True label distribution of the request stream.
    pub class_mix: Vec<f64>,
    /// Label distribution of the profiling test set; balanced when absent.
    #[serde(default)]
    pub test_mix: Option<Vec<f64>>,
    #[serde(default = "default_separation")]
    pub cluster_separation: f64,
    /// Defaults to `label_count`; must be at least that.
    #[serde(default)]
    pub feature_dim: Option<usize>,
    pub models: ModelSource,
    #[serde(default = "default_corpus_size")]
    pub corpus_size: usize,
    #[serde(default = "default_holdout_size")]
    pub holdout_size: usize,
    #[serde(default = "default_penalty")]
    pub penalty: PenaltySpec,
    /// Per-class recall offset: `±recall_skew` alternating over classes,
    /// phase-shifted by model index, so the mean recall is unchanged.
    #[serde(default)]
    pub recall_skew: f64,
    #[serde(default)]
    pub class_prior_hint: Option<Vec<f64>>,
}

fn default_separation() -> f64 {
    4.0
}

fn default_corpus_size() -> usize {
    210
}

fn default_holdout_size() -> usize {
    140
}

fn default_penalty() -> PenaltySpec {
    PenaltySpec::sigmoid()
}

impl AppSpec {
    pub fn feature_dim(&self) -> usize {
        self.feature_dim.unwrap_or(self.label_count)
    }

    pub fn class_mix(&self) -> Result<ThetaVector> {
        mix_vector(&self.class_mix, self.label_count, "class_mix")
    }

    pub fn test_mix(&self) -> Result<ThetaVector> {
        match &self.test_mix {
            Some(m) => mix_vector(m, self.label_count, "test_mix"),
            None => Ok(ThetaVector::uniform(self.label_count)),
        }
    }

    pub fn model_specs(&self) -> Result<Vec<ModelSpec>> {
        match &self.models {
            ModelSource::Explicit(m) => Ok(m.clone()),
            ModelSource::Variance(suite) => suite.models(),
        }
    }

    /// Replaces the models with a variance suite centred on their mean.
    pub fn to_variance_suite(&mut self, spread_pct: f64) -> Result<()> {
        let models = self.model_specs()?;
        if models.is_empty() {
            return Err(Error::Gen(format!("application {} has no models", self.id)));
        }
        let n = models.len() as f64;
        self.models = ModelSource::Variance(VarianceSuite {
            mean_accuracy: models.iter().map(|m| m.accuracy).sum::<f64>() / n,
            mean_latency: models.iter().map(|m| m.infer_latency).sum::<f64>() / n,
            swap_latency: models.iter().map(|m| m.swap_latency).sum::<f64>() / n,
            spread_pct,
        });
        Ok(())
    }

    /// Synthesized model profiles, in spec order.
    pub fn profiles(&self) -> Result<Vec<ModelProfile>> {
        let test_mix = self.test_mix()?;
        self.model_specs()?
            .iter()
            .enumerate()
            .map(|(j, m)| {
                let recalls = skewed_recalls(m.accuracy, self.recall_skew, self.label_count, j);
                let confusion = synth_confusion(&recalls, &test_mix);
                ModelProfile::new(m.id.clone(), confusion, m.infer_latency, m.swap_latency)
                    .map_err(|e| Error::Gen(format!("model {}: {e}", m.id)))
            })
            .collect()
    }

    pub fn application(&self) -> Result<Application> {
        let hint = self
            .class_prior_hint
            .as_ref()
            .map(|h| mix_vector(h, self.label_count, "class_prior_hint"))
            .transpose()?;
        Application::new(AppId::new(self.id.clone()), self.label_count, self.profiles()?, self.penalty, hint)
    }

    fn validate(&self) -> Result<()> {
        if self.label_count < 1 {
            return Err(Error::Gen(format!("application {} needs labels", self.id)));
        }
        if self.feature_dim() < self.label_count {
            return Err(Error::Gen(format!(
                "application {}: feature_dim {} is below label_count {}",
                self.id,
                self.feature_dim(),
                self.label_count
            )));
        }
        if !(self.cluster_separation > 0.0 && self.cluster_separation.is_finite()) {
            return Err(Error::Gen(format!("application {}: cluster_separation must be positive", self.id)));
        }
        if self.corpus_size < self.label_count || self.holdout_size == 0 {
            return Err(Error::Gen(format!("application {}: corpus or holdout too small", self.id)));
        }
        for m in self.model_specs()? {
            if !(0.0..=1.0).contains(&m.accuracy) {
                return Err(Error::Gen(format!("model {} accuracy {} outside [0, 1]", m.id, m.accuracy)));
            }
        }
        self.class_mix()?;
        self.test_mix()?;
        Ok(())
    }
}

fn mix_vector(v: &[f64], label_count: usize, what: &str) -> Result<ThetaVector> {
    if v.len() != label_count {
        return Err(Error::Gen(format!("{what} has {} entries, expected {label_count}", v.len())));
    }
    ThetaVector::new(v.to_vec()).map_err(|e| Error::Gen(format!("{what}: {e}")))
}

fn gen_err(e: impl std::fmt::Display) -> Error {
    Error::Gen(e.to_string())
}

/// Recall of each class for model `model_index`. The skew shrinks where it
/// would push a recall outside `[0, 1]`, so the mean stays `accuracy`.
fn skewed_recalls(accuracy: f64, skew: f64, label_count: usize, model_index: usize) -> Vec<f64> {
    let skew = skew.min(accuracy).min(1.0 - accuracy).max(0.0);
    let paired = label_count - label_count % 2;
    (0..label_count)
        .map(|c| {
            let offset = if c >= paired {
                0.0
            } else if (c + model_index) % 2 == 0 {
                skew
            } else {
                -skew
            };
            (accuracy + offset).clamp(0.0, 1.0)
        })
        .collect()
}

/// Integer-count confusion matrix: row `c` holds `ROW_TOTAL · L · mix_c`
/// observations, `recall_c` of them on the diagonal and the rest spread as
/// evenly as integers allow over the wrong labels.
fn synth_confusion(recalls: &[f64], test_mix: &ThetaVector) -> Vec<Vec<f64>> {
    let n = recalls.len();
    (0..n)
        .map(|c| {
            let total = (ROW_TOTAL * n as f64 * test_mix.as_slice()[c]).round().max(1.0);
            let hits = (recalls[c] * total).round();
            let mut row = vec![0.0; n];
            row[c] = hits;
            let misses = (total - hits) as u64;
            if n > 1 {
                let wrong = (n - 1) as u64;
                let mut k = 0u64;
                for (j, cell) in row.iter_mut().enumerate() {
                    if j == c {
                        continue;
                    }
                    *cell = (misses / wrong + u64::from(k < misses % wrong)) as f64;
                    k += 1;
                }
            }
            row
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub apps: Vec<AppSpec>,
    pub request_count: usize,
    /// Requests per application; an even split of `request_count` when absent.
    #[serde(default)]
    pub per_app_counts: Option<Vec<usize>>,
    pub window_ms: f64,
    pub deadline: DeadlineDist,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn per_app_counts(&self) -> Result<Vec<usize>> {
        if self.apps.is_empty() {
            return Err(Error::Gen("scenario has no applications".into()));
        }
        match &self.per_app_counts {
            Some(counts) => {
                if counts.len() != self.apps.len() || counts.iter().sum::<usize>() != self.request_count {
                    return Err(Error::Gen("per_app_counts must match the apps and sum to request_count".into()));
                }
                Ok(counts.clone())
            }
            None => {
                if self.request_count % self.apps.len() != 0 {
                    return Err(Error::Gen(format!(
                        "request_count {} is not divisible by {} applications",
                        self.request_count,
                        self.apps.len()
                    )));
                }
                Ok(vec![self.request_count / self.apps.len(); self.apps.len()])
            }
        }
    }

    /// Cycles the current applications up to `count`, suffixing repeated
    /// ids, and keeps the per-application request count.
    pub fn with_app_count(mut self, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::Gen("app_count must be positive".into()));
        }
        let per_app = self.per_app_counts()?[0];
        let base = std::mem::take(&mut self.apps);
        self.apps = (0..count)
            .map(|i| {
                let mut app = base[i % base.len()].clone();
                let round = i / base.len();
                if round > 0 {
                    app.id = format!("{}-{}", app.id, round + 1);
                }
                app
            })
            .collect();
        self.per_app_counts = None;
        self.request_count = per_app * count;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_penalty(mut self, penalty: PenaltySpec) -> Self {
        for app in &mut self.apps {
            app.penalty = penalty;
        }
        self
    }

    pub fn with_spread(mut self, spread_pct: f64) -> Result<Self> {
        for app in &mut self.apps {
            app.to_variance_suite(spread_pct)?;
        }
        Ok(self)
    }

    pub fn app(&self, id: &AppId) -> Option<&AppSpec> {
        self.apps.iter().find(|a| a.id == id.0)
    }
}

/// An application's neighbor corpus and a disjoint holdout for profiling.
#[derive(Debug, Clone)]
pub struct AppCorpus {
    pub index: NeighborIndex,
    pub holdout: Vec<(Vec<f64>, ClassLabel)>,
}

#[derive(Debug, Clone)]
pub struct GeneratedScenario {
    /// Dispatched at the window close.
    pub problem: Problem,
    pub corpora: BTreeMap<AppId, AppCorpus>,
}

/// Gaussian class clusters with pairwise mean distance `separation`.
struct Clusters {
    dim: usize,
    scale: f64,
}

impl Clusters {
    fn new(spec: &AppSpec) -> Self {
        Clusters {
            dim: spec.feature_dim(),
            scale: spec.cluster_separation / std::f64::consts::SQRT_2,
        }
    }

    fn sample<R: Rng>(&self, label: usize, rng: &mut R) -> Vec<f64> {
        (0..self.dim)
            .map(|d| {
                let z: f64 = StandardNormal.sample(rng);
                z + if d == label { self.scale } else { 0.0 }
            })
            .collect()
    }
}

/// Per-class counts for `size` points under `mix`, largest remainder first,
/// with at least one point for every class in `required`.
fn allocate(size: usize, mix: &ThetaVector, required: &ThetaVector) -> Vec<usize> {
    let weights = mix.as_slice();
    let mut counts: Vec<usize> = weights.iter().map(|w| (w * size as f64).floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = weights[a] * size as f64 - counts[a] as f64;
        let rb = weights[b] * size as f64 - counts[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let left = size.saturating_sub(counts.iter().sum());
    for &c in order.iter().cycle().take(left) {
        counts[c] += 1;
    }
    for (c, &r) in required.as_slice().iter().enumerate() {
        if r > 0.0 && counts[c] == 0 {
            counts[c] = 1;
        }
    }
    counts
}

pub fn gen_scenario(spec: &ScenarioSpec) -> Result<GeneratedScenario> {
    if !(spec.window_ms >= 0.0 && spec.window_ms.is_finite()) {
        return Err(Error::Gen(format!("window_ms must be non-negative, got {}", spec.window_ms)));
    }
    let counts = spec.per_app_counts()?;
    let offsets = spec.deadline.sampler()?;
    let arrival = Uniform::new_inclusive(0.0, spec.window_ms).map_err(gen_err)?;

    let mut apps = AppSet::new();
    let mut corpora = BTreeMap::new();
    let mut drafts = Vec::new();
    let mut stream = ChaCha8Rng::seed_from_u64(spec.seed);
    for (i, app) in spec.apps.iter().enumerate() {
        app.validate()?;
        let application = app.application()?;
        if apps.insert(application).is_some() {
            return Err(Error::Gen(format!("duplicate application id {}", app.id)));
        }
        let clusters = Clusters::new(app);
        let mix = app.class_mix()?;
        let labels = WeightedIndex::new(mix.as_slice()).map_err(gen_err)?;
        for _ in 0..counts[i] {
            let label = labels.sample(&mut stream);
            let t = arrival.sample(&mut stream);
            let offset = offsets.sample(&mut stream);
            let point = clusters.sample(label, &mut stream);
            drafts.push((t, app.id.clone(), t + offset, point, label));
        }

        let mut data = ChaCha8Rng::seed_from_u64(spec.seed);
        data.set_stream(1 + i as u64);
        let test_mix = app.test_mix()?;
        let draw = |size: usize, rng: &mut ChaCha8Rng| -> Vec<(Vec<f64>, ClassLabel)> {
            let per_class = allocate(size, &test_mix, &mix);
            let mut points = Vec::with_capacity(per_class.iter().sum());
            for (label, &n) in per_class.iter().enumerate() {
                for _ in 0..n {
                    points.push((clusters.sample(label, rng), ClassLabel(label)));
                }
            }
            points
        };
        let corpus = draw(app.corpus_size, &mut data);
        let holdout = draw(app.holdout_size, &mut data);
        corpora.insert(
            AppId::new(app.id.clone()),
            AppCorpus {
                index: NeighborIndex::new(corpus, app.label_count)?,
                holdout,
            },
        );
    }

    // Ids follow arrival order; the sort is stable for equal arrivals.
    drafts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let requests = drafts
        .into_iter()
        .enumerate()
        .map(|(n, (t, app, deadline, point, label))| {
            Request::new(RequestId(n as u64), AppId::new(app), t, deadline, point, ClassLabel(label))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GeneratedScenario {
        problem: Problem::new(spec.window_ms, requests, apps),
        corpora,
    })
}

fn explicit(models: &[(&str, f64, f64, f64)]) -> ModelSource {
    ModelSource::Explicit(
        models
            .iter()
            .map(|&(id, acc, infer, swap)| ModelSpec::new(id, acc, infer, swap))
            .collect(),
    )
}

fn base_app(id: &str, class_mix: Vec<f64>, models: ModelSource) -> AppSpec {
    AppSpec {
        id: id.to_string(),
        label_count: class_mix.len(),
        class_mix,
        test_mix: None,
        cluster_separation: default_separation(),
        feature_dim: None,
        models,
        corpus_size: default_corpus_size(),
        holdout_size: default_holdout_size(),
        penalty: default_penalty(),
        recall_skew: 0.1,
        class_prior_hint: None,
    }
}

/// Fall detection analog: rare positives, three video models, a time-series
/// model and a fusion model.
pub fn fall_app() -> AppSpec {
    base_app(
        "fall",
        vec![0.95, 0.05],
        explicit(&[
            ("x3d-s", 0.80, 6.0, 32.0),
            ("x3d-m", 0.85, 10.0, 40.0),
            ("x3d-l", 0.89, 16.0, 48.0),
            ("minirocket", 0.74, 2.0, 16.0),
            ("fusion", 0.92, 22.0, 56.0),
        ]),
    )
}

/// Keyword spotting analog: six uniformly used commands.
pub fn voice_app() -> AppSpec {
    base_app(
        "voice",
        vec![1.0 / 6.0; 6],
        explicit(&[("lstm", 0.82, 4.0, 24.0), ("mobilenet", 0.90, 12.0, 40.0)]),
    )
}

/// ECG monitoring analog: normal beats 80% of the time, six arrhythmia
/// types share the rest.
pub fn heart_app() -> AppSpec {
    let mut mix = vec![0.2 / 6.0; 7];
    mix[0] = 0.8;
    base_app(
        "heart",
        mix,
        explicit(&[("cnn", 0.85, 3.0, 20.0), ("resnet34", 0.95, 14.0, 40.0)]),
    )
}

/// Built-in scenarios: one per application plus the three together
/// (12 requests in a 100 ms window, 150 ms mean deadline).
pub fn builtin(name: &str) -> Result<ScenarioSpec> {
    let apps = match name {
        "fall" => vec![fall_app()],
        "voice" => vec![voice_app()],
        "heart" => vec![heart_app()],
        "default_trio" => vec![fall_app(), voice_app(), heart_app()],
        other => return Err(Error::UnknownScenario(other.to_string())),
    };
    let request_count = 4 * apps.len();
    Ok(ScenarioSpec {
        name: name.to_string(),
        apps,
        request_count,
        per_app_counts: None,
        window_ms: 100.0,
        deadline: DeadlineDist::Uniform { mean: 150.0 },
        seed: 0,
    })
}
