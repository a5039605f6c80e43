//! Experiment configuration files (TOML).
//!
//! ```toml
//! trials = 10
//! base_seed = 0
//! output = "results.csv"          # stdout when absent and no --out
//! schedulers = ["lo-edf", "sneakpeek"]
//!
//! [scenario]
//! builtin = "default_trio"        # or `name` plus `[[scenario.apps]]`
//! deadline = { kind = "uniform", mean = 150 }
//!
//! [estimation]
//! k = 5
//! prior = "uninformative"
//!
//! [execution]
//! worker_count = 1
//! tau = 3
//!
//! [sweep]
//! param = "deadline_mean"
//! values = [50, 100, 150]
//! ```

use std::fmt;
use std::ops::Range;
use std::path::PathBuf;

use serde::Deserialize;
use toml::Spanned;

use crate::domain::LatencyMode;
use crate::error::{Error, Result};
use crate::scheduling::{SchedulerSpec, DEFAULT_BRUTE_FORCE_THRESHOLD, PRESET_NAMES};
use crate::scoring::{PenaltyKind, PenaltySpec};
use crate::sim::{EstimationConfig, EstimatorKind, HintSource, OutcomeMode};
use crate::sneakpeek::PriorKind;
use crate::workload::{builtin, AppSpec, DeadlineDist, ScenarioSpec};

/// A configuration problem anchored to a 1-based line and column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn anchor(text: &str, span: Option<Range<usize>>, message: impl Into<String>) -> ConfigError {
    let offset = span.map_or(0, |s| s.start.min(text.len()));
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    ConfigError {
        line,
        column,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    DeadlineMean,
    DeadlineSd,
    RequestCount,
    AppCount,
    SpreadPct,
    Penalty,
    Prior,
    WorkerCount,
    SpSimAccuracy,
    K,
}

impl SweepParam {
    pub const NAMES: [&'static str; 10] = [
        "deadline_mean",
        "deadline_sd",
        "request_count",
        "app_count",
        "spread_pct",
        "penalty",
        "prior",
        "worker_count",
        "sp_sim_accuracy",
        "k",
    ];

    pub fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "deadline_mean" => SweepParam::DeadlineMean,
            "deadline_sd" => SweepParam::DeadlineSd,
            "request_count" => SweepParam::RequestCount,
            "app_count" => SweepParam::AppCount,
            "spread_pct" => SweepParam::SpreadPct,
            "penalty" => SweepParam::Penalty,
            "prior" => SweepParam::Prior,
            "worker_count" => SweepParam::WorkerCount,
            "sp_sim_accuracy" => SweepParam::SpSimAccuracy,
            "k" => SweepParam::K,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        Self::NAMES[self as usize]
    }

    fn is_textual(self) -> bool {
        matches!(self, SweepParam::Penalty | SweepParam::Prior)
    }

    fn is_integral(self) -> bool {
        matches!(
            self,
            SweepParam::RequestCount | SweepParam::AppCount | SweepParam::WorkerCount | SweepParam::K
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepValue {
    Number(f64),
    Text(String),
}

impl SweepValue {
    fn number(&self) -> f64 {
        match self {
            SweepValue::Number(v) => *v,
            SweepValue::Text(_) => f64::NAN,
        }
    }

    fn count(&self) -> usize {
        self.number() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<SweepValue>,
}

/// One fully resolved sweep point.
#[derive(Debug, Clone)]
pub struct Point {
    pub scenario: ScenarioSpec,
    pub estimation: EstimationConfig,
    pub worker_count: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub scenario: ScenarioSpec,
    /// Preset names, in output order.
    pub schedulers: Vec<String>,
    pub estimation: EstimationConfig,
    pub worker_count: usize,
    pub tau: usize,
    pub planning: LatencyMode,
    pub sweep: Option<Sweep>,
    pub trials: u64,
    pub base_seed: u64,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Every point of the sweep, or the base configuration alone.
    pub fn points(&self) -> Result<Vec<Point>> {
        match &self.sweep {
            None => Ok(vec![self.base_point()]),
            Some(sweep) => sweep.values.iter().map(|v| self.point(sweep.param, v)).collect(),
        }
    }

    fn base_point(&self) -> Point {
        Point {
            scenario: self.scenario.clone(),
            estimation: self.estimation.clone(),
            worker_count: self.worker_count,
        }
    }

    pub fn point(&self, param: SweepParam, value: &SweepValue) -> Result<Point> {
        let mut p = self.base_point();
        match (param, value) {
            (SweepParam::DeadlineMean, v) => p.scenario.deadline = p.scenario.deadline.with_mean(v.number()),
            (SweepParam::DeadlineSd, v) => {
                p.scenario.deadline = DeadlineDist::Normal {
                    mean: p.scenario.deadline.mean(),
                    sd: v.number(),
                }
            }
            (SweepParam::RequestCount, v) => {
                p.scenario.request_count = v.count();
                p.scenario.per_app_counts = None;
            }
            (SweepParam::AppCount, v) => p.scenario = p.scenario.with_app_count(v.count())?,
            (SweepParam::SpreadPct, v) => p.scenario = p.scenario.with_spread(v.number())?,
            (SweepParam::Penalty, SweepValue::Text(s)) => {
                let kind = PenaltyKind::parse(s).ok_or_else(|| Error::invalid(format!("unknown penalty `{s}`")))?;
                p.scenario = p.scenario.with_penalty(PenaltySpec::new(kind));
            }
            (SweepParam::Prior, SweepValue::Text(s)) => {
                p.estimation.prior = PriorKind::parse(s).ok_or_else(|| Error::invalid(format!("unknown prior `{s}`")))?;
            }
            (SweepParam::WorkerCount, v) => p.worker_count = v.count(),
            (SweepParam::SpSimAccuracy, v) => {
                p.estimation.estimator = EstimatorKind::Simulated { accuracy: v.number() };
            }
            (SweepParam::K, v) => p.estimation.k = v.count(),
            (param, value) => {
                return Err(Error::invalid(format!("{value:?} is not a valid value for {}", param.name())));
            }
        }
        validate_point(&p)?;
        Ok(p)
    }

    /// Scheduler specs for one point, in `schedulers` order.
    pub fn specs(&self, point: &Point) -> Result<Vec<(String, SchedulerSpec)>> {
        self.schedulers
            .iter()
            .map(|name| {
                let mut spec = SchedulerSpec::preset(name)?
                    .with_workers(point.worker_count)
                    .with_threshold(self.tau);
                spec.planning = self.planning;
                Ok((name.clone(), spec))
            })
            .collect()
    }
}

fn validate_point(p: &Point) -> Result<()> {
    p.scenario.per_app_counts()?;
    if p.worker_count == 0 {
        return Err(Error::invalid("worker_count must be positive"));
    }
    if p.estimation.k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    if let EstimatorKind::Simulated { accuracy } = p.estimation.estimator {
        if !(0.0..=1.0).contains(&accuracy) {
            return Err(Error::invalid(format!("sp_sim_accuracy must lie in [0, 1], got {accuracy}")));
        }
    }
    if let DeadlineDist::Normal { sd, .. } = p.scenario.deadline {
        if !(sd >= 0.0) {
            return Err(Error::invalid(format!("deadline_sd must be non-negative, got {sd}")));
        }
    }
    if !(p.scenario.deadline.mean() > 0.0) {
        return Err(Error::invalid("deadline mean must be positive"));
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    trials: Option<Spanned<i64>>,
    base_seed: Option<u64>,
    output: Option<PathBuf>,
    schedulers: Option<Vec<Spanned<String>>>,
    scenario: Option<Spanned<RawScenario>>,
    #[serde(default)]
    estimation: RawEstimation,
    #[serde(default)]
    execution: RawExecution,
    sweep: Option<RawSweep>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    builtin: Option<Spanned<String>>,
    name: Option<String>,
    apps: Option<Vec<AppSpec>>,
    request_count: Option<usize>,
    per_app_counts: Option<Vec<usize>>,
    window_ms: Option<f64>,
    deadline: Option<DeadlineDist>,
    app_count: Option<usize>,
    penalty: Option<Spanned<String>>,
    spread_pct: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawEstimation {
    k: Option<usize>,
    prior: Option<Spanned<String>>,
    prior_hint: Option<HintSource>,
    sp_sim_accuracy: Option<f64>,
    window_count: Option<usize>,
    outcome: Option<OutcomeMode>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawExecution {
    worker_count: Option<usize>,
    tau: Option<usize>,
    planning: Option<LatencyMode>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    param: Spanned<String>,
    values: Spanned<Vec<toml::Value>>,
}

/// Parses and validates a configuration file's contents.
pub fn parse_config(text: &str) -> std::result::Result<ExperimentConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| anchor(text, e.span(), e.message().trim()))?;

    let trials = match raw.trials {
        None => 1,
        Some(t) if *t.get_ref() >= 1 => *t.get_ref() as u64,
        Some(t) => return Err(anchor(text, Some(t.span()), "trials must be a positive integer")),
    };

    let schedulers = match raw.schedulers {
        None => PRESET_NAMES.iter().map(|s| s.to_string()).collect(),
        Some(list) => {
            if list.is_empty() {
                return Err(anchor(text, None, "schedulers must not be empty"));
            }
            for name in &list {
                if !PRESET_NAMES.contains(&name.get_ref().as_str()) {
                    return Err(anchor(
                        text,
                        Some(name.span()),
                        format!("unknown scheduler `{}` (expected one of {})", name.get_ref(), PRESET_NAMES.join(", ")),
                    ));
                }
            }
            list.into_iter().map(Spanned::into_inner).collect()
        }
    };

    let scenario = match raw.scenario {
        None => builtin("default_trio").map_err(|e| anchor(text, None, e.to_string()))?,
        Some(s) => {
            let span = s.span();
            build_scenario(text, s.into_inner()).map_err(|e| match e {
                Ok(err) => err,
                Err(msg) => anchor(text, Some(span), msg),
            })?
        }
    };

    let est = raw.estimation;
    let mut estimation = EstimationConfig::default();
    if let Some(k) = est.k {
        estimation.k = k;
    }
    if let Some(prior) = est.prior {
        estimation.prior = PriorKind::parse(prior.get_ref())
            .ok_or_else(|| anchor(text, Some(prior.span()), format!("unknown prior `{}`", prior.get_ref())))?;
    }
    if let Some(hint) = est.prior_hint {
        estimation.hint = hint;
    }
    if let Some(accuracy) = est.sp_sim_accuracy {
        estimation.estimator = EstimatorKind::Simulated { accuracy };
    }
    estimation.window_count = est.window_count;
    if let Some(outcome) = est.outcome {
        estimation.outcome = outcome;
    }

    let config = ExperimentConfig {
        scenario,
        schedulers,
        estimation,
        worker_count: raw.execution.worker_count.unwrap_or(1),
        tau: raw.execution.tau.unwrap_or(DEFAULT_BRUTE_FORCE_THRESHOLD),
        planning: raw.execution.planning.unwrap_or_default(),
        sweep: None,
        trials,
        base_seed: raw.base_seed.unwrap_or(0),
        output: raw.output,
    };
    validate_point(&config.base_point()).map_err(|e| anchor(text, None, e.to_string()))?;

    let sweep = match raw.sweep {
        None => None,
        Some(s) => Some(build_sweep(text, &config, s)?),
    };
    Ok(ExperimentConfig { sweep, ..config })
}

type ScenarioResult = std::result::Result<ScenarioSpec, std::result::Result<ConfigError, String>>;

fn build_scenario(text: &str, raw: RawScenario) -> ScenarioResult {
    let mut spec = match (raw.builtin, raw.apps) {
        (Some(_), Some(_)) => return Err(Err("give either `builtin` or `apps`, not both".into())),
        (Some(name), None) => builtin(name.get_ref()).map_err(|e| Ok(anchor(text, Some(name.span()), e.to_string())))?,
        (None, Some(apps)) => ScenarioSpec {
            name: raw.name.clone().unwrap_or_else(|| "custom".into()),
            request_count: 4 * apps.len(),
            apps,
            per_app_counts: None,
            window_ms: 100.0,
            deadline: DeadlineDist::Uniform { mean: 150.0 },
            seed: 0,
        },
        (None, None) => return Err(Err("scenario needs `builtin` or `apps`".into())),
    };
    if let Some(name) = raw.name {
        spec.name = name;
    }
    if let Some(n) = raw.app_count {
        spec = spec.with_app_count(n).map_err(|e| Err(e.to_string()))?;
    }
    if let Some(n) = raw.request_count {
        spec.request_count = n;
        spec.per_app_counts = None;
    }
    if raw.per_app_counts.is_some() {
        spec.per_app_counts = raw.per_app_counts;
    }
    if let Some(w) = raw.window_ms {
        if !(w >= 0.0) {
            return Err(Err(format!("window_ms must be non-negative, got {w}")));
        }
        spec.window_ms = w;
    }
    if let Some(d) = raw.deadline {
        spec.deadline = d;
    }
    if let Some(p) = raw.penalty {
        let kind = PenaltyKind::parse(p.get_ref())
            .ok_or_else(|| Ok(anchor(text, Some(p.span()), format!("unknown penalty `{}`", p.get_ref()))))?;
        spec = spec.with_penalty(PenaltySpec::new(kind));
    }
    if let Some(s) = raw.spread_pct {
        spec = spec.with_spread(s).map_err(|e| Err(e.to_string()))?;
    }
    Ok(spec)
}

fn build_sweep(text: &str, config: &ExperimentConfig, raw: RawSweep) -> std::result::Result<Sweep, ConfigError> {
    let param = SweepParam::parse(raw.param.get_ref()).ok_or_else(|| {
        anchor(
            text,
            Some(raw.param.span()),
            format!("unknown sweep parameter `{}` (expected one of {})", raw.param.get_ref(), SweepParam::NAMES.join(", ")),
        )
    })?;
    let span = raw.values.span();
    let raw_values = raw.values.into_inner();
    if raw_values.is_empty() {
        return Err(anchor(text, Some(span), "sweep values must not be empty"));
    }
    let mut values = Vec::with_capacity(raw_values.len());
    for v in raw_values {
        let value = match (&v, param.is_textual()) {
            (toml::Value::String(s), true) => SweepValue::Text(s.clone()),
            (toml::Value::Integer(i), false) => SweepValue::Number(*i as f64),
            (toml::Value::Float(f), false) if !param.is_integral() => SweepValue::Number(*f),
            _ => {
                let expected = if param.is_textual() {
                    "strings"
                } else if param.is_integral() {
                    "integers"
                } else {
                    "numbers"
                };
                return Err(anchor(text, Some(span), format!("{} values must be {expected}, got {v}", param.name())));
            }
        };
        if let SweepValue::Number(n) = value {
            if n < 0.0 {
                return Err(anchor(text, Some(span), format!("{} values must be non-negative, got {n}", param.name())));
            }
        }
        config
            .point(param, &value)
            .map_err(|e| anchor(text, Some(span.clone()), format!("sweep {}: {e}", param.name())))?;
        values.push(value);
    }
    Ok(Sweep { param, values })
}
