//! Experiment execution and CSV output.

use rayon::prelude::*;

use super::config::{ExperimentConfig, Point, SweepValue};
use crate::error::{Error, Result};
use crate::oracle::{exact_global, exact_grouped, OracleBudget};
use crate::schedule::schedule_utility;
use crate::scheduling::{self, form_groups, AccuracyMode, Selection};
use crate::sim::{prepare_context, run_trial, TrialMetrics};

pub const CSV_HEADER: &str = "sweep_param,sweep_value,scheduler,trial,seed,mean_utility,mean_expected_accuracy,\
mean_violation_ms,violation_count,scheduling_overhead_ms";

pub const ORACLE_HEADER: &str = "sweep_param,sweep_value,scheduler,trial,seed,groups,utility,exact_global,\
exact_grouped,gap_global,gap_grouped,status";

const EXACT_TOLERANCE: f64 = 1e-9;

/// Formats like C's `%.9g`.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    trim_zeros(&format!("{x:.*}", (8 - exp) as usize)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub sweep_param: String,
    pub sweep_value: String,
    pub scheduler: String,
    pub trial: u64,
    pub seed: u64,
    pub metrics: TrialMetrics,
}

impl Row {
    pub fn to_csv(&self) -> String {
        let m = &self.metrics;
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.sweep_param,
            self.sweep_value,
            self.scheduler,
            self.trial,
            self.seed,
            fmt_float(m.mean_utility),
            fmt_float(m.mean_expected_accuracy),
            fmt_float(m.mean_violation_ms),
            m.violation_count,
            fmt_float(m.scheduling_overhead_ms),
        )
    }
}

fn sweep_labels(config: &ExperimentConfig) -> (String, Vec<String>) {
    match &config.sweep {
        None => ("none".into(), vec!["none".into()]),
        Some(s) => (
            s.param.name().into(),
            s.values
                .iter()
                .map(|v| match v {
                    SweepValue::Number(n) => fmt_float(*n),
                    SweepValue::Text(t) => t.clone(),
                })
                .collect(),
        ),
    }
}

struct Job<'a> {
    point: &'a Point,
    value: usize,
    scheduler: usize,
    trial: u64,
}

fn jobs<'a>(config: &ExperimentConfig, points: &'a [Point]) -> Vec<Job<'a>> {
    let mut out = Vec::new();
    for (value, point) in points.iter().enumerate() {
        for scheduler in 0..config.schedulers.len() {
            for trial in 0..config.trials {
                out.push(Job {
                    point,
                    value,
                    scheduler,
                    trial,
                });
            }
        }
    }
    out
}

/// Runs every (sweep value, scheduler, trial) combination. Trials run in
/// parallel; rows come back in that nested order.
pub fn run(config: &ExperimentConfig) -> Result<Vec<Row>> {
    let points = config.points()?;
    let specs: Vec<_> = points.iter().map(|p| config.specs(p)).collect::<Result<_>>()?;
    let (param, labels) = sweep_labels(config);
    jobs(config, &points)
        .into_par_iter()
        .map(|job| {
            let (name, spec) = &specs[job.value][job.scheduler];
            let seed = config.base_seed.wrapping_add(job.trial);
            let metrics = run_trial(&job.point.scenario, spec, &job.point.estimation, seed)?;
            Ok(Row {
                sweep_param: param.clone(),
                sweep_value: labels[job.value].clone(),
                scheduler: name.clone(),
                trial: job.trial,
                seed,
                metrics,
            })
        })
        .collect()
}

/// Header plus one line per row, LF-terminated.
pub fn to_csv(rows: &[Row]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleStatus {
    /// Within the grouped oracle's reach and matching it.
    Exact,
    /// More groups than τ, so the greedy fallback ran; only the global
    /// bound is checked.
    Heuristic,
    /// A grouped scheduler missed the grouped optimum with groups ≤ τ, or
    /// any scheduler beat the global optimum.
    Mismatch,
    BudgetExceeded,
}

impl OracleStatus {
    fn label(self) -> &'static str {
        match self {
            OracleStatus::Exact => "exact",
            OracleStatus::Heuristic => "heuristic",
            OracleStatus::Mismatch => "mismatch",
            OracleStatus::BudgetExceeded => "budget_exceeded",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub sweep_param: String,
    pub sweep_value: String,
    pub scheduler: String,
    pub trial: u64,
    pub seed: u64,
    pub groups: usize,
    pub utility: f64,
    pub exact_global: Option<f64>,
    pub exact_grouped: Option<f64>,
    pub status: OracleStatus,
}

impl OracleRow {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "na".to_string(), fmt_float);
        let gap = |v: Option<f64>| opt(v.map(|e| e - self.utility));
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.sweep_param,
            self.sweep_value,
            self.scheduler,
            self.trial,
            self.seed,
            self.groups,
            fmt_float(self.utility),
            opt(self.exact_global),
            opt(self.exact_grouped),
            gap(self.exact_global),
            gap(self.exact_grouped),
            self.status.label(),
        )
    }
}

/// Group count, planned utility, exact global and grouped optima, status.
type OracleOutcome = (usize, f64, Option<f64>, Option<f64>, OracleStatus);

fn oracle_row(
    config: &ExperimentConfig,
    point: &Point,
    name: &str,
    spec: &scheduling::SchedulerSpec,
    seed: u64,
    budget: OracleBudget,
) -> Result<OracleOutcome> {
    let ctx = prepare_context(&point.scenario, spec, &point.estimation, seed)?;
    let source = match spec.accuracy_source {
        AccuracyMode::Profiled => crate::schedule::AccuracySource::Profiled,
        AccuracyMode::Dynamic => crate::schedule::AccuracySource::Dynamic(
            ctx.thetas.as_ref().ok_or_else(|| Error::invalid(format!("{name} produced no estimates")))?,
        ),
    };
    let schedule = scheduling::schedule(spec, &ctx)?;
    let utility = schedule_utility(&schedule, &ctx.problem, source, spec.planning)?;

    // Flat schedulers are compared against the per-application grouping.
    let grouping = if spec.selection.is_grouped() {
        spec.clone()
    } else {
        scheduling::SchedulerSpec {
            selection: Selection::Grouped,
            ..spec.clone()
        }
    };
    let groups = form_groups(&grouping, &ctx)?;

    let mut budget_hit = false;
    let mut settle = |r: Result<crate::oracle::OracleResult>| match r {
        Ok(r) => Ok(Some(r.utility)),
        Err(Error::BudgetExceeded { .. }) => {
            budget_hit = true;
            Ok(None)
        }
        Err(e) => Err(e),
    };
    let global = settle(exact_global(&ctx.problem, source, spec.short_circuit, spec.planning, budget))?;
    let grouped = settle(exact_grouped(&groups, &ctx.problem, source, spec.short_circuit, spec.planning, budget))?;

    let beats_global = global.is_some_and(|g| utility > g + EXACT_TOLERANCE);
    let must_match = spec.selection.is_grouped() && groups.len() <= config.tau;
    let misses_grouped = must_match && grouped.is_some_and(|g| (g - utility).abs() > EXACT_TOLERANCE);
    let status = if beats_global || misses_grouped {
        OracleStatus::Mismatch
    } else if budget_hit {
        OracleStatus::BudgetExceeded
    } else if must_match {
        OracleStatus::Exact
    } else {
        OracleStatus::Heuristic
    };
    Ok((groups.len(), utility, global, grouped, status))
}

/// Compares every scheduler's planned utility against both exhaustive
/// solvers. Oversized instances are reported as `budget_exceeded`.
pub fn oracle_check(config: &ExperimentConfig, budget: OracleBudget) -> Result<Vec<OracleRow>> {
    let points = config.points()?;
    if points.iter().any(|p| p.worker_count != 1) {
        return Err(Error::invalid("oracle-check needs worker_count = 1"));
    }
    let specs: Vec<_> = points.iter().map(|p| config.specs(p)).collect::<Result<_>>()?;
    let (param, labels) = sweep_labels(config);
    jobs(config, &points)
        .into_par_iter()
        .map(|job| {
            let (name, spec) = &specs[job.value][job.scheduler];
            let seed = config.base_seed.wrapping_add(job.trial);
            let (groups, utility, exact_global, exact_grouped, status) =
                oracle_row(config, job.point, name, spec, seed, budget)?;
            Ok(OracleRow {
                sweep_param: param.clone(),
                sweep_value: labels[job.value].clone(),
                scheduler: name.clone(),
                trial: job.trial,
                seed,
                groups,
                utility,
                exact_global,
                exact_grouped,
                status,
            })
        })
        .collect()
}

pub fn oracle_csv(rows: &[OracleRow]) -> String {
    let mut out = String::from(ORACLE_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv());
        out.push('\n');
    }
    out
}
