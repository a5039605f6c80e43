use crate::domain::{LatencyMode, ModelRef, RequestId, Schedule};
use crate::error::{Error, Result};
use crate::schedule::{PlanTable, WorkerState};

use super::order::order_positions;
use super::{SchedulerSpec, SchedulingContext, Selection};

/// Picks a model for `id` if it started `t_start` ms after dispatch on an
/// idle worker with nothing resident.
pub fn select_model(
    strategy: Selection,
    id: RequestId,
    t_start: f64,
    spec: &SchedulerSpec,
    ctx: &SchedulingContext,
) -> Result<ModelRef> {
    if strategy.is_grouped() {
        return Err(Error::invalid("select_model takes MaxAccuracy or LocallyOptimal"));
    }
    if !(t_start >= 0.0) {
        return Err(Error::invalid(format!("start time must be non-negative, got {t_start}")));
    }
    let table = ctx.plan(spec)?;
    let pos = table
        .position(id)
        .ok_or_else(|| Error::invalid(format!("unknown request {id}")))?;
    let mut worker = table.fresh_workers()[0];
    worker.busy = t_start;
    let opt = select_option(&table, pos, &worker, strategy, spec.planning);
    Ok(table.rows[pos].options[opt].model)
}

/// Orders requests by `spec.ordering`, then assigns each to the earliest
/// free worker with the model `spec.selection` picks there.
pub fn schedule_flat(spec: &SchedulerSpec, ctx: &SchedulingContext) -> Result<Schedule> {
    if spec.selection.is_grouped() {
        return Err(Error::invalid("schedule_flat takes MaxAccuracy or LocallyOptimal"));
    }
    let table = ctx.plan(spec)?;
    let mut workers = table.fresh_workers();
    let mut schedule = Schedule::new();
    for pos in order_positions(&table, spec.ordering) {
        let k = earliest_worker(&workers);
        let opt = select_option(&table, pos, &workers[k], spec.selection, spec.planning);
        let row = &table.rows[pos];
        workers[k].advance(row.app, &row.options[opt], spec.planning);
        schedule.push(row.id, row.options[opt].model, k);
    }
    Ok(schedule)
}

/// Lowest planned busy time; ties go to the lower index.
pub(crate) fn earliest_worker(workers: &[WorkerState]) -> usize {
    let mut best = 0;
    for (k, w) in workers.iter().enumerate() {
        if w.busy < workers[best].busy {
            best = k;
        }
    }
    best
}

/// Option index chosen for row `pos` on `worker`. Ties go to the lower
/// effective latency, then to list order.
pub(crate) fn select_option(
    table: &PlanTable,
    pos: usize,
    worker: &WorkerState,
    strategy: Selection,
    mode: LatencyMode,
) -> usize {
    let row = &table.rows[pos];
    let mut best: Option<(usize, f64, f64)> = None;
    for (i, option) in row.options.iter().enumerate() {
        let score = match strategy {
            Selection::MaxAccuracy if option.model == ModelRef::SneakPeek => continue,
            Selection::MaxAccuracy => option.accuracy,
            _ => table.utility_next(pos, i, worker, mode),
        };
        let latency = worker.cost(row.app, option, mode).total();
        let better = match best {
            None => true,
            Some((_, s, l)) => score > s || (score == s && latency < l),
        };
        if better {
            best = Some((i, score, latency));
        }
    }
    best.expect("applications have at least one registered model").0
}
