use std::collections::BTreeMap;

use crate::domain::{LatencyMode, RequestId, Schedule, ThetaMap};
use crate::error::{Error, Result};
use crate::oracle::{self, OracleBudget};
use crate::schedule::{PlanTable, WorkerState};
use crate::sneakpeek::split_groups;

use super::flat::earliest_worker;
use super::order::{group_priority, sort_by_priority};
use super::{SchedulerSpec, SchedulingContext, Selection};

/// Groups the scheduler works with, members in descending priority. Groups
/// come out in application order, split subgroups in label order.
pub fn form_groups(spec: &SchedulerSpec, ctx: &SchedulingContext) -> Result<Vec<Vec<RequestId>>> {
    let table = ctx.plan(spec)?;
    let groups = group_positions(&table, spec.selection, ctx.thetas.as_ref())?;
    Ok(groups
        .into_iter()
        .map(|g| g.into_iter().map(|p| table.rows[p].id).collect())
        .collect())
}

/// Group-level scheduling. Small instances (at most `τ` groups on a single
/// worker) are solved exactly; larger ones greedily place groups in
/// descending mean priority, each on one model.
pub fn schedule_grouped(spec: &SchedulerSpec, ctx: &SchedulingContext) -> Result<Schedule> {
    if !spec.selection.is_grouped() {
        return Err(Error::invalid("schedule_grouped takes Grouped or GroupedDataAware"));
    }
    let table = ctx.plan(spec)?;
    let groups = group_positions(&table, spec.selection, ctx.thetas.as_ref())?;
    if table.worker_count() == 1 && groups.len() <= spec.brute_force_threshold {
        match oracle::search_grouped(&table, &groups, spec.planning, OracleBudget::default()) {
            Ok(found) => return Ok(found.schedule),
            Err(Error::BudgetExceeded { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(greedy(&table, &groups, spec.planning))
}

fn greedy(table: &PlanTable, groups: &[Vec<usize>], mode: LatencyMode) -> Schedule {
    let priority: Vec<f64> = groups.iter().map(|g| group_priority(table, g)).collect();
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.sort_by(|&a, &b| priority[b].total_cmp(&priority[a]));

    let mut workers = table.fresh_workers();
    let mut schedule = Schedule::new();
    for g in order {
        let members = &groups[g];
        let k = earliest_worker(&workers);
        let opt = select_group_option(table, members, &workers[k], mode);
        for &pos in members {
            let row = &table.rows[pos];
            workers[k].advance(row.app, &row.options[opt], mode);
            schedule.push(row.id, row.options[opt].model, k);
        }
    }
    schedule
}

/// The option with the best mean member utility, each member evaluated at
/// its own slot in the group. Ties go to the shorter group run, then list
/// order.
fn select_group_option(table: &PlanTable, members: &[usize], worker: &WorkerState, mode: LatencyMode) -> usize {
    let option_count = table.rows[members[0]].options.len();
    let mut best: Option<(usize, f64, f64)> = None;
    for opt in 0..option_count {
        let mut w = *worker;
        let mut total = 0.0;
        for &pos in members {
            let row = &table.rows[pos];
            total += table.utility_next(pos, opt, &w, mode);
            w.advance(row.app, &row.options[opt], mode);
        }
        let mean = total / members.len() as f64;
        let duration = w.busy - worker.busy;
        let better = match best {
            None => true,
            Some((_, m, d)) => mean > m || (mean == m && duration < d),
        };
        if better {
            best = Some((opt, mean, duration));
        }
    }
    best.expect("groups are non-empty").0
}

pub(crate) fn group_positions(
    table: &PlanTable,
    selection: Selection,
    thetas: Option<&ThetaMap>,
) -> Result<Vec<Vec<usize>>> {
    let mut by_app: BTreeMap<usize, Vec<RequestId>> = BTreeMap::new();
    for row in &table.rows {
        by_app.entry(row.app).or_default().push(row.id);
    }
    let mut groups = Vec::new();
    for members in by_app.into_values() {
        if selection == Selection::GroupedDataAware {
            let thetas = thetas.ok_or_else(|| Error::invalid("data-aware grouping requires θ estimates"))?;
            groups.extend(split_groups(&members, thetas));
        } else {
            groups.push(members);
        }
    }
    Ok(groups
        .into_iter()
        .map(|ids| {
            let mut positions: Vec<usize> = ids
                .iter()
                .map(|&id| table.position(id).expect("ids come from the table"))
                .collect();
            sort_by_priority(table, &mut positions);
            positions
        })
        .collect())
}
