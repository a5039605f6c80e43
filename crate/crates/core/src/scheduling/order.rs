use crate::domain::RequestId;
use crate::error::{Error, Result};
use crate::schedule::PlanTable;

use super::{RequestOrder, SchedulerSpec, SchedulingContext};

/// `(1 + Var[accuracy]) · exp(−slack_s)` for one request, with the variance
/// taken over the candidates `spec` plans with.
pub fn priority_request(id: RequestId, spec: &SchedulerSpec, ctx: &SchedulingContext) -> Result<f64> {
    let table = ctx.plan(spec)?;
    let pos = table
        .position(id)
        .ok_or_else(|| Error::invalid(format!("unknown request {id}")))?;
    Ok(table.priority(pos))
}

/// Mean member priority.
pub fn priority_group(group: &[RequestId], spec: &SchedulerSpec, ctx: &SchedulingContext) -> Result<f64> {
    if group.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let table = ctx.plan(spec)?;
    let positions = group
        .iter()
        .map(|&id| table.position(id).ok_or_else(|| Error::invalid(format!("unknown request {id}"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(group_priority(&table, &positions))
}

pub fn order_requests(policy: RequestOrder, spec: &SchedulerSpec, ctx: &SchedulingContext) -> Result<Vec<RequestId>> {
    let table = ctx.plan(spec)?;
    Ok(order_positions(&table, policy)
        .into_iter()
        .map(|pos| table.rows[pos].id)
        .collect())
}

pub(crate) fn group_priority(table: &PlanTable, members: &[usize]) -> f64 {
    members.iter().map(|&p| table.priority(p)).sum::<f64>() / members.len() as f64
}

/// Row positions in policy order; ties fall back to request id.
pub(crate) fn order_positions(table: &PlanTable, policy: RequestOrder) -> Vec<usize> {
    let mut positions: Vec<usize> = (0..table.rows.len()).collect();
    match policy {
        RequestOrder::Fcfs => positions.sort_by(|&a, &b| {
            let (ra, rb) = (&table.rows[a], &table.rows[b]);
            ra.arrival.total_cmp(&rb.arrival).then(ra.id.cmp(&rb.id))
        }),
        RequestOrder::Edf => positions.sort_by(|&a, &b| {
            let (ra, rb) = (&table.rows[a], &table.rows[b]);
            ra.deadline.total_cmp(&rb.deadline).then(ra.id.cmp(&rb.id))
        }),
        RequestOrder::Priority => sort_by_priority(table, &mut positions),
    }
    positions
}

/// Descending priority, ties by request id.
pub(crate) fn sort_by_priority(table: &PlanTable, positions: &mut [usize]) {
    let prio: Vec<f64> = (0..table.rows.len()).map(|p| table.priority(p)).collect();
    positions.sort_by(|&a, &b| {
        prio[b]
            .total_cmp(&prio[a])
            .then(table.rows[a].id.cmp(&table.rows[b].id))
    });
}
