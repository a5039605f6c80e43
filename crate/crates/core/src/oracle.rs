//! Exhaustive solvers used as ground truth.
//!
//! [`exact_global`] searches every request order and model assignment
//! (`n! · Π|M|` candidates). [`exact_grouped`] searches every order of
//! contiguous groups with one model per group, members kept in priority
//! order. Both run everything on worker 0 and enumerate candidates
//! iteratively in lexicographic order (permutation first, then model
//! digits), so among equal-utility maximizers the first one found wins.

use std::collections::HashSet;

use crate::domain::{LatencyMode, Problem, RequestId, Schedule};
use crate::error::{Error, Result};
use crate::schedule::{AccuracySource, PlanTable};
use crate::scheduling::sort_by_priority;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleBudget {
    pub max_candidates: u128,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget {
            max_candidates: 20_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub schedule: Schedule,
    /// Mean planned utility over all requests.
    pub utility: f64,
    /// Number of candidates enumerated.
    pub candidates: u128,
}

/// Best schedule over all request orders and per-request model choices.
pub fn exact_global(
    problem: &Problem,
    source: AccuracySource<'_>,
    short_circuit: bool,
    mode: LatencyMode,
    budget: OracleBudget,
) -> Result<OracleResult> {
    let table = PlanTable::build(problem, source, short_circuit)?;
    let n = table.rows.len();
    let radix: Vec<usize> = table.rows.iter().map(|r| r.options.len()).collect();
    let candidates = candidate_count(n, radix.iter().copied());
    check_budget(candidates, budget)?;

    let mut perm: Vec<usize> = (0..n).collect();
    let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
    let mut seen = 0u128;
    loop {
        let slot_radix: Vec<usize> = perm.iter().map(|&p| radix[p]).collect();
        let mut digits = vec![0usize; n];
        loop {
            seen += 1;
            let total = run_sequence(&table, perm.iter().zip(&digits).map(|(&p, &o)| (p, o)), mode);
            if best.as_ref().map_or(true, |(u, _, _)| total > *u) {
                best = Some((total, perm.clone(), digits.clone()));
            }
            if !odometer(&mut digits, &slot_radix) {
                break;
            }
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    let (total, perm, digits) = best.expect("at least one candidate");
    let mut schedule = Schedule::new();
    for (&p, &o) in perm.iter().zip(&digits) {
        schedule.push(table.rows[p].id, table.rows[p].options[o].model, 0);
    }
    Ok(OracleResult {
        schedule,
        utility: mean(total, n),
        candidates: seen,
    })
}

/// Best schedule that runs each group contiguously on a single model.
/// `groups` must partition the problem's requests and each group must
/// belong to one application.
pub fn exact_grouped(
    groups: &[Vec<RequestId>],
    problem: &Problem,
    source: AccuracySource<'_>,
    short_circuit: bool,
    mode: LatencyMode,
    budget: OracleBudget,
) -> Result<OracleResult> {
    let table = PlanTable::build(problem, source, short_circuit)?;
    let mut seen = HashSet::new();
    let mut positions = Vec::with_capacity(groups.len());
    for group in groups {
        if group.is_empty() {
            return Err(Error::EmptyGroup);
        }
        let mut members = Vec::with_capacity(group.len());
        for &id in group {
            let pos = table
                .position(id)
                .ok_or_else(|| Error::invalid(format!("unknown request {id}")))?;
            if !seen.insert(id) {
                return Err(Error::invalid(format!("request {id} appears in two groups")));
            }
            if table.rows[pos].app != table.rows[members.first().copied().unwrap_or(pos)].app {
                return Err(Error::invalid("a group must hold requests of one application"));
            }
            members.push(pos);
        }
        sort_by_priority(&table, &mut members);
        positions.push(members);
    }
    if seen.len() != table.rows.len() {
        return Err(Error::invalid("groups must cover every request"));
    }
    search_grouped(&table, &positions, mode, budget)
}

/// Group-level search over prepared groups of row positions.
pub(crate) fn search_grouped(
    table: &PlanTable,
    groups: &[Vec<usize>],
    mode: LatencyMode,
    budget: OracleBudget,
) -> Result<OracleResult> {
    let g = groups.len();
    let radix: Vec<usize> = groups.iter().map(|m| table.rows[m[0]].options.len()).collect();
    let candidates = candidate_count(g, radix.iter().copied());
    check_budget(candidates, budget)?;

    let mut perm: Vec<usize> = (0..g).collect();
    let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
    let mut seen = 0u128;
    loop {
        let slot_radix: Vec<usize> = perm.iter().map(|&p| radix[p]).collect();
        let mut digits = vec![0usize; g];
        loop {
            seen += 1;
            let entries = perm
                .iter()
                .zip(&digits)
                .flat_map(|(&gi, &o)| groups[gi].iter().map(move |&p| (p, o)));
            let total = run_sequence(table, entries, mode);
            if best.as_ref().map_or(true, |(u, _, _)| total > *u) {
                best = Some((total, perm.clone(), digits.clone()));
            }
            if !odometer(&mut digits, &slot_radix) {
                break;
            }
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    let (total, perm, digits) = best.expect("at least one candidate");
    let mut schedule = Schedule::new();
    for (&gi, &o) in perm.iter().zip(&digits) {
        for &p in &groups[gi] {
            schedule.push(table.rows[p].id, table.rows[p].options[o].model, 0);
        }
    }
    Ok(OracleResult {
        schedule,
        utility: mean(total, table.rows.len()),
        candidates: seen,
    })
}

/// `n! · Π m_i`, saturating.
pub fn candidate_count(n: usize, options: impl IntoIterator<Item = usize>) -> u128 {
    options
        .into_iter()
        .fold(factorial(n), |acc, m| acc.saturating_mul(m as u128))
}

fn run_sequence(table: &PlanTable, entries: impl Iterator<Item = (usize, usize)>, mode: LatencyMode) -> f64 {
    let mut worker = table.fresh_workers()[0];
    let mut total = 0.0;
    for (pos, opt) in entries {
        total += table.utility_next(pos, opt, &worker, mode);
        let row = &table.rows[pos];
        worker.advance(row.app, &row.options[opt], mode);
    }
    total
}

fn mean(total: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        total / n as f64
    }
}

fn check_budget(candidates: u128, budget: OracleBudget) -> Result<()> {
    if candidates > budget.max_candidates {
        Err(Error::BudgetExceeded {
            candidates,
            budget: budget.max_candidates,
        })
    } else {
        Ok(())
    }
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).fold(1u128, |acc, k| acc.saturating_mul(k))
}

/// Advances a mixed-radix counter, last digit fastest. False on wrap.
fn odometer(digits: &mut [usize], radix: &[usize]) -> bool {
    for i in (0..digits.len()).rev() {
        digits[i] += 1;
        if digits[i] < radix[i] {
            return true;
        }
        digits[i] = 0;
    }
    false
}

/// Lexicographic successor; false once the last permutation is reached.
fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let Some(i) = (0..v.len() - 1).rev().find(|&i| v[i] < v[i + 1]) else {
        return false;
    };
    let j = (i + 1..v.len()).rev().find(|&j| v[j] > v[i]).expect("successor exists");
    v.swap(i, j);
    v[i + 1..].reverse();
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{AppId, AppSet, Application, ClassLabel, ModelProfile, ModelRef, Request};
    use crate::schedule::{schedule_utility, validate};
    use crate::scoring::PenaltySpec;

    fn profile(acc: f64, infer: f64, swap: f64) -> ModelProfile {
        let hit = acc * 100.0;
        ModelProfile::new("m", vec![vec![hit, 100.0 - hit], vec![100.0 - hit, hit]], infer, swap).unwrap()
    }

    fn problem(apps: &[(&str, Vec<ModelProfile>)], reqs: &[(&str, f64)]) -> Problem {
        let apps: AppSet = apps
            .iter()
            .map(|(id, models)| {
                Application::new(AppId::new(*id), 2, models.clone(), PenaltySpec::sigmoid(), None).unwrap()
            })
            .collect();
        let requests = reqs
            .iter()
            .enumerate()
            .map(|(i, (app, d))| {
                Request::new(RequestId(i as u64), AppId::new(*app), 0.0, *d, vec![], ClassLabel(0)).unwrap()
            })
            .collect();
        Problem::new(0.0, requests, apps)
    }

    #[test]
    fn permutations_are_lexicographic() {
        let mut v = vec![0, 1, 2];
        let mut all = vec![v.clone()];
        while next_permutation(&mut v) {
            all.push(v.clone());
        }
        assert_eq!(
            all,
            vec![[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]]
        );
    }

    #[test]
    fn global_counts() {
        let one = problem(&[("a", vec![profile(0.8, 10.0, 0.0)])], &[("a", 100.0)]);
        let r = exact_global(&one, AccuracySource::Profiled, false, LatencyMode::SequenceAware, OracleBudget::default())
            .unwrap();
        assert_eq!(r.candidates, 1);
        assert_eq!(r.schedule.entries[0].model, ModelRef::Variant(0));
        assert!((r.utility - 0.8).abs() < 1e-12);

        let three = problem(
            &[("a", vec![profile(0.9, 30.0, 5.0), profile(0.7, 10.0, 5.0)])],
            &[("a", 40.0), ("a", 60.0), ("a", 90.0)],
        );
        let r = exact_global(&three, AccuracySource::Profiled, false, LatencyMode::SequenceAware, OracleBudget::default())
            .unwrap();
        assert_eq!(r.candidates, 48);
        validate(&r.schedule, &three).unwrap();
        let u = schedule_utility(&r.schedule, &three, AccuracySource::Profiled, LatencyMode::SequenceAware).unwrap();
        assert!((u - r.utility).abs() < 1e-12);
    }

    #[test]
    fn grouped_counts_and_dominance() {
        let models = vec![profile(0.9, 30.0, 10.0), profile(0.7, 10.0, 10.0)];
        let p = problem(
            &[("a", models.clone()), ("b", models.clone()), ("c", models)],
            &[("a", 80.0), ("b", 60.0), ("c", 120.0), ("a", 100.0)],
        );
        let groups = vec![
            vec![RequestId(0), RequestId(3)],
            vec![RequestId(1)],
            vec![RequestId(2)],
        ];
        let mode = LatencyMode::SequenceAware;
        let g = exact_grouped(&groups, &p, AccuracySource::Profiled, false, mode, OracleBudget::default()).unwrap();
        assert_eq!(g.candidates, 48);
        validate(&g.schedule, &p).unwrap();
        let e = exact_global(&p, AccuracySource::Profiled, false, mode, OracleBudget::default()).unwrap();
        assert!(g.utility <= e.utility + 1e-12);

        let single = exact_grouped(
            &[vec![RequestId(0)]],
            &problem(&[("a", vec![profile(0.9, 30.0, 10.0), profile(0.7, 10.0, 10.0)])], &[("a", 80.0)]),
            AccuracySource::Profiled,
            false,
            mode,
            OracleBudget::default(),
        )
        .unwrap();
        assert_eq!(single.candidates, 2);
    }

    #[test]
    fn grouped_rejects_bad_partitions() {
        let models = vec![profile(0.9, 30.0, 10.0)];
        let p = problem(&[("a", models.clone()), ("b", models)], &[("a", 80.0), ("b", 60.0)]);
        let mode = LatencyMode::SequenceAware;
        let b = OracleBudget::default();
        let src = AccuracySource::Profiled;
        assert!(exact_grouped(&[vec![RequestId(0)]], &p, src, false, mode, b).is_err());
        assert!(exact_grouped(&[vec![RequestId(0), RequestId(1)]], &p, src, false, mode, b).is_err());
        assert!(matches!(
            exact_grouped(&[vec![RequestId(0)], vec![]], &p, src, false, mode, b),
            Err(Error::EmptyGroup)
        ));
    }

    #[test]
    fn budget_is_enforced() {
        let p = problem(
            &[("a", vec![profile(0.9, 30.0, 5.0), profile(0.7, 10.0, 5.0)])],
            &[("a", 40.0), ("a", 60.0), ("a", 90.0)],
        );
        let err = exact_global(
            &p,
            AccuracySource::Profiled,
            false,
            LatencyMode::SequenceAware,
            OracleBudget { max_candidates: 47 },
        )
        .unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { candidates: 48, budget: 47 }));
        assert_eq!(candidate_count(3, [2, 2, 2]), 48);
    }
}
