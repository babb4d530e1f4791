//! Static task-to-core assignment.

use std::cmp::Reverse;
use std::fmt;

use thiserror::Error;

use crate::analysis::{self, AnalysisError, Policy, Utilization, Verdict};
use crate::model::{ModelError, Partition, TaskSet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PartitionError {
    #[error("task `{0}` is not assigned to any core")]
    UnassignedTask(String),
    #[error("task `{task}` is assigned to core {core}, but only {cores} cores exist")]
    CoreIndexOutOfRange {
        task: String,
        core: usize,
        cores: usize,
    },
    #[error("partition names unknown task `{0}`")]
    UnknownTask(String),
    #[error("a platform needs at least one core")]
    NoCores,
    #[error("task `{0}` is aperiodic and cannot be placed by utilization")]
    AperiodicPresent(String),
    #[error("{0}")]
    Infeasible(InfeasibleReport),
}

/// Outcome of a failed first-fit-decreasing run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InfeasibleReport {
    /// Tasks that fit on no core, in placement order.
    pub unplaced: Vec<String>,
    /// Assignment of the tasks that did fit.
    pub partial: Partition,
}

impl fmt::Display for InfeasibleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "no core can host: {}", self.unplaced.join(", "))
    }
}

/// Checks that every task of `set` sits on exactly one existing core and
/// that the partition names no unknown tasks.
pub fn validate_manual(set: &TaskSet, partition: &Partition) -> Result<Partition, PartitionError> {
    if partition.core_count() == 0 {
        return Err(PartitionError::NoCores);
    }
    if let Some(unknown) = partition
        .assignment()
        .keys()
        .find(|id| set.get(id).is_none())
    {
        return Err(PartitionError::UnknownTask(unknown.clone()));
    }
    for task in set {
        match partition.core_of(task.id()) {
            None => return Err(PartitionError::UnassignedTask(task.id().to_string())),
            Some(core) if core >= partition.core_count() => {
                return Err(PartitionError::CoreIndexOutOfRange {
                    task: task.id().to_string(),
                    core,
                    cores: partition.core_count(),
                })
            }
            Some(_) => {}
        }
    }
    Ok(partition.clone())
}

/// Whether a core running `tasks` under `policy` is guaranteed by the
/// closed-form tests (exact EDF utilization or density, Liu–Layland bound
/// with time-demand fallback).
pub fn core_admits(tasks: &TaskSet, policy: Policy) -> Result<bool, AnalysisError> {
    let (verdict, _, _) = analysis::static_core_verdict(tasks, policy)?;
    Ok(verdict == Verdict::Guaranteed)
}

/// First-fit decreasing: tasks in order of decreasing utilization (ties in
/// canonical order) go to the lowest-index core that still passes
/// [`core_admits`]. Tasks are never split across cores.
pub fn first_fit_decreasing(
    set: &TaskSet,
    cores: usize,
    policy: Policy,
) -> Result<Partition, PartitionError> {
    if cores == 0 {
        return Err(PartitionError::NoCores);
    }
    let mut order = Vec::with_capacity(set.len());
    for (pos, task) in set.iter().enumerate() {
        let period = task
            .period()
            .ok_or_else(|| PartitionError::AperiodicPresent(task.id().to_string()))?;
        order.push((Utilization::new(task.wcet(), period), pos, task));
    }
    order.sort_by_key(|(u, pos, _)| (Reverse(u.clone()), *pos));

    let mut partition = Partition::new(cores);
    let mut unplaced = Vec::new();
    for (_, _, task) in order {
        let mut placed = false;
        for core in 0..cores {
            partition.assign(task.id(), core);
            let candidate = partition.tasks_on(set, core);
            if core_admits(&candidate, policy).map_err(unexpected)? {
                placed = true;
                break;
            }
        }
        if !placed {
            partition.unassign(task.id());
            unplaced.push(task.id().to_string());
        }
    }
    if unplaced.is_empty() {
        Ok(partition)
    } else {
        Err(PartitionError::Infeasible(InfeasibleReport {
            unplaced,
            partial: partition,
        }))
    }
}

fn unexpected(e: AnalysisError) -> PartitionError {
    match e {
        AnalysisError::Model(ModelError::AperiodicPresent(id)) => {
            PartitionError::AperiodicPresent(id)
        }
        AnalysisError::Partition(p) => p,
        // periods are present and tick arithmetic on validated sets stays in
        // range for any realistic input
        other => panic!("placement test failed unexpectedly: {other}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TaskDef;

    fn set(params: &[(u64, u64)]) -> TaskSet {
        TaskSet::validate(
            params
                .iter()
                .enumerate()
                .map(|(i, &(c, t))| TaskDef::periodic(format!("t{}", i + 1), t, c)),
        )
        .unwrap()
    }

    #[test]
    fn manual_quad_core() {
        let s = set(&[(1, 4), (1, 4), (1, 4), (1, 4)]);
        let p = Partition::from_pairs(4, [("t1", 0), ("t2", 1), ("t3", 2), ("t4", 3)]);
        assert_eq!(validate_manual(&s, &p), Ok(p));
    }

    #[test]
    fn manual_errors() {
        let s = set(&[(1, 4), (1, 4)]);
        let p = Partition::from_pairs(4, [("t1", 0), ("t2", 4)]);
        assert_eq!(
            validate_manual(&s, &p),
            Err(PartitionError::CoreIndexOutOfRange {
                task: "t2".into(),
                core: 4,
                cores: 4
            })
        );
        let p = Partition::from_pairs(4, [("t1", 0)]);
        assert_eq!(
            validate_manual(&s, &p),
            Err(PartitionError::UnassignedTask("t2".into()))
        );
        let p = Partition::from_pairs(4, [("t1", 0), ("t2", 0), ("x", 1)]);
        assert_eq!(
            validate_manual(&s, &p),
            Err(PartitionError::UnknownTask("x".into()))
        );
        assert_eq!(
            validate_manual(&s, &Partition::new(0)),
            Err(PartitionError::NoCores)
        );
    }

    #[test]
    fn pigeonhole_is_infeasible() {
        let s = set(&[(3, 5), (3, 5), (3, 5)]);
        match first_fit_decreasing(&s, 2, Policy::Edf) {
            Err(PartitionError::Infeasible(r)) => {
                assert_eq!(r.unplaced, ["t3"]);
                assert_eq!(r.partial.core_of("t1"), Some(0));
                assert_eq!(r.partial.core_of("t2"), Some(1));
                assert_eq!(r.partial.core_of("t3"), None);
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
        let p = first_fit_decreasing(&s, 3, Policy::Edf).unwrap();
        assert_eq!(
            [p.core_of("t1"), p.core_of("t2"), p.core_of("t3")],
            [Some(0), Some(1), Some(2)]
        );
    }

    #[test]
    fn ffd_packs_by_decreasing_utilization() {
        // U = 0.9, 0.5, 0.4, 0.1 given out of order
        let s = set(&[(4, 10), (1, 10), (9, 10), (5, 10)]);
        let p = first_fit_decreasing(&s, 2, Policy::Edf).unwrap();
        assert_eq!(p.core_of("t3"), Some(0));
        assert_eq!(p.core_of("t2"), Some(0));
        assert_eq!(p.core_of("t4"), Some(1));
        assert_eq!(p.core_of("t1"), Some(1));
    }

    #[test]
    fn ffd_rm_uses_tda_after_bound() {
        // U = 0.836 > W3 but TDA passes, so one RM core holds all three
        let s = set(&[(2, 5), (2, 7), (3, 20)]);
        let p = first_fit_decreasing(&s, 1, Policy::Rm).unwrap();
        assert_eq!(p.tasks_on(&s, 0).len(), 3);
    }

    #[test]
    fn ffd_rejects_aperiodic_and_empty_platform() {
        let s = TaskSet::validate(vec![TaskDef::aperiodic("x", 1, 5)]).unwrap();
        assert_eq!(
            first_fit_decreasing(&s, 2, Policy::Edf),
            Err(PartitionError::AperiodicPresent("x".into()))
        );
        assert_eq!(
            first_fit_decreasing(&set(&[]), 0, Policy::Edf),
            Err(PartitionError::NoCores)
        );
        assert_eq!(
            first_fit_decreasing(&set(&[]), 4, Policy::Edf)
                .unwrap()
                .assignment()
                .len(),
            0
        );
    }
}
