//! Task model: tasks, jobs, task sets and core partitions.
//!
//! Time is measured in integer ticks. All arithmetic that can grow
//! (releases, hyperperiods) is checked and reports [`ModelError::Overflow`]
//! instead of wrapping.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use num_integer::Integer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A point in simulated time, in ticks.
pub type Tick = u64;

/// A length of simulated time, in ticks.
pub type Duration = u64;

/// Default number of cores (quad-core platform).
pub const DEFAULT_CORES: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("duplicate task id `{0}`")]
    DuplicateId(String),
    #[error("task `{0}` needs a period")]
    MissingPeriod(String),
    #[error("aperiodic task `{0}` must not declare a period")]
    UnexpectedPeriod(String),
    #[error("aperiodic task `{0}` needs an explicit relative deadline")]
    MissingDeadline(String),
    #[error("task `{0}`: wcet exceeds its relative deadline")]
    WcetExceedsDeadline(String),
    #[error("task `{task}`: {field} must be at least 1 tick")]
    ZeroDuration { task: String, field: &'static str },
    #[error("task `{0}` is aperiodic; the operation needs periodic or sporadic tasks")]
    AperiodicPresent(String),
    #[error("task `{0}` is not periodic")]
    NotPeriodic(String),
    #[error("tick arithmetic overflowed")]
    Overflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Periodic,
    Sporadic,
    Aperiodic,
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskKind::Periodic => "periodic",
            TaskKind::Sporadic => "sporadic",
            TaskKind::Aperiodic => "aperiodic",
        })
    }
}

/// Unvalidated task parameters, as read from an input document.
///
/// `deadline` may be omitted for periodic and sporadic tasks, in which case
/// it defaults to the period.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskDef {
    pub id: String,
    pub kind: TaskKind,
    pub phase: Duration,
    pub period: Option<Duration>,
    pub wcet: Duration,
    pub deadline: Option<Duration>,
}

impl TaskDef {
    pub fn periodic(id: impl Into<String>, period: Duration, wcet: Duration) -> Self {
        TaskDef {
            id: id.into(),
            kind: TaskKind::Periodic,
            phase: 0,
            period: Some(period),
            wcet,
            deadline: None,
        }
    }

    pub fn sporadic(id: impl Into<String>, min_interarrival: Duration, wcet: Duration) -> Self {
        TaskDef {
            kind: TaskKind::Sporadic,
            ..TaskDef::periodic(id, min_interarrival, wcet)
        }
    }

    pub fn aperiodic(id: impl Into<String>, wcet: Duration, deadline: Duration) -> Self {
        TaskDef {
            id: id.into(),
            kind: TaskKind::Aperiodic,
            phase: 0,
            period: None,
            wcet,
            deadline: Some(deadline),
        }
    }

    pub fn with_phase(mut self, phase: Duration) -> Self {
        self.phase = phase;
        self
    }

    pub fn with_deadline(mut self, deadline: Duration) -> Self {
        self.deadline = Some(deadline);
        self
    }
}

/// Validated static parameters of one task.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TaskSpec {
    id: String,
    kind: TaskKind,
    phase: Duration,
    period: Option<Duration>,
    wcet: Duration,
    deadline: Duration,
}

impl TaskSpec {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn kind(&self) -> TaskKind {
        self.kind
    }

    /// Offset of the first release from time zero.
    pub fn phase(&self) -> Duration {
        self.phase
    }

    /// Period for periodic tasks, minimum interarrival for sporadic tasks,
    /// `None` for aperiodic tasks.
    pub fn period(&self) -> Option<Duration> {
        self.period
    }

    pub fn wcet(&self) -> Duration {
        self.wcet
    }

    /// Relative deadline.
    pub fn deadline(&self) -> Duration {
        self.deadline
    }

    pub fn is_periodic(&self) -> bool {
        self.kind == TaskKind::Periodic
    }

    /// Period, or [`ModelError::AperiodicPresent`] for aperiodic tasks.
    pub fn require_period(&self) -> Result<Duration, ModelError> {
        self.period
            .ok_or_else(|| ModelError::AperiodicPresent(self.id.clone()))
    }

    pub(crate) fn with_phase(&self, phase: Duration) -> TaskSpec {
        TaskSpec {
            phase,
            ..self.clone()
        }
    }
}

impl From<&TaskSpec> for TaskDef {
    fn from(t: &TaskSpec) -> Self {
        TaskDef {
            id: t.id.clone(),
            kind: t.kind,
            phase: t.phase,
            period: t.period,
            wcet: t.wcet,
            deadline: Some(t.deadline),
        }
    }
}

fn validate_task(def: TaskDef) -> Result<TaskSpec, ModelError> {
    let zero = |field| ModelError::ZeroDuration {
        task: def.id.clone(),
        field,
    };
    if def.wcet == 0 {
        return Err(zero("wcet"));
    }
    let period = match (def.kind, def.period) {
        (TaskKind::Aperiodic, Some(_)) => return Err(ModelError::UnexpectedPeriod(def.id)),
        (TaskKind::Aperiodic, None) => None,
        (_, None) => return Err(ModelError::MissingPeriod(def.id)),
        (_, Some(0)) => return Err(zero("period")),
        (_, Some(p)) => Some(p),
    };
    let deadline = match def.deadline.or(period) {
        Some(0) => return Err(zero("deadline")),
        Some(d) => d,
        None => return Err(ModelError::MissingDeadline(def.id)),
    };
    if def.wcet > deadline {
        return Err(ModelError::WcetExceedsDeadline(def.id));
    }
    Ok(TaskSpec {
        id: def.id,
        kind: def.kind,
        phase: def.phase,
        period,
        wcet: def.wcet,
        deadline,
    })
}

/// An ordered, validated collection of tasks.
///
/// The input order is canonical: it breaks every remaining tie in priority
/// orderings, so results never depend on hashing or sorting stability.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TaskSet {
    tasks: Vec<TaskSpec>,
}

impl TaskSet {
    /// Validates raw task definitions, preserving their order.
    pub fn validate(raw: impl IntoIterator<Item = TaskDef>) -> Result<TaskSet, ModelError> {
        let mut seen = HashSet::new();
        let mut tasks = Vec::new();
        for def in raw {
            if !seen.insert(def.id.clone()) {
                return Err(ModelError::DuplicateId(def.id));
            }
            tasks.push(validate_task(def)?);
        }
        Ok(TaskSet { tasks })
    }

    pub fn tasks(&self) -> &[TaskSpec] {
        &self.tasks
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&TaskSpec> {
        self.tasks.iter().find(|t| t.id == id)
    }

    /// Position of a task in canonical order.
    pub fn position(&self, id: &str) -> Option<usize> {
        self.tasks.iter().position(|t| t.id == id)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, TaskSpec> {
        self.tasks.iter()
    }

    /// Raw definitions equivalent to this set (deadlines made explicit).
    pub fn to_defs(&self) -> Vec<TaskDef> {
        self.tasks.iter().map(TaskDef::from).collect()
    }

    /// Sub-set of the tasks whose ids satisfy `keep`, in canonical order.
    pub fn filter(&self, mut keep: impl FnMut(&TaskSpec) -> bool) -> TaskSet {
        TaskSet {
            tasks: self.tasks.iter().filter(|t| keep(t)).cloned().collect(),
        }
    }

    /// Copy of this set with every phase set to zero.
    pub fn synchronous(&self) -> TaskSet {
        TaskSet {
            tasks: self.tasks.iter().map(|t| t.with_phase(0)).collect(),
        }
    }
}

impl<'a> IntoIterator for &'a TaskSet {
    type Item = &'a TaskSpec;
    type IntoIter = std::slice::Iter<'a, TaskSpec>;

    fn into_iter(self) -> Self::IntoIter {
        self.tasks.iter()
    }
}

/// Validates a task set; equivalent to [`TaskSet::validate`].
pub fn validate_task_set(raw: impl IntoIterator<Item = TaskDef>) -> Result<TaskSet, ModelError> {
    TaskSet::validate(raw)
}

/// Least common multiple of all periods (sporadic tasks contribute their
/// minimum interarrival). The empty set has hyperperiod 1.
pub fn hyperperiod(set: &TaskSet) -> Result<Duration, ModelError> {
    set.iter().try_fold(1u64, |acc, t| {
        let p = t.require_period()?;
        let g = acc.gcd(&p);
        (acc / g).checked_mul(p).ok_or(ModelError::Overflow)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Pending,
    Ready,
    Running,
    Completed,
    Late,
}

/// One released instance of a task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Job {
    pub task_id: String,
    /// 1-based index within the task.
    pub index: u64,
    pub release: Tick,
    pub abs_deadline: Tick,
    pub executed: Duration,
    pub state: JobState,
}

impl Job {
    pub fn new(task: &TaskSpec, index: u64, release: Tick) -> Result<Job, ModelError> {
        Ok(Job {
            task_id: task.id.clone(),
            index,
            release,
            abs_deadline: release
                .checked_add(task.deadline)
                .ok_or(ModelError::Overflow)?,
            executed: 0,
            state: JobState::Ready,
        })
    }
}

/// Jobs of a periodic task released strictly before `horizon`.
pub fn release_series(task: &TaskSpec, horizon: Duration) -> Result<Vec<Job>, ModelError> {
    if task.kind != TaskKind::Periodic {
        return Err(ModelError::NotPeriodic(task.id.clone()));
    }
    let period = task.require_period()?;
    let mut jobs = Vec::new();
    let mut release = task.phase;
    let mut index = 1;
    while release < horizon {
        jobs.push(Job::new(task, index, release)?);
        index += 1;
        release = match release.checked_add(period) {
            Some(r) => r,
            None => break,
        };
    }
    Ok(jobs)
}

/// Static assignment of tasks to cores. A task lives on exactly one core
/// for the whole run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    core_count: usize,
    assignment: BTreeMap<String, usize>,
}

impl Default for Partition {
    fn default() -> Self {
        Partition::new(DEFAULT_CORES)
    }
}

impl Partition {
    pub fn new(core_count: usize) -> Self {
        Partition {
            core_count,
            assignment: BTreeMap::new(),
        }
    }

    /// Builds a partition from `(task id, core)` pairs without checking
    /// them; see [`crate::partition::validate_manual`].
    pub fn from_pairs<S: Into<String>>(
        core_count: usize,
        pairs: impl IntoIterator<Item = (S, usize)>,
    ) -> Self {
        Partition {
            core_count,
            assignment: pairs.into_iter().map(|(id, c)| (id.into(), c)).collect(),
        }
    }

    pub fn core_count(&self) -> usize {
        self.core_count
    }

    pub fn assign(&mut self, task_id: impl Into<String>, core: usize) {
        self.assignment.insert(task_id.into(), core);
    }

    pub fn unassign(&mut self, task_id: &str) -> Option<usize> {
        self.assignment.remove(task_id)
    }

    pub fn core_of(&self, task_id: &str) -> Option<usize> {
        self.assignment.get(task_id).copied()
    }

    pub fn assignment(&self) -> &BTreeMap<String, usize> {
        &self.assignment
    }

    /// Tasks of `set` mapped to `core`, in canonical order.
    pub fn tasks_on(&self, set: &TaskSet, core: usize) -> TaskSet {
        set.filter(|t| self.core_of(t.id()) == Some(core))
    }
}
