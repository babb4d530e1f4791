//! Tick-driven preemptive scheduling simulator for a partitioned platform.
//!
//! Each core is simulated independently; tasks never migrate and cores
//! share nothing. At every integer instant `t` a core
//!
//! 1. flags jobs whose absolute deadline is `t` and which are unfinished
//!    (`deadline_miss`), then demotes them to the background band or drops
//!    them, depending on [`LatePolicy`];
//! 2. releases new jobs, running the admission test for sporadic jobs on
//!    EDF cores;
//! 3. picks the best job (foreground band by policy, then background band by
//!    earliest deadline) and runs it for the tick `[t, t + 1)`.
//!
//! Deadlines falling exactly on the horizon are still checked, so a run over
//! `[0, H)` reports every miss of a job whose deadline is at most `H`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::Policy;
use crate::model::{
    Duration, Job, JobState, ModelError, Partition, TaskKind, TaskSet, TaskSpec, Tick,
};
use crate::partition::{self, PartitionError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("invalid partition: {0}")]
    InvalidPartition(#[from] PartitionError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("policy list covers {given} cores but the partition has {expected}")]
    PolicyCount { given: usize, expected: usize },
    #[error("the simulation horizon must be at least 1 tick")]
    ZeroHorizon,
    #[error("arrival names unknown task `{0}`")]
    UnknownTask(String),
    #[error("arrival for task `{task}` is not allowed: the task is {kind}")]
    WrongArrivalKind { task: String, kind: TaskKind },
    #[error("arrivals of sporadic task `{task}` at {at} violate its minimum interarrival")]
    InterarrivalViolation { task: String, at: Tick },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdmissionError {
    #[error("task `{0}` is not sporadic")]
    NotSporadic(String),
    #[error("task `{task}` does not belong to core {core}")]
    WrongCore { task: String, core: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseMode {
    #[default]
    AsSpecified,
    /// Every periodic task releases its first job at time zero.
    CriticalInstant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatePolicy {
    /// Late jobs keep running, below all timely work.
    #[default]
    Demote,
    /// Late jobs are discarded at the miss instant.
    Abort,
}

/// An injected job arrival.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Arrival {
    pub task_id: String,
    pub release: Tick,
}

impl Arrival {
    pub fn new(task_id: impl Into<String>, release: Tick) -> Self {
        Arrival {
            task_id: task_id.into(),
            release,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SporadicArrivals {
    /// Exactly these arrivals; they must respect each task's minimum
    /// interarrival.
    Explicit(Vec<Arrival>),
    /// Arrivals drawn from [`Lcg64`] seeded with [`SimConfig::seed`]; see
    /// [`generate_sporadic_arrivals`].
    Seeded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimConfig {
    pub tasks: TaskSet,
    pub partition: Partition,
    /// One policy per core.
    pub policies: Vec<Policy>,
    pub horizon: Duration,
    pub phase_mode: PhaseMode,
    pub late_policy: LatePolicy,
    pub sporadic_arrivals: SporadicArrivals,
    /// Arrivals of aperiodic jobs.
    pub aperiodic_arrivals: Vec<Arrival>,
    pub seed: u64,
}

impl SimConfig {
    /// Config with phases as specified, late-job demotion, seeded sporadic
    /// arrivals with seed 0 and no aperiodic arrivals.
    pub fn new(
        tasks: TaskSet,
        partition: Partition,
        policies: Vec<Policy>,
        horizon: Duration,
    ) -> Self {
        SimConfig {
            tasks,
            partition,
            policies,
            horizon,
            phase_mode: PhaseMode::AsSpecified,
            late_policy: LatePolicy::Demote,
            sporadic_arrivals: SporadicArrivals::Seeded,
            aperiodic_arrivals: Vec::new(),
            seed: 0,
        }
    }

    /// All tasks on one core under `policy`.
    pub fn uniprocessor(tasks: TaskSet, policy: Policy, horizon: Duration) -> Self {
        let partition = Partition::from_pairs(1, tasks.iter().map(|t| (t.id().to_string(), 0)));
        SimConfig::new(tasks, partition, vec![policy], horizon)
    }
}

/// Aligns every periodic task's first release at time zero. Sporadic and
/// aperiodic arrivals are left untouched.
pub fn critical_instant(config: &SimConfig) -> SimConfig {
    SimConfig {
        phase_mode: PhaseMode::CriticalInstant,
        ..config.clone()
    }
}

/// 64-bit linear congruential generator (Knuth's MMIX constants).
///
/// `state' = state * 6364136223846793005 + 1442695040888963407 (mod 2^64)`;
/// each draw advances the state once and returns its upper 32 bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lcg64 {
    state: u64,
}

impl Lcg64 {
    pub const MULTIPLIER: u64 = 6_364_136_223_846_793_005;
    pub const INCREMENT: u64 = 1_442_695_040_888_963_407;

    pub fn new(seed: u64) -> Self {
        Lcg64 { state: seed }
    }

    pub fn next_u32(&mut self) -> u32 {
        self.state = self
            .state
            .wrapping_mul(Self::MULTIPLIER)
            .wrapping_add(Self::INCREMENT);
        (self.state >> 32) as u32
    }

    /// Uniform-ish draw in `0..=max` by reduction modulo `max + 1`.
    pub fn up_to(&mut self, max: u64) -> u64 {
        match max.checked_add(1) {
            Some(m) => u64::from(self.next_u32()) % m,
            None => u64::from(self.next_u32()),
        }
    }
}

/// Pseudo-random arrivals for every sporadic task, in canonical task order,
/// from one generator seeded with `seed`.
///
/// For a task with minimum interarrival `T` and phase `φ`, the first arrival
/// is `φ + up_to(T)` and each later one adds `T + up_to(T)`, so gaps lie in
/// `[T, 2T]`. Arrivals at or past `horizon` are not generated.
pub fn generate_sporadic_arrivals(tasks: &TaskSet, horizon: Duration, seed: u64) -> Vec<Arrival> {
    let mut rng = Lcg64::new(seed);
    let mut out = Vec::new();
    for task in tasks.iter().filter(|t| t.kind() == TaskKind::Sporadic) {
        let period = task.period().unwrap_or(1);
        let mut at = task.phase().checked_add(rng.up_to(period));
        while let Some(t) = at.filter(|&t| t < horizon) {
            out.push(Arrival::new(task.id(), t));
            at = t
                .checked_add(period)
                .and_then(|t| t.checked_add(rng.up_to(period)));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Release,
    Admit,
    Reject,
    DeadlineMiss,
    Demote,
    Preempt,
    Dispatch,
    Complete,
    IdleStart,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Release => "release",
            EventKind::Admit => "admit",
            EventKind::Reject => "reject",
            EventKind::DeadlineMiss => "deadline_miss",
            EventKind::Demote => "demote",
            EventKind::Preempt => "preempt",
            EventKind::Dispatch => "dispatch",
            EventKind::Complete => "complete",
            EventKind::IdleStart => "idle_start",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "release" => EventKind::Release,
            "admit" => EventKind::Admit,
            "reject" => EventKind::Reject,
            "deadline_miss" => EventKind::DeadlineMiss,
            "demote" => EventKind::Demote,
            "preempt" => EventKind::Preempt,
            "dispatch" => EventKind::Dispatch,
            "complete" => EventKind::Complete,
            "idle_start" => EventKind::IdleStart,
            other => return Err(format!("unknown event kind `{other}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct JobRef {
    pub task_id: String,
    pub index: u64,
    pub abs_deadline: Tick,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TraceEvent {
    pub time: Tick,
    pub core: usize,
    pub kind: EventKind,
    /// `None` only for `idle_start`.
    pub job: Option<JobRef>,
}

impl TraceEvent {
    pub fn task_id(&self) -> Option<&str> {
        self.job.as_ref().map(|j| j.task_id.as_str())
    }
}

/// A maximal interval during which one job ran uninterrupted on a core.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub core: usize,
    pub task_id: String,
    pub job: u64,
    pub start: Tick,
    pub end: Tick,
}

impl Segment {
    pub fn len(&self) -> Duration {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub horizon: Duration,
    pub cores: usize,
    /// Sorted by time, core, event kind, canonical task order, job index.
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn misses(&self) -> impl Iterator<Item = &TraceEvent> {
        self.events
            .iter()
            .filter(|e| e.kind == EventKind::DeadlineMiss)
    }

    /// Execution intervals reconstructed from dispatch, preempt, complete and
    /// idle events. A job runs from its dispatch until it is preempted,
    /// completes, or another dispatch or idle period starts on its core.
    pub fn segments(&self) -> Vec<Segment> {
        let mut open: Vec<Option<Segment>> = vec![None; self.cores];
        let mut out = Vec::new();
        for e in &self.events {
            let slot = &mut open[e.core];
            let closes = match (&e.kind, slot.as_ref(), e.job.as_ref()) {
                (EventKind::Dispatch | EventKind::IdleStart, Some(_), _) => true,
                (EventKind::Preempt | EventKind::Complete, Some(s), Some(j)) => {
                    s.task_id == j.task_id && s.job == j.index
                }
                _ => false,
            };
            if closes {
                let mut s = slot.take().unwrap();
                s.end = e.time;
                if !s.is_empty() {
                    out.push(s);
                }
            }
            if let (EventKind::Dispatch, Some(j)) = (e.kind, e.job.as_ref()) {
                *slot = Some(Segment {
                    core: e.core,
                    task_id: j.task_id.clone(),
                    job: j.index,
                    start: e.time,
                    end: e.time,
                });
            }
        }
        for s in open.into_iter().flatten() {
            let end = self.horizon;
            if end > s.start {
                out.push(Segment { end, ..s });
            }
        }
        out.sort_by_key(|s| (s.core, s.start));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TaskStats {
    pub task_id: String,
    pub core: usize,
    pub released: u64,
    pub rejected: u64,
    pub completed: u64,
    pub misses: u64,
    pub preemptions: u64,
    pub executed_ticks: u64,
    pub max_response: Option<Duration>,
    pub avg_response: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CoreStats {
    pub core: usize,
    pub busy_ticks: u64,
    pub idle_ticks: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimStats {
    /// In canonical task order.
    pub tasks: Vec<TaskStats>,
    pub cores: Vec<CoreStats>,
    pub total_misses: u64,
}

impl SimStats {
    pub fn task(&self, id: &str) -> Option<&TaskStats> {
        self.tasks.iter().find(|t| t.task_id == id)
    }
}

/// Earliest release first, then canonical task order, then job index.
///
/// Breaks ties among jobs that share a core and the policy's top priority
/// key. Tasks missing from `set` order after all known tasks.
pub fn tie_break<'a>(candidates: &'a [Job], set: &TaskSet) -> Option<&'a Job> {
    candidates.iter().min_by_key(|j| {
        (
            j.release,
            set.position(&j.task_id).unwrap_or(usize::MAX),
            j.index,
        )
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Band {
    Foreground,
    Background,
}

#[derive(Debug, Clone)]
struct ActiveJob {
    job: Job,
    /// Index into `CoreState::tasks`.
    task: usize,
    band: Band,
    sporadic_admitted: bool,
}

/// Longest busy period the sporadic admission test will examine.
pub const MAX_ADMISSION_WINDOW: Duration = 10_000_000;

#[derive(Debug, Clone)]
struct CoreTask {
    spec: TaskSpec,
    /// Position in the full task set.
    pos: usize,
    next_index: u64,
    next_release: Option<Tick>,
    stats: TaskStats,
    response_sum: u128,
}

impl CoreTask {
    /// Release time of this periodic task's first job at or after `now` that
    /// has not been released yet.
    fn first_unreleased(&self, now: Tick) -> Option<Tick> {
        let mut release = self.next_release?;
        let period = self.spec.period()?;
        while release < now {
            release = release.checked_add(period)?;
        }
        Some(release)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Activity {
    Unstarted,
    Busy,
    Idle,
}

/// Admission decision for a sporadic job.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    Admit,
    Reject,
}

/// Mutable state of one core during a run.
#[derive(Debug, Clone)]
pub struct CoreState {
    core: usize,
    policy: Policy,
    late_policy: LatePolicy,
    tasks: Vec<CoreTask>,
    jobs: Vec<ActiveJob>,
    /// Index into `jobs` of the job that ran in the previous tick.
    running: Option<(usize, u64)>,
    activity: Activity,
    busy: u64,
    idle: u64,
    events: Vec<(EventKey, TraceEvent)>,
}

type EventKey = (Tick, usize, EventKind, usize, u64);
type CoreRun = (Vec<(EventKey, TraceEvent)>, Vec<TaskStats>, CoreStats);

impl CoreState {
    /// State for `core` hosting `tasks` (all drawn from `set`, whose order
    /// is canonical). Periodic tasks release their first job at their phase,
    /// or at zero under [`PhaseMode::CriticalInstant`].
    pub fn new(
        core: usize,
        policy: Policy,
        late_policy: LatePolicy,
        phase_mode: PhaseMode,
        tasks: &TaskSet,
        set: &TaskSet,
    ) -> Self {
        let tasks = tasks
            .iter()
            .map(|t| {
                let phase = match phase_mode {
                    PhaseMode::AsSpecified => t.phase(),
                    PhaseMode::CriticalInstant => 0,
                };
                CoreTask {
                    spec: t.clone(),
                    pos: set.position(t.id()).unwrap_or(usize::MAX),
                    next_index: 1,
                    next_release: t.is_periodic().then_some(phase),
                    stats: TaskStats {
                        task_id: t.id().to_string(),
                        core,
                        ..TaskStats::default()
                    },
                    response_sum: 0,
                }
            })
            .collect();
        CoreState {
            core,
            policy,
            late_policy,
            tasks,
            jobs: Vec::new(),
            running: None,
            activity: Activity::Unstarted,
            busy: 0,
            idle: 0,
            events: Vec::new(),
        }
    }

    /// Jobs currently held by the core (released, unfinished, not dropped).
    pub fn jobs(&self) -> impl Iterator<Item = &Job> {
        self.jobs.iter().map(|a| &a.job)
    }

    fn task_index(&self, id: &str) -> Option<usize> {
        self.tasks.iter().position(|t| t.spec.id() == id)
    }

    fn emit(&mut self, time: Tick, kind: EventKind, job: Option<(&Job, usize)>) {
        let (pos, index, jref) = match job {
            Some((j, pos)) => (
                pos,
                j.index,
                Some(JobRef {
                    task_id: j.task_id.clone(),
                    index: j.index,
                    abs_deadline: j.abs_deadline,
                }),
            ),
            None => (usize::MAX, 0, None),
        };
        self.events.push((
            (time, self.core, kind, pos, index),
            TraceEvent {
                time,
                core: self.core,
                kind,
                job: jref,
            },
        ));
    }

    fn emit_for(&mut self, time: Tick, kind: EventKind, slot: usize) {
        let job = self.jobs[slot].job.clone();
        let pos = self.tasks[self.jobs[slot].task].pos;
        self.emit(time, kind, Some((&job, pos)));
    }

    /// Sporadic admission on an EDF core.
    ///
    /// The job is accepted iff, for every absolute deadline `d` up to the
    /// check horizon, the remaining work of all timely jobs with deadlines at
    /// most `d` fits in `d - now`. Counted work covers pending jobs, the new
    /// job, and periodic jobs still to be released. The check horizon is the
    /// latest deadline among the new job and the admitted sporadic jobs, or
    /// the end of the busy period the new job would extend, whichever is
    /// later. A busy period longer than [`MAX_ADMISSION_WINDOW`] rejects.
    pub fn admit_sporadic(&self, job: &Job, now: Tick) -> Result<Admission, AdmissionError> {
        let task = self
            .task_index(&job.task_id)
            .ok_or_else(|| AdmissionError::WrongCore {
                task: job.task_id.clone(),
                core: self.core,
            })?;
        if self.tasks[task].spec.kind() != TaskKind::Sporadic {
            return Err(AdmissionError::NotSporadic(job.task_id.clone()));
        }
        let timely = || self.jobs.iter().filter(|a| a.band == Band::Foreground);
        let remaining = |a: &ActiveJob| u128::from(self.tasks[a.task].spec.wcet() - a.job.executed);
        let new_work = u128::from(self.tasks[task].spec.wcet() - job.executed);

        let Some(busy_end) =
            self.busy_period_end(now, timely().map(remaining).sum::<u128>() + new_work)
        else {
            return Ok(Admission::Reject);
        };
        let horizon = timely()
            .filter(|a| a.sporadic_admitted)
            .map(|a| a.job.abs_deadline)
            .fold(job.abs_deadline.max(busy_end), Tick::max);

        let mut demand: Vec<(Tick, u128)> = timely()
            .filter(|a| a.job.abs_deadline <= horizon)
            .map(|a| (a.job.abs_deadline, remaining(a)))
            .collect();
        demand.push((job.abs_deadline, new_work));
        for t in self.tasks.iter().filter(|t| t.spec.is_periodic()) {
            let Some(mut release) = t.first_unreleased(now) else {
                continue;
            };
            let period = t.spec.period().unwrap_or(u64::MAX);
            while let Some(deadline) = release.checked_add(t.spec.deadline()) {
                if deadline > horizon {
                    break;
                }
                demand.push((deadline, u128::from(t.spec.wcet())));
                match release.checked_add(period) {
                    Some(r) => release = r,
                    None => break,
                }
            }
        }
        demand.sort_unstable();
        let mut acc = 0u128;
        for (i, &(deadline, work)) in demand.iter().enumerate() {
            acc += work;
            let last_at_deadline = demand.get(i + 1).is_none_or(|n| n.0 != deadline);
            if last_at_deadline && acc > u128::from(deadline.saturating_sub(now)) {
                return Ok(Admission::Reject);
            }
        }
        Ok(Admission::Admit)
    }

    /// First instant at or after `now` where `backlog` plus all periodic work
    /// released from `now` on has been served, assuming no idling.
    fn busy_period_end(&self, now: Tick, backlog: u128) -> Option<Tick> {
        let periodic: Vec<(Tick, u64, u64)> = self
            .tasks
            .iter()
            .filter(|t| t.spec.is_periodic())
            .filter_map(|t| Some((t.first_unreleased(now)?, t.spec.period()?, t.spec.wcet())))
            .collect();
        let mut len = backlog;
        loop {
            if len > u128::from(MAX_ADMISSION_WINDOW) {
                return None;
            }
            let end = now + len as u64;
            let released: u128 = periodic
                .iter()
                .filter(|&&(first, _, _)| first < end)
                .map(|&(first, period, wcet)| {
                    u128::from((end - first).div_ceil(period)) * u128::from(wcet)
                })
                .sum();
            let work = backlog + released;
            if work == len {
                return Some(end);
            }
            len = work;
        }
    }

    /// Flags unfinished jobs whose deadline is `now`. Under
    /// [`LatePolicy::Demote`] they move below all timely work; under
    /// [`LatePolicy::Abort`] they are dropped.
    pub fn demote_late(&mut self, now: Tick) -> Vec<TraceEvent> {
        let start = self.events.len();
        let mut slot = 0;
        while slot < self.jobs.len() {
            let a = &self.jobs[slot];
            if a.job.abs_deadline > now || a.job.state == JobState::Late {
                slot += 1;
                continue;
            }
            self.emit_for(now, EventKind::DeadlineMiss, slot);
            self.tasks[self.jobs[slot].task].stats.misses += 1;
            match self.late_policy {
                LatePolicy::Demote => {
                    let was_timely = self.jobs[slot].band == Band::Foreground;
                    let a = &mut self.jobs[slot];
                    a.band = Band::Background;
                    a.job.state = JobState::Late;
                    if was_timely {
                        self.emit_for(now, EventKind::Demote, slot);
                    }
                    slot += 1;
                }
                LatePolicy::Abort => {
                    let a = self.jobs.remove(slot);
                    if self.running == Some((a.task, a.job.index)) {
                        self.running = None;
                    }
                }
            }
        }
        self.events[start..]
            .iter()
            .map(|(_, e)| e.clone())
            .collect()
    }

    /// Releases a job of `task_id` at `now`. Sporadic jobs on EDF cores go
    /// through [`CoreState::admit_sporadic`] first.
    fn release(&mut self, task: usize, now: Tick) -> Result<(), SimError> {
        let spec = &self.tasks[task].spec;
        let index = self.tasks[task].next_index;
        let mut job = Job::new(spec, index, now)?;
        self.tasks[task].next_index += 1;
        self.tasks[task].stats.released += 1;
        let pos = self.tasks[task].pos;
        self.emit(now, EventKind::Release, Some((&job, pos)));

        let kind = self.tasks[task].spec.kind();
        let mut sporadic_admitted = false;
        if kind == TaskKind::Sporadic && self.policy == Policy::Edf {
            match self.admit_sporadic(&job, now).unwrap_or(Admission::Reject) {
                Admission::Admit => {
                    self.emit(now, EventKind::Admit, Some((&job, pos)));
                    sporadic_admitted = true;
                }
                Admission::Reject => {
                    self.emit(now, EventKind::Reject, Some((&job, pos)));
                    self.tasks[task].stats.rejected += 1;
                    return Ok(());
                }
            }
        }
        job.state = JobState::Ready;
        self.jobs.push(ActiveJob {
            job,
            task,
            band: if kind == TaskKind::Aperiodic {
                Band::Background
            } else {
                Band::Foreground
            },
            sporadic_admitted,
        });
        Ok(())
    }

    fn priority_key(&self, a: &ActiveJob) -> (Band, Tick, Tick, usize, u64) {
        let t = &self.tasks[a.task];
        let primary = match (a.band, self.policy) {
            (Band::Foreground, Policy::Rm) => t.spec.period().unwrap_or(u64::MAX),
            _ => a.job.abs_deadline,
        };
        (a.band, primary, a.job.release, t.pos, a.job.index)
    }

    fn best(&self) -> Option<usize> {
        (0..self.jobs.len()).min_by_key(|&slot| self.priority_key(&self.jobs[slot]))
    }

    /// Chooses the job for tick `[now, now + 1)` and runs it.
    fn step(&mut self, now: Tick) {
        let best = self.best();
        let best_id = best.map(|s| (self.jobs[s].task, self.jobs[s].job.index));
        if best_id != self.running {
            if let Some(prev) = self.running {
                if let Some(slot) = self.slot_of(prev) {
                    self.jobs[slot].job.state = if self.jobs[slot].band == Band::Background {
                        JobState::Late
                    } else {
                        JobState::Ready
                    };
                    self.emit_for(now, EventKind::Preempt, slot);
                    self.tasks[prev.0].stats.preemptions += 1;
                }
            }
            if let Some(slot) = best {
                self.emit_for(now, EventKind::Dispatch, slot);
            }
            self.running = best_id;
        }
        let Some(slot) = best else {
            if self.activity != Activity::Idle {
                self.emit(now, EventKind::IdleStart, None);
            }
            self.activity = Activity::Idle;
            self.idle += 1;
            return;
        };
        self.activity = Activity::Busy;
        self.busy += 1;
        let a = &mut self.jobs[slot];
        a.job.executed += 1;
        if a.band == Band::Foreground {
            a.job.state = JobState::Running;
        }
        let task = a.task;
        self.tasks[task].stats.executed_ticks += 1;
        if a.job.executed == self.tasks[task].spec.wcet() {
            let mut a = self.jobs.remove(slot);
            a.job.state = JobState::Completed;
            let done = now + 1;
            let pos = self.tasks[task].pos;
            self.emit(done, EventKind::Complete, Some((&a.job, pos)));
            let t = &mut self.tasks[task];
            let response = done - a.job.release;
            t.stats.completed += 1;
            t.stats.max_response = Some(t.stats.max_response.map_or(response, |m| m.max(response)));
            t.response_sum += u128::from(response);
            self.running = None;
        }
    }

    fn slot_of(&self, id: (usize, u64)) -> Option<usize> {
        self.jobs.iter().position(|a| (a.task, a.job.index) == id)
    }

    fn run(mut self, horizon: Duration, arrivals: &[(Tick, usize)]) -> Result<CoreRun, SimError> {
        let mut next_arrival = 0;
        for now in 0..=horizon {
            self.demote_late(now);
            if now == horizon {
                break;
            }
            for task in 0..self.tasks.len() {
                if self.tasks[task].next_release == Some(now) {
                    self.release(task, now)?;
                    let period = self.tasks[task].spec.period().unwrap_or(u64::MAX);
                    self.tasks[task].next_release = now.checked_add(period);
                }
            }
            while let Some(&(at, task)) = arrivals.get(next_arrival) {
                if at != now {
                    break;
                }
                self.release(task, now)?;
                next_arrival += 1;
            }
            self.step(now);
        }
        let core_stats = CoreStats {
            core: self.core,
            busy_ticks: self.busy,
            idle_ticks: self.idle,
        };
        let task_stats = self
            .tasks
            .into_iter()
            .map(|t| {
                let mut s = t.stats;
                if s.completed > 0 {
                    s.avg_response = Some(t.response_sum as f64 / s.completed as f64);
                }
                s
            })
            .collect();
        Ok((self.events, task_stats, core_stats))
    }
}

fn check_arrivals(tasks: &TaskSet, arrivals: &[Arrival], kind: TaskKind) -> Result<(), SimError> {
    let mut sorted: Vec<&Arrival> = arrivals.iter().collect();
    sorted.sort_by_key(|a| (a.task_id.as_str(), a.release));
    for (i, a) in sorted.iter().enumerate() {
        let task = tasks
            .get(&a.task_id)
            .ok_or_else(|| SimError::UnknownTask(a.task_id.clone()))?;
        if task.kind() != kind {
            return Err(SimError::WrongArrivalKind {
                task: a.task_id.clone(),
                kind: task.kind(),
            });
        }
        if let (Some(prev), Some(period)) = (i.checked_sub(1).map(|p| sorted[p]), task.period()) {
            if prev.task_id == a.task_id && a.release - prev.release < period {
                return Err(SimError::InterarrivalViolation {
                    task: a.task_id.clone(),
                    at: a.release,
                });
            }
        }
    }
    Ok(())
}

/// Runs the simulation over `[0, horizon)`. Deadline misses are part of the
/// result, never errors.
pub fn run(config: &SimConfig) -> Result<(Trace, SimStats), SimError> {
    let partition = partition::validate_manual(&config.tasks, &config.partition)?;
    let cores = partition.core_count();
    if config.policies.len() != cores {
        return Err(SimError::PolicyCount {
            given: config.policies.len(),
            expected: cores,
        });
    }
    if config.horizon == 0 {
        return Err(SimError::ZeroHorizon);
    }
    let sporadic = match &config.sporadic_arrivals {
        SporadicArrivals::Explicit(list) => list.clone(),
        SporadicArrivals::Seeded => {
            generate_sporadic_arrivals(&config.tasks, config.horizon, config.seed)
        }
    };
    check_arrivals(&config.tasks, &sporadic, TaskKind::Sporadic)?;
    check_arrivals(
        &config.tasks,
        &config.aperiodic_arrivals,
        TaskKind::Aperiodic,
    )?;

    let mut keyed = Vec::new();
    let mut task_stats = Vec::new();
    let mut core_stats = Vec::new();
    for (core, &policy) in config.policies.iter().enumerate() {
        let on_core = partition.tasks_on(&config.tasks, core);
        let state = CoreState::new(
            core,
            policy,
            config.late_policy,
            config.phase_mode,
            &on_core,
            &config.tasks,
        );
        let mut arrivals: Vec<(Tick, usize, usize)> = sporadic
            .iter()
            .chain(&config.aperiodic_arrivals)
            .filter(|a| a.release < config.horizon)
            .filter_map(|a| {
                let local = on_core.position(&a.task_id)?;
                Some((a.release, config.tasks.position(&a.task_id)?, local))
            })
            .collect();
        arrivals.sort_unstable();
        let arrivals: Vec<(Tick, usize)> = arrivals.into_iter().map(|(t, _, l)| (t, l)).collect();
        let (events, stats, cstats) = state.run(config.horizon, &arrivals)?;
        keyed.extend(events);
        task_stats.extend(stats);
        core_stats.push(cstats);
    }
    keyed.sort_by_key(|k| k.0);
    task_stats.sort_by_key(|s| config.tasks.position(&s.task_id));
    let total_misses = task_stats.iter().map(|s| s.misses).sum();
    Ok((
        Trace {
            horizon: config.horizon,
            cores,
            events: keyed.into_iter().map(|(_, e)| e).collect(),
        },
        SimStats {
            tasks: task_stats,
            cores: core_stats,
            total_misses,
        },
    ))
}
