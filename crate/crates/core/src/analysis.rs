//! Static schedulability analysis for a single core and for a partitioned
//! platform.
//!
//! Utilizations are exact fractions. The Liu–Layland bound is the only
//! irrational quantity; it is evaluated in floating point and compared after
//! rounding to [`BOUND_DIGITS`] decimal places, so every comparison against a
//! fraction is an exact integer comparison.

use std::fmt;

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{self, LatePolicy, PhaseMode, SimConfig, SporadicArrivals};
use crate::model::{hyperperiod, Duration, ModelError, Partition, TaskKind, TaskSet, TaskSpec};
use crate::partition::{self, PartitionError};

/// Decimal places kept when comparing against the Liu–Layland bound.
pub const BOUND_DIGITS: u32 = 12;

/// Longest horizon the offset-aware simulation is allowed to run.
pub const MAX_OFFSET_SIM_HORIZON: Duration = 2_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("the bound is defined for n >= 1 tasks")]
    DomainError,
    #[error("task index {index} out of range for {len} tasks")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("task `{0}` has a deadline beyond its period; time-demand analysis does not apply")]
    DeadlineExceedsPeriod(String),
    #[error("policy list covers {given} cores but the partition has {expected}")]
    PolicyCount { given: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Edf,
    Rm,
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Edf => "edf",
            Policy::Rm => "rm",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Guaranteed,
    Inconclusive,
    Unschedulable,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Guaranteed => "guaranteed",
            Verdict::Inconclusive => "inconclusive",
            Verdict::Unschedulable => "unschedulable",
        })
    }
}

/// Exact non-negative utilization, kept in lowest terms.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Utilization(Ratio<BigUint>);

impl Utilization {
    pub fn zero() -> Self {
        Utilization(Ratio::zero())
    }

    pub fn one() -> Self {
        Utilization(Ratio::one())
    }

    pub fn new(numerator: u64, denominator: u64) -> Self {
        assert!(denominator >= 1, "utilization denominator must be positive");
        Utilization(Ratio::new(numerator.into(), denominator.into()))
    }

    pub fn numerator(&self) -> &BigUint {
        self.0.numer()
    }

    pub fn denominator(&self) -> &BigUint {
        self.0.denom()
    }

    /// Decimal rendering rounded half-up to `digits` places.
    pub fn to_decimal(&self, digits: u32) -> String {
        let scale = BigUint::from(10u32).pow(digits);
        let two = BigUint::from(2u32);
        let scaled =
            (self.numerator() * &scale * &two + self.denominator()) / (self.denominator() * &two);
        let int = &scaled / &scale;
        let frac = &scaled % &scale;
        if digits == 0 {
            return int.to_string();
        }
        format!("{int}.{frac:0>width$}", width = digits as usize)
    }

    pub fn to_f64(&self) -> f64 {
        self.numerator().to_f64().unwrap_or(f64::INFINITY)
            / self.denominator().to_f64().unwrap_or(f64::INFINITY)
    }

    /// `self <= bound`, with the bound rounded to [`BOUND_DIGITS`] places.
    pub fn within_bound(&self, bound: f64) -> bool {
        let scale = 10u64.pow(BOUND_DIGITS);
        let scaled_bound = BigUint::from((bound * scale as f64).round() as u64);
        self.numerator() * BigUint::from(scale) <= scaled_bound * self.denominator()
    }
}

impl std::ops::Add for Utilization {
    type Output = Utilization;

    fn add(self, rhs: Self) -> Self {
        Utilization(self.0 + rhs.0)
    }
}

impl std::ops::AddAssign<&Utilization> for Utilization {
    fn add_assign(&mut self, rhs: &Utilization) {
        self.0 = &self.0 + &rhs.0;
    }
}

impl std::iter::Sum for Utilization {
    fn sum<I: Iterator<Item = Utilization>>(iter: I) -> Self {
        iter.fold(Utilization::zero(), |a, b| a + b)
    }
}

impl fmt::Display for Utilization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_decimal(6))
    }
}

fn task_utilization(t: &TaskSpec) -> Result<Utilization, ModelError> {
    Ok(Utilization::new(t.wcet(), t.require_period()?))
}

/// Total utilization: sum of wcet / period over the set.
pub fn utilization(set: &TaskSet) -> Result<Utilization, AnalysisError> {
    Ok(set
        .iter()
        .map(task_utilization)
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .sum())
}

/// Sum of wcet / min(deadline, period).
pub fn density(set: &TaskSet) -> Result<Utilization, AnalysisError> {
    set.iter()
        .map(|t| {
            let p = t.require_period()?;
            Ok(Utilization::new(t.wcet(), t.deadline().min(p)))
        })
        .sum::<Result<Utilization, ModelError>>()
        .map_err(Into::into)
}

/// Liu–Layland bound `n (2^(1/n) - 1)` for `n` fixed-priority tasks.
pub fn rm_bound(n: usize) -> Result<f64, AnalysisError> {
    if n == 0 {
        return Err(AnalysisError::DomainError);
    }
    if n == 1 {
        return Ok(1.0);
    }
    let n = n as f64;
    Ok(n * (std::f64::consts::LN_2 / n).exp_m1())
}

/// The bound as a fraction, formatted `0.828427`.
pub fn format_bound(bound: f64) -> String {
    format!("{bound:.6}")
}

/// The bound as a whole percentage, formatted `83%`.
pub fn format_percent(bound: f64) -> String {
    format!("{:.0}%", bound * 100.0)
}

/// Periodic and sporadic tasks in rate-monotonic priority order: shortest
/// period first, equal periods in canonical order.
pub fn rm_order(set: &TaskSet) -> Result<Vec<&TaskSpec>, AnalysisError> {
    let mut keyed = set
        .iter()
        .map(|t| Ok((t.require_period()?, t)))
        .collect::<Result<Vec<_>, ModelError>>()?;
    keyed.sort_by_key(|(p, _)| *p);
    Ok(keyed.into_iter().map(|(_, t)| t).collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundTest {
    pub verdict: Verdict,
    /// Task ids of the critical set, in priority order.
    pub critical_set: Vec<String>,
}

/// Longest priority-order prefix whose utilization stays within
/// `bound(prefix length)`.
fn critical_prefix(
    order: &[&TaskSpec],
    bound: impl Fn(usize) -> Result<f64, AnalysisError>,
) -> Result<Vec<String>, AnalysisError> {
    let mut acc = Utilization::zero();
    let mut prefix = Vec::new();
    for (i, t) in order.iter().enumerate() {
        acc += &task_utilization(t)?;
        if !acc.within_bound(bound(i + 1)?) {
            break;
        }
        prefix.push(t.id().to_string());
    }
    Ok(prefix)
}

/// Liu–Layland utilization test. A set at exactly the bound is guaranteed.
pub fn rm_utilization_test(set: &TaskSet) -> Result<BoundTest, AnalysisError> {
    let order = rm_order(set)?;
    if order.is_empty() {
        return Ok(BoundTest {
            verdict: Verdict::Guaranteed,
            critical_set: Vec::new(),
        });
    }
    let critical_set = critical_prefix(&order, rm_bound)?;
    let verdict = if critical_set.len() == order.len() {
        Verdict::Guaranteed
    } else {
        Verdict::Inconclusive
    };
    Ok(BoundTest {
        verdict,
        critical_set,
    })
}

/// EDF utilization test: guaranteed iff U <= 1 when no task has a deadline
/// shorter than its period. Any set with U > 1 is unschedulable; otherwise
/// constrained deadlines make the test inconclusive.
pub fn edf_utilization_test(set: &TaskSet) -> Result<Verdict, AnalysisError> {
    let u = utilization(set)?;
    if u > Utilization::one() {
        return Ok(Verdict::Unschedulable);
    }
    let constrained = set
        .iter()
        .any(|t| t.period().is_some_and(|p| t.deadline() < p));
    Ok(if constrained {
        Verdict::Inconclusive
    } else {
        Verdict::Guaranteed
    })
}

/// Time demand of the task at `index` (0-based, rate-monotonic order) over
/// `[0, t)` under synchronous release: its own wcet plus
/// `ceil(t / p_k) * c_k` for every higher-priority task `k`.
pub fn time_demand_value(
    set: &TaskSet,
    index: usize,
    t: Duration,
) -> Result<Duration, AnalysisError> {
    let order = rm_order(set)?;
    demand_in_order(&order, index, t)
}

fn demand_in_order(
    order: &[&TaskSpec],
    index: usize,
    t: Duration,
) -> Result<Duration, AnalysisError> {
    let task = order.get(index).ok_or(AnalysisError::IndexOutOfRange {
        index,
        len: order.len(),
    })?;
    order[..index].iter().try_fold(task.wcet(), |acc, hp| {
        let p = hp.require_period()?;
        t.div_ceil(p)
            .checked_mul(hp.wcet())
            .and_then(|d| acc.checked_add(d))
            .ok_or(AnalysisError::Model(ModelError::Overflow))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ResponseTime {
    Bounded(Duration),
    ExceedsDeadline,
}

impl ResponseTime {
    pub fn is_bounded(&self) -> bool {
        matches!(self, ResponseTime::Bounded(_))
    }
}

impl fmt::Display for ResponseTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResponseTime::Bounded(r) => write!(f, "{r}"),
            ResponseTime::ExceedsDeadline => f.write_str("exceeds deadline"),
        }
    }
}

/// Worst-case response time of the task at `index` (0-based, rate-monotonic
/// order) under synchronous release, by fixed-point iteration on the time
/// demand starting from its wcet.
pub fn tda_response_time(set: &TaskSet, index: usize) -> Result<ResponseTime, AnalysisError> {
    let order = rm_order(set)?;
    tda_in_order(&order, index)
}

fn tda_in_order(order: &[&TaskSpec], index: usize) -> Result<ResponseTime, AnalysisError> {
    let task = order.get(index).ok_or(AnalysisError::IndexOutOfRange {
        index,
        len: order.len(),
    })?;
    if task.deadline() > task.require_period()? {
        return Err(AnalysisError::DeadlineExceedsPeriod(task.id().to_string()));
    }
    let mut t = task.wcet();
    loop {
        if t > task.deadline() {
            return Ok(ResponseTime::ExceedsDeadline);
        }
        let next = demand_in_order(order, index, t)?;
        if next == t {
            return Ok(ResponseTime::Bounded(t));
        }
        t = next;
    }
}

/// Analysis result for one core.
#[derive(Debug, Clone, PartialEq)]
pub struct CoreReport {
    pub core: usize,
    pub policy: Policy,
    /// Utilization of the deadline-bearing (periodic and sporadic) tasks.
    pub utilization: Utilization,
    /// Liu–Layland bound for RM, 1 for EDF.
    pub bound: f64,
    pub verdict: Verdict,
    pub critical_set: Vec<String>,
    /// Synchronous-release response times in rate-monotonic order. Filled
    /// for RM cores; tasks with a deadline beyond their period are omitted.
    pub response_times: Vec<(String, ResponseTime)>,
    /// Response times observed by simulating the actual release offsets over
    /// `max phase + 2 * hyperperiod`, when the core has non-zero phases.
    pub offset_response_times: Option<Vec<(String, ResponseTime)>>,
    /// Aperiodic tasks served in the background.
    pub background: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub cores: Vec<CoreReport>,
}

impl AnalysisReport {
    pub fn all_guaranteed(&self) -> bool {
        self.cores.iter().all(|c| c.verdict == Verdict::Guaranteed)
    }
}

type StaticVerdict = (Verdict, Vec<String>, Vec<(String, ResponseTime)>);

/// Verdict, critical set and synchronous response times of one core, using
/// only closed-form tests. Aperiodic tasks are ignored.
pub(crate) fn static_core_verdict(
    tasks: &TaskSet,
    policy: Policy,
) -> Result<StaticVerdict, AnalysisError> {
    let tasks = tasks.filter(|t| t.kind() != TaskKind::Aperiodic);
    let order = rm_order(&tasks)?;
    let u = utilization(&tasks)?;
    match policy {
        Policy::Edf => {
            let mut verdict = edf_utilization_test(&tasks)?;
            if verdict == Verdict::Inconclusive && density(&tasks)? <= Utilization::one() {
                verdict = Verdict::Guaranteed;
            }
            let critical = critical_prefix(&order, |_| Ok(1.0))?;
            Ok((verdict, critical, Vec::new()))
        }
        Policy::Rm => {
            let bound_test = rm_utilization_test(&tasks)?;
            let mut responses = Vec::new();
            let mut tda_complete = true;
            let mut tda_all_pass = true;
            for i in 0..order.len() {
                match tda_in_order(&order, i) {
                    Ok(r) => {
                        tda_all_pass &= r.is_bounded();
                        responses.push((order[i].id().to_string(), r));
                    }
                    Err(AnalysisError::DeadlineExceedsPeriod(_)) => tda_complete = false,
                    Err(e) => return Err(e),
                }
            }
            let verdict = if u > Utilization::one() {
                Verdict::Unschedulable
            } else if (bound_test.verdict == Verdict::Guaranteed
                && tasks
                    .iter()
                    .all(|t| t.period().is_some_and(|p| t.deadline() >= p)))
                || (tda_complete && tda_all_pass)
            {
                Verdict::Guaranteed
            } else if !tda_all_pass && tasks.iter().all(|t| t.phase() == 0 && t.is_periodic()) {
                // synchronous release is the critical instant: TDA is exact
                Verdict::Unschedulable
            } else {
                Verdict::Inconclusive
            };
            Ok((verdict, bound_test.critical_set, responses))
        }
    }
}

/// Simulates the core with its real phases over `max phase + 2H` and
/// reports the worst observed response per task, plus whether any job
/// missed. `None` when the core is synchronous, hosts non-periodic tasks, or
/// the horizon is too long.
fn offset_simulation(
    tasks: &TaskSet,
    policy: Policy,
) -> Option<(Vec<(String, ResponseTime)>, bool)> {
    if tasks.is_empty()
        || tasks.iter().all(|t| t.phase() == 0)
        || !tasks.iter().all(TaskSpec::is_periodic)
    {
        return None;
    }
    let h = hyperperiod(tasks).ok()?;
    let max_phase = tasks.iter().map(TaskSpec::phase).max()?;
    let horizon = h.checked_mul(2)?.checked_add(max_phase)?;
    if horizon > MAX_OFFSET_SIM_HORIZON {
        return None;
    }
    let partition = Partition::from_pairs(1, tasks.iter().map(|t| (t.id().to_string(), 0)));
    let config = SimConfig {
        late_policy: LatePolicy::Demote,
        phase_mode: PhaseMode::AsSpecified,
        sporadic_arrivals: SporadicArrivals::Explicit(Vec::new()),
        ..SimConfig::new(tasks.clone(), partition, vec![policy], horizon)
    };
    let (_, stats) = engine::run(&config).ok()?;
    let mut any_miss = false;
    let responses = stats
        .tasks
        .iter()
        .map(|s| {
            let r = if s.misses > 0 {
                any_miss = true;
                ResponseTime::ExceedsDeadline
            } else {
                ResponseTime::Bounded(s.max_response.unwrap_or(0))
            };
            (s.task_id.clone(), r)
        })
        .collect();
    Some((responses, any_miss))
}

/// Full report for one core's task set.
pub fn analyze_core(
    tasks: &TaskSet,
    core: usize,
    policy: Policy,
) -> Result<CoreReport, AnalysisError> {
    let deadline_bearing = tasks.filter(|t| t.kind() != TaskKind::Aperiodic);
    let (mut verdict, critical_set, response_times) =
        static_core_verdict(&deadline_bearing, policy)?;
    let offset = offset_simulation(&deadline_bearing, policy);
    if let Some((_, true)) = offset {
        // an observed miss under the real release pattern is conclusive
        verdict = Verdict::Unschedulable;
    }
    let n = deadline_bearing.len();
    Ok(CoreReport {
        core,
        policy,
        utilization: utilization(&deadline_bearing)?,
        bound: match policy {
            Policy::Rm if n > 0 => rm_bound(n)?,
            _ => 1.0,
        },
        verdict,
        critical_set,
        response_times,
        offset_response_times: offset.map(|(r, _)| r),
        background: tasks
            .iter()
            .filter(|t| t.kind() == TaskKind::Aperiodic)
            .map(|t| t.id().to_string())
            .collect(),
    })
}

/// Analyzes every core of a partitioned task set. `policies` holds one
/// entry per core.
pub fn analyze_partition(
    set: &TaskSet,
    partition: &Partition,
    policies: &[Policy],
) -> Result<AnalysisReport, AnalysisError> {
    let partition = partition::validate_manual(set, partition)?;
    if policies.len() != partition.core_count() {
        return Err(AnalysisError::PolicyCount {
            given: policies.len(),
            expected: partition.core_count(),
        });
    }
    let cores = policies
        .iter()
        .enumerate()
        .map(|(core, &policy)| analyze_core(&partition.tasks_on(set, core), core, policy))
        .collect::<Result<_, _>>()?;
    Ok(AnalysisReport { cores })
}
