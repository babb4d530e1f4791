//! JSON renderings of analysis reports and simulation statistics.

use mcsched_core::analysis::{format_bound, AnalysisReport, CoreReport, ResponseTime};
use mcsched_core::engine::{SimStats, Trace};
use mcsched_core::partition::InfeasibleReport;
use mcsched_core::{Policy, Utilization, Verdict};
use serde::{Serialize, Serializer};

#[derive(Debug, Serialize)]
pub struct ReportDoc {
    pub schedulable: bool,
    pub cores: Vec<CoreDoc>,
}

#[derive(Debug, Serialize)]
pub struct CoreDoc {
    pub core: usize,
    pub policy: Policy,
    pub tasks: Vec<String>,
    pub utilization: UtilizationDoc,
    pub bound: String,
    pub verdict: Verdict,
    pub critical_set: Vec<String>,
    pub response_times: Vec<ResponseDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offset_response_times: Option<Vec<ResponseDoc>>,
    pub background: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct UtilizationDoc {
    pub numerator: String,
    pub denominator: String,
    pub decimal: String,
}

#[derive(Debug, Serialize)]
pub struct ResponseDoc {
    pub task: String,
    #[serde(serialize_with = "response_value")]
    pub response: ResponseTime,
}

fn response_value<S: Serializer>(r: &ResponseTime, s: S) -> Result<S::Ok, S::Error> {
    match r {
        ResponseTime::Bounded(t) => s.serialize_u64(*t),
        ResponseTime::ExceedsDeadline => s.serialize_str("exceeds_deadline"),
    }
}

impl From<&Utilization> for UtilizationDoc {
    fn from(u: &Utilization) -> Self {
        UtilizationDoc {
            numerator: u.numerator().to_string(),
            denominator: u.denominator().to_string(),
            decimal: u.to_decimal(6),
        }
    }
}

fn responses(list: &[(String, ResponseTime)]) -> Vec<ResponseDoc> {
    list.iter()
        .map(|(task, response)| ResponseDoc {
            task: task.clone(),
            response: *response,
        })
        .collect()
}

impl CoreDoc {
    /// `tasks` lists the core's task ids in canonical order.
    pub fn new(core: &CoreReport, tasks: Vec<String>) -> Self {
        CoreDoc {
            core: core.core,
            policy: core.policy,
            tasks,
            utilization: (&core.utilization).into(),
            bound: format_bound(core.bound),
            verdict: core.verdict,
            critical_set: core.critical_set.clone(),
            response_times: responses(&core.response_times),
            offset_response_times: core.offset_response_times.as_deref().map(responses),
            background: core.background.clone(),
        }
    }
}

impl ReportDoc {
    pub fn new(report: &AnalysisReport, tasks_per_core: impl Fn(usize) -> Vec<String>) -> Self {
        ReportDoc {
            schedulable: report.all_guaranteed(),
            cores: report
                .cores
                .iter()
                .map(|c| CoreDoc::new(c, tasks_per_core(c.core)))
                .collect(),
        }
    }
}

/// Printed by `partition` (and `analyze --ffd`) when placement fails.
#[derive(Debug, Serialize)]
pub struct InfeasibleDoc {
    pub feasible: bool,
    pub unplaced: Vec<String>,
    /// Core of every task that did fit.
    pub placed: Vec<PlacementDoc>,
}

#[derive(Debug, Serialize)]
pub struct PlacementDoc {
    pub task: String,
    pub core: usize,
}

impl From<&InfeasibleReport> for InfeasibleDoc {
    fn from(r: &InfeasibleReport) -> Self {
        InfeasibleDoc {
            feasible: false,
            unplaced: r.unplaced.clone(),
            placed: r
                .partial
                .assignment()
                .iter()
                .map(|(task, &core)| PlacementDoc {
                    task: task.clone(),
                    core,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct StatsDoc {
    pub horizon: u64,
    pub seed: u64,
    pub total_misses: u64,
    pub events: usize,
    pub cores: Vec<CoreStatsDoc>,
    pub tasks: Vec<TaskStatsDoc>,
}

#[derive(Debug, Serialize)]
pub struct CoreStatsDoc {
    pub core: usize,
    pub policy: Policy,
    pub busy_ticks: u64,
    pub idle_ticks: u64,
}

#[derive(Debug, Serialize)]
pub struct TaskStatsDoc {
    pub task: String,
    pub core: usize,
    pub released: u64,
    pub rejected: u64,
    pub completed: u64,
    pub misses: u64,
    pub preemptions: u64,
    pub executed_ticks: u64,
    pub max_response: Option<u64>,
    /// Rounded to three decimals.
    pub avg_response: Option<f64>,
}

impl StatsDoc {
    pub fn new(trace: &Trace, stats: &SimStats, policies: &[Policy], seed: u64) -> Self {
        StatsDoc {
            horizon: trace.horizon,
            seed,
            total_misses: stats.total_misses,
            events: trace.events.len(),
            cores: stats
                .cores
                .iter()
                .map(|c| CoreStatsDoc {
                    core: c.core,
                    policy: policies[c.core],
                    busy_ticks: c.busy_ticks,
                    idle_ticks: c.idle_ticks,
                })
                .collect(),
            tasks: stats
                .tasks
                .iter()
                .map(|t| TaskStatsDoc {
                    task: t.task_id.clone(),
                    core: t.core,
                    released: t.released,
                    rejected: t.rejected,
                    completed: t.completed,
                    misses: t.misses,
                    preemptions: t.preemptions,
                    executed_ticks: t.executed_ticks,
                    max_response: t.max_response,
                    avg_response: t.avg_response.map(|a| (a * 1000.0).round() / 1000.0),
                })
                .collect(),
        }
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types always serialize");
    s.push('\n');
    s
}
