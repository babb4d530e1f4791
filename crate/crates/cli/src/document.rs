//! JSON task-set documents.
//!
//! ```json
//! {
//!   "ticks_per_second": 1000,
//!   "cores": 2,
//!   "policy": ["rm", "edf"],
//!   "tasks": [
//!     { "id": "abs", "kind": "periodic", "period": 5, "wcet": 1, "core": 0 },
//!     { "id": "airbag", "kind": "sporadic", "period": 50, "wcet": 1, "deadline": 5, "core": 1 }
//!   ],
//!   "arrivals": [ { "task": "airbag", "release": 12 } ]
//! }
//! ```
//!
//! Unknown fields are rejected.

use std::path::Path;

use anyhow::{bail, Context};
use mcsched_core::engine::{Arrival, SporadicArrivals};
use mcsched_core::model::{Partition, TaskDef, TaskKind, TaskSet, DEFAULT_CORES};
use mcsched_core::Policy;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSetDocument {
    /// Free-form note; not interpreted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// Documents the tick length; never used by the tools.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ticks_per_second: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cores: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<PolicySpec>,
    pub tasks: Vec<TaskEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub arrivals: Vec<ArrivalEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskEntry {
    pub id: String,
    pub kind: TaskKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<u64>,
    pub wcet: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadline: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub core: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrivalEntry {
    pub task: String,
    pub release: u64,
}

/// One policy for every core, or one per core.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolicySpec {
    Global(Policy),
    PerCore(Vec<Policy>),
}

/// A parsed, validated document.
#[derive(Debug, Clone)]
pub struct Workload {
    pub doc: TaskSetDocument,
    pub tasks: TaskSet,
    pub cores: usize,
    /// Present when every task names its core.
    pub partition: Option<Partition>,
}

impl TaskSetDocument {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        serde_json::from_str(text).map_err(|e| anyhow::anyhow!("invalid task-set document: {e}"))
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("documents always serialize");
        s.push('\n');
        s
    }

    pub fn validate(self) -> anyhow::Result<Workload> {
        let tasks = TaskSet::validate(self.tasks.iter().map(|t| TaskDef {
            id: t.id.clone(),
            kind: t.kind,
            phase: t.phase.unwrap_or(0),
            period: t.period,
            wcet: t.wcet,
            deadline: t.deadline,
        }))?;
        let cores = match (&self.cores, &self.policy) {
            (Some(0), _) => bail!("`cores` must be at least 1"),
            (Some(m), Some(PolicySpec::PerCore(list))) if list.len() != *m => {
                bail!("`policy` lists {} cores but `cores` is {m}", list.len())
            }
            (Some(m), _) => *m,
            (None, Some(PolicySpec::PerCore(list))) if !list.is_empty() => list.len(),
            (None, _) => DEFAULT_CORES,
        };
        let assigned: Vec<_> = self.tasks.iter().filter(|t| t.core.is_some()).collect();
        let partition = if assigned.is_empty() && !self.tasks.is_empty() {
            None
        } else {
            if let Some(t) = self.tasks.iter().find(|t| t.core.is_none()) {
                bail!(
                    "task `{}` is not assigned to any core (set `core` on every task or on none)",
                    t.id
                );
            }
            let p = Partition::from_pairs(
                cores,
                self.tasks.iter().map(|t| (t.id.clone(), t.core.unwrap())),
            );
            Some(mcsched_core::partition::validate_manual(&tasks, &p)?)
        };
        for a in &self.arrivals {
            match tasks.get(&a.task) {
                None => bail!("arrival names unknown task `{}`", a.task),
                Some(t) if t.kind() == TaskKind::Periodic => {
                    bail!(
                        "arrival for periodic task `{}`: periodic jobs are released automatically",
                        a.task
                    )
                }
                Some(_) => {}
            }
        }
        Ok(Workload {
            doc: self,
            tasks,
            cores,
            partition,
        })
    }
}

impl Workload {
    /// Per-core policies: `overrides` wins, then the document, then EDF.
    pub fn policies(&self, overrides: Option<Policy>, cores: usize) -> anyhow::Result<Vec<Policy>> {
        Ok(match (overrides, &self.doc.policy) {
            (Some(p), _) => vec![p; cores],
            (None, Some(PolicySpec::Global(p))) => vec![*p; cores],
            (None, Some(PolicySpec::PerCore(list))) => {
                if list.len() != cores {
                    bail!(
                        "`policy` lists {} cores but the platform has {cores}",
                        list.len()
                    );
                }
                list.clone()
            }
            (None, None) => vec![Policy::Edf; cores],
        })
    }

    /// Single policy for first-fit placement.
    pub fn placement_policy(&self, overrides: Option<Policy>) -> anyhow::Result<Policy> {
        match (overrides, &self.doc.policy) {
            (Some(p), _) => Ok(p),
            (None, Some(PolicySpec::Global(p))) => Ok(*p),
            (None, None) => Ok(Policy::Edf),
            (None, Some(PolicySpec::PerCore(list))) => match list.first() {
                Some(first) if list.iter().all(|p| p == first) => Ok(*first),
                _ => bail!("first-fit placement needs one policy for all cores; pass --policy"),
            },
        }
    }

    /// Explicit sporadic arrivals when the document lists any, otherwise a
    /// seeded stream.
    pub fn sporadic_arrivals(&self) -> SporadicArrivals {
        let explicit = self.arrivals_of(TaskKind::Sporadic);
        if explicit.is_empty() {
            SporadicArrivals::Seeded
        } else {
            SporadicArrivals::Explicit(explicit)
        }
    }

    pub fn aperiodic_arrivals(&self) -> Vec<Arrival> {
        self.arrivals_of(TaskKind::Aperiodic)
    }

    fn arrivals_of(&self, kind: TaskKind) -> Vec<Arrival> {
        self.doc
            .arrivals
            .iter()
            .filter(|a| self.tasks.get(&a.task).is_some_and(|t| t.kind() == kind))
            .map(|a| Arrival::new(a.task.clone(), a.release))
            .collect()
    }

    /// The document with cores, policy and every task's core filled in.
    pub fn with_partition(&self, partition: &Partition, policy: PolicySpec) -> TaskSetDocument {
        let mut doc = self.doc.clone();
        doc.cores = Some(partition.core_count());
        doc.policy = Some(policy);
        for t in doc.tasks.iter_mut() {
            t.core = partition.core_of(&t.id);
        }
        doc
    }
}
