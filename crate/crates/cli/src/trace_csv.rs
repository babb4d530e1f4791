//! CSV export of simulation traces.
//!
//! Columns: `time,core,event,task,job,deadline`. `idle_start` rows leave the
//! last three empty.

use std::io::Write;

use mcsched_core::engine::{EventKind, JobRef, Trace, TraceEvent};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRow {
    pub time: u64,
    pub core: usize,
    pub event: String,
    pub task: Option<String>,
    pub job: Option<u64>,
    pub deadline: Option<u64>,
}

impl From<&TraceEvent> for TraceRow {
    fn from(e: &TraceEvent) -> Self {
        TraceRow {
            time: e.time,
            core: e.core,
            event: e.kind.as_str().to_string(),
            task: e.job.as_ref().map(|j| j.task_id.clone()),
            job: e.job.as_ref().map(|j| j.index),
            deadline: e.job.as_ref().map(|j| j.abs_deadline),
        }
    }
}

impl TryFrom<TraceRow> for TraceEvent {
    type Error = anyhow::Error;

    fn try_from(row: TraceRow) -> anyhow::Result<Self> {
        let kind: EventKind = row.event.parse().map_err(anyhow::Error::msg)?;
        let job = match (row.task, row.job, row.deadline) {
            (Some(task_id), Some(index), Some(abs_deadline)) => Some(JobRef {
                task_id,
                index,
                abs_deadline,
            }),
            (None, None, None) => None,
            _ => anyhow::bail!("row at time {} has a partial job reference", row.time),
        };
        Ok(TraceEvent {
            time: row.time,
            core: row.core,
            kind,
            job,
        })
    }
}

pub fn write_trace<W: Write>(trace: &Trace, out: W) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for e in &trace.events {
        w.serialize(TraceRow::from(e))?;
    }
    if trace.events.is_empty() {
        w.write_record(["time", "core", "event", "task", "job", "deadline"])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_events<R: std::io::Read>(input: R) -> anyhow::Result<Vec<TraceEvent>> {
    csv::Reader::from_reader(input)
        .deserialize::<TraceRow>()
        .map(|row| TraceEvent::try_from(row?))
        .collect()
}
