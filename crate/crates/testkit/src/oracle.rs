//! Brute-force reference scheduler.
//!
//! Every tick, all released unfinished jobs are enumerated and the best one
//! under the policy runs for one tick. Late jobs keep their priority and keep
//! running; nothing is demoted or dropped. Deadlines are checked at every
//! instant up to and including the horizon.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleTask {
    pub phase: u64,
    pub period: u64,
    pub wcet: u64,
    pub deadline: u64,
}

impl OracleTask {
    pub fn implicit(period: u64, wcet: u64) -> Self {
        OracleTask {
            phase: 0,
            period,
            wcet,
            deadline: period,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OraclePolicy {
    /// Earliest absolute deadline first.
    Edf,
    /// Fixed priority: lower task index = higher priority.
    FixedPriority,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleJob {
    pub task: usize,
    pub index: u64,
    pub release: u64,
    pub deadline: u64,
    pub executed: u64,
    pub completion: Option<u64>,
    /// Executed ticks at the deadline instant, if the job was unfinished then.
    pub missed_with: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleRun {
    pub jobs: Vec<OracleJob>,
    /// Which job ran in each tick (`None` = idle), indexed by tick.
    pub timeline: Vec<Option<(usize, u64)>>,
}

impl OracleRun {
    pub fn misses(&self) -> impl Iterator<Item = &OracleJob> {
        self.jobs.iter().filter(|j| j.missed_with.is_some())
    }

    pub fn miss_count(&self) -> usize {
        self.misses().count()
    }

    pub fn job(&self, task: usize, index: u64) -> Option<&OracleJob> {
        self.jobs
            .iter()
            .find(|j| j.task == task && j.index == index)
    }
}

pub fn simulate(tasks: &[OracleTask], policy: OraclePolicy, horizon: u64) -> OracleRun {
    let mut jobs = Vec::new();
    for (ti, t) in tasks.iter().enumerate() {
        let mut k = 0;
        loop {
            let release = t.phase + k * t.period;
            if release >= horizon {
                break;
            }
            k += 1;
            jobs.push(OracleJob {
                task: ti,
                index: k,
                release,
                deadline: release + t.deadline,
                executed: 0,
                completion: None,
                missed_with: None,
            });
        }
    }

    let mut timeline = Vec::with_capacity(horizon as usize);
    for now in 0..=horizon {
        for j in jobs.iter_mut() {
            if j.deadline == now && j.completion.is_none() {
                j.missed_with = Some(j.executed);
            }
        }
        if now == horizon {
            break;
        }
        let mut best: Option<usize> = None;
        for (i, j) in jobs.iter().enumerate() {
            if j.release > now || j.completion.is_some() {
                continue;
            }
            best = match best {
                None => Some(i),
                Some(b) => {
                    let (x, y) = (&jobs[b], j);
                    let better = match policy {
                        OraclePolicy::Edf => {
                            (y.deadline, y.release, y.task, y.index)
                                < (x.deadline, x.release, x.task, x.index)
                        }
                        OraclePolicy::FixedPriority => {
                            (y.task, y.release, y.index) < (x.task, x.release, x.index)
                        }
                    };
                    if better {
                        Some(i)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        match best {
            Some(b) => {
                let j = &mut jobs[b];
                j.executed += 1;
                if j.executed == tasks[j.task].wcet {
                    j.completion = Some(now + 1);
                }
                timeline.push(Some((j.task, j.index)));
            }
            None => timeline.push(None),
        }
    }
    OracleRun { jobs, timeline }
}

/// Total demand of a synchronous implicit-deadline set over its hyperperiod
/// compared with the hyperperiod, as an exact feasibility check for EDF.
pub fn edf_feasible_by_demand(tasks: &[(u64, u64)]) -> bool {
    let h = tasks.iter().fold(1u64, |acc, &(p, _)| lcm(acc, p));
    let demand: u64 = tasks.iter().map(|&(p, c)| c * (h / p)).sum();
    demand <= h
}

pub fn lcm(a: u64, b: u64) -> u64 {
    fn gcd(a: u64, b: u64) -> u64 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}
