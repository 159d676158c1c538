//! Event-driven online simulation.
//!
//! Jobs are revealed by an [`InstanceSource`] at their release time. Whenever some waiting
//! job reaches its deadline the [`OnlineAlgorithm`] picks machine types; the engine fills each
//! chosen machine with the waiting jobs of earliest deadline and records the dispatch.
//! Time jumps straight from event to event.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Instance, JobSpec, TypeMenu};
use crate::schedule::{Batch, Schedule, TypeSystem};
use crate::{JobId, Time};

/// Released, not yet dispatched jobs ordered by `(deadline, id)`.
#[derive(Debug, Default, Clone)]
pub struct WaitingSet {
    order: BTreeSet<(Time, JobId)>,
    jobs: HashMap<JobId, JobSpec>,
}

impl WaitingSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn insert(&mut self, job: JobSpec) {
        self.order.insert((job.deadline, job.id));
        self.jobs.insert(job.id, job);
    }

    pub fn peek_min(&self) -> Option<&JobSpec> {
        self.order.first().map(|(_, id)| &self.jobs[id])
    }

    pub fn min_deadline(&self) -> Option<Time> {
        self.order.first().map(|&(d, _)| d)
    }

    /// Waiting jobs in earliest-deadline-first order.
    pub fn iter(&self) -> impl Iterator<Item = &JobSpec> + '_ {
        self.order.iter().map(|(_, id)| &self.jobs[id])
    }

    /// Number of waiting jobs whose deadline is exactly `time`.
    pub fn count_due(&self, time: Time) -> usize {
        self.order.range((time, JobId::MIN)..=(time, JobId::MAX)).count()
    }

    pub fn get(&self, id: JobId) -> Option<&JobSpec> {
        self.jobs.get(&id)
    }

    fn pop_min(&mut self) -> Option<JobSpec> {
        let (_, id) = self.order.pop_first()?;
        self.jobs.remove(&id)
    }
}

/// Removes and returns the `min(capacity, |W|)` waiting jobs with smallest `(deadline, id)`.
pub fn edf_fill(waiting: &mut WaitingSet, capacity: u64, exec_time: Time) -> Result<Vec<JobSpec>, EngineFault> {
    if let Some(job) = waiting.peek_min() {
        if job.deadline < exec_time {
            return Err(EngineFault::MissedDeadline {
                job: job.id,
                deadline: job.deadline,
                time: exec_time,
            });
        }
    }
    let take = (capacity as usize).min(waiting.len());
    let mut out = Vec::with_capacity(take);
    for _ in 0..take {
        out.push(waiting.pop_min().expect("length checked"));
    }
    Ok(out)
}

/// One dispatched batch, as written to trace files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DispatchRecord {
    #[serde(rename = "t")]
    pub time: Time,
    #[serde(rename = "type")]
    pub batch_type: usize,
    #[serde(rename = "jobs")]
    pub job_ids: Vec<JobId>,
    /// Smallest-id job in the batch whose deadline is `time`.
    pub critical: Option<JobId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DispatchTrace {
    pub records: Vec<DispatchRecord>,
}

impl DispatchTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, DispatchRecord> {
        self.records.iter()
    }

    /// JSON lines, one dispatch per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for record in &self.records {
            out.push_str(&serde_json::to_string(record).expect("record serialization cannot fail"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        Ok(Self { records })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_jsonl())
    }
}

/// Reveals jobs over time. Adaptive sources may look at the dispatches made so far.
pub trait InstanceSource {
    /// Next time at which jobs arrive, or `None` when no more jobs will come (given the
    /// current trace). Must never go backwards.
    fn next_arrival(&mut self, trace: &DispatchTrace) -> Option<Time>;

    /// The jobs arriving at `time`; called only right after `next_arrival` returned `time`.
    fn arrivals(&mut self, time: Time, trace: &DispatchTrace) -> Vec<JobSpec>;
}

/// Replays a fixed job list.
#[derive(Debug, Clone)]
pub struct StaticSource {
    jobs: Vec<JobSpec>,
    cursor: usize,
}

impl StaticSource {
    pub fn new(mut jobs: Vec<JobSpec>) -> Self {
        jobs.sort_by_key(|j| (j.release, j.id));
        Self { jobs, cursor: 0 }
    }

    pub fn from_instance(instance: &Instance) -> Self {
        Self::new(instance.jobs.clone())
    }
}

impl InstanceSource for StaticSource {
    fn next_arrival(&mut self, _trace: &DispatchTrace) -> Option<Time> {
        self.jobs.get(self.cursor).map(|j| j.release)
    }

    fn arrivals(&mut self, time: Time, _trace: &DispatchTrace) -> Vec<JobSpec> {
        let start = self.cursor;
        while self.cursor < self.jobs.len() && self.jobs[self.cursor].release == time {
            self.cursor += 1;
        }
        self.jobs[start..self.cursor].to_vec()
    }
}

/// An online policy. It never sees the source: only arrivals, the waiting set and its own
/// dispatches.
pub trait OnlineAlgorithm {
    fn name(&self) -> &'static str;

    fn on_arrivals(&mut self, _time: Time, _jobs: &[JobSpec]) {}

    /// Called while some waiting job has deadline `time`; `critical` is the smallest-id such
    /// job. Returns the machine types to dispatch now, filled in the given order.
    fn decide(&mut self, time: Time, critical: &JobSpec, waiting: &WaitingSet) -> Vec<usize>;

    /// Called after every dispatched batch with the jobs it carries (EDF order).
    fn on_dispatch(&mut self, _record: &DispatchRecord, _jobs: &[JobSpec]) {}
}

impl<A: OnlineAlgorithm + ?Sized> OnlineAlgorithm for Box<A> {
    fn name(&self) -> &'static str {
        (**self).name()
    }

    fn on_arrivals(&mut self, time: Time, jobs: &[JobSpec]) {
        (**self).on_arrivals(time, jobs)
    }

    fn decide(&mut self, time: Time, critical: &JobSpec, waiting: &WaitingSet) -> Vec<usize> {
        (**self).decide(time, critical, waiting)
    }

    fn on_dispatch(&mut self, record: &DispatchRecord, jobs: &[JobSpec]) {
        (**self).on_dispatch(record, jobs)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineFault {
    #[error("missed deadline: job {job} (deadline {deadline}) still waiting at time {time}")]
    MissedDeadline { job: JobId, deadline: Time, time: Time },
    #[error("livelock at time {time}: {invocations} decisions without clearing due jobs")]
    Livelock { time: Time, invocations: usize },
    #[error("algorithm chose unknown machine type {batch_type} at time {time}")]
    UnknownType { time: Time, batch_type: usize },
    #[error("source misbehaved at time {time}: {reason}")]
    BadArrival { time: Time, reason: String },
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub schedule: Schedule,
    pub trace: DispatchTrace,
    /// Every job the source revealed, in arrival order.
    pub jobs: Vec<JobSpec>,
}

impl RunOutcome {
    /// The revealed jobs as an instance over `machine_types`.
    pub fn instance(&self, machine_types: Vec<crate::instance::MachineType>) -> Instance {
        Instance::new(machine_types, self.jobs.clone()).expect("engine only accepts valid jobs")
    }
}

/// Runs `algorithm` against `source`, with capacities taken from `menu`.
pub fn run_online(
    source: &mut dyn InstanceSource,
    algorithm: &mut dyn OnlineAlgorithm,
    menu: &dyn TypeMenu,
    type_system: TypeSystem,
) -> Result<RunOutcome, EngineFault> {
    let mut waiting = WaitingSet::new();
    let mut trace = DispatchTrace::default();
    let mut revealed: Vec<JobSpec> = Vec::new();
    let mut seen: HashSet<JobId> = HashSet::new();
    let mut now: Option<Time> = None;

    loop {
        let next_arrival = source.next_arrival(&trace);
        if let (Some(arrival), Some(current)) = (next_arrival, now) {
            if arrival < current {
                return Err(EngineFault::BadArrival {
                    time: arrival,
                    reason: format!("arrival time went backwards from {current}"),
                });
            }
        }
        let next_deadline = waiting.min_deadline();
        let time = match (next_arrival, next_deadline) {
            (Some(a), Some(d)) => a.min(d),
            (Some(a), None) => a,
            (None, Some(d)) => d,
            (None, None) => break,
        };
        if let (Some(d), Some(current)) = (next_deadline, now) {
            if d < current {
                let job = waiting.peek_min().expect("non-empty").id;
                return Err(EngineFault::MissedDeadline {
                    job,
                    deadline: d,
                    time: current,
                });
            }
        }

        if next_arrival == Some(time) {
            let arrivals = source.arrivals(time, &trace);
            for job in &arrivals {
                if job.release != time || job.deadline < time {
                    return Err(EngineFault::BadArrival {
                        time,
                        reason: format!("job {} has window [{}, {}]", job.id, job.release, job.deadline),
                    });
                }
                if !seen.insert(job.id) {
                    return Err(EngineFault::BadArrival {
                        time,
                        reason: format!("job {} yielded twice", job.id),
                    });
                }
                waiting.insert(*job);
            }
            revealed.extend_from_slice(&arrivals);
            algorithm.on_arrivals(time, &arrivals);
        }

        let mut invocations = 0usize;
        while waiting.min_deadline() == Some(time) {
            invocations += 1;
            if invocations > revealed.len() + 1 {
                return Err(EngineFault::Livelock { time, invocations });
            }
            let critical = *waiting.peek_min().expect("non-empty");
            let choice = algorithm.decide(time, &critical, &waiting);
            for batch_type in choice {
                if batch_type >= menu.type_count() {
                    return Err(EngineFault::UnknownType { time, batch_type });
                }
                let jobs = edf_fill(&mut waiting, menu.capacity(batch_type), time)?;
                if jobs.is_empty() {
                    continue;
                }
                let critical = jobs.iter().filter(|j| j.deadline == time).map(|j| j.id).min();
                let record = DispatchRecord {
                    time,
                    batch_type,
                    job_ids: jobs.iter().map(|j| j.id).collect(),
                    critical,
                };
                algorithm.on_dispatch(&record, &jobs);
                trace.records.push(record);
            }
        }
        now = Some(time);
    }

    let batches = trace
        .records
        .iter()
        .map(|r| Batch::new(r.batch_type, r.time, r.job_ids.clone()))
        .collect();
    Ok(RunOutcome {
        schedule: Schedule::new(type_system, batches),
        trace,
        jobs: revealed,
    })
}
