//! Problem instances: unit jobs with release/deadline windows and a menu of machine types.
//!
//! Also houses the cost normalization that turns an arbitrary (canonical) machine menu
//! into a ladder of virtual types with costs `2^k`, each realized by real machines.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::{ceil_log2, pow2, serde_rational, Rational};
use crate::schedule::{Batch, Schedule, TypeSystem};
use crate::{JobId, Time};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JobSpec {
    pub id: JobId,
    pub release: Time,
    pub deadline: Time,
}

impl JobSpec {
    pub fn new(id: JobId, release: Time, deadline: Time) -> Self {
        Self { id, release, deadline }
    }

    /// True when the job may run in slot `t`.
    pub fn admits(&self, t: Time) -> bool {
        self.release <= t && t <= self.deadline
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachineType {
    pub capacity: u64,
    #[serde(with = "serde_rational")]
    pub cost: Rational,
}

impl MachineType {
    pub fn new(capacity: u64, cost: Rational) -> Self {
        Self { capacity, cost }
    }

    pub fn with_int_cost(capacity: u64, cost: i128) -> Self {
        Self::new(capacity, Rational::from_integer(cost))
    }
}

/// Anything that assigns a capacity and a cost to type indices `0..type_count()`.
///
/// Implemented by real machine menus and by [`NormalizedLadder`] (whose costs are the
/// virtual `2^k` costs expressed in original cost units).
pub trait TypeMenu {
    fn type_count(&self) -> usize;
    fn capacity(&self, t: usize) -> u64;
    fn cost(&self, t: usize) -> Rational;

    fn largest_type(&self) -> usize {
        self.type_count() - 1
    }
}

impl TypeMenu for [MachineType] {
    fn type_count(&self) -> usize {
        self.len()
    }

    fn capacity(&self, t: usize) -> u64 {
        self[t].capacity
    }

    fn cost(&self, t: usize) -> Rational {
        self[t].cost
    }
}

impl TypeMenu for Vec<MachineType> {
    fn type_count(&self) -> usize {
        self.len()
    }

    fn capacity(&self, t: usize) -> u64 {
        self[t].capacity
    }

    fn cost(&self, t: usize) -> Rational {
        self[t].cost
    }
}

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("machine_types: list is empty")]
    NoMachineTypes,
    #[error("machine_types[{index}].capacity: must be at least 1")]
    ZeroCapacity { index: usize },
    #[error("machine_types[{index}].cost: {cost} is below 1")]
    CostBelowOne { index: usize, cost: String },
    #[error("jobs: duplicate id {id}")]
    DuplicateJobId { id: JobId },
    #[error("jobs[id={id}].deadline: {deadline} is before release {release}")]
    DeadlineBeforeRelease { id: JobId, release: Time, deadline: Time },
    #[error("jobs[id={id}].release: {release} is negative")]
    NegativeRelease { id: JobId, release: Time },
    #[error("malformed instance document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// A validated problem instance. Jobs are kept sorted by `(release, id)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub machine_types: Vec<MachineType>,
    pub jobs: Vec<JobSpec>,
}

#[derive(Serialize, Deserialize)]
struct InstanceDocument {
    machine_types: Vec<MachineType>,
    jobs: Vec<JobSpec>,
}

impl Instance {
    pub fn new(machine_types: Vec<MachineType>, mut jobs: Vec<JobSpec>) -> Result<Self, InstanceError> {
        if machine_types.is_empty() {
            return Err(InstanceError::NoMachineTypes);
        }
        let one = Rational::from_integer(1);
        for (index, mt) in machine_types.iter().enumerate() {
            if mt.capacity < 1 {
                return Err(InstanceError::ZeroCapacity { index });
            }
            if mt.cost < one {
                return Err(InstanceError::CostBelowOne {
                    index,
                    cost: crate::rational::format_rational(&mt.cost),
                });
            }
        }
        let mut seen = HashSet::with_capacity(jobs.len());
        for job in &jobs {
            if !seen.insert(job.id) {
                return Err(InstanceError::DuplicateJobId { id: job.id });
            }
            if job.release < 0 {
                return Err(InstanceError::NegativeRelease {
                    id: job.id,
                    release: job.release,
                });
            }
            if job.deadline < job.release {
                return Err(InstanceError::DeadlineBeforeRelease {
                    id: job.id,
                    release: job.release,
                    deadline: job.deadline,
                });
            }
        }
        jobs.sort_by_key(|j| (j.release, j.id));
        Ok(Self { machine_types, jobs })
    }

    pub fn n(&self) -> usize {
        self.jobs.len()
    }

    /// `T`, the largest deadline (0 for an instance without jobs).
    pub fn horizon(&self) -> Time {
        self.jobs.iter().map(|j| j.deadline).max().unwrap_or(0)
    }

    pub fn job_index(&self) -> HashMap<JobId, JobSpec> {
        self.jobs.iter().map(|j| (j.id, *j)).collect()
    }

    /// Same jobs with the machine menu reduced by [`canonicalize_types`].
    pub fn canonicalized(&self) -> Self {
        Self {
            machine_types: canonicalize_types(&self.machine_types),
            jobs: self.jobs.clone(),
        }
    }

    pub fn is_canonical(&self) -> bool {
        self.machine_types
            .windows(2)
            .all(|w| w[0].capacity < w[1].capacity && w[0].cost < w[1].cost)
    }

    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        let doc: InstanceDocument = serde_json::from_str(text)?;
        Self::new(doc.machine_types, doc.jobs)
    }

    pub fn to_json(&self) -> String {
        let doc = InstanceDocument {
            machine_types: self.machine_types.clone(),
            jobs: self.jobs.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("instance serialization cannot fail")
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, InstanceError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), InstanceError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

/// Removes dominated machine types: the result has strictly increasing capacities and
/// strictly increasing costs.
pub fn canonicalize_types(types: &[MachineType]) -> Vec<MachineType> {
    let mut sorted = types.to_vec();
    // Capacity descending, then cost ascending so the cheapest of equal capacities comes first.
    sorted.sort_by(|a, b| b.capacity.cmp(&a.capacity).then(a.cost.cmp(&b.cost)));
    let mut kept: Vec<MachineType> = Vec::with_capacity(sorted.len());
    for mt in sorted {
        match kept.last() {
            Some(last) if last.capacity == mt.capacity => continue,
            // A larger machine that is no more expensive dominates this one.
            Some(last) if last.cost <= mt.cost => continue,
            _ => kept.push(mt),
        }
    }
    kept.reverse();
    kept
}

/// Agreeable deadlines: `r_i < r_j` implies `d_i ≤ d_j`. Equal releases are unconstrained.
pub fn is_agreeable(instance: &Instance) -> bool {
    is_agreeable_jobs(&instance.jobs)
}

pub fn is_agreeable_jobs(jobs: &[JobSpec]) -> bool {
    let mut order: Vec<&JobSpec> = jobs.iter().collect();
    order.sort_by_key(|j| (j.release, j.deadline));
    let mut max_deadline_before: Option<Time> = None;
    let mut i = 0;
    while i < order.len() {
        let release = order[i].release;
        let mut group_max = order[i].deadline;
        // Smallest deadline of this release group is first thanks to the sort.
        if let Some(prev) = max_deadline_before {
            if order[i].deadline < prev {
                return false;
            }
        }
        while i < order.len() && order[i].release == release {
            group_max = group_max.max(order[i].deadline);
            i += 1;
        }
        max_deadline_before = Some(max_deadline_before.map_or(group_max, |m| m.max(group_max)));
    }
    true
}

/// One virtual type of cost `2^k` (times the ladder scale) and its realization as real machines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rung {
    pub virtual_capacity: u64,
    /// `(real type index, machine count)`, largest capacity first.
    pub realization: Vec<(usize, u64)>,
}

/// Power-of-two cost ladder derived from a canonical machine menu.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedLadder {
    /// Original cost of real type 0; virtual costs are `2^k · scale` in original units.
    pub scale: Rational,
    pub rungs: Vec<Rung>,
    real_types: Vec<MachineType>,
}

impl NormalizedLadder {
    /// Builds rungs until the first one whose capacity exceeds `job_bound`.
    pub fn build(real_types: &[MachineType], job_bound: usize) -> Self {
        assert!(!real_types.is_empty(), "ladder needs at least one machine type");
        let scale = real_types[0].cost;

        // Per rounded power, the real type with the largest capacity.
        let mut best_at_power: HashMap<u32, usize> = HashMap::new();
        for (index, mt) in real_types.iter().enumerate() {
            let power = ceil_log2(&(mt.cost / scale));
            best_at_power
                .entry(power)
                .and_modify(|cur| {
                    if real_types[*cur].capacity < mt.capacity {
                        *cur = index;
                    }
                })
                .or_insert(index);
        }

        let base = best_at_power[&0];
        let mut rungs = vec![Rung {
            virtual_capacity: real_types[base].capacity,
            realization: vec![(base, 1)],
        }];
        let bound = job_bound as u64;
        let mut k = 0u32;
        while rungs[k as usize].virtual_capacity <= bound {
            k += 1;
            let prev = &rungs[k as usize - 1];
            let doubled = prev.virtual_capacity * 2;
            let rung = match best_at_power.get(&k) {
                Some(&real) if real_types[real].capacity >= doubled => Rung {
                    virtual_capacity: real_types[real].capacity,
                    realization: vec![(real, 1)],
                },
                _ => Rung {
                    virtual_capacity: doubled,
                    realization: prev.realization.iter().map(|&(t, c)| (t, 2 * c)).collect(),
                },
            };
            rungs.push(rung);
        }
        Self {
            scale,
            rungs,
            real_types: real_types.to_vec(),
        }
    }

    pub fn max_rung(&self) -> usize {
        self.rungs.len() - 1
    }

    pub fn real_types(&self) -> &[MachineType] {
        &self.real_types
    }

    /// Original cost of all machines realizing rung `k`.
    pub fn realization_cost(&self, k: usize) -> Rational {
        self.rungs[k]
            .realization
            .iter()
            .map(|&(t, count)| self.real_types[t].cost * Rational::from_integer(count as i128))
            .sum()
    }

    pub fn realization_capacity(&self, k: usize) -> u64 {
        self.rungs[k]
            .realization
            .iter()
            .map(|&(t, count)| self.real_types[t].capacity * count)
            .sum()
    }

    /// Splits a virtual rung-`k` batch over its real machines, filling each in turn.
    /// Machines that would receive no job are not emitted.
    pub fn realize_batch(&self, k: usize, exec_time: Time, job_ids: &[JobId]) -> Result<Vec<Batch>, RealizeError> {
        let rung = self.rungs.get(k).ok_or(RealizeError::UnknownRung { rung: k })?;
        if job_ids.len() as u64 > rung.virtual_capacity {
            return Err(RealizeError::OverCapacity {
                rung: k,
                jobs: job_ids.len(),
                capacity: rung.virtual_capacity,
            });
        }
        let mut out = Vec::new();
        let mut rest = job_ids;
        'fill: for &(t, count) in &rung.realization {
            let cap = self.real_types[t].capacity as usize;
            for _ in 0..count {
                if rest.is_empty() {
                    break 'fill;
                }
                let take = cap.min(rest.len());
                out.push(Batch::new(t, exec_time, rest[..take].to_vec()));
                rest = &rest[take..];
            }
        }
        Ok(out)
    }

    /// Realizes every batch of a virtual schedule.
    pub fn realize_schedule(&self, schedule: &Schedule) -> Result<Schedule, RealizeError> {
        let mut batches = Vec::with_capacity(schedule.batches.len());
        for batch in &schedule.batches {
            batches.extend(self.realize_batch(batch.batch_type, batch.exec_time, &batch.job_ids)?);
        }
        Ok(Schedule::new(TypeSystem::Real, batches))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RealizeError {
    #[error("rung {rung} does not exist in the ladder")]
    UnknownRung { rung: usize },
    #[error("rung {rung} holds {capacity} jobs but {jobs} were given")]
    OverCapacity { rung: usize, jobs: usize, capacity: u64 },
}

impl TypeMenu for NormalizedLadder {
    fn type_count(&self) -> usize {
        self.rungs.len()
    }

    fn capacity(&self, t: usize) -> u64 {
        self.rungs[t].virtual_capacity
    }

    fn cost(&self, t: usize) -> Rational {
        pow2(t as u32) * self.scale
    }
}

/// Ladder for an instance's own job count.
pub fn normalize_types(instance: &Instance) -> NormalizedLadder {
    NormalizedLadder::build(&instance.machine_types, instance.n())
}
