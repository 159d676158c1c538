//! Batches, schedules, feasibility validation and exact cost accounting.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Instance, JobSpec, TypeMenu};
use crate::rational::Rational;
use crate::{JobId, Time};

/// Jobs executed together on one machine of `batch_type` at slot `exec_time`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Batch {
    #[serde(rename = "type")]
    pub batch_type: usize,
    #[serde(rename = "time")]
    pub exec_time: Time,
    #[serde(rename = "jobs")]
    pub job_ids: Vec<JobId>,
}

impl Batch {
    pub fn new(batch_type: usize, exec_time: Time, job_ids: Vec<JobId>) -> Self {
        Self {
            batch_type,
            exec_time,
            job_ids,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TypeSystem {
    Real,
    Virtual,
}

impl fmt::Display for TypeSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TypeSystem::Real => "real",
            TypeSystem::Virtual => "virtual",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub type_system: TypeSystem,
    pub batches: Vec<Batch>,
}

impl Schedule {
    pub fn new(type_system: TypeSystem, batches: Vec<Batch>) -> Self {
        Self { type_system, batches }
    }

    pub fn empty(type_system: TypeSystem) -> Self {
        Self::new(type_system, Vec::new())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, ScheduleError> {
        Ok(Self::from_json(&std::fs::read_to_string(path)?)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }

    pub fn job_count(&self) -> usize {
        self.batches.iter().map(|b| b.job_ids.len()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    Capacity,
    Window,
    /// A job appears in more than one batch, or twice in one batch.
    Duplicate,
    /// A job of the instance is in no batch.
    Missing,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::Capacity => "capacity",
            Rule::Window => "window",
            Rule::Duplicate => "duplicate",
            Rule::Missing => "missing",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Index into `schedule.batches`; `None` for `Missing`.
    pub batch: Option<usize>,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.batch {
            Some(b) => write!(f, "batch {b}: {}: {}", self.rule, self.detail),
            None => write!(f, "{}: {}", self.rule, self.detail),
        }
    }
}

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("batch {batch} references unknown job {job}")]
    UnknownJob { batch: usize, job: JobId },
    #[error("batch {batch} references unknown machine type {batch_type}")]
    UnknownType { batch: usize, batch_type: usize },
    #[error("malformed schedule document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Checks that `schedule` partitions all jobs of `instance` into batches that respect
/// capacities (per `menu`) and job windows. Every violation is reported.
pub fn validate_schedule(
    instance: &Instance,
    schedule: &Schedule,
    menu: &(impl TypeMenu + ?Sized),
) -> Result<Vec<Violation>, ScheduleError> {
    validate_batches(&instance.jobs, &schedule.batches, menu)
}

pub fn validate_batches(
    jobs: &[JobSpec],
    batches: &[Batch],
    menu: &(impl TypeMenu + ?Sized),
) -> Result<Vec<Violation>, ScheduleError> {
    let by_id: HashMap<JobId, &JobSpec> = jobs.iter().map(|j| (j.id, j)).collect();
    let mut owner: HashMap<JobId, usize> = HashMap::with_capacity(jobs.len());
    let mut violations = Vec::new();
    for (index, batch) in batches.iter().enumerate() {
        if batch.batch_type >= menu.type_count() {
            return Err(ScheduleError::UnknownType {
                batch: index,
                batch_type: batch.batch_type,
            });
        }
        let capacity = menu.capacity(batch.batch_type);
        if batch.job_ids.len() as u64 > capacity {
            violations.push(Violation {
                batch: Some(index),
                rule: Rule::Capacity,
                detail: format!("{} jobs exceed capacity {capacity}", batch.job_ids.len()),
            });
        }
        for &id in &batch.job_ids {
            let job = by_id
                .get(&id)
                .ok_or(ScheduleError::UnknownJob { batch: index, job: id })?;
            if !job.admits(batch.exec_time) {
                violations.push(Violation {
                    batch: Some(index),
                    rule: Rule::Window,
                    detail: format!(
                        "job {id} with window [{}, {}] executed at {}",
                        job.release, job.deadline, batch.exec_time
                    ),
                });
            }
            if let Some(prev) = owner.insert(id, index) {
                violations.push(Violation {
                    batch: Some(index),
                    rule: Rule::Duplicate,
                    detail: format!("job {id} already in batch {prev}"),
                });
            }
        }
    }
    for job in jobs {
        if !owner.contains_key(&job.id) {
            violations.push(Violation {
                batch: None,
                rule: Rule::Missing,
                detail: format!("job {} is not scheduled", job.id),
            });
        }
    }
    Ok(violations)
}

/// Sum over batches of the declared type's cost.
pub fn schedule_cost(schedule: &Schedule, menu: &(impl TypeMenu + ?Sized)) -> Rational {
    batches_cost(&schedule.batches, menu)
}

pub fn batches_cost(batches: &[Batch], menu: &(impl TypeMenu + ?Sized)) -> Rational {
    batches.iter().map(|b| menu.cost(b.batch_type)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::MachineType;

    fn one_type(cap: u64) -> Vec<MachineType> {
        vec![MachineType::with_int_cost(cap, 1)]
    }

    #[test]
    fn single_job_in_window_is_valid() {
        let inst = Instance::new(one_type(1), vec![JobSpec::new(0, 0, 2)]).unwrap();
        let sched = Schedule::new(TypeSystem::Real, vec![Batch::new(0, 1, vec![0])]);
        assert!(validate_schedule(&inst, &sched, &inst.machine_types)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn late_batch_is_a_window_violation() {
        let inst = Instance::new(one_type(1), vec![JobSpec::new(0, 0, 2)]).unwrap();
        let sched = Schedule::new(TypeSystem::Real, vec![Batch::new(0, 3, vec![0])]);
        let v = validate_schedule(&inst, &sched, &inst.machine_types).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::Window);
        assert_eq!(v[0].batch, Some(0));
    }

    #[test]
    fn overfull_batch_is_a_capacity_violation() {
        let jobs = (0..3).map(|i| JobSpec::new(i, 0, 1)).collect();
        let inst = Instance::new(one_type(2), jobs).unwrap();
        let sched = Schedule::new(TypeSystem::Real, vec![Batch::new(0, 1, vec![0, 1, 2])]);
        let v = validate_schedule(&inst, &sched, &inst.machine_types).unwrap();
        assert_eq!(v.iter().map(|v| v.rule).collect::<Vec<_>>(), vec![Rule::Capacity]);
    }

    #[test]
    fn partition_violations_and_reference_errors() {
        let jobs = (0..2).map(|i| JobSpec::new(i, 0, 1)).collect();
        let inst = Instance::new(one_type(2), jobs).unwrap();
        let sched = Schedule::new(
            TypeSystem::Real,
            vec![Batch::new(0, 1, vec![0]), Batch::new(0, 1, vec![0])],
        );
        let rules: Vec<Rule> = validate_schedule(&inst, &sched, &inst.machine_types)
            .unwrap()
            .into_iter()
            .map(|v| v.rule)
            .collect();
        assert_eq!(rules, vec![Rule::Duplicate, Rule::Missing]);

        let unknown_job = Schedule::new(TypeSystem::Real, vec![Batch::new(0, 1, vec![9])]);
        assert!(matches!(
            validate_schedule(&inst, &unknown_job, &inst.machine_types),
            Err(ScheduleError::UnknownJob { job: 9, .. })
        ));
        let unknown_type = Schedule::new(TypeSystem::Real, vec![Batch::new(4, 1, vec![0])]);
        assert!(matches!(
            validate_schedule(&inst, &unknown_type, &inst.machine_types),
            Err(ScheduleError::UnknownType { batch_type: 4, .. })
        ));
    }

    #[test]
    fn costs() {
        let types = vec![MachineType::with_int_cost(2, 1), MachineType::with_int_cost(5, 2)];
        assert_eq!(
            schedule_cost(&Schedule::empty(TypeSystem::Real), &types),
            Rational::from_integer(0)
        );
        // Three type-0 batches and one type-1 batch.
        let sched = Schedule::new(
            TypeSystem::Real,
            vec![
                Batch::new(0, 1, vec![]),
                Batch::new(1, 2, vec![]),
                Batch::new(0, 3, vec![]),
                Batch::new(0, 4, vec![]),
            ],
        );
        assert_eq!(schedule_cost(&sched, &types), Rational::from_integer(5));
    }

    #[test]
    fn schedule_file_format() {
        let sched = Schedule::new(TypeSystem::Virtual, vec![Batch::new(1, 5, vec![3, 4])]);
        let text = serde_json::to_string(&sched).unwrap();
        assert_eq!(
            text,
            r#"{"type_system":"virtual","batches":[{"type":1,"time":5,"jobs":[3,4]}]}"#
        );
        assert_eq!(Schedule::from_json(&text).unwrap(), sched);
    }
}
