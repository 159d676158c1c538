//! Lower-bound certificates.
//!
//! An [`IntervalAssignment`] is a family of tuples `(I, t_I, J_I)`. When it is valid (see
//! [`check_valid_assignment`]) and the type system has costs `2^k` with non-increasing cost
//! per job, every schedule costs at least `sigma / 4`. [`credit_audit`] replays the credit
//! argument behind that bound on a concrete schedule.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::DispatchTrace;
use crate::instance::{JobSpec, TypeMenu};
use crate::rational::{pow2, serde_rational_str, Rational};
use crate::schedule::Batch;
use crate::{JobId, Time};

/// `([left, right], t_I, J_I)`. Intervals are closed and integral.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentTuple {
    pub left: Time,
    pub right: Time,
    #[serde(rename = "type")]
    pub interval_type: usize,
    #[serde(rename = "charged")]
    pub jobs: Vec<JobId>,
}

impl AssignmentTuple {
    pub fn contains_window(&self, job: &JobSpec) -> bool {
        self.left <= job.release && job.deadline <= self.right
    }

    /// Closed integer intervals overlap when they share a slot.
    pub fn overlaps(&self, other: &AssignmentTuple) -> bool {
        self.left <= other.right && other.left <= self.right
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntervalAssignment(pub Vec<AssignmentTuple>);

impl IntervalAssignment {
    pub fn tuples(&self) -> &[AssignmentTuple] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("assignment serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, AnalysisError> {
        Ok(Self::from_json(&std::fs::read_to_string(path)?)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("tuple {tuple} references unknown job {job}")]
    UnknownJob { tuple: usize, job: JobId },
    #[error("tuple {tuple} has type {interval_type} but the type system has {types} types")]
    UnknownType {
        tuple: usize,
        interval_type: usize,
        types: usize,
    },
    #[error("malformed assignment document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentViolation {
    /// Condition number 1..=4 as in the validity definition.
    pub condition: u8,
    pub tuples: Vec<usize>,
    pub detail: String,
}

impl fmt::Display for AssignmentViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "condition ({}) at tuples {:?}: {}",
            self.condition, self.tuples, self.detail
        )
    }
}

/// Checks the four validity conditions:
/// 1. `|J_I| = B_{t_I - 1}` (and `|J_I| = 1` for `t_I = 0`);
/// 2. every job of `J_I` has its window inside `I`;
/// 3. intervals of equal type are disjoint (sharing a slot counts as overlap);
/// 4. no job belongs to two tuples.
pub fn check_valid_assignment(
    jobs: &[JobSpec],
    assignment: &IntervalAssignment,
    menu: &(impl TypeMenu + ?Sized),
) -> Result<Vec<AssignmentViolation>, AnalysisError> {
    let by_id: HashMap<JobId, &JobSpec> = jobs.iter().map(|j| (j.id, j)).collect();
    let mut violations = Vec::new();
    let mut owner: HashMap<JobId, usize> = HashMap::new();

    for (index, tuple) in assignment.0.iter().enumerate() {
        let required = if tuple.interval_type == 0 {
            1
        } else {
            let below = tuple.interval_type - 1;
            if below >= menu.type_count() {
                return Err(AnalysisError::UnknownType {
                    tuple: index,
                    interval_type: tuple.interval_type,
                    types: menu.type_count(),
                });
            }
            menu.capacity(below)
        };
        if tuple.jobs.len() as u64 != required {
            violations.push(AssignmentViolation {
                condition: 1,
                tuples: vec![index],
                detail: format!(
                    "type {} needs {required} jobs, has {}",
                    tuple.interval_type,
                    tuple.jobs.len()
                ),
            });
        }
        if tuple.left > tuple.right {
            violations.push(AssignmentViolation {
                condition: 2,
                tuples: vec![index],
                detail: format!("empty interval [{}, {}]", tuple.left, tuple.right),
            });
        }
        for &id in &tuple.jobs {
            let job = by_id
                .get(&id)
                .ok_or(AnalysisError::UnknownJob { tuple: index, job: id })?;
            if !tuple.contains_window(job) {
                violations.push(AssignmentViolation {
                    condition: 2,
                    tuples: vec![index],
                    detail: format!(
                        "job {id} window [{}, {}] not inside [{}, {}]",
                        job.release, job.deadline, tuple.left, tuple.right
                    ),
                });
            }
            if let Some(prev) = owner.insert(id, index) {
                violations.push(AssignmentViolation {
                    condition: 4,
                    tuples: vec![prev, index],
                    detail: format!("job {id} assigned twice"),
                });
            }
        }
    }

    let mut by_type: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (index, tuple) in assignment.0.iter().enumerate() {
        by_type.entry(tuple.interval_type).or_default().push(index);
    }
    for (t, mut indices) in by_type {
        indices.sort_by_key(|&i| (assignment.0[i].left, assignment.0[i].right));
        // After sorting by left endpoint it suffices to compare with the furthest-reaching
        // earlier interval.
        let mut reach: Option<usize> = None;
        for &i in &indices {
            if let Some(r) = reach {
                if assignment.0[r].overlaps(&assignment.0[i]) {
                    violations.push(AssignmentViolation {
                        condition: 3,
                        tuples: vec![r, i],
                        detail: format!("two type-{t} intervals overlap"),
                    });
                }
                if assignment.0[i].right > assignment.0[r].right {
                    reach = Some(i);
                }
            } else {
                reach = Some(i);
            }
        }
    }
    Ok(violations)
}

/// `Σ 2^{t_I}` over the multiset of intervals.
pub fn sigma(assignment: &IntervalAssignment) -> u128 {
    assignment.0.iter().map(|t| 1u128 << t.interval_type).sum()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BatchCredit {
    pub batch: usize,
    #[serde(rename = "type")]
    pub batch_type: usize,
    /// Credits to jobs whose interval type is at most the batch type.
    #[serde(with = "serde_rational_str")]
    pub to_lower: Rational,
    /// Credits to jobs whose interval type exceeds the batch type.
    #[serde(with = "serde_rational_str")]
    pub to_higher: Rational,
    #[serde(with = "serde_rational_str")]
    pub total: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IntervalCredit {
    pub tuple: usize,
    #[serde(rename = "type")]
    pub interval_type: usize,
    #[serde(with = "serde_rational_str")]
    pub received: Rational,
    #[serde(with = "serde_rational_str")]
    pub required: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CreditAudit {
    pub batches: Vec<BatchCredit>,
    pub intervals: Vec<IntervalCredit>,
    /// Total credit handed out; at most `4 ·` the schedule's `2^k` cost.
    #[serde(with = "serde_rational_str")]
    pub distributed: Rational,
    #[serde(with = "serde_rational_str")]
    pub schedule_cost: Rational,
}

impl CreditAudit {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("audit serialization cannot fail")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AuditError {
    #[error("batch {batch} references unknown type {batch_type}")]
    UnknownType { batch: usize, batch_type: usize },
    #[error("per-job share check fails at batch {batch}, job {job}: per-job interval share {share} exceeds {bound}")]
    PerJobShare {
        batch: usize,
        job: JobId,
        share: String,
        bound: String,
    },
    #[error("lower-side credit check fails at batch {batch}: {total} credit to lower-type intervals exceeds {bound}")]
    LowerSide { batch: usize, total: String, bound: String },
    #[error(
        "higher-side credit check fails at batch {batch}: {total} credit to higher-type intervals exceeds {bound}"
    )]
    HigherSide { batch: usize, total: String, bound: String },
    #[error("interval unserved: tuple {tuple} shares no job with any batch")]
    IntervalUnserved { tuple: usize },
    #[error("tuple {tuple} received {received} credit, needs {required}")]
    IntervalUnderpaid {
        tuple: usize,
        received: String,
        required: String,
    },
    #[error("distributed {distributed} exceeds four times the schedule cost {cost}")]
    TotalExceeded { distributed: String, cost: String },
}

/// Distributes credits from each batch of `schedule` (type `k`, cost `2^k`) to the jobs it
/// carries: `2^{t_I}/|J_I|` to a job whose interval type `t_I ≤ k`, `2^{k+1}/B_k` otherwise.
/// Asserts the per-job, per-batch and per-interval inequalities of the credit argument.
pub fn credit_audit(
    schedule: &[Batch],
    assignment: &IntervalAssignment,
    menu: &(impl TypeMenu + ?Sized),
) -> Result<CreditAudit, AuditError> {
    use crate::rational::format_rational as fmt_r;

    let mut interval_of: HashMap<JobId, usize> = HashMap::new();
    for (index, tuple) in assignment.0.iter().enumerate() {
        for &j in &tuple.jobs {
            interval_of.insert(j, index);
        }
    }
    let zero = Rational::from_integer(0);
    let mut received = vec![zero; assignment.len()];
    let mut touched = vec![false; assignment.len()];
    let mut batches = Vec::with_capacity(schedule.len());
    let mut distributed = zero;
    let mut cost = zero;

    for (b, batch) in schedule.iter().enumerate() {
        let k = batch.batch_type;
        if k >= menu.type_count() {
            return Err(AuditError::UnknownType {
                batch: b,
                batch_type: k,
            });
        }
        cost += pow2(k as u32);
        let high_credit = pow2(k as u32 + 1) / Rational::from_integer(menu.capacity(k) as i128);
        let mut to_lower = zero;
        let mut to_higher = zero;
        for &j in &batch.job_ids {
            let Some(&i) = interval_of.get(&j) else { continue };
            let tuple = &assignment.0[i];
            let share = pow2(tuple.interval_type as u32) / Rational::from_integer(tuple.jobs.len() as i128);
            let credit = if tuple.interval_type <= k {
                to_lower += share;
                share
            } else {
                if share > high_credit {
                    return Err(AuditError::PerJobShare {
                        batch: b,
                        job: j,
                        share: fmt_r(&share),
                        bound: fmt_r(&high_credit),
                    });
                }
                to_higher += high_credit;
                high_credit
            };
            received[i] += credit;
            touched[i] = true;
        }
        let bound = pow2(k as u32 + 1);
        if to_lower > bound {
            return Err(AuditError::LowerSide {
                batch: b,
                total: fmt_r(&to_lower),
                bound: fmt_r(&bound),
            });
        }
        if to_higher > bound {
            return Err(AuditError::HigherSide {
                batch: b,
                total: fmt_r(&to_higher),
                bound: fmt_r(&bound),
            });
        }
        distributed += to_lower + to_higher;
        batches.push(BatchCredit {
            batch: b,
            batch_type: k,
            to_lower,
            to_higher,
            total: to_lower + to_higher,
        });
    }

    let mut intervals = Vec::with_capacity(assignment.len());
    for (i, tuple) in assignment.0.iter().enumerate() {
        if !touched[i] {
            return Err(AuditError::IntervalUnserved { tuple: i });
        }
        let required = pow2(tuple.interval_type as u32);
        if received[i] < required {
            return Err(AuditError::IntervalUnderpaid {
                tuple: i,
                received: fmt_r(&received[i]),
                required: fmt_r(&required),
            });
        }
        intervals.push(IntervalCredit {
            tuple: i,
            interval_type: tuple.interval_type,
            received: received[i],
            required,
        });
    }
    if distributed > cost * 4 {
        return Err(AuditError::TotalExceeded {
            distributed: fmt_r(&distributed),
            cost: fmt_r(&cost),
        });
    }
    Ok(CreditAudit {
        batches,
        intervals,
        distributed,
        schedule_cost: cost,
    })
}

/// For every dispatch time, the interval from the earliest release to the latest deadline of
/// the jobs dispatched then; returns the maximum number of these intervals sharing a slot.
pub fn overlap_depth(trace: &DispatchTrace, jobs: &[JobSpec]) -> usize {
    let by_id: HashMap<JobId, &JobSpec> = jobs.iter().map(|j| (j.id, j)).collect();
    let mut spans: BTreeMap<Time, (Time, Time)> = BTreeMap::new();
    for record in trace.iter() {
        for id in &record.job_ids {
            let job = by_id[id];
            spans
                .entry(record.time)
                .and_modify(|(lo, hi)| {
                    *lo = (*lo).min(job.release);
                    *hi = (*hi).max(job.deadline);
                })
                .or_insert((job.release, job.deadline));
        }
    }
    let mut events: Vec<(Time, i32)> = Vec::with_capacity(spans.len() * 2);
    for &(lo, hi) in spans.values() {
        events.push((lo, 1));
        events.push((hi + 1, -1));
    }
    // Closings sort before openings at the same coordinate.
    events.sort_unstable();
    let mut depth = 0i32;
    let mut best = 0i32;
    for (_, delta) in events {
        depth += delta;
        best = best.max(depth);
    }
    best as usize
}
