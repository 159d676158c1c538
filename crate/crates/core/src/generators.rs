//! Instance factories: seeded random families, the adaptive two-type adversary, the killer
//! families for the baseline heuristics and the tight certificate family.

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{AssignmentTuple, IntervalAssignment};
use crate::engine::{DispatchTrace, InstanceSource};
use crate::instance::{canonicalize_types, Instance, JobSpec, MachineType};
use crate::rational::{pow2, Rational};
use crate::schedule::{batches_cost, validate_batches, Batch, Schedule, TypeSystem, Violation};
use crate::{JobId, Time};

/// Largest instance the static families will materialize.
pub const MAX_GENERATED_JOBS: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("construction would have {jobs} jobs; the limit is {limit}")]
    TooLarge { jobs: u64, limit: u64 },
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error("constructed schedule `{which}` is invalid: {violations}")]
    Construction { which: &'static str, violations: String },
}

fn check_construction(
    which: &'static str,
    jobs: &[JobSpec],
    batches: &[Batch],
    menu: &[MachineType],
) -> Result<(), GenError> {
    let violations: Vec<Violation> = validate_batches(jobs, batches, menu).map_err(|e| GenError::Construction {
        which,
        violations: e.to_string(),
    })?;
    if violations.is_empty() {
        Ok(())
    } else {
        Err(GenError::Construction {
            which,
            violations: violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomParams {
    pub n: usize,
    /// Number of machine types drawn (dominated ones are dropped afterwards).
    pub k: usize,
    /// Releases are drawn from `0..=horizon`.
    pub horizon: Time,
    /// Deadlines are `release + 0..=window_max`.
    pub window_max: Time,
    pub agreeable: bool,
    /// Machine costs `2^k` with at least doubling capacities instead of random rationals.
    pub power_ladder: bool,
    pub seed: u64,
}

impl RandomParams {
    pub fn new(n: usize, k: usize, seed: u64) -> Self {
        Self {
            n,
            k,
            horizon: 8,
            window_max: 4,
            agreeable: false,
            power_ladder: false,
            seed,
        }
    }
}

/// Random instance, deterministic in `params`.
pub fn gen_random(params: &RandomParams) -> Result<Instance, GenError> {
    if params.n == 0 || params.k == 0 {
        return Err(GenError::BadParameter("n and k must be at least 1".into()));
    }
    if params.horizon < 0 || params.window_max < 0 {
        return Err(GenError::BadParameter(
            "horizon and window_max must be non-negative".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let types = if params.power_ladder {
        random_power_ladder(&mut rng, params.k)
    } else {
        random_menu(&mut rng, params.k)
    };

    let mut releases: Vec<Time> = (0..params.n).map(|_| rng.random_range(0..=params.horizon)).collect();
    let mut deadlines: Vec<Time> = releases
        .iter()
        .map(|&r| r + rng.random_range(0..=params.window_max))
        .collect();
    if params.agreeable {
        // Pairing order statistics keeps every window non-empty.
        releases.sort_unstable();
        deadlines.sort_unstable();
    }
    let jobs = releases
        .into_iter()
        .zip(deadlines)
        .enumerate()
        .map(|(i, (r, d))| JobSpec::new(i as JobId, r, d))
        .collect();
    Instance::new(types, jobs).map_err(|e| GenError::BadParameter(e.to_string()))
}

fn random_menu(rng: &mut ChaCha8Rng, k: usize) -> Vec<MachineType> {
    let mut capacity = rng.random_range(1..=3u64);
    let mut cost = Rational::new(rng.random_range(4..=8), 4);
    let mut types = Vec::with_capacity(k);
    for _ in 0..k {
        types.push(MachineType::new(capacity, cost));
        capacity += rng.random_range(1..=capacity.max(2) * 2);
        cost += Rational::new(rng.random_range(1..=12), rng.random_range(1..=4));
    }
    canonicalize_types(&types)
}

fn random_power_ladder(rng: &mut ChaCha8Rng, k: usize) -> Vec<MachineType> {
    let mut capacity = rng.random_range(1..=3u64);
    let mut types = Vec::with_capacity(k);
    for i in 0..k {
        types.push(MachineType::new(capacity, pow2(i as u32)));
        capacity = 2 * capacity + rng.random_range(0..=capacity);
    }
    types
}

/// Bookkeeping of the adaptive adversary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AdversaryState {
    pub m: u64,
    pub groups_released: u64,
    pub next_even_deadline: Time,
    /// Release time of every group so far.
    pub release_times: Vec<Time>,
    /// Large-machine uses that would have triggered a group after the last one.
    pub suppressed_triggers: u64,
}

/// Releases groups of `M³/2` jobs, one fresh even deadline per job. The first group comes at
/// time 1; every further group comes at the first odd slot after the algorithm uses a large
/// machine, up to `M` groups in total.
#[derive(Debug, Clone)]
pub struct AdversarySource {
    state: AdversaryState,
    /// Dispatched types `>= large_from` count as large machines.
    large_from: usize,
    scanned: usize,
    pending: Option<Time>,
    next_id: JobId,
}

impl AdversarySource {
    pub fn new(m: u64, large_from: usize) -> Result<Self, GenError> {
        if m < 4 || !m.is_multiple_of(2) {
            return Err(GenError::BadParameter(format!(
                "M must be even and at least 4, got {m}"
            )));
        }
        if m.checked_pow(4).is_none_or(|jobs| jobs / 2 > MAX_GENERATED_JOBS) {
            return Err(GenError::TooLarge {
                jobs: m.saturating_pow(4) / 2,
                limit: MAX_GENERATED_JOBS,
            });
        }
        Ok(Self {
            state: AdversaryState {
                m,
                groups_released: 0,
                next_even_deadline: 2,
                release_times: Vec::new(),
                suppressed_triggers: 0,
            },
            large_from,
            scanned: 0,
            pending: Some(1),
            next_id: 0,
        })
    }

    pub fn state(&self) -> &AdversaryState {
        &self.state
    }

    pub fn group_size(&self) -> u64 {
        self.state.m.pow(3) / 2
    }

    fn scan(&mut self, trace: &DispatchTrace) {
        let last_release = self.state.release_times.last().copied();
        while self.scanned < trace.records.len() {
            let record = &trace.records[self.scanned];
            self.scanned += 1;
            let after_release = last_release.is_some_and(|r| record.time >= r);
            if self.pending.is_some() || record.batch_type < self.large_from || !after_release {
                continue;
            }
            if self.state.groups_released >= self.state.m {
                self.state.suppressed_triggers += 1;
                info!(
                    "adversary: large machine at {} after the last group, no release",
                    record.time
                );
                continue;
            }
            let t = record.time + 1;
            self.pending = Some(if t % 2 != 0 { t } else { t + 1 });
        }
    }
}

/// The two-type menu of the adversary: small (capacity 1, cost 1) and large (capacity `M³`,
/// cost `M`).
pub fn adversary_types(m: u64) -> Vec<MachineType> {
    vec![
        MachineType::with_int_cost(1, 1),
        MachineType::with_int_cost(m.pow(3), m as i128),
    ]
}

impl InstanceSource for AdversarySource {
    fn next_arrival(&mut self, trace: &DispatchTrace) -> Option<Time> {
        self.scan(trace);
        self.pending
    }

    fn arrivals(&mut self, time: Time, _trace: &DispatchTrace) -> Vec<JobSpec> {
        debug_assert_eq!(self.pending, Some(time));
        self.pending = None;
        self.state.groups_released += 1;
        self.state.release_times.push(time);
        let mut deadline = self.state.next_even_deadline.max(time + 1);
        if deadline % 2 != 0 {
            deadline += 1;
        }
        let size = self.group_size();
        let mut jobs = Vec::with_capacity(size as usize);
        for _ in 0..size {
            jobs.push(JobSpec::new(self.next_id, time, deadline));
            self.next_id += 1;
            deadline += 2;
        }
        self.state.next_even_deadline = deadline;
        jobs
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AdversaryBounds {
    /// Small-machine dispatches after each group's release and before the next one.
    pub q: Vec<u64>,
    /// One large batch per group.
    #[serde(with = "crate::rational::serde_rational_str")]
    pub per_group: Rational,
    /// Large batch first, then small and large alternating with the even-indexed counts.
    #[serde(with = "crate::rational::serde_rational_str")]
    pub even: Rational,
    /// Small batches first, with the odd-indexed counts.
    #[serde(with = "crate::rational::serde_rational_str")]
    pub odd: Rational,
    #[serde(with = "crate::rational::serde_rational_str")]
    pub best: Rational,
    #[serde(skip)]
    pub best_schedule: Schedule,
}

/// Upper bound on the optimum of an adversary run: the cheapest of three concrete schedules
/// over the real two-type menu, each checked with the schedule validator. Trace types
/// `>= large_from` are large; `jobs` must be exactly the jobs the source released.
pub fn adversary_opt_bounds(
    m: u64,
    trace: &DispatchTrace,
    jobs: &[JobSpec],
    large_from: usize,
) -> Result<AdversaryBounds, GenError> {
    let menu = adversary_types(m);
    let mut releases: Vec<Time> = jobs.iter().map(|j| j.release).collect();
    releases.sort_unstable();
    releases.dedup();
    let groups = releases.len();
    let group_of = |release: Time| releases.binary_search(&release).expect("release of a known group");

    let mut q = vec![0u64; groups];
    for record in trace.iter() {
        if record.batch_type >= large_from {
            continue;
        }
        let g = releases.partition_point(|&r| r <= record.time);
        if g > 0 {
            q[g - 1] += 1;
        }
    }

    let mut by_deadline: Vec<JobSpec> = jobs.to_vec();
    by_deadline.sort_unstable_by_key(|j| (j.deadline, j.id));

    let mut per_group = Vec::new();
    for g in 0..groups {
        let members: Vec<&JobSpec> = by_deadline.iter().filter(|j| group_of(j.release) == g).collect();
        if let Some(first) = members.first() {
            per_group.push(Batch::new(1, first.deadline, members.iter().map(|j| j.id).collect()));
        }
    }
    check_construction("per_group", jobs, &per_group, &menu)?;

    // Walks the deadlines in order; every deadline whose job is still waiting gets a small or
    // a large machine, filled earliest deadline first. A small machine always serves the due
    // job, so the walk is feasible for any choice rule.
    let walk = |small_phase: &dyn Fn(usize) -> bool| -> Vec<Batch> {
        let mut smalls_used = vec![0u64; groups];
        let mut served = vec![false; by_deadline.len()];
        let mut batches = Vec::new();
        for i in 0..by_deadline.len() {
            if served[i] {
                continue;
            }
            let due = &by_deadline[i];
            let g = group_of(due.release);
            let small = small_phase(g) && smalls_used[g] < q[g] + 1;
            let capacity = if small { 1 } else { menu[1].capacity };
            if small {
                smalls_used[g] += 1;
            }
            let mut ids = Vec::new();
            for (k, job) in by_deadline.iter().enumerate().skip(i) {
                if ids.len() as u64 == capacity {
                    break;
                }
                if !served[k] && job.release <= due.deadline {
                    served[k] = true;
                    ids.push(job.id);
                }
            }
            batches.push(Batch::new(usize::from(!small), due.deadline, ids));
        }
        batches
    };
    // Group indices are 0-based here; the even-indexed groups of the construction are the
    // odd 0-based ones.
    let even = walk(&|g| g % 2 == 1);
    check_construction("even", jobs, &even, &menu)?;
    let odd = walk(&|g| g % 2 == 0);
    check_construction("odd", jobs, &odd, &menu)?;

    let candidates = [
        (batches_cost(&per_group, &menu), per_group),
        (batches_cost(&even, &menu), even),
        (batches_cost(&odd, &menu), odd),
    ];
    let (best, best_batches) = candidates
        .iter()
        .min_by_key(|(cost, _)| *cost)
        .map(|(c, b)| (*c, b.clone()))
        .expect("three candidates");
    Ok(AdversaryBounds {
        q,
        per_group: candidates[0].0,
        even: candidates[1].0,
        odd: candidates[2].0,
        best,
        best_schedule: Schedule::new(TypeSystem::Real, best_batches),
    })
}

/// The heuristic each killer family targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KillerVariant {
    Greedy,
    CostEfficient,
    Lazy,
    RampUp,
}

impl KillerVariant {
    pub const ALL: [KillerVariant; 4] = [
        KillerVariant::Greedy,
        KillerVariant::CostEfficient,
        KillerVariant::Lazy,
        KillerVariant::RampUp,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            KillerVariant::Greedy => "greedy",
            KillerVariant::CostEfficient => "cost_efficient",
            KillerVariant::Lazy => "lazy",
            KillerVariant::RampUp => "ramp_up",
        }
    }
}

impl std::str::FromStr for KillerVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        KillerVariant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown variant `{s}`"))
    }
}

/// Types `0..=K` with capacity `10^l` and cost `2^l`.
pub fn decimal_types(k: u32) -> Vec<MachineType> {
    (0..=k).map(|l| MachineType::new(10u64.pow(l), pow2(l))).collect()
}

#[derive(Debug, Clone)]
pub struct KillerInstance {
    pub instance: Instance,
    /// A feasible schedule whose cost bounds the optimum from above.
    pub bound: Schedule,
}

impl KillerInstance {
    pub fn bound_cost(&self) -> Rational {
        batches_cost(&self.bound.batches, &self.instance.machine_types)
    }
}

/// Killer family for one baseline over [`decimal_types`]`(K)`.
///
/// * greedy / cost_efficient: at each odd slot `2i+1`, `i < 10^{K/2}`, `10^{K/2}` jobs arrive:
///   one due at `2i+2`, the rest due at the shared late slot `2·10^{K/2} + 2`.
/// * lazy: `10^{K/2}` jobs at time 1 with deadlines `2, 3, …`.
/// * ramp_up: `10^{K/2-1}` repetitions of: 2 jobs at the start `b`, then `10^l` jobs at
///   `b+2l+1` for `1 ≤ l < K/2` and `10^{K/2} - 1` at `b+K+1`, each group with one job due at
///   the next slot; then one closing job at `b+K+3` due at `b+K+4`. Every other job shares one
///   late deadline after the last repetition.
pub fn killer_instance(variant: KillerVariant, k: u32) -> Result<KillerInstance, GenError> {
    if k < 2 || !k.is_multiple_of(2) {
        return Err(GenError::BadParameter(format!(
            "K must be even and at least 2, got {k}"
        )));
    }
    let half = k / 2;
    let side = 10u64.checked_pow(half).ok_or(GenError::TooLarge {
        jobs: u64::MAX,
        limit: MAX_GENERATED_JOBS,
    })?;
    let jobs_total = match variant {
        KillerVariant::Greedy | KillerVariant::CostEfficient => side.saturating_mul(side),
        KillerVariant::Lazy => side,
        KillerVariant::RampUp => {
            let per_rep: u64 = 2 + (1..half).map(|l| 10u64.pow(l)).sum::<u64>() + (side - 1) + 1;
            per_rep.saturating_mul(side / 10)
        }
    };
    if jobs_total > MAX_GENERATED_JOBS {
        return Err(GenError::TooLarge {
            jobs: jobs_total,
            limit: MAX_GENERATED_JOBS,
        });
    }

    let types = decimal_types(k);
    let mut jobs: Vec<JobSpec> = Vec::with_capacity(jobs_total as usize);
    let mut next_id: JobId = 0;
    let mut push = |jobs: &mut Vec<JobSpec>, r: Time, d: Time| -> JobId {
        let id = next_id;
        jobs.push(JobSpec::new(id, r, d));
        next_id += 1;
        id
    };
    let mut bound = Vec::new();

    match variant {
        KillerVariant::Greedy | KillerVariant::CostEfficient => {
            let late = 2 * side as Time + 2;
            let mut late_ids = Vec::new();
            for i in 0..side as Time {
                let release = 2 * i + 1;
                let urgent = push(&mut jobs, release, release + 1);
                bound.push(Batch::new(0, release + 1, vec![urgent]));
                for _ in 1..side {
                    late_ids.push(push(&mut jobs, release, late));
                }
            }
            bound.push(Batch::new(k as usize, late, late_ids));
        }
        KillerVariant::Lazy => {
            let ids = (0..side as Time).map(|i| push(&mut jobs, 1, 2 + i)).collect();
            bound.push(Batch::new(half as usize, 1, ids));
        }
        KillerVariant::RampUp => {
            let period = k as Time + 6;
            let repetitions = side / 10;
            let late = repetitions as Time * period + 2;
            let mut late_ids = Vec::new();
            for rep in 0..repetitions as Time {
                let base = rep * period;
                let mut group = |jobs: &mut Vec<JobSpec>, release: Time, size: u64| {
                    let urgent = push(jobs, release, release + 1);
                    bound.push(Batch::new(0, release + 1, vec![urgent]));
                    for _ in 1..size {
                        late_ids.push(push(jobs, release, late));
                    }
                };
                group(&mut jobs, base, 2);
                for l in 1..half {
                    group(&mut jobs, base + 2 * l as Time + 1, 10u64.pow(l));
                }
                group(&mut jobs, base + k as Time + 1, side - 1);
                group(&mut jobs, base + k as Time + 3, 1);
            }
            bound.push(Batch::new(k as usize, late, late_ids));
        }
    }

    let instance = Instance::new(types, jobs).map_err(|e| GenError::BadParameter(e.to_string()))?;
    check_construction(variant.as_str(), &instance.jobs, &bound, &instance.machine_types)?;
    Ok(KillerInstance {
        instance,
        bound: Schedule::new(TypeSystem::Real, bound),
    })
}

#[derive(Debug, Clone)]
pub struct TightExample {
    pub instance: Instance,
    pub assignment: IntervalAssignment,
    pub schedule: Schedule,
}

/// Types `0..=2q+2` with cost `2^k`, capacity `2^k` up to `k = q` and `2^{q+k}` above. For
/// every `r` in `1..=2^q` and `s` in `0..=q+1` a tuple on `[2r, 2r+1]` of type `s`, plus one
/// type-`2q+2` tuple on `[0, 2^{q+1}+2]`; each job's window is its tuple's interval. The
/// schedule uses one type-`(q+1)` machine at every `2r+1` and one more at the end.
pub fn tight_example(q: u32) -> Result<TightExample, GenError> {
    if q == 0 {
        return Err(GenError::BadParameter("q must be at least 1".into()));
    }
    let jobs_total = (1u64 << (2 * q + 1)) + (1u64 << (3 * q + 1));
    if jobs_total > MAX_GENERATED_JOBS {
        return Err(GenError::TooLarge {
            jobs: jobs_total,
            limit: MAX_GENERATED_JOBS,
        });
    }
    let capacity = |k: u32| -> u64 {
        if k <= q {
            1 << k
        } else {
            1 << (q + k)
        }
    };
    let types: Vec<MachineType> = (0..=2 * q + 2)
        .map(|k| MachineType::new(capacity(k), pow2(k)))
        .collect();

    let mut jobs = Vec::with_capacity(jobs_total as usize);
    let mut tuples = Vec::new();
    let mut next_id: JobId = 0;
    let mut tuple = |jobs: &mut Vec<JobSpec>, left: Time, right: Time, t: u32| {
        let size = if t == 0 { 1 } else { capacity(t - 1) };
        let ids: Vec<JobId> = (0..size)
            .map(|_| {
                jobs.push(JobSpec::new(next_id, left, right));
                next_id += 1;
                next_id - 1
            })
            .collect();
        tuples.push(AssignmentTuple {
            left,
            right,
            interval_type: t as usize,
            jobs: ids,
        });
    };
    let slots = 1i64 << q;
    for r in 1..=slots {
        for s in 0..=q + 1 {
            tuple(&mut jobs, 2 * r, 2 * r + 1, s);
        }
    }
    let end = (1i64 << (q + 1)) + 2;
    tuple(&mut jobs, 0, end, 2 * q + 2);

    let big = tuples.last().expect("big tuple").jobs.clone();
    let per_slot = (q + 2) as usize;
    let batch_type = (q + 1) as usize;
    let batch_capacity = capacity(q + 1) as usize;
    let mut big_rest = big.as_slice();
    let mut batches = Vec::new();
    for r in 1..=slots {
        let first = (r as usize - 1) * per_slot;
        let mut ids: Vec<JobId> = tuples[first..first + per_slot]
            .iter()
            .flat_map(|t| t.jobs.iter().copied())
            .collect();
        let fill = batch_capacity - ids.len();
        ids.extend_from_slice(&big_rest[..fill]);
        big_rest = &big_rest[fill..];
        batches.push(Batch::new(batch_type, 2 * r + 1, ids));
    }
    batches.push(Batch::new(batch_type, end, big_rest.to_vec()));

    let instance = Instance::new(types, jobs).map_err(|e| GenError::BadParameter(e.to_string()))?;
    check_construction("tight", &instance.jobs, &batches, &instance.machine_types)?;
    Ok(TightExample {
        instance,
        assignment: IntervalAssignment(tuples),
        schedule: Schedule::new(TypeSystem::Real, batches),
    })
}
