//! Online scheduling policies.
//!
//! * [`Greedy`]: at every forced slot, clear the whole waiting set with the cheapest machine
//!   multiset ([`BatchPlanner`]). 2-competitive on agreeable instances.
//! * [`MainAlgorithm`]: picks a ladder rung per critical job by growing nested intervals over
//!   the latest batch of each rung; records an interval assignment certifying its own cost.
//! * [`MostCostEfficient`], [`Lazy`], [`RampUp`]: natural heuristics without constant
//!   guarantees, kept as baselines.

use std::fmt;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{AssignmentTuple, IntervalAssignment};
use crate::engine::{
    run_online, DispatchRecord, EngineFault, InstanceSource, OnlineAlgorithm, RunOutcome, StaticSource, WaitingSet,
};
use crate::instance::{Instance, JobSpec, MachineType, NormalizedLadder, RealizeError, TypeMenu};
use crate::rational::Rational;
use crate::schedule::{schedule_cost, Schedule, TypeSystem};
use crate::{JobId, Time};

/// Cheapest multiset of machines whose capacities add up to at least `m`, for every `m`
/// up to the largest one requested so far.
#[derive(Debug, Clone)]
pub struct BatchPlanner {
    capacities: Vec<u64>,
    costs: Vec<Rational>,
    best: Vec<Rational>,
    /// Type used last in an optimal plan for `m` (`None` for `m = 0`).
    choice: Vec<Option<usize>>,
}

impl BatchPlanner {
    pub fn new(menu: &(impl TypeMenu + ?Sized)) -> Self {
        let k = menu.type_count();
        Self {
            capacities: (0..k).map(|t| menu.capacity(t)).collect(),
            costs: (0..k).map(|t| menu.cost(t)).collect(),
            best: vec![Rational::from_integer(0)],
            choice: vec![None],
        }
    }

    pub fn with_limit(menu: &(impl TypeMenu + ?Sized), m: usize) -> Self {
        let mut planner = Self::new(menu);
        planner.ensure(m);
        planner
    }

    pub fn ensure(&mut self, m: usize) {
        while self.best.len() <= m {
            let jobs = self.best.len();
            let mut best: Option<(Rational, usize)> = None;
            // Larger types first so that ties favour fewer machines.
            for t in (0..self.capacities.len()).rev() {
                let served = (self.capacities[t] as usize).min(jobs);
                let cost = self.best[jobs - served] + self.costs[t];
                if best.as_ref().is_none_or(|(b, _)| cost < *b) {
                    best = Some((cost, t));
                }
            }
            let (cost, t) = best.expect("menu is non-empty");
            self.best.push(cost);
            self.choice.push(Some(t));
        }
    }

    /// Minimum cost for `m` jobs. Requires `ensure(m)` (or use [`BatchPlanner::plan`]).
    pub fn cost(&self, m: usize) -> Rational {
        self.best[m]
    }

    /// Machine types of an optimal plan for `m` jobs, largest first, and its cost.
    pub fn plan(&mut self, m: usize) -> (Vec<usize>, Rational) {
        self.ensure(m);
        let mut types = Vec::new();
        let mut rest = m;
        while let Some(t) = self.choice[rest] {
            types.push(t);
            rest -= (self.capacities[t] as usize).min(rest);
        }
        types.sort_unstable_by(|a, b| b.cmp(a));
        (types, self.best[m])
    }
}

/// One-shot form of [`BatchPlanner::plan`].
pub fn get_optimal_batches(m: usize, menu: &(impl TypeMenu + ?Sized)) -> (Vec<usize>, Rational) {
    BatchPlanner::new(menu).plan(m)
}

/// Clears the entire waiting set at every forced slot with an optimal machine multiset.
#[derive(Debug, Clone)]
pub struct Greedy {
    planner: BatchPlanner,
    name: &'static str,
}

impl Greedy {
    /// The agreeable-deadline algorithm.
    pub fn agreeable(menu: &(impl TypeMenu + ?Sized)) -> Self {
        Self {
            planner: BatchPlanner::new(menu),
            name: "greedy_agreeable",
        }
    }

    /// Same policy, run as a baseline on general instances.
    pub fn general(menu: &(impl TypeMenu + ?Sized)) -> Self {
        Self {
            planner: BatchPlanner::new(menu),
            name: "greedy_general",
        }
    }
}

impl OnlineAlgorithm for Greedy {
    fn name(&self) -> &'static str {
        self.name
    }

    fn decide(&mut self, _time: Time, _critical: &JobSpec, waiting: &WaitingSet) -> Vec<usize> {
        self.planner.plan(waiting.len()).0
    }
}

/// Latest dispatched batch of one rung.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RungRecord {
    pub time: Time,
    pub earliest_arrival: Time,
    pub jobs: Vec<JobId>,
    pub critical: Option<JobId>,
}

/// Per-rung memory of the main algorithm: only the latest batch of each rung matters.
#[derive(Debug, Clone, Default)]
pub struct TypeTracker {
    latest: Vec<Option<RungRecord>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeChoice {
    pub rung: usize,
    /// Closed interval `[left, right]`; `right` is the dispatch time.
    pub left: Time,
    pub right: Time,
    pub charged: Vec<JobId>,
}

impl TypeTracker {
    pub fn new(rungs: usize) -> Self {
        Self {
            latest: vec![None; rungs],
        }
    }

    pub fn latest(&self, rung: usize) -> Option<&RungRecord> {
        self.latest.get(rung).and_then(Option::as_ref)
    }

    pub fn record(&mut self, rung: usize, record: RungRecord) {
        debug_assert!(record.earliest_arrival <= record.time);
        if rung >= self.latest.len() {
            self.latest.resize(rung + 1, None);
        }
        self.latest[rung] = Some(record);
    }

    /// Grows `[r_critical, time]` through the latest batch of rung 0, 1, ... for as long as
    /// that batch executed inside the current interval. The first rung whose latest batch
    /// lies outside is chosen.
    pub fn choose(&self, time: Time, critical: &JobSpec) -> TypeChoice {
        debug_assert_eq!(critical.deadline, time);
        let mut left = critical.release;
        let mut rung = 0;
        while let Some(prev) = self.latest(rung) {
            if prev.time < left || prev.time > time {
                break;
            }
            left = left.min(prev.earliest_arrival);
            rung += 1;
        }
        let mut charged = vec![critical.id];
        if rung > 0 {
            let prev = self.latest(rung - 1).expect("loop passed through this rung");
            charged.extend(prev.jobs.iter().copied().filter(|&j| Some(j) != prev.critical));
        }
        TypeChoice {
            rung,
            left,
            right: time,
            charged,
        }
    }
}

/// The 8-competitive algorithm, run on a [`NormalizedLadder`].
#[derive(Debug, Clone)]
pub struct MainAlgorithm {
    rungs: usize,
    tracker: TypeTracker,
    ledger: Vec<AssignmentTuple>,
    pending: Option<TypeChoice>,
}

impl MainAlgorithm {
    pub fn new(ladder: &NormalizedLadder) -> Self {
        Self::with_rungs(ladder.rungs.len())
    }

    pub fn with_rungs(rungs: usize) -> Self {
        Self {
            rungs,
            tracker: TypeTracker::new(rungs),
            ledger: Vec::new(),
            pending: None,
        }
    }

    pub fn tracker(&self) -> &TypeTracker {
        &self.tracker
    }

    /// The interval assignment built so far, one tuple per dispatched batch.
    pub fn ledger(&self) -> IntervalAssignment {
        IntervalAssignment(self.ledger.clone())
    }

    pub fn into_ledger(self) -> IntervalAssignment {
        IntervalAssignment(self.ledger)
    }
}

impl OnlineAlgorithm for MainAlgorithm {
    fn name(&self) -> &'static str {
        "main"
    }

    fn decide(&mut self, time: Time, critical: &JobSpec, _waiting: &WaitingSet) -> Vec<usize> {
        let choice = self.tracker.choose(time, critical);
        if choice.rung >= self.rungs {
            // Cannot happen when the ladder was built for at least as many jobs as arrive;
            // the engine turns the out-of-range type into a fault.
            warn!(
                "rung {} needed at time {time} but the ladder stops at {}",
                choice.rung,
                self.rungs - 1
            );
        }
        let rung = choice.rung;
        self.pending = Some(choice);
        vec![rung]
    }

    fn on_dispatch(&mut self, record: &DispatchRecord, jobs: &[JobSpec]) {
        let choice = self.pending.take().expect("dispatch follows a decision");
        debug_assert_eq!(choice.rung, record.batch_type);
        let earliest_arrival = jobs.iter().map(|j| j.release).min().expect("non-empty batch");
        self.tracker.record(
            record.batch_type,
            RungRecord {
                time: record.time,
                earliest_arrival,
                jobs: record.job_ids.clone(),
                critical: record.critical,
            },
        );
        self.ledger.push(AssignmentTuple {
            left: choice.left,
            right: choice.right,
            interval_type: choice.rung,
            jobs: choice.charged,
        });
    }
}

/// Uses the single type with the lowest cost per job that can be scheduled right now.
#[derive(Debug, Clone)]
pub struct MostCostEfficient {
    types: Vec<MachineType>,
}

impl MostCostEfficient {
    pub fn new(types: &[MachineType]) -> Self {
        Self { types: types.to_vec() }
    }
}

impl OnlineAlgorithm for MostCostEfficient {
    fn name(&self) -> &'static str {
        "most_cost_efficient"
    }

    fn decide(&mut self, _time: Time, _critical: &JobSpec, waiting: &WaitingSet) -> Vec<usize> {
        let w = waiting.len() as u64;
        let mut best: Option<(Rational, usize)> = None;
        for (t, mt) in self.types.iter().enumerate() {
            let per_job = mt.cost / Rational::from_integer(mt.capacity.min(w) as i128);
            if best.as_ref().is_none_or(|(b, _)| per_job < *b) {
                best = Some((per_job, t));
            }
        }
        vec![best.expect("menu is non-empty").1]
    }
}

/// Ships only the jobs due now, as cheaply as possible, until the waiting set can fill the
/// largest machine, which is then used.
#[derive(Debug, Clone)]
pub struct Lazy {
    planner: BatchPlanner,
    largest: usize,
    largest_capacity: u64,
}

impl Lazy {
    pub fn new(types: &[MachineType]) -> Self {
        let largest = types.len() - 1;
        Self {
            planner: BatchPlanner::new(types),
            largest,
            largest_capacity: types[largest].capacity,
        }
    }
}

impl OnlineAlgorithm for Lazy {
    fn name(&self) -> &'static str {
        "lazy"
    }

    fn decide(&mut self, time: Time, _critical: &JobSpec, waiting: &WaitingSet) -> Vec<usize> {
        if waiting.len() as u64 >= self.largest_capacity {
            return vec![self.largest];
        }
        self.planner.plan(waiting.count_due(time)).0
    }
}

/// Uses the largest type whose cost does not exceed the spend accumulated since the waiting
/// set was last empty (type 0 when nothing qualifies).
#[derive(Debug, Clone)]
pub struct RampUp {
    types: Vec<MachineType>,
    accumulated: Rational,
    outstanding: usize,
}

impl RampUp {
    pub fn new(types: &[MachineType]) -> Self {
        Self {
            types: types.to_vec(),
            accumulated: Rational::from_integer(0),
            outstanding: 0,
        }
    }

    pub fn accumulated(&self) -> Rational {
        self.accumulated
    }
}

impl OnlineAlgorithm for RampUp {
    fn name(&self) -> &'static str {
        "ramp_up"
    }

    fn on_arrivals(&mut self, _time: Time, jobs: &[JobSpec]) {
        self.outstanding += jobs.len();
    }

    fn decide(&mut self, _time: Time, _critical: &JobSpec, _waiting: &WaitingSet) -> Vec<usize> {
        let t = self
            .types
            .iter()
            .rposition(|mt| mt.cost <= self.accumulated)
            .unwrap_or(0);
        vec![t]
    }

    fn on_dispatch(&mut self, record: &DispatchRecord, jobs: &[JobSpec]) {
        self.accumulated += self.types[record.batch_type].cost;
        self.outstanding -= jobs.len();
        if self.outstanding == 0 {
            self.accumulated = Rational::from_integer(0);
        }
    }
}

/// Every policy the crate implements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmKind {
    Main,
    GreedyAgreeable,
    GreedyGeneral,
    MostCostEfficient,
    Lazy,
    RampUp,
}

impl AlgorithmKind {
    pub const ALL: [AlgorithmKind; 6] = [
        AlgorithmKind::Main,
        AlgorithmKind::GreedyAgreeable,
        AlgorithmKind::GreedyGeneral,
        AlgorithmKind::MostCostEfficient,
        AlgorithmKind::Lazy,
        AlgorithmKind::RampUp,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            AlgorithmKind::Main => "main",
            AlgorithmKind::GreedyAgreeable => "greedy_agreeable",
            AlgorithmKind::GreedyGeneral => "greedy_general",
            AlgorithmKind::MostCostEfficient => "most_cost_efficient",
            AlgorithmKind::Lazy => "lazy",
            AlgorithmKind::RampUp => "ramp_up",
        }
    }

    /// The main algorithm runs on the normalized ladder; everything else on real types.
    pub fn uses_ladder(&self) -> bool {
        matches!(self, AlgorithmKind::Main)
    }

    /// Builds a real-type policy. Returns `None` for [`AlgorithmKind::Main`].
    pub fn baseline(&self, types: &[MachineType]) -> Option<Box<dyn OnlineAlgorithm>> {
        Some(match self {
            AlgorithmKind::Main => return None,
            AlgorithmKind::GreedyAgreeable => Box::new(Greedy::agreeable(types)),
            AlgorithmKind::GreedyGeneral => Box::new(Greedy::general(types)),
            AlgorithmKind::MostCostEfficient => Box::new(MostCostEfficient::new(types)),
            AlgorithmKind::Lazy => Box::new(Lazy::new(types)),
            AlgorithmKind::RampUp => Box::new(RampUp::new(types)),
        })
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AlgorithmKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AlgorithmKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown algorithm `{s}`"))
    }
}

/// Everything one online run produces.
#[derive(Debug, Clone)]
pub struct AlgorithmRun {
    pub kind: AlgorithmKind,
    pub outcome: RunOutcome,
    /// The schedule on real machines (the realized ladder schedule for the main algorithm).
    pub real_schedule: Schedule,
    pub real_cost: Rational,
    /// Ladder cost of the virtual schedule (main algorithm only).
    pub virtual_cost: Option<Rational>,
    pub ledger: Option<IntervalAssignment>,
    pub ladder: Option<NormalizedLadder>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RunError {
    #[error(transparent)]
    Engine(#[from] EngineFault),
    #[error(transparent)]
    Realize(#[from] RealizeError),
}

/// Runs `kind` on a static instance. The main algorithm gets a ladder built for the
/// instance's job count.
pub fn run_algorithm(kind: AlgorithmKind, instance: &Instance) -> Result<AlgorithmRun, RunError> {
    run_algorithm_on(
        kind,
        &mut StaticSource::from_instance(instance),
        &instance.machine_types,
        instance.n(),
    )
}

/// Runs `kind` against any source over `real_types`; `job_bound` sizes the ladder and must be
/// at least the number of jobs the source will reveal.
pub fn run_algorithm_on(
    kind: AlgorithmKind,
    source: &mut dyn InstanceSource,
    real_types: &[MachineType],
    job_bound: usize,
) -> Result<AlgorithmRun, RunError> {
    if let Some(mut alg) = kind.baseline(real_types) {
        let menu = real_types.to_vec();
        let outcome = run_online(source, &mut alg, &menu, TypeSystem::Real)?;
        let real_cost = schedule_cost(&outcome.schedule, real_types);
        return Ok(AlgorithmRun {
            kind,
            real_schedule: outcome.schedule.clone(),
            outcome,
            real_cost,
            virtual_cost: None,
            ledger: None,
            ladder: None,
        });
    }
    let ladder = NormalizedLadder::build(real_types, job_bound);
    let mut alg = MainAlgorithm::new(&ladder);
    let outcome = run_online(source, &mut alg, &ladder, TypeSystem::Virtual)?;
    let real_schedule = ladder.realize_schedule(&outcome.schedule)?;
    Ok(AlgorithmRun {
        kind,
        real_cost: schedule_cost(&real_schedule, real_types),
        virtual_cost: Some(schedule_cost(&outcome.schedule, &ladder)),
        real_schedule,
        outcome,
        ledger: Some(alg.into_ledger()),
        ladder: Some(ladder),
    })
}
