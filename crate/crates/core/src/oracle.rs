//! Offline ground truth: feasibility of fixed machine placements and exact optima for small
//! instances.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algorithms::BatchPlanner;
use crate::instance::{JobSpec, TypeMenu};
use crate::rational::Rational;
use crate::schedule::Batch;
use crate::{JobId, Time};

/// Machine slots `(exec_time, machine_type)` without job assignments.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacementSet(pub Vec<(Time, usize)>);

impl PlacementSet {
    pub fn new(mut placements: Vec<(Time, usize)>) -> Self {
        placements.sort_unstable();
        Self(placements)
    }

    pub fn cost(&self, menu: &(impl TypeMenu + ?Sized)) -> Rational {
        self.0.iter().map(|&(_, t)| menu.cost(t)).sum()
    }
}

/// Fills each placement (in time order) with the released, unassigned jobs of earliest
/// deadline. Returns one batch per placement when every job is served in its window.
pub fn edf_feasible(
    jobs: &[JobSpec],
    placements: &PlacementSet,
    menu: &(impl TypeMenu + ?Sized),
) -> Option<Vec<Batch>> {
    let mut by_release: Vec<&JobSpec> = jobs.iter().collect();
    by_release.sort_unstable_by_key(|j| (j.release, j.id));
    let mut next = 0;
    let mut waiting: BinaryHeap<Reverse<(Time, JobId)>> = BinaryHeap::new();
    let mut batches = Vec::with_capacity(placements.0.len());
    for &(time, t) in &placements.0 {
        while next < by_release.len() && by_release[next].release <= time {
            let j = by_release[next];
            waiting.push(Reverse((j.deadline, j.id)));
            next += 1;
        }
        if waiting.peek().is_some_and(|Reverse((d, _))| *d < time) {
            return None;
        }
        let mut batch = Batch::new(t, time, Vec::new());
        while (batch.job_ids.len() as u64) < menu.capacity(t) {
            match waiting.pop() {
                Some(Reverse((_, id))) => batch.job_ids.push(id),
                None => break,
            }
        }
        batches.push(batch);
    }
    (next == by_release.len() && waiting.is_empty()).then_some(batches)
}

/// Max-flow check: jobs on one side, placements (with their capacities) on the other, an
/// edge wherever the placement time lies in the job's window.
pub fn matching_feasible(jobs: &[JobSpec], placements: &PlacementSet, menu: &(impl TypeMenu + ?Sized)) -> bool {
    let n = jobs.len();
    let p = placements.0.len();
    // Nodes: source, jobs, placements, sink.
    let source = 0;
    let sink = n + p + 1;
    let size = n + p + 2;
    let mut cap = vec![vec![0u64; size]; size];
    for (i, job) in jobs.iter().enumerate() {
        cap[source][1 + i] = 1;
        for (k, &(time, _)) in placements.0.iter().enumerate() {
            if job.admits(time) {
                cap[1 + i][1 + n + k] = 1;
            }
        }
    }
    for (k, &(_, t)) in placements.0.iter().enumerate() {
        cap[1 + n + k][sink] = menu.capacity(t).min(n as u64);
    }

    let mut flow = 0;
    loop {
        let mut parent = vec![usize::MAX; size];
        parent[source] = source;
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            if u == sink {
                break;
            }
            for v in 0..size {
                if parent[v] == usize::MAX && cap[u][v] > 0 {
                    parent[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if parent[sink] == usize::MAX {
            break;
        }
        let mut v = sink;
        while v != source {
            let u = parent[v];
            cap[u][v] -= 1;
            cap[v][u] += 1;
            v = u;
        }
        flow += 1;
    }
    flow == n
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleLimits {
    pub max_jobs: usize,
    pub max_deadlines: usize,
    pub max_types: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        Self {
            max_jobs: 16,
            max_deadlines: 12,
            max_types: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("instance has {n} jobs; the exact oracle accepts at most {limit}")]
    TooManyJobs { n: usize, limit: usize },
    #[error("instance has {count} distinct deadlines; the exact oracle accepts at most {limit}")]
    TooManyDeadlines { count: usize, limit: usize },
    #[error("menu has {count} machine types; the exact oracle accepts at most {limit}")]
    TooManyTypes { count: usize, limit: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OptSolution {
    pub batches: Vec<Batch>,
    pub cost: Rational,
}

/// Minimum-cost schedule. Batches run only at deadlines and are filled earliest deadline
/// first, so the only decision at each deadline is how many waiting jobs to serve; serving
/// `x` jobs at one slot costs the cheapest machine multiset of capacity at least `x`. The
/// search is memoized on (deadline index, multiset of waiting deadlines).
pub fn exact_opt(
    jobs: &[JobSpec],
    menu: &(impl TypeMenu + ?Sized),
    limits: OracleLimits,
) -> Result<OptSolution, OracleError> {
    if jobs.len() > limits.max_jobs {
        return Err(OracleError::TooManyJobs {
            n: jobs.len(),
            limit: limits.max_jobs,
        });
    }
    let deadlines: Vec<Time> = jobs
        .iter()
        .map(|j| j.deadline)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if deadlines.len() > limits.max_deadlines {
        return Err(OracleError::TooManyDeadlines {
            count: deadlines.len(),
            limit: limits.max_deadlines,
        });
    }
    if menu.type_count() > limits.max_types {
        return Err(OracleError::TooManyTypes {
            count: menu.type_count(),
            limit: limits.max_types,
        });
    }

    let mut planner = BatchPlanner::with_limit(menu, jobs.len());
    let mut by_release: Vec<JobSpec> = jobs.to_vec();
    by_release.sort_unstable_by_key(|j| (j.release, j.id));
    // arrivals[i]: jobs released in (deadlines[i-1], deadlines[i]].
    let mut arrivals: Vec<Vec<JobSpec>> = vec![Vec::new(); deadlines.len()];
    for job in by_release {
        let i = deadlines.partition_point(|&d| d < job.release);
        arrivals[i].push(job);
    }

    let mut search = Search {
        deadlines: &deadlines,
        arrivals: &arrivals,
        planner: &planner,
        memo: HashMap::new(),
    };
    let cost = search.best(0, &[]);
    let Search { memo, .. } = search;

    // Replay the optimal decisions to materialize batches.
    let mut batches = Vec::new();
    let mut waiting: Vec<JobSpec> = Vec::new();
    for (i, &time) in deadlines.iter().enumerate() {
        waiting.extend_from_slice(&arrivals[i]);
        waiting.sort_unstable_by_key(|j| (j.deadline, j.id));
        let key: Vec<Time> = waiting.iter().map(|j| j.deadline).collect();
        let served = memo[&(i, key)].1;
        if served == 0 {
            continue;
        }
        let (types, _) = planner.plan(served);
        let mut rest = waiting.drain(..served);
        for t in types {
            let take = (menu.capacity(t) as usize).min(rest.len());
            let ids: Vec<JobId> = rest.by_ref().take(take).map(|j| j.id).collect();
            if !ids.is_empty() {
                batches.push(Batch::new(t, time, ids));
            }
        }
        debug_assert_eq!(rest.len(), 0);
    }
    Ok(OptSolution { batches, cost })
}

struct Search<'a> {
    deadlines: &'a [Time],
    arrivals: &'a [Vec<JobSpec>],
    planner: &'a BatchPlanner,
    /// (index, sorted waiting deadlines after arrivals) -> (cost from here, jobs served now).
    memo: HashMap<(usize, Vec<Time>), (Rational, usize)>,
}

impl Search<'_> {
    fn best(&mut self, i: usize, carried: &[Time]) -> Rational {
        if i == self.deadlines.len() {
            return Rational::from_integer(0);
        }
        let mut waiting: Vec<Time> = carried.to_vec();
        waiting.extend(self.arrivals[i].iter().map(|j| j.deadline));
        waiting.sort_unstable();
        if let Some(&(cost, _)) = self.memo.get(&(i, waiting.clone())) {
            return cost;
        }
        let time = self.deadlines[i];
        let due = waiting.partition_point(|&d| d <= time);
        let mut best: Option<(Rational, usize)> = None;
        for served in due..=waiting.len() {
            let here = self.planner.cost(served);
            if best.as_ref().is_some_and(|(b, _)| here >= *b) {
                // Costs are non-decreasing in `served`; nothing larger can win.
                break;
            }
            let total = here + self.best(i + 1, &waiting[served..]);
            if best.as_ref().is_none_or(|(b, _)| total < *b) {
                best = Some((total, served));
            }
        }
        let best = best.expect("range due..=len is non-empty");
        self.memo.insert((i, waiting), best);
        best.0
    }
}
