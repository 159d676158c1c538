// Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use busytime::instance::{JobSpec, MachineType};
use busytime::oracle::{matching_feasible, PlacementSet};
use busytime::rational::Rational;
use busytime::Time;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Cheapest machine multiset with total capacity at least `m`, by trying every count vector.
pub fn enumerate_cover_cost(menu: &[MachineType], m: u64) -> Rational {
    fn go(menu: &[MachineType], t: usize, need: u64, cost: Rational, best: &mut Option<Rational>) {
        if need == 0 {
            if best.is_none_or(|b| cost < b) {
                *best = Some(cost);
            }
            return;
        }
        if t == menu.len() {
            return;
        }
        let most = need.div_ceil(menu[t].capacity);
        for count in 0..=most {
            let served = (count * menu[t].capacity).min(need);
            go(
                menu,
                t + 1,
                need - served,
                cost + menu[t].cost * Rational::from_integer(count as i128),
                best,
            );
        }
    }
    let mut best = None;
    go(menu, 0, m, Rational::from_integer(0), &mut best);
    best.expect("the largest type alone can cover any demand")
}

/// Minimum cost over placement sets at every slot of the horizon (not only deadlines),
/// judged by max-flow feasibility.
pub fn brute_force_opt(jobs: &[JobSpec], menu: &[MachineType]) -> Rational {
    let first = jobs.iter().map(|j| j.release).min().unwrap_or(0);
    let last = jobs.iter().map(|j| j.deadline).max().unwrap_or(0);
    let slots: Vec<Time> = (first..=last).collect();
    // One smallest machine per job at its deadline is always feasible.
    let mut best = menu[0].cost * Rational::from_integer(jobs.len() as i128);

    struct Ctx<'a> {
        jobs: &'a [JobSpec],
        menu: &'a [MachineType],
        slots: &'a [Time],
    }

    fn counts(types: usize, total: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut cur = vec![0; types];
        fn rec(i: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if i == cur.len() {
                out.push(cur.clone());
                return;
            }
            for c in 0..=left {
                cur[i] = c;
                rec(i + 1, left - c, cur, out);
            }
            cur[i] = 0;
        }
        rec(0, total, &mut cur, &mut out);
        out
    }

    fn dfs(ctx: &Ctx, i: usize, placements: &mut Vec<(Time, usize)>, cost: Rational, best: &mut Rational) {
        if cost >= *best {
            return;
        }
        if i == ctx.slots.len() {
            if matching_feasible(ctx.jobs, &PlacementSet::new(placements.clone()), ctx.menu) {
                *best = cost;
            }
            return;
        }
        let t = ctx.slots[i];
        let admissible = ctx.jobs.iter().filter(|j| j.admits(t)).count();
        let due: Vec<JobSpec> = ctx.jobs.iter().filter(|j| j.deadline <= t).copied().collect();
        for choice in counts(ctx.menu.len(), admissible) {
            let mut added = 0;
            let mut extra = Rational::from_integer(0);
            for (ty, &c) in choice.iter().enumerate() {
                for _ in 0..c {
                    placements.push((t, ty));
                    extra += ctx.menu[ty].cost;
                    added += 1;
                }
            }
            if cost + extra < *best && matching_feasible(&due, &PlacementSet::new(placements.clone()), ctx.menu) {
                dfs(ctx, i + 1, placements, cost + extra, best);
            }
            placements.truncate(placements.len() - added);
        }
    }

    let ctx = Ctx {
        jobs,
        menu,
        slots: &slots,
    };
    let mut placements = Vec::new();
    dfs(&ctx, 0, &mut placements, Rational::from_integer(0), &mut best);
    best
}

/// Random placements over the instance horizon; about half are perturbations of a feasible
/// set so that both answers show up.
pub fn random_placements(rng: &mut ChaCha8Rng, jobs: &[JobSpec], menu: &[MachineType]) -> PlacementSet {
    let first = jobs.iter().map(|j| j.release).min().unwrap_or(0);
    let last = jobs.iter().map(|j| j.deadline).max().unwrap_or(0);
    let mut placements: Vec<(Time, usize)> = if rng.random_bool(0.5) {
        // One smallest machine per job, at a random slot of its window.
        jobs.iter()
            .map(|j| (rng.random_range(j.release..=j.deadline), 0))
            .collect()
    } else {
        let count = rng.random_range(0..=jobs.len());
        (0..count)
            .map(|_| (rng.random_range(first..=last), rng.random_range(0..menu.len())))
            .collect()
    };
    // Perturb: drop, move or upgrade a few machines.
    for _ in 0..rng.random_range(0..3) {
        if placements.is_empty() {
            break;
        }
        let i = rng.random_range(0..placements.len());
        match rng.random_range(0..3) {
            0 => {
                placements.swap_remove(i);
            }
            1 => placements[i].0 = rng.random_range(first..=last),
            _ => placements[i].1 = rng.random_range(0..menu.len()),
        }
    }
    PlacementSet::new(placements)
}
