//! Acceptance suite: one line per criterion, non-zero exit if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use busytime::algorithms::{get_optimal_batches, run_algorithm, run_algorithm_on, AlgorithmKind};
use busytime::analysis::{check_valid_assignment, credit_audit, overlap_depth, sigma};
use busytime::engine::{run_online, StaticSource};
use busytime::generators::{
    adversary_opt_bounds, adversary_types, gen_random, killer_instance, tight_example, AdversarySource, KillerVariant,
    RandomParams,
};
use busytime::instance::{normalize_types, Instance, NormalizedLadder, TypeMenu};
use busytime::oracle::{edf_feasible, exact_opt, matching_feasible, OracleLimits};
use busytime::rational::{format_rational, pow2, Rational};
use busytime::schedule::{schedule_cost, validate_schedule};
use busytime::{MainAlgorithm, TypeSystem};

type Outcome = Result<String, String>;

fn r(n: i128) -> Rational {
    Rational::from_integer(n)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn small_agreeable(seed: u64) -> Instance {
    let mut rng = common::rng(seed);
    use rand::Rng;
    let params = RandomParams {
        horizon: 7,
        window_max: 4,
        agreeable: true,
        ..RandomParams::new(rng.random_range(1..=14), rng.random_range(1..=4), seed)
    };
    gen_random(&params).expect("valid parameters")
}

fn small_general(seed: u64, power_ladder: bool) -> Instance {
    let mut rng = common::rng(seed ^ 0x9e37_79b9);
    use rand::Rng;
    let params = RandomParams {
        horizon: 7,
        window_max: 4,
        power_ladder,
        ..RandomParams::new(rng.random_range(1..=14), rng.random_range(1..=4), seed)
    };
    gen_random(&params).expect("valid parameters")
}

fn criterion_1_2(check_overlap: bool) -> Outcome {
    let start = Instant::now();
    let mut worst = r(0);
    let mut deepest = 0;
    for seed in 0..500 {
        let inst = small_agreeable(seed);
        let opt = exact_opt(&inst.jobs, &inst.machine_types, OracleLimits::default()).map_err(|e| e.to_string())?;
        let run = run_algorithm(AlgorithmKind::GreedyAgreeable, &inst).map_err(|e| e.to_string())?;
        let violations =
            validate_schedule(&inst, &run.real_schedule, &inst.machine_types).map_err(|e| e.to_string())?;
        ensure(violations.is_empty(), || {
            format!("seed {seed}: invalid greedy schedule")
        })?;
        let ratio = run.real_cost / opt.cost;
        worst = worst.max(ratio);
        ensure(run.real_cost <= opt.cost * r(2), || {
            format!(
                "seed {seed}: greedy {} vs opt {}",
                format_rational(&run.real_cost),
                format_rational(&opt.cost)
            )
        })?;
        let depth = overlap_depth(&run.outcome.trace, &inst.jobs);
        deepest = deepest.max(depth);
        if check_overlap {
            ensure(depth <= 2, || format!("seed {seed}: overlap depth {depth}"))?;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed <= Duration::from_secs(120), || format!("took {elapsed:?}"))?;
    Ok(if check_overlap {
        format!("500 agreeable instances, max overlap depth {deepest}")
    } else {
        format!(
            "500 agreeable instances, worst greedy/opt = {}, {:.1?}",
            format_rational(&worst),
            elapsed
        )
    })
}

struct MainCase {
    inst: Instance,
    ladder: NormalizedLadder,
    real_cost: Rational,
    virtual_cost: Rational,
    ledger: busytime::IntervalAssignment,
}

fn main_case(inst: Instance) -> Result<MainCase, String> {
    let run = run_algorithm(AlgorithmKind::Main, &inst).map_err(|e| e.to_string())?;
    let violations = validate_schedule(&inst, &run.real_schedule, &inst.machine_types).map_err(|e| e.to_string())?;
    if !violations.is_empty() {
        return Err(format!("invalid realized schedule: {}", violations[0]));
    }
    Ok(MainCase {
        ladder: run.ladder.expect("main runs on a ladder"),
        real_cost: run.real_cost,
        virtual_cost: run.virtual_cost.expect("main has a virtual cost"),
        ledger: run.ledger.expect("main keeps a ledger"),
        inst,
    })
}

fn criterion_3() -> Outcome {
    let mut worst = r(0);
    for seed in 0..500 {
        let case = main_case(small_general(seed, false)).map_err(|e| format!("seed {seed}: {e}"))?;
        let opt =
            exact_opt(&case.inst.jobs, &case.inst.machine_types, OracleLimits::default()).map_err(|e| e.to_string())?;
        worst = worst.max(case.real_cost / opt.cost);
        ensure(case.real_cost <= opt.cost * r(8), || {
            format!(
                "seed {seed}: main {} vs opt {}",
                format_rational(&case.real_cost),
                format_rational(&opt.cost)
            )
        })?;
    }
    let mut worst_ladder = r(0);
    for seed in 0..200 {
        let case = main_case(small_general(seed, true)).map_err(|e| format!("ladder seed {seed}: {e}"))?;
        let opt =
            exact_opt(&case.inst.jobs, &case.inst.machine_types, OracleLimits::default()).map_err(|e| e.to_string())?;
        worst_ladder = worst_ladder.max(case.virtual_cost / opt.cost);
        ensure(case.virtual_cost <= opt.cost * r(4), || {
            format!(
                "ladder seed {seed}: virtual {} vs opt {}",
                format_rational(&case.virtual_cost),
                format_rational(&opt.cost)
            )
        })?;
    }
    Ok(format!(
        "500 general instances, worst real main/opt = {}; 200 ladder-form instances, worst virtual/opt = {}",
        format_rational(&worst),
        format_rational(&worst_ladder)
    ))
}

fn criterion_4() -> Outcome {
    let mut tightest = None::<Rational>;
    for seed in 0..500 {
        let case = main_case(small_general(seed, false)).map_err(|e| format!("seed {seed}: {e}"))?;
        let violations =
            check_valid_assignment(&case.inst.jobs, &case.ledger, &case.ladder).map_err(|e| e.to_string())?;
        ensure(violations.is_empty(), || format!("seed {seed}: {}", violations[0]))?;
        let s = Rational::from_integer(sigma(&case.ledger) as i128);
        ensure(s * case.ladder.scale == case.virtual_cost, || {
            format!(
                "seed {seed}: sigma {} vs virtual cost {}",
                s,
                format_rational(&case.virtual_cost)
            )
        })?;
        let opt = exact_opt(&case.inst.jobs, &case.ladder, OracleLimits::default()).map_err(|e| e.to_string())?;
        let bound = s * case.ladder.scale / r(4);
        ensure(opt.cost >= bound, || {
            format!(
                "seed {seed}: ladder opt {} below sigma/4 = {}",
                format_rational(&opt.cost),
                format_rational(&bound)
            )
        })?;
        let slack = opt.cost / bound;
        tightest = Some(tightest.map_or(slack, |t| t.min(slack)));
    }
    Ok(format!(
        "500 ledgers valid, sigma*scale = virtual cost, min opt/(sigma/4) = {}",
        format_rational(&tightest.unwrap_or(r(0)))
    ))
}

fn criterion_5() -> Outcome {
    let mut audited = 0;
    let mut batches = 0;
    for seed in 0..100 {
        let case = main_case(small_general(1000 + seed, false)).map_err(|e| format!("seed {seed}: {e}"))?;
        let opt = exact_opt(&case.inst.jobs, &case.ladder, OracleLimits::default()).map_err(|e| e.to_string())?;
        let audit = credit_audit(&opt.batches, &case.ledger, &case.ladder).map_err(|e| format!("seed {seed}: {e}"))?;
        for b in &audit.batches {
            ensure(
                b.to_lower <= pow2(b.batch_type as u32 + 1) && b.to_higher <= pow2(b.batch_type as u32 + 1),
                || format!("seed {seed}: batch {} over budget", b.batch),
            )?;
        }
        for i in &audit.intervals {
            ensure(i.received >= i.required, || {
                format!("seed {seed}: tuple {} underpaid", i.tuple)
            })?;
        }
        ensure(audit.distributed <= audit.schedule_cost * r(4), || {
            format!("seed {seed}: total over 4x")
        })?;
        audited += 1;
        batches += audit.batches.len();
    }
    Ok(format!("{audited} audits passed over {batches} optimal batches"))
}

fn criterion_6() -> Outcome {
    let mut parts = Vec::new();
    for q in 1..=5u32 {
        let t = tight_example(q).map_err(|e| e.to_string())?;
        let s = sigma(&t.assignment);
        let expected_sigma = (1u128 << (2 * q + 3)) - (1u128 << q);
        ensure(s == expected_sigma, || {
            format!("q={q}: sigma {s}, expected {expected_sigma}")
        })?;
        let violations =
            validate_schedule(&t.instance, &t.schedule, &t.instance.machine_types).map_err(|e| e.to_string())?;
        ensure(violations.is_empty(), || {
            format!("q={q}: schedule invalid: {}", violations[0])
        })?;
        let certificate = check_valid_assignment(&t.instance.jobs, &t.assignment, &t.instance.machine_types)
            .map_err(|e| e.to_string())?;
        ensure(certificate.is_empty(), || {
            format!("q={q}: assignment invalid: {}", certificate[0])
        })?;
        let cost = schedule_cost(&t.schedule, &t.instance.machine_types);
        let expected_cost = r(((1i128 << q) + 1) << (q + 1));
        ensure(cost == expected_cost, || {
            format!("q={q}: cost {cost}, expected {expected_cost}")
        })?;
        let ratio = cost / r(s as i128);
        ensure(ratio <= Rational::new(1, 4) + Rational::new(4, 1i128 << q), || {
            format!("q={q}: cost/sigma = {}", format_rational(&ratio))
        })?;
        if q == 3 {
            ensure(s == 504 && cost == r(144) && t.instance.n() == 1152, || {
                "q=3 values".into()
            })?;
        }
        parts.push(format!("q={q}: {}/{}", format_rational(&cost), s));
    }
    Ok(format!("cost/sigma {}", parts.join(", ")))
}

fn criterion_7() -> Outcome {
    let m = 8u64;
    let types = adversary_types(m);
    let threshold = Rational::new(16, 11);
    let mut parts = Vec::new();
    for kind in AlgorithmKind::ALL {
        let start = Instant::now();
        let job_bound = (m.pow(4) / 2) as usize;
        let large_from = if kind.uses_ladder() {
            let ladder = NormalizedLadder::build(&types, job_bound);
            (0..ladder.type_count())
                .find(|&k| ladder.rungs[k].realization.iter().any(|&(t, _)| t == 1))
                .expect("the large type appears on the ladder")
        } else {
            1
        };
        let mut source = AdversarySource::new(m, large_from).map_err(|e| e.to_string())?;
        let run = run_algorithm_on(kind, &mut source, &types, job_bound).map_err(|e| e.to_string())?;
        let bounds =
            adversary_opt_bounds(m, &run.outcome.trace, &run.outcome.jobs, large_from).map_err(|e| e.to_string())?;
        let ratio = run.real_cost / bounds.best;
        let elapsed = start.elapsed();
        ensure(ratio >= threshold, || {
            format!(
                "{kind}: {} / {} below 16/11",
                format_rational(&run.real_cost),
                format_rational(&bounds.best)
            )
        })?;
        ensure(elapsed <= Duration::from_secs(10), || {
            format!("{kind}: took {elapsed:?}")
        })?;
        ensure(run.outcome.jobs.len() <= 2048, || format!("{kind}: too many jobs"))?;
        parts.push(format!(
            "{kind} {}/{}",
            format_rational(&run.real_cost),
            format_rational(&bounds.best)
        ));
    }
    Ok(parts.join(", "))
}

fn killer_ratio(kind: AlgorithmKind, variant: KillerVariant, k: u32) -> Result<(Rational, Rational), String> {
    let killer = killer_instance(variant, k).map_err(|e| e.to_string())?;
    let run = run_algorithm(kind, &killer.instance).map_err(|e| e.to_string())?;
    let violations = validate_schedule(&killer.instance, &run.real_schedule, &killer.instance.machine_types)
        .map_err(|e| e.to_string())?;
    ensure(violations.is_empty(), || format!("{kind} K={k}: invalid schedule"))?;
    Ok((run.real_cost, killer.bound_cost()))
}

fn criterion_8() -> Outcome {
    let cases = [
        (AlgorithmKind::GreedyGeneral, KillerVariant::Greedy, r(400), r(116)),
        (AlgorithmKind::Lazy, KillerVariant::Lazy, r(100), r(4)),
        (AlgorithmKind::RampUp, KillerVariant::RampUp, r(80), r(56)),
        (
            AlgorithmKind::MostCostEfficient,
            KillerVariant::CostEfficient,
            r(400),
            r(116),
        ),
    ];
    let mut parts = Vec::new();
    for (kind, variant, alg_expected, bound_max) in cases {
        let (alg4, bound4) = killer_ratio(kind, variant, 4)?;
        ensure(alg4 == alg_expected, || {
            format!("{kind} K=4: cost {alg4}, expected {alg_expected}")
        })?;
        ensure(bound4 <= bound_max, || {
            format!("{kind} K=4: bound {bound4} above {bound_max}")
        })?;
        let (alg6, bound6) = killer_ratio(kind, variant, 6)?;
        ensure(alg6 / bound6 > alg4 / bound4, || {
            format!("{kind}: ratio does not grow from K=4 to K=6")
        })?;
        parts.push(format!("{kind} {alg4}/{bound4} -> {alg6}/{bound6}"));
    }
    let (g, b) = killer_ratio(AlgorithmKind::GreedyGeneral, KillerVariant::Greedy, 4)?;
    ensure(g / b >= Rational::new(100, 29), || "greedy ratio below 100/29".into())?;
    Ok(parts.join(", "))
}

fn criterion_9() -> Outcome {
    let mut systems = 0;
    for seed in 0..50 {
        use rand::Rng;
        let k = common::rng(seed).random_range(1..=5);
        let types = gen_random(&RandomParams::new(1, k, 7000 + seed))
            .map_err(|e| e.to_string())?
            .machine_types;
        for m in 0..=30u64 {
            let (plan, cost) = get_optimal_batches(m as usize, &types);
            let reference = common::enumerate_cover_cost(&types, m);
            ensure(cost == reference, || {
                format!("seed {seed}, m={m}: dp {cost} vs enumeration {reference}")
            })?;
            let planned: Rational = plan.iter().map(|&t| TypeMenu::cost(&types, t)).sum();
            let capacity: u64 = plan.iter().map(|&t| TypeMenu::capacity(&types, t)).sum();
            ensure(planned == cost && capacity >= m, || {
                format!("seed {seed}, m={m}: plan inconsistent")
            })?;
        }
        systems += 1;
    }
    Ok(format!("{systems} systems, m = 0..=30"))
}

fn criterion_10() -> Outcome {
    let mut feasible = 0;
    for seed in 0..1000u64 {
        use rand::Rng;
        let mut rng = common::rng(50_000 + seed);
        let params = RandomParams {
            horizon: 6,
            window_max: 3,
            ..RandomParams::new(rng.random_range(1..=12), rng.random_range(1..=3), seed)
        };
        let inst = gen_random(&params).map_err(|e| e.to_string())?;
        let placements = common::random_placements(&mut rng, &inst.jobs, &inst.machine_types);
        let edf = edf_feasible(&inst.jobs, &placements, &inst.machine_types);
        let flow = matching_feasible(&inst.jobs, &placements, &inst.machine_types);
        ensure(edf.is_some() == flow, || {
            format!("seed {seed}: edf {} vs flow {flow}", edf.is_some())
        })?;
        feasible += usize::from(flow);
    }
    let mut brute = 0;
    for seed in 0..100u64 {
        use rand::Rng;
        let mut rng = common::rng(90_000 + seed);
        let params = RandomParams {
            horizon: 3,
            window_max: 2,
            ..RandomParams::new(rng.random_range(1..=8), rng.random_range(1..=3), 90_000 + seed)
        };
        let inst = gen_random(&params).map_err(|e| e.to_string())?;
        let opt = exact_opt(&inst.jobs, &inst.machine_types, OracleLimits::default()).map_err(|e| e.to_string())?;
        let reference = common::brute_force_opt(&inst.jobs, &inst.machine_types);
        ensure(opt.cost == reference, || {
            format!("seed {seed}: oracle {} vs brute force {reference}", opt.cost)
        })?;
        brute += 1;
    }
    Ok(format!(
        "1000 placement pairs agree ({feasible} feasible); {brute} brute-force optima match"
    ))
}

fn time_main(inst: &Instance) -> Duration {
    let ladder = normalize_types(inst);
    (0..3)
        .map(|_| {
            let mut alg = MainAlgorithm::new(&ladder);
            let mut source = StaticSource::from_instance(inst);
            let start = Instant::now();
            run_online(&mut source, &mut alg, &ladder, TypeSystem::Virtual).expect("main run succeeds");
            start.elapsed()
        })
        .min()
        .expect("three runs")
}

fn large_instance(n: usize) -> Instance {
    let params = RandomParams {
        horizon: (n / 10) as i64,
        window_max: 200,
        ..RandomParams::new(n, 10, 11)
    };
    gen_random(&params).expect("valid parameters")
}

fn criterion_11() -> Outcome {
    let big = large_instance(1_000_000);
    let ladder = normalize_types(&big);
    let mut alg = MainAlgorithm::new(&ladder);
    let mut source = StaticSource::from_instance(&big);
    let start = Instant::now();
    run_online(&mut source, &mut alg, &ladder, TypeSystem::Virtual).map_err(|e| e.to_string())?;
    let full = start.elapsed();
    ensure(full <= Duration::from_secs(10), || format!("n=10^6 took {full:?}"))?;

    let times: Vec<Duration> = [100_000, 200_000, 400_000]
        .iter()
        .map(|&n| time_main(&large_instance(n)))
        .collect();
    let ratios: Vec<f64> = times
        .windows(2)
        .map(|w| w[1].as_secs_f64() / w[0].as_secs_f64())
        .collect();
    ensure(ratios.iter().all(|&x| x <= 3.0), || {
        format!("scaling ratios {ratios:?}")
    })?;
    Ok(format!(
        "n=10^6 in {:.2?}; t(2n)/t(n) = {:.2}, {:.2}",
        full, ratios[0], ratios[1]
    ))
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() {
    let criteria: Vec<Criterion> = vec![
        (1, "agreeable greedy within 2x of the optimum", || criterion_1_2(false)),
        (2, "greedy dispatch intervals overlap at most twice", || {
            criterion_1_2(true)
        }),
        (3, "main algorithm within 8x (4x virtual on ladder menus)", criterion_3),
        (4, "main ledgers are valid certificates", criterion_4),
        (5, "credit audit of optimal schedules against main ledgers", criterion_5),
        (6, "tight certificate family", criterion_6),
        (7, "adaptive adversary forces ratio 16/11 at M = 8", criterion_7),
        (8, "killer families for the baselines", criterion_8),
        (9, "machine-multiset DP matches enumeration", criterion_9),
        (10, "oracle cross-checks", criterion_10),
        (11, "main algorithm run time", criterion_11),
    ];
    let mut failed = 0;
    for (id, title, run) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        match outcome {
            Ok(detail) => println!("criterion {id:>2} PASS  {title} [{detail}] ({elapsed:.1?})"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {title} [{detail}] ({elapsed:.1?})");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
