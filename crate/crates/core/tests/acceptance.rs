//! Acceptance criteria, one PASS/FAIL line each. Run with
//! `cargo test --test acceptance`; exits non-zero when any criterion fails.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use lcmd_core::auctions::{
    self, AuctionInstance, AuctionMode, AuctionQuery, DeviationGrid, LocalAnswer, ReportOverlay,
};
use lcmd_core::harness::{self, ExperimentConfig, Suite, VerifyConfig};
use lcmd_core::oracles::{self, Coupling};
use lcmd_core::rsd::{self, HousingInstance};
use lcmd_core::scheduling::{self, LoadRule, PaymentRule, SchedulingInstance};
use lcmd_core::stable_matching::{self as sm, AbridgedOutcome, ManStatus, MatchingInstance};
use lcmd_core::{DrawKey, Family, ProbeCounter, RandomTape};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;

struct Outcome {
    pass: bool,
    detail: String,
    notes: Vec<String>,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
            notes: Vec::new(),
        }
    }

    fn note(mut self, line: impl Into<String>) -> Self {
        self.notes.push(line.into());
        self
    }
}

fn draw(tape: &RandomTape, tag: &str, entity: u64, index: u64, range: u64) -> u64 {
    tape.derive_uniform(DrawKey::new(tag, entity).index(index), range)
        .unwrap()
}

fn int(x: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

fn buyer_answer(inst: &AuctionInstance, i: u32) -> (Vec<u32>, BigRational) {
    let mut c = ProbeCounter::new();
    match auctions::local(
        inst,
        &ReportOverlay::truthful(),
        AuctionQuery::Buyer(i),
        &mut c,
    )
    .unwrap()
    {
        LocalAnswer::Buyer { award, payment, .. } => (award, payment),
        LocalAnswer::Item { .. } => unreachable!(),
    }
}

fn item_answer(inst: &AuctionInstance, j: u32) -> Option<u32> {
    let mut c = ProbeCounter::new();
    match auctions::local(
        inst,
        &ReportOverlay::truthful(),
        AuctionQuery::Item(j),
        &mut c,
    )
    .unwrap()
    {
        LocalAnswer::Item { winner, .. } => winner,
        LocalAnswer::Buyer { .. } => unreachable!(),
    }
}

/// Every entity of every family queried locally against the global run.
fn local_global_consistency() -> Outcome {
    let start = Instant::now();
    let n = 1000usize;
    let seeds: Vec<u64> = (1..=10).collect();
    let mismatches: Vec<(String, u64)> = seeds
        .par_iter()
        .flat_map(|&seed| {
            let mut bad: Vec<(String, u64)> = Vec::new();
            let m = MatchingInstance::seeded(seed, n, 3).unwrap();
            let rounds = sm::default_rounds(3);
            let ags = sm::abridged_gs(&m, rounds).unwrap();
            let mut partner = vec![None; n];
            let mut count = 0;
            for man in 0..n as u32 {
                let mut c = ProbeCounter::new();
                let s = sm::local_ags(&m, rounds, man, &mut c).unwrap();
                count += (s != ags.statuses[man as usize]) as u64;
                if let ManStatus::Matched(w) = s {
                    partner[w as usize] = Some(man);
                }
            }
            for w in 0..n as u32 {
                let mut c = ProbeCounter::new();
                count += (sm::local_ags_woman(&m, rounds, w, &mut c).unwrap()
                    != partner[w as usize]) as u64;
            }
            bad.push(("matching".into(), count));

            for (tag, standard) in [("scheduling-std", true), ("scheduling-res", false)] {
                let caps: Vec<u64> = (0..n as u64)
                    .map(|i| 1 + draw(&RandomTape::new(seed), "caps", i, 0, 10))
                    .collect();
                let inst = if standard {
                    SchedulingInstance::standard(seed, caps, n, 2).unwrap()
                } else {
                    SchedulingInstance::seeded_restricted(seed, caps, n, 2).unwrap()
                };
                let order = scheduling::arrival_order(&inst);
                let online = if standard {
                    scheduling::slms_online_ordered(&inst, &order).unwrap()
                } else {
                    scheduling::rlms_online_ordered(&inst, &order).unwrap()
                };
                let count = (0..n as u32)
                    .filter(|&j| {
                        let mut c = ProbeCounter::new();
                        let got = if standard {
                            Some(scheduling::slms_local(&inst, j, &mut c).unwrap())
                        } else {
                            scheduling::rlms_local(&inst, j, &mut c).unwrap()
                        };
                        got != online.assign[j as usize]
                    })
                    .count() as u64;
                bad.push((tag.into(), count));
            }

            for mode in [AuctionMode::Uduv, AuctionMode::Udubv, AuctionMode::Ksmb] {
                let inst = AuctionInstance::seeded(mode, seed, n, n, 2).unwrap();
                let global = auctions::run(&inst, &ReportOverlay::truthful()).unwrap();
                let owners = global.item_owners(n).unwrap();
                let mut count = 0;
                for i in 0..n as u32 {
                    let (award, pay) = buyer_answer(&inst, i);
                    count += (award != global.awards[i as usize]
                        || pay != global.payments[i as usize]) as u64;
                }
                for j in 0..n as u32 {
                    count += (item_answer(&inst, j) != owners[j as usize]) as u64;
                }
                bad.push((format!("{mode:?}").to_lowercase(), count));
            }

            let h = HousingInstance::seeded(seed, n, 3).unwrap();
            let global = rsd::rsd_global(&h);
            let count = (0..n as u32)
                .filter(|&a| {
                    let mut c = ProbeCounter::new();
                    rsd::rsd_local(&h, a, &mut c).unwrap() != global[a as usize]
                })
                .count() as u64;
            bad.push(("rsd".into(), count));
            bad
        })
        .collect();
    let total: u64 = mismatches.iter().map(|m| m.1).sum();
    let elapsed = start.elapsed();
    let pass = total == 0 && elapsed < Duration::from_secs(120);
    Outcome::new(
        pass,
        format!(
            "7 families x 10 seeds at n=1000, {total} mismatches, {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

/// Abridged runs at n = 10^4 reused by the round-bound criterion.
fn large_matching_runs() -> Vec<(usize, AbridgedOutcome)> {
    let cells: Vec<(usize, u64)> = [3usize, 4, 5]
        .iter()
        .flat_map(|&k| (1..=30).map(move |s| (k, s)))
        .collect();
    cells
        .par_iter()
        .map(|&(k, seed)| {
            let inst = MatchingInstance::seeded(seed, 10_000, k).unwrap();
            (k, sm::abridged_gs(&inst, sm::default_rounds(k)).unwrap())
        })
        .collect()
}

fn unmatched_bound(runs: &[(usize, AbridgedOutcome)]) -> Outcome {
    let n = 10_000f64;
    let mut pass = true;
    let mut parts = Vec::new();
    for k in [3usize, 4, 5] {
        let fracs: Vec<f64> = runs
            .iter()
            .filter(|r| r.0 == k)
            .map(|r| (n - r.1.matched() as f64) / n)
            .collect();
        let limit = 4.0 / k as f64 + 0.02;
        let ok = fracs.iter().filter(|&&f| f <= limit).count();
        let worst = fracs.iter().cloned().fold(0.0, f64::max);
        pass &= ok >= 29;
        parts.push(format!(
            "k={k}: {ok}/30 within {limit:.3} (worst {worst:.4})"
        ));
    }
    Outcome::new(pass, parts.join("; "))
}

fn rejection_bound_holds(inst_men: usize, k: usize, runs: &[sm::RoundStats]) -> bool {
    let nk = (inst_men * k) as u64;
    runs.iter().all(|s| s.rejected * s.round as u64 <= nk)
}

/// Outcomes at n = 1000 over several truncation lengths, with `M*`.
struct TruncationRuns {
    checked: u64,
    rejection_ok: bool,
    additive_ok: bool,
    eps_lines: Vec<String>,
    eps_ok: bool,
}

/// k, runs checked, rejection bound, additive bound, per-epsilon outcome.
type SeedRow = (usize, u64, bool, bool, Vec<(f64, bool)>);

fn truncation_runs() -> TruncationRuns {
    let n = 1000usize;
    let cells: Vec<(usize, u64)> = [3usize, 4, 5]
        .iter()
        .flat_map(|&k| (1..=30).map(move |s| (k, s)))
        .collect();
    let results: Vec<SeedRow> = cells
        .par_iter()
        .map(|&(k, seed)| {
            let inst = MatchingInstance::seeded(seed, n, k).unwrap();
            let star = sm::global_gs(&inst)
                .iter()
                .filter(|s| s.woman().is_some())
                .count() as u64;
            let nk = (n * k) as u64;
            let (mut rej, mut add, mut checked) = (true, true, 0u64);
            for rounds in [1u32, 2, 3, 5, 8, 13, 2 * (k * k) as u32, 50, 100] {
                let ags = sm::abridged_gs(&inst, rounds).unwrap();
                rej &= rejection_bound_holds(n, k, &ags.rounds);
                add &= ags.matched() as u64 * rounds as u64 + nk >= star * rounds as u64;
                checked += 1;
            }
            let mut eps = Vec::new();
            for e in [0.25, 0.5] {
                let rounds = sm::rounds_for_epsilon(k, e).unwrap();
                let ags = sm::abridged_gs(&inst, rounds).unwrap();
                rej &= rejection_bound_holds(n, k, &ags.rounds);
                let last = ags
                    .rounds
                    .iter()
                    .find(|s| s.round == rounds)
                    .map_or(0, |s| s.continuing);
                let ok = last as f64 <= e * star as f64
                    && ags.matched() as f64 * (1.0 + e) >= star as f64;
                eps.push((e, ok));
            }
            (k, checked, rej, add, eps)
        })
        .collect();
    let mut out = TruncationRuns {
        checked: 0,
        rejection_ok: true,
        additive_ok: true,
        eps_lines: Vec::new(),
        eps_ok: true,
    };
    for r in &results {
        out.checked += r.1;
        out.rejection_ok &= r.2;
        out.additive_ok &= r.3;
    }
    for k in [3usize, 4, 5] {
        for (idx, e) in [0.25, 0.5].iter().enumerate() {
            let ok = results.iter().filter(|r| r.0 == k && r.4[idx].1).count();
            out.eps_ok &= ok == 30;
            out.eps_lines.push(format!(
                "k={k} eps={e} l={}: {ok}/30",
                sm::rounds_for_epsilon(k, *e).unwrap()
            ));
        }
    }
    out
}

fn monotonicity() -> Outcome {
    let violations: u64 = (0..1000u64)
        .into_par_iter()
        .map(|seed| {
            let tape = RandomTape::new(seed);
            let n = 1 + draw(&tape, "n", 0, 0, 8) as usize;
            let jobs = 1 + draw(&tape, "m", 0, 0, 40) as usize;
            let d = 1 + draw(&tape, "d", 0, 0, n.min(3) as u64) as usize;
            let bids: Vec<u64> = (0..n as u64)
                .map(|i| 1 + draw(&tape, "bid", i, 0, 6))
                .collect();
            let inst = SchedulingInstance::seeded_restricted(seed, bids, jobs, d).unwrap();
            let mut bad = 0;
            for i in 0..n as u32 {
                for b in 1..=6u64 {
                    for raised in b + 1..=6 {
                        let trace =
                            scheduling::monotonicity_trace(&inst, i, b, raised, LoadRule::Floored)
                                .unwrap();
                        bad += scheduling::trace_violates(&trace, i) as u64;
                    }
                }
            }
            bad
        })
        .sum();
    Outcome::new(
        violations == 0,
        format!("1000 restricted instances, all bid pairs up to 6: {violations} violations"),
    )
}

fn counterexamples() -> Outcome {
    let first = |c_bid: u64, last_pair: Vec<u32>| {
        let mut script = vec![vec![0, 3], vec![0, 3], vec![1, 3], vec![1, 3]];
        script.extend(std::iter::repeat_n(vec![2, 3], 6));
        script.push(last_pair);
        script.push(vec![0, 2]);
        let inst = SchedulingInstance::restricted(0, vec![4, 4, c_bid, 1], script).unwrap();
        scheduling::greedy_unmodified(&inst).unwrap().heights
    };
    let second = |b_bid: u64| {
        let inst = SchedulingInstance::restricted(
            0,
            vec![4, b_bid, 36],
            vec![vec![0, 1], vec![1, 2], vec![0, 1]],
        )
        .unwrap()
        .with_start_heights(&[1, 3, 18])
        .unwrap();
        scheduling::greedy_unmodified(&inst).unwrap().heights
    };
    let a = (first(8, vec![0, 1]), first(9, vec![1, 2]));
    let b = (second(8), second(9));
    let pass = a == (vec![3, 2, 7, 0], vec![3, 3, 6, 0]) && b == (vec![2, 5, 18], vec![2, 4, 19]);
    Outcome::new(pass, format!("{:?}->{:?}, {:?}->{:?}", a.0, a.1, b.0, b.1))
}

fn truthfulness() -> Outcome {
    let seeds: Vec<u64> = (1..=150).collect();
    let rows: Vec<[u64; 7]> = seeds
        .par_iter()
        .map(|&seed| {
            let tape = RandomTape::new(seed);
            let n = 1 + draw(&tape, "n", 0, 0, 5) as usize;
            let mut row = [0u64; 7];

            let jobs = 1 + draw(&tape, "jobs", 0, 0, 10) as usize;
            let d = 1 + draw(&tape, "d", 0, 0, n.min(3) as u64) as usize;
            let bids: Vec<u64> = (0..n as u64)
                .map(|i| 1 + draw(&tape, "bid", i, 0, 5))
                .collect();
            let res = SchedulingInstance::seeded_restricted(seed, bids.clone(), jobs, d).unwrap();
            row[0] += scheduling::rlms_truthfulness_audit(&res, PaymentRule::LoadCritical)
                .unwrap()
                .len() as u64;
            row[5] += scheduling::rlms_truthfulness_audit(&res, PaymentRule::HeightSum)
                .unwrap()
                .len() as u64;

            let std = SchedulingInstance::standard(seed, bids, jobs, 2).unwrap();
            for i in 0..n as u32 {
                let cap = std.bids()[i as usize];
                for (slot, rule) in [
                    (4usize, PaymentRule::LoadCritical),
                    (6, PaymentRule::HeightSum),
                ] {
                    let truth = scheduling::slms_expected_utility(&std, i, cap, cap, rule).unwrap();
                    let better = (0..=2 * cap + 2)
                        .filter(|&x| {
                            scheduling::slms_expected_utility(&std, i, cap, x, rule).unwrap()
                                > truth
                        })
                        .count();
                    row[slot] += (better > 0) as u64;
                }
            }

            let items = 1 + draw(&tape, "items", 0, 0, 8) as usize;
            let k = 1 + draw(&tape, "k", 0, 0, items.min(2) as u64) as usize;
            for (slot, mode) in [
                (1usize, AuctionMode::Uduv),
                (2, AuctionMode::Udubv),
                (3, AuctionMode::Ksmb),
            ] {
                let inst = AuctionInstance::seeded(mode, seed, n, items, k).unwrap();
                row[slot] += auctions::truthfulness_audit(&inst, DeviationGrid::for_mode(mode))
                    .unwrap()
                    .len() as u64;
            }
            row
        })
        .collect();
    let sum = |i: usize| rows.iter().map(|r| r[i]).sum::<u64>();
    let pass = (0..5).all(|i| sum(i) == 0);
    Outcome::new(
        pass,
        format!(
            "150 instances with n<=5: restricted {} uduv {} udubv {} ksmb {} deviations; closed-form sweeps off-truth {}",
            sum(0),
            sum(1),
            sum(2),
            sum(3),
            sum(4)
        ),
    )
    .note(format!(
        "height-sum payment rule: restricted deviations {}, closed-form machines with a better misreport {}",
        sum(5),
        sum(6)
    ))
}

fn approximation() -> Outcome {
    let seeds: Vec<u64> = (1..=300).collect();
    let fails: Vec<String> = seeds
        .par_iter()
        .flat_map(|&seed| {
            let tape = RandomTape::new(seed);
            let n = 1 + draw(&tape, "n", 0, 0, 20) as usize;
            let items = 1 + draw(&tape, "items", 0, 0, 20) as usize;
            let k = 1 + draw(&tape, "k", 0, 0, items.min(4) as u64) as usize;
            let mut bad = Vec::new();
            for mode in [AuctionMode::Uduv, AuctionMode::Udubv, AuctionMode::Ksmb] {
                let inst = AuctionInstance::seeded(mode, seed, n, items, k).unwrap();
                let out = auctions::run(&inst, &ReportOverlay::truthful()).unwrap();
                let sets: Vec<Vec<u32>> = (0..n as u32).map(|i| inst.set(i)).collect();
                let values: Vec<BigRational> =
                    (0..n as u32).map(|i| inst.value(i).clone()).collect();
                let welfare = out
                    .winners()
                    .iter()
                    .fold(BigRational::zero(), |a, &i| a + inst.value(i));
                let ok = match mode {
                    AuctionMode::Uduv => {
                        2 * out.winners().len() >= oracles::max_matching(items, &sets).unwrap()
                    }
                    AuctionMode::Udubv => {
                        let opt =
                            oracles::max_vertex_weight_matching(items, &sets, &values).unwrap();
                        let edges: Vec<Vec<(u32, BigRational)>> = sets
                            .iter()
                            .zip(&values)
                            .map(|(s, v)| s.iter().map(|&j| (j, v.clone())).collect())
                            .collect();
                        opt == oracles::max_weight_matching(items, &edges).unwrap()
                            && &welfare + &welfare >= opt
                    }
                    AuctionMode::Ksmb => {
                        welfare * int(k as u64) >= oracles::optimal_packing(&sets, &values).unwrap()
                    }
                };
                if !ok {
                    bad.push(format!("{mode:?} seed {seed}"));
                }
            }
            bad
        })
        .collect();
    let mut large = Vec::new();
    for mode in [AuctionMode::Uduv, AuctionMode::Udubv] {
        let inst = AuctionInstance::seeded(mode, 7, 2000, 2000, 3).unwrap();
        let out = auctions::run(&inst, &ReportOverlay::truthful()).unwrap();
        let sets: Vec<Vec<u32>> = (0..2000).map(|i| inst.set(i)).collect();
        let ratio = if mode == AuctionMode::Uduv {
            out.winners().len() as f64 / oracles::max_matching(2000, &sets).unwrap() as f64
        } else {
            let values: Vec<BigRational> = (0..2000).map(|i| inst.value(i).clone()).collect();
            let w = out
                .winners()
                .iter()
                .fold(BigRational::zero(), |a, &i| a + inst.value(i));
            (w / oracles::max_vertex_weight_matching(2000, &sets, &values).unwrap())
                .to_f64()
                .unwrap()
        };
        large.push(format!("{mode:?} n=2000 k=3 ratio {ratio:.4}"));
    }
    Outcome::new(
        fails.is_empty(),
        format!(
            "300 exact-oracle instances x 3 modes, {} below bound",
            fails.len()
        ),
    )
    .note(large.join("; "))
}

fn makespan_quality() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for exp in [10u32, 12, 14] {
        let n = 1usize << exp;
        let limit = 1.0 + 2.0 * (n as f64).ln().ln() / 2f64.ln() + 4.0;
        let maxima: Vec<u64> = (1..=30u64)
            .into_par_iter()
            .map(|seed| {
                let inst = SchedulingInstance::standard(seed, vec![1; n], n, 2).unwrap();
                *scheduling::slms_online(&inst)
                    .unwrap()
                    .heights
                    .iter()
                    .max()
                    .unwrap()
            })
            .collect();
        let ok = maxima.iter().filter(|&&h| h as f64 <= limit).count();
        pass &= ok >= 29;
        parts.push(format!(
            "n=2^{exp}: {ok}/30 within {limit:.2} (max {})",
            maxima.iter().max().unwrap()
        ));
    }
    let mut points = Vec::new();
    for exp in [6u32, 8, 10] {
        let n = 1usize << exp;
        let ratios: Vec<f64> = (1..=5u64)
            .map(|seed| {
                let spec = harness::cell_spec(Family::SchedulingRes, seed, n, 1, 2);
                let inst = SchedulingInstance::from_spec(&spec).unwrap();
                scheduling::makespan_ratio(&inst).unwrap().to_f64().unwrap()
            })
            .collect();
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        points.push(((n as f64).ln().ln(), mean));
    }
    let c = points.iter().map(|p| p.0 * p.1).sum::<f64>()
        / points.iter().map(|p| p.0 * p.0).sum::<f64>();
    let listing: Vec<String> = points.iter().map(|p| format!("{:.3}", p.1)).collect();
    Outcome::new(pass, parts.join("; ")).note(format!(
        "restricted makespan ratio at n=2^6,2^8,2^10: {}; fitted c*ln ln n with c={c:.3}",
        listing.join(", ")
    ))
}

fn majorization() -> Outcome {
    let profiles = [vec![2u64, 3], vec![1, 1, 4], vec![4, 8, 36]];
    let mut pass = true;
    let mut parts = Vec::new();
    let mut notes = Vec::new();
    for caps in &profiles {
        let jobs = 2 * caps.iter().sum::<u64>() as usize;
        let rep = oracles::uniform_majorizes_nonuniform(caps, jobs, 10_000, 11, Coupling::Quantile)
            .unwrap();
        pass &= rep.holds() && rep.trials == 10_000;
        parts.push(format!(
            "{caps:?}: {}+{}",
            rep.violations, rep.max_load_violations
        ));
        for c in [Coupling::Identity, Coupling::Rank] {
            let alt = oracles::uniform_majorizes_nonuniform(caps, jobs, 2_000, 11, c).unwrap();
            notes.push(format!("{caps:?} {c:?}: {}/2000", alt.violations));
        }
    }
    Outcome::new(
        pass,
        format!("10^4 paired samples each, violations {}", parts.join(", ")),
    )
    .note(format!("other couplings: {}", notes.join(", ")))
}

fn probe_growth() -> Outcome {
    let grid: Vec<usize> = (8..=14).map(|e| 1usize << e).collect();
    let families = [
        Family::Matching,
        Family::SchedulingStd,
        Family::SchedulingRes,
        Family::Uduv,
        Family::Udubv,
        Family::Ksmb,
        Family::Housing,
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    let mut all = Vec::new();
    for f in families {
        let mut cfg = ExperimentConfig::new(f, grid.clone());
        cfg.seeds = 20;
        cfg.queries = 100;
        let records = harness::bench(&cfg).unwrap();
        let fit = harness::growth_fit(&records, f).unwrap();
        pass &= fit.power_exponent < 0.15 && fit.polylog_exponent <= 4.0;
        parts.push(format!(
            "{f} {:.3}/{:.2}",
            fit.power_exponent, fit.polylog_exponent
        ));
        all.extend(records);
    }
    let path = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("probe_growth.csv");
    std::fs::write(&path, harness::bench_csv(&all)).unwrap();
    Outcome::new(
        pass,
        format!("power/polylog exponents: {}", parts.join(", ")),
    )
    .note(format!("bench CSV archived at {}", path.display()))
}

fn strip_header(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n")
}

fn determinism() -> Outcome {
    let mut pass = true;
    for suite in [
        Suite::Matching,
        Suite::Scheduling,
        Suite::Auctions,
        Suite::Rsd,
    ] {
        let cfg = VerifyConfig::new(suite, 120, 3);
        pass &= harness::verify(&cfg).unwrap().csv() == harness::verify(&cfg).unwrap().csv();
    }
    let bin = env!("CARGO_BIN_EXE_lcmd");
    let runs: Vec<(String, String)> = (0..2)
        .map(|t| {
            let threads = if t == 0 { "1" } else { "4" };
            let bench = Command::new(bin)
                .args([
                    "bench",
                    "matching",
                    "--n",
                    "256,1024",
                    "--seeds",
                    "3",
                    "--queries",
                    "50",
                ])
                .env("LCMD_THREADS", threads)
                .output()
                .unwrap();
            let verify = Command::new(bin)
                .args(["verify", "rsd", "--n", "200", "--seeds", "3"])
                .env("LCMD_THREADS", threads)
                .output()
                .unwrap();
            pass &= bench.status.success() && verify.status.success();
            (
                strip_header(&String::from_utf8_lossy(&bench.stdout)),
                String::from_utf8_lossy(&verify.stdout).into_owned(),
            )
        })
        .collect();
    pass &= runs[0] == runs[1] && runs[0].0.lines().count() == 1 + 2 * 3 * 50;
    Outcome::new(
        pass,
        "verify reports and CLI bench/verify output identical across reruns and thread counts",
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    results.push((1, "local/global consistency", local_global_consistency()));
    let runs = large_matching_runs();
    results.push((2, "unmatched bound", unmatched_bound(&runs)));
    let trunc = truncation_runs();
    let large_ok = runs
        .iter()
        .all(|(k, r)| rejection_bound_holds(10_000, *k, &r.rounds));
    results.push((
        3,
        "round-rejection bound",
        Outcome::new(
            trunc.rejection_ok && large_ok,
            format!("{} runs at n=1000 and 90 at n=10^4", trunc.checked + 180),
        ),
    ));
    results.push((
        4,
        "truncation bounds",
        Outcome::new(
            trunc.additive_ok && trunc.eps_ok,
            format!(
                "additive bound over {} runs {}; {}",
                trunc.checked,
                if trunc.additive_ok { "holds" } else { "fails" },
                trunc.eps_lines.join(", ")
            ),
        ),
    ));
    results.push((5, "monotonicity", monotonicity()));
    results.push((6, "counterexample regressions", counterexamples()));
    results.push((7, "truthfulness audits", truthfulness()));
    results.push((8, "approximation ratios", approximation()));
    results.push((9, "makespan quality", makespan_quality()));
    results.push((10, "majorization", majorization()));
    results.push((11, "probe growth", probe_growth()));
    results.push((12, "determinism", determinism()));

    let mut failed = 0;
    for (id, name, o) in &results {
        println!(
            "criterion {id:>2} {}: {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        for n in &o.notes {
            println!("             info: {n}");
        }
        failed += (!o.pass) as u32;
    }
    println!(
        "{} of {} criteria pass",
        results.len() as u32 - failed,
        results.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
