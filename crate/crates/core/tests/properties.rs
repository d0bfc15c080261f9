//! Invariants as property tests, checked against small brute-force oracles.

use std::collections::VecDeque;

use lcmd_core::auctions::{
    self, AuctionInstance, AuctionMode, AuctionQuery, LocalAnswer, ReportOverlay,
};
use lcmd_core::oracles::{self, majorizes};
use lcmd_core::rsd::{self, HousingInstance};
use lcmd_core::scheduling::{self, PaymentRule, SchedulingInstance};
use lcmd_core::stable_matching::{self as sm, LocalAgsStrategy, ManStatus, MatchingInstance};
use lcmd_core::{DrawKey, ProbeCounter, RandomTape};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use proptest::prelude::*;

fn int(x: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

/// Men's lists over `women` plus a full ranking per woman of her suitors.
fn matching_case() -> impl Strategy<Value = (Vec<Vec<u32>>, Vec<Vec<u32>>)> {
    (1usize..7, 1usize..7).prop_flat_map(|(men, women)| {
        let lists = prop::collection::vec(
            Just((0..women as u32).collect::<Vec<_>>())
                .prop_shuffle()
                .prop_flat_map(move |v| (0..=v.len()).prop_map(move |l| v[..l].to_vec())),
            men,
        );
        let ranks = prop::collection::vec(
            Just((0..men as u32).collect::<Vec<_>>()).prop_shuffle(),
            women,
        );
        (lists, ranks)
    })
}

fn ranking_subset(ranks: &[Vec<u32>], lists: &[Vec<u32>]) -> Vec<Vec<u32>> {
    ranks
        .iter()
        .enumerate()
        .map(|(w, r)| {
            r.iter()
                .copied()
                .filter(|&m| lists[m as usize].contains(&(w as u32)))
                .collect()
        })
        .collect()
}

/// Queue-based man-proposing deferred acceptance.
fn deferred_acceptance(lists: &[Vec<u32>], ranks: &[Vec<u32>]) -> Vec<Option<u32>> {
    let pos = |w: usize, m: u32| ranks[w].iter().position(|&x| x == m).unwrap();
    let mut next = vec![0usize; lists.len()];
    let mut holds: Vec<Option<u32>> = vec![None; ranks.len()];
    let mut free: VecDeque<u32> = (0..lists.len() as u32).collect();
    while let Some(m) = free.pop_front() {
        let Some(&w) = lists[m as usize].get(next[m as usize]) else {
            continue;
        };
        next[m as usize] += 1;
        match holds[w as usize] {
            None => holds[w as usize] = Some(m),
            Some(h) if pos(w as usize, m) < pos(w as usize, h) => {
                holds[w as usize] = Some(m);
                free.push_back(h);
            }
            Some(_) => free.push_back(m),
        }
    }
    let mut out = vec![None; lists.len()];
    for (w, h) in holds.iter().enumerate() {
        if let Some(m) = h {
            out[*m as usize] = Some(w as u32);
        }
    }
    out
}

fn brute_max_matching(items: usize, sets: &[Vec<u32>]) -> usize {
    fn go(i: usize, sets: &[Vec<u32>], used: &mut Vec<bool>) -> usize {
        if i == sets.len() {
            return 0;
        }
        let mut best = go(i + 1, sets, used);
        for &j in &sets[i] {
            if !used[j as usize] {
                used[j as usize] = true;
                best = best.max(1 + go(i + 1, sets, used));
                used[j as usize] = false;
            }
        }
        best
    }
    go(0, sets, &mut vec![false; items])
}

fn brute_packing(sets: &[Vec<u32>], values: &[BigRational]) -> BigRational {
    let mut best = BigRational::zero();
    for mask in 0u32..(1 << sets.len()) {
        let chosen: Vec<usize> = (0..sets.len()).filter(|&i| mask >> i & 1 == 1).collect();
        let disjoint = chosen.iter().enumerate().all(|(a, &i)| {
            chosen[a + 1..]
                .iter()
                .all(|&j| sets[i].iter().all(|x| !sets[j].contains(x)))
        });
        if disjoint {
            let v = chosen
                .iter()
                .fold(BigRational::zero(), |s, &i| s + &values[i]);
            if v > best {
                best = v;
            }
        }
    }
    best
}

fn auction_case() -> impl Strategy<Value = (usize, Vec<Vec<u32>>, Vec<u64>)> {
    (1usize..6, 1usize..7).prop_flat_map(|(items, buyers)| {
        let sets = prop::collection::vec(
            prop::collection::btree_set(0..items as u32, 1..=items.min(3)),
            buyers,
        )
        .prop_map(|v| {
            v.into_iter()
                .map(|s| s.into_iter().collect::<Vec<_>>())
                .collect::<Vec<_>>()
        });
        (Just(items), sets, prop::collection::vec(1u64..8, buyers))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn global_gs_equals_deferred_acceptance((lists, ranks) in matching_case()) {
        let inst = MatchingInstance::explicit(lists.clone(), ranking_subset(&ranks, &lists)).unwrap();
        let got: Vec<Option<u32>> = sm::global_gs(&inst).iter().map(ManStatus::woman).collect();
        prop_assert_eq!(got, deferred_acceptance(&lists, &ranks));
    }

    #[test]
    fn local_ags_strategies_agree_with_abridged((lists, ranks) in matching_case(), rounds in 1u32..6) {
        let inst = MatchingInstance::explicit(lists.clone(), ranking_subset(&ranks, &lists)).unwrap();
        let ags = sm::abridged_gs(&inst, rounds).unwrap();
        for m in 0..inst.men() as u32 {
            for strategy in [LocalAgsStrategy::Lazy, LocalAgsStrategy::Neighborhood] {
                let mut c = ProbeCounter::new();
                prop_assert_eq!(sm::local_ags_with(&inst, rounds, m, strategy, &mut c).unwrap(), ags.statuses[m as usize]);
            }
        }
        prop_assert!(sm::blocking_pairs(&inst, &ags.statuses).unwrap().is_empty());
    }

    #[test]
    fn round_stats_identities((lists, ranks) in matching_case(), rounds in 1u32..8) {
        let inst = MatchingInstance::explicit(lists.clone(), ranking_subset(&ranks, &lists)).unwrap();
        let ags = sm::abridged_gs(&inst, rounds).unwrap();
        let mut prev_d = lists.iter().filter(|l| l.is_empty()).count() as u64;
        let nk = (inst.men() * inst.k()) as u64;
        for s in &ags.rounds {
            prop_assert_eq!(s.rejected + prev_d, s.continuing + s.exhausted);
            prop_assert!(s.rejected * s.round as u64 <= nk);
            prev_d = s.exhausted;
        }
        let star = sm::global_gs(&inst).iter().filter(|s| s.woman().is_some()).count() as u64;
        prop_assert!(ags.matched() as u64 * rounds as u64 + nk >= star * rounds as u64);
    }

    #[test]
    fn long_truncation_is_global(seed in 0u64..1000, n in 1usize..40, k in 1usize..4) {
        let k = k.min(n);
        let inst = MatchingInstance::seeded(seed, n, k).unwrap();
        let ags = sm::abridged_gs(&inst, (n * k + 1) as u32).unwrap();
        prop_assert_eq!(ags.statuses, sm::global_gs(&inst));
    }

    #[test]
    fn rsd_matches_serial_picks(seed in 0u64..500, n in 1usize..30, d in 1usize..4) {
        let d = d.min(n);
        let inst = HousingInstance::seeded(seed, n, d).unwrap();
        let mut order: Vec<u32> = (0..n as u32).collect();
        order.sort_by_key(|&a| (inst.rank(a), a));
        let mut taken = std::collections::HashSet::new();
        let mut expect = vec![None; n];
        for a in order {
            expect[a as usize] = inst.list(a).iter().copied().find(|h| taken.insert(*h));
        }
        prop_assert_eq!(rsd::rsd_global(&inst), expect.clone());
        for a in 0..n as u32 {
            let mut c = ProbeCounter::new();
            prop_assert_eq!(rsd::rsd_local(&inst, a, &mut c).unwrap(), expect[a as usize]);
        }
    }

    #[test]
    fn scheduling_local_equals_online(seed in 0u64..500, caps in prop::collection::vec(1u64..6, 1..6), jobs in 1usize..25) {
        let d = caps.len().min(2);
        let std = SchedulingInstance::standard(seed, caps.clone(), jobs, 2).unwrap();
        let res = SchedulingInstance::seeded_restricted(seed, caps, jobs, d).unwrap();
        let so = scheduling::slms_online(&std).unwrap();
        let ro = scheduling::rlms_online(&res).unwrap();
        prop_assert_eq!(so.heights.iter().sum::<u64>(), jobs as u64);
        prop_assert_eq!(ro.heights.iter().sum::<u64>(), jobs as u64);
        let so = scheduling::slms_online_ordered(&std, &scheduling::arrival_order(&std)).unwrap();
        let ro = scheduling::rlms_online_ordered(&res, &scheduling::arrival_order(&res)).unwrap();
        for j in 0..jobs as u32 {
            let mut c = ProbeCounter::new();
            prop_assert_eq!(Some(scheduling::slms_local(&std, j, &mut c).unwrap()), so.assign[j as usize]);
            let mut c = ProbeCounter::new();
            prop_assert_eq!(scheduling::rlms_local(&res, j, &mut c).unwrap(), ro.assign[j as usize]);
        }
    }

    #[test]
    fn expected_heights_sum_to_jobs(caps in prop::collection::vec(1u64..9, 1..6), jobs in 1u64..30) {
        let total: u64 = caps.iter().sum();
        let sum = caps
            .iter()
            .map(|&c| scheduling::expected_height(c, total - c, jobs).unwrap())
            .fold(BigRational::zero(), |a, b| a + b);
        prop_assert_eq!(sum, int(jobs));
    }

    #[test]
    fn sampled_payment_is_unbiased(seed in 0u64..100, caps in prop::collection::vec(1u64..7, 1..5), jobs in 1usize..20) {
        let inst = SchedulingInstance::standard(seed, caps.clone(), jobs, 2).unwrap();
        for rule in [PaymentRule::HeightSum, PaymentRule::LoadCritical] {
            for i in 0..caps.len() as u32 {
                let range = scheduling::sample_range(rule, caps[i as usize]);
                let mean = (1..=range)
                    .map(|k| scheduling::payment_slms_sampled_at(&inst, i, k, rule).unwrap().payment)
                    .fold(BigRational::zero(), |a, b| a + b)
                    / int(range);
                prop_assert_eq!(mean, scheduling::payment_slms_expected(&inst, i, rule).unwrap().payment);
            }
        }
    }

    #[test]
    fn load_critical_rerun_payment_is_truthful(seed in 0u64..300, caps in prop::collection::vec(1u64..5, 1..5), jobs in 1usize..10) {
        let d = caps.len().min(2);
        let inst = SchedulingInstance::seeded_restricted(seed, caps, jobs, d).unwrap();
        prop_assert!(scheduling::rlms_truthfulness_audit(&inst, PaymentRule::LoadCritical).unwrap().is_empty());
    }

    #[test]
    fn matching_oracles_agree((items, sets, bids) in auction_case()) {
        prop_assert_eq!(oracles::max_matching(items, &sets).unwrap(), brute_max_matching(items, &sets));
        let weights: Vec<BigRational> = bids.iter().map(|&b| int(b)).collect();
        let edges: Vec<Vec<(u32, BigRational)>> = sets
            .iter()
            .zip(&weights)
            .map(|(s, w)| s.iter().map(|&j| (j, w.clone())).collect())
            .collect();
        prop_assert_eq!(
            oracles::max_vertex_weight_matching(items, &sets, &weights).unwrap(),
            oracles::max_weight_matching(items, &edges).unwrap()
        );
        prop_assert_eq!(oracles::optimal_packing(&sets, &weights).unwrap(), brute_packing(&sets, &weights));
    }

    #[test]
    fn auctions_feasible_and_local((items, sets, bids) in auction_case()) {
        let values: Vec<BigRational> = bids.iter().map(|&b| int(b)).collect();
        for mode in [AuctionMode::Uduv, AuctionMode::Udubv, AuctionMode::Ksmb] {
            let inst = AuctionInstance::explicit(mode, 3, items, sets.clone(), values.clone()).unwrap();
            let out = auctions::run(&inst, &ReportOverlay::truthful()).unwrap();
            let owners = out.item_owners(items).unwrap();
            for (i, award) in out.awards.iter().enumerate() {
                prop_assert!(award.iter().all(|j| sets[i].contains(j)));
                if award.is_empty() {
                    prop_assert!(out.payments[i].is_zero());
                }
                if mode == AuctionMode::Ksmb && !award.is_empty() {
                    prop_assert_eq!(award, &sets[i]);
                }
                prop_assert!(out.payments[i] <= *inst.value(i as u32));
                let mut c = ProbeCounter::new();
                let local = auctions::local(&inst, &ReportOverlay::truthful(), AuctionQuery::Buyer(i as u32), &mut c).unwrap();
                prop_assert_eq!(local, LocalAnswer::Buyer { buyer: i as u32, award: award.clone(), payment: out.payments[i].clone() });
            }
            for j in 0..items as u32 {
                let mut c = ProbeCounter::new();
                let local = auctions::local(&inst, &ReportOverlay::truthful(), AuctionQuery::Item(j), &mut c).unwrap();
                prop_assert_eq!(local, LocalAnswer::Item { item: j, winner: owners[j as usize] });
            }
        }
    }

    #[test]
    fn majorization_is_a_preorder(v in prop::collection::vec(0u64..20, 1..8), perm_seed in 0u64..100) {
        prop_assert!(majorizes(&v, &v));
        let tape = RandomTape::new(perm_seed);
        let mut w = v.clone();
        for i in (1..w.len()).rev() {
            let j = tape.derive_uniform(DrawKey::new("perm", 0).index(i as u64), i as u64 + 1).unwrap() as usize;
            w.swap(i, j);
        }
        prop_assert!(majorizes(&v, &w) && majorizes(&w, &v));
        let total: u64 = v.iter().sum();
        let mut spike = vec![0; v.len()];
        spike[0] = total;
        prop_assert!(majorizes(&spike, &v));
    }

    #[test]
    fn uniform_draws_stay_in_range(seed: u64, entity: u64, range in 1u64..u64::MAX) {
        let tape = RandomTape::new(seed);
        let key = DrawKey::new("range", entity);
        let x = tape.derive_uniform(key, range).unwrap();
        prop_assert!(x < range);
        prop_assert_eq!(x, RandomTape::new(seed).derive_uniform(key, range).unwrap());
    }
}
