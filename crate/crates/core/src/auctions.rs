//! Greedy auctions: unit-demand buyers with private sets and unit values,
//! unit-demand buyers with public sets and private values, and
//! single-minded buyers.

use std::cell::RefCell;
use std::cmp::Reverse;
use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::instance::{build_instance, Family, InstanceSpec};
use crate::probe::{AdjacencyOracle, ProbeCounter};
use crate::query_tree::{QuerySession, QueryTree};
use crate::rng::{DrawKey, Purpose, RandomTape};

const ITEM_RANK_DRAW: Purpose = Purpose::new("item-rank");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuctionMode {
    /// Private sets, unit values.
    Uduv,
    /// Public sets, private value per buyer.
    Udubv,
    /// Single-minded buyers wanting their whole set.
    Ksmb,
}

impl AuctionMode {
    pub fn family(&self) -> Family {
        match self {
            AuctionMode::Uduv => Family::Uduv,
            AuctionMode::Udubv => Family::Udubv,
            AuctionMode::Ksmb => Family::Ksmb,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AuctionInstance {
    mode: AuctionMode,
    items: usize,
    k: usize,
    sets: AdjacencyOracle,
    values: Vec<BigRational>,
    tape: RandomTape,
}

impl AuctionInstance {
    pub fn from_spec(spec: &InstanceSpec) -> Result<Self> {
        let mode = match spec.family {
            Family::Uduv => AuctionMode::Uduv,
            Family::Udubv => AuctionMode::Udubv,
            Family::Ksmb => AuctionMode::Ksmb,
            other => return Err(invalid(format!("expected an auction spec, got {other}"))),
        };
        let sets = build_instance(spec)?;
        let values = match mode {
            AuctionMode::Uduv => vec![BigRational::one(); spec.n],
            _ => spec
                .values()
                .into_iter()
                .map(|v| BigRational::from_float(v).expect("finite valuation"))
                .collect(),
        };
        Self::assemble(mode, spec.m, sets, values, spec.tape())
    }

    pub fn seeded(
        mode: AuctionMode,
        seed: u64,
        buyers: usize,
        items: usize,
        k: usize,
    ) -> Result<Self> {
        Self::from_spec(&InstanceSpec::new(mode.family(), seed, buyers, items, k))
    }

    /// Hand-built instance. Values are ignored (taken as 1) in UDUV mode.
    pub fn explicit(
        mode: AuctionMode,
        seed: u64,
        items: usize,
        sets: Vec<Vec<u32>>,
        values: Vec<BigRational>,
    ) -> Result<Self> {
        if sets.len() != values.len() && mode != AuctionMode::Uduv {
            return Err(invalid("one value per buyer required"));
        }
        let values = match mode {
            AuctionMode::Uduv => vec![BigRational::one(); sets.len()],
            _ => values,
        };
        let oracle = AdjacencyOracle::from_lists(items, &sets)?;
        Self::assemble(mode, items, oracle, values, RandomTape::new(seed))
    }

    fn assemble(
        mode: AuctionMode,
        items: usize,
        sets: AdjacencyOracle,
        values: Vec<BigRational>,
        tape: RandomTape,
    ) -> Result<Self> {
        if values.iter().any(|v| *v < BigRational::zero()) {
            return Err(invalid("values must be non-negative"));
        }
        let k = (0..sets.left_count() as u32)
            .map(|i| sets.forward_raw(i).len())
            .max()
            .unwrap_or(0);
        Ok(AuctionInstance {
            mode,
            items,
            k,
            sets,
            values,
            tape,
        })
    }

    pub fn mode(&self) -> AuctionMode {
        self.mode
    }

    pub fn buyers(&self) -> usize {
        self.sets.left_count()
    }

    pub fn items(&self) -> usize {
        self.items
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn oracle(&self) -> &AdjacencyOracle {
        &self.sets
    }

    /// True set of buyer `i`, ascending and without repeats.
    pub fn set(&self, i: u32) -> Vec<u32> {
        normalize(self.sets.forward_raw(i).to_vec())
    }

    pub fn value(&self, i: u32) -> &BigRational {
        &self.values[i as usize]
    }

    /// Priority of item `j` in the unit-value mechanism; larger goes first.
    pub fn item_rank(&self, j: u32) -> u64 {
        self.tape
            .word(DrawKey::with_purpose(ITEM_RANK_DRAW, j as u64, 0))
    }

    /// True value of `award` to buyer `i`.
    pub fn award_value(&self, i: u32, award: &[u32]) -> BigRational {
        let truth = self.set(i);
        let got = match self.mode {
            AuctionMode::Uduv | AuctionMode::Udubv => award.iter().any(|j| truth.contains(j)),
            AuctionMode::Ksmb => !truth.is_empty() && truth.iter().all(|j| award.contains(j)),
        };
        if got {
            self.values[i as usize].clone()
        } else {
            BigRational::zero()
        }
    }

    fn check_buyer(&self, i: u32) -> Result<()> {
        if i as usize >= self.buyers() {
            return Err(invalid(format!("unknown buyer {i}")));
        }
        Ok(())
    }
}

fn normalize(mut set: Vec<u32>) -> Vec<u32> {
    set.sort_unstable();
    set.dedup();
    set
}

/// Per-buyer departures from the truth. Absent entries mean truthful.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReportOverlay {
    pub sets: BTreeMap<u32, Vec<u32>>,
    pub bids: BTreeMap<u32, BigRational>,
}

impl ReportOverlay {
    pub fn truthful() -> Self {
        Self::default()
    }

    pub fn with_set(mut self, buyer: u32, set: Vec<u32>) -> Self {
        self.sets.insert(buyer, normalize(set));
        self
    }

    pub fn with_bid(mut self, buyer: u32, bid: BigRational) -> Self {
        self.bids.insert(buyer, bid);
        self
    }

    fn validate(&self, inst: &AuctionInstance) -> Result<()> {
        if inst.mode == AuctionMode::Udubv && !self.sets.is_empty() {
            return Err(invalid(
                "sets are public in this mode and cannot be misreported",
            ));
        }
        for (&i, set) in &self.sets {
            inst.check_buyer(i)?;
            if set.iter().any(|&j| j as usize >= inst.items) {
                return Err(invalid(format!("buyer {i} reports an unknown item")));
            }
        }
        for (&i, b) in &self.bids {
            inst.check_buyer(i)?;
            if *b < BigRational::zero() {
                return Err(invalid("bids must be non-negative"));
            }
        }
        Ok(())
    }
}

/// Reported data as seen by a mechanism, with probe-charged access.
struct Reports<'a> {
    inst: &'a AuctionInstance,
    overlay: &'a ReportOverlay,
    sets: RefCell<HashMap<u32, Vec<u32>>>,
    reporters: RefCell<HashMap<u32, Vec<u32>>>,
}

impl<'a> Reports<'a> {
    fn new(inst: &'a AuctionInstance, overlay: &'a ReportOverlay) -> Result<Self> {
        overlay.validate(inst)?;
        Ok(Reports {
            inst,
            overlay,
            sets: RefCell::default(),
            reporters: RefCell::default(),
        })
    }

    fn set(&self, i: u32, counter: &mut ProbeCounter) -> Vec<u32> {
        if let Some(s) = self.sets.borrow().get(&i) {
            return s.clone();
        }
        let truth = self.inst.sets.forward(i, counter);
        let s = match self.overlay.sets.get(&i) {
            Some(s) => s.clone(),
            None => normalize(truth.to_vec()),
        };
        self.sets.borrow_mut().insert(i, s.clone());
        s
    }

    fn reporters(&self, j: u32, counter: &mut ProbeCounter) -> Vec<u32> {
        if let Some(r) = self.reporters.borrow().get(&j) {
            return r.clone();
        }
        let mut out: Vec<u32> = self
            .inst
            .sets
            .reverse(j, counter)
            .iter()
            .copied()
            .filter(|b| self.overlay.sets.get(b).is_none_or(|s| s.contains(&j)))
            .collect();
        for (&b, s) in &self.overlay.sets {
            if s.contains(&j) && !out.contains(&b) {
                out.push(b);
            }
        }
        out.sort_unstable();
        self.reporters.borrow_mut().insert(j, out.clone());
        out
    }

    fn bid(&self, i: u32) -> BigRational {
        self.overlay
            .bids
            .get(&i)
            .cloned()
            .unwrap_or_else(|| self.inst.values[i as usize].clone())
    }

    fn all_sets(&self) -> Vec<Vec<u32>> {
        let mut c = ProbeCounter::new();
        (0..self.inst.buyers() as u32)
            .map(|i| self.set(i, &mut c))
            .collect()
    }

    /// Buyers by decreasing bid, ties by smaller id.
    fn bid_order(&self, excluded: Option<u32>) -> Vec<u32> {
        let bids: Vec<BigRational> = (0..self.inst.buyers() as u32)
            .map(|i| self.bid(i))
            .collect();
        let mut order: Vec<u32> = (0..self.inst.buyers() as u32)
            .filter(|&i| Some(i) != excluded)
            .collect();
        order.sort_by(|&a, &b| bids[b as usize].cmp(&bids[a as usize]).then(a.cmp(&b)));
        order
    }

    fn before(&self, a: u32, b: u32) -> bool {
        (Reverse(self.bid(a)), a) < (Reverse(self.bid(b)), b)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    /// Items awarded to each buyer; empty for losers.
    pub awards: Vec<Vec<u32>>,
    pub payments: Vec<BigRational>,
}

impl Outcome {
    fn empty(buyers: usize) -> Self {
        Outcome {
            awards: vec![Vec::new(); buyers],
            payments: vec![BigRational::zero(); buyers],
        }
    }

    pub fn winners(&self) -> Vec<u32> {
        (0..self.awards.len() as u32)
            .filter(|&i| !self.awards[i as usize].is_empty())
            .collect()
    }

    /// Winner per item, or an error if some item went to two buyers.
    pub fn item_owners(&self, items: usize) -> Result<Vec<Option<u32>>> {
        let mut owner = vec![None; items];
        for (i, award) in self.awards.iter().enumerate() {
            for &j in award {
                let slot = owner
                    .get_mut(j as usize)
                    .ok_or_else(|| invalid(format!("unknown item {j}")))?;
                if slot.is_some() {
                    return Err(invalid(format!("item {j} awarded twice")));
                }
                *slot = Some(i as u32);
            }
        }
        Ok(owner)
    }

    /// `v_i(award) - p_i` under the true values.
    pub fn utilities(&self, inst: &AuctionInstance) -> Vec<BigRational> {
        (0..self.awards.len() as u32)
            .map(|i| inst.award_value(i, &self.awards[i as usize]) - &self.payments[i as usize])
            .collect()
    }
}

fn half() -> BigRational {
    BigRational::new(BigInt::from(1), BigInt::from(2))
}

/// Items in decreasing random rank, each to the smallest-id unserved buyer
/// that reported it. Winners pay one half.
pub fn uduv_run(inst: &AuctionInstance, overlay: &ReportOverlay) -> Result<Outcome> {
    if inst.mode != AuctionMode::Uduv {
        return Err(invalid("instance is not in uduv mode"));
    }
    let reports = Reports::new(inst, overlay)?;
    let sets = reports.all_sets();
    let mut reporters: Vec<Vec<u32>> = vec![Vec::new(); inst.items];
    for (i, s) in sets.iter().enumerate() {
        for &j in s {
            reporters[j as usize].push(i as u32);
        }
    }
    let mut items: Vec<u32> = (0..inst.items as u32).collect();
    items.sort_by_key(|&j| (Reverse(inst.item_rank(j)), j));
    let mut out = Outcome::empty(inst.buyers());
    for j in items {
        if let Some(&b) = reporters[j as usize]
            .iter()
            .find(|&&b| out.awards[b as usize].is_empty())
        {
            out.awards[b as usize].push(j);
            out.payments[b as usize] = half();
        }
    }
    Ok(out)
}

fn item_before(inst: &AuctionInstance, a: u32, b: u32) -> bool {
    (Reverse(inst.item_rank(a)), a) < (Reverse(inst.item_rank(b)), b)
}

struct ItemTree<'a> {
    reports: Reports<'a>,
}

impl QueryTree for ItemTree<'_> {
    type Answer = Option<u32>;
    /// Reporters of the item with their earlier-ranked reported items.
    type Frame = Vec<(u32, Vec<u32>)>;

    fn expand(&self, item: u32, counter: &mut ProbeCounter) -> (Self::Frame, Vec<u32>) {
        let inst = self.reports.inst;
        let mut frame = Vec::new();
        let mut deps = Vec::new();
        for b in self.reports.reporters(item, counter) {
            let earlier: Vec<u32> = self
                .reports
                .set(b, counter)
                .into_iter()
                .filter(|&j| item_before(inst, j, item))
                .collect();
            deps.extend_from_slice(&earlier);
            frame.push((b, earlier));
        }
        deps.sort_unstable();
        deps.dedup();
        (frame, deps)
    }

    fn resolve(
        &self,
        _: u32,
        frame: &Self::Frame,
        solved: &HashMap<u32, Option<u32>>,
    ) -> Option<u32> {
        frame
            .iter()
            .find(|(b, earlier)| earlier.iter().all(|j| solved[j] != Some(*b)))
            .map(|(b, _)| *b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "lowercase")]
pub enum AuctionQuery {
    Buyer(u32),
    Item(u32),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LocalAnswer {
    Buyer {
        buyer: u32,
        award: Vec<u32>,
        payment: BigRational,
    },
    Item {
        item: u32,
        winner: Option<u32>,
    },
}

/// One buyer's award and payment, or one item's winner, in [`uduv_run`].
pub fn uduv_local(
    inst: &AuctionInstance,
    overlay: &ReportOverlay,
    query: AuctionQuery,
    counter: &mut ProbeCounter,
) -> Result<LocalAnswer> {
    if inst.mode != AuctionMode::Uduv {
        return Err(invalid("instance is not in uduv mode"));
    }
    let tree = ItemTree {
        reports: Reports::new(inst, overlay)?,
    };
    let mut session = QuerySession::new(&tree);
    match query {
        AuctionQuery::Item(j) => {
            if j as usize >= inst.items {
                return Err(invalid(format!("unknown item {j}")));
            }
            Ok(LocalAnswer::Item {
                item: j,
                winner: session.answer(j, counter),
            })
        }
        AuctionQuery::Buyer(i) => {
            inst.check_buyer(i)?;
            let mut items = tree.reports.set(i, counter);
            items.sort_by_key(|&j| (Reverse(inst.item_rank(j)), j));
            for j in items {
                if session.answer(j, counter) == Some(i) {
                    return Ok(LocalAnswer::Buyer {
                        buyer: i,
                        award: vec![j],
                        payment: half(),
                    });
                }
            }
            Ok(LocalAnswer::Buyer {
                buyer: i,
                award: Vec::new(),
                payment: BigRational::zero(),
            })
        }
    }
}

fn greedy_by_bid(reports: &Reports<'_>, sets: &[Vec<u32>], excluded: Option<u32>) -> Vec<Vec<u32>> {
    let inst = reports.inst;
    let mut taken = vec![false; inst.items];
    let mut awards = vec![Vec::new(); inst.buyers()];
    for i in reports.bid_order(excluded) {
        let set = &sets[i as usize];
        match inst.mode {
            AuctionMode::Ksmb => {
                if !set.is_empty() && set.iter().all(|&j| !taken[j as usize]) {
                    for &j in set {
                        taken[j as usize] = true;
                    }
                    awards[i as usize] = set.clone();
                }
            }
            _ => {
                if let Some(&j) = set.iter().find(|&&j| !taken[j as usize]) {
                    taken[j as usize] = true;
                    awards[i as usize] = vec![j];
                }
            }
        }
    }
    awards
}

fn critical_from_rerun(
    reports: &Reports<'_>,
    sets: &[Vec<u32>],
    i: u32,
    without: &[Vec<u32>],
) -> BigRational {
    let set = &sets[i as usize];
    match reports.inst.mode {
        AuctionMode::Ksmb => (0..without.len() as u32)
            .filter(|&x| without[x as usize].iter().any(|j| set.contains(j)))
            .map(|x| reports.bid(x))
            .max()
            .unwrap_or_else(BigRational::zero),
        _ => {
            let mut owner: HashMap<u32, u32> = HashMap::new();
            for (x, a) in without.iter().enumerate() {
                for &j in a {
                    owner.insert(j, x as u32);
                }
            }
            set.iter()
                .map(|j| {
                    owner
                        .get(j)
                        .map_or_else(BigRational::zero, |&x| reports.bid(x))
                })
                .min()
                .unwrap_or_else(BigRational::zero)
        }
    }
}

fn bid_mechanism(
    inst: &AuctionInstance,
    overlay: &ReportOverlay,
    mode: AuctionMode,
) -> Result<Outcome> {
    if inst.mode != mode {
        return Err(invalid(format!("instance is not in {mode:?} mode")));
    }
    let reports = Reports::new(inst, overlay)?;
    let sets = reports.all_sets();
    let awards = greedy_by_bid(&reports, &sets, None);
    let mut payments = vec![BigRational::zero(); inst.buyers()];
    for i in 0..inst.buyers() as u32 {
        if !awards[i as usize].is_empty() {
            let without = greedy_by_bid(&reports, &sets, Some(i));
            payments[i as usize] = critical_from_rerun(&reports, &sets, i, &without);
        }
    }
    Ok(Outcome { awards, payments })
}

/// Buyers by decreasing bid each take the first free item of their set;
/// winners pay the least bid that still sells one of their items in the run
/// without them.
pub fn udubv_run(inst: &AuctionInstance, overlay: &ReportOverlay) -> Result<Outcome> {
    bid_mechanism(inst, overlay, AuctionMode::Udubv)
}

/// Buyers by decreasing bid take their whole set if it is still free;
/// winners pay the highest bid among buyers whose sets meet theirs and who
/// win in the run without them.
pub fn ksmb_run(inst: &AuctionInstance, overlay: &ReportOverlay) -> Result<Outcome> {
    bid_mechanism(inst, overlay, AuctionMode::Ksmb)
}

/// The critical value of buyer `i` whether or not it wins. Losers are never
/// charged it.
pub fn shadow_payment(
    inst: &AuctionInstance,
    overlay: &ReportOverlay,
    i: u32,
) -> Result<BigRational> {
    inst.check_buyer(i)?;
    if inst.mode == AuctionMode::Uduv {
        return Err(invalid("unit-value mode has a fixed price"));
    }
    let reports = Reports::new(inst, overlay)?;
    let sets = reports.all_sets();
    let without = greedy_by_bid(&reports, &sets, Some(i));
    Ok(critical_from_rerun(&reports, &sets, i, &without))
}

struct BuyerTree<'a> {
    reports: &'a Reports<'a>,
    excluded: Option<u32>,
}

impl QueryTree for BuyerTree<'_> {
    type Answer = Vec<u32>;
    /// The buyer's set and its earlier-ranked rivals.
    type Frame = (Vec<u32>, Vec<u32>);

    fn expand(&self, buyer: u32, counter: &mut ProbeCounter) -> (Self::Frame, Vec<u32>) {
        let set = self.reports.set(buyer, counter);
        let mut deps = Vec::new();
        for &j in &set {
            for x in self.reports.reporters(j, counter) {
                if x != buyer && Some(x) != self.excluded && self.reports.before(x, buyer) {
                    deps.push(x);
                }
            }
        }
        deps.sort_unstable();
        deps.dedup();
        ((set, deps.clone()), deps)
    }

    fn resolve(&self, _: u32, frame: &Self::Frame, solved: &HashMap<u32, Vec<u32>>) -> Vec<u32> {
        let (set, rivals) = frame;
        match self.reports.inst.mode {
            AuctionMode::Ksmb => {
                let blocked = rivals
                    .iter()
                    .any(|x| solved[x].iter().any(|j| set.contains(j)));
                if blocked || set.is_empty() {
                    Vec::new()
                } else {
                    set.clone()
                }
            }
            _ => {
                let taken: Vec<u32> = rivals
                    .iter()
                    .flat_map(|x| solved[x].iter().copied())
                    .collect();
                set.iter()
                    .find(|j| !taken.contains(j))
                    .map(|&j| vec![j])
                    .unwrap_or_default()
            }
        }
    }
}

/// Award and payment of one buyer, or the winner of one item, in
/// [`udubv_run`] / [`ksmb_run`]. Payment queries also resolve the
/// neighbourhood in the run without the buyer.
pub fn bid_local(
    inst: &AuctionInstance,
    overlay: &ReportOverlay,
    query: AuctionQuery,
    counter: &mut ProbeCounter,
) -> Result<LocalAnswer> {
    if inst.mode == AuctionMode::Uduv {
        return Err(invalid("use uduv_local for the unit-value mode"));
    }
    let reports = Reports::new(inst, overlay)?;
    let tree = BuyerTree {
        reports: &reports,
        excluded: None,
    };
    let mut session = QuerySession::new(&tree);
    match query {
        AuctionQuery::Item(j) => {
            if j as usize >= inst.items {
                return Err(invalid(format!("unknown item {j}")));
            }
            let winner = reports
                .reporters(j, counter)
                .into_iter()
                .find(|&x| session.answer(x, counter).contains(&j));
            Ok(LocalAnswer::Item { item: j, winner })
        }
        AuctionQuery::Buyer(i) => {
            inst.check_buyer(i)?;
            let award = session.answer(i, counter);
            let mut payment = BigRational::zero();
            if !award.is_empty() {
                let set = reports.set(i, counter);
                let without_tree = BuyerTree {
                    reports: &reports,
                    excluded: Some(i),
                };
                let mut without = QuerySession::new(&without_tree);
                let mut rivals: Vec<u32> = Vec::new();
                for &j in &set {
                    rivals.extend(
                        reports
                            .reporters(j, counter)
                            .into_iter()
                            .filter(|&x| x != i),
                    );
                }
                rivals.sort_unstable();
                rivals.dedup();
                let answers: Vec<(u32, Vec<u32>)> = rivals
                    .into_iter()
                    .map(|x| (x, without.answer(x, counter)))
                    .collect();
                payment = match inst.mode {
                    AuctionMode::Ksmb => answers
                        .iter()
                        .filter(|(_, a)| a.iter().any(|j| set.contains(j)))
                        .map(|(x, _)| reports.bid(*x))
                        .max()
                        .unwrap_or_else(BigRational::zero),
                    _ => set
                        .iter()
                        .map(|j| {
                            answers
                                .iter()
                                .find(|(_, a)| a.contains(j))
                                .map_or_else(BigRational::zero, |(x, _)| reports.bid(*x))
                        })
                        .min()
                        .unwrap_or_else(BigRational::zero),
                };
            }
            Ok(LocalAnswer::Buyer {
                buyer: i,
                award,
                payment,
            })
        }
    }
}

pub fn udubv_local(
    inst: &AuctionInstance,
    overlay: &ReportOverlay,
    query: AuctionQuery,
    counter: &mut ProbeCounter,
) -> Result<LocalAnswer> {
    if inst.mode != AuctionMode::Udubv {
        return Err(invalid("instance is not in udubv mode"));
    }
    bid_local(inst, overlay, query, counter)
}

pub fn ksmb_local(
    inst: &AuctionInstance,
    overlay: &ReportOverlay,
    query: AuctionQuery,
    counter: &mut ProbeCounter,
) -> Result<LocalAnswer> {
    if inst.mode != AuctionMode::Ksmb {
        return Err(invalid("instance is not in ksmb mode"));
    }
    bid_local(inst, overlay, query, counter)
}

/// The mode's global mechanism.
pub fn run(inst: &AuctionInstance, overlay: &ReportOverlay) -> Result<Outcome> {
    match inst.mode {
        AuctionMode::Uduv => uduv_run(inst, overlay),
        AuctionMode::Udubv => udubv_run(inst, overlay),
        AuctionMode::Ksmb => ksmb_run(inst, overlay),
    }
}

/// The mode's local mechanism.
pub fn local(
    inst: &AuctionInstance,
    overlay: &ReportOverlay,
    query: AuctionQuery,
    counter: &mut ProbeCounter,
) -> Result<LocalAnswer> {
    match inst.mode {
        AuctionMode::Uduv => uduv_local(inst, overlay, query, counter),
        _ => bid_local(inst, overlay, query, counter),
    }
}

/// Which misreports a truthfulness audit tries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviationGrid {
    /// Every reported set of at most `k + 1` items (private-set modes).
    pub sets: bool,
    /// Bids `0`, `p ± ε`, `t ± t/2`, `2t` and every rival bid `± ε`.
    pub bids: bool,
}

impl DeviationGrid {
    pub fn empty() -> Self {
        DeviationGrid {
            sets: false,
            bids: false,
        }
    }

    /// The grid the mode admits: sets for UDUV, bids for the other modes.
    pub fn for_mode(mode: AuctionMode) -> Self {
        DeviationGrid {
            sets: mode == AuctionMode::Uduv,
            bids: mode != AuctionMode::Uduv,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuctionViolation {
    pub buyer: u32,
    pub overlay: ReportOverlay,
    pub truthful_utility: BigRational,
    pub deviating_utility: BigRational,
}

fn subsets_up_to(items: usize, size: usize) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    let mut frontier: Vec<Vec<u32>> = vec![Vec::new()];
    for _ in 0..size {
        let mut next = Vec::new();
        for s in &frontier {
            let start = s.last().map_or(0, |&x| x + 1);
            for j in start..items as u32 {
                let mut t = s.clone();
                t.push(j);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Bid points for buyer `i`: `0`, `p ± ε`, `t ± t/2`, `2t` and each rival
/// bid together with its `± ε` neighbours.
pub fn bid_grid(inst: &AuctionInstance, i: u32, payment: &BigRational) -> Vec<BigRational> {
    let eps = BigRational::new(BigInt::from(1), BigInt::from(1_000_000_000u64));
    let t = inst.value(i).clone();
    let mut grid = vec![
        BigRational::zero(),
        payment + &eps,
        payment - &eps,
        &t * half(),
        &t * (BigRational::one() + half()),
        &t + &t,
    ];
    for x in 0..inst.buyers() as u32 {
        if x != i {
            let v = inst.value(x);
            grid.extend([v - &eps, v.clone(), v + &eps]);
        }
    }
    grid.retain(|b| *b >= BigRational::zero() && *b != t);
    grid.sort();
    grid.dedup();
    grid
}

/// Deviations under `mechanism` that raise a buyer's true utility above
/// truth-telling, plus negative truthful utilities (reported as deviations
/// to the empty report).
pub fn truthfulness_audit_with(
    inst: &AuctionInstance,
    grid: DeviationGrid,
    mechanism: &dyn Fn(&AuctionInstance, &ReportOverlay) -> Result<Outcome>,
) -> Result<Vec<AuctionViolation>> {
    let mut out = Vec::new();
    if !grid.sets && !grid.bids {
        return Ok(out);
    }
    let truth = mechanism(inst, &ReportOverlay::truthful())?;
    let truthful_utils = truth.utilities(inst);
    let candidate_sets = if grid.sets {
        subsets_up_to(inst.items, inst.k + 1)
    } else {
        Vec::new()
    };
    for i in 0..inst.buyers() as u32 {
        let base = truthful_utils[i as usize].clone();
        let mut overlays: Vec<ReportOverlay> = Vec::new();
        if grid.sets {
            for s in &candidate_sets {
                overlays.push(ReportOverlay::truthful().with_set(i, s.clone()));
            }
        }
        if grid.bids {
            for b in bid_grid(inst, i, &truth.payments[i as usize]) {
                overlays.push(ReportOverlay::truthful().with_bid(i, b));
            }
        }
        if base < BigRational::zero() {
            out.push(AuctionViolation {
                buyer: i,
                overlay: ReportOverlay::truthful(),
                truthful_utility: base.clone(),
                deviating_utility: BigRational::zero(),
            });
        }
        for overlay in overlays {
            let o = mechanism(inst, &overlay)?;
            let u = inst.award_value(i, &o.awards[i as usize]) - &o.payments[i as usize];
            if u > base {
                out.push(AuctionViolation {
                    buyer: i,
                    overlay,
                    truthful_utility: base.clone(),
                    deviating_utility: u,
                });
            }
        }
    }
    Ok(out)
}

pub fn truthfulness_audit(
    inst: &AuctionInstance,
    grid: DeviationGrid,
) -> Result<Vec<AuctionViolation>> {
    truthfulness_audit_with(inst, grid, &run)
}

/// For every winner with payment `p`: bidding `p + ε` still wins and, when
/// `p > 0`, bidding `p - ε` loses. Returns the buyers failing either test.
pub fn critical_payment_failures(inst: &AuctionInstance, eps: &BigRational) -> Result<Vec<u32>> {
    if inst.mode == AuctionMode::Uduv {
        return Err(invalid("unit-value mode has a fixed price"));
    }
    let truth = run(inst, &ReportOverlay::truthful())?;
    let awards_with = |i: u32, bid: BigRational| -> Result<bool> {
        let overlay = ReportOverlay::truthful().with_bid(i, bid);
        let reports = Reports::new(inst, &overlay)?;
        let sets = reports.all_sets();
        Ok(!greedy_by_bid(&reports, &sets, None)[i as usize].is_empty())
    };
    let mut bad = Vec::new();
    for i in truth.winners() {
        let p = &truth.payments[i as usize];
        let mut ok = awards_with(i, p + eps)?;
        if *p > BigRational::zero() && p > eps {
            ok &= !awards_with(i, p - eps)?;
        }
        if !ok {
            bad.push(i);
        }
    }
    Ok(bad)
}
