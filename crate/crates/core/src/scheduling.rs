//! Uniform jobs on machines with private integer capacities.
//!
//! Standard mode places each job on the emptiest of `d` random capacity
//! slots. Restricted mode places each job on a machine of its fixed choice
//! multiset, minimising the floored post-placement load `floor((h+1)/b)`.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::instance::{
    build_instance, capacity_prefix, slot_owner, standard_slot_lists, Family, InstanceSpec,
};
use crate::probe::{AdjacencyOracle, ProbeCounter};
use crate::query_tree::{arrives_before, QuerySession, QueryTree};
use crate::rng::{DrawKey, Purpose, RandomTape};

const RANK_DRAW: Purpose = Purpose::new("job-rank");
const TIE_DRAW: Purpose = Purpose::new("slot-tie");
const SAMPLE_DRAW: Purpose = Purpose::new("payment-sample");

pub(crate) fn ratio(num: u64, den: u64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchedulingMode {
    Standard,
    Restricted,
}

#[derive(Clone, Debug)]
pub struct SchedulingInstance {
    mode: SchedulingMode,
    bids: Vec<u64>,
    jobs: usize,
    d: usize,
    /// Standard: job -> capacity slots. Restricted: job -> machines.
    choices: AdjacencyOracle,
    /// `tie_rank[machine]`: smaller wins ties.
    tie_rank: Vec<u32>,
    start: Vec<u64>,
    tape: RandomTape,
    seeded_slots: bool,
    prefix: Vec<u64>,
}

impl SchedulingInstance {
    pub fn from_spec(spec: &InstanceSpec) -> Result<Self> {
        let mode = match spec.family {
            Family::SchedulingStd => SchedulingMode::Standard,
            Family::SchedulingRes => SchedulingMode::Restricted,
            other => return Err(invalid(format!("expected a scheduling spec, got {other}"))),
        };
        let bids = spec.capacities();
        let choices = build_instance(spec)?;
        Self::assemble(
            mode,
            bids,
            spec.m,
            spec.d,
            choices,
            spec.tape(),
            spec.explicit_edges.is_none(),
        )
    }

    /// Seeded standard-setting instance.
    pub fn standard(seed: u64, bids: Vec<u64>, jobs: usize, d: usize) -> Result<Self> {
        let mut spec = InstanceSpec::new(Family::SchedulingStd, seed, bids.len(), jobs, d);
        spec.bids = Some(bids);
        Self::from_spec(&spec)
    }

    /// Seeded restricted-setting instance with capacity-proportional choices.
    pub fn seeded_restricted(seed: u64, bids: Vec<u64>, jobs: usize, d: usize) -> Result<Self> {
        let mut spec = InstanceSpec::new(Family::SchedulingRes, seed, bids.len(), jobs, d);
        spec.bids = Some(bids);
        Self::from_spec(&spec)
    }

    /// Restricted instance with explicit choice multisets.
    pub fn restricted(seed: u64, bids: Vec<u64>, choices: Vec<Vec<u32>>) -> Result<Self> {
        if bids.is_empty() {
            return Err(invalid("at least one machine required"));
        }
        if bids.contains(&0) {
            return Err(invalid("capacities must be positive integers"));
        }
        let d = choices.iter().map(Vec::len).max().unwrap_or(0).max(1);
        let jobs = choices.len();
        let oracle = AdjacencyOracle::from_lists(bids.len(), &choices)?;
        Self::assemble(
            SchedulingMode::Restricted,
            bids,
            jobs,
            d,
            oracle,
            RandomTape::new(seed),
            false,
        )
    }

    fn assemble(
        mode: SchedulingMode,
        bids: Vec<u64>,
        jobs: usize,
        d: usize,
        choices: AdjacencyOracle,
        tape: RandomTape,
        seeded_slots: bool,
    ) -> Result<Self> {
        let n = bids.len();
        let prefix = capacity_prefix(&bids);
        if *prefix.last().unwrap() == 0 {
            return Err(invalid("total capacity B must be positive"));
        }
        Ok(SchedulingInstance {
            mode,
            bids,
            jobs,
            d,
            choices,
            tie_rank: (0..n as u32).collect(),
            start: vec![0; n],
            tape,
            seeded_slots,
            prefix,
        })
    }

    /// Tie-break permutation: `perm[r]` is the machine preferred at rank `r`.
    pub fn with_tie_perm(mut self, perm: &[u32]) -> Result<Self> {
        let n = self.machines();
        let mut rank = vec![u32::MAX; n];
        if perm.len() != n {
            return Err(invalid("tie permutation must list every machine once"));
        }
        for (r, &i) in perm.iter().enumerate() {
            let slot = rank
                .get_mut(i as usize)
                .ok_or_else(|| invalid(format!("unknown machine {i}")))?;
            if *slot != u32::MAX {
                return Err(invalid(format!("machine {i} repeated in tie permutation")));
            }
            *slot = r as u32;
        }
        self.tie_rank = rank;
        Ok(self)
    }

    /// Heights the machines hold before the first job arrives.
    pub fn with_start_heights(mut self, heights: &[u64]) -> Result<Self> {
        if heights.len() != self.machines() {
            return Err(invalid("one start height per machine required"));
        }
        self.start = heights.to_vec();
        Ok(self)
    }

    /// Same instance with machine `i` bidding `bid`. Standard-mode slot
    /// choices are re-derived from the same keys over the new slot count.
    pub fn with_bid(&self, i: u32, bid: u64) -> Result<Self> {
        if i as usize >= self.machines() {
            return Err(invalid(format!("unknown machine {i}")));
        }
        let mut out = self.clone();
        out.bids[i as usize] = bid;
        out.prefix = capacity_prefix(&out.bids);
        let total = out.total();
        if self.mode == SchedulingMode::Standard && bid != self.bids[i as usize] {
            if !self.seeded_slots {
                return Err(invalid(
                    "explicit standard slot choices cannot be re-derived",
                ));
            }
            if total == 0 {
                return Err(invalid("total capacity B must be positive"));
            }
            let lists = standard_slot_lists(&self.tape, self.jobs, self.d, total);
            out.choices = AdjacencyOracle::from_lists(total as usize, &lists)?;
        }
        Ok(out)
    }

    pub fn mode(&self) -> SchedulingMode {
        self.mode
    }

    pub fn machines(&self) -> usize {
        self.bids.len()
    }

    pub fn jobs(&self) -> usize {
        self.jobs
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn bids(&self) -> &[u64] {
        &self.bids
    }

    pub fn seed(&self) -> u64 {
        self.tape.seed()
    }

    /// `B`, the sum of all bids.
    pub fn total(&self) -> u64 {
        *self.prefix.last().unwrap()
    }

    /// `B` minus machine `i`'s bid.
    pub fn others_total(&self, i: u32) -> u64 {
        self.total() - self.bids[i as usize]
    }

    pub fn oracle(&self) -> &AdjacencyOracle {
        &self.choices
    }

    /// Slots (standard) or machines (restricted) offered to `job`.
    pub fn choices(&self, job: u32) -> &[u32] {
        self.choices.forward_raw(job)
    }

    pub fn slot_machine(&self, slot: u32) -> u32 {
        slot_owner(&self.prefix, slot as u64)
    }

    fn rank_key(&self, job: u32) -> u64 {
        self.tape
            .word(DrawKey::with_purpose(RANK_DRAW, job as u64, 0))
    }

    fn require(&self, mode: SchedulingMode) -> Result<()> {
        if self.mode != mode {
            return Err(invalid(format!("operation needs {mode:?} mode")));
        }
        Ok(())
    }

    fn check_job(&self, job: u32) -> Result<()> {
        if job as usize >= self.jobs {
            return Err(invalid(format!("unknown job {job}")));
        }
        Ok(())
    }
}

/// Simulated arrival order used by the local evaluations.
pub fn arrival_order(inst: &SchedulingInstance) -> Vec<u32> {
    let mut order: Vec<u32> = (0..inst.jobs as u32).collect();
    order.sort_by_key(|&j| (inst.rank_key(j), j));
    order
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Allocation {
    /// Machine per job; `None` only when every listed machine bids zero.
    pub assign: Vec<Option<u32>>,
    pub heights: Vec<u64>,
    pub caps: Vec<u64>,
}

impl Allocation {
    pub fn load(&self, i: usize) -> BigRational {
        if self.caps[i] == 0 {
            return BigRational::zero();
        }
        ratio(self.heights[i], self.caps[i])
    }

    pub fn makespan(&self) -> BigRational {
        (0..self.heights.len())
            .map(|i| self.load(i))
            .max()
            .unwrap_or_else(BigRational::zero)
    }

    pub fn placed(&self) -> u64 {
        self.assign.iter().filter(|a| a.is_some()).count() as u64
    }
}

fn pick_slot(tape: &RandomTape, job: u32, choices: &[u32], load: impl Fn(u32) -> u64) -> u32 {
    let best = choices
        .iter()
        .map(|&s| load(s))
        .min()
        .expect("job has choices");
    let mut tied: Vec<u32> = Vec::with_capacity(choices.len());
    for &s in choices {
        if load(s) == best && !tied.contains(&s) {
            tied.push(s);
        }
    }
    if tied.len() == 1 {
        return tied[0];
    }
    let pick = tape.below(
        DrawKey::with_purpose(TIE_DRAW, job as u64, 0),
        tied.len() as u64,
    );
    tied[pick as usize]
}

/// Standard mode in job index order.
pub fn slms_online(inst: &SchedulingInstance) -> Result<Allocation> {
    let order: Vec<u32> = (0..inst.jobs as u32).collect();
    slms_online_ordered(inst, &order)
}

/// Standard mode with jobs arriving in `order`.
pub fn slms_online_ordered(inst: &SchedulingInstance, order: &[u32]) -> Result<Allocation> {
    inst.require(SchedulingMode::Standard)?;
    let mut slot_heights = vec![0u64; inst.total() as usize];
    let mut heights = inst.start.clone();
    let mut assign = vec![None; inst.jobs];
    for &j in order {
        inst.check_job(j)?;
        let choices = inst.choices(j);
        if choices.is_empty() {
            return Err(invalid(format!("job {j} has no slot choices")));
        }
        let slot = pick_slot(&inst.tape, j, choices, |s| slot_heights[s as usize]);
        slot_heights[slot as usize] += 1;
        let owner = inst.slot_machine(slot);
        heights[owner as usize] += 1;
        assign[j as usize] = Some(owner);
    }
    Ok(Allocation {
        assign,
        heights,
        caps: inst.bids.clone(),
    })
}

struct SlmsTree<'a> {
    inst: &'a SchedulingInstance,
}

impl QueryTree for SlmsTree<'_> {
    type Answer = u32;
    type Frame = (Vec<u32>, HashMap<u32, Vec<u32>>);

    fn expand(&self, job: u32, counter: &mut ProbeCounter) -> (Self::Frame, Vec<u32>) {
        let inst = self.inst;
        let choices = inst.choices.forward(job, counter).to_vec();
        let key = inst.rank_key(job);
        let mut earlier: HashMap<u32, Vec<u32>> = HashMap::new();
        let mut deps = Vec::new();
        for &s in &choices {
            if earlier.contains_key(&s) {
                continue;
            }
            let before: Vec<u32> = inst
                .choices
                .reverse(s, counter)
                .iter()
                .copied()
                .filter(|&o| arrives_before(inst.rank_key(o), o, key, job))
                .collect();
            deps.extend_from_slice(&before);
            earlier.insert(s, before);
        }
        deps.sort_unstable();
        deps.dedup();
        ((choices, earlier), deps)
    }

    fn resolve(&self, job: u32, frame: &Self::Frame, solved: &HashMap<u32, u32>) -> u32 {
        let (choices, earlier) = frame;
        pick_slot(&self.inst.tape, job, choices, |s| {
            earlier[&s].iter().filter(|o| solved[*o] == s).count() as u64
        })
    }
}

/// Machine that `job` receives in the standard mechanism run in
/// [`arrival_order`], computed from the job's dependency region only.
pub fn slms_local(inst: &SchedulingInstance, job: u32, counter: &mut ProbeCounter) -> Result<u32> {
    inst.require(SchedulingMode::Standard)?;
    inst.check_job(job)?;
    if inst.start.iter().any(|&h| h != 0) {
        return Err(invalid("local evaluation assumes empty machines"));
    }
    let tree = SlmsTree { inst };
    let slot = QuerySession::new(&tree).answer(job, counter);
    Ok(inst.slot_machine(slot))
}

/// How the greedy compares candidate machines.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoadRule {
    /// `floor((h+1)/b)`, the restricted-setting mechanism.
    Floored,
    /// `(h+1)/b` without flooring.
    Exact,
}

fn pick_machine(
    inst: &SchedulingInstance,
    rule: LoadRule,
    choices: &[u32],
    height: impl Fn(u32) -> u64,
) -> Option<u32> {
    let mut best: Option<u32> = None;
    for &i in choices {
        let b = inst.bids[i as usize];
        if b == 0 {
            continue;
        }
        let Some(cur) = best else {
            best = Some(i);
            continue;
        };
        let (hi, hc, bc) = (height(i) + 1, height(cur) + 1, inst.bids[cur as usize]);
        let ord = match rule {
            LoadRule::Floored => (hi / b).cmp(&(hc / bc)),
            LoadRule::Exact => (hi as u128 * bc as u128).cmp(&(hc as u128 * b as u128)),
        };
        let wins = ord
            .then(inst.tie_rank[i as usize].cmp(&inst.tie_rank[cur as usize]))
            .is_lt();
        if wins {
            best = Some(i);
        }
    }
    best
}

fn greedy_run(
    inst: &SchedulingInstance,
    rule: LoadRule,
    order: &[u32],
    mut on_place: impl FnMut(&[u64]),
) -> Result<Allocation> {
    inst.require(SchedulingMode::Restricted)?;
    let mut heights = inst.start.clone();
    let mut assign = vec![None; inst.jobs];
    for &j in order {
        inst.check_job(j)?;
        let choices = inst.choices(j);
        if choices.is_empty() {
            return Err(invalid(format!("job {j} has an empty choice set")));
        }
        let pick = pick_machine(inst, rule, choices, |i| heights[i as usize]);
        if let Some(i) = pick {
            heights[i as usize] += 1;
        }
        assign[j as usize] = pick;
        on_place(&heights);
    }
    Ok(Allocation {
        assign,
        heights,
        caps: inst.bids.clone(),
    })
}

/// Restricted mechanism in job index order.
pub fn rlms_online(inst: &SchedulingInstance) -> Result<Allocation> {
    let order: Vec<u32> = (0..inst.jobs as u32).collect();
    greedy_run(inst, LoadRule::Floored, &order, |_| {})
}

pub fn rlms_online_ordered(inst: &SchedulingInstance, order: &[u32]) -> Result<Allocation> {
    greedy_run(inst, LoadRule::Floored, order, |_| {})
}

/// Load greedy without flooring, ties by the tie permutation.
pub fn greedy_unmodified(inst: &SchedulingInstance) -> Result<Allocation> {
    let order: Vec<u32> = (0..inst.jobs as u32).collect();
    greedy_run(inst, LoadRule::Exact, &order, |_| {})
}

struct RlmsTree<'a> {
    inst: &'a SchedulingInstance,
}

impl QueryTree for RlmsTree<'_> {
    type Answer = Option<u32>;
    type Frame = (Vec<u32>, HashMap<u32, Vec<u32>>);

    fn expand(&self, job: u32, counter: &mut ProbeCounter) -> (Self::Frame, Vec<u32>) {
        let inst = self.inst;
        let choices = inst.choices.forward(job, counter).to_vec();
        let key = inst.rank_key(job);
        let mut earlier: HashMap<u32, Vec<u32>> = HashMap::new();
        let mut deps = Vec::new();
        for &i in &choices {
            if earlier.contains_key(&i) || inst.bids[i as usize] == 0 {
                continue;
            }
            let before: Vec<u32> = inst
                .choices
                .reverse(i, counter)
                .iter()
                .copied()
                .filter(|&o| arrives_before(inst.rank_key(o), o, key, job))
                .collect();
            deps.extend_from_slice(&before);
            earlier.insert(i, before);
        }
        deps.sort_unstable();
        deps.dedup();
        ((choices, earlier), deps)
    }

    fn resolve(
        &self,
        _: u32,
        frame: &Self::Frame,
        solved: &HashMap<u32, Option<u32>>,
    ) -> Option<u32> {
        let (choices, earlier) = frame;
        pick_machine(self.inst, LoadRule::Floored, choices, |i| {
            self.inst.start[i as usize]
                + earlier[&i].iter().filter(|o| solved[*o] == Some(i)).count() as u64
        })
    }
}

/// Machine that `job` receives in the restricted mechanism run in
/// [`arrival_order`], computed from the job's dependency region only.
pub fn rlms_local(
    inst: &SchedulingInstance,
    job: u32,
    counter: &mut ProbeCounter,
) -> Result<Option<u32>> {
    inst.require(SchedulingMode::Restricted)?;
    inst.check_job(job)?;
    if inst.choices(job).is_empty() {
        return Err(invalid(format!("job {job} has an empty choice set")));
    }
    let tree = RlmsTree { inst };
    Ok(QuerySession::new(&tree).answer(job, counter))
}

/// Per-job differences in machine heights between a run with machine `i`
/// bidding `raised` and one with it bidding `bid`: entry `[t][k]` is jobs on
/// `k` among the first `t + 1` jobs under `raised` minus under `bid`.
pub fn monotonicity_trace(
    inst: &SchedulingInstance,
    i: u32,
    bid: u64,
    raised: u64,
    rule: LoadRule,
) -> Result<Vec<Vec<i64>>> {
    if raised < bid {
        return Err(invalid("raised bid must be at least the base bid"));
    }
    let order: Vec<u32> = (0..inst.jobs as u32).collect();
    let mut base: Vec<Vec<u64>> = Vec::with_capacity(inst.jobs);
    greedy_run(&inst.with_bid(i, bid)?, rule, &order, |h| {
        base.push(h.to_vec())
    })?;
    let mut trace = Vec::with_capacity(inst.jobs);
    let mut t = 0;
    greedy_run(&inst.with_bid(i, raised)?, rule, &order, |h| {
        trace.push(
            h.iter()
                .zip(&base[t])
                .map(|(&a, &b)| a as i64 - b as i64)
                .collect(),
        );
        t += 1;
    })?;
    Ok(trace)
}

/// Whether a trace has `D(k) > 0` for some `k != i` or `D(i) < 0`.
pub fn trace_violates(trace: &[Vec<i64>], i: u32) -> bool {
    trace.iter().any(|row| {
        row.iter()
            .enumerate()
            .any(|(k, &v)| if k as u32 == i { v < 0 } else { v > 0 })
    })
}

/// Makespan of [`rlms_online`] over the optimal makespan for the bids.
pub fn makespan_ratio(inst: &SchedulingInstance) -> Result<BigRational> {
    let alloc = rlms_online(inst)?;
    let opt = crate::oracles::optimal_makespan(inst, inst.bids())?;
    if opt.is_zero() {
        return Ok(BigRational::one());
    }
    Ok(alloc.makespan() / opt)
}

/// `m * b / (B_-i + b)`.
pub fn expected_height(bid: u64, others: u64, jobs: u64) -> Result<BigRational> {
    if bid + others == 0 {
        return Err(invalid("total capacity must be positive"));
    }
    Ok(ratio(jobs * bid, others + bid))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PaymentScheme {
    ExpectedClosedForm,
    SampledUnbiased,
    RerunSum,
}

/// Payment formula applied to the height curve `h(x)` of a machine.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PaymentRule {
    /// `b h(b) + sum_{x=0}^{b} h(x)`.
    #[default]
    HeightSum,
    /// `h(b)/b + sum_{x=1}^{b-1} h(x)/(x(x+1))`, the threshold payment for
    /// utility `p - h/c`.
    LoadCritical,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PaymentRecord {
    pub machine: u32,
    pub payment: BigRational,
    pub scheme: PaymentScheme,
    pub rule: PaymentRule,
}

/// Applies `rule` to heights `curve[x]` for bids `x = 0..=bid`.
pub fn payment_from_curve<T>(rule: PaymentRule, bid: u64, curve: &[T]) -> BigRational
where
    T: Clone + Into<BigRational>,
{
    let h = |x: u64| -> BigRational { curve[x as usize].clone().into() };
    match rule {
        PaymentRule::HeightSum => {
            let mut p = h(bid) * BigRational::from_integer(BigInt::from(bid));
            for x in 0..=bid {
                p += h(x);
            }
            p
        }
        PaymentRule::LoadCritical => {
            if bid == 0 {
                return BigRational::zero();
            }
            let mut p = h(bid) / BigRational::from_integer(BigInt::from(bid));
            for x in 1..bid {
                p += h(x) / BigRational::from_integer(BigInt::from(x * (x + 1)));
            }
            p
        }
    }
}

fn check_machine(inst: &SchedulingInstance, i: u32) -> Result<()> {
    if i as usize >= inst.machines() {
        return Err(invalid(format!("unknown machine {i}")));
    }
    Ok(())
}

/// Closed-form payment from the expected height curve of the standard mode.
pub fn payment_slms_expected(
    inst: &SchedulingInstance,
    i: u32,
    rule: PaymentRule,
) -> Result<PaymentRecord> {
    inst.require(SchedulingMode::Standard)?;
    check_machine(inst, i)?;
    let (bid, others, m) = (
        inst.bids[i as usize],
        inst.others_total(i),
        inst.jobs as u64,
    );
    let curve: Vec<BigRational> = (0..=bid)
        .map(|x| {
            if x + others == 0 {
                BigRational::zero()
            } else {
                ratio(m * x, others + x)
            }
        })
        .collect();
    Ok(PaymentRecord {
        machine: i,
        payment: payment_from_curve(rule, bid, &curve),
        scheme: PaymentScheme::ExpectedClosedForm,
        rule,
    })
}

/// Range of the sampled index for `rule` at bid `bid`.
pub fn sample_range(rule: PaymentRule, bid: u64) -> u64 {
    match rule {
        PaymentRule::HeightSum => bid.max(1),
        PaymentRule::LoadCritical => bid.saturating_sub(1).max(1),
    }
}

/// Unbiased single-sample payment: the sum over the height curve is
/// replaced by one uniformly drawn term, scaled. `draw` selects the sample.
pub fn payment_slms_sampled(
    inst: &SchedulingInstance,
    i: u32,
    draw: u64,
    rule: PaymentRule,
) -> Result<PaymentRecord> {
    check_machine(inst, i)?;
    let range = sample_range(rule, inst.bids[i as usize]);
    let k = 1 + inst
        .tape
        .below(DrawKey::with_purpose(SAMPLE_DRAW, i as u64, draw), range);
    payment_slms_sampled_at(inst, i, k, rule)
}

/// The sampled payment for a given draw `k` in `1..=sample_range`.
pub fn payment_slms_sampled_at(
    inst: &SchedulingInstance,
    i: u32,
    k: u64,
    rule: PaymentRule,
) -> Result<PaymentRecord> {
    inst.require(SchedulingMode::Standard)?;
    check_machine(inst, i)?;
    let (bid, others, m) = (
        inst.bids[i as usize],
        inst.others_total(i),
        inst.jobs as u64,
    );
    if k == 0 || k > sample_range(rule, bid) {
        return Err(invalid(format!("sample index {k} out of range")));
    }
    let total = others + bid;
    let payment = match rule {
        PaymentRule::HeightSum => ratio(m * bid * bid, total) + ratio(m * bid * k, others + k),
        PaymentRule::LoadCritical => {
            let head = ratio(m, total);
            if bid <= 1 {
                head
            } else {
                head + ratio(m * (bid - 1), (others + k) * (k + 1))
            }
        }
    };
    Ok(PaymentRecord {
        machine: i,
        payment,
        scheme: PaymentScheme::SampledUnbiased,
        rule,
    })
}

/// Heights of machine `i` in restricted reruns with its bid set to each of
/// `0..=upto`; bid zero excludes the machine.
pub fn height_curve(inst: &SchedulingInstance, i: u32, upto: u64) -> Result<Vec<u64>> {
    check_machine(inst, i)?;
    (0..=upto)
        .map(|x| Ok(rlms_online(&inst.with_bid(i, x)?)?.heights[i as usize]))
        .collect()
}

/// Rerun payment for machine `i` in the restricted mechanism.
pub fn payment_rlms(inst: &SchedulingInstance, i: u32, rule: PaymentRule) -> Result<PaymentRecord> {
    inst.require(SchedulingMode::Restricted)?;
    let bid = inst
        .bids
        .get(i as usize)
        .copied()
        .ok_or_else(|| invalid(format!("unknown machine {i}")))?;
    let curve: Vec<BigInt> = height_curve(inst, i, bid)?
        .into_iter()
        .map(BigInt::from)
        .collect();
    Ok(PaymentRecord {
        machine: i,
        payment: payment_from_curve(rule, bid, &curve),
        scheme: PaymentScheme::RerunSum,
        rule,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BidDeviation {
    pub machine: u32,
    pub capacity: u64,
    pub bid: u64,
    pub truthful_utility: BigRational,
    pub deviating_utility: BigRational,
}

/// Every bid in `0..=2c` that earns machine `i` (true capacity `c`, its
/// current bid) strictly more than truth-telling under the rerun payment.
/// Also reports truthful utilities below zero as deviations to bid 0.
pub fn rlms_truthfulness_audit(
    inst: &SchedulingInstance,
    rule: PaymentRule,
) -> Result<Vec<BidDeviation>> {
    inst.require(SchedulingMode::Restricted)?;
    let mut out = Vec::new();
    for i in 0..inst.machines() as u32 {
        let cap = inst.bids[i as usize];
        let curve: Vec<BigInt> = height_curve(inst, i, 2 * cap)?
            .into_iter()
            .map(BigInt::from)
            .collect();
        let utility = |x: u64| {
            payment_from_curve(rule, x, &curve[..=x as usize])
                - BigRational::new(curve[x as usize].clone(), BigInt::from(cap))
        };
        let truth = utility(cap);
        for x in 0..=2 * cap {
            let u = utility(x);
            if u > truth || (x == 0 && truth < BigRational::zero()) {
                out.push(BidDeviation {
                    machine: i,
                    capacity: cap,
                    bid: x,
                    truthful_utility: truth.clone(),
                    deviating_utility: u,
                });
            }
        }
    }
    Ok(out)
}

/// Expected utility `p(x) - E[h(x)]/c` of machine `i` with true capacity
/// `cap` bidding `x` under the closed-form standard-mode payment.
pub fn slms_expected_utility(
    inst: &SchedulingInstance,
    i: u32,
    cap: u64,
    x: u64,
    rule: PaymentRule,
) -> Result<BigRational> {
    if cap == 0 {
        return Err(invalid("true capacity must be positive"));
    }
    if x == 0 {
        check_machine(inst, i)?;
        return Ok(BigRational::zero());
    }
    let dev = inst.with_bid(i, x)?;
    let p = payment_slms_expected(&dev, i, rule)?.payment;
    let h = expected_height(x, dev.others_total(i), dev.jobs as u64)?;
    Ok(p - h / BigRational::from_integer(BigInt::from(cap)))
}
