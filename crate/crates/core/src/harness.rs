//! Experiment orchestration behind the `lcmd` binary: instance generation,
//! single queries, invariant suites and probe benchmarks.

use std::fmt::Write as _;
use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::auctions::{
    self, AuctionInstance, AuctionMode, AuctionQuery, LocalAnswer, ReportOverlay,
};
use crate::error::{invalid, Result};
use crate::instance::{build_instance, sample_distinct, Family, InstanceSpec};
use crate::oracles;
use crate::probe::ProbeCounter;
use crate::rng::{digest, Purpose};
use crate::rsd::{self, HousingInstance};
use crate::scheduling::{self, LoadRule, PaymentRule, SchedulingInstance};
use crate::stable_matching::{self as sm, ManStatus, MatchingInstance};

const QUERY_DRAW: Purpose = Purpose::new("bench-query");

/// Thread pool sized by `LCMD_THREADS` when set.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("LCMD_THREADS") {
        let t: usize = v.trim().parse().map_err(|_| {
            invalid(format!(
                "LCMD_THREADS must be a positive integer, got {v:?}"
            ))
        })?;
        builder = builder.num_threads(t.max(1));
    }
    builder
        .build()
        .map_err(|e| invalid(format!("thread pool: {e}")))
}

pub fn default_k(family: Family) -> usize {
    match family {
        Family::Matching => 3,
        Family::Uduv | Family::Udubv | Family::Ksmb => 2,
        _ => 1,
    }
}

pub fn default_d(family: Family) -> usize {
    match family {
        Family::Housing => 3,
        _ => 2,
    }
}

/// Spec for one benchmark or verification cell: `n` entities on each side.
pub fn cell_spec(family: Family, seed: u64, n: usize, k: usize, d: usize) -> InstanceSpec {
    let mut spec = InstanceSpec::new(family, seed, n, n, 1);
    spec.k = k;
    spec.d = d;
    spec
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub family: Family,
    pub n_grid: Vec<usize>,
    pub seeds: u64,
    pub first_seed: u64,
    pub queries: usize,
    pub k: usize,
    pub d: usize,
    /// Matching rounds; `2k^2` when absent.
    pub rounds: Option<u32>,
    /// Matching rounds from an accuracy target, used when `rounds` is absent.
    pub eps: Option<f64>,
    pub rule: PaymentRule,
    /// Record wall time per query; off keeps the CSV reproducible.
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn new(family: Family, n_grid: Vec<usize>) -> Self {
        ExperimentConfig {
            family,
            n_grid,
            seeds: 1,
            first_seed: 1,
            queries: 100,
            k: default_k(family),
            d: default_d(family),
            rounds: None,
            eps: None,
            rule: PaymentRule::default(),
            timing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() {
            return Err(invalid("n grid must not be empty"));
        }
        if self.n_grid.contains(&0) {
            return Err(invalid("grid sizes must be at least 1"));
        }
        if self.seeds == 0 {
            return Err(invalid("at least one seed required"));
        }
        Ok(())
    }

    fn rounds(&self) -> Result<u32> {
        match (self.rounds, self.eps) {
            (Some(r), _) => Ok(r),
            (None, Some(e)) => sm::rounds_for_epsilon(self.k, e),
            (None, None) => Ok(sm::default_rounds(self.k)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub family: Family,
    pub n: usize,
    pub seed: u64,
    pub query: u32,
    pub probes: u64,
    pub wall_ns: u64,
    pub digest: u64,
}

fn answer_digest(answer: &impl std::fmt::Debug) -> u64 {
    digest(format!("{answer:?}").as_bytes())
}

fn bench_cell(cfg: &ExperimentConfig, n: usize, seed: u64) -> Result<Vec<BenchRecord>> {
    let spec = cell_spec(cfg.family, seed, n, cfg.k, cfg.d);
    let left = spec.left_count();
    let count = cfg.queries.min(left);
    let mut ids = sample_distinct(&spec.tape(), QUERY_DRAW, n as u64, count, left as u64);
    ids.sort_unstable();
    let rounds = cfg.rounds()?;
    enum Built {
        Matching(MatchingInstance),
        Scheduling(SchedulingInstance),
        Auction(AuctionInstance),
        Housing(HousingInstance),
    }
    let built = match cfg.family {
        Family::Matching => Built::Matching(MatchingInstance::from_spec(&spec)?),
        Family::SchedulingStd | Family::SchedulingRes => {
            Built::Scheduling(SchedulingInstance::from_spec(&spec)?)
        }
        Family::Uduv | Family::Udubv | Family::Ksmb => {
            Built::Auction(AuctionInstance::from_spec(&spec)?)
        }
        Family::Housing => Built::Housing(HousingInstance::from_spec(&spec)?),
    };
    let truthful = ReportOverlay::truthful();
    ids.into_iter()
        .map(|q| {
            let mut counter = ProbeCounter::new();
            let start = cfg.timing.then(Instant::now);
            let d = match &built {
                Built::Matching(inst) => {
                    answer_digest(&sm::local_ags(inst, rounds, q, &mut counter)?)
                }
                Built::Scheduling(inst) => match cfg.family {
                    Family::SchedulingStd => {
                        answer_digest(&scheduling::slms_local(inst, q, &mut counter)?)
                    }
                    _ => answer_digest(&scheduling::rlms_local(inst, q, &mut counter)?),
                },
                Built::Auction(inst) => answer_digest(&auctions::local(
                    inst,
                    &truthful,
                    AuctionQuery::Buyer(q),
                    &mut counter,
                )?),
                Built::Housing(inst) => answer_digest(&rsd::rsd_local(inst, q, &mut counter)?),
            };
            Ok(BenchRecord {
                family: cfg.family,
                n,
                seed,
                query: q,
                probes: counter.probes(),
                wall_ns: start.map_or(0, |s| s.elapsed().as_nanos() as u64),
                digest: d,
            })
        })
        .collect()
}

/// Local queries over the grid, sorted by (family, n, seed, query).
pub fn bench(cfg: &ExperimentConfig) -> Result<Vec<BenchRecord>> {
    cfg.validate()?;
    let cells: Vec<(usize, u64)> = cfg
        .n_grid
        .iter()
        .flat_map(|&n| (0..cfg.seeds).map(move |s| (n, cfg.first_seed + s)))
        .collect();
    let pool = thread_pool()?;
    let parts: Vec<Result<Vec<BenchRecord>>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(n, s)| bench_cell(cfg, n, s))
            .collect()
    });
    let mut out = Vec::new();
    for p in parts {
        out.extend(p?);
    }
    out.sort_by(|a, b| {
        (a.family.as_str(), a.n, a.seed, a.query).cmp(&(b.family.as_str(), b.n, b.seed, b.query))
    });
    Ok(out)
}

pub const BENCH_HEADER: &str = "family,n,seed,query,probes,wall_ns,digest";

pub fn bench_csv(records: &[BenchRecord]) -> String {
    let mut s = String::with_capacity(records.len() * 48);
    s.push_str(BENCH_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{:016x}",
            r.family, r.n, r.seed, r.query, r.probes, r.wall_ns, r.digest
        );
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub family: Family,
    pub n: usize,
    pub queries: usize,
    pub median: u64,
    pub p99: u64,
    pub max: u64,
}

fn percentile(sorted: &[u64], q: f64) -> u64 {
    let idx = ((sorted.len() as f64 - 1.0) * q).round() as usize;
    sorted[idx.min(sorted.len() - 1)]
}

pub fn summarize(records: &[BenchRecord]) -> Vec<BenchSummary> {
    let mut groups: std::collections::BTreeMap<(&str, usize), (Family, Vec<u64>)> =
        Default::default();
    for r in records {
        groups
            .entry((r.family.as_str(), r.n))
            .or_insert_with(|| (r.family, Vec::new()))
            .1
            .push(r.probes);
    }
    groups
        .into_iter()
        .map(|((_, n), (family, mut p))| {
            p.sort_unstable();
            BenchSummary {
                family,
                n,
                queries: p.len(),
                median: percentile(&p, 0.5),
                p99: percentile(&p, 0.99),
                max: *p.last().unwrap(),
            }
        })
        .collect()
}

/// Least-squares fits of the per-(n, seed) maximum probe count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub points: usize,
    /// Slope of `ln max` against `ln n`.
    pub power_exponent: f64,
    /// Slope of `ln max` against `ln ln n`.
    pub polylog_exponent: f64,
    /// `c` in `max ≈ c ln n`, fitted through the origin.
    pub log_constant: f64,
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

pub fn growth_fit(records: &[BenchRecord], family: Family) -> Option<GrowthFit> {
    let mut peaks: std::collections::BTreeMap<(usize, u64), u64> = Default::default();
    for r in records.iter().filter(|r| r.family == family) {
        let e = peaks.entry((r.n, r.seed)).or_insert(0);
        *e = (*e).max(r.probes);
    }
    let distinct_n: std::collections::BTreeSet<usize> = peaks.keys().map(|k| k.0).collect();
    if distinct_n.len() < 2 || distinct_n.iter().any(|&n| n < 3) {
        return None;
    }
    let ln_n: Vec<f64> = peaks.keys().map(|k| (k.0 as f64).ln()).collect();
    let lnln_n: Vec<f64> = ln_n.iter().map(|x| x.ln()).collect();
    let ln_max: Vec<f64> = peaks.values().map(|&p| (p.max(1) as f64).ln()).collect();
    let sxy: f64 = peaks
        .iter()
        .map(|(k, &p)| p as f64 * (k.0 as f64).ln())
        .sum();
    let sxx: f64 = ln_n.iter().map(|x| x * x).sum();
    Some(GrowthFit {
        points: peaks.len(),
        power_exponent: slope(&ln_n, &ln_max),
        polylog_exponent: slope(&lnln_n, &ln_max),
        log_constant: sxy / sxx,
    })
}

pub fn summary_text(records: &[BenchRecord]) -> String {
    let mut s = String::from("family,n,queries,median,p99,max\n");
    for b in summarize(records) {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            b.family, b.n, b.queries, b.median, b.p99, b.max
        );
    }
    let families: std::collections::BTreeSet<&str> =
        records.iter().map(|r| r.family.as_str()).collect();
    for f in families {
        let family: Family = f.parse().expect("known family");
        if let Some(fit) = growth_fit(records, family) {
            let _ = writeln!(
                s,
                "# fit {f}: points={} power_exponent={:.4} polylog_exponent={:.4} log_constant={:.4}",
                fit.points, fit.power_exponent, fit.polylog_exponent, fit.log_constant
            );
        }
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Matching,
    Scheduling,
    Auctions,
    Rsd,
    Majorization,
}

impl std::str::FromStr for Suite {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "matching" => Ok(Suite::Matching),
            "scheduling" => Ok(Suite::Scheduling),
            "auctions" | "auction" => Ok(Suite::Auctions),
            "rsd" | "housing" => Ok(Suite::Rsd),
            "majorization" => Ok(Suite::Majorization),
            _ => Err(invalid(format!("unknown suite {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub suite: Suite,
    pub n: usize,
    /// Right-side size; `n` when absent.
    pub m: Option<usize>,
    pub k: Option<usize>,
    pub d: Option<usize>,
    pub seeds: u64,
    pub first_seed: u64,
    pub rounds: Option<u32>,
}

impl VerifyConfig {
    pub fn new(suite: Suite, n: usize, seeds: u64) -> Self {
        VerifyConfig {
            suite,
            n,
            m: None,
            k: None,
            d: None,
            seeds,
            first_seed: 1,
            rounds: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvariantRow {
    pub name: String,
    pub instances: u64,
    pub violations: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub rows: Vec<InvariantRow>,
    /// `name,seed,detail` per violation.
    pub failures: Vec<String>,
}

impl VerifyReport {
    pub fn clean(&self) -> bool {
        self.rows.iter().all(|r| r.violations == 0)
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("name,instances,violations\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{}", r.name, r.instances, r.violations);
        }
        s
    }

    /// Empty when clean, otherwise a header and one row per violation.
    pub fn failures_csv(&self) -> String {
        if self.failures.is_empty() {
            return String::new();
        }
        let mut s = String::from("name,seed,detail\n");
        for f in &self.failures {
            s.push_str(f);
            s.push('\n');
        }
        s
    }

    fn check(&mut self, name: &str, seed: u64, ok: bool, detail: impl FnOnce() -> String) {
        let row = match self.rows.iter_mut().find(|r| r.name == name) {
            Some(r) => r,
            None => {
                self.rows.push(InvariantRow {
                    name: name.to_string(),
                    instances: 0,
                    violations: 0,
                });
                self.rows.last_mut().unwrap()
            }
        };
        row.instances += 1;
        if !ok {
            row.violations += 1;
            self.failures
                .push(format!("{name},{seed},{}", detail().replace(',', ";")));
        }
    }

    fn merge(&mut self, other: VerifyReport) {
        for r in other.rows {
            match self.rows.iter_mut().find(|x| x.name == r.name) {
                Some(x) => {
                    x.instances += r.instances;
                    x.violations += r.violations;
                }
                None => self.rows.push(r),
            }
        }
        self.failures.extend(other.failures);
    }
}

/// Runs the invariant suite over every seed; rows keep first-seen order.
pub fn verify(cfg: &VerifyConfig) -> Result<VerifyReport> {
    if cfg.seeds == 0 || cfg.n == 0 {
        return Err(invalid("n and seeds must be at least 1"));
    }
    let pool = thread_pool()?;
    let seeds: Vec<u64> = (0..cfg.seeds).map(|s| cfg.first_seed + s).collect();
    let parts: Vec<Result<VerifyReport>> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| match cfg.suite {
                Suite::Matching => verify_matching(cfg, seed),
                Suite::Scheduling => verify_scheduling(cfg, seed),
                Suite::Auctions => verify_auctions(cfg, seed),
                Suite::Rsd => verify_rsd(cfg, seed),
                Suite::Majorization => verify_majorization(cfg, seed),
            })
            .collect()
    });
    let mut report = VerifyReport::default();
    for p in parts {
        report.merge(p?);
    }
    Ok(report)
}

fn verify_matching(cfg: &VerifyConfig, seed: u64) -> Result<VerifyReport> {
    let k = cfg.k.unwrap_or(3);
    let mut spec = InstanceSpec::new(Family::Matching, seed, cfg.n, cfg.m.unwrap_or(cfg.n), k);
    spec.k = k;
    let inst = MatchingInstance::from_spec(&spec)?;
    let rounds = cfg.rounds.unwrap_or_else(|| sm::default_rounds(k));
    let mut r = VerifyReport::default();
    let global = sm::global_gs(&inst);
    let global_pairs = sm::blocking_pairs(&inst, &global)?;
    r.check("global_stable", seed, global_pairs.is_empty(), || {
        format!("{} blocking pairs", global_pairs.len())
    });
    let ags = sm::abridged_gs(&inst, rounds)?;
    match sm::blocking_pairs(&inst, &ags.statuses) {
        Ok(p) => {
            r.check("abridged_injective", seed, true, String::new);
            r.check(
                "abridged_stable_among_qualified",
                seed,
                p.is_empty(),
                || format!("{} blocking pairs", p.len()),
            );
        }
        Err(e) => r.check("abridged_injective", seed, false, || e.to_string()),
    }
    let mismatches = (0..inst.men() as u32)
        .filter(|&m| {
            let mut c = ProbeCounter::new();
            sm::local_ags(&inst, rounds, m, &mut c).ok() != Some(ags.statuses[m as usize])
        })
        .count();
    r.check("local_equals_abridged", seed, mismatches == 0, || {
        format!("{mismatches} men differ")
    });
    let mut partner = vec![None; inst.women()];
    for (m, s) in ags.statuses.iter().enumerate() {
        if let ManStatus::Matched(w) = s {
            partner[*w as usize] = Some(m as u32);
        }
    }
    let woman_bad = (0..inst.women() as u32)
        .filter(|&w| {
            let mut c = ProbeCounter::new();
            sm::local_ags_woman(&inst, rounds, w, &mut c).ok() != Some(partner[w as usize])
        })
        .count();
    r.check("woman_side_agrees", seed, woman_bad == 0, || {
        format!("{woman_bad} women differ")
    });
    let initial = (0..inst.men() as u32)
        .filter(|&m| inst.list(m).is_empty())
        .count() as u64;
    let nk = (inst.men() * inst.k()) as u64;
    let mut prev_d = initial;
    let mut prev_r = u64::MAX;
    let (mut identity_ok, mut monotone_ok, mut bound_ok) = (true, true, true);
    for s in &ags.rounds {
        identity_ok &= s.rejected + prev_d == s.continuing + s.exhausted;
        monotone_ok &= s.rejected <= prev_r;
        bound_ok &= s.rejected * s.round as u64 <= nk;
        prev_d = s.exhausted;
        prev_r = s.rejected;
    }
    r.check("round_identity", seed, identity_ok, || {
        "R != C + D - D_prev".into()
    });
    r.check("rejections_nonincreasing", seed, monotone_ok, || {
        "R increased".into()
    });
    r.check("rejections_below_nk_over_i", seed, bound_ok, || {
        "R_i > nk/i".into()
    });
    let star = global.iter().filter(|s| s.woman().is_some()).count() as u64;
    let got = ags.matched() as u64;
    let additive = got * rounds as u64 + nk >= star * rounds as u64;
    r.check("additive_truncation_bound", seed, additive, || {
        format!("matched {got} with M* {star} at l={rounds}")
    });
    Ok(r)
}

fn verify_scheduling(cfg: &VerifyConfig, seed: u64) -> Result<VerifyReport> {
    let d = cfg.d.unwrap_or(2);
    let jobs = cfg.m.unwrap_or(cfg.n);
    let mut r = VerifyReport::default();
    for family in [Family::SchedulingStd, Family::SchedulingRes] {
        let mut spec = InstanceSpec::new(family, seed, cfg.n, jobs, d);
        spec.d = d;
        let inst = SchedulingInstance::from_spec(&spec)?;
        let order = scheduling::arrival_order(&inst);
        let (tag, online) = if family == Family::SchedulingStd {
            ("slms", scheduling::slms_online_ordered(&inst, &order)?)
        } else {
            ("rlms", scheduling::rlms_online_ordered(&inst, &order)?)
        };
        let bad = (0..jobs as u32)
            .filter(|&j| {
                let mut c = ProbeCounter::new();
                let local = if family == Family::SchedulingStd {
                    scheduling::slms_local(&inst, j, &mut c).map(Some)
                } else {
                    scheduling::rlms_local(&inst, j, &mut c)
                };
                local.ok() != Some(online.assign[j as usize])
            })
            .count();
        r.check(
            &format!("{tag}_local_equals_online"),
            seed,
            bad == 0,
            || format!("{bad} jobs differ"),
        );
        let sum: u64 = online.heights.iter().sum();
        r.check(
            &format!("{tag}_heights_sum_to_m"),
            seed,
            sum == jobs as u64,
            || format!("sum {sum} for {jobs} jobs"),
        );
        if family == Family::SchedulingRes {
            let respects = (0..jobs as u32)
                .all(|j| online.assign[j as usize].is_some_and(|i| inst.choices(j).contains(&i)));
            r.check("rlms_respects_choices", seed, respects, || {
                "job off its choice set".into()
            });
            let probe_machines = inst.machines().min(4) as u32;
            let mut mono = true;
            for i in 0..probe_machines {
                let b = inst.bids()[i as usize];
                let trace = scheduling::monotonicity_trace(&inst, i, b, b + 1, LoadRule::Floored)?;
                mono &= !scheduling::trace_violates(&trace, i);
            }
            r.check("rlms_monotone", seed, mono, || {
                "raised bid moved jobs the wrong way".into()
            });
            let mut vp = true;
            for i in 0..inst.machines() as u32 {
                let h = scheduling::rlms_online(&inst)?.heights[i as usize];
                let p = scheduling::payment_rlms(&inst, i, PaymentRule::LoadCritical)?.payment;
                vp &= p - BigRational::new(BigInt::from(h), BigInt::from(inst.bids()[i as usize]))
                    >= BigRational::zero();
            }
            r.check("rlms_voluntary_participation", seed, vp, || {
                "negative truthful utility".into()
            });
        } else {
            let mut nonneg = true;
            for i in 0..inst.machines() as u32 {
                for rule in [PaymentRule::HeightSum, PaymentRule::LoadCritical] {
                    nonneg &= scheduling::payment_slms_expected(&inst, i, rule)?.payment
                        >= BigRational::zero();
                    nonneg &= scheduling::payment_slms_sampled(&inst, i, seed, rule)?.payment
                        >= BigRational::zero();
                }
            }
            r.check("slms_payments_nonnegative", seed, nonneg, || {
                "negative payment".into()
            });
        }
    }
    Ok(r)
}

type BuyerAnswers = Vec<(Vec<u32>, BigRational)>;

fn local_outcome(inst: &AuctionInstance) -> Result<(BuyerAnswers, Vec<Option<u32>>)> {
    let truthful = ReportOverlay::truthful();
    let mut buyers = Vec::with_capacity(inst.buyers());
    for i in 0..inst.buyers() as u32 {
        let mut c = ProbeCounter::new();
        match auctions::local(inst, &truthful, AuctionQuery::Buyer(i), &mut c)? {
            LocalAnswer::Buyer { award, payment, .. } => buyers.push((award, payment)),
            LocalAnswer::Item { .. } => unreachable!("buyer query"),
        }
    }
    let mut items = Vec::with_capacity(inst.items());
    for j in 0..inst.items() as u32 {
        let mut c = ProbeCounter::new();
        match auctions::local(inst, &truthful, AuctionQuery::Item(j), &mut c)? {
            LocalAnswer::Item { winner, .. } => items.push(winner),
            LocalAnswer::Buyer { .. } => unreachable!("item query"),
        }
    }
    Ok((buyers, items))
}

fn verify_auctions(cfg: &VerifyConfig, seed: u64) -> Result<VerifyReport> {
    let k = cfg.k.unwrap_or(2);
    let items = cfg.m.unwrap_or(cfg.n);
    let mut r = VerifyReport::default();
    for mode in [AuctionMode::Uduv, AuctionMode::Udubv, AuctionMode::Ksmb] {
        let tag = format!("{mode:?}").to_lowercase();
        let inst = AuctionInstance::seeded(mode, seed, cfg.n, items, k)?;
        let truthful = ReportOverlay::truthful();
        let global = auctions::run(&inst, &truthful)?;
        let (buyers, item_winners) = local_outcome(&inst)?;
        let owners = global.item_owners(items);
        let stitched = buyers
            .iter()
            .enumerate()
            .all(|(i, (a, p))| *a == global.awards[i] && *p == global.payments[i])
            && owners.as_ref().is_ok_and(|o| *o == item_winners);
        r.check(
            &format!("{tag}_local_equals_global"),
            seed,
            stitched,
            || "local answers differ".into(),
        );
        let feasible = owners.is_ok()
            && (0..inst.buyers() as u32).all(|i| {
                let a = &global.awards[i as usize];
                let set = inst.set(i);
                match mode {
                    AuctionMode::Ksmb => a.is_empty() || *a == set,
                    _ => a.len() <= 1 && a.iter().all(|j| set.contains(j)),
                }
            });
        r.check(&format!("{tag}_feasible"), seed, feasible, || {
            "infeasible award".into()
        });
        let losers_free = (0..inst.buyers())
            .all(|i| !global.awards[i].is_empty() || global.payments[i].is_zero());
        r.check(&format!("{tag}_losers_pay_zero"), seed, losers_free, || {
            "loser charged".into()
        });
        let vp = global
            .utilities(&inst)
            .iter()
            .all(|u| *u >= BigRational::zero());
        r.check(&format!("{tag}_voluntary_participation"), seed, vp, || {
            "negative utility".into()
        });
        let sets: Vec<Vec<u32>> = (0..inst.buyers() as u32).map(|i| inst.set(i)).collect();
        let welfare: BigRational = global
            .winners()
            .iter()
            .map(|&i| inst.value(i).clone())
            .fold(BigRational::zero(), |a, b| a + b);
        match mode {
            AuctionMode::Uduv => {
                let opt = oracles::max_matching(items, &sets)?;
                let won = global.winners().len();
                r.check("uduv_half_of_max_matching", seed, 2 * won >= opt, || {
                    format!("{won} winners vs maximum {opt}")
                });
            }
            AuctionMode::Udubv => {
                let weights: Vec<BigRational> = (0..inst.buyers() as u32)
                    .map(|i| inst.value(i).clone())
                    .collect();
                let opt = oracles::max_vertex_weight_matching(items, &sets, &weights)?;
                let ok = &welfare + &welfare >= opt;
                r.check("udubv_half_of_max_weight", seed, ok, || {
                    format!("{welfare} vs {opt}")
                });
                let bad = auctions::critical_payment_failures(&inst, &epsilon())?;
                r.check("udubv_critical_payments", seed, bad.is_empty(), || {
                    format!("buyers {bad:?}")
                });
            }
            AuctionMode::Ksmb => {
                if inst.buyers() <= oracles::PACKING_LIMIT {
                    let values: Vec<BigRational> = (0..inst.buyers() as u32)
                        .map(|i| inst.value(i).clone())
                        .collect();
                    let opt = oracles::optimal_packing(&sets, &values)?;
                    let scale = BigRational::from_integer(BigInt::from(inst.k().max(1)));
                    let ok = &welfare * scale >= opt;
                    r.check("ksmb_one_over_k_of_packing", seed, ok, || {
                        format!("{welfare} vs {opt}")
                    });
                }
                let bad = auctions::critical_payment_failures(&inst, &epsilon())?;
                r.check("ksmb_critical_payments", seed, bad.is_empty(), || {
                    format!("buyers {bad:?}")
                });
            }
        }
    }
    Ok(r)
}

fn epsilon() -> BigRational {
    BigRational::new(BigInt::from(1), BigInt::from(1_000_000))
}

fn verify_rsd(cfg: &VerifyConfig, seed: u64) -> Result<VerifyReport> {
    let d = cfg.d.unwrap_or(3);
    let mut spec = InstanceSpec::new(Family::Housing, seed, cfg.n, cfg.m.unwrap_or(cfg.n), d);
    spec.d = d;
    let inst = HousingInstance::from_spec(&spec)?;
    let global = rsd::rsd_global(&inst);
    let mut r = VerifyReport::default();
    let bad = (0..inst.agents() as u32)
        .filter(|&a| {
            let mut c = ProbeCounter::new();
            rsd::rsd_local(&inst, a, &mut c).ok() != Some(global[a as usize])
        })
        .count();
    r.check("rsd_local_equals_global", seed, bad == 0, || {
        format!("{bad} agents differ")
    });
    let mut seen = vec![false; inst.houses()];
    let mut injective = true;
    for h in global.iter().flatten() {
        injective &= !std::mem::replace(&mut seen[*h as usize], true);
    }
    r.check("rsd_injective", seed, injective, || {
        "house allocated twice".into()
    });
    Ok(r)
}

fn verify_majorization(cfg: &VerifyConfig, seed: u64) -> Result<VerifyReport> {
    let mut r = VerifyReport::default();
    let trials = (cfg.n as u64).max(1);
    for caps in [vec![2u64, 3], vec![1, 1, 4], vec![4, 8, 36]] {
        let jobs = 2 * caps.iter().sum::<u64>() as usize;
        let rep = oracles::uniform_majorizes_nonuniform(
            &caps,
            jobs,
            trials,
            seed,
            oracles::Coupling::Quantile,
        )?;
        let name = format!(
            "majorization_{}",
            caps.iter()
                .map(u64::to_string)
                .collect::<Vec<_>>()
                .join("_")
        );
        r.check(&name, seed, rep.holds(), || format!("{rep:?}"));
    }
    Ok(r)
}

fn ratio_json(x: &BigRational) -> Value {
    json!({
        "num": x.numer().to_string(),
        "den": x.denom().to_string(),
        "approx": x.to_f64().unwrap_or(f64::NAN),
    })
}

fn status_json(man: u32, s: ManStatus, probes: Option<u64>) -> Value {
    let (status, woman) = match s {
        ManStatus::Matched(w) => ("matched", Some(w)),
        ManStatus::Unmatched => ("unmatched", None),
        ManStatus::Disqualified => ("disqualified", None),
    };
    let mut v = json!({"man": man, "status": status});
    if let Some(w) = woman {
        v["woman"] = json!(w);
    }
    if let Some(p) = probes {
        v["probes"] = json!(p);
    }
    v
}

/// Which side of the incidence graph a query addresses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// Men, jobs, buyers, agents.
    #[default]
    Left,
    /// Women or items.
    Right,
}

/// One local query on the instance described by `spec`, as JSON with the
/// probe count.
pub fn cmd_query(spec: &InstanceSpec, id: u32, side: Side, rounds: Option<u32>) -> Result<Value> {
    spec.validate()?;
    let mut c = ProbeCounter::new();
    let v = match spec.family {
        Family::Matching => {
            let inst = MatchingInstance::from_spec(spec)?;
            let rounds = rounds.unwrap_or_else(|| sm::default_rounds(inst.k().max(1)));
            match side {
                Side::Left => {
                    let s = sm::local_ags(&inst, rounds, id, &mut c)?;
                    status_json(id, s, Some(c.probes()))
                }
                Side::Right => {
                    let m = sm::local_ags_woman(&inst, rounds, id, &mut c)?;
                    json!({"woman": id, "man": m, "probes": c.probes()})
                }
            }
        }
        Family::SchedulingStd | Family::SchedulingRes => {
            if side == Side::Right {
                return Err(invalid("scheduling queries address jobs"));
            }
            let inst = SchedulingInstance::from_spec(spec)?;
            let machine = if spec.family == Family::SchedulingStd {
                Some(scheduling::slms_local(&inst, id, &mut c)?)
            } else {
                scheduling::rlms_local(&inst, id, &mut c)?
            };
            json!({"job": id, "machine": machine, "probes": c.probes()})
        }
        Family::Uduv | Family::Udubv | Family::Ksmb => {
            let inst = AuctionInstance::from_spec(spec)?;
            let q = match side {
                Side::Left => AuctionQuery::Buyer(id),
                Side::Right => AuctionQuery::Item(id),
            };
            let a = auctions::local(&inst, &ReportOverlay::truthful(), q, &mut c)?;
            local_answer_json(&a, c.probes())
        }
        Family::Housing => {
            if side == Side::Right {
                return Err(invalid("housing queries address agents"));
            }
            let inst = HousingInstance::from_spec(spec)?;
            let h = rsd::rsd_local(&inst, id, &mut c)?;
            json!({"agent": id, "house": h, "probes": c.probes()})
        }
    };
    Ok(v)
}

fn local_answer_json(a: &LocalAnswer, probes: u64) -> Value {
    match a {
        LocalAnswer::Buyer {
            buyer,
            award,
            payment,
        } => {
            json!({"buyer": buyer, "award": award, "payment": ratio_json(payment), "probes": probes})
        }
        LocalAnswer::Item { item, winner } => {
            json!({"item": item, "winner": winner, "probes": probes})
        }
    }
}

/// What `lcmd run` should report for an instance.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunRequest {
    /// Single left-side query (man, job, buyer, agent).
    pub query: Option<u32>,
    /// Single right-side query (item).
    pub query_right: Option<u32>,
    /// Answer every left-side entity locally.
    pub all: bool,
    pub rounds: Option<u32>,
    /// Machine whose payment to report, with scheme and rule.
    pub pay_machine: Option<u32>,
    pub scheme: Option<String>,
    pub rule: PaymentRule,
    /// Truthfulness audit (auctions) over the mode's deviation grid.
    pub audit: bool,
}

/// Answer stream for `lcmd run`: one JSON value per answered query, or a
/// global summary when no query is given.
pub fn cmd_run(spec: &InstanceSpec, req: &RunRequest) -> Result<Vec<Value>> {
    spec.validate()?;
    let left = spec.left_count() as u32;
    let ids: Vec<u32> = match (req.query, req.all) {
        (Some(q), _) => vec![q],
        (None, true) => (0..left).collect(),
        (None, false) => Vec::new(),
    };
    let mut out = Vec::new();
    match spec.family {
        Family::Matching => {
            let inst = MatchingInstance::from_spec(spec)?;
            let rounds = req
                .rounds
                .unwrap_or_else(|| sm::default_rounds(inst.k().max(1)));
            if ids.is_empty() {
                let ags = sm::abridged_gs(&inst, rounds)?;
                let count =
                    |f: fn(&ManStatus) -> bool| ags.statuses.iter().filter(|s| f(s)).count();
                out.push(json!({
                    "rounds": rounds,
                    "matched": count(|s| matches!(s, ManStatus::Matched(_))),
                    "unmatched": count(|s| matches!(s, ManStatus::Unmatched)),
                    "disqualified": count(|s| matches!(s, ManStatus::Disqualified)),
                    "global_matched": sm::global_gs(&inst).iter().filter(|s| s.woman().is_some()).count(),
                }));
            }
            for m in ids {
                let mut c = ProbeCounter::new();
                let s = sm::local_ags(&inst, rounds, m, &mut c)?;
                out.push(status_json(m, s, Some(c.probes())));
            }
        }
        Family::SchedulingStd | Family::SchedulingRes => {
            let inst = SchedulingInstance::from_spec(spec)?;
            let standard = spec.family == Family::SchedulingStd;
            for j in &ids {
                let mut c = ProbeCounter::new();
                let machine = if standard {
                    Some(scheduling::slms_local(&inst, *j, &mut c)?)
                } else {
                    scheduling::rlms_local(&inst, *j, &mut c)?
                };
                out.push(json!({"job": j, "machine": machine, "probes": c.probes()}));
            }
            if let Some(i) = req.pay_machine {
                let scheme =
                    req.scheme
                        .as_deref()
                        .unwrap_or(if standard { "expected" } else { "rerun" });
                let rec = match (scheme, standard) {
                    ("expected", true) => scheduling::payment_slms_expected(&inst, i, req.rule)?,
                    ("sampled", true) => {
                        scheduling::payment_slms_sampled(&inst, i, spec.seed, req.rule)?
                    }
                    ("rerun", false) => scheduling::payment_rlms(&inst, i, req.rule)?,
                    (s, _) => {
                        return Err(invalid(format!("scheme {s:?} does not apply to this mode")))
                    }
                };
                out.push(json!({
                    "machine": i,
                    "payment": ratio_json(&rec.payment),
                    "scheme": rec.scheme,
                    "rule": rec.rule,
                }));
            }
            if ids.is_empty() && req.pay_machine.is_none() {
                let alloc = if standard {
                    scheduling::slms_online(&inst)?
                } else {
                    scheduling::rlms_online(&inst)?
                };
                out.push(json!({
                    "heights": alloc.heights,
                    "bids": inst.bids(),
                    "makespan": ratio_json(&alloc.makespan()),
                }));
            }
        }
        Family::Uduv | Family::Udubv | Family::Ksmb => {
            let inst = AuctionInstance::from_spec(spec)?;
            let truthful = ReportOverlay::truthful();
            let mut queries: Vec<AuctionQuery> =
                ids.iter().map(|&i| AuctionQuery::Buyer(i)).collect();
            if let Some(j) = req.query_right {
                queries.push(AuctionQuery::Item(j));
            }
            for q in &queries {
                let mut c = ProbeCounter::new();
                let a = auctions::local(&inst, &truthful, *q, &mut c)?;
                out.push(local_answer_json(&a, c.probes()));
            }
            if queries.is_empty() {
                let o = auctions::run(&inst, &truthful)?;
                out.push(json!({
                    "awards": o.awards,
                    "payments": o.payments.iter().map(ratio_json).collect::<Vec<_>>(),
                }));
            }
            if req.audit {
                let v = auctions::truthfulness_audit(
                    &inst,
                    auctions::DeviationGrid::for_mode(inst.mode()),
                )?;
                out.push(json!({"audit_violations": v.len()}));
            }
        }
        Family::Housing => {
            let inst = HousingInstance::from_spec(spec)?;
            for a in &ids {
                let mut c = ProbeCounter::new();
                let h = rsd::rsd_local(&inst, *a, &mut c)?;
                out.push(json!({"agent": a, "house": h, "probes": c.probes()}));
            }
            if ids.is_empty() {
                out.push(json!({"houses": rsd::rsd_global(&inst)}));
            }
        }
    }
    Ok(out)
}

/// Instance file for `spec`; with `materialize` the generated incidence
/// lists are written out as explicit edges.
pub fn cmd_gen(spec: &InstanceSpec, materialize: bool) -> Result<String> {
    spec.validate()?;
    let mut out = spec.clone();
    if materialize && out.explicit_edges.is_none() {
        let oracle = build_instance(spec)?;
        let edges = (0..oracle.left_count() as u32)
            .flat_map(|l| {
                oracle
                    .forward_raw(l)
                    .iter()
                    .map(move |&r| [l, r])
                    .collect::<Vec<_>>()
            })
            .collect();
        out.explicit_edges = Some(edges);
        if spec.family.is_scheduling() && out.bids.is_none() {
            out.bids = Some(spec.capacities());
        }
    }
    Ok(out.to_json())
}
