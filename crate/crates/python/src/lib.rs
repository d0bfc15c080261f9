//! Python bindings for the local computation mechanisms.

use lcmd_core::auctions::{self, AuctionMode, AuctionQuery, LocalAnswer, ReportOverlay};
use lcmd_core::harness::{self, ExperimentConfig, Suite, VerifyConfig};
use lcmd_core::oracles::{self, Coupling};
use lcmd_core::rsd;
use lcmd_core::scheduling::{self, PaymentRule};
use lcmd_core::stable_matching::{self as sm, ManStatus};
use lcmd_core::{Family, ProbeCounter};
use num_rational::BigRational;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: lcmd_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn fraction<'py>(py: Python<'py>, x: &BigRational) -> PyResult<Bound<'py, PyAny>> {
    py.import("fractions")?
        .getattr("Fraction")?
        .call1((x.numer().clone(), x.denom().clone()))
}

fn rational(x: &Bound<'_, PyAny>) -> PyResult<BigRational> {
    let f = x
        .py()
        .import("fractions")?
        .getattr("Fraction")?
        .call1((x,))?;
    Ok(BigRational::new(
        f.getattr("numerator")?.extract()?,
        f.getattr("denominator")?.extract()?,
    ))
}

fn rule(name: &str) -> PyResult<PaymentRule> {
    match name {
        "height-sum" => Ok(PaymentRule::HeightSum),
        "load-critical" => Ok(PaymentRule::LoadCritical),
        _ => Err(PyValueError::new_err(format!(
            "unknown payment rule {name:?}"
        ))),
    }
}

fn status_name(s: ManStatus) -> (&'static str, Option<u32>) {
    match s {
        ManStatus::Matched(w) => ("matched", Some(w)),
        ManStatus::Unmatched => ("unmatched", None),
        ManStatus::Disqualified => ("disqualified", None),
    }
}

/// Seeded stable matching market with `n` men and women, `k` women per list.
#[pyclass(module = "lcmd", frozen)]
struct MatchingInstance(sm::MatchingInstance);

#[pymethods]
impl MatchingInstance {
    #[new]
    fn new(seed: u64, n: usize, k: usize) -> PyResult<Self> {
        sm::MatchingInstance::seeded(seed, n, k)
            .map(Self)
            .map_err(err)
    }

    /// Men's lists in preference order and each woman's suitors best first.
    #[staticmethod]
    fn explicit(men_lists: Vec<Vec<u32>>, women_rankings: Vec<Vec<u32>>) -> PyResult<Self> {
        sm::MatchingInstance::explicit(men_lists, women_rankings)
            .map(Self)
            .map_err(err)
    }

    #[getter]
    fn men(&self) -> usize {
        self.0.men()
    }

    fn list(&self, man: u32) -> PyResult<Vec<u32>> {
        if man as usize >= self.0.men() {
            return Err(PyValueError::new_err(format!("unknown man {man}")));
        }
        Ok(self.0.list(man).to_vec())
    }

    /// Partner of every man under full deferred acceptance.
    fn global_gs(&self) -> Vec<Option<u32>> {
        sm::global_gs(&self.0)
            .iter()
            .map(ManStatus::woman)
            .collect()
    }

    /// Statuses after `rounds` rounds: `("matched", w)`, `("unmatched", None)`
    /// or `("disqualified", None)` per man.
    fn abridged_gs(&self, rounds: u32) -> PyResult<Vec<(&'static str, Option<u32>)>> {
        let out = sm::abridged_gs(&self.0, rounds).map_err(err)?;
        Ok(out.statuses.into_iter().map(status_name).collect())
    }

    /// `(status, woman, probes)` for one man.
    #[pyo3(signature = (man, rounds=None))]
    fn local_ags(
        &self,
        man: u32,
        rounds: Option<u32>,
    ) -> PyResult<(&'static str, Option<u32>, u64)> {
        let rounds = rounds.unwrap_or_else(|| sm::default_rounds(self.0.k().max(1)));
        let mut c = ProbeCounter::new();
        let s = sm::local_ags(&self.0, rounds, man, &mut c).map_err(err)?;
        let (name, w) = status_name(s);
        Ok((name, w, c.probes()))
    }
}

/// Related machines with integer capacities; `mode` is `"std"` (slot
/// choices) or `"res"` (machine choice sets).
#[pyclass(module = "lcmd", frozen)]
struct SchedulingInstance(scheduling::SchedulingInstance);

#[pymethods]
impl SchedulingInstance {
    #[new]
    #[pyo3(signature = (mode, seed, bids, jobs, d=2))]
    fn new(mode: &str, seed: u64, bids: Vec<u64>, jobs: usize, d: usize) -> PyResult<Self> {
        let inst = match mode {
            "std" => scheduling::SchedulingInstance::standard(seed, bids, jobs, d),
            "res" => scheduling::SchedulingInstance::seeded_restricted(seed, bids, jobs, d),
            _ => return Err(PyValueError::new_err("mode must be 'std' or 'res'")),
        };
        inst.map(Self).map_err(err)
    }

    /// Restricted instance with an explicit choice set per job.
    #[staticmethod]
    fn restricted(seed: u64, bids: Vec<u64>, choices: Vec<Vec<u32>>) -> PyResult<Self> {
        scheduling::SchedulingInstance::restricted(seed, bids, choices)
            .map(Self)
            .map_err(err)
    }

    /// Jobs per machine under the online mechanism of the instance's mode.
    fn heights(&self) -> PyResult<Vec<u64>> {
        let alloc = match self.0.mode() {
            scheduling::SchedulingMode::Standard => scheduling::slms_online(&self.0),
            scheduling::SchedulingMode::Restricted => scheduling::rlms_online(&self.0),
        };
        alloc.map(|a| a.heights).map_err(err)
    }

    /// `(machine, probes)` for one job, answered locally.
    fn local_job(&self, job: u32) -> PyResult<(Option<u32>, u64)> {
        let mut c = ProbeCounter::new();
        let m = match self.0.mode() {
            scheduling::SchedulingMode::Standard => {
                scheduling::slms_local(&self.0, job, &mut c).map(Some)
            }
            scheduling::SchedulingMode::Restricted => scheduling::rlms_local(&self.0, job, &mut c),
        };
        Ok((m.map_err(err)?, c.probes()))
    }

    /// Payment to machine `i` as a `Fraction`. `scheme` is `"expected"`,
    /// `"sampled"` (standard mode) or `"rerun"` (restricted mode).
    #[pyo3(signature = (i, scheme, rule="height-sum", draw=0))]
    fn payment<'py>(
        &self,
        py: Python<'py>,
        i: u32,
        scheme: &str,
        rule: &str,
        draw: u64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let r = self::rule(rule)?;
        let rec = match scheme {
            "expected" => scheduling::payment_slms_expected(&self.0, i, r),
            "sampled" => scheduling::payment_slms_sampled(&self.0, i, draw, r),
            "rerun" => scheduling::payment_rlms(&self.0, i, r),
            _ => return Err(PyValueError::new_err(format!("unknown scheme {scheme:?}"))),
        }
        .map_err(err)?;
        fraction(py, &rec.payment)
    }
}

fn auction_mode(name: &str) -> PyResult<AuctionMode> {
    match name {
        "uduv" => Ok(AuctionMode::Uduv),
        "udubv" => Ok(AuctionMode::Udubv),
        "ksmb" => Ok(AuctionMode::Ksmb),
        _ => Err(PyValueError::new_err(format!(
            "unknown auction mode {name:?}"
        ))),
    }
}

type Awarded<'py> = (Vec<Vec<u32>>, Vec<Bound<'py, PyAny>>);

/// Auction in mode `"uduv"`, `"udubv"` or `"ksmb"`.
#[pyclass(module = "lcmd", frozen)]
struct AuctionInstance(auctions::AuctionInstance);

#[pymethods]
impl AuctionInstance {
    #[new]
    fn new(mode: &str, seed: u64, buyers: usize, items: usize, k: usize) -> PyResult<Self> {
        auctions::AuctionInstance::seeded(auction_mode(mode)?, seed, buyers, items, k)
            .map(Self)
            .map_err(err)
    }

    /// Hand-built instance; values may be ints or `Fraction`s.
    #[staticmethod]
    fn explicit(
        mode: &str,
        seed: u64,
        items: usize,
        sets: Vec<Vec<u32>>,
        values: Vec<Bound<'_, PyAny>>,
    ) -> PyResult<Self> {
        let values = values.iter().map(rational).collect::<PyResult<Vec<_>>>()?;
        auctions::AuctionInstance::explicit(auction_mode(mode)?, seed, items, sets, values)
            .map(Self)
            .map_err(err)
    }

    /// Truthful global run: `(awards, payments)`.
    fn run<'py>(&self, py: Python<'py>) -> PyResult<Awarded<'py>> {
        let out = auctions::run(&self.0, &ReportOverlay::truthful()).map_err(err)?;
        let pays = out
            .payments
            .iter()
            .map(|p| fraction(py, p))
            .collect::<PyResult<Vec<_>>>()?;
        Ok((out.awards, pays))
    }

    /// `(award, payment, probes)` for one buyer, answered locally.
    fn local_buyer<'py>(
        &self,
        py: Python<'py>,
        buyer: u32,
    ) -> PyResult<(Vec<u32>, Bound<'py, PyAny>, u64)> {
        let mut c = ProbeCounter::new();
        match auctions::local(
            &self.0,
            &ReportOverlay::truthful(),
            AuctionQuery::Buyer(buyer),
            &mut c,
        )
        .map_err(err)?
        {
            LocalAnswer::Buyer { award, payment, .. } => {
                Ok((award, fraction(py, &payment)?, c.probes()))
            }
            LocalAnswer::Item { .. } => unreachable!("buyer query"),
        }
    }

    /// `(winner, probes)` for one item, answered locally.
    fn local_item(&self, item: u32) -> PyResult<(Option<u32>, u64)> {
        let mut c = ProbeCounter::new();
        match auctions::local(
            &self.0,
            &ReportOverlay::truthful(),
            AuctionQuery::Item(item),
            &mut c,
        )
        .map_err(err)?
        {
            LocalAnswer::Item { winner, .. } => Ok((winner, c.probes())),
            LocalAnswer::Buyer { .. } => unreachable!("item query"),
        }
    }

    /// Number of utility-improving misreports over the mode's deviation grid.
    fn audit(&self) -> PyResult<usize> {
        auctions::truthfulness_audit(&self.0, auctions::DeviationGrid::for_mode(self.0.mode()))
            .map(|v| v.len())
            .map_err(err)
    }
}

/// House allocation by random serial dictatorship.
#[pyclass(module = "lcmd", frozen)]
struct HousingInstance(rsd::HousingInstance);

#[pymethods]
impl HousingInstance {
    #[new]
    fn new(seed: u64, n: usize, d: usize) -> PyResult<Self> {
        rsd::HousingInstance::seeded(seed, n, d)
            .map(Self)
            .map_err(err)
    }

    fn rsd_global(&self) -> Vec<Option<u32>> {
        rsd::rsd_global(&self.0)
    }

    /// `(house, probes)` for one agent.
    fn rsd_local(&self, agent: u32) -> PyResult<(Option<u32>, u64)> {
        let mut c = ProbeCounter::new();
        let h = rsd::rsd_local(&self.0, agent, &mut c).map_err(err)?;
        Ok((h, c.probes()))
    }
}

/// Benchmark records for a family over an `n` grid, as dicts.
#[pyfunction(name = "bench")]
#[pyo3(signature = (family, n_grid, seeds=20, queries=100))]
fn bench_records<'py>(
    py: Python<'py>,
    family: &str,
    n_grid: Vec<usize>,
    seeds: u64,
    queries: usize,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let family: Family = family.parse().map_err(err)?;
    let mut cfg = ExperimentConfig::new(family, n_grid);
    cfg.seeds = seeds;
    cfg.queries = queries;
    let records = py.detach(|| harness::bench(&cfg)).map_err(err)?;
    records
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("family", r.family.as_str())?;
            d.set_item("n", r.n)?;
            d.set_item("seed", r.seed)?;
            d.set_item("query", r.query)?;
            d.set_item("probes", r.probes)?;
            d.set_item("digest", r.digest)?;
            Ok(d)
        })
        .collect()
}

/// `(name, instances, violations)` rows of an invariant suite.
#[pyfunction]
#[pyo3(signature = (suite, n, seeds=10))]
fn verify(py: Python<'_>, suite: &str, n: usize, seeds: u64) -> PyResult<Vec<(String, u64, u64)>> {
    let suite: Suite = suite.parse().map_err(err)?;
    let report = py
        .detach(|| harness::verify(&VerifyConfig::new(suite, n, seeds)))
        .map_err(err)?;
    Ok(report
        .rows
        .into_iter()
        .map(|r| (r.name, r.instances, r.violations))
        .collect())
}

/// Whether `p` majorizes `q` (equal totals, dominating sorted prefix sums).
#[pyfunction]
fn majorizes(p: Vec<u64>, q: Vec<u64>) -> bool {
    oracles::majorizes(&p, &q)
}

/// `(violations, max_load_violations)` of the paired unit/capacitated runs.
#[pyfunction]
#[pyo3(signature = (caps, jobs, trials, seed=1))]
fn majorization_trials(
    caps: Vec<u64>,
    jobs: usize,
    trials: u64,
    seed: u64,
) -> PyResult<(u64, u64)> {
    let r = oracles::uniform_majorizes_nonuniform(&caps, jobs, trials, seed, Coupling::Quantile)
        .map_err(err)?;
    Ok((r.violations, r.max_load_violations))
}

#[pymodule]
fn lcmd(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<MatchingInstance>()?;
    m.add_class::<SchedulingInstance>()?;
    m.add_class::<AuctionInstance>()?;
    m.add_class::<HousingInstance>()?;
    m.add_function(wrap_pyfunction!(bench_records, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(majorizes, m)?)?;
    m.add_function(wrap_pyfunction!(majorization_trials, m)?)?;
    Ok(())
}
