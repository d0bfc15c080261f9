//! Seed-plus-parameters instance description and the JSON file schema.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::probe::AdjacencyOracle;
use crate::rng::{DrawKey, Purpose, RandomTape};

pub(crate) const LIST_DRAW: Purpose = Purpose::new("list");
pub(crate) const SLOT_DRAW: Purpose = Purpose::new("slot");
pub(crate) const BID_DRAW: Purpose = Purpose::new("bid");
pub(crate) const VALUE_DRAW: Purpose = Purpose::new("value");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Matching,
    SchedulingStd,
    SchedulingRes,
    Uduv,
    Udubv,
    Ksmb,
    Housing,
}

impl Family {
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Matching => "matching",
            Family::SchedulingStd => "scheduling-std",
            Family::SchedulingRes => "scheduling-res",
            Family::Uduv => "uduv",
            Family::Udubv => "udubv",
            Family::Ksmb => "ksmb",
            Family::Housing => "housing",
        }
    }

    /// Families whose left lists are drawn without replacement.
    pub fn distinct_lists(&self) -> bool {
        !matches!(self, Family::SchedulingStd | Family::SchedulingRes)
    }

    pub fn is_scheduling(&self) -> bool {
        matches!(self, Family::SchedulingStd | Family::SchedulingRes)
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Family {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| invalid(format!("unknown family {s:?}")))
    }
}

fn default_one() -> usize {
    1
}

fn default_two() -> usize {
    2
}

/// Everything needed to regenerate an instance bit for bit.
///
/// `n` counts men / machines / buyers / agents and `m` counts women / jobs /
/// items / houses. Explicit `bids`, `valuations` and `explicit_edges` replace
/// the seeded data when present.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub seed: u64,
    pub family: Family,
    pub n: usize,
    pub m: usize,
    #[serde(default = "default_one")]
    pub k: usize,
    #[serde(default = "default_two")]
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bids: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valuations: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit_edges: Option<Vec<[u32; 2]>>,
}

impl InstanceSpec {
    pub fn new(family: Family, seed: u64, n: usize, m: usize, k_or_d: usize) -> Self {
        InstanceSpec {
            seed,
            family,
            n,
            m,
            k: k_or_d,
            d: k_or_d,
            bids: None,
            valuations: None,
            explicit_edges: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: InstanceSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance spec serializes")
    }

    pub fn tape(&self) -> RandomTape {
        RandomTape::new(self.seed)
    }

    /// List length (`k`) or choice count (`d`), depending on the family.
    pub fn k_or_d(&self) -> usize {
        match self.family {
            Family::Matching | Family::Uduv | Family::Udubv | Family::Ksmb => self.k,
            Family::SchedulingStd | Family::SchedulingRes | Family::Housing => self.d,
        }
    }

    /// Number of entities on the list-owning side.
    pub fn left_count(&self) -> usize {
        if self.family.is_scheduling() {
            self.m
        } else {
            self.n
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(invalid("n and m must be at least 1"));
        }
        let c = self.k_or_d();
        if c == 0 {
            return Err(invalid("k/d must be at least 1"));
        }
        if self.family.distinct_lists() && c > self.m && self.explicit_edges.is_none() {
            return Err(invalid(format!(
                "list length {c} exceeds the {} right-side entities",
                self.m
            )));
        }
        if let Some(b) = &self.bids {
            if b.len() != self.n {
                return Err(invalid(format!(
                    "{} bids given for n = {}",
                    b.len(),
                    self.n
                )));
            }
            if self.family.is_scheduling() && b.contains(&0) {
                return Err(invalid("capacities must be positive integers"));
            }
        }
        if let Some(v) = &self.valuations {
            if v.len() != self.n {
                return Err(invalid(format!(
                    "{} valuations given for n = {}",
                    v.len(),
                    self.n
                )));
            }
            if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(invalid("valuations must be finite and non-negative"));
            }
        }
        Ok(())
    }

    /// Machine capacities: explicit, or seeded uniformly in `1..=ceil(log2 n)`.
    pub fn capacities(&self) -> Vec<u64> {
        if let Some(b) = &self.bids {
            return b.clone();
        }
        let top = (self.n as f64).log2().ceil().max(1.0) as u64;
        let tape = self.tape();
        (0..self.n as u64)
            .map(|i| 1 + tape.below(DrawKey::with_purpose(BID_DRAW, i, 0), top))
            .collect()
    }

    /// Buyer values: explicit, or seeded integers uniform in `[1, 10^6]`.
    pub fn values(&self) -> Vec<f64> {
        if let Some(v) = &self.valuations {
            return v.clone();
        }
        let tape = self.tape();
        (0..self.n as u64)
            .map(|i| (1 + tape.below(DrawKey::with_purpose(VALUE_DRAW, i, 0), 1_000_000)) as f64)
            .collect()
    }

    fn explicit_lists(&self, left: usize) -> Option<Vec<Vec<u32>>> {
        self.explicit_edges.as_ref().map(|edges| {
            let mut lists = vec![Vec::new(); left];
            for [l, r] in edges {
                if (*l as usize) < left {
                    lists[*l as usize].push(*r);
                }
            }
            lists
        })
    }
}

/// `count` distinct values from `[0, range)`, drawn by rejection on
/// duplicates with the draw index as part of the key.
pub(crate) fn sample_distinct(
    tape: &RandomTape,
    purpose: Purpose,
    entity: u64,
    count: usize,
    range: u64,
) -> Vec<u32> {
    debug_assert!(count as u64 <= range);
    let mut out: Vec<u32> = Vec::with_capacity(count);
    let mut index = 0u64;
    while out.len() < count {
        let x = tape.below(DrawKey::with_purpose(purpose, entity, index), range) as u32;
        index += 1;
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

/// Maps slot index to owning machine via capacity prefix sums.
pub(crate) fn slot_owner(prefix: &[u64], slot: u64) -> u32 {
    // prefix[i] = first slot of machine i, prefix[n] = B
    (prefix.partition_point(|&p| p <= slot) - 1) as u32
}

pub(crate) fn capacity_prefix(caps: &[u64]) -> Vec<u64> {
    let mut prefix = Vec::with_capacity(caps.len() + 1);
    prefix.push(0);
    for c in caps {
        prefix.push(prefix.last().unwrap() + c);
    }
    prefix
}

/// Generates the incidence oracle of `spec`.
///
/// Matching, auction and housing families draw each left entity's list
/// uniformly without replacement. Restricted scheduling draws `d` slots per
/// job over all capacity slots (duplicates allowed) and maps them to their
/// machines, so machine membership is capacity-proportional. Standard
/// scheduling keeps the slot choices themselves.
pub fn build_instance(spec: &InstanceSpec) -> Result<AdjacencyOracle> {
    spec.validate()?;
    let tape = spec.tape();
    match spec.family {
        Family::Matching | Family::Uduv | Family::Udubv | Family::Ksmb | Family::Housing => {
            let lists = match spec.explicit_lists(spec.n) {
                Some(l) => l,
                None => (0..spec.n as u64)
                    .map(|i| sample_distinct(&tape, LIST_DRAW, i, spec.k_or_d(), spec.m as u64))
                    .collect(),
            };
            AdjacencyOracle::from_lists(spec.m, &lists)
        }
        Family::SchedulingRes => {
            if let Some(lists) = spec.explicit_lists(spec.m) {
                return AdjacencyOracle::from_lists(spec.n, &lists);
            }
            let caps = spec.capacities();
            let prefix = capacity_prefix(&caps);
            let total = *prefix.last().unwrap();
            let lists: Vec<Vec<u32>> = (0..spec.m as u64)
                .map(|j| {
                    (0..spec.d as u64)
                        .map(|c| {
                            let s = tape.below(DrawKey::with_purpose(SLOT_DRAW, j, c), total);
                            slot_owner(&prefix, s)
                        })
                        .collect()
                })
                .collect();
            AdjacencyOracle::from_lists(spec.n, &lists)
        }
        Family::SchedulingStd => {
            let caps = spec.capacities();
            let total: u64 = caps.iter().sum();
            if let Some(lists) = spec.explicit_lists(spec.m) {
                return AdjacencyOracle::from_lists(total as usize, &lists);
            }
            let lists = standard_slot_lists(&tape, spec.m, spec.d, total);
            AdjacencyOracle::from_lists(total as usize, &lists)
        }
    }
}

/// Slot choices of every job in the standard setting: `d` distinct slots when
/// `B >= d`, independent draws otherwise. Keys depend only on (job, draw
/// index), so a changed `B` re-derives choices from the same keys.
pub(crate) fn standard_slot_lists(
    tape: &RandomTape,
    jobs: usize,
    d: usize,
    total: u64,
) -> Vec<Vec<u32>> {
    (0..jobs as u64)
        .map(|j| {
            if total >= d as u64 {
                sample_distinct(tape, SLOT_DRAW, j, d, total)
            } else {
                (0..d as u64)
                    .map(|c| tape.below(DrawKey::with_purpose(SLOT_DRAW, j, c), total) as u32)
                    .collect()
            }
        })
        .collect()
}
