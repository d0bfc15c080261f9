//! Men-proposing Gale-Shapley with bounded lists: the global reference, the
//! round-truncated variant, and its local per-man evaluation.

use std::cmp::Reverse;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::instance::{build_instance, Family, InstanceSpec};
use crate::probe::{AdjacencyOracle, Entity, ProbeCounter};
use crate::rng::{DrawKey, Purpose, RandomTape};

const PRIORITY_DRAW: Purpose = Purpose::new("woman-priority");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "status", content = "woman", rename_all = "lowercase")]
pub enum ManStatus {
    Matched(u32),
    /// Rejected by every listed woman before the last round.
    Unmatched,
    /// Rejected in the final simulated round.
    Disqualified,
}

impl ManStatus {
    pub fn woman(&self) -> Option<u32> {
        match self {
            ManStatus::Matched(w) => Some(*w),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
enum WomenPriority {
    Seeded(RandomTape),
    /// Per woman, men from most to least preferred.
    Explicit(Vec<HashMap<u32, u32>>),
}

#[derive(Clone, Debug)]
pub struct MatchingInstance {
    men: AdjacencyOracle,
    priority: WomenPriority,
    max_list: usize,
}

impl MatchingInstance {
    pub fn from_spec(spec: &InstanceSpec) -> Result<Self> {
        if spec.family != Family::Matching {
            return Err(invalid(format!(
                "expected a matching spec, got {}",
                spec.family
            )));
        }
        let men = build_instance(spec)?;
        let max_list = (0..men.left_count() as u32)
            .map(|m| men.forward_raw(m).len())
            .max()
            .unwrap_or(0);
        for m in 0..men.left_count() as u32 {
            let l = men.forward_raw(m);
            if (1..l.len()).any(|i| l[..i].contains(&l[i])) {
                return Err(invalid(format!("man {m} lists a woman twice")));
            }
        }
        Ok(MatchingInstance {
            men,
            priority: WomenPriority::Seeded(spec.tape()),
            max_list,
        })
    }

    /// `n` men and `n` women, `k`-uniform lists, seeded priorities.
    pub fn seeded(seed: u64, n: usize, k: usize) -> Result<Self> {
        Self::from_spec(&InstanceSpec::new(Family::Matching, seed, n, n, k))
    }

    /// Hand-built instance: men's lists in preference order and, per woman,
    /// her suitors from most to least preferred.
    pub fn explicit(men_lists: Vec<Vec<u32>>, women_rankings: Vec<Vec<u32>>) -> Result<Self> {
        let men = AdjacencyOracle::from_lists(women_rankings.len(), &men_lists)?;
        for (m, l) in men_lists.iter().enumerate() {
            if (1..l.len()).any(|i| l[..i].contains(&l[i])) {
                return Err(invalid(format!("man {m} lists a woman twice")));
            }
        }
        let ranks: Vec<HashMap<u32, u32>> = women_rankings
            .iter()
            .map(|r| r.iter().enumerate().map(|(i, &m)| (m, i as u32)).collect())
            .collect();
        for (w, r) in ranks.iter().enumerate() {
            for m in men.reverse_raw(w as u32) {
                if !r.contains_key(m) {
                    return Err(invalid(format!("woman {w} does not rank suitor {m}")));
                }
            }
        }
        let max_list = men_lists.iter().map(Vec::len).max().unwrap_or(0);
        Ok(MatchingInstance {
            men,
            priority: WomenPriority::Explicit(ranks),
            max_list,
        })
    }

    pub fn men(&self) -> usize {
        self.men.left_count()
    }

    pub fn women(&self) -> usize {
        self.men.right_count()
    }

    /// Longest list length, the `k` of the bounds.
    pub fn k(&self) -> usize {
        self.max_list
    }

    pub fn oracle(&self) -> &AdjacencyOracle {
        &self.men
    }

    pub fn list(&self, man: u32) -> &[u32] {
        self.men.forward_raw(man)
    }

    fn score(&self, woman: u32, man: u32) -> (u64, Reverse<u32>) {
        let s = match &self.priority {
            WomenPriority::Seeded(tape) => tape.word(DrawKey::with_purpose(
                PRIORITY_DRAW,
                woman as u64,
                man as u64,
            )),
            WomenPriority::Explicit(ranks) => {
                u64::MAX - ranks[woman as usize].get(&man).copied().unwrap_or(u32::MAX) as u64
            }
        };
        (s, Reverse(man))
    }

    /// Whether `woman` strictly prefers man `a` to man `b`.
    pub fn prefers(&self, woman: u32, a: u32, b: u32) -> bool {
        self.score(woman, a) > self.score(woman, b)
    }

    fn check_man(&self, man: u32) -> Result<()> {
        if man as usize >= self.men() {
            return Err(invalid(format!("unknown man {man}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundStats {
    pub round: u32,
    /// Men rejected in this round.
    pub rejected: u64,
    /// Men rejected in this round who still have women left to approach.
    pub continuing: u64,
    /// Men rejected by every listed woman by the end of this round.
    pub exhausted: u64,
    /// Matching size after this round.
    pub matched: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AbridgedOutcome {
    pub statuses: Vec<ManStatus>,
    pub rounds: Vec<RoundStats>,
}

impl AbridgedOutcome {
    pub fn matched(&self) -> usize {
        self.statuses.iter().filter(|s| s.woman().is_some()).count()
    }
}

fn simulate(inst: &MatchingInstance, limit: Option<u32>) -> AbridgedOutcome {
    let n = inst.men();
    let mut next = vec![0usize; n];
    let mut holder: Vec<Option<u32>> = vec![None; inst.women()];
    let mut last_rejection = vec![0u32; n];
    let mut exhausted = 0u64;
    let mut free: Vec<u32> = Vec::with_capacity(n);
    for m in 0..n as u32 {
        if inst.list(m).is_empty() {
            exhausted += 1;
        } else {
            free.push(m);
        }
    }
    let mut proposals: Vec<Vec<u32>> = vec![Vec::new(); inst.women()];
    let mut touched: Vec<u32> = Vec::new();
    let mut rounds = Vec::new();
    let mut matched = 0u64;
    let mut round = 0u32;
    while !free.is_empty() && limit.is_none_or(|l| round < l) {
        round += 1;
        for &m in &free {
            let w = inst.list(m)[next[m as usize]];
            if proposals[w as usize].is_empty() {
                touched.push(w);
            }
            proposals[w as usize].push(m);
        }
        free.clear();
        touched.sort_unstable();
        let (mut rejected, mut continuing) = (0u64, 0u64);
        for &w in &touched {
            let mut suitors = std::mem::take(&mut proposals[w as usize]);
            if let Some(h) = holder[w as usize] {
                suitors.push(h);
            } else {
                matched += 1;
            }
            let best = *suitors
                .iter()
                .max_by_key(|&&m| inst.score(w, m))
                .expect("at least one suitor");
            holder[w as usize] = Some(best);
            for &m in suitors.iter().filter(|&&m| m != best) {
                rejected += 1;
                last_rejection[m as usize] = round;
                next[m as usize] += 1;
                if next[m as usize] == inst.list(m).len() {
                    exhausted += 1;
                } else {
                    continuing += 1;
                    free.push(m);
                }
            }
            proposals[w as usize] = suitors;
            proposals[w as usize].clear();
        }
        touched.clear();
        free.sort_unstable();
        rounds.push(RoundStats {
            round,
            rejected,
            continuing,
            exhausted,
            matched,
        });
    }
    let mut statuses = vec![ManStatus::Unmatched; n];
    for (w, h) in holder.iter().enumerate() {
        if let Some(m) = h {
            statuses[*m as usize] = ManStatus::Matched(w as u32);
        }
    }
    if let Some(l) = limit {
        for m in 0..n {
            if statuses[m] == ManStatus::Unmatched && last_rejection[m] == l {
                statuses[m] = ManStatus::Disqualified;
            }
        }
    }
    AbridgedOutcome { statuses, rounds }
}

/// Gale-Shapley run to quiescence. Never reports `Disqualified`.
pub fn global_gs(inst: &MatchingInstance) -> Vec<ManStatus> {
    simulate(inst, None).statuses
}

/// Gale-Shapley stopped after `rounds` rounds, with per-round statistics.
pub fn abridged_gs(inst: &MatchingInstance, rounds: u32) -> Result<AbridgedOutcome> {
    if rounds == 0 {
        return Err(invalid("rounds must be at least 1"));
    }
    Ok(simulate(inst, Some(rounds)))
}

/// Number of rounds used for list length `k`: `2k^2`.
pub fn default_rounds(k: usize) -> u32 {
    (2 * k * k).max(1) as u32
}

/// Round count after which at most `eps * M*` men remain rejected-but-active:
/// `k + 1 + ceil(k (1 + 1/eps) ln(2k^2/eps))`.
pub fn rounds_for_epsilon(k: usize, eps: f64) -> Result<u32> {
    if !eps.is_finite() || eps <= 0.0 {
        return Err(invalid("eps must be positive"));
    }
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    let k = k as f64;
    let tail = (k * (1.0 + 1.0 / eps) * (2.0 * k * k / eps).ln())
        .ceil()
        .max(0.0);
    Ok((k + 1.0 + tail) as u32)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocalAgsStrategy {
    /// Round-indexed lazy evaluation: a man's rejection at round `t` only
    /// needs the proposals of better-ranked suitors up to round `t`, whose
    /// own state is needed up to round `t - 1`.
    #[default]
    Lazy,
    /// Round 1 on the `2l`-neighbourhood, round 2 on the `2l - 2`
    /// neighbourhood, ..., round `l` on the 2-neighbourhood.
    Neighborhood,
}

/// Status of `man` under [`abridged_gs`], computed from his neighbourhood only.
pub fn local_ags(
    inst: &MatchingInstance,
    rounds: u32,
    man: u32,
    counter: &mut ProbeCounter,
) -> Result<ManStatus> {
    local_ags_with(inst, rounds, man, LocalAgsStrategy::Lazy, counter)
}

pub fn local_ags_with(
    inst: &MatchingInstance,
    rounds: u32,
    man: u32,
    strategy: LocalAgsStrategy,
    counter: &mut ProbeCounter,
) -> Result<ManStatus> {
    if rounds == 0 {
        return Err(invalid("rounds must be at least 1"));
    }
    inst.check_man(man)?;
    Ok(match strategy {
        LocalAgsStrategy::Lazy => LazyAgs::new(inst, rounds).status(man, counter),
        LocalAgsStrategy::Neighborhood => neighborhood_ags(inst, rounds, man, counter),
    })
}

/// Partner of `woman` under [`abridged_gs`], derived from her suitors' local
/// answers.
pub fn local_ags_woman(
    inst: &MatchingInstance,
    rounds: u32,
    woman: u32,
    counter: &mut ProbeCounter,
) -> Result<Option<u32>> {
    if rounds == 0 {
        return Err(invalid("rounds must be at least 1"));
    }
    if woman as usize >= inst.women() {
        return Err(invalid(format!("unknown woman {woman}")));
    }
    let mut session = LazyAgs::new(inst, rounds);
    let suitors = session.suitors(woman, counter);
    for m in suitors {
        if session.status(m, counter) == ManStatus::Matched(woman) {
            return Ok(Some(m));
        }
    }
    Ok(None)
}

#[derive(Clone, Debug)]
struct Trajectory {
    /// Rounds `1..=through` are fully known.
    through: u32,
    /// Index of the woman currently proposed to / held by.
    pos: usize,
    /// `rejections[p]` is the round in which woman `p` rejected him.
    rejections: Vec<u32>,
}

impl Trajectory {
    fn proposal_round(&self, pos: usize) -> u32 {
        if pos == 0 {
            1
        } else {
            self.rejections[pos - 1] + 1
        }
    }
}

struct LazyAgs<'a> {
    inst: &'a MatchingInstance,
    rounds: u32,
    lists: HashMap<u32, Vec<u32>>,
    suitors: HashMap<u32, Vec<u32>>,
    traj: HashMap<u32, Trajectory>,
}

impl<'a> LazyAgs<'a> {
    fn new(inst: &'a MatchingInstance, rounds: u32) -> Self {
        LazyAgs {
            inst,
            rounds,
            lists: HashMap::new(),
            suitors: HashMap::new(),
            traj: HashMap::new(),
        }
    }

    fn list(&mut self, man: u32, counter: &mut ProbeCounter) -> &[u32] {
        let inst = self.inst;
        self.lists
            .entry(man)
            .or_insert_with(|| inst.men.forward(man, counter).to_vec())
    }

    fn suitors(&mut self, woman: u32, counter: &mut ProbeCounter) -> Vec<u32> {
        let inst = self.inst;
        self.suitors
            .entry(woman)
            .or_insert_with(|| inst.men.reverse(woman, counter).to_vec())
            .clone()
    }

    fn status(&mut self, man: u32, counter: &mut ProbeCounter) -> ManStatus {
        self.ensure(man, self.rounds, counter);
        let len = self.list(man, counter).len();
        let t = &self.traj[&man];
        if t.rejections.last() == Some(&self.rounds) {
            ManStatus::Disqualified
        } else if t.pos == len {
            ManStatus::Unmatched
        } else {
            ManStatus::Matched(self.lists[&man][t.pos])
        }
    }

    /// Whether `man` has proposed to `woman` by round `round`.
    fn proposed_by(
        &mut self,
        man: u32,
        woman: u32,
        round: u32,
        counter: &mut ProbeCounter,
    ) -> bool {
        let Some(q) = self.list(man, counter).iter().position(|&w| w == woman) else {
            return false;
        };
        if q == 0 {
            return round >= 1;
        }
        // reaching position q takes at least q rejections
        if q as u32 + 1 > round {
            return false;
        }
        self.ensure(man, round - 1, counter);
        let t = &self.traj[&man];
        t.pos >= q && t.proposal_round(q) <= round
    }

    fn ensure(&mut self, man: u32, upto: u32, counter: &mut ProbeCounter) {
        let len = self.list(man, counter).len();
        let mut t = self.traj.entry(man).or_insert_with(|| Trajectory {
            through: 0,
            pos: 0,
            rejections: Vec::new(),
        });
        while t.through < upto {
            let round = t.through + 1;
            let pos = t.pos;
            if pos < len {
                let woman = self.lists[&man][pos];
                let rivals = self.suitors(woman, counter);
                let mut rejected = false;
                for rival in rivals {
                    if rival != man
                        && self.inst.prefers(woman, rival, man)
                        && self.proposed_by(rival, woman, round, counter)
                    {
                        rejected = true;
                        break;
                    }
                }
                t = self.traj.get_mut(&man).unwrap();
                if rejected {
                    t.rejections.push(round);
                    t.pos += 1;
                }
            } else {
                t = self.traj.get_mut(&man).unwrap();
            }
            t.through = round;
        }
    }
}

fn neighborhood_ags(
    inst: &MatchingInstance,
    rounds: u32,
    man: u32,
    counter: &mut ProbeCounter,
) -> ManStatus {
    let radius = 2 * rounds;
    let mut lists: HashMap<u32, Vec<u32>> = HashMap::new();
    let mut dist: HashMap<u32, u32> = HashMap::new();
    let reached = inst
        .men
        .distances(Entity::Left(man), radius, counter)
        .expect("man checked by caller");
    for (e, d) in reached {
        if let Entity::Left(m) = e {
            dist.insert(m, d);
        }
    }
    let mut men: Vec<u32> = dist.keys().copied().collect();
    men.sort_unstable();
    let mut next: HashMap<u32, usize> = men.iter().map(|&m| (m, 0)).collect();
    let mut last_rejection: HashMap<u32, u32> = HashMap::new();
    let mut holder: HashMap<u32, u32> = HashMap::new();
    let mut free: Vec<u32> = men.clone();
    for round in 1..=rounds {
        let reach = radius - 2 * (round - 1);
        let mut proposals: std::collections::BTreeMap<u32, Vec<u32>> = Default::default();
        let mut idle = Vec::new();
        for &m in &free {
            if dist[&m] > reach {
                idle.push(m);
                continue;
            }
            // lists of men at the BFS boundary were not expanded
            let list = lists.entry(m).or_insert_with(|| {
                if dist[&m] < radius {
                    inst.men.forward_raw(m).to_vec()
                } else {
                    inst.men.forward(m, counter).to_vec()
                }
            });
            if next[&m] < list.len() {
                proposals.entry(list[next[&m]]).or_default().push(m);
            }
        }
        free = idle;
        for (w, mut suitors) in proposals {
            if let Some(&h) = holder.get(&w) {
                suitors.push(h);
            }
            let best = *suitors.iter().max_by_key(|&&m| inst.score(w, m)).unwrap();
            holder.insert(w, best);
            for m in suitors.into_iter().filter(|&m| m != best) {
                *next.get_mut(&m).unwrap() += 1;
                last_rejection.insert(m, round);
                free.push(m);
            }
        }
    }
    if let Some((&w, _)) = holder.iter().find(|(_, &h)| h == man) {
        ManStatus::Matched(w)
    } else if last_rejection.get(&man) == Some(&rounds) {
        ManStatus::Disqualified
    } else {
        ManStatus::Unmatched
    }
}

/// Couples `(m, w)` where `w` ranks above `m`'s assignment on his list and
/// `w` prefers `m` to her partner. Disqualified men never block.
pub fn blocking_pairs(inst: &MatchingInstance, statuses: &[ManStatus]) -> Result<Vec<(u32, u32)>> {
    if statuses.len() != inst.men() {
        return Err(invalid("one status per man required"));
    }
    let mut partner: Vec<Option<u32>> = vec![None; inst.women()];
    for (m, s) in statuses.iter().enumerate() {
        if let ManStatus::Matched(w) = s {
            let slot = partner
                .get_mut(*w as usize)
                .ok_or_else(|| invalid(format!("unknown woman {w}")))?;
            if let Some(other) = slot {
                return Err(invalid(format!("woman {w} matched to men {other} and {m}")));
            }
            *slot = Some(m as u32);
        }
    }
    let mut pairs = Vec::new();
    for (m, s) in statuses.iter().enumerate() {
        let m = m as u32;
        let better: &[u32] = match s {
            ManStatus::Disqualified => continue,
            ManStatus::Unmatched => inst.list(m),
            ManStatus::Matched(w) => {
                let l = inst.list(m);
                let pos = l
                    .iter()
                    .position(|x| x == w)
                    .ok_or_else(|| invalid(format!("man {m} matched to unlisted woman {w}")))?;
                &l[..pos]
            }
        };
        for &w in better {
            let blocks = match partner[w as usize] {
                None => true,
                Some(p) => inst.prefers(w, m, p),
            };
            if blocks {
                pairs.push((m, w));
            }
        }
    }
    Ok(pairs)
}
