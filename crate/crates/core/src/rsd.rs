//! Random serial dictatorship for house allocation.

use std::collections::HashMap;

use crate::error::{invalid, Result};
use crate::instance::{build_instance, Family, InstanceSpec};
use crate::probe::{AdjacencyOracle, ProbeCounter};
use crate::query_tree::arrives_before;
use crate::rng::{DrawKey, Purpose, RandomTape};

const ARRIVAL_DRAW: Purpose = Purpose::new("agent-rank");

#[derive(Clone, Debug)]
pub struct HousingInstance {
    lists: AdjacencyOracle,
    ranks: Vec<u64>,
}

impl HousingInstance {
    pub fn from_spec(spec: &InstanceSpec) -> Result<Self> {
        if spec.family != Family::Housing {
            return Err(invalid(format!(
                "expected a housing spec, got {}",
                spec.family
            )));
        }
        let lists = build_instance(spec)?;
        let ranks = seeded_ranks(&spec.tape(), spec.n);
        Self::assemble(lists, ranks)
    }

    /// `n` agents and `n` houses, `d` houses per list.
    pub fn seeded(seed: u64, n: usize, d: usize) -> Result<Self> {
        Self::from_spec(&InstanceSpec::new(Family::Housing, seed, n, n, d))
    }

    /// Preference lists (best first) with explicit arrival ranks; smaller
    /// ranks pick first.
    pub fn explicit(houses: usize, lists: Vec<Vec<u32>>, ranks: Vec<u64>) -> Result<Self> {
        if ranks.len() != lists.len() {
            return Err(invalid("one rank per agent required"));
        }
        for (i, l) in lists.iter().enumerate() {
            if (1..l.len()).any(|p| l[..p].contains(&l[p])) {
                return Err(invalid(format!("agent {i} lists a house twice")));
            }
        }
        Self::assemble(AdjacencyOracle::from_lists(houses, &lists)?, ranks)
    }

    fn assemble(lists: AdjacencyOracle, ranks: Vec<u64>) -> Result<Self> {
        Ok(HousingInstance { lists, ranks })
    }

    pub fn agents(&self) -> usize {
        self.lists.left_count()
    }

    pub fn houses(&self) -> usize {
        self.lists.right_count()
    }

    pub fn rank(&self, agent: u32) -> u64 {
        self.ranks[agent as usize]
    }

    pub fn list(&self, agent: u32) -> &[u32] {
        self.lists.forward_raw(agent)
    }

    pub fn oracle(&self) -> &AdjacencyOracle {
        &self.lists
    }

    fn before(&self, a: u32, b: u32) -> bool {
        arrives_before(self.ranks[a as usize], a, self.ranks[b as usize], b)
    }
}

/// Ranks uniform in `[1, n^4]`, the bound saturating at `u64::MAX`.
fn seeded_ranks(tape: &RandomTape, n: usize) -> Vec<u64> {
    let top = (n as u64).checked_pow(4).unwrap_or(u64::MAX);
    (0..n as u64)
        .map(|i| 1 + tape.below(DrawKey::with_purpose(ARRIVAL_DRAW, i, 0), top))
        .collect()
}

/// Agents in increasing rank (ties by id) each take their best free listed
/// house.
pub fn rsd_global(inst: &HousingInstance) -> Vec<Option<u32>> {
    let mut order: Vec<u32> = (0..inst.agents() as u32).collect();
    order.sort_by_key(|&a| (inst.ranks[a as usize], a));
    let mut taken = vec![false; inst.houses()];
    let mut out = vec![None; inst.agents()];
    for a in order {
        if let Some(&h) = inst.list(a).iter().find(|&&h| !taken[h as usize]) {
            taken[h as usize] = true;
            out[a as usize] = Some(h);
        }
    }
    out
}

/// One agent under evaluation: its list, the house being checked and the
/// earlier agents that also list it.
struct Pending {
    agent: u32,
    list: Vec<u32>,
    pos: usize,
    rivals: Vec<u32>,
    next: usize,
}

struct LazyRsd<'a> {
    inst: &'a HousingInstance,
    forward: HashMap<u32, Vec<u32>>,
    reverse: HashMap<u32, Vec<u32>>,
    solved: HashMap<u32, Option<u32>>,
}

impl LazyRsd<'_> {
    fn list(&mut self, agent: u32, counter: &mut ProbeCounter) -> Vec<u32> {
        let lists = &self.inst.lists;
        self.forward
            .entry(agent)
            .or_insert_with(|| lists.forward(agent, counter).to_vec())
            .clone()
    }

    /// Earlier listers of `house`, earliest first.
    fn rivals(&mut self, agent: u32, house: u32, counter: &mut ProbeCounter) -> Vec<u32> {
        let inst = self.inst;
        let all = self
            .reverse
            .entry(house)
            .or_insert_with(|| inst.lists.reverse(house, counter).to_vec());
        let mut out: Vec<u32> = all
            .iter()
            .copied()
            .filter(|&o| inst.before(o, agent))
            .collect();
        out.sort_unstable_by_key(|&o| (inst.ranks[o as usize], o));
        out
    }

    fn open(&mut self, agent: u32, counter: &mut ProbeCounter) -> Pending {
        let list = self.list(agent, counter);
        let rivals = match list.first() {
            Some(&h) => self.rivals(agent, h, counter),
            None => Vec::new(),
        };
        Pending {
            agent,
            list,
            pos: 0,
            rivals,
            next: 0,
        }
    }

    fn answer(&mut self, agent: u32, counter: &mut ProbeCounter) -> Option<u32> {
        let first = self.open(agent, counter);
        let mut stack = vec![first];
        while let Some(top) = stack.last_mut() {
            if top.pos == top.list.len() {
                self.solved.insert(top.agent, None);
                stack.pop();
                continue;
            }
            let house = top.list[top.pos];
            if top.next == top.rivals.len() {
                self.solved.insert(top.agent, Some(house));
                stack.pop();
                continue;
            }
            let rival = top.rivals[top.next];
            match self.solved.get(&rival) {
                None => {
                    let frame = self.open(rival, counter);
                    stack.push(frame);
                }
                Some(&taken) if taken == Some(house) => {
                    let (a, pos) = (top.agent, top.pos + 1);
                    let rivals = match top.list.get(pos) {
                        Some(&h) => self.rivals(a, h, counter),
                        None => Vec::new(),
                    };
                    let top = stack.last_mut().unwrap();
                    top.pos = pos;
                    top.rivals = rivals;
                    top.next = 0;
                }
                Some(_) => top.next += 1,
            }
        }
        self.solved[&agent]
    }
}

/// House of `agent` under [`rsd_global`]. Houses are checked in list order;
/// only earlier agents listing the house under inspection are resolved,
/// recursively, so later houses are never read once one is free.
pub fn rsd_local(
    inst: &HousingInstance,
    agent: u32,
    counter: &mut ProbeCounter,
) -> Result<Option<u32>> {
    if agent as usize >= inst.agents() {
        return Err(invalid(format!("unknown agent {agent}")));
    }
    let mut eval = LazyRsd {
        inst,
        forward: HashMap::new(),
        reverse: HashMap::new(),
        solved: HashMap::new(),
    };
    Ok(eval.answer(agent, counter))
}
