//! Exact reference solvers and the slot-load majorization toolkit.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{DrawKey, Purpose, RandomTape};
use crate::scheduling::{ratio, SchedulingInstance, SchedulingMode};

const COUPLING_DRAW: Purpose = Purpose::new("coupling");

/// Packing search refuses more candidate sets than this.
pub const PACKING_LIMIT: usize = 20;

fn sorted_desc(v: &[u64]) -> Vec<u64> {
    let mut s = v.to_vec();
    s.sort_unstable_by(|a, b| b.cmp(a));
    s
}

/// Prefix-sum dominance of the descending rearrangements, compared up to
/// the shorter length.
pub fn majorizes(p: &[u64], q: &[u64]) -> bool {
    let (p, q) = (sorted_desc(p), sorted_desc(q));
    let (mut a, mut b) = (0u128, 0u128);
    for (x, y) in p.iter().zip(&q) {
        a += *x as u128;
        b += *y as u128;
        if a < b {
            return false;
        }
    }
    true
}

/// For normalized `p ⪰ q` of equal length and positions `i <= j`, whether
/// `p + e_i` still majorizes `q + e_j`.
pub fn majorization_step_check(p: &[u64], q: &[u64], i: usize, j: usize) -> Result<bool> {
    if p.len() != q.len() {
        return Err(invalid("vectors must have equal length"));
    }
    if i > j || j >= p.len() {
        return Err(invalid("positions must satisfy i <= j < len"));
    }
    if !majorizes(p, q) {
        return Err(invalid("p must majorize q"));
    }
    let (mut p, mut q) = (sorted_desc(p), sorted_desc(q));
    p[i] += 1;
    q[j] += 1;
    Ok(majorizes(&p, &q))
}

/// Per-slot job counts: a machine with `r` jobs on `c` slots has `r mod c`
/// slots holding `ceil(r/c)` and the rest holding `floor(r/c)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotLoadVector(pub Vec<u64>);

impl SlotLoadVector {
    pub fn from_heights(heights: &[u64], caps: &[u64]) -> Result<Self> {
        if heights.len() != caps.len() {
            return Err(invalid("one capacity per machine required"));
        }
        let mut out = Vec::with_capacity(caps.iter().sum::<u64>() as usize);
        for (&r, &c) in heights.iter().zip(caps) {
            if c == 0 {
                if r > 0 {
                    return Err(invalid("jobs on a machine without slots"));
                }
                continue;
            }
            let (q, extra) = (r / c, r % c);
            out.extend(std::iter::repeat_n(q + 1, extra as usize));
            out.extend(std::iter::repeat_n(q, (c - extra) as usize));
        }
        Ok(SlotLoadVector(out))
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn max(&self) -> u64 {
        self.0.iter().copied().max().unwrap_or(0)
    }

    pub fn normalized(&self) -> Vec<u64> {
        sorted_desc(&self.0)
    }
}

/// How slot choices of the capacitated system are paired with those of the
/// unit-machine system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coupling {
    /// Both systems use the same slot indices.
    Identity,
    /// Both systems use the same two distinct load ranks.
    Rank,
    /// Both systems use the same quantile of their landing-load
    /// distributions over the `C^2` ordered slot pairs.
    Quantile,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CouplingFailure {
    pub trial: u64,
    pub step: u64,
    pub capacitated: Vec<u64>,
    pub unit: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MajorizationReport {
    pub trials: u64,
    /// Trials where some step broke `S_unit ⪰ S_capacitated`.
    pub violations: u64,
    /// Trials where some step had the unit system's max load below the
    /// capacitated system's max slot load.
    pub max_load_violations: u64,
    pub first_failure: Option<CouplingFailure>,
}

impl MajorizationReport {
    pub fn holds(&self) -> bool {
        self.violations == 0 && self.max_load_violations == 0
    }
}

fn rlms_pick(heights: &[u64], caps: &[u64], a: usize, b: usize) -> usize {
    let key = |i: usize| ((heights[i] + 1) / caps[i], i);
    if key(b) < key(a) {
        b
    } else {
        a
    }
}

/// Paired runs of the restricted mechanism on machines with `caps` (two
/// uniform slot choices per job, ties by index) and of the same rule on
/// `C = sum(caps)` unit machines, checking after every job that the unit
/// system's slot-load vector majorizes the capacitated one's.
pub fn uniform_majorizes_nonuniform(
    caps: &[u64],
    jobs: usize,
    trials: u64,
    seed: u64,
    coupling: Coupling,
) -> Result<MajorizationReport> {
    if caps.is_empty() || caps.contains(&0) {
        return Err(invalid("capacities must be positive"));
    }
    let total = caps.iter().sum::<u64>();
    let owner: Vec<usize> = caps
        .iter()
        .enumerate()
        .flat_map(|(i, &c)| std::iter::repeat_n(i, c as usize))
        .collect();
    let tape = RandomTape::new(seed);
    let mut report = MajorizationReport {
        trials,
        violations: 0,
        max_load_violations: 0,
        first_failure: None,
    };
    for trial in 0..trials {
        let mut ha = vec![0u64; caps.len()];
        let mut hb = vec![0u64; total as usize];
        let (mut broke, mut broke_max) = (false, false);
        for step in 0..jobs as u64 {
            let draw = |c: u64, range: u64| {
                tape.below(
                    DrawKey::with_purpose(COUPLING_DRAW, trial, 2 * step + c),
                    range,
                )
            };
            match coupling {
                Coupling::Identity => {
                    let (s1, s2) = (draw(0, total) as usize, draw(1, total) as usize);
                    let a = rlms_pick(&ha, caps, owner[s1], owner[s2]);
                    ha[a] += 1;
                    let b = if (hb[s2], s2) < (hb[s1], s1) { s2 } else { s1 };
                    hb[b] += 1;
                }
                Coupling::Rank => {
                    let (k1, k2) = if total == 1 {
                        (0, 0)
                    } else {
                        let x = draw(0, total);
                        let mut y = draw(1, total - 1);
                        if y >= x {
                            y += 1;
                        }
                        (x.min(y) as usize, x.max(y) as usize)
                    };
                    let sa = SlotLoadVector::from_heights(&ha, caps)?.0;
                    let mut order_a: Vec<usize> = (0..total as usize).collect();
                    order_a.sort_by_key(|&s| (std::cmp::Reverse(sa[s]), s));
                    let mut order_b: Vec<usize> = (0..total as usize).collect();
                    order_b.sort_by_key(|&s| (std::cmp::Reverse(hb[s]), s));
                    let a = rlms_pick(&ha, caps, owner[order_a[k1]], owner[order_a[k2]]);
                    ha[a] += 1;
                    hb[order_b[k2]] += 1;
                }
                Coupling::Quantile => {
                    let u = draw(0, total * total);
                    let a = quantile_capacitated(&ha, caps, u);
                    ha[a] += 1;
                    let b = quantile_unit(&hb, u);
                    hb[b] += 1;
                }
            }
            let sa = SlotLoadVector::from_heights(&ha, caps)?;
            let bad = !majorizes(&hb, &sa.0);
            let bad_max = hb.iter().copied().max().unwrap_or(0) < sa.max();
            if (bad || bad_max) && report.first_failure.is_none() {
                report.first_failure = Some(CouplingFailure {
                    trial,
                    step,
                    capacitated: ha.clone(),
                    unit: hb.clone(),
                });
            }
            broke |= bad;
            broke_max |= bad_max;
        }
        report.violations += broke as u64;
        report.max_load_violations += broke_max as u64;
    }
    Ok(report)
}

/// Machine receiving the job whose slot pair sits at position `u` when all
/// ordered pairs are sorted by the load of the slot the job lands on.
fn quantile_capacitated(heights: &[u64], caps: &[u64], u: u64) -> usize {
    let n = caps.len();
    let mut pairs: Vec<(u64, usize, usize)> = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            let land = rlms_pick(heights, caps, a, b);
            pairs.push((heights[land] / caps[land], a, b));
        }
    }
    pairs.sort_unstable();
    let mut acc = 0u64;
    for (_, a, b) in pairs {
        acc += caps[a] * caps[b];
        if u < acc {
            return rlms_pick(heights, caps, a, b);
        }
    }
    unreachable!("u below C^2")
}

/// Unit-system counterpart: the landing load of a pair is the smaller of
/// its two heights, and `#{pairs with landing >= v} = #{h >= v}^2`.
fn quantile_unit(heights: &[u64], u: u64) -> usize {
    let mut values: Vec<u64> = heights.to_vec();
    values.sort_unstable();
    values.dedup();
    let at_least = |v: u64| heights.iter().filter(|&&h| h >= v).count() as u64;
    let mut acc = 0u64;
    for (idx, &v) in values.iter().enumerate() {
        let above = values.get(idx + 1).map_or(0, |&w| at_least(w));
        let g = at_least(v);
        acc += g * g - above * above;
        if u < acc {
            return heights.iter().position(|&h| h == v).unwrap();
        }
    }
    unreachable!("u below C^2")
}

/// Maximum cardinality bipartite matching (Hopcroft-Karp).
pub fn max_matching(right_count: usize, adjacency: &[Vec<u32>]) -> Result<usize> {
    let n = adjacency.len();
    for l in adjacency {
        if l.iter().any(|&r| r as usize >= right_count) {
            return Err(invalid("edge to unknown right vertex"));
        }
    }
    const FREE: usize = usize::MAX;
    let mut mate_l = vec![FREE; n];
    let mut mate_r = vec![FREE; right_count];
    let mut dist = vec![0u32; n];
    let mut size = 0;
    loop {
        let mut queue = VecDeque::new();
        for u in 0..n {
            if mate_l[u] == FREE {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = u32::MAX;
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &r in &adjacency[u] {
                let w = mate_r[r as usize];
                if w == FREE {
                    found = true;
                } else if dist[w] == u32::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        if !found {
            return Ok(size);
        }
        let mut edge = vec![0usize; n];
        for root in 0..n {
            if mate_l[root] != FREE {
                continue;
            }
            let mut path = vec![root];
            while let Some(&u) = path.last() {
                if edge[u] == adjacency[u].len() {
                    dist[u] = u32::MAX;
                    path.pop();
                    continue;
                }
                let r = adjacency[u][edge[u]] as usize;
                edge[u] += 1;
                let w = mate_r[r];
                if w == FREE {
                    // augment along the stack
                    let mut r = r;
                    while let Some(x) = path.pop() {
                        let prev = mate_l[x];
                        mate_l[x] = r;
                        mate_r[r] = x;
                        r = prev;
                    }
                    size += 1;
                    break;
                } else if dist[w] == dist[u] + 1 {
                    path.push(w);
                }
            }
        }
    }
}

/// Maximum total weight of a bipartite matching; `edges[l]` lists
/// `(right, weight)`. Exact successive-shortest-path min-cost flow.
pub fn max_weight_matching(
    right_count: usize,
    edges: &[Vec<(u32, BigRational)>],
) -> Result<BigRational> {
    let left = edges.len();
    let (source, sink) = (left + right_count, left + right_count + 1);
    let nodes = sink + 1;
    // arcs: (to, residual capacity, cost); arc ^ 1 is the reverse
    let mut arcs: Vec<(usize, u8, BigRational)> = Vec::new();
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    let mut add =
        |from: usize, to: usize, cost: BigRational, arcs: &mut Vec<(usize, u8, BigRational)>| {
            out[from].push(arcs.len());
            arcs.push((to, 1, cost.clone()));
            out[to].push(arcs.len());
            arcs.push((from, 0, -cost));
        };
    for (l, list) in edges.iter().enumerate() {
        add(source, l, BigRational::zero(), &mut arcs);
        for (r, w) in list {
            if *r as usize >= right_count {
                return Err(invalid("edge to unknown right vertex"));
            }
            if *w > BigRational::zero() {
                add(l, left + *r as usize, -w.clone(), &mut arcs);
            }
        }
    }
    for r in 0..right_count {
        add(left + r, sink, BigRational::zero(), &mut arcs);
    }
    let mut total = BigRational::zero();
    loop {
        let mut dist: Vec<Option<BigRational>> = vec![None; nodes];
        let mut via = vec![usize::MAX; nodes];
        let mut in_queue = vec![false; nodes];
        dist[source] = Some(BigRational::zero());
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            in_queue[u] = false;
            let du = dist[u].clone().unwrap();
            for &a in &out[u] {
                let (to, cap, ref cost) = arcs[a];
                if cap == 0 {
                    continue;
                }
                let cand = &du + cost;
                if dist[to].as_ref().is_none_or(|d| cand < *d) {
                    dist[to] = Some(cand);
                    via[to] = a;
                    if !in_queue[to] {
                        in_queue[to] = true;
                        queue.push_back(to);
                    }
                }
            }
        }
        match &dist[sink] {
            Some(d) if *d < BigRational::zero() => {
                total -= d;
                let mut v = sink;
                while v != source {
                    let a = via[v];
                    arcs[a].1 -= 1;
                    arcs[a ^ 1].1 += 1;
                    v = arcs[a ^ 1].0;
                }
            }
            _ => return Ok(total),
        }
    }
}

/// Maximum weight matching when every edge of left vertex `l` weighs
/// `weights[l]`: greedy over the transversal matroid in weight order.
pub fn max_vertex_weight_matching(
    right_count: usize,
    adjacency: &[Vec<u32>],
    weights: &[BigRational],
) -> Result<BigRational> {
    if weights.len() != adjacency.len() {
        return Err(invalid("one weight per left vertex required"));
    }
    let mut order: Vec<usize> = (0..adjacency.len()).collect();
    order.sort_by(|&a, &b| weights[b].cmp(&weights[a]).then(a.cmp(&b)));
    let mut mate_r: Vec<Option<usize>> = vec![None; right_count];
    let mut total = BigRational::zero();
    for l in order {
        if weights[l] <= BigRational::zero() {
            break;
        }
        if augment_from(l, adjacency, &mut mate_r)? {
            total += &weights[l];
        }
    }
    Ok(total)
}

/// Breadth-first augmenting path from an unmatched left vertex.
fn augment_from(root: usize, adjacency: &[Vec<u32>], mate_r: &mut [Option<usize>]) -> Result<bool> {
    let mut parent_r: Vec<Option<usize>> = vec![None; mate_r.len()];
    let mut seen_l = vec![false; adjacency.len()];
    let mut queue = VecDeque::from([root]);
    seen_l[root] = true;
    while let Some(u) = queue.pop_front() {
        for &r in &adjacency[u] {
            let r = r as usize;
            if r >= mate_r.len() {
                return Err(invalid("edge to unknown right vertex"));
            }
            if parent_r[r].is_some() {
                continue;
            }
            parent_r[r] = Some(u);
            match mate_r[r] {
                None => {
                    let mut r = r;
                    loop {
                        let l = parent_r[r].unwrap();
                        let prev = adjacency[l]
                            .iter()
                            .map(|&x| x as usize)
                            .find(|&x| mate_r[x] == Some(l));
                        mate_r[r] = Some(l);
                        match prev {
                            Some(p) if l != root => r = p,
                            _ => return Ok(true),
                        }
                    }
                }
                Some(w) if !seen_l[w] => {
                    seen_l[w] = true;
                    queue.push_back(w);
                }
                _ => {}
            }
        }
    }
    Ok(false)
}

/// Best total value of pairwise disjoint sets, by exhaustive search.
pub fn optimal_packing(sets: &[Vec<u32>], values: &[BigRational]) -> Result<BigRational> {
    if sets.len() != values.len() {
        return Err(invalid("one value per set required"));
    }
    if sets.len() > PACKING_LIMIT {
        return Err(Error::TooLarge(format!(
            "{} sets exceed the packing limit of {PACKING_LIMIT}",
            sets.len()
        )));
    }
    let universe = sets
        .iter()
        .flatten()
        .map(|&x| x as usize + 1)
        .max()
        .unwrap_or(0);
    let words = universe.div_ceil(64).max(1);
    let masks: Vec<Vec<u64>> = sets
        .iter()
        .map(|s| {
            let mut m = vec![0u64; words];
            for &x in s {
                m[x as usize / 64] |= 1 << (x % 64);
            }
            m
        })
        .collect();
    // suffix sums of positive values bound what the remaining sets can add
    let mut rest = vec![BigRational::zero(); sets.len() + 1];
    for i in (0..sets.len()).rev() {
        rest[i] = &rest[i + 1] + values[i].clone().max(BigRational::zero());
    }
    let mut best = BigRational::zero();
    let mut used = vec![0u64; words];
    pack(
        0,
        &masks,
        values,
        &rest,
        &mut used,
        BigRational::zero(),
        &mut best,
    );
    Ok(best)
}

fn pack(
    i: usize,
    masks: &[Vec<u64>],
    values: &[BigRational],
    rest: &[BigRational],
    used: &mut [u64],
    value: BigRational,
    best: &mut BigRational,
) {
    if value > *best {
        *best = value.clone();
    }
    if i == masks.len() || &value + &rest[i] <= *best {
        return;
    }
    let fits = masks[i].iter().zip(used.iter()).all(|(a, b)| a & b == 0);
    if fits && values[i] > BigRational::zero() {
        for (u, m) in used.iter_mut().zip(&masks[i]) {
            *u |= m;
        }
        pack(i + 1, masks, values, rest, used, &value + &values[i], best);
        for (u, m) in used.iter_mut().zip(&masks[i]) {
            *u &= !m;
        }
    }
    pack(i + 1, masks, values, rest, used, value, best);
}

/// `h / c` compared exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Frac(u64, u64);

impl Ord for Frac {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.0 as u128 * other.1 as u128).cmp(&(other.0 as u128 * self.1 as u128))
    }
}

impl PartialOrd for Frac {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Smallest achievable makespan for the instance's jobs on machines with
/// capacities `caps`. Standard mode is unrestricted; restricted mode keeps
/// every job on its choice set.
pub fn optimal_makespan(inst: &SchedulingInstance, caps: &[u64]) -> Result<BigRational> {
    if caps.len() != inst.machines() {
        return Err(invalid("one capacity per machine required"));
    }
    let m = inst.jobs() as u64;
    if m == 0 {
        return Ok(BigRational::zero());
    }
    match inst.mode() {
        SchedulingMode::Standard => {
            // the m-th smallest value among {h / c_i : h >= 1}
            let mut heap: BinaryHeap<std::cmp::Reverse<(Frac, usize)>> = caps
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(i, &c)| std::cmp::Reverse((Frac(1, c), i)))
                .collect();
            if heap.is_empty() {
                return Err(invalid("no machine has positive capacity"));
            }
            let mut last = Frac(0, 1);
            for _ in 0..m {
                let std::cmp::Reverse((f, i)) = heap.pop().unwrap();
                last = f;
                heap.push(std::cmp::Reverse((Frac(f.0 + 1, caps[i]), i)));
            }
            Ok(ratio(last.0, last.1))
        }
        SchedulingMode::Restricted => {
            let lists: Vec<Vec<u32>> = (0..inst.jobs() as u32)
                .map(|j| {
                    let mut l: Vec<u32> = inst
                        .choices(j)
                        .iter()
                        .copied()
                        .filter(|&i| caps[i as usize] > 0)
                        .collect();
                    l.sort_unstable();
                    l.dedup();
                    l
                })
                .collect();
            if let Some(j) = lists.iter().position(Vec::is_empty) {
                return Err(invalid(format!("job {j} has no usable machine")));
            }
            let mut degree = vec![0u64; caps.len()];
            for l in &lists {
                for &i in l {
                    degree[i as usize] += 1;
                }
            }
            let mut candidates: Vec<Frac> = Vec::new();
            for (i, &c) in caps.iter().enumerate() {
                for h in 1..=degree[i] {
                    candidates.push(Frac(h, c));
                }
            }
            candidates.sort_unstable();
            candidates.dedup_by(|a, b| (*a).cmp(b) == Ordering::Equal);
            let feasible = |t: Frac| -> bool {
                let limits: Vec<u64> = caps
                    .iter()
                    .map(|&c| ((t.0 as u128 * c as u128) / t.1 as u128) as u64)
                    .collect();
                assignment_flow(&lists, &limits) == m
            };
            let (mut lo, mut hi) = (0usize, candidates.len() - 1);
            while lo < hi {
                let mid = (lo + hi) / 2;
                if feasible(candidates[mid]) {
                    hi = mid;
                } else {
                    lo = mid + 1;
                }
            }
            let t = candidates[lo];
            Ok(ratio(t.0, t.1))
        }
    }
}

/// Jobs placeable when machine `i` accepts at most `limits[i]` of them.
pub fn assignment_flow(lists: &[Vec<u32>], limits: &[u64]) -> u64 {
    let jobs = lists.len();
    let (source, sink) = (jobs + limits.len(), jobs + limits.len() + 1);
    let mut flow = Dinic::new(sink + 1);
    for (j, l) in lists.iter().enumerate() {
        flow.add(source, j, 1);
        for &i in l {
            flow.add(j, jobs + i as usize, 1);
        }
    }
    for (i, &cap) in limits.iter().enumerate() {
        if cap > 0 {
            flow.add(jobs + i, sink, cap);
        }
    }
    flow.max_flow(source, sink)
}

struct Dinic {
    head: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<u64>,
    level: Vec<u32>,
    next: Vec<usize>,
}

impl Dinic {
    fn new(nodes: usize) -> Self {
        Dinic {
            head: vec![Vec::new(); nodes],
            to: Vec::new(),
            cap: Vec::new(),
            level: vec![0; nodes],
            next: vec![0; nodes],
        }
    }

    fn add(&mut self, a: usize, b: usize, c: u64) {
        self.head[a].push(self.to.len());
        self.to.push(b);
        self.cap.push(c);
        self.head[b].push(self.to.len());
        self.to.push(a);
        self.cap.push(0);
    }

    fn bfs(&mut self, s: usize, t: usize) -> bool {
        self.level.iter_mut().for_each(|l| *l = u32::MAX);
        self.level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.head[u] {
                let v = self.to[e];
                if self.cap[e] > 0 && self.level[v] == u32::MAX {
                    self.level[v] = self.level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        self.level[t] != u32::MAX
    }

    /// One blocking-flow augmentation along an explicit stack.
    fn push_path(&mut self, s: usize, t: usize) -> u64 {
        let mut path: Vec<usize> = Vec::new();
        let mut u = s;
        loop {
            if u == t {
                let pushed = path.iter().map(|&e| self.cap[e]).min().unwrap_or(0);
                for &e in &path {
                    self.cap[e] -= pushed;
                    self.cap[e ^ 1] += pushed;
                }
                return pushed;
            }
            let mut advanced = false;
            while self.next[u] < self.head[u].len() {
                let e = self.head[u][self.next[u]];
                let v = self.to[e];
                if self.cap[e] > 0 && self.level[v] == self.level[u] + 1 {
                    path.push(e);
                    u = v;
                    advanced = true;
                    break;
                }
                self.next[u] += 1;
            }
            if !advanced {
                if u == s {
                    return 0;
                }
                self.level[u] = u32::MAX;
                let e = path.pop().unwrap();
                u = self.to[e ^ 1];
                self.next[u] += 1;
            }
        }
    }

    fn max_flow(&mut self, s: usize, t: usize) -> u64 {
        let mut total = 0;
        while self.bfs(s, t) {
            self.next.iter_mut().for_each(|n| *n = 0);
            loop {
                let f = self.push_path(s, t);
                if f == 0 {
                    break;
                }
                total += f;
            }
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn big(x: u64) -> BigRational {
        BigRational::from_integer(BigInt::from(x))
    }

    #[test]
    fn majorization_examples() {
        assert!(majorizes(&[3, 1], &[2, 2]));
        assert!(!majorizes(&[2, 2], &[3, 1]));
        assert!(majorizes(&[1, 4, 2], &[1, 4, 2]));
        assert!(majorizes(&[1, 3], &[3, 1]));
    }

    #[test]
    fn step_check_examples() {
        assert!(majorization_step_check(&[1, 1], &[1, 1], 0, 0).unwrap());
        assert!(majorization_step_check(&[1, 1], &[1, 1], 1, 0).is_err());
        assert!(majorization_step_check(&[2, 2], &[3, 1], 0, 0).is_err());
    }

    #[test]
    fn slot_load_vector_balances_within_machine() {
        let s = SlotLoadVector::from_heights(&[5, 0, 7], &[2, 1, 3]).unwrap();
        assert_eq!(s.0, vec![3, 2, 0, 3, 2, 2]);
        assert_eq!(s.total(), 12);
        assert_eq!(s.max(), 3);
    }

    #[test]
    fn unit_capacities_coincide() {
        for c in [Coupling::Identity, Coupling::Rank, Coupling::Quantile] {
            let r = uniform_majorizes_nonuniform(&[1, 1, 1, 1], 8, 200, 3, c).unwrap();
            assert!(r.holds(), "{c:?}");
        }
    }

    #[test]
    fn small_matchings() {
        assert_eq!(max_matching(0, &[]).unwrap(), 0);
        let k33 = vec![vec![0, 1, 2]; 3];
        assert_eq!(max_matching(3, &k33).unwrap(), 3);
        // needs one augmentation through a matched vertex
        assert_eq!(max_matching(2, &[vec![0, 1], vec![0]]).unwrap(), 2);
        assert!(max_matching(1, &[vec![1]]).is_err());
    }

    #[test]
    fn weighted_matching_prefers_two_light_edges() {
        let w = |x: u64| big(x);
        let edges = vec![vec![(0, w(3)), (1, w(2))], vec![(0, w(2))]];
        assert_eq!(max_weight_matching(2, &edges).unwrap(), w(4));
        let weights = vec![w(5), w(3)];
        assert_eq!(
            max_vertex_weight_matching(2, &[vec![0, 1], vec![0]], &weights).unwrap(),
            w(8)
        );
    }

    #[test]
    fn packing_examples() {
        let sets = vec![vec![1, 2], vec![2, 3], vec![3]];
        let vals = vec![big(10), big(6), big(4)];
        assert_eq!(optimal_packing(&sets, &vals).unwrap(), big(14));
        let many = vec![vec![0]; 21];
        assert!(matches!(
            optimal_packing(&many, &vec![big(1); 21]),
            Err(Error::TooLarge(_))
        ));
    }

    #[test]
    fn makespan_examples() {
        let one = SchedulingInstance::standard(0, vec![2], 5, 1).unwrap();
        assert_eq!(optimal_makespan(&one, &[2]).unwrap(), ratio(5, 2));
        let two = SchedulingInstance::standard(0, vec![1, 1], 3, 2).unwrap();
        assert_eq!(optimal_makespan(&two, &[1, 1]).unwrap(), ratio(2, 1));
        let res =
            SchedulingInstance::restricted(0, vec![1, 2], vec![vec![0], vec![0], vec![1]]).unwrap();
        assert_eq!(optimal_makespan(&res, &[1, 2]).unwrap(), ratio(2, 1));
    }
}
