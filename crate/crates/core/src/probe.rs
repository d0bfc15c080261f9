//! Probe accounting and bidirectional adjacency access.
//!
//! A probe is one adjacency-list fetch through an [`AdjacencyOracle`]. Building
//! the oracle (including the transposed lists) is setup cost and is never
//! charged to a query.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Oracle accesses made while answering one query.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeCounter {
    probes: u64,
}

impl ProbeCounter {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn tick(&mut self) {
        self.probes += 1;
    }

    pub fn probes(&self) -> u64 {
        self.probes
    }

    pub fn reset(&mut self) {
        self.probes = 0;
    }
}

/// A vertex of the bipartite incidence graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Entity {
    /// Men, jobs, buyers, agents.
    Left(u32),
    /// Women, machines or slots, items, houses.
    Right(u32),
}

/// Compressed forward lists plus their exact transpose.
///
/// Forward lists keep their order and may repeat an entry (restricted
/// scheduling choice multisets); reverse lists are sorted by left id and
/// contain each left entity at most once.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdjacencyOracle {
    right_count: usize,
    fwd_offsets: Vec<usize>,
    fwd: Vec<u32>,
    rev_offsets: Vec<usize>,
    rev: Vec<u32>,
}

impl AdjacencyOracle {
    pub fn from_lists(right_count: usize, lists: &[Vec<u32>]) -> Result<Self> {
        let mut fwd_offsets = Vec::with_capacity(lists.len() + 1);
        let mut fwd = Vec::new();
        fwd_offsets.push(0);
        let mut degree = vec![0usize; right_count];
        for (i, list) in lists.iter().enumerate() {
            for (pos, &r) in list.iter().enumerate() {
                if r as usize >= right_count {
                    return Err(invalid(format!(
                        "left entity {i} lists right entity {r}, but only {right_count} exist"
                    )));
                }
                if !list[..pos].contains(&r) {
                    degree[r as usize] += 1;
                }
                fwd.push(r);
            }
            fwd_offsets.push(fwd.len());
        }
        let mut rev_offsets = Vec::with_capacity(right_count + 1);
        rev_offsets.push(0);
        for d in &degree {
            rev_offsets.push(rev_offsets.last().unwrap() + d);
        }
        let mut fill = rev_offsets[..right_count].to_vec();
        let mut rev = vec![0u32; *rev_offsets.last().unwrap()];
        for (i, list) in lists.iter().enumerate() {
            for (pos, &r) in list.iter().enumerate() {
                if !list[..pos].contains(&r) {
                    rev[fill[r as usize]] = i as u32;
                    fill[r as usize] += 1;
                }
            }
        }
        Ok(AdjacencyOracle {
            right_count,
            fwd_offsets,
            fwd,
            rev_offsets,
            rev,
        })
    }

    pub fn left_count(&self) -> usize {
        self.fwd_offsets.len() - 1
    }

    pub fn right_count(&self) -> usize {
        self.right_count
    }

    /// Forward list of a left entity, charged as one probe.
    #[inline]
    pub fn forward(&self, left: u32, counter: &mut ProbeCounter) -> &[u32] {
        counter.tick();
        self.forward_raw(left)
    }

    /// Reverse list of a right entity, charged as one probe.
    #[inline]
    pub fn reverse(&self, right: u32, counter: &mut ProbeCounter) -> &[u32] {
        counter.tick();
        self.reverse_raw(right)
    }

    /// Uncharged access for global reference algorithms and setup.
    #[inline]
    pub fn forward_raw(&self, left: u32) -> &[u32] {
        let i = left as usize;
        &self.fwd[self.fwd_offsets[i]..self.fwd_offsets[i + 1]]
    }

    #[inline]
    pub fn reverse_raw(&self, right: u32) -> &[u32] {
        let j = right as usize;
        &self.rev[self.rev_offsets[j]..self.rev_offsets[j + 1]]
    }

    pub fn forward_lists(&self) -> Vec<Vec<u32>> {
        (0..self.left_count() as u32)
            .map(|i| self.forward_raw(i).to_vec())
            .collect()
    }

    pub fn contains(&self, e: Entity) -> bool {
        match e {
            Entity::Left(i) => (i as usize) < self.left_count(),
            Entity::Right(j) => (j as usize) < self.right_count,
        }
    }

    /// Every entity within `radius` edges of `v` (breadth-first), charging one
    /// probe per adjacency list expanded.
    pub fn neighborhood(
        &self,
        v: Entity,
        radius: u32,
        counter: &mut ProbeCounter,
    ) -> Result<BTreeSet<Entity>> {
        Ok(self
            .distances(v, radius, counter)?
            .into_iter()
            .map(|(e, _)| e)
            .collect())
    }

    /// Breadth-first distances up to `radius`, in discovery order.
    pub fn distances(
        &self,
        v: Entity,
        radius: u32,
        counter: &mut ProbeCounter,
    ) -> Result<Vec<(Entity, u32)>> {
        if !self.contains(v) {
            return Err(invalid(format!("unknown entity {v:?}")));
        }
        let mut seen_left = std::collections::HashSet::new();
        let mut seen_right = std::collections::HashSet::new();
        let mark = |e: Entity,
                    l: &mut std::collections::HashSet<u32>,
                    r: &mut std::collections::HashSet<u32>| match e {
            Entity::Left(i) => l.insert(i),
            Entity::Right(j) => r.insert(j),
        };
        mark(v, &mut seen_left, &mut seen_right);
        let mut order = vec![(v, 0)];
        let mut queue = VecDeque::from([(v, 0u32)]);
        while let Some((u, d)) = queue.pop_front() {
            if d == radius {
                continue;
            }
            let (next, wrap): (&[u32], fn(u32) -> Entity) = match u {
                Entity::Left(i) => (self.forward(i, counter), Entity::Right),
                Entity::Right(j) => (self.reverse(j, counter), Entity::Left),
            };
            for &x in next {
                let e = wrap(x);
                if mark(e, &mut seen_left, &mut seen_right) {
                    order.push((e, d + 1));
                    queue.push_back((e, d + 1));
                }
            }
        }
        Ok(order)
    }
}
