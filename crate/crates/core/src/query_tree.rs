//! Query-tree simulation of greedy online algorithms.
//!
//! An online greedy processes entities in a random arrival order. To answer
//! for one entity locally, only the earlier-arriving entities it conflicts
//! with need answers, recursively. The recursion is evaluated with an
//! explicit stack and a per-query memo.

use std::collections::HashMap;

use crate::probe::ProbeCounter;

pub trait QueryTree {
    type Answer: Clone;
    /// Oracle data fetched while expanding a node, reused when resolving it.
    type Frame;

    /// Reads what `node` needs from the oracle and returns the nodes whose
    /// answers must be known first. Every dependency must arrive strictly
    /// before `node`.
    fn expand(&self, node: u32, counter: &mut ProbeCounter) -> (Self::Frame, Vec<u32>);

    /// Computes the answer for `node` once all its dependencies are solved.
    fn resolve(
        &self,
        node: u32,
        frame: &Self::Frame,
        solved: &HashMap<u32, Self::Answer>,
    ) -> Self::Answer;
}

/// Memo for one query. Create a fresh session per query so answers never
/// depend on earlier queries.
pub struct QuerySession<'a, Q: QueryTree> {
    tree: &'a Q,
    solved: HashMap<u32, Q::Answer>,
}

struct Pending<F> {
    node: u32,
    frame: F,
    deps: Vec<u32>,
    next: usize,
}

impl<'a, Q: QueryTree> QuerySession<'a, Q> {
    pub fn new(tree: &'a Q) -> Self {
        QuerySession {
            tree,
            solved: HashMap::new(),
        }
    }

    pub fn answer(&mut self, node: u32, counter: &mut ProbeCounter) -> Q::Answer {
        if let Some(a) = self.solved.get(&node) {
            return a.clone();
        }
        let (frame, deps) = self.tree.expand(node, counter);
        let mut stack = vec![Pending {
            node,
            frame,
            deps,
            next: 0,
        }];
        while let Some(top) = stack.last_mut() {
            while top.next < top.deps.len() && self.solved.contains_key(&top.deps[top.next]) {
                top.next += 1;
            }
            if top.next < top.deps.len() {
                let dep = top.deps[top.next];
                let (frame, deps) = self.tree.expand(dep, counter);
                stack.push(Pending {
                    node: dep,
                    frame,
                    deps,
                    next: 0,
                });
            } else {
                let done = stack.pop().unwrap();
                let answer = self.tree.resolve(done.node, &done.frame, &self.solved);
                self.solved.insert(done.node, answer);
            }
        }
        self.solved[&node].clone()
    }

    /// Number of nodes resolved so far in this session.
    pub fn explored(&self) -> usize {
        self.solved.len()
    }
}

/// Arrival key of an entity: smaller keys arrive first, ties by id.
#[inline]
pub(crate) fn arrives_before(key_a: u64, a: u32, key_b: u64, b: u32) -> bool {
    (key_a, a) < (key_b, b)
}
