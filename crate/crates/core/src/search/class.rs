use std::collections::{HashMap, VecDeque};

use serde::Serialize;

use super::{SearchError, SearchLimits, Step};
use crate::ir::{canonical_hash, CanonicalDigest, Function};
use crate::passes::PassId;
use crate::reverse::ReversePassId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Reverse,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassNode {
    pub digest: CanonicalDigest,
    pub function: Function,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClassEdge {
    pub from: usize,
    pub to: usize,
    pub step: Step,
    pub direction: Direction,
}

/// Programs reachable from a seed through forward and reverse passes,
/// restricted to programs within the size limit.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ClassGraph {
    pub nodes: Vec<ClassNode>,
    pub edges: Vec<ClassEdge>,
    /// Exploration stopped at `max_programs_explored` with work left.
    pub truncated: bool,
    /// Successors dropped for exceeding `max_instructions_per_program`.
    pub oversized: usize,
}

impl ClassGraph {
    pub fn node_of(&self, digest: CanonicalDigest) -> Option<usize> {
        self.nodes.iter().position(|n| n.digest == digest)
    }
}

/// Breadth-first exploration over forward passes and reverse variants.
/// Self-loops are not recorded.
pub fn explore_sep_class(
    f: &Function,
    passes: &[PassId],
    reverses: &[ReversePassId],
    limits: &SearchLimits,
) -> Result<ClassGraph, SearchError> {
    limits.check()?;
    let mut g = ClassGraph::default();
    let mut index: HashMap<CanonicalDigest, usize> = HashMap::new();
    let digest = canonical_hash(f);
    index.insert(digest, 0);
    g.nodes.push(ClassNode {
        digest,
        function: f.clone(),
    });
    let mut queue = VecDeque::from([0]);
    while let Some(id) = queue.pop_front() {
        let cur = g.nodes[id].function.clone();
        let mut succ: Vec<(Step, Direction, Function)> = passes
            .iter()
            .filter_map(|&p| {
                let out = p.apply(&cur);
                out.changed
                    .then_some((Step::Forward(p), Direction::Forward, out.function))
            })
            .collect();
        for &pass in reverses {
            for v in pass.enumerate(&cur, limits.cap_per_pass).variants {
                succ.push((Step::Reverse { pass, site: v.site }, Direction::Reverse, v.function));
            }
        }
        for (step, direction, h) in succ {
            let digest = canonical_hash(&h);
            let to = match index.get(&digest) {
                Some(&to) => to,
                None => {
                    if h.instruction_count() > limits.max_instructions_per_program {
                        g.oversized += 1;
                        continue;
                    }
                    if g.nodes.len() >= limits.max_programs_explored {
                        g.truncated = true;
                        continue;
                    }
                    index.insert(digest, g.nodes.len());
                    queue.push_back(g.nodes.len());
                    g.nodes.push(ClassNode { digest, function: h });
                    g.nodes.len() - 1
                }
            };
            if to != id {
                g.edges.push(ClassEdge {
                    from: id,
                    to,
                    step,
                    direction,
                });
            }
        }
    }
    Ok(g)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClosureReport {
    /// Classes formed by forward edges taken as undirected.
    pub forward_classes: usize,
    pub reverse_edges: usize,
    /// Reverse edges whose endpoints lie in different forward classes.
    pub violations: Vec<ClassEdge>,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Checks that every reverse edge stays inside the forward equivalence
/// class of its source.
pub fn check_closure(g: &ClassGraph) -> Result<ClosureReport, SearchError> {
    if g.truncated {
        return Err(SearchError::Inconclusive);
    }
    let mut parent: Vec<usize> = (0..g.nodes.len()).collect();
    for e in g.edges.iter().filter(|e| e.direction == Direction::Forward) {
        let (a, b) = (find(&mut parent, e.from), find(&mut parent, e.to));
        parent[a] = b;
    }
    let forward_classes = (0..g.nodes.len()).filter(|&x| find(&mut parent, x) == x).count();
    let reverse: Vec<&ClassEdge> = g.edges.iter().filter(|e| e.direction == Direction::Reverse).collect();
    let violations = reverse
        .iter()
        .filter(|e| find(&mut parent, e.from) != find(&mut parent, e.to))
        .map(|e| (*e).clone())
        .collect();
    Ok(ClosureReport {
        forward_classes,
        reverse_edges: reverse.len(),
        violations,
    })
}
