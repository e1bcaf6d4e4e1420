use std::collections::HashMap;

use serde::Serialize;

use super::{Limit, SearchContext, SearchError};
use crate::cost::{rank_key, RankKey};
use crate::ir::{canonical_hash, CanonicalDigest, Function};
use crate::passes::PassId;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SearchOutcome {
    #[serde(skip)]
    pub best: Function,
    pub best_sequence: Vec<PassId>,
    #[serde(skip)]
    pub best_key: RankKey,
    /// Value of the search metric on `best`.
    pub metric_value: u64,
    /// Whether no forward pass changes `best`.
    pub best_is_fixpoint: bool,
    /// Distinct programs (by canonical digest) reached.
    pub explored: usize,
    /// Expanded programs with no unvisited changed successor.
    pub saturated_leaves: usize,
    /// Pass applications that led to an already visited program.
    pub pruned_by_hash: usize,
}

/// Selection order: metric first, then rank key, with programs no pass
/// can change preferred over equally ranked ones that still have work left.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct SelectKey {
    metric: u64,
    static_cost: u64,
    static_size: usize,
    dynamic_cost: Option<u64>,
    unsaturated: bool,
    canonical: String,
}

impl SelectKey {
    fn new(metric: u64, rank: &RankKey, fixpoint: bool) -> Self {
        SelectKey {
            metric,
            static_cost: rank.static_cost,
            static_size: rank.static_size,
            dynamic_cost: rank.dynamic_cost,
            unsaturated: !fixpoint,
            canonical: rank.canonical.clone(),
        }
    }
}

struct Node {
    function: Function,
    parent: Option<(usize, PassId)>,
    /// Length of the discovery route.
    depth: usize,
    /// Reached the length limit with unvisited successors left.
    cut: bool,
}

fn sequence_to(nodes: &[Node], mut id: usize) -> Vec<PassId> {
    let mut seq = Vec::new();
    while let Some((p, pass)) = nodes[id].parent {
        seq.push(pass);
        id = p;
    }
    seq.reverse();
    seq
}

/// Depth-first search over forward pass applications. A state is a
/// canonical digest; the best program is the minimum over every visited
/// state.
pub fn exhaustive_search(f: &Function, ctx: &SearchContext) -> Result<SearchOutcome, SearchError> {
    ctx.limits.check()?;
    let limits = &ctx.limits;
    let w = ctx.metric.workload();
    let mut nodes = vec![Node {
        function: f.clone(),
        parent: None,
        depth: 0,
        cut: false,
    }];
    let mut index: HashMap<CanonicalDigest, usize> = HashMap::from([(canonical_hash(f), 0)]);
    let mut best: Option<(SelectKey, RankKey, usize)> = None;
    let (mut saturated_leaves, mut pruned_by_hash) = (0, 0);
    let mut hit: Option<Limit> =
        (f.instruction_count() > limits.max_instructions_per_program).then_some(Limit::ProgramSize);
    let mut stack = if hit.is_some() { vec![] } else { vec![0] };

    'search: while let Some(id) = stack.pop() {
        let depth = nodes[id].depth;
        let children: Vec<(PassId, Function)> = ctx
            .passes
            .iter()
            .filter_map(|&p| {
                let out = p.apply(&nodes[id].function);
                out.changed.then_some((p, out.function))
            })
            .collect();
        let rank = rank_key(&nodes[id].function, &ctx.model, w)?;
        let metric = ctx.metric.measure(&nodes[id].function, &ctx.model)?;
        let key = SelectKey::new(metric, &rank, children.is_empty());
        if best.as_ref().is_none_or(|(b, _, _)| key < *b) {
            best = Some((key, rank, id));
        }
        let mut fresh = Vec::new();
        for (pass, g) in children {
            let digest = canonical_hash(&g);
            if index.contains_key(&digest) {
                pruned_by_hash += 1;
                continue;
            }
            if depth >= limits.max_sequence_length {
                nodes[id].cut = true;
                continue;
            }
            if g.instruction_count() > limits.max_instructions_per_program {
                hit = Some(Limit::ProgramSize);
                continue;
            }
            if nodes.len() >= limits.max_programs_explored {
                hit = Some(Limit::ProgramsExplored);
                break 'search;
            }
            index.insert(digest, nodes.len());
            fresh.push(nodes.len());
            nodes.push(Node {
                function: g,
                parent: Some((id, pass)),
                depth: depth + 1,
                cut: false,
            });
        }
        if fresh.is_empty() && !nodes[id].cut {
            saturated_leaves += 1;
        }
        // Pushed in reverse so the first pass is explored first.
        stack.extend(fresh.into_iter().rev());
    }

    if hit.is_none() && nodes.iter().any(|n| n.cut) {
        hit = Some(Limit::SequenceLength);
    }
    let outcome = match best {
        Some((key, rank, id)) => SearchOutcome {
            best: nodes[id].function.clone(),
            best_sequence: sequence_to(&nodes, id),
            best_key: rank,
            metric_value: key.metric,
            best_is_fixpoint: !key.unsaturated,
            explored: nodes.len(),
            saturated_leaves,
            pruned_by_hash,
        },
        // The input itself was over the size limit.
        None => SearchOutcome {
            best: f.clone(),
            best_sequence: Vec::new(),
            best_key: rank_key(f, &ctx.model, w)?,
            metric_value: ctx.metric.measure(f, &ctx.model)?,
            best_is_fixpoint: false,
            explored: 1,
            saturated_leaves: 0,
            pruned_by_hash: 0,
        },
    };
    match hit {
        Some(limit) => Err(SearchError::BudgetExceeded {
            limit,
            partial: Box::new(outcome),
        }),
        None => Ok(outcome),
    }
}
