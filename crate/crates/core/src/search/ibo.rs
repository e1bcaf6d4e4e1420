use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{exhaustive_search, Limit, SearchContext, SearchError, SearchOutcome, Step};
use crate::cost::{rank_key, RankKey};
use crate::ir::{canonical_hash, CanonicalDigest, Function};
use crate::reverse::ReversePassId;

/// Which variants survive when a frontier exceeds `ibo_max_frontier`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrontierPolicy {
    /// Lowest rank key first.
    #[default]
    CheapFirst,
    /// Highest rank key first.
    WorstFirst,
    /// No truncation.
    All,
}

/// What the next iteration reverses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReverseFrom {
    /// The reverse variants themselves.
    #[default]
    Variants,
    /// The optimized forms of the variants (experimental).
    Optimized,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IboSettings {
    pub reverses: Vec<ReversePassId>,
    pub k: usize,
    pub policy: FrontierPolicy,
    pub reverse_from: ReverseFrom,
    /// Only the first site of each reverse pass.
    pub single_variant: bool,
}

impl IboSettings {
    pub fn new(reverses: Vec<ReversePassId>, k: usize) -> Self {
        IboSettings {
            reverses,
            k,
            policy: FrontierPolicy::default(),
            reverse_from: ReverseFrom::default(),
            single_variant: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Distinct variants produced before truncation.
    pub generated: usize,
    /// Variants optimized in this iteration.
    pub frontier: usize,
    /// Frontier variants by the reverse pass that produced them last.
    pub variants_per_pass: BTreeMap<String, usize>,
    /// Reverse pass behind this iteration's improvement, if any.
    pub improved_by: Option<String>,
    pub best_key: [u64; 2],
    pub best_metric: u64,
    /// Programs visited by this iteration's forward searches.
    pub explored: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IboOutcome {
    #[serde(skip)]
    pub best: Function,
    /// Reverse steps then forward passes leading from the input to `best`.
    pub best_sequence: Vec<Step>,
    #[serde(skip)]
    pub best_key: RankKey,
    pub metric_value: u64,
    pub trace: Vec<IterationRecord>,
    /// Programs visited across all searches plus frontier variants.
    pub total_programs: usize,
}

#[derive(Clone)]
struct Item {
    function: Function,
    steps: Vec<Step>,
}

/// Result of optimizing one frontier program.
#[derive(Clone)]
struct Optimized {
    best: Function,
    steps: Vec<Step>,
    metric: u64,
    key: RankKey,
    explored: usize,
    limit: Option<Limit>,
}

fn optimize(item: &Item, ctx: &SearchContext) -> Result<Optimized, SearchError> {
    let (out, limit): (SearchOutcome, _) = match exhaustive_search(&item.function, ctx) {
        Ok(out) => (out, None),
        Err(SearchError::BudgetExceeded { limit, partial }) => (*partial, Some(limit)),
        Err(e) => return Err(e),
    };
    let mut steps = item.steps.clone();
    steps.extend(out.best_sequence.iter().map(|&p| Step::Forward(p)));
    Ok(Optimized {
        best: out.best,
        steps,
        metric: out.metric_value,
        key: out.best_key,
        explored: out.explored,
        limit,
    })
}

/// Iterative bi-directional optimization. Iteration 0 is the exhaustive
/// forward search of the input; each further iteration reverses every
/// program of the current frontier, optimizes each variant exhaustively
/// and keeps the best result, which only changes on a strict improvement
/// of (metric, rank key).
pub fn ibo(f: &Function, ctx: &SearchContext, settings: &IboSettings) -> Result<IboOutcome, SearchError> {
    ctx.limits.check()?;
    let cap = if settings.single_variant {
        1
    } else {
        ctx.limits.cap_per_pass
    };
    let mut limit_hit = None;
    let root = Item {
        function: f.clone(),
        steps: Vec::new(),
    };
    let first = optimize(&root, ctx)?;
    limit_hit = limit_hit.or(first.limit);
    let mut total = first.explored;
    let record = |iteration, generated, frontier, per_pass, improved_by, best: &Optimized, explored| IterationRecord {
        iteration,
        generated,
        frontier,
        variants_per_pass: per_pass,
        improved_by,
        best_key: best.key.cost_size(),
        best_metric: best.metric,
        explored,
    };
    let mut trace = vec![record(0, 1, 1, BTreeMap::new(), None, &first, first.explored)];
    let mut best = first;
    let mut cache: HashMap<CanonicalDigest, Optimized> = HashMap::new();
    let mut frontier = vec![root];

    for iteration in 1..=settings.k {
        // Reverse every frontier program, dropping alpha-equivalent repeats.
        let mut seen = HashSet::new();
        let mut variants: Vec<(Item, CanonicalDigest, RankKey)> = Vec::new();
        for item in &frontier {
            for &pass in &settings.reverses {
                for v in pass.enumerate(&item.function, cap).variants {
                    let digest = canonical_hash(&v.function);
                    if !seen.insert(digest) {
                        continue;
                    }
                    let key = rank_key(&v.function, &ctx.model, None)?;
                    let mut steps = item.steps.clone();
                    steps.push(Step::Reverse { pass, site: v.site });
                    variants.push((
                        Item {
                            function: v.function,
                            steps,
                        },
                        digest,
                        key,
                    ));
                }
            }
        }
        let generated = variants.len();
        match settings.policy {
            FrontierPolicy::CheapFirst => variants.sort_by(|a, b| a.2.cmp(&b.2)),
            FrontierPolicy::WorstFirst => variants.sort_by(|a, b| b.2.cmp(&a.2)),
            FrontierPolicy::All => {}
        }
        if settings.policy != FrontierPolicy::All {
            variants.truncate(ctx.limits.ibo_max_frontier);
        }
        total += variants.len();

        let todo: Vec<&Item> = variants
            .iter()
            .filter(|(_, d, _)| !cache.contains_key(d))
            .map(|(item, _, _)| item)
            .collect();
        let fresh: Vec<Optimized> = todo
            .par_iter()
            .map(|item| optimize(item, ctx))
            .collect::<Result<_, _>>()?;
        let mut explored = 0;
        for (item, result) in todo.iter().zip(fresh) {
            explored += result.explored;
            limit_hit = limit_hit.or(result.limit);
            cache.insert(canonical_hash(&item.function), result);
        }
        total += explored;

        let mut per_pass = BTreeMap::new();
        let mut improved_by = None;
        for (item, digest, _) in &variants {
            let Some(Step::Reverse { pass, .. }) = item.steps.last() else {
                continue;
            };
            *per_pass.entry(pass.name().to_string()).or_insert(0) += 1;
            let result = &cache[digest];
            if (result.metric, &result.key) < (best.metric, &best.key) {
                // A cached result may come from an alpha-equivalent variant
                // with a different route; its own steps stay replayable.
                best = result.clone();
                improved_by = Some(pass.name().to_string());
            }
        }
        trace.push(record(
            iteration,
            generated,
            variants.len(),
            per_pass,
            improved_by,
            &best,
            explored,
        ));

        frontier = match settings.reverse_from {
            ReverseFrom::Variants => variants.into_iter().map(|(item, _, _)| item).collect(),
            ReverseFrom::Optimized => {
                let mut seen = HashSet::new();
                variants
                    .iter()
                    .map(|(_, d, _)| &cache[d])
                    .filter(|o| seen.insert(canonical_hash(&o.best)))
                    .map(|o| Item {
                        function: o.best.clone(),
                        steps: o.steps.clone(),
                    })
                    .collect()
            }
        };
    }

    let outcome = IboOutcome {
        best: best.best,
        best_sequence: best.steps,
        best_key: best.key,
        metric_value: best.metric,
        trace,
        total_programs: total,
    };
    match limit_hit {
        Some(limit) => Err(SearchError::IboBudgetExceeded {
            limit,
            partial: Box::new(outcome),
        }),
        None => Ok(outcome),
    }
}
