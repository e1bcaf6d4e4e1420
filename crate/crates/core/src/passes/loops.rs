use std::collections::HashMap;

use super::PassOutcome;
use crate::analysis::{compute_dominators, find_natural_loops};
use crate::ir::{DefSite, Function, Operand};

/// Block holding each value's definition; parameters map to `None`.
fn def_blocks(f: &Function) -> HashMap<String, Option<usize>> {
    f.def_sites()
        .into_iter()
        .map(|(name, site)| {
            let b = match site {
                DefSite::Param(_) => None,
                DefSite::Phi { block, .. } => Some(block),
                DefSite::Inst(loc) => Some(loc.block),
            };
            (name, b)
        })
        .collect()
}

/// Hoists pure loop-invariant instructions into the preheader, innermost
/// loops first.
pub fn apply_licm(f: &Function) -> PassOutcome {
    let mut g = f.clone();
    let dom = compute_dominators(&g);
    let forest = find_natural_loops(&g, &dom);
    let mut order: Vec<usize> = (0..forest.loops.len()).collect();
    order.sort_by_key(|&l| (std::cmp::Reverse(forest.depth(l)), forest.loops[l].header));
    let rpo = g.rpo();
    let mut defs = def_blocks(&g);
    for l in order {
        let lp = &forest.loops[l];
        let Some(pre) = lp.preheader else { continue };
        loop {
            let invariant = |op: &Operand, defs: &HashMap<String, Option<usize>>| match op {
                Operand::Lit(_) => true,
                Operand::Value(v) => defs.get(v).copied().flatten().is_none_or(|b| !lp.contains(b)),
            };
            let found = rpo.iter().filter(|b| lp.contains(**b)).find_map(|&b| {
                g.blocks[b]
                    .body
                    .iter()
                    .position(|i| i.is_pure() && i.operands.iter().all(|o| invariant(o, &defs)))
                    .map(|i| (b, i))
            });
            let Some((b, i)) = found else { break };
            let inst = g.blocks[b].body.remove(i);
            defs.insert(inst.result.clone().expect("pure instructions have results"), Some(pre));
            g.blocks[pre].body.push(inst);
        }
    }
    PassOutcome::from_rewrite(f, g)
}
