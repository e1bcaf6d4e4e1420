//! Passes driven by dominance and the shape of the control-flow graph.

use std::collections::HashMap;

use super::PassOutcome;
use crate::analysis::compute_dominators;
use crate::ir::{Function, Inst, Operand, Terminator};

fn same_computation(a: &Inst, b: &Inst) -> bool {
    a.opcode == b.opcode && a.operands == b.operands
}

pub fn apply_cse(f: &Function) -> PassOutcome {
    let mut g = f.clone();
    let dom = compute_dominators(&g);
    // Available pure instructions: (block, instruction).
    let mut avail: Vec<(usize, Inst)> = Vec::new();
    let mut subst: HashMap<String, Operand> = HashMap::new();
    for b in dom.preorder() {
        let mut i = 0;
        while i < g.blocks[b].body.len() {
            let inst = &mut g.blocks[b].body[i];
            for op in &mut inst.operands {
                if let Some(v) = op.as_value().and_then(|v| subst.get(v)) {
                    *op = v.clone();
                }
            }
            if !inst.is_pure() {
                i += 1;
                continue;
            }
            let prior = avail
                .iter()
                .find(|(ab, a)| dom.dominates(*ab, b) && same_computation(a, inst))
                .and_then(|(_, a)| a.result.clone());
            match prior {
                Some(p) => {
                    let dup = g.blocks[b].body.remove(i);
                    subst.insert(dup.result.expect("pure instructions have results"), Operand::Value(p));
                }
                None => {
                    avail.push((b, inst.clone()));
                    i += 1;
                }
            }
        }
    }
    for (from, to) in &subst {
        g.replace_all_uses(from, to);
    }
    PassOutcome::from_rewrite(f, g)
}

pub fn apply_cond_prop(f: &Function) -> PassOutcome {
    let mut g = f.clone();
    let dom = compute_dominators(&g);
    let preds = g.predecessors();
    let mut folded: Vec<(String, u32)> = Vec::new();
    for &b in dom.rpo() {
        let Terminator::CondBr {
            cond: Operand::Value(c),
            then_label,
            else_label,
        } = &g.blocks[b].term
        else {
            continue;
        };
        if then_label == else_label {
            continue;
        }
        let Some((_, def)) = g.inst_defining(c) else { continue };
        if !def.is_pure() {
            continue;
        }
        let edges = [(then_label, def.opcode.is_icmp().then_some(1)), (else_label, Some(0))];
        for (target, value) in edges {
            let (Some(t), Some(value)) = (g.block_index(target), value) else {
                continue;
            };
            if preds[t] != [b] {
                continue;
            }
            for &r in dom.rpo() {
                if !dom.dominates(t, r) {
                    continue;
                }
                for inst in &g.blocks[r].body {
                    if same_computation(inst, def) {
                        folded.push((inst.result.clone().expect("pure instructions have results"), value));
                    }
                }
            }
        }
    }
    for (name, value) in &folded {
        g.replace_all_uses(name, &Operand::Lit(*value));
    }
    g.erase_dead(folded.into_iter().map(|(n, _)| n));
    PassOutcome::from_rewrite(f, g)
}

/// Removes blocks unreachable from the entry, dropping their phi edges.
fn remove_unreachable(g: &mut Function) {
    let reachable = g.reachable();
    if reachable.iter().all(|&r| r) {
        return;
    }
    let dead: Vec<String> = g
        .blocks
        .iter()
        .zip(&reachable)
        .filter(|(_, r)| !**r)
        .map(|(b, _)| b.label.clone())
        .collect();
    let mut keep = reachable.iter();
    g.blocks.retain(|_| *keep.next().unwrap());
    for block in &mut g.blocks {
        for phi in &mut block.phis {
            phi.incoming.retain(|(_, l)| !dead.contains(l));
        }
    }
}

pub fn apply_simplifycfg(f: &Function) -> PassOutcome {
    let mut g = f.clone();
    let mut freed = Vec::new();
    for block in &mut g.blocks {
        if let Terminator::CondBr {
            cond,
            then_label,
            else_label,
        } = &block.term
        {
            if then_label == else_label {
                freed.extend(cond.as_value().map(str::to_string));
                block.term = Terminator::Br(then_label.clone());
            }
        }
    }
    g.erase_dead(freed);
    remove_unreachable(&mut g);
    // Merge a block into its predecessor when that predecessor jumps
    // straight to it and nothing else does.
    loop {
        let preds = g.predecessors();
        let mergeable = (0..g.blocks.len()).find_map(|b| match &g.blocks[b].term {
            Terminator::Br(l) => {
                let c = g.block_index(l)?;
                (c != b && c != 0 && preds[c] == [b]).then_some((b, c))
            }
            _ => None,
        });
        let Some((b, c)) = mergeable else { break };
        for phi in std::mem::take(&mut g.blocks[c].phis) {
            g.replace_all_uses(&phi.result, &phi.incoming[0].0);
        }
        let succ = g.blocks.remove(c);
        let b = if c < b { b - 1 } else { b };
        let into = g.blocks[b].label.clone();
        for s in succ.term.successors() {
            if let Some(si) = g.block_index(s) {
                for phi in &mut g.blocks[si].phis {
                    for (_, l) in &mut phi.incoming {
                        if *l == succ.label {
                            *l = into.clone();
                        }
                    }
                }
            }
        }
        let target = &mut g.blocks[b];
        target.body.extend(succ.body);
        target.term = succ.term;
    }
    PassOutcome::from_rewrite(f, g)
}
