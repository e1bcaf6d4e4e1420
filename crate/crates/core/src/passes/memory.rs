//! Stack-slot promotion, dead store elimination and dead code elimination.

use std::collections::{BTreeSet, HashMap, HashSet};

use super::{PassOutcome, PassWarning};
use crate::analysis::{compute_dominators, DomTree};
use crate::ir::{Function, Opcode, Operand, Phi};

/// Allocas whose only uses are as the address of loads and stores, all in
/// reachable blocks.
fn promotable(f: &Function) -> Vec<String> {
    let reachable = f.reachable();
    let mut ok: Vec<(String, bool)> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for b in f.rpo() {
        for inst in &f.blocks[b].body {
            if inst.opcode == Opcode::Alloca {
                let r = inst.result.clone().expect("alloca has a result");
                index.insert(r.clone(), ok.len());
                ok.push((r, true));
            }
        }
    }
    for (b, block) in f.blocks.iter().enumerate() {
        let mut reject = |op: &Operand| {
            if let Some(i) = op.as_value().and_then(|v| index.get(v)) {
                ok[*i].1 = false;
            }
        };
        for phi in &block.phis {
            phi.incoming.iter().for_each(|(op, _)| reject(op));
        }
        for inst in &block.body {
            for (k, op) in inst.operands.iter().enumerate() {
                let address = matches!((inst.opcode, k), (Opcode::Load, 0) | (Opcode::Store, 1));
                if !address || !reachable[b] {
                    reject(op);
                }
            }
        }
        if let Some(op) = block.term.operand() {
            reject(op);
        }
    }
    ok.into_iter().filter(|(_, ok)| *ok).map(|(n, _)| n).collect()
}

/// Blocks needing a phi for a slot stored in `defs`.
fn phi_blocks(dom: &DomTree, frontiers: &[BTreeSet<usize>], defs: &BTreeSet<usize>) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    let mut work: Vec<usize> = defs.iter().copied().collect();
    while let Some(b) = work.pop() {
        for &d in &frontiers[b] {
            if dom.is_reachable(d) && out.insert(d) {
                work.push(d);
            }
        }
    }
    out
}

struct Promotion<'a> {
    slot: &'a str,
    /// Phi inserted per block, by result name.
    phis: HashMap<usize, String>,
    uninit: bool,
}

fn promote(g: &mut Function, slot: &str) -> bool {
    let dom = compute_dominators(g);
    let frontiers = dom.frontiers(g);
    let stores: BTreeSet<usize> = (0..g.blocks.len())
        .filter(|&b| {
            g.blocks[b].body.iter().any(|i| {
                // The alloca itself resets the slot on every execution.
                (i.opcode == Opcode::Store && i.operands[1].is_value(slot)) || i.result.as_deref() == Some(slot)
            })
        })
        .collect();
    let mut state = Promotion {
        slot,
        phis: HashMap::new(),
        uninit: false,
    };
    for b in phi_blocks(&dom, &frontiers, &stores) {
        let name = g.fresh_value(&format!("{slot}.{}", g.blocks[b].label));
        g.blocks[b].phis.push(Phi {
            result: name.clone(),
            incoming: Vec::new(),
        });
        state.phis.insert(b, name);
    }
    let preds = g.predecessors();
    // `None` while the slot holds no value on the current path.
    let mut incoming: HashMap<(usize, usize), Option<Operand>> = HashMap::new();
    let mut stack: Vec<(usize, Option<Operand>)> = vec![(0, None)];
    // Each load's replacement, already resolved through earlier loads.
    let mut subst: HashMap<String, Operand> = HashMap::new();
    let resolve = |subst: &HashMap<String, Operand>, v: &Operand| match v.as_value().and_then(|n| subst.get(n)) {
        Some(r) => r.clone(),
        None => v.clone(),
    };
    while let Some((b, mut current)) = stack.pop() {
        if let Some(p) = state.phis.get(&b) {
            current = Some(Operand::Value(p.clone()));
        }
        let mut i = 0;
        let body = &mut g.blocks[b].body;
        while i < body.len() {
            let inst = &body[i];
            if inst.result.as_deref() == Some(state.slot) {
                current = None;
            } else if inst.opcode == Opcode::Store && inst.operands[1].is_value(state.slot) {
                current = Some(resolve(&subst, &inst.operands[0]));
                body.remove(i);
                continue;
            } else if inst.opcode == Opcode::Load && inst.operands[0].is_value(state.slot) {
                let v = current.clone().unwrap_or_else(|| {
                    state.uninit = true;
                    Operand::Lit(0)
                });
                subst.insert(inst.result.clone().expect("load has a result"), v);
                body.remove(i);
                continue;
            }
            i += 1;
        }
        for s in g.successors(b) {
            if state.phis.contains_key(&s) {
                incoming.insert((s, b), current.clone());
            }
        }
        for &c in dom.children(b).iter().rev() {
            stack.push((c, current.clone()));
        }
    }
    let mut uninit_phis = Vec::new();
    for (&b, name) in &state.phis {
        let mut edges = Vec::new();
        for &p in &preds[b] {
            let v = match incoming.get(&(b, p)) {
                Some(Some(v)) => v.clone(),
                Some(None) => {
                    uninit_phis.push(name.clone());
                    Operand::Lit(0)
                }
                // Edge from an unreachable predecessor.
                None => Operand::Lit(0),
            };
            edges.push((v, g.blocks[p].label.clone()));
        }
        let phi = g.blocks[b]
            .phis
            .iter_mut()
            .find(|p| p.result == *name)
            .expect("inserted phi");
        phi.incoming = edges;
    }
    for (name, v) in &subst {
        g.replace_all_uses(name, v);
    }
    let slot_loc = g.inst_defining(slot).map(|(l, _)| l).expect("alloca exists");
    g.blocks[slot_loc.block].body.remove(slot_loc.index);
    simplify_phis(g, state.phis.into_values().collect());
    let names = g.defined_names();
    state.uninit || uninit_phis.iter().any(|p| names.contains(p))
}

/// Removes inserted phis that no real instruction depends on, then those
/// merging a single value.
fn simplify_phis(g: &mut Function, names: Vec<String>) {
    let inserted: HashSet<&str> = names.iter().map(String::as_str).collect();
    let mut incoming: HashMap<String, Vec<String>> = HashMap::new();
    let mut live: Vec<String> = Vec::new();
    for block in &g.blocks {
        for phi in &block.phis {
            let vals = phi
                .incoming
                .iter()
                .filter_map(|(o, _)| o.as_value().map(str::to_string));
            if inserted.contains(phi.result.as_str()) {
                incoming.insert(phi.result.clone(), vals.collect());
            } else {
                live.extend(vals);
            }
        }
        for inst in &block.body {
            live.extend(inst.operands.iter().filter_map(|o| o.as_value().map(str::to_string)));
        }
        live.extend(block.term.operand().and_then(|o| o.as_value()).map(str::to_string));
    }
    let mut keep: HashSet<String> = HashSet::new();
    while let Some(v) = live.pop() {
        if incoming.contains_key(&v) && keep.insert(v.clone()) {
            live.extend(incoming[&v].iter().cloned());
        }
    }
    for block in &mut g.blocks {
        block
            .phis
            .retain(|p| !inserted.contains(p.result.as_str()) || keep.contains(&p.result));
    }

    let single_value = |g: &Function| {
        g.blocks.iter().enumerate().find_map(|(b, block)| {
            block.phis.iter().enumerate().find_map(|(i, phi)| {
                if !inserted.contains(phi.result.as_str()) {
                    return None;
                }
                let others: BTreeSet<&Operand> = phi
                    .incoming
                    .iter()
                    .map(|(v, _)| v)
                    .filter(|v| !v.is_value(&phi.result))
                    .collect();
                (others.len() == 1).then(|| (b, i, others.into_iter().next().unwrap().clone()))
            })
        })
    };
    while let Some((b, i, with)) = single_value(g) {
        let phi = g.blocks[b].phis.remove(i);
        g.replace_all_uses(&phi.result, &with);
    }
}

pub fn apply_mem2reg(f: &Function) -> PassOutcome {
    let mut g = f.clone();
    let mut warnings = Vec::new();
    for slot in promotable(f) {
        if promote(&mut g, &slot) {
            warnings.push(PassWarning::UninitPromotion { alloca: slot });
        }
    }
    PassOutcome {
        changed: g != *f,
        function: g,
        warnings,
    }
}

fn loaded_slots(f: &Function) -> HashSet<String> {
    let mut out = HashSet::new();
    for block in &f.blocks {
        for inst in &block.body {
            if inst.opcode == Opcode::Load {
                out.extend(inst.operands[0].as_value().map(str::to_string));
            }
        }
    }
    out
}

pub fn apply_dse(f: &Function) -> PassOutcome {
    let mut g = f.clone();
    let loaded = loaded_slots(&g);
    let allocas: HashSet<String> = g
        .blocks
        .iter()
        .flat_map(|b| b.body.iter())
        .filter(|i| i.opcode == Opcode::Alloca)
        .filter_map(|i| i.result.clone())
        .collect();
    let mut dead_slots = Vec::new();
    for b in g.rpo() {
        let body = &g.blocks[b].body;
        let mut drop = vec![false; body.len()];
        for (i, inst) in body.iter().enumerate() {
            if inst.opcode != Opcode::Store {
                continue;
            }
            let slot = inst.operands[1].as_value().expect("store address is a value");
            if allocas.contains(slot) && !loaded.contains(slot) {
                drop[i] = true;
                dead_slots.push(slot.to_string());
                continue;
            }
            for later in &body[i + 1..] {
                let touches = later.operands.iter().any(|o| o.is_value(slot));
                if later.opcode == Opcode::Store && later.operands[1].is_value(slot) {
                    drop[i] = true;
                    break;
                }
                if touches {
                    break;
                }
            }
        }
        let mut keep = drop.iter().map(|d| !d);
        g.blocks[b].body.retain(|_| keep.next().unwrap());
    }
    g.erase_dead(dead_slots);
    PassOutcome::from_rewrite(f, g)
}

pub fn apply_dce(f: &Function) -> PassOutcome {
    let mut g = f.clone();
    let names: Vec<String> = g.defined_names().into_iter().collect();
    g.erase_dead(names);
    PassOutcome::from_rewrite(f, g)
}
