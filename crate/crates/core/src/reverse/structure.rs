//! Reverses that change blocks, loops or memory traffic.

use std::collections::{HashMap, HashSet};

use super::expand::sites;
use super::{ReversePassId, ReverseVariantSet};
use crate::analysis::{compute_dominators, find_natural_loops};
use crate::ir::{fresh_name, Block, DefSite, Function, Inst, Opcode, Operand, Terminator};

/// Blocks where `v` is read: the using instruction's block, or for a phi
/// the incoming edge's source block. `skip` names a phi whose own uses are
/// ignored.
fn use_blocks(f: &Function, v: &str, skip: Option<&str>) -> Vec<usize> {
    let mut out = Vec::new();
    for (b, block) in f.blocks.iter().enumerate() {
        for phi in block.phis.iter().filter(|p| Some(p.result.as_str()) != skip) {
            for (op, l) in &phi.incoming {
                if op.is_value(v) {
                    out.extend(f.block_index(l));
                }
            }
        }
        let in_body = block.body.iter().any(|i| i.operands.iter().any(|o| o.is_value(v)));
        if in_body || block.term.operand().is_some_and(|o| o.is_value(v)) {
            out.push(b);
        }
    }
    out
}

pub fn enumerate_rev_split_block(f: &Function, cap: usize) -> ReverseVariantSet {
    let candidates = f.rpo().into_iter().map(|b| {
        let block = &f.blocks[b];
        if block.body.len() < 2 {
            return None;
        }
        let mut g = f.clone();
        let label = g.fresh_label(&format!("{}.split", block.label));
        let head = &mut g.blocks[b];
        let rest = head.body.split_off(1);
        let term = std::mem::replace(&mut head.term, Terminator::Br(label.clone()));
        for s in term.successors() {
            let Some(si) = g.block_index(s) else { continue };
            for phi in &mut g.blocks[si].phis {
                for (_, l) in &mut phi.incoming {
                    if *l == block.label {
                        *l = label.clone();
                    }
                }
            }
        }
        g.blocks.insert(b + 1, Block::new(label, rest, term));
        Some((format!("split {} after #0", block.label), g))
    });
    ReverseVariantSet::collect(ReversePassId::SplitBlock, cap, candidates)
}

pub fn enumerate_rev_licm_sink(f: &Function, cap: usize) -> ReverseVariantSet {
    let dom = compute_dominators(f);
    let forest = find_natural_loops(f, &dom);
    let rpo_pos: HashMap<usize, usize> = dom.rpo().iter().enumerate().map(|(i, &b)| (b, i)).collect();
    let mut moves = Vec::new();
    for lp in &forest.loops {
        let Some(pre) = lp.preheader else { continue };
        for (i, inst) in f.blocks[pre].body.iter().enumerate() {
            let Some(r) = inst.result().filter(|_| inst.is_pure()) else {
                continue;
            };
            let uses = use_blocks(f, r, None);
            if !uses.is_empty() && uses.iter().all(|&u| lp.contains(u)) {
                moves.push((rpo_pos[&pre], i, pre, lp.header));
            }
        }
    }
    moves.sort();
    let candidates = moves.into_iter().map(|(_, i, pre, header)| {
        let mut g = f.clone();
        let inst = g.blocks[pre].body.remove(i);
        let text = format!(
            "sink {} %{} into {}",
            inst.opcode.name(),
            inst.result().unwrap_or(""),
            g.blocks[header].label
        );
        g.blocks[header].body.insert(0, inst);
        Some((text, g))
    });
    ReverseVariantSet::collect(ReversePassId::LicmSink, cap, candidates)
}

/// Whether the demoted value may be read in `start` or anything reachable from it
/// without passing through `def_block`, which redefines it.
fn live_from(f: &Function, start: usize, def_block: usize, reads: &HashSet<usize>) -> bool {
    let mut seen = HashSet::new();
    let mut work = vec![start];
    while let Some(b) = work.pop() {
        if b == def_block || !seen.insert(b) {
            continue;
        }
        if reads.contains(&b) {
            return true;
        }
        work.extend(f.successors(b));
    }
    false
}

/// Demotes `v` to a stack slot: a store after its definition (or, for a
/// phi, at the end of each predecessor) and a load before every read.
fn demote(f: &Function, v: &str) -> Option<Function> {
    let reachable = f.reachable();
    let site = f.def_sites().remove(v)?;
    let phi_block = match site {
        DefSite::Param(_) => return None,
        DefSite::Inst(loc) => {
            let inst = &f.blocks[loc.block].body[loc.index];
            if inst.opcode == Opcode::Alloca || !reachable[loc.block] {
                return None;
            }
            None
        }
        DefSite::Phi { block, .. } => Some(block),
    };
    let uses = use_blocks(f, v, Some(v));
    if uses.is_empty() || uses.iter().any(|&u| !reachable[u]) {
        return None;
    }
    let mut stores_at: HashMap<usize, Operand> = HashMap::new();
    if let Some(h) = phi_block {
        if !reachable[h] {
            return None;
        }
        let phi = f.blocks[h].phis.iter().find(|p| p.result == v)?;
        let reads: HashSet<usize> = uses.iter().copied().collect();
        for (op, l) in &phi.incoming {
            let p = f.block_index(l)?;
            if !reachable[p] {
                return None;
            }
            // The store at the end of `p` must not clobber a value still
            // needed along p's other edges.
            if f.successors(p)
                .into_iter()
                .any(|s| s != h && live_from(f, s, h, &reads))
            {
                return None;
            }
            if !op.is_value(v) {
                stores_at.entry(p).or_insert_with(|| op.clone());
            }
        }
    }

    let mut g = f.clone();
    let mut taken = f.defined_names();
    let mut fresh = |hint: &str| {
        let n = fresh_name(hint, |c| taken.contains(c));
        taken.insert(n.clone());
        n
    };
    let slot = fresh(&format!("{v}.addr"));
    let ptr = Operand::value(slot.clone());
    if let Some(h) = phi_block {
        g.blocks[h].phis.retain(|p| p.result != v);
    }
    let mut edge_loads: Vec<(usize, String)> = Vec::new();
    for b in 0..g.blocks.len() {
        let block = &mut g.blocks[b];
        let mut body = Vec::with_capacity(block.body.len() + 2);
        if b == 0 {
            body.push(Inst::new(slot.clone(), Opcode::Alloca, vec![]));
        }
        for mut inst in std::mem::take(&mut block.body) {
            if inst.operands.iter().any(|o| o.is_value(v)) {
                let l = fresh(&format!("{v}.ld"));
                body.push(Inst::new(l.clone(), Opcode::Load, vec![ptr.clone()]));
                for o in &mut inst.operands {
                    if o.is_value(v) {
                        *o = Operand::value(l.clone());
                    }
                }
            }
            let defines = inst.result() == Some(v);
            body.push(inst);
            if defines {
                body.push(Inst::store(Operand::value(v), slot.clone()));
            }
        }
        let term_reads = block.term.operand().is_some_and(|o| o.is_value(v));
        let edge_reads = block.term.successors().into_iter().any(|s| {
            f.block(s).is_some_and(|sb| {
                sb.phis
                    .iter()
                    .filter(|p| p.result != v)
                    .any(|p| p.incoming.iter().any(|(o, l)| o.is_value(v) && *l == block.label))
            })
        });
        if term_reads || edge_reads {
            let l = fresh(&format!("{v}.ld"));
            body.push(Inst::new(l.clone(), Opcode::Load, vec![ptr.clone()]));
            if let Some(o) = block.term.operand_mut() {
                if o.is_value(v) {
                    *o = Operand::value(l.clone());
                }
            }
            if edge_reads {
                edge_loads.push((b, l));
            }
        }
        if let Some(op) = stores_at.get(&b) {
            body.push(Inst::store(op.clone(), slot.clone()));
        }
        block.body = body;
    }
    for (b, l) in edge_loads {
        let label = g.blocks[b].label.clone();
        let succs: Vec<usize> = g.successors(b);
        for s in succs {
            for phi in &mut g.blocks[s].phis {
                for (o, from) in &mut phi.incoming {
                    if o.is_value(v) && *from == label {
                        *o = Operand::value(l.clone());
                    }
                }
            }
        }
    }
    Some(g)
}

pub fn enumerate_reg2mem(f: &Function, cap: usize) -> ReverseVariantSet {
    let mut values = Vec::new();
    for b in f.rpo() {
        let block = &f.blocks[b];
        values.extend(block.phis.iter().map(|p| (p.result.clone(), "phi", b)));
        values.extend(
            block
                .body
                .iter()
                .filter_map(|i| i.result().map(|r| (r.to_string(), i.opcode.name(), b))),
        );
    }
    let candidates = values
        .into_iter()
        .map(|(v, what, b)| demote(f, &v).map(|g| (format!("demote {what} %{v} in {}", f.blocks[b].label), g)));
    ReverseVariantSet::collect(ReversePassId::Reg2Mem, cap, candidates)
}

pub fn enumerate_rev_insert_dead_store(f: &Function, cap: usize) -> ReverseVariantSet {
    let candidates = sites(f).map(|(loc, inst)| {
        if inst.opcode != Opcode::Store {
            return None;
        }
        let mut g = f.clone();
        g.blocks[loc.block].body.insert(loc.index, inst.clone());
        Some((format!("store #{} in {}", loc.index, f.blocks[loc.block].label), g))
    });
    ReverseVariantSet::collect(ReversePassId::InsertDeadStore, cap, candidates)
}
