//! Reverses that rewrite single instructions or short expression chains.

use super::{ReversePassId, ReverseVariantSet};
use crate::analysis::{compute_dominators, known_bits};
use crate::ir::{Function, Inst, InstLoc, Opcode, Operand};
use crate::passes::dataflow::carry_free;
use crate::passes::PassId;

/// Body instructions of reachable blocks, in site order.
pub(super) fn sites(f: &Function) -> impl Iterator<Item = (InstLoc, &Inst)> {
    f.rpo().into_iter().flat_map(move |block| {
        f.blocks[block]
            .body
            .iter()
            .enumerate()
            .map(move |(index, inst)| (InstLoc { block, index }, inst))
    })
}

fn describe(f: &Function, loc: InstLoc, inst: &Inst) -> String {
    let what = inst
        .result()
        .map_or_else(|| format!("#{}", loc.index), |r| format!("%{r}"));
    format!("{} {what} in {}", inst.opcode.name(), f.blocks[loc.block].label)
}

fn with_inst(f: &Function, loc: InstLoc, inst: Inst) -> Function {
    let mut g = f.clone();
    g.blocks[loc.block].body[loc.index] = inst;
    g
}

pub fn enumerate_rev_instexpand_rem(f: &Function, cap: usize) -> ReverseVariantSet {
    let dom = compute_dominators(f);
    let candidates = sites(f).map(|(loc, inst)| {
        if inst.opcode != Opcode::URem {
            return None;
        }
        let c = inst.operands[1].as_lit().filter(|&c| c > 0)?;
        let x = inst.operands[0].clone();
        let r = inst.result.clone()?;
        let div = Inst::new("", Opcode::UDiv, vec![x.clone(), Operand::Lit(c)]);
        let reuse = sites(f).find_map(|(at, other)| {
            let before = if at.block == loc.block {
                at.index < loc.index
            } else {
                dom.dominates(at.block, loc.block)
            };
            (before && other.opcode == div.opcode && other.operands == div.operands)
                .then(|| other.result.clone())
                .flatten()
        });
        let mut g = f.clone();
        let mut at = loc.index;
        let q = match reuse {
            Some(q) => q,
            None => {
                let q = g.fresh_value(&format!("{r}.q"));
                g.blocks[loc.block]
                    .body
                    .insert(at, Inst::new(q.clone(), Opcode::UDiv, div.operands));
                at += 1;
                q
            }
        };
        let m = g.fresh_value(&format!("{r}.m"));
        let body = &mut g.blocks[loc.block].body;
        body[at] = Inst::new(r, Opcode::Sub, vec![x, Operand::value(m.clone())]);
        body.insert(at, Inst::new(m, Opcode::Mul, vec![Operand::value(q), Operand::Lit(c)]));
        Some((describe(f, loc, inst), g))
    });
    ReverseVariantSet::collect(ReversePassId::InstExpandRem, cap, candidates)
}

pub fn enumerate_rev_instexpand_shl(f: &Function, cap: usize) -> ReverseVariantSet {
    let candidates = sites(f).map(|(loc, inst)| {
        if inst.opcode != Opcode::Shl {
            return None;
        }
        let k = inst.operands[1].as_lit().filter(|k| (1..32).contains(k))?;
        let mul = Inst {
            opcode: Opcode::Mul,
            operands: vec![inst.operands[0].clone(), Operand::Lit(1 << k)],
            ..inst.clone()
        };
        Some((describe(f, loc, inst), with_inst(f, loc, mul)))
    });
    ReverseVariantSet::collect(ReversePassId::InstExpandShl, cap, candidates)
}

pub fn enumerate_rev_instexpand_or(f: &Function, cap: usize) -> ReverseVariantSet {
    let bits = known_bits(f);
    let candidates = sites(f).map(|(loc, inst)| {
        if inst.opcode != Opcode::Or || !carry_free(inst, &bits) {
            return None;
        }
        let add = Inst {
            opcode: Opcode::Add,
            ..inst.clone()
        };
        let g = with_inst(f, loc, add);
        // Widening a value inside a loop can blur the known bits that made
        // the rewrite sound; keep only variants the forward pass undoes.
        PassId::AddToOr.apply(&g).changed.then(|| (describe(f, loc, inst), g))
    });
    ReverseVariantSet::collect(ReversePassId::InstExpandOr, cap, candidates)
}

/// `s = add t, c` with `t = add a, b` used only by `s` and defined earlier
/// in the same block becomes `n = add b, c; s = add a, n`.
fn right_nested(f: &Function, loc: InstLoc, inst: &Inst) -> Option<Function> {
    if inst.opcode != Opcode::Add {
        return None;
    }
    let t = inst.operands[0].as_value()?;
    let body = &f.blocks[loc.block].body;
    let ti = body[..loc.index].iter().position(|i| i.result() == Some(t))?;
    let inner = &body[ti];
    if inner.opcode != Opcode::Add || f.use_counts().get(t).copied() != Some(1) {
        return None;
    }
    let mut g = f.clone();
    let n = g.fresh_value(&format!("{}.n", inst.result()?));
    let body = &mut g.blocks[loc.block].body;
    let [a, b] = [inner.operands[0].clone(), inner.operands[1].clone()];
    body[loc.index].operands = vec![a, Operand::value(n.clone())];
    body.insert(loc.index, Inst::new(n, Opcode::Add, vec![b, inst.operands[1].clone()]));
    body.remove(ti);
    Some(g)
}

pub fn enumerate_rev_reassociate(f: &Function, cap: usize) -> ReverseVariantSet {
    let candidates = sites(f).flat_map(|(loc, inst)| {
        let swapped = (inst.opcode.is_commutative() && inst.operands[0] != inst.operands[1]).then(|| {
            let mut operands = inst.operands.clone();
            operands.swap(0, 1);
            let g = with_inst(
                f,
                loc,
                Inst {
                    operands,
                    ..inst.clone()
                },
            );
            (format!("swap {}", describe(f, loc, inst)), g)
        });
        let nested = right_nested(f, loc, inst).map(|g| (format!("nest {}", describe(f, loc, inst)), g));
        // Only forms the forward pass would bring back count as reversals.
        [swapped, nested]
            .into_iter()
            .map(|c| c.filter(|(_, g)| PassId::Reassociate.apply(g).changed))
    });
    ReverseVariantSet::collect(ReversePassId::Reassociate, cap, candidates)
}
