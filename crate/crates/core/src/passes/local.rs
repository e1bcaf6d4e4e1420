//! Instruction-local rewrites: constant folding, algebraic identities,
//! strength reduction and the division/multiplication pattern.

use super::PassOutcome;
use crate::interp::eval;
use crate::ir::{Function, Inst, Opcode, Operand, Terminator};

/// Removes the instruction at `(b, i)` and forwards its result to `with`.
fn forward_result(f: &mut Function, b: usize, i: usize, with: Operand) {
    let inst = f.blocks[b].body.remove(i);
    let name = inst.result.expect("forwarded instruction has a result");
    f.replace_all_uses(&name, &with);
    f.erase_dead(
        inst.operands
            .into_iter()
            .filter_map(|o| o.as_value().map(str::to_string)),
    );
}

fn fold(inst: &Inst) -> Option<Operand> {
    if !inst.is_pure() {
        return None;
    }
    let ops = &inst.operands;
    if inst.opcode == Opcode::Select {
        if let Some(c) = ops[0].as_lit() {
            return Some(if c != 0 { ops[1].clone() } else { ops[2].clone() });
        }
    }
    let lits: Option<Vec<u32>> = ops.iter().map(Operand::as_lit).collect();
    let lits = lits?;
    let get = |k: usize| lits.get(k).copied().unwrap_or(0);
    eval(inst.opcode, get(0), get(1), get(2)).map(Operand::Lit)
}

pub fn apply_const_fold(f: &Function) -> PassOutcome {
    let mut g = f.clone();
    loop {
        let mut progress = false;
        for b in g.rpo() {
            let mut i = 0;
            while i < g.blocks[b].body.len() {
                match fold(&g.blocks[b].body[i]) {
                    Some(v) => {
                        forward_result(&mut g, b, i, v);
                        progress = true;
                    }
                    None => i += 1,
                }
            }
            let mut p = 0;
            while p < g.blocks[b].phis.len() {
                let phi = &g.blocks[b].phis[p];
                let first = phi.incoming.first().and_then(|(o, _)| o.as_lit());
                match first {
                    Some(c) if phi.incoming.iter().all(|(o, _)| o.as_lit() == Some(c)) => {
                        let phi = g.blocks[b].phis.remove(p);
                        g.replace_all_uses(&phi.result, &Operand::Lit(c));
                        progress = true;
                    }
                    _ => p += 1,
                }
            }
            if let Terminator::CondBr {
                cond: Operand::Lit(c),
                then_label,
                else_label,
            } = &g.blocks[b].term
            {
                let (taken, dropped) = if *c != 0 {
                    (then_label.clone(), else_label.clone())
                } else {
                    (else_label.clone(), then_label.clone())
                };
                if taken != dropped {
                    let label = g.blocks[b].label.clone();
                    if let Some(d) = g.block_index(&dropped) {
                        for phi in &mut g.blocks[d].phis {
                            phi.incoming.retain(|(_, l)| *l != label);
                        }
                    }
                }
                g.blocks[b].term = Terminator::Br(taken);
                progress = true;
            }
        }
        if !progress {
            break;
        }
    }
    // A block that lost its last predecessor keeps its phis with no
    // incoming values; it can never run, so their uses read 0.
    for b in 0..g.blocks.len() {
        while let Some(p) = g.blocks[b].phis.iter().position(|phi| phi.incoming.is_empty()) {
            let phi = g.blocks[b].phis.remove(p);
            g.replace_all_uses(&phi.result, &Operand::Lit(0));
        }
    }
    PassOutcome::from_rewrite(f, g)
}

fn identity(inst: &Inst) -> Option<Operand> {
    let [a, b] = &inst.operands[..] else {
        return None;
    };
    let (la, lb) = (a.as_lit(), b.as_lit());
    let zero = Operand::Lit(0);
    match inst.opcode {
        Opcode::Add | Opcode::Or | Opcode::Xor if lb == Some(0) => Some(a.clone()),
        Opcode::Add | Opcode::Or | Opcode::Xor if la == Some(0) => Some(b.clone()),
        Opcode::Xor if a == b => Some(zero),
        Opcode::Mul if lb == Some(1) => Some(a.clone()),
        Opcode::Mul if la == Some(1) => Some(b.clone()),
        Opcode::Mul if la == Some(0) || lb == Some(0) => Some(zero),
        Opcode::Sub if lb == Some(0) => Some(a.clone()),
        Opcode::Sub if a == b => Some(zero),
        Opcode::And if a == b => Some(a.clone()),
        Opcode::Shl if lb == Some(0) => Some(a.clone()),
        Opcode::UDiv if lb == Some(1) => Some(a.clone()),
        Opcode::URem if lb == Some(1) => Some(zero),
        _ => None,
    }
}

pub fn apply_identity_simplify(f: &Function) -> PassOutcome {
    let mut g = f.clone();
    for b in g.rpo() {
        let mut i = 0;
        while i < g.blocks[b].body.len() {
            match identity(&g.blocks[b].body[i]) {
                Some(v) => forward_result(&mut g, b, i, v),
                None => i += 1,
            }
        }
    }
    PassOutcome::from_rewrite(f, g)
}

fn log2_exact(c: u32) -> Option<u32> {
    (c.is_power_of_two() && c > 1).then(|| c.trailing_zeros())
}

pub fn apply_strength_reduce(f: &Function) -> PassOutcome {
    let mut g = f.clone();
    for b in g.rpo() {
        for inst in &mut g.blocks[b].body {
            if inst.opcode != Opcode::Mul {
                continue;
            }
            let (x, k) = match (&inst.operands[0], &inst.operands[1]) {
                (x, Operand::Lit(c)) if log2_exact(*c).is_some() => (x.clone(), log2_exact(*c).unwrap()),
                (Operand::Lit(c), x) if log2_exact(*c).is_some() => (x.clone(), log2_exact(*c).unwrap()),
                _ => continue,
            };
            inst.opcode = Opcode::Shl;
            inst.operands = vec![x, Operand::Lit(k)];
        }
    }
    PassOutcome::from_rewrite(f, g)
}

/// `sub x, m` where `m = mul t, c` (either order) and `t = udiv x, c`.
fn divmul_pattern(f: &Function, inst: &Inst) -> Option<(Operand, u32, String)> {
    if inst.opcode != Opcode::Sub {
        return None;
    }
    let x = &inst.operands[0];
    let m = inst.operands[1].as_value()?;
    let (_, mul) = f.inst_defining(m)?;
    if mul.opcode != Opcode::Mul {
        return None;
    }
    let (t, c) = match (&mul.operands[0], &mul.operands[1]) {
        (Operand::Value(t), Operand::Lit(c)) | (Operand::Lit(c), Operand::Value(t)) => (t, *c),
        _ => return None,
    };
    let (_, div) = f.inst_defining(t)?;
    if c == 0 || div.opcode != Opcode::UDiv || div.operands[0] != *x || div.operands[1] != Operand::Lit(c) {
        return None;
    }
    Some((x.clone(), c, m.to_string()))
}

pub fn apply_divmul_to_rem(f: &Function) -> PassOutcome {
    let mut g = f.clone();
    for b in g.rpo() {
        let mut i = 0;
        while i < g.blocks[b].body.len() {
            if let Some((x, c, m)) = divmul_pattern(&g, &g.blocks[b].body[i]) {
                let inst = &mut g.blocks[b].body[i];
                inst.opcode = Opcode::URem;
                inst.operands = vec![x, Operand::Lit(c)];
                let name = inst.result.clone();
                g.erase_dead([m]);
                // Erasing may shift this block's instructions.
                i = g.blocks[b]
                    .body
                    .iter()
                    .position(|inst| inst.result == name)
                    .expect("rewritten instruction is live");
            }
            i += 1;
        }
    }
    PassOutcome::from_rewrite(f, g)
}
