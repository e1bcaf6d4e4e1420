use super::PassOutcome;
use crate::analysis::{known_bits, operand_bits, KnownBits};
use crate::ir::{Function, Inst, Opcode};
use std::collections::HashMap;

/// Whether `inst` is an `add` (or `or`) whose operands can never share a
/// set bit. Adding 0 and folding two literals belong to other passes.
pub(crate) fn carry_free(inst: &Inst, bits: &HashMap<String, KnownBits>) -> bool {
    let [a, b] = &inst.operands[..] else {
        return false;
    };
    if a.as_lit() == Some(0) || b.as_lit() == Some(0) || (a.as_lit().is_some() && b.as_lit().is_some()) {
        return false;
    }
    KnownBits::disjoint(operand_bits(bits, a), operand_bits(bits, b))
}

pub fn apply_add_to_or(f: &Function) -> PassOutcome {
    let bits = known_bits(f);
    let mut g = f.clone();
    for b in g.rpo() {
        for inst in &mut g.blocks[b].body {
            if inst.opcode == Opcode::Add && carry_free(inst, &bits) {
                inst.opcode = Opcode::Or;
            }
        }
    }
    PassOutcome::from_rewrite(f, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::passes::test_util::{checked, func, lines};

    #[test]
    fn bcd_add_becomes_or() {
        let f = func("func @bin2bcd(%val) {\nentry:\n  %q = udiv %val, 10\n  %h = shl %q, 4\n  %r = urem %val, 10\n  %s = add %h, %r\n  ret %s\n}\n");
        let out = apply_add_to_or(&f);
        assert!(out.changed);
        assert_eq!(lines(&out.function)[3], "%s = or %h, %r");
        checked(&f, &out);
    }

    #[test]
    fn unknown_bits_and_zero_are_left_alone() {
        let f = func("func @f(%x, %y) {\nentry:\n  %s = add %x, %y\n  ret %s\n}\n");
        assert!(!apply_add_to_or(&f).changed);
        let f = func("func @f(%x) {\nentry:\n  %s = add %x, 0\n  ret %s\n}\n");
        assert!(!apply_add_to_or(&f).changed);
    }

    #[test]
    fn masked_operands() {
        let f =
            func("func @f(%x, %y) {\nentry:\n  %a = and %x, 240\n  %b = and %y, 15\n  %s = add %a, %b\n  ret %s\n}\n");
        let out = apply_add_to_or(&f);
        assert!(out.changed);
        checked(&f, &out);
        let f =
            func("func @f(%x, %y) {\nentry:\n  %a = and %x, 248\n  %b = and %y, 15\n  %s = add %a, %b\n  ret %s\n}\n");
        assert!(!apply_add_to_or(&f).changed);
    }
}
