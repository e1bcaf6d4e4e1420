use std::collections::HashMap;
use std::fmt;

use sha2::{Digest, Sha256};

use super::{print_function, Block, Function, Operand, Phi, Terminator};

/// 64-bit digest of a function's canonical text.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalDigest(pub u64);

impl fmt::Display for CanonicalDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

/// The function printed after alpha-renaming: reachable blocks in reverse
/// postorder become `b0, b1, ...` (unreachable blocks follow in their
/// original order), and values become `v0, v1, ...` in definition order.
/// Operand order is kept as is, commutative or not.
pub fn canonical_text(f: &Function) -> String {
    let mut order = f.rpo();
    let mut placed = vec![false; f.blocks.len()];
    for &b in &order {
        placed[b] = true;
    }
    order.extend((0..f.blocks.len()).filter(|&b| !placed[b]));

    let labels: HashMap<&str, String> = order
        .iter()
        .enumerate()
        .map(|(i, &b)| (f.blocks[b].label.as_str(), format!("b{i}")))
        .collect();

    let mut values: HashMap<&str, String> = HashMap::new();
    let defs = f.params.iter().chain(order.iter().flat_map(|&b| {
        let block = &f.blocks[b];
        block
            .phis
            .iter()
            .map(|p| &p.result)
            .chain(block.body.iter().filter_map(|i| i.result.as_ref()))
    }));
    for (i, v) in defs.enumerate() {
        values.insert(v, format!("v{i}"));
    }

    let op = |o: &Operand| match o {
        Operand::Value(v) => Operand::Value(values.get(v.as_str()).cloned().unwrap_or_else(|| v.clone())),
        Operand::Lit(c) => Operand::Lit(*c),
    };
    let label = |l: &str| labels.get(l).cloned().unwrap_or_else(|| l.to_string());
    let rename_value = |v: &str| values.get(v).cloned().unwrap_or_else(|| v.to_string());

    let blocks = order
        .iter()
        .map(|&b| {
            let block = &f.blocks[b];
            let term = match &block.term {
                Terminator::Ret(o) => Terminator::Ret(op(o)),
                Terminator::Br(l) => Terminator::Br(label(l)),
                Terminator::CondBr {
                    cond,
                    then_label,
                    else_label,
                } => Terminator::CondBr {
                    cond: op(cond),
                    then_label: label(then_label),
                    else_label: label(else_label),
                },
            };
            Block {
                label: label(&block.label),
                phis: block
                    .phis
                    .iter()
                    .map(|phi| Phi {
                        result: rename_value(&phi.result),
                        incoming: phi.incoming.iter().map(|(o, l)| (op(o), label(l))).collect(),
                    })
                    .collect(),
                body: block
                    .body
                    .iter()
                    .map(|inst| {
                        let mut i = inst.clone();
                        i.result = i.result.as_deref().map(rename_value);
                        i.operands = i.operands.iter().map(op).collect();
                        i
                    })
                    .collect(),
                term,
            }
        })
        .collect();

    print_function(&Function {
        name: "f".into(),
        params: f.params.iter().map(|p| rename_value(p)).collect(),
        blocks,
    })
}

pub fn canonical_hash(f: &Function) -> CanonicalDigest {
    digest_of_text(&canonical_text(f))
}

pub(crate) fn digest_of_text(text: &str) -> CanonicalDigest {
    let h = Sha256::digest(text.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&h[..8]);
    CanonicalDigest(u64::from_be_bytes(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_function;

    #[test]
    fn renamed_values_and_labels_hash_equal() {
        let a = parse_function(
            "func @f(%x) {\nentry:\n  %y = add %x, 1\n  br next\nnext:\n  %z = mul %y, %x\n  ret %z\n}\n",
        )
        .unwrap();
        let b = parse_function(
            "func @g(%a) {\nstart:\n  %b = add %a, 1\n  br other\nother:\n  %c = mul %b, %a\n  ret %c\n}\n",
        )
        .unwrap();
        assert_eq!(canonical_hash(&a), canonical_hash(&b));
        assert_eq!(canonical_text(&a), canonical_text(&b));
    }

    #[test]
    fn swapped_operands_hash_differently() {
        let a = parse_function("func @f(%x, %y) {\nentry:\n  %s = add %x, %y\n  ret %s\n}\n").unwrap();
        let b = parse_function("func @f(%x, %y) {\nentry:\n  %s = add %y, %x\n  ret %s\n}\n").unwrap();
        assert_ne!(canonical_hash(&a), canonical_hash(&b));
    }

    #[test]
    fn block_order_follows_rpo() {
        let a = parse_function("func @f(%x) {\nentry:\n  br b\nc:\n  ret %x\nb:\n  br c\n}\n").unwrap();
        let b = parse_function("func @f(%x) {\nentry:\n  br b\nb:\n  br c\nc:\n  ret %x\n}\n").unwrap();
        assert_eq!(canonical_text(&a), canonical_text(&b));
        assert!(canonical_text(&a).contains("b0:\n  br b1\nb1:\n  br b2\nb2:"));
    }
}
