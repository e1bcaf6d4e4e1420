use std::collections::HashMap;

use crate::ir::{Function, Opcode, Operand};

/// Bits known to be zero and bits known to be one. Never both.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct KnownBits {
    pub zeros: u32,
    pub ones: u32,
}

impl KnownBits {
    pub const UNKNOWN: KnownBits = KnownBits { zeros: 0, ones: 0 };

    pub fn constant(c: u32) -> Self {
        KnownBits { zeros: !c, ones: c }
    }

    /// Bits that may be one at runtime.
    pub fn possible_ones(self) -> u32 {
        !self.zeros
    }

    pub fn meet(self, other: KnownBits) -> KnownBits {
        KnownBits {
            zeros: self.zeros & other.zeros,
            ones: self.ones & other.ones,
        }
    }

    pub fn admits(self, v: u32) -> bool {
        v & self.zeros == 0 && v & self.ones == self.ones
    }

    /// Whether `a + b` cannot produce a carry, so it equals `a | b`.
    pub fn disjoint(a: KnownBits, b: KnownBits) -> bool {
        a.possible_ones() & b.possible_ones() == 0
    }
}

pub fn operand_bits(map: &HashMap<String, KnownBits>, op: &Operand) -> KnownBits {
    match op {
        Operand::Lit(c) => KnownBits::constant(*c),
        Operand::Value(v) => map.get(v).copied().unwrap_or(KnownBits::UNKNOWN),
    }
}

fn low_mask(k: u32) -> u32 {
    if k >= 32 {
        u32::MAX
    } else {
        (1u32 << k) - 1
    }
}

fn transfer(opcode: Opcode, ops: &[KnownBits], lits: &[Option<u32>]) -> KnownBits {
    let unknown = KnownBits::UNKNOWN;
    match opcode {
        Opcode::Shl => match lits[1] {
            Some(k) => {
                let k = k % 32;
                KnownBits {
                    zeros: (ops[0].zeros << k) | low_mask(k),
                    ones: ops[0].ones << k,
                }
            }
            None => unknown,
        },
        Opcode::LShr => match lits[1] {
            Some(k) => {
                let k = k % 32;
                KnownBits {
                    zeros: (ops[0].zeros >> k) | !(u32::MAX >> k),
                    ones: ops[0].ones >> k,
                }
            }
            None => unknown,
        },
        Opcode::And => KnownBits {
            zeros: ops[0].zeros | ops[1].zeros,
            ones: ops[0].ones & ops[1].ones,
        },
        Opcode::Or => KnownBits {
            zeros: ops[0].zeros & ops[1].zeros,
            ones: ops[0].ones | ops[1].ones,
        },
        Opcode::Xor => KnownBits {
            zeros: (ops[0].zeros & ops[1].zeros) | (ops[0].ones & ops[1].ones),
            ones: (ops[0].zeros & ops[1].ones) | (ops[0].ones & ops[1].zeros),
        },
        Opcode::URem => match lits[1] {
            // x % c < c, so every bit at or above bitlength(c - 1) is zero.
            Some(c) if c > 0 => {
                let width = 32 - (c - 1).leading_zeros();
                KnownBits {
                    zeros: !low_mask(width),
                    ones: 0,
                }
            }
            _ => unknown,
        },
        Opcode::UDiv => match lits[1] {
            // x / c < 2^32 / c <= 2^(32 - floor(log2 c)).
            Some(c) if c > 1 => {
                let lz = 31 - c.leading_zeros();
                KnownBits {
                    zeros: !(u32::MAX >> lz),
                    ones: 0,
                }
            }
            _ => unknown,
        },
        Opcode::Add => {
            if KnownBits::disjoint(ops[0], ops[1]) {
                KnownBits {
                    zeros: ops[0].zeros & ops[1].zeros,
                    ones: ops[0].ones | ops[1].ones,
                }
            } else {
                unknown
            }
        }
        Opcode::Select => ops[1].meet(ops[2]),
        _ => unknown,
    }
}

/// Known bits of every SSA value. Iterates in reverse postorder until the
/// facts stop changing; values not yet computed (back edges, unreachable
/// definitions) count as unknown, so every intermediate state is sound.
pub fn known_bits(f: &Function) -> HashMap<String, KnownBits> {
    let mut map: HashMap<String, KnownBits> = HashMap::new();
    for p in &f.params {
        map.insert(p.clone(), KnownBits::UNKNOWN);
    }
    let rpo = f.rpo();
    for _ in 0..8 {
        let mut changed = false;
        for &b in &rpo {
            let block = &f.blocks[b];
            for phi in &block.phis {
                let kb = phi
                    .incoming
                    .iter()
                    .map(|(op, _)| match op {
                        Operand::Lit(c) => KnownBits::constant(*c),
                        Operand::Value(v) => map.get(v).copied().unwrap_or(KnownBits::UNKNOWN),
                    })
                    .reduce(KnownBits::meet)
                    .unwrap_or(KnownBits::UNKNOWN);
                changed |= map.insert(phi.result.clone(), kb) != Some(kb);
            }
            for inst in &block.body {
                let Some(r) = &inst.result else { continue };
                let ops: Vec<KnownBits> = inst.operands.iter().map(|o| operand_bits(&map, o)).collect();
                let lits: Vec<Option<u32>> = inst.operands.iter().map(Operand::as_lit).collect();
                let kb = if inst.operands.len() == inst.opcode.arity() {
                    transfer(inst.opcode, &ops, &lits)
                } else {
                    KnownBits::UNKNOWN
                };
                changed |= map.insert(r.clone(), kb) != Some(kb);
            }
        }
        if !changed {
            break;
        }
    }
    map
}
