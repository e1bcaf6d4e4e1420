use std::collections::{BTreeSet, HashMap};

use crate::ir::{DefSite, Function, InstLoc, Operand};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UseLoc {
    Phi { block: usize, index: usize },
    Inst(InstLoc),
    Term { block: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UseSite {
    pub loc: UseLoc,
    pub operand: usize,
}

#[derive(Clone, Debug, Default)]
pub struct UseDef {
    pub defs: HashMap<String, DefSite>,
    pub uses: HashMap<String, BTreeSet<UseSite>>,
}

impl UseDef {
    pub fn uses_of(&self, v: &str) -> impl Iterator<Item = &UseSite> {
        self.uses.get(v).into_iter().flatten()
    }

    pub fn is_dead(&self, v: &str) -> bool {
        self.uses.get(v).is_none_or(BTreeSet::is_empty)
    }
}

pub fn build_use_def(f: &Function) -> UseDef {
    let defs = f.def_sites();
    let mut uses: HashMap<String, BTreeSet<UseSite>> = defs.keys().map(|k| (k.clone(), BTreeSet::new())).collect();
    let mut add = |op: &Operand, site: UseSite| {
        if let Operand::Value(v) = op {
            uses.entry(v.clone()).or_default().insert(site);
        }
    };
    for (b, block) in f.blocks.iter().enumerate() {
        for (i, phi) in block.phis.iter().enumerate() {
            for (k, (op, _)) in phi.incoming.iter().enumerate() {
                add(
                    op,
                    UseSite {
                        loc: UseLoc::Phi { block: b, index: i },
                        operand: k,
                    },
                );
            }
        }
        for (i, inst) in block.body.iter().enumerate() {
            for (k, op) in inst.operands.iter().enumerate() {
                add(
                    op,
                    UseSite {
                        loc: UseLoc::Inst(InstLoc { block: b, index: i }),
                        operand: k,
                    },
                );
            }
        }
        if let Some(op) = block.term.operand() {
            add(
                op,
                UseSite {
                    loc: UseLoc::Term { block: b },
                    operand: 0,
                },
            );
        }
    }
    UseDef { defs, uses }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_function;

    #[test]
    fn bin2bcd_q_is_used_once_by_shl() {
        let f = parse_function(
            "func @bin2bcd(%val) {\nentry:\n  %q = udiv %val, 10\n  %h = shl %q, 4\n  %r = urem %val, 10\n  %s = add %h, %r\n  ret %s\n}\n",
        )
        .unwrap();
        let ud = build_use_def(&f);
        let uses: Vec<_> = ud.uses_of("q").copied().collect();
        assert_eq!(
            uses,
            vec![UseSite {
                loc: UseLoc::Inst(InstLoc { block: 0, index: 1 }),
                operand: 0
            }]
        );
        assert_eq!(ud.uses_of("val").count(), 2);
    }

    #[test]
    fn unused_value_has_no_uses() {
        let f = parse_function("func @f(%a) {\nentry:\n  %dead = add %a, 1\n  ret %a\n}\n").unwrap();
        let ud = build_use_def(&f);
        assert!(ud.is_dead("dead"));
        assert_eq!(ud.defs["dead"], DefSite::Inst(InstLoc { block: 0, index: 0 }));
    }

    #[test]
    fn param_used_twice_has_two_entries() {
        let f = parse_function("func @f(%a) {\nentry:\n  %b = mul %a, %a\n  ret %b\n}\n").unwrap();
        assert_eq!(build_use_def(&f).uses_of("a").count(), 2);
    }
}
