//! Reassociation of add/sub trees.
//!
//! A tree is rooted at an add or sub; its interior nodes are single-use
//! adds, subs and multiplications by a literal defined in the root's block.
//! The tree is flattened into `Σ cᵢ·leafᵢ + k`, like terms are combined and
//! the sum is re-emitted in a canonical shape: scaled terms first, then a
//! left-to-right chain over leaves in definition order, the constant last.

use std::collections::{BTreeMap, HashMap, HashSet};

use super::PassOutcome;
use crate::cost::CostModel;
use crate::ir::{fresh_name, Function, Inst, Opcode, Operand};

#[derive(Clone, Debug, PartialEq, Eq)]
enum Expr {
    Leaf(Operand),
    Node(Opcode, Box<Expr>, Box<Expr>),
}

fn node(op: Opcode, a: Expr, b: Expr) -> Expr {
    Expr::Node(op, Box::new(a), Box::new(b))
}

fn is_add_sub(op: Opcode) -> bool {
    matches!(op, Opcode::Add | Opcode::Sub)
}

/// `mul v, c` or `mul c, v`.
pub(crate) fn mul_by_literal(inst: &Inst) -> Option<(&str, u32)> {
    if inst.opcode != Opcode::Mul {
        return None;
    }
    match (&inst.operands[0], &inst.operands[1]) {
        (Operand::Value(v), Operand::Lit(c)) | (Operand::Lit(c), Operand::Value(v)) => Some((v, *c)),
        _ => None,
    }
}

/// Definition order of every value: parameters, then phis and
/// instructions in reverse postorder, then unreachable blocks.
pub(crate) fn value_order(f: &Function) -> HashMap<String, usize> {
    let mut order = HashMap::new();
    for p in &f.params {
        let n = order.len();
        order.insert(p.clone(), n);
    }
    let mut blocks = f.rpo();
    let reached: HashSet<usize> = blocks.iter().copied().collect();
    blocks.extend((0..f.blocks.len()).filter(|b| !reached.contains(b)));
    for b in blocks {
        let block = &f.blocks[b];
        let names = block
            .phis
            .iter()
            .map(|p| p.result.as_str())
            .chain(block.body.iter().filter_map(Inst::result));
        for name in names {
            let n = order.len();
            order.insert(name.to_string(), n);
        }
    }
    order
}

/// Values that are interior nodes of the tree of their single user.
fn absorbed(f: &Function) -> HashSet<String> {
    let counts = f.use_counts();
    let mut out = HashSet::new();
    for block in &f.blocks {
        let mut user: HashMap<&str, usize> = HashMap::new();
        for (i, inst) in block.body.iter().enumerate() {
            for op in &inst.operands {
                if let Operand::Value(v) = op {
                    user.insert(v, i);
                }
            }
        }
        for (i, inst) in block.body.iter().enumerate().rev() {
            let Some(r) = inst.result() else { continue };
            if !(is_add_sub(inst.opcode) || mul_by_literal(inst).is_some()) || counts.get(r) != Some(&1) {
                continue;
            }
            let Some(&u) = user.get(r) else { continue };
            let user_inst = &block.body[u];
            let in_tree = is_add_sub(user_inst.opcode)
                || (mul_by_literal(user_inst).is_some() && user_inst.result().is_some_and(|ur| out.contains(ur)));
            if u > i && in_tree {
                out.insert(r.to_string());
            }
        }
    }
    out
}

#[derive(Default)]
struct Linear {
    /// Coefficient per leaf, keyed by (definition order, name).
    terms: BTreeMap<(usize, String), u32>,
    constant: u32,
}

struct Tree<'a> {
    defs: HashMap<&'a str, &'a Inst>,
    absorbed: &'a HashSet<String>,
    order: &'a HashMap<String, usize>,
    lin: Linear,
    nodes: Vec<String>,
}

impl<'a> Tree<'a> {
    fn walk(&mut self, op: &Operand, scale: u32) -> Expr {
        if let Operand::Value(v) = op {
            if self.absorbed.contains(v) {
                if let Some(&inst) = self.defs.get(v.as_str()) {
                    self.nodes.push(v.clone());
                    return self.node(inst, scale);
                }
            }
        }
        match op {
            Operand::Lit(c) => self.lin.constant = self.lin.constant.wrapping_add(scale.wrapping_mul(*c)),
            Operand::Value(v) => {
                let key = (self.order.get(v).copied().unwrap_or(usize::MAX), v.clone());
                let c = self.lin.terms.entry(key).or_default();
                *c = c.wrapping_add(scale);
            }
        }
        Expr::Leaf(op.clone())
    }

    fn node(&mut self, inst: &Inst, scale: u32) -> Expr {
        let (a, b) = (&inst.operands[0], &inst.operands[1]);
        match inst.opcode {
            Opcode::Add => {
                let ea = self.walk(a, scale);
                node(Opcode::Add, ea, self.walk(b, scale))
            }
            Opcode::Sub => {
                let ea = self.walk(a, scale);
                node(Opcode::Sub, ea, self.walk(b, scale.wrapping_neg()))
            }
            _ => {
                let (_, c) = mul_by_literal(inst).expect("interior multiplication has a literal");
                let mut side = |o: &Operand| match o {
                    Operand::Lit(_) => Expr::Leaf(o.clone()),
                    Operand::Value(_) => self.walk(o, scale.wrapping_mul(c)),
                };
                let ea = side(a);
                node(Opcode::Mul, ea, side(b))
            }
        }
    }
}

struct Emitter {
    taken: HashSet<String>,
    hint: String,
    insts: Vec<Inst>,
}

type Term = (Operand, Expr);

impl Emitter {
    fn binop(&mut self, op: Opcode, a: Term, b: Term) -> Term {
        let name = fresh_name(&self.hint, |c| self.taken.contains(c));
        self.taken.insert(name.clone());
        self.insts.push(Inst::new(name.clone(), op, vec![a.0, b.0]));
        (Operand::Value(name), node(op, a.1, b.1))
    }
}

fn lit(c: u32) -> Term {
    (Operand::Lit(c), Expr::Leaf(Operand::Lit(c)))
}

/// Coefficients above 2^31 are emitted as subtractions.
fn is_negative(c: u32) -> bool {
    c > 0x8000_0000
}

fn emit(lin: &Linear, em: &mut Emitter) -> Term {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for ((_, v), &c) in &lin.terms {
        if c == 0 {
            continue;
        }
        let mag = if is_negative(c) { c.wrapping_neg() } else { c };
        let leaf = (Operand::value(v.as_str()), Expr::Leaf(Operand::value(v.as_str())));
        let term = if mag == 1 {
            leaf
        } else {
            em.binop(Opcode::Mul, leaf, lit(mag))
        };
        if is_negative(c) {
            neg.push(term);
        } else {
            pos.push(term);
        }
    }
    let mut k = lin.constant;
    let mut acc: Option<Term> = None;
    for t in pos {
        acc = Some(match acc {
            None => t,
            Some(a) => em.binop(Opcode::Add, a, t),
        });
    }
    for t in neg {
        acc = Some(match acc {
            None => em.binop(Opcode::Sub, lit(std::mem::take(&mut k)), t),
            Some(a) => em.binop(Opcode::Sub, a, t),
        });
    }
    if k != 0 {
        acc = Some(match acc {
            None => lit(k),
            Some(a) if is_negative(k) => em.binop(Opcode::Sub, a, lit(k.wrapping_neg())),
            Some(a) => em.binop(Opcode::Add, a, lit(k)),
        });
    }
    acc.unwrap_or_else(|| lit(0))
}

type Measure = (u64, usize);

/// Rewrites every tree whose canonical form differs from its current form
/// and passes `accept(old, new)` on (cost, instruction count).
fn rewrite_trees(f: &Function, accept: impl Fn(Measure, Measure) -> bool) -> Function {
    let model = CostModel::default();
    let mut g = f.clone();
    let roots: Vec<String> = {
        let absorbed = absorbed(&g);
        g.rpo()
            .into_iter()
            .flat_map(|b| g.blocks[b].body.iter())
            .filter(|i| is_add_sub(i.opcode))
            .filter_map(|i| i.result().filter(|r| !absorbed.contains(*r)).map(str::to_string))
            .collect()
    };
    for root in roots {
        let absorbed = absorbed(&g);
        let Some((loc, root_inst)) = g.inst_defining(&root) else {
            continue;
        };
        if absorbed.contains(&root) || !is_add_sub(root_inst.opcode) {
            continue;
        }
        let order = value_order(&g);
        let block = &g.blocks[loc.block];
        let mut tree = Tree {
            defs: block.body.iter().filter_map(|i| i.result().map(|r| (r, i))).collect(),
            absorbed: &absorbed,
            order: &order,
            lin: Linear::default(),
            nodes: vec![root.clone()],
        };
        let old_expr = tree.node(root_inst, 1);
        let nodes: HashSet<String> = tree.nodes.iter().cloned().collect();
        let lin = tree.lin;
        let old_measure = block
            .body
            .iter()
            .filter(|i| i.result().is_some_and(|r| nodes.contains(r)))
            .fold((0, 0), |(c, n), i| (c + model.opcode(i.opcode), n + 1));

        let mut em = Emitter {
            taken: g.defined_names(),
            hint: format!("{root}.r"),
            insts: Vec::new(),
        };
        let (result, new_expr) = emit(&lin, &mut em);
        let new_measure = em
            .insts
            .iter()
            .fold((0, 0), |(c, n), i| (c + model.opcode(i.opcode), n + 1));
        if new_expr == old_expr || !accept(old_measure, new_measure) {
            continue;
        }

        let leaves: Vec<String> = lin.terms.keys().map(|(_, v)| v.clone()).collect();
        let body = &mut g.blocks[loc.block].body;
        let removed_before = body[..loc.index]
            .iter()
            .filter(|i| i.result().is_some_and(|r| nodes.contains(r)))
            .count();
        body.retain(|i| !i.result().is_some_and(|r| nodes.contains(r)));
        let mut insts = em.insts;
        let replacement = match insts.last_mut() {
            Some(last) => {
                last.result = Some(root.clone());
                None
            }
            None => Some(result),
        };
        let at = loc.index - removed_before;
        body.splice(at..at, insts);
        if let Some(r) = replacement {
            g.replace_all_uses(&root, &r);
        }
        g.erase_dead(leaves);
    }
    g
}

/// Puts the operands of commutative instructions outside add/sub trees in
/// definition order, literals last.
fn canonical_operands(g: &mut Function) {
    let order = value_order(g);
    let absorbed = absorbed(g);
    let key = |o: &Operand| match o {
        Operand::Value(v) => (0, order.get(v).copied().unwrap_or(usize::MAX) as u64),
        Operand::Lit(c) => (1, *c as u64),
    };
    for b in g.rpo() {
        for inst in &mut g.blocks[b].body {
            let skip = inst.opcode == Opcode::Add || inst.result().is_some_and(|r| absorbed.contains(r));
            if inst.opcode.is_commutative() && !skip && key(&inst.operands[0]) > key(&inst.operands[1]) {
                inst.operands.swap(0, 1);
            }
        }
    }
}

/// Reassociation: trees are re-emitted whenever the canonical form costs no
/// more, and other commutative operations get canonical operand order.
pub fn apply_reassociate(f: &Function) -> PassOutcome {
    let mut g = rewrite_trees(f, |old, new| new <= old);
    canonical_operands(&mut g);
    PassOutcome::from_rewrite(f, g)
}

/// The profitable part of reassociation: trees are only rewritten when the
/// combined form is strictly cheaper (or as cheap and shorter).
pub fn apply_factor_terms(f: &Function) -> PassOutcome {
    let g = rewrite_trees(f, |old, new| new < old);
    PassOutcome::from_rewrite(f, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::static_cost;
    use crate::passes::test_util::{checked, func, lines};

    const P_D: &str = "func @bin2bcd(%val) {
entry:
  %q = udiv %val, 10
  %h = mul %q, 16
  %u = mul %q, 10
  %r = sub %val, %u
  %s = add %h, %r
  ret %s
}
";

    #[test]
    fn combines_bcd_terms() {
        let f = func(P_D);
        for out in [apply_reassociate(&f), apply_factor_terms(&f)] {
            assert!(out.changed);
            assert_eq!(
                lines(&out.function),
                vec![
                    "%q = udiv %val, 10",
                    "%s.r = mul %q, 6",
                    "%s = add %val, %s.r",
                    "ret %s"
                ]
            );
            assert_eq!(static_cost(&out.function, &CostModel::default()), 9);
            checked(&f, &out);
        }
    }

    #[test]
    fn canonical_forms_are_fixpoints() {
        let f = func("func @f(%a, %b) {\nentry:\n  %s = add %a, %b\n  ret %s\n}\n");
        assert!(!apply_reassociate(&f).changed);
        let out = apply_reassociate(&func(P_D));
        assert!(!apply_reassociate(&out.function).changed);
        let f = func("func @f(%a, %b) {\nentry:\n  %s = sub %b, %a\n  %t = sub 7, %s\n  ret %t\n}\n");
        let once = apply_reassociate(&f).function;
        assert!(!apply_reassociate(&once).changed);
    }

    #[test]
    fn cancelling_terms() {
        let f = func("func @f(%a, %b) {\nentry:\n  %t = add %a, %b\n  %s = sub %t, %a\n  ret %s\n}\n");
        let out = apply_reassociate(&f);
        assert_eq!(lines(&out.function), vec!["ret %b"]);
        checked(&f, &out);
    }

    #[test]
    fn reorders_swapped_operands() {
        let f = func("func @f(%a, %b) {\nentry:\n  %s = add %b, %a\n  ret %s\n}\n");
        let out = apply_reassociate(&f);
        assert_eq!(lines(&out.function), vec!["%s = add %a, %b", "ret %s"]);
        assert!(!apply_factor_terms(&f).changed);
        let f = func("func @f(%a, %b) {\nentry:\n  %s = xor %b, %a\n  %t = mul 6, %s\n  ret %t\n}\n");
        let out = apply_reassociate(&f);
        assert_eq!(
            lines(&out.function),
            vec!["%s = xor %a, %b", "%t = mul %s, 6", "ret %t"]
        );
    }

    #[test]
    fn never_increases_cost() {
        // 2a + b would need a multiplication.
        let f = func("func @f(%a, %b) {\nentry:\n  %t = add %a, %b\n  %s = add %t, %a\n  ret %s\n}\n");
        assert!(!apply_reassociate(&f).changed);
    }

    #[test]
    fn constants_and_negative_terms() {
        let f = func("func @f(%a, %b) {\nentry:\n  %t = add 5, %a\n  %u = sub %t, 9\n  %v = sub %u, %b\n  ret %v\n}\n");
        let out = apply_reassociate(&f);
        checked(&f, &out);
        assert_eq!(
            lines(&out.function),
            vec!["%v.r = sub %a, %b", "%v = sub %v.r, 4", "ret %v"]
        );
    }

    #[test]
    fn right_nested_chain_is_left_nested() {
        let f = func("func @f(%a, %b, %c) {\nentry:\n  %t = add %b, %c\n  %s = add %a, %t\n  ret %s\n}\n");
        let out = apply_reassociate(&f);
        assert_eq!(
            lines(&out.function),
            vec!["%s.r = add %a, %b", "%s = add %s.r, %c", "ret %s"]
        );
        checked(&f, &out);
    }

    #[test]
    fn multi_use_values_are_leaves() {
        let f = func("func @f(%a, %b) {\nentry:\n  %t = add %a, %b\n  %s = add %t, %t\n  ret %s\n}\n");
        assert!(!apply_reassociate(&f).changed);
    }
}
