//! The mini-IR: an SSA form with a single 32-bit integer kind plus an
//! alloca pointer kind.
//!
//! Functions are plain owned trees of blocks and instructions. Values and
//! labels are referred to by name; every rewrite produces a new `Function`
//! rather than mutating a shared one.

mod canon;
mod parse;
mod print;
mod validate;

use std::collections::{HashMap, HashSet};
use std::fmt;

pub use canon::{canonical_hash, canonical_text, CanonicalDigest};
pub use parse::{parse_function, parse_module, parse_module_unchecked, IrError, ParseError};
pub use print::{print_function, print_module};
pub use validate::{validate, ValidationError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Opcode {
    Add,
    Sub,
    Mul,
    UDiv,
    URem,
    Shl,
    LShr,
    And,
    Or,
    Xor,
    IcmpEq,
    IcmpNe,
    IcmpUlt,
    IcmpUle,
    Select,
    Alloca,
    Load,
    Store,
}

impl Opcode {
    pub const ALL: [Opcode; 18] = [
        Opcode::Add,
        Opcode::Sub,
        Opcode::Mul,
        Opcode::UDiv,
        Opcode::URem,
        Opcode::Shl,
        Opcode::LShr,
        Opcode::And,
        Opcode::Or,
        Opcode::Xor,
        Opcode::IcmpEq,
        Opcode::IcmpNe,
        Opcode::IcmpUlt,
        Opcode::IcmpUle,
        Opcode::Select,
        Opcode::Alloca,
        Opcode::Load,
        Opcode::Store,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Opcode::Add => "add",
            Opcode::Sub => "sub",
            Opcode::Mul => "mul",
            Opcode::UDiv => "udiv",
            Opcode::URem => "urem",
            Opcode::Shl => "shl",
            Opcode::LShr => "lshr",
            Opcode::And => "and",
            Opcode::Or => "or",
            Opcode::Xor => "xor",
            Opcode::IcmpEq => "icmp.eq",
            Opcode::IcmpNe => "icmp.ne",
            Opcode::IcmpUlt => "icmp.ult",
            Opcode::IcmpUle => "icmp.ule",
            Opcode::Select => "select",
            Opcode::Alloca => "alloca",
            Opcode::Load => "load",
            Opcode::Store => "store",
        }
    }

    pub fn from_name(name: &str) -> Option<Opcode> {
        Opcode::ALL.iter().copied().find(|op| op.name() == name)
    }

    pub fn arity(self) -> usize {
        match self {
            Opcode::Select => 3,
            Opcode::Alloca => 0,
            Opcode::Load => 1,
            _ => 2,
        }
    }

    /// Two-operand integer operations, comparisons included.
    pub fn is_binop(self) -> bool {
        self.arity() == 2 && self != Opcode::Store
    }

    pub fn is_commutative(self) -> bool {
        matches!(
            self,
            Opcode::Add | Opcode::Mul | Opcode::And | Opcode::Or | Opcode::Xor | Opcode::IcmpEq | Opcode::IcmpNe
        )
    }

    pub fn is_icmp(self) -> bool {
        matches!(
            self,
            Opcode::IcmpEq | Opcode::IcmpNe | Opcode::IcmpUlt | Opcode::IcmpUle
        )
    }

    pub fn has_result(self) -> bool {
        self != Opcode::Store
    }
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Operand {
    Value(String),
    Lit(u32),
}

impl Operand {
    pub fn value(name: impl Into<String>) -> Self {
        Operand::Value(name.into())
    }

    pub fn as_value(&self) -> Option<&str> {
        match self {
            Operand::Value(v) => Some(v),
            Operand::Lit(_) => None,
        }
    }

    pub fn as_lit(&self) -> Option<u32> {
        match self {
            Operand::Lit(c) => Some(*c),
            Operand::Value(_) => None,
        }
    }

    pub fn is_value(&self, name: &str) -> bool {
        self.as_value() == Some(name)
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Value(v) => write!(f, "%{v}"),
            Operand::Lit(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Inst {
    pub result: Option<String>,
    pub opcode: Opcode,
    pub operands: Vec<Operand>,
}

impl Inst {
    pub fn new(result: impl Into<String>, opcode: Opcode, operands: Vec<Operand>) -> Self {
        Inst {
            result: Some(result.into()),
            opcode,
            operands,
        }
    }

    pub fn store(value: Operand, ptr: impl Into<String>) -> Self {
        Inst {
            result: None,
            opcode: Opcode::Store,
            operands: vec![value, Operand::Value(ptr.into())],
        }
    }

    pub fn result(&self) -> Option<&str> {
        self.result.as_deref()
    }

    /// No observable effect other than producing its result: erasing an
    /// unused copy or executing it speculatively cannot change behaviour.
    /// Division is only pure when its divisor is a nonzero literal.
    pub fn is_pure(&self) -> bool {
        match self.opcode {
            Opcode::UDiv | Opcode::URem => matches!(self.operands[1], Operand::Lit(c) if c != 0),
            Opcode::Alloca | Opcode::Load | Opcode::Store => false,
            _ => true,
        }
    }

    /// Whether the instruction may be deleted once its result is unused.
    pub fn is_removable_when_dead(&self) -> bool {
        self.is_pure() || self.opcode == Opcode::Alloca
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Phi {
    pub result: String,
    pub incoming: Vec<(Operand, String)>,
}

impl Phi {
    pub fn incoming_from(&self, pred: &str) -> Option<&Operand> {
        self.incoming.iter().find(|(_, l)| l == pred).map(|(op, _)| op)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Terminator {
    Ret(Operand),
    Br(String),
    CondBr {
        cond: Operand,
        then_label: String,
        else_label: String,
    },
}

impl Terminator {
    /// Successor labels in branch order, duplicates removed.
    pub fn successors(&self) -> Vec<&str> {
        match self {
            Terminator::Ret(_) => vec![],
            Terminator::Br(l) => vec![l.as_str()],
            Terminator::CondBr {
                then_label, else_label, ..
            } => {
                if then_label == else_label {
                    vec![then_label.as_str()]
                } else {
                    vec![then_label.as_str(), else_label.as_str()]
                }
            }
        }
    }

    pub fn operand(&self) -> Option<&Operand> {
        match self {
            Terminator::Ret(op) => Some(op),
            Terminator::CondBr { cond, .. } => Some(cond),
            Terminator::Br(_) => None,
        }
    }

    pub fn operand_mut(&mut self) -> Option<&mut Operand> {
        match self {
            Terminator::Ret(op) => Some(op),
            Terminator::CondBr { cond, .. } => Some(cond),
            Terminator::Br(_) => None,
        }
    }

    pub fn rename_target(&mut self, from: &str, to: &str) {
        match self {
            Terminator::Ret(_) => {}
            Terminator::Br(l) => {
                if l == from {
                    *l = to.to_string();
                }
            }
            Terminator::CondBr {
                then_label, else_label, ..
            } => {
                if then_label == from {
                    *then_label = to.to_string();
                }
                if else_label == from {
                    *else_label = to.to_string();
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Block {
    pub label: String,
    pub phis: Vec<Phi>,
    pub body: Vec<Inst>,
    pub term: Terminator,
}

impl Block {
    pub fn new(label: impl Into<String>, body: Vec<Inst>, term: Terminator) -> Self {
        Block {
            label: label.into(),
            phis: Vec::new(),
            body,
            term,
        }
    }

    /// Phis, body instructions and the terminator.
    pub fn instruction_count(&self) -> usize {
        self.phis.len() + self.body.len() + 1
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Function {
    pub name: String,
    pub params: Vec<String>,
    pub blocks: Vec<Block>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Module {
    pub functions: Vec<Function>,
}

impl Module {
    pub fn function(&self, name: &str) -> Option<&Function> {
        self.functions.iter().find(|f| f.name == name)
    }
}

/// Position of a body instruction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InstLoc {
    pub block: usize,
    pub index: usize,
}

/// Where an SSA value comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DefSite {
    Param(usize),
    Phi { block: usize, index: usize },
    Inst(InstLoc),
}

impl Function {
    pub fn block_index(&self, label: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.label == label)
    }

    pub fn block(&self, label: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.label == label)
    }

    pub fn instruction_count(&self) -> usize {
        self.blocks.iter().map(Block::instruction_count).sum()
    }

    /// Successor block indices of `b` (unknown labels are skipped).
    pub fn successors(&self, b: usize) -> Vec<usize> {
        self.blocks[b]
            .term
            .successors()
            .into_iter()
            .filter_map(|l| self.block_index(l))
            .collect()
    }

    /// Predecessor lists indexed by block, each in block order.
    pub fn predecessors(&self) -> Vec<Vec<usize>> {
        let mut preds = vec![Vec::new(); self.blocks.len()];
        for b in 0..self.blocks.len() {
            for s in self.successors(b) {
                if !preds[s].contains(&b) {
                    preds[s].push(b);
                }
            }
        }
        for p in &mut preds {
            p.sort_unstable();
        }
        preds
    }

    /// Reverse postorder of the blocks reachable from the entry.
    pub fn rpo(&self) -> Vec<usize> {
        if self.blocks.is_empty() {
            return Vec::new();
        }
        let n = self.blocks.len();
        let succs: Vec<Vec<usize>> = (0..n).map(|b| self.successors(b)).collect();
        let mut visited = vec![false; n];
        let mut post = Vec::with_capacity(n);
        let mut stack = vec![(0usize, 0usize)];
        visited[0] = true;
        while let Some((b, i)) = stack.pop() {
            if i < succs[b].len() {
                stack.push((b, i + 1));
                let s = succs[b][i];
                if !visited[s] {
                    visited[s] = true;
                    stack.push((s, 0));
                }
            } else {
                post.push(b);
            }
        }
        post.reverse();
        post
    }

    pub fn reachable(&self) -> Vec<bool> {
        let mut r = vec![false; self.blocks.len()];
        for b in self.rpo() {
            r[b] = true;
        }
        r
    }

    /// Map from every defined value name to its definition site.
    pub fn def_sites(&self) -> HashMap<String, DefSite> {
        let mut defs = HashMap::new();
        for (i, p) in self.params.iter().enumerate() {
            defs.insert(p.clone(), DefSite::Param(i));
        }
        for (b, block) in self.blocks.iter().enumerate() {
            for (i, phi) in block.phis.iter().enumerate() {
                defs.insert(phi.result.clone(), DefSite::Phi { block: b, index: i });
            }
            for (i, inst) in block.body.iter().enumerate() {
                if let Some(r) = &inst.result {
                    defs.insert(r.clone(), DefSite::Inst(InstLoc { block: b, index: i }));
                }
            }
        }
        defs
    }

    pub fn inst_defining(&self, name: &str) -> Option<(InstLoc, &Inst)> {
        for (b, block) in self.blocks.iter().enumerate() {
            for (i, inst) in block.body.iter().enumerate() {
                if inst.result.as_deref() == Some(name) {
                    return Some((InstLoc { block: b, index: i }, inst));
                }
            }
        }
        None
    }

    pub fn defined_names(&self) -> HashSet<String> {
        let mut names: HashSet<String> = self.params.iter().cloned().collect();
        for block in &self.blocks {
            names.extend(block.phis.iter().map(|p| p.result.clone()));
            names.extend(block.body.iter().filter_map(|i| i.result.clone()));
        }
        names
    }

    /// Number of operand slots referring to each value.
    pub fn use_counts(&self) -> HashMap<String, usize> {
        let mut counts: HashMap<String, usize> = HashMap::new();
        self.for_each_operand(|op| {
            if let Operand::Value(v) = op {
                *counts.entry(v.clone()).or_default() += 1;
            }
        });
        counts
    }

    pub fn for_each_operand(&self, mut f: impl FnMut(&Operand)) {
        for block in &self.blocks {
            for phi in &block.phis {
                for (op, _) in &phi.incoming {
                    f(op);
                }
            }
            for inst in &block.body {
                for op in &inst.operands {
                    f(op);
                }
            }
            if let Some(op) = block.term.operand() {
                f(op);
            }
        }
    }

    pub fn for_each_operand_mut(&mut self, mut f: impl FnMut(&mut Operand)) {
        for block in &mut self.blocks {
            for phi in &mut block.phis {
                for (op, _) in &mut phi.incoming {
                    f(op);
                }
            }
            for inst in &mut block.body {
                for op in &mut inst.operands {
                    f(op);
                }
            }
            if let Some(op) = block.term.operand_mut() {
                f(op);
            }
        }
    }

    /// Rewrites every use of `name` to `with`. Returns the number of slots rewritten.
    pub fn replace_all_uses(&mut self, name: &str, with: &Operand) -> usize {
        let mut n = 0;
        self.for_each_operand_mut(|op| {
            if op.is_value(name) {
                *op = with.clone();
                n += 1;
            }
        });
        n
    }

    /// A value name not yet defined in the function, derived from `hint`.
    pub fn fresh_value(&self, hint: &str) -> String {
        let names = self.defined_names();
        fresh_name(hint, |c| names.contains(c))
    }

    pub fn fresh_label(&self, hint: &str) -> String {
        fresh_name(hint, |c| self.blocks.iter().any(|b| b.label == c))
    }

    /// Removes the definitions of `candidates` that have become unused,
    /// following operands transitively. Only side-effect-free definitions
    /// (pure instructions, allocas and phis) are removed.
    pub fn erase_dead(&mut self, candidates: impl IntoIterator<Item = String>) -> usize {
        let mut counts = self.use_counts();
        let mut work: Vec<String> = candidates.into_iter().collect();
        let mut erased = 0;
        while let Some(name) = work.pop() {
            if counts.get(&name).copied().unwrap_or(0) != 0 {
                continue;
            }
            let mut freed = Vec::new();
            let mut found = false;
            'blocks: for block in &mut self.blocks {
                if let Some(i) = block.phis.iter().position(|p| p.result == name) {
                    let phi = block.phis.remove(i);
                    freed.extend(phi.incoming.into_iter().map(|(op, _)| op));
                    found = true;
                    break 'blocks;
                }
                if let Some(i) = block
                    .body
                    .iter()
                    .position(|inst| inst.result.as_deref() == Some(name.as_str()))
                {
                    if !block.body[i].is_removable_when_dead() {
                        break 'blocks;
                    }
                    let inst = block.body.remove(i);
                    freed.extend(inst.operands);
                    found = true;
                    break 'blocks;
                }
            }
            if !found {
                continue;
            }
            erased += 1;
            for op in freed {
                if let Operand::Value(v) = op {
                    if let Some(c) = counts.get_mut(&v) {
                        *c -= 1;
                        if *c == 0 {
                            work.push(v);
                        }
                    }
                }
            }
        }
        erased
    }
}

pub(crate) fn fresh_name(hint: &str, taken: impl Fn(&str) -> bool) -> String {
    if !taken(hint) {
        return hint.to_string();
    }
    (1..)
        .map(|i| format!("{hint}.{i}"))
        .find(|c| !taken(c))
        .expect("unbounded counter")
}
