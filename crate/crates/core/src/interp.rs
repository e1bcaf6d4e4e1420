//! Reference interpreter: the ground-truth semantics every rewrite is
//! checked against.
//!
//! Arithmetic wraps at 32 bits; shift amounts are taken mod 32; division by
//! zero and loads of never-stored memory trap. A function is lowered once
//! into an index-addressed form so that running a whole workload does not
//! repeatedly hash value names.

use std::collections::HashMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::CostModel;
use crate::ir::{Function, Opcode, Operand, Terminator};

pub const DEFAULT_STEP_LIMIT: u64 = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrapReason {
    DivByZero,
    UninitLoad,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Returned(u32),
    Trapped(TrapReason),
    StepLimit,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Returned(v) => write!(f, "Returned({v})"),
            Outcome::Trapped(r) => write!(f, "Trapped({r:?})"),
            Outcome::StepLimit => write!(f, "StepLimit"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExecResult {
    pub outcome: Outcome,
    pub steps: u64,
    pub dynamic_cost: u64,
}

/// Argument tuples to run a function on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Workload {
    pub name: String,
    pub args: Vec<Vec<u32>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum InterpError {
    #[error("workload tuple {args:?} has {found} arguments, function expects {expected}")]
    Arity {
        args: Vec<u32>,
        expected: usize,
        found: usize,
    },
    #[error("workload run on {args:?} did not return: {outcome}")]
    WorkloadDiverged { args: Vec<u32>, outcome: Outcome },
    #[error("malformed workload: {0}")]
    Format(String),
}

impl Workload {
    pub fn new(name: impl Into<String>, args: Vec<Vec<u32>>) -> Self {
        Workload {
            name: name.into(),
            args,
        }
    }

    pub fn exhaustive_byte() -> Self {
        Workload::new("exhaustive-0..255", (0..=255u32).map(|v| vec![v]).collect())
    }

    /// Seeded random tuples. Three in four values are drawn from 0..=255,
    /// the rest from the full 32-bit range.
    pub fn random(arity: usize, count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let args = (0..count)
            .map(|_| {
                (0..arity)
                    .map(|_| {
                        if rng.gen_range(0..4) < 3 {
                            rng.gen_range(0..=255)
                        } else {
                            rng.gen()
                        }
                    })
                    .collect()
            })
            .collect();
        Workload::new(format!("random-{count}-seed-{seed}"), args)
    }

    /// Exhaustive 0..=255 for unary functions, one empty tuple for nullary
    /// ones, 1,000 seeded random tuples otherwise.
    pub fn default_for(f: &Function, seed: u64) -> Self {
        match f.params.len() {
            0 => Workload::new("nullary", vec![vec![]]),
            1 => Workload::exhaustive_byte(),
            n => Workload::random(n, 1000, seed),
        }
    }

    /// Parses a JSON array of argument arrays, e.g. `[[45],[0],[255]]`.
    pub fn from_json(name: impl Into<String>, text: &str) -> Result<Self, InterpError> {
        let args: Vec<Vec<u32>> = serde_json::from_str(text).map_err(|e| InterpError::Format(e.to_string()))?;
        Ok(Workload::new(name, args))
    }

    pub fn check_arity(&self, f: &Function) -> Result<(), InterpError> {
        match self.args.iter().find(|a| a.len() != f.params.len()) {
            Some(a) => Err(InterpError::Arity {
                args: a.clone(),
                expected: f.params.len(),
                found: a.len(),
            }),
            None => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Src {
    Reg(usize),
    Lit(u32),
}

struct LInst {
    dst: usize,
    opcode: Opcode,
    args: [Src; 3],
    cost: u64,
}

enum LTerm {
    Ret(Src),
    Br(usize),
    CondBr(Src, usize, usize),
}

struct LBlock {
    /// (destination register, incoming per predecessor block index)
    phis: Vec<(usize, Vec<(usize, Src)>)>,
    body: Vec<LInst>,
    term: LTerm,
    term_cost: u64,
}

/// A function lowered to register indices, ready to be run many times.
pub struct Lowered {
    params: Vec<usize>,
    /// Value name of each register; the last register is scratch.
    names: Vec<String>,
    regs: usize,
    blocks: Vec<LBlock>,
    phi_cost: u64,
}

impl Lowered {
    pub fn new(f: &Function, model: &CostModel) -> Self {
        let mut regs: HashMap<&str, usize> = HashMap::new();
        let names = f.params.iter().map(String::as_str).chain(f.blocks.iter().flat_map(|b| {
            b.phis
                .iter()
                .map(|p| p.result.as_str())
                .chain(b.body.iter().filter_map(|i| i.result.as_deref()))
        }));
        for name in names {
            let n = regs.len();
            regs.entry(name).or_insert(n);
        }
        let scratch = regs.len();
        let src = |o: &Operand| match o {
            Operand::Lit(c) => Src::Lit(*c),
            Operand::Value(v) => Src::Reg(regs.get(v.as_str()).copied().unwrap_or(scratch)),
        };
        let label = |l: &str| f.block_index(l).expect("branch to unknown label");
        let blocks = f
            .blocks
            .iter()
            .map(|b| LBlock {
                phis: b
                    .phis
                    .iter()
                    .map(|phi| {
                        (
                            regs[phi.result.as_str()],
                            phi.incoming.iter().map(|(o, l)| (label(l), src(o))).collect(),
                        )
                    })
                    .collect(),
                body: b
                    .body
                    .iter()
                    .map(|i| {
                        let mut args = [Src::Lit(0); 3];
                        for (k, o) in i.operands.iter().take(3).enumerate() {
                            args[k] = src(o);
                        }
                        LInst {
                            dst: i.result.as_deref().map(|r| regs[r]).unwrap_or(scratch),
                            opcode: i.opcode,
                            args,
                            cost: model.opcode(i.opcode),
                        }
                    })
                    .collect(),
                term: match &b.term {
                    Terminator::Ret(o) => LTerm::Ret(src(o)),
                    Terminator::Br(l) => LTerm::Br(label(l)),
                    Terminator::CondBr {
                        cond,
                        then_label,
                        else_label,
                    } => LTerm::CondBr(src(cond), label(then_label), label(else_label)),
                },
                term_cost: model.terminator(&b.term),
            })
            .collect();
        let mut names = vec![String::new(); scratch + 1];
        for (name, &r) in &regs {
            names[r] = (*name).to_string();
        }
        Lowered {
            params: f.params.iter().map(|p| regs[p.as_str()]).collect(),
            names,
            regs: scratch + 1,
            blocks,
            phi_cost: model.phi(),
        }
    }

    pub fn run(&self, args: &[u32], limit: u64) -> ExecResult {
        self.run_observed(args, limit, |_, _| {})
    }

    /// Like `run`, calling `observe(name, value)` on every phi and
    /// instruction result as it is assigned.
    pub fn run_observed(&self, args: &[u32], limit: u64, mut observe: impl FnMut(&str, u32)) -> ExecResult {
        let mut regs = vec![0u32; self.regs];
        for (&r, &a) in self.params.iter().zip(args) {
            regs[r] = a;
        }
        let mut memory: Vec<Option<u32>> = Vec::new();
        let mut steps = 0u64;
        let mut cost = 0u64;
        let mut block = 0usize;
        let mut pred: Option<usize> = None;
        let get = |regs: &[u32], s: Src| match s {
            Src::Reg(r) => regs[r],
            Src::Lit(c) => c,
        };
        let done = |outcome, steps, cost| ExecResult {
            outcome,
            steps,
            dynamic_cost: cost,
        };
        loop {
            let b = &self.blocks[block];
            if let Some(p) = pred {
                if steps + b.phis.len() as u64 > limit {
                    return done(Outcome::StepLimit, steps, cost);
                }
                let vals: Vec<u32> = b
                    .phis
                    .iter()
                    .map(|(_, inc)| {
                        let s = inc
                            .iter()
                            .find(|(l, _)| *l == p)
                            .map(|(_, s)| *s)
                            .unwrap_or(Src::Lit(0));
                        get(&regs, s)
                    })
                    .collect();
                for ((dst, _), v) in b.phis.iter().zip(vals) {
                    regs[*dst] = v;
                    observe(&self.names[*dst], v);
                }
                steps += b.phis.len() as u64;
                cost += b.phis.len() as u64 * self.phi_cost;
            }
            for inst in &b.body {
                if steps >= limit {
                    return done(Outcome::StepLimit, steps, cost);
                }
                steps += 1;
                cost += inst.cost;
                let x = get(&regs, inst.args[0]);
                let y = get(&regs, inst.args[1]);
                let v = match inst.opcode {
                    Opcode::Alloca => {
                        memory.push(None);
                        (memory.len() - 1) as u32
                    }
                    Opcode::Load => match memory[x as usize] {
                        Some(v) => v,
                        None => return done(Outcome::Trapped(TrapReason::UninitLoad), steps, cost),
                    },
                    Opcode::Store => {
                        memory[y as usize] = Some(x);
                        continue;
                    }
                    op => match eval(op, x, y, get(&regs, inst.args[2])) {
                        Some(v) => v,
                        None => return done(Outcome::Trapped(TrapReason::DivByZero), steps, cost),
                    },
                };
                regs[inst.dst] = v;
                observe(&self.names[inst.dst], v);
            }
            if steps >= limit {
                return done(Outcome::StepLimit, steps, cost);
            }
            steps += 1;
            cost += b.term_cost;
            let next = match b.term {
                LTerm::Ret(s) => return done(Outcome::Returned(get(&regs, s)), steps, cost),
                LTerm::Br(t) => t,
                LTerm::CondBr(c, t, e) => {
                    if get(&regs, c) != 0 {
                        t
                    } else {
                        e
                    }
                }
            };
            pred = Some(block);
            block = next;
        }
    }
}

/// Value of a non-memory instruction on concrete operands; `None` for
/// division by zero. `z` is only read by `select`.
pub fn eval(op: Opcode, x: u32, y: u32, z: u32) -> Option<u32> {
    Some(match op {
        Opcode::Add => x.wrapping_add(y),
        Opcode::Sub => x.wrapping_sub(y),
        Opcode::Mul => x.wrapping_mul(y),
        Opcode::UDiv => x.checked_div(y)?,
        Opcode::URem => x.checked_rem(y)?,
        Opcode::Shl => x.wrapping_shl(y % 32),
        Opcode::LShr => x.wrapping_shr(y % 32),
        Opcode::And => x & y,
        Opcode::Or => x | y,
        Opcode::Xor => x ^ y,
        Opcode::IcmpEq => (x == y) as u32,
        Opcode::IcmpNe => (x != y) as u32,
        Opcode::IcmpUlt => (x < y) as u32,
        Opcode::IcmpUle => (x <= y) as u32,
        Opcode::Select => {
            if x != 0 {
                y
            } else {
                z
            }
        }
        Opcode::Alloca | Opcode::Load | Opcode::Store => return None,
    })
}

pub fn interpret(f: &Function, args: &[u32], limit: u64, model: &CostModel) -> ExecResult {
    assert_eq!(args.len(), f.params.len(), "argument count must match parameters");
    Lowered::new(f, model).run(args, limit)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Equivalence {
    Equivalent,
    CounterExample { args: Vec<u32>, r1: Outcome, r2: Outcome },
}

impl Equivalence {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, Equivalence::Equivalent)
    }
}

/// Runs both functions on every workload tuple. Outcomes must match
/// exactly: the same returned value, the same trap reason, or both out of
/// steps.
pub fn differential_check(f1: &Function, f2: &Function, w: &Workload, limit: u64) -> Equivalence {
    let model = CostModel::default();
    let (l1, l2) = (Lowered::new(f1, &model), Lowered::new(f2, &model));
    for args in &w.args {
        let r1 = l1.run(args, limit).outcome;
        let r2 = l2.run(args, limit).outcome;
        if r1 != r2 {
            return Equivalence::CounterExample {
                args: args.clone(),
                r1,
                r2,
            };
        }
    }
    Equivalence::Equivalent
}

/// Sum of dynamic costs over the workload; every run must return.
pub fn dynamic_cost_total(f: &Function, w: &Workload, model: &CostModel) -> Result<u64, InterpError> {
    w.check_arity(f)?;
    let l = Lowered::new(f, model);
    let mut total = 0;
    for args in &w.args {
        let r = l.run(args, DEFAULT_STEP_LIMIT);
        match r.outcome {
            Outcome::Returned(_) => total += r.dynamic_cost,
            outcome => {
                return Err(InterpError::WorkloadDiverged {
                    args: args.clone(),
                    outcome,
                })
            }
        }
    }
    Ok(total)
}
