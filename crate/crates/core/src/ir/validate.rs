use std::collections::{HashMap, HashSet};

use thiserror::Error;

use super::{DefSite, Function, Opcode, Operand};
use crate::analysis::compute_dominators;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("function has no blocks")]
    EmptyFunction,
    #[error("duplicate block label `{label}`")]
    DuplicateLabel { label: String },
    #[error("value %{name} is defined more than once")]
    DuplicateDefinition { name: String },
    #[error("block `{block}`: {message}")]
    Terminator { block: String, message: String },
    #[error("block `{block}` branches to unknown label `{label}`")]
    UnknownLabel { block: String, label: String },
    #[error("entry block `{block}` {message}")]
    Entry { block: String, message: String },
    #[error("block `{block}`: {opcode} expects {expected} operands, found {found}")]
    Arity {
        block: String,
        opcode: Opcode,
        expected: usize,
        found: usize,
    },
    #[error("block `{block}`: {message}")]
    Kind { block: String, message: String },
    #[error("block `{block}` uses undefined value %{name}")]
    UndefinedValue { name: String, block: String },
    #[error("use of %{name} in block `{block}` is not dominated by its definition")]
    Dominance { name: String, block: String },
    #[error("phi %{name} in block `{block}`: {message}")]
    Phi {
        name: String,
        block: String,
        message: String,
    },
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Int,
    Ptr,
}

/// Checks every structural and SSA invariant of `f`. An empty result means
/// the function is well formed.
pub fn validate(f: &Function) -> Vec<ValidationError> {
    let mut errors = Vec::new();
    if f.blocks.is_empty() {
        errors.push(ValidationError::EmptyFunction);
        return errors;
    }

    let mut labels = HashSet::new();
    for b in &f.blocks {
        if !labels.insert(b.label.as_str()) {
            errors.push(ValidationError::DuplicateLabel { label: b.label.clone() });
        }
    }
    let mut cfg_ok = errors.is_empty();
    for b in &f.blocks {
        for l in b.term.successors() {
            if !labels.contains(l) {
                errors.push(ValidationError::UnknownLabel {
                    block: b.label.clone(),
                    label: l.to_string(),
                });
                cfg_ok = false;
            }
        }
    }

    // Definitions and kinds.
    let mut kinds: HashMap<&str, Kind> = HashMap::new();
    fn define<'a>(kinds: &mut HashMap<&'a str, Kind>, name: &'a str, kind: Kind, errors: &mut Vec<ValidationError>) {
        if kinds.insert(name, kind).is_some() {
            errors.push(ValidationError::DuplicateDefinition { name: name.to_string() });
        }
    }
    for p in &f.params {
        define(&mut kinds, p, Kind::Int, &mut errors);
    }
    for b in &f.blocks {
        for phi in &b.phis {
            define(&mut kinds, &phi.result, Kind::Int, &mut errors);
        }
        for inst in &b.body {
            match (&inst.result, inst.opcode.has_result()) {
                (Some(r), true) => {
                    let kind = if inst.opcode == Opcode::Alloca {
                        Kind::Ptr
                    } else {
                        Kind::Int
                    };
                    define(&mut kinds, r, kind, &mut errors);
                }
                (None, true) => errors.push(ValidationError::Kind {
                    block: b.label.clone(),
                    message: format!("{} must name its result", inst.opcode),
                }),
                (Some(r), false) => errors.push(ValidationError::Kind {
                    block: b.label.clone(),
                    message: format!("store cannot define %{r}"),
                }),
                (None, false) => {}
            }
        }
    }

    let check_kind = |op: &Operand, want: Kind, block: &str, what: &str, errors: &mut Vec<ValidationError>| match op {
        Operand::Lit(_) if want == Kind::Ptr => errors.push(ValidationError::Kind {
            block: block.to_string(),
            message: format!("{what} must be an alloca pointer, found a literal"),
        }),
        Operand::Lit(_) => {}
        Operand::Value(v) => match kinds.get(v.as_str()) {
            None => errors.push(ValidationError::UndefinedValue {
                name: v.clone(),
                block: block.to_string(),
            }),
            Some(k) if *k != want => errors.push(ValidationError::Kind {
                block: block.to_string(),
                message: match want {
                    Kind::Ptr => format!("{what} %{v} is not an alloca pointer"),
                    Kind::Int => format!("{what} %{v} is a pointer, expected an integer"),
                },
            }),
            Some(_) => {}
        },
    };

    for b in &f.blocks {
        for inst in &b.body {
            if inst.operands.len() != inst.opcode.arity() {
                errors.push(ValidationError::Arity {
                    block: b.label.clone(),
                    opcode: inst.opcode,
                    expected: inst.opcode.arity(),
                    found: inst.operands.len(),
                });
                continue;
            }
            for (i, op) in inst.operands.iter().enumerate() {
                let want = match (inst.opcode, i) {
                    (Opcode::Load, 0) | (Opcode::Store, 1) => Kind::Ptr,
                    _ => Kind::Int,
                };
                check_kind(
                    op,
                    want,
                    &b.label,
                    &format!("operand {i} of {}", inst.opcode),
                    &mut errors,
                );
            }
        }
        for phi in &b.phis {
            for (op, _) in &phi.incoming {
                check_kind(
                    op,
                    Kind::Int,
                    &b.label,
                    &format!("incoming value of phi %{}", phi.result),
                    &mut errors,
                );
            }
        }
        if let Some(op) = b.term.operand() {
            check_kind(op, Kind::Int, &b.label, "terminator operand", &mut errors);
        }
    }

    if !cfg_ok {
        return errors;
    }

    let preds = f.predecessors();
    let entry = &f.blocks[0];
    if !preds[0].is_empty() {
        errors.push(ValidationError::Entry {
            block: entry.label.clone(),
            message: "must not have predecessors".into(),
        });
    }
    if !entry.phis.is_empty() {
        errors.push(ValidationError::Entry {
            block: entry.label.clone(),
            message: "must not contain phis".into(),
        });
    }

    for (bi, b) in f.blocks.iter().enumerate() {
        let pred_labels: Vec<&str> = preds[bi].iter().map(|&p| f.blocks[p].label.as_str()).collect();
        for phi in &b.phis {
            let mut seen = HashSet::new();
            for (_, l) in &phi.incoming {
                if !seen.insert(l.as_str()) {
                    errors.push(ValidationError::Phi {
                        name: phi.result.clone(),
                        block: b.label.clone(),
                        message: format!("duplicate incoming edge from `{l}`"),
                    });
                } else if !pred_labels.contains(&l.as_str()) {
                    errors.push(ValidationError::Phi {
                        name: phi.result.clone(),
                        block: b.label.clone(),
                        message: format!("`{l}` is not a predecessor"),
                    });
                }
            }
            for p in &pred_labels {
                if !seen.contains(p) {
                    errors.push(ValidationError::Phi {
                        name: phi.result.clone(),
                        block: b.label.clone(),
                        message: format!("missing incoming value for predecessor `{p}`"),
                    });
                }
            }
        }
    }

    if errors
        .iter()
        .any(|e| matches!(e, ValidationError::DuplicateDefinition { .. }))
    {
        return errors;
    }

    // Dominance, checked on reachable code only.
    let dom = compute_dominators(f);
    let defs = f.def_sites();
    let reachable = f.reachable();
    // Position of a use: (block, index); phis use index 0 and the
    // terminator uses usize::MAX.
    let dominated = |name: &str, block: usize, index: usize| -> bool {
        match defs.get(name) {
            None => true,
            Some(DefSite::Param(_)) => true,
            Some(DefSite::Phi { block: d, .. }) => *d == block || dom.dominates(*d, block),
            Some(DefSite::Inst(loc)) => {
                if loc.block == block {
                    loc.index < index
                } else {
                    dom.dominates(loc.block, block)
                }
            }
        }
    };
    for (bi, b) in f.blocks.iter().enumerate() {
        if !reachable[bi] {
            continue;
        }
        for (i, inst) in b.body.iter().enumerate() {
            for op in &inst.operands {
                if let Operand::Value(v) = op {
                    if !dominated(v, bi, i) {
                        errors.push(ValidationError::Dominance {
                            name: v.clone(),
                            block: b.label.clone(),
                        });
                    }
                }
            }
        }
        if let Some(Operand::Value(v)) = b.term.operand() {
            if !dominated(v, bi, usize::MAX - 1) {
                errors.push(ValidationError::Dominance {
                    name: v.clone(),
                    block: b.label.clone(),
                });
            }
        }
        for phi in &b.phis {
            for (op, l) in &phi.incoming {
                let (Operand::Value(v), Some(p)) = (op, f.block_index(l)) else {
                    continue;
                };
                if reachable[p] && !dominated(v, p, usize::MAX - 1) {
                    errors.push(ValidationError::Dominance {
                        name: v.clone(),
                        block: b.label.clone(),
                    });
                }
            }
        }
    }
    errors
}
