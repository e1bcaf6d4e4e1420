//! Derived values checked against oracles written independently of the
//! library: hand-kept cost tables, a symbolic linear evaluator and direct
//! arithmetic.

mod common;

use std::collections::HashMap;

use bidiropt::analysis::{compute_dominators, find_natural_loops};
use bidiropt::cost::{static_cost, static_size, CostModel};
use bidiropt::interp::{dynamic_cost_total, interpret, Outcome, Workload, DEFAULT_STEP_LIMIT};
use bidiropt::ir::{parse_function, Function, Opcode, Operand, Terminator};
use bidiropt::passes::PassId;
use common::corpus_function;
use proptest::prelude::*;

const P_B: &str = "func @bin2bcd(%val) {
entry:
  %q = udiv %val, 10
  %h = shl %q, 4
  %r = urem %val, 10
  %s = or %h, %r
  ret %s
}
";

const P_C: &str = "func @bin2bcd(%val) {
entry:
  %q = udiv %val, 10
  %m = mul %q, 6
  %s = add %val, %m
  ret %s
}
";

/// Cost of one straight-line run, from a table kept apart from `CostModel`.
fn hand_cost(f: &Function) -> u64 {
    let table: HashMap<&str, u64> = [("udiv", 4), ("urem", 4), ("mul", 3), ("shl", 1), ("or", 1), ("add", 1)].into();
    let body: u64 = f.blocks[0].body.iter().map(|i| table[i.opcode.name()]).sum();
    body + 1
}

#[test]
fn bin2bcd_fixture_counts() {
    let f = corpus_function("bin2bcd");
    assert_eq!(f.blocks.len(), 1);
    assert_eq!(f.blocks[0].body.len() + 1, 5);
    assert_eq!(static_size(&f), 5);
}

#[test]
fn bin2bcd_runs_by_direct_arithmetic() {
    let f = corpus_function("bin2bcd");
    let m = CostModel::default();
    for v in 0..=255u32 {
        let want = ((v / 10) << 4).wrapping_add(v % 10);
        assert_eq!(
            interpret(&f, &[v], DEFAULT_STEP_LIMIT, &m).outcome,
            Outcome::Returned(want)
        );
    }
    assert_eq!(
        interpret(&f, &[45], DEFAULT_STEP_LIMIT, &m).outcome,
        Outcome::Returned(0x45)
    );
}

#[test]
fn dynamic_and_static_costs_of_the_bcd_forms() {
    let m = CostModel::default();
    let w = Workload::exhaustive_byte();
    let (pb, pc) = (parse_function(P_B).unwrap(), parse_function(P_C).unwrap());
    assert_eq!((hand_cost(&pb), hand_cost(&pc)), (11, 9));
    assert_eq!(static_cost(&pb, &m), hand_cost(&pb));
    assert_eq!(static_cost(&pc, &m), hand_cost(&pc));
    assert_eq!(dynamic_cost_total(&pb, &w, &m).unwrap(), 256 * hand_cost(&pb));
    assert_eq!(dynamic_cost_total(&pc, &w, &m).unwrap(), 256 * hand_cost(&pc));
    assert_eq!((static_size(&pb), static_size(&pc)), (5, 4));
}

#[test]
fn corpus_loop_fixtures() {
    let f = corpus_function("loop_sum");
    let loops = find_natural_loops(&f, &compute_dominators(&f));
    assert_eq!(loops.loops.len(), 1);
    assert!(loops.loops[0].preheader.is_some());

    let f = corpus_function("nested_loops");
    let loops = find_natural_loops(&f, &compute_dominators(&f));
    assert_eq!(loops.loops.len(), 2);
    let inner = loops
        .loops
        .iter()
        .position(|l| f.blocks[l.header].label == "inner")
        .unwrap();
    let outer = loops
        .loops
        .iter()
        .position(|l| f.blocks[l.header].label == "outer")
        .unwrap();
    assert_eq!(loops.parent[inner], Some(outer));
    assert_eq!(loops.parent[outer], None);
    assert_eq!(loops.depth(inner), 2);
}

/// Coefficients of `a`, `b` and 1, modulo 2^32.
type Linear = [u32; 3];

/// Symbolic value of the returned operand, or `None` outside add, sub and
/// multiplication by a literal.
fn linear_form(f: &Function) -> Option<Linear> {
    let mut env: HashMap<String, Linear> = HashMap::new();
    env.insert(f.params[0].clone(), [1, 0, 0]);
    env.insert(f.params[1].clone(), [0, 1, 0]);
    let eval = |env: &HashMap<String, Linear>, o: &Operand| match o {
        Operand::Lit(c) => Some([0, 0, *c]),
        Operand::Value(v) => env.get(v).copied(),
    };
    let scale = |x: Linear, c: u32| x.map(|k| k.wrapping_mul(c));
    for inst in &f.blocks[0].body {
        let x = eval(&env, &inst.operands[0])?;
        let y = eval(&env, &inst.operands[1])?;
        let lit = |l: Linear| (l[0] == 0 && l[1] == 0).then_some(l[2]);
        let r = match inst.opcode {
            Opcode::Add => [0, 1, 2].map(|i| x[i].wrapping_add(y[i])),
            Opcode::Sub => [0, 1, 2].map(|i| x[i].wrapping_sub(y[i])),
            Opcode::Mul => match (lit(x), lit(y)) {
                (_, Some(c)) => scale(x, c),
                (Some(c), _) => scale(y, c),
                _ => return None,
            },
            Opcode::Shl => scale(x, 1u32.wrapping_shl(lit(y)? % 32)),
            _ => return None,
        };
        env.insert(inst.result.clone()?, r);
    }
    match &f.blocks[0].term {
        Terminator::Ret(o) => eval(&env, o),
        _ => None,
    }
}

fn linear_program(ops: &[(u8, u8, u8, u32)]) -> Function {
    let mut text = String::from("func @l(%a, %b) {\nentry:\n");
    let mut names = vec!["a".to_string(), "b".to_string()];
    for (i, &(op, x, y, c)) in ops.iter().enumerate() {
        let pick = |s: u8| format!("%{}", names[s as usize % names.len()]);
        let line = match op % 4 {
            0 => format!("add {}, {}", pick(x), pick(y)),
            1 => format!("sub {}, {}", pick(x), pick(y)),
            2 => format!("mul {}, {}", pick(x), c % 20),
            _ => format!("add {}, {}", pick(x), c % 20),
        };
        text.push_str(&format!("  %v{i} = {line}\n"));
        names.push(format!("v{i}"));
    }
    text.push_str(&format!("  ret %{}\n}}\n", names.last().unwrap()));
    parse_function(&text).unwrap()
}

#[test]
fn cancelling_sum_has_the_linear_form_of_b() {
    let f = parse_function("func @l(%a, %b) {\nentry:\n  %s = add %a, %b\n  %d = sub %s, %a\n  ret %d\n}\n").unwrap();
    let out = PassId::FactorTerms.apply(&f).function;
    assert_eq!(linear_form(&f), Some([0, 1, 0]));
    assert_eq!(linear_form(&out), Some([0, 1, 0]));
    assert_eq!(static_size(&out), 1);
}

proptest! {
    #[test]
    fn reassociation_preserves_linear_forms(ops in prop::collection::vec(any::<(u8, u8, u8, u32)>(), 1..8)) {
        let f = linear_program(&ops);
        let want = linear_form(&f).unwrap();
        for p in [PassId::Reassociate, PassId::FactorTerms, PassId::StrengthReduce, PassId::ConstFold, PassId::IdentitySimplify] {
            let out = p.apply(&f).function;
            match linear_form(&out) {
                Some(got) => prop_assert_eq!(got, want, "{}", p),
                None => prop_assert!(!matches!(p, PassId::Reassociate | PassId::FactorTerms), "{} left the linear fragment", p),
            }
        }
    }
}
