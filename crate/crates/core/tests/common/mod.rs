#![allow(dead_code)]

use std::fs;
use std::path::PathBuf;

use bidiropt::ir::{parse_function, parse_module, Function};
use proptest::prelude::*;

pub fn corpus_dir(sub: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(sub)
}

/// Every function of `corpus/valid`, with the file stem it came from.
pub fn corpus() -> Vec<(String, Function)> {
    let mut files: Vec<PathBuf> = fs::read_dir(corpus_dir("valid"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "ir"))
        .collect();
    files.sort();
    let mut out = Vec::new();
    for path in files {
        let stem = path.file_stem().unwrap().to_string_lossy().into_owned();
        let module = parse_module(&fs::read_to_string(&path).unwrap()).unwrap();
        out.extend(module.functions.into_iter().map(|f| (stem.clone(), f)));
    }
    out
}

pub fn corpus_function(stem: &str) -> Function {
    corpus().into_iter().find(|(s, _)| s == stem).unwrap().1
}

const OPS: [&str; 15] = [
    "add", "sub", "mul", "udiv", "urem", "shl", "lshr", "and", "or", "xor", "icmp.eq", "icmp.ne", "icmp.ult",
    "icmp.ule", "select",
];
const LITS: [u32; 12] = [0, 1, 2, 3, 4, 7, 8, 10, 15, 16, 255, u32::MAX];

/// One generated instruction: opcode selector, three operand selectors and
/// a spare literal.
pub type OpSpec = (u8, u16, u16, u16, u32);

/// Shape and contents of a generated program.
#[derive(Clone, Debug)]
pub struct ProgSpec {
    pub shape: u8,
    pub ops: Vec<OpSpec>,
}

/// Naming scheme for generated programs, so the same program can be
/// produced under different value and label names.
pub struct Names {
    pub value: fn(&str) -> String,
    pub label: fn(&str) -> String,
}

pub const PLAIN: Names = Names {
    value: |s| s.to_string(),
    label: |s| s.to_string(),
};

pub const RENAMED: Names = Names {
    value: |s| format!("t_{s}_0"),
    label: |s| format!("bb_{s}"),
};

struct Emitter<'a> {
    out: String,
    avail: Vec<String>,
    names: &'a Names,
}

impl Emitter<'_> {
    fn operand(&self, sel: u16, lit: u32) -> String {
        if sel.is_multiple_of(4) || self.avail.is_empty() {
            let lit = if sel % 8 == 4 {
                lit
            } else {
                LITS[(sel as usize / 8) % LITS.len()]
            };
            lit.to_string()
        } else {
            format!("%{}", (self.names.value)(&self.avail[sel as usize % self.avail.len()]))
        }
    }

    fn line(&mut self, text: String) {
        self.out.push_str("  ");
        self.out.push_str(&text);
        self.out.push('\n');
    }

    fn ops(&mut self, prefix: &str, ops: &[OpSpec]) {
        for (i, &(o, a, b, c, lit)) in ops.iter().enumerate() {
            let name = format!("{prefix}{i}");
            let (x, y) = (self.operand(a, lit), self.operand(b, lit));
            let n = (self.names.value)(&name);
            let motif = o as usize % (OPS.len() + 5);
            if motif >= OPS.len() {
                // Patterns the forward passes look for.
                let c = [3, 7, 10, 16][c as usize % 4];
                let lines = match motif - OPS.len() {
                    0 => vec![
                        format!("%{n}.lo = and {x}, 15"),
                        format!("%{n}.hi = shl {y}, 4"),
                        format!("%{n} = add %{n}.hi, %{n}.lo"),
                    ],
                    1 => vec![
                        format!("%{n}.q = udiv {x}, {c}"),
                        format!("%{n}.m = mul %{n}.q, {c}"),
                        format!("%{n} = sub {x}, %{n}.m"),
                    ],
                    2 => vec![format!("%{n}.p = mul {x}, 8"), format!("%{n} = urem %{n}.p, {c}")],
                    3 => vec![
                        format!("%{n}.lo = and {x}, 15"),
                        format!("%{n}.hi = shl {y}, 4"),
                        format!("%{n} = or %{n}.hi, %{n}.lo"),
                    ],
                    _ => vec![format!("%{n}.p = udiv {x}, {c}"), format!("%{n} = mul %{n}.p, 4")],
                };
                for l in lines {
                    self.line(l);
                }
                self.avail.push(name);
                continue;
            }
            let op = OPS[motif];
            let text = if op == "select" {
                format!(
                    "%{} = select {x}, {y}, {}",
                    (self.names.value)(&name),
                    self.operand(c, lit)
                )
            } else {
                format!("%{} = {op} {x}, {y}", (self.names.value)(&name))
            };
            self.line(text);
            self.avail.push(name);
        }
    }

    fn last(&self) -> String {
        format!("%{}", (self.names.value)(self.avail.last().unwrap()))
    }

    fn label(&mut self, l: &str) {
        self.out.push_str(&(self.names.label)(l));
        self.out.push_str(":\n");
    }

    fn v(&self, s: &str) -> String {
        format!("%{}", (self.names.value)(s))
    }

    fn l(&self, s: &str) -> String {
        (self.names.label)(s)
    }
}

/// Renders a generated program: straight-line, diamond, counted loop or
/// straight-line through one stack slot.
pub fn render(spec: &ProgSpec, names: &Names) -> String {
    let mut e = Emitter {
        out: String::new(),
        avail: vec!["a".into(), "b".into()],
        names,
    };
    e.out = format!("func @gen({}, {}) {{\n", e.v("a"), e.v("b"));
    e.label("entry");
    let n = spec.ops.len();
    let (first, rest) = spec.ops.split_at(n / 2);
    match spec.shape % 4 {
        0 => {
            e.ops("e", &spec.ops);
            let r = e.last();
            e.line(format!("ret {r}"));
        }
        1 => {
            e.ops("e", first);
            let (x, y) = (e.operand(first.len() as u16 * 3 + 1, 0), e.operand(n as u16 * 5 + 2, 0));
            let (c, left, right, join) = (e.v("c"), e.l("left"), e.l("right"), e.l("join"));
            e.line(format!("{c} = icmp.ult {x}, {y}"));
            e.line(format!("condbr {c}, {left}, {right}"));
            let entry_last = e.last();
            let base = e.avail.clone();
            let (l_ops, r_ops) = rest.split_at(rest.len() / 2);
            e.label("left");
            let (cl, ls) = (e.v("cl"), e.v("ls"));
            e.line(format!("{cl} = icmp.ult {x}, {y}"));
            e.line(format!("{ls} = select {cl}, {x}, {y}"));
            e.avail.push("ls".into());
            e.ops("l", l_ops);
            let lv = e.last();
            e.line(format!("br {join}"));
            e.avail = base.clone();
            e.label("right");
            e.ops("r", r_ops);
            let rv = e.last();
            e.line(format!("br {join}"));
            e.avail = base;
            e.label("join");
            let (j, o) = (e.v("j"), e.v("o"));
            e.line(format!("{j} = phi [{lv}, {left}], [{rv}, {right}]"));
            if spec.shape % 8 >= 4 {
                let tail = e.l("tail");
                e.line(format!("br {tail}"));
                e.label("tail");
            }
            e.line(format!("{o} = add {j}, {entry_last}"));
            e.line(format!("ret {o}"));
        }
        2 => {
            e.ops("e", first);
            let init = e.last();
            let (nn, i, i2, acc, acc2, c) = (e.v("n"), e.v("i"), e.v("i2"), e.v("acc"), e.v("acc2"), e.v("c"));
            let (entry, head, exit) = (e.l("entry"), e.l("head"), e.l("exit"));
            let a = e.v("a");
            e.line(format!("{nn} = and {a}, 7"));
            e.line(format!("br {head}"));
            e.label("head");
            e.line(format!("{i} = phi [0, {entry}], [{i2}, {head}]"));
            e.line(format!("{acc} = phi [{init}, {entry}], [{acc2}, {head}]"));
            e.avail.push("i".into());
            e.avail.push("acc".into());
            e.ops("h", rest);
            let body = e.last();
            e.line(format!("{acc2} = add {acc}, {body}"));
            e.line(format!("{i2} = add {i}, 1"));
            e.line(format!("{c} = icmp.ult {i2}, {nn}"));
            e.line(format!("condbr {c}, {head}, {exit}"));
            e.label("exit");
            e.line(format!("ret {acc2}"));
        }
        _ => {
            let (m, ld, ld2) = (e.v("m"), e.v("ld"), e.v("ld2"));
            e.line(format!("{m} = alloca"));
            let a = e.v("a");
            e.line(format!("store {a}, {m}"));
            e.ops("e", first);
            let v = e.last();
            e.line(format!("store {v}, {m}"));
            e.line(format!("store {v}, {m}"));
            e.line(format!("{ld} = load {m}"));
            e.avail.push("ld".into());
            e.ops("t", rest);
            let r = e.last();
            e.line(format!("{ld2} = load {m}"));
            let s = e.v("s");
            e.line(format!("{s} = add {r}, {ld2}"));
            e.line(format!("ret {s}"));
        }
    }
    e.out.push_str("}\n");
    e.out
}

pub fn build(spec: &ProgSpec) -> Function {
    let text = render(spec, &PLAIN);
    parse_function(&text).unwrap_or_else(|e| panic!("{e}\n{text}"))
}

pub fn prog_spec(max_ops: usize) -> impl Strategy<Value = ProgSpec> {
    (any::<u8>(), prop::collection::vec(any::<OpSpec>(), 1..=max_ops)).prop_map(|(shape, ops)| ProgSpec { shape, ops })
}

/// Argument tuples biased towards small values and bit-pattern edges.
pub fn arg_tuples() -> Vec<Vec<u32>> {
    let edge = [0, 1, 2, 7, 10, 100, 255, 256, 0x8000_0000, u32::MAX];
    let mut out = Vec::new();
    for &a in &edge {
        for &b in &edge {
            out.push(vec![a, b]);
        }
    }
    out
}
