use std::fmt::Write;

use super::{Block, Function, Inst, Module, Opcode, Terminator};

pub fn print_module(m: &Module) -> String {
    m.functions.iter().map(print_function).collect::<Vec<_>>().join("\n")
}

pub fn print_function(f: &Function) -> String {
    let mut out = String::new();
    let params: Vec<String> = f.params.iter().map(|p| format!("%{p}")).collect();
    writeln!(out, "func @{}({}) {{", f.name, params.join(", ")).unwrap();
    for b in &f.blocks {
        print_block(&mut out, b);
    }
    out.push_str("}\n");
    out
}

fn print_block(out: &mut String, b: &Block) {
    writeln!(out, "{}:", b.label).unwrap();
    for phi in &b.phis {
        let incoming: Vec<String> = phi.incoming.iter().map(|(op, l)| format!("[{op}, {l}]")).collect();
        writeln!(out, "  %{} = phi {}", phi.result, incoming.join(", ")).unwrap();
    }
    for inst in &b.body {
        writeln!(out, "  {}", inst_text(inst)).unwrap();
    }
    writeln!(out, "  {}", term_text(&b.term)).unwrap();
}

pub(crate) fn inst_text(inst: &Inst) -> String {
    let ops: Vec<String> = inst.operands.iter().map(|o| o.to_string()).collect();
    let mut s = String::new();
    if let Some(r) = &inst.result {
        write!(s, "%{r} = ").unwrap();
    }
    s.push_str(inst.opcode.name());
    if !ops.is_empty() || inst.opcode != Opcode::Alloca {
        if !ops.is_empty() {
            s.push(' ');
        }
        s.push_str(&ops.join(", "));
    }
    s
}

pub(crate) fn term_text(t: &Terminator) -> String {
    match t {
        Terminator::Ret(op) => format!("ret {op}"),
        Terminator::Br(l) => format!("br {l}"),
        Terminator::CondBr {
            cond,
            then_label,
            else_label,
        } => format!("condbr {cond}, {then_label}, {else_label}"),
    }
}
