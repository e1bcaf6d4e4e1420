use std::fmt::Write as _;

use bidiropt::cost::{static_cost, static_size, CostModel};
use bidiropt::search::{ClassGraph, ClosureReport, Direction, IterationRecord, Limit};
use serde::Serialize;

use crate::config::Effective;

#[derive(Debug, Serialize)]
pub struct Input {
    pub path: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ir: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct Report<T> {
    pub command: &'static str,
    pub input: Input,
    pub config: Effective,
    pub outcome: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Complete,
    BudgetExceeded,
}

#[derive(Debug, Serialize)]
pub struct SearchReport {
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit: Option<Limit>,
    pub best_ir: String,
    pub best_key: [u64; 2],
    pub metric_value: u64,
    pub best_is_fixpoint: bool,
    pub sequence: Vec<String>,
    pub explored: usize,
    pub saturated_leaves: usize,
    pub pruned_by_hash: usize,
    /// Differential check of the best program against the input.
    pub equivalent: bool,
}

#[derive(Debug, Serialize)]
pub struct IboReport {
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit: Option<Limit>,
    pub k: usize,
    pub best_ir: String,
    pub best_key: [u64; 2],
    pub metric_value: u64,
    pub sequence: Vec<String>,
    pub trace: Vec<IterationRecord>,
    pub total_programs: usize,
    pub equivalent: bool,
}

#[derive(Debug, Serialize)]
pub struct OptReport {
    pub steps: Vec<String>,
    pub ir: String,
    pub before: [u64; 2],
    pub after: [u64; 2],
}

#[derive(Debug, Serialize)]
pub struct NodeInfo {
    pub id: usize,
    pub digest: String,
    pub key: [u64; 2],
}

#[derive(Debug, Serialize)]
pub struct EdgeInfo {
    pub from: usize,
    pub to: usize,
    pub step: String,
    pub direction: Direction,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Closed,
    Violated,
    Inconclusive,
}

#[derive(Debug, Serialize)]
pub struct ClassReport {
    pub nodes: Vec<NodeInfo>,
    pub edges: Vec<EdgeInfo>,
    pub forward_edges: usize,
    pub reverse_edges: usize,
    pub truncated: bool,
    pub oversized: usize,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closure: Option<ClosureReport>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Winner {
    Ibo,
    Exhaustive,
    Tie,
}

#[derive(Debug, Serialize)]
pub struct CompareRow {
    pub file: String,
    pub function: String,
    pub status: Status,
    pub exhaustive: [u64; 2],
    /// Best key after each iteration k = 1..K.
    pub ibo: Vec<[u64; 2]>,
    pub ibo_best: [u64; 2],
    pub winner: Winner,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub improved_at: Option<usize>,
}

#[derive(Debug, Default, Serialize)]
pub struct CompareSummary {
    pub functions: usize,
    pub ibo_better: usize,
    pub ibo_worse: usize,
    pub ties: usize,
    pub budget_exceeded: usize,
}

#[derive(Debug, Serialize)]
pub struct CompareReport {
    pub k: usize,
    pub rows: Vec<CompareRow>,
    pub summary: CompareSummary,
}

pub fn key_of(f: &bidiropt::ir::Function, m: &CostModel) -> [u64; 2] {
    [static_cost(f, m), static_size(f) as u64]
}

pub fn class_report(g: &ClassGraph, closure: Option<ClosureReport>, m: &CostModel) -> ClassReport {
    let verdict = match &closure {
        None => Verdict::Inconclusive,
        Some(c) if c.violations.is_empty() => Verdict::Closed,
        Some(_) => Verdict::Violated,
    };
    let count = |d| g.edges.iter().filter(|e| e.direction == d).count();
    ClassReport {
        nodes: g
            .nodes
            .iter()
            .enumerate()
            .map(|(id, n)| NodeInfo {
                id,
                digest: n.digest.to_string(),
                key: key_of(&n.function, m),
            })
            .collect(),
        edges: g
            .edges
            .iter()
            .map(|e| EdgeInfo {
                from: e.from,
                to: e.to,
                step: e.step.to_string(),
                direction: e.direction,
            })
            .collect(),
        forward_edges: count(Direction::Forward),
        reverse_edges: count(Direction::Reverse),
        truncated: g.truncated,
        oversized: g.oversized,
        verdict,
        closure,
    }
}

/// Graphviz text: reverse edges dashed, node 0 (the input) boxed.
pub fn dot(g: &ClassGraph, m: &CostModel) -> String {
    let mut out = String::from("digraph sep_class {\n");
    for (id, n) in g.nodes.iter().enumerate() {
        let [c, s] = key_of(&n.function, m);
        let shape = if id == 0 { "box" } else { "ellipse" };
        let _ = writeln!(
            out,
            "  n{id} [shape={shape}, label=\"{}\\ncost {c} size {s}\"];",
            n.digest
        );
    }
    for e in &g.edges {
        let style = match e.direction {
            Direction::Forward => "solid",
            Direction::Reverse => "dashed",
        };
        let _ = writeln!(out, "  n{} -> n{} [label=\"{}\", style={style}];", e.from, e.to, e.step);
    }
    out.push_str("}\n");
    out
}

fn status_text(status: Status, limit: Option<Limit>) -> String {
    match (status, limit) {
        (Status::Complete, _) => "complete".into(),
        (Status::BudgetExceeded, Some(l)) => format!("budget exceeded ({l})"),
        (Status::BudgetExceeded, None) => "budget exceeded".into(),
    }
}

pub fn search_text(r: &Report<SearchReport>) -> String {
    let o = &r.outcome;
    format!(
        "function @{}: {}\nbest_key: {:?} ({:?} {})\nsequence: {}\nexplored {}, saturated leaves {}, pruned {}, equivalent {}\n\n{}",
        r.input.function.as_deref().unwrap_or(""),
        status_text(o.status, o.limit),
        o.best_key,
        r.config.metric,
        o.metric_value,
        o.sequence.join(","),
        o.explored,
        o.saturated_leaves,
        o.pruned_by_hash,
        o.equivalent,
        o.best_ir
    )
}

pub fn ibo_text(r: &Report<IboReport>) -> String {
    let o = &r.outcome;
    let mut out = format!(
        "function @{}: {} (k = {})\nbest_key: {:?} ({:?} {})\nsequence: {}\n",
        r.input.function.as_deref().unwrap_or(""),
        status_text(o.status, o.limit),
        o.k,
        o.best_key,
        r.config.metric,
        o.metric_value,
        o.sequence.join(",")
    );
    for t in &o.trace {
        let _ = writeln!(
            out,
            "  iteration {}: frontier {}/{} best {:?}{}",
            t.iteration,
            t.frontier,
            t.generated,
            t.best_key,
            t.improved_by
                .as_deref()
                .map(|p| format!(" improved by {p}"))
                .unwrap_or_default()
        );
    }
    let _ = write!(
        out,
        "programs {}, equivalent {}\n\n{}",
        o.total_programs, o.equivalent, o.best_ir
    );
    out
}

pub fn class_text(r: &Report<ClassReport>) -> String {
    let o = &r.outcome;
    format!(
        "function @{}: {} nodes, {} forward edges, {} reverse edges{}\nclosure: {:?}{}\n",
        r.input.function.as_deref().unwrap_or(""),
        o.nodes.len(),
        o.forward_edges,
        o.reverse_edges,
        if o.truncated { " (truncated)" } else { "" },
        o.verdict,
        o.closure
            .as_ref()
            .map(|c| format!(
                ", {} forward classes, {} violations",
                c.forward_classes,
                c.violations.len()
            ))
            .unwrap_or_default()
    )
}

pub fn compare_text(r: &Report<CompareReport>) -> String {
    let o = &r.outcome;
    let mut out = format!(
        "{:<28} {:<12} {:<12} {:<10}\n",
        "function", "exhaustive", "ibo", "winner"
    );
    for row in &o.rows {
        let name = format!("{}:@{}", row.file, row.function);
        let flag = if row.status == Status::BudgetExceeded {
            " (budget)"
        } else {
            ""
        };
        let _ = writeln!(
            out,
            "{name:<28} {:<12} {:<12} {:?}{flag}",
            format!("{:?}", row.exhaustive),
            format!("{:?}", row.ibo_best),
            row.winner
        );
    }
    let s = &o.summary;
    let _ = writeln!(
        out,
        "\n{} functions, k <= {}: IBO strictly better on {}, worse on {}, tied on {}; {} over budget",
        s.functions, o.k, s.ibo_better, s.ibo_worse, s.ties, s.budget_exceeded
    );
    out
}
