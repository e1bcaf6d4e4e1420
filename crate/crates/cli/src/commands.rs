use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use bidiropt::cost::CostModel;
use bidiropt::interp::{differential_check, dynamic_cost_total, interpret, DEFAULT_STEP_LIMIT};
use bidiropt::ir::{parse_module, parse_module_unchecked, print_function, Function, Module};
use bidiropt::search::{self, check_closure, explore_sep_class, SearchError, Step};
use serde::Serialize;

use crate::config::{load_workload, Effective, Format, SharedArgs};
use crate::report::*;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_BUDGET: u8 = 3;

pub const DEFAULT_K: usize = 2;
pub const DEFAULT_COMPARE_K: usize = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

fn usage(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        error: error.into(),
    }
}

fn invalid(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: EXIT_INVALID,
        error: error.into(),
    }
}

type CmdResult = Result<u8, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(usage)
}

fn load_module(path: &Path) -> Result<Module, Failure> {
    parse_module(&read(path)?)
        .with_context(|| path.display().to_string())
        .map_err(invalid)
}

fn pick(module: Module, name: Option<&str>, path: &Path) -> Result<Function, Failure> {
    match name {
        Some(n) => module
            .functions
            .into_iter()
            .find(|f| f.name == n)
            .ok_or_else(|| usage(anyhow!("no function @{n} in {}", path.display()))),
        None => module
            .functions
            .into_iter()
            .next()
            .ok_or_else(|| usage(anyhow!("{} has no functions", path.display()))),
    }
}

fn load_function(path: &Path, name: Option<&str>) -> Result<Function, Failure> {
    pick(load_module(path)?, name, path)
}

/// `.ir` files of a directory in name order, or the file itself.
fn ir_files(path: &Path) -> Result<Vec<PathBuf>, Failure> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .with_context(|| format!("listing {}", path.display()))
        .map_err(usage)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "ir"))
        .collect();
    files.sort();
    Ok(files)
}

fn emit<T: Serialize>(report: &Report<T>, text: impl Fn(&Report<T>) -> String) -> Result<(), Failure> {
    match report.config.format {
        Format::Json => {
            let json = serde_json::to_string_pretty(report).map_err(invalid)?;
            println!("{json}");
        }
        Format::Text => print!("{}", text(report)),
    }
    Ok(())
}

fn input(path: &Path, f: &Function) -> Input {
    Input {
        path: path.display().to_string(),
        function: Some(f.name.clone()),
        ir: Some(print_function(f)),
    }
}

fn equivalent(a: &Function, b: &Function, cfg: &Effective) -> Result<bool, Failure> {
    let w = cfg.workload_for(a).map_err(usage)?;
    Ok(differential_check(a, b, &w, DEFAULT_STEP_LIMIT).is_equivalent())
}

pub fn validate(path: &Path) -> CmdResult {
    let mut code = EXIT_OK;
    for file in ir_files(path)? {
        let text = read(&file)?;
        let module = match parse_module_unchecked(&text) {
            Ok(m) => m,
            Err(e) => {
                eprintln!("{}: {e}", file.display());
                code = EXIT_INVALID;
                continue;
            }
        };
        for f in &module.functions {
            let errors = bidiropt::ir::validate(f);
            if errors.is_empty() {
                println!("{}: @{} ok", file.display(), f.name);
            } else {
                code = EXIT_INVALID;
                for e in errors {
                    eprintln!("{}: @{}: {e}", file.display(), f.name);
                }
            }
        }
    }
    Ok(code)
}

pub fn run(path: &Path, function: &str, args: &[u32], workload: Option<&Path>) -> CmdResult {
    let f = load_function(path, Some(function))?;
    let model = CostModel::default();
    if let Some(wpath) = workload {
        let w = load_workload(wpath).map_err(usage)?;
        w.check_arity(&f).map_err(usage)?;
        let total = dynamic_cost_total(&f, &w, &model).map_err(invalid)?;
        println!("workload {}: {} runs, dynamic_cost_total {total}", w.name, w.args.len());
        return Ok(EXIT_OK);
    }
    if args.len() != f.params.len() {
        return Err(usage(anyhow!(
            "@{} takes {} arguments, {} given",
            f.name,
            f.params.len(),
            args.len()
        )));
    }
    let r = interpret(&f, args, DEFAULT_STEP_LIMIT, &model);
    println!("{} steps={} dynamic_cost={}", r.outcome, r.steps, r.dynamic_cost);
    Ok(EXIT_OK)
}

pub fn opt(path: &Path, function: Option<&str>, passes: &str, format: Format) -> CmdResult {
    let f = load_function(path, function)?;
    let steps: Vec<Step> = passes
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<Step>().map_err(usage))
        .collect::<Result<_, _>>()?;
    let mut cur = f.clone();
    for (i, step) in steps.iter().enumerate() {
        cur = match step {
            // A forward pass with nothing to do leaves the program as is.
            Step::Forward(p) => p.apply(&cur).function,
            Step::Reverse { .. } => step
                .apply(&cur)
                .ok_or_else(|| invalid(anyhow!("step {i} `{step}` has no such site")))?,
        };
    }
    let model = CostModel::default();
    let report = OptReport {
        steps: steps.iter().map(Step::to_string).collect(),
        ir: print_function(&cur),
        before: key_of(&f, &model),
        after: key_of(&cur, &model),
    };
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&report).map_err(invalid)?),
        Format::Text => print!(
            "{}; static_cost {} -> {}\n; static_size {} -> {}\n",
            report.ir, report.before[0], report.after[0], report.before[1], report.after[1]
        ),
    }
    Ok(EXIT_OK)
}

pub fn search(path: &Path, function: Option<&str>, shared: &SharedArgs) -> CmdResult {
    let cfg = shared.resolve(None).map_err(usage)?;
    let f = load_function(path, function)?;
    let ctx = cfg.context(&f).map_err(usage)?;
    let (out, limit) = match search::exhaustive_search(&f, &ctx) {
        Ok(out) => (out, None),
        Err(SearchError::BudgetExceeded { limit, partial }) => (*partial, Some(limit)),
        Err(e) => return Err(invalid(e)),
    };
    let outcome = SearchReport {
        status: if limit.is_some() {
            Status::BudgetExceeded
        } else {
            Status::Complete
        },
        limit,
        best_ir: print_function(&out.best),
        best_key: out.best_key.cost_size(),
        metric_value: out.metric_value,
        best_is_fixpoint: out.best_is_fixpoint,
        sequence: out.best_sequence.iter().map(|p| p.to_string()).collect(),
        explored: out.explored,
        saturated_leaves: out.saturated_leaves,
        pruned_by_hash: out.pruned_by_hash,
        equivalent: equivalent(&f, &out.best, &cfg)?,
    };
    let report = Report {
        command: "search",
        input: input(path, &f),
        config: cfg,
        outcome,
    };
    emit(&report, search_text)?;
    Ok(if limit.is_some() { EXIT_BUDGET } else { EXIT_OK })
}

pub fn ibo(path: &Path, function: Option<&str>, k: Option<usize>, shared: &SharedArgs) -> CmdResult {
    let cfg = shared.resolve(k).map_err(usage)?;
    let k = cfg.k.unwrap_or(DEFAULT_K);
    let f = load_function(path, function)?;
    let ctx = cfg.context(&f).map_err(usage)?;
    let (out, limit) = match search::ibo(&f, &ctx, &cfg.ibo_settings(k)) {
        Ok(out) => (out, None),
        Err(SearchError::IboBudgetExceeded { limit, partial }) => (*partial, Some(limit)),
        Err(e) => return Err(invalid(e)),
    };
    let outcome = IboReport {
        status: if limit.is_some() {
            Status::BudgetExceeded
        } else {
            Status::Complete
        },
        limit,
        k,
        best_ir: print_function(&out.best),
        best_key: out.best_key.cost_size(),
        metric_value: out.metric_value,
        sequence: out.best_sequence.iter().map(Step::to_string).collect(),
        trace: out.trace,
        total_programs: out.total_programs,
        equivalent: equivalent(&f, &out.best, &cfg)?,
    };
    let report = Report {
        command: "ibo",
        input: input(path, &f),
        config: cfg,
        outcome,
    };
    emit(&report, ibo_text)?;
    Ok(if limit.is_some() { EXIT_BUDGET } else { EXIT_OK })
}

pub fn equiv_class(path: &Path, function: Option<&str>, dot_path: Option<&Path>, shared: &SharedArgs) -> CmdResult {
    let cfg = shared.resolve(None).map_err(usage)?;
    let f = load_function(path, function)?;
    let g = explore_sep_class(&f, &cfg.passes, &cfg.reverses, &cfg.limits).map_err(usage)?;
    let closure = match check_closure(&g) {
        Ok(c) => Some(c),
        Err(SearchError::Inconclusive) => None,
        Err(e) => return Err(invalid(e)),
    };
    if let Some(p) = dot_path {
        fs::write(p, dot(&g, &cfg.model))
            .with_context(|| format!("writing {}", p.display()))
            .map_err(usage)?;
    }
    let outcome = class_report(&g, closure, &cfg.model);
    let code = match outcome.verdict {
        Verdict::Closed => EXIT_OK,
        Verdict::Violated => EXIT_INVALID,
        Verdict::Inconclusive => EXIT_BUDGET,
    };
    let report = Report {
        command: "equiv-class",
        input: input(path, &f),
        config: cfg,
        outcome,
    };
    emit(&report, class_text)?;
    Ok(code)
}

pub fn compare(path: &Path, k: Option<usize>, shared: &SharedArgs) -> CmdResult {
    let cfg = shared.resolve(k).map_err(usage)?;
    let k = cfg.k.unwrap_or(DEFAULT_COMPARE_K);
    let mut rows = Vec::new();
    let mut summary = CompareSummary::default();
    for file in ir_files(path)? {
        let module = load_module(&file)?;
        let name = file
            .file_name()
            .map_or_else(String::new, |n| n.to_string_lossy().into_owned());
        for f in &module.functions {
            let ctx = cfg.context(f).map_err(usage)?;
            let (out, limit) = match search::ibo(f, &ctx, &cfg.ibo_settings(k)) {
                Ok(out) => (out, None),
                Err(SearchError::IboBudgetExceeded { limit, partial }) => (*partial, Some(limit)),
                Err(e) => return Err(invalid(e)),
            };
            // Iteration 0 of the trace is the exhaustive search.
            let score = |t: &search::IterationRecord| (t.best_metric, t.best_key);
            let base = &out.trace[0];
            let last = out.trace.last().expect("trace has iteration 0");
            let winner = match score(last).cmp(&score(base)) {
                std::cmp::Ordering::Less => Winner::Ibo,
                std::cmp::Ordering::Greater => Winner::Exhaustive,
                std::cmp::Ordering::Equal => Winner::Tie,
            };
            summary.functions += 1;
            match winner {
                Winner::Ibo => summary.ibo_better += 1,
                Winner::Exhaustive => summary.ibo_worse += 1,
                Winner::Tie => summary.ties += 1,
            }
            if limit.is_some() {
                summary.budget_exceeded += 1;
            }
            rows.push(CompareRow {
                file: name.clone(),
                function: f.name.clone(),
                status: if limit.is_some() {
                    Status::BudgetExceeded
                } else {
                    Status::Complete
                },
                exhaustive: base.best_key,
                ibo: out.trace[1..].iter().map(|t| t.best_key).collect(),
                ibo_best: last.best_key,
                winner,
                improved_at: out.trace.iter().find(|t| t.improved_by.is_some()).map(|t| t.iteration),
            });
        }
    }
    let code = if summary.budget_exceeded > 0 {
        EXIT_BUDGET
    } else {
        EXIT_OK
    };
    let report = Report {
        command: "compare",
        input: Input {
            path: path.display().to_string(),
            function: None,
            ir: None,
        },
        config: cfg,
        outcome: CompareReport { k, rows, summary },
    };
    emit(&report, compare_text)?;
    Ok(code)
}
