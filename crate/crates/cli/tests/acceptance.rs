//! Acceptance criteria 1 to 9. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::collections::{HashSet, VecDeque};
use std::fs;
use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use bidiropt::cost::{static_cost, static_size, CostModel};
use bidiropt::interp::{differential_check, Workload, DEFAULT_STEP_LIMIT};
use bidiropt::ir::{canonical_hash, parse_function, parse_module, print_function, Function};
use bidiropt::passes::PassId;
use bidiropt::reverse::{ReversePassId, DEFAULT_CAP_PER_PASS};
use bidiropt::search::{
    check_closure, exhaustive_search, explore_sep_class, ibo, ClassEdge, ClassGraph, ClassNode, Direction, IboSettings,
    SearchContext, SearchLimits, Step,
};
use serde_json::Value;

type Verdict = Result<String, String>;

fn corpus_path(sub: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(sub)
}

fn corpus() -> Vec<(String, Function)> {
    let mut files: Vec<PathBuf> = fs::read_dir(corpus_path("valid"))
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

fn cli(args: &[&str]) -> (i32, Vec<u8>) {
    let o = Command::new(env!("CARGO_BIN_EXE_bidiropt"))
        .args(args)
        .env_remove("BIDIROPT_CONFIG")
        .output()
        .unwrap();
    (o.status.code().unwrap_or(-1), o.stdout)
}

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(start: Instant, limit: Duration, detail: String) -> Verdict {
    let took = start.elapsed();
    check(took < limit, format!("{detail}; took {took:.1?}, limit {limit:?}"))?;
    Ok(format!("{detail}; {took:.1?}"))
}

struct Runs {
    search: Vec<u8>,
    ibo: Vec<u8>,
    compare: Vec<u8>,
}

fn bcd_commands() -> (Vec<u8>, Vec<u8>) {
    let path = corpus_path("valid/bin2bcd.ir").display().to_string();
    (cli(&["search", &path]).1, cli(&["ibo", &path, "-k", "2"]).1)
}

fn compare_command() -> (i32, Vec<u8>) {
    cli(&["compare", &corpus_path("valid").display().to_string(), "-k", "3"])
}

fn criterion_1(runs: &mut Runs) -> Verdict {
    let start = Instant::now();
    let (search, ibo) = bcd_commands();
    runs.search = search;
    runs.ibo = ibo;
    let seed = parse_function(&fs::read_to_string(corpus_path("valid/bin2bcd.ir")).unwrap()).unwrap();
    let bytes = Workload::exhaustive_byte();
    let mut keys = Vec::new();
    for (name, out) in [("search", &runs.search), ("ibo -k 2", &runs.ibo)] {
        let r: Value = serde_json::from_slice(out).map_err(|e| format!("{name}: {e}"))?;
        let best = parse_function(r["outcome"]["best_ir"].as_str().unwrap()).map_err(|e| e.to_string())?;
        let eq = differential_check(&seed, &best, &bytes, DEFAULT_STEP_LIMIT);
        check(eq.is_equivalent(), format!("{name}: {eq:?}"))?;
        keys.push(r["outcome"]["best_key"].to_string());
    }
    check(keys[0] == "[11,5]", format!("search best_key {}, want [11,5]", keys[0]))?;
    check(keys[1] == "[9,4]", format!("ibo best_key {}, want [9,4]", keys[1]))?;
    within(
        start,
        Duration::from_secs(10),
        format!("search {} -> ibo(k=2) {}, both equivalent on 0..=255", keys[0], keys[1]),
    )
}

fn criterion_2(corpus: &[(String, Function)]) -> Verdict {
    let start = Instant::now();
    let (mut pairs, mut bad) = (0, Vec::new());
    for (name, f) in corpus {
        let w = Workload::default_for(f, 1);
        let mut outputs: Vec<(String, Function)> = PassId::ALL
            .iter()
            .map(|p| (p.to_string(), p.apply(f)))
            .filter(|(_, o)| o.changed)
            .map(|(n, o)| (n, o.function))
            .collect();
        for r in ReversePassId::ALL {
            for v in r.enumerate(f, DEFAULT_CAP_PER_PASS).variants {
                outputs.push((format!("{r}@{}", v.site), v.function));
            }
        }
        for (step, g) in outputs {
            pairs += 1;
            if !differential_check(f, &g, &w, DEFAULT_STEP_LIMIT).is_equivalent() {
                bad.push(format!("{name}:{step}"));
            }
        }
    }
    check(bad.is_empty(), format!("{} counterexamples: {bad:?}", bad.len()))?;
    within(
        start,
        Duration::from_secs(120),
        format!("{pairs} applicable pass/function pairs, 0 counterexamples"),
    )
}

fn criterion_3(corpus: &[(String, Function)]) -> Verdict {
    let ctx = SearchContext::default();
    for (name, f) in corpus {
        let e = exhaustive_search(f, &ctx).map_err(|e| format!("{name}: {e}"))?;
        let i = ibo(f, &ctx, &IboSettings::new(ReversePassId::ALL.to_vec(), 0)).map_err(|e| format!("{name}: {e}"))?;
        check(
            e.best_key == i.best_key,
            format!("{name}: {:?} vs {:?}", e.best_key, i.best_key),
        )?;
    }
    Ok(format!(
        "ibo(k=0) equals exhaustive search on all {} functions",
        corpus.len()
    ))
}

fn criterion_4(corpus: &[(String, Function)]) -> Verdict {
    let ctx = SearchContext::default();
    for (name, f) in corpus {
        let mut prev = None;
        for k in 0..=3 {
            let out = ibo(f, &ctx, &IboSettings::new(ReversePassId::ALL.to_vec(), k))
                .map_err(|e| format!("{name} k={k}: {e}"))?;
            if let Some(p) = prev.replace(out.best_key.clone()) {
                check(out.best_key <= p, format!("{name}: k={k} worse than k={}", k - 1))?;
            }
        }
    }
    Ok(format!(
        "rank keys nonincreasing over k=0..3 on all {} functions",
        corpus.len()
    ))
}

const CLOSURE_SET: [&str; 6] = [
    "bin2bcd",
    "shl_diff",
    "reassoc_chain",
    "identities",
    "select_max",
    "factor",
];

fn criterion_5(corpus: &[(String, Function)]) -> Verdict {
    let mut done = Vec::new();
    for (name, f) in corpus.iter().filter(|(n, _)| CLOSURE_SET.contains(&n.as_str())) {
        let limits = SearchLimits {
            max_instructions_per_program: f.instruction_count() + 3,
            max_programs_explored: 20_000,
            ..SearchLimits::default()
        };
        let g = explore_sep_class(f, &PassId::ALL, &ReversePassId::ALL, &limits).map_err(|e| e.to_string())?;
        check(!g.truncated, format!("{name}: truncated at {} nodes", g.nodes.len()))?;
        let report = check_closure(&g).map_err(|e| format!("{name}: {e}"))?;
        check(report.violations.is_empty(), format!("{name}: {:?}", report.violations))?;
        done.push(format!("{name}({})", g.nodes.len()));
    }
    check(done.len() >= 5, format!("only {} classes explored", done.len()))?;

    let node = |text: &str| {
        let f = parse_function(text).unwrap();
        ClassNode {
            digest: canonical_hash(&f),
            function: f,
        }
    };
    let control = ClassGraph {
        nodes: vec![
            node("func @a(%x) {\nentry:\n  %y = add %x, 0\n  ret %y\n}\n"),
            node("func @a(%x) {\nentry:\n  ret %x\n}\n"),
            node("func @a(%x) {\nentry:\n  ret 0\n}\n"),
        ],
        edges: vec![
            ClassEdge {
                from: 0,
                to: 1,
                step: Step::Forward(PassId::IdentitySimplify),
                direction: Direction::Forward,
            },
            ClassEdge {
                from: 1,
                to: 2,
                step: Step::Reverse {
                    pass: ReversePassId::SplitBlock,
                    site: 0,
                },
                direction: Direction::Reverse,
            },
        ],
        truncated: false,
        oversized: 0,
    };
    let violations = check_closure(&control).map_err(|e| e.to_string())?.violations.len();
    check(
        violations == 1,
        format!("negative control reported {violations} violations"),
    )?;
    Ok(format!(
        "0 violations in {}; negative control 1 violation",
        done.join(", ")
    ))
}

/// Forward-reachable programs within `depth` steps, identified by exact
/// printed text with no hashing, or `None` past `cap` programs.
fn naive_reachable(f: &Function, depth: usize, cap: usize) -> Option<Vec<Function>> {
    let mut seen = HashSet::from([print_function(f)]);
    let mut all = vec![f.clone()];
    let mut layer = VecDeque::from([f.clone()]);
    for _ in 0..depth {
        let mut next = VecDeque::new();
        for g in layer {
            for p in PassId::ALL {
                let h = p.apply(&g).function;
                if seen.insert(print_function(&h)) {
                    if seen.len() > cap {
                        return None;
                    }
                    all.push(h.clone());
                    next.push_back(h);
                }
            }
        }
        layer = next;
    }
    Some(all)
}

fn criterion_6(corpus: &[(String, Function)]) -> Verdict {
    let start = Instant::now();
    let ctx = SearchContext::default();
    let m = CostModel::default();
    let mut matched = Vec::new();
    for (name, f) in corpus {
        let Some(all) = naive_reachable(f, ctx.limits.max_sequence_length, 5_000) else {
            continue;
        };
        let naive = all
            .iter()
            .map(|g| [static_cost(g, &m), static_size(g) as u64])
            .min()
            .unwrap();
        let found = exhaustive_search(f, &ctx)
            .map_err(|e| e.to_string())?
            .best_key
            .cost_size();
        check(found == naive, format!("{name}: search {found:?}, naive {naive:?}"))?;
        matched.push(format!("{name}({})", all.len()));
    }
    check(matched.len() >= 5, format!("only {} micro functions", matched.len()))?;
    within(
        start,
        Duration::from_secs(300),
        format!("{} micro functions match: {}", matched.len(), matched.join(", ")),
    )
}

fn criterion_7(corpus: &[(String, Function)]) -> Verdict {
    let m = CostModel::default();
    let mut variants = 0;
    for (name, f) in corpus {
        let base = static_cost(f, &m);
        for r in ReversePassId::ALL {
            for v in r.enumerate(f, DEFAULT_CAP_PER_PASS).variants {
                variants += 1;
                let fwd = r.forward().apply(&v.function);
                check(
                    fwd.changed,
                    format!("{name}: {} inert after {r}@{}", r.forward(), v.site),
                )?;
                let after = static_cost(&fwd.function, &m);
                check(
                    after <= base,
                    format!("{name}: {r}@{} then {} costs {after} > {base}", v.site, r.forward()),
                )?;
            }
        }
    }
    Ok(format!(
        "{variants} reverse variants re-optimizable by their forward pair"
    ))
}

fn criterion_8(runs: &mut Runs) -> Verdict {
    let start = Instant::now();
    let (code, out) = compare_command();
    runs.compare = out;
    check(code == 0, format!("compare exited {code}"))?;
    let r: Value = serde_json::from_slice(&runs.compare).map_err(|e| e.to_string())?;
    let s = &r["outcome"]["summary"];
    let (n, better, worse) = (
        s["functions"].as_u64().unwrap(),
        s["ibo_better"].as_u64().unwrap(),
        s["ibo_worse"].as_u64().unwrap(),
    );
    check(n >= 20, format!("{n} functions"))?;
    check(
        better >= 2 && worse == 0,
        format!("IBO better on {better}, worse on {worse}"),
    )?;
    let winners: Vec<&str> = r["outcome"]["rows"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|row| row["winner"] == "ibo")
        .map(|row| row["function"].as_str().unwrap())
        .collect();
    within(
        start,
        Duration::from_secs(600),
        format!(
            "{n} functions, IBO strictly better on {better} ({}), worse on {worse}",
            winners.join(", ")
        ),
    )
}

fn criterion_9(runs: &Runs) -> Verdict {
    let (search, ibo) = bcd_commands();
    let (_, compare) = compare_command();
    check(search == runs.search, "search report differs between runs")?;
    check(ibo == runs.ibo, "ibo report differs between runs")?;
    check(compare == runs.compare, "compare report differs between runs")?;
    Ok(format!(
        "search, ibo and compare reports byte-identical across two runs ({} + {} + {} bytes)",
        search.len(),
        ibo.len(),
        compare.len()
    ))
}

fn main() -> ExitCode {
    let corpus = corpus();
    let mut runs = Runs {
        search: Vec::new(),
        ibo: Vec::new(),
        compare: Vec::new(),
    };
    let results: Vec<(usize, &str, Verdict)> = vec![
        (1, "bin2bcd reproduction", criterion_1(&mut runs)),
        (2, "semantic preservation", criterion_2(&corpus)),
        (3, "reduction at k=0", criterion_3(&corpus)),
        (4, "monotonicity in k", criterion_4(&corpus)),
        (5, "closure", criterion_5(&corpus)),
        (6, "oracle equivalence", criterion_6(&corpus)),
        (7, "re-optimizability", criterion_7(&corpus)),
        (8, "corpus comparison", criterion_8(&mut runs)),
        (9, "determinism", criterion_9(&runs)),
    ];
    let mut failed = 0;
    for (n, title, verdict) in &results {
        match verdict {
            Ok(detail) => println!("criterion {n} PASS {title}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n} FAIL {title}: {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
