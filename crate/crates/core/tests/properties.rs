mod common;

use bidiropt::analysis::known_bits;
use bidiropt::cost::{static_cost, static_size, CostModel};
use bidiropt::interp::{differential_check, interpret, Lowered, Outcome, Workload, DEFAULT_STEP_LIMIT};
use bidiropt::ir::{canonical_hash, parse_function, print_function, validate, Function};
use bidiropt::passes::PassId;
use bidiropt::reverse::ReversePassId;
use common::{arg_tuples, build, prog_spec, render, PLAIN, RENAMED};
use proptest::prelude::*;

fn workload() -> Workload {
    Workload::new("edges", arg_tuples())
}

fn equivalent(a: &Function, b: &Function) -> Result<(), TestCaseError> {
    let eq = differential_check(a, b, &workload(), DEFAULT_STEP_LIMIT);
    prop_assert!(
        eq.is_equivalent(),
        "{eq:?}\n--- before\n{}--- after\n{}",
        print_function(a),
        print_function(b)
    );
    Ok(())
}

/// Passes allowed to leave both cost and size unchanged when they rewrite.
fn may_tie(p: PassId) -> bool {
    matches!(
        p,
        PassId::Reassociate | PassId::AddToOr | PassId::Licm | PassId::ConstFold | PassId::SimplifyCfg
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn print_parse_round_trip(spec in prog_spec(10)) {
        let f = build(&spec);
        let text = print_function(&f);
        let g = parse_function(&text).unwrap();
        prop_assert_eq!(&g, &f);
        prop_assert_eq!(print_function(&g), text);
    }

    #[test]
    fn digest_ignores_renaming(spec in prog_spec(10)) {
        let f = build(&spec);
        let g = parse_function(&render(&spec, &RENAMED)).unwrap();
        prop_assert_ne!(print_function(&f), print_function(&g));
        prop_assert_eq!(canonical_hash(&f), canonical_hash(&g));
    }

    #[test]
    fn generated_programs_are_valid(spec in prog_spec(10)) {
        let text = render(&spec, &PLAIN);
        let f = parse_function(&text).unwrap();
        prop_assert!(validate(&f).is_empty(), "{text}");
    }

    #[test]
    fn known_bits_are_sound(spec in prog_spec(10), extra in prop::collection::vec(any::<(u32, u32)>(), 16)) {
        let f = build(&spec);
        let bits = known_bits(&f);
        let lowered = Lowered::new(&f, &CostModel::default());
        let tuples = arg_tuples().into_iter().chain(extra.into_iter().map(|(a, b)| vec![a, b]));
        for args in tuples {
            let mut bad = None;
            lowered.run_observed(&args, DEFAULT_STEP_LIMIT, |name, v| {
                if let Some(kb) = bits.get(name) {
                    if !kb.admits(v) && bad.is_none() {
                        bad = Some((name.to_string(), v, *kb));
                    }
                }
            });
            prop_assert!(bad.is_none(), "{bad:?} on {args:?}\n{}", print_function(&f));
        }
    }

    #[test]
    fn forward_passes_preserve_semantics_and_never_regress(spec in prog_spec(10)) {
        let f = build(&spec);
        let m = CostModel::default();
        for p in PassId::ALL {
            let out = p.apply(&f);
            prop_assert_eq!(&out, &p.apply(&f), "{} is not deterministic", p);
            let errors = validate(&out.function);
            prop_assert!(errors.is_empty(), "{}: {:?}\n{}", p, errors, print_function(&out.function));
            if !out.changed {
                prop_assert_eq!(&out.function, &f, "{} reported no change", p);
                continue;
            }
            equivalent(&f, &out.function)?;
            let (c0, s0) = (static_cost(&f, &m), static_size(&f));
            let (c1, s1) = (static_cost(&out.function, &m), static_size(&out.function));
            prop_assert!(c1 <= c0, "{p}: cost {c0} -> {c1}\n{}", print_function(&out.function));
            if !may_tie(p) {
                prop_assert!(c1 < c0 || s1 < s0, "{p}: ({c0},{s0}) -> ({c1},{s1})\n{}", print_function(&out.function));
            }
        }
    }

    #[test]
    fn forward_passes_reach_a_fixpoint(spec in prog_spec(8)) {
        let f = build(&spec);
        for p in PassId::ALL {
            let mut cur = f.clone();
            let mut rounds = 0;
            loop {
                let out = p.apply(&cur);
                if !out.changed {
                    prop_assert!(!p.apply(&out.function).changed);
                    break;
                }
                cur = out.function;
                rounds += 1;
                prop_assert!(rounds < 64, "{p} never settles");
            }
        }
    }

    #[test]
    fn reverse_variants_are_sound_and_reoptimizable(spec in prog_spec(8)) {
        let f = build(&spec);
        let m = CostModel::default();
        let base = static_cost(&f, &m);
        for r in ReversePassId::ALL {
            let set = r.enumerate(&f, 4);
            prop_assert_eq!(&set, &r.enumerate(&f, 4), "{} is not deterministic", r);
            for v in &set.variants {
                let h = &v.function;
                let errors = validate(h);
                prop_assert!(errors.is_empty(), "{r}@{}: {errors:?}\n{}", v.site, print_function(h));
                equivalent(&f, h)?;
                prop_assert!(static_cost(h, &m) >= base, "{r}@{} is cheaper", v.site);
                let fwd = r.forward().apply(h);
                prop_assert!(fwd.changed, "{} does not apply after {r}@{}\n{}", r.forward(), v.site, print_function(h));
                prop_assert!(static_cost(&fwd.function, &m) <= base);
            }
        }
    }

    #[test]
    fn straight_line_dynamic_cost_equals_static(spec in prog_spec(10), a: u32, b: u32) {
        let spec = common::ProgSpec { shape: 0, ..spec };
        let f = build(&spec);
        let m = CostModel::default();
        let r = interpret(&f, &[a, b], DEFAULT_STEP_LIMIT, &m);
        if matches!(r.outcome, Outcome::Returned(_)) {
            prop_assert_eq!(r.dynamic_cost, static_cost(&f, &m));
        }
        prop_assert_eq!(r, interpret(&f, &[a, b], DEFAULT_STEP_LIMIT, &m));
    }
}
