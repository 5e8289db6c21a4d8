use std::collections::HashSet;

use slicekit::gsa::convert;
use slicekit::interp::{observe_criterion, run_function, Outcome, DEFAULT_FUEL};
use slicekit::ir::{print_function, validate, Module};
use slicekit::outline::{apply_rewrite, outline_slice, outlined_name, OutlineError, Outliner};
use slicekit::randprog::{random_module, sample_args, RandConfig};
use slicekit::slice::{candidate, enumerate_criteria};

#[test]
fn outlined_slices_recompute_every_criterion_value() {
    let cfg = RandConfig::default();
    let (mut outlined, mut unbuildable, mut hits) = (0, 0, 0);
    for seed in 0..200 {
        let m = random_module(seed, &cfg);
        let form = convert(m.function("f").unwrap()).unwrap();
        let mut n = m.clone();
        *n.function_mut("f").unwrap() = form.normalized.clone();
        let ox = Outliner::new(&m, &form);
        let names: HashSet<String> = m.functions.iter().map(|f| f.name.clone()).collect();
        let arg_sets = sample_args(seed, 3, 8);
        for crit in enumerate_criteria(&form.gsa) {
            let cand = candidate(&m, &ox.ctx, &crit).unwrap();
            if !cand.legality.is_ok() {
                continue;
            }
            let o = match outline_slice(&ox, &cand, &outlined_name("f", &crit, &names)) {
                Ok(o) => o,
                Err(OutlineError::Unbuildable(_)) => {
                    unbuildable += 1;
                    continue;
                }
                Err(e) => panic!("seed {seed} {crit}: {e}"),
            };
            outlined += 1;
            let r = apply_rewrite(&n, &o).unwrap();
            let errs: Vec<_> = validate(&r).into_iter().filter(|d| d.is_error()).collect();
            let ctx = || format!("seed {seed} crit {crit}\n{}\n{}", print_function(&form.gsa), print_function(&o.new_function));
            assert!(errs.is_empty(), "{errs:?}\n{}", ctx());
            let watch: Vec<String> = o.new_function.params.iter().map(|p| p.name.clone()).collect();
            for args in &arg_sets {
                let obs = observe_criterion(&n, "f", &crit, &watch, args, DEFAULT_FUEL, 16).unwrap();
                for (want, vals) in &obs.hits {
                    let vals: Vec<i32> = vals
                        .iter()
                        .map(|v| v.unwrap_or_else(|| panic!("input undefined at the criterion\n{}", ctx())))
                        .collect();
                    let got = run_function(&r, &o.new_function.name, &vals, DEFAULT_FUEL).unwrap();
                    assert_eq!(got.outcome, Outcome::Value(*want), "args {args:?} inputs {vals:?}\n{}", ctx());
                    hits += 1;
                }
                check_whole(&n, &r, args, &ctx);
            }
        }
    }
    eprintln!("outlined {outlined}, unbuildable {unbuildable}, checked values {hits}");
    assert!(outlined > 500);
    assert!(unbuildable * 20 < outlined, "too many unbuildable slices: {unbuildable}");
}

fn check_whole(n: &Module, r: &Module, args: &[i32], ctx: &dyn Fn() -> String) {
    let want = run_function(n, "f", args, DEFAULT_FUEL).unwrap();
    let got = run_function(r, "f", args, DEFAULT_FUEL).unwrap();
    if want.outcome == Outcome::FuelExhausted {
        return;
    }
    assert_eq!(want.observable(), got.observable(), "whole program, args {args:?}\n{}", ctx());
}
