use slicekit::gsa::convert;
use slicekit::interp::{run_function, DEFAULT_FUEL};
use slicekit::ir::{print_function, validate, InstKind, Module};
use slicekit::randprog::{random_module, sample_args, RandConfig};

fn with_f(m: &Module, f: slicekit::ir::Function) -> Module {
    let mut out = m.clone();
    *out.function_mut("f").unwrap() = f;
    out
}

#[test]
fn ssa_and_gsa_agree_on_random_programs() {
    let cfg = RandConfig::default();
    for seed in 0..300 {
        let m = random_module(seed, &cfg);
        let form = convert(m.function("f").unwrap()).expect("generated programs are reducible");
        assert!(
            !form.gsa.instructions().any(|i| matches!(i.kind, InstKind::Phi { .. })),
            "seed {seed}: phi left in\n{}",
            print_function(&form.gsa)
        );
        let n = with_f(&m, form.normalized.clone());
        let g = with_f(&m, form.gsa.clone());
        for (what, mm) in [("normalized", &n), ("gsa", &g)] {
            let errs: Vec<_> = validate(mm).into_iter().filter(|d| d.is_error()).collect();
            assert!(errs.is_empty(), "seed {seed} {what}: {errs:?}\n{}", print_function(mm.function("f").unwrap()));
        }
        for args in sample_args(seed, 3, 12) {
            let want = run_function(&m, "f", &args, DEFAULT_FUEL).unwrap();
            for (what, mm) in [("normalized", &n), ("gsa", &g)] {
                let got = run_function(mm, "f", &args, DEFAULT_FUEL)
                    .unwrap_or_else(|e| panic!("seed {seed} {what} {args:?}: {e}\n{}", print_function(mm.function("f").unwrap())));
                assert_eq!(
                    want.observable(),
                    got.observable(),
                    "seed {seed} {what} {args:?}\n{}",
                    print_function(mm.function("f").unwrap())
                );
            }
        }
    }
}
