use slicekit::gsa::convert;
use slicekit::interp::{run_function, Outcome, DEFAULT_FUEL};
use slicekit::ir::{print_function, print_module, validate, Module};
use slicekit::randprog::{random_module, sample_args, RandConfig};
use slicekit::sbcr::{cleanup, run_sbcr, CostModelConfig, Decision};

fn permissive() -> CostModelConfig {
    CostModelConfig { min_instrs_exclusive: 0, max_instrs: 1000, max_params: 100, min_occurrences: 1 }
}

fn same_behaviour(a: &Module, b: &Module, entry: &str, seed: u64, n: usize) {
    for args in sample_args(seed, 3, n) {
        let want = run_function(a, entry, &args, DEFAULT_FUEL).unwrap();
        if want.outcome == Outcome::FuelExhausted {
            continue;
        }
        let got = run_function(b, entry, &args, DEFAULT_FUEL).unwrap();
        assert_eq!(want.observable(), got.observable(), "seed {seed} args {args:?}\n{}", print_module(b));
    }
}

#[test]
fn permissive_sbcr_preserves_random_programs() {
    let cfg = RandConfig::default();
    let mut retained = 0;
    for seed in 0..150 {
        let m = random_module(seed, &cfg);
        let (out, rep) = run_sbcr(&m, &permissive());
        let errs: Vec<_> = validate(&out).into_iter().filter(|d| d.is_error()).collect();
        assert!(errs.is_empty(), "seed {seed}: {errs:?}\n{}", print_module(&out));
        retained += rep.retained().count();
        for g in &rep.groups {
            assert_eq!(g.decision == Decision::Retained, permissive().admits(g.instrs, g.params, g.occurrences));
        }
        same_behaviour(&m, &out, "f", seed, 10);
    }
    assert!(retained > 150);
}

#[test]
fn unsatisfiable_thresholds_change_nothing() {
    let never = CostModelConfig { min_occurrences: usize::MAX, ..permissive() };
    for seed in 0..40 {
        let m = random_module(seed, &RandConfig::default());
        let (out, rep) = run_sbcr(&m, &never);
        assert_eq!(print_module(&out), print_module(&m));
        assert_eq!(rep.delta, 0);
    }
}

#[test]
fn cleanup_preserves_and_is_idempotent() {
    for seed in 0..150 {
        let m = random_module(seed, &RandConfig::default());
        let n = convert(m.function("f").unwrap()).unwrap().normalized;
        let once = cleanup(&n);
        assert_eq!(cleanup(&once), once, "seed {seed}\n{}", print_function(&once));
        let mut c = m.clone();
        *c.function_mut("f").unwrap() = once;
        assert!(validate(&c).iter().all(|d| !d.is_error()), "seed {seed}: {:?}", validate(&c));
        same_behaviour(&m, &c, "f", seed, 8);
    }
}
