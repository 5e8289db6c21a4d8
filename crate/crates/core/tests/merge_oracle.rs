mod common;

use common::oracles::{isomorphic, scramble};
use proptest::prelude::*;
use slicekit::ir::Function;
use slicekit::merge::{equivalent, group_slices, structural_hash};
use slicekit::randprog::{random_module, RandConfig};

fn corpus() -> Vec<Function> {
    let cfg = RandConfig::default();
    let mut out = Vec::new();
    for seed in 0..60 {
        let m = random_module(seed, &cfg);
        out.extend(common::outline_all(&m, "f").into_iter().map(|o| o.new_function).filter(|f| f.blocks.len() <= 7));
    }
    out
}

#[test]
fn hash_equivalence_agrees_with_exhaustive_isomorphism() {
    let fs = corpus();
    assert!(fs.len() > 200, "corpus too small: {}", fs.len());
    let mut positives = 0;
    for (i, f) in fs.iter().enumerate() {
        for g in fs.iter().skip(i + 1).take(25) {
            let want = isomorphic(f, g);
            assert_eq!(equivalent(f, g), want, "\n{f:?}\n{g:?}");
            if want {
                positives += 1;
                assert_eq!(structural_hash(f), structural_hash(g));
            }
        }
    }
    assert!(positives > 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn scrambled_copies_are_equivalent(pick in 0usize..10_000, seed in any::<u64>()) {
        let fs = corpus_cached();
        let f = &fs[pick % fs.len()];
        let g = scramble(f, seed);
        prop_assert!(isomorphic(f, &g));
        prop_assert!(equivalent(f, &g));
        prop_assert_eq!(structural_hash(f), structural_hash(&g));
    }
}

fn corpus_cached() -> &'static [Function] {
    static CORPUS: std::sync::OnceLock<Vec<Function>> = std::sync::OnceLock::new();
    CORPUS.get_or_init(corpus)
}

#[test]
fn groups_are_equivalence_classes() {
    let cfg = RandConfig::default();
    let mut slices = Vec::new();
    for seed in 0..30 {
        slices.extend(common::outline_all(&random_module(seed, &cfg), "f"));
    }
    let groups = group_slices(&slices);
    let mut seen = vec![false; slices.len()];
    for g in &groups {
        for &i in &g.members {
            assert!(!seen[i]);
            seen[i] = true;
            assert!(equivalent(&slices[g.members[0]].new_function, &slices[i].new_function));
        }
        let min = g.members.iter().map(|&i| slices[i].new_function.name.clone()).min().unwrap();
        assert_eq!(g.canonical, min);
    }
    assert!(seen.iter().all(|&s| s));
    for (a, ga) in groups.iter().enumerate() {
        for gb in &groups[a + 1..] {
            assert!(!equivalent(&slices[ga.members[0]].new_function, &slices[gb.members[0]].new_function));
        }
    }
}
