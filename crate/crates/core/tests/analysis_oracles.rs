mod common;

use common::oracles::{all_cfgs, check_cfg, check_merge_region, random_cfg, random_merge_region};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn every_small_cfg_matches_path_definitions() {
    for n in 1..=4 {
        for succs in all_cfgs(n) {
            check_cfg(&succs).unwrap_or_else(|e| panic!("{succs:?}: {e}"));
        }
    }
}

#[test]
fn random_cfgs_match_path_definitions() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..1000 {
        let succs = random_cfg(&mut rng, 12);
        check_cfg(&succs).unwrap_or_else(|e| panic!("{succs:?}: {e}"));
    }
}

#[test]
fn random_merge_regions_gate_correctly() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let m = random_merge_region(&mut rng);
        check_merge_region(&m).unwrap_or_else(|e| panic!("{e}\n{}", slicekit::ir::print_module(&m)));
    }
}

proptest! {
    #[test]
    fn cfg_property(seed in any::<u64>()) {
        let succs = random_cfg(&mut ChaCha8Rng::seed_from_u64(seed), 12);
        prop_assert!(check_cfg(&succs).is_ok(), "{:?}: {:?}", succs, check_cfg(&succs));
    }
}
