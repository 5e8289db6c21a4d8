use std::collections::HashSet;

use slicekit::analysis::Analysis;
use slicekit::gsa::convert;
use slicekit::interp::{eval_slice_value, run_function, Outcome, SliceValue, DEFAULT_FUEL};
use slicekit::ir::{parse_module, GateExpr, InstKind, Module};
use slicekit::outline::{outline_slice, outlined_name, reconstruct_cfg, OutlinedSlice, Outliner};
use slicekit::slice::candidate;

fn load(name: &str) -> Module {
    let path = format!("{}/tests/corpus/{name}", env!("CARGO_MANIFEST_DIR"));
    parse_module(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn outline(m: &Module, crit: &str) -> (OutlinedSlice, Vec<String>) {
    let form = convert(&m.functions[0]).unwrap();
    let ox = Outliner::new(m, &form);
    let cand = candidate(m, &ox.ctx, crit).unwrap();
    assert!(cand.legality.is_ok(), "{:?}", cand.legality);
    let region = cand.region.iter().map(|&b| form.gsa.blocks[b].label.clone()).collect();
    let o = outline_slice(&ox, &cand, &outlined_name("f", crit, &HashSet::new())).unwrap();
    (o, region)
}

fn call_outlined(m: &Module, o: &OutlinedSlice, names: &[&str], args: &[i32]) -> SliceValue {
    let mut mm = m.clone();
    mm.functions.push(o.new_function.clone());
    let vals: Vec<i32> =
        o.new_function.params.iter().map(|p| args[names.iter().position(|n| *n == p.name).unwrap()]).collect();
    match run_function(&mm, &o.new_function.name, &vals, DEFAULT_FUEL).unwrap().outcome {
        Outcome::Value(v) => SliceValue::Value(v),
        other => panic!("{other:?}"),
    }
}

fn branch_blocks(o: &OutlinedSlice) -> Vec<String> {
    o.new_function
        .blocks
        .iter()
        .filter(|b| matches!(b.terminator.kind, InstKind::Br { .. }))
        .map(|b| b.label.clone())
        .collect()
}

#[test]
fn non_dominating_branch_is_part_of_the_slice() {
    for file in ["two_level_merge.sir", "two_level_merge_hoisted.sir"] {
        let m = load(file);
        let (o, region) = outline(&m, "x3");
        if file == "two_level_merge.sir" {
            assert!(region.contains(&"B2".to_string()), "{region:?}");
        }
        assert!(branch_blocks(&o).iter().any(|l| l.contains(".B2.")), "{file}: {:?}", branch_blocks(&o));
        for bits in 0..8 {
            let args = [bits & 1, (bits >> 1) & 1, (bits >> 2) & 1].map(|x| x * 7);
            let want = eval_slice_value(&m, "f", "x3", &args, DEFAULT_FUEL).unwrap();
            assert_eq!(call_outlined(&m, &o, &["a", "b", "c"], &args), want, "{file} {args:?}");
        }
    }
}

#[test]
fn merge_gate_matches_its_truth_table() {
    let m = load("gated_merge.sir");
    let form = convert(&m.functions[0]).unwrap();
    let x2 = form.gsa.instructions().find(|i| i.result.as_deref() == Some("x2")).unwrap();
    let InstKind::Gamma { gate, .. } = &x2.kind else { panic!("{x2}") };
    let p = |s: &str| GateExpr::Pred(s.into());
    let want = GateExpr::or(vec![
        GateExpr::and(vec![p("p0"), p("p1")]),
        GateExpr::and(vec![p("p0"), p("p1").negate(), p("p2")]),
    ]);
    for bits in 0..8u32 {
        let env = |v: &str| -> bool { bits >> (v.as_bytes()[1] - b'0') & 1 == 1 };
        assert_eq!(gate.eval_with(&env), want.eval_with(&env), "bits {bits:03b}");
    }
}

#[test]
fn loop_slice_leaves_the_store_behind() {
    let m = load("counted_loop.sir");
    let (o, region) = outline(&m, "s3");
    assert!(!region.contains(&"bb3".to_string()));
    let mut ps: Vec<&str> = o.new_function.params.iter().map(|p| p.name.as_str()).collect();
    ps.sort();
    assert_eq!(ps, vec!["N", "s0", "x0"]);
    for args in [[0, 0, 0], [6, 0, 1], [10, 3, -4], [-1, 2, 2]] {
        let want = eval_slice_value(&m, "f", "s3", &args, DEFAULT_FUEL).unwrap();
        assert_eq!(call_outlined(&m, &o, &["N", "x0", "s0"], &args), want);
    }
}

#[test]
fn attraction_ladder() {
    let m = load("attraction_ladder.sir");
    let f = &m.functions[0];
    let (o, region) = outline(&m, "x1");
    assert_eq!(region, vec!["BB0", "BB1", "BB2", "BB5", "BB9"]);
    let a = Analysis::new(f);
    let idx = f.block_index();
    let blocks: Vec<usize> = region.iter().map(|l| idx[l.as_str()]).collect();
    let edges = reconstruct_cfg(&blocks, &a.cfg, &a.dom);
    let named: Vec<(&str, &str)> =
        edges.iter().map(|&(x, y)| (f.blocks[x].label.as_str(), f.blocks[y].label.as_str())).collect();
    assert_eq!(named, vec![("BB0", "BB1"), ("BB1", "BB2"), ("BB2", "BB5"), ("BB2", "BB9"), ("BB5", "BB9")]);
    for v in -3..14 {
        let want = eval_slice_value(&m, "f", "x1", &[v], DEFAULT_FUEL).unwrap();
        if want == SliceValue::Undefined {
            continue;
        }
        assert_eq!(call_outlined(&m, &o, &["a"], &[v]), want, "a = {v}");
    }
}
