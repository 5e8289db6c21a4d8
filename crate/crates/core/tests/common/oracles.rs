//! Definition-level oracles shared by the property suites.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slicekit::analysis::{build_dom_tree, build_loop_forest, Analysis, Cfg, Direction, DomTree};
use slicekit::gsa::convert;
use slicekit::interp::{run_function, DEFAULT_FUEL};
use slicekit::ir::{parse_module, Function, InstKind, Instruction, Module, Operand};

/// Function whose CFG has exactly the edges in `succs` (at most two per
/// block); blocks without successors return.
pub fn function_from_edges(succs: &[Vec<usize>]) -> Function {
    let mut text = String::from("func @g(%c: i1) -> i32 {\n");
    for (i, s) in succs.iter().enumerate() {
        text.push_str(&format!("b{i}:\n"));
        match s.as_slice() {
            [] => text.push_str("  ret 0\n"),
            [t] => text.push_str(&format!("  jmp b{t}\n")),
            [t, e] => text.push_str(&format!("  br %c, b{t}, b{e}\n")),
            _ => panic!("at most two successors"),
        }
    }
    text.push('}');
    parse_module(&text).unwrap().functions.remove(0)
}

fn reachable(succs: &[Vec<usize>], from: &[usize], removed: Option<usize>) -> Vec<bool> {
    let mut seen = vec![false; succs.len()];
    let mut stack: Vec<usize> = from.iter().copied().filter(|&b| Some(b) != removed).collect();
    for &b in &stack {
        seen[b] = true;
    }
    while let Some(b) = stack.pop() {
        for &s in &succs[b] {
            if Some(s) != removed && !seen[s] {
                seen[s] = true;
                stack.push(s);
            }
        }
    }
    seen
}

/// `a` dominates `b` iff `b` is reachable from the roots and every path
/// from them to `b` meets `a`.
fn dominance_by_paths(succs: &[Vec<usize>], roots: &[usize]) -> Vec<Vec<bool>> {
    let n = succs.len();
    let base = reachable(succs, roots, None);
    (0..n)
        .map(|a| {
            let without = reachable(succs, roots, Some(a));
            (0..n).map(|b| base[a] && base[b] && (a == b || !without[b])).collect()
        })
        .collect()
}

fn compare(dt: &DomTree, oracle: &[Vec<bool>], what: &str) -> Result<(), String> {
    let n = oracle.len();
    for a in 0..n {
        for b in 0..n {
            if dt.dominates(a, b) != oracle[a][b] {
                return Err(format!("{what}: dominates({a}, {b}) = {}, paths say {}", dt.dominates(a, b), oracle[a][b]));
            }
        }
    }
    Ok(())
}

/// Dominators, post-dominators and natural loops of the CFG `succs`
/// against their path-based definitions.
pub fn check_cfg(succs: &[Vec<usize>]) -> Result<(), String> {
    let f = function_from_edges(succs);
    let fwd = build_dom_tree(&f, Direction::Forward);
    compare(&fwd, &dominance_by_paths(succs, &[0]), "dom")?;

    let n = succs.len();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (b, s) in succs.iter().enumerate() {
        for &t in s {
            preds[t].push(b);
        }
    }
    let exits: Vec<usize> = (0..n).filter(|&b| succs[b].is_empty()).collect();
    let post = build_dom_tree(&f, Direction::PostDom);
    compare(&post, &dominance_by_paths(&preds, &exits), "postdom")?;

    let cfg = Cfg::new(&f);
    let forest = build_loop_forest(&cfg, &fwd);
    let mut want: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    let live = reachable(succs, &[0], None);
    for t in (0..n).filter(|&t| live[t]) {
        for &h in &succs[t] {
            if !fwd.dominates(h, t) {
                continue;
            }
            let body = want.entry(h).or_insert_with(|| BTreeSet::from([h]));
            let mut stack = vec![t];
            while let Some(x) = stack.pop() {
                if body.insert(x) {
                    stack.extend(preds[x].iter().copied().filter(|p| live[*p]));
                }
            }
        }
    }
    let got: BTreeMap<usize, BTreeSet<usize>> =
        forest.loops.iter().map(|l| (l.header, l.body.iter().copied().collect())).collect();
    if got != want {
        return Err(format!("loops: got {got:?}, want {want:?}"));
    }
    for b in (0..n).filter(|&b| live[b]) {
        let depth = want.values().filter(|body| body.contains(&b)).count() as u32;
        if forest.depth[b] != depth {
            return Err(format!("loop depth of {b}: got {}, want {depth}", forest.depth[b]));
        }
    }
    Ok(())
}

pub fn random_cfg(rng: &mut ChaCha8Rng, max_blocks: usize) -> Vec<Vec<usize>> {
    let n = rng.gen_range(1..=max_blocks);
    (0..n)
        .map(|_| match rng.gen_range(0..10) {
            0 => vec![],
            1..=4 => vec![rng.gen_range(0..n)],
            _ => vec![rng.gen_range(0..n), rng.gen_range(0..n)],
        })
        .collect()
}

/// Every CFG on `n` blocks with at most two successors per block.
pub fn all_cfgs(n: usize) -> Vec<Vec<Vec<usize>>> {
    let mut choices: Vec<Vec<usize>> = vec![vec![]];
    for t in 0..n {
        choices.push(vec![t]);
        for e in t + 1..n {
            choices.push(vec![t, e]);
        }
    }
    let mut out: Vec<Vec<Vec<usize>>> = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                choices.iter().map(move |c| {
                    let mut p = prefix.clone();
                    p.push(c.clone());
                    p
                })
            })
            .collect();
    }
    out
}

/// Acyclic region from `b0` to a final merge whose φ takes a distinct
/// constant per predecessor; branches test `%p0..%p{k-1}`, possibly
/// more than once.
pub fn random_merge_region(rng: &mut ChaCha8Rng) -> Module {
    let n = rng.gen_range(3..=10);
    let k = rng.gen_range(1..=8);
    let params: Vec<String> = (0..k).map(|i| format!("%p{i}: i1")).collect();
    let mut text = format!("func @f({}) -> i32 {{\n", params.join(", "));
    let mut preds_of_last: Vec<usize> = Vec::new();
    let mut has_pred = vec![false; n];
    has_pred[0] = true;
    let mut succs: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n - 1 {
        // keep every block reachable: an unreached successor is preferred
        let first = (i + 1..n).find(|&j| !has_pred[j]).unwrap_or_else(|| rng.gen_range(i + 1..n));
        let second = rng.gen_range(i + 1..n);
        succs[i] = if first == second || rng.gen_bool(0.2) { vec![first] } else { vec![first, second] };
        for &s in &succs[i] {
            has_pred[s] = true;
        }
    }
    for i in 0..n {
        text.push_str(&format!("b{i}:\n"));
        if i == n - 1 {
            let inc: Vec<String> = (0..n - 1)
                .filter(|p| succs[*p].contains(&(n - 1)))
                .map(|p| {
                    preds_of_last.push(p);
                    format!("[b{p}: {}]", 10 * (p + 1))
                })
                .collect();
            text.push_str(&format!("  %x = phi {}\n  ret %x\n", inc.join(", ")));
        } else {
            match succs[i].as_slice() {
                [t] => text.push_str(&format!("  jmp b{t}\n")),
                [t, e] => text.push_str(&format!("  br %p{}, b{t}, b{e}\n", rng.gen_range(0..k))),
                _ => unreachable!(),
            }
        }
    }
    text.push('}');
    parse_module(&text).unwrap()
}

/// For every predicate assignment, the gated merge yields the value of the
/// edge the CFG actually takes.
pub fn check_merge_region(m: &Module) -> Result<(), String> {
    let f = &m.functions[0];
    if f.blocks.last().unwrap().phis.is_empty() {
        return Ok(());
    }
    let form = convert(f).map_err(|e| e.to_string())?;
    let gm = Module { functions: vec![form.gsa.clone()], ..Default::default() };
    let k = f.params.len();
    let last = form.gsa.blocks.len() - 1;
    let a = Analysis::new(&form.gsa);
    if a.cfg.preds[last].len() > 1
        && !form.gsa.blocks[last].phis.iter().all(|i| matches!(i.kind, InstKind::Gamma { .. }))
    {
        return Err("merge not gated".into());
    }
    for bits in 0..(1u32 << k) {
        let args: Vec<i32> = (0..k).map(|i| (bits >> i & 1) as i32).collect();
        let want = run_function(m, "f", &args, DEFAULT_FUEL).map_err(|e| e.to_string())?;
        let got = run_function(&gm, "f", &args, DEFAULT_FUEL).map_err(|e| e.to_string())?;
        if want.observable() != got.observable() {
            return Err(format!("args {args:?}: {:?} vs {:?}", want.outcome, got.outcome));
        }
    }
    Ok(())
}

/// Isomorphism by exhaustive search over block bijections fixing the entry.
/// Results are bound positionally, then every use must agree.
pub fn isomorphic(f: &Function, g: &Function) -> bool {
    if f.params.len() != g.params.len()
        || f.ret_ty != g.ret_ty
        || f.blocks.len() != g.blocks.len()
        || f.params.iter().zip(&g.params).any(|(a, b)| a.ty != b.ty)
    {
        return false;
    }
    let rest: Vec<usize> = (1..g.blocks.len()).collect();
    permutations(&rest).into_iter().any(|perm| {
        let pi: Vec<usize> = std::iter::once(0).chain(perm).collect();
        matches_under(f, g, &pi)
    })
}

fn permutations(xs: &[usize]) -> Vec<Vec<usize>> {
    if xs.is_empty() {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for i in 0..xs.len() {
        let mut rest = xs.to_vec();
        let x = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, x);
            out.push(p);
        }
    }
    out
}

fn matches_under(f: &Function, g: &Function, pi: &[usize]) -> bool {
    let mut sigma: HashMap<&str, &str> = HashMap::new();
    for (a, b) in f.params.iter().zip(&g.params) {
        sigma.insert(&a.name, &b.name);
    }
    let lab: HashMap<&str, &str> =
        pi.iter().enumerate().map(|(i, &j)| (f.blocks[i].label.as_str(), g.blocks[j].label.as_str())).collect();
    for (i, &j) in pi.iter().enumerate() {
        let (a, b) = (&f.blocks[i], &g.blocks[j]);
        if a.phis.len() != b.phis.len() || a.body.len() != b.body.len() {
            return false;
        }
        for (x, y) in a.instructions().zip(b.instructions()) {
            match (&x.result, &y.result) {
                (Some(r), Some(s)) => {
                    sigma.insert(r, s);
                }
                (None, None) => {}
                _ => return false,
            }
        }
    }
    let op = |a: &Operand, b: &Operand| match (a, b) {
        (Operand::Var(x), Operand::Var(y)) => sigma.get(x.as_str()) == Some(&y.as_str()),
        (Operand::Imm(x), Operand::Imm(y)) => x == y,
        _ => false,
    };
    let l = |a: &str, b: &str| lab.get(a) == Some(&b);
    let inst = |x: &Instruction, y: &Instruction| match (&x.kind, &y.kind) {
        (InstKind::Const { ty: t1, value: v1 }, InstKind::Const { ty: t2, value: v2 }) => t1 == t2 && v1 == v2,
        (InstKind::Binary { op: o1, lhs: a1, rhs: b1 }, InstKind::Binary { op: o2, lhs: a2, rhs: b2 }) => {
            o1 == o2 && op(a1, a2) && op(b1, b2)
        }
        (InstKind::Icmp { pred: p1, lhs: a1, rhs: b1 }, InstKind::Icmp { pred: p2, lhs: a2, rhs: b2 }) => {
            p1 == p2 && op(a1, a2) && op(b1, b2)
        }
        (InstKind::Not { operand: a }, InstKind::Not { operand: b }) => op(a, b),
        (
            InstKind::Select { cond: c1, if_true: t1, if_false: f1 },
            InstKind::Select { cond: c2, if_true: t2, if_false: f2 },
        ) => op(c1, c2) && op(t1, t2) && op(f1, f2),
        (InstKind::Load { global: a }, InstKind::Load { global: b }) => a == b,
        (InstKind::Phi { incoming: a }, InstKind::Phi { incoming: b }) => {
            a.len() == b.len() && a.iter().all(|(la, va)| b.iter().any(|(lb, vb)| l(la, lb) && op(va, vb)))
        }
        (InstKind::Jmp { target: a }, InstKind::Jmp { target: b }) => l(a, b),
        (
            InstKind::Br { cond: c1, then_bb: t1, else_bb: e1 },
            InstKind::Br { cond: c2, then_bb: t2, else_bb: e2 },
        ) => op(c1, c2) && l(t1, t2) && l(e1, e2),
        (InstKind::Ret { value: a }, InstKind::Ret { value: b }) => op(a, b),
        _ => false,
    };
    pi.iter().enumerate().all(|(i, &j)| {
        f.blocks[i].instructions().zip(g.blocks[j].instructions()).all(|(x, y)| inst(x, y))
    })
}

/// `f` with fresh names, shuffled non-entry blocks and shuffled φ inputs.
pub fn scramble(f: &Function, seed: u64) -> Function {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = f.clone();
    g.name = "scrambled".into();
    let mut vars: HashMap<String, String> = HashMap::new();
    let fresh = |v: &str, vars: &mut HashMap<String, String>| {
        let n = vars.len();
        vars.entry(v.to_string()).or_insert_with(|| format!("r{}_{n}", seed % 97)).clone()
    };
    for p in &mut g.params {
        p.name = fresh(&p.name, &mut vars);
    }
    for b in &f.blocks {
        for i in b.instructions() {
            if let Some(r) = &i.result {
                fresh(r, &mut vars);
            }
        }
    }
    let labels: HashMap<String, String> =
        f.blocks.iter().enumerate().map(|(i, b)| (b.label.clone(), format!("L{}", (i * 7 + 3) % 101))).collect();
    for b in &mut g.blocks {
        b.label = labels[&b.label].clone();
        for inst in b.instructions_mut() {
            if let Some(r) = &inst.result {
                inst.result = Some(vars[r].clone());
            }
            inst.rename_uses(&mut |v| vars.get(v).map(Operand::var));
            match &mut inst.kind {
                InstKind::Jmp { target } => *target = labels[target].clone(),
                InstKind::Br { then_bb, else_bb, .. } => {
                    *then_bb = labels[then_bb].clone();
                    *else_bb = labels[else_bb].clone();
                }
                InstKind::Phi { incoming } => {
                    for (l, _) in incoming.iter_mut() {
                        *l = labels[l].clone();
                    }
                    incoming.shuffle(&mut rng);
                }
                _ => {}
            }
        }
    }
    g.blocks[1..].shuffle(&mut rng);
    g
}

