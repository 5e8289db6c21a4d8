//! Loop normal form: reachable blocks only, one preheader edge and one latch
//! per header, dedicated exit blocks, and loop-closed SSA.

use std::collections::{HashMap, HashSet};

use super::GsaError;
use crate::analysis::{Analysis, Cfg, LoopForest};
use crate::ir::{BasicBlock, Function, InstKind, Instruction, Operand};

/// Drop blocks the entry cannot reach, along with phi edges from them.
pub fn remove_unreachable(f: &mut Function) -> bool {
    let reach = Cfg::new(f).reachable_from(0);
    if reach.iter().all(|&r| r) {
        return false;
    }
    let dead: HashSet<String> =
        f.blocks.iter().zip(&reach).filter(|(_, r)| !**r).map(|(b, _)| b.label.clone()).collect();
    let mut i = 0;
    f.blocks.retain(|_| {
        i += 1;
        reach[i - 1]
    });
    for b in &mut f.blocks {
        for inst in &mut b.phis {
            if let InstKind::Phi { incoming } = &mut inst.kind {
                incoming.retain(|(l, _)| !dead.contains(l));
            }
        }
    }
    true
}

/// Replace every use of `var` (operands and gate predicates) with `with`.
pub(crate) fn replace_uses(f: &mut Function, var: &str, with: &Operand) {
    for b in &mut f.blocks {
        for inst in b.instructions_mut() {
            inst.rename_uses(&mut |v| (v == var).then(|| with.clone()));
        }
    }
}

/// The single value a phi merges, ignoring self references.
fn trivial_value(inst: &Instruction) -> Option<Operand> {
    let InstKind::Phi { incoming } = &inst.kind else { return None };
    let me = inst.result.as_deref();
    let mut val: Option<&Operand> = None;
    for (_, v) in incoming {
        if v.as_var().is_some() && v.as_var() == me {
            continue;
        }
        match val {
            None => val = Some(v),
            Some(w) if w == v => {}
            Some(_) => return None,
        }
    }
    val.cloned()
}

/// Remove phis that merge a single value, to a fixpoint. When `only` is
/// given, just those phis are candidates.
pub(crate) fn remove_trivial_phis(f: &mut Function, only: Option<&HashSet<String>>) {
    loop {
        let mut found = None;
        'outer: for (bi, b) in f.blocks.iter().enumerate() {
            for (pi, inst) in b.phis.iter().enumerate() {
                let Some(r) = &inst.result else { continue };
                if only.is_some_and(|s| !s.contains(r)) {
                    continue;
                }
                if let Some(v) = trivial_value(inst) {
                    found = Some((bi, pi, r.clone(), v));
                    break 'outer;
                }
            }
        }
        let Some((bi, pi, r, v)) = found else { return };
        f.blocks[bi].phis.remove(pi);
        replace_uses(f, &r, &v);
    }
}

fn labels(f: &Function) -> HashSet<String> {
    f.blocks.iter().map(|b| b.label.clone()).collect()
}

fn fresh_var(f: &Function, base: &str) -> String {
    f.fresh_var(base, &mut HashSet::new())
}

/// Route the edges `from -> target` for every `from` in `sources` through a new
/// block placed at `at`. Phis in `target` that read from `sources` get one
/// incoming from the new block; when the sources disagree a phi in the new
/// block merges them.
fn funnel(f: &mut Function, target: usize, sources: &[usize], label_base: &str, at: usize) -> usize {
    let mut taken = labels(f);
    let label = f.fresh_label(label_base, &mut taken);
    let target_label = f.blocks[target].label.clone();
    let src_labels: Vec<String> = sources.iter().map(|&s| f.blocks[s].label.clone()).collect();
    for &s in sources {
        f.blocks[s].terminator.rename_successor(&target_label, &label);
    }
    let mut new_block = BasicBlock::new(label.clone(), Instruction::jmp(target_label));
    let mut new_phis = Vec::new();
    let mut var_taken: HashSet<String> = HashSet::new();
    for pi in 0..f.blocks[target].phis.len() {
        let phi = &f.blocks[target].phis[pi];
        let InstKind::Phi { incoming } = &phi.kind else { continue };
        let (from_src, rest): (Vec<_>, Vec<_>) =
            incoming.iter().cloned().partition(|(l, _)| src_labels.contains(l));
        if from_src.is_empty() {
            continue;
        }
        let first = from_src[0].1.clone();
        let merged = if from_src.iter().all(|(_, v)| *v == first) {
            first
        } else {
            let base = format!("{}.m", phi.result.as_deref().unwrap_or("v"));
            let name = f.fresh_var(&base, &mut var_taken);
            new_phis.push(Instruction::new(name.clone(), InstKind::Phi { incoming: from_src }));
            Operand::Var(name)
        };
        let mut inc = rest;
        inc.push((label.clone(), merged));
        f.blocks[target].phis[pi].kind = InstKind::Phi { incoming: inc };
    }
    new_block.phis = new_phis;
    f.blocks.insert(at, new_block);
    at
}

/// One structural fix per call; returns whether anything changed.
fn fix_one_loop(f: &mut Function, a: &Analysis) -> bool {
    for l in &a.loops.loops {
        let h = l.header;
        let outside: Vec<usize> = a.cfg.preds[h].iter().copied().filter(|p| !l.contains(*p)).collect();
        if outside.len() != 1 {
            let base = format!("{}.pre", f.blocks[h].label);
            funnel(f, h, &outside, &base, h);
            return true;
        }
        if l.latches.len() > 1 {
            let base = format!("{}.latch", f.blocks[h].label);
            let at = l.latches.iter().max().unwrap() + 1;
            funnel(f, h, &l.latches.clone(), &base, at);
            return true;
        }
        for &b in &l.body {
            for &e in &a.cfg.succs[b] {
                if !l.contains(e) && a.cfg.preds[e].len() > 1 {
                    let base = format!("{}.exit", f.blocks[e].label);
                    funnel(f, e, &[b], &base, e);
                    return true;
                }
            }
        }
    }
    false
}

/// Bring every loop into the shape μ/η construction expects.
pub fn normalize_loops(f: &mut Function) -> Result<(), GsaError> {
    loop {
        let a = Analysis::new(f);
        if !a.reducible {
            return Err(GsaError::Irreducible);
        }
        if !fix_one_loop(f, &a) {
            return Ok(());
        }
    }
}

enum UseSite {
    /// Operand of a non-merge instruction in this block.
    Block(usize),
    /// Incoming value of a phi along the edge from this block.
    Edge(usize),
}

/// Insert loop-exit phis for every value defined in a loop and used outside
/// it. Expects dedicated exit blocks.
pub fn to_lcssa(f: &Function, loops: &LoopForest) -> Function {
    let mut out = f.clone();
    let mut order: Vec<usize> = (0..loops.loops.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(loops.loops[i].depth));
    for li in order {
        close_loop(&mut out, loops, li);
    }
    out
}

fn close_loop(f: &mut Function, loops: &LoopForest, li: usize) {
    let l = &loops.loops[li];
    let cfg = Cfg::new(f);
    let defined: Vec<String> = l
        .body
        .iter()
        .flat_map(|&b| f.blocks[b].phis.iter().chain(f.blocks[b].body.iter()))
        .filter_map(|i| i.result.clone())
        .collect();
    let index = f.block_index().into_iter().map(|(k, v)| (k.to_string(), v)).collect::<HashMap<_, _>>();
    for v in defined {
        let mut sites: Vec<UseSite> = Vec::new();
        for (bi, b) in f.blocks.iter().enumerate() {
            if l.contains(bi) {
                continue;
            }
            for inst in b.instructions() {
                if let InstKind::Phi { incoming } = &inst.kind {
                    for (lab, op) in incoming {
                        let p = index[lab];
                        if op.as_var() == Some(&v) && !l.contains(p) {
                            sites.push(UseSite::Edge(p));
                        }
                    }
                } else if inst.used_vars().contains(&v.as_str()) {
                    sites.push(UseSite::Block(bi));
                }
            }
        }
        if sites.is_empty() {
            continue;
        }
        let mut up = Updater { var: &v, loop_body: &l.body, cfg: &cfg, memo: HashMap::new(), created: HashSet::new() };
        let mut reach: HashMap<usize, Operand> = HashMap::new();
        for s in &sites {
            let b = match s {
                UseSite::Block(b) | UseSite::Edge(b) => *b,
            };
            let val = up.read(f, b);
            reach.insert(b, val);
        }
        let created = std::mem::take(&mut up.created);
        // Rewrite the recorded uses.
        for (bi, b) in f.blocks.iter_mut().enumerate() {
            if l.contains(bi) {
                continue;
            }
            for inst in b.instructions_mut() {
                if inst.result.as_ref().is_some_and(|r| created.contains(r)) {
                    continue;
                }
                if let InstKind::Phi { incoming } = &mut inst.kind {
                    for (lab, op) in incoming.iter_mut() {
                        let p = index[lab.as_str()];
                        if op.as_var() == Some(&v) && !l.contains(p) {
                            *op = reach[&p].clone();
                        }
                    }
                } else if let Some(val) = reach.get(&bi) {
                    inst.rename_uses(&mut |u| (u == v).then(|| val.clone()));
                }
            }
        }
        let placeholders: HashSet<String> = created.into_iter().filter(|c| !c.contains(".lcssa")).collect();
        remove_trivial_phis(f, Some(&placeholders));
    }
}

/// On-demand SSA reconstruction of one variable outside its loop.
struct Updater<'a> {
    var: &'a str,
    loop_body: &'a [usize],
    cfg: &'a Cfg,
    memo: HashMap<usize, Operand>,
    created: HashSet<String>,
}

impl Updater<'_> {
    fn in_loop(&self, b: usize) -> bool {
        self.loop_body.binary_search(&b).is_ok()
    }

    fn read(&mut self, f: &mut Function, b: usize) -> Operand {
        if let Some(v) = self.memo.get(&b) {
            return v.clone();
        }
        if self.in_loop(b) {
            return Operand::var(self.var);
        }
        let preds = self.cfg.preds[b].clone();
        if preds.len() == 1 && self.in_loop(preds[0]) {
            let name = fresh_var(f, &format!("{}.lcssa", self.var));
            let pred_label = f.blocks[preds[0]].label.clone();
            f.blocks[b].phis.push(Instruction::new(
                name.clone(),
                InstKind::Phi { incoming: vec![(pred_label, Operand::var(self.var))] },
            ));
            self.created.insert(name.clone());
            self.memo.insert(b, Operand::var(&name));
            return Operand::Var(name);
        }
        if preds.len() == 1 {
            let v = self.read(f, preds[0]);
            self.memo.insert(b, v.clone());
            return v;
        }
        let name = fresh_var(f, &format!("{}.ssa", self.var));
        f.blocks[b].phis.push(Instruction::new(name.clone(), InstKind::Phi { incoming: vec![] }));
        self.created.insert(name.clone());
        self.memo.insert(b, Operand::var(&name));
        let mut incoming = Vec::new();
        for p in preds {
            let v = self.read(f, p);
            incoming.push((f.blocks[p].label.clone(), v));
        }
        let slot = f.blocks[b].phis.iter_mut().find(|i| i.result.as_deref() == Some(&name)).unwrap();
        slot.kind = InstKind::Phi { incoming };
        Operand::Var(name)
    }
}

/// Full normal form: unreachable blocks removed, trivial phis folded,
/// loops normalized, loop-closed SSA.
pub fn normalize(f: &Function) -> Result<Function, GsaError> {
    let mut g = f.clone();
    remove_unreachable(&mut g);
    if !Analysis::new(&g).reducible {
        return Err(GsaError::Irreducible);
    }
    remove_trivial_phis(&mut g, None);
    normalize_loops(&mut g)?;
    let a = Analysis::new(&g);
    Ok(to_lcssa(&g, &a.loops))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::{run_function, DEFAULT_FUEL};
    use crate::ir::{parse_module, validate, Module};

    fn normalized(text: &str) -> (Module, Module) {
        let m = parse_module(text).unwrap();
        let mut n = m.clone();
        for f in &mut n.functions {
            *f = normalize(f).unwrap();
        }
        let errs: Vec<_> = validate(&n).into_iter().filter(|d| d.is_error()).collect();
        assert!(errs.is_empty(), "{errs:?}\n{}", crate::ir::print_module(&n));
        (m, n)
    }

    const TWO_LATCH_TWO_EXIT: &str = "func @f(%n: i32, %k: i32) -> i32 {
e:
  %c0 = icmp gt %n, 100
  br %c0, h, h
h:
  %i = phi [e: 0], [l1: %a], [l2: %b]
  %c = icmp lt %i, %n
  br %c, body, out
body:
  %odd = and %i, 1
  %t = icmp eq %odd, 1
  br %t, l1, l2
l1:
  %a = add %i, 1
  %q = icmp eq %a, %k
  br %q, out, h
l2:
  %b = add %i, 3
  jmp h
out:
  %r = phi [h: %i], [l1: %a]
  %z = add %r, %i
  ret %z
}";

    #[test]
    fn loop_shape_after_normalization() {
        let (m, n) = normalized(TWO_LATCH_TWO_EXIT);
        let f = &n.functions[0];
        let a = Analysis::new(f);
        assert_eq!(a.loops.loops.len(), 1);
        let l = &a.loops.loops[0];
        assert_eq!(l.latches.len(), 1);
        for &e in &l.exits {
            assert_eq!(a.cfg.preds[e].len(), 1);
        }
        for args in [[0, 0], [5, 3], [7, 100], [6, 4]] {
            assert_eq!(
                run_function(&m, "f", &args, DEFAULT_FUEL).unwrap().observable(),
                run_function(&n, "f", &args, DEFAULT_FUEL).unwrap().observable()
            );
        }
    }

    #[test]
    fn outside_uses_go_through_exit_phis() {
        let (_, n) = normalized(TWO_LATCH_TWO_EXIT);
        let f = &n.functions[0];
        let a = Analysis::new(f);
        let l = &a.loops.loops[0];
        let defs = f.def_sites();
        for (bi, b) in f.blocks.iter().enumerate() {
            if l.contains(bi) {
                continue;
            }
            for inst in b.instructions() {
                let reads_exit_edge = matches!(inst.kind, InstKind::Phi { .. }) && a.cfg.preds[bi].len() == 1;
                for v in inst.used_vars() {
                    if let Some(d) = defs.get(v) {
                        assert!(reads_exit_edge || !l.contains(d.block), "`{v}` escapes the loop in `{inst}`");
                    }
                }
            }
        }
    }

    #[test]
    fn loop_free_function_is_unchanged() {
        let text = "func @f(%p: i1) -> i32 {\nb0:\n br %p, b1, b2\nb1:\n jmp b3\nb2:\n jmp b3\nb3:\n %x = phi [b1: 1], [b2: 2]\n ret %x\n}";
        let (m, n) = normalized(text);
        assert_eq!(m, n);
    }

    #[test]
    fn irreducible_is_rejected() {
        let text = "func @f(%p: i1) -> i32 {\nb0:\n br %p, b1, b2\nb1:\n jmp b2\nb2:\n br %p, b1, b3\nb3:\n ret 0\n}";
        let m = parse_module(text).unwrap();
        assert_eq!(normalize(&m.functions[0]), Err(GsaError::Irreducible));
    }
}
