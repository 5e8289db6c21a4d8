//! Post-commit simplification of parent functions, iterated to a fixpoint.

use std::collections::{HashMap, HashSet};

use crate::analysis::Cfg;
use crate::gsa::{remove_trivial_phis, remove_unreachable};
use crate::ir::{Function, InstKind, Instruction, Operand};

/// Simplify `f`, treating every call as effectful.
pub fn cleanup(f: &Function) -> Function {
    cleanup_with(f, &|_| false)
}

/// Simplify `f`; calls to callees accepted by `pure_callee` may be deleted
/// when their results are unused.
pub fn cleanup_with(f: &Function, pure_callee: &dyn Fn(&str) -> bool) -> Function {
    let mut f = f.clone();
    loop {
        let mut changed = fold_branches(&mut f);
        changed |= remove_unreachable(&mut f);
        let phis = phi_count(&f);
        remove_trivial_phis(&mut f, None);
        changed |= phi_count(&f) != phis;
        changed |= forward_empty_blocks(&mut f);
        changed |= merge_chains(&mut f);
        changed |= eliminate_dead(&mut f, pure_callee);
        if !changed {
            return f;
        }
    }
}

fn phi_count(f: &Function) -> usize {
    f.blocks.iter().map(|b| b.phis.len()).sum()
}

fn drop_incoming(f: &mut Function, block: &str, from: &str) {
    if let Some(b) = f.blocks.iter_mut().find(|b| b.label == block) {
        for phi in &mut b.phis {
            if let InstKind::Phi { incoming } = &mut phi.kind {
                incoming.retain(|(l, _)| l != from);
            }
        }
    }
}

/// `br` on a constant or with equal targets becomes `jmp`.
fn fold_branches(f: &mut Function) -> bool {
    let mut changed = false;
    for bi in 0..f.blocks.len() {
        let InstKind::Br { cond, then_bb, else_bb } = &f.blocks[bi].terminator.kind else { continue };
        let (keep, drop) = match cond {
            _ if then_bb == else_bb => (then_bb.clone(), None),
            Operand::Imm(c) if *c != 0 => (then_bb.clone(), Some(else_bb.clone())),
            Operand::Imm(_) => (else_bb.clone(), Some(then_bb.clone())),
            Operand::Var(_) => continue,
        };
        f.blocks[bi].terminator = Instruction::jmp(keep);
        if let Some(d) = drop {
            let me = f.blocks[bi].label.clone();
            drop_incoming(f, &d, &me);
        }
        changed = true;
    }
    changed
}

/// Bypass a non-entry block that only jumps on. Its φs may survive only as
/// the incoming values of the target's φs on the bypassed edge.
fn forward_empty_blocks(f: &mut Function) -> bool {
    let mut changed = false;
    let mut bi = 1;
    while bi < f.blocks.len() {
        if try_forward(f, bi) {
            changed = true;
        }
        bi += 1;
    }
    changed
}

fn try_forward(f: &mut Function, e: usize) -> bool {
    let eb = &f.blocks[e];
    let InstKind::Jmp { target } = &eb.terminator.kind else { return false };
    if !eb.body.is_empty() || *target == eb.label {
        return false;
    }
    let target = target.clone();
    let cfg = Cfg::new(f);
    let idx = f.block_index();
    let t = idx[target.as_str()];
    let preds = cfg.preds[e].clone();
    if preds.is_empty() || preds.iter().any(|p| cfg.preds[t].contains(p)) {
        return false;
    }
    let e_label = eb.label.clone();
    let own: HashMap<String, Vec<(String, Operand)>> = eb
        .phis
        .iter()
        .filter_map(|p| match &p.kind {
            InstKind::Phi { incoming } => Some((p.result.clone()?, incoming.clone())),
            _ => None,
        })
        .collect();
    if own.len() != eb.phis.len() {
        return false;
    }
    // E's φs may only feed T's φs along the edge E -> T.
    for (bi, b) in f.blocks.iter().enumerate() {
        for inst in b.instructions() {
            let on_edge = bi == t && matches!(inst.kind, InstKind::Phi { .. });
            if on_edge {
                for (l, v) in inst.incoming() {
                    if l != e_label && v.as_var().is_some_and(|x| own.contains_key(x)) {
                        return false;
                    }
                }
            } else if inst.used_vars().iter().any(|x| own.contains_key(*x)) {
                return false;
            }
        }
    }
    let pred_labels: Vec<String> = preds.iter().map(|&p| f.blocks[p].label.clone()).collect();
    let mut new_phis = f.blocks[t].phis.clone();
    for phi in &mut new_phis {
        let InstKind::Phi { incoming } = &mut phi.kind else { return false };
        let Some(pos) = incoming.iter().position(|(l, _)| *l == e_label) else { continue };
        let (_, v) = incoming.remove(pos);
        for pl in &pred_labels {
            let val = match v.as_var().and_then(|x| own.get(x)) {
                Some(inc) => match inc.iter().find(|(l, _)| l == pl) {
                    Some((_, w)) => w.clone(),
                    None => return false,
                },
                None => v.clone(),
            };
            incoming.push((pl.clone(), val));
        }
    }
    f.blocks[t].phis = new_phis;
    f.blocks[e].phis.clear();
    for &p in &preds {
        f.blocks[p].terminator.rename_successor(&e_label, &target);
    }
    true
}

/// Append a block to its unique predecessor when that predecessor jumps
/// straight to it.
fn merge_chains(f: &mut Function) -> bool {
    let cfg = Cfg::new(f);
    let mut removed = vec![false; f.blocks.len()];
    let idx: HashMap<String, usize> = f.blocks.iter().enumerate().map(|(i, b)| (b.label.clone(), i)).collect();
    let mut renames: Vec<(String, String)> = Vec::new();
    for a in 0..f.blocks.len() {
        if removed[a] {
            continue;
        }
        loop {
            let InstKind::Jmp { target } = &f.blocks[a].terminator.kind else { break };
            let b = idx[target.as_str()];
            if b == 0 || b == a || cfg.preds[b].len() != 1 || !f.blocks[b].phis.is_empty() || removed[b] {
                break;
            }
            let bb = std::mem::replace(&mut f.blocks[b].body, Vec::new());
            let term = f.blocks[b].terminator.clone();
            f.blocks[a].body.extend(bb);
            f.blocks[a].terminator = term;
            renames.push((f.blocks[b].label.clone(), f.blocks[a].label.clone()));
            removed[b] = true;
        }
    }
    if renames.is_empty() {
        return false;
    }
    // a successor's φ edge from a merged block now comes from its host
    let mut host: HashMap<String, String> = HashMap::new();
    for (from, to) in renames.iter().rev() {
        let final_to = host.get(to).cloned().unwrap_or_else(|| to.clone());
        host.insert(from.clone(), final_to);
    }
    for (from, _) in &renames {
        let dest = &host[from];
        for b in &mut f.blocks {
            for phi in &mut b.phis {
                phi.rename_incoming_label(from, dest);
            }
        }
    }
    let mut i = 0;
    f.blocks.retain(|_| {
        i += 1;
        !removed[i - 1]
    });
    true
}

/// Delete instructions that neither have effects nor feed anything live.
fn eliminate_dead(f: &mut Function, pure_callee: &dyn Fn(&str) -> bool) -> bool {
    let defs = f.def_sites();
    let mut live: HashSet<String> = HashSet::new();
    let mut work: Vec<String> = Vec::new();
    for inst in f.instructions() {
        if inst.result.is_none() || inst.has_side_effects(pure_callee) {
            for v in inst.used_vars() {
                if live.insert(v.to_string()) {
                    work.push(v.to_string());
                }
            }
            if let Some(r) = &inst.result {
                live.insert(r.clone());
            }
        }
    }
    while let Some(v) = work.pop() {
        let Some(site) = defs.get(v.as_str()) else { continue };
        for u in f.inst_at(*site).used_vars() {
            if live.insert(u.to_string()) {
                work.push(u.to_string());
            }
        }
    }
    drop(defs);
    let mut changed = false;
    for b in &mut f.blocks {
        for list in [&mut b.phis, &mut b.body] {
            let before = list.len();
            list.retain(|i| i.result.as_ref().is_none_or(|r| live.contains(r)));
            changed |= list.len() != before;
        }
    }
    changed
}
