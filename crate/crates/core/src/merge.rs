//! Detection of structurally identical outlined functions.
//!
//! Two functions are equivalent when one is the other under a renaming of
//! parameters, blocks and variables. The canonical form names parameters
//! by position, blocks by reverse postorder and other definitions in
//! order of appearance, so equivalence is equality of canonical forms.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, HashMap};
use std::hash::{Hash, Hasher};

use serde::Serialize;

use crate::analysis::Cfg;
use crate::ir::{print_function, Function, InstKind, Instruction, Operand};
use crate::outline::OutlinedSlice;

/// `f` with every name replaced by its canonical one.
pub fn canonical_form(f: &Function) -> Function {
    let cfg = Cfg::new(f);
    let order = cfg.reverse_postorder(0);
    let labels: HashMap<&str, String> =
        order.iter().enumerate().map(|(i, &b)| (f.blocks[b].label.as_str(), format!("b{i}"))).collect();
    let mut vars: HashMap<String, String> = HashMap::new();
    for (i, p) in f.params.iter().enumerate() {
        vars.insert(p.name.clone(), format!("p{i}"));
    }
    let mut next = 0;
    for &b in &order {
        for inst in f.blocks[b].instructions() {
            if let Some(r) = &inst.result {
                vars.entry(r.clone()).or_insert_with(|| {
                    next += 1;
                    format!("v{}", next - 1)
                });
            }
        }
    }
    let rename = |v: &str| vars.get(v).cloned().unwrap_or_else(|| v.to_string());
    let relabel = |l: &str| labels.get(l).cloned().unwrap_or_else(|| l.to_string());
    let mut out = Function {
        name: "_".into(),
        params: f.params.iter().map(|p| crate::ir::Param { name: rename(&p.name), ty: p.ty }).collect(),
        ret_ty: f.ret_ty,
        blocks: Vec::with_capacity(order.len()),
        idempotent: f.idempotent,
    };
    for &b in &order {
        let mut nb = f.blocks[b].clone();
        nb.label = relabel(&nb.label);
        for inst in nb.instructions_mut() {
            canon_inst(inst, &rename, &relabel);
        }
        out.blocks.push(nb);
    }
    out
}

fn canon_inst(inst: &mut Instruction, rename: &dyn Fn(&str) -> String, relabel: &dyn Fn(&str) -> String) {
    if let Some(r) = &inst.result {
        inst.result = Some(rename(r));
    }
    inst.rename_uses(&mut |v| Some(Operand::Var(rename(v))));
    if let InstKind::Gamma { gate, .. } | InstKind::Mu { gate, .. } | InstKind::Eta { gate, .. } = &mut inst.kind {
        gate.rename(&mut |p: &str| Some(rename(p)));
    }
    match &mut inst.kind {
        InstKind::Jmp { target } => *target = relabel(target),
        InstKind::Br { then_bb, else_bb, .. } => {
            *then_bb = relabel(then_bb);
            *else_bb = relabel(else_bb);
        }
        InstKind::Phi { incoming } => {
            for (l, _) in incoming.iter_mut() {
                *l = relabel(l);
            }
            incoming.sort_by_key(|(l, _)| l[1..].parse::<usize>().unwrap_or(usize::MAX));
        }
        InstKind::Mu { init, iter, .. } => {
            init.0 = relabel(&init.0);
            iter.0 = relabel(&iter.0);
        }
        _ => {}
    }
}

fn canonical_text(f: &Function) -> String {
    print_function(&canonical_form(f))
}

pub fn structural_hash(f: &Function) -> u64 {
    let mut h = DefaultHasher::new();
    canonical_text(f).hash(&mut h);
    h.finish()
}

pub fn equivalent(f: &Function, g: &Function) -> bool {
    canonical_text(f) == canonical_text(g)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MergeGroup {
    /// Lexicographically smallest member name; the function that is kept.
    pub canonical: String,
    /// Indices into the slice list, in input order.
    pub members: Vec<usize>,
    pub hash: u64,
}

/// Partition `slices` into classes of equivalent functions, in order of
/// first appearance. Hash buckets are split by exact comparison.
pub fn group_slices(slices: &[OutlinedSlice]) -> Vec<MergeGroup> {
    let texts: Vec<String> = slices.iter().map(|s| canonical_text(&s.new_function)).collect();
    let mut buckets: BTreeMap<(u64, usize), Vec<usize>> = BTreeMap::new();
    let mut first_seen: HashMap<u64, Vec<(usize, usize)>> = HashMap::new();
    for (i, t) in texts.iter().enumerate() {
        let mut h = DefaultHasher::new();
        t.hash(&mut h);
        let h = h.finish();
        let reps = first_seen.entry(h).or_default();
        let key = match reps.iter().find(|(_, rep)| texts[*rep] == *t) {
            Some(&(k, _)) => k,
            None => {
                reps.push((i, i));
                i
            }
        };
        buckets.entry((h, key)).or_default().push(i);
    }
    let mut groups: Vec<MergeGroup> = buckets
        .into_iter()
        .map(|((hash, _), members)| {
            let canonical = members.iter().map(|&i| &slices[i].new_function.name).min().unwrap().clone();
            MergeGroup { canonical, members, hash }
        })
        .collect();
    groups.sort_by_key(|g| g.members[0]);
    groups
}
