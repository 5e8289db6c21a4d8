//! Extraction of a legal slice into a standalone function.
//!
//! The outlined CFG keeps the region blocks, plus any non-region block whose
//! branch decides between two region blocks. Each kept block's successors
//! are found by projecting parent paths onto the kept set: a branch side
//! that is kept is used as is, and otherwise the walk through non-kept
//! blocks must reach at most one kept block. Edges into the header of the
//! criterion's own loop are never followed, so the outlined function
//! computes a single iteration of that loop.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::hash::{Hash, Hasher};

use indexmap::IndexSet;
use serde::Serialize;
use thiserror::Error;

use crate::analysis::{first_dominator, Analysis, Cfg, DomTree};
use crate::gsa::{remove_trivial_phis, GsaForm};
use crate::ir::{
    print_function, BasicBlock, BinOp, DefSite, Function, GateExpr, InstKind, Instruction, Module, Operand, Param,
    Slot, Type,
};
use crate::slice::{Legality, RejectReason, SliceCandidate, SliceContext};

/// Deferred replacement of the criterion's definition by a call.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct CallRewrite {
    pub parent: String,
    pub block: String,
    /// Index of the criterion in the block body.
    pub position: usize,
    pub result: String,
    pub callee: String,
    pub args: Vec<String>,
    /// Digest of the parent's text when the rewrite was recorded.
    pub fingerprint: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutlinedSlice {
    pub new_function: Function,
    pub parent: String,
    pub criterion: String,
    pub call_rewrite: CallRewrite,
    /// Instructions of `new_function`, not counting the final `ret`.
    pub instr_count: usize,
    pub param_count: usize,
    /// Slice variables; used to detect slices contained in others.
    pub nodes: IndexSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OutlineError {
    #[error("slice rejected ({reason}): {detail}")]
    Rejected { reason: RejectReason, detail: String },
    #[error("outlined CFG cannot be built: {0}")]
    Unbuildable(String),
    #[error("rewrite of `@{0}` is stale: the function changed after outlining")]
    StaleRewrite(String),
    #[error("unknown function `@{0}`")]
    UnknownFunction(String),
}

/// Digest of a function's printed form.
pub fn fingerprint(f: &Function) -> u64 {
    let mut h = DefaultHasher::new();
    print_function(f).hash(&mut h);
    h.finish()
}

/// Edges of the slice CFG by transposition and attraction: parent edges
/// inside `region` are kept, and an edge `b0 -> b1` entering the region from
/// `b0` outside it becomes `fd(b0) -> b1`.
pub fn reconstruct_cfg(region: &[usize], cfg: &Cfg, dt: &DomTree) -> BTreeSet<(usize, usize)> {
    let mut in_region = vec![false; cfg.len()];
    for &b in region {
        in_region[b] = true;
    }
    let mut edges = BTreeSet::new();
    for b0 in 0..cfg.len() {
        for &b1 in &cfg.succs[b0] {
            if !in_region[b1] {
                continue;
            }
            if in_region[b0] {
                edges.insert((b0, b1));
            } else if let Some(fd) = first_dominator(dt, &in_region, b0) {
                edges.insert((fd, b1));
            }
        }
    }
    edges
}

/// Per-function state for outlining many slices of one parent.
pub struct Outliner<'a> {
    pub module: &'a Module,
    pub form: &'a GsaForm,
    pub ctx: SliceContext<'a>,
    pub fingerprint: u64,
    n_phis: HashMap<&'a str, (usize, usize)>,
    types: HashMap<String, Type>,
}

impl<'a> Outliner<'a> {
    pub fn new(module: &'a Module, form: &'a GsaForm) -> Self {
        let mut n_phis = HashMap::new();
        for (bi, b) in form.normalized.blocks.iter().enumerate() {
            for (pi, phi) in b.phis.iter().enumerate() {
                if let Some(r) = &phi.result {
                    n_phis.insert(r.as_str(), (bi, pi));
                }
            }
        }
        Outliner {
            module,
            form,
            ctx: SliceContext::new(&form.gsa),
            fingerprint: fingerprint(&form.normalized),
            n_phis,
            types: form.gsa.var_types(&|c| module.callee_ret(c)),
        }
    }

    pub fn analysis(&self) -> &Analysis {
        &self.ctx.analysis
    }
}

/// `<parent>.slice.<criterion>`, suffixed to avoid the names in `taken`.
pub fn outlined_name(parent: &str, criterion: &str, taken: &HashSet<String>) -> String {
    let base = format!("{parent}.slice.{criterion}");
    if !taken.contains(&base) {
        return base;
    }
    (1..).map(|i| format!("{base}.{i}")).find(|n| !taken.contains(n)).unwrap()
}

struct Projection {
    kept: Vec<bool>,
    /// For each non-kept block, kept blocks reachable through non-kept blocks.
    reach: Vec<BTreeSet<usize>>,
    excluded: Option<usize>,
}

impl Projection {
    fn edge_ok(&self, to: usize) -> bool {
        Some(to) != self.excluded
    }

    fn side(&self, s: usize) -> BTreeSet<usize> {
        if !self.edge_ok(s) {
            BTreeSet::new()
        } else if self.kept[s] {
            BTreeSet::from([s])
        } else {
            self.reach[s].clone()
        }
    }

    fn compute(cfg: &Cfg, kept: Vec<bool>, excluded: Option<usize>) -> Self {
        let n = cfg.len();
        let mut p = Projection { kept, reach: vec![BTreeSet::new(); n], excluded };
        loop {
            let mut changed = false;
            for y in (0..n).rev() {
                if p.kept[y] {
                    continue;
                }
                let mut acc = p.reach[y].clone();
                for &s in &cfg.succs[y] {
                    acc.extend(p.side(s));
                }
                if acc.len() != p.reach[y].len() {
                    p.reach[y] = acc;
                    changed = true;
                }
            }
            if !changed {
                return p;
            }
        }
    }

    /// A non-kept block below `s` whose branch separates kept targets.
    fn decision_point(&self, cfg: &Cfg, s: usize) -> Option<usize> {
        let mut y = s;
        let mut seen = HashSet::new();
        loop {
            if !seen.insert(y) {
                return None;
            }
            let sides: Vec<(usize, BTreeSet<usize>)> = cfg.succs[y]
                .iter()
                .map(|&t| (t, self.side(t)))
                .filter(|(_, set)| !set.is_empty())
                .collect();
            if sides.len() >= 2 && sides.iter().any(|(_, set)| *set != sides[0].1) {
                return Some(y);
            }
            y = sides.iter().find(|(t, set)| set.len() > 1 && !self.kept[*t] && !seen.contains(t))?.0;
        }
    }
}

/// Build the outlined function for a legal candidate. `name` is the new
/// function's name.
pub fn outline_slice(ox: &Outliner, cand: &SliceCandidate, name: &str) -> Result<OutlinedSlice, OutlineError> {
    if let Legality::Rejected { reason, detail } = &cand.legality {
        return Err(OutlineError::Rejected { reason: *reason, detail: detail.clone() });
    }
    let g = &ox.form.gsa;
    let n = &ox.form.normalized;
    let a = ox.analysis();
    let cfg = &a.cfg;
    let crit = cand.criterion.as_str();
    let crit_site = *ox.ctx.defs.get(crit).ok_or_else(|| OutlineError::Unbuildable(format!("`%{crit}` undefined")))?;
    let crit_block = crit_site.block;
    let Slot::Body(crit_pos) = crit_site.slot else {
        return Err(OutlineError::Unbuildable("criterion is not a body instruction".into()));
    };
    let excluded = a.loops.innermost[crit_block].map(|l| a.loops.loops[l].header);
    let crit_depth = a.loops.depth[crit_block];
    let bad = |m: String| OutlineError::Unbuildable(m);

    // Grow the kept set until every branch side projects to one block.
    let mut kept = vec![false; g.blocks.len()];
    for &b in &cand.region {
        kept[b] = true;
    }
    let proj = loop {
        let p = Projection::compute(cfg, kept.clone(), excluded);
        let mut grow = None;
        'scan: for r in (0..g.blocks.len()).filter(|&r| p.kept[r] && r != crit_block) {
            for &s in &cfg.succs[r] {
                if p.side(s).len() > 1 {
                    grow = Some(p.decision_point(cfg, s).ok_or_else(|| bad("no decision point".into()))?);
                    break 'scan;
                }
            }
        }
        match grow {
            Some(y) => kept[y] = true,
            None => break p,
        }
    };

    // Parameters: the stop set, then branch predicates that are neither
    // slice nodes nor inputs but are available at the call site.
    let mut params: IndexSet<String> = cand.inputs.iter().cloned().collect();
    let available_at_call = |p: &str| -> bool {
        if g.is_param(p) {
            return true;
        }
        let Some(site) = ox.ctx.defs.get(p) else { return false };
        let before = site.block != crit_block
            || match site.slot {
                Slot::Phi(_) => true,
                Slot::Body(i) => i < crit_pos,
            };
        before && a.dom.dominates(site.block, crit_block) && a.loops.depth[site.block] <= crit_depth
    };

    // Successors and terminators of kept blocks.
    let kept_list: Vec<usize> = (0..g.blocks.len()).filter(|&b| kept[b]).collect();
    let mut succ_of: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut terms: HashMap<usize, Terminator> = HashMap::new();
    for &r in &kept_list {
        if r == crit_block {
            terms.insert(r, Terminator::Ret);
            succ_of.insert(r, vec![]);
            continue;
        }
        let one = |set: BTreeSet<usize>| -> Result<Option<usize>, OutlineError> {
            match set.len() {
                0 => Ok(None),
                1 => Ok(set.into_iter().next()),
                _ => Err(OutlineError::Unbuildable("ambiguous projection".into())),
            }
        };
        let t = match &g.blocks[r].terminator.kind {
            InstKind::Jmp { target } => {
                let s = g.block_index()[target.as_str()];
                one(proj.side(s))?.map(Terminator::Jmp)
            }
            InstKind::Br { cond, then_bb, else_bb } => {
                let idx = g.block_index();
                let st = one(proj.side(idx[then_bb.as_str()]))?;
                let se = one(proj.side(idx[else_bb.as_str()]))?;
                match (st, se) {
                    (None, None) => None,
                    (Some(x), None) | (None, Some(x)) => Some(Terminator::Jmp(x)),
                    (Some(x), Some(y)) if x == y => Some(Terminator::Jmp(x)),
                    (Some(x), Some(y)) => {
                        if let Operand::Var(p) = cond {
                            if !cand.graph.nodes.contains(p) && !params.contains(p) {
                                if !available_at_call(p) {
                                    return Err(bad(format!("branch predicate `%{p}` is unavailable at the call")));
                                }
                                params.insert(p.clone());
                            }
                        }
                        Some(Terminator::Br(cond.clone(), x, y))
                    }
                }
            }
            _ => None,
        };
        let t = t.ok_or_else(|| bad(format!("block `{}` leads nowhere", g.blocks[r].label)))?;
        succ_of.insert(
            r,
            match &t {
                Terminator::Jmp(x) => vec![*x],
                Terminator::Br(_, x, y) => vec![*x, *y],
                Terminator::Ret => vec![],
            },
        );
        terms.insert(r, t);
    }

    // Every kept block must be reachable from the region entry.
    let mut reach = HashSet::from([cand.entry]);
    let mut stack = vec![cand.entry];
    while let Some(b) = stack.pop() {
        for &s in &succ_of[&b] {
            if reach.insert(s) {
                stack.push(s);
            }
        }
    }
    if let Some(&u) = kept_list.iter().find(|b| !reach.contains(b)) {
        return Err(bad(format!("block `{}` is unreachable in the slice", g.blocks[u].label)));
    }

    // Parent predecessors covered by each outlined edge `p -> t`.
    let mut covered: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for &p in &kept_list {
        for &s in &cfg.succs[p] {
            if !proj.edge_ok(s) {
                continue;
            }
            if proj.kept[s] {
                covered.entry((p, s)).or_default().push(p);
                continue;
            }
            let side = proj.side(s);
            let Some(&t) = side.iter().next() else { continue };
            // non-kept blocks reachable from s that jump straight into t
            let mut seen = HashSet::from([s]);
            let mut st = vec![s];
            while let Some(y) = st.pop() {
                for &z in &cfg.succs[y] {
                    if !proj.edge_ok(z) {
                        continue;
                    }
                    if z == t {
                        covered.entry((p, t)).or_default().push(y);
                    } else if !proj.kept[z] && seen.insert(z) {
                        st.push(z);
                    }
                }
            }
        }
    }
    let mut clone_preds: HashMap<usize, Vec<usize>> = HashMap::new();
    for &p in &kept_list {
        for &s in &succ_of[&p] {
            let v = clone_preds.entry(s).or_default();
            if !v.contains(&p) {
                v.push(p);
            }
        }
    }

    // Names.
    let label_of = |b: usize| format!("{}.{}.slice.{}", g.name, g.blocks[b].label, crit);
    let mut var_taken: HashSet<String> = HashSet::new();
    let mut fresh = |base: &str| g.fresh_var(base, &mut var_taken);
    let entry = cand.entry;
    let needs_prologue = clone_preds.get(&entry).is_some_and(|v| !v.is_empty());
    let prologue_label = {
        let mut taken: HashSet<String> = kept_list.iter().map(|&b| label_of(b)).collect();
        let base = format!("{}.prologue.slice.{}", g.name, crit);
        let mut l = base.clone();
        let mut i = 1;
        while !taken.insert(l.clone()) {
            l = format!("{base}.{i}");
            i += 1;
        }
        l
    };

    let mut subst: HashMap<String, Operand> = HashMap::new();
    let mut blocks: Vec<BasicBlock> = Vec::new();
    let order: Vec<usize> = std::iter::once(entry).chain(kept_list.iter().copied().filter(|&b| b != entry)).collect();
    for &b in &order {
        let gb = &g.blocks[b];
        let mut nb = BasicBlock::new(label_of(b), Instruction::jmp("_"));
        let preds = clone_preds.get(&b).cloned().unwrap_or_default();
        for inst in &gb.phis {
            let Some(r) = inst.result.as_deref() else { continue };
            if !cand.graph.nodes.contains(r) {
                continue;
            }
            if b == entry && preds.is_empty() {
                lower_at_entry(inst, &mut nb.body, &mut subst, &mut fresh);
                continue;
            }
            let Some(&(nbk, npi)) = ox.n_phis.get(r) else { continue }; // γ-chain intermediate
            let nphi = &n.blocks[nbk].phis[npi];
            let inc = nphi.incoming();
            let value_from = |parents: &[usize]| -> Result<Operand, OutlineError> {
                let mut vals: Vec<&Operand> = Vec::new();
                for &pp in parents {
                    let lab = &n.blocks[pp].label;
                    if let Some((_, v)) = inc.iter().find(|(l, _)| *l == lab) {
                        if !vals.contains(v) {
                            vals.push(v);
                        }
                    }
                }
                match vals.as_slice() {
                    [v] => Ok((*v).clone()),
                    [] => Err(OutlineError::Unbuildable(format!("no incoming value for `%{r}`"))),
                    _ => Err(OutlineError::Unbuildable(format!("`%{r}` merges distinct values on one edge"))),
                }
            };
            let mut incoming = Vec::new();
            let mut covered_here: Vec<usize> = Vec::new();
            for &p in &preds {
                let parents = covered.get(&(p, b)).cloned().unwrap_or_default();
                covered_here.extend(&parents);
                incoming.push((label_of(p), value_from(&parents)?));
            }
            if b == entry {
                let outside: Vec<usize> =
                    cfg.preds[b].iter().copied().filter(|pp| !covered_here.contains(pp)).collect();
                incoming.insert(0, (prologue_label.clone(), value_from(&outside)?));
            }
            nb.phis.push(Instruction::new(r, InstKind::Phi { incoming }));
        }
        for (i, inst) in gb.body.iter().enumerate() {
            let Some(r) = inst.result.as_deref() else { continue };
            if cand.graph.nodes.contains(r) && !(b == crit_block && i > crit_pos) {
                nb.body.push(inst.clone());
            }
        }
        nb.terminator = match &terms[&b] {
            Terminator::Ret => Instruction::ret(Operand::var(crit)),
            Terminator::Jmp(t) => Instruction::jmp(label_of(*t)),
            Terminator::Br(c, x, y) => Instruction::effect(InstKind::Br {
                cond: c.clone(),
                then_bb: label_of(*x),
                else_bb: label_of(*y),
            }),
        };
        blocks.push(nb);
    }
    if needs_prologue {
        blocks.insert(0, BasicBlock::new(prologue_label.clone(), Instruction::jmp(label_of(entry))));
    }
    if !subst.is_empty() {
        for b in &mut blocks {
            for inst in b.instructions_mut() {
                inst.rename_uses(&mut |v| subst.get(v).cloned());
            }
        }
    }

    let ty = |v: &str| ox.types.get(v).copied().unwrap_or(Type::I32);
    let mut f = Function {
        name: name.to_string(),
        params: params.iter().map(|p| Param { name: p.clone(), ty: ty(p) }).collect(),
        ret_ty: ty(crit),
        blocks,
        idempotent: true,
    };
    remove_trivial_phis(&mut f, None);

    let instr_count = f.instruction_count() - 1;
    let param_count = f.params.len();
    let call_rewrite = CallRewrite {
        parent: g.name.clone(),
        block: n.blocks[crit_block].label.clone(),
        position: crit_pos,
        result: crit.to_string(),
        callee: name.to_string(),
        args: params.iter().cloned().collect(),
        fingerprint: ox.fingerprint,
    };
    Ok(OutlinedSlice {
        new_function: f,
        parent: g.name.clone(),
        criterion: crit.to_string(),
        call_rewrite,
        instr_count,
        param_count,
        nodes: cand.graph.nodes.clone(),
    })
}

enum Terminator {
    Ret,
    Jmp(usize),
    Br(Operand, usize, usize),
}

/// A merge at the outlined entry has no predecessors: γ becomes a `select`
/// over its materialized gate, and single-valued merges become substitutions.
fn lower_at_entry(
    inst: &Instruction,
    out: &mut Vec<Instruction>,
    subst: &mut HashMap<String, Operand>,
    fresh: &mut dyn FnMut(&str) -> String,
) {
    let r = inst.result.clone().unwrap_or_default();
    match &inst.kind {
        InstKind::Gamma { gate, if_true, if_false } => {
            if if_true == if_false {
                subst.insert(r, if_true.clone());
                return;
            }
            match materialize(gate, &r, out, fresh) {
                Operand::Imm(c) => {
                    subst.insert(r, if c != 0 { if_true.clone() } else { if_false.clone() });
                }
                cond => out.push(Instruction::new(
                    r,
                    InstKind::Select { cond, if_true: if_true.clone(), if_false: if_false.clone() },
                )),
            }
        }
        InstKind::Eta { value, .. } => {
            subst.insert(r, value.clone());
        }
        InstKind::Phi { incoming } if !incoming.is_empty() => {
            subst.insert(r, incoming[0].1.clone());
        }
        InstKind::Mu { init, .. } => {
            subst.insert(r, init.1.clone());
        }
        _ => {}
    }
}

/// Emit `i1` instructions computing `gate`; constants are folded.
fn materialize(gate: &GateExpr, base: &str, out: &mut Vec<Instruction>, fresh: &mut dyn FnMut(&str) -> String) -> Operand {
    match gate {
        GateExpr::True => Operand::Imm(1),
        GateExpr::Pred(p) => Operand::var(p),
        GateExpr::Not(x) => match materialize(x, base, out, fresh) {
            Operand::Imm(c) => Operand::Imm((c == 0) as i32),
            v => {
                let name = fresh(&format!("{base}.gate"));
                out.push(Instruction::new(name.clone(), InstKind::Not { operand: v }));
                Operand::Var(name)
            }
        },
        GateExpr::And(xs) | GateExpr::Or(xs) => {
            let is_and = matches!(gate, GateExpr::And(_));
            let (unit, zero) = if is_and { (1, 0) } else { (0, 1) };
            let mut acc: Option<Operand> = None;
            for x in xs {
                match materialize(x, base, out, fresh) {
                    Operand::Imm(c) if (c != 0) as i32 == zero => return Operand::Imm(zero),
                    Operand::Imm(_) => {}
                    v => {
                        acc = Some(match acc {
                            None => v,
                            Some(prev) => {
                                let name = fresh(&format!("{base}.gate"));
                                let op = if is_and { BinOp::And } else { BinOp::Or };
                                out.push(Instruction::new(name.clone(), InstKind::Binary { op, lhs: prev, rhs: v }));
                                Operand::Var(name)
                            }
                        })
                    }
                }
            }
            acc.unwrap_or(Operand::Imm(unit))
        }
    }
}

/// Replace each criterion definition with a call, all against the same
/// parent state. Every rewrite must carry the parent's current fingerprint.
pub fn apply_rewrites(m: &mut Module, rewrites: &[&CallRewrite]) -> Result<(), OutlineError> {
    let mut checked: HashSet<&str> = HashSet::new();
    for rw in rewrites {
        let f = m.function(&rw.parent).ok_or_else(|| OutlineError::UnknownFunction(rw.parent.clone()))?;
        if checked.insert(&rw.parent) && fingerprint(f) != rw.fingerprint {
            return Err(OutlineError::StaleRewrite(rw.parent.clone()));
        }
        if rw.fingerprint != rewrites.iter().find(|o| o.parent == rw.parent).unwrap().fingerprint {
            return Err(OutlineError::StaleRewrite(rw.parent.clone()));
        }
    }
    for rw in rewrites {
        let f = m.function_mut(&rw.parent).unwrap();
        let stale = || OutlineError::StaleRewrite(rw.parent.clone());
        let b = f.blocks.iter_mut().find(|b| b.label == rw.block).ok_or_else(stale)?;
        let inst = b.body.get_mut(rw.position).ok_or_else(stale)?;
        if inst.result.as_deref() != Some(rw.result.as_str()) {
            return Err(stale());
        }
        inst.kind = InstKind::Call { callee: rw.callee.clone(), args: rw.args.iter().map(Operand::var).collect() };
    }
    Ok(())
}

/// Apply one outlined slice to a module whose parent function is the
/// normalized form the slice was taken from.
pub fn apply_rewrite(m: &Module, o: &OutlinedSlice) -> Result<Module, OutlineError> {
    let mut out = m.clone();
    apply_rewrites(&mut out, &[&o.call_rewrite])?;
    if out.function(&o.new_function.name).is_none() {
        out.functions.push(o.new_function.clone());
    }
    Ok(out)
}

/// Location of `v` in `f`, when it is defined in a block body.
pub fn body_position(f: &Function, v: &str) -> Option<(usize, usize)> {
    match f.find_def(v)? {
        DefSite { block, slot: Slot::Body(i) } => Some((block, i)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::first_dominator;
    use crate::gsa::convert;
    use crate::interp::{eval_slice_value, run_function, SliceValue, DEFAULT_FUEL};
    use crate::ir::{parse_module, validate};
    use crate::slice::candidate;

    fn outline(text: &str, crit: &str) -> (Module, Module, OutlinedSlice) {
        let m = parse_module(text).unwrap();
        let f = &m.functions[0];
        let form = convert(f).unwrap();
        let ox = Outliner::new(&m, &form);
        let cand = candidate(&m, &ox.ctx, crit).unwrap();
        let name = outlined_name(&f.name, crit, &HashSet::new());
        let o = outline_slice(&ox, &cand, &name).unwrap();
        let mut n = m.clone();
        n.functions[0] = form.normalized.clone();
        let r = apply_rewrite(&n, &o).unwrap();
        let errs: Vec<_> = validate(&r).into_iter().filter(|d| d.is_error()).collect();
        assert!(errs.is_empty(), "{errs:?}\n{}", crate::ir::print_module(&r));
        (m, r, o)
    }

    #[test]
    fn single_add() {
        let (m, r, o) = outline("func @f(%a: i32, %b: i32) -> i32 {\nb0:\n %c = add %a, %b\n ret %c\n}", "c");
        assert_eq!(o.param_count, 2);
        assert_eq!(o.instr_count, 1);
        assert_eq!(o.new_function.params.iter().map(|p| p.name.as_str()).collect::<Vec<_>>(), vec!["a", "b"]);
        for args in [[1, 2], [-5, 9]] {
            assert_eq!(
                run_function(&m, "f", &args, DEFAULT_FUEL).unwrap().observable(),
                run_function(&r, "f", &args, DEFAULT_FUEL).unwrap().observable()
            );
        }
    }

    const LOOP: &str = "func @f(%N: i32, %x0: i32, %s0: i32) -> i32 {
bb0:
  jmp bb1
bb1:
  %x1 = phi [bb0: %x0], [bb4: %x2]
  %s1 = phi [bb0: %s0], [bb4: %s2]
  %p0 = icmp lt %x1, %N
  br %p0, bb2, bb5
bb2:
  %x2 = add %x1, 1
  %s2 = add %s1, %x2
  %p1 = icmp eq %x2, 5
  br %p1, bb3, bb4
bb3:
  jmp bb4
bb4:
  jmp bb1
bb5:
  %s3 = add %s1, 1
  ret %s3
}";

    #[test]
    fn whole_loop_slice_takes_only_parameters() {
        let (m, r, o) = outline(LOOP, "s3");
        let names: Vec<&str> = o.new_function.params.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names.len(), 3);
        for p in ["N", "x0", "s0"] {
            assert!(names.contains(&p));
        }
        for args in [[3, 0, 0], [0, 4, 1], [9, -2, 3]] {
            let want = eval_slice_value(&m, "f", "s3", &args, DEFAULT_FUEL).unwrap();
            let got = run_function(&r, &o.new_function.name, &args_for(&o, &["N", "x0", "s0"], &args), DEFAULT_FUEL)
                .unwrap();
            assert_eq!(SliceValue::Value(match got.outcome {
                crate::interp::Outcome::Value(v) => v,
                other => panic!("{other:?}"),
            }), want);
        }
    }

    fn args_for(o: &OutlinedSlice, names: &[&str], vals: &[i32]) -> Vec<i32> {
        o.new_function
            .params
            .iter()
            .map(|p| vals[names.iter().position(|n| *n == p.name).unwrap()])
            .collect()
    }

    #[test]
    fn inner_criterion_takes_the_mu() {
        let (_, _, o) = outline(LOOP, "x2");
        let names: Vec<&str> = o.new_function.params.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, vec!["x1"]);
        assert_eq!(o.instr_count, 1);
    }

    #[test]
    fn attraction_edges() {
        let text = "func @f(%a: i32) -> i32 {
BB0:
  %p0 = icmp gt %a, 0
  %q = icmp gt %a, 10
  br %p0, BB1, BB3
BB1:
  %p1 = icmp gt %a, 2
  br %p1, BB2, BB4
BB2:
  %v2 = add %a, 2
  %p2 = icmp gt %a, 5
  br %p2, BB5, BB6
BB3:
  jmp BB8
BB4:
  jmp BB8
BB5:
  %v5 = add %a, 5
  jmp BB9
BB6:
  br %q, BB9, BB7
BB7:
  jmp BB8
BB8:
  ret 0
BB9:
  %x0 = phi [BB5: %v5], [BB6: %v2]
  %x1 = add %x0, 1
  ret %x1
}";
        let m = parse_module(text).unwrap();
        let f = &m.functions[0];
        let a = Analysis::new(f);
        let region = [0, 1, 2, 5, 9];
        let in_region: Vec<bool> = (0..10).map(|b| region.contains(&b)).collect();
        assert_eq!(first_dominator(&a.dom, &in_region, 6), Some(2));
        let e = reconstruct_cfg(&region, &a.cfg, &a.dom);
        assert!(e.contains(&(5, 9)));
        assert!(e.contains(&(2, 9)));
        assert!(!e.iter().any(|&(_, t)| t == 8));
    }
}
