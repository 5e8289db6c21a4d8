//! Gating paths from a merge block's immediate dominator and the γ
//! instructions derived from them.

use super::GsaError;
use crate::analysis::{Cfg, DomTree};
use crate::ir::{Function, GateExpr, InstKind, Instruction, Operand};

pub const DEFAULT_PATH_BUDGET: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GatingPath {
    /// Blocks from the immediate dominator up to and including the merge.
    pub blocks: Vec<usize>,
    /// Conjunction of branch outcomes along the path, in path order.
    pub condition: GateExpr,
}

impl GatingPath {
    /// The predecessor through which the path enters the merge.
    pub fn last_pred(&self) -> usize {
        self.blocks[self.blocks.len() - 2]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GatingPathSet {
    pub merge: usize,
    pub idom: usize,
    pub paths: Vec<GatingPath>,
}

/// Literal for taking the edge `from -> to`; `None` when the terminator does
/// not choose (a jump, or both branch targets equal).
pub fn edge_literal(f: &Function, from: usize, to: usize) -> Option<GateExpr> {
    let InstKind::Br { cond, then_bb, else_bb } = &f.blocks[from].terminator.kind else {
        return None;
    };
    if then_bb == else_bb {
        return None;
    }
    let on_then = *then_bb == f.blocks[to].label;
    let lit = match cond {
        Operand::Var(p) => GateExpr::pred(p.clone()),
        Operand::Imm(c) => {
            if *c != 0 {
                GateExpr::True
            } else {
                GateExpr::True.negate()
            }
        }
    };
    Some(if on_then { lit } else { lit.negate() })
}

/// All acyclic paths from `idom(merge)` to `merge`, ignoring back edges.
pub fn gating_paths(
    f: &Function,
    cfg: &Cfg,
    dt: &DomTree,
    merge: usize,
    budget: usize,
) -> Result<GatingPathSet, GsaError> {
    let idom = dt.immediate_dominator(merge).ok_or(GsaError::NoImmediateDominator(merge))?;
    let forward = |b: usize| cfg.succs[b].iter().copied().filter(move |&s| !dt.dominates(s, b));

    // Paths from each block to the merge, by reverse topological order.
    let n = cfg.len();
    let mut count = vec![0usize; n];
    count[merge] = 1;
    for &b in dt.order.iter().rev() {
        if b == merge || !dt.dominates(idom, b) {
            continue;
        }
        let mut c = 0usize;
        for s in forward(b) {
            c = c.saturating_add(count[s]);
        }
        count[b] = c;
    }
    if count[idom] > budget {
        return Err(GsaError::RegionTooLarge { block: f.blocks[merge].label.clone(), paths: count[idom] });
    }

    let mut paths = Vec::with_capacity(count[idom]);
    let mut stack: Vec<(usize, Vec<usize>, Vec<GateExpr>)> = vec![(idom, vec![idom], vec![])];
    while let Some((b, blocks, lits)) = stack.pop() {
        if b == merge {
            paths.push(GatingPath { blocks, condition: GateExpr::and(lits) });
            continue;
        }
        let succs: Vec<usize> = forward(b).filter(|&s| count[s] > 0).collect();
        for &s in succs.iter().rev() {
            let mut nb = blocks.clone();
            nb.push(s);
            let mut nl = lits.clone();
            if let Some(l) = edge_literal(f, b, s) {
                nl.push(l);
            }
            stack.push((s, nb, nl));
        }
    }
    Ok(GatingPathSet { merge, idom, paths })
}

impl GatingPathSet {
    /// Distinct incoming values of `phi` with the disjunction of the path
    /// conditions selecting each, ordered by their first predecessor's
    /// position in the block list.
    pub fn selections(&self, f: &Function, phi: &Instruction) -> Vec<(Operand, GateExpr)> {
        let incoming = phi.incoming();
        let mut groups: Vec<(usize, Operand, Vec<GateExpr>)> = Vec::new();
        for path in &self.paths {
            let pred = path.last_pred();
            let label = &f.blocks[pred].label;
            let Some((_, v)) = incoming.iter().find(|(l, _)| *l == label) else { continue };
            match groups.iter_mut().find(|(_, w, _)| w == *v) {
                Some(g) => {
                    g.0 = g.0.min(pred);
                    g.2.push(path.condition.clone());
                }
                None => groups.push((pred, (*v).clone(), vec![path.condition.clone()])),
            }
        }
        groups.sort_by_key(|g| g.0);
        groups.into_iter().map(|(_, v, conds)| (v, GateExpr::or(conds))).collect()
    }
}

/// γ instructions replacing `phi`. Several distinct values become a
/// right-nested chain whose intermediates are named by `fresh` and precede
/// the final instruction, which keeps the phi's result name.
pub fn build_gamma(
    gps: &GatingPathSet,
    f: &Function,
    phi: &Instruction,
    fresh: &mut dyn FnMut(&str) -> String,
) -> Vec<Instruction> {
    let result = phi.result.clone().unwrap_or_default();
    let sel = gps.selections(f, phi);
    match sel.len() {
        0 => {
            let v = phi.operands().first().map(|o| (*o).clone()).unwrap_or(Operand::Imm(0));
            vec![Instruction::new(result, InstKind::Gamma { gate: GateExpr::True, if_true: v.clone(), if_false: v })]
        }
        1 => {
            let v = sel[0].0.clone();
            vec![Instruction::new(result, InstKind::Gamma { gate: GateExpr::True, if_true: v.clone(), if_false: v })]
        }
        k => {
            let names: Vec<String> = (0..k - 1)
                .map(|i| if i == 0 { result.clone() } else { fresh(&format!("{result}.g{i}")) })
                .collect();
            let mut out = Vec::new();
            for i in (0..k - 1).rev() {
                let if_false = if i == k - 2 { sel[k - 1].0.clone() } else { Operand::var(&names[i + 1]) };
                out.push(Instruction::new(
                    names[i].clone(),
                    InstKind::Gamma { gate: sel[i].1.simplify(), if_true: sel[i].0.clone(), if_false },
                ));
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::Analysis;
    use crate::ir::parse_module;

    const FIG: &str = "func @f(%p0: i1, %p1: i1, %p2: i1, %x0: i32, %x1: i32) -> i32 {
B0:
  br %p0, B1, B4
B1:
  br %p1, B3, B2
B2:
  br %p2, B3, B4
B3:
  jmp B5
B4:
  jmp B5
B5:
  %x2 = phi [B3: %x0], [B4: %x1]
  ret %x2
}";

    #[test]
    fn four_paths_to_the_merge() {
        let m = parse_module(FIG).unwrap();
        let f = &m.functions[0];
        let a = Analysis::new(f);
        let gps = gating_paths(f, &a.cfg, &a.dom, 5, DEFAULT_PATH_BUDGET).unwrap();
        assert_eq!(gps.idom, 0);
        let conds: Vec<String> = gps.paths.iter().map(|p| p.condition.to_string()).collect();
        assert_eq!(conds, vec!["%p0 & %p1", "%p0 & !%p1 & %p2", "%p0 & !%p1 & !%p2", "!%p0"]);
    }

    #[test]
    fn gamma_gate_simplifies() {
        let m = parse_module(FIG).unwrap();
        let f = &m.functions[0];
        let a = Analysis::new(f);
        let gps = gating_paths(f, &a.cfg, &a.dom, 5, DEFAULT_PATH_BUDGET).unwrap();
        let g = build_gamma(&gps, f, &f.blocks[5].phis[0], &mut |s| s.to_string());
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].to_string(), "%x2 = gamma %x0, %x1 gate(%p0 & (%p1 | %p2))");
    }

    #[test]
    fn budget_is_enforced() {
        let m = parse_module(FIG).unwrap();
        let f = &m.functions[0];
        let a = Analysis::new(f);
        assert!(matches!(
            gating_paths(f, &a.cfg, &a.dom, 5, 3),
            Err(GsaError::RegionTooLarge { paths: 4, .. })
        ));
    }
}
