//! Gated SSA construction.
//!
//! Functions are first brought into loop normal form (see [`normalize`]).
//! Then, in place and keeping result names, each φ becomes a μ at a loop
//! header, an η in a dedicated loop-exit block, or a γ (chain) elsewhere.

mod gating;
mod normalize;

use std::collections::HashSet;

use thiserror::Error;

pub use gating::{build_gamma, edge_literal, gating_paths, GatingPath, GatingPathSet, DEFAULT_PATH_BUDGET};
pub use normalize::{normalize, normalize_loops, remove_unreachable, to_lcssa};
#[allow(unused_imports)]
pub(crate) use normalize::{remove_trivial_phis, replace_uses};

use crate::analysis::{Analysis, Cfg, Loop, LoopForest};
use crate::ir::{Function, GateExpr, InstKind, Instruction};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GsaError {
    #[error("irreducible control flow")]
    Irreducible,
    #[error("merge `{block}` has {paths} gating paths, over budget")]
    RegionTooLarge { block: String, paths: usize },
    #[error("block #{0} has no immediate dominator")]
    NoImmediateDominator(usize),
}

/// A function in loop normal form and its gated counterpart. Both have the
/// same blocks in the same order; `gsa` additionally defines the
/// intermediates of γ chains.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GsaForm {
    pub normalized: Function,
    pub gsa: Function,
}

/// Gate that keeps control inside `l`: the conjunction, over every exiting
/// branch, of the literal selecting the in-loop successor.
pub fn loop_gate(f: &Function, cfg: &Cfg, l: &Loop) -> GateExpr {
    let mut lits = Vec::new();
    for &b in &l.body {
        let exits: Vec<usize> = cfg.succs[b].iter().copied().filter(|s| !l.contains(*s)).collect();
        if exits.is_empty() {
            continue;
        }
        let stay = cfg.succs[b].iter().copied().find(|s| l.contains(*s));
        match stay.and_then(|s| edge_literal(f, b, s)) {
            Some(lit) => lits.push(lit),
            None if stay.is_none() => lits.push(GateExpr::True.negate()),
            None => {}
        }
    }
    GateExpr::and(lits)
}

/// μ instructions for the phis of a normalized loop header.
pub fn build_mu(f: &Function, cfg: &Cfg, loops: &LoopForest, header: usize) -> Vec<Instruction> {
    let Some(li) = loops.loop_of_header(header) else { return vec![] };
    let l = &loops.loops[li];
    let pre = cfg.preds[header].iter().copied().find(|p| !l.contains(*p));
    let (Some(pre), Some(&latch)) = (pre, l.latches.first()) else { return vec![] };
    let pre_label = &f.blocks[pre].label;
    let latch_label = &f.blocks[latch].label;
    let gate = loop_gate(f, cfg, l);
    f.blocks[header]
        .phis
        .iter()
        .map(|phi| {
            let inc = phi.incoming();
            let pick = |lab: &str| inc.iter().find(|(l, _)| *l == lab).map(|(_, v)| (*v).clone());
            match (pick(pre_label), pick(latch_label)) {
                (Some(i), Some(t)) => Instruction {
                    result: phi.result.clone(),
                    kind: InstKind::Mu {
                        init: (pre_label.clone(), i),
                        iter: (latch_label.clone(), t),
                        gate: gate.clone(),
                    },
                },
                _ => phi.clone(),
            }
        })
        .collect()
}

/// The loop `exit` leaves, if it is a dedicated exit block.
fn exited_loop(cfg: &Cfg, loops: &LoopForest, exit: usize) -> Option<usize> {
    let [p] = cfg.preds[exit][..] else { return None };
    loops.enclosing(p).into_iter().find(|&l| !loops.loops[l].contains(exit))
}

/// η instructions for the phis of a dedicated loop-exit block.
pub fn build_eta(f: &Function, cfg: &Cfg, loops: &LoopForest, exit: usize) -> Vec<Instruction> {
    if exited_loop(cfg, loops, exit).is_none() {
        return vec![];
    }
    let p = cfg.preds[exit][0];
    let gate = edge_literal(f, p, exit).unwrap_or(GateExpr::True);
    f.blocks[exit]
        .phis
        .iter()
        .map(|phi| {
            let v = phi.operands().first().map(|o| (*o).clone()).unwrap_or(crate::ir::Operand::Imm(0));
            Instruction { result: phi.result.clone(), kind: InstKind::Eta { value: v, gate: gate.clone() } }
        })
        .collect()
}

/// Normalize `f` and gate every φ.
pub fn convert(f: &Function) -> Result<GsaForm, GsaError> {
    convert_with_budget(f, DEFAULT_PATH_BUDGET)
}

pub fn convert_with_budget(f: &Function, budget: usize) -> Result<GsaForm, GsaError> {
    let n = normalize(f)?;
    let a = Analysis::new(&n);
    let mut g = n.clone();
    let mut taken: HashSet<String> = HashSet::new();
    for bi in 0..n.blocks.len() {
        if n.blocks[bi].phis.is_empty() {
            continue;
        }
        let new_phis = if a.loops.is_header(bi) {
            build_mu(&n, &a.cfg, &a.loops, bi)
        } else if exited_loop(&a.cfg, &a.loops, bi).is_some() {
            build_eta(&n, &a.cfg, &a.loops, bi)
        } else if a.cfg.preds[bi].len() < 2 {
            n.blocks[bi]
                .phis
                .iter()
                .map(|phi| {
                    let v = phi.operands()[0].clone();
                    Instruction {
                        result: phi.result.clone(),
                        kind: InstKind::Gamma { gate: GateExpr::True, if_true: v.clone(), if_false: v },
                    }
                })
                .collect()
        } else {
            let gps = gating_paths(&n, &a.cfg, &a.dom, bi, budget)?;
            let mut out = Vec::new();
            for phi in &n.blocks[bi].phis {
                out.extend(build_gamma(&gps, &n, phi, &mut |base| n.fresh_var(base, &mut taken)));
            }
            out
        };
        g.blocks[bi].phis = new_phis;
    }
    Ok(GsaForm { normalized: n, gsa: g })
}

/// GSA form of `f`.
pub fn to_gsa(f: &Function) -> Result<Function, GsaError> {
    convert(f).map(|g| g.gsa)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::{run_function, DEFAULT_FUEL};
    use crate::ir::{parse_module, validate, Module};

    const EXAMPLE: &str = "func @f(%N: i32, %x0: i32, %s0: i32) -> i32 {
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
    fn loop_example_gets_mu_and_eta() {
        let m = parse_module(EXAMPLE).unwrap();
        let g = to_gsa(&m.functions[0]).unwrap();
        let kinds: Vec<&str> = g
            .instructions()
            .filter(|i| i.is_phi_kind())
            .map(|i| match i.kind {
                InstKind::Mu { .. } => "mu",
                InstKind::Eta { .. } => "eta",
                InstKind::Gamma { .. } => "gamma",
                _ => "phi",
            })
            .collect();
        assert_eq!(kinds, vec!["mu", "mu", "eta"]);
        let eta = g.instructions().find(|i| matches!(i.kind, InstKind::Eta { .. })).unwrap();
        assert_eq!(eta.gate().unwrap().preds(), vec!["p0"]);
        let gm = Module { functions: vec![g], ..Default::default() };
        assert!(validate(&gm).iter().all(|d| !d.is_error()), "{:?}", validate(&gm));
        for args in [[3, 0, 0], [0, 0, 7], [10, 2, 1]] {
            assert_eq!(
                run_function(&m, "f", &args, DEFAULT_FUEL).unwrap().observable(),
                run_function(&gm, "f", &args, DEFAULT_FUEL).unwrap().observable()
            );
        }
    }

    #[test]
    fn three_way_merge_nests() {
        let text = "func @f(%a: i32) -> i32 {
b0:
  %p = icmp lt %a, 0
  br %p, b1, b2
b1:
  jmp m
b2:
  %q = icmp eq %a, 0
  br %q, b3, m
b3:
  jmp m
m:
  %x = phi [b1: 10], [b2: 20], [b3: 30]
  ret %x
}";
        let m = parse_module(text).unwrap();
        let g = to_gsa(&m.functions[0]).unwrap();
        let last = g.blocks.last().unwrap();
        assert_eq!(last.phis.len(), 2);
        assert_eq!(last.phis[1].result.as_deref(), Some("x"));
        let gm = Module { functions: vec![g], ..Default::default() };
        for a in [-4, 0, 9] {
            assert_eq!(
                run_function(&m, "f", &[a], DEFAULT_FUEL).unwrap().observable(),
                run_function(&gm, "f", &[a], DEFAULT_FUEL).unwrap().observable()
            );
        }
    }

    #[test]
    fn phi_free_function_is_unchanged() {
        let m = parse_module("func @f(%a: i32) -> i32 {\nb:\n %x = add %a, 1\n ret %x\n}").unwrap();
        assert_eq!(to_gsa(&m.functions[0]).unwrap(), m.functions[0]);
    }
}
