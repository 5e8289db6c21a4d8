//! Backward slices over GSA functions and their legality as idempotent
//! regions.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use indexmap::IndexSet;
use serde::Serialize;
use thiserror::Error;

use crate::analysis::{Analysis, DomTree};
use crate::ir::{BinOp, DefSite, Function, InstKind, Module, Mutability};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Data,
    Control,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependenceGraph {
    pub criterion: String,
    /// Slice variables in discovery order; the criterion comes first.
    pub nodes: IndexSet<String>,
    /// `(from, to, kind)`: `to` depends on `from`.
    pub edges: Vec<(String, String, EdgeKind)>,
    /// Variables where traversal halted, in discovery order.
    pub stop_set: IndexSet<String>,
    /// Dependences examined while building the graph.
    pub steps: u64,
}

/// Per-function facts shared by every slice of that function.
pub struct SliceContext<'f> {
    pub func: &'f Function,
    pub analysis: Analysis,
    pub defs: HashMap<&'f str, DefSite>,
}

impl<'f> SliceContext<'f> {
    pub fn new(func: &'f Function) -> Self {
        SliceContext { func, analysis: Analysis::new(func), defs: func.def_sites() }
    }

    /// Loop depth of the block defining `v`; parameters are at depth 0.
    pub fn depth(&self, v: &str) -> u32 {
        self.defs.get(v).map_or(0, |d| self.analysis.loops.depth[d.block])
    }

    fn is_mu(&self, v: &str) -> bool {
        self.defs.get(v).is_some_and(|d| matches!(self.func.inst_at(*d).kind, InstKind::Mu { .. }))
    }
}

/// Sparse backward dependence graph of `v`.
pub fn backward_slice(f: &Function, v: &str) -> DependenceGraph {
    backward_slice_in(&SliceContext::new(f), v)
}

pub fn backward_slice_in(ctx: &SliceContext, v: &str) -> DependenceGraph {
    let d0 = ctx.depth(v);
    let stops = |u: &str| -> bool {
        !ctx.defs.contains_key(u) || {
            let du = ctx.depth(u);
            du < d0 || (du == d0 && ctx.is_mu(u))
        }
    };
    let mut g = DependenceGraph {
        criterion: v.to_string(),
        nodes: IndexSet::new(),
        edges: Vec::new(),
        stop_set: IndexSet::new(),
        steps: 0,
    };
    g.nodes.insert(v.to_string());
    let mut queue = VecDeque::from([v.to_string()]);
    while let Some(x) = queue.pop_front() {
        let Some(site) = ctx.defs.get(x.as_str()) else { continue };
        let inst = ctx.func.inst_at(*site);
        let data = inst.operands().into_iter().filter_map(|o| o.as_var()).map(|u| (u, EdgeKind::Data));
        let control = inst.gate().into_iter().flat_map(|g| g.preds()).map(|u| (u, EdgeKind::Control));
        let deps: Vec<(&str, EdgeKind)> = data.chain(control).collect();
        for (u, kind) in deps {
            g.steps += 1;
            g.edges.push((u.to_string(), x.clone(), kind));
            if g.nodes.contains(u) || g.stop_set.contains(u) {
                continue;
            }
            if stops(u) {
                g.stop_set.insert(u.to_string());
            } else {
                g.nodes.insert(u.to_string());
                queue.push_back(u.to_string());
            }
        }
    }
    g
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SliceError {
    #[error("internal invariant violated: {0}")]
    InternalInvariantViolation(String),
    #[error("`%{0}` is not defined by an instruction")]
    UnknownVariable(String),
}

/// Blocks defining slice nodes (ascending) and the one that dominates them.
pub fn slice_region(f: &Function, dt: &DomTree, g: &DependenceGraph) -> Result<(Vec<usize>, usize), SliceError> {
    region_with(f, &f.def_sites(), dt, g)
}

fn region_with(
    f: &Function,
    defs: &HashMap<&str, DefSite>,
    dt: &DomTree,
    g: &DependenceGraph,
) -> Result<(Vec<usize>, usize), SliceError> {
    let mut region: Vec<usize> = Vec::new();
    for n in &g.nodes {
        let d = defs.get(n.as_str()).ok_or_else(|| SliceError::UnknownVariable(n.clone()))?;
        region.push(d.block);
    }
    region.sort_unstable();
    region.dedup();
    let entry = *region.iter().min_by_key(|&&b| (dt.level(b), b)).expect("criterion is a node");
    if let Some(&bad) = region.iter().find(|&&b| !dt.dominates(entry, b)) {
        return Err(SliceError::InternalInvariantViolation(format!(
            "slice of `%{}`: block `{}` is not dominated by `{}`",
            g.criterion, f.blocks[bad].label, f.blocks[entry].label
        )));
    }
    Ok((region, entry))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    WritesMemory,
    Calls,
    MayTrap,
    MutableLoad,
    RegionReturn,
    NotDominatedEntry,
    Unbuildable,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::WritesMemory => "writes-memory",
            RejectReason::Calls => "calls",
            RejectReason::MayTrap => "may-trap",
            RejectReason::MutableLoad => "mutable-load",
            RejectReason::RegionReturn => "region-return",
            RejectReason::NotDominatedEntry => "no-single-entry",
            RejectReason::Unbuildable => "unbuildable",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Legality {
    Ok,
    Rejected { reason: RejectReason, detail: String },
}

impl Legality {
    pub fn is_ok(&self) -> bool {
        matches!(self, Legality::Ok)
    }
}

/// Idempotence filter over the slice's instructions and region terminators.
pub fn check_idempotent(m: &Module, f: &Function, g: &DependenceGraph, region: &[usize]) -> Legality {
    check_with(m, f, &f.def_sites(), g, region)
}

fn check_with(
    m: &Module,
    f: &Function,
    defs: &HashMap<&str, DefSite>,
    g: &DependenceGraph,
    region: &[usize],
) -> Legality {
    for n in &g.nodes {
        let Some(site) = defs.get(n.as_str()) else { continue };
        let inst = f.inst_at(*site);
        let reason = match &inst.kind {
            InstKind::Store { .. } => Some(RejectReason::WritesMemory),
            InstKind::Call { .. } => Some(RejectReason::Calls),
            InstKind::Binary { op: BinOp::Div | BinOp::Rem, .. } => Some(RejectReason::MayTrap),
            InstKind::Load { global } => match m.global(global) {
                Some(gv) if gv.mutability == Mutability::Const => None,
                _ => Some(RejectReason::MutableLoad),
            },
            _ => None,
        };
        if let Some(reason) = reason {
            return Legality::Rejected { reason, detail: inst.to_string() };
        }
    }
    let crit_block = defs.get(g.criterion.as_str()).map(|d| d.block);
    for &b in region {
        if Some(b) != crit_block && matches!(f.blocks[b].terminator.kind, InstKind::Ret { .. }) {
            return Legality::Rejected { reason: RejectReason::RegionReturn, detail: f.blocks[b].label.clone() };
        }
    }
    Legality::Ok
}

/// Results of binary arithmetic, logic and comparison instructions, in
/// textual order.
pub fn enumerate_criteria(f: &Function) -> Vec<String> {
    f.instructions().filter(|i| i.is_binary()).filter_map(|i| i.result.clone()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SliceCandidate {
    pub criterion: String,
    pub graph: DependenceGraph,
    pub region: Vec<usize>,
    pub entry: usize,
    /// Stop-set variables in parameter order.
    pub inputs: Vec<String>,
    pub legality: Legality,
}

/// Slice `v`, compute its region and check it.
pub fn candidate(m: &Module, ctx: &SliceContext, v: &str) -> Result<SliceCandidate, SliceError> {
    if !ctx.defs.contains_key(v) {
        return Err(SliceError::UnknownVariable(v.to_string()));
    }
    assess(m, ctx, backward_slice_in(ctx, v))
}

/// Region, entry and legality of an already computed slice.
pub fn assess(m: &Module, ctx: &SliceContext, graph: DependenceGraph) -> Result<SliceCandidate, SliceError> {
    let v = graph.criterion.clone();
    let (region, entry) = region_with(ctx.func, &ctx.defs, &ctx.analysis.dom, &graph)?;
    let legality = check_with(m, ctx.func, &ctx.defs, &graph, &region);
    let inputs = graph.stop_set.iter().cloned().collect();
    Ok(SliceCandidate { criterion: v, graph, region, entry, inputs, legality })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gsa::to_gsa;
    use crate::ir::parse_module;

    const SEQS: &str = "global const @K = 3
global mut @M = 3
func @f(%a: i32, %b: i32) -> i32 {
b0:
  %x = add %a, %b
  %y = mul %x, 2
  %k = load @K
  %z = sub %y, %k
  %m = load @M
  %w = add %z, %m
  store @M, %w
  %q = div %w, 3
  %r = add %q, 1
  ret %r
}";

    #[test]
    fn idempotence_filter() {
        let m = parse_module(SEQS).unwrap();
        let f = &m.functions[0];
        let ctx = SliceContext::new(f);
        assert!(candidate(&m, &ctx, "z").unwrap().legality.is_ok());
        let w = candidate(&m, &ctx, "w").unwrap();
        assert!(matches!(w.legality, Legality::Rejected { reason: RejectReason::MutableLoad, .. }));
        let r = candidate(&m, &ctx, "r").unwrap();
        assert!(matches!(r.legality, Legality::Rejected { reason: RejectReason::MayTrap, .. }));
        assert_eq!(candidate(&m, &ctx, "y").unwrap().inputs, vec!["a", "b"]);
    }

    #[test]
    fn criteria_are_binary_results() {
        let m = parse_module(SEQS).unwrap();
        assert_eq!(enumerate_criteria(&m.functions[0]), vec!["x", "y", "z", "w", "q", "r"]);
    }

    #[test]
    fn loop_criterion_stops_at_same_depth_mu() {
        let text = "func @f(%N: i32, %x0: i32) -> i32 {
bb0:
  jmp bb1
bb1:
  %x1 = phi [bb0: %x0], [bb2: %x2]
  %p0 = icmp lt %x1, %N
  br %p0, bb2, bb3
bb2:
  %x2 = add %x1, 1
  jmp bb1
bb3:
  ret %x1
}";
        let m = parse_module(text).unwrap();
        let g = to_gsa(&m.functions[0]).unwrap();
        let ctx = SliceContext::new(&g);
        let s = backward_slice_in(&ctx, "x2");
        assert_eq!(s.nodes.iter().collect::<Vec<_>>(), vec!["x2"]);
        assert_eq!(s.stop_set.iter().collect::<Vec<_>>(), vec!["x1"]);
        let p = backward_slice_in(&ctx, "p0");
        assert_eq!(p.stop_set.iter().collect::<Vec<_>>(), vec!["x1", "N"]);
    }
}
