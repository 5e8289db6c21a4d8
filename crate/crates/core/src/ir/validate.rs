//! Structural, typing and SSA checks.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::Serialize;

use super::*;
use crate::analysis::{Cfg, Direction, DomTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Rule {
    #[serde(rename = "dup-symbol")]
    DuplicateSymbol,
    #[serde(rename = "dup-block")]
    DuplicateBlock,
    #[serde(rename = "identifier")]
    Identifier,
    #[serde(rename = "entry-function")]
    EntryFunction,
    #[serde(rename = "empty-function")]
    EmptyFunction,
    #[serde(rename = "entry-preds")]
    EntryPredecessors,
    #[serde(rename = "unreachable")]
    Unreachable,
    #[serde(rename = "unknown-label")]
    UnknownLabel,
    #[serde(rename = "unknown-callee")]
    UnknownCallee,
    #[serde(rename = "call-arity")]
    CallArity,
    #[serde(rename = "unknown-global")]
    UnknownGlobal,
    #[serde(rename = "const-store")]
    ConstStore,
    #[serde(rename = "terminator")]
    Terminator,
    #[serde(rename = "phi-placement")]
    PhiPlacement,
    #[serde(rename = "phi-incoming")]
    PhiIncoming,
    #[serde(rename = "ssa-single-def")]
    SingleDef,
    #[serde(rename = "undefined-var")]
    UndefinedVar,
    #[serde(rename = "dominance")]
    Dominance,
    #[serde(rename = "type")]
    Type,
    #[serde(rename = "param-type")]
    ParamType,
    #[serde(rename = "gate-pred")]
    GatePred,
    #[serde(rename = "idempotent-attr")]
    IdempotentAttr,
}

impl Rule {
    pub fn id(self) -> &'static str {
        match self {
            Rule::DuplicateSymbol => "dup-symbol",
            Rule::DuplicateBlock => "dup-block",
            Rule::Identifier => "identifier",
            Rule::EntryFunction => "entry-function",
            Rule::EmptyFunction => "empty-function",
            Rule::EntryPredecessors => "entry-preds",
            Rule::Unreachable => "unreachable",
            Rule::UnknownLabel => "unknown-label",
            Rule::UnknownCallee => "unknown-callee",
            Rule::CallArity => "call-arity",
            Rule::UnknownGlobal => "unknown-global",
            Rule::ConstStore => "const-store",
            Rule::Terminator => "terminator",
            Rule::PhiPlacement => "phi-placement",
            Rule::PhiIncoming => "phi-incoming",
            Rule::SingleDef => "ssa-single-def",
            Rule::UndefinedVar => "undefined-var",
            Rule::Dominance => "dominance",
            Rule::Type => "type",
            Rule::ParamType => "param-type",
            Rule::GatePred => "gate-pred",
            Rule::IdempotentAttr => "idempotent-attr",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub rule: Rule,
    pub function: Option<String>,
    pub block: Option<String>,
    pub message: String,
}

impl Diagnostic {
    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}[{}]", self.rule.id())?;
        if let Some(func) = &self.function {
            write!(f, " @{func}")?;
            if let Some(b) = &self.block {
                write!(f, ":{b}")?;
            }
        }
        write!(f, ": {}", self.message)
    }
}

struct Sink<'a> {
    out: Vec<Diagnostic>,
    function: Option<&'a str>,
    block: Option<&'a str>,
}

impl Sink<'_> {
    fn push(&mut self, severity: Severity, rule: Rule, message: String) {
        self.out.push(Diagnostic {
            severity,
            rule,
            function: self.function.map(str::to_string),
            block: self.block.map(str::to_string),
            message,
        });
    }

    fn error(&mut self, rule: Rule, message: String) {
        self.push(Severity::Error, rule, message);
    }
}

/// Check every module, function, block and instruction invariant.
pub fn validate(m: &Module) -> Vec<Diagnostic> {
    let mut sink = Sink { out: Vec::new(), function: None, block: None };
    let mut symbols = HashSet::new();
    for name in m
        .globals
        .iter()
        .map(|g| &g.name)
        .chain(m.externs.iter().map(|e| &e.name))
        .chain(m.functions.iter().map(|f| &f.name))
    {
        if !is_ident(name) {
            sink.error(Rule::Identifier, format!("invalid symbol name `{name}`"));
        }
        if !symbols.insert(name.as_str()) {
            sink.error(Rule::DuplicateSymbol, format!("`@{name}` is defined more than once"));
        }
    }
    if let Some(e) = &m.entry {
        if m.function(e).is_none() {
            sink.error(Rule::EntryFunction, format!("entry `@{e}` is not a defined function"));
        }
    }
    let mut out = sink.out;
    for f in &m.functions {
        out.extend(validate_function(m, f));
    }
    out
}

/// Function-level checks in the context of `m` (callees, globals).
pub fn validate_function(m: &Module, f: &Function) -> Vec<Diagnostic> {
    let mut sink = Sink { out: Vec::new(), function: Some(&f.name), block: None };
    if f.blocks.is_empty() {
        sink.error(Rule::EmptyFunction, "function has no blocks".into());
        return sink.out;
    }
    for p in &f.params {
        if !is_ident(&p.name) {
            sink.error(Rule::Identifier, format!("invalid parameter name `%{}`", p.name));
        }
        if p.ty == Type::Ptr {
            sink.error(Rule::ParamType, format!("parameter `%{}` has type ptr", p.name));
        }
    }
    if f.ret_ty == Type::Ptr {
        sink.error(Rule::ParamType, "functions cannot return ptr".into());
    }

    // Labels.
    let mut labels: HashMap<&str, usize> = HashMap::new();
    for (i, b) in f.blocks.iter().enumerate() {
        if !is_ident(&b.label) {
            sink.error(Rule::Identifier, format!("invalid block label `{}`", b.label));
        }
        if labels.insert(&b.label, i).is_some() {
            sink.error(Rule::DuplicateBlock, format!("block label `{}` is defined more than once", b.label));
        }
    }

    // Definitions.
    let mut defs: HashMap<&str, (usize, usize)> = HashMap::new(); // var -> (block, position)
    for p in &f.params {
        if defs.insert(&p.name, (usize::MAX, 0)).is_some() {
            sink.error(Rule::SingleDef, format!("`%{}` is defined more than once", p.name));
        }
    }
    for (bi, b) in f.blocks.iter().enumerate() {
        for (pos, inst) in b.phis.iter().chain(b.body.iter()).enumerate() {
            if let Some(r) = &inst.result {
                if !is_ident(r) {
                    sink.error(Rule::Identifier, format!("invalid variable name `%{r}`"));
                }
                if defs.insert(r, (bi, pos)).is_some() {
                    sink.block = Some(&b.label);
                    sink.error(Rule::SingleDef, format!("`%{r}` is defined more than once"));
                    sink.block = None;
                }
            }
        }
        if b.terminator.result.is_some() {
            sink.block = Some(&b.label);
            sink.error(Rule::Terminator, "terminator defines a value".into());
            sink.block = None;
        }
    }

    let cfg = Cfg::new(f);
    let dt = DomTree::compute(0, &cfg.succs, &cfg.preds, Direction::Forward);
    if !cfg.preds[0].is_empty() {
        sink.block = Some(&f.blocks[0].label);
        sink.error(Rule::EntryPredecessors, "entry block has predecessors".into());
        sink.block = None;
    }
    let types = f.var_types(&|c| m.callee_ret(c));

    for (bi, b) in f.blocks.iter().enumerate() {
        sink.block = Some(&b.label);
        if !dt.is_reachable(bi) {
            sink.push(Severity::Warning, Rule::Unreachable, "block is unreachable from entry".into());
        }
        if !b.terminator.is_terminator() {
            sink.error(Rule::Terminator, format!("block ends with non-terminator `{}`", b.terminator));
        }
        for inst in &b.phis {
            if !inst.is_phi_kind() {
                sink.error(Rule::PhiPlacement, format!("`{inst}` is in the merge region"));
            }
        }
        for inst in &b.body {
            if inst.is_phi_kind() {
                sink.error(Rule::PhiPlacement, format!("`{inst}` is in the block body"));
            }
            if inst.is_terminator() {
                sink.error(Rule::Terminator, format!("terminator `{inst}` before the end of the block"));
            }
        }
        for s in b.successors() {
            if !labels.contains_key(s) {
                sink.error(Rule::UnknownLabel, format!("branch to unknown block `{s}`"));
            }
        }

        let preds: Vec<&str> = cfg.preds[bi].iter().map(|&p| f.blocks[p].label.as_str()).collect();
        let n_phis = b.phis.len();
        for (pos, inst) in b.phis.iter().chain(b.body.iter()).chain(std::iter::once(&b.terminator)).enumerate() {
            check_instruction(m, f, inst, &types, &mut sink);
            check_uses(f, bi, pos, n_phis, inst, &defs, &preds, &labels, &dt, &mut sink);
        }
        sink.block = None;
    }

    if f.idempotent {
        for inst in f.instructions() {
            let bad = match &inst.kind {
                InstKind::Store { .. } => Some("stores to memory"),
                InstKind::Call { callee, .. } if !m.is_idempotent_fn(callee) => Some("calls a non-idempotent function"),
                InstKind::Binary { op, .. } if op.may_trap() => Some("may trap"),
                InstKind::Load { global } if m.global(global).is_some_and(|g| g.mutability == Mutability::Mut) => {
                    Some("loads mutable memory")
                }
                _ => None,
            };
            if let Some(why) = bad {
                sink.error(Rule::IdempotentAttr, format!("idempotent function {why}: `{inst}`"));
            }
        }
    }
    sink.out
}

#[allow(clippy::too_many_arguments)]
fn check_uses(
    f: &Function,
    bi: usize,
    pos: usize,
    n_phis: usize,
    inst: &Instruction,
    defs: &HashMap<&str, (usize, usize)>,
    preds: &[&str],
    labels: &HashMap<&str, usize>,
    dt: &DomTree,
    sink: &mut Sink,
) {
    let defined = |v: &str, sink: &mut Sink| -> Option<(usize, usize)> {
        match defs.get(v) {
            Some(d) => Some(*d),
            None => {
                sink.error(Rule::UndefinedVar, format!("use of undefined `%{v}` in `{inst}`"));
                None
            }
        }
    };
    // def dominates the end of block `at`
    let dominates_end = |d: (usize, usize), at: usize| d.0 == usize::MAX || dt.dominates(d.0, at);

    match &inst.kind {
        InstKind::Phi { incoming } => {
            if incoming.is_empty() {
                sink.error(Rule::PhiIncoming, format!("`{inst}` has no incoming values"));
            }
            check_incoming_labels(inst, incoming.iter().map(|(l, _)| l.as_str()).collect(), preds, sink);
            for (l, v) in incoming {
                if let Operand::Var(v) = v {
                    if let (Some(d), Some(&lb)) = (defined(v, sink), labels.get(l.as_str())) {
                        if dt.is_reachable(lb) && !dominates_end(d, lb) {
                            sink.error(Rule::Dominance, format!("`%{v}` does not dominate the edge from `{l}` in `{inst}`"));
                        }
                    }
                }
            }
        }
        InstKind::Mu { init, iter, gate } => {
            check_incoming_labels(inst, vec![init.0.as_str(), iter.0.as_str()], preds, sink);
            for (l, v) in [init, iter] {
                if let Operand::Var(v) = v {
                    if let (Some(d), Some(&lb)) = (defined(v, sink), labels.get(l.as_str())) {
                        if dt.is_reachable(lb) && !dominates_end(d, lb) {
                            sink.error(Rule::Dominance, format!("`%{v}` does not dominate the edge from `{l}` in `{inst}`"));
                        }
                    }
                }
            }
            check_gate(f, gate, defs, sink);
        }
        InstKind::Gamma { gate, if_true, if_false } => {
            for v in [if_true, if_false].into_iter().filter_map(Operand::as_var) {
                defined(v, sink);
            }
            check_gate(f, gate, defs, sink);
        }
        InstKind::Eta { value, gate } => {
            if let Operand::Var(v) = value {
                if let Some(d) = defined(v, sink) {
                    let ok = preds.iter().any(|p| dominates_end(d, labels[p]));
                    if dt.is_reachable(bi) && !ok {
                        sink.error(Rule::Dominance, format!("`%{v}` does not reach `{inst}` from any predecessor"));
                    }
                }
            }
            check_gate(f, gate, defs, sink);
        }
        _ => {
            for v in inst.operands().into_iter().filter_map(Operand::as_var) {
                let Some(d) = defined(v, sink) else { continue };
                if d.0 == usize::MAX || !dt.is_reachable(bi) {
                    continue;
                }
                let ok = if d.0 == bi {
                    // merge-region values are all available to the body; body defs must precede.
                    d.1 < pos && (d.1 < n_phis || pos >= n_phis)
                } else {
                    dt.strictly_dominates(d.0, bi)
                };
                if !ok {
                    sink.error(Rule::Dominance, format!("`%{v}` does not dominate its use in `{inst}`"));
                }
            }
        }
    }
}

fn check_incoming_labels(inst: &Instruction, mut labels: Vec<&str>, preds: &[&str], sink: &mut Sink) {
    labels.sort_unstable();
    let mut expected = preds.to_vec();
    expected.sort_unstable();
    if labels != expected {
        sink.error(
            Rule::PhiIncoming,
            format!("`{inst}` incoming labels {labels:?} do not match predecessors {expected:?}"),
        );
    }
}

fn check_gate(f: &Function, gate: &GateExpr, defs: &HashMap<&str, (usize, usize)>, sink: &mut Sink) {
    let types = f.var_types(&|_| None);
    for p in gate.preds() {
        if !defs.contains_key(p) {
            sink.error(Rule::GatePred, format!("gate predicate `%{p}` is not defined"));
        } else if types.get(p) != Some(&Type::I1) {
            sink.error(Rule::GatePred, format!("gate predicate `%{p}` is not i1"));
        }
    }
}

fn check_instruction(m: &Module, f: &Function, inst: &Instruction, types: &HashMap<String, Type>, sink: &mut Sink) {
    let ty_of = |o: &Operand| -> Option<Type> {
        match o {
            Operand::Var(v) => types.get(v).copied(),
            Operand::Imm(_) => None,
        }
    };
    let fits = |o: &Operand, want: Type| -> bool {
        match o {
            Operand::Imm(i) => match want {
                Type::I1 => *i == 0 || *i == 1,
                Type::I32 => true,
                Type::Ptr => false,
            },
            Operand::Var(v) => types.get(v).is_none_or(|t| *t == want),
        }
    };
    let mismatch = |what: &str, sink: &mut Sink| sink.error(Rule::Type, format!("{what} in `{inst}`"));
    match &inst.kind {
        InstKind::Const { ty, value } => {
            if *ty == Type::Ptr || (*ty == Type::I1 && !(0..=1).contains(value)) {
                mismatch("invalid constant", sink);
            }
        }
        InstKind::Binary { op, lhs, rhs } => {
            if op.is_bitwise() {
                let t = ty_of(lhs).or(ty_of(rhs)).unwrap_or(Type::I32);
                if t == Type::Ptr || !fits(lhs, t) || !fits(rhs, t) {
                    mismatch("operand types differ", sink);
                }
            } else if !fits(lhs, Type::I32) || !fits(rhs, Type::I32) {
                mismatch("arithmetic on non-i32 operand", sink);
            }
        }
        InstKind::Icmp { lhs, rhs, .. } => {
            let t = ty_of(lhs).or(ty_of(rhs)).unwrap_or(Type::I32);
            if t == Type::Ptr || !fits(lhs, t) || !fits(rhs, t) {
                mismatch("comparison operand types differ", sink);
            }
        }
        InstKind::Not { operand } => {
            if ty_of(operand) == Some(Type::Ptr) {
                mismatch("not on ptr", sink);
            }
        }
        InstKind::Select { cond, if_true, if_false } => {
            let t = ty_of(if_true).or(ty_of(if_false)).unwrap_or(Type::I32);
            if !fits(cond, Type::I1) || !fits(if_true, t) || !fits(if_false, t) {
                mismatch("select type mismatch", sink);
            }
        }
        InstKind::Load { global } => {
            if m.global(global).is_none() {
                sink.error(Rule::UnknownGlobal, format!("unknown global `@{global}`"));
            }
        }
        InstKind::Store { global, value } => match m.global(global) {
            None => sink.error(Rule::UnknownGlobal, format!("unknown global `@{global}`")),
            Some(g) => {
                if g.mutability == Mutability::Const {
                    sink.error(Rule::ConstStore, format!("store to constant global `@{global}`"));
                }
                if !fits(value, Type::I32) {
                    mismatch("stored value is not i32", sink);
                }
            }
        },
        InstKind::Call { callee, args } => {
            let params: Option<Vec<Type>> = m
                .function(callee)
                .map(|c| c.params.iter().map(|p| p.ty).collect())
                .or_else(|| m.externs.iter().find(|e| &e.name == callee).map(|e| e.params.clone()));
            match params {
                None => sink.error(Rule::UnknownCallee, format!("call to unknown function `@{callee}`")),
                Some(ps) => {
                    if ps.len() != args.len() {
                        sink.error(
                            Rule::CallArity,
                            format!("`@{callee}` takes {} arguments, {} given", ps.len(), args.len()),
                        );
                    } else if ps.iter().zip(args).any(|(t, a)| !fits(a, *t)) {
                        mismatch("argument type mismatch", sink);
                    }
                }
            }
        }
        InstKind::Phi { .. } | InstKind::Gamma { .. } | InstKind::Mu { .. } | InstKind::Eta { .. } => {
            let want = inst.result.as_ref().and_then(|r| types.get(r)).copied().unwrap_or(Type::I32);
            if inst.operands().iter().any(|o| !fits(o, want)) {
                mismatch("merged values have different types", sink);
            }
        }
        InstKind::Br { cond, .. } => {
            if !fits(cond, Type::I1) {
                mismatch("branch condition is not i1", sink);
            }
        }
        InstKind::Ret { value } => {
            if !fits(value, f.ret_ty) {
                mismatch("returned value does not match the return type", sink);
            }
        }
        InstKind::Jmp { .. } => {}
    }
}
