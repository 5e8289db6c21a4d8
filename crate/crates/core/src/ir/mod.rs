//! The SSA intermediate representation shared by every pass.
//!
//! A [`Module`] holds scalar globals, external declarations and functions.
//! Functions are lists of [`BasicBlock`]s; the first block is the entry.
//! Each block carries a header region of merge instructions (`phi`, `gamma`,
//! `mu`, `eta`), a body of ordinary instructions and exactly one terminator.
//!
//! Values are 32-bit two's-complement integers (`i1` values are 0 or 1).
//! Pointers only exist as global names used directly by `load`/`store`.

mod gate;
mod parse;
mod print;
mod validate;

use std::collections::HashMap;
use std::fmt;

pub use gate::GateExpr;
pub use parse::{parse_module, ParseError};
pub use print::{print_function, print_module};
pub use validate::{validate, validate_function, Diagnostic, Rule, Severity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Type {
    I1,
    I32,
    Ptr,
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Type::I1 => "i1",
            Type::I32 => "i32",
            Type::Ptr => "ptr",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mutability {
    Const,
    Mut,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GlobalVar {
    pub name: String,
    pub mutability: Mutability,
    pub initial: i32,
}

/// A callable declared but not defined in the module.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExternDecl {
    pub name: String,
    pub params: Vec<Type>,
    pub ret_ty: Type,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Operand {
    Var(String),
    Imm(i32),
}

impl Operand {
    pub fn var(name: impl Into<String>) -> Self {
        Operand::Var(name.into())
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Operand::Var(v) => Some(v),
            Operand::Imm(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    And,
    Or,
    Xor,
}

impl BinOp {
    pub const ALL: [BinOp; 8] = [
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::Div,
        BinOp::Rem,
        BinOp::And,
        BinOp::Or,
        BinOp::Xor,
    ];

    pub fn mnemonic(self) -> &'static str {
        match self {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
            BinOp::Div => "div",
            BinOp::Rem => "rem",
            BinOp::And => "and",
            BinOp::Or => "or",
            BinOp::Xor => "xor",
        }
    }

    /// Whether evaluation can trap.
    pub fn may_trap(self) -> bool {
        matches!(self, BinOp::Div | BinOp::Rem)
    }

    /// Bitwise ops accept `i1` operands as well as `i32`.
    pub fn is_bitwise(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or | BinOp::Xor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpPred {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpPred {
    pub const ALL: [CmpPred; 6] = [
        CmpPred::Eq,
        CmpPred::Ne,
        CmpPred::Lt,
        CmpPred::Le,
        CmpPred::Gt,
        CmpPred::Ge,
    ];

    pub fn mnemonic(self) -> &'static str {
        match self {
            CmpPred::Eq => "eq",
            CmpPred::Ne => "ne",
            CmpPred::Lt => "lt",
            CmpPred::Le => "le",
            CmpPred::Gt => "gt",
            CmpPred::Ge => "ge",
        }
    }

    pub fn eval(self, a: i32, b: i32) -> bool {
        match self {
            CmpPred::Eq => a == b,
            CmpPred::Ne => a != b,
            CmpPred::Lt => a < b,
            CmpPred::Le => a <= b,
            CmpPred::Gt => a > b,
            CmpPred::Ge => a >= b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum InstKind {
    Const { ty: Type, value: i32 },
    Binary { op: BinOp, lhs: Operand, rhs: Operand },
    Icmp { pred: CmpPred, lhs: Operand, rhs: Operand },
    Not { operand: Operand },
    Select { cond: Operand, if_true: Operand, if_false: Operand },
    Load { global: String },
    Store { global: String, value: Operand },
    Call { callee: String, args: Vec<Operand> },
    /// `(predecessor label, incoming value)` pairs.
    Phi { incoming: Vec<(String, Operand)> },
    Gamma { gate: GateExpr, if_true: Operand, if_false: Operand },
    /// Loop-header merge: `init` arrives from the preheader, `iter` from the latch.
    Mu { init: (String, Operand), iter: (String, Operand), gate: GateExpr },
    /// Loop-exit pass-through.
    Eta { value: Operand, gate: GateExpr },
    Br { cond: Operand, then_bb: String, else_bb: String },
    Jmp { target: String },
    Ret { value: Operand },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Instruction {
    pub result: Option<String>,
    pub kind: InstKind,
}

impl Instruction {
    pub fn new(result: impl Into<String>, kind: InstKind) -> Self {
        Instruction { result: Some(result.into()), kind }
    }

    pub fn effect(kind: InstKind) -> Self {
        Instruction { result: None, kind }
    }

    pub fn jmp(target: impl Into<String>) -> Self {
        Instruction::effect(InstKind::Jmp { target: target.into() })
    }

    pub fn ret(value: Operand) -> Self {
        Instruction::effect(InstKind::Ret { value })
    }

    pub fn is_terminator(&self) -> bool {
        matches!(
            self.kind,
            InstKind::Br { .. } | InstKind::Jmp { .. } | InstKind::Ret { .. }
        )
    }

    /// `phi`, `gamma`, `mu` and `eta` live in a block's header region.
    pub fn is_phi_kind(&self) -> bool {
        matches!(
            self.kind,
            InstKind::Phi { .. } | InstKind::Gamma { .. } | InstKind::Mu { .. } | InstKind::Eta { .. }
        )
    }

    /// Binary arithmetic, logic and comparison instructions.
    pub fn is_binary(&self) -> bool {
        matches!(self.kind, InstKind::Binary { .. } | InstKind::Icmp { .. })
    }

    pub fn gate(&self) -> Option<&GateExpr> {
        match &self.kind {
            InstKind::Gamma { gate, .. } | InstKind::Mu { gate, .. } | InstKind::Eta { gate, .. } => {
                Some(gate)
            }
            _ => None,
        }
    }

    /// Value operands in textual order. Gate predicates are not included.
    pub fn operands(&self) -> Vec<&Operand> {
        match &self.kind {
            InstKind::Const { .. } | InstKind::Load { .. } | InstKind::Jmp { .. } => vec![],
            InstKind::Binary { lhs, rhs, .. } | InstKind::Icmp { lhs, rhs, .. } => vec![lhs, rhs],
            InstKind::Not { operand } => vec![operand],
            InstKind::Select { cond, if_true, if_false } => vec![cond, if_true, if_false],
            InstKind::Store { value, .. } => vec![value],
            InstKind::Call { args, .. } => args.iter().collect(),
            InstKind::Phi { incoming } => incoming.iter().map(|(_, v)| v).collect(),
            InstKind::Gamma { if_true, if_false, .. } => vec![if_true, if_false],
            InstKind::Mu { init, iter, .. } => vec![&init.1, &iter.1],
            InstKind::Eta { value, .. } => vec![value],
            InstKind::Br { cond, .. } => vec![cond],
            InstKind::Ret { value } => vec![value],
        }
    }

    pub fn operands_mut(&mut self) -> Vec<&mut Operand> {
        match &mut self.kind {
            InstKind::Const { .. } | InstKind::Load { .. } | InstKind::Jmp { .. } => vec![],
            InstKind::Binary { lhs, rhs, .. } | InstKind::Icmp { lhs, rhs, .. } => vec![lhs, rhs],
            InstKind::Not { operand } => vec![operand],
            InstKind::Select { cond, if_true, if_false } => vec![cond, if_true, if_false],
            InstKind::Store { value, .. } => vec![value],
            InstKind::Call { args, .. } => args.iter_mut().collect(),
            InstKind::Phi { incoming } => incoming.iter_mut().map(|(_, v)| v).collect(),
            InstKind::Gamma { if_true, if_false, .. } => vec![if_true, if_false],
            InstKind::Mu { init, iter, .. } => vec![&mut init.1, &mut iter.1],
            InstKind::Eta { value, .. } => vec![value],
            InstKind::Br { cond, .. } => vec![cond],
            InstKind::Ret { value } => vec![value],
        }
    }

    /// Every variable read by this instruction, gate predicates last.
    pub fn used_vars(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.operands().into_iter().filter_map(Operand::as_var).collect();
        if let Some(g) = self.gate() {
            g.collect_preds(&mut out);
        }
        out
    }

    /// Rename every variable use (operands and gate predicates).
    pub fn rename_uses(&mut self, f: &mut impl FnMut(&str) -> Option<Operand>) {
        for op in self.operands_mut() {
            if let Operand::Var(v) = op {
                if let Some(new) = f(v) {
                    *op = new;
                }
            }
        }
        match &mut self.kind {
            InstKind::Gamma { gate, .. } | InstKind::Mu { gate, .. } | InstKind::Eta { gate, .. } => {
                gate.rename(&mut |p| match f(p) {
                    Some(Operand::Var(n)) => Some(n),
                    _ => None,
                });
            }
            _ => {}
        }
    }

    /// Successor labels of a terminator, in operand order (duplicates kept).
    pub fn successors(&self) -> Vec<&str> {
        match &self.kind {
            InstKind::Br { then_bb, else_bb, .. } => vec![then_bb, else_bb],
            InstKind::Jmp { target } => vec![target],
            _ => vec![],
        }
    }

    pub fn rename_successor(&mut self, from: &str, to: &str) {
        match &mut self.kind {
            InstKind::Br { then_bb, else_bb, .. } => {
                if then_bb == from {
                    *then_bb = to.to_string();
                }
                if else_bb == from {
                    *else_bb = to.to_string();
                }
            }
            InstKind::Jmp { target } if target == from => *target = to.to_string(),
            _ => {}
        }
    }

    /// Incoming `(label, value)` edges of a header-region instruction that
    /// selects by predecessor.
    pub fn incoming(&self) -> Vec<(&str, &Operand)> {
        match &self.kind {
            InstKind::Phi { incoming } => incoming.iter().map(|(l, v)| (l.as_str(), v)).collect(),
            InstKind::Mu { init, iter, .. } => vec![(&init.0, &init.1), (&iter.0, &iter.1)],
            _ => vec![],
        }
    }

    /// Rename predecessor labels referenced by `phi`/`mu` incoming edges.
    pub fn rename_incoming_label(&mut self, from: &str, to: &str) {
        match &mut self.kind {
            InstKind::Phi { incoming } => {
                for (l, _) in incoming.iter_mut() {
                    if l == from {
                        *l = to.to_string();
                    }
                }
            }
            InstKind::Mu { init, iter, .. } => {
                if init.0 == from {
                    init.0 = to.to_string();
                }
                if iter.0 == from {
                    iter.0 = to.to_string();
                }
            }
            _ => {}
        }
    }

    /// Whether the instruction may have an effect beyond defining its result.
    /// Calls are conservatively effectful unless `pure_callee` says otherwise.
    pub fn has_side_effects(&self, pure_callee: &dyn Fn(&str) -> bool) -> bool {
        match &self.kind {
            InstKind::Store { .. } => true,
            InstKind::Call { callee, .. } => !pure_callee(callee),
            InstKind::Binary { op, .. } => op.may_trap(),
            _ => self.is_terminator(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BasicBlock {
    pub label: String,
    pub phis: Vec<Instruction>,
    pub body: Vec<Instruction>,
    pub terminator: Instruction,
}

impl BasicBlock {
    pub fn new(label: impl Into<String>, terminator: Instruction) -> Self {
        BasicBlock { label: label.into(), phis: Vec::new(), body: Vec::new(), terminator }
    }

    pub fn instructions(&self) -> impl Iterator<Item = &Instruction> {
        self.phis.iter().chain(self.body.iter()).chain(std::iter::once(&self.terminator))
    }

    pub fn instructions_mut(&mut self) -> impl Iterator<Item = &mut Instruction> {
        self.phis
            .iter_mut()
            .chain(self.body.iter_mut())
            .chain(std::iter::once(&mut self.terminator))
    }

    pub fn successors(&self) -> Vec<&str> {
        self.terminator.successors()
    }

    pub fn len(&self) -> usize {
        self.phis.len() + self.body.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Param {
    pub name: String,
    pub ty: Type,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Function {
    pub name: String,
    pub params: Vec<Param>,
    pub ret_ty: Type,
    /// The first block is the entry block.
    pub blocks: Vec<BasicBlock>,
    /// Marks functions produced by outlining. Calls to them are pure and
    /// therefore not observable.
    pub idempotent: bool,
}

impl Function {
    pub fn entry_label(&self) -> &str {
        &self.blocks[0].label
    }

    pub fn block(&self, label: &str) -> Option<&BasicBlock> {
        self.blocks.iter().find(|b| b.label == label)
    }

    pub fn block_index(&self) -> HashMap<&str, usize> {
        self.blocks.iter().enumerate().map(|(i, b)| (b.label.as_str(), i)).collect()
    }

    pub fn instruction_count(&self) -> usize {
        self.blocks.iter().map(BasicBlock::len).sum()
    }

    pub fn instructions(&self) -> impl Iterator<Item = &Instruction> {
        self.blocks.iter().flat_map(|b| b.instructions())
    }

    /// Locate the instruction defining `var`.
    pub fn find_def(&self, var: &str) -> Option<DefSite> {
        for (bi, b) in self.blocks.iter().enumerate() {
            for (i, inst) in b.phis.iter().enumerate() {
                if inst.result.as_deref() == Some(var) {
                    return Some(DefSite { block: bi, slot: Slot::Phi(i) });
                }
            }
            for (i, inst) in b.body.iter().enumerate() {
                if inst.result.as_deref() == Some(var) {
                    return Some(DefSite { block: bi, slot: Slot::Body(i) });
                }
            }
        }
        None
    }

    /// Map from every defined variable (parameters excluded) to its site.
    pub fn def_sites(&self) -> HashMap<&str, DefSite> {
        let mut out = HashMap::new();
        for (bi, b) in self.blocks.iter().enumerate() {
            for (i, inst) in b.phis.iter().enumerate() {
                if let Some(r) = &inst.result {
                    out.insert(r.as_str(), DefSite { block: bi, slot: Slot::Phi(i) });
                }
            }
            for (i, inst) in b.body.iter().enumerate() {
                if let Some(r) = &inst.result {
                    out.insert(r.as_str(), DefSite { block: bi, slot: Slot::Body(i) });
                }
            }
        }
        out
    }

    pub fn inst_at(&self, site: DefSite) -> &Instruction {
        let b = &self.blocks[site.block];
        match site.slot {
            Slot::Phi(i) => &b.phis[i],
            Slot::Body(i) => &b.body[i],
        }
    }

    pub fn is_param(&self, var: &str) -> bool {
        self.params.iter().any(|p| p.name == var)
    }

    /// Result types of every variable. Ill-typed or unresolvable results
    /// default to `i32`; the validator reports the inconsistencies.
    pub fn var_types(&self, callee_ret: &dyn Fn(&str) -> Option<Type>) -> HashMap<String, Type> {
        let mut types: HashMap<String, Type> =
            self.params.iter().map(|p| (p.name.clone(), p.ty)).collect();
        // Merge instructions may reference later definitions; iterate until stable.
        loop {
            let mut changed = false;
            for inst in self.instructions() {
                let Some(r) = &inst.result else { continue };
                let ty = result_type(inst, &types, callee_ret);
                if let Some(ty) = ty {
                    if types.get(r) != Some(&ty) {
                        types.insert(r.clone(), ty);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        for inst in self.instructions() {
            if let Some(r) = &inst.result {
                types.entry(r.clone()).or_insert(Type::I32);
            }
        }
        types
    }

    /// Fresh variable name derived from `base` that is not defined or used.
    pub fn fresh_var(&self, base: &str, taken: &mut std::collections::HashSet<String>) -> String {
        if taken.is_empty() {
            for p in &self.params {
                taken.insert(p.name.clone());
            }
            for inst in self.instructions() {
                if let Some(r) = &inst.result {
                    taken.insert(r.clone());
                }
            }
        }
        fresh_name(base, taken)
    }

    pub fn fresh_label(&self, base: &str, taken: &mut std::collections::HashSet<String>) -> String {
        if taken.is_empty() {
            for b in &self.blocks {
                taken.insert(b.label.clone());
            }
        }
        fresh_name(base, taken)
    }
}

fn fresh_name(base: &str, taken: &mut std::collections::HashSet<String>) -> String {
    if taken.insert(base.to_string()) {
        return base.to_string();
    }
    let mut n = 1usize;
    loop {
        let cand = format!("{base}.{n}");
        if taken.insert(cand.clone()) {
            return cand;
        }
        n += 1;
    }
}

fn operand_type(op: &Operand, types: &HashMap<String, Type>) -> Option<Type> {
    match op {
        Operand::Var(v) => types.get(v).copied(),
        Operand::Imm(_) => None,
    }
}

fn result_type(
    inst: &Instruction,
    types: &HashMap<String, Type>,
    callee_ret: &dyn Fn(&str) -> Option<Type>,
) -> Option<Type> {
    let first_typed = |ops: &[&Operand]| ops.iter().find_map(|o| operand_type(o, types));
    match &inst.kind {
        InstKind::Const { ty, .. } => Some(*ty),
        InstKind::Binary { op, lhs, rhs } => {
            if op.is_bitwise() {
                Some(first_typed(&[lhs, rhs]).unwrap_or(Type::I32))
            } else {
                Some(Type::I32)
            }
        }
        InstKind::Icmp { .. } => Some(Type::I1),
        InstKind::Not { operand } => Some(operand_type(operand, types).unwrap_or(Type::I32)),
        InstKind::Select { if_true, if_false, .. } => first_typed(&[if_true, if_false]),
        InstKind::Load { .. } => Some(Type::I32),
        InstKind::Call { callee, .. } => callee_ret(callee),
        InstKind::Phi { .. } | InstKind::Gamma { .. } | InstKind::Mu { .. } | InstKind::Eta { .. } => {
            first_typed(&inst.operands())
        }
        _ => None,
    }
}

/// Where an instruction lives inside a function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DefSite {
    pub block: usize,
    pub slot: Slot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Slot {
    Phi(usize),
    Body(usize),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Module {
    pub globals: Vec<GlobalVar>,
    pub externs: Vec<ExternDecl>,
    pub functions: Vec<Function>,
    pub entry: Option<String>,
}

impl Module {
    pub fn function(&self, name: &str) -> Option<&Function> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn function_mut(&mut self, name: &str) -> Option<&mut Function> {
        self.functions.iter_mut().find(|f| f.name == name)
    }

    pub fn global(&self, name: &str) -> Option<&GlobalVar> {
        self.globals.iter().find(|g| g.name == name)
    }

    pub fn instruction_count(&self) -> usize {
        self.functions.iter().map(Function::instruction_count).sum()
    }

    /// Return type of a defined or external callee.
    pub fn callee_ret(&self, name: &str) -> Option<Type> {
        self.function(name)
            .map(|f| f.ret_ty)
            .or_else(|| self.externs.iter().find(|e| e.name == name).map(|e| e.ret_ty))
    }

    pub fn is_idempotent_fn(&self, name: &str) -> bool {
        self.function(name).is_some_and(|f| f.idempotent)
    }
}

/// Check that `name` is a legal identifier for variables, labels and symbols.
pub fn is_ident(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}
