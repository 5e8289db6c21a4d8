use std::fmt::{self, Write};

use super::*;

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Var(v) => write!(f, "%{v}"),
            Operand::Imm(i) => write!(f, "{i}"),
        }
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(r) = &self.result {
            write!(f, "%{r} = ")?;
        }
        match &self.kind {
            InstKind::Const { ty, value } => write!(f, "const {ty} {value}"),
            InstKind::Binary { op, lhs, rhs } => write!(f, "{} {lhs}, {rhs}", op.mnemonic()),
            InstKind::Icmp { pred, lhs, rhs } => write!(f, "icmp {} {lhs}, {rhs}", pred.mnemonic()),
            InstKind::Not { operand } => write!(f, "not {operand}"),
            InstKind::Select { cond, if_true, if_false } => {
                write!(f, "select {cond}, {if_true}, {if_false}")
            }
            InstKind::Load { global } => write!(f, "load @{global}"),
            InstKind::Store { global, value } => write!(f, "store @{global}, {value}"),
            InstKind::Call { callee, args } => {
                write!(f, "call @{callee}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
            InstKind::Phi { incoming } => {
                f.write_str("phi ")?;
                for (i, (l, v)) in incoming.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "[{l}: {v}]")?;
                }
                Ok(())
            }
            InstKind::Gamma { gate, if_true, if_false } => {
                write!(f, "gamma {if_true}, {if_false} gate({gate})")
            }
            InstKind::Mu { init, iter, gate } => {
                write!(f, "mu [{}: {}], [{}: {}] gate({gate})", init.0, init.1, iter.0, iter.1)
            }
            InstKind::Eta { value, gate } => write!(f, "eta {value} gate({gate})"),
            InstKind::Br { cond, then_bb, else_bb } => write!(f, "br {cond}, {then_bb}, {else_bb}"),
            InstKind::Jmp { target } => write!(f, "jmp {target}"),
            InstKind::Ret { value } => write!(f, "ret {value}"),
        }
    }
}

pub fn print_function(func: &Function) -> String {
    let mut out = String::new();
    write_function(&mut out, func);
    out
}

fn write_function(out: &mut String, func: &Function) {
    let params: Vec<String> = func.params.iter().map(|p| format!("%{}: {}", p.name, p.ty)).collect();
    let attr = if func.idempotent { " idempotent" } else { "" };
    let _ = writeln!(out, "func @{}({}) -> {}{attr} {{", func.name, params.join(", "), func.ret_ty);
    for b in &func.blocks {
        let _ = writeln!(out, "{}:", b.label);
        for inst in b.instructions() {
            let _ = writeln!(out, "  {inst}");
        }
    }
    out.push_str("}\n");
}

/// Deterministic textual form; `parse_module` reads it back unchanged.
pub fn print_module(m: &Module) -> String {
    let mut out = String::new();
    if let Some(e) = &m.entry {
        let _ = writeln!(out, "entry @{e}");
    }
    for g in &m.globals {
        let kw = match g.mutability {
            Mutability::Const => "const",
            Mutability::Mut => "mut",
        };
        let _ = writeln!(out, "global {kw} @{} = {}", g.name, g.initial);
    }
    for e in &m.externs {
        let params: Vec<String> = e.params.iter().map(Type::to_string).collect();
        let _ = writeln!(out, "extern @{}({}) -> {}", e.name, params.join(", "), e.ret_ty);
    }
    for f in &m.functions {
        if !out.is_empty() {
            out.push('\n');
        }
        write_function(&mut out, f);
    }
    out
}

impl fmt::Display for Function {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_function(self))
    }
}

impl fmt::Display for Module {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_module(self))
    }
}
