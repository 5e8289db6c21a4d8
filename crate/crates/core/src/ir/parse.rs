//! Line-oriented parser for the `.sir` textual format.

use std::collections::HashSet;

use thiserror::Error;

use super::*;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Var(String),
    Sym(String),
    Word(String),
    Int(i64),
    Punct(&'static str),
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Var(v) => format!("`%{v}`"),
            Tok::Sym(s) => format!("`@{s}`"),
            Tok::Word(w) => format!("`{w}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::Punct(p) => format!("`{p}`"),
        }
    }
}

const PUNCT: [&str; 13] = ["->", "=", ",", ":", "(", ")", "[", "]", "{", "}", "&", "|", "!"];

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.'
}

fn lex(line: &str, lineno: usize) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |col: usize, message: String| ParseError { line: lineno, col: col + 1, message };
    while i < chars.len() {
        let c = chars[i];
        if c == '#' {
            break;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c == '%' || c == '@' {
            i += 1;
            while i < chars.len() && is_ident_char(chars[i]) {
                i += 1;
            }
            let name: String = chars[start + 1..i].iter().collect();
            if name.is_empty() {
                return Err(err(start, format!("expected identifier after `{c}`")));
            }
            out.push((if c == '%' { Tok::Var(name) } else { Tok::Sym(name) }, start + 1));
            continue;
        }
        if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            i += 1;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            let value: i64 = text.parse().map_err(|_| err(start, format!("bad integer `{text}`")))?;
            if i < chars.len() && is_ident_char(chars[i]) {
                // labels such as `0bb` are not allowed; report the whole run
                while i < chars.len() && is_ident_char(chars[i]) {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                return Err(err(start, format!("bad token `{text}`")));
            }
            out.push((Tok::Int(value), start + 1));
            continue;
        }
        if is_ident_char(c) {
            while i < chars.len() && is_ident_char(chars[i]) {
                i += 1;
            }
            out.push((Tok::Word(chars[start..i].iter().collect()), start + 1));
            continue;
        }
        let rest: String = chars[i..].iter().take(2).collect();
        if let Some(p) = PUNCT.iter().find(|p| rest.starts_with(**p)) {
            i += p.len();
            out.push((Tok::Punct(p), start + 1));
            continue;
        }
        return Err(err(start, format!("unexpected character `{c}`")));
    }
    Ok(out)
}

struct Cursor<'a> {
    toks: &'a [(Tok, usize)],
    pos: usize,
    line: usize,
    eol_col: usize,
}

impl<'a> Cursor<'a> {
    fn new(toks: &'a [(Tok, usize)], line: usize, len: usize) -> Self {
        Cursor { toks, pos: 0, line, eol_col: len + 1 }
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.1).unwrap_or(self.eol_col)
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError { line: self.line, col: self.col(), message: message.into() }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn next(&mut self) -> Option<&Tok> {
        let t = self.toks.get(self.pos).map(|t| &t.0);
        self.pos += 1;
        t
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn found(&self) -> String {
        self.peek().map(Tok::describe).unwrap_or_else(|| "end of line".into())
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Punct(q)) if *q == p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn punct(&mut self, p: &str) -> Result<(), ParseError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{p}`, found {}", self.found())))
        }
    }

    fn word(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Word(w)) => {
                let w = w.clone();
                self.pos += 1;
                Ok(w)
            }
            _ => Err(self.error(format!("expected identifier, found {}", self.found()))),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::Word(w)) if w == kw => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error(format!("expected `{kw}`, found {}", self.found()))),
        }
    }

    /// Block labels are bare identifiers; purely numeric labels are rejected.
    fn label(&mut self) -> Result<String, ParseError> {
        self.word()
    }

    fn var(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Var(v)) => {
                let v = v.clone();
                self.pos += 1;
                Ok(v)
            }
            _ => Err(self.error(format!("expected variable, found {}", self.found()))),
        }
    }

    fn sym(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Sym(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error(format!("expected `@name`, found {}", self.found()))),
        }
    }

    fn int(&mut self) -> Result<i32, ParseError> {
        match self.peek() {
            Some(Tok::Int(i)) => {
                let i = *i;
                let v = i32::try_from(i).map_err(|_| self.error(format!("integer {i} out of i32 range")))?;
                self.pos += 1;
                Ok(v)
            }
            _ => Err(self.error(format!("expected integer, found {}", self.found()))),
        }
    }

    fn operand(&mut self) -> Result<Operand, ParseError> {
        match self.peek() {
            Some(Tok::Var(_)) => Ok(Operand::Var(self.var()?)),
            Some(Tok::Int(_)) => Ok(Operand::Imm(self.int()?)),
            _ => Err(self.error(format!("expected operand, found {}", self.found()))),
        }
    }

    fn ty(&mut self) -> Result<Type, ParseError> {
        let col = self.col();
        let w = self.word()?;
        match w.as_str() {
            "i1" => Ok(Type::I1),
            "i32" => Ok(Type::I32),
            "ptr" => Ok(Type::Ptr),
            _ => Err(ParseError { line: self.line, col, message: format!("unknown type `{w}`") }),
        }
    }

    fn end(&self) -> Result<(), ParseError> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.error(format!("unexpected {} at end of line", self.found())))
        }
    }

    fn incoming(&mut self) -> Result<(String, Operand), ParseError> {
        self.punct("[")?;
        let l = self.label()?;
        self.punct(":")?;
        let v = self.operand()?;
        self.punct("]")?;
        Ok((l, v))
    }

    fn gate_clause(&mut self) -> Result<GateExpr, ParseError> {
        self.keyword("gate")?;
        self.punct("(")?;
        let g = self.gate_or()?;
        self.punct(")")?;
        Ok(g)
    }

    fn gate_or(&mut self) -> Result<GateExpr, ParseError> {
        let mut terms = vec![self.gate_and()?];
        while self.eat_punct("|") {
            terms.push(self.gate_and()?);
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { GateExpr::Or(terms) })
    }

    fn gate_and(&mut self) -> Result<GateExpr, ParseError> {
        let mut terms = vec![self.gate_unary()?];
        while self.eat_punct("&") {
            terms.push(self.gate_unary()?);
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { GateExpr::And(terms) })
    }

    fn gate_unary(&mut self) -> Result<GateExpr, ParseError> {
        if self.eat_punct("!") {
            return Ok(GateExpr::Not(Box::new(self.gate_unary()?)));
        }
        if self.eat_punct("(") {
            let g = self.gate_or()?;
            self.punct(")")?;
            return Ok(g);
        }
        match self.peek() {
            Some(Tok::Var(_)) => Ok(GateExpr::Pred(self.var()?)),
            Some(Tok::Word(w)) if w == "true" => {
                self.pos += 1;
                Ok(GateExpr::True)
            }
            _ => Err(self.error(format!("expected gate expression, found {}", self.found()))),
        }
    }

    fn args(&mut self) -> Result<Vec<Operand>, ParseError> {
        self.punct("(")?;
        let mut args = Vec::new();
        if !self.eat_punct(")") {
            loop {
                args.push(self.operand()?);
                if self.eat_punct(")") {
                    break;
                }
                self.punct(",")?;
            }
        }
        Ok(args)
    }
}

fn parse_instruction(c: &mut Cursor) -> Result<Instruction, ParseError> {
    let result = if matches!(c.peek(), Some(Tok::Var(_))) {
        let r = c.var()?;
        c.punct("=")?;
        Some(r)
    } else {
        None
    };
    let op_col = c.col();
    let op = c.word()?;
    let needs_result = |c: &Cursor, has: bool| -> Result<(), ParseError> {
        if has {
            Ok(())
        } else {
            Err(ParseError { line: c.line, col: op_col, message: format!("`{op}` requires a result") })
        }
    };
    let no_result = |c: &Cursor, has: bool| -> Result<(), ParseError> {
        if has {
            Err(ParseError { line: c.line, col: op_col, message: format!("`{op}` produces no result") })
        } else {
            Ok(())
        }
    };
    let has = result.is_some();
    let kind = match op.as_str() {
        "const" => {
            needs_result(c, has)?;
            let ty = c.ty()?;
            let value = c.int()?;
            InstKind::Const { ty, value }
        }
        "icmp" => {
            needs_result(c, has)?;
            let pcol = c.col();
            let p = c.word()?;
            let pred = CmpPred::ALL.into_iter().find(|q| q.mnemonic() == p).ok_or(ParseError {
                line: c.line,
                col: pcol,
                message: format!("unknown comparison `{p}`"),
            })?;
            let lhs = c.operand()?;
            c.punct(",")?;
            let rhs = c.operand()?;
            InstKind::Icmp { pred, lhs, rhs }
        }
        "not" => {
            needs_result(c, has)?;
            InstKind::Not { operand: c.operand()? }
        }
        "select" => {
            needs_result(c, has)?;
            let cond = c.operand()?;
            c.punct(",")?;
            let if_true = c.operand()?;
            c.punct(",")?;
            let if_false = c.operand()?;
            InstKind::Select { cond, if_true, if_false }
        }
        "load" => {
            needs_result(c, has)?;
            InstKind::Load { global: c.sym()? }
        }
        "store" => {
            no_result(c, has)?;
            let global = c.sym()?;
            c.punct(",")?;
            InstKind::Store { global, value: c.operand()? }
        }
        "call" => {
            let callee = c.sym()?;
            InstKind::Call { callee, args: c.args()? }
        }
        "phi" => {
            needs_result(c, has)?;
            let mut incoming = vec![c.incoming()?];
            while c.eat_punct(",") {
                incoming.push(c.incoming()?);
            }
            InstKind::Phi { incoming }
        }
        "gamma" => {
            needs_result(c, has)?;
            let if_true = c.operand()?;
            c.punct(",")?;
            let if_false = c.operand()?;
            InstKind::Gamma { gate: c.gate_clause()?, if_true, if_false }
        }
        "mu" => {
            needs_result(c, has)?;
            let init = c.incoming()?;
            c.punct(",")?;
            let iter = c.incoming()?;
            InstKind::Mu { init, iter, gate: c.gate_clause()? }
        }
        "eta" => {
            needs_result(c, has)?;
            let value = c.operand()?;
            InstKind::Eta { value, gate: c.gate_clause()? }
        }
        "br" => {
            no_result(c, has)?;
            let cond = c.operand()?;
            c.punct(",")?;
            let then_bb = c.label()?;
            c.punct(",")?;
            let else_bb = c.label()?;
            InstKind::Br { cond, then_bb, else_bb }
        }
        "jmp" => {
            no_result(c, has)?;
            InstKind::Jmp { target: c.label()? }
        }
        "ret" => {
            no_result(c, has)?;
            InstKind::Ret { value: c.operand()? }
        }
        other => match BinOp::ALL.into_iter().find(|b| b.mnemonic() == other) {
            Some(bop) => {
                needs_result(c, has)?;
                let lhs = c.operand()?;
                c.punct(",")?;
                let rhs = c.operand()?;
                InstKind::Binary { op: bop, lhs, rhs }
            }
            None => {
                return Err(ParseError {
                    line: c.line,
                    col: op_col,
                    message: format!("unknown instruction kind `{other}`"),
                })
            }
        },
    };
    c.end()?;
    Ok(Instruction { result, kind })
}

struct PendingBlock {
    label: String,
    phis: Vec<Instruction>,
    body: Vec<Instruction>,
    terminator: Option<Instruction>,
    line: usize,
}

struct PendingFunction {
    func: Function,
    line: usize,
    block: Option<PendingBlock>,
    labels: HashSet<String>,
}

/// Parse a module from its textual form.
pub fn parse_module(text: &str) -> Result<Module, ParseError> {
    let mut module = Module::default();
    let mut current: Option<PendingFunction> = None;
    let mut symbols: HashSet<String> = HashSet::new();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let toks = lex(raw, lineno)?;
        if toks.is_empty() {
            continue;
        }
        let mut c = Cursor::new(&toks, lineno, raw.chars().count());

        if let Some(pf) = current.as_mut() {
            if c.eat_punct("}") {
                c.end()?;
                let mut pf = current.take().unwrap();
                finish_block(&mut pf, lineno)?;
                if pf.func.blocks.is_empty() {
                    return Err(ParseError {
                        line: pf.line,
                        col: 1,
                        message: format!("function `@{}` has no blocks", pf.func.name),
                    });
                }
                module.functions.push(pf.func);
                continue;
            }
            // `label:`
            if toks.len() == 2 && matches!(toks[0].0, Tok::Word(_)) && toks[1].0 == Tok::Punct(":") {
                finish_block(pf, lineno)?;
                let label = c.word()?;
                if !pf.labels.insert(label.clone()) {
                    return Err(ParseError { line: lineno, col: 1, message: format!("duplicate block label `{label}`") });
                }
                pf.block = Some(PendingBlock { label, phis: vec![], body: vec![], terminator: None, line: lineno });
                continue;
            }
            let col = c.col();
            let inst = parse_instruction(&mut c)?;
            let Some(block) = pf.block.as_mut() else {
                return Err(ParseError { line: lineno, col, message: "instruction outside of a block".into() });
            };
            if block.terminator.is_some() {
                return Err(ParseError { line: lineno, col, message: "instruction after block terminator".into() });
            }
            if inst.is_terminator() {
                block.terminator = Some(inst);
            } else if inst.is_phi_kind() {
                if !block.body.is_empty() {
                    return Err(ParseError {
                        line: lineno,
                        col,
                        message: "merge instruction after the start of the block body".into(),
                    });
                }
                block.phis.push(inst);
            } else {
                block.body.push(inst);
            }
            continue;
        }

        let kw_col = c.col();
        let kw = c.word()?;
        match kw.as_str() {
            "entry" => {
                let name = c.sym()?;
                c.end()?;
                if module.entry.is_some() {
                    return Err(ParseError { line: lineno, col: kw_col, message: "duplicate entry declaration".into() });
                }
                module.entry = Some(name);
            }
            "global" => {
                let mcol = c.col();
                let m = c.word()?;
                let mutability = match m.as_str() {
                    "const" => Mutability::Const,
                    "mut" => Mutability::Mut,
                    _ => {
                        return Err(ParseError {
                            line: lineno,
                            col: mcol,
                            message: format!("expected `const` or `mut`, found `{m}`"),
                        })
                    }
                };
                let ncol = c.col();
                let name = c.sym()?;
                c.punct("=")?;
                let initial = c.int()?;
                c.end()?;
                if !symbols.insert(name.clone()) {
                    return Err(ParseError { line: lineno, col: ncol, message: format!("duplicate definition of `@{name}`") });
                }
                module.globals.push(GlobalVar { name, mutability, initial });
            }
            "extern" => {
                let ncol = c.col();
                let name = c.sym()?;
                c.punct("(")?;
                let mut params = Vec::new();
                if !c.eat_punct(")") {
                    loop {
                        params.push(c.ty()?);
                        if c.eat_punct(")") {
                            break;
                        }
                        c.punct(",")?;
                    }
                }
                c.punct("->")?;
                let ret_ty = c.ty()?;
                c.end()?;
                if !symbols.insert(name.clone()) {
                    return Err(ParseError { line: lineno, col: ncol, message: format!("duplicate definition of `@{name}`") });
                }
                module.externs.push(ExternDecl { name, params, ret_ty });
            }
            "func" => {
                let ncol = c.col();
                let name = c.sym()?;
                c.punct("(")?;
                let mut params = Vec::new();
                if !c.eat_punct(")") {
                    loop {
                        let pname = c.var()?;
                        c.punct(":")?;
                        let ty = c.ty()?;
                        params.push(Param { name: pname, ty });
                        if c.eat_punct(")") {
                            break;
                        }
                        c.punct(",")?;
                    }
                }
                c.punct("->")?;
                let ret_ty = c.ty()?;
                let mut idempotent = false;
                if matches!(c.peek(), Some(Tok::Word(w)) if w == "idempotent") {
                    c.next();
                    idempotent = true;
                }
                c.punct("{")?;
                c.end()?;
                if !symbols.insert(name.clone()) {
                    return Err(ParseError { line: lineno, col: ncol, message: format!("duplicate definition of `@{name}`") });
                }
                current = Some(PendingFunction {
                    func: Function { name, params, ret_ty, blocks: vec![], idempotent },
                    line: lineno,
                    block: None,
                    labels: HashSet::new(),
                });
            }
            other => {
                return Err(ParseError { line: lineno, col: kw_col, message: format!("unexpected `{other}` at top level") })
            }
        }
    }
    if let Some(pf) = current {
        return Err(ParseError {
            line: pf.line,
            col: 1,
            message: format!("unterminated function `@{}`", pf.func.name),
        });
    }
    Ok(module)
}

fn finish_block(pf: &mut PendingFunction, lineno: usize) -> Result<(), ParseError> {
    if let Some(b) = pf.block.take() {
        let Some(terminator) = b.terminator else {
            return Err(ParseError {
                line: b.line,
                col: 1,
                message: format!("block `{}` has no terminator (closed at line {lineno})", b.label),
            });
        };
        pf.func.blocks.push(BasicBlock { label: b.label, phis: b.phis, body: b.body, terminator });
    }
    Ok(())
}
