//! Reference interpreter for SSA and GSA functions.
//!
//! Values are `i32`; `i1` values are stored as 0 or 1. Every executed
//! instruction costs one unit of fuel. At block entry all `phi`/`mu`
//! instructions read their incoming operands in parallel, then `gamma` and
//! `eta` are evaluated in order. A `gamma` gate reads the current value of each
//! predicate it needs, short-circuiting left to right.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::ir::{BinOp, Function, GateExpr, InstKind, Instruction, Module, Operand, Type};

pub const DEFAULT_FUEL: u64 = 1_000_000;
const MAX_CALL_DEPTH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrapKind {
    DivByZero,
    OverflowDiv,
}

impl fmt::Display for TrapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrapKind::DivByZero => "div-by-zero",
            TrapKind::OverflowDiv => "overflow-div",
        })
    }
}

/// Observable events. Calls to functions marked `idempotent` are not observable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "event", rename_all = "lowercase")]
pub enum Event {
    Store { global: String, value: i32 },
    Call { callee: String, args: Vec<i32> },
    Trap { reason: TrapKind },
    Return { value: i32 },
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Store { global, value } => write!(f, "store @{global} = {value}"),
            Event::Call { callee, args } => {
                let a: Vec<String> = args.iter().map(i32::to_string).collect();
                write!(f, "call @{callee}({})", a.join(", "))
            }
            Event::Trap { reason } => write!(f, "trap {reason}"),
            Event::Return { value } => write!(f, "return {value}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum Outcome {
    Value(i32),
    Trap(TrapKind),
    FuelExhausted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Execution {
    pub outcome: Outcome,
    pub trace: Vec<Event>,
    pub steps: u64,
}

impl Execution {
    /// The parts that define program equivalence: the result and the trace.
    pub fn observable(&self) -> (Outcome, &[Event]) {
        (self.outcome, &self.trace)
    }
}

/// Conditions that indicate an ill-formed program or harness misuse rather
/// than a runtime behaviour of the program.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InterpError {
    #[error("unknown function `@{0}`")]
    UnknownFunction(String),
    #[error("call to external function `@{0}`")]
    ExternalCall(String),
    #[error("`@{func}` expects {expected} arguments, got {got}")]
    Arity { func: String, expected: usize, got: usize },
    #[error("read of undefined variable `%{var}` in `@{func}`")]
    Undefined { func: String, var: String },
    #[error("unknown global `@{0}`")]
    UnknownGlobal(String),
    #[error("branch to unknown block `{label}` in `@{func}`")]
    UnknownLabel { func: String, label: String },
    #[error("no incoming value for edge from `{pred}` in `@{func}`")]
    MissingIncoming { func: String, pred: String },
    #[error("call depth limit exceeded")]
    CallDepth,
    #[error("function `@{0}` returned no value")]
    NoReturn(String),
}

enum Flow {
    Value(i32),
    Trap(TrapKind),
    Fuel,
}

struct FnInfo<'m> {
    f: &'m Function,
    blocks: HashMap<&'m str, usize>,
    bool_vars: HashMap<&'m str, bool>,
}

/// Records criterion assignments in the top-level activation.
struct Probe<'a> {
    criterion: &'a str,
    watch: &'a [String],
    hits: Vec<(i32, Vec<Option<i32>>)>,
    limit: usize,
}

struct Machine<'m, 'p> {
    module: &'m Module,
    infos: HashMap<&'m str, FnInfo<'m>>,
    globals: HashMap<&'m str, i32>,
    fuel: u64,
    steps: u64,
    trace: Vec<Event>,
    depth: usize,
    probe: Option<Probe<'p>>,
}

impl<'m, 'p> Machine<'m, 'p> {
    fn new(module: &'m Module, fuel: u64) -> Self {
        let globals = module.globals.iter().map(|g| (g.name.as_str(), g.initial)).collect();
        Machine {
            module,
            infos: HashMap::new(),
            globals,
            fuel,
            steps: 0,
            trace: Vec::new(),
            depth: 0,
            probe: None,
        }
    }

    fn info(&mut self, name: &str) -> Result<&FnInfo<'m>, InterpError> {
        if !self.infos.contains_key(name) {
            let module = self.module;
            let Some(f) = module.function(name) else {
                return if module.externs.iter().any(|e| e.name == name) {
                    Err(InterpError::ExternalCall(name.to_string()))
                } else {
                    Err(InterpError::UnknownFunction(name.to_string()))
                };
            };
            let types = f.var_types(&|c| module.callee_ret(c));
            let mut bool_vars = HashMap::new();
            for p in &f.params {
                bool_vars.insert(p.name.as_str(), p.ty == Type::I1);
            }
            for inst in f.instructions() {
                if let Some(r) = &inst.result {
                    bool_vars.insert(r.as_str(), types.get(r) == Some(&Type::I1));
                }
            }
            self.infos.insert(&f.name, FnInfo { f, blocks: f.block_index(), bool_vars });
        }
        Ok(&self.infos[name])
    }

    fn tick(&mut self) -> bool {
        if self.fuel == 0 {
            return false;
        }
        self.fuel -= 1;
        self.steps += 1;
        true
    }

    fn call(&mut self, name: &str, args: &[i32]) -> Result<Flow, InterpError> {
        let info = self.info(name)?;
        let f: &'m Function = info.f;
        if f.params.len() != args.len() {
            return Err(InterpError::Arity { func: f.name.clone(), expected: f.params.len(), got: args.len() });
        }
        if self.depth >= MAX_CALL_DEPTH {
            return Err(InterpError::CallDepth);
        }
        let top = self.depth == 0;
        self.depth += 1;
        let r = self.exec(f, args, top);
        self.depth -= 1;
        r
    }

    fn exec(&mut self, f: &'m Function, args: &[i32], top: bool) -> Result<Flow, InterpError> {
        let mut env: HashMap<&'m str, i32> = HashMap::new();
        for (p, &a) in f.params.iter().zip(args) {
            env.insert(&p.name, normalize(a, p.ty == Type::I1));
        }
        let mut cur = 0usize;
        let mut prev: Option<usize> = None;
        if f.blocks.is_empty() {
            return Err(InterpError::NoReturn(f.name.clone()));
        }
        loop {
            let block = &f.blocks[cur];
            // Parallel phi/mu resolution on the incoming edge.
            if let Some(p) = prev {
                let pred = f.blocks[p].label.as_str();
                let mut staged: Vec<(&'m str, i32)> = Vec::new();
                for inst in &block.phis {
                    if !matches!(inst.kind, InstKind::Phi { .. } | InstKind::Mu { .. }) {
                        continue;
                    }
                    if !self.tick() {
                        return Ok(Flow::Fuel);
                    }
                    let v = inst
                        .incoming()
                        .into_iter()
                        .find(|(l, _)| *l == pred)
                        .map(|(_, v)| v)
                        .ok_or_else(|| InterpError::MissingIncoming { func: f.name.clone(), pred: pred.to_string() })?;
                    let val = read(&env, f, v)?;
                    staged.push((inst.result.as_deref().unwrap_or_default(), val));
                }
                for (r, v) in staged {
                    self.assign(&mut env, r, v, top);
                }
            }
            for inst in &block.phis {
                match &inst.kind {
                    InstKind::Gamma { gate, if_true, if_false } => {
                        if !self.tick() {
                            return Ok(Flow::Fuel);
                        }
                        let sel = eval_gate(gate, &env, f)?;
                        let v = read(&env, f, if sel { if_true } else { if_false })?;
                        self.assign(&mut env, inst.result.as_deref().unwrap_or_default(), v, top);
                    }
                    InstKind::Eta { value, .. } => {
                        if !self.tick() {
                            return Ok(Flow::Fuel);
                        }
                        let v = read(&env, f, value)?;
                        self.assign(&mut env, inst.result.as_deref().unwrap_or_default(), v, top);
                    }
                    _ => {}
                }
            }
            for inst in &block.body {
                if !self.tick() {
                    return Ok(Flow::Fuel);
                }
                match self.step(f, inst, &env)? {
                    Step::Def(v) => {
                        if let Some(r) = &inst.result {
                            self.assign(&mut env, r, v, top);
                        }
                    }
                    Step::None => {}
                    Step::Stop(flow) => return Ok(flow),
                }
            }
            if !self.tick() {
                return Ok(Flow::Fuel);
            }
            let next = match &block.terminator.kind {
                InstKind::Ret { value } => {
                    let v = read(&env, f, value)?;
                    if top {
                        self.trace.push(Event::Return { value: v });
                    }
                    return Ok(Flow::Value(v));
                }
                InstKind::Jmp { target } => target,
                InstKind::Br { cond, then_bb, else_bb } => {
                    if read(&env, f, cond)? != 0 {
                        then_bb
                    } else {
                        else_bb
                    }
                }
                _ => return Err(InterpError::NoReturn(f.name.clone())),
            };
            let idx = *self.infos[f.name.as_str()]
                .blocks
                .get(next.as_str())
                .ok_or_else(|| InterpError::UnknownLabel { func: f.name.clone(), label: next.clone() })?;
            prev = Some(cur);
            cur = idx;
        }
    }

    fn assign(&mut self, env: &mut HashMap<&'m str, i32>, var: &'m str, v: i32, top: bool) {
        env.insert(var, v);
        if top {
            if let Some(p) = &mut self.probe {
                if p.criterion == var && p.hits.len() < p.limit {
                    let snap = p.watch.iter().map(|w| env.get(w.as_str()).copied()).collect();
                    p.hits.push((v, snap));
                }
            }
        }
    }

    fn step(&mut self, f: &'m Function, inst: &'m Instruction, env: &HashMap<&'m str, i32>) -> Result<Step, InterpError> {
        let rd = |o: &Operand| read(env, f, o);
        let is_bool = |o: &Operand| match o {
            Operand::Var(v) => self.infos[f.name.as_str()].bool_vars.get(v.as_str()).copied().unwrap_or(false),
            Operand::Imm(_) => false,
        };
        Ok(match &inst.kind {
            InstKind::Const { value, ty } => Step::Def(normalize(*value, *ty == Type::I1)),
            InstKind::Binary { op, lhs, rhs } => {
                let (a, b) = (rd(lhs)?, rd(rhs)?);
                match binop(*op, a, b) {
                    Ok(v) => Step::Def(v),
                    Err(t) => {
                        self.trace.push(Event::Trap { reason: t });
                        Step::Stop(Flow::Trap(t))
                    }
                }
            }
            InstKind::Icmp { pred, lhs, rhs } => Step::Def(pred.eval(rd(lhs)?, rd(rhs)?) as i32),
            InstKind::Not { operand } => {
                let a = rd(operand)?;
                Step::Def(if is_bool(operand) { (a == 0) as i32 } else { !a })
            }
            InstKind::Select { cond, if_true, if_false } => {
                Step::Def(if rd(cond)? != 0 { rd(if_true)? } else { rd(if_false)? })
            }
            InstKind::Load { global } => Step::Def(
                *self.globals.get(global.as_str()).ok_or_else(|| InterpError::UnknownGlobal(global.clone()))?,
            ),
            InstKind::Store { global, value } => {
                let v = rd(value)?;
                let slot =
                    self.globals.get_mut(global.as_str()).ok_or_else(|| InterpError::UnknownGlobal(global.clone()))?;
                *slot = v;
                self.trace.push(Event::Store { global: global.clone(), value: v });
                Step::None
            }
            InstKind::Call { callee, args } => {
                let vals = args.iter().map(rd).collect::<Result<Vec<_>, _>>()?;
                if !self.module.is_idempotent_fn(callee) {
                    self.trace.push(Event::Call { callee: callee.clone(), args: vals.clone() });
                }
                // Probes only observe the top-level activation.
                let saved = self.probe.take();
                let r = self.call(callee, &vals);
                self.probe = saved;
                match r? {
                    Flow::Value(v) => Step::Def(v),
                    other => Step::Stop(other),
                }
            }
            _ => return Err(InterpError::NoReturn(f.name.clone())),
        })
    }
}

enum Step {
    Def(i32),
    None,
    Stop(Flow),
}

fn normalize(v: i32, boolean: bool) -> i32 {
    if boolean {
        (v != 0) as i32
    } else {
        v
    }
}

fn read(env: &HashMap<&str, i32>, f: &Function, o: &Operand) -> Result<i32, InterpError> {
    match o {
        Operand::Imm(i) => Ok(*i),
        Operand::Var(v) => env
            .get(v.as_str())
            .copied()
            .ok_or_else(|| InterpError::Undefined { func: f.name.clone(), var: v.clone() }),
    }
}

fn eval_gate(gate: &GateExpr, env: &HashMap<&str, i32>, f: &Function) -> Result<bool, InterpError> {
    gate.eval(&mut |p: &str| {
        env.get(p)
            .map(|v| *v != 0)
            .ok_or_else(|| InterpError::Undefined { func: f.name.clone(), var: p.to_string() })
    })
}

/// Arithmetic with wrapping overflow; `div`/`rem` trap on a zero divisor and
/// on `i32::MIN / -1`.
pub fn binop(op: BinOp, a: i32, b: i32) -> Result<i32, TrapKind> {
    Ok(match op {
        BinOp::Add => a.wrapping_add(b),
        BinOp::Sub => a.wrapping_sub(b),
        BinOp::Mul => a.wrapping_mul(b),
        BinOp::Div | BinOp::Rem => {
            if b == 0 {
                return Err(TrapKind::DivByZero);
            }
            if a == i32::MIN && b == -1 {
                return Err(TrapKind::OverflowDiv);
            }
            if op == BinOp::Div {
                a / b
            } else {
                a % b
            }
        }
        BinOp::And => a & b,
        BinOp::Or => a | b,
        BinOp::Xor => a ^ b,
    })
}

/// Run `func` with `args` under a step budget.
pub fn run_function(m: &Module, func: &str, args: &[i32], fuel: u64) -> Result<Execution, InterpError> {
    let mut mach = Machine::new(m, fuel);
    let flow = mach.call(func, args)?;
    Ok(finish(mach, flow))
}

fn finish(mach: Machine, flow: Flow) -> Execution {
    let outcome = match flow {
        Flow::Value(v) => Outcome::Value(v),
        Flow::Trap(t) => Outcome::Trap(t),
        Flow::Fuel => Outcome::FuelExhausted,
    };
    Execution { outcome, trace: mach.trace, steps: mach.steps }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SliceValue {
    Value(i32),
    /// The criterion was never assigned on this input.
    Undefined,
    Trap(TrapKind),
    FuelExhausted,
}

/// Last value assigned to `criterion` while running `func`.
pub fn eval_slice_value(
    m: &Module,
    func: &str,
    criterion: &str,
    args: &[i32],
    fuel: u64,
) -> Result<SliceValue, InterpError> {
    let obs = observe_criterion(m, func, criterion, &[], args, fuel, usize::MAX)?;
    Ok(match obs.outcome {
        Outcome::Trap(t) => SliceValue::Trap(t),
        Outcome::FuelExhausted => SliceValue::FuelExhausted,
        Outcome::Value(_) => match obs.hits.last() {
            Some((v, _)) => SliceValue::Value(*v),
            None => SliceValue::Undefined,
        },
    })
}

/// Every assignment to a criterion, paired with the values `watch` held at
/// that moment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub outcome: Outcome,
    pub hits: Vec<(i32, Vec<Option<i32>>)>,
}

/// Run `func` and record up to `limit` assignments of `criterion` in the
/// top-level activation, each with a snapshot of the `watch` variables.
pub fn observe_criterion(
    m: &Module,
    func: &str,
    criterion: &str,
    watch: &[String],
    args: &[i32],
    fuel: u64,
    limit: usize,
) -> Result<Observation, InterpError> {
    let mut mach = Machine::new(m, fuel);
    mach.probe = Some(Probe { criterion, watch, hits: Vec::new(), limit });
    let flow = mach.call(func, args)?;
    let hits = mach.probe.take().map(|p| p.hits).unwrap_or_default();
    let exec = finish(mach, flow);
    Ok(Observation { outcome: exec.outcome, hits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_module;

    fn run(text: &str, args: &[i32]) -> Execution {
        let m = parse_module(text).unwrap();
        let name = m.functions[0].name.clone();
        run_function(&m, &name, args, DEFAULT_FUEL).unwrap()
    }

    #[test]
    fn division_by_zero_traps() {
        let e = run("func @f(%a: i32) -> i32 {\nb:\n %x = div %a, 0\n ret %x\n}", &[4]);
        assert_eq!(e.outcome, Outcome::Trap(TrapKind::DivByZero));
        assert_eq!(e.trace, vec![Event::Trap { reason: TrapKind::DivByZero }]);
    }

    #[test]
    fn overflow_division_traps() {
        let e = run("func @f(%a: i32) -> i32 {\nb:\n %x = rem %a, -1\n ret %x\n}", &[i32::MIN]);
        assert_eq!(e.outcome, Outcome::Trap(TrapKind::OverflowDiv));
    }

    #[test]
    fn loop_sums_and_runs_out_of_fuel() {
        let text = "func @f(%n: i32) -> i32 {
entry:
  jmp head
head:
  %i = phi [entry: 0], [body: %i2]
  %s = phi [entry: 0], [body: %s2]
  %c = icmp lt %i, %n
  br %c, body, exit
body:
  %i2 = add %i, 1
  %s2 = add %s, %i2
  jmp head
exit:
  ret %s
}";
        assert_eq!(run(text, &[4]).outcome, Outcome::Value(10));
        let m = parse_module(text).unwrap();
        assert_eq!(run_function(&m, "f", &[1000], 50).unwrap().outcome, Outcome::FuelExhausted);
        assert_eq!(eval_slice_value(&m, "f", "i2", &[3], DEFAULT_FUEL).unwrap(), SliceValue::Value(3));
        assert_eq!(eval_slice_value(&m, "f", "i2", &[0], DEFAULT_FUEL).unwrap(), SliceValue::Undefined);
    }

    #[test]
    fn phis_read_in_parallel() {
        // swap through a loop: both phis must see the values from the latch edge
        let text = "func @f(%n: i32) -> i32 {
entry:
  jmp head
head:
  %a = phi [entry: 1], [head: %b]
  %b = phi [entry: 2], [head: %a]
  %k = phi [entry: 0], [head: %k2]
  %k2 = add %k, 1
  %c = icmp lt %k2, %n
  br %c, head, out
out:
  %r = mul %a, 10
  %s = add %r, %b
  ret %s
}";
        assert_eq!(run(text, &[1]).outcome, Outcome::Value(12));
        assert_eq!(run(text, &[2]).outcome, Outcome::Value(21));
    }

    #[test]
    fn trace_records_stores_and_calls() {
        let text = "global mut @G = 0
func @h(%x: i32) -> i32 {
b:
  store @G, %x
  ret 0
}
func @f(%a: i32) -> i32 {
b:
  %r = call @h(%a)
  ret %r
}";
        let m = parse_module(text).unwrap();
        let e = run_function(&m, "f", &[7], DEFAULT_FUEL).unwrap();
        assert_eq!(
            e.trace,
            vec![
                Event::Call { callee: "h".into(), args: vec![7] },
                Event::Store { global: "G".into(), value: 7 },
                Event::Return { value: 0 },
            ]
        );
    }

    #[test]
    fn boolean_not_flips_a_bit() {
        let e = run("func @f(%a: i32) -> i32 {\nb:\n %c = icmp eq %a, 0\n %n = not %c\n %z = select %n, 5, 6\n %w = not %a\n %r = add %z, %w\n ret %r\n}", &[0]);
        assert_eq!(e.outcome, Outcome::Value(6 + !0));
    }

    #[test]
    fn gamma_short_circuits_unexecuted_predicates() {
        let text = "func @f(%a: i32) -> i32 {
b0:
  %p0 = icmp gt %a, 0
  br %p0, b1, b2
b1:
  %p1 = icmp gt %a, 5
  br %p1, b3, b2
b2:
  jmp b3
b3:
  %x = gamma 1, 2 gate(%p0 & %p1)
  ret %x
}";
        assert_eq!(run(text, &[-1]).outcome, Outcome::Value(2));
        assert_eq!(run(text, &[3]).outcome, Outcome::Value(2));
        assert_eq!(run(text, &[9]).outcome, Outcome::Value(1));
    }
}
