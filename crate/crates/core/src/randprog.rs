//! Random reducible programs for differential testing.
//!
//! Programs are generated as structured code (assignments, `if`, counted
//! `while` loops with an optional early `break`) over a few mutable integer
//! variables and lowered straight into SSA. Every loop runs a bounded number
//! of iterations, so generated programs terminate.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ir::{
    BasicBlock, BinOp, CmpPred, ExternDecl, Function, GlobalVar, InstKind, Instruction, Module, Mutability,
    Operand, Param, Type,
};

#[derive(Debug, Clone)]
pub struct RandConfig {
    pub params: usize,
    pub vars: usize,
    /// Statements per block before nesting is considered.
    pub stmts: usize,
    pub max_depth: u32,
    pub loops: bool,
    /// Stores, calls and divisions.
    pub effects: bool,
}

impl Default for RandConfig {
    fn default() -> Self {
        RandConfig { params: 3, vars: 4, stmts: 4, max_depth: 3, loops: true, effects: true }
    }
}

struct Builder<'r> {
    rng: &'r mut ChaCha8Rng,
    cfg: &'r RandConfig,
    blocks: Vec<BasicBlock>,
    cur: usize,
    next_var: usize,
    next_label: usize,
    params: Vec<String>,
}

const PLACEHOLDER: &str = "__open__";

impl Builder<'_> {
    fn var(&mut self) -> String {
        self.next_var += 1;
        format!("t{}", self.next_var)
    }

    fn new_block(&mut self, hint: &str) -> usize {
        self.next_label += 1;
        let label = format!("{hint}{}", self.next_label);
        self.blocks.push(BasicBlock::new(label, Instruction::jmp(PLACEHOLDER)));
        self.blocks.len() - 1
    }

    fn label(&self, b: usize) -> String {
        self.blocks[b].label.clone()
    }

    fn emit(&mut self, kind: InstKind) -> Operand {
        let v = self.var();
        self.blocks[self.cur].body.push(Instruction::new(v.clone(), kind));
        Operand::Var(v)
    }

    fn effect(&mut self, kind: InstKind) {
        self.blocks[self.cur].body.push(Instruction::effect(kind));
    }

    fn terminate(&mut self, t: Instruction) {
        self.blocks[self.cur].terminator = t;
    }

    fn atom(&mut self, env: &[Operand]) -> Operand {
        if self.rng.gen_bool(0.8) {
            env.choose(self.rng).unwrap().clone()
        } else {
            Operand::Imm(self.rng.gen_range(-4..10))
        }
    }

    fn cond(&mut self, env: &[Operand]) -> Operand {
        let lhs = env.choose(self.rng).unwrap().clone();
        let rhs = self.atom(env);
        let pred = *CmpPred::ALL.choose(self.rng).unwrap();
        self.emit(InstKind::Icmp { pred, lhs, rhs })
    }

    fn expr(&mut self, env: &[Operand]) -> Operand {
        let roll = self.rng.gen_range(0..100);
        match roll {
            0..=54 => {
                let ops = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::And, BinOp::Or, BinOp::Xor];
                let op = *ops.choose(self.rng).unwrap();
                let lhs = env.choose(self.rng).unwrap().clone();
                let rhs = self.atom(env);
                self.emit(InstKind::Binary { op, lhs, rhs })
            }
            55..=64 => {
                let c = self.cond(env);
                let a = self.atom(env);
                let b = self.atom(env);
                self.emit(InstKind::Select { cond: c, if_true: a, if_false: b })
            }
            65..=71 => {
                let a = env.choose(self.rng).unwrap().clone();
                self.emit(InstKind::Not { operand: a })
            }
            72..=79 => self.emit(InstKind::Load { global: "K".into() }),
            80..=85 if self.cfg.effects => self.emit(InstKind::Load { global: "G".into() }),
            86..=91 if self.cfg.effects => {
                let a = self.atom(env);
                self.emit(InstKind::Call { callee: "h".into(), args: vec![a] })
            }
            92..=99 if self.cfg.effects => {
                let op = if self.rng.gen_bool(0.5) { BinOp::Div } else { BinOp::Rem };
                let lhs = env.choose(self.rng).unwrap().clone();
                let rhs = if self.rng.gen_bool(0.7) {
                    Operand::Imm(*[1, 2, 3, 5, 7, -3].choose(self.rng).unwrap())
                } else {
                    self.atom(env)
                };
                self.emit(InstKind::Binary { op, lhs, rhs })
            }
            _ => {
                let lhs = env.choose(self.rng).unwrap().clone();
                let rhs = self.atom(env);
                self.emit(InstKind::Binary { op: BinOp::Add, lhs, rhs })
            }
        }
    }

    fn block(&mut self, env: &mut Vec<Operand>, depth: u32) {
        let n = self.rng.gen_range(1..=self.cfg.stmts);
        for _ in 0..n {
            self.stmt(env, depth);
        }
    }

    fn stmt(&mut self, env: &mut Vec<Operand>, depth: u32) {
        let nest = depth < self.cfg.max_depth;
        let roll = self.rng.gen_range(0..100);
        if nest && roll < 18 {
            self.lower_if(env, depth);
        } else if nest && self.cfg.loops && roll < 30 {
            self.lower_while(env, depth);
        } else if self.cfg.effects && roll < 36 {
            let v = self.atom(env);
            self.effect(InstKind::Store { global: "G".into(), value: v });
        } else {
            let i = self.rng.gen_range(0..env.len());
            env[i] = self.expr(env);
        }
    }

    fn lower_if(&mut self, env: &mut Vec<Operand>, depth: u32) {
        let c = self.cond(env);
        let then_b = self.new_block("then");
        let else_b = self.new_block("else");
        let join = self.new_block("join");
        let (tl, el) = (self.label(then_b), self.label(else_b));
        self.terminate(Instruction::effect(InstKind::Br { cond: c, then_bb: tl, else_bb: el }));

        let mut env_t = env.clone();
        self.cur = then_b;
        self.block(&mut env_t, depth + 1);
        let end_t = self.cur;
        let jl = self.label(join);
        self.terminate(Instruction::jmp(jl.clone()));

        let mut env_e = env.clone();
        self.cur = else_b;
        if self.rng.gen_bool(0.6) {
            self.block(&mut env_e, depth + 1);
        }
        let end_e = self.cur;
        self.terminate(Instruction::jmp(jl));

        self.cur = join;
        let (lt, le) = (self.label(end_t), self.label(end_e));
        for i in 0..env.len() {
            if env_t[i] == env_e[i] {
                env[i] = env_t[i].clone();
            } else {
                let v = self.var();
                self.blocks[join].phis.push(Instruction::new(
                    v.clone(),
                    InstKind::Phi { incoming: vec![(lt.clone(), env_t[i].clone()), (le.clone(), env_e[i].clone())] },
                ));
                env[i] = Operand::Var(v);
            }
        }
    }

    fn lower_while(&mut self, env: &mut Vec<Operand>, depth: u32) {
        let bound = if self.rng.gen_bool(0.5) {
            Operand::Imm(self.rng.gen_range(0..5))
        } else {
            let p = Operand::var(self.params.choose(self.rng).unwrap().clone());
            self.emit(InstKind::Binary { op: BinOp::And, lhs: p, rhs: Operand::Imm(3) })
        };
        let pre = self.cur;
        let header = self.new_block("head");
        let body = self.new_block("body");
        let exit = self.new_block("exit");
        let hl = self.label(header);
        self.terminate(Instruction::jmp(hl.clone()));
        let pre_label = self.label(pre);

        // Header phis: loop counter plus every variable.
        let counter = self.var();
        let mut header_env: Vec<Operand> = Vec::new();
        let mut phi_names = Vec::new();
        for _ in 0..env.len() {
            let v = self.var();
            phi_names.push(v.clone());
            header_env.push(Operand::Var(v));
        }
        self.cur = header;
        let c = self.emit(InstKind::Icmp { pred: CmpPred::Lt, lhs: Operand::var(&counter), rhs: bound });
        let (bl, xl) = (self.label(body), self.label(exit));
        self.terminate(Instruction::effect(InstKind::Br { cond: c, then_bb: bl, else_bb: xl.clone() }));

        self.cur = body;
        let mut body_env = header_env.clone();
        let mut breaks: Vec<(String, Vec<Operand>)> = Vec::new();
        if self.rng.gen_bool(0.3) {
            let bc = self.cond(&body_env);
            let cont = self.new_block("cont");
            let brk = self.new_block("brk");
            let (cl, kl) = (self.label(cont), self.label(brk));
            self.terminate(Instruction::effect(InstKind::Br { cond: bc, then_bb: kl, else_bb: cl }));
            self.cur = brk;
            self.terminate(Instruction::jmp(xl.clone()));
            breaks.push((self.label(brk), body_env.clone()));
            self.cur = cont;
        }
        self.block(&mut body_env, depth + 1);
        let next = self.emit(InstKind::Binary { op: BinOp::Add, lhs: Operand::var(&counter), rhs: Operand::Imm(1) });
        let latch_label = self.label(self.cur);
        self.terminate(Instruction::jmp(hl));

        let mut phis = vec![Instruction::new(
            counter,
            InstKind::Phi { incoming: vec![(pre_label.clone(), Operand::Imm(0)), (latch_label.clone(), next)] },
        )];
        for (i, name) in phi_names.iter().enumerate() {
            phis.push(Instruction::new(
                name.clone(),
                InstKind::Phi {
                    incoming: vec![(pre_label.clone(), env[i].clone()), (latch_label.clone(), body_env[i].clone())],
                },
            ));
        }
        self.blocks[header].phis = phis;

        self.cur = exit;
        let header_label = self.label(header);
        for i in 0..env.len() {
            let mut incoming = vec![(header_label.clone(), header_env[i].clone())];
            for (bl, benv) in &breaks {
                incoming.push((bl.clone(), benv[i].clone()));
            }
            if incoming.iter().all(|(_, v)| *v == incoming[0].1) {
                env[i] = incoming[0].1.clone();
            } else {
                let v = self.var();
                self.blocks[exit].phis.push(Instruction::new(v.clone(), InstKind::Phi { incoming }));
                env[i] = Operand::Var(v);
            }
        }
    }
}

/// Module with globals `K` (const) and `G` (mut), a helper `h` that stores
/// its argument, and a random function `f`.
pub fn random_module(seed: u64, cfg: &RandConfig) -> Module {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params: Vec<String> = (0..cfg.params.max(1)).map(|i| format!("a{i}")).collect();
    let mut b = Builder {
        rng: &mut rng,
        cfg,
        blocks: Vec::new(),
        cur: 0,
        next_var: 0,
        next_label: 0,
        params: params.clone(),
    };
    b.cur = b.new_block("entry");
    let mut env: Vec<Operand> = (0..cfg.vars.max(1))
        .map(|i| if i < params.len() { Operand::var(&params[i]) } else { Operand::Imm(i as i32) })
        .collect();
    b.block(&mut env, 0);
    // A few trailing assignments give every program some straight-line criteria.
    for _ in 0..2 {
        let i = b.rng.gen_range(0..env.len());
        env[i] = b.expr(&env);
    }
    let r = env.choose(b.rng).unwrap().clone();
    if cfg.effects {
        let s = env.choose(b.rng).unwrap().clone();
        b.effect(InstKind::Store { global: "G".into(), value: s });
    }
    b.terminate(Instruction::ret(r));
    let blocks = std::mem::take(&mut b.blocks);
    let f = Function {
        name: "f".into(),
        params: params.iter().map(|p| Param { name: p.clone(), ty: Type::I32 }).collect(),
        ret_ty: Type::I32,
        blocks,
        idempotent: false,
    };
    let mut h = Function {
        name: "h".into(),
        params: vec![Param { name: "x".into(), ty: Type::I32 }],
        ret_ty: Type::I32,
        blocks: vec![BasicBlock::new("b0", Instruction::ret(Operand::var("y")))],
        idempotent: false,
    };
    h.blocks[0].body = vec![
        Instruction::effect(InstKind::Store { global: "G".into(), value: Operand::var("x") }),
        Instruction::new("y", InstKind::Binary { op: BinOp::Add, lhs: Operand::var("x"), rhs: Operand::Imm(1) }),
    ];
    Module {
        globals: vec![
            GlobalVar { name: "K".into(), mutability: Mutability::Const, initial: 7 },
            GlobalVar { name: "G".into(), mutability: Mutability::Mut, initial: 0 },
        ],
        externs: Vec::<ExternDecl>::new(),
        functions: vec![h, f],
        entry: Some("f".into()),
    }
}

/// Argument vectors for `n` runs, mixing small and boundary values.
pub fn sample_args(seed: u64, arity: usize, n: usize) -> Vec<Vec<i32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    (0..n)
        .map(|_| {
            (0..arity)
                .map(|_| match rng.gen_range(0..10) {
                    0 => *[i32::MIN, i32::MAX, -1, 0].choose(&mut rng).unwrap(),
                    1..=2 => rng.gen_range(-1000..1000),
                    _ => rng.gen_range(-3..8),
                })
                .collect()
        })
        .collect()
}
