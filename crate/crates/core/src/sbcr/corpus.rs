//! Modules with planted copies of one idempotent slice amid effectful noise.
//!
//! A planted slice of size `n` is `n - 1` chained `not`s of `%a` followed by
//! an `add` with `%a` (one input) or `%b` (two inputs). `not` is not a
//! criterion kind, so the `add` is the only criterion the slice contributes.
//! Noise is built from calls to a storing helper, divisions and stores, so
//! every noise criterion is rejected by the idempotence filter.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ir::{
    BasicBlock, BinOp, Function, GlobalVar, InstKind, Instruction, Module, Mutability, Operand, Param, Type,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub copies: usize,
    pub slice_size: usize,
    /// 1 or 2.
    pub params: usize,
    /// Noise instructions per host function.
    pub noise: usize,
    /// Planted copies per host function.
    pub per_host: usize,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec { copies: 12, slice_size: 10, params: 1, noise: 6, per_host: 1 }
    }
}

struct Host {
    body: Vec<Instruction>,
    next: usize,
    noise_vals: Vec<String>,
}

impl Host {
    fn fresh(&mut self, base: &str) -> String {
        self.next += 1;
        format!("{base}{}", self.next)
    }

    fn noise(&mut self, rng: &mut ChaCha8Rng) {
        let src = if self.noise_vals.is_empty() || rng.gen_bool(0.3) {
            Operand::var("a")
        } else {
            Operand::var(self.noise_vals[rng.gen_range(0..self.noise_vals.len())].clone())
        };
        match rng.gen_range(0..3) {
            0 => {
                let r = self.fresh("e");
                self.body.push(Instruction::new(&r, InstKind::Call { callee: "effect".into(), args: vec![src] }));
                self.noise_vals.push(r);
            }
            1 => {
                let r = self.fresh("d");
                let op = if rng.gen_bool(0.5) { BinOp::Div } else { BinOp::Rem };
                self.body.push(Instruction::new(&r, InstKind::Binary { op, lhs: src, rhs: Operand::Imm(rng.gen_range(2..10)) }));
                self.noise_vals.push(r);
            }
            _ => self.body.push(Instruction::effect(InstKind::Store { global: "sink".into(), value: src })),
        }
    }
}

/// Deterministic module for `spec`: hosts `@host0..` each take `(%a, %b)`,
/// store their planted criteria to `@out` and return the last one; `@main`
/// calls every host and is the entry.
pub fn generate_corpus(seed: u64, spec: &CorpusSpec) -> Module {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_host = spec.per_host.max(1);
    let hosts = spec.copies.div_ceil(per_host).max(1);
    let mut m = Module {
        globals: vec![
            GlobalVar { name: "out".into(), mutability: Mutability::Mut, initial: 0 },
            GlobalVar { name: "sink".into(), mutability: Mutability::Mut, initial: 0 },
        ],
        externs: vec![],
        functions: vec![effect_helper()],
        entry: Some("main".into()),
    };
    let mut left = spec.copies;
    for h in 0..hosts {
        let here = left.min(per_host);
        left -= here;
        let mut host = Host { body: Vec::new(), next: 0, noise_vals: Vec::new() };
        // interleave: noise count split at random points around each copy
        let mut noise_left = spec.noise;
        let mut last = Operand::Imm(0);
        for _ in 0..here {
            let before = rng.gen_range(0..=noise_left);
            noise_left -= before;
            for _ in 0..before {
                host.noise(&mut rng);
            }
            let crit = plant(&mut host, spec);
            host.body.push(Instruction::effect(InstKind::Store { global: "out".into(), value: Operand::var(&crit) }));
            last = Operand::var(crit);
        }
        for _ in 0..noise_left {
            host.noise(&mut rng);
        }
        let mut b = BasicBlock::new("entry", Instruction::ret(last));
        b.body = host.body;
        m.functions.push(Function {
            name: format!("host{h}"),
            params: vec![Param { name: "a".into(), ty: Type::I32 }, Param { name: "b".into(), ty: Type::I32 }],
            ret_ty: Type::I32,
            blocks: vec![b],
            idempotent: false,
        });
    }
    let mut main = BasicBlock::new("entry", Instruction::ret(Operand::Imm(0)));
    for h in 0..hosts {
        let r = format!("r{h}");
        main.body.push(Instruction::new(
            &r,
            InstKind::Call { callee: format!("host{h}"), args: vec![Operand::var("a"), Operand::var("b")] },
        ));
        main.body.push(Instruction::effect(InstKind::Store { global: "out".into(), value: Operand::var(r) }));
    }
    m.functions.push(Function {
        name: "main".into(),
        params: vec![Param { name: "a".into(), ty: Type::I32 }, Param { name: "b".into(), ty: Type::I32 }],
        ret_ty: Type::I32,
        blocks: vec![main],
        idempotent: false,
    });
    m
}

/// Emit one planted slice; returns its criterion.
fn plant(host: &mut Host, spec: &CorpusSpec) -> String {
    let mut cur = Operand::var("a");
    for _ in 1..spec.slice_size.max(1) {
        let t = host.fresh("t");
        host.body.push(Instruction::new(&t, InstKind::Not { operand: cur }));
        cur = Operand::var(t);
    }
    let other = if spec.params >= 2 { "b" } else { "a" };
    let c = host.fresh("c");
    host.body.push(Instruction::new(&c, InstKind::Binary { op: BinOp::Add, lhs: cur, rhs: Operand::var(other) }));
    c
}

/// `@effect(%x)` stores `%x` to `@sink` and returns `%x + 1`.
fn effect_helper() -> Function {
    let mut b = BasicBlock::new("entry", Instruction::ret(Operand::var("y")));
    b.body = vec![
        Instruction::effect(InstKind::Store { global: "sink".into(), value: Operand::var("x") }),
        Instruction::new("y", InstKind::Binary { op: BinOp::Add, lhs: Operand::var("x"), rhs: Operand::Imm(1) }),
    ];
    Function {
        name: "effect".into(),
        params: vec![Param { name: "x".into(), ty: Type::I32 }],
        ret_ty: Type::I32,
        blocks: vec![b],
        idempotent: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{print_module, validate};

    #[test]
    fn deterministic_and_valid() {
        let spec = CorpusSpec { copies: 5, per_host: 2, noise: 9, ..Default::default() };
        let a = generate_corpus(7, &spec);
        assert_eq!(print_module(&a), print_module(&generate_corpus(7, &spec)));
        assert!(validate(&a).iter().all(|d| !d.is_error()), "{:?}", validate(&a));
        assert_eq!(a.functions.len(), 1 + 3 + 1);
    }

    #[test]
    fn planted_slice_size() {
        let m = generate_corpus(1, &CorpusSpec { copies: 1, noise: 0, ..Default::default() });
        let host = m.function("host0").unwrap();
        // slice, the store, the ret
        assert_eq!(host.instruction_count(), 10 + 2);
    }
}
