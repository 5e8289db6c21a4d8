//! Slice-based code-size reduction: outline every legal slice, group the
//! structurally identical ones, keep the groups the cost model admits and
//! commit their rewrites.
//!
//! Nothing is committed until gating has finished, so a discarded group
//! never touches the module. Functions without a retained member are
//! returned byte-identical; changed functions are the normalized form plus
//! rewrites, then cleaned up.

mod cleanup;
mod corpus;

use std::collections::{HashMap, HashSet};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gsa::{convert, GsaError};
use crate::ir::{Function, Module};
use crate::merge::group_slices;
use crate::outline::{apply_rewrites, outline_slice, outlined_name, CallRewrite, OutlineError, OutlinedSlice, Outliner};
use crate::slice::{assess, backward_slice_in, enumerate_criteria};

pub use cleanup::{cleanup, cleanup_with};
pub use corpus::{generate_corpus, CorpusSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostModelConfig {
    pub min_instrs_exclusive: usize,
    pub max_instrs: usize,
    pub max_params: usize,
    pub min_occurrences: usize,
}

impl Default for CostModelConfig {
    fn default() -> Self {
        CostModelConfig { min_instrs_exclusive: 3, max_instrs: 20, max_params: 1, min_occurrences: 10 }
    }
}

impl CostModelConfig {
    /// Thresholds violated by `(i, p, c)`; empty when the triple is admitted.
    pub fn violations(&self, i: usize, p: usize, c: usize) -> Vec<String> {
        let mut v = Vec::new();
        if i <= self.min_instrs_exclusive {
            v.push(format!("I={i} <= {}", self.min_instrs_exclusive));
        }
        if i > self.max_instrs {
            v.push(format!("I={i} > {}", self.max_instrs));
        }
        if p > self.max_params {
            v.push(format!("P={p} > {}", self.max_params));
        }
        if c < self.min_occurrences {
            v.push(format!("C={c} < {}", self.min_occurrences));
        }
        v
    }

    pub fn admits(&self, i: usize, p: usize, c: usize) -> bool {
        self.violations(i, p, c).is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Retained,
    Discarded,
    /// Admitted, but too few members were left once members already
    /// covered by a committed slice were dropped.
    Subsumed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Member {
    pub function: String,
    pub criterion: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroupReport {
    pub canonical: String,
    pub instrs: usize,
    pub params: usize,
    /// Members committed, or that would have been.
    pub occurrences: usize,
    pub candidates: usize,
    pub decision: Decision,
    pub violations: Vec<String>,
    pub members: Vec<Member>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Skipped {
    pub function: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FunctionCount {
    pub function: String,
    pub before: usize,
    pub after: usize,
}

/// Seconds. Outline sub-phases are summed over worker threads.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Timers {
    pub total: f64,
    pub outline: f64,
    pub merge: f64,
    pub remove_instructions: f64,
    pub simplify: f64,
    pub gsa_construction: f64,
    pub slice_identification: f64,
    pub can_outline: f64,
    pub function_outline: f64,
}

impl Timers {
    pub fn phase_sum(&self) -> f64 {
        self.outline + self.merge + self.remove_instructions + self.simplify
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SbcrReport {
    pub instcount_before: usize,
    pub instcount_after: usize,
    pub delta: i64,
    pub delta_percent: f64,
    pub functions_before: usize,
    pub functions_after: usize,
    pub criteria: usize,
    pub legal_slices: usize,
    pub unbuildable: usize,
    /// Dependences examined by all backward slices.
    pub slice_steps: u64,
    pub groups: Vec<GroupReport>,
    pub timers: Timers,
    pub skipped: Vec<Skipped>,
    pub per_function: Vec<FunctionCount>,
}

impl SbcrReport {
    pub fn retained(&self) -> impl Iterator<Item = &GroupReport> {
        self.groups.iter().filter(|g| g.decision == Decision::Retained)
    }
}

/// Outlining results for one function.
pub struct FunctionSlices {
    pub normalized: Function,
    pub slices: Vec<OutlinedSlice>,
    pub criteria: usize,
    pub legal: usize,
    pub unbuildable: usize,
    pub steps: u64,
    pub gsa_time: Duration,
    pub slice_time: Duration,
    pub legality_time: Duration,
    pub outline_time: Duration,
}

/// Slice, check and outline every criterion of `f`. `taken` holds the
/// function names the new functions must avoid.
pub fn outline_function(m: &Module, f: &Function, taken: &HashSet<String>) -> Result<FunctionSlices, GsaError> {
    let t = Instant::now();
    let form = convert(f)?;
    let ox = Outliner::new(m, &form);
    let gsa_time = t.elapsed();
    let mut out = FunctionSlices {
        normalized: form.normalized.clone(),
        slices: Vec::new(),
        criteria: 0,
        legal: 0,
        unbuildable: 0,
        steps: 0,
        gsa_time,
        slice_time: Duration::ZERO,
        legality_time: Duration::ZERO,
        outline_time: Duration::ZERO,
    };
    for crit in enumerate_criteria(&form.gsa) {
        out.criteria += 1;
        let t = Instant::now();
        let graph = backward_slice_in(&ox.ctx, &crit);
        out.steps += graph.steps;
        out.slice_time += t.elapsed();
        let t = Instant::now();
        let cand = assess(m, &ox.ctx, graph);
        out.legality_time += t.elapsed();
        let Ok(cand) = cand else { continue };
        if !cand.legality.is_ok() {
            continue;
        }
        out.legal += 1;
        let t = Instant::now();
        match outline_slice(&ox, &cand, &outlined_name(&f.name, &crit, taken)) {
            Ok(o) => out.slices.push(o),
            Err(OutlineError::Unbuildable(_)) => out.unbuildable += 1,
            Err(_) => {}
        }
        out.outline_time += t.elapsed();
    }
    Ok(out)
}

pub fn run_sbcr(m: &Module, cfg: &CostModelConfig) -> (Module, SbcrReport) {
    let start = Instant::now();
    let mut report = SbcrReport::default();

    // outline
    let t = Instant::now();
    report.instcount_before = m.instruction_count();
    report.functions_before = m.functions.len();
    let taken: HashSet<String> = m.functions.iter().map(|f| f.name.clone()).collect();
    let results: Vec<Result<FunctionSlices, GsaError>> =
        m.functions.par_iter().map(|f| outline_function(m, f, &taken)).collect();
    let mut normalized: HashMap<String, Function> = HashMap::new();
    let mut slices: Vec<OutlinedSlice> = Vec::new();
    for (f, r) in m.functions.iter().zip(results) {
        match r {
            Ok(fs) => {
                report.criteria += fs.criteria;
                report.legal_slices += fs.legal;
                report.unbuildable += fs.unbuildable;
                report.slice_steps += fs.steps;
                report.timers.gsa_construction += fs.gsa_time.as_secs_f64();
                report.timers.slice_identification += fs.slice_time.as_secs_f64();
                report.timers.can_outline += fs.legality_time.as_secs_f64();
                report.timers.function_outline += fs.outline_time.as_secs_f64();
                slices.extend(fs.slices);
                normalized.insert(f.name.clone(), fs.normalized);
            }
            Err(e) => report.skipped.push(Skipped { function: f.name.clone(), reason: e.to_string() }),
        }
    }
    report.timers.outline = t.elapsed().as_secs_f64();

    // merge and gate
    let t = Instant::now();
    let groups = group_slices(&slices);
    let mut order: Vec<usize> = (0..groups.len()).collect();
    let canon = |g: usize| slices.iter().find(|s| s.new_function.name == groups[g].canonical).unwrap();
    order.sort_by_key(|&g| (std::cmp::Reverse(canon(g).instr_count), groups[g].members[0]));
    let mut committed: HashMap<&str, Vec<&OutlinedSlice>> = HashMap::new();
    let mut rewrites: Vec<CallRewrite> = Vec::new();
    let mut new_functions: Vec<Function> = Vec::new();
    let mut group_reports: Vec<(usize, GroupReport)> = Vec::new();
    for g in order {
        let group = &groups[g];
        let c = canon(g);
        let (i, p) = (c.instr_count, c.param_count);
        let all = group.members.len();
        let members = |idx: &[usize]| -> Vec<Member> {
            idx.iter()
                .map(|&k| Member { function: slices[k].parent.clone(), criterion: slices[k].criterion.clone() })
                .collect()
        };
        let mut gr = GroupReport {
            canonical: group.canonical.clone(),
            instrs: i,
            params: p,
            occurrences: all,
            candidates: all,
            decision: Decision::Discarded,
            violations: cfg.violations(i, p, all),
            members: members(&group.members),
        };
        if gr.violations.is_empty() {
            let live: Vec<usize> = group
                .members
                .iter()
                .copied()
                .filter(|&k| {
                    let s = &slices[k];
                    !committed.get(s.parent.as_str()).is_some_and(|cs| cs.iter().any(|o| o.nodes.contains(&s.criterion)))
                })
                .collect();
            gr.occurrences = live.len();
            gr.members = members(&live);
            gr.violations = cfg.violations(i, p, live.len());
            if gr.violations.is_empty() {
                gr.decision = Decision::Retained;
                for &k in &live {
                    let s = &slices[k];
                    committed.entry(s.parent.as_str()).or_default().push(s);
                    let mut rw = s.call_rewrite.clone();
                    rw.callee = group.canonical.clone();
                    rewrites.push(rw);
                }
                new_functions.push(c.new_function.clone());
            } else {
                gr.decision = Decision::Subsumed;
            }
        }
        group_reports.push((g, gr));
    }
    group_reports.sort_by_key(|(g, _)| *g);
    report.groups = group_reports.into_iter().map(|(_, r)| r).collect();
    report.timers.merge = t.elapsed().as_secs_f64();

    // commit rewrites
    let t = Instant::now();
    let mut out = m.clone();
    let changed: HashSet<&str> = rewrites.iter().map(|r| r.parent.as_str()).collect();
    for f in out.functions.iter_mut() {
        if changed.contains(f.name.as_str()) {
            *f = normalized[&f.name].clone();
        }
    }
    let refs: Vec<&CallRewrite> = rewrites.iter().collect();
    apply_rewrites(&mut out, &refs).expect("rewrites are recorded against the normalized parents");
    out.functions.extend(new_functions);
    report.timers.remove_instructions = t.elapsed().as_secs_f64();

    // simplify
    let t = Instant::now();
    let pure: HashSet<String> = out.functions.iter().filter(|f| f.idempotent).map(|f| f.name.clone()).collect();
    let cleaned: Vec<(usize, Function)> = out
        .functions
        .par_iter()
        .enumerate()
        .filter(|(_, f)| changed.contains(f.name.as_str()))
        .map(|(i, f)| (i, cleanup_with(f, &|c| pure.contains(c))))
        .collect();
    for (i, f) in cleaned {
        out.functions[i] = f;
    }
    report.timers.simplify = t.elapsed().as_secs_f64();

    report.instcount_after = out.instruction_count();
    report.functions_after = out.functions.len();
    report.delta = report.instcount_after as i64 - report.instcount_before as i64;
    report.delta_percent =
        if report.instcount_before == 0 { 0.0 } else { 100.0 * report.delta as f64 / report.instcount_before as f64 };
    report.per_function = measure(m, &out);
    report.timers.total = start.elapsed().as_secs_f64();
    (out, report)
}

/// Instruction counts of every function present before or after.
pub fn measure(before: &Module, after: &Module) -> Vec<FunctionCount> {
    let mut names: Vec<&str> = before.functions.iter().map(|f| f.name.as_str()).collect();
    names.extend(after.functions.iter().map(|f| f.name.as_str()).filter(|n| before.function(n).is_none()));
    names
        .into_iter()
        .map(|n| FunctionCount {
            function: n.to_string(),
            before: before.function(n).map_or(0, Function::instruction_count),
            after: after.function(n).map_or(0, Function::instruction_count),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::{run_function, DEFAULT_FUEL};
    use crate::ir::{print_module, validate};

    #[test]
    fn planted_twelve_copies() {
        let m = generate_corpus(3, &CorpusSpec::default());
        let (out, rep) = run_sbcr(&m, &CostModelConfig::default());
        assert!(validate(&out).iter().all(|d| !d.is_error()), "{:?}", validate(&out));
        let kept: Vec<_> = rep.retained().collect();
        assert_eq!(kept.len(), 1);
        assert_eq!((kept[0].instrs, kept[0].params, kept[0].occurrences), (10, 1, 12));
        assert_eq!(rep.delta, -97);
        for args in [[0, 0], [5, -3], [i32::MIN, 9]] {
            assert_eq!(
                run_function(&m, "main", &args, DEFAULT_FUEL).unwrap().observable(),
                run_function(&out, "main", &args, DEFAULT_FUEL).unwrap().observable()
            );
        }
    }

    #[test]
    fn nine_copies_leave_the_module_alone() {
        let m = generate_corpus(3, &CorpusSpec { copies: 9, ..Default::default() });
        let (out, rep) = run_sbcr(&m, &CostModelConfig::default());
        assert_eq!(print_module(&out), print_module(&m));
        assert_eq!(rep.retained().count(), 0);
    }

    #[test]
    fn gate_boundaries() {
        let c = CostModelConfig::default();
        assert!(c.admits(4, 1, 10));
        assert!(c.admits(20, 0, 10));
        assert!(!c.admits(3, 1, 10));
        assert!(!c.admits(21, 1, 10));
        assert!(!c.admits(10, 2, 10));
        assert!(!c.admits(10, 1, 9));
    }
}
