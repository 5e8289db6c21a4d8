//! Graphviz renderings of functions, their analyses and dependence graphs.

use std::fmt::Write;

use crate::analysis::{build_dom_tree, Analysis, Direction, DomTree};
use crate::ir::Function;
use crate::slice::{DependenceGraph, EdgeKind};

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Control-flow graph with one record per block listing its instructions.
pub fn cfg_dot(f: &Function) -> String {
    let mut s = format!("digraph {} {{\n  node [shape=box, fontname=monospace];\n", quote(&format!("cfg.{}", f.name)));
    for b in &f.blocks {
        let mut text = format!("{}:\\l", b.label);
        for inst in b.instructions() {
            text.push_str(&format!("  {}\\l", inst.to_string().replace('"', "'")));
        }
        let _ = writeln!(s, "  {} [label=\"{}\"];", quote(&b.label), text);
    }
    for b in &f.blocks {
        for t in b.successors() {
            let _ = writeln!(s, "  {} -> {};", quote(&b.label), quote(t));
        }
    }
    s.push_str("}\n");
    s
}

fn tree_dot(f: &Function, dt: &DomTree, name: &str) -> String {
    let mut s = format!("digraph {} {{\n", quote(&format!("{name}.{}", f.name)));
    let label = |b: usize| if b < f.blocks.len() { f.blocks[b].label.clone() } else { "exit".to_string() };
    for b in 0..dt.idom.len() {
        if dt.is_reachable(b) {
            let _ = writeln!(s, "  {};", quote(&label(b)));
        }
    }
    for (b, idom) in dt.idom.iter().enumerate() {
        if let Some(p) = idom {
            if *p != b {
                let _ = writeln!(s, "  {} -> {};", quote(&label(*p)), quote(&label(b)));
            }
        }
    }
    s.push_str("}\n");
    s
}

pub fn dom_dot(f: &Function) -> String {
    tree_dot(f, &build_dom_tree(f, Direction::Forward), "dom")
}

pub fn postdom_dot(f: &Function) -> String {
    tree_dot(f, &build_dom_tree(f, Direction::PostDom), "postdom")
}

/// Loop forest as nested clusters over the CFG.
pub fn loops_dot(f: &Function) -> String {
    let a = Analysis::new(f);
    let mut s = format!("digraph {} {{\n  compound=true;\n", quote(&format!("loops.{}", f.name)));
    fn emit(s: &mut String, f: &Function, a: &Analysis, l: usize, indent: usize) {
        let lp = &a.loops.loops[l];
        let pad = "  ".repeat(indent);
        let _ = writeln!(
            s,
            "{pad}subgraph \"cluster_{}\" {{\n{pad}  label={};",
            f.blocks[lp.header].label,
            quote(&format!("loop {} (depth {})", f.blocks[lp.header].label, lp.depth))
        );
        for &c in &lp.children {
            emit(s, f, a, c, indent + 1);
        }
        for &b in &lp.body {
            if a.loops.innermost[b] == Some(l) {
                let _ = writeln!(s, "{pad}  {};", quote(&f.blocks[b].label));
            }
        }
        let _ = writeln!(s, "{pad}}}");
    }
    for (l, lp) in a.loops.loops.iter().enumerate() {
        if lp.parent.is_none() {
            emit(&mut s, f, &a, l, 1);
        }
    }
    for (b, blk) in f.blocks.iter().enumerate() {
        if a.loops.innermost[b].is_none() {
            let _ = writeln!(s, "  {};", quote(&blk.label));
        }
        for t in blk.successors() {
            let _ = writeln!(s, "  {} -> {};", quote(&blk.label), quote(t));
        }
    }
    s.push_str("}\n");
    s
}

/// Dependence graph; each node shows its defining block, stop-set nodes
/// are filled dark gray and control dependences are dashed.
pub fn dependence_dot(f: &Function, g: &DependenceGraph) -> String {
    let defs = f.def_sites();
    let mut s = format!("digraph {} {{\n  node [shape=ellipse];\n", quote(&format!("slice.{}", g.criterion)));
    let label = |v: &str| match defs.get(v) {
        Some(d) => format!("%{v} @{}", f.blocks[d.block].label),
        None => format!("%{v} (param)"),
    };
    for n in &g.nodes {
        let extra = if *n == g.criterion { ", peripheries=2" } else { "" };
        let _ = writeln!(s, "  {} [label={}{extra}];", quote(n), quote(&label(n)));
    }
    for n in &g.stop_set {
        let _ = writeln!(
            s,
            "  {} [label={}, style=filled, fillcolor=darkgray];",
            quote(n),
            quote(&label(n))
        );
    }
    for (from, to, kind) in &g.edges {
        let style = match kind {
            EdgeKind::Data => "",
            EdgeKind::Control => " [style=dashed]",
        };
        let _ = writeln!(s, "  {} -> {}{style};", quote(from), quote(to));
    }
    s.push_str("}\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gsa::to_gsa;
    use crate::ir::parse_module;
    use crate::slice::backward_slice;

    #[test]
    fn stop_nodes_are_dark_gray() {
        let m = parse_module("func @f(%a: i32) -> i32 {\nb:\n %x = add %a, 1\n ret %x\n}").unwrap();
        let g = to_gsa(&m.functions[0]).unwrap();
        let d = dependence_dot(&g, &backward_slice(&g, "x"));
        assert!(d.contains("\"a\" [label=\"%a (param)\", style=filled, fillcolor=darkgray]"));
        assert!(d.contains("\"a\" -> \"x\""));
        for text in [cfg_dot(&g), dom_dot(&g), postdom_dot(&g), loops_dot(&g)] {
            assert!(text.starts_with("digraph") && text.trim_end().ends_with('}'));
        }
    }
}
