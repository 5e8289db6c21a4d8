//! Natural loops, their nesting forest and reducibility.

use super::cfg::Cfg;
use super::dom::DomTree;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Loop {
    pub header: usize,
    /// Sorted block indices, header included.
    pub body: Vec<usize>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Blocks outside the loop with a predecessor inside it, ascending.
    pub exits: Vec<usize>,
    /// Sources of back edges into the header, ascending.
    pub latches: Vec<usize>,
    /// Nesting depth, outermost loops have depth 1.
    pub depth: u32,
}

impl Loop {
    pub fn contains(&self, b: usize) -> bool {
        self.body.binary_search(&b).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LoopForest {
    pub loops: Vec<Loop>,
    /// Loop nesting depth per block (0 = in no loop).
    pub depth: Vec<u32>,
    /// Innermost loop containing each block.
    pub innermost: Vec<Option<usize>>,
}

impl LoopForest {
    pub fn is_empty(&self) -> bool {
        self.loops.is_empty()
    }

    pub fn loop_of_header(&self, b: usize) -> Option<usize> {
        self.loops.iter().position(|l| l.header == b)
    }

    pub fn is_header(&self, b: usize) -> bool {
        self.loop_of_header(b).is_some()
    }

    /// Loops containing `b`, innermost first.
    pub fn enclosing(&self, b: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = self.innermost[b];
        while let Some(l) = cur {
            out.push(l);
            cur = self.loops[l].parent;
        }
        out
    }
}

/// Natural loops from back edges `t -> h` where `h` dominates `t`. Back
/// edges sharing a header form one loop.
pub fn build_loop_forest(cfg: &Cfg, dt: &DomTree) -> LoopForest {
    let n = cfg.len();
    let mut headers: Vec<usize> = Vec::new();
    for &b in &dt.order {
        if cfg.preds[b].iter().any(|&p| dt.dominates(b, p)) {
            headers.push(b);
        }
    }
    let mut loops: Vec<Loop> = headers
        .iter()
        .map(|&h| {
            let latches: Vec<usize> = {
                let mut l: Vec<usize> =
                    cfg.preds[h].iter().copied().filter(|&p| dt.dominates(h, p)).collect();
                l.sort_unstable();
                l
            };
            let mut in_body = vec![false; n];
            in_body[h] = true;
            let mut stack: Vec<usize> = Vec::new();
            for &t in &latches {
                if !in_body[t] {
                    in_body[t] = true;
                    stack.push(t);
                }
            }
            while let Some(b) = stack.pop() {
                for &p in &cfg.preds[b] {
                    if !in_body[p] && dt.is_reachable(p) {
                        in_body[p] = true;
                        stack.push(p);
                    }
                }
            }
            let body: Vec<usize> = (0..n).filter(|&b| in_body[b]).collect();
            let mut exits: Vec<usize> = body
                .iter()
                .flat_map(|&b| cfg.succs[b].iter().copied())
                .filter(|&s| !in_body[s])
                .collect();
            exits.sort_unstable();
            exits.dedup();
            Loop { header: h, body, parent: None, children: vec![], exits, latches, depth: 0 }
        })
        .collect();

    // Parent = smallest other loop whose body contains this header.
    for i in 0..loops.len() {
        let h = loops[i].header;
        let parent = (0..loops.len())
            .filter(|&j| j != i && loops[j].contains(h) && loops[j].body.len() > loops[i].body.len())
            .min_by_key(|&j| loops[j].body.len());
        loops[i].parent = parent;
    }
    for i in 0..loops.len() {
        if let Some(p) = loops[i].parent {
            loops[p].children.push(i);
        }
    }
    for i in 0..loops.len() {
        let mut d = 1;
        let mut cur = loops[i].parent;
        while let Some(p) = cur {
            d += 1;
            cur = loops[p].parent;
        }
        loops[i].depth = d;
    }
    let mut depth = vec![0u32; n];
    let mut innermost: Vec<Option<usize>> = vec![None; n];
    for (i, l) in loops.iter().enumerate() {
        for &b in &l.body {
            depth[b] += 1;
            if innermost[b].is_none_or(|cur| loops[cur].depth < l.depth) {
                innermost[b] = Some(i);
            }
        }
    }
    LoopForest { loops, depth, innermost }
}

/// True iff every retreating edge of a DFS from the entry targets a
/// dominator of its source.
pub fn check_reducible(cfg: &Cfg, dt: &DomTree) -> bool {
    let n = cfg.len();
    if n == 0 {
        return true;
    }
    let mut on_stack = vec![false; n];
    let mut visited = vec![false; n];
    let mut stack: Vec<(usize, usize)> = vec![(dt.root, 0)];
    visited[dt.root] = true;
    on_stack[dt.root] = true;
    while let Some(&mut (node, ref mut next)) = stack.last_mut() {
        if let Some(&s) = cfg.succs[node].get(*next) {
            *next += 1;
            if on_stack[s] {
                if !dt.dominates(s, node) {
                    return false;
                }
            } else if !visited[s] {
                visited[s] = true;
                on_stack[s] = true;
                stack.push((s, 0));
            }
        } else {
            on_stack[node] = false;
            stack.pop();
        }
    }
    true
}

/// Nearest ancestor of `b0` in the dominator tree (starting at `b0` itself)
/// that belongs to `region`.
pub fn first_dominator(dt: &DomTree, region: &[bool], b0: usize) -> Option<usize> {
    dt.ancestors(b0).find(|&b| region.get(b).copied().unwrap_or(false))
}
