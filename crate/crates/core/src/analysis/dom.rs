//! Dominator and post-dominator trees.
//!
//! Both are computed with the iterative algorithm of Cooper, Harvey and
//! Kennedy over reverse postorder. Post-dominance runs the same solver on the
//! reversed graph rooted at a synthetic exit node that every `ret` block
//! flows into.

use super::cfg::{postorder, Cfg};
use crate::ir::{Function, InstKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    PostDom,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomTree {
    pub direction: Direction,
    pub root: usize,
    /// Immediate dominator of each node; `None` for the root and for nodes the
    /// root cannot reach.
    pub idom: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
    /// Reverse postorder of reachable nodes.
    pub order: Vec<usize>,
    rpo_index: Vec<usize>,
    level: Vec<usize>,
    /// For post-dominator trees, the synthetic exit node (`== blocks.len()`).
    pub virtual_exit: Option<usize>,
}

const UNREACHED: usize = usize::MAX;

impl DomTree {
    /// Solve dominance on an arbitrary graph.
    pub fn compute(root: usize, succs: &[Vec<usize>], preds: &[Vec<usize>], direction: Direction) -> Self {
        let n = succs.len();
        let order: Vec<usize> = postorder(root, succs).into_iter().rev().collect();
        let mut rpo_index = vec![UNREACHED; n];
        for (i, &b) in order.iter().enumerate() {
            rpo_index[b] = i;
        }
        let mut idom: Vec<Option<usize>> = vec![None; n];
        idom[root] = Some(root);
        let mut changed = true;
        while changed {
            changed = false;
            for &b in order.iter().skip(1) {
                let mut new_idom: Option<usize> = None;
                for &p in &preds[b] {
                    if idom[p].is_none() {
                        continue;
                    }
                    new_idom = Some(match new_idom {
                        None => p,
                        Some(cur) => intersect(&idom, &rpo_index, p, cur),
                    });
                }
                if new_idom.is_some() && idom[b] != new_idom {
                    idom[b] = new_idom;
                    changed = true;
                }
            }
        }
        idom[root] = None;
        let mut children = vec![Vec::new(); n];
        for &b in &order {
            if let Some(d) = idom[b] {
                children[d].push(b);
            }
        }
        let mut level = vec![0; n];
        for &b in &order {
            if let Some(d) = idom[b] {
                level[b] = level[d] + 1;
            }
        }
        DomTree { direction, root, idom, children, order, rpo_index, level, virtual_exit: None }
    }

    pub fn len(&self) -> usize {
        self.idom.len()
    }

    pub fn is_empty(&self) -> bool {
        self.idom.is_empty()
    }

    pub fn is_reachable(&self, b: usize) -> bool {
        self.rpo_index[b] != UNREACHED
    }

    pub fn immediate_dominator(&self, b: usize) -> Option<usize> {
        self.idom[b]
    }

    /// Depth in the tree; the root has depth 0.
    pub fn level(&self, b: usize) -> usize {
        self.level[b]
    }

    pub fn rpo_index(&self, b: usize) -> Option<usize> {
        (self.rpo_index[b] != UNREACHED).then_some(self.rpo_index[b])
    }

    /// Reflexive dominance. Unreachable nodes dominate nothing and are
    /// dominated by nothing.
    pub fn dominates(&self, a: usize, b: usize) -> bool {
        if !self.is_reachable(a) || !self.is_reachable(b) {
            return false;
        }
        let mut cur = b;
        while self.level[cur] > self.level[a] {
            cur = self.idom[cur].expect("non-root node has an idom");
        }
        cur == a
    }

    pub fn strictly_dominates(&self, a: usize, b: usize) -> bool {
        a != b && self.dominates(a, b)
    }

    /// Ancestors of `b` starting with `b` itself and ending at the root.
    pub fn ancestors(&self, b: usize) -> impl Iterator<Item = usize> + '_ {
        let mut cur = self.is_reachable(b).then_some(b);
        std::iter::from_fn(move || {
            let out = cur?;
            cur = self.idom[out];
            Some(out)
        })
    }
}

fn intersect(idom: &[Option<usize>], rpo_index: &[usize], mut a: usize, mut b: usize) -> usize {
    while a != b {
        while rpo_index[a] > rpo_index[b] {
            a = idom[a].unwrap();
        }
        while rpo_index[b] > rpo_index[a] {
            b = idom[b].unwrap();
        }
    }
    a
}

/// Dominator (`Forward`) or post-dominator (`PostDom`) tree of `f`.
pub fn build_dom_tree(f: &Function, direction: Direction) -> DomTree {
    let cfg = Cfg::new(f);
    match direction {
        Direction::Forward => DomTree::compute(0, &cfg.succs, &cfg.preds, direction),
        Direction::PostDom => {
            let n = f.blocks.len();
            let exit = n;
            // reversed graph: successors are CFG predecessors
            let mut rsuccs: Vec<Vec<usize>> = cfg.preds.clone();
            let mut rpreds: Vec<Vec<usize>> = cfg.succs.clone();
            rsuccs.push(Vec::new());
            rpreds.push(Vec::new());
            for (i, b) in f.blocks.iter().enumerate() {
                if matches!(b.terminator.kind, InstKind::Ret { .. }) {
                    rsuccs[exit].push(i);
                    rpreds[i].push(exit);
                }
            }
            let mut t = DomTree::compute(exit, &rsuccs, &rpreds, direction);
            t.virtual_exit = Some(exit);
            t
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_module;

    const DIAMOND: &str = "func @d(%p: i1) -> i32 {
bb0:
  br %p, bb1, bb2
bb1:
  jmp bb3
bb2:
  jmp bb3
bb3:
  ret 0
}";

    #[test]
    fn diamond_idoms() {
        let m = parse_module(DIAMOND).unwrap();
        let dt = build_dom_tree(&m.functions[0], Direction::Forward);
        assert_eq!(dt.idom, vec![None, Some(0), Some(0), Some(0)]);
        assert!(dt.dominates(0, 3));
        assert!(!dt.dominates(1, 3));
    }

    #[test]
    fn diamond_postdoms() {
        let m = parse_module(DIAMOND).unwrap();
        let pdt = build_dom_tree(&m.functions[0], Direction::PostDom);
        assert_eq!(pdt.virtual_exit, Some(4));
        assert_eq!(pdt.idom[0], Some(3));
        assert_eq!(pdt.idom[1], Some(3));
        assert_eq!(pdt.idom[3], Some(4));
        assert!(pdt.dominates(3, 0));
    }
}
