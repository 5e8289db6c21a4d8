//! Control-flow analyses: dominators, post-dominators, loops, reducibility.

mod cfg;
mod dom;
mod loops;

pub use cfg::Cfg;
pub use dom::{build_dom_tree, Direction, DomTree};
pub use loops::{build_loop_forest, check_reducible, first_dominator, Loop, LoopForest};

use crate::ir::Function;

/// The analyses most passes need, computed together.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub cfg: Cfg,
    pub dom: DomTree,
    pub loops: LoopForest,
    pub reducible: bool,
}

impl Analysis {
    pub fn new(f: &Function) -> Self {
        let cfg = Cfg::new(f);
        let dom = DomTree::compute(0, &cfg.succs, &cfg.preds, Direction::Forward);
        let reducible = check_reducible(&cfg, &dom);
        let loops = build_loop_forest(&cfg, &dom);
        Analysis { cfg, dom, loops, reducible }
    }
}
