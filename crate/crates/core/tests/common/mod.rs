#![allow(dead_code)]
pub mod oracles;


use std::collections::HashSet;

use slicekit::gsa::convert;
use slicekit::ir::Module;
use slicekit::outline::{outline_slice, outlined_name, OutlinedSlice, Outliner};
use slicekit::slice::{candidate, enumerate_criteria};

/// Every legal, buildable slice of `f`.
pub fn outline_all(m: &Module, f: &str) -> Vec<OutlinedSlice> {
    let form = convert(m.function(f).unwrap()).unwrap();
    let ox = Outliner::new(m, &form);
    let names: HashSet<String> = m.functions.iter().map(|f| f.name.clone()).collect();
    enumerate_criteria(&form.gsa)
        .into_iter()
        .filter_map(|c| {
            let cand = candidate(m, &ox.ctx, &c).ok()?;
            outline_slice(&ox, &cand, &outlined_name(f, &c, &names)).ok()
        })
        .collect()
}
