//! Idempotent backward slicing, outlining and code-size reduction over a
//! small SSA IR.

pub mod analysis;
pub mod ir;
pub mod interp;
pub mod gsa;
pub mod randprog;
pub mod slice;
pub mod outline;
pub mod merge;
pub mod sbcr;
pub mod dot;
