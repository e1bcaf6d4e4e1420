//! Bidirectional optimization of a small SSA IR: forward rewrite passes,
//! their semantics-preserving reverses, and searches over sequences of both.

pub mod analysis;
pub mod cost;
pub mod interp;
pub mod ir;
pub mod passes;
pub mod reverse;
pub mod search;
