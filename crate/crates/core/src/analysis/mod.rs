//! Analyses consumed by the passes: dominators, natural loops, known bits
//! and use-def chains. All of them are pure functions of a `Function`.

mod dominators;
mod known_bits;
mod loops;
mod use_def;

pub use dominators::{compute_dominators, DomTree};
pub use known_bits::{known_bits, operand_bits, KnownBits};
pub use loops::{find_natural_loops, Loop, LoopForest};
pub use use_def::{build_use_def, UseDef, UseLoc, UseSite};
