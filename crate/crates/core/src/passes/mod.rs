//! Forward optimization passes.
//!
//! Each pass is one deterministic sweep over a function (blocks in reverse
//! postorder, instructions in order) that returns a new function. A pass
//! that finds nothing to do returns its input unchanged.

mod cfg;
pub(crate) mod dataflow;
mod local;
mod loops;
mod memory;
mod reassoc;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ir::Function;

pub use cfg::{apply_cond_prop, apply_cse, apply_simplifycfg};
pub use dataflow::apply_add_to_or;
pub use local::{apply_const_fold, apply_divmul_to_rem, apply_identity_simplify, apply_strength_reduce};
pub use loops::apply_licm;
pub use memory::{apply_dce, apply_dse, apply_mem2reg};
pub use reassoc::{apply_factor_terms, apply_reassociate};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum PassId {
    ConstFold,
    IdentitySimplify,
    StrengthReduce,
    DivMulToRem,
    AddToOr,
    FactorTerms,
    Reassociate,
    Cse,
    CondProp,
    SimplifyCfg,
    Mem2Reg,
    Licm,
    Dse,
    Dce,
}

impl PassId {
    /// Declaration order, which is also the order the search tries passes in.
    pub const ALL: [PassId; 14] = [
        PassId::ConstFold,
        PassId::IdentitySimplify,
        PassId::StrengthReduce,
        PassId::DivMulToRem,
        PassId::AddToOr,
        PassId::FactorTerms,
        PassId::Reassociate,
        PassId::Cse,
        PassId::CondProp,
        PassId::SimplifyCfg,
        PassId::Mem2Reg,
        PassId::Licm,
        PassId::Dse,
        PassId::Dce,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PassId::ConstFold => "const-fold",
            PassId::IdentitySimplify => "identity-simplify",
            PassId::StrengthReduce => "strength-reduce",
            PassId::DivMulToRem => "divmul-to-rem",
            PassId::AddToOr => "add-to-or",
            PassId::FactorTerms => "factor-terms",
            PassId::Reassociate => "reassociate",
            PassId::Cse => "cse",
            PassId::CondProp => "cond-prop",
            PassId::SimplifyCfg => "simplifycfg",
            PassId::Mem2Reg => "mem2reg",
            PassId::Licm => "licm",
            PassId::Dse => "dse",
            PassId::Dce => "dce",
        }
    }

    pub fn from_name(name: &str) -> Option<PassId> {
        PassId::ALL.iter().copied().find(|p| p.name() == name)
    }

    pub fn apply(self, f: &Function) -> PassOutcome {
        match self {
            PassId::ConstFold => apply_const_fold(f),
            PassId::IdentitySimplify => apply_identity_simplify(f),
            PassId::StrengthReduce => apply_strength_reduce(f),
            PassId::DivMulToRem => apply_divmul_to_rem(f),
            PassId::AddToOr => apply_add_to_or(f),
            PassId::FactorTerms => apply_factor_terms(f),
            PassId::Reassociate => apply_reassociate(f),
            PassId::Cse => apply_cse(f),
            PassId::CondProp => apply_cond_prop(f),
            PassId::SimplifyCfg => apply_simplifycfg(f),
            PassId::Mem2Reg => apply_mem2reg(f),
            PassId::Licm => apply_licm(f),
            PassId::Dse => apply_dse(f),
            PassId::Dce => apply_dce(f),
        }
    }
}

impl fmt::Display for PassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unknown pass `{0}`")]
pub struct UnknownPass(pub String);

impl FromStr for PassId {
    type Err = UnknownPass;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PassId::from_name(s).ok_or_else(|| UnknownPass(s.to_string()))
    }
}

impl From<PassId> for String {
    fn from(p: PassId) -> String {
        p.name().to_string()
    }
}

impl TryFrom<String> for PassId {
    type Error = UnknownPass;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum PassWarning {
    /// mem2reg found a load that may run before any store and replaced it with 0.
    UninitPromotion { alloca: String },
}

impl fmt::Display for PassWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PassWarning::UninitPromotion { alloca } => {
                write!(f, "load of %{alloca} may read uninitialized memory; promoted as 0")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PassOutcome {
    pub changed: bool,
    pub function: Function,
    pub warnings: Vec<PassWarning>,
}

impl PassOutcome {
    pub(crate) fn from_rewrite(input: &Function, function: Function) -> Self {
        PassOutcome {
            changed: function != *input,
            function,
            warnings: Vec::new(),
        }
    }
}

/// Applies `passes` in order, returning the final function.
pub fn apply_sequence(f: &Function, passes: &[PassId]) -> Function {
    passes.iter().fold(f.clone(), |f, p| p.apply(&f).function)
}

#[cfg(test)]
pub(crate) mod test_util {
    use crate::interp::{differential_check, Workload, DEFAULT_STEP_LIMIT};
    use crate::ir::{parse_function, print_function, validate, Function};

    use super::PassOutcome;

    pub fn func(text: &str) -> Function {
        parse_function(text).unwrap_or_else(|e| panic!("{e}\n{text}"))
    }

    /// Checks the result is valid and behaves like the input.
    pub fn checked(input: &Function, out: &PassOutcome) {
        let errors = validate(&out.function);
        assert!(errors.is_empty(), "{errors:?}\n{}", print_function(&out.function));
        let w = Workload::default_for(input, 1);
        let eq = differential_check(input, &out.function, &w, DEFAULT_STEP_LIMIT);
        assert!(eq.is_equivalent(), "{eq:?}\n{}", print_function(&out.function));
    }

    /// Body of the single block of a straight-line function, one line per
    /// instruction, terminator included.
    pub fn lines(f: &Function) -> Vec<String> {
        print_function(f)
            .lines()
            .filter(|l| l.starts_with("  "))
            .map(|l| l.trim().to_string())
            .collect()
    }
}
