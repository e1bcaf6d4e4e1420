//! Phase-ordering search: exhaustive forward search with a visited set, the
//! iterative bi-directional optimizer, and the bounded equivalence-class
//! explorer.

mod class;
mod exhaustive;
mod ibo;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cost::{CostError, CostModel, EfficiencyMetric};
use crate::ir::{canonical_hash, CanonicalDigest, Function};
use crate::passes::PassId;
use crate::reverse::{ReversePassId, DEFAULT_CAP_PER_PASS};

pub use class::{check_closure, explore_sep_class, ClassEdge, ClassGraph, ClassNode, ClosureReport, Direction};
pub use exhaustive::{exhaustive_search, SearchOutcome};
pub use ibo::{ibo, FrontierPolicy, IboOutcome, IboSettings, IterationRecord, ReverseFrom};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchLimits {
    pub max_sequence_length: usize,
    pub max_programs_explored: usize,
    pub max_instructions_per_program: usize,
    pub cap_per_pass: usize,
    pub ibo_max_frontier: usize,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits {
            max_sequence_length: 12,
            max_programs_explored: 200_000,
            max_instructions_per_program: 512,
            cap_per_pass: DEFAULT_CAP_PER_PASS,
            ibo_max_frontier: 256,
        }
    }
}

impl SearchLimits {
    pub fn check(&self) -> Result<(), SearchError> {
        let fields = [
            ("max_sequence_length", self.max_sequence_length),
            ("max_programs_explored", self.max_programs_explored),
            ("max_instructions_per_program", self.max_instructions_per_program),
            ("cap_per_pass", self.cap_per_pass),
            ("ibo_max_frontier", self.ibo_max_frontier),
        ];
        match fields.iter().find(|(_, v)| *v == 0) {
            Some((name, _)) => Err(SearchError::InvalidLimit(name)),
            None => Ok(()),
        }
    }
}

/// Everything a forward search needs besides the input program.
#[derive(Clone, Debug)]
pub struct SearchContext {
    /// Forward passes, tried in this order.
    pub passes: Vec<PassId>,
    pub limits: SearchLimits,
    pub metric: EfficiencyMetric,
    pub model: CostModel,
}

impl Default for SearchContext {
    fn default() -> Self {
        SearchContext {
            passes: PassId::ALL.to_vec(),
            limits: SearchLimits::default(),
            metric: EfficiencyMetric::StaticCost,
            model: CostModel::default(),
        }
    }
}

/// The limit a search ran into.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Limit {
    SequenceLength,
    ProgramsExplored,
    ProgramSize,
}

impl fmt::Display for Limit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Limit::SequenceLength => "max_sequence_length",
            Limit::ProgramsExplored => "max_programs_explored",
            Limit::ProgramSize => "max_instructions_per_program",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SearchError {
    #[error("search stopped at {limit}; the partial result is not known to be optimal")]
    BudgetExceeded { limit: Limit, partial: Box<SearchOutcome> },
    #[error("IBO stopped at {limit}; the partial result is not known to be optimal")]
    IboBudgetExceeded { limit: Limit, partial: Box<IboOutcome> },
    #[error("replay diverged at step {step}: {reason}")]
    ReplayDiverged { step: usize, reason: String },
    #[error("class graph was truncated; closure cannot be decided")]
    Inconclusive,
    #[error("search limit `{0}` must be positive")]
    InvalidLimit(&'static str),
    #[error(transparent)]
    Metric(#[from] CostError),
}

/// One replayable step: a forward pass, or a reverse pass at a site.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Step {
    Forward(PassId),
    Reverse { pass: ReversePassId, site: usize },
}

impl Step {
    pub fn apply(self, f: &Function) -> Option<Function> {
        match self {
            Step::Forward(p) => {
                let out = p.apply(f);
                out.changed.then_some(out.function)
            }
            Step::Reverse { pass, site } => pass.variant_at(f, site),
        }
    }

    pub fn is_reverse(self) -> bool {
        matches!(self, Step::Reverse { .. })
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::Forward(p) => write!(f, "{p}"),
            Step::Reverse { pass, site } => write!(f, "{pass}@{site}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unknown step `{0}`")]
pub struct UnknownStep(pub String);

impl FromStr for Step {
    type Err = UnknownStep;

    /// `name` for forward passes, `name@site` (or bare `name` for site 0)
    /// for reverse passes.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || UnknownStep(s.to_string());
        let (name, site) = match s.split_once('@') {
            Some((n, site)) => (n, Some(site.parse::<usize>().map_err(|_| bad())?)),
            None => (s, None),
        };
        if let (Some(p), None) = (PassId::from_name(name), site) {
            return Ok(Step::Forward(p));
        }
        let pass = ReversePassId::from_name(name).ok_or_else(bad)?;
        Ok(Step::Reverse {
            pass,
            site: site.unwrap_or(0),
        })
    }
}

impl From<Step> for String {
    fn from(s: Step) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for Step {
    type Error = UnknownStep;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Applies `seq` to `f`. Every step must apply: a forward pass must change
/// the program and a reverse site must exist.
pub fn replay_sequence(f: &Function, seq: &[Step]) -> Result<Function, SearchError> {
    let mut cur = f.clone();
    for (i, step) in seq.iter().enumerate() {
        cur = step.apply(&cur).ok_or_else(|| SearchError::ReplayDiverged {
            step: i,
            reason: format!("`{step}` does not apply"),
        })?;
    }
    Ok(cur)
}

/// Replays `seq` and checks the result against a recorded digest.
pub fn replay_and_verify(f: &Function, seq: &[Step], expected: CanonicalDigest) -> Result<Function, SearchError> {
    let out = replay_sequence(f, seq)?;
    let got = canonical_hash(&out);
    if got != expected {
        return Err(SearchError::ReplayDiverged {
            step: seq.len(),
            reason: format!("digest {got} differs from recorded {expected}"),
        });
    }
    Ok(out)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::ir::parse_function;

    pub const BIN2BCD: &str = "func @bin2bcd(%val) {
entry:
  %q = udiv %val, 10
  %h = shl %q, 4
  %r = urem %val, 10
  %s = add %h, %r
  ret %s
}
";

    pub fn func(text: &str) -> Function {
        parse_function(text).unwrap()
    }

    #[test]
    fn step_syntax() {
        for text in ["const-fold", "rev-instexpand-rem@3", "reg2mem@0"] {
            assert_eq!(text.parse::<Step>().unwrap().to_string(), text);
        }
        assert_eq!(
            "rev-split-block".parse::<Step>().unwrap().to_string(),
            "rev-split-block@0"
        );
        assert!("const-fold@1".parse::<Step>().is_err());
        assert!("nope".parse::<Step>().is_err());
        assert!("reg2mem@x".parse::<Step>().is_err());
        let json = serde_json::to_string(&Step::Forward(PassId::Dce)).unwrap();
        assert_eq!(json, "\"dce\"");
    }

    #[test]
    fn replay_basics() {
        let f = func(BIN2BCD);
        assert_eq!(replay_sequence(&f, &[]).unwrap(), f);
        let seq: Vec<Step> = ["rev-instexpand-shl@0", "strength-reduce"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect();
        let back = replay_and_verify(&f, &seq, canonical_hash(&f)).unwrap();
        assert_eq!(canonical_hash(&back), canonical_hash(&f));
        let stale = [Step::Reverse {
            pass: ReversePassId::InstExpandShl,
            site: 1,
        }];
        assert!(matches!(
            replay_sequence(&f, &stale),
            Err(SearchError::ReplayDiverged { step: 0, .. })
        ));
        let idle = [Step::Forward(PassId::Licm)];
        assert!(matches!(
            replay_sequence(&f, &idle),
            Err(SearchError::ReplayDiverged { step: 0, .. })
        ));
        assert!(matches!(
            replay_and_verify(&f, &[], CanonicalDigest(0)),
            Err(SearchError::ReplayDiverged { step: 0, .. })
        ));
    }

    #[test]
    fn zero_limits_rejected() {
        let limits = SearchLimits {
            ibo_max_frontier: 0,
            ..SearchLimits::default()
        };
        assert!(matches!(
            limits.check(),
            Err(SearchError::InvalidLimit("ibo_max_frontier"))
        ));
        assert!(SearchLimits::default().check().is_ok());
    }
}
