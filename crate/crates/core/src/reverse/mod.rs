//! Reverse passes: rewrites that keep semantics but make a program less
//! efficient, each the syntactic inverse of one forward pass.
//!
//! An enumerator lists the sites where its rewrite applies (blocks in
//! reverse postorder, instructions in order) and produces one variant per
//! site, up to a cap.

mod expand;
mod structure;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ir::Function;
use crate::passes::PassId;

pub use expand::{
    enumerate_rev_instexpand_or, enumerate_rev_instexpand_rem, enumerate_rev_instexpand_shl, enumerate_rev_reassociate,
};
pub use structure::{
    enumerate_reg2mem, enumerate_rev_insert_dead_store, enumerate_rev_licm_sink, enumerate_rev_split_block,
};

pub const DEFAULT_CAP_PER_PASS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum ReversePassId {
    InstExpandRem,
    InstExpandShl,
    InstExpandOr,
    Reassociate,
    SplitBlock,
    LicmSink,
    Reg2Mem,
    InsertDeadStore,
}

impl ReversePassId {
    pub const ALL: [ReversePassId; 8] = [
        ReversePassId::InstExpandRem,
        ReversePassId::InstExpandShl,
        ReversePassId::InstExpandOr,
        ReversePassId::Reassociate,
        ReversePassId::SplitBlock,
        ReversePassId::LicmSink,
        ReversePassId::Reg2Mem,
        ReversePassId::InsertDeadStore,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReversePassId::InstExpandRem => "rev-instexpand-rem",
            ReversePassId::InstExpandShl => "rev-instexpand-shl",
            ReversePassId::InstExpandOr => "rev-instexpand-or",
            ReversePassId::Reassociate => "rev-reassociate",
            ReversePassId::SplitBlock => "rev-split-block",
            ReversePassId::LicmSink => "rev-licm-sink",
            ReversePassId::Reg2Mem => "reg2mem",
            ReversePassId::InsertDeadStore => "rev-insert-dead-store",
        }
    }

    pub fn from_name(name: &str) -> Option<ReversePassId> {
        ReversePassId::ALL.iter().copied().find(|p| p.name() == name)
    }

    /// The forward pass this one undoes.
    pub fn forward(self) -> PassId {
        match self {
            ReversePassId::InstExpandRem => PassId::DivMulToRem,
            ReversePassId::InstExpandShl => PassId::StrengthReduce,
            ReversePassId::InstExpandOr => PassId::AddToOr,
            ReversePassId::Reassociate => PassId::Reassociate,
            ReversePassId::SplitBlock => PassId::SimplifyCfg,
            ReversePassId::LicmSink => PassId::Licm,
            ReversePassId::Reg2Mem => PassId::Mem2Reg,
            ReversePassId::InsertDeadStore => PassId::Dse,
        }
    }

    pub fn enumerate(self, f: &Function, cap: usize) -> ReverseVariantSet {
        match self {
            ReversePassId::InstExpandRem => enumerate_rev_instexpand_rem(f, cap),
            ReversePassId::InstExpandShl => enumerate_rev_instexpand_shl(f, cap),
            ReversePassId::InstExpandOr => enumerate_rev_instexpand_or(f, cap),
            ReversePassId::Reassociate => enumerate_rev_reassociate(f, cap),
            ReversePassId::SplitBlock => enumerate_rev_split_block(f, cap),
            ReversePassId::LicmSink => enumerate_rev_licm_sink(f, cap),
            ReversePassId::Reg2Mem => enumerate_reg2mem(f, cap),
            ReversePassId::InsertDeadStore => enumerate_rev_insert_dead_store(f, cap),
        }
    }

    /// The variant at `site`, if the function has that many sites.
    pub fn variant_at(self, f: &Function, site: usize) -> Option<Function> {
        self.enumerate(f, site + 1)
            .variants
            .into_iter()
            .find(|v| v.site == site)
            .map(|v| v.function)
    }
}

impl fmt::Display for ReversePassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unknown reverse pass `{0}`")]
pub struct UnknownReversePass(pub String);

impl FromStr for ReversePassId {
    type Err = UnknownReversePass;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ReversePassId::from_name(s).ok_or_else(|| UnknownReversePass(s.to_string()))
    }
}

impl From<ReversePassId> for String {
    fn from(p: ReversePassId) -> String {
        p.name().to_string()
    }
}

impl TryFrom<String> for ReversePassId {
    type Error = UnknownReversePass;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReverseVariant {
    /// Index of the site in the enumerator's site order.
    pub site: usize,
    /// Human-readable location, e.g. "urem %r in entry".
    pub description: String,
    pub function: Function,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReverseVariantSet {
    pub pass: ReversePassId,
    pub variants: Vec<ReverseVariant>,
}

impl ReverseVariantSet {
    /// Builds variants for the first `cap` candidates that produce one.
    pub(crate) fn collect(
        pass: ReversePassId,
        cap: usize,
        candidates: impl IntoIterator<Item = Option<(String, Function)>>,
    ) -> Self {
        let variants = candidates
            .into_iter()
            .flatten()
            .take(cap)
            .enumerate()
            .map(|(site, (description, function))| ReverseVariant {
                site,
                description,
                function,
            })
            .collect();
        ReverseVariantSet { pass, variants }
    }

    pub fn is_empty(&self) -> bool {
        self.variants.is_empty()
    }

    pub fn len(&self) -> usize {
        self.variants.len()
    }
}
