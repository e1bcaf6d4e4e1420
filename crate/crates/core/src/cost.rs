//! The efficiency function as a family of comparators: static size, static
//! cost under a per-opcode table, and dynamic cost over a workload.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interp::{dynamic_cost_total, InterpError, Workload};
use crate::ir::{canonical_text, Function, Opcode, Terminator};

/// Cost units per instruction kind. Keys are opcode names plus `phi`,
/// `br`, `condbr` and `ret`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostModel {
    costs: BTreeMap<String, u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum CostError {
    #[error("unknown cost key `{0}`")]
    UnknownKey(String),
    #[error("cost table must rank udiv/urem above mul above shifts (udiv={udiv}, urem={urem}, mul={mul}, shl={shl}, lshr={lshr})")]
    Ordering {
        udiv: u64,
        urem: u64,
        mul: u64,
        shl: u64,
        lshr: u64,
    },
    #[error(transparent)]
    Workload(#[from] InterpError),
}

const TERMINATOR_KEYS: [&str; 4] = ["phi", "br", "condbr", "ret"];

impl Default for CostModel {
    fn default() -> Self {
        let mut costs = BTreeMap::new();
        for op in Opcode::ALL {
            let c = match op {
                Opcode::UDiv | Opcode::URem => 4,
                Opcode::Mul => 3,
                Opcode::Load | Opcode::Store => 2,
                Opcode::Alloca => 0,
                _ => 1,
            };
            costs.insert(op.name().to_string(), c);
        }
        costs.insert("phi".into(), 0);
        costs.insert("br".into(), 1);
        costs.insert("condbr".into(), 1);
        costs.insert("ret".into(), 1);
        CostModel { costs }
    }
}

impl CostModel {
    /// The default table with `overrides` applied. `icmp.*` sets all four
    /// comparisons at once.
    pub fn with_overrides<'a>(overrides: impl IntoIterator<Item = (&'a str, u64)>) -> Result<Self, CostError> {
        let mut m = CostModel::default();
        for (k, v) in overrides {
            if k == "icmp.*" {
                for op in Opcode::ALL.iter().filter(|o| o.is_icmp()) {
                    m.costs.insert(op.name().to_string(), v);
                }
            } else if m.costs.contains_key(k) {
                m.costs.insert(k.to_string(), v);
            } else {
                return Err(CostError::UnknownKey(k.to_string()));
            }
        }
        m.check()?;
        Ok(m)
    }

    fn check(&self) -> Result<(), CostError> {
        let g = |k: &str| self.costs[k];
        let (udiv, urem, mul, shl, lshr) = (g("udiv"), g("urem"), g("mul"), g("shl"), g("lshr"));
        if udiv.min(urem) > mul && mul > shl.max(lshr) {
            Ok(())
        } else {
            Err(CostError::Ordering {
                udiv,
                urem,
                mul,
                shl,
                lshr,
            })
        }
    }

    pub fn opcode(&self, op: Opcode) -> u64 {
        self.costs[op.name()]
    }

    pub fn phi(&self) -> u64 {
        self.costs["phi"]
    }

    pub fn terminator(&self, t: &Terminator) -> u64 {
        match t {
            Terminator::Ret(_) => self.costs["ret"],
            Terminator::Br(_) => self.costs["br"],
            Terminator::CondBr { .. } => self.costs["condbr"],
        }
    }

    pub fn entries(&self) -> &BTreeMap<String, u64> {
        &self.costs
    }

    pub fn keys() -> impl Iterator<Item = &'static str> {
        Opcode::ALL.iter().map(|o| o.name()).chain(TERMINATOR_KEYS)
    }
}

/// Instructions including phis and terminators.
pub fn static_size(f: &Function) -> usize {
    f.instruction_count()
}

pub fn static_cost(f: &Function, m: &CostModel) -> u64 {
    f.blocks
        .iter()
        .map(|b| {
            b.phis.len() as u64 * m.phi()
                + b.body.iter().map(|i| m.opcode(i.opcode)).sum::<u64>()
                + m.terminator(&b.term)
        })
        .sum()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "workload")]
pub enum EfficiencyMetric {
    StaticSize,
    StaticCost,
    DynamicCost(Workload),
}

impl EfficiencyMetric {
    pub fn name(&self) -> &'static str {
        match self {
            EfficiencyMetric::StaticSize => "static_size",
            EfficiencyMetric::StaticCost => "static_cost",
            EfficiencyMetric::DynamicCost(_) => "dynamic_cost",
        }
    }

    /// The metric's value for `f`; lower is better.
    pub fn measure(&self, f: &Function, m: &CostModel) -> Result<u64, CostError> {
        Ok(match self {
            EfficiencyMetric::StaticSize => static_size(f) as u64,
            EfficiencyMetric::StaticCost => static_cost(f, m),
            EfficiencyMetric::DynamicCost(w) => dynamic_cost_total(f, w, m)?,
        })
    }

    pub fn workload(&self) -> Option<&Workload> {
        match self {
            EfficiencyMetric::DynamicCost(w) => Some(w),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Efficiency {
    MoreEfficient,
    LessEfficient,
    Tie,
}

/// How `f1` compares to `f2` under `metric`.
pub fn compare_efficiency(
    f1: &Function,
    f2: &Function,
    metric: &EfficiencyMetric,
    m: &CostModel,
) -> Result<Efficiency, CostError> {
    let (a, b) = (metric.measure(f1, m)?, metric.measure(f2, m)?);
    Ok(match a.cmp(&b) {
        Ordering::Less => Efficiency::MoreEfficient,
        Ordering::Greater => Efficiency::LessEfficient,
        Ordering::Equal => Efficiency::Tie,
    })
}

/// Total order used for best-selection: lower is better, canonical text
/// breaks the last ties.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RankKey {
    pub static_cost: u64,
    pub static_size: usize,
    pub dynamic_cost: Option<u64>,
    pub canonical: String,
}

impl RankKey {
    pub fn cost_size(&self) -> [u64; 2] {
        [self.static_cost, self.static_size as u64]
    }
}

pub fn rank_key(f: &Function, m: &CostModel, w: Option<&Workload>) -> Result<RankKey, CostError> {
    Ok(RankKey {
        static_cost: static_cost(f, m),
        static_size: static_size(f),
        dynamic_cost: w.map(|w| dynamic_cost_total(f, w, m)).transpose()?,
        canonical: canonical_text(f),
    })
}
