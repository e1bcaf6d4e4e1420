use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use bidiropt::cost::{CostModel, EfficiencyMetric};
use bidiropt::interp::Workload;
use bidiropt::ir::Function;
use bidiropt::passes::PassId;
use bidiropt::reverse::ReversePassId;
use bidiropt::search::{FrontierPolicy, IboSettings, ReverseFrom, SearchContext, SearchLimits};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MetricName {
    #[serde(alias = "static_size")]
    StaticSize,
    #[default]
    #[serde(alias = "static_cost")]
    StaticCost,
    #[serde(alias = "dynamic_cost")]
    DynamicCost,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Json,
    Text,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    CheapFirst,
    WorstFirst,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReverseFromArg {
    Variants,
    Optimized,
}

/// Contents of a `--config` JSON file. Every key is optional.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    /// Per-opcode cost overrides, e.g. `{"udiv": 8}`.
    pub costs: BTreeMap<String, u64>,
    pub metric: Option<MetricName>,
    pub passes: Option<Vec<PassId>>,
    pub reverses: Option<Vec<ReversePassId>>,
    pub limits: Option<SearchLimits>,
    pub workload: Option<PathBuf>,
    pub format: Option<Format>,
    pub seed: Option<u64>,
    pub k: Option<usize>,
    pub frontier_policy: Option<FrontierPolicy>,
    pub reverse_from: Option<ReverseFrom>,
    pub single_variant: Option<bool>,
}

/// Flags shared by the search commands. Flags override the config file.
#[derive(Clone, Debug, Default, Args)]
pub struct SharedArgs {
    /// JSON config file.
    #[arg(long, env = "BIDIROPT_CONFIG")]
    pub config: Option<PathBuf>,
    /// Forward passes, comma-separated (`all` or `none` also accepted).
    #[arg(long)]
    pub passes: Option<String>,
    /// Reverse passes, comma-separated (`all` or `none` also accepted).
    #[arg(long)]
    pub reverses: Option<String>,
    #[arg(long, value_enum)]
    pub metric: Option<MetricName>,
    /// JSON list of argument tuples for dynamic cost.
    #[arg(long)]
    pub workload: Option<PathBuf>,
    /// Seed for generated workloads.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub budget_programs: Option<usize>,
    #[arg(long)]
    pub budget_length: Option<usize>,
    #[arg(long)]
    pub budget_size: Option<usize>,
    #[arg(long)]
    pub budget_frontier: Option<usize>,
    #[arg(long)]
    pub cap_per_pass: Option<usize>,
    #[arg(long, value_enum)]
    pub frontier_policy: Option<PolicyArg>,
    /// What later iterations reverse (`optimized` is experimental).
    #[arg(long, value_enum)]
    pub reverse_from: Option<ReverseFromArg>,
    /// Only the first site of each reverse pass.
    #[arg(long)]
    pub single_variant: bool,
}

/// The configuration a command actually ran with; echoed into reports.
#[derive(Clone, Debug, Serialize)]
pub struct Effective {
    pub costs: BTreeMap<String, u64>,
    pub metric: MetricName,
    pub passes: Vec<PassId>,
    pub reverses: Vec<ReversePassId>,
    pub limits: SearchLimits,
    pub workload: Option<PathBuf>,
    pub format: Format,
    pub seed: u64,
    pub frontier_policy: FrontierPolicy,
    pub reverse_from: ReverseFrom,
    pub single_variant: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip)]
    pub model: CostModel,
}

pub const DEFAULT_SEED: u64 = 1;

fn parse_list<T: Copy>(text: &str, all: &[T], parse: impl Fn(&str) -> Option<T>, what: &str) -> Result<Vec<T>> {
    let text = text.trim();
    match text {
        "" | "none" => return Ok(Vec::new()),
        "all" => return Ok(all.to_vec()),
        _ => {}
    }
    text.split(',')
        .map(|s| parse(s.trim()).ok_or_else(|| anyhow!("unknown {what} `{}`", s.trim())))
        .collect()
}

pub fn parse_passes(text: &str) -> Result<Vec<PassId>> {
    parse_list(text, &PassId::ALL, PassId::from_name, "pass")
}

pub fn parse_reverses(text: &str) -> Result<Vec<ReversePassId>> {
    parse_list(text, &ReversePassId::ALL, ReversePassId::from_name, "reverse pass")
}

impl SharedArgs {
    /// Merges flags over the config file. Errors are usage errors.
    pub fn resolve(&self, k: Option<usize>) -> Result<Effective> {
        let file = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
                serde_json::from_str::<ConfigFile>(&text)
                    .with_context(|| format!("parsing config {}", path.display()))?
            }
            None => ConfigFile::default(),
        };
        let model = CostModel::with_overrides(file.costs.iter().map(|(k, v)| (k.as_str(), *v)))?;
        let passes = match &self.passes {
            Some(text) => parse_passes(text)?,
            None => file.passes.unwrap_or_else(|| PassId::ALL.to_vec()),
        };
        let reverses = match &self.reverses {
            Some(text) => parse_reverses(text)?,
            None => file.reverses.unwrap_or_else(|| ReversePassId::ALL.to_vec()),
        };
        let mut limits = file.limits.unwrap_or_default();
        let overrides = [
            (self.budget_programs, &mut limits.max_programs_explored),
            (self.budget_length, &mut limits.max_sequence_length),
            (self.budget_size, &mut limits.max_instructions_per_program),
            (self.budget_frontier, &mut limits.ibo_max_frontier),
            (self.cap_per_pass, &mut limits.cap_per_pass),
        ];
        for (flag, slot) in overrides {
            if let Some(v) = flag {
                *slot = v;
            }
        }
        limits.check()?;
        let frontier_policy = match self.frontier_policy {
            Some(PolicyArg::CheapFirst) => FrontierPolicy::CheapFirst,
            Some(PolicyArg::WorstFirst) => FrontierPolicy::WorstFirst,
            Some(PolicyArg::All) => FrontierPolicy::All,
            None => file.frontier_policy.unwrap_or_default(),
        };
        let reverse_from = match self.reverse_from {
            Some(ReverseFromArg::Variants) => ReverseFrom::Variants,
            Some(ReverseFromArg::Optimized) => ReverseFrom::Optimized,
            None => file.reverse_from.unwrap_or_default(),
        };
        Ok(Effective {
            costs: model.entries().clone(),
            metric: self.metric.or(file.metric).unwrap_or_default(),
            passes,
            reverses,
            limits,
            workload: self.workload.clone().or(file.workload),
            format: self.format.or(file.format).unwrap_or_default(),
            seed: self.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            frontier_policy,
            reverse_from,
            single_variant: self.single_variant || file.single_variant.unwrap_or(false),
            k: k.or(file.k),
            model,
        })
    }
}

pub fn load_workload(path: &Path) -> Result<Workload> {
    let text = fs::read_to_string(path).with_context(|| format!("reading workload {}", path.display()))?;
    let name = path
        .file_stem()
        .map_or_else(|| "workload".into(), |s| s.to_string_lossy().into_owned());
    Ok(Workload::from_json(name, &text)?)
}

impl Effective {
    /// The workload for `f`: the configured file, or the default one.
    pub fn workload_for(&self, f: &Function) -> Result<Workload> {
        match &self.workload {
            Some(path) => load_workload(path),
            None => Ok(Workload::default_for(f, self.seed)),
        }
    }

    pub fn context(&self, f: &Function) -> Result<SearchContext> {
        let metric = match self.metric {
            MetricName::StaticSize => EfficiencyMetric::StaticSize,
            MetricName::StaticCost => EfficiencyMetric::StaticCost,
            MetricName::DynamicCost => EfficiencyMetric::DynamicCost(self.workload_for(f)?),
        };
        Ok(SearchContext {
            passes: self.passes.clone(),
            limits: self.limits.clone(),
            metric,
            model: self.model.clone(),
        })
    }

    pub fn ibo_settings(&self, k: usize) -> IboSettings {
        IboSettings {
            policy: self.frontier_policy,
            reverse_from: self.reverse_from,
            single_variant: self.single_variant,
            ..IboSettings::new(self.reverses.clone(), k)
        }
    }
}
