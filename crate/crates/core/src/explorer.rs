//! Exhaustive search over hardware configurations and fusion groupings:
//! evaluate every candidate, filter by constraints and SRAM residency, and
//! keep the lowest-energy survivor.

use rayon::prelude::*;
use serde::Serialize;

use crate::costmodel::{evaluate, evaluate_totals, CostReport, CostTotals};
use crate::error::{Error, Result};
use crate::fixed::Centi;
use crate::fusion::{
    check_feasibility, enumerate_groupings, Feasibility, FusionGrouping, GroupingMode,
};
use crate::hwmodel::{required_sram, HardwareConfig, SramSizes, TechParams};
use crate::netmodel::NetworkModel;

/// Upper bounds on each metric; `None` leaves a metric unconstrained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Constraints {
    pub max_bandwidth_bytes: Option<u64>,
    pub max_latency_cycles: Option<u64>,
    /// In 0.01 nJ units.
    pub max_energy: Option<Centi>,
    /// In 0.01 um² units.
    pub max_area: Option<Centi>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Bandwidth,
    Latency,
    Energy,
    Area,
}

/// `value > threshold` for one metric, in that metric's report units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConstraintViolation {
    pub metric: Metric,
    pub value: u64,
    pub threshold: u64,
}

/// Per-constraint outcome; `None` where the constraint is absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ConstraintFlags {
    pub bandwidth: Option<bool>,
    pub latency: Option<bool>,
    pub energy: Option<bool>,
    pub area: Option<bool>,
}

impl ConstraintFlags {
    pub fn all_pass(&self) -> bool {
        [self.bandwidth, self.latency, self.energy, self.area]
            .iter()
            .all(|f| f.unwrap_or(true))
    }
}

impl Constraints {
    pub fn flags(&self, totals: &CostTotals) -> ConstraintFlags {
        ConstraintFlags {
            bandwidth: self
                .max_bandwidth_bytes
                .map(|t| totals.bandwidth_bytes <= t),
            latency: self.max_latency_cycles.map(|t| totals.latency_cycles <= t),
            energy: self.max_energy.map(|t| totals.energy <= t),
            area: self.max_area.map(|t| totals.area <= t),
        }
    }

    pub fn violations(&self, totals: &CostTotals) -> Vec<ConstraintViolation> {
        let checks = [
            (
                Metric::Bandwidth,
                totals.bandwidth_bytes,
                self.max_bandwidth_bytes,
            ),
            (
                Metric::Latency,
                totals.latency_cycles,
                self.max_latency_cycles,
            ),
            (
                Metric::Energy,
                totals.energy.hundredths(),
                self.max_energy.map(Centi::hundredths),
            ),
            (
                Metric::Area,
                totals.area.hundredths(),
                self.max_area.map(Centi::hundredths),
            ),
        ];
        checks
            .into_iter()
            .filter_map(|(metric, value, threshold)| {
                threshold
                    .filter(|&t| value > t)
                    .map(|threshold| ConstraintViolation {
                        metric,
                        value,
                        threshold,
                    })
            })
            .collect()
    }
}

/// Empty result means every present constraint holds.
pub fn check_constraints(
    report: &CostReport,
    constraints: &Constraints,
) -> Vec<ConstraintViolation> {
    constraints.violations(&report.totals())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateRecord {
    /// Position in config-major enumeration order.
    pub index: usize,
    pub config: HardwareConfig,
    /// Index into [`DseResult::groupings`].
    pub grouping: usize,
    pub totals: CostTotals,
    pub flags: ConstraintFlags,
    pub feasibility: Feasibility,
}

impl CandidateRecord {
    pub fn passed(&self) -> bool {
        self.feasibility.is_feasible() && self.flags.all_pass()
    }

    fn rank_key(&self) -> (Centi, u64, u64, Centi, usize) {
        let t = &self.totals;
        (
            t.energy,
            t.latency_cycles,
            t.bandwidth_bytes,
            t.area,
            self.index,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BestCandidate {
    pub record: usize,
    pub report: CostReport,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DseResult {
    pub configs: Vec<HardwareConfig>,
    pub groupings: Vec<FusionGrouping>,
    pub records: Vec<CandidateRecord>,
    pub best: Option<BestCandidate>,
    pub evaluated: usize,
    pub feasible: usize,
    pub passing: usize,
}

impl DseResult {
    pub fn best_record(&self) -> Option<&CandidateRecord> {
        self.best.as_ref().map(|b| &self.records[b.record])
    }

    /// Re-scans every record: the best passes and no passer ranks lower.
    pub fn audit(&self) -> bool {
        match self.best_record() {
            None => self.records.iter().all(|r| !r.passed()),
            Some(best) => {
                best.passed()
                    && self.records.iter().filter(|r| r.passed()).all(|r| {
                        r.totals.energy >= best.totals.energy && r.rank_key() >= best.rank_key()
                    })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExploreOptions {
    /// Fixed SRAM capacities; when absent SRAM is auto-sized from the model.
    pub sram_caps: Option<SramSizes>,
    pub grouping_cap: u64,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        ExploreOptions {
            sram_caps: None,
            grouping_cap: crate::fusion::DEFAULT_GROUPING_CAP,
        }
    }
}

pub fn explore(
    model: &NetworkModel,
    configs: &[HardwareConfig],
    mode: GroupingMode,
    constraints: &Constraints,
    tech: &TechParams,
    options: &ExploreOptions,
) -> Result<DseResult> {
    if configs.is_empty() {
        return Err(Error::EmptyConfigSet);
    }
    let groupings = enumerate_groupings(model, mode, options.grouping_cap)?;
    explore_groupings(model, configs, groupings, constraints, tech, options)
}

/// Like [`explore`] over an explicit list of groupings.
pub fn explore_groupings(
    model: &NetworkModel,
    configs: &[HardwareConfig],
    groupings: Vec<FusionGrouping>,
    constraints: &Constraints,
    tech: &TechParams,
    options: &ExploreOptions,
) -> Result<DseResult> {
    if configs.is_empty() {
        return Err(Error::EmptyConfigSet);
    }
    for g in &groupings {
        g.validate_for(model)?;
    }
    tech.validate()?;
    let sram = options.sram_caps.unwrap_or_else(|| required_sram(model));
    let feasibility: Vec<Feasibility> = groupings
        .iter()
        .map(|g| check_feasibility(model, g, &sram))
        .collect();
    let per_config = groupings.len();
    let records: Vec<CandidateRecord> = (0..configs.len() * per_config)
        .into_par_iter()
        .map(|index| {
            let config = configs[index / per_config];
            let grouping = index % per_config;
            let totals = evaluate_totals(model, &groupings[grouping], &config, tech, &sram);
            CandidateRecord {
                index,
                config,
                grouping,
                totals,
                flags: constraints.flags(&totals),
                feasibility: feasibility[grouping],
            }
        })
        .collect();

    let best_idx = records
        .iter()
        .filter(|r| r.passed())
        .min_by_key(|r| r.rank_key())
        .map(|r| r.index);
    let best = best_idx
        .map(|i| -> Result<BestCandidate> {
            let r = &records[i];
            let report = evaluate(model, &groupings[r.grouping], &r.config, tech, Some(&sram))?;
            Ok(BestCandidate { record: i, report })
        })
        .transpose()?;
    let result = DseResult {
        configs: configs.to_vec(),
        evaluated: records.len(),
        feasible: records
            .iter()
            .filter(|r| r.feasibility.is_feasible())
            .count(),
        passing: records.iter().filter(|r| r.passed()).count(),
        groupings,
        records,
        best,
    };
    assert!(
        result.audit(),
        "explorer selected a candidate that does not minimise energy"
    );
    Ok(result)
}

/// Every `(f1, f2, f3, f4)` drawn from `values` for `arch`; vectorwise
/// configurations collapse `f3` to 3. With `uniform`, only `f1 = f2 = f3 = f4`.
pub fn config_grid(
    arch: crate::hwmodel::Arch,
    values: &[u64],
    uniform: bool,
) -> Result<Vec<HardwareConfig>> {
    let mut out = Vec::new();
    if uniform {
        for &f in values {
            out.push(HardwareConfig::new(arch, f, f, f, f)?);
        }
    } else {
        for &f1 in values {
            for &f2 in values {
                for &f3 in values {
                    for &f4 in values {
                        out.push(HardwareConfig::new(arch, f1, f2, f3, f4)?);
                    }
                }
            }
        }
    }
    let mut seen = std::collections::HashSet::new();
    out.retain(|c| seen.insert(*c));
    Ok(out)
}
